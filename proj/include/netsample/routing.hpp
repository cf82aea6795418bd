#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace netsample {

/// Per-flow traffic volumes (packets per slot), length J.
using FlowVolumes = Eigen::VectorXd;
/// Per-link traffic volumes (packets per slot), length L.
using LinkLoads = Eigen::VectorXd;

/**
 * Binary L x J incidence of links on flow paths.
 *
 * Every flow uses at least one link. A link may carry no flows; such links are
 * kept so link indices line up with the topology, but they are ignored by the
 * allocation code. Immutable once built.
 */
class RoutingMatrix {
  public:
    /// Throws UsageError unless every entry is 0 or 1 and every column has a 1.
    explicit RoutingMatrix(Eigen::MatrixXd entries);

    std::size_t n_links() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    std::size_t n_flows() const noexcept { return static_cast<std::size_t>(entries_.cols()); }

    bool uses(std::size_t link, std::size_t flow) const { return entries_(link, flow) != 0.0; }
    const Eigen::MatrixXd& entries() const noexcept { return entries_; }

    /// Links on flow `flow`'s path, ascending. Never empty.
    const std::vector<std::size_t>& links_of_flow(std::size_t flow) const;
    /// Flows routed over `link`, ascending. Empty for unused links.
    const std::vector<std::size_t>& flows_on_link(std::size_t link) const;

    /// y = R x.
    LinkLoads link_loads(const FlowVolumes& x) const;

    friend bool operator==(const RoutingMatrix& a, const RoutingMatrix& b) { return a.entries_ == b.entries_; }

  private:
    Eigen::MatrixXd entries_;
    std::vector<std::vector<std::size_t>> links_of_flow_;
    std::vector<std::vector<std::size_t>> flows_on_link_;
};

// CSV: header `link,flow_0,...,flow_{J-1}`, one 0/1 row per link.
RoutingMatrix read_routing_csv(std::istream& in);
RoutingMatrix read_routing_csv(const std::filesystem::path& path);
void write_routing_csv(std::ostream& out, const RoutingMatrix& routing);
void write_routing_csv(const std::filesystem::path& path, const RoutingMatrix& routing);

/// Undirected edge list of a node graph; each edge becomes two directed links.
struct Topology {
    std::size_t n_nodes = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
};

/// Nine-node US research backbone with 13 bidirectional spans (26 directed links).
Topology backbone_topology();

/// Ring over `n_nodes` plus seeded chords until `n_links / 2` undirected edges exist.
/// `n_links` must be even and at least 2 * n_nodes (ring) and at most n(n-1).
Topology ring_chord_topology(std::size_t n_nodes, std::size_t n_links, std::uint64_t seed);

/**
 * Routes the first `n_flows` ordered node pairs (source-major order) over
 * minimum-hop paths, ties broken toward the lowest-numbered neighbour.
 * Link 2e is edge e traversed first->second, link 2e+1 the reverse.
 */
RoutingMatrix route_all_pairs(const Topology& topology, std::size_t n_flows);

/// The default synthetic routing for the given dimensions: the backbone for
/// 9 nodes / 26 links, a ring-with-chords graph otherwise.
RoutingMatrix synthetic_routing(std::size_t n_nodes, std::size_t n_links, std::size_t n_flows, std::uint64_t seed);

}  // namespace netsample
