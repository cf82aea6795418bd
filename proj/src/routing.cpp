#include "netsample/routing.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <string>

#include "netsample/csv.hpp"
#include "netsample/errors.hpp"
#include "netsample/rng.hpp"

namespace netsample {

RoutingMatrix::RoutingMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    if (entries_.rows() == 0 || entries_.cols() == 0) {
        throw UsageError("routing matrix needs at least one link and one flow");
    }
    links_of_flow_.resize(n_flows());
    flows_on_link_.resize(n_links());
    for (Eigen::Index l = 0; l < entries_.rows(); ++l) {
        for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
            const double r = entries_(l, j);
            if (r != 0.0 && r != 1.0) {
                throw UsageError("routing entry (" + std::to_string(l) + "," + std::to_string(j) + ") is not 0 or 1");
            }
            if (r == 1.0) {
                links_of_flow_[j].push_back(static_cast<std::size_t>(l));
                flows_on_link_[l].push_back(static_cast<std::size_t>(j));
            }
        }
    }
    for (std::size_t j = 0; j < n_flows(); ++j) {
        if (links_of_flow_[j].empty()) throw UsageError("flow " + std::to_string(j) + " traverses no link");
    }
}

const std::vector<std::size_t>& RoutingMatrix::links_of_flow(std::size_t flow) const {
    if (flow >= n_flows()) throw UsageError("flow index " + std::to_string(flow) + " out of range");
    return links_of_flow_[flow];
}

const std::vector<std::size_t>& RoutingMatrix::flows_on_link(std::size_t link) const {
    if (link >= n_links()) throw UsageError("link index " + std::to_string(link) + " out of range");
    return flows_on_link_[link];
}

LinkLoads RoutingMatrix::link_loads(const FlowVolumes& x) const {
    if (static_cast<std::size_t>(x.size()) != n_flows()) {
        throw UsageError("flow vector has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(n_flows()));
    }
    return entries_ * x;
}

RoutingMatrix read_routing_csv(std::istream& in) {
    std::string line;
    if (!csv::next_line(in, line)) throw UsageError("routing CSV is empty");
    const auto header = csv::split(line);
    if (header.size() < 2 || header[0] != "link") throw UsageError("routing CSV header must start with 'link'");
    const std::size_t n_flows = header.size() - 1;
    for (std::size_t j = 0; j < n_flows; ++j) {
        if (header[j + 1] != "flow_" + std::to_string(j)) {
            throw UsageError("routing CSV header column " + std::to_string(j + 1) + " must be flow_" +
                             std::to_string(j));
        }
    }
    std::vector<std::vector<double>> rows;
    while (csv::next_line(in, line)) {
        const auto fields = csv::split(line);
        if (fields.size() != header.size()) {
            throw UsageError("routing CSV row " + std::to_string(rows.size()) + " has " +
                             std::to_string(fields.size()) + " fields, expected " + std::to_string(header.size()));
        }
        if (fields[0] != std::to_string(rows.size())) {
            throw UsageError("routing CSV rows must be numbered 0..L-1 in order, got '" + fields[0] + "'");
        }
        std::vector<double> row(n_flows);
        for (std::size_t j = 0; j < n_flows; ++j) {
            const auto& cell = fields[j + 1];
            if (cell == "0") {
                row[j] = 0.0;
            } else if (cell == "1") {
                row[j] = 1.0;
            } else {
                throw UsageError("routing CSV cell '" + cell + "' at link " + std::to_string(rows.size()) +
                                 " is not 0 or 1");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw UsageError("routing CSV has no link rows");
    Eigen::MatrixXd entries(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_flows));
    for (std::size_t l = 0; l < rows.size(); ++l) {
        for (std::size_t j = 0; j < n_flows; ++j) entries(l, j) = rows[l][j];
    }
    return RoutingMatrix(std::move(entries));
}

RoutingMatrix read_routing_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open routing CSV " + path.string());
    return read_routing_csv(in);
}

void write_routing_csv(std::ostream& out, const RoutingMatrix& routing) {
    out << "link";
    for (std::size_t j = 0; j < routing.n_flows(); ++j) out << ",flow_" << j;
    out << '\n';
    for (std::size_t l = 0; l < routing.n_links(); ++l) {
        out << l;
        for (std::size_t j = 0; j < routing.n_flows(); ++j) out << (routing.uses(l, j) ? ",1" : ",0");
        out << '\n';
    }
}

void write_routing_csv(const std::filesystem::path& path, const RoutingMatrix& routing) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write routing CSV " + path.string());
    write_routing_csv(out, routing);
}

Topology backbone_topology() {
    // 0 Seattle, 1 Los Angeles, 2 Salt Lake City, 3 Houston, 4 Kansas City,
    // 5 Chicago, 6 Atlanta, 7 Washington, 8 New York
    return Topology{9,
                    {{0, 2}, {0, 1}, {1, 2}, {1, 3}, {2, 4}, {3, 4}, {3, 6}, {4, 5}, {5, 6}, {5, 8}, {6, 7},
                     {7, 8}, {5, 7}}};
}

Topology ring_chord_topology(std::size_t n_nodes, std::size_t n_links, std::uint64_t seed) {
    if (n_nodes < 2) throw UsageError("topology needs at least 2 nodes");
    if (n_links % 2 != 0) throw UsageError("link count must be even (links are bidirectional pairs)");
    const std::size_t ring_edges = n_nodes == 2 ? 1 : n_nodes;
    const std::size_t max_edges = n_nodes * (n_nodes - 1) / 2;
    const std::size_t n_edges = n_links / 2;
    if (n_edges < ring_edges || n_edges > max_edges) {
        throw UsageError("link count " + std::to_string(n_links) + " must be between " +
                         std::to_string(2 * ring_edges) + " and " + std::to_string(2 * max_edges) + " for " +
                         std::to_string(n_nodes) + " nodes");
    }
    Topology topo{n_nodes, {}};
    std::set<std::pair<std::size_t, std::size_t>> present;
    for (std::size_t i = 0; i < ring_edges; ++i) {
        const auto a = i, b = (i + 1) % n_nodes;
        topo.edges.emplace_back(a, b);
        present.emplace(std::min(a, b), std::max(a, b));
    }
    std::vector<std::pair<std::size_t, std::size_t>> chords;
    for (std::size_t a = 0; a < n_nodes; ++a) {
        for (std::size_t b = a + 1; b < n_nodes; ++b) {
            if (!present.count({a, b})) chords.emplace_back(a, b);
        }
    }
    auto rng = make_engine(seed, {stream::kModel, 0x70});
    std::shuffle(chords.begin(), chords.end(), rng);
    chords.resize(n_edges - ring_edges);
    std::sort(chords.begin(), chords.end());
    topo.edges.insert(topo.edges.end(), chords.begin(), chords.end());
    return topo;
}

RoutingMatrix route_all_pairs(const Topology& topology, std::size_t n_flows) {
    const std::size_t n = topology.n_nodes;
    if (n_flows == 0 || n_flows > n * (n - 1)) {
        throw UsageError("flow count " + std::to_string(n_flows) + " must be in 1.." + std::to_string(n * (n - 1)));
    }
    // adjacency: neighbour -> directed link id
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
    for (std::size_t e = 0; e < topology.edges.size(); ++e) {
        const auto [a, b] = topology.edges[e];
        if (a >= n || b >= n || a == b) throw UsageError("bad edge " + std::to_string(e));
        adj[a].emplace_back(b, 2 * e);
        adj[b].emplace_back(a, 2 * e + 1);
    }
    for (auto& nb : adj) std::sort(nb.begin(), nb.end());

    Eigen::MatrixXd entries =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * topology.edges.size()), static_cast<Eigen::Index>(n_flows));
    std::size_t flow = 0;
    for (std::size_t src = 0; src < n && flow < n_flows; ++src) {
        // BFS tree from src; first discovery wins, neighbours in ascending order.
        std::vector<std::ptrdiff_t> parent(n, -1);
        std::vector<std::size_t> via(n, 0);
        std::vector<bool> seen(n, false);
        std::queue<std::size_t> frontier;
        seen[src] = true;
        frontier.push(src);
        while (!frontier.empty()) {
            const auto v = frontier.front();
            frontier.pop();
            for (const auto& [w, link] : adj[v]) {
                if (seen[w]) continue;
                seen[w] = true;
                parent[w] = static_cast<std::ptrdiff_t>(v);
                via[w] = link;
                frontier.push(w);
            }
        }
        for (std::size_t dst = 0; dst < n && flow < n_flows; ++dst) {
            if (dst == src) continue;
            if (!seen[dst]) throw UsageError("topology is disconnected");
            for (auto v = dst; v != src; v = static_cast<std::size_t>(parent[v])) {
                entries(static_cast<Eigen::Index>(via[v]), static_cast<Eigen::Index>(flow)) = 1.0;
            }
            ++flow;
        }
    }
    return RoutingMatrix(std::move(entries));
}

RoutingMatrix synthetic_routing(std::size_t n_nodes, std::size_t n_links, std::size_t n_flows, std::uint64_t seed) {
    if (n_nodes == 9 && n_links == 26) return route_all_pairs(backbone_topology(), n_flows);
    return route_all_pairs(ring_chord_topology(n_nodes, n_links, seed), n_flows);
}

}  // namespace netsample
