#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "netsample/routing.hpp"
#include "netsample/sampling.hpp"

namespace netsample {

/// Per-link sampling capacity: sum over flows of u(l, j) <= d(l), and every rate <= u_max.
struct LinkBudget {
    Eigen::VectorXd d;
    double u_max = 1.0;

    static LinkBudget uniform(std::size_t n_links, double capacity, double u_max = 1.0);
    /// Throws UsageError unless d has one entry in (0, 1] per link and u_max is in (0, 1].
    void validate(const RoutingMatrix& routing) const;
};

/// Finite stand-in for the infinite error of a flow nobody samples: x_hat * scale.
struct CostSurrogate {
    double unobserved_penalty_scale = 1e4;
};

/// Cost contribution of one flow given the precision sum_k u_k/(1-u_k) over its path.
/// `exact` means some link samples it at rate 1.
double flow_cost(double x_hat, double precision, bool exact, const CostSurrogate& surrogate);

/// Total sampling variance sum_j x_hat(j) * combined_variance_coeff(path rates of j),
/// with unobserved flows charged x_hat(j) * unobserved_penalty_scale.
double instantaneous_cost(const FlowVolumes& x_hat, const SamplingPlan& plan, const RoutingMatrix& routing,
                          const CostSurrogate& surrogate = {});

/// Even split: u(l, j) = min(u_max, d(l) / |flows on l|).
SamplingPlan naive_allocation(const RoutingMatrix& routing, const LinkBudget& budget);

/// Every rate in [0, u_max] and every link sum within d(l) + 1e-9.
bool feasible(const SamplingPlan& plan, const RoutingMatrix& routing, const LinkBudget& budget);

/// Number of vertices link_vertices would return, without building them.
std::size_t count_link_vertices(std::size_t n_flows, double capacity, double u_max);

/**
 * Vertices of {v in [0, u_max]^n : sum v <= d(l)} for the n flows on `link`
 * (coordinates follow flows_on_link order). These are the 0/u_max points within
 * budget plus, when d(l) is not a multiple of u_max, the points with k = floor(d/u_max)
 * coordinates at u_max and one at the residual.
 */
std::vector<std::vector<double>> link_vertices(std::size_t link, const RoutingMatrix& routing,
                                               const LinkBudget& budget);

/// True when every link's rates coincide (within 1e-12) with one of its vertices.
bool is_product_vertex(const SamplingPlan& plan, const RoutingMatrix& routing, const LinkBudget& budget);

/// Row-major (link, flow) lexicographic order on rate matrices.
bool lexicographically_less(const SamplingPlan& a, const SamplingPlan& b);

struct Solution {
    SamplingPlan plan;
    double cost = 0.0;
    std::size_t evaluations = 0;
    std::size_t sweeps = 0;
};

struct ExactOptions {
    std::size_t max_candidates = 1'000'000;
};

/// Minimum over the product of per-link vertex sets; ties go to the
/// lexicographically smallest plan. Throws SolverSizeError above the cap.
Solution solve_exact(const FlowVolumes& x_hat, const RoutingMatrix& routing, const LinkBudget& budget,
                     const CostSurrogate& surrogate = {}, const ExactOptions& options = {});

struct HeuristicOptions {
    std::size_t restarts = 8;
    std::uint64_t seed = 0;
    std::size_t max_sweeps = 1000;
};

/// Link-wise best response over vertex sets from `restarts` random product vertices.
/// `sweeps` reports the longest descent.
Solution solve_heuristic(const FlowVolumes& x_hat, const RoutingMatrix& routing, const LinkBudget& budget,
                         const CostSurrogate& surrogate = {}, const HeuristicOptions& options = {});

struct WaterfillOptions {
    std::size_t max_sweeps = 500;
    std::size_t bisection_steps = 200;
};

/**
 * Link-wise best response over the full per-link polytope, starting from the
 * even split. With the other links fixed, flow j's cost on link l is the
 * linear-fractional x(1-u) / (S + u(1-S)), S being its precision elsewhere;
 * it is convex in u when S < 1, and the stationarity condition
 * S + u(1-S) = sqrt(x / lambda) gives a closed-form rate for each multiplier.
 * The per-link step bisects on the multiplier and keeps the move only if it
 * lowers the cost, so the descent is monotone.
 */
Solution solve_waterfill(const FlowVolumes& x_hat, const RoutingMatrix& routing, const LinkBudget& budget,
                         const CostSurrogate& surrogate = {}, const WaterfillOptions& options = {});

// Plan CSV: header `link,flow,rate`, nonzero rates only, link-major order.
void write_plan_csv(std::ostream& out, const SamplingPlan& plan);
void write_plan_csv(const std::filesystem::path& path, const SamplingPlan& plan);
SamplingPlan read_plan_csv(std::istream& in, const RoutingMatrix& routing);

}  // namespace netsample
