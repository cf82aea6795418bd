#include "netsample/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>

#include "netsample/csv.hpp"
#include "netsample/errors.hpp"
#include "netsample/rng.hpp"

namespace netsample {

namespace {

constexpr double kFeasibilityTol = 1e-9;
constexpr double kVertexTol = 1e-12;
constexpr double kTieTol = 1e-12;

std::size_t saturating_mul(std::size_t a, std::size_t b) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) return std::numeric_limits<std::size_t>::max();
    return a * b;
}

std::size_t saturating_add(std::size_t a, std::size_t b) {
    return b > std::numeric_limits<std::size_t>::max() - a ? std::numeric_limits<std::size_t>::max() : a + b;
}

std::size_t choose(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    // Multiplicative formula in long double to dodge intermediate overflow.
    long double r = 1.0L;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (r >= static_cast<long double>(std::numeric_limits<std::size_t>::max())) {
        return std::numeric_limits<std::size_t>::max();
    }
    return static_cast<std::size_t>(std::llround(r));
}

// Largest k with k * u_max <= capacity (within tolerance), capped at n.
std::size_t full_slots(std::size_t n, double capacity, double u_max) {
    const double k = std::floor((capacity + kVertexTol) / u_max);
    return k >= static_cast<double>(n) ? n : static_cast<std::size_t>(k);
}

bool has_residual(std::size_t n, double capacity, double u_max, std::size_t k) {
    return k < n && capacity - static_cast<double>(k) * u_max > kVertexTol;
}

// Calls fn(indices) for every k-subset of {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        fn(idx);
        if (k == 0) return;
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t m = i; m < k; ++m) idx[m] = idx[m - 1] + 1;
    }
}

double odds(double u) { return u / (1.0 - u); }

// Precision contributed to flow j by every link of its path except `skip`.
struct PathPrecision {
    double precision = 0.0;
    bool exact = false;
};

PathPrecision precision_excluding(const SamplingPlan& plan, const RoutingMatrix& routing, std::size_t flow,
                                  std::size_t skip) {
    PathPrecision p;
    for (auto l : routing.links_of_flow(flow)) {
        if (l == skip) continue;
        const double u = plan.rate(l, flow);
        if (u == 1.0) {
            p.exact = true;
        } else if (u > 0.0) {
            p.precision += odds(u);
        }
    }
    return p;
}

// Cost of the flows on `link` if their rates there were `rates`.
double link_local_cost(const std::vector<double>& rates, const std::vector<std::size_t>& flows,
                       const std::vector<PathPrecision>& elsewhere, const FlowVolumes& x_hat,
                       const CostSurrogate& surrogate) {
    double total = 0.0;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const double u = rates[i];
        const bool exact = elsewhere[i].exact || u == 1.0;
        const double precision = elsewhere[i].precision + (u > 0.0 && u < 1.0 ? odds(u) : 0.0);
        total += flow_cost(x_hat(static_cast<Eigen::Index>(flows[i])), precision, exact, surrogate);
    }
    return total;
}

void assign_link(SamplingPlan& plan, const RoutingMatrix& routing, std::size_t link, const std::vector<double>& rates) {
    const auto& flows = routing.flows_on_link(link);
    for (std::size_t i = 0; i < flows.size(); ++i) plan.set(routing, link, flows[i], rates[i]);
}

std::vector<double> link_rates(const SamplingPlan& plan, const RoutingMatrix& routing, std::size_t link) {
    std::vector<double> rates;
    for (auto j : routing.flows_on_link(link)) rates.push_back(plan.rate(link, j));
    return rates;
}

bool improves(double candidate, double incumbent) {
    if (std::isinf(incumbent)) return candidate < incumbent;
    return candidate < incumbent - kTieTol * std::max(1.0, std::abs(incumbent));
}

bool ties(double a, double b) { return std::abs(a - b) <= kTieTol * std::max({1.0, std::abs(a), std::abs(b)}); }

void check_inputs(const FlowVolumes& x_hat, const RoutingMatrix& routing, const LinkBudget& budget,
                  const CostSurrogate& surrogate) {
    budget.validate(routing);
    if (static_cast<std::size_t>(x_hat.size()) != routing.n_flows()) {
        throw UsageError("volume estimate length does not match the flow count");
    }
    if ((x_hat.array() < 0.0).any() || !x_hat.allFinite()) throw UsageError("volume estimates must be >= 0");
    if (!(surrogate.unobserved_penalty_scale >= 1.0)) throw UsageError("unobserved penalty scale must be >= 1");
}

std::vector<std::size_t> busy_links(const RoutingMatrix& routing) {
    std::vector<std::size_t> links;
    for (std::size_t l = 0; l < routing.n_links(); ++l) {
        if (!routing.flows_on_link(l).empty()) links.push_back(l);
    }
    return links;
}

}  // namespace

LinkBudget LinkBudget::uniform(std::size_t n_links, double capacity, double u_max) {
    return LinkBudget{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_links), capacity), u_max};
}

void LinkBudget::validate(const RoutingMatrix& routing) const {
    if (static_cast<std::size_t>(d.size()) != routing.n_links()) {
        throw UsageError("budget has " + std::to_string(d.size()) + " entries for " +
                         std::to_string(routing.n_links()) + " links");
    }
    if (!(u_max > 0.0 && u_max <= 1.0)) throw UsageError("u_max must be in (0, 1]");
    for (Eigen::Index l = 0; l < d.size(); ++l) {
        if (!(d(l) > 0.0 && d(l) <= 1.0)) throw UsageError("budget of link " + std::to_string(l) + " must be in (0, 1]");
    }
}

double flow_cost(double x_hat, double precision, bool exact, const CostSurrogate& surrogate) {
    if (exact) return 0.0;
    if (precision <= 0.0) return x_hat * surrogate.unobserved_penalty_scale;
    return x_hat * (1.0 / precision);
}

double instantaneous_cost(const FlowVolumes& x_hat, const SamplingPlan& plan, const RoutingMatrix& routing,
                          const CostSurrogate& surrogate) {
    if (static_cast<std::size_t>(x_hat.size()) != routing.n_flows() || plan.n_flows() != routing.n_flows()) {
        throw UsageError("instantaneous_cost: dimensions disagree");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < routing.n_flows(); ++j) {
        const double x = x_hat(static_cast<Eigen::Index>(j));
        if (x < 0.0) throw UsageError("instantaneous_cost: negative volume estimate");
        const double coeff = combined_variance_coeff(plan.path_rates(routing, j));
        total += std::isinf(coeff) ? x * surrogate.unobserved_penalty_scale : x * coeff;
    }
    return total;
}

SamplingPlan naive_allocation(const RoutingMatrix& routing, const LinkBudget& budget) {
    budget.validate(routing);
    SamplingPlan plan(routing);
    for (std::size_t l = 0; l < routing.n_links(); ++l) {
        const auto& flows = routing.flows_on_link(l);
        if (flows.empty()) continue;
        const double share = std::min(budget.u_max, budget.d(static_cast<Eigen::Index>(l)) /
                                                        static_cast<double>(flows.size()));
        for (auto j : flows) plan.set(routing, l, j, share);
    }
    return plan;
}

bool feasible(const SamplingPlan& plan, const RoutingMatrix& routing, const LinkBudget& budget) {
    if (plan.n_links() != routing.n_links() || plan.n_flows() != routing.n_flows()) return false;
    if (static_cast<std::size_t>(budget.d.size()) != routing.n_links()) return false;
    for (std::size_t l = 0; l < routing.n_links(); ++l) {
        double used = 0.0;
        for (std::size_t j = 0; j < routing.n_flows(); ++j) {
            const double u = plan.rate(l, j);
            if (u < 0.0 || u > budget.u_max) return false;
            if (u != 0.0 && !routing.uses(l, j)) return false;
            used += u;
        }
        if (used > budget.d(static_cast<Eigen::Index>(l)) + kFeasibilityTol) return false;
    }
    return true;
}

std::size_t count_link_vertices(std::size_t n_flows, double capacity, double u_max) {
    const auto k = full_slots(n_flows, capacity, u_max);
    std::size_t total = 0;
    for (std::size_t i = 0; i <= k; ++i) total = saturating_add(total, choose(n_flows, i));
    if (has_residual(n_flows, capacity, u_max, k)) {
        total = saturating_add(total, saturating_mul(choose(n_flows, k), n_flows - k));
    }
    return total;
}

std::vector<std::vector<double>> link_vertices(std::size_t link, const RoutingMatrix& routing,
                                               const LinkBudget& budget) {
    budget.validate(routing);
    const std::size_t n = routing.flows_on_link(link).size();
    if (n == 0) throw UsageError("link " + std::to_string(link) + " carries no flows");
    const double capacity = budget.d(static_cast<Eigen::Index>(link));
    const double cap = budget.u_max;
    const auto k_full = full_slots(n, capacity, cap);

    std::vector<std::vector<double>> vertices;
    for (std::size_t k = 0; k <= k_full; ++k) {
        for_each_subset(n, k, [&](const std::vector<std::size_t>& at_cap) {
            std::vector<double> v(n, 0.0);
            for (auto i : at_cap) v[i] = cap;
            vertices.push_back(std::move(v));
        });
    }
    if (has_residual(n, capacity, cap, k_full)) {
        const double residual = capacity - static_cast<double>(k_full) * cap;
        for_each_subset(n, k_full, [&](const std::vector<std::size_t>& at_cap) {
            std::vector<double> base(n, 0.0);
            for (auto i : at_cap) base[i] = cap;
            for (std::size_t i = 0; i < n; ++i) {
                if (base[i] != 0.0) continue;
                auto v = base;
                v[i] = residual;
                vertices.push_back(std::move(v));
            }
        });
    }
    return vertices;
}

bool is_product_vertex(const SamplingPlan& plan, const RoutingMatrix& routing, const LinkBudget& budget) {
    if (!feasible(plan, routing, budget)) return false;
    for (auto l : busy_links(routing)) {
        const auto rates = link_rates(plan, routing, l);
        const auto vertices = link_vertices(l, routing, budget);
        const bool found = std::any_of(vertices.begin(), vertices.end(), [&](const std::vector<double>& v) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (std::abs(v[i] - rates[i]) > kVertexTol) return false;
            }
            return true;
        });
        if (!found) return false;
    }
    return true;
}

bool lexicographically_less(const SamplingPlan& a, const SamplingPlan& b) {
    for (std::size_t l = 0; l < a.n_links(); ++l) {
        for (std::size_t j = 0; j < a.n_flows(); ++j) {
            if (a.rate(l, j) != b.rate(l, j)) return a.rate(l, j) < b.rate(l, j);
        }
    }
    return false;
}

Solution solve_exact(const FlowVolumes& x_hat, const RoutingMatrix& routing, const LinkBudget& budget,
                     const CostSurrogate& surrogate, const ExactOptions& options) {
    check_inputs(x_hat, routing, budget, surrogate);
    const auto links = busy_links(routing);

    std::size_t product = 1;
    for (auto l : links) {
        product = saturating_mul(product, count_link_vertices(routing.flows_on_link(l).size(),
                                                              budget.d(static_cast<Eigen::Index>(l)), budget.u_max));
    }
    if (product > options.max_candidates) {
        throw SolverSizeError("exact solver would enumerate " +
                              (product == std::numeric_limits<std::size_t>::max() ? std::string("more than 2^64")
                                                                                   : std::to_string(product)) +
                              " product vertices (cap " + std::to_string(options.max_candidates) +
                              "); use the heuristic or waterfill solver");
    }

    std::vector<std::vector<std::vector<double>>> choices;
    for (auto l : links) choices.push_back(link_vertices(l, routing, budget));

    SamplingPlan plan(routing);
    std::vector<std::size_t> odometer(links.size(), 0);
    for (std::size_t i = 0; i < links.size(); ++i) assign_link(plan, routing, links[i], choices[i][0]);

    Solution best{plan, std::numeric_limits<double>::infinity(), 0, 0};
    while (true) {
        const double cost = instantaneous_cost(x_hat, plan, routing, surrogate);
        ++best.evaluations;
        if (improves(cost, best.cost) || (ties(cost, best.cost) && lexicographically_less(plan, best.plan))) {
            best.plan = plan;
            best.cost = cost;
        }
        std::size_t i = 0;
        for (; i < odometer.size(); ++i) {
            if (++odometer[i] < choices[i].size()) {
                assign_link(plan, routing, links[i], choices[i][odometer[i]]);
                break;
            }
            odometer[i] = 0;
            assign_link(plan, routing, links[i], choices[i][0]);
        }
        if (i == odometer.size()) break;
    }
    return best;
}

Solution solve_heuristic(const FlowVolumes& x_hat, const RoutingMatrix& routing, const LinkBudget& budget,
                         const CostSurrogate& surrogate, const HeuristicOptions& options) {
    check_inputs(x_hat, routing, budget, surrogate);
    if (options.restarts == 0) throw UsageError("heuristic needs at least one restart");
    const auto links = busy_links(routing);
    std::vector<std::vector<std::vector<double>>> choices;
    for (auto l : links) choices.push_back(link_vertices(l, routing, budget));

    std::optional<Solution> best;
    std::size_t evaluations = 0;
    std::size_t longest = 0;
    for (std::size_t restart = 0; restart < options.restarts; ++restart) {
        auto rng = make_engine(options.seed, {stream::kSolver, restart});
        SamplingPlan plan(routing);
        for (std::size_t i = 0; i < links.size(); ++i) {
            std::uniform_int_distribution<std::size_t> pick(0, choices[i].size() - 1);
            assign_link(plan, routing, links[i], choices[i][pick(rng)]);
        }

        std::size_t sweeps = 0;
        bool changed = true;
        while (changed && sweeps < options.max_sweeps) {
            changed = false;
            ++sweeps;
            for (std::size_t i = 0; i < links.size(); ++i) {
                const auto l = links[i];
                const auto& flows = routing.flows_on_link(l);
                std::vector<PathPrecision> elsewhere;
                for (auto j : flows) elsewhere.push_back(precision_excluding(plan, routing, j, l));

                const auto current = link_rates(plan, routing, l);
                double incumbent = link_local_cost(current, flows, elsewhere, x_hat, surrogate);
                const std::vector<double>* winner = nullptr;
                for (const auto& v : choices[i]) {
                    const double c = link_local_cost(v, flows, elsewhere, x_hat, surrogate);
                    ++evaluations;
                    if (improves(c, incumbent)) {
                        incumbent = c;
                        winner = &v;
                    }
                }
                if (winner) {
                    assign_link(plan, routing, l, *winner);
                    changed = true;
                }
            }
        }
        longest = std::max(longest, sweeps);

        const double cost = instantaneous_cost(x_hat, plan, routing, surrogate);
        if (!best || improves(cost, best->cost) || (ties(cost, best->cost) && lexicographically_less(plan, best->plan))) {
            best = Solution{plan, cost, 0, 0};
        }
    }
    best->evaluations = evaluations;
    best->sweeps = longest;
    return *best;
}

namespace {

// Water-filling step for one link. Flows with precision >= 1 elsewhere (where
// the per-link cost is no longer convex) and flows already observed exactly
// are left at zero.
std::vector<double> waterfill_link(const std::vector<std::size_t>& flows, const std::vector<PathPrecision>& elsewhere,
                                   const FlowVolumes& x_hat, double capacity, double u_max, std::size_t steps) {
    const std::size_t n = flows.size();
    std::vector<double> rates(n, 0.0);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = x_hat(static_cast<Eigen::Index>(flows[i]));
        if (x > 0.0 && !elsewhere[i].exact && elsewhere[i].precision < 1.0) active.push_back(i);
    }
    if (active.empty()) return rates;

    // With tau = 1/sqrt(lambda): u_i(tau) = clamp((tau sqrt(x_i) - S_i) / (1 - S_i), 0, u_max),
    // nondecreasing in tau.
    auto fill = [&](double tau) {
        double used = 0.0;
        for (auto i : active) {
            const double s = elsewhere[i].precision;
            const double x = x_hat(static_cast<Eigen::Index>(flows[i]));
            rates[i] = std::clamp((tau * std::sqrt(x) - s) / (1.0 - s), 0.0, u_max);
            used += rates[i];
        }
        return used;
    };

    if (static_cast<double>(active.size()) * u_max <= capacity) {
        for (auto i : active) rates[i] = u_max;
        return rates;
    }
    double tau_hi = 0.0;
    for (auto i : active) {
        const double s = elsewhere[i].precision;
        tau_hi = std::max(tau_hi, (u_max * (1.0 - s) + s) / std::sqrt(x_hat(static_cast<Eigen::Index>(flows[i]))));
    }
    double tau_lo = 0.0;
    for (std::size_t it = 0; it < steps && tau_hi - tau_lo > 0.0; ++it) {
        const double mid = 0.5 * (tau_lo + tau_hi);
        if (mid == tau_lo || mid == tau_hi) break;
        (fill(mid) <= capacity ? tau_lo : tau_hi) = mid;
    }
    fill(tau_lo);
    return rates;
}

}  // namespace

Solution solve_waterfill(const FlowVolumes& x_hat, const RoutingMatrix& routing, const LinkBudget& budget,
                         const CostSurrogate& surrogate, const WaterfillOptions& options) {
    check_inputs(x_hat, routing, budget, surrogate);
    const auto links = busy_links(routing);
    SamplingPlan plan = naive_allocation(routing, budget);

    std::size_t sweeps = 0;
    std::size_t evaluations = 0;
    bool changed = true;
    while (changed && sweeps < options.max_sweeps) {
        changed = false;
        ++sweeps;
        for (auto l : links) {
            const auto& flows = routing.flows_on_link(l);
            std::vector<PathPrecision> elsewhere;
            for (auto j : flows) elsewhere.push_back(precision_excluding(plan, routing, j, l));
            const auto current = link_rates(plan, routing, l);
            const auto proposal = waterfill_link(flows, elsewhere, x_hat, budget.d(static_cast<Eigen::Index>(l)),
                                                 budget.u_max, options.bisection_steps);
            evaluations += 2;
            if (improves(link_local_cost(proposal, flows, elsewhere, x_hat, surrogate),
                         link_local_cost(current, flows, elsewhere, x_hat, surrogate))) {
                assign_link(plan, routing, l, proposal);
                changed = true;
            }
        }
    }
    const double cost = instantaneous_cost(x_hat, plan, routing, surrogate);
    return Solution{std::move(plan), cost, evaluations, sweeps};
}

void write_plan_csv(std::ostream& out, const SamplingPlan& plan) {
    out << "link,flow,rate\n";
    for (std::size_t l = 0; l < plan.n_links(); ++l) {
        for (std::size_t j = 0; j < plan.n_flows(); ++j) {
            if (plan.rate(l, j) != 0.0) out << l << ',' << j << ',' << csv::format(plan.rate(l, j)) << '\n';
        }
    }
}

void write_plan_csv(const std::filesystem::path& path, const SamplingPlan& plan) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write plan CSV " + path.string());
    write_plan_csv(out, plan);
}

SamplingPlan read_plan_csv(std::istream& in, const RoutingMatrix& routing) {
    std::string line;
    if (!csv::next_line(in, line) || line != "link,flow,rate") throw UsageError("plan CSV header must be link,flow,rate");
    SamplingPlan plan(routing);
    while (csv::next_line(in, line)) {
        const auto f = csv::split(line);
        if (f.size() != 3) throw UsageError("plan CSV rows need 3 fields");
        const double link = csv::parse_double(f[0], "link");
        const double flow = csv::parse_double(f[1], "flow");
        if (link < 0 || flow < 0 || link != std::floor(link) || flow != std::floor(flow)) {
            throw UsageError("plan CSV indices must be nonnegative integers");
        }
        plan.set(routing, static_cast<std::size_t>(link), static_cast<std::size_t>(flow), csv::parse_double(f[2], "rate"));
    }
    return plan;
}

}  // namespace netsample
