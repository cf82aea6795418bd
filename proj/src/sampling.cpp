#include "netsample/sampling.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "netsample/errors.hpp"

namespace netsample {

namespace {

void check_rate(double rate, std::size_t link, std::size_t flow) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw UsageError("rate " + std::to_string(rate) + " at (link " + std::to_string(link) + ", flow " +
                         std::to_string(flow) + ") is outside [0, 1]");
    }
}

}  // namespace

SamplingPlan::SamplingPlan(const RoutingMatrix& routing)
    : rates_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(routing.n_links()),
                                   static_cast<Eigen::Index>(routing.n_flows()))) {}

SamplingPlan::SamplingPlan(const RoutingMatrix& routing, Eigen::MatrixXd rates) : rates_(std::move(rates)) {
    if (static_cast<std::size_t>(rates_.rows()) != routing.n_links() ||
        static_cast<std::size_t>(rates_.cols()) != routing.n_flows()) {
        throw UsageError("sampling plan shape does not match the routing matrix");
    }
    for (std::size_t l = 0; l < n_links(); ++l) {
        for (std::size_t j = 0; j < n_flows(); ++j) {
            check_rate(rates_(l, j), l, j);
            if (rates_(l, j) != 0.0 && !routing.uses(l, j)) {
                throw UsageError("plan samples flow " + std::to_string(j) + " on link " + std::to_string(l) +
                                 " which is not on its path");
            }
        }
    }
}

void SamplingPlan::set(const RoutingMatrix& routing, std::size_t link, std::size_t flow, double rate) {
    if (link >= n_links() || flow >= n_flows()) throw UsageError("plan index out of range");
    check_rate(rate, link, flow);
    if (rate != 0.0 && !routing.uses(link, flow)) {
        throw UsageError("flow " + std::to_string(flow) + " is not routed over link " + std::to_string(link));
    }
    rates_(link, flow) = rate;
}

std::vector<double> SamplingPlan::path_rates(const RoutingMatrix& routing, std::size_t flow) const {
    std::vector<double> out;
    for (auto l : routing.links_of_flow(flow)) out.push_back(rates_(l, flow));
    return out;
}

std::uint64_t bernoulli_sample(std::uint64_t count, double rate, Engine& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw UsageError("sampling rate outside [0, 1]");
    if (rate == 0.0 || count == 0) return 0;
    if (rate == 1.0) return count;
    std::binomial_distribution<std::int64_t> draw(static_cast<std::int64_t>(count), rate);
    return static_cast<std::uint64_t>(draw(rng));
}

double link_estimate(double sampled_count, double rate) {
    if (!(rate > 0.0)) throw NoEstimateError("no estimate from an unsampled link (rate 0)");
    if (rate > 1.0) throw UsageError("sampling rate above 1");
    return sampled_count / rate;
}

double link_estimator_variance(double volume, double rate) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw UsageError("sampling rate outside [0, 1]");
    if (rate == 0.0) return std::numeric_limits<double>::infinity();
    return volume * (1.0 - rate) / rate;
}

std::vector<double> blue_weights(std::span<const double> variances) {
    if (variances.empty()) throw NoObservationError("no sampled link to weight");
    double total_precision = 0.0;
    for (double v : variances) {
        if (!(v > 0.0)) throw UsageError("BLUE weights need positive variances");
        total_precision += 1.0 / v;
    }
    std::vector<double> weights;
    weights.reserve(variances.size());
    for (double v : variances) weights.push_back((1.0 / v) / total_precision);
    return weights;
}

double combine(std::span<const double> estimates, std::span<const double> weights) {
    if (estimates.size() != weights.size()) throw UsageError("estimate and weight counts differ");
    if (estimates.empty()) throw NoObservationError("nothing to combine");
    const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(weight_sum - 1.0) > 1e-12) throw UsageError("weights do not sum to 1");
    double total = 0.0;
    for (std::size_t i = 0; i < estimates.size(); ++i) total += weights[i] * estimates[i];
    return total;
}

double combined_variance_coeff(std::span<const double> path_rates) {
    double precision = 0.0;
    bool observed = false;
    for (double u : path_rates) {
        if (!(u >= 0.0 && u <= 1.0)) throw UsageError("sampling rate outside [0, 1]");
        if (u == 1.0) return 0.0;
        if (u > 0.0) {
            observed = true;
            precision += u / (1.0 - u);
        }
    }
    if (!observed) return std::numeric_limits<double>::infinity();
    return 1.0 / precision;
}

std::vector<FlowObservation> observe_flows(const FlowVolumes& truth, const SamplingPlan& plan,
                                           const RoutingMatrix& routing, std::uint64_t seed) {
    const auto n_flows = routing.n_flows();
    if (static_cast<std::size_t>(truth.size()) != n_flows || plan.n_flows() != n_flows ||
        plan.n_links() != routing.n_links()) {
        throw UsageError("observe_flows: dimensions disagree");
    }
    std::vector<FlowObservation> out(n_flows);
    for (std::size_t j = 0; j < n_flows; ++j) {
        auto& obs = out[j];
        const double volume = truth(static_cast<Eigen::Index>(j));
        if (!(volume >= 0.0)) throw UsageError("negative true volume for flow " + std::to_string(j));
        const auto packets = static_cast<std::uint64_t>(std::llround(volume));
        auto rng = make_engine(seed, {j});

        std::vector<double> estimates, proxies, exact;
        for (auto l : routing.links_of_flow(j)) {
            const double u = plan.rate(l, j);
            if (u == 0.0) continue;
            const auto count = bernoulli_sample(packets, u, rng);
            obs.per_link_counts[l] = count;
            // A fully sampled link sees every packet; report the volume itself.
            const double estimate = u == 1.0 ? volume : link_estimate(static_cast<double>(count), u);
            obs.per_link_estimates[l] = estimate;
            if (u == 1.0) {
                exact.push_back(estimate);
            } else {
                estimates.push_back(estimate);
                proxies.push_back(link_estimator_variance(1.0, u));
            }
        }
        obs.combined_var_coeff = combined_variance_coeff(plan.path_rates(routing, j));
        if (!exact.empty()) {
            obs.combined = combine(exact, std::vector<double>(exact.size(), 1.0 / static_cast<double>(exact.size())));
        } else if (!estimates.empty()) {
            obs.combined = combine(estimates, blue_weights(proxies));
        }
    }
    return out;
}

}  // namespace netsample
