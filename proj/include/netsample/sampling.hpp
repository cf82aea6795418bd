#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "netsample/rng.hpp"
#include "netsample/routing.hpp"

namespace netsample {

/**
 * Per-(link, flow) packet sampling rates.
 *
 * Rates live in [0, 1] and are nonzero only where the flow is routed over the
 * link. Construction and `set` enforce both rules.
 */
class SamplingPlan {
  public:
    /// All-zero plan over the routing support.
    explicit SamplingPlan(const RoutingMatrix& routing);
    SamplingPlan(const RoutingMatrix& routing, Eigen::MatrixXd rates);

    std::size_t n_links() const noexcept { return static_cast<std::size_t>(rates_.rows()); }
    std::size_t n_flows() const noexcept { return static_cast<std::size_t>(rates_.cols()); }

    double rate(std::size_t link, std::size_t flow) const { return rates_(link, flow); }
    void set(const RoutingMatrix& routing, std::size_t link, std::size_t flow, double rate);
    const Eigen::MatrixXd& rates() const noexcept { return rates_; }

    /// Rates of `flow` along its path, in links_of_flow order.
    std::vector<double> path_rates(const RoutingMatrix& routing, std::size_t flow) const;

    friend bool operator==(const SamplingPlan& a, const SamplingPlan& b) { return a.rates_ == b.rates_; }

  private:
    Eigen::MatrixXd rates_;
};

/// Binomial(count, rate) thinning. rate 0 and 1 are exact.
std::uint64_t bernoulli_sample(std::uint64_t count, double rate, Engine& rng);

/// Unbiased per-link volume estimate count / rate. Throws NoEstimateError when rate == 0.
double link_estimate(double sampled_count, double rate);

/// Variance of link_estimate given the true volume: volume * (1 - rate) / rate; +inf at rate 0.
double link_estimator_variance(double volume, double rate);

/// Inverse-variance (BLUE) weights. Throws NoObservationError on an empty list and
/// UsageError on a non-positive variance.
std::vector<double> blue_weights(std::span<const double> variances);

/// Weighted sum of per-link estimates; weights must sum to 1 within 1e-12.
double combine(std::span<const double> estimates, std::span<const double> weights);

/**
 * Conditional variance of the combined estimate divided by the true volume:
 * 1 / sum_k u_k / (1 - u_k). Zero rates add nothing, any rate of 1 gives 0,
 * and all-zero rates give +inf (unobserved flow).
 */
double combined_variance_coeff(std::span<const double> path_rates);

/// What the monitors report about one flow in one slot.
struct FlowObservation {
    std::map<std::size_t, std::uint64_t> per_link_counts;
    std::map<std::size_t, double> per_link_estimates;
    /// nullopt when no link on the path samples the flow.
    std::optional<double> combined;
    double combined_var_coeff = 0.0;
};

/**
 * Samples every positive-rate link on each flow's path and fuses the link
 * estimates with rate-derived BLUE weights (the true volume cancels from the
 * inverse-variance ratio, so w_l is proportional to u_l / (1 - u_l)).
 *
 * True volumes are rounded to the nearest packet before thinning. A link with
 * rate 1 reports the exact (unrounded) volume. Flow j draws from the stream
 * derive_seed(seed, {j}); links are visited in path order.
 */
std::vector<FlowObservation> observe_flows(const FlowVolumes& truth, const SamplingPlan& plan,
                                           const RoutingMatrix& routing, std::uint64_t seed);

}  // namespace netsample
