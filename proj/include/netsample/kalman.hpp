#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "netsample/flow_model.hpp"
#include "netsample/routing.hpp"
#include "netsample/sampling.hpp"

namespace netsample {

// The filter tracks centered volumes (x - model.mean). State transition is
// diag(rho), process noise diag(noise_var), and the measurement matrix is the
// identity on the flows observed in a slot.

/// Filtered estimate x_{t|t} and its error covariance P_{t|t}.
struct KalmanState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    /// Starting state from the model's initial distribution.
    static KalmanState from_model(const FlowModel& model);
};

/// One-step-ahead x_{t|t-1}, P_{t|t-1}.
struct Prediction {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Diagonal of the measurement covariance; +inf marks a missing observation.
struct MeasurementNoise {
    Eigen::VectorXd variances;
};

struct NoiseOptions {
    /// Floor on the predicted volume used as the variance proxy.
    double volume_floor = 1.0;
    /// Floor on zero variances from fully sampled paths.
    double variance_floor = 1e-9;
};

/// Centered observation per flow; nullopt means missing.
using Observations = std::vector<std::optional<double>>;

Prediction predict(const KalmanState& state, const FlowModel& model);

/// variance(j) = max(volume_floor, predicted uncentered volume) * combined_variance_coeff(path rates).
MeasurementNoise measurement_noise(const Prediction& pred, const SamplingPlan& plan, const FlowModel& model,
                                   const RoutingMatrix& routing, const NoiseOptions& options = {});

/// Measurement update on the observed flows. Missing entries must line up with
/// +inf noise. Throws NumericalError tagged with `time_index` if the innovation
/// covariance is not positive definite.
KalmanState update(const Prediction& pred, const Observations& z, const MeasurementNoise& noise,
                   std::size_t time_index = 0);

struct FilterStep {
    KalmanState state;
    /// Uncentered estimates, clamped at zero.
    FlowVolumes estimates;
};

/// predict -> measurement_noise -> update on uncentered combined observations.
FilterStep filter_step(const KalmanState& state, const FlowModel& model, const SamplingPlan& plan,
                       const std::vector<std::optional<double>>& z_uncentered, const RoutingMatrix& routing,
                       std::size_t time_index = 0, const NoiseOptions& options = {});

/// Largest |P - P^T| entry.
double asymmetry(const Eigen::MatrixXd& cov);

}  // namespace netsample
