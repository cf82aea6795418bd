#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace netsample {

/**
 * Per-flow AR(1) dynamics around a long-run level.
 *
 * The centered deviation c_t = x_t - mean follows c_{t+1} = rho * c_t + w_t,
 * w_t ~ N(0, noise_var). `init_mean` and `init_var` describe the starting
 * (uncentered) volume. Covariances are diagonal, so each field is a length-J
 * vector.
 */
struct FlowModel {
    Eigen::VectorXd rho;
    Eigen::VectorXd noise_var;
    Eigen::VectorXd mean;
    Eigen::VectorXd init_mean;
    Eigen::VectorXd init_var;

    std::size_t n_flows() const noexcept { return static_cast<std::size_t>(rho.size()); }

    /// Throws UsageError on length mismatch, |rho| >= 1, non-positive variances,
    /// or a negative mean.
    void validate() const;

    /// Stationary variance noise_var / (1 - rho^2), per flow.
    Eigen::VectorXd stationary_var() const;
};

/// T x J matrix of true volumes; row t is slot t.
using TraceMatrix = Eigen::MatrixXd;

/// Draws a trace; volumes are clamped at zero. Deterministic in (model, n_steps, seed).
/// Each flow draws from its own seed-derived stream.
TraceMatrix simulate(const FlowModel& model, std::size_t n_steps, std::uint64_t seed);

struct CalibrationOptions {
    double var_floor = 1e-6;
    double rho_clamp = 0.999;
};

struct Calibration {
    FlowModel model;
    /// Flows whose training column was constant; their rho is 0 and noise_var the floor.
    std::vector<std::size_t> constant_flows;
};

/// Method-of-moments AR(1) fit per flow: sample mean, lag-1 autocorrelation,
/// innovation variance (1 - rho^2) * sample variance.
/// Requires >= 10 rows and at least one non-constant column.
Calibration calibrate(const TraceMatrix& training, const CalibrationOptions& options = {});

/// Knobs for the synthetic heterogeneous flow population.
struct SyntheticModelSpec {
    double mean_min = 1e2;
    double mean_max = 1e5;
    double rho_min = 0.6;
    double rho_max = 0.95;
    /// Stationary standard deviation as a fraction of the mean.
    double cv = 0.1;
};

/// Log-uniform means over [mean_min, mean_max], uniform rho, stationary start.
FlowModel synthetic_model(std::size_t n_flows, const SyntheticModelSpec& spec, std::uint64_t seed);

// Trace CSV: header `t,flow_0,...,flow_{J-1}`, one row per slot.
TraceMatrix read_trace_csv(std::istream& in);
TraceMatrix read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(std::ostream& out, const TraceMatrix& trace);
void write_trace_csv(const std::filesystem::path& path, const TraceMatrix& trace);

// JSON object with arrays rho, noise_var, mean, init_mean, init_var.
nlohmann::json to_json(const FlowModel& model);
FlowModel flow_model_from_json(const nlohmann::json& j);

}  // namespace netsample
