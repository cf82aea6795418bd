#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "netsample/allocation.hpp"
#include "netsample/flow_model.hpp"
#include "netsample/kalman.hpp"
#include "netsample/routing.hpp"
#include "netsample/sampling.hpp"

namespace netsample {

struct TopologySource {
    /// When set, the routing matrix is read from this CSV and the sizes below are ignored.
    std::optional<std::filesystem::path> csv;
    std::size_t nodes = 9;
    std::size_t links = 26;
    std::size_t flows = 72;
};

struct TraceSource {
    enum class Kind { Synthetic, Model, Csv };
    Kind kind = Kind::Synthetic;
    SyntheticModelSpec synthetic;
    std::optional<FlowModel> model;
    std::optional<std::filesystem::path> csv;
};

enum class PlanningMode { Static, Adaptive };
enum class SolverKind { Exact, Heuristic, Waterfill };

struct ExperimentConfig {
    TopologySource topology;
    TraceSource trace;
    std::size_t t0 = 500;
    std::size_t T = 644;
    /// One entry means the same capacity on every link.
    std::vector<double> budget{0.2};
    double u_max = 1.0;
    PlanningMode planning_mode = PlanningMode::Static;
    std::size_t resolve_every = 0;
    SolverKind solver = SolverKind::Waterfill;
    std::size_t restarts = 8;
    std::size_t exact_cap = 1'000'000;
    double M_scale = 1e4;
    std::uint64_t seed = 1;
    /// 0 disables refitting during the evaluation window.
    std::size_t recalibrate_every = 0;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// Parses the JSON config layout; relative paths resolve against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

struct StepRecord {
    std::size_t t = 0;
    FlowVolumes truth;
    std::vector<std::optional<double>> observations;
    FlowVolumes estimates;
    Eigen::VectorXd squared_errors;
};

struct PlanEpoch {
    std::size_t start = 0;
    SamplingPlan plan;
    double cost = 0.0;
    std::size_t evaluations = 0;
    std::size_t sweeps = 0;
};

struct PlanRun {
    std::vector<StepRecord> steps;
    std::vector<double> rmse_series;
    double rmse_time_average = 0.0;
    std::vector<PlanEpoch> epochs;
};

struct Comparison {
    double optimal_average = 0.0;
    double naive_average = 0.0;
    /// 100 * (naive - optimal) / naive.
    double percent_reduction = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::size_t n_links = 0;
    std::size_t n_flows = 0;
    FlowModel calibrated;
    std::vector<std::size_t> calibration_warnings;
    PlanRun optimal;
    std::optional<PlanRun> naive;
    std::optional<Comparison> comparison;
    /// Wall clock; deliberately kept out of the written files.
    double runtime_seconds = 0.0;
};

/// sqrt(mean_j (estimate_j - truth_j)^2).
double rmse(const FlowVolumes& estimates, const FlowVolumes& truth);

/// Time average of a per-slot series.
double time_average(const std::vector<double>& series);

/// Calibrate on [0, t0), solve for the plan, then sample and filter every slot of [t0, T).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// run_experiment plus the even-split baseline on the same trace. Both plans
/// see the same per-slot sampling streams.
ExperimentResult compare(const ExperimentConfig& cfg);

/// Materialized inputs: routing and the full true trace.
struct ExperimentInputs {
    RoutingMatrix routing;
    TraceMatrix trace;
};
ExperimentInputs load_inputs(const ExperimentConfig& cfg);

/// Writes rmse.csv, estimates.csv, plan_opt.csv (plus plan_opt_t<slot>.csv for
/// later re-solves), plan_naive.csv when present, and summary.json.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

nlohmann::json summary_json(const ExperimentResult& result);

}  // namespace netsample
