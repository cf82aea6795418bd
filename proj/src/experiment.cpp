#include "netsample/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "netsample/csv.hpp"
#include "netsample/errors.hpp"
#include "netsample/rng.hpp"

namespace netsample {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_number(const json& j, const char* key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_unsigned()) {
            throw ConfigError(where + "." + key + " must be a nonnegative integer");
        }
    }
    return v.get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (t0 < 10) throw ConfigError("t0 must be at least 10 slots");
    if (!(t0 < T)) throw ConfigError("t0 must be smaller than T");
    if (budget.empty()) throw ConfigError("budget must not be empty");
    for (double d : budget) {
        if (!(d > 0.0 && d <= 1.0)) throw ConfigError("budgets must be in (0, 1]");
    }
    if (!(u_max > 0.0 && u_max <= 1.0)) throw ConfigError("u_max must be in (0, 1]");
    if (planning_mode == PlanningMode::Adaptive && resolve_every == 0) {
        throw ConfigError("adaptive planning needs resolve_every >= 1");
    }
    if (solver == SolverKind::Heuristic && restarts == 0) throw ConfigError("heuristic needs restarts >= 1");
    if (!(M_scale >= 1.0)) throw ConfigError("M_scale must be >= 1");
    if (trace.kind == TraceSource::Kind::Model && !trace.model) throw ConfigError("trace model missing");
    if (trace.kind == TraceSource::Kind::Csv && !trace.csv) throw ConfigError("trace csv path missing");
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown_keys(j,
                        {"topology", "trace", "t0", "T", "budget", "u_max", "planning_mode", "solver", "M_scale", "seed",
                         "recalibrate_every", "exact_cap"},
                        "config");
    ExperimentConfig cfg;
    try {
        if (j.contains("topology")) {
            const auto& t = j.at("topology");
            if (!t.is_object()) throw ConfigError("topology must be an object");
            reject_unknown_keys(t, {"csv", "nodes", "links", "flows"}, "topology");
            if (t.contains("csv")) cfg.topology.csv = resolve(base_dir, t.at("csv").get<std::string>());
            if (t.contains("nodes")) cfg.topology.nodes = get_number<std::size_t>(t, "nodes", "topology");
            if (t.contains("links")) cfg.topology.links = get_number<std::size_t>(t, "links", "topology");
            if (t.contains("flows")) cfg.topology.flows = get_number<std::size_t>(t, "flows", "topology");
        }
        if (j.contains("trace")) {
            const auto& t = j.at("trace");
            if (!t.is_object() || t.size() != 1) {
                throw ConfigError("trace must be an object with exactly one of synthetic, model, csv");
            }
            reject_unknown_keys(t, {"synthetic", "model", "csv"}, "trace");
            if (t.contains("synthetic")) {
                const auto& s = t.at("synthetic");
                reject_unknown_keys(s, {"mean_min", "mean_max", "rho_min", "rho_max", "cv"}, "trace.synthetic");
                auto& spec = cfg.trace.synthetic;
                if (s.contains("mean_min")) spec.mean_min = get_number<double>(s, "mean_min", "trace.synthetic");
                if (s.contains("mean_max")) spec.mean_max = get_number<double>(s, "mean_max", "trace.synthetic");
                if (s.contains("rho_min")) spec.rho_min = get_number<double>(s, "rho_min", "trace.synthetic");
                if (s.contains("rho_max")) spec.rho_max = get_number<double>(s, "rho_max", "trace.synthetic");
                if (s.contains("cv")) spec.cv = get_number<double>(s, "cv", "trace.synthetic");
                cfg.trace.kind = TraceSource::Kind::Synthetic;
            } else if (t.contains("model")) {
                const auto& m = t.at("model");
                if (m.is_string()) {
                    const auto path = resolve(base_dir, m.get<std::string>());
                    std::ifstream in(path);
                    if (!in) throw ConfigError("cannot open flow model " + path.string());
                    cfg.trace.model = flow_model_from_json(json::parse(in));
                } else {
                    cfg.trace.model = flow_model_from_json(m);
                }
                cfg.trace.kind = TraceSource::Kind::Model;
            } else {
                cfg.trace.csv = resolve(base_dir, t.at("csv").get<std::string>());
                cfg.trace.kind = TraceSource::Kind::Csv;
            }
        }
        if (j.contains("t0")) cfg.t0 = get_number<std::size_t>(j, "t0", "config");
        if (j.contains("T")) cfg.T = get_number<std::size_t>(j, "T", "config");
        if (j.contains("budget")) {
            const auto& b = j.at("budget");
            if (b.is_number()) {
                cfg.budget = {b.get<double>()};
            } else if (b.is_array()) {
                cfg.budget = b.get<std::vector<double>>();
            } else {
                throw ConfigError("budget must be a number or an array");
            }
        }
        if (j.contains("u_max")) cfg.u_max = get_number<double>(j, "u_max", "config");
        if (j.contains("planning_mode")) {
            const auto& p = j.at("planning_mode");
            if (p == "static") {
                cfg.planning_mode = PlanningMode::Static;
            } else if (p.is_object() && p.contains("adaptive")) {
                reject_unknown_keys(p, {"adaptive"}, "planning_mode");
                const auto& a = p.at("adaptive");
                reject_unknown_keys(a, {"resolve_every"}, "planning_mode.adaptive");
                cfg.planning_mode = PlanningMode::Adaptive;
                cfg.resolve_every = get_number<std::size_t>(a, "resolve_every", "planning_mode.adaptive");
            } else {
                throw ConfigError("planning_mode must be \"static\" or {\"adaptive\": {\"resolve_every\": N}}");
            }
        }
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            if (s == "exact") {
                cfg.solver = SolverKind::Exact;
            } else if (s == "waterfill") {
                cfg.solver = SolverKind::Waterfill;
            } else if (s == "heuristic") {
                cfg.solver = SolverKind::Heuristic;
            } else if (s.is_object() && s.contains("heuristic")) {
                reject_unknown_keys(s, {"heuristic"}, "solver");
                const auto& h = s.at("heuristic");
                reject_unknown_keys(h, {"restarts"}, "solver.heuristic");
                cfg.solver = SolverKind::Heuristic;
                if (h.contains("restarts")) cfg.restarts = get_number<std::size_t>(h, "restarts", "solver.heuristic");
            } else {
                throw ConfigError("solver must be \"exact\", \"waterfill\", \"heuristic\" or {\"heuristic\": {...}}");
            }
        }
        if (j.contains("exact_cap")) cfg.exact_cap = get_number<std::size_t>(j, "exact_cap", "config");
        if (j.contains("M_scale")) cfg.M_scale = get_number<double>(j, "M_scale", "config");
        if (j.contains("seed")) cfg.seed = get_number<std::uint64_t>(j, "seed", "config");
        if (j.contains("recalibrate_every")) {
            cfg.recalibrate_every = get_number<std::size_t>(j, "recalibrate_every", "config");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const UsageError& e) {
        throw ConfigError(e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    if (cfg.topology.csv) {
        j["topology"] = {{"csv", cfg.topology.csv->string()}};
    } else {
        j["topology"] = {{"nodes", cfg.topology.nodes}, {"links", cfg.topology.links}, {"flows", cfg.topology.flows}};
    }
    switch (cfg.trace.kind) {
        case TraceSource::Kind::Synthetic: {
            const auto& s = cfg.trace.synthetic;
            j["trace"] = {{"synthetic",
                           {{"mean_min", s.mean_min},
                            {"mean_max", s.mean_max},
                            {"rho_min", s.rho_min},
                            {"rho_max", s.rho_max},
                            {"cv", s.cv}}}};
            break;
        }
        case TraceSource::Kind::Model:
            j["trace"] = {{"model", to_json(*cfg.trace.model)}};
            break;
        case TraceSource::Kind::Csv:
            j["trace"] = {{"csv", cfg.trace.csv->string()}};
            break;
    }
    j["t0"] = cfg.t0;
    j["T"] = cfg.T;
    j["budget"] = cfg.budget.size() == 1 ? json(cfg.budget.front()) : json(cfg.budget);
    j["u_max"] = cfg.u_max;
    j["planning_mode"] = cfg.planning_mode == PlanningMode::Static
                             ? json("static")
                             : json{{"adaptive", {{"resolve_every", cfg.resolve_every}}}};
    switch (cfg.solver) {
        case SolverKind::Exact:
            j["solver"] = "exact";
            break;
        case SolverKind::Waterfill:
            j["solver"] = "waterfill";
            break;
        case SolverKind::Heuristic:
            j["solver"] = {{"heuristic", {{"restarts", cfg.restarts}}}};
            break;
    }
    j["exact_cap"] = cfg.exact_cap;
    j["M_scale"] = cfg.M_scale;
    j["seed"] = cfg.seed;
    j["recalibrate_every"] = cfg.recalibrate_every;
    return j;
}

double rmse(const FlowVolumes& estimates, const FlowVolumes& truth) {
    if (estimates.size() != truth.size()) throw UsageError("rmse: length mismatch");
    if (estimates.size() == 0) throw UsageError("rmse: no flows");
    return std::sqrt((estimates - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double time_average(const std::vector<double>& series) {
    if (series.empty()) return 0.0;
    double total = 0.0;
    for (double v : series) total += v;
    return total / static_cast<double>(series.size());
}

ExperimentInputs load_inputs(const ExperimentConfig& cfg) {
    cfg.validate();
    try {
        RoutingMatrix routing = cfg.topology.csv ? read_routing_csv(*cfg.topology.csv)
                                                 : synthetic_routing(cfg.topology.nodes, cfg.topology.links,
                                                                     cfg.topology.flows, cfg.seed);
        const auto n_flows = routing.n_flows();
        TraceMatrix trace;
        switch (cfg.trace.kind) {
            case TraceSource::Kind::Synthetic:
                trace = simulate(synthetic_model(n_flows, cfg.trace.synthetic, cfg.seed), cfg.T, cfg.seed);
                break;
            case TraceSource::Kind::Model:
                if (cfg.trace.model->n_flows() != n_flows) throw ConfigError("flow model size does not match topology");
                trace = simulate(*cfg.trace.model, cfg.T, cfg.seed);
                break;
            case TraceSource::Kind::Csv:
                trace = read_trace_csv(*cfg.trace.csv);
                if (static_cast<std::size_t>(trace.cols()) != n_flows) {
                    throw ConfigError("trace CSV has " + std::to_string(trace.cols()) + " flows, topology has " +
                                      std::to_string(n_flows));
                }
                if (static_cast<std::size_t>(trace.rows()) < cfg.T) {
                    throw ConfigError("trace CSV has " + std::to_string(trace.rows()) + " slots, T is " +
                                      std::to_string(cfg.T));
                }
                trace.conservativeResize(static_cast<Eigen::Index>(cfg.T), Eigen::NoChange);
                break;
        }
        if (cfg.budget.size() != 1 && cfg.budget.size() != routing.n_links()) {
            throw ConfigError("budget needs 1 or " + std::to_string(routing.n_links()) + " entries");
        }
        return ExperimentInputs{std::move(routing), std::move(trace)};
    } catch (const UsageError& e) {
        throw ConfigError(e.what());
    }
}

namespace {

enum class Policy { Optimal, Naive };

LinkBudget make_budget(const ExperimentConfig& cfg, std::size_t n_links) {
    if (cfg.budget.size() == 1) return LinkBudget::uniform(n_links, cfg.budget.front(), cfg.u_max);
    return LinkBudget{Eigen::Map<const Eigen::VectorXd>(cfg.budget.data(), static_cast<Eigen::Index>(n_links)),
                      cfg.u_max};
}

PlanEpoch plan_for(const ExperimentConfig& cfg, Policy policy, const RoutingMatrix& routing, const LinkBudget& budget,
                   const FlowVolumes& x_hat, std::size_t start, std::size_t solve_index) {
    const CostSurrogate surrogate{cfg.M_scale};
    if (policy == Policy::Naive) {
        auto plan = naive_allocation(routing, budget);
        const double cost = instantaneous_cost(x_hat, plan, routing, surrogate);
        return PlanEpoch{start, std::move(plan), cost, 0, 0};
    }
    Solution s = [&] {
        switch (cfg.solver) {
            case SolverKind::Exact:
                return solve_exact(x_hat, routing, budget, surrogate, ExactOptions{cfg.exact_cap});
            case SolverKind::Heuristic:
                return solve_heuristic(x_hat, routing, budget, surrogate,
                                       HeuristicOptions{cfg.restarts, derive_seed(cfg.seed, {stream::kSolver, solve_index})});
            case SolverKind::Waterfill:
                break;
        }
        return solve_waterfill(x_hat, routing, budget, surrogate);
    }();
    return PlanEpoch{start, std::move(s.plan), s.cost, s.evaluations, s.sweeps};
}

PlanRun run_plan(const ExperimentConfig& cfg, Policy policy, const ExperimentInputs& in, const Calibration& calib) {
    const auto& routing = in.routing;
    const auto budget = make_budget(cfg, routing.n_links());
    FlowModel model = calib.model;
    KalmanState state = KalmanState::from_model(model);

    std::vector<FlowVolumes> history;
    for (std::size_t t = 0; t < cfg.t0; ++t) history.emplace_back(in.trace.row(static_cast<Eigen::Index>(t)).transpose());

    PlanRun run;
    FlowVolumes latest = model.init_mean.cwiseMax(0.0);
    std::size_t solve_index = 0;
    for (std::size_t t = cfg.t0; t < cfg.T; ++t) {
        const std::size_t elapsed = t - cfg.t0;
        const bool resolve = elapsed == 0 || (policy == Policy::Optimal && cfg.planning_mode == PlanningMode::Adaptive &&
                                              elapsed % cfg.resolve_every == 0);
        if (resolve) run.epochs.push_back(plan_for(cfg, policy, routing, budget, latest, t, solve_index++));

        if (cfg.recalibrate_every > 0 && elapsed > 0 && elapsed % cfg.recalibrate_every == 0) {
            TraceMatrix window(static_cast<Eigen::Index>(cfg.t0), static_cast<Eigen::Index>(routing.n_flows()));
            for (std::size_t r = 0; r < cfg.t0; ++r) {
                window.row(static_cast<Eigen::Index>(r)) = history[history.size() - cfg.t0 + r].transpose();
            }
            FlowModel refit = calibrate(window).model;
            state.mean += model.mean - refit.mean;
            model = std::move(refit);
        }

        const auto& plan = run.epochs.back().plan;
        const FlowVolumes truth = in.trace.row(static_cast<Eigen::Index>(t)).transpose();
        const auto observations =
            observe_flows(truth, plan, routing, derive_seed(cfg.seed, {stream::kSampling, static_cast<std::uint64_t>(t)}));

        std::vector<std::optional<double>> z(observations.size());
        for (std::size_t j = 0; j < z.size(); ++j) z[j] = observations[j].combined;

        auto step = filter_step(state, model, plan, z, routing, t);
        state = std::move(step.state);
        latest = step.estimates;
        history.push_back(step.estimates);

        StepRecord rec{t, truth, std::move(z), step.estimates, (step.estimates - truth).array().square().matrix()};
        run.rmse_series.push_back(rmse(step.estimates, truth));
        run.steps.push_back(std::move(rec));
    }
    run.rmse_time_average = time_average(run.rmse_series);
    return run;
}

ExperimentResult run_impl(const ExperimentConfig& cfg, bool with_naive) {
    const auto started = std::chrono::steady_clock::now();
    const auto inputs = load_inputs(cfg);
    const Calibration calib = calibrate(inputs.trace.topRows(static_cast<Eigen::Index>(cfg.t0)));

    ExperimentResult result;
    result.config = cfg;
    result.n_links = inputs.routing.n_links();
    result.n_flows = inputs.routing.n_flows();
    result.calibrated = calib.model;
    result.calibration_warnings = calib.constant_flows;
    result.optimal = run_plan(cfg, Policy::Optimal, inputs, calib);
    if (with_naive) {
        result.naive = run_plan(cfg, Policy::Naive, inputs, calib);
        Comparison c;
        c.optimal_average = result.optimal.rmse_time_average;
        c.naive_average = result.naive->rmse_time_average;
        c.percent_reduction = c.naive_average > 0.0 ? 100.0 * (c.naive_average - c.optimal_average) / c.naive_average : 0.0;
        result.comparison = c;
    }
    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

void open_out(std::ofstream& out, const std::filesystem::path& path) {
    out.open(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
}

json epoch_json(const PlanEpoch& e) {
    return {{"start", e.start}, {"cost", e.cost}, {"evaluations", e.evaluations}, {"sweeps", e.sweeps}};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) { return run_impl(cfg, false); }

ExperimentResult compare(const ExperimentConfig& cfg) { return run_impl(cfg, true); }

json summary_json(const ExperimentResult& r) {
    json j;
    j["seed"] = r.config.seed;
    j["n_links"] = r.n_links;
    j["n_flows"] = r.n_flows;
    j["evaluated_slots"] = r.optimal.rmse_series.size();
    j["rmse_time_average"] = {{"optimal", r.optimal.rmse_time_average},
                              {"naive", r.naive ? json(r.naive->rmse_time_average) : json(nullptr)}};
    j["percent_reduction"] = r.comparison ? json(r.comparison->percent_reduction) : json(nullptr);
    json optimal_epochs = json::array();
    for (const auto& e : r.optimal.epochs) optimal_epochs.push_back(epoch_json(e));
    j["solver"] = {{"optimal", optimal_epochs}};
    if (r.naive) {
        json naive_epochs = json::array();
        for (const auto& e : r.naive->epochs) naive_epochs.push_back(epoch_json(e));
        j["solver"]["naive"] = naive_epochs;
    }
    j["calibration_warnings"] = r.calibration_warnings;
    j["config"] = to_json(r.config);
    return j;
}

void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto* naive = r.naive ? &*r.naive : nullptr;
    {
        std::ofstream out;
        open_out(out, dir / "rmse.csv");
        out << "t,rmse_opt,rmse_naive\n";
        for (std::size_t i = 0; i < r.optimal.steps.size(); ++i) {
            out << r.optimal.steps[i].t << ',' << csv::format(r.optimal.rmse_series[i]) << ',';
            if (naive) out << csv::format(naive->rmse_series[i]);
            out << '\n';
        }
    }
    {
        std::ofstream out;
        open_out(out, dir / "estimates.csv");
        out << "t,flow,truth,estimate_opt,estimate_naive\n";
        for (std::size_t i = 0; i < r.optimal.steps.size(); ++i) {
            const auto& s = r.optimal.steps[i];
            for (Eigen::Index j = 0; j < s.truth.size(); ++j) {
                out << s.t << ',' << j << ',' << csv::format(s.truth(j)) << ',' << csv::format(s.estimates(j)) << ',';
                if (naive) out << csv::format(naive->steps[i].estimates(j));
                out << '\n';
            }
        }
    }
    for (std::size_t e = 0; e < r.optimal.epochs.size(); ++e) {
        const auto& epoch = r.optimal.epochs[e];
        write_plan_csv(e == 0 ? dir / "plan_opt.csv" : dir / ("plan_opt_t" + std::to_string(epoch.start) + ".csv"),
                       epoch.plan);
    }
    if (naive) write_plan_csv(dir / "plan_naive.csv", naive->epochs.front().plan);
    std::ofstream out;
    open_out(out, dir / "summary.json");
    out << summary_json(r).dump(2) << '\n';
}

}  // namespace netsample
