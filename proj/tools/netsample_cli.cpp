// Command-line front end: experiments, synthetic topologies, synthetic traces.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "netsample/errors.hpp"
#include "netsample/experiment.hpp"
#include "netsample/flow_model.hpp"
#include "netsample/routing.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolverSize = 3;
constexpr int kExitNumerical = 4;

int run_or_compare(const std::string& config_path, const std::string& out_dir, const std::uint64_t* seed,
                   bool with_naive) {
    auto cfg = netsample::load_config(config_path);
    if (seed) cfg.seed = *seed;
    const auto result = with_naive ? netsample::compare(cfg) : netsample::run_experiment(cfg);
    netsample::write_outputs(result, out_dir);
    std::cerr << "optimal rmse time average: " << result.optimal.rmse_time_average << '\n';
    if (result.comparison) {
        std::cerr << "naive rmse time average:   " << result.comparison->naive_average << '\n'
                  << "reduction: " << result.comparison->percent_reduction << "%\n";
    }
    std::cerr << "runtime: " << result.runtime_seconds << " s\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Budgeted flow sampling and Kalman traffic estimation"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    auto* run = app.add_subcommand("run", "Run the optimized plan on a configured experiment");
    auto* cmp = app.add_subcommand("compare", "Run optimized and even-split plans side by side");
    for (auto* sub : {run, cmp}) {
        sub->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory")->required();
        sub->add_option("--seed", seed, "Override the master seed");
    }

    std::size_t nodes = 9, links = 26, flows = 72, steps = 0;
    std::uint64_t gen_seed = 1;
    std::string out_file, model_path;
    auto* gen_topo = app.add_subcommand("gen-topology", "Write a synthetic routing matrix CSV");
    gen_topo->add_option("--nodes", nodes)->check(CLI::PositiveNumber);
    gen_topo->add_option("--links", links)->check(CLI::PositiveNumber);
    gen_topo->add_option("--flows", flows)->check(CLI::PositiveNumber);
    gen_topo->add_option("--seed", gen_seed);
    gen_topo->add_option("--out", out_file)->required();

    auto* gen_trace = app.add_subcommand("gen-trace", "Simulate a trace CSV from a flow model JSON");
    gen_trace->add_option("--model", model_path, "Flow model JSON")->required()->check(CLI::ExistingFile);
    gen_trace->add_option("--steps", steps)->required()->check(CLI::PositiveNumber);
    gen_trace->add_option("--seed", gen_seed);
    gen_trace->add_option("--out", out_file)->required();

    netsample::SyntheticModelSpec spec;
    auto* gen_model = app.add_subcommand("gen-model", "Write a synthetic heterogeneous flow model JSON");
    gen_model->add_option("--flows", flows)->check(CLI::PositiveNumber);
    gen_model->add_option("--mean-min", spec.mean_min);
    gen_model->add_option("--mean-max", spec.mean_max);
    gen_model->add_option("--rho-min", spec.rho_min);
    gen_model->add_option("--rho-max", spec.rho_max);
    gen_model->add_option("--cv", spec.cv);
    gen_model->add_option("--seed", gen_seed);
    gen_model->add_option("--out", out_file)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0; anything else is a bad command line.
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run || *cmp) {
            const auto* seed_override = (*run ? run : cmp)->count("--seed") ? &seed : nullptr;
            return run_or_compare(config_path, out_dir, seed_override, static_cast<bool>(*cmp));
        }
        if (*gen_topo) {
            netsample::write_routing_csv(std::filesystem::path(out_file),
                                         netsample::synthetic_routing(nodes, links, flows, gen_seed));
            return 0;
        }
        if (*gen_trace) {
            std::ifstream in(model_path);
            const auto model = netsample::flow_model_from_json(nlohmann::json::parse(in));
            netsample::write_trace_csv(std::filesystem::path(out_file), netsample::simulate(model, steps, gen_seed));
            return 0;
        }
        if (*gen_model) {
            std::ofstream out(out_file, std::ios::binary);
            if (!out) throw netsample::UsageError("cannot write " + out_file);
            out << netsample::to_json(netsample::synthetic_model(flows, spec, gen_seed)).dump(2) << '\n';
            return 0;
        }
    } catch (const netsample::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const netsample::SolverSizeError& e) {
        std::cerr << "solver size error: " << e.what() << '\n';
        return kExitSolverSize;
    } catch (const netsample::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const netsample::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
