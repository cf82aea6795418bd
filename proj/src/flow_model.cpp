#include "netsample/flow_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "netsample/csv.hpp"
#include "netsample/errors.hpp"
#include "netsample/rng.hpp"

namespace netsample {

void FlowModel::validate() const {
    const auto n = rho.size();
    if (n == 0) throw UsageError("flow model has no flows");
    if (noise_var.size() != n || mean.size() != n || init_mean.size() != n || init_var.size() != n) {
        throw UsageError("flow model vectors differ in length");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto flow = std::to_string(j);
        if (!(std::abs(rho(j)) < 1.0)) throw UsageError("flow " + flow + ": |rho| must be < 1");
        if (!(noise_var(j) > 0.0) || !std::isfinite(noise_var(j))) {
            throw UsageError("flow " + flow + ": noise_var must be positive");
        }
        if (!(init_var(j) > 0.0) || !std::isfinite(init_var(j))) {
            throw UsageError("flow " + flow + ": init_var must be positive");
        }
        if (!(mean(j) >= 0.0) || !std::isfinite(mean(j))) throw UsageError("flow " + flow + ": mean must be >= 0");
        if (!std::isfinite(init_mean(j))) throw UsageError("flow " + flow + ": init_mean must be finite");
    }
}

Eigen::VectorXd FlowModel::stationary_var() const {
    return noise_var.array() / (1.0 - rho.array().square());
}

TraceMatrix simulate(const FlowModel& model, std::size_t n_steps, std::uint64_t seed) {
    model.validate();
    if (n_steps == 0) throw UsageError("simulate needs at least one step");
    const auto n_flows = model.rho.size();
    TraceMatrix trace(static_cast<Eigen::Index>(n_steps), n_flows);
    for (Eigen::Index j = 0; j < n_flows; ++j) {
        auto rng = make_engine(seed, {stream::kTrace, static_cast<std::uint64_t>(j)});
        std::normal_distribution<double> innovation(0.0, std::sqrt(model.noise_var(j)));
        std::normal_distribution<double> start(model.init_mean(j) - model.mean(j), std::sqrt(model.init_var(j)));
        double deviation = start(rng);
        for (std::size_t t = 0; t < n_steps; ++t) {
            if (t > 0) deviation = model.rho(j) * deviation + innovation(rng);
            trace(static_cast<Eigen::Index>(t), j) = std::max(0.0, model.mean(j) + deviation);
        }
    }
    return trace;
}

Calibration calibrate(const TraceMatrix& training, const CalibrationOptions& options) {
    const auto n_steps = training.rows();
    const auto n_flows = training.cols();
    if (n_steps < 10) throw UsageError("calibration needs at least 10 slots, got " + std::to_string(n_steps));
    if (n_flows == 0) throw UsageError("calibration trace has no flows");

    Calibration out;
    auto& m = out.model;
    m.rho.resize(n_flows);
    m.noise_var.resize(n_flows);
    m.mean.resize(n_flows);
    m.init_mean.resize(n_flows);
    m.init_var.resize(n_flows);

    for (Eigen::Index j = 0; j < n_flows; ++j) {
        const auto column = training.col(j);
        const double level = column.mean();
        m.mean(j) = level;
        m.init_mean(j) = column(n_steps - 1);
        if (column.maxCoeff() == column.minCoeff()) {
            out.constant_flows.push_back(static_cast<std::size_t>(j));
            m.rho(j) = 0.0;
            m.noise_var(j) = options.var_floor;
            m.init_var(j) = options.var_floor;
            continue;
        }
        const Eigen::ArrayXd centered = column.array() - level;
        const double sum_sq = centered.square().sum();
        const double lag1 = (centered.head(n_steps - 1) * centered.tail(n_steps - 1)).sum();
        const double rho = std::clamp(lag1 / sum_sq, -options.rho_clamp, options.rho_clamp);
        const double variance = sum_sq / static_cast<double>(n_steps);
        m.rho(j) = rho;
        m.noise_var(j) = std::max(options.var_floor, (1.0 - rho * rho) * variance);
        m.init_var(j) = m.noise_var(j) / (1.0 - rho * rho);
    }
    if (out.constant_flows.size() == static_cast<std::size_t>(n_flows)) {
        throw UsageError("calibration trace is constant in every flow");
    }
    return out;
}

FlowModel synthetic_model(std::size_t n_flows, const SyntheticModelSpec& spec, std::uint64_t seed) {
    if (n_flows == 0) throw UsageError("synthetic model needs at least one flow");
    if (!(spec.mean_min > 0.0) || spec.mean_max < spec.mean_min) throw UsageError("bad synthetic mean range");
    if (!(spec.rho_min > -1.0) || !(spec.rho_max < 1.0) || spec.rho_max < spec.rho_min) {
        throw UsageError("bad synthetic rho range");
    }
    if (!(spec.cv > 0.0)) throw UsageError("synthetic cv must be positive");

    auto rng = make_engine(seed, {stream::kModel});
    std::uniform_real_distribution<double> log_level(std::log(spec.mean_min), std::log(spec.mean_max));
    std::uniform_real_distribution<double> memory(spec.rho_min, spec.rho_max);
    const auto n = static_cast<Eigen::Index>(n_flows);
    FlowModel m{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index j = 0; j < n; ++j) {
        const double level = std::exp(log_level(rng));
        const double rho = memory(rng);
        const double stationary = (spec.cv * level) * (spec.cv * level);
        m.mean(j) = level;
        m.rho(j) = rho;
        m.noise_var(j) = stationary * (1.0 - rho * rho);
        m.init_mean(j) = level;
        m.init_var(j) = stationary;
    }
    return m;
}

TraceMatrix read_trace_csv(std::istream& in) {
    std::string line;
    if (!csv::next_line(in, line)) throw UsageError("trace CSV is empty");
    const auto header = csv::split(line);
    if (header.size() < 2 || header[0] != "t") throw UsageError("trace CSV header must start with 't'");
    const std::size_t n_flows = header.size() - 1;
    for (std::size_t j = 0; j < n_flows; ++j) {
        if (header[j + 1] != "flow_" + std::to_string(j)) {
            throw UsageError("trace CSV header column " + std::to_string(j + 1) + " must be flow_" + std::to_string(j));
        }
    }
    std::vector<double> values;
    std::size_t n_rows = 0;
    while (csv::next_line(in, line)) {
        const auto fields = csv::split(line);
        if (fields.size() != header.size()) {
            throw UsageError("trace CSV row " + std::to_string(n_rows) + " has wrong field count");
        }
        for (std::size_t j = 0; j < n_flows; ++j) {
            const double v = csv::parse_double(fields[j + 1], "trace");
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw UsageError("trace CSV row " + std::to_string(n_rows) + " has a negative or non-finite volume");
            }
            values.push_back(v);
        }
        ++n_rows;
    }
    if (n_rows == 0) throw UsageError("trace CSV has no rows");
    TraceMatrix trace(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_flows));
    for (std::size_t t = 0; t < n_rows; ++t) {
        for (std::size_t j = 0; j < n_flows; ++j) {
            trace(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = values[t * n_flows + j];
        }
    }
    return trace;
}

TraceMatrix read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open trace CSV " + path.string());
    return read_trace_csv(in);
}

void write_trace_csv(std::ostream& out, const TraceMatrix& trace) {
    out << 't';
    for (Eigen::Index j = 0; j < trace.cols(); ++j) out << ",flow_" << j;
    out << '\n';
    for (Eigen::Index t = 0; t < trace.rows(); ++t) {
        out << t;
        for (Eigen::Index j = 0; j < trace.cols(); ++j) out << ',' << csv::format(trace(t, j));
        out << '\n';
    }
}

void write_trace_csv(const std::filesystem::path& path, const TraceMatrix& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write trace CSV " + path.string());
    write_trace_csv(out, trace);
}

namespace {

std::vector<double> as_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd vector_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) {
        throw UsageError(std::string("flow model JSON needs array '") + key + "'");
    }
    const auto values = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

nlohmann::json to_json(const FlowModel& model) {
    return {{"rho", as_std(model.rho)},
            {"noise_var", as_std(model.noise_var)},
            {"mean", as_std(model.mean)},
            {"init_mean", as_std(model.init_mean)},
            {"init_var", as_std(model.init_var)}};
}

FlowModel flow_model_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("flow model JSON must be an object");
    FlowModel m{vector_field(j, "rho"), vector_field(j, "noise_var"), vector_field(j, "mean"),
                vector_field(j, "init_mean"), vector_field(j, "init_var")};
    m.validate();
    return m;
}

}  // namespace netsample
