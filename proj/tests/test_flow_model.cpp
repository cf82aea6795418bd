#include <doctest.h>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netsample/errors.hpp"
#include "netsample/flow_model.hpp"

using namespace netsample;

namespace {

FlowModel single(double rho, double noise_var, double mean, double init_mean, double init_var) {
    FlowModel m;
    m.rho = Eigen::VectorXd::Constant(1, rho);
    m.noise_var = Eigen::VectorXd::Constant(1, noise_var);
    m.mean = Eigen::VectorXd::Constant(1, mean);
    m.init_mean = Eigen::VectorXd::Constant(1, init_mean);
    m.init_var = Eigen::VectorXd::Constant(1, init_var);
    return m;
}

FlowModel stationary(double rho, double noise_var, double mean) {
    return single(rho, noise_var, mean, mean, noise_var / (1 - rho * rho));
}

double sample_variance(const Eigen::VectorXd& v) {
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("simulate follows the noise-free recursion") {
    const auto trace = simulate(single(0.5, 1e-20, 100, 140, 1e-20), 3, 9);
    CHECK(trace(0, 0) == doctest::Approx(140).epsilon(1e-9));
    CHECK(trace(1, 0) == doctest::Approx(120).epsilon(1e-9));
    CHECK(trace(2, 0) == doctest::Approx(110).epsilon(1e-9));

    const auto flat = simulate(single(0.0, 1e-20, 250, 400, 1e-20), 6, 3);
    CHECK(flat(0, 0) == doctest::Approx(400).epsilon(1e-9));
    for (int t = 1; t < 6; ++t) CHECK(flat(t, 0) == doctest::Approx(250).epsilon(1e-9));
}

TEST_CASE("simulated AR(1) has the stationary variance noise/(1-rho^2)") {
    const auto trace = simulate(stationary(0.9, 100, 1000), 100000, 11);
    const double expected = 100.0 / (1.0 - 0.81);
    CHECK(expected == doctest::Approx(526.3).epsilon(1e-3));
    CHECK(std::abs(sample_variance(trace.col(0)) - expected) / expected < 0.05);
}

TEST_CASE("simulate is deterministic and nonnegative") {
    // Mean close to zero so the clamp is exercised.
    FlowModel m = stationary(0.8, 400, 10);
    const auto a = simulate(m, 2000, 5);
    const auto b = simulate(m, 2000, 5);
    const auto c = simulate(m, 2000, 6);
    CHECK(a == b);
    CHECK(a != c);
    CHECK((a.array() >= 0.0).all());
    CHECK((a.array() == 0.0).any());
    CHECK_THROWS_AS(simulate(m, 0, 1), UsageError);
}

TEST_CASE("calibrate recovers rho from a long AR(1) run") {
    const auto trace = simulate(stationary(0.9, 100, 1000), 10000, 21);
    const auto fit = calibrate(trace);
    CHECK(fit.model.rho(0) >= 0.85);
    CHECK(fit.model.rho(0) <= 0.95);
    CHECK(fit.constant_flows.empty());
    CHECK(fit.model.init_mean(0) == trace(9999, 0));
    CHECK(fit.model.init_var(0) == doctest::Approx(fit.model.noise_var(0) / (1 - fit.model.rho(0) * fit.model.rho(0))));
}

TEST_CASE("calibrate flags constant columns without failing") {
    Eigen::MatrixXd trace(20, 2);
    trace.col(0).setConstant(500);
    trace.col(1) = Eigen::VectorXd::LinSpaced(20, 0, 19);
    const auto fit = calibrate(trace, {.var_floor = 1e-6});
    CHECK(fit.model.mean(0) == 500);
    CHECK(fit.model.rho(0) == 0);
    CHECK(fit.model.noise_var(0) == 1e-6);
    CHECK(fit.constant_flows == std::vector<std::size_t>{0});

    CHECK_THROWS_AS(calibrate(Eigen::MatrixXd::Constant(20, 1, 3.0)), UsageError);
    CHECK_THROWS_AS(calibrate(Eigen::MatrixXd::Random(9, 2)), UsageError);
}

TEST_CASE("calibrate on white noise finds negligible memory") {
    const auto trace = simulate(stationary(0.0, 2500, 5000), 10000, 4);
    CHECK(std::abs(calibrate(trace).model.rho(0)) < 0.05);
}

TEST_CASE("calibrate(simulate(model)) recovers rho and noise_var within 10%") {
    std::uint64_t seed = 100;
    for (double rho : {-0.5, 0.0, 0.3, 0.7, 0.9, 0.95}) {
        for (double noise : {1.0, 100.0, 1e4}) {
            // Mean far above the stationary std so the zero clamp never binds.
            const double mean = 50.0 * std::sqrt(noise / (1 - rho * rho)) + 10.0;
            const auto fit = calibrate(simulate(stationary(rho, noise, mean), 10000, ++seed)).model;
            INFO("rho=" << rho << " noise=" << noise);
            if (rho == 0.0) {
                CHECK(std::abs(fit.rho(0)) < 0.05);
            } else {
                CHECK(std::abs(fit.rho(0) - rho) / std::abs(rho) < 0.10);
            }
            CHECK(std::abs(fit.noise_var(0) - noise) / noise < 0.10);
        }
    }
}

TEST_CASE("flow model validation") {
    CHECK_THROWS_AS(single(1.0, 1, 1, 1, 1).validate(), UsageError);
    CHECK_THROWS_AS(single(0.5, 0, 1, 1, 1).validate(), UsageError);
    CHECK_THROWS_AS(single(0.5, 1, 1, 1, 0).validate(), UsageError);
    CHECK_NOTHROW(single(-0.99, 1, 0, 1, 1).validate());
}

TEST_CASE("trace CSV and model JSON round trip") {
    const auto trace = simulate(stationary(0.5, 10, 100), 5, 2);
    std::stringstream ss;
    write_trace_csv(ss, trace);
    const auto back = read_trace_csv(ss);
    CHECK(back == trace);

    std::stringstream negative("t,flow_0\n0,-1\n");
    CHECK_THROWS_AS(read_trace_csv(negative), UsageError);

    const auto m = synthetic_model(5, {}, 3);
    const auto again = flow_model_from_json(nlohmann::json::parse(to_json(m).dump()));
    CHECK(again.rho == m.rho);
    CHECK(again.noise_var == m.noise_var);
    CHECK(again.mean == m.mean);
}

TEST_CASE("synthetic model spans the requested levels") {
    SyntheticModelSpec spec;
    const auto m = synthetic_model(72, spec, 8);
    CHECK(m.mean.minCoeff() >= spec.mean_min);
    CHECK(m.mean.maxCoeff() <= spec.mean_max);
    CHECK(m.mean.maxCoeff() / m.mean.minCoeff() > 100.0);
    CHECK(m.rho.minCoeff() >= spec.rho_min);
    CHECK(m.rho.maxCoeff() <= spec.rho_max);
    const Eigen::VectorXd cv = m.stationary_var().cwiseSqrt().cwiseQuotient(m.mean);
    CHECK(cv.minCoeff() == doctest::Approx(spec.cv));
    CHECK(cv.maxCoeff() == doctest::Approx(spec.cv));
}
