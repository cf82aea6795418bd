#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "netsample/errors.hpp"
#include "netsample/sampling.hpp"

using namespace netsample;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(v.size() - 1);
    return m;
}

// Combined variance of weights w over per-link variances v (independent links).
double weighted_variance(const std::vector<double>& w, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * w[i] * v[i];
    return s;
}

RoutingMatrix serial_two_links() {
    Eigen::MatrixXd r(2, 1);
    r << 1, 1;
    return RoutingMatrix(r);
}

}  // namespace

TEST_CASE("bernoulli_sample edge rates are exact") {
    Engine rng(1);
    CHECK(bernoulli_sample(1000, 1.0, rng) == 1000);
    CHECK(bernoulli_sample(1000, 0.0, rng) == 0);
    CHECK(bernoulli_sample(0, 0.3, rng) == 0);
    for (int i = 0; i < 100; ++i) CHECK(bernoulli_sample(50, 0.7, rng) <= 50);
    CHECK_THROWS_AS(bernoulli_sample(10, 1.5, rng), UsageError);
}

TEST_CASE("bernoulli_sample mean matches x*u within 3 sigma") {
    Engine rng(2);
    const int draws = 100000;
    double total = 0.0;
    for (int i = 0; i < draws; ++i) total += static_cast<double>(bernoulli_sample(1000, 0.2, rng));
    const double sigma = std::sqrt(1000 * 0.2 * 0.8) / std::sqrt(double(draws));
    CHECK(std::abs(total / draws - 200.0) <= 3 * sigma);
}

TEST_CASE("link_estimate and its variance") {
    CHECK(link_estimate(200, 0.2) == doctest::Approx(1000));
    CHECK(link_estimate(0, 0.5) == 0);
    CHECK(link_estimate(1234, 1.0) == 1234);
    CHECK_THROWS_AS(link_estimate(5, 0.0), NoEstimateError);

    CHECK(link_estimator_variance(1000, 0.2) == doctest::Approx(4000));
    CHECK(link_estimator_variance(777, 1.0) == 0);
    CHECK(std::isinf(link_estimator_variance(1000, 0.0)));
}

TEST_CASE("link_estimate is unbiased with variance x(1-u)/u") {
    Engine rng(3);
    for (double u : {0.05, 0.2, 0.5, 0.9}) {
        std::vector<double> est;
        for (int i = 0; i < 100000; ++i) est.push_back(link_estimate(double(bernoulli_sample(1000, u, rng)), u));
        const auto m = moments(est);
        const double v = link_estimator_variance(1000, u);
        INFO("u=" << u);
        CHECK(std::abs(m.mean - 1000) <= 3 * std::sqrt(v / 1e5));
        CHECK(std::abs(m.var - v) / v < 0.05);
    }
}

TEST_CASE("blue_weights") {
    CHECK(blue_weights(std::vector<double>{4000, 4000}) == std::vector<double>{0.5, 0.5});
    const auto w = blue_weights(std::vector<double>{1000, 3000});
    CHECK(w[0] == doctest::Approx(0.75));
    CHECK(w[1] == doctest::Approx(0.25));
    CHECK(blue_weights(std::vector<double>{42}) == std::vector<double>{1.0});
    CHECK_THROWS_AS(blue_weights(std::vector<double>{}), NoObservationError);
    CHECK_THROWS_AS(blue_weights(std::vector<double>{1.0, 0.0}), UsageError);
}

TEST_CASE("blue_weights sum to one and ignore a common scale") {
    Engine rng(4);
    std::uniform_real_distribution<double> var(1.0, 1e5);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + trial % 5);
        for (auto& x : v) x = var(rng);
        const auto w = blue_weights(v);
        CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-12);
        for (double x : w) CHECK((x > 0.0 && x <= 1.0));
        const double c = scale(rng);
        std::vector<double> scaled = v;
        for (auto& x : scaled) x *= c;
        const auto ws = blue_weights(scaled);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(ws[i] - w[i]) < 1e-12);
    }
}

TEST_CASE("BLUE weights beat every simplex grid point") {
    Engine rng(5);
    std::uniform_real_distribution<double> rate(0.01, 0.99);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t links = 2 + trial % 2;
        std::vector<double> v(links);
        for (auto& x : v) x = link_estimator_variance(1000, rate(rng));
        const double best = weighted_variance(blue_weights(v), v);
        double grid_min = std::numeric_limits<double>::infinity();
        for (int a = 0; a <= 100; ++a) {
            if (links == 2) {
                grid_min = std::min(grid_min, weighted_variance({a / 100.0, 1 - a / 100.0}, v));
                continue;
            }
            for (int b = 0; a + b <= 100; ++b) {
                grid_min = std::min(grid_min, weighted_variance({a / 100.0, b / 100.0, (100 - a - b) / 100.0}, v));
            }
        }
        CHECK(best <= grid_min + 1e-9);
        // And the optimum equals the harmonic composition.
        double precision = 0.0;
        for (double x : v) precision += 1.0 / x;
        CHECK(best == doctest::Approx(1.0 / precision).epsilon(1e-12));
    }
}

TEST_CASE("combine") {
    CHECK(combine(std::vector<double>{1000, 1200}, std::vector<double>{0.5, 0.5}) == doctest::Approx(1100));
    CHECK(combine(std::vector<double>{987.5}, std::vector<double>{1.0}) == 987.5);
    CHECK(combine(std::vector<double>{900, 1100, 1000}, blue_weights(std::vector<double>{1, 1, 1})) ==
          doctest::Approx(1000));
    CHECK_THROWS_AS(combine(std::vector<double>{1, 2}, std::vector<double>{1.0}), UsageError);
    CHECK_THROWS_AS(combine(std::vector<double>{1, 2}, std::vector<double>{0.6, 0.6}), UsageError);
}

TEST_CASE("combined_variance_coeff") {
    CHECK(combined_variance_coeff(std::vector<double>{0.2, 0.2}) == doctest::Approx(2.0));
    CHECK(1000 * combined_variance_coeff(std::vector<double>{0.2, 0.2}) ==
          doctest::Approx(1.0 / (1.0 / 4000 + 1.0 / 4000)));
    CHECK(combined_variance_coeff(std::vector<double>{1.0, 0.3}) == 0.0);
    CHECK(combined_variance_coeff(std::vector<double>{1.0, 0.0}) == 0.0);
    CHECK(std::isinf(combined_variance_coeff(std::vector<double>{0.0, 0.0})));
    CHECK(combined_variance_coeff(std::vector<double>{0.0, 0.2}) == doctest::Approx(4.0));
}

TEST_CASE("combined_variance_coeff is the harmonic composition and monotone") {
    Engine rng(6);
    std::uniform_real_distribution<double> rate(0.001, 0.999);
    std::uniform_real_distribution<double> vol(1.0, 1e6);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> u(1 + trial % 4);
        for (auto& x : u) x = rate(rng);
        const double x = vol(rng);
        double precision = 0.0;
        for (double r : u) precision += 1.0 / link_estimator_variance(x, r);
        CHECK(x * combined_variance_coeff(u) == doctest::Approx(1.0 / precision).epsilon(1e-10));

        auto raised = u;
        raised[trial % u.size()] = std::min(1.0, raised[trial % u.size()] + 0.05);
        CHECK(combined_variance_coeff(raised) <= combined_variance_coeff(u));
    }
}

TEST_CASE("observe_flows: lossless, unobserved, and composite variance") {
    Eigen::MatrixXd m(3, 3);
    m << 1, 0, 1,
         0, 1, 1,
         0, 0, 1;
    const RoutingMatrix routing(m);
    const Eigen::Vector3d truth(1000.4, 52.0, 7.0);

    SamplingPlan lossless(routing);
    lossless.set(routing, 0, 0, 1.0);
    lossless.set(routing, 1, 1, 1.0);
    lossless.set(routing, 2, 2, 1.0);
    const auto exact = observe_flows(truth, lossless, routing, 1);
    for (int j = 0; j < 3; ++j) {
        REQUIRE(exact[j].combined.has_value());
        CHECK(*exact[j].combined == truth(j));
        CHECK(exact[j].combined_var_coeff == 0.0);
    }

    const auto none = observe_flows(truth, SamplingPlan(routing), routing, 1);
    for (const auto& o : none) {
        CHECK_FALSE(o.combined.has_value());
        CHECK(std::isinf(o.combined_var_coeff));
        CHECK(o.per_link_counts.empty());
    }

    SamplingPlan partial(routing);
    partial.set(routing, 1, 2, 0.3);
    const auto p = observe_flows(truth, partial, routing, 2);
    CHECK(p[2].per_link_counts.size() == 1);
    CHECK(p[2].per_link_counts.count(1) == 1);
    CHECK_FALSE(p[0].combined.has_value());
}

TEST_CASE("combined estimate on a two-link path has variance x/sum(u/(1-u))") {
    const auto routing = serial_two_links();
    SamplingPlan plan(routing);
    plan.set(routing, 0, 0, 0.2);
    plan.set(routing, 1, 0, 0.2);
    const Eigen::VectorXd truth = Eigen::VectorXd::Constant(1, 1000);
    std::vector<double> combined;
    for (std::uint64_t trial = 0; trial < 10000; ++trial) {
        combined.push_back(*observe_flows(truth, plan, routing, trial)[0].combined);
    }
    const auto m = moments(combined);
    CHECK(std::abs(m.var - 2000) / 2000 < 0.10);
    CHECK(std::abs(m.mean - 1000) <= 3 * std::sqrt(2000.0 / 1e4));
}

TEST_CASE("sampling plan rejects off-path and out-of-range rates") {
    const auto routing = serial_two_links();
    SamplingPlan plan(routing);
    CHECK_THROWS_AS(plan.set(routing, 0, 0, 1.2), UsageError);
    Eigen::MatrixXd m(2, 3);
    m << 1, 0, 1,
         0, 1, 1;
    const RoutingMatrix r(m);
    SamplingPlan p(r);
    CHECK_THROWS_AS(p.set(r, 1, 0, 0.1), UsageError);
    Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(2, 3);
    rates(0, 1) = 0.2;
    CHECK_THROWS_AS(SamplingPlan(r, rates), UsageError);
}
