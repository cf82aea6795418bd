#include <doctest.h>

#include <set>
#include <sstream>

#include "netsample/errors.hpp"
#include "netsample/rng.hpp"
#include "netsample/routing.hpp"

using namespace netsample;

namespace {

RoutingMatrix small() {
    Eigen::MatrixXd r(2, 3);
    r << 1, 0, 1,
         0, 1, 1;
    return RoutingMatrix(r);
}

}  // namespace

TEST_CASE("links_of_flow and flows_on_link read columns and rows") {
    const auto r = small();
    CHECK(r.links_of_flow(2) == std::vector<std::size_t>{0, 1});
    CHECK(r.links_of_flow(0) == std::vector<std::size_t>{0});
    CHECK(r.flows_on_link(0) == std::vector<std::size_t>{0, 2});
    CHECK(r.flows_on_link(1) == std::vector<std::size_t>{1, 2});
    CHECK_THROWS_AS(r.links_of_flow(3), UsageError);
    CHECK_THROWS_AS(r.flows_on_link(2), UsageError);
}

TEST_CASE("routing matrix validation") {
    Eigen::MatrixXd empty_column(2, 2);
    empty_column << 1, 0,
                    1, 0;
    CHECK_THROWS_AS(RoutingMatrix{empty_column}, UsageError);

    Eigen::MatrixXd non_binary(1, 1);
    non_binary << 0.5;
    CHECK_THROWS_AS(RoutingMatrix{non_binary}, UsageError);

    Eigen::MatrixXd unused_row(2, 1);
    unused_row << 1,
                  0;
    const RoutingMatrix r(unused_row);
    CHECK(r.flows_on_link(1).empty());
}

TEST_CASE("link_loads is R x") {
    const auto r = small();
    const Eigen::Vector3d x(10, 20, 30);
    CHECK(r.link_loads(x) == Eigen::Vector2d(40, 50));
    CHECK(r.link_loads(Eigen::Vector3d::Zero()) == Eigen::Vector2d::Zero());
    CHECK_THROWS_AS(r.link_loads(Eigen::Vector2d(1, 2)), UsageError);

    const RoutingMatrix identity(Eigen::MatrixXd::Identity(4, 4));
    const Eigen::Vector4d y(3.5, 0, 7, 1e5);
    CHECK(identity.link_loads(y) == y);
}

TEST_CASE("link_loads linearity, monotonicity and index transposition on random routings") {
    Engine rng(7);
    std::bernoulli_distribution coin(0.4);
    std::uniform_real_distribution<double> vol(0.0, 1000.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int L = 1 + trial % 6, J = 1 + trial % 5;
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(L, J);
        for (int j = 0; j < J; ++j) {
            for (int l = 0; l < L; ++l) m(l, j) = coin(rng) ? 1 : 0;
            m(static_cast<int>(rng() % L), j) = 1;
        }
        const RoutingMatrix r(m);
        Eigen::VectorXd x1(J), x2(J);
        for (int j = 0; j < J; ++j) {
            x1(j) = vol(rng);
            x2(j) = vol(rng);
        }
        const double a = 0.3, b = 2.5;
        CHECK((r.link_loads(a * x1 + b * x2) - (a * r.link_loads(x1) + b * r.link_loads(x2))).cwiseAbs().maxCoeff() <
              1e-9);
        Eigen::VectorXd bumped = x1;
        bumped(trial % J) += 17.0;
        CHECK(((r.link_loads(bumped) - r.link_loads(x1)).array() >= 0.0).all());
        for (int l = 0; l < L; ++l) {
            for (int j = 0; j < J; ++j) {
                const auto& fl = r.flows_on_link(l);
                const auto& lf = r.links_of_flow(j);
                const bool in_row = std::find(fl.begin(), fl.end(), std::size_t(j)) != fl.end();
                const bool in_col = std::find(lf.begin(), lf.end(), std::size_t(l)) != lf.end();
                CHECK(in_row == in_col);
            }
        }
    }
}

TEST_CASE("routing CSV round trip and rejection of bad cells") {
    const auto r = small();
    std::stringstream ss;
    write_routing_csv(ss, r);
    CHECK(ss.str() == "link,flow_0,flow_1,flow_2\n0,1,0,1\n1,0,1,1\n");
    CHECK(read_routing_csv(ss) == r);

    std::stringstream bad("link,flow_0\n0,2\n");
    CHECK_THROWS_AS(read_routing_csv(bad), UsageError);
    std::stringstream frac("link,flow_0\n0,0.5\n");
    CHECK_THROWS_AS(read_routing_csv(frac), UsageError);
    std::stringstream header("lnk,flow_0\n0,1\n");
    CHECK_THROWS_AS(read_routing_csv(header), UsageError);
    std::stringstream orphan("link,flow_0,flow_1\n0,1,0\n");
    CHECK_THROWS_AS(read_routing_csv(orphan), UsageError);
}

TEST_CASE("backbone synthetic routing has 26 links and 72 flows") {
    const auto r = synthetic_routing(9, 26, 72, 1);
    CHECK(r.n_links() == 26);
    CHECK(r.n_flows() == 72);
    std::size_t longest = 0;
    for (std::size_t j = 0; j < r.n_flows(); ++j) longest = std::max(longest, r.links_of_flow(j).size());
    CHECK(longest >= 4);
    // Houston (3) -> New York (8) goes through Kansas City and Chicago.
    // Flow index: source-major over ordered pairs, skipping the diagonal.
    const std::size_t houston_ny = 3 * 8 + 7;
    CHECK(r.links_of_flow(houston_ny).size() == 3);
}

TEST_CASE("ring-with-chords routing is connected and seed-stable") {
    const auto a = synthetic_routing(6, 16, 30, 42);
    const auto b = synthetic_routing(6, 16, 30, 42);
    CHECK(a == b);
    CHECK(a.n_links() == 16);
    CHECK(a.n_flows() == 30);
    CHECK_THROWS_AS(ring_chord_topology(6, 15, 1), UsageError);
    CHECK_THROWS_AS(ring_chord_topology(4, 14, 1), UsageError);
    CHECK_THROWS_AS(route_all_pairs(ring_chord_topology(4, 8, 1), 13), UsageError);
}
