#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "cpes/grid.hpp"
#include "test_util.hpp"

using namespace cpes;
using Catch::Approx;

TEST_CASE("rts-24 case parses to the expected shape", "[grid]") {
    Network net = testutil::rts24();
    CHECK(net.size() == 24);
    CHECK(net.generators.size() == 11);
    CHECK(net.loads.size() == 17);
    CHECK(net.base_mva == 100.0);
    CHECK(net.external_id(net.slack_index()) == 13);

    int in_service = 0;
    std::set<std::pair<int, int>> corridors;
    for (const auto& br : net.branches) {
        if (br.in_service) ++in_service;
        corridors.insert({std::min(br.from_bus, br.to_bus),
                          std::max(br.from_bus, br.to_bus)});
    }
    // 38 branch rows, four parallel circuits, five transformers
    CHECK(net.branches.size() == 38);
    CHECK(in_service == 38);
    CHECK(corridors.size() == 34);
    int trafos = 0;
    for (const auto& br : net.branches)
        if (br.is_transformer()) ++trafos;
    CHECK(trafos == 5);

    double total_load = 0.0;
    for (const auto& l : net.loads) total_load += l.demand.real();
    CHECK(total_load == Approx(2850.0));

    // plant at external bus 16 drives the case study: single unit, Pmin 54.3
    bool found = false;
    for (const auto& g : net.generators)
        if (g.bus == 16) {
            found = true;
            CHECK(g.p_min == Approx(54.3));
            CHECK(g.p_max == Approx(155.0));
        }
    CHECK(found);
}

TEST_CASE("degenerate single-bus network is valid", "[grid]") {
    const std::string text = R"(
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 138 1 1.05 0.95;
];
)";
    Network net = parse_case(text);
    CHECK(net.size() == 1);
    CHECK(net.branches.empty());
    AdmittanceMatrix Y = build_ybus(net);
    CHECK(Y.rows() == 1);
}

TEST_CASE("dangling branch reference is a validation error", "[grid]") {
    std::string text = testutil::slurp(testutil::data_path("case24_ieee_rts.m"));
    const std::string needle = "21\t22\t0.0087";
    auto pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, needle.size(), "21\t99\t0.0087");
    CHECK_THROWS_AS(parse_case(text), ValidationError);
}

TEST_CASE("malformed field reports line and column", "[grid]") {
    const std::string text = R"(
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 138 1 1.05 0.95;
  2 1 0 0 0 x 1 1 0 138 1 1.05 0.95;
];
)";
    try {
        parse_case(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 5);
        CHECK(e.column > 0);
        CHECK(std::string(e.what()).find("malformed") != std::string::npos);
    }
}

TEST_CASE("two slack buses rejected", "[grid]") {
    const std::string text = R"(
mpc.bus = [
  1 3 0 0 0 0 1 1 0 138 1 1.05 0.95;
  2 3 0 0 0 0 1 1 0 138 1 1.05 0.95;
];
)";
    CHECK_THROWS_AS(parse_case(text), ValidationError);
}

TEST_CASE("two-bus ybus matches the textbook stamp", "[grid]") {
    auto net = testutil::NetBuilder()
                   .bus(1, BusKind::Slack)
                   .bus(2, BusKind::PQ)
                   .line(1, 2, 0.01, 0.1)
                   .done();
    AdmittanceMatrix Y = build_ybus(net);
    const Complex y = 1.0 / Complex(0.01, 0.1);
    CHECK(std::abs(Complex(Y.coeff(0, 0)) - y) < 1e-14);
    CHECK(std::abs(Complex(Y.coeff(1, 1)) - y) < 1e-14);
    CHECK(std::abs(Complex(Y.coeff(0, 1)) + y) < 1e-14);
    CHECK(std::abs(Complex(Y.coeff(1, 0)) + y) < 1e-14);
}

TEST_CASE("pure-series ybus rows sum to zero on rts-24", "[grid]") {
    Network net = testutil::rts24();
    // strip charging and shunts so only the series graph remains
    for (auto& br : net.branches) {
        br.charging_admittance = Complex(0, 0);
        br.tap = 1.0;
    }
    for (auto& b : net.buses) b.shunt_admittance = Complex(0, 0);
    net.finalize();
    AdmittanceMatrix Y = build_ybus(net);

    // oracle: assemble element-by-element from the branch list
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(24, 24);
    for (const auto& br : net.branches) {
        const int f = net.index_of(br.from_bus);
        const int t = net.index_of(br.to_bus);
        ref(f, f) += br.series_admittance;
        ref(t, t) += br.series_admittance;
        ref(f, t) -= br.series_admittance;
        ref(t, f) -= br.series_admittance;
    }
    CHECK((Eigen::MatrixXcd(Y) - ref).cwiseAbs().maxCoeff() < 1e-12);
    for (int r = 0; r < 24; ++r) {
        Complex sum(0, 0);
        for (int c = 0; c < 24; ++c) sum += Eigen::MatrixXcd(Y)(r, c);
        CHECK(std::abs(sum) < 1e-11);
    }
}

TEST_CASE("out-of-service branch contributes nothing", "[grid]") {
    auto builder = testutil::NetBuilder()
                       .bus(1, BusKind::Slack)
                       .bus(2, BusKind::PQ)
                       .bus(3, BusKind::PQ)
                       .line(1, 2, 0.01, 0.1)
                       .line(2, 3, 0.02, 0.2);
    builder.net.branches[1].in_service = false;
    Network net = builder.done();
    AdmittanceMatrix Y = build_ybus(net);
    CHECK(std::abs(Complex(Y.coeff(1, 2))) == 0.0);
    CHECK(std::abs(Complex(Y.coeff(2, 2))) == 0.0);
}

TEST_CASE("branch removal equals the rank-2 update", "[grid]") {
    Network net = testutil::rts24();
    const int k = 21;  // 13-23, an ordinary 230 kV line
    Eigen::MatrixXcd before(build_ybus(net));
    net.branches[k].in_service = false;
    Eigen::MatrixXcd after(build_ybus(net));
    const auto& br = net.branches[k];
    const int f = net.index_of(br.from_bus);
    const int t = net.index_of(br.to_bus);
    Eigen::MatrixXcd expected = before;
    const Complex y = br.series_admittance;
    const Complex yc = br.charging_admittance / 2.0;
    expected(f, f) -= y + yc;
    expected(t, t) -= y + yc;
    expected(f, t) += y;
    expected(t, f) += y;
    CHECK((after - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("json serialization round-trips", "[grid]") {
    Network net = testutil::rts24();
    ordered_json j1 = to_json(net);
    Network back = network_from_json(json::parse(j1.dump()));
    ordered_json j2 = to_json(back);
    CHECK(j1.dump() == j2.dump());
    CHECK(back.size() == net.size());
    CHECK(back.branches.size() == net.branches.size());
}
