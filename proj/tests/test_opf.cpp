#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cpes/opf.hpp"
#include "cpes/pipeline.hpp"
#include "test_util.hpp"

using namespace cpes;
using Catch::Approx;

namespace {

cpes::CyberScenario rts_scenario() {
    return scenario_from_json(json::parse(
        testutil::slurp(testutil::data_path("scenario_rts24.json"))));
}

cpes::Weights rts_weights() {
    return Weights::from_json(json::parse(
        testutil::slurp(testutil::data_path("weights_rts24.json"))));
}

}  // namespace

TEST_CASE("flow-end derivatives match finite differences", "[opf][derivatives]") {
    Network net = testutil::rts24();
    std::vector<int> branch_of_end;
    auto ends = opf_detail::make_flow_ends(net, branch_of_end);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ang(-0.4, 0.4), mag(0.95, 1.05);
    const double h = 1e-6;
    for (size_t e = 0; e < ends.size(); e += 7) {
        const auto& fe = ends[e];
        double x[4] = {ang(rng), ang(rng), mag(rng), mag(rng)};
        auto at = [&](double ti, double tj, double vi, double vj) {
            return fe.eval(ti, tj, vi, vj);
        };
        auto ev = at(x[0], x[1], x[2], x[3]);
        for (int c = 0; c < 4; ++c) {
            double xp[4] = {x[0], x[1], x[2], x[3]};
            double xm[4] = {x[0], x[1], x[2], x[3]};
            xp[c] += h;
            xm[c] -= h;
            auto ep = at(xp[0], xp[1], xp[2], xp[3]);
            auto em = at(xm[0], xm[1], xm[2], xm[3]);
            CHECK(ev.dP[c] == Approx((ep.P - em.P) / (2 * h)).margin(1e-5));
            CHECK(ev.dQ[c] == Approx((ep.Q - em.Q) / (2 * h)).margin(1e-5));
            // second derivatives as differences of the analytic gradient
            static const int packed[4][4] = {
                {0, 1, 3, 4}, {1, 2, 5, 6}, {3, 5, 7, 8}, {4, 6, 8, 9}};
            for (int r = 0; r < 4; ++r) {
                CHECK(ev.hP[packed[r][c]] ==
                      Approx((ep.dP[r] - em.dP[r]) / (2 * h)).margin(1e-4));
                CHECK(ev.hQ[packed[r][c]] ==
                      Approx((ep.dQ[r] - em.dQ[r]) / (2 * h)).margin(1e-4));
            }
        }
    }
}

TEST_CASE("injection hessian matches finite differences of the jacobian",
          "[opf][derivatives]") {
    Network net = testutil::rts24();
    AdmittanceMatrix Y = build_ybus(net);
    const int n = net.size();
    opf_detail::Layout L{n, 0};
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> ang(-0.3, 0.3), mag(0.95, 1.05), lam(-2, 2);
    Eigen::VectorXd th(n), vm(n), lamP(n), lamQ(n);
    for (int b = 0; b < n; ++b) {
        th(b) = ang(rng);
        vm(b) = mag(rng);
        lamP(b) = lam(rng);
        lamQ(b) = lam(rng);
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    opf_detail::add_injection_hessian(Y, th, vm, lamP, lamQ, H, L);

    // gradient of lam . [P;Q] via the complex jacobian
    auto grad = [&](const Eigen::VectorXd& t, const Eigen::VectorXd& v) {
        Eigen::VectorXcd V(n);
        for (int b = 0; b < n; ++b) V(b) = std::polar(v(b), t(b));
        Eigen::MatrixXcd dS_dVa, dS_dVm;
        pf_detail::dSbus_dV(Y, V, dS_dVa, dS_dVm);
        Eigen::VectorXd g(2 * n);
        g.head(n) = dS_dVa.real().transpose() * lamP + dS_dVa.imag().transpose() * lamQ;
        g.tail(n) = dS_dVm.real().transpose() * lamP + dS_dVm.imag().transpose() * lamQ;
        return g;
    };
    const double h = 1e-6;
    for (int c = 0; c < 2 * n; c += 5) {
        Eigen::VectorXd tp = th, tm = th, vp = vm, vmm = vm;
        if (c < n) {
            tp(c) += h;
            tm(c) -= h;
        } else {
            vp(c - n) += h;
            vmm(c - n) -= h;
        }
        Eigen::VectorXd fd = (grad(tp, vp) - grad(tm, vmm)) / (2 * h);
        for (int r = 0; r < 2 * n; ++r)
            CHECK(H(r, c) == Approx(fd(r)).margin(2e-4));
    }
}

TEST_CASE("single-bus dispatch is the trivial balance", "[opf]") {
    auto net = testutil::NetBuilder()
                   .bus(1, BusKind::Slack, 50.0, 10.0)
                   .gen(1, 0, 100, -50, 50, 0.02, 11.0, 7.0)
                   .done();
    auto sol = solve_t_acopf(net);
    REQUIRE(sol.converged);
    CHECK(sol.p_mw[0] == Approx(50.0).margin(1e-4));
    CHECK(sol.q_mvar[0] == Approx(10.0).margin(1e-4));
    CHECK(sol.cost == Approx(0.02 * 2500.0 + 11.0 * 50.0 + 7.0).margin(1e-3));
}

TEST_CASE("rts-24 traditional dispatch reproduces the reference solution",
          "[opf][slow]") {
    Network net = testutil::rts24();
    auto sol = solve_t_acopf(net);
    REQUIRE(sol.converged);
    CHECK(sol.kkt_residual < 1e-6);
    CHECK(sol.cost == Approx(49903.5432).epsilon(0.005));
    // plants pinned at capacity in the reference table
    std::map<int, double> p_at;
    for (size_t g = 0; g < net.generators.size(); ++g)
        p_at[net.generators[g].bus] = sol.p_mw[g];
    CHECK(p_at.at(18) == Approx(400.0).margin(0.1));
    CHECK(p_at.at(21) == Approx(400.0).margin(0.1));
    CHECK(p_at.at(23) == Approx(660.0).margin(0.1));
    CHECK(p_at.at(1) == Approx(192.0).margin(0.1));
    CHECK(p_at.at(15) == Approx(215.0).margin(0.1));
    // independent verification of every model constraint
    CHECK(sol.max_violation < 1e-6);
}

TEST_CASE("infeasible demand is rejected with a certificate", "[opf]") {
    auto net = testutil::NetBuilder()
                   .bus(1, BusKind::Slack, 500.0, 50.0)
                   .bus(2, BusKind::PQ, 500.0, 50.0)
                   .line(1, 2, 0.01, 0.1, 0.0, 400.0)
                   .gen(1, 0, 100, -50, 50)
                   .done();
    CHECK_THROWS_MATCHES(solve_t_acopf(net), OpfError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("infeasible")));
}

TEST_CASE("cyber gate bound rewriting", "[opf][gate]") {
    Network net = testutil::rts24();
    CyberScenario sc = rts_scenario();
    std::vector<double> cq(net.size(), 0.0);

    SECTION("all scores below the threshold leave bounds unchanged") {
        auto prob = apply_cyber_gate(net, cq, sc);
        for (size_t g = 0; g < net.generators.size(); ++g) {
            CHECK(prob.p_hi[g] == net.generators[g].p_max);
            CHECK(prob.p_lo[g] == net.generators[g].p_min);
            CHECK_FALSE(prob.gates[g].gated);
        }
    }
    SECTION("curtailment holds the unit at its minimum output") {
        cq[net.index_of(16)] = 0.25;
        auto prob = apply_cyber_gate(net, cq, sc);
        for (size_t g = 0; g < net.generators.size(); ++g) {
            if (net.generators[g].bus == 16) {
                CHECK(prob.gates[g].gated);
                CHECK(prob.gates[g].alpha == Approx(54.3 / 155.0));
                CHECK(prob.p_hi[g] == Approx(54.3));
                CHECK(prob.q_hi[g] == net.generators[g].q_max);
            }
        }
    }
    SECTION("full shutdown when zeta is set") {
        cq[net.index_of(16)] = 0.25;
        CyberScenario sz = sc;
        sz.zeta[16] = 1;
        auto prob = apply_cyber_gate(net, cq, sz);
        for (size_t g = 0; g < net.generators.size(); ++g) {
            if (net.generators[g].bus == 16) {
                CHECK(prob.p_hi[g] == 0.0);
                CHECK(prob.p_lo[g] == 0.0);
                CHECK(prob.q_hi[g] == 0.0);
                CHECK(prob.q_lo[g] == 0.0);
            }
        }
    }
    SECTION("exempt buses keep their bounds") {
        cq[net.index_of(15)] = 0.9;
        auto prob = apply_cyber_gate(net, cq, sc);
        for (size_t g = 0; g < net.generators.size(); ++g)
            if (net.generators[g].bus == 15) {
                CHECK(prob.gates[g].exempt);
                CHECK_FALSE(prob.gates[g].gated);
                CHECK(prob.p_hi[g] == net.generators[g].p_max);
            }
    }
}

TEST_CASE("gated solve with zeta shutdown fixes the unit at zero", "[opf][gate][slow]") {
    Network net = testutil::rts24();
    CyberScenario sc = rts_scenario();
    sc.zeta[16] = 1;
    std::vector<double> cq(net.size(), 0.0);
    cq[net.index_of(16)] = 0.3;
    auto prob = apply_cyber_gate(net, cq, sc);
    auto sol = solve_opf(prob);
    REQUIRE(sol.converged);
    for (size_t g = 0; g < net.generators.size(); ++g)
        if (net.generators[g].bus == 16) {
            CHECK(std::abs(sol.p_mw[g]) < 1e-4);
            CHECK(std::abs(sol.q_mvar[g]) < 1e-4);
        }
}

TEST_CASE("c-acopf end to end on the case study", "[opf][pipeline][slow]") {
    Network net = testutil::rts24();
    auto res = solve_c_acopf(net, rts_scenario(), rts_weights());
    REQUIRE(res.traditional.converged);
    REQUIRE(res.cyber.converged);

    CHECK(res.cyber.cost == Approx(53621.1357).epsilon(0.005));
    CHECK(res.cyber.cost >= res.traditional.cost);

    std::map<int, double> p_c;
    for (size_t g = 0; g < net.generators.size(); ++g)
        p_c[net.generators[g].bus] = res.cyber.p_mw[g];
    CHECK(p_c.at(16) == Approx(54.30).margin(0.5));
    CHECK(p_c.at(13) == Approx(344.70).margin(5.0));

    // scores: attacked bus drops below the threshold after the redispatch
    const auto& before = res.score_before.by_external(16);
    const auto& after = res.score_after.by_external(16);
    CHECK(before.cq >= 0.2);
    CHECK(after.cq < 0.2);
    CHECK(res.score_before.flagged_buses() == std::vector<int>{15, 16, 24});
    CHECK(res.score_after.flagged_buses() == std::vector<int>{15, 24});

    // independent constraint check on both solutions
    CHECK(res.traditional.max_violation < 1e-6);
    CHECK(res.cyber.max_violation < 1e-6);
}

TEST_CASE("threshold above every score reduces to the traditional solve",
          "[opf][pipeline][slow]") {
    Network net = testutil::rts24();
    CyberScenario sc = rts_scenario();
    sc.rho = 1.0;  // nothing can reach it
    auto res = solve_c_acopf(net, sc, rts_weights());
    CHECK(res.cyber.cost == Approx(res.traditional.cost).margin(1.0));
    for (size_t g = 0; g < net.generators.size(); ++g)
        CHECK(res.cyber.p_mw[g] == Approx(res.traditional.p_mw[g]).margin(0.5));
}

TEST_CASE("angle limits can be enforced", "[opf]") {
    // cheap plant at 2, expensive at 1, load at 3: capping the 2-3 spread
    // limits what the cheap plant can deliver and shifts output to plant 1
    auto builder = testutil::NetBuilder()
                       .bus(1, BusKind::Slack)
                       .bus(2, BusKind::PV)
                       .bus(3, BusKind::PQ, 100.0, 20.0)
                       .line(1, 2, 0.002, 0.1, 0.0, 300.0)
                       .line(1, 3, 0.002, 0.1, 0.0, 300.0)
                       .line(2, 3, 0.002, 0.1, 0.0, 300.0)
                       .gen(1, 0, 300, -100, 100, 0.0, 50.0, 0.0)
                       .gen(2, 0, 200, -100, 100, 0.0, 5.0, 0.0);
    builder.net.branches[2].angle_diff_min = -0.04;
    builder.net.branches[2].angle_diff_max = 0.04;
    Network net = builder.done();

    OpfOptions relaxed;
    auto free_sol = solve_opf(OpfProblem::plain(net, relaxed));
    REQUIRE(free_sol.converged);
    const double d_free =
        std::arg(free_sol.voltages(1)) - std::arg(free_sol.voltages(2));
    CHECK(d_free > 0.04);  // the cap genuinely binds
    CHECK(free_sol.p_mw[0] < 5.0);  // cheap plant covers everything

    OpfOptions opt;
    opt.enforce_angle_limits = true;
    auto sol = solve_opf(OpfProblem::plain(net, opt));
    REQUIRE(sol.converged);
    const double d = std::arg(sol.voltages(1)) - std::arg(sol.voltages(2));
    CHECK(d <= 0.04 + 1e-6);
    CHECK(sol.max_violation < 1e-6);
    CHECK(sol.p_mw[0] > free_sol.p_mw[0] + 10.0);  // dispatch shifted
    CHECK(sol.cost > free_sol.cost);
}
