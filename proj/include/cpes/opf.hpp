// AC optimal power flow in polar coordinates, solved by a primal-dual
// interior-point method with analytic first and second derivatives, plus the
// cyber-gated variant that rescales generator bounds from per-bus scores.
#pragma once

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpes/cyber.hpp"
#include "cpes/grid.hpp"
#include "cpes/powerflow.hpp"

namespace cpes {

struct OpfError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OpfOptions {
    double feastol = 1e-6;
    double gradtol = 1e-6;
    double comptol = 1e-6;
    double costtol = 1e-6;
    int max_iter = 150;
    double sigma = 0.1;        // centering/reduction factor for the barrier
    double xi = 0.99995;       // fraction-to-boundary step scaling
    bool enforce_flow_limits = true;
    bool enforce_angle_limits = false;
};

struct GateDecision {
    size_t gen_index = 0;
    int bus = 0;               // external number
    double cq = 0.0;
    bool gated = false;
    bool exempt = false;
    int zeta = 0;
    double alpha = 1.0;
};

struct OpfProblem {
    const Network* net = nullptr;
    OpfOptions options;
    // per-generator bound overrides, MW / MVAr; empty = case limits
    std::vector<double> p_lo, p_hi, q_lo, q_hi;
    std::vector<GateDecision> gates;   // populated by apply_cyber_gate

    static OpfProblem plain(const Network& net, OpfOptions opt = {}) {
        OpfProblem p;
        p.net = &net;
        p.options = opt;
        for (const auto& g : net.generators) {
            p.p_lo.push_back(g.p_min);
            p.p_hi.push_back(g.p_max);
            p.q_lo.push_back(g.q_min);
            p.q_hi.push_back(g.q_max);
        }
        return p;
    }
};

struct OpfSolution {
    std::vector<double> p_mw;
    std::vector<double> q_mvar;
    Eigen::VectorXcd voltages;
    double cost = 0.0;
    bool converged = false;
    int iterations = 0;
    double kkt_residual = 0.0;
    std::string status;
    double max_violation = 0.0;       // from the independent checker
    std::string worst_constraint;
};

namespace opf_detail {

// Sparse-by-hand layout: x = [theta(n); v(n); Pg(ng); Qg(ng)]
struct Layout {
    int n = 0, ng = 0;
    int nx() const { return 2 * n + 2 * ng; }
    int th(int b) const { return b; }
    int vm(int b) const { return n + b; }
    int pg(int g) const { return 2 * n + g; }
    int qg(int g) const { return 2 * n + ng + g; }
};

// One branch end's complex power as a function of (theta_i, theta_j, v_i, v_j):
//   P =  gA v_i^2 - (v_i v_j / tap) u(d),  u = g cos d + b sin d
//   Q = -bA v_i^2 - (v_i v_j / tap) w(d),  w = g sin d - b cos d,  d = th_i - th_j
// with (gA, bA) the self-admittance seen at that end. u' = -w, w' = u.
struct FlowEnd {
    int i = 0, j = 0;      // dense bus indices (i is this end)
    double gA = 0, bA = 0; // Re/Im of self term
    double g = 0, b = 0;   // series admittance
    double inv_tap = 1.0;  // 1/tap applied to the cross term

    struct Eval {
        double P, Q;
        // gradients over (th_i, th_j, v_i, v_j)
        double dP[4], dQ[4];
        // symmetric Hessians, packed [titi, titj, tjtj, tivi, tivj, tjvi, tjvj, vivi, vivj, vjvj]
        double hP[10], hQ[10];
    };

    Eval eval(double thi, double thj, double vi, double vj) const {
        const double d = thi - thj;
        const double u = g * std::cos(d) + b * std::sin(d);
        const double w = g * std::sin(d) - b * std::cos(d);
        const double cvv = vi * vj * inv_tap;
        Eval e;
        e.P = gA * vi * vi - cvv * u;
        e.Q = -bA * vi * vi - cvv * w;
        e.dP[0] = cvv * w;
        e.dP[1] = -cvv * w;
        e.dP[2] = 2 * gA * vi - vj * inv_tap * u;
        e.dP[3] = -vi * inv_tap * u;
        e.dQ[0] = -cvv * u;
        e.dQ[1] = cvv * u;
        e.dQ[2] = -2 * bA * vi - vj * inv_tap * w;
        e.dQ[3] = -vi * inv_tap * w;
        // P second derivatives
        e.hP[0] = cvv * u;             // titi
        e.hP[1] = -cvv * u;            // titj
        e.hP[2] = cvv * u;             // tjtj
        e.hP[3] = vj * inv_tap * w;    // tivi
        e.hP[4] = vi * inv_tap * w;    // tivj
        e.hP[5] = -vj * inv_tap * w;   // tjvi
        e.hP[6] = -vi * inv_tap * w;   // tjvj
        e.hP[7] = 2 * gA;              // vivi
        e.hP[8] = -inv_tap * u;        // vivj
        e.hP[9] = 0;                   // vjvj
        // Q second derivatives
        e.hQ[0] = cvv * w;
        e.hQ[1] = -cvv * w;
        e.hQ[2] = cvv * w;
        e.hQ[3] = -vj * inv_tap * u;
        e.hQ[4] = -vi * inv_tap * u;
        e.hQ[5] = vj * inv_tap * u;
        e.hQ[6] = vi * inv_tap * u;
        e.hQ[7] = -2 * bA;
        e.hQ[8] = -inv_tap * w;
        e.hQ[9] = 0;
    return e;
    }
};

inline std::vector<FlowEnd> make_flow_ends(const Network& net,
                                           std::vector<int>& branch_of_end) {
    std::vector<FlowEnd> ends;
    branch_of_end.clear();
    for (int k = 0; k < static_cast<int>(net.branches.size()); ++k) {
        const auto& br = net.branches[k];
        if (!br.in_service) continue;
        const int f = net.index_of(br.from_bus);
        const int t = net.index_of(br.to_bus);
        const Complex y = br.series_admittance;
        const Complex yc = br.charging_admittance / 2.0;
        const double tap = br.tap;
        FlowEnd from;
        from.i = f; from.j = t;
        from.gA = ((y + yc) / (tap * tap)).real();
        from.bA = ((y + yc) / (tap * tap)).imag();
        from.g = y.real(); from.b = y.imag();
        from.inv_tap = 1.0 / tap;
        FlowEnd to;
        to.i = t; to.j = f;
        to.gA = (y + yc).real();
        to.bA = (y + yc).imag();
        to.g = y.real(); to.b = y.imag();
        to.inv_tap = 1.0 / tap;
        ends.push_back(from); branch_of_end.push_back(k);
        ends.push_back(to); branch_of_end.push_back(k);
    }
    return ends;
}

// Hessian contribution of lamP . P(th,v) + lamQ . Q(th,v) over Ybus entries.
inline void add_injection_hessian(const AdmittanceMatrix& Y,
                                  const Eigen::VectorXd& th, const Eigen::VectorXd& vm,
                                  const Eigen::VectorXd& lamP, const Eigen::VectorXd& lamQ,
                                  Eigen::MatrixXd& H, const Layout& L) {
    for (int col = 0; col < Y.outerSize(); ++col) {
        for (AdmittanceMatrix::InnerIterator it(Y, col); it; ++it) {
            const int i = static_cast<int>(it.row());
            const int k = static_cast<int>(it.col());
            const double G = it.value().real();
            const double B = it.value().imag();
            if (i == k) {
                H(L.vm(i), L.vm(i)) += 2.0 * (lamP(i) * G - lamQ(i) * B);
                continue;
            }
            const double d = th(i) - th(k);
            const double a = G * std::cos(d) + B * std::sin(d);
            const double b = G * std::sin(d) - B * std::cos(d);
            const double c = lamP(i) * a + lamQ(i) * b;
            const double dd = -lamP(i) * b + lamQ(i) * a;
            const double vv = vm(i) * vm(k);
            H(L.th(i), L.th(i)) += -vv * c;
            H(L.th(k), L.th(k)) += -vv * c;
            H(L.th(i), L.th(k)) += vv * c;
            H(L.th(k), L.th(i)) += vv * c;
            H(L.th(i), L.vm(i)) += vm(k) * dd;
            H(L.vm(i), L.th(i)) += vm(k) * dd;
            H(L.th(i), L.vm(k)) += vm(i) * dd;
            H(L.vm(k), L.th(i)) += vm(i) * dd;
            H(L.th(k), L.vm(i)) += -vm(k) * dd;
            H(L.vm(i), L.th(k)) += -vm(k) * dd;
            H(L.th(k), L.vm(k)) += -vm(i) * dd;
            H(L.vm(k), L.th(k)) += -vm(i) * dd;
            H(L.vm(i), L.vm(k)) += c;
            H(L.vm(k), L.vm(i)) += c;
        }
    }
}

}  // namespace opf_detail

/// Re-evaluates every model constraint from a raw solution, independent of
/// the solver path. Returns the largest violation in per-unit terms and
/// names the binding constraint.
inline std::pair<double, std::string> check_constraints(const Network& net,
                                                        const OpfProblem& prob,
                                                        const OpfSolution& sol) {
    const double mva = net.base_mva;
    double worst = 0.0;
    std::string which = "none";
    auto track = [&](double v, const std::string& name) {
        if (v > worst) { worst = v; which = name; }
    };

    const int n = net.size();
    AdmittanceMatrix Y = build_ybus(net);
    Eigen::VectorXcd V = sol.voltages;
    Eigen::VectorXcd S = V.array() * (Y * V).conjugate().array();

    Eigen::VectorXd Pinj = Eigen::VectorXd::Zero(n), Qinj = Eigen::VectorXd::Zero(n);
    for (size_t g = 0; g < net.generators.size(); ++g) {
        const int b = net.index_of(net.generators[g].bus);
        Pinj(b) += sol.p_mw[g] / mva;
        Qinj(b) += sol.q_mvar[g] / mva;
    }
    for (const auto& l : net.loads) {
        const int b = net.index_of(l.bus);
        Pinj(b) -= l.demand.real() / mva;
        Qinj(b) -= l.demand.imag() / mva;
    }
    for (int b = 0; b < n; ++b) {
        track(std::abs(S(b).real() - Pinj(b)), "P balance at bus " +
                                                    std::to_string(net.external_id(b)));
        track(std::abs(S(b).imag() - Qinj(b)), "Q balance at bus " +
                                                    std::to_string(net.external_id(b)));
        track(std::abs(V(b)) - net.buses[b].v_max, "V upper at bus " +
                                                        std::to_string(net.external_id(b)));
        track(net.buses[b].v_min - std::abs(V(b)), "V lower at bus " +
                                                        std::to_string(net.external_id(b)));
    }
    track(std::abs(std::arg(V(net.slack_index()))), "slack angle");
    for (size_t g = 0; g < net.generators.size(); ++g) {
        track((sol.p_mw[g] - prob.p_hi[g]) / mva, "P upper of gen " + std::to_string(g));
        track((prob.p_lo[g] - sol.p_mw[g]) / mva, "P lower of gen " + std::to_string(g));
        track((sol.q_mvar[g] - prob.q_hi[g]) / mva, "Q upper of gen " + std::to_string(g));
        track((prob.q_lo[g] - sol.q_mvar[g]) / mva, "Q lower of gen " + std::to_string(g));
    }
    if (prob.options.enforce_flow_limits) {
        for (size_t k = 0; k < net.branches.size(); ++k) {
            const auto& br = net.branches[k];
            if (!br.in_service || br.s_max <= 0.0) continue;
            const int f = net.index_of(br.from_bus);
            const int t = net.index_of(br.to_bus);
            const Complex y = br.series_admittance;
            const Complex yc = br.charging_admittance / 2.0;
            const Complex If = (y + yc) / (br.tap * br.tap) * V(f) - y / br.tap * V(t);
            const Complex It = (y + yc) * V(t) - y / br.tap * V(f);
            const double lim = br.s_max / mva;
            track(std::abs(V(f) * std::conj(If)) - lim,
                  "flow " + std::to_string(br.from_bus) + "->" + std::to_string(br.to_bus));
            track(std::abs(V(t) * std::conj(It)) - lim,
                  "flow " + std::to_string(br.to_bus) + "->" + std::to_string(br.from_bus));
        }
    }
    if (prob.options.enforce_angle_limits) {
        for (const auto& br : net.branches) {
            if (!br.in_service || (br.angle_diff_min == 0.0 && br.angle_diff_max == 0.0))
                continue;
            const double d = std::arg(V(net.index_of(br.from_bus))) -
                             std::arg(V(net.index_of(br.to_bus)));
            track(d - br.angle_diff_max, "angle upper " + std::to_string(br.from_bus) +
                                             "-" + std::to_string(br.to_bus));
            track(br.angle_diff_min - d, "angle lower " + std::to_string(br.from_bus) +
                                             "-" + std::to_string(br.to_bus));
        }
    }
    return {worst, which};
}

/// Primal-dual interior-point solve of the (possibly bound-overridden) ACOPF.
inline OpfSolution solve_opf(const OpfProblem& prob) {
    const Network& net = *prob.net;
    const auto& opt = prob.options;
    const double mva = net.base_mva;
    const int n = net.size();
    const int ng = static_cast<int>(net.generators.size());
    if (ng == 0) throw OpfError("network has no generators");
    const int slack = net.slack_index();

    {
        double pmax_sum = 0.0;
        for (int g = 0; g < ng; ++g) pmax_sum += prob.p_hi[g];
        if (pmax_sum < net.total_load_mw())
            throw OpfError("infeasible: total generation capability " +
                           std::to_string(pmax_sum) + " MW below demand " +
                           std::to_string(net.total_load_mw()) + " MW");
    }

    opf_detail::Layout L{n, ng};
    const int nx = L.nx();
    AdmittanceMatrix Y = build_ybus(net);

    // constant structures
    std::vector<int> gen_bus(ng);
    for (int g = 0; g < ng; ++g) gen_bus[g] = net.index_of(net.generators[g].bus);
    Eigen::VectorXd Pd = Eigen::VectorXd::Zero(n), Qd = Eigen::VectorXd::Zero(n);
    for (const auto& l : net.loads) {
        Pd(net.index_of(l.bus)) += l.demand.real() / mva;
        Qd(net.index_of(l.bus)) += l.demand.imag() / mva;
    }
    std::vector<int> branch_of_end;
    auto ends = opf_detail::make_flow_ends(net, branch_of_end);

    // inequality bookkeeping: flow limits, optional angle limits, then bounds.
    // Zero-width bounds (a fixed unit like a synchronous condenser, or a
    // shut-down generator) become equality rows so every inequality keeps a
    // strict interior.
    struct Bound { int var; double limit; bool upper; };
    struct Fixed { int var; double value; };
    std::vector<Bound> bounds;
    std::vector<Fixed> fixed;
    auto add_pair = [&](int var, double lo, double hi) {
        if (hi - lo <= 1e-9) {
            fixed.push_back({var, 0.5 * (lo + hi)});
        } else {
            bounds.push_back({var, hi, true});
            bounds.push_back({var, lo, false});
        }
    };
    for (int b = 0; b < n; ++b)
        add_pair(L.vm(b), net.buses[b].v_min, net.buses[b].v_max);
    for (int g = 0; g < ng; ++g) {
        add_pair(L.pg(g), prob.p_lo[g] / mva, prob.p_hi[g] / mva);
        add_pair(L.qg(g), prob.q_lo[g] / mva, prob.q_hi[g] / mva);
    }
    std::vector<int> flow_ends;                // indices into `ends`
    if (opt.enforce_flow_limits) {
        for (size_t e = 0; e < ends.size(); ++e)
            if (net.branches[branch_of_end[e]].s_max > 0.0)
                flow_ends.push_back(static_cast<int>(e));
    }
    std::vector<int> angle_branches;
    if (opt.enforce_angle_limits) {
        for (int k = 0; k < static_cast<int>(net.branches.size()); ++k) {
            const auto& br = net.branches[k];
            if (br.in_service && !(br.angle_diff_min == 0.0 && br.angle_diff_max == 0.0))
                angle_branches.push_back(k);
        }
    }
    const int n_flow = static_cast<int>(flow_ends.size());
    const int n_ang = 2 * static_cast<int>(angle_branches.size());
    const int ni = n_flow + n_ang + static_cast<int>(bounds.size());
    const int ne = 2 * n + 1 + static_cast<int>(fixed.size());

    // objective in $/h of the per-unit P variables
    Eigen::VectorXd c2(ng), c1(ng);
    double c0_sum = 0.0;
    for (int g = 0; g < ng; ++g) {
        c2(g) = net.generators[g].cost_c2 * mva * mva;
        c1(g) = net.generators[g].cost_c1 * mva;
        c0_sum += net.generators[g].cost_c0;
    }

    // start: flat voltages, midpoint dispatch
    Eigen::VectorXd x = Eigen::VectorXd::Zero(nx);
    for (int b = 0; b < n; ++b) x(L.vm(b)) = 0.5 * (net.buses[b].v_min + net.buses[b].v_max);
    for (int g = 0; g < ng; ++g) {
        x(L.pg(g)) = 0.5 * (prob.p_lo[g] + prob.p_hi[g]) / mva;
        x(L.qg(g)) = 0.5 * (prob.q_lo[g] + prob.q_hi[g]) / mva;
    }

    auto eval_f = [&](const Eigen::VectorXd& xv) {
        double f = c0_sum;
        for (int g = 0; g < ng; ++g) {
            const double p = xv(L.pg(g));
            f += c2(g) * p * p + c1(g) * p;
        }
        return f;
    };

    // workspace reused each iteration
    Eigen::VectorXd gvec(ne), hvec(ni);
    Eigen::MatrixXd Gx(ne, nx), Hx(ni, nx);
    std::vector<opf_detail::FlowEnd::Eval> end_eval(ends.size());

    auto evaluate = [&](const Eigen::VectorXd& xv, Eigen::VectorXd& gv,
                        Eigen::VectorXd& hv, Eigen::MatrixXd& Gm, Eigen::MatrixXd& Hm) {
        const Eigen::VectorXd th = xv.head(n);
        const Eigen::VectorXd vm = xv.segment(n, n);
        Eigen::VectorXcd V(n);
        for (int b = 0; b < n; ++b) V(b) = std::polar(vm(b), th(b));
        Eigen::VectorXcd S = V.array() * (Y * V).conjugate().array();

        gv.setZero(ne);
        Gm.setZero(ne, nx);
        for (int b = 0; b < n; ++b) {
            gv(b) = S(b).real() + Pd(b);
            gv(n + b) = S(b).imag() + Qd(b);
        }
        for (int g = 0; g < ng; ++g) {
            gv(gen_bus[g]) -= xv(L.pg(g));
            gv(n + gen_bus[g]) -= xv(L.qg(g));
            Gm(gen_bus[g], L.pg(g)) = -1.0;
            Gm(n + gen_bus[g], L.qg(g)) = -1.0;
        }
        gv(2 * n) = th(slack);
        Gm(2 * n, L.th(slack)) = 1.0;
        for (size_t fi = 0; fi < fixed.size(); ++fi) {
            gv(2 * n + 1 + fi) = xv(fixed[fi].var) - fixed[fi].value;
            Gm(2 * n + 1 + fi, fixed[fi].var) = 1.0;
        }

        Eigen::MatrixXcd dS_dVa, dS_dVm;
        pf_detail::dSbus_dV(Y, V, dS_dVa, dS_dVm);
        Gm.block(0, 0, n, n) = dS_dVa.real();
        Gm.block(0, n, n, n) = dS_dVm.real();
        Gm.block(n, 0, n, n) = dS_dVa.imag();
        Gm.block(n, n, n, n) = dS_dVm.imag();

        hv.setZero(ni);
        Hm.setZero(ni, nx);
        for (size_t e = 0; e < ends.size(); ++e) {
            const auto& fe = ends[e];
            end_eval[e] = fe.eval(th(fe.i), th(fe.j), vm(fe.i), vm(fe.j));
        }
        int row = 0;
        for (int fi = 0; fi < n_flow; ++fi, ++row) {
            const int e = flow_ends[fi];
            const auto& fe = ends[e];
            const auto& ev = end_eval[e];
            const double lim = net.branches[branch_of_end[e]].s_max / mva;
            hv(row) = ev.P * ev.P + ev.Q * ev.Q - lim * lim;
            const int cols[4] = {L.th(fe.i), L.th(fe.j), L.vm(fe.i), L.vm(fe.j)};
            for (int c = 0; c < 4; ++c)
                Hm(row, cols[c]) = 2.0 * (ev.P * ev.dP[c] + ev.Q * ev.dQ[c]);
        }
        for (int ai = 0; ai < static_cast<int>(angle_branches.size()); ++ai) {
            const auto& br = net.branches[angle_branches[ai]];
            const int f = net.index_of(br.from_bus);
            const int t = net.index_of(br.to_bus);
            const double d = th(f) - th(t);
            hv(row) = d - br.angle_diff_max;
            Hm(row, L.th(f)) = 1.0; Hm(row, L.th(t)) = -1.0;
            ++row;
            hv(row) = br.angle_diff_min - d;
            Hm(row, L.th(f)) = -1.0; Hm(row, L.th(t)) = 1.0;
            ++row;
        }
        for (const auto& bd : bounds) {
            hv(row) = bd.upper ? xv(bd.var) - bd.limit : bd.limit - xv(bd.var);
            Hm(row, bd.var) = bd.upper ? 1.0 : -1.0;
            ++row;
        }
    };

    // Lagrangian Hessian wrt x for given multipliers
    auto hessian = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& lam,
                       const Eigen::VectorXd& mu) {
        const Eigen::VectorXd th = xv.head(n);
        const Eigen::VectorXd vm = xv.segment(n, n);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nx, nx);
        for (int g = 0; g < ng; ++g) H(L.pg(g), L.pg(g)) = 2.0 * c2(g);
        opf_detail::add_injection_hessian(Y, th, vm, lam.head(n), lam.segment(n, n), H, L);
        // flow-limit Hessians
        for (int fi = 0; fi < n_flow; ++fi) {
            const double m = mu(fi);
            if (m == 0.0) continue;
            const int e = flow_ends[fi];
            const auto& fe = ends[e];
            const auto& ev = end_eval[e];
            const int cols[4] = {L.th(fe.i), L.th(fe.j), L.vm(fe.i), L.vm(fe.j)};
            // 2*(grad P grad P^T + P hess P + grad Q grad Q^T + Q hess Q)
            static const int pairidx[4][4] = {
                {0, 1, 3, 4}, {1, 2, 5, 6}, {3, 5, 7, 8}, {4, 6, 8, 9}};
            for (int a = 0; a < 4; ++a) {
                for (int bcol = 0; bcol < 4; ++bcol) {
                    const double hp = ev.hP[pairidx[a][bcol]];
                    const double hq = ev.hQ[pairidx[a][bcol]];
                    const double val = 2.0 * (ev.dP[a] * ev.dP[bcol] + ev.P * hp +
                                              ev.dQ[a] * ev.dQ[bcol] + ev.Q * hq);
                    H(cols[a], cols[bcol]) += m * val;
                }
            }
        }
        return H;
    };

    // interior-point state: slacks start consistent with the interior point
    // (h + z = 0), which makes the fraction-to-boundary rule protect the
    // primal bounds themselves
    evaluate(x, gvec, hvec, Gx, Hx);
    Eigen::VectorXd z(ni), mu(ni);
    for (int i = 0; i < ni; ++i) z(i) = std::max(1e-4, -hvec(i));
    double gamma = 1.0;
    for (int i = 0; i < ni; ++i) mu(i) = gamma / z(i);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(ne);

    OpfSolution sol;
    double f_prev = eval_f(x);
    int it = 0;
    bool converged = false;

    for (; it < opt.max_iter; ++it) {
        evaluate(x, gvec, hvec, Gx, Hx);
        const double f = eval_f(x);
        Eigen::VectorXd df = Eigen::VectorXd::Zero(nx);
        for (int g = 0; g < ng; ++g) df(L.pg(g)) = 2.0 * c2(g) * x(L.pg(g)) + c1(g);

        Eigen::VectorXd Lx = df + Gx.transpose() * lam + Hx.transpose() * mu;
        const double feascond =
            std::max(gvec.cwiseAbs().maxCoeff(), std::max(0.0, hvec.maxCoeff())) /
            (1.0 + std::max(x.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff()));
        const double gradcond =
            Lx.cwiseAbs().maxCoeff() /
            (1.0 + std::max(lam.cwiseAbs().maxCoeff(), mu.cwiseAbs().maxCoeff()));
        const double compcond = z.dot(mu) / (1.0 + x.cwiseAbs().maxCoeff());
        const double costcond = std::abs(f - f_prev) / (1.0 + std::abs(f_prev));
        sol.kkt_residual = std::max({feascond, gradcond, compcond});
        if (std::getenv("CPES_OPF_TRACE"))
            std::cerr << "it " << it << "  f " << f << "  feas " << feascond
                      << "  grad " << gradcond << "  comp " << compcond << "\n";
        if (feascond < opt.feastol && gradcond < opt.gradtol &&
            compcond < opt.comptol && costcond < opt.costtol) {
            converged = true;
            break;
        }
        f_prev = f;

        gamma = opt.sigma * z.dot(mu) / ni;

        Eigen::VectorXd zinv = z.cwiseInverse();
        Eigen::VectorXd zinvmu = zinv.cwiseProduct(mu);
        Eigen::MatrixXd M = hessian(x, lam, mu);
        M.noalias() += Hx.transpose() * zinvmu.asDiagonal() * Hx;
        // small primal regularization keeps directions bounded for variables
        // that no active constraint or cost term touches
        M.diagonal().array() += 1e-9;
        Eigen::VectorXd Nvec = Lx + Hx.transpose() * (zinv.cwiseProduct(
            gamma * Eigen::VectorXd::Ones(ni) + mu.cwiseProduct(hvec)));

        Eigen::MatrixXd K(nx + ne, nx + ne);
        K.setZero();
        K.topLeftCorner(nx, nx) = M;
        K.topRightCorner(nx, ne) = Gx.transpose();
        K.bottomLeftCorner(ne, nx) = Gx;
        Eigen::VectorXd rhs(nx + ne);
        rhs.head(nx) = -Nvec;
        rhs.tail(ne) = -gvec;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
        Eigen::VectorXd sol_vec = lu.solve(rhs);
        if (!sol_vec.allFinite()) {
            Eigen::FullPivLU<Eigen::MatrixXd> flu(K);
            sol_vec = flu.solve(rhs);
            if (!sol_vec.allFinite())
                throw OpfError("singular KKT system at iteration " + std::to_string(it));
        }
        const Eigen::VectorXd dx = sol_vec.head(nx);
        const Eigen::VectorXd dlam = sol_vec.tail(ne);  // rhs carries Lx, so this is the step
        Eigen::VectorXd dz = -hvec - z - Hx * dx;
        Eigen::VectorXd dmu(ni);
        for (int i = 0; i < ni; ++i)
            dmu(i) = -mu(i) + zinv(i) * (gamma - mu(i) * dz(i));

        double ap = 1.0, ad = 1.0;
        for (int i = 0; i < ni; ++i) {
            if (dz(i) < 0.0) ap = std::min(ap, -opt.xi * z(i) / dz(i));
            if (dmu(i) < 0.0) ad = std::min(ad, -opt.xi * mu(i) / dmu(i));
        }
        x += ap * dx;
        z += ap * dz;
        lam += ad * dlam;
        mu += ad * dmu;
        if (!x.allFinite() || !z.allFinite() || !lam.allFinite() || !mu.allFinite()) {
            ++it;
            break;
        }
    }

    sol.iterations = it;
    sol.converged = converged;
    sol.voltages.resize(n);
    for (int b = 0; b < n; ++b) sol.voltages(b) = std::polar(x(L.vm(b)), x(L.th(b)));
    sol.p_mw.resize(ng);
    sol.q_mvar.resize(ng);
    for (int g = 0; g < ng; ++g) {
        sol.p_mw[g] = x(L.pg(g)) * mva;
        sol.q_mvar[g] = x(L.qg(g)) * mva;
    }
    sol.cost = eval_f(x);
    auto [viol, name] = check_constraints(net, prob, sol);
    sol.max_violation = viol;
    sol.worst_constraint = name;
    if (!converged) {
        sol.status = "diverged after " + std::to_string(it) +
                     " iterations; kkt residual " + std::to_string(sol.kkt_residual) +
                     "; worst constraint " + name + " (" + std::to_string(viol) + ")";
    } else {
        sol.status = "converged";
    }
    return sol;
}

/// Traditional ACOPF with the case-file limits.
inline OpfSolution solve_t_acopf(const Network& net, OpfOptions opt = {}) {
    return solve_opf(OpfProblem::plain(net, opt));
}

/// Applies the cyber gate to generator bounds. A generator at a bus whose
/// score reaches the threshold is shut down (zeta = 1: both bounds to zero)
/// or curtailed (zeta = 0: P upper bound scaled by alpha, default the
/// P_min/P_max ratio so the unit is held at its minimum output). Buses listed
/// as gate-exempt keep their bounds; scores below the threshold change nothing.
inline OpfProblem apply_cyber_gate(const Network& net,
                                   const std::vector<double>& cq_by_bus,
                                   const CyberScenario& scenario,
                                   OpfOptions opt = {}) {
    OpfProblem prob = OpfProblem::plain(net, opt);
    if (static_cast<int>(cq_by_bus.size()) != net.size())
        throw OpfError("cq table does not cover all buses");
    for (size_t g = 0; g < net.generators.size(); ++g) {
        const auto& gen = net.generators[g];
        const int bi = net.index_of(gen.bus);
        GateDecision d;
        d.gen_index = g;
        d.bus = gen.bus;
        d.cq = cq_by_bus[bi];
        d.zeta = scenario.zeta_for(gen.bus);
        d.exempt = scenario.is_exempt(gen.bus);
        if (d.cq >= scenario.rho && !d.exempt) {
            d.gated = true;
            if (d.zeta == 1) {
                d.alpha = 0.0;
                prob.p_lo[g] = prob.p_hi[g] = 0.0;
                prob.q_lo[g] = prob.q_hi[g] = 0.0;
            } else {
                d.alpha = gen.p_max > 0.0 ? gen.p_min / gen.p_max : 0.0;
                prob.p_hi[g] = std::max(d.alpha * gen.p_max, gen.p_min);
                // reactive capability is left intact under curtailment
            }
        }
        prob.gates.push_back(d);
    }
    return prob;
}

}  // namespace cpes
