// AC power flow: full Newton-Raphson and the one-sweep fast-decoupled
// (1P1Q) solve used by contingency screening.
#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseLU>

#include "cpes/grid.hpp"

namespace cpes {

struct PowerFlowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IslandingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Converged operating point. Voltages indexed by dense bus index; branch
/// flows per branch row in case-file order (MVA, from- and to-end).
struct SystemState {
    Eigen::VectorXcd voltages;
    std::vector<Complex> flow_from;   // S_ij, MVA
    std::vector<Complex> flow_to;     // S_ji, MVA
    Eigen::VectorXcd injections;      // net complex MVA injected per bus
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
};

/// Per-generator setpoints for a power-flow solve. P in MW; voltage setpoint
/// per-unit at the generator bus (slack and PV buses hold their setpoint).
struct Dispatch {
    std::vector<double> p_mw;
    std::vector<double> v_setpoint;

    static Dispatch from_case(const Network& net) {
        Dispatch d;
        for (const auto& g : net.generators) {
            d.p_mw.push_back(g.p_start);
            d.v_setpoint.push_back(g.v_setpoint);
        }
        return d;
    }
};

namespace pf_detail {

// dSbus/dVa and dSbus/dVm in complex form (dense; n is small here).
inline void dSbus_dV(const AdmittanceMatrix& Y, const Eigen::VectorXcd& V,
                     Eigen::MatrixXcd& dS_dVa, Eigen::MatrixXcd& dS_dVm) {
    const int n = static_cast<int>(V.size());
    Eigen::VectorXcd Ibus = Y * V;
    Eigen::VectorXcd Vnorm(n);
    for (int i = 0; i < n; ++i) Vnorm(i) = V(i) / std::abs(V(i));
    Eigen::MatrixXcd Yd = Eigen::MatrixXcd(Y);
    dS_dVa = Complex(0, 1) * V.asDiagonal() *
             (Eigen::MatrixXcd(Ibus.asDiagonal()) - Yd * Eigen::MatrixXcd(V.asDiagonal())).conjugate();
    dS_dVm = Eigen::MatrixXcd(V.asDiagonal()) * (Yd * Eigen::MatrixXcd(Vnorm.asDiagonal())).conjugate() +
             Eigen::MatrixXcd(Ibus.asDiagonal()).conjugate() * Eigen::MatrixXcd(Vnorm.asDiagonal());
}

inline void compute_flows(const Network& net, const Eigen::VectorXcd& V,
                          SystemState& st) {
    st.flow_from.assign(net.branches.size(), Complex(0, 0));
    st.flow_to.assign(net.branches.size(), Complex(0, 0));
    for (size_t k = 0; k < net.branches.size(); ++k) {
        const auto& br = net.branches[k];
        if (!br.in_service) continue;
        const int f = net.index_of(br.from_bus);
        const int t = net.index_of(br.to_bus);
        const Complex y = br.series_admittance;
        const Complex yc = br.charging_admittance / 2.0;
        const double tap = br.tap;
        const Complex If = (y + yc) / (tap * tap) * V(f) - y / tap * V(t);
        const Complex It = (y + yc) * V(t) - y / tap * V(f);
        st.flow_from[k] = V(f) * std::conj(If) * net.base_mva;
        st.flow_to[k] = V(t) * std::conj(It) * net.base_mva;
    }
}

}  // namespace pf_detail

/// Full Newton-Raphson AC power flow. The slack bus absorbs the residual;
/// PV buses hold the dispatch voltage setpoint, with PV->PQ switching when a
/// generator's aggregate reactive range is exhausted (enforce_q_limits).
inline SystemState solve_acpf(const Network& net, const AdmittanceMatrix& Y,
                              const Dispatch& dispatch, double tol = 1e-8,
                              int max_iter = 30, bool enforce_q_limits = true) {
    const int n = net.size();
    if (dispatch.p_mw.size() != net.generators.size())
        throw PowerFlowError("dispatch does not cover all generators");
    const int slack = net.slack_index();

    Eigen::VectorXd Pg = Eigen::VectorXd::Zero(n), Qmin = Eigen::VectorXd::Zero(n),
                    Qmax = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd vset = Eigen::VectorXd::Ones(n);
    std::vector<char> is_gen_bus(n, 0);
    for (size_t gi = 0; gi < net.generators.size(); ++gi) {
        const auto& g = net.generators[gi];
        if (!g.in_service) continue;
        const int b = net.index_of(g.bus);
        is_gen_bus[b] = 1;
        Pg(b) += dispatch.p_mw[gi] / net.base_mva;
        Qmin(b) += g.q_min / net.base_mva;
        Qmax(b) += g.q_max / net.base_mva;
        vset(b) = dispatch.v_setpoint[gi];
    }
    Eigen::VectorXd Pd = Eigen::VectorXd::Zero(n), Qd = Eigen::VectorXd::Zero(n);
    for (const auto& l : net.loads) {
        const int b = net.index_of(l.bus);
        Pd(b) += l.demand.real() / net.base_mva;
        Qd(b) += l.demand.imag() / net.base_mva;
    }

    std::vector<char> is_pv(n, 0);
    for (int b = 0; b < n; ++b)
        if (is_gen_bus[b] && b != slack) is_pv[b] = 1;

    Eigen::VectorXd vm = Eigen::VectorXd::Ones(n), va = Eigen::VectorXd::Zero(n);
    for (int b = 0; b < n; ++b)
        if (is_gen_bus[b]) vm(b) = vset(b);
    // Q setpoint for buses switched to PQ
    Eigen::VectorXd Qfix = Eigen::VectorXd::Zero(n);
    std::vector<char> switched(n, 0);

    SystemState st;
    st.voltages.resize(n);
    const Eigen::VectorXd Psp = Pg - Pd;

    int total_it = 0;
    for (int outer = 0; outer < 5; ++outer) {
        std::vector<int> pv, pq;
        for (int b = 0; b < n; ++b) {
            if (b == slack) continue;
            if (is_pv[b] && !switched[b]) pv.push_back(b);
            else pq.push_back(b);
        }
        const int npv = static_cast<int>(pv.size()), npq = static_cast<int>(pq.size());

        bool converged = false;
        for (int it = 0; it < max_iter; ++it, ++total_it) {
            Eigen::VectorXcd V(n);
            for (int b = 0; b < n; ++b) V(b) = std::polar(vm(b), va(b));
            Eigen::VectorXcd S = V.array() * (Y * V).conjugate().array();
            Eigen::VectorXd dP(npv + npq), dQ(npq);
            for (int k = 0; k < npv; ++k) dP(k) = Psp(pv[k]) - S(pv[k]).real();
            for (int k = 0; k < npq; ++k) {
                dP(npv + k) = Psp(pq[k]) - S(pq[k]).real();
                const double qtarget =
                    switched[pq[k]] ? Qfix(pq[k]) - Qd(pq[k]) : -Qd(pq[k]);
                dQ(k) = qtarget - S(pq[k]).imag();
            }
            double mis = 0.0;
            if (npv + npq > 0) mis = std::max(mis, dP.cwiseAbs().maxCoeff());
            if (npq > 0) mis = std::max(mis, dQ.cwiseAbs().maxCoeff());
            st.max_mismatch = mis;
            if (mis < tol) { converged = true; break; }

            Eigen::MatrixXcd dS_dVa, dS_dVm;
            pf_detail::dSbus_dV(Y, V, dS_dVa, dS_dVm);
            const int m = npv + 2 * npq;
            Eigen::MatrixXd J(m, m);
            std::vector<int> pvpq = pv;
            pvpq.insert(pvpq.end(), pq.begin(), pq.end());
            for (int r = 0; r < npv + npq; ++r) {
                for (int c = 0; c < npv + npq; ++c)
                    J(r, c) = dS_dVa(pvpq[r], pvpq[c]).real();
                for (int c = 0; c < npq; ++c)
                    J(r, npv + npq + c) = dS_dVm(pvpq[r], pq[c]).real();
            }
            for (int r = 0; r < npq; ++r) {
                for (int c = 0; c < npv + npq; ++c)
                    J(npv + npq + r, c) = dS_dVa(pq[r], pvpq[c]).imag();
                for (int c = 0; c < npq; ++c)
                    J(npv + npq + r, npv + npq + c) = dS_dVm(pq[r], pq[c]).imag();
            }
            Eigen::VectorXd rhs(m);
            rhs.head(npv + npq) = dP;
            rhs.tail(npq) = dQ;
            Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
            if (!lu.isInvertible())
                throw PowerFlowError("singular Jacobian in Newton-Raphson");
            Eigen::VectorXd dx = lu.solve(rhs);
            for (int k = 0; k < npv + npq; ++k) va(pvpq[k]) += dx(k);
            for (int k = 0; k < npq; ++k) vm(pq[k]) += dx(npv + npq + k);
        }
        if (!converged) {
            st.converged = false;
            st.iterations = total_it;
            throw PowerFlowError("power flow diverged; max mismatch " +
                                 std::to_string(st.max_mismatch) + " pu after " +
                                 std::to_string(total_it) + " iterations");
        }

        // PV -> PQ switching on violated aggregate Q range
        bool switched_any = false;
        if (enforce_q_limits) {
            Eigen::VectorXcd V(n);
            for (int b = 0; b < n; ++b) V(b) = std::polar(vm(b), va(b));
            Eigen::VectorXcd S = V.array() * (Y * V).conjugate().array();
            const double qtol = 1e-7;
            for (int b : pv) {
                const double qg = S(b).imag() + Qd(b);
                if (qg > Qmax(b) + qtol) {
                    switched[b] = 1; Qfix(b) = Qmax(b); switched_any = true;
                } else if (qg < Qmin(b) - qtol) {
                    switched[b] = 1; Qfix(b) = Qmin(b); switched_any = true;
                }
            }
        }
        if (!switched_any) break;
    }

    for (int b = 0; b < n; ++b) st.voltages(b) = std::polar(vm(b), va(b));
    st.injections = (st.voltages.array() * (Y * st.voltages).conjugate().array()) * net.base_mva;
    pf_detail::compute_flows(net, st.voltages, st);
    st.converged = true;
    st.iterations = total_it;
    return st;
}

namespace pf_detail {

/// XB fast-decoupled matrices. B' ignores resistance, charging and shunts;
/// B'' is the imaginary part of the full Ybus.
inline void make_fdpf_matrices(const Network& net, int skip_branch,
                               Eigen::MatrixXd& Bp, Eigen::MatrixXd& Bpp) {
    const int n = net.size();
    Bp.setZero(n, n);
    Bpp.setZero(n, n);
    for (int k = 0; k < static_cast<int>(net.branches.size()); ++k) {
        if (k == skip_branch || !net.branches[k].in_service) continue;
        const auto& br = net.branches[k];
        const int f = net.index_of(br.from_bus);
        const int t = net.index_of(br.to_bus);
        // B': series susceptance with r = 0
        const double x = (1.0 / br.series_admittance).imag();
        const double bp = -1.0 / x;
        Bp(f, f) += bp; Bp(t, t) += bp;
        Bp(f, t) -= bp; Bp(t, f) -= bp;
        // B'': full branch model
        const Complex y = br.series_admittance;
        const Complex yc = br.charging_admittance / 2.0;
        const double tap = br.tap;
        Bpp(f, f) += ((y + yc) / (tap * tap)).imag();
        Bpp(t, t) += (y + yc).imag();
        Bpp(f, t) += (-y / tap).imag();
        Bpp(t, f) += (-y / tap).imag();
    }
    for (int i = 0; i < n; ++i)
        Bpp(i, i) += net.buses[i].shunt_admittance.imag();
}

}  // namespace pf_detail

/// One active-power (P-theta) half-iteration followed by one reactive (Q-V)
/// half-iteration of the XB fast-decoupled scheme on the network with
/// `outage_branch` removed, starting from the converged base state.
/// Throws IslandingError if removing the branch disconnects the network.
inline SystemState solve_fdpf_1p1q(const Network& net, const AdmittanceMatrix& /*ybus*/,
                                   int outage_branch, const SystemState& base) {
    const int n = net.size();
    if (outage_branch >= 0 && !is_connected(net, outage_branch))
        throw IslandingError("outage of branch " + std::to_string(outage_branch) +
                             " islands the network");

    // Post-outage admittance matrix
    Network tmp = net;  // cheap at this scale; topology change is per-outage
    if (outage_branch >= 0) tmp.branches[outage_branch].in_service = false;
    AdmittanceMatrix Yo = build_ybus(tmp);

    // Injection targets implied by the base state (the screening drives the
    // post-outage network toward the same bus injections).
    Eigen::VectorXcd Starget = base.injections / net.base_mva;

    const int slack = net.slack_index();
    std::vector<int> pv, pq, pvpq;
    {
        std::vector<char> is_gen(n, 0);
        for (const auto& g : net.generators)
            if (g.in_service) is_gen[net.index_of(g.bus)] = 1;
        for (int b = 0; b < n; ++b) {
            if (b == slack) continue;
            if (is_gen[b]) pv.push_back(b); else pq.push_back(b);
        }
        pvpq = pv;
        pvpq.insert(pvpq.end(), pq.begin(), pq.end());
    }

    Eigen::MatrixXd Bp, Bpp;
    pf_detail::make_fdpf_matrices(tmp, -1, Bp, Bpp);

    Eigen::VectorXd vm(n), va(n);
    for (int b = 0; b < n; ++b) {
        vm(b) = std::abs(base.voltages(b));
        va(b) = std::arg(base.voltages(b));
    }

    // P - theta sweep
    {
        Eigen::VectorXcd V(n);
        for (int b = 0; b < n; ++b) V(b) = std::polar(vm(b), va(b));
        Eigen::VectorXcd S = V.array() * (Yo * V).conjugate().array();
        const int m = static_cast<int>(pvpq.size());
        Eigen::MatrixXd A(m, m);
        Eigen::VectorXd rhs(m);
        for (int r = 0; r < m; ++r) {
            rhs(r) = (Starget(pvpq[r]).real() - S(pvpq[r]).real()) / vm(pvpq[r]);
            for (int c = 0; c < m; ++c) A(r, c) = -Bp(pvpq[r], pvpq[c]);
        }
        Eigen::VectorXd dva = A.partialPivLu().solve(rhs);
        for (int r = 0; r < m; ++r) va(pvpq[r]) += dva(r);
    }
    // Q - V sweep
    {
        Eigen::VectorXcd V(n);
        for (int b = 0; b < n; ++b) V(b) = std::polar(vm(b), va(b));
        Eigen::VectorXcd S = V.array() * (Yo * V).conjugate().array();
        const int m = static_cast<int>(pq.size());
        if (m > 0) {
            Eigen::MatrixXd A(m, m);
            Eigen::VectorXd rhs(m);
            for (int r = 0; r < m; ++r) {
                rhs(r) = (Starget(pq[r]).imag() - S(pq[r]).imag()) / vm(pq[r]);
                for (int c = 0; c < m; ++c) A(r, c) = -Bpp(pq[r], pq[c]);
            }
            Eigen::VectorXd dvm = A.partialPivLu().solve(rhs);
            for (int r = 0; r < m; ++r) vm(pq[r]) += dvm(r);
        }
    }

    SystemState st;
    st.voltages.resize(n);
    for (int b = 0; b < n; ++b) st.voltages(b) = std::polar(vm(b), va(b));
    st.injections = (st.voltages.array() * (Yo * st.voltages).conjugate().array()) * net.base_mva;
    pf_detail::compute_flows(tmp, st.voltages, st);
    st.converged = true;
    st.iterations = 1;
    Eigen::VectorXcd mism = st.injections / net.base_mva - Starget;
    double mx = 0.0;
    for (int b = 0; b < n; ++b)
        if (b != slack) mx = std::max(mx, std::abs(mism(b)));
    st.max_mismatch = mx;
    return st;
}

/// JSON report of a state (per-bus voltage table, per-branch flow table).
inline ordered_json state_to_json(const Network& net, const SystemState& st) {
    ordered_json j;
    j["converged"] = st.converged;
    j["iterations"] = st.iterations;
    j["max_mismatch_pu"] = st.max_mismatch;
    auto& jb = j["buses"] = ordered_json::array();
    for (int b = 0; b < net.size(); ++b) {
        ordered_json o;
        o["bus"] = net.external_id(b);
        o["vm_pu"] = std::abs(st.voltages(b));
        o["va_deg"] = std::arg(st.voltages(b)) * 180.0 / M_PI;
        o["p_inj_mw"] = st.injections(b).real();
        o["q_inj_mvar"] = st.injections(b).imag();
        jb.push_back(o);
    }
    auto& jf = j["branches"] = ordered_json::array();
    for (size_t k = 0; k < net.branches.size(); ++k) {
        ordered_json o;
        o["from"] = net.branches[k].from_bus;
        o["to"] = net.branches[k].to_bus;
        o["p_from_mw"] = st.flow_from[k].real();
        o["q_from_mvar"] = st.flow_from[k].imag();
        o["p_to_mw"] = st.flow_to[k].real();
        o["q_to_mvar"] = st.flow_to[k].imag();
        if (net.branches[k].s_max > 0.0)
            o["loading_pct"] = 100.0 *
                std::max(std::abs(st.flow_from[k]), std::abs(st.flow_to[k])) /
                net.branches[k].s_max;
        jf.push_back(o);
    }
    return j;
}

}  // namespace cpes
