// Electrical-domain factors: contingency ranking (CRPI), voltage deviation
// (VDI), voltage-collapse proximity (VCPI), and the simplified voltage
// stability index (SVSI) with its electrical-distance generator lookup.
#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cpes/grid.hpp"
#include "cpes/parallel.hpp"
#include "cpes/powerflow.hpp"

namespace cpes {

struct FactorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ElectricalFactors {
    std::vector<double> crpi;
    std::vector<double> vdi;
    std::vector<double> vcpi;
    std::vector<double> svsi;
};

struct CrpiResult {
    std::vector<double> bus_value;            // scaled to [0,1]
    std::vector<std::pair<int, double>> ranking;  // (branch row, raw PI), descending
};

namespace elec_detail {

// Severity of one topology snapshot: sum over screened lines of
// (|P| / P_max)^(2 n_pi), flows taken as the larger |P| of the two ends.
inline double severity(const Network& net, const SystemState& st,
                       const std::vector<int>& screened, int exclude, int n_pi) {
    double pi = 0.0;
    for (int l : screened) {
        if (l == exclude) continue;
        const auto& br = net.branches[l];
        if (br.s_max <= 0.0) continue;
        const double p = std::max(std::abs(st.flow_from[l].real()),
                                  std::abs(st.flow_to[l].real()));
        pi += std::pow(p / br.s_max, 2.0 * n_pi);
    }
    return pi;
}

}  // namespace elec_detail

/// Contingency ranking over single line outages (transformers are not
/// screened). Each outage is evaluated with the one-sweep fast-decoupled
/// solve from the base state; an outage that would island the network falls
/// back to the pre-outage flows. Raw indices are ranked descending, each bus
/// takes the maximum over its incident lines, and values are scaled by the
/// global maximum into [0,1].
inline CrpiResult compute_crpi(const Network& net, const AdmittanceMatrix& ybus,
                               const SystemState& base, int n_pi = 2) {
    if (!base.converged) throw FactorError("CRPI needs a converged base state");
    if (n_pi < 1) throw FactorError("n_pi must be a positive integer");

    std::vector<int> screened;
    for (int k = 0; k < static_cast<int>(net.branches.size()); ++k)
        if (net.branches[k].in_service && !net.branches[k].is_transformer())
            screened.push_back(k);

    const auto pi_for = [&](int idx) -> double {
        const int line = screened[idx];
        try {
            SystemState post = solve_fdpf_1p1q(net, ybus, line, base);
            return elec_detail::severity(net, post, screened, line, n_pi);
        } catch (const IslandingError&) {
            return elec_detail::severity(net, base, screened, line, n_pi);
        }
    };
    std::vector<double> pi = parallel_map<double>(
        static_cast<int>(screened.size()), pi_for);

    CrpiResult res;
    res.ranking.reserve(pi.size());
    for (size_t i = 0; i < pi.size(); ++i)
        res.ranking.emplace_back(screened[i], pi[i]);
    std::sort(res.ranking.begin(), res.ranking.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    double mx = 0.0;
    for (const auto& [line, v] : res.ranking) mx = std::max(mx, v);
    res.bus_value.assign(net.size(), 0.0);
    if (mx <= 0.0) return res;
    for (const auto& [line, v] : res.ranking) {
        const double scaled = v / mx;
        const int f = net.index_of(net.branches[line].from_bus);
        const int t = net.index_of(net.branches[line].to_bus);
        res.bus_value[f] = std::max(res.bus_value[f], scaled);
        res.bus_value[t] = std::max(res.bus_value[t], scaled);
    }
    return res;
}

/// Voltage deviation from nominal: |1 - |V_k||.
inline std::vector<double> compute_vdi(const SystemState& state) {
    std::vector<double> out(state.voltages.size());
    for (int b = 0; b < state.voltages.size(); ++b)
        out[b] = std::abs(1.0 - std::abs(state.voltages(b)));
    return out;
}

/// Voltage-collapse proximity: distance of |V_k| from the admittance-weighted
/// mean of its neighbours' magnitudes,
///   VCPI_k = | 1 - sum_m w_m |V_m| / |V_k| |,  w_m = |Y_km| / sum_j |Y_kj|.
/// Zero on any flat voltage profile; grows as a bus sags against its feeders.
inline std::vector<double> compute_vcpi(const SystemState& state,
                                        const AdmittanceMatrix& ybus) {
    const int n = static_cast<int>(state.voltages.size());
    std::vector<double> wsum(n, 0.0), acc(n, 0.0);
    for (int col = 0; col < ybus.outerSize(); ++col) {
        for (AdmittanceMatrix::InnerIterator it(ybus, col); it; ++it) {
            const int k = static_cast<int>(it.row());
            const int m = static_cast<int>(it.col());
            if (k == m) continue;
            const double w = std::abs(it.value());
            wsum[k] += w;
            acc[k] += w * std::abs(state.voltages(m));
        }
    }
    std::vector<double> out(n, 0.0);
    for (int k = 0; k < n; ++k) {
        if (wsum[k] <= 0.0)
            throw FactorError("VCPI undefined for isolated bus index " + std::to_string(k));
        out[k] = std::abs(1.0 - acc[k] / wsum[k] / std::abs(state.voltages(k)));
    }
    return out;
}

/// Relative electrical distance of load buses to generator buses:
///   F = -Y_LL^{-1} Y_LG,  RED = 1 - |F|.
/// Row order follows load_buses, column order gen_buses (dense indices).
inline Eigen::MatrixXd relative_electrical_distance(const AdmittanceMatrix& ybus,
                                                    const std::vector<int>& gen_buses,
                                                    const std::vector<int>& load_buses) {
    const Eigen::MatrixXcd Y(ybus);
    const int nl = static_cast<int>(load_buses.size());
    const int ng = static_cast<int>(gen_buses.size());
    Eigen::MatrixXcd Yll(nl, nl), Ylg(nl, ng);
    for (int r = 0; r < nl; ++r) {
        for (int c = 0; c < nl; ++c) Yll(r, c) = Y(load_buses[r], load_buses[c]);
        for (int c = 0; c < ng; ++c) Ylg(r, c) = Y(load_buses[r], gen_buses[c]);
    }
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(Yll);
    if (!lu.isInvertible())
        throw FactorError("singular load-bus admittance block in RED computation");
    Eigen::MatrixXcd F = -lu.solve(Ylg);
    return Eigen::MatrixXd::Ones(nl, ng) - F.cwiseAbs();
}

/// Simplified voltage stability index. Each load bus is referenced to its
/// electrically nearest generator (minimum RED); the index compares their
/// voltage-magnitude gap against the system-wide spread correction
///   beta = 1 - (max |V_m| - min |V_l|)^2.
/// Generator buses score zero.
inline std::vector<double> compute_svsi(const SystemState& state,
                                        const AdmittanceMatrix& ybus,
                                        const Network& net) {
    const int n = net.size();
    const std::vector<int> gens = net.generator_bus_indices();
    if (gens.empty()) throw FactorError("SVSI needs at least one generator bus");
    std::vector<int> loads;
    for (int b = 0; b < n; ++b)
        if (std::find(gens.begin(), gens.end(), b) == gens.end()) loads.push_back(b);

    std::vector<double> out(n, 0.0);
    if (loads.empty()) return out;

    const Eigen::MatrixXd red = relative_electrical_distance(ybus, gens, loads);

    double vmax = -std::numeric_limits<double>::infinity();
    double vmin = std::numeric_limits<double>::infinity();
    for (int b = 0; b < n; ++b) {
        const double vm = std::abs(state.voltages(b));
        vmax = std::max(vmax, vm);
        vmin = std::min(vmin, vm);
    }
    const double beta = 1.0 - (vmax - vmin) * (vmax - vmin);
    if (beta <= 0.0)
        throw FactorError("SVSI undefined: voltage spread of " +
                          std::to_string(vmax - vmin) + " pu makes beta nonpositive");

    for (size_t r = 0; r < loads.size(); ++r) {
        int best = 0;
        for (int c = 1; c < static_cast<int>(gens.size()); ++c)
            if (red(r, c) < red(r, best)) best = c;
        const int g = gens[best];
        const int k = loads[r];
        const double dv = std::abs(std::abs(state.voltages(g)) - std::abs(state.voltages(k)));
        out[k] = dv / (beta * std::abs(state.voltages(k)));
    }
    return out;
}

inline ElectricalFactors compute_electrical_factors(const Network& net,
                                                    const AdmittanceMatrix& ybus,
                                                    const SystemState& state,
                                                    int n_pi = 2) {
    ElectricalFactors f;
    f.crpi = compute_crpi(net, ybus, state, n_pi).bus_value;
    f.vdi = compute_vdi(state);
    f.vcpi = compute_vcpi(state, ybus);
    f.svsi = compute_svsi(state, ybus, net);
    return f;
}

}  // namespace cpes
