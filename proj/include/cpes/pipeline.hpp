// End-to-end cyber-constrained dispatch: traditional solve, scoring, gating,
// re-solve, and rescoring on the adjusted operating point.
#pragma once

#include "cpes/opf.hpp"
#include "cpes/score.hpp"

namespace cpes {

struct CAcopfResult {
    OpfSolution traditional;
    OpfSolution cyber;
    ScoreTable score_before;
    ScoreTable score_after;
    std::vector<GateDecision> gates;
};

/// Converged power-flow snapshot of an OPF solution (dispatch and gen-bus
/// voltage setpoints taken from the solution itself).
inline SystemState snapshot(const Network& net, const AdmittanceMatrix& ybus,
                            const OpfSolution& sol) {
    Dispatch d;
    for (size_t g = 0; g < net.generators.size(); ++g) {
        d.p_mw.push_back(sol.p_mw[g]);
        d.v_setpoint.push_back(std::abs(sol.voltages(net.index_of(net.generators[g].bus))));
    }
    return solve_acpf(net, ybus, d, 1e-8, 30, /*enforce_q_limits=*/false);
}

inline CAcopfResult solve_c_acopf(const Network& net, const CyberScenario& scenario,
                                  const Weights& weights, OpfOptions opt = {}) {
    CAcopfResult out;
    AdmittanceMatrix Y = build_ybus(net);

    out.traditional = solve_t_acopf(net, opt);
    if (!out.traditional.converged)
        throw OpfError("traditional dispatch failed: " + out.traditional.status);

    SystemState state_t = snapshot(net, Y, out.traditional);
    out.score_before = cpes_qsm(net, Y, state_t, out.traditional.p_mw, scenario, weights);

    std::vector<double> cq(net.size());
    for (int b = 0; b < net.size(); ++b) cq[b] = out.score_before.rows[b].cq;
    OpfProblem gated = apply_cyber_gate(net, cq, scenario, opt);
    out.gates = gated.gates;

    out.cyber = solve_opf(gated);
    if (!out.cyber.converged) {
        std::string binding = "none";
        for (const auto& g : out.gates)
            if (g.gated) binding = "gen at bus " + std::to_string(g.bus);
        throw OpfError("cyber-gated dispatch failed (" + out.cyber.status +
                       "); binding gate: " + binding);
    }

    SystemState state_c = snapshot(net, Y, out.cyber);
    const bool has_crpi = std::find(weights.criteria.begin(), weights.criteria.end(),
                                    "CRPI") != weights.criteria.end();
    std::vector<double> crpi_col;
    if (has_crpi) {
        crpi_col.resize(net.size());
        for (int b = 0; b < net.size(); ++b)
            crpi_col[b] = out.score_before.rows[b].factors.at("CRPI");
    }
    out.score_after = cpes_qsm(net, Y, state_c, out.cyber.p_mw, scenario, weights,
                               has_crpi ? &crpi_col : nullptr);
    return out;
}

inline ordered_json opf_to_json(const Network& net, const OpfSolution& sol) {
    ordered_json j;
    j["converged"] = sol.converged;
    j["status"] = sol.status;
    j["iterations"] = sol.iterations;
    j["kkt_residual"] = sol.kkt_residual;
    j["total_cost"] = sol.cost;
    auto& rows = j["generators"] = ordered_json::array();
    for (size_t g = 0; g < net.generators.size(); ++g) {
        const int b = net.index_of(net.generators[g].bus);
        ordered_json o;
        o["gen"] = static_cast<int>(g);
        o["bus"] = net.generators[g].bus;
        o["p_mw"] = sol.p_mw[g];
        o["q_mvar"] = sol.q_mvar[g];
        o["vm_pu"] = std::abs(sol.voltages(b));
        o["va_deg"] = std::arg(sol.voltages(b)) * 180.0 / M_PI;
        rows.push_back(o);
    }
    return j;
}

}  // namespace cpes
