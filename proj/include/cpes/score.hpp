// Per-bus security score: factor computation and Choquet aggregation.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "cpes/choquet.hpp"
#include "cpes/cyber.hpp"
#include "cpes/electrical.hpp"
#include "cpes/graph.hpp"
#include "cpes/grid.hpp"
#include "cpes/powerflow.hpp"

namespace cpes {

/// Ordered criteria and their expert weights. The criterion names select
/// which factors feed the aggregation; supported names are CRPI, QCR, VDI,
/// SVSI, VCPI, BC, CC, EBC ("QCR" resolves to the attack-graph variant
/// where a bus has one configured, otherwise the single-device variant).
struct Weights {
    std::vector<std::string> criteria;
    std::vector<double> values;

    static Weights from_json(const json& j) {
        Weights w;
        for (const auto& c : j.at("criteria")) w.criteria.push_back(c.get<std::string>());
        for (const auto& v : j.at("weights")) w.values.push_back(v.get<double>());
        if (w.criteria.size() != w.values.size())
            throw ChoquetError("criteria and weights lists differ in length");
        if (w.criteria.empty()) throw ChoquetError("no criteria configured");
        return w;
    }
};

/// Everything the score table reports for one bus.
struct BusScore {
    int bus = 0;                       // external number
    std::map<std::string, double> factors;
    double cq = 0.0;
    bool flagged = false;              // cq >= rho
};

struct ScoreTable {
    std::vector<BusScore> rows;        // dense bus order
    double lambda = 0.0;
    double rho = 0.0;

    const BusScore& by_external(int bus_id) const {
        for (const auto& r : rows)
            if (r.bus == bus_id) return r;
        throw std::out_of_range("no score row for bus " + std::to_string(bus_id));
    }
    std::vector<int> flagged_buses() const {
        std::vector<int> out;
        for (const auto& r : rows)
            if (r.flagged) out.push_back(r.bus);
        return out;
    }
};

/// All raw factors for one operating point. Generation shares use the given
/// dispatch; a bus that hosts any generator takes its share of total
/// generation, other buses their share of total load.
struct FactorBundle {
    ElectricalFactors electrical;
    GraphFactors graph;
    std::vector<double> qcr;
    std::vector<double> probability;
    std::vector<double> power_share;
};

inline FactorBundle compute_factors(const Network& net, const AdmittanceMatrix& ybus,
                                    const SystemState& state,
                                    const std::vector<double>& gen_p_mw,
                                    const CyberScenario& scenario,
                                    const std::vector<double>* crpi_reuse = nullptr) {
    FactorBundle fb;
    if (crpi_reuse) {
        fb.electrical.crpi = *crpi_reuse;
        fb.electrical.vdi = compute_vdi(state);
        fb.electrical.vcpi = compute_vcpi(state, ybus);
        fb.electrical.svsi = compute_svsi(state, ybus, net);
    } else {
        fb.electrical = compute_electrical_factors(net, ybus, state, scenario.n_pi);
    }
    fb.graph = compute_graph_factors(CyberGraph(net));

    const int n = net.size();
    double total_gen = 0.0;
    std::vector<double> gen_at(n, 0.0);
    std::vector<char> has_gen(n, 0);
    for (size_t g = 0; g < net.generators.size(); ++g) {
        if (!net.generators[g].in_service) continue;
        const int b = net.index_of(net.generators[g].bus);
        has_gen[b] = 1;
        gen_at[b] += gen_p_mw[g];
        total_gen += gen_p_mw[g];
    }
    std::vector<double> load_at(n, 0.0);
    for (const auto& l : net.loads) load_at[net.index_of(l.bus)] += l.demand.real();
    const double total_load = net.total_load_mw();

    fb.qcr.assign(n, 0.0);
    fb.probability.assign(n, 0.0);
    fb.power_share.assign(n, 0.0);
    for (int b = 0; b < n; ++b) {
        const double share = has_gen[b]
                                 ? (total_gen > 0.0 ? gen_at[b] / total_gen : 0.0)
                                 : (total_load > 0.0 ? load_at[b] / total_load : 0.0);
        fb.power_share[b] = share;
        fb.probability[b] = scenario.bus_probability(net.external_id(b));
        fb.qcr[b] = fb.probability[b] *
                    impact_term(fb.graph.bc[b], fb.graph.cc[b], fb.graph.ebc[b],
                                share, scenario.impact_scale);
    }
    return fb;
}

inline double factor_value(const FactorBundle& fb, const std::string& name, int b) {
    if (name == "CRPI") return fb.electrical.crpi[b];
    if (name == "VDI") return fb.electrical.vdi[b];
    if (name == "VCPI") return fb.electrical.vcpi[b];
    if (name == "SVSI") return fb.electrical.svsi[b];
    if (name == "QCR" || name == "QCR-B" || name == "QCR-A") return fb.qcr[b];
    if (name == "BC") return fb.graph.bc[b];
    if (name == "CC") return fb.graph.cc[b];
    if (name == "EBC") return fb.graph.ebc[b];
    throw ChoquetError("unknown criterion '" + name + "'");
}

/// Builds the per-bus score table for one operating point. The contingency
/// ranking is a screening product of the base topology; pass `crpi_reuse` to
/// carry a previously computed column into a rescore instead of rescreening.
inline ScoreTable cpes_qsm(const Network& net, const AdmittanceMatrix& ybus,
                           const SystemState& state,
                           const std::vector<double>& gen_p_mw,
                           const CyberScenario& scenario, const Weights& weights,
                           const std::vector<double>* crpi_reuse = nullptr) {
    const FactorBundle fb =
        compute_factors(net, ybus, state, gen_p_mw, scenario, crpi_reuse);
    const FuzzyMeasureSet fm = FuzzyMeasureSet::build(weights.values);

    ScoreTable table;
    table.lambda = fm.lambda();
    table.rho = scenario.rho;
    for (int b = 0; b < net.size(); ++b) {
        BusScore row;
        row.bus = net.external_id(b);
        std::vector<double> x;
        for (const auto& name : weights.criteria) {
            double v;
            try {
                v = factor_value(fb, name, b);
            } catch (const std::exception& e) {
                throw ChoquetError("bus " + std::to_string(row.bus) + ": " + e.what());
            }
            row.factors[name] = v;
            x.push_back(v);
        }
        row.cq = choquet(x, fm);
        row.flagged = row.cq >= scenario.rho;
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline ordered_json score_to_json(const ScoreTable& t) {
    ordered_json j;
    j["lambda"] = t.lambda;
    j["rho"] = t.rho;
    auto& rows = j["buses"] = ordered_json::array();
    for (const auto& r : t.rows) {
        ordered_json o;
        o["bus"] = r.bus;
        for (const auto& [k, v] : r.factors) o[k] = v;
        o["CQ"] = r.cq;
        o["flagged"] = r.flagged;
        rows.push_back(o);
    }
    return j;
}

}  // namespace cpes
