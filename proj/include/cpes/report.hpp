// CSV emission for the CLI report tables.
#pragma once

#include <iomanip>
#include <sstream>
#include <string>

#include "cpes/pipeline.hpp"

namespace cpes {

inline std::string state_to_csv(const Network& net, const SystemState& st) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "bus,vm_pu,va_deg,p_inj_mw,q_inj_mvar\n";
    for (int b = 0; b < net.size(); ++b)
        os << net.external_id(b) << ',' << std::abs(st.voltages(b)) << ','
           << std::arg(st.voltages(b)) * 180.0 / M_PI << ','
           << st.injections(b).real() << ',' << st.injections(b).imag() << '\n';
    os << "\nfrom,to,p_from_mw,q_from_mvar,p_to_mw,q_to_mvar,loading_pct\n";
    for (size_t k = 0; k < net.branches.size(); ++k) {
        const auto& br = net.branches[k];
        os << br.from_bus << ',' << br.to_bus << ',' << st.flow_from[k].real() << ','
           << st.flow_from[k].imag() << ',' << st.flow_to[k].real() << ','
           << st.flow_to[k].imag() << ',';
        if (br.s_max > 0.0)
            os << 100.0 * std::max(std::abs(st.flow_from[k]), std::abs(st.flow_to[k])) /
                      br.s_max;
        os << '\n';
    }
    return os.str();
}

inline std::string score_to_csv(const ScoreTable& t,
                                const std::vector<std::string>& criteria) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "bus";
    for (const auto& c : criteria) os << ',' << c;
    os << ",CQ,flagged\n";
    for (const auto& r : t.rows) {
        os << r.bus;
        for (const auto& c : criteria) os << ',' << r.factors.at(c);
        os << ',' << r.cq << ',' << (r.flagged ? 1 : 0) << '\n';
    }
    return os.str();
}

inline std::string opf_to_csv(const Network& net, const OpfSolution& sol) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "gen,bus,p_mw,q_mvar,vm_pu,va_deg\n";
    for (size_t g = 0; g < net.generators.size(); ++g) {
        const int b = net.index_of(net.generators[g].bus);
        os << g << ',' << net.generators[g].bus << ',' << sol.p_mw[g] << ','
           << sol.q_mvar[g] << ',' << std::abs(sol.voltages(b)) << ','
           << std::arg(sol.voltages(b)) * 180.0 / M_PI << '\n';
    }
    os << "\ntotal_cost," << sol.cost << '\n';
    return os.str();
}

/// Side-by-side deltas between the traditional and cyber-gated operating
/// points: per-line loading (absolute percentage points and relative
/// percent), per-bus voltage, and per-bus score changes.
struct CompareReport {
    ordered_json to_json_report(const Network& net, const CAcopfResult& res,
                                const SystemState& st_t, const SystemState& st_c) const {
        ordered_json j;
        j["traditional_cost"] = res.traditional.cost;
        j["cyber_cost"] = res.cyber.cost;
        j["cost_delta"] = res.cyber.cost - res.traditional.cost;
        auto& lines = j["lines"] = ordered_json::array();
        for (size_t k = 0; k < net.branches.size(); ++k) {
            const auto& br = net.branches[k];
            if (!br.in_service || br.s_max <= 0.0) continue;
            const double lt = 100.0 *
                std::max(std::abs(st_t.flow_from[k]), std::abs(st_t.flow_to[k])) / br.s_max;
            const double lc = 100.0 *
                std::max(std::abs(st_c.flow_from[k]), std::abs(st_c.flow_to[k])) / br.s_max;
            ordered_json o;
            o["from"] = br.from_bus;
            o["to"] = br.to_bus;
            o["loading_t_pct"] = lt;
            o["loading_c_pct"] = lc;
            o["delta_pp"] = lc - lt;
            o["delta_rel_pct"] = lt != 0.0 ? 100.0 * (lc - lt) / lt : 0.0;
            lines.push_back(o);
        }
        auto& buses = j["buses"] = ordered_json::array();
        for (int b = 0; b < net.size(); ++b) {
            ordered_json o;
            o["bus"] = net.external_id(b);
            o["vm_t_pu"] = std::abs(st_t.voltages(b));
            o["vm_c_pu"] = std::abs(st_c.voltages(b));
            o["cq_t"] = res.score_before.rows[b].cq;
            o["cq_c"] = res.score_after.rows[b].cq;
            o["cq_delta"] = res.score_after.rows[b].cq - res.score_before.rows[b].cq;
            buses.push_back(o);
        }
        return j;
    }

    std::string to_csv_report(const Network& net, const CAcopfResult& res,
                              const SystemState& st_t, const SystemState& st_c) const {
        std::ostringstream os;
        os << std::setprecision(10);
        os << "from,to,loading_t_pct,loading_c_pct,delta_pp,delta_rel_pct\n";
        for (size_t k = 0; k < net.branches.size(); ++k) {
            const auto& br = net.branches[k];
            if (!br.in_service || br.s_max <= 0.0) continue;
            const double lt = 100.0 *
                std::max(std::abs(st_t.flow_from[k]), std::abs(st_t.flow_to[k])) / br.s_max;
            const double lc = 100.0 *
                std::max(std::abs(st_c.flow_from[k]), std::abs(st_c.flow_to[k])) / br.s_max;
            os << br.from_bus << ',' << br.to_bus << ',' << lt << ',' << lc << ','
               << lc - lt << ',' << (lt != 0.0 ? 100.0 * (lc - lt) / lt : 0.0) << '\n';
        }
        os << "\nbus,vm_t_pu,vm_c_pu,cq_t,cq_c,cq_delta\n";
        for (int b = 0; b < net.size(); ++b)
            os << net.external_id(b) << ',' << std::abs(st_t.voltages(b)) << ','
               << std::abs(st_c.voltages(b)) << ',' << res.score_before.rows[b].cq << ','
               << res.score_after.rows[b].cq << ','
               << res.score_after.rows[b].cq - res.score_before.rows[b].cq << '\n';
        os << "\ntraditional_cost," << res.traditional.cost << '\n';
        os << "cyber_cost," << res.cyber.cost << '\n';
        return os.str();
    }
};

}  // namespace cpes
