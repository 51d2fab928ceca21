// CVSS v3.1 exploitability scoring, single-device and attack-graph cyber risk.
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpes/graph.hpp"

namespace cpes {

struct CyberError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class AttackVector { Network, AdjacentNetwork, LocalNetwork, Physical };
enum class AttackComplexity { Low, High };
enum class UserInteraction { None, Required };
enum class PrivilegesRequired { None, Low, High };

/// CVSS v3.1 exploitability vector. Numeric values follow the v3.1
/// exploitability metric table; PR depends on whether scope changes.
struct CvssVector {
    AttackVector av = AttackVector::Network;
    AttackComplexity ac = AttackComplexity::Low;
    UserInteraction ui = UserInteraction::None;
    PrivilegesRequired pr = PrivilegesRequired::None;
    bool scope_changed = false;

    double av_value() const {
        switch (av) {
            case AttackVector::Network: return 0.85;
            case AttackVector::AdjacentNetwork: return 0.62;
            case AttackVector::LocalNetwork: return 0.55;
            case AttackVector::Physical: return 0.2;
        }
        return 0.0;
    }
    double ac_value() const { return ac == AttackComplexity::Low ? 0.77 : 0.44; }
    double ui_value() const { return ui == UserInteraction::None ? 0.85 : 0.62; }
    double pr_value() const {
        switch (pr) {
            case PrivilegesRequired::None: return 0.85;
            case PrivilegesRequired::Low: return scope_changed ? 0.68 : 0.62;
            case PrivilegesRequired::High: return scope_changed ? 0.50 : 0.27;
        }
        return 0.0;
    }
};

/// Exploitation probability: the product of the four metric values.
inline double exploit_probability(const CvssVector& v) {
    return v.av_value() * v.ac_value() * v.ui_value() * v.pr_value();
}

/// A device with one or more known vulnerabilities. Multiple vulnerabilities
/// combine by the any-of (parallel) rule.
struct DeviceNode {
    std::string id;
    std::vector<CvssVector> vulnerabilities;

    double interim_probability() const {
        if (vulnerabilities.empty())
            throw CyberError("device '" + id + "' has no vulnerability vector");
        if (vulnerabilities.size() == 1) return exploit_probability(vulnerabilities[0]);
        double none_exploited = 1.0;
        for (const auto& v : vulnerabilities)
            none_exploited *= 1.0 - exploit_probability(v);
        return 1.0 - none_exploited;
    }
};

/// Ordered stages toward a target device: each stage is one device (serial
/// hop) or several (parallel layer). The last stage is the target.
struct AttackGraph {
    std::vector<std::vector<DeviceNode>> stages;

    /// Total attack-graph probability: leading stages compose serially by
    /// product, parallel layers by complement-product, times the target's
    /// interim probability.
    double probability() const {
        if (stages.empty()) throw CyberError("attack graph has no stages");
        double leading = 1.0;
        for (size_t s = 0; s + 1 < stages.size(); ++s)
            leading *= stage_probability(stages[s]);
        return leading * stage_probability(stages.back());
    }

    static double stage_probability(const std::vector<DeviceNode>& stage) {
        if (stage.empty()) throw CyberError("attack graph stage is empty");
        if (stage.size() == 1) return stage[0].interim_probability();
        double none = 1.0;
        for (const auto& d : stage) none *= 1.0 - d.interim_probability();
        return 1.0 - none;
    }
};

struct CyberFactors {
    double probability = 0.0;
    double impact = 0.0;
    double qcr = 0.0;
};

/// Impact term: the bus's centrality mass times its share of system
/// generation (generator buses) or load (load-only buses). The scale factor
/// keeps scores in the working decimal range; see the scenario schema.
inline double impact_term(double bc, double cc, double ebc, double power_share,
                          double impact_scale) {
    return (bc + cc + ebc) * power_share * impact_scale;
}

/// Single-device cyber risk: QCR = P x I.
inline CyberFactors qcr_b(const CvssVector& v, double bc, double cc, double ebc,
                          double power_share, double impact_scale = 1.0) {
    if (power_share < 0.0 || power_share > 1.0)
        throw CyberError("power share must lie in [0,1]");
    CyberFactors f;
    f.probability = exploit_probability(v);
    f.impact = impact_term(bc, cc, ebc, power_share, impact_scale);
    f.qcr = f.probability * f.impact;
    return f;
}

/// Attack-graph cyber risk; degenerates to qcr_b for a single-device graph.
inline CyberFactors qcr_a(const AttackGraph& g, double bc, double cc, double ebc,
                          double power_share, double impact_scale = 1.0) {
    if (power_share < 0.0 || power_share > 1.0)
        throw CyberError("power share must lie in [0,1]");
    CyberFactors f;
    f.probability = g.probability();
    f.impact = impact_term(bc, cc, ebc, power_share, impact_scale);
    f.qcr = f.probability * f.impact;
    return f;
}

// ---- scenario file (JSON) ----

inline CvssVector cvss_from_json(const json& j) {
    CvssVector v;
    const std::string av = j.at("AV").get<std::string>();
    if (av == "Network") v.av = AttackVector::Network;
    else if (av == "AdjacentNetwork" || av == "Adjacent") v.av = AttackVector::AdjacentNetwork;
    else if (av == "LocalNetwork" || av == "Local") v.av = AttackVector::LocalNetwork;
    else if (av == "Physical") v.av = AttackVector::Physical;
    else throw CyberError("unknown AV value '" + av + "'");
    const std::string ac = j.at("AC").get<std::string>();
    if (ac == "Low") v.ac = AttackComplexity::Low;
    else if (ac == "High") v.ac = AttackComplexity::High;
    else throw CyberError("unknown AC value '" + ac + "'");
    const std::string ui = j.at("UI").get<std::string>();
    if (ui == "None") v.ui = UserInteraction::None;
    else if (ui == "Required") v.ui = UserInteraction::Required;
    else throw CyberError("unknown UI value '" + ui + "'");
    const std::string pr = j.at("PR").get<std::string>();
    if (pr == "None") v.pr = PrivilegesRequired::None;
    else if (pr == "Low") v.pr = PrivilegesRequired::Low;
    else if (pr == "High") v.pr = PrivilegesRequired::High;
    else throw CyberError("unknown PR value '" + pr + "'");
    if (j.contains("S")) {
        const std::string s = j.at("S").get<std::string>();
        if (s == "Changed") v.scope_changed = true;
        else if (s == "Unchanged") v.scope_changed = false;
        else throw CyberError("unknown S value '" + s + "'");
    }
    return v;
}

inline json cvss_to_json(const CvssVector& v) {
    json j;
    switch (v.av) {
        case AttackVector::Network: j["AV"] = "Network"; break;
        case AttackVector::AdjacentNetwork: j["AV"] = "AdjacentNetwork"; break;
        case AttackVector::LocalNetwork: j["AV"] = "LocalNetwork"; break;
        case AttackVector::Physical: j["AV"] = "Physical"; break;
    }
    j["AC"] = v.ac == AttackComplexity::Low ? "Low" : "High";
    j["UI"] = v.ui == UserInteraction::None ? "None" : "Required";
    switch (v.pr) {
        case PrivilegesRequired::None: j["PR"] = "None"; break;
        case PrivilegesRequired::Low: j["PR"] = "Low"; break;
        case PrivilegesRequired::High: j["PR"] = "High"; break;
    }
    j["S"] = v.scope_changed ? "Changed" : "Unchanged";
    return j;
}

/// Per-bus cyber configuration plus the gating parameters used by the
/// cyber-constrained dispatch. Bus keys are external (case-file) numbers.
struct CyberScenario {
    double rho = 0.2;
    int n_pi = 2;
    double impact_scale = 1.0;
    CvssVector default_device;
    std::map<int, std::vector<DeviceNode>> bus_devices;      // flat device list
    std::map<int, AttackGraph> bus_attack_graphs;            // optional per bus
    std::map<int, int> zeta;                                 // per generator bus
    std::vector<int> gate_exempt;                            // generator buses
    std::string alpha_policy = "pmin-over-pmax";

    /// Probability for a bus: attack graph if configured, else the parallel
    /// combination of the bus's devices, else the default device.
    double bus_probability(int external_bus) const {
        if (auto it = bus_attack_graphs.find(external_bus); it != bus_attack_graphs.end())
            return it->second.probability();
        if (auto it = bus_devices.find(external_bus); it != bus_devices.end()) {
            double none = 1.0;
            for (const auto& d : it->second) none *= 1.0 - d.interim_probability();
            return 1.0 - none;
        }
        return exploit_probability(default_device);
    }

    bool is_exempt(int external_bus) const {
        return std::find(gate_exempt.begin(), gate_exempt.end(), external_bus) !=
               gate_exempt.end();
    }

    int zeta_for(int external_bus) const {
        auto it = zeta.find(external_bus);
        return it == zeta.end() ? 0 : it->second;
    }
};

inline CyberScenario scenario_from_json(const json& j) {
    CyberScenario sc;
    sc.rho = j.value("rho", 0.2);
    if (!(sc.rho > 0.0 && sc.rho <= 1.0))
        throw CyberError("rho must lie in (0,1]");
    sc.n_pi = j.value("n_pi", 2);
    if (sc.n_pi < 1) throw CyberError("n_pi must be a positive integer");
    sc.impact_scale = j.value("impact_scale", 1.0);
    if (j.contains("default_device"))
        sc.default_device = cvss_from_json(j.at("default_device"));
    if (j.contains("buses")) {
        for (const auto& [key, o] : j.at("buses").items()) {
            const int bus = std::stoi(key);
            if (o.contains("devices")) {
                std::vector<DeviceNode> devs;
                int di = 0;
                for (const auto& dj : o.at("devices")) {
                    DeviceNode d;
                    d.id = dj.value("id", key + ":" + std::to_string(di++));
                    if (dj.contains("vulnerabilities"))
                        for (const auto& vj : dj.at("vulnerabilities"))
                            d.vulnerabilities.push_back(cvss_from_json(vj));
                    else
                        d.vulnerabilities.push_back(cvss_from_json(dj));
                    devs.push_back(std::move(d));
                }
                sc.bus_devices[bus] = std::move(devs);
            }
            if (o.contains("attack_graph")) {
                AttackGraph g;
                for (const auto& stage : o.at("attack_graph").at("stages")) {
                    std::vector<DeviceNode> layer;
                    int di = 0;
                    for (const auto& dj : stage) {
                        DeviceNode d;
                        d.id = dj.value("id", key + ":ag" + std::to_string(di++));
                        if (dj.contains("vulnerabilities"))
                            for (const auto& vj : dj.at("vulnerabilities"))
                                d.vulnerabilities.push_back(cvss_from_json(vj));
                        else
                            d.vulnerabilities.push_back(cvss_from_json(dj));
                        layer.push_back(std::move(d));
                    }
                    g.stages.push_back(std::move(layer));
                }
                sc.bus_attack_graphs[bus] = std::move(g);
            }
        }
    }
    if (j.contains("zeta"))
        for (const auto& [key, v] : j.at("zeta").items())
            sc.zeta[std::stoi(key)] = v.get<int>();
    if (j.contains("gate_exempt"))
        for (const auto& v : j.at("gate_exempt"))
            sc.gate_exempt.push_back(v.get<int>());
    if (j.contains("alpha_policy"))
        sc.alpha_policy = j.at("alpha_policy").get<std::string>();
    return sc;
}

}  // namespace cpes
