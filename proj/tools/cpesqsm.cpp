// Command-line front end: power flow, security scoring, traditional and
// cyber-constrained dispatch, and side-by-side comparison.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cpes/pipeline.hpp"
#include "cpes/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSolver = 1;
constexpr int kExitInput = 2;

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw std::runtime_error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
    } else {
        std::ofstream f(out_path);
        if (!f.good()) throw std::runtime_error("cannot write '" + out_path + "'");
        f << text;
    }
}

struct CommonArgs {
    std::string case_path;
    std::string weights_path;
    std::string scenario_path;
    std::string format = "json";
    std::string out_path;
    double rho_override = -1.0;
    std::string zeta_path;
    std::string alpha_policy;
    int n_pi_override = -1;
};

cpes::Network load_net(const CommonArgs& a) {
    return cpes::parse_case(slurp(a.case_path));
}

cpes::CyberScenario load_scenario(const CommonArgs& a) {
    cpes::CyberScenario sc;
    if (!a.scenario_path.empty())
        sc = cpes::scenario_from_json(cpes::json::parse(slurp(a.scenario_path)));
    // flags take precedence over the file
    if (a.rho_override > 0.0) sc.rho = a.rho_override;
    if (a.n_pi_override > 0) sc.n_pi = a.n_pi_override;
    if (!a.alpha_policy.empty()) sc.alpha_policy = a.alpha_policy;
    if (!a.zeta_path.empty()) {
        const auto j = cpes::json::parse(slurp(a.zeta_path));
        sc.zeta.clear();
        for (const auto& [k, v] : j.items()) sc.zeta[std::stoi(k)] = v.get<int>();
    }
    return sc;
}

cpes::Weights load_weights(const CommonArgs& a) {
    if (a.weights_path.empty())
        throw std::runtime_error("a weights file is required (--weights)");
    return cpes::Weights::from_json(cpes::json::parse(slurp(a.weights_path)));
}

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_weights, bool needs_scenario) {
    cmd->add_option("--case", a.case_path, "MATPOWER-style case file")->required();
    auto* w = cmd->add_option("--weights", a.weights_path, "criteria weights JSON");
    auto* s = cmd->add_option("--scenario", a.scenario_path, "cyber scenario JSON");
    if (needs_weights) w->required();
    if (needs_scenario) s->required();
    cmd->add_option("--format", a.format, "output format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_option("--out", a.out_path, "write the report to a file instead of stdout");
    cmd->add_option("--rho", a.rho_override, "override the unreliability threshold");
    cmd->add_option("--zeta-file", a.zeta_path, "JSON map of generator bus -> zeta flag");
    cmd->add_option("--alpha-policy", a.alpha_policy, "curtailment policy name");
    cmd->add_option("--n-pi", a.n_pi_override, "contingency ranking exponent parameter");
}

int run_powerflow(const CommonArgs& a) {
    auto net = load_net(a);
    auto Y = cpes::build_ybus(net);
    auto st = cpes::solve_acpf(net, Y, cpes::Dispatch::from_case(net));
    emit(a.format == "csv" ? cpes::state_to_csv(net, st)
                           : cpes::state_to_json(net, st).dump(2),
         a.out_path);
    return kExitOk;
}

int run_score(const CommonArgs& a) {
    auto net = load_net(a);
    auto scenario = load_scenario(a);
    auto weights = load_weights(a);
    auto Y = cpes::build_ybus(net);
    auto t_sol = cpes::solve_t_acopf(net);
    if (!t_sol.converged) {
        std::cerr << "dispatch failed: " << t_sol.status << "\n";
        return kExitSolver;
    }
    auto st = cpes::snapshot(net, Y, t_sol);
    auto table = cpes::cpes_qsm(net, Y, st, t_sol.p_mw, scenario, weights);
    emit(a.format == "csv" ? cpes::score_to_csv(table, weights.criteria)
                           : cpes::score_to_json(table).dump(2),
         a.out_path);
    return kExitOk;
}

int run_opf(const CommonArgs& a, const std::string& mode) {
    auto net = load_net(a);
    if (mode == "traditional") {
        auto sol = cpes::solve_t_acopf(net);
        if (!sol.converged) {
            std::cerr << "solver did not converge: " << sol.status << "\n";
            return kExitSolver;
        }
        emit(a.format == "csv" ? cpes::opf_to_csv(net, sol)
                               : cpes::opf_to_json(net, sol).dump(2),
             a.out_path);
        return kExitOk;
    }
    auto scenario = load_scenario(a);
    auto weights = load_weights(a);
    cpes::CAcopfResult res;
    try {
        res = cpes::solve_c_acopf(net, scenario, weights);
    } catch (const cpes::OpfError& e) {
        std::cerr << e.what() << "\n";
        return kExitSolver;
    }
    if (a.format == "csv") {
        std::ostringstream os;
        os << "# traditional\n" << cpes::opf_to_csv(net, res.traditional)
           << "\n# cyber\n" << cpes::opf_to_csv(net, res.cyber)
           << "\n# score before\n" << cpes::score_to_csv(res.score_before, weights.criteria)
           << "\n# score after\n" << cpes::score_to_csv(res.score_after, weights.criteria);
        emit(os.str(), a.out_path);
    } else {
        cpes::ordered_json j;
        j["traditional"] = cpes::opf_to_json(net, res.traditional);
        j["cyber"] = cpes::opf_to_json(net, res.cyber);
        j["score_before"] = cpes::score_to_json(res.score_before);
        j["score_after"] = cpes::score_to_json(res.score_after);
        auto& gates = j["gates"] = cpes::ordered_json::array();
        for (const auto& g : res.gates) {
            cpes::ordered_json o;
            o["bus"] = g.bus;
            o["cq"] = g.cq;
            o["gated"] = g.gated;
            o["exempt"] = g.exempt;
            o["zeta"] = g.zeta;
            o["alpha"] = g.alpha;
            gates.push_back(o);
        }
        emit(j.dump(2), a.out_path);
    }
    return kExitOk;
}

int run_compare(const CommonArgs& a) {
    auto net = load_net(a);
    auto scenario = load_scenario(a);
    auto weights = load_weights(a);
    cpes::CAcopfResult res;
    try {
        res = cpes::solve_c_acopf(net, scenario, weights);
    } catch (const cpes::OpfError& e) {
        std::cerr << e.what() << "\n";
        return kExitSolver;
    }
    auto Y = cpes::build_ybus(net);
    auto st_t = cpes::snapshot(net, Y, res.traditional);
    auto st_c = cpes::snapshot(net, Y, res.cyber);
    cpes::CompareReport rep;
    emit(a.format == "csv" ? rep.to_csv_report(net, res, st_t, st_c)
                           : rep.to_json_report(net, res, st_t, st_c).dump(2),
         a.out_path);
    return kExitOk;
}

int run_validate(const CommonArgs& a) {
    auto net = load_net(a);
    std::cout << "case: " << net.size() << " buses, " << net.branches.size()
              << " branch rows, " << net.generators.size() << " generators, "
              << net.loads.size() << " loads\n";
    if (!is_connected(net)) {
        std::cerr << "network is not connected\n";
        return kExitInput;
    }
    if (!a.weights_path.empty()) {
        auto w = load_weights(a);
        auto fm = cpes::FuzzyMeasureSet::build(w.values);
        std::cout << "weights: " << w.criteria.size()
                  << " criteria, lambda = " << fm.lambda() << "\n";
    }
    if (!a.scenario_path.empty()) {
        auto scn = load_scenario(a);
        std::cout << "scenario: rho = " << scn.rho << ", n_pi = " << scn.n_pi
                  << ", impact_scale = " << scn.impact_scale << ", "
                  << scn.bus_devices.size() << " bus device entries\n";
        for (const auto& [bus, devs] : scn.bus_devices)
            net.index_of(bus);  // throws on a dangling reference
        for (const auto& [bus, z] : scn.zeta) net.index_of(bus);
        for (int bus : scn.gate_exempt) net.index_of(bus);
    }
    std::cout << "ok\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CPES-QSM grid security scoring and cyber-constrained dispatch"};
    app.require_subcommand(1);

    CommonArgs pf_args, score_args, opf_args, cmp_args, val_args;
    std::string opf_mode = "traditional";

    auto* pf = app.add_subcommand("powerflow", "solve the AC power flow at the case dispatch");
    add_common(pf, pf_args, false, false);

    auto* sc = app.add_subcommand("score", "per-bus security score table");
    add_common(sc, score_args, true, true);

    auto* op = app.add_subcommand("opf", "optimal dispatch (traditional or cyber-gated)");
    add_common(op, opf_args, false, false);
    op->add_option("--mode", opf_mode, "traditional or cyber")
        ->check(CLI::IsMember({"traditional", "cyber"}));

    auto* cm = app.add_subcommand("compare", "traditional vs cyber-gated side by side");
    add_common(cm, cmp_args, true, true);

    auto* va = app.add_subcommand("validate", "lint a case/weights/scenario configuration");
    add_common(va, val_args, false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInput;
    }

    try {
        if (pf->parsed()) return run_powerflow(pf_args);
        if (sc->parsed()) return run_score(score_args);
        if (op->parsed()) {
            if (opf_mode == "cyber" &&
                (opf_args.weights_path.empty() || opf_args.scenario_path.empty())) {
                std::cerr << "cyber mode needs --weights and --scenario\n";
                return kExitInput;
            }
            return run_opf(opf_args, opf_mode);
        }
        if (cm->parsed()) return run_compare(cmp_args);
        if (va->parsed()) return run_validate(val_args);
    } catch (const cpes::PowerFlowError& e) {
        std::cerr << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
