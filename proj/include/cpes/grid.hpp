// Network data model, MATPOWER-style case parsing, admittance assembly.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <json.hpp>

namespace cpes {

using Complex = std::complex<double>;
using json = nlohmann::json;

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line, int col)
        : std::runtime_error("parse error at line " + std::to_string(line) +
                             ", column " + std::to_string(col) + ": " + msg),
          line(line), column(col) {}
    int line;
    int column;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BusKind { Slack, PV, PQ };

/// All quantities per-unit on the system MVA base unless a field says otherwise.
struct Bus {
    int id = 0;              // external (case file) bus number
    BusKind kind = BusKind::PQ;
    double v_min = 0.95;
    double v_max = 1.05;
    double base_kv = 0.0;
    Complex shunt_admittance{0.0, 0.0};  // Y^s, pu
};

struct Branch {
    int from_bus = 0;        // external numbers
    int to_bus = 0;
    Complex series_admittance{0.0, 0.0};  // Y, pu
    Complex charging_admittance{0.0, 0.0};  // total Y^c (jb), pu
    double tap = 1.0;        // off-nominal turns ratio at the from end; 1 = none
    double s_max = 0.0;      // MVA; 0 = unlimited
    double s_max_b = 0.0;    // short/long-term emergency ratings, MVA
    double s_max_c = 0.0;
    double angle_diff_min = 0.0;  // radians; min==max==0 means unconstrained
    double angle_diff_max = 0.0;
    bool in_service = true;

    bool is_transformer() const { return tap != 1.0; }
};

struct Generator {
    int bus = 0;             // external bus number
    double p_min = 0.0, p_max = 0.0;  // MW
    double q_min = 0.0, q_max = 0.0;  // MVAr
    double cost_c2 = 0.0;    // $/MW^2 h
    double cost_c1 = 0.0;    // $/MWh
    double cost_c0 = 0.0;    // $/h
    double p_start = 0.0;    // case-file dispatch, MW
    double v_setpoint = 1.0; // pu
    bool in_service = true;

    double cost_at(double p_mw) const {
        return cost_c2 * p_mw * p_mw + cost_c1 * p_mw + cost_c0;
    }
};

struct Load {
    int bus = 0;
    Complex demand{0.0, 0.0};  // MVA
};

class Network {
public:
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;
    double base_mva = 100.0;

    int size() const { return static_cast<int>(buses.size()); }

    /// Dense 0-based index of an external bus number.
    int index_of(int external_id) const {
        auto it = index_.find(external_id);
        if (it == index_.end())
            throw ValidationError("unknown bus " + std::to_string(external_id));
        return it->second;
    }
    int external_id(int index) const { return buses.at(index).id; }

    int slack_index() const {
        for (int i = 0; i < size(); ++i)
            if (buses[i].kind == BusKind::Slack) return i;
        throw ValidationError("network has no slack bus");
    }

    std::vector<int> generator_bus_indices() const {
        std::vector<int> out;
        for (const auto& g : generators) {
            if (!g.in_service) continue;
            int b = index_of(g.bus);
            if (std::find(out.begin(), out.end(), b) == out.end()) out.push_back(b);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    double total_load_mw() const {
        double t = 0.0;
        for (const auto& l : loads) t += l.demand.real();
        return t;
    }

    /// Rebuild the external-id index and check referential integrity.
    void finalize() {
        index_.clear();
        for (int i = 0; i < size(); ++i) {
            if (!index_.emplace(buses[i].id, i).second)
                throw ValidationError("duplicate bus id " + std::to_string(buses[i].id));
        }
        int n_slack = 0;
        for (const auto& b : buses) {
            if (b.v_min <= 0.0 || b.v_min > b.v_max)
                throw ValidationError("bus " + std::to_string(b.id) + ": bad voltage bounds");
            if (b.kind == BusKind::Slack) ++n_slack;
        }
        if (!buses.empty() && n_slack != 1)
            throw ValidationError("expected exactly one slack bus, found " +
                                  std::to_string(n_slack));
        for (const auto& br : branches) {
            require_bus(br.from_bus, "branch");
            require_bus(br.to_bus, "branch");
            if (br.from_bus == br.to_bus)
                throw ValidationError("branch connects bus " + std::to_string(br.from_bus) +
                                      " to itself");
            if (br.in_service && br.series_admittance == Complex(0.0, 0.0))
                throw ValidationError("in-service branch " + std::to_string(br.from_bus) +
                                      "-" + std::to_string(br.to_bus) +
                                      " has zero series admittance");
        }
        for (const auto& g : generators) {
            require_bus(g.bus, "generator");
            if (g.p_min > g.p_max || g.q_min > g.q_max)
                throw ValidationError("generator at bus " + std::to_string(g.bus) +
                                      ": inverted limits");
            if (g.cost_c2 < 0.0)
                throw ValidationError("generator at bus " + std::to_string(g.bus) +
                                      ": negative quadratic cost");
        }
        for (const auto& l : loads) require_bus(l.bus, "load");
    }

private:
    void require_bus(int id, const char* what) const {
        if (index_.find(id) == index_.end())
            throw ValidationError(std::string(what) + " references unknown bus " +
                                  std::to_string(id));
    }
    std::map<int, int> index_;
};

using AdmittanceMatrix = Eigen::SparseMatrix<Complex>;

/// Bus admittance matrix over dense bus indices. Off-diagonal (k,m) is -y_km/tap;
/// diagonals collect series, charging and bus shunt terms.
inline AdmittanceMatrix build_ybus(const Network& net) {
    const int n = net.size();
    std::vector<Eigen::Triplet<Complex>> trips;
    trips.reserve(net.branches.size() * 4 + n);
    for (const auto& br : net.branches) {
        if (!br.in_service) continue;
        const int f = net.index_of(br.from_bus);
        const int t = net.index_of(br.to_bus);
        const Complex y = br.series_admittance;
        const Complex yc = br.charging_admittance / 2.0;
        const double tap = br.tap;
        trips.emplace_back(f, f, (y + yc) / (tap * tap));
        trips.emplace_back(t, t, y + yc);
        trips.emplace_back(f, t, -y / tap);
        trips.emplace_back(t, f, -y / tap);
    }
    for (int i = 0; i < n; ++i)
        trips.emplace_back(i, i, net.buses[i].shunt_admittance);
    AdmittanceMatrix Y(n, n);
    Y.setFromTriplets(trips.begin(), trips.end());
    return Y;
}

namespace detail {

struct Matrix {
    std::vector<std::vector<double>> rows;
};

inline std::pair<int, int> line_col(const std::string& text, size_t pos) {
    int line = 1, col = 1;
    for (size_t i = 0; i < pos && i < text.size(); ++i) {
        if (text[i] == '\n') { ++line; col = 1; } else ++col;
    }
    return {line, col};
}

// Extracts the numeric body of `mpc.<name> = [ ... ];`, tracking line/column
// for error reporting. Everything outside the bracketed tables is ignored.
inline std::optional<Matrix> extract_table(const std::string& text,
                                           const std::string& name) {
    const std::string key = "mpc." + name;
    size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        size_t p = pos + key.size();
        while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
        if (p >= text.size() || text[p] != '=') { pos += key.size(); continue; }
        ++p;
        while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
        if (p >= text.size() || text[p] != '[') { pos += key.size(); continue; }
        ++p;
        size_t end = text.find(']', p);
        if (end == std::string::npos) {
            auto [ln, col] = line_col(text, p);
            throw ParseError("unterminated matrix for " + key, ln, col);
        }
        Matrix m;
        std::vector<double> row;
        size_t i = p;
        while (i < end) {
            char c = text[i];
            if (c == '%') {  // comment to end of line
                while (i < end && text[i] != '\n') ++i;
            } else if (c == ';' || c == '\n') {
                if (!row.empty()) { m.rows.push_back(row); row.clear(); }
                ++i;
            } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
                ++i;
            } else {
                size_t j = i;
                while (j < end && !std::isspace(static_cast<unsigned char>(text[j])) &&
                       text[j] != ';' && text[j] != ',' && text[j] != '%')
                    ++j;
                std::string tok = text.substr(i, j - i);
                try {
                    size_t used = 0;
                    double v = std::stod(tok, &used);
                    if (used != tok.size()) throw std::invalid_argument(tok);
                    row.push_back(v);
                } catch (const std::exception&) {
                    auto [ln, col] = line_col(text, i);
                    throw ParseError("malformed number '" + tok + "' in " + key, ln, col);
                }
                i = j;
            }
        }
        if (!row.empty()) m.rows.push_back(row);
        return m;
    }
    return std::nullopt;
}

inline double field(const std::vector<double>& row, size_t idx, double fallback) {
    return idx < row.size() ? row[idx] : fallback;
}

}  // namespace detail

/// Parse a MATPOWER-style case. Only the numeric tables (mpc.bus, mpc.gen,
/// mpc.branch, mpc.gencost) and mpc.baseMVA are read; surrounding code is ignored.
/// MW/MVAr columns are converted to per-unit on base_mva where the model is pu.
inline Network parse_case(const std::string& text) {
    Network net;

    const std::string base_key = "mpc.baseMVA";
    if (auto pos = text.find(base_key); pos != std::string::npos) {
        size_t p = text.find('=', pos);
        if (p != std::string::npos) net.base_mva = std::stod(text.substr(p + 1));
    }

    auto bus_tab = detail::extract_table(text, "bus");
    if (!bus_tab) {
        auto [ln, col] = detail::line_col(text, 0);
        throw ParseError("missing mpc.bus table", ln, col);
    }
    for (const auto& r : bus_tab->rows) {
        if (r.size() < 13) {
            throw ValidationError("bus row has " + std::to_string(r.size()) +
                                  " fields, expected 13");
        }
        Bus b;
        b.id = static_cast<int>(r[0]);
        switch (static_cast<int>(r[1])) {
            case 3: b.kind = BusKind::Slack; break;
            case 2: b.kind = BusKind::PV; break;
            default: b.kind = BusKind::PQ; break;
        }
        b.shunt_admittance = Complex(r[4], r[5]) / net.base_mva;
        b.base_kv = r[9];
        b.v_max = r[11];
        b.v_min = r[12];
        net.buses.push_back(b);
        if (r[2] != 0.0 || r[3] != 0.0)
            net.loads.push_back({b.id, Complex(r[2], r[3])});
    }

    if (auto gen_tab = detail::extract_table(text, "gen")) {
        for (const auto& r : gen_tab->rows) {
            Generator g;
            g.bus = static_cast<int>(r[0]);
            g.p_start = detail::field(r, 1, 0.0);
            g.q_max = detail::field(r, 3, 0.0);
            g.q_min = detail::field(r, 4, 0.0);
            g.v_setpoint = detail::field(r, 5, 1.0);
            g.in_service = detail::field(r, 7, 1.0) > 0.0;
            g.p_max = detail::field(r, 8, 0.0);
            g.p_min = detail::field(r, 9, 0.0);
            net.generators.push_back(g);
        }
    }

    if (auto br_tab = detail::extract_table(text, "branch")) {
        for (const auto& r : br_tab->rows) {
            if (r.size() < 11)
                throw ValidationError("branch row has too few fields");
            Branch br;
            br.from_bus = static_cast<int>(r[0]);
            br.to_bus = static_cast<int>(r[1]);
            const double rr = r[2], xx = r[3];
            br.series_admittance = 1.0 / Complex(rr, xx);
            br.charging_admittance = Complex(0.0, r[4]);
            br.s_max = r[5];
            br.s_max_b = detail::field(r, 6, r[5]);
            br.s_max_c = detail::field(r, 7, r[5]);
            const double ratio = detail::field(r, 8, 0.0);
            br.tap = ratio == 0.0 ? 1.0 : ratio;
            br.in_service = detail::field(r, 10, 1.0) > 0.0;
            const double amin = detail::field(r, 11, -360.0);
            const double amax = detail::field(r, 12, 360.0);
            if (amin > -360.0 || amax < 360.0) {
                br.angle_diff_min = amin * M_PI / 180.0;
                br.angle_diff_max = amax * M_PI / 180.0;
            }
            net.branches.push_back(br);
        }
    }

    if (auto cost_tab = detail::extract_table(text, "gencost")) {
        const auto& rows = cost_tab->rows;
        for (size_t i = 0; i < rows.size() && i < net.generators.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() < 4) continue;
            if (static_cast<int>(r[0]) != 2)
                throw ValidationError("only polynomial (model 2) gencost rows are supported");
            const int ncoef = static_cast<int>(r[3]);
            auto& g = net.generators[i];
            // coefficients highest order first
            if (ncoef >= 3) {
                g.cost_c2 = detail::field(r, 4, 0.0);
                g.cost_c1 = detail::field(r, 5, 0.0);
                g.cost_c0 = detail::field(r, 6, 0.0);
            } else if (ncoef == 2) {
                g.cost_c1 = detail::field(r, 4, 0.0);
                g.cost_c0 = detail::field(r, 5, 0.0);
            } else if (ncoef == 1) {
                g.cost_c0 = detail::field(r, 4, 0.0);
            }
        }
    }

    net.finalize();
    return net;
}

// --- canonical JSON serialization (stable key order via ordered_json) ---

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const Network& net) {
    ordered_json j;
    j["base_mva"] = net.base_mva;
    auto& jb = j["buses"] = ordered_json::array();
    for (const auto& b : net.buses) {
        ordered_json o;
        o["id"] = b.id;
        o["kind"] = b.kind == BusKind::Slack ? "slack" : (b.kind == BusKind::PV ? "pv" : "pq");
        o["v_min"] = b.v_min;
        o["v_max"] = b.v_max;
        o["base_kv"] = b.base_kv;
        o["shunt_g"] = b.shunt_admittance.real();
        o["shunt_b"] = b.shunt_admittance.imag();
        jb.push_back(o);
    }
    auto& jr = j["branches"] = ordered_json::array();
    for (const auto& br : net.branches) {
        ordered_json o;
        o["from"] = br.from_bus;
        o["to"] = br.to_bus;
        o["y_g"] = br.series_admittance.real();
        o["y_b"] = br.series_admittance.imag();
        o["charging_b"] = br.charging_admittance.imag();
        o["tap"] = br.tap;
        o["s_max"] = br.s_max;
        o["s_max_b"] = br.s_max_b;
        o["s_max_c"] = br.s_max_c;
        o["angle_min"] = br.angle_diff_min;
        o["angle_max"] = br.angle_diff_max;
        o["in_service"] = br.in_service;
        jr.push_back(o);
    }
    auto& jg = j["generators"] = ordered_json::array();
    for (const auto& g : net.generators) {
        ordered_json o;
        o["bus"] = g.bus;
        o["p_min"] = g.p_min;
        o["p_max"] = g.p_max;
        o["q_min"] = g.q_min;
        o["q_max"] = g.q_max;
        o["cost_c2"] = g.cost_c2;
        o["cost_c1"] = g.cost_c1;
        o["cost_c0"] = g.cost_c0;
        o["p_start"] = g.p_start;
        o["v_setpoint"] = g.v_setpoint;
        o["in_service"] = g.in_service;
        jg.push_back(o);
    }
    auto& jl = j["loads"] = ordered_json::array();
    for (const auto& l : net.loads) {
        ordered_json o;
        o["bus"] = l.bus;
        o["p_mw"] = l.demand.real();
        o["q_mvar"] = l.demand.imag();
        jl.push_back(o);
    }
    return j;
}

inline Network network_from_json(const json& j) {
    Network net;
    net.base_mva = j.at("base_mva").get<double>();
    for (const auto& o : j.at("buses")) {
        Bus b;
        b.id = o.at("id").get<int>();
        const std::string k = o.at("kind").get<std::string>();
        b.kind = k == "slack" ? BusKind::Slack : (k == "pv" ? BusKind::PV : BusKind::PQ);
        b.v_min = o.at("v_min").get<double>();
        b.v_max = o.at("v_max").get<double>();
        b.base_kv = o.at("base_kv").get<double>();
        b.shunt_admittance = Complex(o.at("shunt_g").get<double>(), o.at("shunt_b").get<double>());
        net.buses.push_back(b);
    }
    for (const auto& o : j.at("branches")) {
        Branch br;
        br.from_bus = o.at("from").get<int>();
        br.to_bus = o.at("to").get<int>();
        br.series_admittance = Complex(o.at("y_g").get<double>(), o.at("y_b").get<double>());
        br.charging_admittance = Complex(0.0, o.at("charging_b").get<double>());
        br.tap = o.at("tap").get<double>();
        br.s_max = o.at("s_max").get<double>();
        br.s_max_b = o.at("s_max_b").get<double>();
        br.s_max_c = o.at("s_max_c").get<double>();
        br.angle_diff_min = o.at("angle_min").get<double>();
        br.angle_diff_max = o.at("angle_max").get<double>();
        br.in_service = o.at("in_service").get<bool>();
        net.branches.push_back(br);
    }
    for (const auto& o : j.at("generators")) {
        Generator g;
        g.bus = o.at("bus").get<int>();
        g.p_min = o.at("p_min").get<double>();
        g.p_max = o.at("p_max").get<double>();
        g.q_min = o.at("q_min").get<double>();
        g.q_max = o.at("q_max").get<double>();
        g.cost_c2 = o.at("cost_c2").get<double>();
        g.cost_c1 = o.at("cost_c1").get<double>();
        g.cost_c0 = o.at("cost_c0").get<double>();
        g.p_start = o.at("p_start").get<double>();
        g.v_setpoint = o.at("v_setpoint").get<double>();
        g.in_service = o.at("in_service").get<bool>();
        net.generators.push_back(g);
    }
    for (const auto& o : j.at("loads"))
        net.loads.push_back({o.at("bus").get<int>(),
                             Complex(o.at("p_mw").get<double>(), o.at("q_mvar").get<double>())});
    net.finalize();
    return net;
}

/// Connectivity of the in-service network, optionally with one branch removed.
inline bool is_connected(const Network& net, int skip_branch = -1) {
    const int n = net.size();
    if (n == 0) return true;
    std::vector<std::vector<int>> adj(n);
    for (int k = 0; k < static_cast<int>(net.branches.size()); ++k) {
        if (k == skip_branch || !net.branches[k].in_service) continue;
        int f = net.index_of(net.branches[k].from_bus);
        int t = net.index_of(net.branches[k].to_bus);
        adj[f].push_back(t);
        adj[t].push_back(f);
    }
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int w : adj[u])
            if (!seen[w]) { seen[w] = 1; ++count; stack.push_back(w); }
    }
    return count == n;
}

}  // namespace cpes
