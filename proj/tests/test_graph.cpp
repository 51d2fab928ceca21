#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <queue>
#include <random>

#include "cpes/graph.hpp"
#include "test_util.hpp"

using namespace cpes;
using Catch::Approx;

namespace {

// Brute-force oracle: explicit all-pairs BFS with path counting, then
// sigma(s,t|v) = sigma(s,v) * sigma(v,t) when v lies on a shortest path.
// Independent of the Brandes accumulation used by the implementation.
struct Oracle {
    int n;
    std::vector<std::vector<int>> dist;
    std::vector<std::vector<double>> sigma;

    explicit Oracle(const CyberGraph& g) : n(g.node_count()) {
        dist.assign(n, std::vector<int>(n, -1));
        sigma.assign(n, std::vector<double>(n, 0.0));
        for (int s = 0; s < n; ++s) {
            dist[s][s] = 0;
            sigma[s][s] = 1.0;
            std::queue<int> q;
            q.push(s);
            while (!q.empty()) {
                int v = q.front();
                q.pop();
                for (int w : g.neighbors(v)) {
                    if (dist[s][w] < 0) {
                        dist[s][w] = dist[s][v] + 1;
                        q.push(w);
                    }
                    if (dist[s][w] == dist[s][v] + 1) sigma[s][w] += sigma[s][v];
                }
            }
        }
    }

    std::vector<double> bc() const {
        std::vector<double> out(n, 0.0);
        for (int s = 0; s < n; ++s)
            for (int t = 0; t < n; ++t) {
                if (s == t || dist[s][t] < 0) continue;
                for (int v = 0; v < n; ++v) {
                    if (v == s || v == t) continue;
                    if (dist[s][v] >= 0 && dist[v][t] >= 0 &&
                        dist[s][v] + dist[v][t] == dist[s][t])
                        out[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                }
            }
        if (n >= 3)
            for (auto& v : out) v /= static_cast<double>(n - 1) * (n - 2);
        else
            for (auto& v : out) v = 0.0;
        return out;
    }

    std::vector<double> cc() const {
        std::vector<double> out(n, 0.0);
        for (int v = 0; v < n; ++v) {
            long total = 0;
            int reach = 0;
            for (int u = 0; u < n; ++u)
                if (dist[v][u] >= 0) { total += dist[v][u]; ++reach; }
            if (reach > 1 && total > 0) out[v] = double(reach - 1) / double(total);
        }
        return out;
    }

    std::map<std::pair<int, int>, double> edge_bc(const CyberGraph& g) const {
        std::map<std::pair<int, int>, double> out;
        for (const auto& e : g.edges()) out[e] = 0.0;
        for (int s = 0; s < n; ++s)
            for (int t = 0; t < n; ++t) {
                if (s == t || dist[s][t] < 0) continue;
                for (const auto& e : g.edges()) {
                    const auto [u, w] = e;
                    double through = 0.0;
                    if (dist[s][u] >= 0 && dist[w][t] >= 0 &&
                        dist[s][u] + 1 + dist[w][t] == dist[s][t])
                        through += sigma[s][u] * sigma[w][t];
                    if (dist[s][w] >= 0 && dist[u][t] >= 0 &&
                        dist[s][w] + 1 + dist[u][t] == dist[s][t])
                        through += sigma[s][w] * sigma[u][t];
                    out[e] += through / sigma[s][t];
                }
            }
        for (auto& [e, v] : out) v /= static_cast<double>(n) * (n - 1);
        return out;
    }

    std::vector<double> ebc(const CyberGraph& g) const {
        std::vector<double> out(n, 0.0);
        for (const auto& [e, v] : edge_bc(g)) {
            out[e.first] = std::max(out[e.first], v);
            out[e.second] = std::max(out[e.second], v);
        }
        return out;
    }
};

CyberGraph random_connected(std::mt19937& rng, int n) {
    std::vector<std::pair<int, int>> edges;
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int v = 1; v < n; ++v) {
        std::uniform_int_distribution<int> parent(0, v - 1);
        edges.emplace_back(parent(rng), v);
    }
    std::uniform_int_distribution<int> extra(0, n);
    const int extras = extra(rng);
    for (int e = 0; e < extras; ++e) {
        int u = pick(rng), v = pick(rng);
        if (u != v) edges.emplace_back(u, v);
    }
    return CyberGraph::from_edges(n, edges);
}

void check_matches_oracle(const CyberGraph& g) {
    Oracle oracle(g);
    const auto bc = compute_bc(g);
    const auto cc = compute_cc(g);
    const auto eb = compute_ebc(g);
    const auto obc = oracle.bc();
    const auto occ = oracle.cc();
    const auto oeb = oracle.ebc(g);
    for (int v = 0; v < g.node_count(); ++v) {
        CHECK(bc[v] == Approx(obc[v]).margin(1e-12));
        CHECK(cc[v] == Approx(occ[v]).margin(1e-12));
        CHECK(eb[v] == Approx(oeb[v]).margin(1e-12));
    }
}

}  // namespace

TEST_CASE("path graph centralities", "[graph]") {
    auto g = CyberGraph::from_edges(3, {{0, 1}, {1, 2}});
    const auto bc = compute_bc(g);
    CHECK(bc[1] == Approx(1.0));
    CHECK(bc[0] == 0.0);
    CHECK(bc[2] == 0.0);
    const auto cc = compute_cc(g);
    CHECK(cc[1] == Approx(1.0));
    CHECK(cc[0] == Approx(2.0 / 3.0));
    const auto eb = compute_edge_bc(g);
    CHECK(eb.at({0, 1}) == Approx(2.0 / 3.0));
    CHECK(eb.at({1, 2}) == Approx(2.0 / 3.0));
    const auto node_eb = compute_ebc(g);
    CHECK(node_eb[1] == Approx(2.0 / 3.0));
}

TEST_CASE("star and complete graphs", "[graph]") {
    auto star = CyberGraph::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    const auto bc = compute_bc(star);
    CHECK(bc[0] == Approx(1.0));
    for (int leaf = 1; leaf < 5; ++leaf) CHECK(bc[leaf] == 0.0);

    auto k4 = CyberGraph::from_edges(
        4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    for (double v : compute_cc(k4)) CHECK(v == Approx(1.0));
}

TEST_CASE("bridge edge dominates a barbell", "[graph]") {
    // two triangles joined by a bridge 2-3
    auto g = CyberGraph::from_edges(
        6, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {3, 5}, {4, 5}});
    const auto eb = compute_edge_bc(g);
    double mx = 0.0;
    for (const auto& [e, v] : eb) mx = std::max(mx, v);
    CHECK(eb.at({2, 3}) == Approx(mx));
    const auto node_eb = compute_ebc(g);
    CHECK(node_eb[2] == Approx(mx));
    CHECK(node_eb[3] == Approx(mx));
}

TEST_CASE("tiny graphs degenerate to zero", "[graph]") {
    auto g2 = CyberGraph::from_edges(2, {{0, 1}});
    for (double v : compute_bc(g2)) CHECK(v == 0.0);
    auto g1 = CyberGraph::from_edges(1, {});
    CHECK(compute_ebc(g1).size() == 1);
}

TEST_CASE("disconnected closeness works per component", "[graph]") {
    auto g = CyberGraph::from_edges(5, {{0, 1}, {1, 2}, {3, 4}});
    const auto cc = compute_cc(g);
    CHECK(cc[1] == Approx(1.0));      // center of the 3-path component
    CHECK(cc[3] == Approx(1.0));      // 2-node component, distance 1
    CHECK(cc[0] == Approx(2.0 / 3.0));
}

TEST_CASE("rts-24 topology matches the brute-force oracle", "[graph]") {
    Network net = testutil::rts24();
    CyberGraph g(net);
    CHECK(g.node_count() == 24);
    CHECK(g.edges().size() == 34);  // parallel circuits collapse
    check_matches_oracle(g);
}

TEST_CASE("random connected graphs match the oracle", "[graph][property]") {
    std::mt19937 rng(20240809);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> size(4, 15);
        check_matches_oracle(random_connected(rng, size(rng)));
    }
}

TEST_CASE("relabeling equivariance on the 4-cycle", "[graph][property]") {
    auto c4 = CyberGraph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    const auto bc = compute_bc(c4);
    const auto cc = compute_cc(c4);
    const auto eb = compute_ebc(c4);
    for (int v = 1; v < 4; ++v) {
        CHECK(bc[v] == Approx(bc[0]).margin(1e-14));
        CHECK(cc[v] == Approx(cc[0]).margin(1e-14));
        CHECK(eb[v] == Approx(eb[0]).margin(1e-14));
    }
}

TEST_CASE("edge betweenness mass equals total pair distance on trees",
          "[graph][property]") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 4 + trial;
        std::vector<std::pair<int, int>> edges;
        for (int v = 1; v < n; ++v) {
            std::uniform_int_distribution<int> parent(0, v - 1);
            edges.emplace_back(parent(rng), v);
        }
        auto g = CyberGraph::from_edges(n, edges);
        Oracle oracle(g);
        // un-normalize: each unordered pair contributes its path length once
        double mass = 0.0;
        for (const auto& [e, v] : compute_edge_bc(g))
            mass += v * static_cast<double>(n) * (n - 1);
        double dist_sum = 0.0;
        for (int s = 0; s < n; ++s)
            for (int t = 0; t < n; ++t)
                if (s != t) dist_sum += oracle.dist[s][t];
        CHECK(mass == Approx(dist_sum).margin(1e-9));
    }
}
