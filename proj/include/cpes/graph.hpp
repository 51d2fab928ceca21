// Cyber-layer graph (isomorphic to the physical topology) and shortest-path
// centralities: betweenness, closeness, edge betweenness.
#pragma once

#include <algorithm>
#include <map>
#include <queue>
#include <stack>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cpes/grid.hpp"

namespace cpes {

/// Unweighted undirected graph with one node per bus and one edge per
/// in-service branch corridor (parallel circuits collapse to a single edge,
/// so shortest-path counts see plain adjacency).
class CyberGraph {
public:
    CyberGraph() = default;

    explicit CyberGraph(const Network& net) : n_(net.size()) {
        adj_.resize(n_);
        for (const auto& br : net.branches) {
            if (!br.in_service) continue;
            int f = net.index_of(br.from_bus);
            int t = net.index_of(br.to_bus);
            add_edge(f, t);
        }
    }

    static CyberGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
        CyberGraph g;
        g.n_ = n;
        g.adj_.resize(n);
        for (auto [u, v] : edges) g.add_edge(u, v);
        return g;
    }

    void add_edge(int u, int v) {
        if (u == v) return;
        const std::pair<int, int> key{std::min(u, v), std::max(u, v)};
        if (std::find(edges_.begin(), edges_.end(), key) != edges_.end()) return;
        edges_.push_back(key);
        adj_[u].push_back(v);
        adj_[v].push_back(u);
    }

    int node_count() const { return n_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& neighbors(int u) const { return adj_[u]; }

private:
    int n_ = 0;
    std::vector<std::vector<int>> adj_;
    std::vector<std::pair<int, int>> edges_;
};

struct GraphFactors {
    std::vector<double> bc;   // node betweenness, pair-normalized
    std::vector<double> cc;   // closeness
    std::vector<double> ebc;  // node score = max incident edge betweenness
};

namespace graph_detail {

// Single-source shortest-path counts (Brandes). Fills order, preds, sigma, dist.
inline void bfs_brandes(const CyberGraph& g, int s, std::vector<int>& order,
                        std::vector<std::vector<int>>& preds,
                        std::vector<double>& sigma, std::vector<int>& dist) {
    const int n = g.node_count();
    order.clear();
    preds.assign(n, {});
    sigma.assign(n, 0.0);
    dist.assign(n, -1);
    sigma[s] = 1.0;
    dist[s] = 0;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
        int v = q.front();
        q.pop();
        order.push_back(v);
        for (int w : g.neighbors(v)) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
            if (dist[w] == dist[v] + 1) {
                sigma[w] += sigma[v];
                preds[w].push_back(v);
            }
        }
    }
}

}  // namespace graph_detail

/// Brandes betweenness centrality, normalized by 2/((n-1)(n-2)) so values lie
/// in [0,1]. Graphs with fewer than 3 nodes score zero everywhere.
inline std::vector<double> compute_bc(const CyberGraph& g) {
    const int n = g.node_count();
    std::vector<double> bc(n, 0.0);
    if (n < 3) return bc;
    std::vector<int> order, dist;
    std::vector<std::vector<int>> preds;
    std::vector<double> sigma, delta(n);
    for (int s = 0; s < n; ++s) {
        graph_detail::bfs_brandes(g, s, order, preds, sigma, dist);
        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            int w = *it;
            for (int v : preds[w])
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            if (w != s) bc[w] += delta[w];
        }
    }
    // each unordered pair counted twice in the accumulation
    const double scale = 1.0 / (static_cast<double>(n - 1) * (n - 2));
    for (auto& v : bc) v *= scale;
    return bc;
}

/// Closeness centrality. On a disconnected graph each node is scored within
/// its own component using the count of reachable nodes.
inline std::vector<double> compute_cc(const CyberGraph& g) {
    const int n = g.node_count();
    std::vector<double> cc(n, 0.0);
    for (int s = 0; s < n; ++s) {
        std::vector<int> dist(n, -1);
        std::queue<int> q;
        dist[s] = 0;
        q.push(s);
        long total = 0;
        int reached = 0;
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            total += dist[v];
            ++reached;
            for (int w : g.neighbors(v))
                if (dist[w] < 0) { dist[w] = dist[v] + 1; q.push(w); }
        }
        if (reached > 1 && total > 0)
            cc[s] = static_cast<double>(reached - 1) / static_cast<double>(total);
    }
    return cc;
}

/// Edge betweenness per edge, normalized by 2/(n(n-1)).
inline std::map<std::pair<int, int>, double> compute_edge_bc(const CyberGraph& g) {
    const int n = g.node_count();
    std::map<std::pair<int, int>, double> ebc;
    for (const auto& e : g.edges()) ebc[e] = 0.0;
    if (n < 2) return ebc;
    std::vector<int> order, dist;
    std::vector<std::vector<int>> preds;
    std::vector<double> sigma, delta(n);
    for (int s = 0; s < n; ++s) {
        graph_detail::bfs_brandes(g, s, order, preds, sigma, dist);
        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            int w = *it;
            for (int v : preds[w]) {
                const double c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                ebc[{std::min(v, w), std::max(v, w)}] += c;
                delta[v] += c;
            }
        }
    }
    const double scale = 1.0 / (static_cast<double>(n) * (n - 1));
    for (auto& [e, v] : ebc) v *= scale;
    return ebc;
}

/// Node edge-betweenness score: the maximum over the node's incident edges.
inline std::vector<double> compute_ebc(const CyberGraph& g) {
    const int n = g.node_count();
    std::vector<double> out(n, 0.0);
    for (const auto& [e, v] : compute_edge_bc(g)) {
        out[e.first] = std::max(out[e.first], v);
        out[e.second] = std::max(out[e.second], v);
    }
    return out;
}

inline GraphFactors compute_graph_factors(const CyberGraph& g) {
    return {compute_bc(g), compute_cc(g), compute_ebc(g)};
}

}  // namespace cpes
