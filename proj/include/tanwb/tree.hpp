#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "tanwb/common.hpp"

namespace tanwb {

// Undirected edge, stored with first < second.
struct Edge {
    std::size_t first = 0;
    std::size_t second = 0;

    static Edge make(std::size_t a, std::size_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Feature tree of a TAN model. The class variable is an implicit parent of
// every feature and is not represented here.
struct TanStructure {
    std::size_t root = 0;
    std::vector<std::optional<std::size_t>> parent; // parent[root] is empty

    std::size_t feature_count() const { return parent.size(); }

    std::vector<Edge> undirected_edges() const
    {
        std::vector<Edge> out;
        for (std::size_t f = 0; f < parent.size(); ++f)
            if (parent[f]) out.push_back(Edge::make(f, *parent[f]));
        std::sort(out.begin(), out.end());
        return out;
    }

    // Features ordered so that every parent precedes its children.
    std::vector<std::size_t> topological_order() const
    {
        std::vector<std::vector<std::size_t>> children(parent.size());
        for (std::size_t f = 0; f < parent.size(); ++f)
            if (parent[f]) children[*parent[f]].push_back(f);
        std::vector<std::size_t> order;
        std::deque<std::size_t> queue{root};
        while (!queue.empty()) {
            std::size_t f = queue.front();
            queue.pop_front();
            order.push_back(f);
            for (std::size_t ch : children[f]) queue.push_back(ch);
        }
        return order;
    }

    // Checks the tree invariants; throws on violation.
    void validate() const
    {
        const std::size_t nf = parent.size();
        if (nf == 0) throw Error("TAN structure has no features");
        if (root >= nf) throw Error("TAN structure root out of range");
        if (parent[root]) throw Error("TAN structure root has a feature parent");
        std::size_t edges = 0;
        for (std::size_t f = 0; f < nf; ++f) {
            if (f == root) continue;
            if (!parent[f]) throw Error("TAN structure feature " + std::to_string(f) + " has no parent");
            if (*parent[f] >= nf || *parent[f] == f)
                throw Error("TAN structure feature " + std::to_string(f) + " has an invalid parent");
            ++edges;
        }
        if (edges != nf - 1 || topological_order().size() != nf)
            throw Error("TAN structure parents do not form a tree rooted at the root feature");
    }

    bool operator==(const TanStructure&) const = default;
};

// Maximum-weight spanning tree of the complete graph over `weights.size()`
// nodes. Prim growth from node 0; among crossing edges of equal weight the
// one with the smaller (min, max) index pair wins. Returned edges are sorted.
inline std::vector<Edge> max_weight_spanning_tree(const std::vector<std::vector<double>>& weights)
{
    const std::size_t n = weights.size();
    if (n == 0) throw Error("max_weight_spanning_tree: no nodes");
    for (const auto& row : weights) {
        if (row.size() != n) throw Error("max_weight_spanning_tree: weight matrix is not square");
        for (double w : row)
            if (!std::isfinite(w)) throw Error("max_weight_spanning_tree: non-finite weight");
    }

    std::vector<bool> in_tree(n, false);
    in_tree[0] = true;
    std::vector<Edge> out;
    for (std::size_t added = 1; added < n; ++added) {
        std::optional<Edge> best;
        double best_w = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            if (!in_tree[a]) continue;
            for (std::size_t b = 0; b < n; ++b) {
                if (in_tree[b]) continue;
                const Edge e = Edge::make(a, b);
                const double w = weights[e.first][e.second];
                if (!best || w > best_w || (w == best_w && e < *best)) {
                    best = e;
                    best_w = w;
                }
            }
        }
        in_tree[in_tree[best->first] ? best->second : best->first] = true;
        out.push_back(*best);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline double tree_weight(const std::vector<Edge>& edges, const std::vector<std::vector<double>>& weights)
{
    double sum = 0.0;
    for (const Edge& e : edges) sum += weights[e.first][e.second];
    return sum;
}

// Directs a spanning tree away from `root` by breadth-first search
// (neighbours visited in ascending index order).
inline TanStructure orient_tree(const std::vector<Edge>& edges, std::size_t root, std::size_t feature_count)
{
    if (root >= feature_count) throw Error("orient_tree: root out of range");
    if (edges.size() + 1 != feature_count)
        throw Error("orient_tree: " + std::to_string(edges.size()) + " edges cannot span " +
                    std::to_string(feature_count) + " features");
    std::vector<std::vector<std::size_t>> adj(feature_count);
    for (const Edge& e : edges) {
        if (e.first >= feature_count || e.second >= feature_count || e.first == e.second)
            throw Error("orient_tree: invalid edge");
        adj[e.first].push_back(e.second);
        adj[e.second].push_back(e.first);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());

    TanStructure s;
    s.root = root;
    s.parent.assign(feature_count, std::nullopt);
    std::vector<bool> seen(feature_count, false);
    std::deque<std::size_t> queue{root};
    seen[root] = true;
    std::size_t visited = 0;
    while (!queue.empty()) {
        std::size_t f = queue.front();
        queue.pop_front();
        ++visited;
        for (std::size_t nb : adj[f]) {
            if (seen[nb]) continue;
            seen[nb] = true;
            s.parent[nb] = f;
            queue.push_back(nb);
        }
    }
    // n-1 edges that reach every node form a tree; otherwise there is a cycle
    // and a disconnected part.
    if (visited != feature_count) throw Error("orient_tree: edges do not form a tree (cycle or disconnected)");
    return s;
}

} // namespace tanwb
