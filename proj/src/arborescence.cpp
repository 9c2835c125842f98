#include "argmine/arborescence.hpp"

#include <algorithm>
#include <cmath>

namespace argmine {

namespace {

struct Arc {
    int u, v;
    double w;
    std::size_t back;  // index into the caller's arc list
};

// Returns indices (into `arcs`) of the n-1 arcs of a maximum arborescence.
// Nodes are 0..n-1. Arcs are expected in deterministic order; score ties keep
// the earliest arc, which at the top level means lexicographic (u, v).
std::vector<std::size_t> solve(int n, int root, const std::vector<Arc>& arcs) {
    if (n <= 1) return {};
    std::vector<int> best(static_cast<std::size_t>(n), -1);
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        const Arc& a = arcs[i];
        if (a.v == root || a.u == a.v) continue;
        if (best[static_cast<std::size_t>(a.v)] < 0 ||
            a.w > arcs[static_cast<std::size_t>(best[static_cast<std::size_t>(a.v)])].w)
            best[static_cast<std::size_t>(a.v)] = static_cast<int>(i);
    }
    for (int v = 0; v < n; ++v)
        if (v != root && best[static_cast<std::size_t>(v)] < 0)
            throw InfeasibleError("node " + std::to_string(v) + " unreachable from root");

    // look for a cycle among the chosen in-arcs
    std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 new, 1 active, 2 done
    std::vector<int> cycle;
    state[static_cast<std::size_t>(root)] = 2;
    for (int s = 0; s < n && cycle.empty(); ++s) {
        int v = s;
        std::vector<int> path;
        while (state[static_cast<std::size_t>(v)] == 0) {
            state[static_cast<std::size_t>(v)] = 1;
            path.push_back(v);
            v = arcs[static_cast<std::size_t>(best[static_cast<std::size_t>(v)])].u;
        }
        if (state[static_cast<std::size_t>(v)] == 1) {
            auto it = std::find(path.begin(), path.end(), v);
            cycle.assign(it, path.end());
        }
        for (int u : path) state[static_cast<std::size_t>(u)] = 2;
    }

    if (cycle.empty()) {
        std::vector<std::size_t> out;
        for (int v = 0; v < n; ++v)
            if (v != root) out.push_back(static_cast<std::size_t>(best[static_cast<std::size_t>(v)]));
        return out;
    }

    // contract the cycle into one supernode
    std::vector<bool> in_cycle(static_cast<std::size_t>(n), false);
    for (int v : cycle) in_cycle[static_cast<std::size_t>(v)] = true;
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (int v = 0; v < n; ++v)
        if (!in_cycle[static_cast<std::size_t>(v)]) comp[static_cast<std::size_t>(v)] = next++;
    const int super = next++;
    for (int v : cycle) comp[static_cast<std::size_t>(v)] = super;

    std::vector<Arc> contracted;
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        const Arc& a = arcs[i];
        int cu = comp[static_cast<std::size_t>(a.u)], cv = comp[static_cast<std::size_t>(a.v)];
        if (cu == cv) continue;
        double w = a.w;
        if (cv == super)
            w -= arcs[static_cast<std::size_t>(best[static_cast<std::size_t>(a.v)])].w;
        contracted.push_back({cu, cv, w, i});
    }

    std::vector<std::size_t> sub = solve(next, comp[static_cast<std::size_t>(root)], contracted);

    std::vector<std::size_t> out;
    int entered = -1;  // cycle member reached by the arc entering the supernode
    for (std::size_t k : sub) {
        const Arc& ca = contracted[k];
        out.push_back(ca.back);
        if (ca.v == super) entered = arcs[ca.back].v;
    }
    for (int v : cycle)
        if (v != entered) out.push_back(static_cast<std::size_t>(best[static_cast<std::size_t>(v)]));
    return out;
}

}  // namespace

std::vector<std::pair<int, int>> max_arborescence(int n_nodes, int root,
                                                  const std::vector<double>& scores) {
    if (root < 0 || root >= n_nodes) throw Error("max_arborescence: root out of range");
    if (scores.size() != static_cast<std::size_t>(n_nodes) * static_cast<std::size_t>(n_nodes))
        throw Error("max_arborescence: score matrix has wrong size");
    std::vector<Arc> arcs;
    for (int u = 0; u < n_nodes; ++u)
        for (int v = 0; v < n_nodes; ++v) {
            double w = scores[static_cast<std::size_t>(u) * static_cast<std::size_t>(n_nodes) +
                              static_cast<std::size_t>(v)];
            if (u == v || v == root || w == kNoArc) continue;
            if (std::isnan(w)) throw Error("max_arborescence: NaN score");
            arcs.push_back({u, v, w, arcs.size()});
        }
    std::vector<std::size_t> chosen = solve(n_nodes, root, arcs);
    std::vector<std::pair<int, int>> out;
    for (std::size_t i : chosen) out.emplace_back(arcs[i].u, arcs[i].v);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace argmine
