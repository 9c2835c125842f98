#include "argmine/exact.hpp"

#include <algorithm>
#include <memory>
#include <queue>

namespace argmine {

namespace {
constexpr double kBranchPenalty = 1e8;
}

MapResult brute_force_map(const FactorGraph& graph, const Potentials& potentials) {
    const std::size_t n = graph.n_variables();
    double space = 1.0;
    for (const Variable& v : graph.variables) space *= v.arity;
    if (space > static_cast<double>(1u << 20))
        throw Error("brute_force_map: state space too large");

    MapResult best;
    best.score = -std::numeric_limits<double>::infinity();
    Assignment y(n, 0);
    bool done = false;
    while (!done) {
        ScoreResult r = score_assignment(graph, potentials, y);
        if (r.feasible && r.score > best.score) {
            best.score = r.score;
            best.assignment = y;
        }
        // mixed-radix increment
        std::size_t k = 0;
        for (;; ++k) {
            if (k == n) {
                done = true;
                break;
            }
            if (++y[k] < graph.variables[k].arity) break;
            y[k] = 0;
        }
    }
    if (best.assignment.empty() && n > 0)
        throw InfeasibleError("brute_force_map: no feasible assignment");
    if (n == 0) best.score = 0.0;
    return best;
}

namespace {

struct Node {
    double bound;
    long id;
    std::vector<int> fixed;  // -1 = free
    std::shared_ptr<const Ad3State> warm;  // parent's multipliers
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound < b.bound;
        return a.id > b.id;  // ties: oldest first
    }
};

Potentials apply_fixed(const Potentials& potentials, const std::vector<int>& fixed) {
    Potentials out = potentials;
    for (std::size_t v = 0; v < fixed.size(); ++v) {
        if (fixed[v] < 0) continue;
        for (std::size_t s = 0; s < out.unary[v].size(); ++s)
            if (static_cast<int>(s) != fixed[v]) out.unary[v][s] -= kBranchPenalty;
    }
    return out;
}

bool honors_fixed(const Assignment& y, const std::vector<int>& fixed) {
    for (std::size_t v = 0; v < fixed.size(); ++v)
        if (fixed[v] >= 0 && y[v] != fixed[v]) return false;
    return true;
}

// Cheap unit-propagation check: can any completion of `fixed` still satisfy
// every hard factor? Sound but not complete; used to cut dead branches early.
bool fixed_violates(const FactorGraph& graph, const std::vector<int>& fixed) {
    for (const Factor& f : graph.factors) {
        if (f.kind == FactorKind::Table) continue;
        if (f.kind == FactorKind::Tree) {
            std::vector<int> parent(static_cast<std::size_t>(f.tree_nodes), -1);
            bool cycle_or_dup = false;
            for (std::size_t k = 0; k < f.vars.size() && !cycle_or_dup; ++k) {
                if (fixed[static_cast<std::size_t>(f.vars[k])] != 1) continue;
                auto [u, v] = f.arcs[k];
                if (parent[static_cast<std::size_t>(v)] != -1)
                    cycle_or_dup = true;
                else
                    parent[static_cast<std::size_t>(v)] = u;
            }
            if (cycle_or_dup) return true;
            for (int v = 0; v < f.tree_nodes && !cycle_or_dup; ++v) {
                int u = v, steps = 0;
                while (u >= 0 && u != f.tree_root) {
                    u = parent[static_cast<std::size_t>(u)];
                    if (++steps > f.tree_nodes) return true;
                }
            }
            // a node all of whose in-arc variables are fixed off is orphaned
            for (int v = 0; v < f.tree_nodes; ++v) {
                if (v == f.tree_root) continue;
                bool possible = false;
                for (std::size_t k = 0; k < f.vars.size() && !possible; ++k)
                    if (f.arcs[k].second == v &&
                        fixed[static_cast<std::size_t>(f.vars[k])] != 0)
                        possible = true;
                if (!possible) return true;
            }
            continue;
        }
        std::size_t fixed_true = 0, fixed_false = 0;
        for (std::size_t k = 0; k < f.vars.size(); ++k) {
            int s = fixed[static_cast<std::size_t>(f.vars[k])];
            if (s < 0) continue;
            bool lit = s == 1;
            if (!f.negated.empty() && f.negated[k]) lit = !lit;
            lit ? ++fixed_true : ++fixed_false;
        }
        const std::size_t m = f.vars.size();
        switch (f.kind) {
            case FactorKind::Xor:
                if (fixed_true >= 2 || fixed_false == m) return true;
                break;
            case FactorKind::AtMostOne:
                if (fixed_true >= 2) return true;
                break;
            case FactorKind::Or:
                if (fixed_false == m) return true;
                break;
            default: break;
        }
    }
    return false;
}

int most_fractional(const FactorGraph& graph, const RelaxedSolution& sol,
                    const std::vector<int>& fixed) {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < graph.n_variables(); ++v) {
        if (fixed[v] >= 0) continue;
        const double uniform = 1.0 / graph.variables[v].arity;
        double dist = 0.0;
        for (double x : sol.marginals[v]) dist += (x - uniform) * (x - uniform);
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(v);
        }
    }
    return best;
}

}  // namespace

MapResult branch_and_bound(const FactorGraph& graph, const Potentials& potentials,
                           const BnbConfig& config, RelaxedSolution* root_relaxation) {
    const std::size_t n = graph.n_variables();
    MapResult incumbent;
    bool have_incumbent = false;

    // guaranteed-feasible default: props at unary argmax, links off, root
    // links on (a spanning star); hand-built graphs may make this infeasible,
    // in which case the search itself must find the first incumbent.
    {
        Assignment y(n, 0);
        for (std::size_t v = 0; v < n; ++v) {
            const Variable& var = graph.variables[v];
            if (var.kind == Variable::Kind::Prop) {
                int best = 0;
                for (int s = 1; s < var.arity; ++s)
                    if (potentials.unary[v][static_cast<std::size_t>(s)] >
                        potentials.unary[v][static_cast<std::size_t>(best)])
                        best = s;
                y[v] = best;
            } else {
                y[v] = var.kind == Variable::Kind::RootLink ? 1 : 0;
            }
        }
        if (is_feasible(graph, y)) {
            incumbent.assignment = y;
            incumbent.score = score_assignment(graph, potentials, y).score;
            have_incumbent = true;
        }
    }

    std::priority_queue<Node, std::vector<Node>, NodeOrder> queue;
    queue.push({std::numeric_limits<double>::infinity(), 0, std::vector<int>(n, -1), nullptr});
    long next_id = 1;
    int nodes = 0;

    while (!queue.empty()) {
        Node node = queue.top();
        queue.pop();
        if (have_incumbent && node.bound <= incumbent.score + config.tolerance) break;
        if (++nodes > config.max_nodes) {
            incumbent.nodes = nodes - 1;
            throw BudgetError(incumbent);
        }

        Potentials local = apply_fixed(potentials, node.fixed);
        Ad3Config node_ad3 = config.ad3;
        if (nodes > 1)
            node_ad3.max_iterations = std::min(node_ad3.max_iterations,
                                               config.node_max_iterations);
        auto state = std::make_shared<Ad3State>();
        RelaxedSolution sol = ad3_solve(graph, local, node_ad3, node.warm.get(), state.get());
        if (nodes == 1 && root_relaxation) *root_relaxation = sol;
        double bound = std::min(node.bound, sol.dual_bound);

        if (honors_fixed(sol.rounded, node.fixed) && is_feasible(graph, sol.rounded)) {
            double score = score_assignment(graph, potentials, sol.rounded).score;
            if (!have_incumbent || score > incumbent.score) {
                incumbent.assignment = sol.rounded;
                incumbent.score = score;
                have_incumbent = true;
            }
        }
        if (sol.status == SolveStatus::Integral) continue;  // node solved exactly
        if (have_incumbent && bound <= incumbent.score + config.tolerance) continue;

        int branch_var = most_fractional(graph, sol, node.fixed);
        if (branch_var < 0) continue;  // everything fixed; relaxation was the answer
        for (int s = 0; s < graph.variables[static_cast<std::size_t>(branch_var)].arity; ++s) {
            Node child{bound, next_id++, node.fixed, state};
            child.fixed[static_cast<std::size_t>(branch_var)] = s;
            if (fixed_violates(graph, child.fixed)) continue;  // dead branch
            queue.push(std::move(child));
        }
    }

    if (!have_incumbent) throw InfeasibleError("branch_and_bound: no feasible assignment found");
    incumbent.nodes = nodes;
    return incumbent;
}

}  // namespace argmine
