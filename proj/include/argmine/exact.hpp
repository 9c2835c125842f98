#pragma once

#include "argmine/ad3.hpp"
#include "argmine/factor_graph.hpp"

namespace argmine {

struct MapResult {
    Assignment assignment;
    double score = 0.0;
    int nodes = 0;  // relaxations solved (branch and bound only)
};

struct BnbConfig {
    Ad3Config ad3;
    int max_nodes = 1000;
    double tolerance = 1e-9;
    // iteration cap for non-root node relaxations; their dual bounds stay
    // valid at any iterate, so cheaper solves only loosen pruning
    int node_max_iterations = 200;
};

// Thrown when the node budget runs out; carries the best feasible incumbent.
struct BudgetError : Error {
    explicit BudgetError(MapResult best)
        : Error("branch-and-bound node budget exceeded"), incumbent(std::move(best)) {}
    MapResult incumbent;
};

// Exact MAP via best-first branch and bound on AD3 relaxations, branching on
// the variable whose marginal is nearest uniform. The returned score is
// certified: every pruned branch had a relaxation bound within tolerance of
// the incumbent.
MapResult branch_and_bound(const FactorGraph& graph, const Potentials& potentials,
                           const BnbConfig& config = {},
                           RelaxedSolution* root_relaxation = nullptr);

// Exhaustive test oracle; requires the total state space to be at most 2^20.
MapResult brute_force_map(const FactorGraph& graph, const Potentials& potentials);

}  // namespace argmine
