#pragma once

#include <limits>
#include <vector>

#include "argmine/factor_graph.hpp"

namespace argmine {

// Alternating-directions dual decomposition for relaxed MAP over the local
// polytope. Logic factors solve their quadratic subproblem in closed form
// (projections); table and tree factors run an active-set method over the
// convex hull of their feasible configurations, driven by a MAP oracle
// (enumeration resp. maximum spanning arborescence).
struct Ad3Config {
    double eta = 0.1;
    int max_iterations = 2000;
    double residual_tolerance = 1e-6;
    double integrality_threshold = 1e-6;
    int dual_check_interval = 10;  // iterations between certified-bound updates
};

enum class SolveStatus { Integral, Fractional, MaxIter };

// Convex combination of factor configurations found by the active-set
// subsolver; `configs[k]` holds one state per factor variable.
struct FactorLocal {
    std::vector<std::vector<int>> configs;
    std::vector<double> weights;
    std::vector<std::vector<double>> marginals;  // per factor variable

    double config_probability(const std::vector<int>& states) const;
};

struct RelaxedSolution {
    std::vector<std::vector<double>> marginals;  // per variable, simplex
    std::vector<FactorLocal> factor_locals;      // aligned with graph.factors
    double objective = 0.0;    // primal value of the returned relaxed point
    double dual_bound = std::numeric_limits<double>::infinity();  // certified upper bound
    SolveStatus status = SolveStatus::Fractional;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    Assignment rounded;  // per-variable argmax (ties: lowest state)

    bool integral() const { return status == SolveStatus::Integral; }
};

// Multiplier/consensus snapshot for warm-starting related solves (branch and
// bound children); bounds remain valid from any starting point.
struct Ad3State {
    std::vector<std::vector<std::vector<double>>> lambda;  // factor x slot x state
    std::vector<std::vector<double>> marginals;
};

RelaxedSolution ad3_solve(const FactorGraph& graph, const Potentials& potentials,
                          const Ad3Config& config = {}, const Ad3State* warm = nullptr,
                          Ad3State* state_out = nullptr);

// One factor subproblem, exposed for testing:
//   maximize  sum_i a_i . q_i + s(y) - eta/2 sum_i ||q_i - p_i||^2
// over the factor's local polytope, where a = adjusted unaries and p = the
// current consensus marginals.
FactorLocal solve_factor_qp(const FactorGraph& graph, int factor_index,
                            const std::vector<std::vector<double>>& adjusted,
                            const std::vector<std::vector<double>>& consensus, double eta);

}  // namespace argmine
