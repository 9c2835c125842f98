#include "argmine/ad3.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "argmine/arborescence.hpp"

namespace argmine {

namespace {

constexpr double kTiny = 1e-12;

int argmax_state(const std::vector<double>& v) {
    int best = 0;
    for (int s = 1; s < static_cast<int>(v.size()); ++s)
        if (v[static_cast<std::size_t>(s)] > v[static_cast<std::size_t>(best)]) best = s;
    return best;
}

// Euclidean projection of m onto the probability simplex.
std::vector<double> project_simplex(std::vector<double> m) {
    std::vector<double> sorted = m;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cumsum = 0.0, theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        cumsum += sorted[j];
        double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - t > 0) {
            rho = j + 1;
            theta = t;
        }
    }
    (void)rho;
    for (double& x : m) x = std::max(0.0, x - theta);
    return m;
}

struct FactorWork {
    // per-slot adjusted potentials and local marginals
    std::vector<std::vector<double>> lambda;  // multipliers
    std::vector<std::vector<double>> q;       // local marginals
    // table/tree factors: active set of configurations
    std::vector<std::vector<int>> configs;
    std::vector<double> mu;
};

struct Oracle {
    const FactorGraph& graph;
    const Factor& f;
    std::vector<int> arities;

    // argmax over feasible configurations of s(y) + sum_i gamma_i(y_i)
    std::pair<std::vector<int>, double> best(const std::vector<std::vector<double>>& gamma) const {
        if (f.kind == FactorKind::Table) {
            std::size_t n_cfg = f.table.size();
            std::vector<int> states(f.vars.size(), 0);
            std::vector<int> best_states;
            double best_val = -std::numeric_limits<double>::infinity();
            for (std::size_t cfg = 0; cfg < n_cfg; ++cfg) {
                std::size_t rest = cfg;
                for (std::size_t k = f.vars.size(); k-- > 0;) {
                    states[k] = static_cast<int>(rest % static_cast<std::size_t>(arities[k]));
                    rest /= static_cast<std::size_t>(arities[k]);
                }
                double val = f.table[cfg];
                for (std::size_t k = 0; k < f.vars.size(); ++k)
                    val += gamma[k][static_cast<std::size_t>(states[k])];
                if (val > best_val) {
                    best_val = val;
                    best_states = states;
                }
            }
            return {best_states, best_val};
        }
        // tree factor: arborescence over the arc weights gamma_on - gamma_off
        const int nn = f.tree_nodes;
        std::vector<double> scores(static_cast<std::size_t>(nn) * static_cast<std::size_t>(nn),
                                   kNoArc);
        double base = 0.0;
        for (std::size_t k = 0; k < f.vars.size(); ++k) {
            base += gamma[k][0];
            scores[static_cast<std::size_t>(f.arcs[k].first) * static_cast<std::size_t>(nn) +
                   static_cast<std::size_t>(f.arcs[k].second)] = gamma[k][1] - gamma[k][0];
        }
        auto chosen = max_arborescence(nn, f.tree_root, scores);
        std::vector<int> states(f.vars.size(), 0);
        double val = base;
        for (std::size_t k = 0; k < f.vars.size(); ++k) {
            bool on = std::binary_search(chosen.begin(), chosen.end(), f.arcs[k]);
            if (on) {
                states[k] = 1;
                val += gamma[k][1] - gamma[k][0];
            }
        }
        return {states, val};
    }

    double table_score(const std::vector<int>& states) const {
        if (f.kind != FactorKind::Table) return 0.0;
        std::size_t idx = 0;
        for (std::size_t k = 0; k < states.size(); ++k)
            idx = idx * static_cast<std::size_t>(arities[k]) +
                  static_cast<std::size_t>(states[k]);
        return f.table[idx];
    }
};

// Solves the linear system A x = rhs in place by Gaussian elimination with
// partial pivoting; returns false on a (near-)singular pivot.
bool solve_linear(std::vector<std::vector<double>>& A, std::vector<double>& rhs) {
    const std::size_t n = A.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (std::abs(A[piv][col]) < 1e-11) return false;
        std::swap(A[piv], A[col]);
        std::swap(rhs[piv], rhs[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double factor = A[r][col] / A[col][col];
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) A[r][c] -= factor * A[col][c];
            rhs[r] -= factor * rhs[col];
        }
    }
    for (std::size_t i = 0; i < n; ++i) rhs[i] /= A[i][i];
    return true;
}

constexpr std::size_t kMaxActiveSet = 500;

// Active-set solver for the quadratic subproblem of table and tree factors:
//   max_{mu in simplex over feasible configs}  b.mu - eta/2 mu^T G mu
// where b_y = s(y) + sum_i (a_i + eta p_i)(y_i) and G_{yz} counts agreeing
// variables. Warm-started from the previous active set.
void solve_generic(const Oracle& oracle, const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& p, double eta, FactorWork& work,
                   int max_inner) {
    const std::size_t n_vars = oracle.f.vars.size();
    auto b_of = [&](const std::vector<int>& y) {
        double b = oracle.table_score(y);
        for (std::size_t k = 0; k < n_vars; ++k) {
            b += a[k][static_cast<std::size_t>(y[k])] + eta * p[k][static_cast<std::size_t>(y[k])];
        }
        return b;
    };

    if (work.configs.empty()) {
        std::vector<std::vector<double>> gamma(n_vars);
        for (std::size_t k = 0; k < n_vars; ++k) {
            gamma[k].resize(a[k].size());
            for (std::size_t s = 0; s < a[k].size(); ++s) gamma[k][s] = a[k][s] + eta * p[k][s];
        }
        work.configs.push_back(oracle.best(gamma).first);
        work.mu.assign(1, 1.0);
    }

    auto agree = [&](const std::vector<int>& y, const std::vector<int>& z) {
        double g = 0.0;
        for (std::size_t k = 0; k < n_vars; ++k)
            if (y[k] == z[k]) g += 1.0;
        return g;
    };

    for (int inner = 0; inner < max_inner; ++inner) {
        const std::size_t na = work.configs.size();
        // KKT system for the equality-constrained restriction
        std::vector<std::vector<double>> A(na + 1, std::vector<double>(na + 1, 0.0));
        std::vector<double> rhs(na + 1, 0.0);
        for (std::size_t i = 0; i < na; ++i) {
            for (std::size_t j = 0; j < na; ++j)
                A[i][j] = eta * agree(work.configs[i], work.configs[j]);
            A[i][na] = 1.0;
            A[na][i] = 1.0;
            rhs[i] = b_of(work.configs[i]);
        }
        rhs[na] = 1.0;
        std::vector<std::vector<double>> A_copy = A;
        std::vector<double> sol = rhs;
        if (!solve_linear(A_copy, sol)) {
            // degenerate active set: drop the most recent config and retry
            if (na <= 1) break;
            work.configs.pop_back();
            work.mu.resize(work.configs.size());
            double total = std::accumulate(work.mu.begin(), work.mu.end(), 0.0);
            if (total <= kTiny)
                work.mu.assign(work.configs.size(), 1.0 / static_cast<double>(work.configs.size()));
            else
                for (double& x : work.mu) x /= total;
            continue;
        }
        std::vector<double> mu_star(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(na));
        double tau = sol[na];

        double min_mu = *std::min_element(mu_star.begin(), mu_star.end());
        if (min_mu < -kTiny) {
            // blocked: line search toward mu_star, drop the blocking config
            double t = 1.0;
            std::size_t drop = na;
            for (std::size_t i = 0; i < na; ++i) {
                if (mu_star[i] >= -kTiny) continue;
                double denom = work.mu[i] - mu_star[i];
                double ti = denom <= kTiny ? 0.0 : work.mu[i] / denom;
                if (ti < t) {
                    t = ti;
                    drop = i;
                }
            }
            for (std::size_t i = 0; i < na; ++i)
                work.mu[i] = std::max(0.0, work.mu[i] + t * (mu_star[i] - work.mu[i]));
            if (drop < na) {
                work.configs.erase(work.configs.begin() + static_cast<std::ptrdiff_t>(drop));
                work.mu.erase(work.mu.begin() + static_cast<std::ptrdiff_t>(drop));
            }
            double total = std::accumulate(work.mu.begin(), work.mu.end(), 0.0);
            if (total <= kTiny)
                work.mu.assign(work.configs.size(), 1.0 / static_cast<double>(work.configs.size()));
            else
                for (double& x : work.mu) x /= total;
            continue;
        }

        work.mu = mu_star;
        for (double& x : work.mu) x = std::max(0.0, x);

        // optimality: does any configuration beat the stationarity value?
        std::vector<std::vector<double>> gamma(n_vars);
        for (std::size_t k = 0; k < n_vars; ++k) {
            gamma[k].assign(a[k].size(), 0.0);
            for (std::size_t s = 0; s < a[k].size(); ++s) {
                double x = 0.0;
                for (std::size_t i = 0; i < work.configs.size(); ++i)
                    if (work.configs[i][k] == static_cast<int>(s)) x += work.mu[i];
                gamma[k][s] = a[k][s] - eta * (x - p[k][s]);
            }
        }
        auto [y_new, val] = oracle.best(gamma);
        if (val <= tau + 1e-9 * (1.0 + std::abs(tau))) break;
        bool known = false;
        for (const auto& c : work.configs)
            if (c == y_new) known = true;
        if (known) break;
        if (work.configs.size() >= kMaxActiveSet) {
            // overflow: restart from the incumbent vertex
            std::size_t keep = static_cast<std::size_t>(
                std::max_element(work.mu.begin(), work.mu.end()) - work.mu.begin());
            std::vector<int> kept = work.configs[keep];
            work.configs.assign(1, kept);
            work.mu.assign(1, 1.0);
        }
        work.configs.push_back(y_new);
        work.mu.push_back(0.0);
    }

    // local marginals from the convex combination
    work.q.assign(n_vars, {});
    for (std::size_t k = 0; k < n_vars; ++k) {
        work.q[k].assign(a[k].size(), 0.0);
        for (std::size_t i = 0; i < work.configs.size(); ++i)
            work.q[k][static_cast<std::size_t>(work.configs[i][k])] += work.mu[i];
        for (double& x : work.q[k]) x = std::clamp(x, 0.0, 1.0);
    }
}

// Closed-form projections for the logic factors (binary members, optional
// negation handled by reflecting the target point).
void solve_logic(const Factor& f, const std::vector<std::vector<double>>& a,
                 const std::vector<std::vector<double>>& p, double eta, FactorWork& work) {
    const std::size_t n = f.vars.size();
    std::vector<double> m(n);
    for (std::size_t k = 0; k < n; ++k) {
        bool neg = !f.negated.empty() && f.negated[k];
        double pi = neg ? 1.0 - p[k][1] : p[k][1];
        double c = (a[k][1] - a[k][0]) * (neg ? -1.0 : 1.0);
        m[k] = pi + c / (2.0 * eta);
    }
    std::vector<double> z = m;
    for (double& x : z) x = std::clamp(x, 0.0, 1.0);
    double sum = std::accumulate(z.begin(), z.end(), 0.0);
    bool box_ok = (f.kind == FactorKind::Or && sum >= 1.0) ||
                  (f.kind == FactorKind::AtMostOne && sum <= 1.0);
    if (!box_ok) z = project_simplex(m);

    work.q.assign(n, {});
    for (std::size_t k = 0; k < n; ++k) {
        bool neg = !f.negated.empty() && f.negated[k];
        double on = neg ? 1.0 - z[k] : z[k];
        on = std::clamp(on, 0.0, 1.0);
        work.q[k] = {1.0 - on, on};
    }
}

double logic_factor_max(const Factor& f, const std::vector<std::vector<double>>& a) {
    const std::size_t n = f.vars.size();
    // literal-true / literal-false values per member
    double sum_false = 0.0;
    double best_gain = -std::numeric_limits<double>::infinity();
    double free_max = 0.0;
    bool any_true_preferred = false;
    for (std::size_t k = 0; k < n; ++k) {
        bool neg = !f.negated.empty() && f.negated[k];
        double vt = neg ? a[k][0] : a[k][1];
        double vf = neg ? a[k][1] : a[k][0];
        sum_false += vf;
        free_max += std::max(vt, vf);
        if (vt >= vf) any_true_preferred = true;
        best_gain = std::max(best_gain, vt - vf);
    }
    switch (f.kind) {
        case FactorKind::Xor: return sum_false + best_gain;
        case FactorKind::AtMostOne: return sum_false + std::max(0.0, best_gain);
        case FactorKind::Or: return any_true_preferred ? free_max : sum_false + best_gain;
        default: return free_max;
    }
}

}  // namespace

double FactorLocal::config_probability(const std::vector<int>& states) const {
    double p = 0.0;
    for (std::size_t i = 0; i < configs.size(); ++i)
        if (configs[i] == states) p += weights[i];
    return p;
}

FactorLocal solve_factor_qp(const FactorGraph& graph, int factor_index,
                            const std::vector<std::vector<double>>& adjusted,
                            const std::vector<std::vector<double>>& consensus, double eta) {
    const Factor& f = graph.factors[static_cast<std::size_t>(factor_index)];
    FactorWork work;
    FactorLocal out;
    if (f.kind == FactorKind::Table || f.kind == FactorKind::Tree) {
        Oracle oracle{graph, f, {}};
        for (int v : f.vars)
            oracle.arities.push_back(graph.variables[static_cast<std::size_t>(v)].arity);
        solve_generic(oracle, adjusted, consensus, eta, work, 200);
        out.configs = work.configs;
        out.weights = work.mu;
    } else {
        solve_logic(f, adjusted, consensus, eta, work);
    }
    out.marginals = work.q;
    return out;
}

RelaxedSolution ad3_solve(const FactorGraph& graph, const Potentials& potentials,
                          const Ad3Config& config, const Ad3State* warm, Ad3State* state_out) {
    const std::size_t n_vars = graph.n_variables();
    const std::size_t n_factors = graph.factors.size();
    for (const auto& u : potentials.unary)
        for (double x : u)
            if (std::isnan(x)) throw Error("ad3_solve: NaN in potentials");

    std::vector<int> degree(n_vars, 0);
    for (const Factor& f : graph.factors)
        for (int v : f.vars) ++degree[static_cast<std::size_t>(v)];

    const bool use_warm = warm && warm->lambda.size() == n_factors &&
                          warm->marginals.size() == n_vars;

    RelaxedSolution sol;
    sol.marginals.resize(n_vars);
    for (std::size_t v = 0; v < n_vars; ++v) {
        int arity = graph.variables[v].arity;
        if (degree[v] == 0) {
            sol.marginals[v].assign(static_cast<std::size_t>(arity), 0.0);
            sol.marginals[v][static_cast<std::size_t>(argmax_state(potentials.unary[v]))] = 1.0;
        } else if (use_warm) {
            sol.marginals[v] = warm->marginals[v];
        } else {
            sol.marginals[v].assign(static_cast<std::size_t>(arity),
                                    1.0 / static_cast<double>(arity));
        }
    }

    std::vector<FactorWork> works(n_factors);
    std::vector<Oracle> oracles;
    oracles.reserve(n_factors);
    std::size_t total_slots = 0;
    for (std::size_t fi = 0; fi < n_factors; ++fi) {
        const Factor& f = graph.factors[fi];
        Oracle o{graph, f, {}};
        if (use_warm)
            works[fi].lambda = warm->lambda[fi];
        else
            works[fi].lambda.resize(f.vars.size());
        for (std::size_t k = 0; k < f.vars.size(); ++k) {
            int arity = graph.variables[static_cast<std::size_t>(f.vars[k])].arity;
            o.arities.push_back(arity);
            if (!use_warm)
                works[fi].lambda[k].assign(static_cast<std::size_t>(arity), 0.0);
            total_slots += static_cast<std::size_t>(arity);
        }
        oracles.push_back(std::move(o));
    }

    auto dual_value = [&]() {
        double g = 0.0;
        std::vector<std::vector<double>> adj;
        for (std::size_t fi = 0; fi < n_factors; ++fi) {
            const Factor& f = graph.factors[fi];
            adj.assign(f.vars.size(), {});
            for (std::size_t k = 0; k < f.vars.size(); ++k) {
                std::size_t v = static_cast<std::size_t>(f.vars[k]);
                adj[k].resize(potentials.unary[v].size());
                for (std::size_t s = 0; s < adj[k].size(); ++s)
                    adj[k][s] = potentials.unary[v][s] / degree[v] + works[fi].lambda[k][s];
            }
            if (f.kind == FactorKind::Table || f.kind == FactorKind::Tree)
                g += oracles[fi].best(adj).second;
            else
                g += logic_factor_max(f, adj);
        }
        for (std::size_t v = 0; v < n_vars; ++v)
            if (degree[v] == 0)
                g += potentials.unary[v][static_cast<std::size_t>(
                    argmax_state(potentials.unary[v]))];
        return g;
    };

    std::vector<std::vector<double>> prev_p;
    bool converged = n_factors == 0;
    int iter = 0;
    std::vector<std::vector<double>> adjusted;
    for (iter = 0; iter < config.max_iterations && !converged; ++iter) {
        prev_p = sol.marginals;
        for (std::size_t fi = 0; fi < n_factors; ++fi) {
            const Factor& f = graph.factors[fi];
            adjusted.assign(f.vars.size(), {});
            std::vector<std::vector<double>> prior(f.vars.size());
            for (std::size_t k = 0; k < f.vars.size(); ++k) {
                std::size_t v = static_cast<std::size_t>(f.vars[k]);
                adjusted[k].resize(potentials.unary[v].size());
                for (std::size_t s = 0; s < adjusted[k].size(); ++s)
                    adjusted[k][s] =
                        potentials.unary[v][s] / degree[v] + works[fi].lambda[k][s];
                prior[k] = sol.marginals[v];
            }
            if (f.kind == FactorKind::Table || f.kind == FactorKind::Tree)
                solve_generic(oracles[fi], adjusted, prior, config.eta, works[fi], 10);
            else
                solve_logic(f, adjusted, prior, config.eta, works[fi]);
        }

        // consensus step: p = mean of local marginals
        for (std::size_t v = 0; v < n_vars; ++v)
            if (degree[v] > 0) std::fill(sol.marginals[v].begin(), sol.marginals[v].end(), 0.0);
        for (std::size_t fi = 0; fi < n_factors; ++fi) {
            const Factor& f = graph.factors[fi];
            for (std::size_t k = 0; k < f.vars.size(); ++k) {
                std::size_t v = static_cast<std::size_t>(f.vars[k]);
                for (std::size_t s = 0; s < works[fi].q[k].size(); ++s)
                    sol.marginals[v][s] += works[fi].q[k][s] / degree[v];
            }
        }

        // multiplier step and residuals
        double primal_sq = 0.0, dual_sq = 0.0;
        for (std::size_t fi = 0; fi < n_factors; ++fi) {
            const Factor& f = graph.factors[fi];
            for (std::size_t k = 0; k < f.vars.size(); ++k) {
                std::size_t v = static_cast<std::size_t>(f.vars[k]);
                for (std::size_t s = 0; s < works[fi].q[k].size(); ++s) {
                    double diff = works[fi].q[k][s] - sol.marginals[v][s];
                    works[fi].lambda[k][s] -= config.eta * diff;
                    primal_sq += diff * diff;
                }
            }
        }
        for (std::size_t v = 0; v < n_vars; ++v) {
            if (degree[v] == 0) continue;
            for (std::size_t s = 0; s < sol.marginals[v].size(); ++s) {
                double diff = sol.marginals[v][s] - prev_p[v][s];
                dual_sq += degree[v] * diff * diff;
            }
        }
        sol.primal_residual = std::sqrt(primal_sq / static_cast<double>(std::max<std::size_t>(
                                                        total_slots, 1)));
        sol.dual_residual = config.eta * std::sqrt(dual_sq / static_cast<double>(
                                                                 std::max<std::size_t>(
                                                                     total_slots, 1)));
        if ((iter + 1) % config.dual_check_interval == 0)
            sol.dual_bound = std::min(sol.dual_bound, dual_value());
        converged = sol.primal_residual < config.residual_tolerance &&
                    sol.dual_residual < config.residual_tolerance;
    }
    sol.iterations = iter;
    sol.dual_bound = std::min(sol.dual_bound, dual_value());

    // primal objective of the returned point
    sol.objective = 0.0;
    for (std::size_t v = 0; v < n_vars; ++v)
        for (std::size_t s = 0; s < sol.marginals[v].size(); ++s)
            sol.objective += potentials.unary[v][s] * sol.marginals[v][s];
    for (std::size_t fi = 0; fi < n_factors; ++fi) {
        const Factor& f = graph.factors[fi];
        if (f.kind != FactorKind::Table) continue;
        for (std::size_t i = 0; i < works[fi].configs.size(); ++i)
            sol.objective += works[fi].mu[i] * oracles[fi].table_score(works[fi].configs[i]);
    }

    sol.factor_locals.resize(n_factors);
    for (std::size_t fi = 0; fi < n_factors; ++fi) {
        sol.factor_locals[fi].configs = works[fi].configs;
        sol.factor_locals[fi].weights = works[fi].mu;
        sol.factor_locals[fi].marginals = works[fi].q;
    }

    sol.rounded.resize(n_vars);
    bool integral = true;
    for (std::size_t v = 0; v < n_vars; ++v) {
        for (double& x : sol.marginals[v])
            if (x < 0.0 && x > -kTiny) x = 0.0;
        int s = argmax_state(sol.marginals[v]);
        sol.rounded[static_cast<std::size_t>(v)] = s;
        if (sol.marginals[v][static_cast<std::size_t>(s)] < 1.0 - config.integrality_threshold)
            integral = false;
    }
    sol.status = !converged ? SolveStatus::MaxIter
                            : (integral ? SolveStatus::Integral : SolveStatus::Fractional);
    if (state_out) {
        state_out->lambda.resize(n_factors);
        for (std::size_t fi = 0; fi < n_factors; ++fi)
            state_out->lambda[fi] = works[fi].lambda;
        state_out->marginals = sol.marginals;
    }
    return sol;
}

}  // namespace argmine
