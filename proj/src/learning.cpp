#include "argmine/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "argmine/corpus.hpp"
#include "argmine/exact.hpp"

namespace argmine {

WeightLayout WeightLayout::make(Scheme scheme, const FeatureExtractor& ex) {
    WeightLayout L;
    L.scheme = scheme;
    L.n_labels = num_labels(scheme);
    L.d_prop = ex.prop_dim();
    L.d_link = ex.link_dim();
    L.d_so = ex.second_order_dim();
    L.n_so_kinds = static_cast<int>(so_kinds(scheme).size());
    L.prop_offset = 0;
    L.link_offset = static_cast<std::size_t>(L.n_labels) * L.d_prop;
    L.compat_offset = L.link_offset + 2 * static_cast<std::size_t>(L.d_link);
    L.so_offset = L.compat_offset +
                  static_cast<std::size_t>(L.n_labels * L.n_labels * 2 * kCompatDim);
    L.total = L.so_offset + static_cast<std::size_t>(L.n_so_kinds) * L.d_so;
    return L;
}

ModelWeights ModelWeights::zeros(Scheme scheme, const FeatureExtractor& ex) {
    ModelWeights m;
    m.layout = WeightLayout::make(scheme, ex);
    m.w.assign(m.layout.total, 0.0);
    return m;
}

CostConfig CostConfig::from_corpus(const std::vector<Document>& train_docs, double beta) {
    std::size_t positives = 0, candidates = 0;
    for (const Document& doc : train_docs) {
        positives += doc.gold_links.size();
        candidates += candidate_links(doc).size();
    }
    CostConfig c;
    if (positives > 0)
        c.false_negative_link_cost =
            std::max(1.0, beta * static_cast<double>(candidates - positives) /
                              static_cast<double>(positives));
    return c;
}

namespace {

// v_ab under the variant: adjacency/order only when compat features are on
std::array<double, kCompatDim> compat_vector(const CompatFeatures& cf, const VariantConfig& cfg) {
    return {cf.bias, cfg.compat_features ? cf.adjacency : 0.0,
            cfg.compat_features ? cf.order : 0.0};
}

int so_position(Scheme scheme, SoKind kind) {
    auto kinds = so_kinds(scheme);
    for (int i = 0; i < static_cast<int>(kinds.size()); ++i)
        if (kinds[static_cast<std::size_t>(i)] == kind) return i;
    throw Error("second-order kind not used by scheme");
}

}  // namespace

std::vector<double> joint_feature_map(const CompiledDoc& cd, const FactorGraph& graph,
                                      const WeightLayout& layout, const Assignment& y) {
    if (y.size() != graph.n_variables())
        throw Error("joint_feature_map: assignment does not cover all variables");
    std::vector<double> psi(layout.total, 0.0);
    for (int a = 0; a < graph.n_props; ++a) {
        const SparseVector& x = cd.prop_feats[static_cast<std::size_t>(a)];
        int s = y[static_cast<std::size_t>(graph.prop_var(a))];
        for (std::size_t k = 0; k < x.indices.size(); ++k)
            psi[layout.prop_index(s, x.indices[k])] += x.values[k];
    }
    for (int i = 0; i < graph.n_links; ++i) {
        const SparseVector& x = cd.link_feats[static_cast<std::size_t>(i)];
        int s = y[static_cast<std::size_t>(graph.link_var(i))];
        for (std::size_t k = 0; k < x.indices.size(); ++k)
            psi[layout.link_index(s, x.indices[k])] += x.values[k];
    }
    if (graph.config.compat_factors) {
        for (int i = 0; i < graph.n_links; ++i) {
            const LinkPair& l = cd.candidates[static_cast<std::size_t>(i)];
            auto v = compat_vector(cd.compat[static_cast<std::size_t>(i)], graph.config);
            int si = y[static_cast<std::size_t>(graph.prop_var(l.first))];
            int sj = y[static_cast<std::size_t>(graph.prop_var(l.second))];
            int k = y[static_cast<std::size_t>(graph.link_var(i))];
            for (int f = 0; f < kCompatDim; ++f)
                psi[layout.compat_index(si, sj, k, f)] += v[static_cast<std::size_t>(f)];
        }
    }
    if (graph.config.second_order) {
        for (const CompiledDoc::SoTriple& tr : cd.so_triples) {
            if (y[static_cast<std::size_t>(graph.link_var(tr.link1))] != 1 ||
                y[static_cast<std::size_t>(graph.link_var(tr.link2))] != 1)
                continue;
            int pos = so_position(graph.scheme, tr.kind);
            for (std::size_t k = 0; k < tr.feats.indices.size(); ++k)
                psi[layout.so_index(pos, tr.feats.indices[k])] += tr.feats.values[k];
        }
    }
    return psi;
}

std::vector<double> joint_feature_map(const CompiledDoc& cd, const FactorGraph& graph,
                                      const WeightLayout& layout, const RelaxedSolution& sol) {
    std::vector<double> psi(layout.total, 0.0);
    for (int a = 0; a < graph.n_props; ++a) {
        const SparseVector& x = cd.prop_feats[static_cast<std::size_t>(a)];
        const auto& p = sol.marginals[static_cast<std::size_t>(graph.prop_var(a))];
        for (std::size_t s = 0; s < p.size(); ++s) {
            if (p[s] == 0.0) continue;
            for (std::size_t k = 0; k < x.indices.size(); ++k)
                psi[layout.prop_index(static_cast<int>(s), x.indices[k])] += p[s] * x.values[k];
        }
    }
    for (int i = 0; i < graph.n_links; ++i) {
        const SparseVector& x = cd.link_feats[static_cast<std::size_t>(i)];
        const auto& p = sol.marginals[static_cast<std::size_t>(graph.link_var(i))];
        for (std::size_t s = 0; s < 2; ++s) {
            if (p[s] == 0.0) continue;
            for (std::size_t k = 0; k < x.indices.size(); ++k)
                psi[layout.link_index(static_cast<int>(s), x.indices[k])] += p[s] * x.values[k];
        }
    }
    // factor-local configuration distributions for the structured blocks
    for (std::size_t fi = 0; fi < graph.factors.size(); ++fi) {
        const Factor& f = graph.factors[fi];
        if (f.kind != FactorKind::Table) continue;
        const FactorLocal& local = sol.factor_locals[fi];
        if (f.compat_link >= 0 && graph.config.compat_factors) {
            auto v = compat_vector(cd.compat[static_cast<std::size_t>(f.compat_link)],
                                   graph.config);
            for (std::size_t c = 0; c < local.configs.size(); ++c) {
                double mu = local.weights[c];
                if (mu == 0.0) continue;
                int si = local.configs[c][0], sj = local.configs[c][1], k = local.configs[c][2];
                for (int fidx = 0; fidx < kCompatDim; ++fidx)
                    psi[layout.compat_index(si, sj, k, fidx)] +=
                        mu * v[static_cast<std::size_t>(fidx)];
            }
        } else if (f.so_triple >= 0 && graph.config.second_order) {
            const CompiledDoc::SoTriple& tr =
                cd.so_triples[static_cast<std::size_t>(f.so_triple)];
            double p_on = local.config_probability({1, 1});
            if (p_on == 0.0) continue;
            int pos = so_position(graph.scheme, tr.kind);
            for (std::size_t k = 0; k < tr.feats.indices.size(); ++k)
                psi[layout.so_index(pos, tr.feats.indices[k])] += p_on * tr.feats.values[k];
        }
    }
    return psi;
}

void cost_augment(Potentials& potentials, const FactorGraph& graph, const Assignment& gold,
                  const CostConfig& cost) {
    for (std::size_t v = 0; v < graph.n_variables(); ++v) {
        const Variable& var = graph.variables[v];
        if (var.kind == Variable::Kind::RootLink) continue;  // not an output variable
        for (int s = 0; s < var.arity; ++s) {
            if (s == gold[v]) continue;
            double rho = cost.default_cost;
            if (var.kind == Variable::Kind::Link && gold[v] == 1)
                rho = cost.false_negative_link_cost;
            potentials.unary[v][static_cast<std::size_t>(s)] += rho;
        }
    }
}

double expected_cost(const FactorGraph& graph, const Assignment& gold, const CostConfig& cost,
                     const RelaxedSolution& sol) {
    double total = 0.0;
    for (std::size_t v = 0; v < graph.n_variables(); ++v) {
        const Variable& var = graph.variables[v];
        if (var.kind == Variable::Kind::RootLink) continue;
        for (int s = 0; s < var.arity; ++s) {
            if (s == gold[v]) continue;
            double rho = cost.default_cost;
            if (var.kind == Variable::Kind::Link && gold[v] == 1)
                rho = cost.false_negative_link_cost;
            total += rho * sol.marginals[v][static_cast<std::size_t>(s)];
        }
    }
    return total;
}

HingeResult structured_hinge(const ModelWeights& weights, const CompiledDoc& cd,
                             const CostConfig& cost, const VariantConfig& variant,
                             const Ad3Config& ad3) {
    BuiltGraph built = build_graph(cd, weights, variant);
    Assignment gold = gold_assignment(built.graph, cd.doc);
    Potentials augmented = built.potentials;
    cost_augment(augmented, built.graph, gold, cost);
    HingeResult r;
    r.solution = ad3_solve(built.graph, augmented, ad3);

    const WeightLayout& L = weights.layout;
    std::vector<double> psi_hat = joint_feature_map(cd, built.graph, L, r.solution);
    std::vector<double> psi_gold = joint_feature_map(cd, built.graph, L, gold);
    double s_hat = 0.0, s_gold = 0.0;
    for (std::size_t k = 0; k < L.total; ++k) {
        s_hat += weights.w[k] * psi_hat[k];
        s_gold += weights.w[k] * psi_gold[k];
    }
    r.loss = std::max(0.0, s_hat + expected_cost(built.graph, gold, cost, r.solution) - s_gold);
    return r;
}

WeightLayout layout_from_docs(const std::vector<CompiledDoc>& docs) {
    if (docs.empty()) throw Error("layout_from_docs: empty corpus");
    const Scheme scheme = docs[0].doc.scheme;
    WeightLayout L;
    L.scheme = scheme;
    L.n_labels = num_labels(scheme);
    for (const CompiledDoc& cd : docs)
        if (!cd.prop_feats.empty()) {
            L.d_prop = cd.prop_feats[0].dim;
            break;
        }
    for (const CompiledDoc& cd : docs)
        if (!cd.link_feats.empty()) {
            L.d_link = cd.link_feats[0].dim;
            break;
        }
    for (const CompiledDoc& cd : docs)
        if (!cd.so_triples.empty()) {
            L.d_so = cd.so_triples[0].feats.dim;
            break;
        }
    if (L.d_so == 0) L.d_so = FeatureTemplate::kSecondOrderDim;
    L.n_so_kinds = static_cast<int>(so_kinds(scheme).size());
    L.prop_offset = 0;
    L.link_offset = static_cast<std::size_t>(L.n_labels) * L.d_prop;
    L.compat_offset = L.link_offset + 2 * static_cast<std::size_t>(L.d_link);
    L.so_offset =
        L.compat_offset + static_cast<std::size_t>(L.n_labels * L.n_labels * 2 * kCompatDim);
    L.total = L.so_offset + static_cast<std::size_t>(L.n_so_kinds) * L.d_so;
    return L;
}

TrainedModel bcfw_train(const std::vector<CompiledDoc>& docs, const TrainConfig& config,
                        const CostConfig& cost) {
    if (docs.empty()) throw Error("bcfw_train: empty corpus");
    const std::size_t n = docs.size();

    ModelWeights model;
    model.layout = layout_from_docs(docs);
    model.w.assign(model.layout.total, 0.0);
    const WeightLayout& L = model.layout;
    const double lambda = 1.0 / (config.C * static_cast<double>(n));

    std::vector<std::vector<double>> w_blocks(n, std::vector<double>(L.total, 0.0));
    std::vector<double> l_blocks(n, 0.0);
    std::vector<double> w_avg(L.total, 0.0);
    double l_total = 0.0;

    // gold feature vectors depend only on structure; cache them
    std::vector<std::vector<double>> psi_gold(n);
    std::vector<Assignment> gold(n);
    {
        for (std::size_t i = 0; i < n; ++i) {
            BuiltGraph built = build_graph(docs[i], model, config.variant);
            gold[i] = gold_assignment(built.graph, docs[i].doc);
            psi_gold[i] = joint_feature_map(docs[i], built.graph, L, gold[i]);
        }
    }

    TrainTrace trace;
    std::mt19937 rng(config.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    long step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double gap_accum = 0.0;
        std::size_t integral_calls = 0;
        for (std::size_t idx = 0; idx < n; ++idx) {
            std::size_t i = order[idx];
            BuiltGraph built = build_graph(docs[i], model, config.variant);
            Potentials augmented = built.potentials;
            cost_augment(augmented, built.graph, gold[i], cost);
            RelaxedSolution sol = ad3_solve(built.graph, augmented, config.ad3);
            if (sol.integral()) ++integral_calls;

            std::vector<double> psi_hat = joint_feature_map(docs[i], built.graph, L, sol);
            const double inv_ln = 1.0 / (lambda * static_cast<double>(n));
            // Frank-Wolfe corner for this block
            std::vector<double> w_s(L.total);
            for (std::size_t k = 0; k < L.total; ++k)
                w_s[k] = (psi_gold[i][k] - psi_hat[k]) * inv_ln;
            double l_s = expected_cost(built.graph, gold[i], cost, sol) /
                         static_cast<double>(n);

            double num = -l_blocks[i] + l_s;
            double den = 0.0;
            for (std::size_t k = 0; k < L.total; ++k) {
                double d = w_blocks[i][k] - w_s[k];
                num += lambda * d * model.w[k];
                den += lambda * d * d;
            }
            double gamma = den <= 0.0 ? (num > 0.0 ? 1.0 : 0.0)
                                      : std::clamp(num / den, 0.0, 1.0);
            gap_accum += num;

            for (std::size_t k = 0; k < L.total; ++k) {
                double delta = gamma * (w_s[k] - w_blocks[i][k]);
                w_blocks[i][k] += delta;
                model.w[k] += delta;
            }
            double dl = gamma * (l_s - l_blocks[i]);
            l_blocks[i] += dl;
            l_total += dl;

            double rho = 2.0 / static_cast<double>(step + 2);
            for (std::size_t k = 0; k < L.total; ++k)
                w_avg[k] = (1.0 - rho) * w_avg[k] + rho * model.w[k];
            ++step;

            double sq = 0.0;
            for (double x : model.w) sq += x * x;
            if (!std::isfinite(sq))
                throw DivergenceError("bcfw_train: weights diverged at epoch " +
                                      std::to_string(epoch));
            trace.step_duals.push_back(-0.5 * lambda * sq + l_total);
        }
        TrainTrace::EpochStats es;
        es.dual_objective = trace.step_duals.back();
        es.gap_estimate = gap_accum;
        es.integral_ratio = static_cast<double>(integral_calls) / static_cast<double>(n);
        trace.epochs.push_back(es);
    }

    TrainedModel out;
    out.weights = model;
    if (config.average_weights && step > 0) out.weights.w = w_avg;
    out.variant = config.variant;
    out.cost = cost;
    out.trace = std::move(trace);
    return out;
}

namespace {

struct BaselineExample {
    std::size_t doc;
    int index;   // prop id or candidate link index
    bool link;
};

}  // namespace

TrainedModel baseline_train(const std::vector<CompiledDoc>& docs, const TrainConfig& config,
                            const CostConfig& cost) {
    if (docs.empty()) throw Error("baseline_train: empty corpus");
    const Scheme scheme = docs[0].doc.scheme;

    // reuse the BCFW layout so baselines and structured models share the
    // model container; structured blocks simply stay zero
    TrainConfig zero_cfg = config;
    zero_cfg.epochs = 0;
    TrainedModel out = bcfw_train(docs, zero_cfg, cost);
    ModelWeights& model = out.weights;
    model.baseline = true;
    const WeightLayout& L = model.layout;
    const int P = num_labels(scheme);

    std::vector<BaselineExample> prop_ex, link_ex;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (int a = 0; a < docs[d].n_props(); ++a) prop_ex.push_back({d, a, false});
        for (int i = 0; i < docs[d].n_links(); ++i) link_ex.push_back({d, i, true});
    }

    std::mt19937 rng(config.seed);
    auto train_task = [&](std::vector<BaselineExample>& examples, bool link_task) {
        if (examples.empty()) return;
        const double lambda = 1.0 / (config.C * static_cast<double>(examples.size()));
        const int n_states = link_task ? 2 : P;
        const std::size_t dim = link_task ? L.d_link : L.d_prop;
        std::vector<double> w(static_cast<std::size_t>(n_states) * dim, 0.0);
        std::vector<double> w_sum(w.size(), 0.0);
        long t = 0;
        auto score = [&](const SparseVector& x, int s) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x.indices.size(); ++k)
                acc += w[static_cast<std::size_t>(s) * dim + x.indices[k]] * x.values[k];
            return acc;
        };
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            std::shuffle(examples.begin(), examples.end(), rng);
            for (const BaselineExample& ex : examples) {
                ++t;
                const CompiledDoc& cd = docs[ex.doc];
                const SparseVector& x = link_task
                                            ? cd.link_feats[static_cast<std::size_t>(ex.index)]
                                            : cd.prop_feats[static_cast<std::size_t>(ex.index)];
                int y;
                if (link_task) {
                    y = cd.doc.gold_links.count(
                            cd.candidates[static_cast<std::size_t>(ex.index)])
                            ? 1
                            : 0;
                } else {
                    const auto& gt =
                        cd.doc.props[static_cast<std::size_t>(ex.index)].gold_type;
                    if (!gt) throw Error("baseline_train: missing gold type");
                    y = *gt;
                }
                double lr = 1.0 / (lambda * static_cast<double>(t));
                for (double& v : w) v *= (1.0 - lr * lambda);
                // cost-weighted multiclass hinge
                int worst = -1;
                double worst_val = -std::numeric_limits<double>::infinity();
                for (int s = 0; s < n_states; ++s) {
                    if (s == y) continue;
                    double margin_cost =
                        (link_task && y == 1) ? cost.false_negative_link_cost : 1.0;
                    double val = score(x, s) + margin_cost;
                    if (val > worst_val) {
                        worst_val = val;
                        worst = s;
                    }
                }
                if (worst >= 0 && worst_val > score(x, y)) {
                    for (std::size_t k = 0; k < x.indices.size(); ++k) {
                        w[static_cast<std::size_t>(y) * dim + x.indices[k]] +=
                            lr * x.values[k];
                        w[static_cast<std::size_t>(worst) * dim + x.indices[k]] -=
                            lr * x.values[k];
                    }
                }
                for (std::size_t k = 0; k < w.size(); ++k) w_sum[k] += w[k];
            }
        }
        if (config.average_weights && t > 0)
            for (std::size_t k = 0; k < w.size(); ++k) w[k] = w_sum[k] / static_cast<double>(t);
        for (int s = 0; s < n_states; ++s)
            for (std::size_t f = 0; f < dim; ++f)
                model.w[link_task ? L.link_index(s, static_cast<std::uint32_t>(f))
                                  : L.prop_index(s, static_cast<std::uint32_t>(f))] =
                    w[static_cast<std::size_t>(s) * dim + f];
    };
    train_task(prop_ex, false);
    train_task(link_ex, true);
    out.variant = config.variant;
    return out;
}

Prediction predict(const CompiledDoc& cd, const ModelWeights& weights,
                   const VariantConfig& variant, PredictMode mode, const Ad3Config& ad3,
                   InferenceStats* stats) {
    VariantConfig effective = weights.baseline ? variant.baseline_restricted() : variant;
    BuiltGraph built = build_graph(cd, weights, effective);
    Prediction pred;
    pred.types.resize(static_cast<std::size_t>(cd.n_props()));

    Assignment y;
    if (mode == PredictMode::Round) {
        y.resize(built.graph.n_variables());
        for (std::size_t v = 0; v < built.graph.n_variables(); ++v) {
            const auto& u = built.potentials.unary[v];
            int best = 0;
            for (int s = 1; s < built.graph.variables[v].arity; ++s)
                if (u[static_cast<std::size_t>(s)] > u[static_cast<std::size_t>(best)]) best = s;
            y[v] = best;
        }
        if (stats) *stats = {};
    } else {
        BnbConfig bnb;
        bnb.ad3 = ad3;
        RelaxedSolution root;
        MapResult res = branch_and_bound(built.graph, built.potentials, bnb, &root);
        y = res.assignment;
        if (stats) {
            stats->root_status = root.status;
            stats->root_iterations = root.iterations;
            stats->root_objective = root.objective;
            stats->nodes = res.nodes;
        }
    }

    for (int a = 0; a < cd.n_props(); ++a)
        pred.types[static_cast<std::size_t>(a)] =
            y[static_cast<std::size_t>(built.graph.prop_var(a))];
    for (int i = 0; i < cd.n_links(); ++i)
        if (y[static_cast<std::size_t>(built.graph.link_var(i))] == 1)
            pred.links.insert(cd.candidates[static_cast<std::size_t>(i)]);
    return pred;
}

std::vector<Prediction> predict_corpus_serial(const std::vector<CompiledDoc>& docs,
                                              const ModelWeights& weights,
                                              const VariantConfig& variant, PredictMode mode,
                                              const Ad3Config& ad3,
                                              std::vector<InferenceStats>* stats) {
    std::vector<Prediction> out(docs.size());
    if (stats) stats->assign(docs.size(), {});
    for (std::size_t i = 0; i < docs.size(); ++i)
        out[i] = predict(docs[i], weights, variant, mode, ad3,
                         stats ? &(*stats)[i] : nullptr);
    return out;
}

std::vector<Prediction> predict_corpus(const std::vector<CompiledDoc>& docs,
                                       const ModelWeights& weights, const VariantConfig& variant,
                                       PredictMode mode, const Ad3Config& ad3, int jobs,
                                       std::vector<InferenceStats>* stats) {
#ifdef _OPENMP
    std::vector<Prediction> out(docs.size());
    if (stats) stats->assign(docs.size(), {});
    std::exception_ptr error;
    int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long i = 0; i < static_cast<long>(docs.size()); ++i) {
        try {
            out[static_cast<std::size_t>(i)] =
                predict(docs[static_cast<std::size_t>(i)], weights, variant, mode, ad3,
                        stats ? &(*stats)[static_cast<std::size_t>(i)] : nullptr);
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return out;
#else
    (void)jobs;
    return predict_corpus_serial(docs, weights, variant, mode, ad3, stats);
#endif
}

}  // namespace argmine
