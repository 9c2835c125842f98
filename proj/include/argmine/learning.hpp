#pragma once

#include <random>
#include <vector>

#include "argmine/ad3.hpp"
#include "argmine/factor_graph.hpp"

namespace argmine {

// All weight blocks live in one flat vector; the layout maps block
// coordinates to flat indices. Joint feature vectors use the same layout, so
// <w, psi(x, y)> can be taken as a plain dot product.
struct WeightLayout {
    Scheme scheme = Scheme::Cdcp;
    int n_labels = 0;
    std::uint32_t d_prop = 0, d_link = 0, d_so = 0;
    std::size_t prop_offset = 0, link_offset = 0, compat_offset = 0, so_offset = 0;
    std::size_t total = 0;
    int n_so_kinds = 0;

    static WeightLayout make(Scheme scheme, const FeatureExtractor& ex);

    std::size_t prop_index(int state, std::uint32_t f) const {
        return prop_offset + static_cast<std::size_t>(state) * d_prop + f;
    }
    std::size_t link_index(int state, std::uint32_t f) const {
        return link_offset + static_cast<std::size_t>(state) * d_link + f;
    }
    // (i, j, k) = (source type, target type, link state); f indexes the
    // 3-dimensional compatibility feature vector.
    std::size_t compat_index(int i, int j, int k, int f) const {
        return compat_offset +
               static_cast<std::size_t>(((i * n_labels + j) * 2 + k) * kCompatDim + f);
    }
    std::size_t so_index(int kind_pos, std::uint32_t f) const {
        return so_offset + static_cast<std::size_t>(kind_pos) * d_so + f;
    }
    bool operator==(const WeightLayout&) const = default;
};

struct ModelWeights {
    WeightLayout layout;
    std::vector<double> w;
    bool baseline = false;  // unary-only model; structured blocks stay zero

    static ModelWeights zeros(Scheme scheme, const FeatureExtractor& ex);
};

struct CostConfig {
    double default_cost = 1.0;
    double false_negative_link_cost = 1.0;

    // FN link cost = max(1, beta * #negative candidates / #positive links).
    static CostConfig from_corpus(const std::vector<Document>& train_docs, double beta = 1.0);
};

constexpr double kCGrid[] = {0.001, 0.003, 0.01, 0.03, 0.1, 0.3};

struct TrainConfig {
    double C = 0.01;
    int epochs = 20;
    unsigned seed = 1;
    VariantConfig variant = VariantConfig::make(Variant::Full);
    int k_folds = 3;
    bool average_weights = true;
    Ad3Config ad3;
};

struct TrainTrace {
    struct EpochStats {
        double dual_objective = 0.0;
        double gap_estimate = 0.0;     // accumulated block gaps over the pass
        double integral_ratio = 0.0;   // integral AD3 calls / calls this epoch
    };
    std::vector<EpochStats> epochs;
    std::vector<double> step_duals;  // dual objective after every block step
};

// psi(x, y) under the graph's variant; hard assignments and relaxed
// solutions (expected features) share the layout.
std::vector<double> joint_feature_map(const CompiledDoc& cd, const FactorGraph& graph,
                                      const WeightLayout& layout, const Assignment& y);
std::vector<double> joint_feature_map(const CompiledDoc& cd, const FactorGraph& graph,
                                      const WeightLayout& layout, const RelaxedSolution& sol);

// Adds the weighted Hamming misclassification cost to the unary potentials:
// every non-gold state gains its cost, so regular MAP becomes cost-augmented
// MAP. Gold-on links charge false_negative_link_cost on their off state.
void cost_augment(Potentials& potentials, const FactorGraph& graph, const Assignment& gold,
                  const CostConfig& cost);

double expected_cost(const FactorGraph& graph, const Assignment& gold, const CostConfig& cost,
                     const RelaxedSolution& sol);

struct HingeResult {
    double loss = 0.0;
    RelaxedSolution solution;
};

HingeResult structured_hinge(const ModelWeights& weights, const CompiledDoc& cd,
                             const CostConfig& cost, const VariantConfig& variant,
                             const Ad3Config& ad3);

struct TrainedModel {
    ModelWeights weights;
    VariantConfig variant;
    CostConfig cost;
    TrainTrace trace;
};

WeightLayout layout_from_docs(const std::vector<CompiledDoc>& docs);

// Block-coordinate Frank-Wolfe over the structured hinge, one block per
// document. Deterministic given the seed.
TrainedModel bcfw_train(const std::vector<CompiledDoc>& docs, const TrainConfig& config,
                        const CostConfig& cost);

// Independent l2-regularized hinge classifiers for prop type and link on/off
// (positive class weighted by the FN link cost); fills only the unary blocks.
TrainedModel baseline_train(const std::vector<CompiledDoc>& docs, const TrainConfig& config,
                            const CostConfig& cost);

enum class PredictMode { Round, Inference };

struct Prediction {
    std::vector<int> types;
    std::set<LinkPair> links;
};

struct InferenceStats {
    SolveStatus root_status = SolveStatus::Integral;
    int root_iterations = 0;
    double root_objective = 0.0;
    int nodes = 0;
};

Prediction predict(const CompiledDoc& cd, const ModelWeights& weights,
                   const VariantConfig& variant, PredictMode mode,
                   const Ad3Config& ad3 = {}, InferenceStats* stats = nullptr);

// OpenMP-parallel over documents; the serial variant is the reference the
// tests and the benchmark compare against.
std::vector<Prediction> predict_corpus(const std::vector<CompiledDoc>& docs,
                                       const ModelWeights& weights, const VariantConfig& variant,
                                       PredictMode mode, const Ad3Config& ad3 = {}, int jobs = 0,
                                       std::vector<InferenceStats>* stats = nullptr);
std::vector<Prediction> predict_corpus_serial(const std::vector<CompiledDoc>& docs,
                                              const ModelWeights& weights,
                                              const VariantConfig& variant, PredictMode mode,
                                              const Ad3Config& ad3 = {},
                                              std::vector<InferenceStats>* stats = nullptr);

}  // namespace argmine
