#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "argmine/features.hpp"
#include "argmine/types.hpp"

namespace argmine {

// Incremental model variants. The flags mirror the component grid:
//   basic:  unaries + compatibility factors (bias-only parametrization)
//   full:   + compatibility features + second-order factors + link structure
//   strict: full + hard type/link masks
enum class Variant { Basic, Full, Strict };

struct VariantConfig {
    bool compat_factors = false;
    bool compat_features = false;
    bool second_order = false;
    bool link_structure = false;
    bool strict = false;

    static VariantConfig make(Variant v);
    // Baselines carry only unary scores, so inference on them keeps just the
    // parameterless factors (link structure, strict masks).
    VariantConfig baseline_restricted() const;
};

Variant variant_from_name(std::string_view name);
const char* variant_name(Variant v);

enum class SoKind { Grandparent = 0, Sibling = 1, Coparent = 2 };

// Second-order factor kinds used per scheme, in weight-block order.
std::vector<SoKind> so_kinds(Scheme scheme);
const char* so_kind_name(SoKind k);

// Per-document cache of everything that depends only on the document and the
// feature extractor; building graphs for different weights reuses it.
struct CompiledDoc {
    Document doc;
    std::vector<LinkPair> candidates;
    std::map<LinkPair, int> candidate_index;
    std::vector<SparseVector> prop_feats;
    std::vector<SparseVector> link_feats;
    std::vector<CompatFeatures> compat;

    // Triples are stored in role order: grandparent (src, mid, trg);
    // sibling (src, trg1, trg2) with trg1 < trg2; coparent (src1, src2, trg)
    // with src1 < src2. link1/link2 index into `candidates`.
    struct SoTriple {
        SoKind kind;
        int p1, p2, p3;
        int link1, link2;
        SparseVector feats;
    };
    std::vector<SoTriple> so_triples;

    int n_props() const { return doc.n_props(); }
    int n_links() const { return static_cast<int>(candidates.size()); }
};

CompiledDoc compile_doc(const Document& doc, const FeatureExtractor& extractor);

struct Variable {
    enum class Kind { Prop, Link, RootLink };
    Kind kind;
    int arity;
    int a = -1;  // prop id (Prop, RootLink) or link source (Link)
    int b = -1;  // link target (Link)
};

enum class FactorKind { Table, Xor, AtMostOne, Or, Tree };

struct Factor {
    FactorKind kind;
    std::vector<int> vars;

    // Table factors: score per joint configuration, row-major in the order of
    // `vars` (strict masks are already folded in as -kStrictMaskPenalty).
    std::vector<double> table;
    std::vector<bool> masked;

    // Logic factors: per-member negation flags.
    std::vector<bool> negated;

    // Tree factors: arborescence arc (u, v) per bound variable, over nodes
    // 0..n_paragraph_props with the virtual root last.
    std::vector<std::pair<int, int>> arcs;
    int tree_nodes = 0;
    int tree_root = -1;

    int compat_link = -1;  // Table factors built from a candidate link
    int so_triple = -1;    // Table factors built from a second-order triple
    int paragraph = -1;    // Tree factors
};

// Score shift applied to strictly disallowed compatibility entries.
constexpr double kStrictMaskPenalty = 1e6;

struct FactorGraph {
    Scheme scheme = Scheme::Cdcp;
    VariantConfig config;
    std::vector<Variable> variables;
    std::vector<Factor> factors;
    std::vector<std::vector<int>> factors_of_var;

    int n_props = 0;
    int n_links = 0;  // candidate links; link variable i is variable n_props + i

    int prop_var(int a) const { return a; }
    int link_var(int link_index) const { return n_props + link_index; }

    std::size_t n_variables() const { return variables.size(); }
};

struct Potentials {
    std::vector<std::vector<double>> unary;  // per variable, length arity
};

struct ModelWeights;  // learning.hpp

struct BuiltGraph {
    FactorGraph graph;
    Potentials potentials;
};

// Instantiates the factor graph for a document under a variant, with unary
// potentials and factor tables filled in from the weights.
BuiltGraph build_graph(const CompiledDoc& cd, const ModelWeights& weights,
                       const VariantConfig& config);

using Assignment = std::vector<int>;

struct ScoreResult {
    double score = 0.0;
    bool feasible = true;  // false iff a logic or tree factor is violated
};

ScoreResult score_assignment(const FactorGraph& graph, const Potentials& potentials,
                             const Assignment& y);

bool is_feasible(const FactorGraph& graph, const Assignment& y);

// Gold assignment for training/eval; Ukp root links are set on iff the prop
// has no outgoing gold link. Throws if any gold type is missing.
Assignment gold_assignment(const FactorGraph& graph, const Document& doc);

// Versioned textual dump (variables, factors, potentials) for fixture diffs.
std::string dump_graph(const FactorGraph& graph, const Potentials& potentials);

}  // namespace argmine
