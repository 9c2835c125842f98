#include "argmine/factor_graph.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "argmine/corpus.hpp"
#include "argmine/learning.hpp"

namespace argmine {

VariantConfig VariantConfig::make(Variant v) {
    VariantConfig c;
    c.compat_factors = true;
    if (v == Variant::Basic) return c;
    c.compat_features = true;
    c.second_order = true;
    c.link_structure = true;
    if (v == Variant::Full) return c;
    c.strict = true;
    return c;
}

VariantConfig VariantConfig::baseline_restricted() const {
    VariantConfig c;
    c.link_structure = link_structure;
    c.strict = strict;
    return c;
}

Variant variant_from_name(std::string_view name) {
    if (name == "basic") return Variant::Basic;
    if (name == "full") return Variant::Full;
    if (name == "strict") return Variant::Strict;
    throw Error("unknown variant: " + std::string(name));
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Basic: return "basic";
        case Variant::Full: return "full";
        default: return "strict";
    }
}

std::vector<SoKind> so_kinds(Scheme scheme) {
    if (scheme == Scheme::Cdcp) return {SoKind::Sibling, SoKind::Coparent};
    return {SoKind::Grandparent, SoKind::Coparent};
}

const char* so_kind_name(SoKind k) {
    switch (k) {
        case SoKind::Grandparent: return "grandparent";
        case SoKind::Sibling: return "sibling";
        default: return "coparent";
    }
}

CompiledDoc compile_doc(const Document& doc, const FeatureExtractor& extractor) {
    if (doc.scheme != extractor.scheme()) throw Error("document/extractor scheme mismatch");
    CompiledDoc cd;
    cd.doc = doc;
    cd.candidates = candidate_links(doc);
    for (int i = 0; i < static_cast<int>(cd.candidates.size()); ++i)
        cd.candidate_index[cd.candidates[static_cast<std::size_t>(i)]] = i;

    const int n = doc.n_props();
    cd.prop_feats.reserve(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) cd.prop_feats.push_back(extractor.prop_features(doc, a));
    cd.link_feats.reserve(cd.candidates.size());
    cd.compat.reserve(cd.candidates.size());
    for (const LinkPair& l : cd.candidates) {
        cd.link_feats.push_back(extractor.link_features(doc, l.first, l.second));
        cd.compat.push_back(compat_features(doc, l.first, l.second));
    }

    auto cand = [&](int a, int b) {
        auto it = cd.candidate_index.find({a, b});
        return it == cd.candidate_index.end() ? -1 : it->second;
    };
    for (SoKind kind : so_kinds(doc.scheme)) {
        if (kind == SoKind::Grandparent) {
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    for (int c = 0; c < n; ++c) {
                        if (a == b || b == c || a == c) continue;
                        int l1 = cand(a, b), l2 = cand(b, c);
                        if (l1 < 0 || l2 < 0) continue;
                        cd.so_triples.push_back({kind, a, b, c, l1, l2,
                                                 extractor.second_order_features(doc, a, b, c)});
                    }
        } else if (kind == SoKind::Sibling) {
            // common source, unordered target pair
            for (int src = 0; src < n; ++src)
                for (int t1 = 0; t1 < n; ++t1)
                    for (int t2 = t1 + 1; t2 < n; ++t2) {
                        if (t1 == src || t2 == src) continue;
                        int l1 = cand(src, t1), l2 = cand(src, t2);
                        if (l1 < 0 || l2 < 0) continue;
                        cd.so_triples.push_back({kind, src, t1, t2, l1, l2,
                                                 extractor.second_order_features(doc, src, t1, t2)});
                    }
        } else {
            // common target, unordered source pair
            for (int trg = 0; trg < n; ++trg)
                for (int s1 = 0; s1 < n; ++s1)
                    for (int s2 = s1 + 1; s2 < n; ++s2) {
                        if (s1 == trg || s2 == trg) continue;
                        int l1 = cand(s1, trg), l2 = cand(s2, trg);
                        if (l1 < 0 || l2 < 0) continue;
                        cd.so_triples.push_back({kind, s1, s2, trg, l1, l2,
                                                 extractor.second_order_features(doc, s1, s2, trg)});
                    }
        }
    }
    return cd;
}

namespace {

int so_kind_position(Scheme scheme, SoKind kind) {
    auto kinds = so_kinds(scheme);
    for (int i = 0; i < static_cast<int>(kinds.size()); ++i)
        if (kinds[static_cast<std::size_t>(i)] == kind) return i;
    throw Error("second-order kind not used by scheme");
}

bool strict_masked(Scheme scheme, int src_type, int trg_type) {
    if (scheme == Scheme::Cdcp)
        // source must be at least as objective as the target
        return objectivity_rank(src_type) < objectivity_rank(trg_type);
    return src_type != kUkpPremise;
}

}  // namespace

BuiltGraph build_graph(const CompiledDoc& cd, const ModelWeights& weights,
                       const VariantConfig& config) {
    const Document& doc = cd.doc;
    const Scheme scheme = doc.scheme;
    const int P = num_labels(scheme);
    const WeightLayout& L = weights.layout;
    if (L.scheme != scheme) throw DimensionError("weights scheme does not match document");
    for (int a = 0; a < cd.n_props(); ++a)
        if (cd.prop_feats[static_cast<std::size_t>(a)].dim != L.d_prop)
            throw DimensionError("prop feature dimension does not match weights");
    if (!cd.link_feats.empty() && cd.link_feats[0].dim != L.d_link)
        throw DimensionError("link feature dimension does not match weights");

    BuiltGraph built;
    FactorGraph& g = built.graph;
    g.scheme = scheme;
    g.config = config;
    g.n_props = cd.n_props();
    g.n_links = cd.n_links();

    for (int a = 0; a < g.n_props; ++a)
        g.variables.push_back({Variable::Kind::Prop, P, a, -1});
    for (int i = 0; i < g.n_links; ++i)
        g.variables.push_back(
            {Variable::Kind::Link, 2, cd.candidates[static_cast<std::size_t>(i)].first,
             cd.candidates[static_cast<std::size_t>(i)].second});

    Potentials& pot = built.potentials;
    pot.unary.resize(g.variables.size());
    for (int a = 0; a < g.n_props; ++a) {
        std::vector<double> phi(static_cast<std::size_t>(P), 0.0);
        const SparseVector& x = cd.prop_feats[static_cast<std::size_t>(a)];
        for (int s = 0; s < P; ++s)
            for (std::size_t k = 0; k < x.indices.size(); ++k)
                phi[static_cast<std::size_t>(s)] +=
                    weights.w[L.prop_index(s, x.indices[k])] * x.values[k];
        pot.unary[static_cast<std::size_t>(g.prop_var(a))] = std::move(phi);
    }
    for (int i = 0; i < g.n_links; ++i) {
        std::vector<double> phi(2, 0.0);
        const SparseVector& x = cd.link_feats[static_cast<std::size_t>(i)];
        for (int s = 0; s < 2; ++s)
            for (std::size_t k = 0; k < x.indices.size(); ++k)
                phi[static_cast<std::size_t>(s)] +=
                    weights.w[L.link_index(s, x.indices[k])] * x.values[k];
        pot.unary[static_cast<std::size_t>(g.link_var(i))] = std::move(phi);
    }

    // dense compatibility factors; also the carrier for strict masks
    if (config.compat_factors || config.strict) {
        for (int i = 0; i < g.n_links; ++i) {
            const LinkPair& l = cd.candidates[static_cast<std::size_t>(i)];
            Factor f;
            f.kind = FactorKind::Table;
            f.vars = {g.prop_var(l.first), g.prop_var(l.second), g.link_var(i)};
            f.compat_link = i;
            f.table.assign(static_cast<std::size_t>(P * P * 2), 0.0);
            f.masked.assign(static_cast<std::size_t>(P * P * 2), false);
            if (config.compat_factors) {
                const CompatFeatures& cf = cd.compat[static_cast<std::size_t>(i)];
                const double v[kCompatDim] = {cf.bias,
                                              config.compat_features ? cf.adjacency : 0.0,
                                              config.compat_features ? cf.order : 0.0};
                for (int si = 0; si < P; ++si)
                    for (int sj = 0; sj < P; ++sj)
                        for (int k = 0; k < 2; ++k) {
                            double s = 0.0;
                            for (int fidx = 0; fidx < kCompatDim; ++fidx)
                                s += weights.w[L.compat_index(si, sj, k, fidx)] * v[fidx];
                            f.table[static_cast<std::size_t>((si * P + sj) * 2 + k)] = s;
                        }
            }
            if (config.strict) {
                for (int si = 0; si < P; ++si)
                    for (int sj = 0; sj < P; ++sj)
                        if (strict_masked(scheme, si, sj)) {
                            std::size_t idx = static_cast<std::size_t>((si * P + sj) * 2 + 1);
                            f.table[idx] -= kStrictMaskPenalty;
                            f.masked[idx] = true;
                        }
            }
            g.factors.push_back(std::move(f));
        }
    }

    if (config.second_order) {
        for (int t = 0; t < static_cast<int>(cd.so_triples.size()); ++t) {
            const CompiledDoc::SoTriple& tr = cd.so_triples[static_cast<std::size_t>(t)];
            Factor f;
            f.kind = FactorKind::Table;
            f.vars = {g.link_var(tr.link1), g.link_var(tr.link2)};
            f.so_triple = t;
            int pos = so_kind_position(scheme, tr.kind);
            double score = 0.0;
            for (std::size_t k = 0; k < tr.feats.indices.size(); ++k)
                score += weights.w[L.so_index(pos, tr.feats.indices[k])] * tr.feats.values[k];
            f.table = {0.0, 0.0, 0.0, score};  // only the on/on configuration scores
            g.factors.push_back(std::move(f));
        }
    }

    if (config.link_structure) {
        if (scheme == Scheme::Cdcp) {
            auto cand = [&](int a, int b) { return cd.candidate_index.at({a, b}); };
            const int n = g.n_props;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    for (int c = 0; c < n; ++c) {
                        if (a == b || b == c || a == c) continue;
                        auto ab = cd.candidate_index.find({a, b});
                        auto bc = cd.candidate_index.find({b, c});
                        auto ac = cd.candidate_index.find({a, c});
                        if (ab == cd.candidate_index.end() || bc == cd.candidate_index.end() ||
                            ac == cd.candidate_index.end())
                            continue;
                        Factor f;
                        f.kind = FactorKind::Or;  // !ab | !bc | ac  ==  ab & bc => ac
                        f.vars = {g.link_var(ab->second), g.link_var(bc->second),
                                  g.link_var(ac->second)};
                        f.negated = {true, true, false};
                        g.factors.push_back(std::move(f));
                    }
            for (int a = 0; a < n; ++a)
                for (int b = a + 1; b < n; ++b) {
                    Factor f;
                    f.kind = FactorKind::AtMostOne;
                    f.vars = {g.link_var(cand(a, b)), g.link_var(cand(b, a))};
                    f.negated = {false, false};
                    g.factors.push_back(std::move(f));
                }
        } else {
            // one tree factor per paragraph, over its links plus virtual root
            // links a -> * (fresh zero-potential variables)
            std::map<int, std::vector<int>> para_props;
            for (int a = 0; a < g.n_props; ++a)
                para_props[doc.props[static_cast<std::size_t>(a)].paragraph].push_back(a);
            for (const auto& [para, members] : para_props) {
                const int m = static_cast<int>(members.size());
                std::map<int, int> local;  // prop id -> local node
                for (int i = 0; i < m; ++i) local[members[static_cast<std::size_t>(i)]] = i;
                Factor f;
                f.kind = FactorKind::Tree;
                f.paragraph = para;
                f.tree_nodes = m + 1;
                f.tree_root = m;
                for (int i = 0; i < g.n_links; ++i) {
                    const LinkPair& l = cd.candidates[static_cast<std::size_t>(i)];
                    if (!local.count(l.first)) continue;
                    f.vars.push_back(g.link_var(i));
                    // link a->b means a's parent pointer is b: arborescence arc b->a
                    f.arcs.emplace_back(local.at(l.second), local.at(l.first));
                }
                for (int a : members) {
                    int root_var = static_cast<int>(g.variables.size());
                    g.variables.push_back({Variable::Kind::RootLink, 2, a, -1});
                    pot.unary.push_back({0.0, 0.0});
                    f.vars.push_back(root_var);
                    f.arcs.emplace_back(f.tree_root, local.at(a));
                }
                g.factors.push_back(std::move(f));
            }
        }
    }

    g.factors_of_var.assign(g.variables.size(), {});
    for (int fi = 0; fi < static_cast<int>(g.factors.size()); ++fi)
        for (int v : g.factors[static_cast<std::size_t>(fi)].vars)
            g.factors_of_var[static_cast<std::size_t>(v)].push_back(fi);
    return built;
}

namespace {

bool logic_satisfied(const Factor& f, const Assignment& y) {
    auto lit = [&](std::size_t k) {
        bool on = y[static_cast<std::size_t>(f.vars[k])] == 1;
        return f.negated.empty() ? on : (f.negated[k] ? !on : on);
    };
    std::size_t count = 0;
    for (std::size_t k = 0; k < f.vars.size(); ++k)
        if (lit(k)) ++count;
    switch (f.kind) {
        case FactorKind::Xor: return count == 1;
        case FactorKind::AtMostOne: return count <= 1;
        case FactorKind::Or: return count >= 1;
        default: return true;
    }
}

bool tree_satisfied(const Factor& f, const Assignment& y) {
    // the on-arcs must form a spanning arborescence rooted at tree_root
    std::vector<int> parent(static_cast<std::size_t>(f.tree_nodes), -1);
    for (std::size_t k = 0; k < f.vars.size(); ++k) {
        if (y[static_cast<std::size_t>(f.vars[k])] != 1) continue;
        auto [u, v] = f.arcs[k];
        if (parent[static_cast<std::size_t>(v)] != -1) return false;  // two in-arcs
        parent[static_cast<std::size_t>(v)] = u;
    }
    if (parent[static_cast<std::size_t>(f.tree_root)] != -1) return false;
    for (int v = 0; v < f.tree_nodes; ++v) {
        if (v == f.tree_root) continue;
        int steps = 0, u = v;
        while (u != f.tree_root) {
            u = parent[static_cast<std::size_t>(u)];
            if (u < 0 || ++steps > f.tree_nodes) return false;
        }
    }
    return true;
}

}  // namespace

ScoreResult score_assignment(const FactorGraph& graph, const Potentials& potentials,
                             const Assignment& y) {
    if (y.size() != graph.n_variables()) throw Error("assignment does not cover all variables");
    ScoreResult r;
    for (std::size_t v = 0; v < y.size(); ++v) {
        int s = y[v];
        if (s < 0 || s >= graph.variables[v].arity) throw Error("assignment state out of range");
        r.score += potentials.unary[v][static_cast<std::size_t>(s)];
    }
    for (const Factor& f : graph.factors) {
        switch (f.kind) {
            case FactorKind::Table: {
                std::size_t idx = 0;
                for (std::size_t k = 0; k < f.vars.size(); ++k) {
                    int arity = graph.variables[static_cast<std::size_t>(f.vars[k])].arity;
                    idx = idx * static_cast<std::size_t>(arity) +
                          static_cast<std::size_t>(y[static_cast<std::size_t>(f.vars[k])]);
                }
                r.score += f.table[idx];
                break;
            }
            case FactorKind::Tree:
                if (!tree_satisfied(f, y)) r.feasible = false;
                break;
            default:
                if (!logic_satisfied(f, y)) r.feasible = false;
                break;
        }
    }
    return r;
}

bool is_feasible(const FactorGraph& graph, const Assignment& y) {
    if (y.size() != graph.n_variables()) throw Error("assignment does not cover all variables");
    for (const Factor& f : graph.factors) {
        if (f.kind == FactorKind::Tree && !tree_satisfied(f, y)) return false;
        if ((f.kind == FactorKind::Xor || f.kind == FactorKind::AtMostOne ||
             f.kind == FactorKind::Or) &&
            !logic_satisfied(f, y))
            return false;
    }
    return true;
}

Assignment gold_assignment(const FactorGraph& graph, const Document& doc) {
    Assignment y(graph.n_variables(), 0);
    for (std::size_t v = 0; v < graph.n_variables(); ++v) {
        const Variable& var = graph.variables[v];
        switch (var.kind) {
            case Variable::Kind::Prop: {
                const auto& t = doc.props[static_cast<std::size_t>(var.a)].gold_type;
                if (!t) throw Error("doc '" + doc.doc_id + "': prop " + std::to_string(var.a) +
                                    " has no gold type");
                y[v] = *t;
                break;
            }
            case Variable::Kind::Link:
                y[v] = doc.gold_links.count({var.a, var.b}) ? 1 : 0;
                break;
            case Variable::Kind::RootLink: {
                bool has_out = false;
                for (const LinkPair& l : doc.gold_links)
                    if (l.first == var.a) has_out = true;
                y[v] = has_out ? 0 : 1;
                break;
            }
        }
    }
    return y;
}

std::string dump_graph(const FactorGraph& graph, const Potentials& potentials) {
    std::ostringstream os;
    os.precision(6);
    os << "argmine-fgdump v1\n";
    os << "scheme " << scheme_name(graph.scheme) << " props " << graph.n_props << " links "
       << graph.n_links << " vars " << graph.n_variables() << " factors " << graph.factors.size()
       << "\n";
    for (std::size_t v = 0; v < graph.n_variables(); ++v) {
        const Variable& var = graph.variables[v];
        os << "var " << v << " ";
        switch (var.kind) {
            case Variable::Kind::Prop: os << "prop(" << var.a << ")"; break;
            case Variable::Kind::Link: os << "link(" << var.a << "->" << var.b << ")"; break;
            case Variable::Kind::RootLink: os << "root(" << var.a << "->*)"; break;
        }
        os << " unary";
        for (double x : potentials.unary[v]) os << " " << x;
        os << "\n";
    }
    for (std::size_t fi = 0; fi < graph.factors.size(); ++fi) {
        const Factor& f = graph.factors[fi];
        os << "factor " << fi << " ";
        switch (f.kind) {
            case FactorKind::Table: os << (f.so_triple >= 0 ? "second_order" : "compat"); break;
            case FactorKind::Xor: os << "exactly_one"; break;
            case FactorKind::AtMostOne: os << "at_most_one"; break;
            case FactorKind::Or: os << "or"; break;
            case FactorKind::Tree: os << "tree(paragraph " << f.paragraph << ")"; break;
        }
        os << " vars";
        for (std::size_t k = 0; k < f.vars.size(); ++k) {
            os << " ";
            if (!f.negated.empty() && f.negated[k]) os << "!";
            os << f.vars[k];
        }
        if (!f.table.empty()) {
            os << " table";
            for (double x : f.table) os << " " << x;
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace argmine
