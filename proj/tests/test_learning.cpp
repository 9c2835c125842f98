#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "argmine/corpus.hpp"
#include "argmine/eval.hpp"
#include "argmine/exact.hpp"
#include "argmine/learning.hpp"
#include "argmine/synth.hpp"
#include "test_helpers.hpp"

using namespace argmine;
using namespace argmine::testing;

namespace {

std::vector<CompiledDoc> compile_all(const std::vector<Document>& docs,
                                     const FeatureExtractor& ex) {
    std::vector<CompiledDoc> out;
    for (const Document& d : docs) out.push_back(compile_doc(d, ex));
    return out;
}

Assignment random_assignment(const FactorGraph& g, std::mt19937& rng) {
    Assignment y(g.n_variables());
    for (std::size_t v = 0; v < y.size(); ++v)
        y[v] = std::uniform_int_distribution<int>(0, g.variables[v].arity - 1)(rng);
    return y;
}

}  // namespace

TEST_CASE("score of any assignment equals the dot product with its feature map") {
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        Scheme scheme = trial % 2 == 0 ? Scheme::Cdcp : Scheme::Ukp;
        SynthConfig scfg;
        scfg.scheme = scheme;
        scfg.n_docs = 1;
        scfg.seed = static_cast<unsigned>(500 + trial);
        Document doc = synth_corpus(scfg)[0];
        FeatureConfig fcfg;
        fcfg.min_token_freq = 1;
        auto tmpl = FeatureTemplate::fit({doc}, scheme, fcfg);
        auto cd = compile_doc(doc, tmpl);
        auto layout = WeightLayout::make(scheme, tmpl);
        auto weights = random_weights(layout, rng);
        // full variant: no strict masks, so the identity holds for every y
        auto built = build_graph(cd, weights, VariantConfig::make(Variant::Full));
        for (int rep = 0; rep < 3; ++rep) {
            Assignment y = random_assignment(built.graph, rng);
            auto psi = joint_feature_map(cd, built.graph, layout, y);
            double dot = 0.0;
            for (std::size_t k = 0; k < layout.total; ++k) dot += weights.w[k] * psi[k];
            double score = score_assignment(built.graph, built.potentials, y).score;
            CHECK(dot == doctest::Approx(score).epsilon(1e-9));
        }
    }
}

TEST_CASE("feature map of an integral relaxed solution equals the hard map") {
    std::mt19937 rng(31);
    SynthConfig scfg;
    scfg.n_docs = 1;
    Document doc = synth_corpus(scfg)[0];
    FeatureConfig fcfg;
    fcfg.min_token_freq = 1;
    auto tmpl = FeatureTemplate::fit({doc}, Scheme::Cdcp, fcfg);
    auto cd = compile_doc(doc, tmpl);
    auto layout = WeightLayout::make(Scheme::Cdcp, tmpl);
    auto weights = random_weights(layout, rng);
    auto built = build_graph(cd, weights, VariantConfig::make(Variant::Full));
    Assignment y = gold_assignment(built.graph, doc);

    // hand-build the integral relaxed solution at y
    RelaxedSolution sol;
    sol.marginals.resize(built.graph.n_variables());
    for (std::size_t v = 0; v < built.graph.n_variables(); ++v) {
        sol.marginals[v].assign(static_cast<std::size_t>(built.graph.variables[v].arity), 0.0);
        sol.marginals[v][static_cast<std::size_t>(y[v])] = 1.0;
    }
    sol.factor_locals.resize(built.graph.factors.size());
    for (std::size_t fi = 0; fi < built.graph.factors.size(); ++fi) {
        const Factor& f = built.graph.factors[fi];
        std::vector<int> cfg;
        for (int var : f.vars) cfg.push_back(y[static_cast<std::size_t>(var)]);
        sol.factor_locals[fi].configs = {cfg};
        sol.factor_locals[fi].weights = {1.0};
    }
    auto hard = joint_feature_map(cd, built.graph, layout, y);
    auto relaxed = joint_feature_map(cd, built.graph, layout, sol);
    REQUIRE(hard.size() == relaxed.size());
    for (std::size_t k = 0; k < hard.size(); ++k)
        CHECK(hard[k] == doctest::Approx(relaxed[k]).epsilon(1e-12));
}

TEST_CASE("cost augmentation adds per-state costs and nothing else") {
    SynthConfig scfg;
    scfg.n_docs = 8;
    Document doc;
    for (const Document& d : synth_corpus(scfg))
        if (!d.gold_links.empty()) doc = d;
    REQUIRE(!doc.gold_links.empty());
    FeatureConfig fcfg;
    fcfg.min_token_freq = 1;
    auto tmpl = FeatureTemplate::fit({doc}, Scheme::Cdcp, fcfg);
    auto cd = compile_doc(doc, tmpl);
    auto weights = ModelWeights::zeros(Scheme::Cdcp, tmpl);
    auto built = build_graph(cd, weights, VariantConfig::make(Variant::Full));
    Assignment gold = gold_assignment(built.graph, doc);

    SUBCASE("zero costs are the identity") {
        Potentials before = built.potentials;
        CostConfig zero;
        zero.default_cost = 0.0;
        zero.false_negative_link_cost = 0.0;
        cost_augment(built.potentials, built.graph, gold, zero);
        for (std::size_t v = 0; v < built.graph.n_variables(); ++v)
            CHECK(built.potentials.unary[v] == before.unary[v]);
    }

    SUBCASE("gold-on links charge the fn cost on their off state") {
        CostConfig cost;
        cost.false_negative_link_cost = 32.0;
        Potentials before = built.potentials;
        cost_augment(built.potentials, built.graph, gold, cost);
        bool saw_gold_link = false;
        for (std::size_t v = 0; v < built.graph.n_variables(); ++v) {
            const Variable& var = built.graph.variables[v];
            for (int s = 0; s < var.arity; ++s) {
                double delta = built.potentials.unary[v][static_cast<std::size_t>(s)] -
                               before.unary[v][static_cast<std::size_t>(s)];
                if (var.kind == Variable::Kind::RootLink || s == gold[v])
                    CHECK(delta == 0.0);
                else if (var.kind == Variable::Kind::Link && gold[v] == 1) {
                    CHECK(delta == 32.0);
                    saw_gold_link = true;
                } else {
                    CHECK(delta == 1.0);
                }
            }
        }
        CHECK(saw_gold_link);
    }
}

TEST_CASE("fn link cost follows the class imbalance of the training split") {
    // counts mirroring a 43k-pair / 1300-positive split:
    // 204 docs x 15 props = 42840 pairs, plus 13-prop and two 2-prop docs
    std::vector<Document> corpus;
    std::size_t pairs = 0, links = 0;
    auto push_doc = [&](int n, std::size_t n_links) {
        std::vector<std::string> texts;
        std::vector<int> types;
        for (int a = 0; a < n; ++a) {
            texts.push_back("p" + std::to_string(a));
            types.push_back(3);
        }
        std::set<LinkPair> ls;
        for (int a = 0; a < n && ls.size() < n_links; ++a)
            for (int b = 0; b < n && ls.size() < n_links; ++b)
                if (a != b) ls.emplace(a, b);
        Document d = tiny_doc(Scheme::Cdcp, texts, types, ls);
        pairs += static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1);
        links += ls.size();
        corpus.push_back(std::move(d));
    };
    for (int i = 0; i < 204; ++i) push_doc(15, i < 130 ? 10 : 0);
    push_doc(13, 0);
    push_doc(2, 0);
    push_doc(2, 0);
    REQUIRE(pairs == 43000);
    REQUIRE(links == 1300);
    CostConfig cost = CostConfig::from_corpus(corpus);
    CHECK(cost.false_negative_link_cost ==
          doctest::Approx((43000.0 - 1300.0) / 1300.0).epsilon(1e-12));
    CHECK(cost.false_negative_link_cost == doctest::Approx(32.1).epsilon(0.002));
    CostConfig half = CostConfig::from_corpus(corpus, 0.5);
    CHECK(half.false_negative_link_cost ==
          doctest::Approx(0.5 * (43000.0 - 1300.0) / 1300.0).epsilon(1e-12));
    // small enough beta falls back to the floor of 1
    CHECK(CostConfig::from_corpus(corpus, 1e-6).false_negative_link_cost == 1.0);
}

TEST_CASE("structured hinge with zero weights on a single prop is the unit cost") {
    Document doc = tiny_doc(Scheme::Cdcp, {"only one proposition"}, {2}, {});
    FeatureConfig fcfg;
    fcfg.min_token_freq = 1;
    auto tmpl = FeatureTemplate::fit({doc}, Scheme::Cdcp, fcfg);
    auto cd = compile_doc(doc, tmpl);
    auto weights = ModelWeights::zeros(Scheme::Cdcp, tmpl);
    CostConfig cost;
    auto r = structured_hinge(weights, cd, cost, VariantConfig::make(Variant::Full), {});
    CHECK(r.loss == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("structured hinge is zero when gold wins by more than any cost") {
    Document doc = tiny_doc(Scheme::Cdcp, {"alpha bravo"}, {2}, {});
    FeatureConfig fcfg;
    fcfg.min_token_freq = 1;
    auto tmpl = FeatureTemplate::fit({doc}, Scheme::Cdcp, fcfg);
    auto cd = compile_doc(doc, tmpl);
    auto weights = ModelWeights::zeros(Scheme::Cdcp, tmpl);
    // push the gold type's bias weight far above everything else
    weights.w[weights.layout.prop_index(2, tmpl.vocab_size() + 0)] = 100.0;
    auto r = structured_hinge(weights, cd, {}, VariantConfig::make(Variant::Full), {});
    CHECK(r.loss == doctest::Approx(0.0));
}

TEST_CASE("structured hinge matches the exact cost-augmented map on small docs") {
    std::mt19937 rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        SynthConfig scfg;
        scfg.n_docs = 1;
        scfg.min_props = 2;
        scfg.max_props = 3;
        scfg.seed = static_cast<unsigned>(900 + trial);
        Document doc = synth_corpus(scfg)[0];
        FeatureConfig fcfg;
        fcfg.min_token_freq = 1;
        auto tmpl = FeatureTemplate::fit({doc}, Scheme::Cdcp, fcfg);
        auto cd = compile_doc(doc, tmpl);
        auto weights = random_weights(WeightLayout::make(Scheme::Cdcp, tmpl), rng, 0.2);
        CostConfig cost;
        cost.false_negative_link_cost = 3.0;
        VariantConfig variant = VariantConfig::make(Variant::Full);
        auto r = structured_hinge(weights, cd, cost, variant, {});

        auto built = build_graph(cd, weights, variant);
        Assignment gold = gold_assignment(built.graph, doc);
        Potentials augmented = built.potentials;
        cost_augment(augmented, built.graph, gold, cost);
        auto exact = brute_force_map(built.graph, augmented);
        double gold_score = score_assignment(built.graph, built.potentials, gold).score;
        double exact_loss = std::max(0.0, exact.score - gold_score);
        if (r.solution.integral())
            CHECK(r.loss == doctest::Approx(exact_loss).epsilon(1e-6));
        else
            CHECK(r.loss >= exact_loss - 1e-6);
    }
}

TEST_CASE("bcfw with zero epochs returns zero weights") {
    SynthConfig scfg;
    scfg.n_docs = 4;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    TrainConfig cfg;
    cfg.epochs = 0;
    auto model = bcfw_train(cds, cfg, CostConfig::from_corpus(docs));
    for (double w : model.weights.w) CHECK(w == 0.0);
}

TEST_CASE("bcfw dual objective never decreases along the step trace") {
    SynthConfig scfg;
    scfg.n_docs = 25;
    scfg.seed = 11;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.C = 0.1;
    auto model = bcfw_train(cds, cfg, CostConfig::from_corpus(docs));
    REQUIRE(model.trace.step_duals.size() == 25 * 6);
    for (std::size_t k = 1; k < model.trace.step_duals.size(); ++k)
        CHECK(model.trace.step_duals[k] >= model.trace.step_duals[k - 1] - 1e-9);
    // the accumulated pass gap shrinks as training progresses
    CHECK(model.trace.epochs.back().gap_estimate < model.trace.epochs.front().gap_estimate);
}

TEST_CASE("bcfw training is bit-reproducible for a fixed seed") {
    SynthConfig scfg;
    scfg.n_docs = 10;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 99;
    auto m1 = bcfw_train(cds, cfg, CostConfig::from_corpus(docs));
    auto m2 = bcfw_train(cds, cfg, CostConfig::from_corpus(docs));
    CHECK(m1.weights.w == m2.weights.w);
}

TEST_CASE("bcfw fits the separable toy corpus to perfect training f1") {
    SynthConfig scfg;
    scfg.preset = SynthPreset::Separable;
    scfg.n_docs = 60;
    scfg.seed = 3;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.C = 3.0;
    cfg.average_weights = false;  // the final iterate interpolates separable data
    auto model = bcfw_train(cds, cfg, CostConfig::from_corpus(docs, 0.1));
    auto preds = predict_corpus_serial(cds, model.weights, model.variant, PredictMode::Inference);
    auto report = evaluate(docs, preds);
    CHECK(report.link.f1 == doctest::Approx(1.0));
    CHECK(report.prop_macro_f1 == doctest::Approx(1.0));
}

TEST_CASE("baseline reaches perfect train accuracy on the separable corpus") {
    SynthConfig scfg;
    scfg.preset = SynthPreset::Separable;
    scfg.n_docs = 60;
    scfg.seed = 4;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.C = 1.0;
    cfg.average_weights = false;
    auto model = baseline_train(cds, cfg, CostConfig::from_corpus(docs, 0.1));
    CHECK(model.weights.baseline);
    auto preds = predict_corpus_serial(cds, model.weights, model.variant, PredictMode::Round);
    auto report = evaluate(docs, preds);
    CHECK(report.link.f1 == doctest::Approx(1.0));
    CHECK(report.prop_macro_f1 == doctest::Approx(1.0));
}

TEST_CASE("baseline with zero epochs rounds everything to the first state") {
    SynthConfig scfg;
    scfg.n_docs = 5;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    TrainConfig cfg;
    cfg.epochs = 0;
    auto model = baseline_train(cds, cfg, CostConfig::from_corpus(docs));
    auto preds = predict_corpus_serial(cds, model.weights, model.variant, PredictMode::Round);
    for (const Prediction& p : preds) {
        CHECK(p.links.empty());
        for (int t : p.types) CHECK(t == 0);
    }
}

TEST_CASE("class weighting raises positive-link recall on an imbalanced corpus") {
    SynthConfig scfg;
    scfg.n_docs = 40;
    scfg.seed = 21;
    scfg.link_on_rate = 0.5;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.C = 0.1;
    CostConfig unweighted;  // fn cost 1
    CostConfig weighted = CostConfig::from_corpus(docs);
    REQUIRE(weighted.false_negative_link_cost > 2.0);
    auto m_plain = baseline_train(cds, cfg, unweighted);
    auto m_weighted = baseline_train(cds, cfg, weighted);
    auto p_plain =
        predict_corpus_serial(cds, m_plain.weights, m_plain.variant, PredictMode::Round);
    auto p_weighted =
        predict_corpus_serial(cds, m_weighted.weights, m_weighted.variant, PredictMode::Round);
    auto r_plain = evaluate(docs, p_plain);
    auto r_weighted = evaluate(docs, p_weighted);
    CHECK(r_weighted.link.recall >= r_plain.link.recall);
}

TEST_CASE("round-mode prediction with zero potentials picks the first states") {
    SynthConfig scfg;
    scfg.n_docs = 1;
    Document doc = synth_corpus(scfg)[0];
    auto tmpl = FeatureTemplate::fit({doc}, Scheme::Cdcp);
    auto cd = compile_doc(doc, tmpl);
    auto weights = ModelWeights::zeros(Scheme::Cdcp, tmpl);
    auto pred = predict(cd, weights, VariantConfig::make(Variant::Full), PredictMode::Round);
    CHECK(pred.links.empty());
    for (int t : pred.types) CHECK(t == 0);
}

TEST_CASE("inference untangles cycle-preferring baseline potentials into a forest") {
    Document doc = tiny_doc(Scheme::Ukp, {"pa xx", "pb yy", "pc zz"}, {2, 2, 2}, {}, {0, 0, 0});
    FeatureConfig fcfg;
    fcfg.min_token_freq = 1;
    auto tmpl = FeatureTemplate::fit({doc}, Scheme::Ukp, fcfg);
    auto cd = compile_doc(doc, tmpl);
    auto weights = ModelWeights::zeros(Scheme::Ukp, tmpl);
    weights.baseline = true;
    auto built =
        build_graph(cd, weights, VariantConfig::make(Variant::Full).baseline_restricted());
    // every link wants to be on; satisfying them all would close a cycle
    for (int i = 0; i < built.graph.n_links; ++i)
        built.potentials.unary[static_cast<std::size_t>(built.graph.link_var(i))] = {0.0, 2.0};
    auto exact = brute_force_map(built.graph, built.potentials);
    auto res = branch_and_bound(built.graph, built.potentials);
    CHECK(res.score == doctest::Approx(exact.score).epsilon(1e-9));
    CHECK(is_feasible(built.graph, res.assignment));
    std::set<LinkPair> links;
    for (int i = 0; i < built.graph.n_links; ++i)
        if (res.assignment[static_cast<std::size_t>(built.graph.link_var(i))] == 1)
            links.insert(cd.candidates[static_cast<std::size_t>(i)]);
    CHECK(links.size() == 2);  // a third link would close the cycle
}

TEST_CASE("strict cdcp inference never links less objective to more objective") {
    std::mt19937 rng(55);
    SynthConfig scfg;
    scfg.n_docs = 8;
    scfg.seed = 31;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    auto weights = random_weights(WeightLayout::make(Scheme::Cdcp, tmpl), rng, 0.4);
    auto preds = predict_corpus_serial(cds, weights, VariantConfig::make(Variant::Strict),
                                       PredictMode::Inference);
    for (std::size_t d = 0; d < preds.size(); ++d)
        for (const LinkPair& l : preds[d].links) {
            int src = preds[d].types[static_cast<std::size_t>(l.first)];
            int trg = preds[d].types[static_cast<std::size_t>(l.second)];
            CHECK(objectivity_rank(src) >= objectivity_rank(trg));
        }
}

TEST_CASE("mask-infeasible preferences decode to the best feasible assignment") {
    // unaries want a policy -> reference link, which the strict mask forbids;
    // with type preferences dominating, the optimum keeps the link off
    Document doc = tiny_doc(Scheme::Cdcp, {"px qx", "ry sy"}, {4, 0}, {});
    FeatureConfig fcfg;
    fcfg.min_token_freq = 1;
    auto tmpl = FeatureTemplate::fit({doc}, Scheme::Cdcp, fcfg);
    auto cd = compile_doc(doc, tmpl);
    auto weights = ModelWeights::zeros(Scheme::Cdcp, tmpl);
    auto built = build_graph(cd, weights, VariantConfig::make(Variant::Strict));
    built.potentials.unary[0] = {0, 0, 0, 0, 100};  // prop 0: policy
    built.potentials.unary[1] = {100, 0, 0, 0, 0};  // prop 1: reference
    int lv01 = built.graph.link_var(cd.candidate_index.at({0, 1}));
    built.potentials.unary[static_cast<std::size_t>(lv01)] = {0.0, 5.0};

    auto exact = brute_force_map(built.graph, built.potentials);
    auto res = branch_and_bound(built.graph, built.potentials);
    CHECK(res.score == doctest::Approx(exact.score).epsilon(1e-9));
    CHECK(res.assignment[0] == 4);
    CHECK(res.assignment[1] == 0);
    CHECK(res.assignment[static_cast<std::size_t>(lv01)] == 0);  // masked link stays off
    CHECK(res.score == doctest::Approx(200.0));
}

TEST_CASE("strict masks bind baselines through parameterless factors") {
    // a baseline model has no compat weights, yet strict inference still
    // forbids objectivity-violating links via zero-table masked factors
    std::mt19937 rng(91);
    SynthConfig scfg;
    scfg.n_docs = 6;
    scfg.seed = 41;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    auto weights = ModelWeights::zeros(Scheme::Cdcp, tmpl);
    weights.baseline = true;
    std::normal_distribution<double> gauss(0.0, 0.5);
    // random unary blocks only, as a trained baseline would have
    for (std::size_t k = 0; k < weights.layout.compat_offset; ++k) weights.w[k] = gauss(rng);
    auto preds = predict_corpus_serial(cds, weights, VariantConfig::make(Variant::Strict),
                                       PredictMode::Inference);
    for (std::size_t d = 0; d < preds.size(); ++d) {
        for (const LinkPair& l : preds[d].links) {
            int src = preds[d].types[static_cast<std::size_t>(l.first)];
            int trg = preds[d].types[static_cast<std::size_t>(l.second)];
            CHECK(objectivity_rank(src) >= objectivity_rank(trg));
        }
        // transitivity and antisymmetry hold as well
        for (const LinkPair& l : preds[d].links) {
            CHECK(preds[d].links.count({l.second, l.first}) == 0);
            for (const LinkPair& m : preds[d].links)
                if (m.first == l.second) CHECK(preds[d].links.count({l.first, m.second}) == 1);
        }
    }
}

TEST_CASE("parallel prediction equals the serial reference") {
    std::mt19937 rng(66);
    SynthConfig scfg;
    scfg.n_docs = 16;
    scfg.seed = 77;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    auto cds = compile_all(docs, tmpl);
    auto weights = random_weights(WeightLayout::make(Scheme::Cdcp, tmpl), rng, 0.3);
    for (PredictMode mode : {PredictMode::Round, PredictMode::Inference}) {
        auto serial =
            predict_corpus_serial(cds, weights, VariantConfig::make(Variant::Full), mode);
        auto parallel =
            predict_corpus(cds, weights, VariantConfig::make(Variant::Full), mode, {}, 2);
        REQUIRE(serial.size() == parallel.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            CHECK(serial[i].types == parallel[i].types);
            CHECK(serial[i].links == parallel[i].links);
        }
    }
}
