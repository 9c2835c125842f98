#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "argmine/features.hpp"
#include "test_helpers.hpp"

using namespace argmine;
using namespace argmine::testing;

namespace {

std::map<std::uint32_t, double> as_map(const SparseVector& v) {
    std::map<std::uint32_t, double> out;
    for (std::size_t k = 0; k < v.indices.size(); ++k) out[v.indices[k]] = v.values[k];
    return out;
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits on non-alphanumerics") {
    auto toks = tokenize("No calls, to employers!  2x");
    CHECK(toks == std::vector<std::string>{"no", "calls", "to", "employers", "2x"});
    CHECK(tokenize("...").empty());
}

TEST_CASE("fit_template vocabulary respects the frequency cutoff") {
    Document d1 = tiny_doc(Scheme::Cdcp, {"alpha beta", "beta gamma"}, {3, 4}, {});
    Document d2 = tiny_doc(Scheme::Cdcp, {"delta alpha"}, {3}, {});
    FeatureConfig cfg;
    cfg.min_token_freq = 2;
    auto t = FeatureTemplate::fit({d1, d2}, Scheme::Cdcp, cfg);
    // counts: alpha 2, beta 2, gamma 1, delta 1
    CHECK(t.vocab_size() == 2);
    CHECK(t.token_id("alpha") == 0);
    CHECK(t.token_id("beta") == 1);
    CHECK(t.token_id("gamma") == -1);

    cfg.min_token_freq = 1;
    auto t1 = FeatureTemplate::fit({d1, d2}, Scheme::Cdcp, cfg);
    CHECK(t1.vocab_size() == 4);

    cfg.min_token_freq = 3;
    auto t3 = FeatureTemplate::fit({d1, d2}, Scheme::Cdcp, cfg);
    CHECK(t3.vocab_size() == 0);  // structural features only
    CHECK(t3.prop_dim() == FeatureTemplate::kPropStructDim);
}

TEST_CASE("fit_template rejects an empty corpus") {
    CHECK_THROWS_AS(FeatureTemplate::fit({}, Scheme::Cdcp), Error);
}

TEST_CASE("prop features match hand enumeration on a fixture") {
    // single doc, cutoff 1: vocabulary is all distinct tokens sorted:
    //   allowed=0 be=1 calls=2 employers=3 good=4 is=5 no=6 rule=7 should=8
    //   the=9 this=10 to=11
    Document doc = tiny_doc(Scheme::Cdcp,
                            {"no calls to employers", "this rule should be allowed",
                             "the rule is good"},
                            {1, 4, 3}, {});
    FeatureConfig cfg;
    cfg.min_token_freq = 1;
    auto t = FeatureTemplate::fit({doc}, Scheme::Cdcp, cfg);
    REQUIRE(t.vocab_size() == 12);
    REQUIRE(t.prop_dim() == 12 + FeatureTemplate::kPropStructDim);

    auto v = as_map(t.prop_features(doc, 0));
    const std::uint32_t S = 12;
    std::map<std::uint32_t, double> expected = {
        {2, 1.0},       // calls
        {3, 1.0},       // employers
        {6, 1.0},       // no
        {11, 1.0},      // to
        {S + 0, 1.0},   // bias
        {S + 1, 4.0},   // token count
        {S + 2, 0.0},   // relative position 0/(3-1) -- dropped as exact zero
        {S + 3, 1.0},   // sentence bucket 0
        {S + 8, 1.0},   // paragraph bucket 0
        {S + 13, 1.0},  // first prop
    };
    expected.erase(S + 2);  // zero values are not stored
    CHECK(v == expected);

    // identical inputs give identical vectors
    auto v2 = t.prop_features(doc, 0);
    auto v3 = t.prop_features(doc, 0);
    CHECK(v2.indices == v3.indices);
    CHECK(v2.values == v3.values);
}

TEST_CASE("prop features: punctuation, digits and lexicon hits") {
    Document doc = tiny_doc(Scheme::Cdcp, {"see 12 rules, really!", "see cap"}, {2, 2}, {});
    FeatureConfig cfg;
    cfg.min_token_freq = 1;
    auto tmp_path = std::filesystem::temp_directory_path() / "argmine_test_lexicon.txt";
    {
        std::ofstream out(tmp_path);
        out << "really\nsee\n";
    }
    cfg.lexicon_path = tmp_path;
    auto t = FeatureTemplate::fit({doc}, Scheme::Cdcp, cfg);
    auto v = as_map(t.prop_features(doc, 0));
    const std::uint32_t S = t.vocab_size();
    CHECK(v.at(S + 15) == 2.0);  // ',' and '!'
    CHECK(v.at(S + 16) == 2.0);  // digits '1' '2'
    CHECK(v.at(S + 17) == 2.0);  // lexicon hits: see, really
    std::filesystem::remove(tmp_path);
}

TEST_CASE("link features match hand enumeration") {
    // props: "the cost rises" / "fees rise" / "the cost rises again"
    Document doc =
        tiny_doc(Scheme::Cdcp, {"the cost rises", "fees rise", "the cost rises again"},
                 {2, 3, 3}, {});
    FeatureConfig cfg;
    cfg.min_token_freq = 1;
    auto t = FeatureTemplate::fit({doc}, Scheme::Cdcp, cfg);
    // vocab sorted: again=0 cost=1 fees=2 rise=3 rises=4 the=5
    REQUIRE(t.vocab_size() == 6);
    const std::uint32_t V = 6, S = 2 * V;

    auto v = as_map(t.link_features(doc, 0, 2));
    // src unigrams: cost rises the -> 1, 4, 5; trg: again cost rises the
    std::map<std::uint32_t, double> expected = {
        {1, 1.0},      {4, 1.0},      {5, 1.0},
        {V + 0, 1.0},  {V + 1, 1.0},  {V + 4, 1.0}, {V + 5, 1.0},
        {S + 0, 1.0},                  // bias
        {S + 1, 3.0},                  // src tokens
        {S + 2, 4.0},                  // trg tokens
        {S + 3, 1.0},                  // one prop strictly between
        {S + 5, 1.0},                  // same paragraph
        {S + 6, 1.0},                  // order: src before trg
        {S + 7, 2.0},                  // shared noun proxies: cost, rises
        {S + 8, 2.0 / 3.0},            // jaccard {cost,rises}/{cost,rises,again}
    };
    CHECK(v == expected);

    // disjoint token sets share nothing
    auto d = as_map(t.link_features(doc, 1, 0));
    CHECK(d.count(S + 7) == 0);
    CHECK(d.count(S + 8) == 0);
    CHECK(d.count(S + 6) == 0);  // reversed order
    CHECK(d.count(S + 4) == 0);  // different sentences
    CHECK(d.at(S + 5) == 1.0);   // same paragraph
}

TEST_CASE("link features: adjacent predecessor has zero between-count and order one") {
    Document doc = tiny_doc(Scheme::Cdcp, {"aa bb", "cc dd", "ee ff"}, {3, 3, 3}, {});
    FeatureConfig cfg;
    cfg.min_token_freq = 1;
    auto t = FeatureTemplate::fit({doc}, Scheme::Cdcp, cfg);
    auto v = as_map(t.link_features(doc, 0, 1));
    const std::uint32_t S = 2 * t.vocab_size();
    CHECK(v.count(S + 3) == 0);  // between-count 0 stored as absence
    CHECK(v.at(S + 6) == 1.0);
    CHECK_THROWS_AS(t.link_features(doc, 1, 1), Error);
}

TEST_CASE("second order features: identical and disjoint triples") {
    Document same = tiny_doc(Scheme::Cdcp, {"tax cut", "tax cut", "tax cut"}, {3, 3, 3}, {});
    // force same sentence indices
    same.props[1].sentence = same.props[0].sentence;
    same.props[2].sentence = same.props[0].sentence;
    FeatureConfig cfg;
    cfg.min_token_freq = 1;
    auto t = FeatureTemplate::fit({same}, Scheme::Cdcp, cfg);
    auto v = as_map(t.second_order_features(same, 0, 1, 2));
    CHECK(v.at(1) == 1.0);  // all three same sentence
    CHECK(v.at(2) == 1.0);
    CHECK(v.at(3) == 1.0);
    CHECK(v.at(4) == 1.0);
    CHECK(v.at(5) == 1.0);   // order indicator (0,1,2)
    CHECK(v.at(11) == 1.0);  // jaccard all three
    CHECK(v.at(12) == 1.0);
    CHECK(v.at(13) == 1.0);
    CHECK(v.at(14) == 1.0);
    CHECK(v.at(15) == 1.0);  // shared presence

    Document disj =
        tiny_doc(Scheme::Cdcp, {"alpha one", "beta two", "gamma three"}, {3, 3, 3}, {});
    auto d = as_map(t.second_order_features(disj, 2, 0, 1));
    CHECK(d.count(11) == 0);
    CHECK(d.count(15) == 0);
    // exactly one order indicator; for the triple (2, 0, 1) the document
    // order is p2 < p3 < p1, the fourth permutation in the registry
    int order_hits = 0;
    for (std::uint32_t k = 5; k < 11; ++k) order_hits += static_cast<int>(d.count(k));
    CHECK(order_hits == 1);
    CHECK(d.at(8) == 1.0);
}

TEST_CASE("second order feature dimension is the documented constant") {
    CHECK(FeatureTemplate::kSecondOrderDim == 34);
}

TEST_CASE("second order features reject non-distinct ids") {
    Document doc = tiny_doc(Scheme::Cdcp, {"a1", "b2", "c3"}, {3, 3, 3}, {});
    FeatureConfig cfg;
    cfg.min_token_freq = 1;
    auto t = FeatureTemplate::fit({doc}, Scheme::Cdcp, cfg);
    CHECK_THROWS_AS(t.second_order_features(doc, 0, 0, 2), Error);
}

TEST_CASE("compat features on a three-prop document") {
    Document doc = tiny_doc(Scheme::Cdcp, {"aa", "bb", "cc"}, {3, 3, 3}, {});
    CompatFeatures ab = compat_features(doc, 0, 1);
    CHECK(ab.bias == 1.0);
    CHECK(ab.adjacency == 1.0);
    CHECK(ab.order == 1.0);
    CompatFeatures ac = compat_features(doc, 0, 2);
    CHECK(ac.bias == 1.0);
    CHECK(ac.adjacency == 0.0);
    CHECK(ac.order == 1.0);
    CompatFeatures ca = compat_features(doc, 2, 0);
    CHECK(ca.bias == 1.0);
    CHECK(ca.adjacency == 0.0);
    CHECK(ca.order == 0.0);
}

TEST_CASE("order indicators are antisymmetric for all pairs") {
    Document doc = tiny_doc(Scheme::Cdcp, {"q w", "e r", "t y", "u i"}, {3, 3, 3, 3}, {});
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            if (a == b) continue;
            CHECK(compat_features(doc, a, b).order + compat_features(doc, b, a).order == 1.0);
        }
}

TEST_CASE("feature indices stay within declared dimensions on random docs") {
    std::mt19937 rng(3);
    SynthConfig cfg;
    cfg.n_docs = 12;
    for (Scheme scheme : {Scheme::Cdcp, Scheme::Ukp}) {
        cfg.scheme = scheme;
        auto docs = synth_corpus(cfg);
        auto t = FeatureTemplate::fit(docs, scheme);
        for (const Document& doc : docs) {
            for (int a = 0; a < doc.n_props(); ++a) {
                auto v = t.prop_features(doc, a);
                for (std::size_t k = 0; k < v.indices.size(); ++k) {
                    CHECK(v.indices[k] < t.prop_dim());
                    if (k > 0) CHECK(v.indices[k] > v.indices[k - 1]);
                }
            }
            auto cands = candidate_links(doc);
            for (const LinkPair& l : cands) {
                auto v = t.link_features(doc, l.first, l.second);
                for (std::size_t k = 0; k < v.indices.size(); ++k) {
                    CHECK(v.indices[k] < t.link_dim());
                    if (k > 0) CHECK(v.indices[k] > v.indices[k - 1]);
                }
                // jaccard in [0, 1]
                auto m = as_map(v);
                auto it = m.find(2 * t.vocab_size() + 8);
                if (it != m.end()) {
                    CHECK(it->second >= 0.0);
                    CHECK(it->second <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("jaccard of a prop with its duplicate is 1") {
    Document doc = tiny_doc(Scheme::Cdcp, {"solar panels work", "solar panels work"}, {2, 2}, {});
    FeatureConfig cfg;
    cfg.min_token_freq = 1;
    auto t = FeatureTemplate::fit({doc}, Scheme::Cdcp, cfg);
    auto v = as_map(t.link_features(doc, 0, 1));
    CHECK(v.at(2 * t.vocab_size() + 8) == 1.0);
}

TEST_CASE("template serialization round-trips") {
    Document doc = tiny_doc(Scheme::Ukp, {"claims need premises", "premises support claims"},
                            {1, 2}, {}, {0, 0});
    auto t = FeatureTemplate::fit({doc, doc}, Scheme::Ukp);
    auto t2 = FeatureTemplate::from_json(t.to_json());
    CHECK(t2.vocab_size() == t.vocab_size());
    CHECK(t2.scheme() == t.scheme());
    CHECK(t2.hash() == t.hash());
    auto v1 = t.prop_features(doc, 1);
    auto v2 = t2.prop_features(doc, 1);
    CHECK(v1.indices == v2.indices);
    CHECK(v1.values == v2.values);
}
