#include "argmine/features.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "argmine/corpus.hpp"

namespace argmine {

using nlohmann::json;

double SparseVector::dot(const std::vector<double>& dense) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k) acc += values[k] * dense[indices[k]];
    return acc;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        bool token_char = std::isalnum(c) || c >= 0x80;  // keep multibyte sequences intact
        if (token_char) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

CompatFeatures compat_features(const Document& doc, int a, int b) {
    CompatFeatures f;
    f.bias = 1.0;
    f.adjacency = std::abs(a - b) == 1 ? 1.0 : 0.0;
    f.order = a < b ? 1.0 : 0.0;
    (void)doc;
    return f;
}

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "the", "a",    "an", "of",   "to",   "in",  "and", "or",  "is",  "are",
        "be",  "it",   "this", "that", "for", "on",  "with", "as", "not", "no",
        "i",   "we",   "you", "they", "he",  "she", "was", "were"};
    return words;
}

bool alphabetic(const std::string& token) {
    for (char c : token)
        if (std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

int bucket5(int index) { return std::min(index, 4); }

std::set<std::string> token_set(const std::vector<std::string>& tokens) {
    return {tokens.begin(), tokens.end()};
}

template <typename T>
std::set<T> set_intersect(const std::set<T>& a, const std::set<T>& b) {
    std::set<T> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::inserter(out, out.begin()));
    return out;
}

template <typename T>
std::set<T> set_union(const std::set<T>& a, const std::set<T>& b) {
    std::set<T> out = a;
    out.insert(b.begin(), b.end());
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    const std::size_t u = set_union(a, b).size();
    if (u == 0) return 0.0;
    return static_cast<double>(set_intersect(a, b).size()) / static_cast<double>(u);
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void finish(SparseVector& v) {
    std::vector<std::size_t> order(v.indices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return v.indices[x] < v.indices[y]; });
    SparseVector out;
    out.dim = v.dim;
    for (std::size_t k : order) {
        if (!out.indices.empty() && out.indices.back() == v.indices[k]) {
            out.values.back() += v.values[k];
        } else {
            out.indices.push_back(v.indices[k]);
            out.values.push_back(v.values[k]);
        }
    }
    v = std::move(out);
}

}  // namespace

FeatureTemplate FeatureTemplate::fit(const std::vector<Document>& train_docs, Scheme scheme,
                                     const FeatureConfig& config) {
    if (train_docs.empty()) throw Error("cannot fit feature template on an empty corpus");
    FeatureTemplate t;
    t.scheme_ = scheme;
    t.min_token_freq_ = config.min_token_freq;
    std::map<std::string, std::size_t> freq;
    for (const Document& doc : train_docs)
        for (int a = 0; a < doc.n_props(); ++a)
            for (const std::string& tok : tokenize(doc.span_text(a))) ++freq[tok];
    std::uint32_t next = 0;
    for (const auto& [tok, n] : freq)  // map order = lexicographic, so ids are stable
        if (n >= config.min_token_freq) t.vocab_[tok] = next++;
    if (!config.lexicon_path.empty()) {
        std::ifstream in(config.lexicon_path);
        if (!in) throw Error("cannot open lexicon file: " + config.lexicon_path.string());
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
            if (!line.empty()) t.lexicon_.insert(line);
        }
    }
    return t;
}

std::uint32_t FeatureTemplate::prop_dim() const {
    return vocab_size() + kPropStructDim;
}

std::uint32_t FeatureTemplate::link_dim() const {
    return 2 * vocab_size() + kLinkStructDim;
}

int FeatureTemplate::token_id(const std::string& token) const {
    auto it = vocab_.find(token);
    return it == vocab_.end() ? -1 : static_cast<int>(it->second);
}

std::set<std::string> FeatureTemplate::noun_proxy(const Document& doc, int a) const {
    std::set<std::string> out;
    for (const std::string& tok : tokenize(doc.span_text(a)))
        if (alphabetic(tok) && !stopwords().count(tok)) out.insert(tok);
    return out;
}

SparseVector FeatureTemplate::prop_features(const Document& doc, int a) const {
    if (a < 0 || a >= doc.n_props()) throw Error("prop_features: invalid prop id");
    const std::uint32_t V = vocab_size();
    SparseVector v;
    v.dim = prop_dim();

    const std::vector<std::string> tokens = tokenize(doc.span_text(a));
    for (const std::string& tok : token_set(tokens)) {
        int id = token_id(tok);
        if (id >= 0) v.push(static_cast<std::uint32_t>(id), 1.0);
    }

    const Proposition& p = doc.props[static_cast<std::size_t>(a)];
    const int n = doc.n_props();
    std::size_t punct = 0, digits = 0;
    for (char ch : doc.span_text(a)) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::ispunct(c)) ++punct;
        if (std::isdigit(c)) ++digits;
    }
    std::size_t lex_hits = 0;
    for (const std::string& tok : tokens)
        if (lexicon_.count(tok)) ++lex_hits;

    std::uint32_t s = V;
    v.push(s + 0, 1.0);                                                // bias
    v.push(s + 1, static_cast<double>(tokens.size()));                 // token count
    v.push(s + 2, n > 1 ? static_cast<double>(a) / (n - 1) : 0.0);     // relative position
    v.push(s + 3 + static_cast<std::uint32_t>(bucket5(p.sentence)), 1.0);
    v.push(s + 8 + static_cast<std::uint32_t>(bucket5(p.paragraph)), 1.0);
    if (a == 0) v.push(s + 13, 1.0);
    if (a == n - 1) v.push(s + 14, 1.0);
    v.push(s + 15, static_cast<double>(punct));
    v.push(s + 16, static_cast<double>(digits));
    v.push(s + 17, static_cast<double>(lex_hits));
    finish(v);
    return v;
}

SparseVector FeatureTemplate::link_features(const Document& doc, int a, int b) const {
    if (a == b) throw Error("link_features: src == trg");
    if (a < 0 || a >= doc.n_props() || b < 0 || b >= doc.n_props())
        throw Error("link_features: invalid prop id");
    const std::uint32_t V = vocab_size();
    SparseVector v;
    v.dim = link_dim();

    const std::vector<std::string> src_tokens = tokenize(doc.span_text(a));
    const std::vector<std::string> trg_tokens = tokenize(doc.span_text(b));
    for (const std::string& tok : token_set(src_tokens)) {
        int id = token_id(tok);
        if (id >= 0) v.push(static_cast<std::uint32_t>(id), 1.0);
    }
    for (const std::string& tok : token_set(trg_tokens)) {
        int id = token_id(tok);
        if (id >= 0) v.push(V + static_cast<std::uint32_t>(id), 1.0);
    }

    const Proposition& pa = doc.props[static_cast<std::size_t>(a)];
    const Proposition& pb = doc.props[static_cast<std::size_t>(b)];
    const std::set<std::string> na = noun_proxy(doc, a);
    const std::set<std::string> nb = noun_proxy(doc, b);

    std::uint32_t s = 2 * V;
    v.push(s + 0, 1.0);  // bias
    v.push(s + 1, static_cast<double>(src_tokens.size()));
    v.push(s + 2, static_cast<double>(trg_tokens.size()));
    v.push(s + 3, static_cast<double>(std::abs(a - b) - 1));  // props strictly between
    if (pa.sentence == pb.sentence) v.push(s + 4, 1.0);
    if (pa.paragraph == pb.paragraph) v.push(s + 5, 1.0);
    if (a < b) v.push(s + 6, 1.0);  // order
    v.push(s + 7, static_cast<double>(set_intersect(na, nb).size()));
    v.push(s + 8, jaccard(na, nb));
    finish(v);
    return v;
}

SparseVector FeatureTemplate::second_order_features(const Document& doc, int a, int b,
                                                    int c) const {
    if (a == b || b == c || a == c) throw Error("second_order_features: ids not distinct");
    SparseVector v;
    v.dim = kSecondOrderDim;

    const std::array<int, 3> ids = {a, b, c};
    std::array<const Proposition*, 3> props{};
    std::array<std::set<std::string>, 3> nouns;
    for (int i = 0; i < 3; ++i) {
        int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= doc.n_props()) throw Error("second_order_features: invalid prop id");
        props[static_cast<std::size_t>(i)] = &doc.props[static_cast<std::size_t>(id)];
        nouns[static_cast<std::size_t>(i)] = noun_proxy(doc, id);
    }
    constexpr std::array<std::pair<int, int>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};

    v.push(0, 1.0);  // bias
    // same-sentence: all three, then each pair
    if (props[0]->sentence == props[1]->sentence && props[1]->sentence == props[2]->sentence)
        v.push(1, 1.0);
    for (std::size_t k = 0; k < 3; ++k)
        if (props[static_cast<std::size_t>(pairs[k].first)]->sentence ==
            props[static_cast<std::size_t>(pairs[k].second)]->sentence)
            v.push(static_cast<std::uint32_t>(2 + k), 1.0);

    // one indicator per document-order permutation of (a, b, c)
    constexpr std::array<std::array<int, 3>, 6> perms = {
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (std::size_t k = 0; k < 6; ++k) {
        const auto& perm = perms[k];
        if (ids[static_cast<std::size_t>(perm[0])] < ids[static_cast<std::size_t>(perm[1])] &&
            ids[static_cast<std::size_t>(perm[1])] < ids[static_cast<std::size_t>(perm[2])]) {
            v.push(static_cast<std::uint32_t>(5 + k), 1.0);
            break;
        }
    }

    const std::set<std::string> all3 = set_intersect(set_intersect(nouns[0], nouns[1]), nouns[2]);
    const std::set<std::string> union3 = set_union(set_union(nouns[0], nouns[1]), nouns[2]);

    // jaccard: all three, then pairs
    v.push(11, union3.empty() ? 0.0
                              : static_cast<double>(all3.size()) /
                                    static_cast<double>(union3.size()));
    for (std::size_t k = 0; k < 3; ++k)
        v.push(static_cast<std::uint32_t>(12 + k),
               jaccard(nouns[static_cast<std::size_t>(pairs[k].first)],
                       nouns[static_cast<std::size_t>(pairs[k].second)]));

    // shared-noun presence: all three, then pairs
    if (!all3.empty()) v.push(15, 1.0);
    std::array<std::set<std::string>, 3> pair_shared;
    for (std::size_t k = 0; k < 3; ++k) {
        pair_shared[k] = set_intersect(nouns[static_cast<std::size_t>(pairs[k].first)],
                                       nouns[static_cast<std::size_t>(pairs[k].second)]);
        if (!pair_shared[k].empty()) v.push(static_cast<std::uint32_t>(16 + k), 1.0);
    }

    // nouns shared by all three over each prop's nouns, then over each pair's union
    for (std::size_t i = 0; i < 3; ++i)
        v.push(static_cast<std::uint32_t>(19 + i), ratio(all3.size(), nouns[i].size()));
    for (std::size_t k = 0; k < 3; ++k)
        v.push(static_cast<std::uint32_t>(22 + k),
               ratio(all3.size(), set_union(nouns[static_cast<std::size_t>(pairs[k].first)],
                                            nouns[static_cast<std::size_t>(pairs[k].second)])
                                      .size()));
    // each pair's shared nouns with respect to each prop
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 3; ++i)
            v.push(static_cast<std::uint32_t>(25 + 3 * k + i),
                   ratio(pair_shared[k].size(), nouns[i].size()));
    finish(v);
    return v;
}

std::string FeatureTemplate::to_json() const {
    json j;
    j["format"] = "argmine-template";
    j["version"] = 1;
    j["scheme"] = scheme_name(scheme_);
    j["min_token_freq"] = min_token_freq_;
    j["vocab"] = json::array();
    for (const auto& [tok, id] : vocab_) j["vocab"].push_back({{"t", tok}, {"i", id}});
    j["lexicon"] = json::array();
    for (const std::string& w : lexicon_) j["lexicon"].push_back(w);
    return j.dump();
}

FeatureTemplate FeatureTemplate::from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        if (j.value("format", "") != "argmine-template" || j.value("version", 0) != 1)
            throw Error("unrecognized template format");
        FeatureTemplate t;
        auto s = scheme_from_name(j.at("scheme").get<std::string>());
        if (!s) throw Error("template has unknown scheme");
        t.scheme_ = *s;
        t.min_token_freq_ = j.at("min_token_freq").get<std::size_t>();
        for (const json& e : j.at("vocab"))
            t.vocab_[e.at("t").get<std::string>()] = e.at("i").get<std::uint32_t>();
        for (const json& e : j.at("lexicon")) t.lexicon_.insert(e.get<std::string>());
        return t;
    } catch (const json::exception& e) {
        throw Error("malformed feature template: " + std::string(e.what()));
    }
}

std::uint64_t FeatureTemplate::hash() const {
    // FNV-1a over the canonical serialization
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : to_json()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace argmine
