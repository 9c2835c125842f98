#include "argmine/synth.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "argmine/corpus.hpp"

namespace argmine {

namespace {

// pairs (source type, target type) the planted Cdcp rule links; all respect
// the objectivity order so strict inference can recover them
constexpr std::pair<int, int> kCdcpRulePairs[] = {
    {1, 4},  // testimony -> policy
    {2, 3},  // fact -> value
    {1, 3},  // testimony -> value
    {3, 4},  // value -> policy
};

bool cdcp_rule(int src_type, int trg_type) {
    for (auto [s, t] : kCdcpRulePairs)
        if (s == src_type && t == trg_type) return true;
    return false;
}

std::string type_token(Scheme scheme, int label) {
    return std::string("mark_") + label_name(scheme, label);
}

struct DocBuilder {
    std::vector<std::vector<std::string>> prop_tokens;
    std::vector<int> sentence, paragraph;

    Document finish(Scheme scheme, std::string doc_id, const std::vector<int>& types,
                    const std::set<LinkPair>& links) const {
        Document doc;
        doc.doc_id = std::move(doc_id);
        doc.scheme = scheme;
        std::ostringstream text;
        for (std::size_t a = 0; a < prop_tokens.size(); ++a) {
            if (a > 0) text << " ";
            Proposition p;
            p.start = static_cast<int>(text.str().size());
            for (std::size_t k = 0; k < prop_tokens[a].size(); ++k) {
                if (k > 0) text << " ";
                text << prop_tokens[a][k];
            }
            p.end = static_cast<int>(text.str().size());
            text << ".";
            p.gold_type = types[a];
            p.sentence = sentence[a];
            p.paragraph = paragraph[a];
            doc.props.push_back(p);
        }
        doc.text = text.str();
        doc.gold_links = links;
        return doc;
    }
};

std::vector<std::string> sample_tokens(std::mt19937& rng, Scheme scheme, int label,
                                       double noise) {
    std::uniform_int_distribution<int> len_dist(4, 8);
    std::uniform_int_distribution<int> pool_dist(0, 5);
    std::uniform_int_distribution<int> shared_dist(0, 29);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<std::string> toks;
    int len = len_dist(rng);
    for (int k = 0; k < len; ++k) {
        if (coin(rng) < noise)
            toks.push_back("common" + std::to_string(shared_dist(rng)));
        else
            toks.push_back(type_token(scheme, label) + "_" + std::to_string(pool_dist(rng)));
    }
    return toks;
}

Document planted_cdcp(std::mt19937& rng, const SynthConfig& cfg, std::size_t index) {
    std::uniform_int_distribution<int> n_dist(cfg.min_props, cfg.max_props);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::discrete_distribution<int> type_prior({0.05, 0.2, 0.2, 0.35, 0.2});
    const int n = n_dist(rng);

    DocBuilder b;
    std::vector<int> types;
    for (int a = 0; a < n; ++a) {
        int t = type_prior(rng);
        types.push_back(t);
        b.prop_tokens.push_back(sample_tokens(rng, Scheme::Cdcp, t, cfg.type_noise));
        b.sentence.push_back(a);
        b.paragraph.push_back(a / 3);
    }
    std::set<LinkPair> links;
    for (int a = 0; a < n; ++a)
        for (int t = a + 1; t < n; ++t) {
            bool compatible = cdcp_rule(types[static_cast<std::size_t>(a)],
                                        types[static_cast<std::size_t>(t)]) &&
                              t - a <= 2;
            double rate = compatible ? cfg.link_on_rate : cfg.link_off_rate;
            if (coin(rng) < rate) links.emplace(a, t);
        }
    links = transitive_closure(links);
    return b.finish(Scheme::Cdcp, "synth-cdcp-" + std::to_string(index), types, links);
}

Document planted_ukp(std::mt19937& rng, const SynthConfig& cfg, std::size_t index) {
    std::uniform_int_distribution<int> n_para_dist(2, 3);
    std::uniform_int_distribution<int> para_size_dist(2, 4);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const int n_paras = n_para_dist(rng);

    DocBuilder b;
    std::vector<int> types;
    std::set<LinkPair> links;
    int id = 0;
    for (int para = 0; para < n_paras; ++para) {
        const int m = para_size_dist(rng);
        int first = id;
        for (int k = 0; k < m; ++k, ++id) {
            int t;
            if (k == 0)
                t = coin(rng) < 0.3 ? 0 : 1;  // paragraph head: major claim or claim
            else
                t = coin(rng) < 0.2 ? 1 : kUkpPremise;
            types.push_back(t);
            b.prop_tokens.push_back(sample_tokens(rng, Scheme::Ukp, t, cfg.type_noise));
            b.sentence.push_back(id);
            b.paragraph.push_back(para);
        }
        // premises support an earlier prop in the paragraph, preferring the
        // nearest claim; some stay standalone
        for (int a = first + 1; a < id; ++a) {
            if (types[static_cast<std::size_t>(a)] != kUkpPremise) continue;
            if (coin(rng) >= cfg.link_on_rate) continue;
            int target = -1;
            for (int t = a - 1; t >= first; --t)
                if (types[static_cast<std::size_t>(t)] != kUkpPremise) {
                    target = t;
                    break;
                }
            if (target < 0 || coin(rng) < 0.3) target = a - 1;  // chain onto the previous prop
            links.emplace(a, target);
        }
    }
    return b.finish(Scheme::Ukp, "synth-ukp-" + std::to_string(index), types, links);
}

Document separable_doc(std::mt19937& rng, const SynthConfig& cfg, Scheme scheme,
                       std::size_t index) {
    std::uniform_int_distribution<int> n_dist(cfg.min_props, cfg.max_props);
    std::uniform_int_distribution<int> type_dist(0, num_labels(scheme) - 1);
    std::uniform_int_distribution<int> filler_dist(0, 9);
    std::uniform_int_distribution<int> n_filler_dist(2, 4);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const int n = n_dist(rng);

    DocBuilder b;
    std::vector<int> types;
    std::vector<int> role(static_cast<std::size_t>(n), 0);  // 0 plain, 1 source, 2 target
    for (int a = 0; a < n; ++a) {
        int t = type_dist(rng);
        types.push_back(t);
        std::vector<std::string> toks = {"tmark_" + std::string(label_name(scheme, t))};
        double r = coin(rng);
        if (r < 0.35) {
            role[static_cast<std::size_t>(a)] = 1;
            toks.push_back("linksrc");
        } else if (r < 0.7) {
            role[static_cast<std::size_t>(a)] = 2;
            toks.push_back("linkdst");
        }
        int nf = n_filler_dist(rng);
        for (int k = 0; k < nf; ++k) toks.push_back("filler" + std::to_string(filler_dist(rng)));
        std::shuffle(toks.begin(), toks.end(), rng);
        b.prop_tokens.push_back(toks);
        b.sentence.push_back(a);
        b.paragraph.push_back(scheme == Scheme::Ukp ? 0 : a / 3);
    }
    // a link iff source-marked before target-marked; sources and targets are
    // disjoint so the set is transitively closed and antisymmetric by
    // construction
    std::set<LinkPair> links;
    for (int a = 0; a < n; ++a)
        for (int t = a + 1; t < n; ++t)
            if (role[static_cast<std::size_t>(a)] == 1 && role[static_cast<std::size_t>(t)] == 2)
                links.emplace(a, t);
    if (scheme == Scheme::Ukp) {
        // keep at most one outgoing link per prop: earliest target wins
        std::set<LinkPair> pruned;
        std::set<int> used;
        for (const LinkPair& l : links)
            if (used.insert(l.first).second) pruned.insert(l);
        links = pruned;
    }
    return b.finish(scheme, std::string("synth-sep-") + scheme_name(scheme) + "-" +
                                std::to_string(index),
                    types, links);
}

}  // namespace

std::vector<Document> synth_corpus(const SynthConfig& cfg) {
    std::mt19937 rng(cfg.seed);
    std::vector<Document> docs;
    docs.reserve(cfg.n_docs);
    for (std::size_t i = 0; i < cfg.n_docs; ++i) {
        Document doc;
        if (cfg.preset == SynthPreset::Separable)
            doc = separable_doc(rng, cfg, cfg.scheme, i);
        else
            doc = cfg.scheme == Scheme::Cdcp ? planted_cdcp(rng, cfg, i)
                                             : planted_ukp(rng, cfg, i);
        validate_document(doc);
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace argmine
