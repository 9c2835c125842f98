#include "argmine/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

namespace argmine {

using nlohmann::json;

const char* scheme_name(Scheme s) { return s == Scheme::Cdcp ? "cdcp" : "ukp"; }

std::optional<Scheme> scheme_from_name(std::string_view name) {
    if (name == "cdcp") return Scheme::Cdcp;
    if (name == "ukp") return Scheme::Ukp;
    return std::nullopt;
}

namespace {
constexpr const char* kCdcpLabels[] = {"reference", "testimony", "fact", "value", "policy"};
constexpr const char* kUkpLabels[] = {"major_claim", "claim", "premise"};
}  // namespace

const char* label_name(Scheme s, int label) {
    return s == Scheme::Cdcp ? kCdcpLabels[label] : kUkpLabels[label];
}

int label_from_name(Scheme s, std::string_view name) {
    for (int i = 0; i < num_labels(s); ++i)
        if (name == label_name(s, i)) return i;
    return -1;
}

std::string Document::span_text(int prop) const {
    const Proposition& p = props.at(static_cast<std::size_t>(prop));
    return text.substr(static_cast<std::size_t>(p.start),
                       static_cast<std::size_t>(p.end - p.start));
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, std::size_t line,
                const LoadOptions& opts) {
    if (!opts.strict) return;
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) known = true;
        if (!known) throw ParseError(line, "unknown key '" + item.key() + "'");
    }
}

Document parse_document(const json& j, Scheme scheme, std::size_t line, const LoadOptions& opts) {
    check_keys(j, {"doc_id", "text", "scheme", "props", "links"}, line, opts);
    Document doc;
    doc.doc_id = j.at("doc_id").get<std::string>();
    doc.text = j.at("text").get<std::string>();
    auto s = scheme_from_name(j.at("scheme").get<std::string>());
    if (!s) throw ParseError(line, "unknown scheme value");
    if (*s != scheme) throw ParseError(line, "document scheme does not match requested scheme");
    doc.scheme = *s;
    for (const json& jp : j.at("props")) {
        check_keys(jp, {"start", "end", "type", "sentence", "paragraph"}, line, opts);
        Proposition p;
        p.start = jp.at("start").get<int>();
        p.end = jp.at("end").get<int>();
        if (jp.contains("type") && !jp.at("type").is_null()) {
            int label = label_from_name(doc.scheme, jp.at("type").get<std::string>());
            if (label < 0) throw ParseError(line, "unknown prop type '" +
                                                      jp.at("type").get<std::string>() + "'");
            p.gold_type = label;
        }
        p.sentence = jp.at("sentence").get<int>();
        p.paragraph = jp.at("paragraph").get<int>();
        doc.props.push_back(p);
    }
    for (const json& jl : j.at("links")) {
        check_keys(jl, {"src", "trg"}, line, opts);
        doc.gold_links.emplace(jl.at("src").get<int>(), jl.at("trg").get<int>());
    }
    return doc;
}

json document_to_json(const Document& doc) {
    json j;
    j["doc_id"] = doc.doc_id;
    j["text"] = doc.text;
    j["scheme"] = scheme_name(doc.scheme);
    j["props"] = json::array();
    for (const Proposition& p : doc.props) {
        json jp;
        jp["start"] = p.start;
        jp["end"] = p.end;
        jp["type"] = p.gold_type ? json(label_name(doc.scheme, *p.gold_type)) : json(nullptr);
        jp["sentence"] = p.sentence;
        jp["paragraph"] = p.paragraph;
        j["props"].push_back(jp);
    }
    j["links"] = json::array();
    for (const LinkPair& l : doc.gold_links) j["links"].push_back({{"src", l.first}, {"trg", l.second}});
    return j;
}

}  // namespace

std::vector<Document> load_corpus(std::istream& in, Scheme scheme, const LoadOptions& opts) {
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        Document doc;
        try {
            doc = parse_document(j, scheme, line_no, opts);
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        validate_document(doc, opts.preprocessed);
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, Scheme scheme,
                                  const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path.string());
    return load_corpus(in, scheme, opts);
}

void save_corpus(std::ostream& out, const std::vector<Document>& docs) {
    for (const Document& doc : docs) out << document_to_json(doc).dump() << '\n';
}

void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path.string());
    save_corpus(out, docs);
}

void validate_document(const Document& doc, bool preprocessed) {
    const int n = doc.n_props();
    const int text_len = static_cast<int>(doc.text.size());
    for (int i = 0; i < n; ++i) {
        const Proposition& p = doc.props[static_cast<std::size_t>(i)];
        if (!(0 <= p.start && p.start < p.end && p.end <= text_len))
            throw ValidationError(doc.doc_id, "prop " + std::to_string(i) + " span out of range");
        if (p.gold_type && (*p.gold_type < 0 || *p.gold_type >= num_labels(doc.scheme)))
            throw ValidationError(doc.doc_id, "prop " + std::to_string(i) + " has invalid type");
    }
    for (const LinkPair& l : doc.gold_links) {
        if (l.first < 0 || l.first >= n || l.second < 0 || l.second >= n)
            throw ValidationError(doc.doc_id, "link references invalid prop id");
        if (l.first == l.second) throw ValidationError(doc.doc_id, "self link");
        if (doc.scheme == Scheme::Ukp &&
            doc.props[static_cast<std::size_t>(l.first)].paragraph !=
                doc.props[static_cast<std::size_t>(l.second)].paragraph)
            throw ValidationError(doc.doc_id, "ukp link crosses paragraph boundary");
    }
    if (!preprocessed) return;
    for (int i = 0; i + 1 < n; ++i) {
        const Proposition& a = doc.props[static_cast<std::size_t>(i)];
        const Proposition& b = doc.props[static_cast<std::size_t>(i + 1)];
        if (a.start > b.start)
            throw ValidationError(doc.doc_id, "props not sorted by start offset");
        if (a.end > b.start)
            throw ValidationError(doc.doc_id, "overlapping prop spans " + std::to_string(i) +
                                                  " and " + std::to_string(i + 1));
    }
    if (doc.scheme == Scheme::Cdcp) {
        for (const LinkPair& l : doc.gold_links) {
            if (doc.gold_links.count({l.second, l.first}))
                throw ValidationError(doc.doc_id, "symmetric link pair " +
                                                      std::to_string(l.first) + "<->" +
                                                      std::to_string(l.second));
            for (const LinkPair& m : doc.gold_links)
                if (m.first == l.second && !doc.gold_links.count({l.first, m.second}))
                    throw ValidationError(doc.doc_id, "gold links not transitively closed");
        }
    } else {
        std::vector<int> out_degree(static_cast<std::size_t>(n), 0);
        for (const LinkPair& l : doc.gold_links) ++out_degree[static_cast<std::size_t>(l.first)];
        for (int i = 0; i < n; ++i)
            if (out_degree[static_cast<std::size_t>(i)] > 1)
                throw ValidationError(doc.doc_id,
                                      "prop " + std::to_string(i) + " has multiple outgoing links");
        // out-degree <= 1 means any violation of forestness is a cycle
        std::vector<int> color(static_cast<std::size_t>(n), 0);
        std::vector<int> parent(static_cast<std::size_t>(n), -1);
        for (const LinkPair& l : doc.gold_links) parent[static_cast<std::size_t>(l.first)] = l.second;
        for (int i = 0; i < n; ++i) {
            int v = i;
            std::vector<int> path;
            while (v >= 0 && color[static_cast<std::size_t>(v)] == 0) {
                color[static_cast<std::size_t>(v)] = 1;
                path.push_back(v);
                v = parent[static_cast<std::size_t>(v)];
            }
            if (v >= 0 && color[static_cast<std::size_t>(v)] == 1)
                throw ValidationError(doc.doc_id, "link cycle through prop " + std::to_string(v));
            for (int u : path) color[static_cast<std::size_t>(u)] = 2;
        }
    }
}

std::set<LinkPair> transitive_closure(const std::set<LinkPair>& links) {
    std::vector<int> nodes;
    for (const LinkPair& l : links) {
        nodes.push_back(l.first);
        nodes.push_back(l.second);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    const std::size_t n = nodes.size();
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[nodes[i]] = i;

    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (const LinkPair& l : links) reach[index[l.first]][index[l.second]] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            if (!reach[i][k]) continue;
            for (std::size_t j = 0; j < n; ++j)
                if (reach[k][j]) reach[i][j] = true;
        }
    for (std::size_t i = 0; i < n; ++i)
        if (reach[i][i]) {
            // recover a concrete witness for the error message
            std::ostringstream msg;
            msg << "cycle through node " << nodes[i];
            throw InfeasibleError(msg.str());
        }
    std::set<LinkPair> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (reach[i][j]) out.emplace(nodes[i], nodes[j]);
    return out;
}

namespace {
bool spans_overlap(const Proposition& a, const Proposition& b) {
    return a.start < b.end && b.start < a.end;
}
}  // namespace

NestedResolution resolve_nested(const std::vector<Proposition>& props,
                                const std::set<LinkPair>& links) {
    const int n = static_cast<int>(props.size());
    // overlap groups = connected components of the pairwise-overlap relation
    std::vector<int> group(static_cast<std::size_t>(n), -1);
    int n_groups = 0;
    for (int i = 0; i < n; ++i) {
        if (group[static_cast<std::size_t>(i)] >= 0) continue;
        int g = n_groups++;
        std::vector<int> stack = {i};
        group[static_cast<std::size_t>(i)] = g;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int u = 0; u < n; ++u)
                if (group[static_cast<std::size_t>(u)] < 0 &&
                    spans_overlap(props[static_cast<std::size_t>(v)],
                                  props[static_cast<std::size_t>(u)])) {
                    group[static_cast<std::size_t>(u)] = g;
                    stack.push_back(u);
                }
        }
    }

    std::vector<bool> keep(static_cast<std::size_t>(n), true);
    for (int g = 0; g < n_groups; ++g) {
        std::vector<int> members;
        for (int i = 0; i < n; ++i)
            if (group[static_cast<std::size_t>(i)] == g) members.push_back(i);
        if (members.size() <= 1) continue;
        // keep the member whose survival drops the fewest links; a link lost
        // is one incident to any removed member
        int best = -1;
        std::size_t best_lost = 0;
        for (int cand : members) {
            std::set<LinkPair> lost;
            for (int other : members) {
                if (other == cand) continue;
                for (const LinkPair& l : links)
                    if (l.first == other || l.second == other) lost.insert(l);
            }
            bool better = best < 0 || lost.size() < best_lost;
            if (!better && lost.size() == best_lost) {
                const Proposition& c = props[static_cast<std::size_t>(cand)];
                const Proposition& b = props[static_cast<std::size_t>(best)];
                better = c.start < b.start ||
                         (c.start == b.start && (c.end - c.start) > (b.end - b.start));
            }
            if (better) {
                best = cand;
                best_lost = lost.size();
            }
        }
        for (int m : members)
            if (m != best) keep[static_cast<std::size_t>(m)] = false;
    }

    NestedResolution res;
    std::vector<int> remap(static_cast<std::size_t>(n), -1);
    std::vector<int> order;
    for (int i = 0; i < n; ++i)
        if (keep[static_cast<std::size_t>(i)]) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return props[static_cast<std::size_t>(a)].start < props[static_cast<std::size_t>(b)].start;
    });
    for (int old_id : order) {
        remap[static_cast<std::size_t>(old_id)] = static_cast<int>(res.props.size());
        res.props.push_back(props[static_cast<std::size_t>(old_id)]);
        res.kept_ids.push_back(old_id);
    }
    for (const LinkPair& l : links) {
        int s = remap[static_cast<std::size_t>(l.first)];
        int t = remap[static_cast<std::size_t>(l.second)];
        if (s >= 0 && t >= 0)
            res.links.emplace(s, t);
        else
            ++res.links_lost;
    }
    return res;
}

std::vector<LinkPair> candidate_links(const Document& doc) {
    std::vector<LinkPair> out;
    const int n = doc.n_props();
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            if (doc.scheme == Scheme::Ukp &&
                doc.props[static_cast<std::size_t>(a)].paragraph !=
                    doc.props[static_cast<std::size_t>(b)].paragraph)
                continue;
            out.emplace_back(a, b);
        }
    return out;
}

CorpusStats corpus_stats(const std::vector<Document>& corpus) {
    CorpusStats st;
    st.n_docs = corpus.size();
    for (const Document& doc : corpus) {
        st.n_props += doc.props.size();
        st.n_links += doc.gold_links.size();
        st.n_candidate_pairs += candidate_links(doc).size();
        for (const Proposition& p : doc.props)
            if (p.gold_type) ++st.props_per_type[label_name(doc.scheme, *p.gold_type)];
    }
    st.link_positive_rate = st.n_candidate_pairs == 0
                                ? 0.0
                                : static_cast<double>(st.n_links) /
                                      static_cast<double>(st.n_candidate_pairs);
    return st;
}

Document preprocess_document(const Document& doc) {
    Document out = doc;
    // nested resolution and link closure are cdcp preprocessing; ukp corpora
    // only pass validation
    if (out.scheme == Scheme::Cdcp) {
        NestedResolution res = resolve_nested(doc.props, doc.gold_links);
        out.props = std::move(res.props);
        out.gold_links = std::move(res.links);
        try {
            out.gold_links = transitive_closure(out.gold_links);
        } catch (const InfeasibleError& e) {
            throw ValidationError(out.doc_id, e.what());
        }
    }
    validate_document(out);
    return out;
}

}  // namespace argmine
