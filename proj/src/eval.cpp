#include "argmine/eval.hpp"

#include <algorithm>
#include <array>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace argmine {

namespace {

RetrievalScore retrieval(std::size_t n_gold, std::size_t n_pred, std::size_t n_correct) {
    RetrievalScore s;
    s.n_gold = n_gold;
    s.n_pred = n_pred;
    s.n_correct = n_correct;
    s.precision = n_pred == 0 ? 0.0 : static_cast<double>(n_correct) / n_pred;
    s.recall = n_gold == 0 ? 0.0 : static_cast<double>(n_correct) / n_gold;
    s.f1 = (s.precision + s.recall) == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

}  // namespace

std::set<std::vector<int>> extract_structures(const std::set<LinkPair>& links, SoKind kind) {
    std::set<std::vector<int>> out;
    for (const LinkPair& l1 : links)
        for (const LinkPair& l2 : links) {
            if (l1 == l2) continue;
            switch (kind) {
                case SoKind::Grandparent:  // a->b, b->c
                    if (l1.second == l2.first && l1.first != l2.second)
                        out.insert({l1.first, l1.second, l2.second});
                    break;
                case SoKind::Sibling:  // b->a, b->c
                    if (l1.first == l2.first)
                        out.insert({l1.first, std::min(l1.second, l2.second),
                                    std::max(l1.second, l2.second)});
                    break;
                case SoKind::Coparent:  // a->b, c->b
                    if (l1.second == l2.second)
                        out.insert({l1.second, std::min(l1.first, l2.first),
                                    std::max(l1.first, l2.first)});
                    break;
            }
        }
    return out;
}

std::vector<std::size_t> confusion_matrix(const std::vector<Document>& gold_docs,
                                          const std::vector<Prediction>& predictions) {
    if (gold_docs.empty()) return {};
    const int P = num_labels(gold_docs[0].scheme);
    std::vector<std::size_t> counts(static_cast<std::size_t>(P * P), 0);
    for (std::size_t d = 0; d < gold_docs.size(); ++d) {
        const Document& doc = gold_docs[d];
        const Prediction& pred = predictions[d];
        for (int a = 0; a < doc.n_props(); ++a) {
            const auto& gt = doc.props[static_cast<std::size_t>(a)].gold_type;
            if (!gt) throw Error("evaluate: doc '" + doc.doc_id + "' missing gold type");
            ++counts[static_cast<std::size_t>(*gt * P + pred.types[static_cast<std::size_t>(a)])];
        }
    }
    return counts;
}

std::vector<double> normalize_confusion_rows(const std::vector<std::size_t>& counts,
                                             int n_labels) {
    std::vector<double> out(counts.size(), 0.0);
    for (int i = 0; i < n_labels; ++i) {
        std::size_t row_sum = 0;
        for (int j = 0; j < n_labels; ++j)
            row_sum += counts[static_cast<std::size_t>(i * n_labels + j)];
        if (row_sum == 0) continue;
        for (int j = 0; j < n_labels; ++j)
            out[static_cast<std::size_t>(i * n_labels + j)] =
                static_cast<double>(counts[static_cast<std::size_t>(i * n_labels + j)]) /
                static_cast<double>(row_sum);
    }
    return out;
}

EvalReport evaluate(const std::vector<Document>& gold_docs,
                    const std::vector<Prediction>& predictions) {
    if (gold_docs.size() != predictions.size())
        throw Error("evaluate: need one prediction per gold document");
    if (gold_docs.empty()) throw Error("evaluate: empty corpus");
    EvalReport rep;
    rep.scheme = gold_docs[0].scheme;
    const int P = num_labels(rep.scheme);

    std::size_t link_gold = 0, link_pred = 0, link_correct = 0;
    std::vector<std::size_t> tp(static_cast<std::size_t>(P), 0), fp(static_cast<std::size_t>(P), 0),
        fn(static_cast<std::size_t>(P), 0);
    std::map<std::string, std::array<std::size_t, 3>> so_counts;  // gold, pred, correct

    for (std::size_t d = 0; d < gold_docs.size(); ++d) {
        const Document& doc = gold_docs[d];
        const Prediction& pred = predictions[d];
        if (static_cast<int>(pred.types.size()) != doc.n_props())
            throw Error("evaluate: prediction does not match doc '" + doc.doc_id + "'");
        link_gold += doc.gold_links.size();
        link_pred += pred.links.size();
        for (const LinkPair& l : pred.links)
            if (doc.gold_links.count(l)) ++link_correct;
        for (int a = 0; a < doc.n_props(); ++a) {
            int g = *doc.props[static_cast<std::size_t>(a)].gold_type;
            int p = pred.types[static_cast<std::size_t>(a)];
            if (g == p)
                ++tp[static_cast<std::size_t>(g)];
            else {
                ++fn[static_cast<std::size_t>(g)];
                ++fp[static_cast<std::size_t>(p)];
            }
        }
        for (SoKind kind : {SoKind::Coparent, SoKind::Sibling, SoKind::Grandparent}) {
            auto gold_s = extract_structures(doc.gold_links, kind);
            auto pred_s = extract_structures(pred.links, kind);
            auto& c = so_counts[so_kind_name(kind)];
            c[0] += gold_s.size();
            c[1] += pred_s.size();
            for (const auto& s : gold_s)
                if (pred_s.count(s)) ++c[2];
        }
    }

    rep.confusion = confusion_matrix(gold_docs, predictions);
    rep.link = retrieval(link_gold, link_pred, link_correct);
    rep.prop_f1.assign(static_cast<std::size_t>(P), -1.0);
    double f1_sum = 0.0;
    int f1_n = 0;
    for (int s = 0; s < P; ++s) {
        std::size_t support = tp[static_cast<std::size_t>(s)] + fn[static_cast<std::size_t>(s)];
        std::size_t predicted = tp[static_cast<std::size_t>(s)] + fp[static_cast<std::size_t>(s)];
        // classes absent from gold count (as 0) only when predicted
        if (support == 0 && predicted == 0) continue;
        RetrievalScore rs = retrieval(support, predicted, tp[static_cast<std::size_t>(s)]);
        rep.prop_f1[static_cast<std::size_t>(s)] = rs.f1;
        f1_sum += rs.f1;
        ++f1_n;
    }
    rep.prop_macro_f1 = f1_n == 0 ? 0.0 : f1_sum / f1_n;
    rep.average_f1 = (rep.link.f1 + rep.prop_macro_f1) / 2.0;
    for (const auto& [name, c] : so_counts) rep.higher_order[name] = retrieval(c[0], c[1], c[2]);
    return rep;
}

std::string render_report(const EvalReport& rep) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1);
    auto pct = [](double x) { return 100.0 * x; };
    os << "Average       " << pct(rep.average_f1) << "\n";
    os << "Link          " << pct(rep.link.f1) << "  (P " << pct(rep.link.precision) << " R "
       << pct(rep.link.recall) << ", gold " << rep.link.n_gold << " predicted " << rep.link.n_pred
       << ")\n";
    os << "Prop          " << pct(rep.prop_macro_f1) << "\n";
    for (int s = 0; s < num_labels(rep.scheme); ++s) {
        os << "  " << std::left << std::setw(12) << label_name(rep.scheme, s) << std::right;
        if (rep.prop_f1[static_cast<std::size_t>(s)] < 0)
            os << "   -\n";
        else
            os << " " << pct(rep.prop_f1[static_cast<std::size_t>(s)]) << "\n";
    }
    os << "Higher-order structures:\n";
    for (const auto& [name, sc] : rep.higher_order)
        os << "  " << std::left << std::setw(12) << name << std::right << " F1 " << pct(sc.f1)
           << " (P " << pct(sc.precision) << " R " << pct(sc.recall) << ", gold " << sc.n_gold
           << " predicted " << sc.n_pred << ")\n";
    return os.str();
}

std::string report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["average_f1"] = rep.average_f1;
    j["link"] = {{"f1", rep.link.f1},
                 {"precision", rep.link.precision},
                 {"recall", rep.link.recall},
                 {"n_gold", rep.link.n_gold},
                 {"n_pred", rep.link.n_pred}};
    j["prop_macro_f1"] = rep.prop_macro_f1;
    j["prop_f1"] = nlohmann::json::object();
    for (int s = 0; s < num_labels(rep.scheme); ++s)
        if (rep.prop_f1[static_cast<std::size_t>(s)] >= 0)
            j["prop_f1"][label_name(rep.scheme, s)] = rep.prop_f1[static_cast<std::size_t>(s)];
    j["higher_order"] = nlohmann::json::object();
    for (const auto& [name, sc] : rep.higher_order)
        j["higher_order"][name] = {{"f1", sc.f1},
                                   {"precision", sc.precision},
                                   {"recall", sc.recall},
                                   {"n_gold", sc.n_gold},
                                   {"n_pred", sc.n_pred}};
    j["confusion"] = rep.confusion;
    return j.dump(2);
}

std::string confusion_to_csv(const EvalReport& rep) {
    const int P = num_labels(rep.scheme);
    std::ostringstream os;
    os << "gold\\predicted";
    for (int j = 0; j < P; ++j) os << "," << label_name(rep.scheme, j);
    os << "\n";
    for (int i = 0; i < P; ++i) {
        os << label_name(rep.scheme, i);
        for (int j = 0; j < P; ++j)
            os << "," << rep.confusion[static_cast<std::size_t>(i * P + j)];
        os << "\n";
    }
    // row-normalized block for reporting; raw counts above stay authoritative
    os << "\nnormalized\\predicted";
    for (int j = 0; j < P; ++j) os << "," << label_name(rep.scheme, j);
    os << "\n";
    auto norm = normalize_confusion_rows(rep.confusion, P);
    os << std::fixed << std::setprecision(4);
    for (int i = 0; i < P; ++i) {
        os << label_name(rep.scheme, i);
        for (int j = 0; j < P; ++j) os << "," << norm[static_cast<std::size_t>(i * P + j)];
        os << "\n";
    }
    return os.str();
}

}  // namespace argmine
