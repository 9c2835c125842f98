#pragma once

#include <map>
#include <string>
#include <vector>

#include "argmine/learning.hpp"
#include "argmine/types.hpp"

namespace argmine {

struct RetrievalScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;  // 0 when both precision and recall are 0
    std::size_t n_gold = 0;
    std::size_t n_pred = 0;
    std::size_t n_correct = 0;
};

struct EvalReport {
    RetrievalScore link;  // positive-link retrieval, exact directed matches
    std::vector<double> prop_f1;        // per class; -1 marks skipped classes
    double prop_macro_f1 = 0.0;
    double average_f1 = 0.0;            // (link F1 + prop macro F1) / 2
    std::vector<std::size_t> confusion; // |P| x |P| row-major, rows = gold
    std::map<std::string, RetrievalScore> higher_order;  // per structure kind
    Scheme scheme = Scheme::Cdcp;
};

// One prediction per gold document, aligned by position. Gold types must be
// present on every prop.
EvalReport evaluate(const std::vector<Document>& gold_docs,
                    const std::vector<Prediction>& predictions);

std::vector<std::size_t> confusion_matrix(const std::vector<Document>& gold_docs,
                                          const std::vector<Prediction>& predictions);
std::vector<double> normalize_confusion_rows(const std::vector<std::size_t>& counts,
                                             int n_labels);

// Canonical higher-order structures of a link set: grandparent (a,b,c) for
// a->b->c; sibling (b,{a,c}) for b->a, b->c; coparent (b,{a,c}) for a->b,
// c->b, with the unordered pair stored ascending.
std::set<std::vector<int>> extract_structures(const std::set<LinkPair>& links, SoKind kind);

std::string render_report(const EvalReport& report);
std::string report_to_json(const EvalReport& report);
std::string confusion_to_csv(const EvalReport& report);

}  // namespace argmine
