#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "argmine/types.hpp"

namespace argmine {

struct LoadOptions {
    bool strict = false;        // reject unknown JSON keys
    bool preprocessed = true;   // false: allow overlapping spans / unclosed links
};

// Corpus files are UTF-8 JSON lines, one document per line. See README for
// the exact schema.
std::vector<Document> load_corpus(const std::filesystem::path& path, Scheme scheme,
                                  const LoadOptions& opts = {});
std::vector<Document> load_corpus(std::istream& in, Scheme scheme, const LoadOptions& opts = {});

void save_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);
void save_corpus(std::ostream& out, const std::vector<Document>& docs);

// Checks Document invariants; throws ValidationError. With preprocessed set,
// additionally requires non-overlapping sorted spans and the scheme's link
// structure (Cdcp: closed + antisymmetric, Ukp: per-paragraph forest).
void validate_document(const Document& doc, bool preprocessed = true);

// Smallest superset of `links` closed under (a->b, b->c) => (a->c).
// Throws InfeasibleError naming a cycle witness if the input has a cycle.
std::set<LinkPair> transitive_closure(const std::set<LinkPair>& links);

struct NestedResolution {
    std::vector<Proposition> props;
    std::set<LinkPair> links;
    std::vector<int> kept_ids;   // original ids of surviving props, in order
    std::size_t links_lost = 0;
};

// Removes overlapping propositions: within each overlap group the prop whose
// survival loses the fewest links is kept (ties: earlier start, then longer
// span). Links incident to removed props are dropped and ids are remapped.
NestedResolution resolve_nested(const std::vector<Proposition>& props,
                                const std::set<LinkPair>& links);

// Ordered candidate pairs: Cdcp all n(n-1), Ukp within-paragraph only.
// Deterministic order by (src, trg).
std::vector<LinkPair> candidate_links(const Document& doc);

CorpusStats corpus_stats(const std::vector<Document>& corpus);

// Full preprocessing for one document: nested resolution first, then (Cdcp
// only) link transitive closure, then validation.
Document preprocess_document(const Document& doc);

}  // namespace argmine
