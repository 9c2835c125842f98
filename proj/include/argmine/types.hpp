#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace argmine {

enum class Scheme { Cdcp, Ukp };

// Proposition label state indices, per scheme.
// Cdcp: 0=reference 1=testimony 2=fact 3=value 4=policy
//       (listed in decreasing objectivity, so rank(i) = 4 - i).
// Ukp:  0=major_claim 1=claim 2=premise
inline int num_labels(Scheme s) { return s == Scheme::Cdcp ? 5 : 3; }

const char* scheme_name(Scheme s);
std::optional<Scheme> scheme_from_name(std::string_view name);

const char* label_name(Scheme s, int label);
int label_from_name(Scheme s, std::string_view name);  // -1 if unknown

// Higher value = more objective. Defined for Cdcp labels only.
inline int objectivity_rank(int cdcp_label) { return 4 - cdcp_label; }

constexpr int kUkpPremise = 2;

struct Proposition {
    int start = 0;  // character offsets [start, end) into Document::text
    int end = 0;
    std::optional<int> gold_type;
    int sentence = 0;
    int paragraph = 0;
};

using LinkPair = std::pair<int, int>;  // (src, trg), src != trg

struct Document {
    std::string doc_id;
    std::string text;
    Scheme scheme = Scheme::Cdcp;
    std::vector<Proposition> props;
    std::set<LinkPair> gold_links;

    int n_props() const { return static_cast<int>(props.size()); }
    std::string span_text(int prop) const;
};

struct CorpusStats {
    std::size_t n_docs = 0;
    std::size_t n_props = 0;
    std::size_t n_links = 0;
    std::size_t n_candidate_pairs = 0;
    double link_positive_rate = 0.0;
    std::map<std::string, std::size_t> props_per_type;
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number.
struct ParseError : Error {
    ParseError(std::size_t line_no, const std::string& what_arg)
        : Error("line " + std::to_string(line_no) + ": " + what_arg), line(line_no) {}
    std::size_t line;
};

// A document violated a declared invariant; names the doc and the invariant.
struct ValidationError : Error {
    ValidationError(const std::string& doc_id, const std::string& invariant)
        : Error("doc '" + doc_id + "': " + invariant), doc(doc_id) {}
    std::string doc;
};

struct DimensionError : Error {
    using Error::Error;
};

struct InfeasibleError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace argmine
