#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "argmine/types.hpp"

namespace argmine {

struct SparseVector {
    std::vector<std::uint32_t> indices;  // strictly increasing
    std::vector<double> values;
    std::uint32_t dim = 0;

    void push(std::uint32_t i, double v) {
        if (v == 0.0) return;
        indices.push_back(i);
        values.push_back(v);
    }
    double dot(const std::vector<double>& dense) const;
    std::size_t nnz() const { return indices.size(); }
};

struct CompatFeatures {
    double bias = 1.0;
    double adjacency = 0.0;
    double order = 0.0;
};
constexpr int kCompatDim = 3;

// bias=1 always; adjacency=1 iff no prop lies strictly between a and b in
// document order; order=1 iff a precedes b.
CompatFeatures compat_features(const Document& doc, int a, int b);

// Fixed tokenizer: lowercase, split on non-alphanumeric bytes, drop empties.
std::vector<std::string> tokenize(std::string_view text);

struct FeatureConfig {
    std::size_t min_token_freq = 2;
    std::filesystem::path lexicon_path;  // optional, one token per line
};

// Abstract extractor so richer feature inventories can be plugged in behind
// the same engine.
class FeatureExtractor {
  public:
    virtual ~FeatureExtractor() = default;
    virtual Scheme scheme() const = 0;
    virtual std::uint32_t prop_dim() const = 0;
    virtual std::uint32_t link_dim() const = 0;
    virtual std::uint32_t second_order_dim() const = 0;
    virtual SparseVector prop_features(const Document& doc, int a) const = 0;
    virtual SparseVector link_features(const Document& doc, int a, int b) const = 0;
    virtual SparseVector second_order_features(const Document& doc, int a, int b, int c) const = 0;
};

// Lexical + structural template fitted on a training split. Immutable after
// fitting; extraction is pure, so instances are freely shareable across
// threads.
class FeatureTemplate final : public FeatureExtractor {
  public:
    static FeatureTemplate fit(const std::vector<Document>& train_docs, Scheme scheme,
                               const FeatureConfig& config = {});

    Scheme scheme() const override { return scheme_; }
    std::uint32_t prop_dim() const override;
    std::uint32_t link_dim() const override;
    std::uint32_t second_order_dim() const override { return kSecondOrderDim; }
    std::uint32_t vocab_size() const { return static_cast<std::uint32_t>(vocab_.size()); }

    SparseVector prop_features(const Document& doc, int a) const override;
    SparseVector link_features(const Document& doc, int a, int b) const override;
    SparseVector second_order_features(const Document& doc, int a, int b, int c) const override;

    int token_id(const std::string& token) const;  // -1 if out of vocabulary

    std::string to_json() const;
    static FeatureTemplate from_json(const std::string& text);
    std::uint64_t hash() const;

    static constexpr std::uint32_t kSecondOrderDim = 34;
    static constexpr int kPropStructDim = 18;
    static constexpr int kLinkStructDim = 9;

  private:
    Scheme scheme_ = Scheme::Cdcp;
    std::map<std::string, std::uint32_t> vocab_;
    std::set<std::string> lexicon_;
    std::size_t min_token_freq_ = 2;

    std::set<std::string> noun_proxy(const Document& doc, int a) const;
};

}  // namespace argmine
