#pragma once

#include <vector>

#include "argmine/types.hpp"

namespace argmine {

// Synthetic corpora sampled from planted ground-truth rules, for desk-scale
// experiments without the real datasets.
//
//   Planted: prop types drawn from type-specific token pools with noise;
//   links planted between compatible type pairs at short range, then closed
//   (Cdcp) or grown as per-paragraph forests (Ukp).
//
//   Separable: every rule is decidable from single tokens, so a linear model
//   can fit the training set exactly.
enum class SynthPreset { Planted, Separable };

struct SynthConfig {
    Scheme scheme = Scheme::Cdcp;
    SynthPreset preset = SynthPreset::Planted;
    std::size_t n_docs = 200;
    unsigned seed = 7;
    int min_props = 3;
    int max_props = 6;
    double type_noise = 0.2;   // chance a token comes from the shared pool
    double link_on_rate = 0.7; // chance a rule-compatible pair links (Planted)
    double link_off_rate = 0.02;
};

std::vector<Document> synth_corpus(const SynthConfig& config);

}  // namespace argmine
