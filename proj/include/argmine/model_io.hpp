#pragma once

#include <filesystem>
#include <string>

#include "argmine/features.hpp"
#include "argmine/learning.hpp"

namespace argmine {

struct ModelFile {
    ModelWeights weights;
    VariantConfig variant;
    CostConfig cost;
    FeatureTemplate feature_template;
    std::string provenance;  // run configuration echo, free-form JSON
};

// Versioned JSON container; weights round-trip exactly (shortest-round-trip
// double serialization). Loading verifies the embedded template hash and
// refuses mismatches.
void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace argmine
