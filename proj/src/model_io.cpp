#include "argmine/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace argmine {

using nlohmann::json;

namespace {

json variant_to_json(const VariantConfig& v) {
    return {{"compat_factors", v.compat_factors},
            {"compat_features", v.compat_features},
            {"second_order", v.second_order},
            {"link_structure", v.link_structure},
            {"strict", v.strict}};
}

VariantConfig variant_from_json(const json& j) {
    VariantConfig v;
    v.compat_factors = j.at("compat_factors").get<bool>();
    v.compat_features = j.at("compat_features").get<bool>();
    v.second_order = j.at("second_order").get<bool>();
    v.link_structure = j.at("link_structure").get<bool>();
    v.strict = j.at("strict").get<bool>();
    return v;
}

ModelFile parse_model(const json& j) {
    ModelFile m;
    m.feature_template = FeatureTemplate::from_json(j.at("template").dump());
    std::ostringstream hash;
    hash << std::hex << m.feature_template.hash();
    if (hash.str() != j.at("template_hash").get<std::string>())
        throw Error("model file template hash mismatch");

    auto scheme = scheme_from_name(j.at("scheme").get<std::string>());
    if (!scheme || *scheme != m.feature_template.scheme())
        throw Error("model scheme does not match its template");
    m.weights = ModelWeights::zeros(*scheme, m.feature_template);
    if (m.weights.layout.d_prop != j.at("dims").at("d_prop").get<std::uint32_t>() ||
        m.weights.layout.d_link != j.at("dims").at("d_link").get<std::uint32_t>() ||
        m.weights.layout.d_so != j.at("dims").at("d_so").get<std::uint32_t>())
        throw Error("model dimensions do not match its template");
    m.weights.w = j.at("weights").get<std::vector<double>>();
    if (m.weights.w.size() != m.weights.layout.total)
        throw Error("model weight vector has wrong length");
    m.weights.baseline = j.at("baseline").get<bool>();
    m.variant = variant_from_json(j.at("variant"));
    m.cost.default_cost = j.at("cost").at("default_cost").get<double>();
    m.cost.false_negative_link_cost =
        j.at("cost").at("false_negative_link_cost").get<double>();
    if (j.contains("provenance")) m.provenance = j.at("provenance").dump();
    return m;
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelFile& model) {
    json j;
    j["format"] = "argmine-model";
    j["version"] = 1;
    j["scheme"] = scheme_name(model.weights.layout.scheme);
    j["baseline"] = model.weights.baseline;
    j["variant"] = variant_to_json(model.variant);
    j["cost"] = {{"default_cost", model.cost.default_cost},
                 {"false_negative_link_cost", model.cost.false_negative_link_cost}};
    j["template"] = json::parse(model.feature_template.to_json());
    std::ostringstream hash;
    hash << std::hex << model.feature_template.hash();
    j["template_hash"] = hash.str();
    j["dims"] = {{"d_prop", model.weights.layout.d_prop},
                 {"d_link", model.weights.layout.d_link},
                 {"d_so", model.weights.layout.d_so}};
    j["weights"] = model.weights.w;
    if (!model.provenance.empty()) j["provenance"] = json::parse(model.provenance);
    std::ofstream out(path);
    if (!out) throw Error("cannot open model file for writing: " + path.string());
    out << j.dump() << '\n';
}

ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("malformed model file: " + std::string(e.what()));
    }
    if (j.value("format", "") != "argmine-model" || j.value("version", 0) != 1)
        throw Error("unrecognized model format");
    try {
        return parse_model(j);
    } catch (const json::exception& e) {
        throw Error("malformed model file: " + std::string(e.what()));
    }
}

}  // namespace argmine
