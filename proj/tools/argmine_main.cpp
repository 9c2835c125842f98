// argmine: batch CLI for the argument-mining structured prediction engine.
// Subcommands: preprocess, synth, train, cv, predict, evaluate, inspect.
// Exit codes: 0 success, 2 input/validation failure, 3 training divergence.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "argmine/corpus.hpp"
#include "argmine/eval.hpp"
#include "argmine/learning.hpp"
#include "argmine/model_io.hpp"
#include "argmine/synth.hpp"

using namespace argmine;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string scheme = "cdcp";
    std::string variant = "full";
    std::string mode = "inference";
    double C = 0.01;
    int k = 3;
    int epochs = 20;
    unsigned seed = 1;
    double beta = 1.0;
    double ad3_eta = 0.1;
    int ad3_max_iter = 2000;
    int jobs = 0;
    std::size_t cutoff = 2;
    std::string lexicon;
    bool baseline = false;
    bool average = true;
    bool strict_parse = false;
};

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--scheme", o.scheme, "corpus scheme")
        ->check(CLI::IsMember({"cdcp", "ukp"}));
    cmd->add_option("--variant", o.variant, "model variant")
        ->check(CLI::IsMember({"basic", "full", "strict"}));
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
}

void add_train_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--C", o.C, "SVM regularization");
    cmd->add_option("--epochs", o.epochs, "training epochs");
    cmd->add_option("--beta", o.beta, "false-negative link cost multiplier");
    cmd->add_option("--cutoff", o.cutoff, "vocabulary frequency cutoff");
    cmd->add_option("--lexicon", o.lexicon, "indicator lexicon file, one token per line");
    cmd->add_option("--ad3-eta", o.ad3_eta, "AD3 penalty parameter");
    cmd->add_option("--ad3-max-iter", o.ad3_max_iter, "AD3 iteration cap");
    cmd->add_flag("--baseline", o.baseline, "train independent unary classifiers instead");
    cmd->add_flag("!--no-average", o.average, "disable weight averaging");
}

Scheme parse_scheme(const std::string& name) {
    auto s = scheme_from_name(name);
    if (!s) throw Error("unknown scheme: " + name);
    return *s;
}

json options_json(const CommonOpts& o) {
    return {{"scheme", o.scheme},   {"variant", o.variant},
            {"mode", o.mode},       {"C", o.C},
            {"k", o.k},             {"epochs", o.epochs},
            {"seed", o.seed},       {"beta", o.beta},
            {"ad3_eta", o.ad3_eta}, {"ad3_max_iter", o.ad3_max_iter},
            {"jobs", o.jobs},       {"cutoff", o.cutoff},
            {"lexicon", o.lexicon}, {"baseline", o.baseline},
            {"average", o.average}};
}

TrainConfig train_config(const CommonOpts& o) {
    TrainConfig cfg;
    cfg.C = o.C;
    cfg.epochs = o.epochs;
    cfg.seed = o.seed;
    cfg.variant = VariantConfig::make(variant_from_name(o.variant));
    cfg.k_folds = o.k;
    cfg.average_weights = o.average;
    cfg.ad3.eta = o.ad3_eta;
    cfg.ad3.max_iterations = o.ad3_max_iter;
    return cfg;
}

std::vector<CompiledDoc> compile_corpus(const std::vector<Document>& docs,
                                        const FeatureExtractor& ex, int jobs) {
    std::vector<CompiledDoc> out(docs.size());
    std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(jobs > 0 ? jobs : omp_get_max_threads())
#endif
    for (long i = 0; i < static_cast<long>(docs.size()); ++i) {
        try {
            out[static_cast<std::size_t>(i)] = compile_doc(docs[static_cast<std::size_t>(i)], ex);
        } catch (...) {
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    (void)jobs;
    return out;
}

void write_trace(const std::filesystem::path& path, const TrainTrace& trace) {
    std::ofstream out(path);
    out << std::setprecision(17);
    out << "epoch,dual_objective,gap_estimate,integral_ratio\n";
    for (std::size_t e = 0; e < trace.epochs.size(); ++e)
        out << e + 1 << "," << trace.epochs[e].dual_objective << ","
            << trace.epochs[e].gap_estimate << "," << trace.epochs[e].integral_ratio << "\n";
}

TrainedModel run_training(const std::vector<CompiledDoc>& cds, const CommonOpts& o,
                          const CostConfig& cost) {
    TrainConfig cfg = train_config(o);
    return o.baseline ? baseline_train(cds, cfg, cost) : bcfw_train(cds, cfg, cost);
}

int cmd_preprocess(const std::string& in, const std::string& out, const CommonOpts& o) {
    LoadOptions lopts;
    lopts.strict = o.strict_parse;
    lopts.preprocessed = false;
    auto docs = load_corpus(in, parse_scheme(o.scheme), lopts);
    std::vector<Document> cleaned;
    for (const Document& doc : docs) cleaned.push_back(preprocess_document(doc));
    save_corpus(out, cleaned);
    auto stats = corpus_stats(cleaned);
    std::cerr << "preprocessed " << stats.n_docs << " docs, " << stats.n_props << " props, "
              << stats.n_links << " links, " << stats.n_candidate_pairs << " candidate pairs ("
              << stats.link_positive_rate << " positive)\n";
    return 0;
}

int cmd_synth(const std::string& out, const std::string& preset, std::size_t n_docs,
              const CommonOpts& o) {
    SynthConfig cfg;
    cfg.scheme = parse_scheme(o.scheme);
    cfg.preset = preset == "separable" ? SynthPreset::Separable : SynthPreset::Planted;
    cfg.n_docs = n_docs;
    cfg.seed = o.seed;
    save_corpus(out, synth_corpus(cfg));
    return 0;
}

int cmd_train(const std::string& train_path, const std::string& model_path,
              const std::string& trace_path, const CommonOpts& o) {
    Scheme scheme = parse_scheme(o.scheme);
    auto docs = load_corpus(train_path, scheme);
    FeatureConfig fcfg;
    fcfg.min_token_freq = o.cutoff;
    if (!o.lexicon.empty()) fcfg.lexicon_path = o.lexicon;
    auto tmpl = FeatureTemplate::fit(docs, scheme, fcfg);
    auto cds = compile_corpus(docs, tmpl, o.jobs);
    CostConfig cost = CostConfig::from_corpus(docs, o.beta);
    TrainedModel trained = run_training(cds, o, cost);

    ModelFile mf;
    mf.weights = trained.weights;
    mf.variant = trained.variant;
    mf.cost = trained.cost;
    mf.feature_template = tmpl;
    mf.provenance = options_json(o).dump();
    save_model(model_path, mf);
    if (!trace_path.empty()) write_trace(trace_path, trained.trace);
    std::cerr << "trained on " << docs.size() << " docs; model written to " << model_path
              << "\n";
    return 0;
}

int cmd_cv(const std::string& train_path, const std::string& model_path,
           const std::string& table_path, const std::string& trace_path, const CommonOpts& o) {
    Scheme scheme = parse_scheme(o.scheme);
    auto docs = load_corpus(train_path, scheme);
    if (static_cast<int>(docs.size()) < o.k) throw Error("fewer documents than folds");
    PredictMode mode = o.mode == "round" ? PredictMode::Round : PredictMode::Inference;

    std::ofstream table;
    if (!table_path.empty()) {
        table.open(table_path);
        table << std::setprecision(17);
        table << "C,fold,link_f1,prop_f1,average_f1\n";
    }

    double best_avg = -1.0;
    double best_C = kCGrid[0];
    for (double C : kCGrid) {
        double avg_sum = 0.0;
        for (int fold = 0; fold < o.k; ++fold) {
            std::vector<Document> train_docs, dev_docs;
            for (std::size_t i = 0; i < docs.size(); ++i)
                (static_cast<int>(i % static_cast<std::size_t>(o.k)) == fold ? dev_docs
                                                                             : train_docs)
                    .push_back(docs[i]);
            FeatureConfig fcfg;
            fcfg.min_token_freq = o.cutoff;
            if (!o.lexicon.empty()) fcfg.lexicon_path = o.lexicon;
            auto tmpl = FeatureTemplate::fit(train_docs, scheme, fcfg);
            auto train_cds = compile_corpus(train_docs, tmpl, o.jobs);
            auto dev_cds = compile_corpus(dev_docs, tmpl, o.jobs);
            CostConfig cost = CostConfig::from_corpus(train_docs, o.beta);
            CommonOpts fold_opts = o;
            fold_opts.C = C;
            TrainedModel trained = run_training(train_cds, fold_opts, cost);
            Ad3Config ad3;
            ad3.eta = o.ad3_eta;
            ad3.max_iterations = o.ad3_max_iter;
            auto preds =
                predict_corpus(dev_cds, trained.weights, trained.variant, mode, ad3, o.jobs);
            auto rep = evaluate(dev_docs, preds);
            avg_sum += rep.average_f1;
            if (table.is_open())
                table << C << "," << fold << "," << rep.link.f1 << "," << rep.prop_macro_f1
                      << "," << rep.average_f1 << "\n";
        }
        double mean = avg_sum / o.k;
        std::cerr << "C=" << C << " mean average F1 " << mean << "\n";
        if (mean > best_avg) {
            best_avg = mean;
            best_C = C;
        }
    }
    std::cerr << "selected C=" << best_C << "\n";
    CommonOpts final_opts = o;
    final_opts.C = best_C;
    return cmd_train(train_path, model_path, trace_path, final_opts);
}

int cmd_predict(const std::string& model_path, const std::string& in, const std::string& out,
                const std::string& dump_path, const CommonOpts& o) {
    ModelFile mf = load_model(model_path);
    auto docs = load_corpus(in, mf.feature_template.scheme());
    auto cds = compile_corpus(docs, mf.feature_template, o.jobs);
    PredictMode mode = o.mode == "round" ? PredictMode::Round : PredictMode::Inference;
    Ad3Config ad3;
    ad3.eta = o.ad3_eta;
    ad3.max_iterations = o.ad3_max_iter;
    std::vector<InferenceStats> stats;
    auto preds = predict_corpus(cds, mf.weights, mf.variant, mode, ad3, o.jobs,
                                dump_path.empty() ? nullptr : &stats);

    std::vector<Document> out_docs = docs;
    for (std::size_t i = 0; i < out_docs.size(); ++i) {
        for (int a = 0; a < out_docs[i].n_props(); ++a)
            out_docs[i].props[static_cast<std::size_t>(a)].gold_type =
                preds[i].types[static_cast<std::size_t>(a)];
        out_docs[i].gold_links = preds[i].links;
    }
    save_corpus(out, out_docs);
    if (!dump_path.empty()) {
        std::ofstream dump(dump_path);
        dump << "doc_id,status,iterations,objective,nodes\n";
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const char* status = stats[i].root_status == SolveStatus::Integral ? "integral"
                                 : stats[i].root_status == SolveStatus::Fractional
                                     ? "fractional"
                                     : "max_iter";
            dump << docs[i].doc_id << "," << status << "," << stats[i].root_iterations << ","
                 << stats[i].root_objective << "," << stats[i].nodes << "\n";
        }
    }
    return 0;
}

int cmd_evaluate(const std::string& gold_path, const std::string& pred_path,
                 const std::string& report_path, const std::string& json_path,
                 const std::string& confusion_path, const CommonOpts& o) {
    Scheme scheme = parse_scheme(o.scheme);
    auto gold = load_corpus(gold_path, scheme);
    LoadOptions lopts;
    lopts.preprocessed = false;  // predictions need not satisfy gold invariants
    auto pred_docs = load_corpus(pred_path, scheme, lopts);
    if (gold.size() != pred_docs.size()) throw Error("gold/prediction document count mismatch");
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].doc_id != pred_docs[i].doc_id)
            throw Error("gold/prediction doc_id mismatch at line " + std::to_string(i + 1));
        Prediction p;
        for (const Proposition& prop : pred_docs[i].props) {
            if (!prop.gold_type) throw Error("prediction missing a type in " + pred_docs[i].doc_id);
            p.types.push_back(*prop.gold_type);
        }
        p.links = pred_docs[i].gold_links;
        preds.push_back(std::move(p));
    }
    auto rep = evaluate(gold, preds);
    std::cout << render_report(rep);
    if (!report_path.empty()) std::ofstream(report_path) << render_report(rep);
    if (!json_path.empty()) std::ofstream(json_path) << report_to_json(rep) << "\n";
    if (!confusion_path.empty()) std::ofstream(confusion_path) << confusion_to_csv(rep);
    return 0;
}

int cmd_inspect(const std::string& model_path, const std::string& out_prefix) {
    ModelFile mf = load_model(model_path);
    const WeightLayout& L = mf.weights.layout;
    const int P = L.n_labels;
    Scheme scheme = L.scheme;
    // conditional link log-odds score(on) - score(off) per compatibility
    // feature setting; the basic parametrization has a single bias-only table
    std::vector<std::pair<std::string, CompatFeatures>> settings;
    if (mf.variant.compat_features) {
        for (int adj = 0; adj <= 1; ++adj)
            for (int ord = 0; ord <= 1; ++ord) {
                CompatFeatures cf{1.0, static_cast<double>(adj), static_cast<double>(ord)};
                settings.emplace_back(
                    "adjacent" + std::to_string(adj) + "_ordered" + std::to_string(ord), cf);
            }
    } else {
        settings.emplace_back("bias_only", CompatFeatures{1.0, 0.0, 0.0});
    }
    for (const auto& [name, cf] : settings) {
        std::filesystem::path path = out_prefix + "_" + name + ".csv";
        std::ofstream out(path);
        out << std::setprecision(17);
        out << "source\\target";
        for (int j = 0; j < P; ++j) out << "," << label_name(scheme, j);
        out << "\n";
        const double v[kCompatDim] = {cf.bias, cf.adjacency, cf.order};
        for (int i = 0; i < P; ++i) {
            out << label_name(scheme, i);
            for (int j = 0; j < P; ++j) {
                double on = 0.0, off = 0.0;
                for (int f = 0; f < kCompatDim; ++f) {
                    on += mf.weights.w[L.compat_index(i, j, 1, f)] * v[f];
                    off += mf.weights.w[L.compat_index(i, j, 0, f)] * v[f];
                }
                out << "," << (on - off);
            }
            out << "\n";
        }
        std::cout << path.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"argument mining with factor-graph structured prediction"};
    app.require_subcommand(1);
    app.set_config("--config");

    CommonOpts o;
    std::string in_path, out_path, model_path, trace_path, table_path, dump_path;
    std::string gold_path, pred_path, report_path, json_path, confusion_path, out_prefix;
    std::string preset = "planted";
    std::size_t n_docs = 200;

    auto* preprocess = app.add_subcommand("preprocess", "resolve nesting, close links, validate");
    preprocess->add_option("--in", in_path)->required();
    preprocess->add_option("--out", out_path)->required();
    preprocess->add_flag("--strict-parse", o.strict_parse, "reject unknown JSON keys");
    add_common_flags(preprocess, o);

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--out", out_path)->required();
    synth->add_option("--preset", preset)->check(CLI::IsMember({"planted", "separable"}));
    synth->add_option("--docs", n_docs);
    add_common_flags(synth, o);

    auto* train = app.add_subcommand("train", "fit a structured or baseline model");
    train->add_option("--train", in_path)->required();
    train->add_option("--model", model_path)->required();
    train->add_option("--trace", trace_path, "per-epoch training trace CSV");
    add_common_flags(train, o);
    add_train_flags(train, o);

    auto* cv = app.add_subcommand("cv", "select C by k-fold cross-validation, then refit");
    cv->add_option("--train", in_path)->required();
    cv->add_option("--model", model_path)->required();
    cv->add_option("--cv-table", table_path, "per-fold scores CSV");
    cv->add_option("--trace", trace_path);
    cv->add_option("--k", o.k, "number of folds");
    cv->add_option("--mode", o.mode)->check(CLI::IsMember({"round", "inference"}));
    add_common_flags(cv, o);
    add_train_flags(cv, o);

    auto* predict = app.add_subcommand("predict", "decode a corpus with a trained model");
    predict->add_option("--model", model_path)->required();
    predict->add_option("--in", in_path)->required();
    predict->add_option("--out", out_path)->required();
    predict->add_option("--mode", o.mode)->check(CLI::IsMember({"round", "inference"}));
    predict->add_option("--dump-inference", dump_path, "per-document solver stats CSV");
    predict->add_option("--ad3-eta", o.ad3_eta);
    predict->add_option("--ad3-max-iter", o.ad3_max_iter);
    add_common_flags(predict, o);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against gold");
    evaluate_cmd->add_option("--gold", gold_path)->required();
    evaluate_cmd->add_option("--pred", pred_path)->required();
    evaluate_cmd->add_option("--report", report_path);
    evaluate_cmd->add_option("--json", json_path);
    evaluate_cmd->add_option("--confusion", confusion_path);
    add_common_flags(evaluate_cmd, o);

    auto* inspect = app.add_subcommand("inspect", "dump compatibility log-odds tables");
    inspect->add_option("--model", model_path)->required();
    inspect->add_option("--out-prefix", out_prefix)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (preprocess->parsed()) return cmd_preprocess(in_path, out_path, o);
        if (synth->parsed()) return cmd_synth(out_path, preset, n_docs, o);
        if (train->parsed()) return cmd_train(in_path, model_path, trace_path, o);
        if (cv->parsed()) return cmd_cv(in_path, model_path, table_path, trace_path, o);
        if (predict->parsed()) return cmd_predict(model_path, in_path, out_path, dump_path, o);
        if (evaluate_cmd->parsed())
            return cmd_evaluate(gold_path, pred_path, report_path, json_path, confusion_path, o);
        if (inspect->parsed()) return cmd_inspect(model_path, out_prefix);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
