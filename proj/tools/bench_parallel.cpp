// Benchmark: OpenMP-parallel corpus prediction against the serial reference.
// Verifies the outputs are identical before reporting the timings.

#include <chrono>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "argmine/learning.hpp"
#include "argmine/synth.hpp"

using namespace argmine;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n_docs = argc > 1 ? static_cast<std::size_t>(std::atol(argv[1])) : 120;
    int epochs = argc > 2 ? std::atoi(argv[2]) : 12;

    SynthConfig scfg;
    scfg.n_docs = n_docs;
    scfg.seed = 7;
    auto docs = synth_corpus(scfg);
    auto tmpl = FeatureTemplate::fit(docs, Scheme::Cdcp);
    std::vector<CompiledDoc> cds;
    for (const Document& d : docs) cds.push_back(compile_doc(d, tmpl));

    // a reasonably converged model keeps the per-document work representative
    TrainConfig tcfg;
    tcfg.epochs = epochs;
    tcfg.C = 0.02;
    auto model = bcfw_train(cds, tcfg, CostConfig::from_corpus(docs));
    VariantConfig variant = VariantConfig::make(Variant::Full);

    std::cout << "docs: " << n_docs << "\n";
#ifdef _OPENMP
    std::cout << "max threads: " << omp_get_max_threads() << "\n";
#else
    std::cout << "built without OpenMP; parallel path falls back to serial\n";
#endif

    auto t0 = clock_type::now();
    auto serial = predict_corpus_serial(cds, model.weights, variant, PredictMode::Inference);
    double t_serial = seconds_since(t0);
    std::cout << "serial reference:  " << t_serial << " s\n";

    t0 = clock_type::now();
    auto parallel = predict_corpus(cds, model.weights, variant, PredictMode::Inference);
    double t_parallel = seconds_since(t0);
    std::cout << "parallel:          " << t_parallel << " s\n";

    for (std::size_t i = 0; i < serial.size(); ++i)
        if (serial[i].types != parallel[i].types || serial[i].links != parallel[i].links) {
            std::cerr << "MISMATCH at doc " << i << "\n";
            return 1;
        }
    std::cout << "outputs identical; speedup " << t_serial / t_parallel << "x\n";
    return 0;
}
