#include "bffg/cli.hpp"

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bffg/errors.hpp"
#include "bffg/model_io.hpp"
#include "bffg/optic.hpp"
#include "bffg/random_models.hpp"
#include "bffg/tree.hpp"

namespace bffg {

int cmd_smooth(const SmoothOptions& opt) {
    try {
        auto started = std::chrono::steady_clock::now();
        TreeModel model = parse_model_file(opt.model_path);
        SmoothingResult result = opt.mode == "exact"
                                     ? run_bffg_exact(model)
                                     : run_bffg_sampling(model, opt.samples, opt.seed);
        double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - started)
                             .count();
        write_result_file(opt.output_path, result, wall_ms);
        std::printf("mode: %s\n", result.mode.c_str());
        std::printf("evidence: %.17g\n", result.evidence);
        std::printf("log-evidence: %.17g\n", result.log_evidence);
        return 0;
    } catch (const ModelError& e) {
        std::fprintf(stderr, "model error: %s\n", e.what());
        return 1;
    } catch (const UnsupportedOperation& e) {
        std::fprintf(stderr, "unsupported: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    }
}

namespace {

struct DeviationTracker {
    double seq_measure = 0.0;
    double seq_message = 0.0;
    double par_measure = 0.0;
    double par_message = 0.0;

    void fold(const EquivalenceReport& seq, const EquivalenceReport& par) {
        seq_measure = std::max(seq_measure, seq.measure_deviation);
        seq_message = std::max(seq_message, seq.message_deviation);
        par_measure = std::max(par_measure, par.measure_deviation);
        par_message = std::max(par_message, par.message_deviation);
    }
    double worst() const {
        return std::max(std::max(seq_measure, seq_message), std::max(par_measure, par_message));
    }
};

int random_size(RandomStream& rs, int lo, int hi) {
    auto v = lo + static_cast<int>(rs.next_uniform() * static_cast<double>(hi - lo + 1));
    return v > hi ? hi : v;
}

std::pair<EquivalenceReport, EquivalenceReport> verify_trial(const std::string& family,
                                                             std::uint64_t trial_seed) {
    RandomStream rs(trial_seed);
    if (family == "discrete") {
        int n0 = random_size(rs, 2, 5), n1 = random_size(rs, 2, 5), n2 = random_size(rs, 2, 5);
        Kernel k01 = random_discrete_kernel(n0, n1, rs);
        Kernel kb01 = random_discrete_kernel(n0, n1, rs);
        Kernel k12 = random_discrete_kernel(n1, n2, rs);
        Kernel kb12 = random_discrete_kernel(n1, n2, rs);
        HPotential h = random_discrete_potential(n2, rs);
        FiniteMeasure mu = random_discrete_probability(n0, rs);
        EquivalenceReport seq = check_sequential_equivalence(k01, kb01, k12, kb12, h, mu, rs);

        int na = random_size(rs, 2, 5), nb = random_size(rs, 2, 5);
        int nc = random_size(rs, 2, 5), nd = random_size(rs, 2, 5);
        Kernel k1 = random_discrete_kernel(na, nb, rs);
        Kernel kb1 = random_discrete_kernel(na, nb, rs);
        Kernel k2 = random_discrete_kernel(nc, nd, rs);
        Kernel kb2 = random_discrete_kernel(nc, nd, rs);
        EquivalenceReport par = check_parallel_equivalence(
            k1, kb1, k2, kb2, random_discrete_potential(nb, rs), random_discrete_potential(nd, rs),
            random_discrete_probability(na, rs), random_discrete_probability(nc, rs), rs);
        return {seq, par};
    }

    int d0 = random_size(rs, 1, 3), d1 = random_size(rs, 1, 3), d2 = random_size(rs, 1, 3);
    Kernel k01 = random_lg_kernel(d0, d1, rs);
    Kernel kb01 = random_lg_kernel(d0, d1, rs);
    Kernel k12 = random_lg_kernel(d1, d2, rs);
    Kernel kb12 = random_lg_kernel(d1, d2, rs);
    HPotential h = random_gaussian_potential(d2, rs);
    FiniteMeasure mu = random_gaussian_probability(d0, rs);
    EquivalenceReport seq = check_sequential_equivalence(k01, kb01, k12, kb12, h, mu, rs);

    int da = random_size(rs, 1, 3), db = random_size(rs, 1, 3);
    int dc = random_size(rs, 1, 3), dd = random_size(rs, 1, 3);
    Kernel k1 = random_lg_kernel(da, db, rs);
    Kernel kb1 = random_lg_kernel(da, db, rs);
    Kernel k2 = random_lg_kernel(dc, dd, rs);
    Kernel kb2 = random_lg_kernel(dc, dd, rs);
    EquivalenceReport par = check_parallel_equivalence(
        k1, kb1, k2, kb2, random_gaussian_potential(db, rs), random_gaussian_potential(dd, rs),
        random_gaussian_probability(da, rs), random_gaussian_probability(dc, rs), rs);
    return {seq, par};
}

} // namespace

int cmd_verify(const VerifyOptions& opt) {
    constexpr double kTolerance = 1e-10;
    std::vector<std::string> families;
    if (opt.family == "both" || opt.family == "discrete") families.push_back("discrete");
    if (opt.family == "both" || opt.family == "gaussian") families.push_back("gaussian");
    if (families.empty()) {
        std::fprintf(stderr, "verify: family must be discrete, gaussian, or both\n");
        return 1;
    }
    if (opt.trials < 1) {
        std::fprintf(stderr, "verify: trials must be positive\n");
        return 1;
    }

    bool failed = false;
    std::uint64_t failing_seed = 0;
    std::string failing_family;
    for (const std::string& family : families) {
        DeviationTracker track;
        for (std::int64_t i = 0; i < opt.trials; ++i) {
            std::uint64_t trial_seed = opt.seed + static_cast<std::uint64_t>(i);
            auto [seq, par] = verify_trial(family, trial_seed);
            track.fold(seq, par);
            double worst = std::max(seq.max_deviation(), par.max_deviation());
            if (worst > kTolerance && !failed) {
                failed = true;
                failing_seed = trial_seed;
                failing_family = family;
            }
        }
        std::printf("%-8s sequential: measure %.3e, messages %.3e\n", family.c_str(),
                    track.seq_measure, track.seq_message);
        std::printf("%-8s parallel:   measure %.3e, messages %.3e\n", family.c_str(),
                    track.par_measure, track.par_message);
    }
    if (failed) {
        std::printf("FAIL: deviation above %.1e; reproduce with --trials 1 --seed %llu --family %s\n",
                    kTolerance, static_cast<unsigned long long>(failing_seed),
                    failing_family.c_str());
        return 4;
    }
    std::printf("OK: all deviations within %.1e\n", kTolerance);
    return 0;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Compositional Bayesian smoothing on trees of Markov kernels"};
    app.require_subcommand(1);

    SmoothOptions so;
    CLI::App* smooth = app.add_subcommand("smooth", "Smooth a tree model from a JSON file");
    smooth->add_option("--model", so.model_path, "Model file (JSON, bffg-model-v1)")->required();
    smooth->add_option("--mode", so.mode, "exact or sampling")
        ->required()
        ->check(CLI::IsMember({"exact", "sampling"}));
    smooth->add_option("--samples", so.samples, "Replicate count for sampling mode");
    smooth->add_option("--seed", so.seed, "Seed for sampling mode");
    smooth->add_option("--output", so.output_path, "Result file to write")->required();

    VerifyOptions vo;
    CLI::App* verify =
        app.add_subcommand("verify", "Check the composition equivalence laws on random instances");
    verify->add_option("--trials", vo.trials, "Trials per family")->required();
    verify->add_option("--seed", vo.seed, "Base seed; trial i uses seed + i")->required();
    verify->add_option("--family", vo.family, "discrete, gaussian, or both")
        ->check(CLI::IsMember({"discrete", "gaussian", "both"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (smooth->parsed()) return cmd_smooth(so);
    return cmd_verify(vo);
}

} // namespace bffg
