#pragma once

#include <cstdint>
#include <string>

namespace bffg {

struct SmoothOptions {
    std::string model_path;
    std::string mode; // "exact" or "sampling"
    std::int64_t samples = 1000;
    std::uint64_t seed = 1;
    std::string output_path;
};

// Runs the smoother and writes the result file. Exit codes: 0 success,
// 1 malformed model, 2 unsupported operation for the requested mode,
// 3 numerical failure.
int cmd_smooth(const SmoothOptions& opt);

struct VerifyOptions {
    std::int64_t trials = 100;
    std::uint64_t seed = 1;
    std::string family = "both"; // "discrete", "gaussian", or "both"
};

// Randomized check of the two composition-equivalence properties: composing
// kernels first or composing their optics first must give the same smoothing
// outputs, sequentially and in parallel. Exit 0 iff every trial's deviation
// is at most 1e-10; exit 4 otherwise, reporting the first failing trial seed.
int cmd_verify(const VerifyOptions& opt);

// Full argument parsing front end for the two subcommands.
int run_cli(int argc, char** argv);

} // namespace bffg
