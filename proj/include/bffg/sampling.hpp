#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bffg/optic.hpp"
#include "bffg/random_stream.hpp"

namespace bffg {

// A forward-sampling state: importance weight, current point, and the random
// stream that owns all future randomness of this replicate. The weight is
// tracked in log scale throughout; the linear value is valid while linear_ok.
struct WeightedSample {
    double weight = 1.0;
    double log_weight = 0.0;
    bool linear_ok = true;
    Point point;
    RandomStream stream;
};

WeightedSample initial_sample(Point x, RandomStream stream);

// One guided step: multiplies in the local weight at the current point, draws
// the next point from the guided kernel using the first child of a stream
// split, and keeps the second child as the continuation.
WeightedSample forward_sampling_map(const Optic& o, const Message& m, WeightedSample xi);

// Duplication step: the point is copied, the weight is untouched, and the
// stream splits into one independent stream per branch.
struct SplitSample {
    double weight;
    double log_weight;
    bool linear_ok;
    Point point; // (x, x)
    RandomStream left;
    RandomStream right;
};

SplitSample forward_sampling_duplicate(WeightedSample xi);

// A full guided trajectory through a program: the final point, the telescoped
// weight, and every labelled primitive's output in execution order.
struct SampleTrace {
    double weight;
    double log_weight;
    bool linear_ok;
    Point output;
    std::vector<std::pair<std::string, Point>> visited;
};

// Runs the whole program as one replicate. Sequential stages thread the
// sample; parallel blocks give each branch its own split stream (the last
// branch keeps the main line); exact duplication optics copy without
// consuming randomness or weight.
SampleTrace run_forward_sampling(const OpticProgram& p, const BackwardPassState& s, Point x0,
                                 RandomStream stream);

} // namespace bffg
