#include "bffg/sampling.hpp"

#include <cmath>

#include "bffg/errors.hpp"
#include "bffg/kernel.hpp"
#include "bffg/measure.hpp"

namespace bffg {

namespace {

constexpr double kLinearFloor = 1e-300;

void accumulate_weight(double w, double& weight, double& log_weight, bool& linear_ok) {
    log_weight += std::log(w);
    if (!linear_ok) return;
    weight *= w;
    if (!std::isfinite(weight) || (weight != 0.0 && weight < kLinearFloor)) linear_ok = false;
}

bool is_exact_duplication(const Optic& o) {
    return o.forward_kernel().kind() == Kernel::Kind::Duplication &&
           o.backward_kernel().same_as(o.forward_kernel());
}

} // namespace

WeightedSample initial_sample(Point x, RandomStream stream) {
    return WeightedSample{1.0, 0.0, true, std::move(x), std::move(stream)};
}

WeightedSample forward_sampling_map(const Optic& o, const Message& m, WeightedSample xi) {
    double w = weight(o, m, FiniteMeasure::dirac(xi.point, 1.0));
    accumulate_weight(w, xi.weight, xi.log_weight, xi.linear_ok);
    auto [draw, rest] = xi.stream.split();
    Point next = sample_guided(o, m, xi.point, draw);
    return WeightedSample{xi.weight, xi.log_weight, xi.linear_ok, std::move(next), std::move(rest)};
}

SplitSample forward_sampling_duplicate(WeightedSample xi) {
    auto [left, right] = xi.stream.split();
    return SplitSample{xi.weight,
                       xi.log_weight,
                       xi.linear_ok,
                       Point::pair(xi.point, xi.point),
                       std::move(left),
                       std::move(right)};
}

namespace {

struct WeightAccumulator {
    double weight = 1.0;
    double log_weight = 0.0;
    bool linear_ok = true;
    std::vector<std::pair<std::string, Point>> visited;
};

std::pair<Point, RandomStream> sample_rec(const OpticProgram& p, const MessageTree& mt, Point x,
                                          RandomStream stream, WeightAccumulator& acc) {
    switch (p.kind()) {
    case OpticProgram::Kind::Prim: {
        const Optic& o = p.optic();
        Point next = [&] {
            if (is_exact_duplication(o)) {
                // Copy point: weight contribution is exactly 1 and no
                // randomness is consumed; the branch split happens at the
                // enclosing parallel block.
                return Point::pair(x, x);
            }
            double w = weight(o, *mt.message, FiniteMeasure::dirac(x, 1.0));
            accumulate_weight(w, acc.weight, acc.log_weight, acc.linear_ok);
            auto [draw, rest] = stream.split();
            Point y = sample_guided(o, *mt.message, x, draw);
            stream = std::move(rest);
            return y;
        }();
        if (!p.label().empty()) acc.visited.emplace_back(p.label(), next);
        return {std::move(next), std::move(stream)};
    }
    case OpticProgram::Kind::Seq: {
        Point cur = std::move(x);
        for (std::size_t i = 0; i < p.children().size(); ++i) {
            auto [next, rest] = sample_rec(p.children()[i], mt.children[i], std::move(cur),
                                           std::move(stream), acc);
            cur = std::move(next);
            stream = std::move(rest);
        }
        return {std::move(cur), std::move(stream)};
    }
    case OpticProgram::Kind::Par: {
        const auto& children = p.children();
        if (x.kind() != Point::Kind::Tuple || x.parts().size() != children.size())
            throw UnsupportedOperation("sampling: a parallel block needs a tuple point");
        std::vector<Point> outs;
        outs.reserve(children.size());
        for (std::size_t i = 0; i < children.size(); ++i) {
            if (i + 1 < children.size()) {
                auto [branch, rest] = stream.split();
                auto [out, used] = sample_rec(children[i], mt.children[i], x.parts()[i],
                                              std::move(branch), acc);
                (void)used; // the branch's leftover randomness is dropped
                outs.push_back(std::move(out));
                stream = std::move(rest);
            } else {
                auto [out, rest] = sample_rec(children[i], mt.children[i], x.parts()[i],
                                              std::move(stream), acc);
                outs.push_back(std::move(out));
                stream = std::move(rest);
            }
        }
        return {Point::tuple(std::move(outs)), std::move(stream)};
    }
    }
    throw ModelError("run_forward_sampling: unknown program kind");
}

} // namespace

SampleTrace run_forward_sampling(const OpticProgram& p, const BackwardPassState& s, Point x0,
                                 RandomStream stream) {
    WeightAccumulator acc;
    auto [out, rest] = sample_rec(p, s.messages, std::move(x0), std::move(stream), acc);
    (void)rest;
    return SampleTrace{acc.weight, acc.log_weight, acc.linear_ok, std::move(out),
                       std::move(acc.visited)};
}

} // namespace bffg
