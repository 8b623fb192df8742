#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bffg/kernel.hpp"
#include "bffg/measure.hpp"
#include "bffg/potential.hpp"
#include "bffg/random_stream.hpp"

namespace bffg {

// The per-edge data the backward pass hands to the forward pass:
// m(x, y) = numerator(y) / denominator(x), with denominator = pullback of the
// numerator under the (possibly approximate) backward kernel.
struct Message {
    HPotential numerator;   // on the edge target
    HPotential denominator; // on the edge source
};

// A forward transition kernel paired with the backward kernel used to filter
// against it. Both share source and target spaces; they coincide when the
// backward pass is exact.
class Optic {
public:
    Optic(Kernel forward, Kernel backward);
    static Optic exact(const Kernel& k) { return Optic(k, k); }

    const Kernel& forward_kernel() const { return forward_; }
    const Kernel& backward_kernel() const { return backward_; }
    const Space& source() const { return forward_.source(); }
    const Space& target() const { return forward_.target(); }

private:
    Kernel forward_;
    Kernel backward_;
};

// A composition tree of optics: a primitive edge, a sequential chain, or a
// parallel (tensor) block. The empty Seq is the identity program and is used
// as a placeholder branch whose whole contribution is a potential.
class OpticProgram {
public:
    enum class Kind { Prim, Seq, Par };

    // `label` tags the primitive's output for trajectory/marginal recording.
    static OpticProgram prim(Optic o, std::string label = "");
    static OpticProgram seq(std::vector<OpticProgram> children);
    static OpticProgram par(std::vector<OpticProgram> children);

    Kind kind() const { return kind_; }
    const Optic& optic() const;
    const std::string& label() const;
    const std::vector<OpticProgram>& children() const;

    // Endpoint spaces; the identity program leaves them undetermined.
    std::optional<Space> source() const;
    std::optional<Space> target() const;

    bool is_identity() const { return kind_ == Kind::Seq && children_.empty(); }
    int prim_count() const;
    int duplication_count() const;

private:
    OpticProgram() = default;
    Kind kind_ = Kind::Seq;
    std::optional<Optic> optic_;
    std::string label_;
    std::vector<OpticProgram> children_;
};

OpticProgram seq_compose(OpticProgram p1, OpticProgram p2);
OpticProgram par_compose(OpticProgram p1, OpticProgram p2);

// Message tree mirroring the program shape: Prim nodes carry a message,
// Seq/Par nodes carry children in program order.
struct MessageTree {
    std::optional<Message> message;
    std::vector<MessageTree> children;
};

struct BackwardPassState {
    HPotential pulled_back; // potential transported to the program source
    MessageTree messages;
};

// One backward step: returns the message and the pulled-back potential
// (message denominator) under the optic's backward kernel.
std::pair<Message, HPotential> backward_map(const Optic& o, const HPotential& h);

// One forward step: nu(dy) = integral of m(x, y) mu(dx) kappa(x, dy).
// Atomic inputs route through the guided kernel and pick up the local weight.
FiniteMeasure forward_map(const Optic& o, const Message& m, const FiniteMeasure& mu);

// Importance factor: integral of (kappa num)(x) / denominator(x) d mu.
// Equals totalMass(forward_map(o, m, mu)) / totalMass(mu) for probability mu.
double weight(const Optic& o, const Message& m, const FiniteMeasure& mu);

// The proper Markov kernel kappa^m(x, dy) proportional to numerator(y) kappa(x, dy);
// the exact conditional dynamics when the backward kernel is exact.
Kernel guided_kernel(const Optic& o, const Message& m);

// One conditioned step from x without materializing the whole guided kernel:
// the distribution kappa^m(x, .) scaled by mass, and a draw from it. Only the
// state actually stepped from needs conditional mass, so degenerate dynamics
// elsewhere in the state space do not obstruct these.
FiniteMeasure guided_step(const Optic& o, const Message& m, const Point& x, double mass = 1.0);
Point sample_guided(const Optic& o, const Message& m, const Point& x, RandomStream& stream);

// Backward pass over a whole program, threading right-to-left through Seq and
// componentwise through Par.
BackwardPassState run_backward(const OpticProgram& p, const HPotential& h);

// Forward pass using the stored messages. Parallel blocks require a product
// measure or an atomic measure (which splits into per-branch atoms).
FiniteMeasure run_forward_measure(const OpticProgram& p, const BackwardPassState& s,
                                  const FiniteMeasure& mu);

// Numerical witnesses that composing kernels first or composing optics first
// yields the same smoothing outputs.
struct EquivalenceReport {
    double measure_deviation = 0.0; // absolute max-norm over the output measure representation
    double message_deviation = 0.0; // relative error of the message identities at probe points
    double max_deviation() const {
        return measure_deviation > message_deviation ? measure_deviation : message_deviation;
    }
};

// Two-edge chain: (k01 then k12) as one optic vs. the sequential composition
// of the edge optics; also checks that m01(x,z) m12(z,y) is independent of z
// and equals the composed message, at 10 random z per probe.
EquivalenceReport check_sequential_equivalence(const Kernel& k01, const Kernel& kb01,
                                               const Kernel& k12, const Kernel& kb12,
                                               const HPotential& h, const FiniteMeasure& mu,
                                               RandomStream& probes);

// Tensor pair: (k1 (x) k2) as one optic vs. the parallel composition, pushing
// the product measure mu1 (x) mu2; also checks the message product identity
// m1(x1,y1) m2(x2,y2) = m(( x1,x2),(y1,y2)) at random probe pairs.
EquivalenceReport check_parallel_equivalence(const Kernel& k1, const Kernel& kb1,
                                             const Kernel& k2, const Kernel& kb2,
                                             const HPotential& g1, const HPotential& g2,
                                             const FiniteMeasure& mu1, const FiniteMeasure& mu2,
                                             RandomStream& probes);

// Max-norm distance between two measures over the same space, comparing flat
// tabulations on finite spaces and (mass, mean, cov) on Euclidean ones.
double measure_distance(const FiniteMeasure& a, const FiniteMeasure& b, const Space& s);

} // namespace bffg
