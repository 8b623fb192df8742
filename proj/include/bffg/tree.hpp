#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bffg/kernel.hpp"
#include "bffg/measure.hpp"
#include "bffg/optic.hpp"

namespace bffg {

struct TreeNode {
    enum class Role { Root, Latent, Leaf };
    std::string id;
    Space space;
    Role role;
};

struct TreeEdge {
    std::string from;
    std::string to;
    Kernel forward;
    std::optional<Kernel> backward; // nullopt: filter with the forward kernel itself
};

struct Observation {
    std::string leaf;
    Point value;
};

// A rooted directed tree of Markov kernels with observed leaves. Construction
// validates the shape: one root with a known value, unique parents,
// connectivity, leaves exactly the observed terminal nodes, and kernel spaces
// matching their endpoints. Observation edges must filter exactly (their
// density enters the initial potential), so an explicit backward kernel on an
// edge into a leaf must equal the forward kernel.
class TreeModel {
public:
    TreeModel(std::vector<TreeNode> nodes, std::vector<TreeEdge> edges, Point root_value,
              std::vector<Observation> observations);

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const std::vector<TreeEdge>& edges() const { return edges_; }
    const Point& root_value() const { return root_value_; }
    const std::vector<Observation>& observations() const { return observations_; }

    const std::string& root_id() const { return root_id_; }
    const TreeNode& node(const std::string& id) const;
    // Outgoing edge indices in declaration order; this order fixes the
    // duplication cascade and the sampling stream layout.
    const std::vector<std::size_t>& children_of(const std::string& id) const;
    const Observation& observation_for(const std::string& leaf_id) const;

private:
    std::vector<TreeNode> nodes_;
    std::vector<TreeEdge> edges_;
    Point root_value_;
    std::vector<Observation> observations_;
    std::string root_id_;
    std::map<std::string, std::size_t> node_index_;
    std::map<std::string, std::vector<std::size_t>> children_;
    std::map<std::string, std::size_t> observation_index_;
};

// Compiled form: the optic program rooted at the root space, the potential fed
// to the backward pass (leaf observation densities combined across branches),
// and the optic of each latent edge keyed by child id (the labels used in the
// program).
struct CompiledTree {
    OpticProgram program;
    HPotential initial_potential;
    std::map<std::string, Optic> edge_optics;
};

// Unary chains become Seq of edge optics; a branch node of out-degree k
// becomes a right-nested cascade of k-1 duplications, each followed by a Par
// pairing one subtree with the rest; observation edges contribute their
// observation potential instead of an optic.
CompiledTree compile_tree(const TreeModel& t);

struct Trajectory {
    double weight;
    double log_weight;
    std::map<std::string, Point> points; // root and every latent node
};

struct SmoothingResult {
    std::string mode; // "exact" or "sampling"
    double evidence = 0.0;
    double log_evidence = 0.0;
    // Exact mode: normalized smoothing marginal per latent node.
    std::map<std::string, FiniteMeasure> marginals;
    // Sampling mode: weighted trajectories plus self-normalized per-node
    // estimates (state probabilities on finite spaces, means on Euclidean).
    std::vector<Trajectory> trajectories;
    std::map<std::string, Eigen::VectorXd> node_estimates;
    std::uint64_t seed = 0;
    std::int64_t replicates = 0;
};

// Backward pass from the leaf potentials, then an exact forward pass pushing
// the Dirac at the root value, recording the normalized marginal after every
// latent edge. Evidence is the pulled-back potential at the root value; with
// exact backward kernels this is the observation likelihood.
SmoothingResult run_bffg_exact(const TreeModel& t);

// One backward pass, then `replicates` independent guided trajectories with
// telescoped importance weights. Deterministic per (seed, replicate index);
// the BFFG_THREADS environment variable only distributes replicates over
// threads and never changes results.
SmoothingResult run_bffg_sampling(const TreeModel& t, std::int64_t replicates, std::uint64_t seed);

} // namespace bffg
