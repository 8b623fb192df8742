#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bffg/kernel.hpp"
#include "bffg/tree.hpp"

namespace bffg::testing {

// Root "x0" with a known state, latent nodes "x1".."xL", and one observed
// leaf "yi" per latent node. transitions[i] drives x_i -> x_{i+1},
// emissions[i] drives x_{i+1} -> y_{i+1}, observed[i] is the recorded state
// of y_{i+1}. backward_transitions, when given, replaces the filter kernel
// on every transition edge (the emission edges always filter exactly).
inline TreeModel chain_hmm(const std::vector<Eigen::MatrixXd>& transitions,
                           const std::vector<Eigen::MatrixXd>& emissions,
                           const std::vector<std::int64_t>& observed, std::int64_t root_state = 0,
                           const std::vector<Eigen::MatrixXd>* backward_transitions = nullptr) {
    const std::size_t len = transitions.size();
    std::vector<TreeNode> nodes;
    std::vector<TreeEdge> edges;
    std::vector<Observation> obs;
    nodes.push_back({"x0", Space::finite(transitions[0].rows()), TreeNode::Role::Root});
    for (std::size_t i = 0; i < len; ++i) {
        const std::string prev = "x" + std::to_string(i);
        const std::string cur = "x" + std::to_string(i + 1);
        const std::string leaf = "y" + std::to_string(i + 1);
        nodes.push_back({cur, Space::finite(transitions[i].cols()), TreeNode::Role::Latent});
        nodes.push_back({leaf, Space::finite(emissions[i].cols()), TreeNode::Role::Leaf});
        std::optional<Kernel> back;
        if (backward_transitions != nullptr)
            back = Kernel::discrete((*backward_transitions)[i]);
        edges.push_back({prev, cur, Kernel::discrete(transitions[i]), std::move(back)});
        edges.push_back({cur, leaf, Kernel::discrete(emissions[i]), std::nullopt});
        obs.push_back({leaf, Point::index(observed[i])});
    }
    return TreeModel(std::move(nodes), std::move(edges), Point::index(root_state),
                     std::move(obs));
}

// Linear-Gaussian analog: transitions[i] is the x_i -> x_{i+1} kernel,
// emission_for(i) (when engaged) observes x_{i+1} through a linear-Gaussian
// kernel at the recorded vector value.
inline TreeModel chain_lg(const std::vector<Kernel>& transitions,
                          const std::vector<std::optional<ObservationModel>>& emissions,
                          const Eigen::VectorXd& root_value) {
    std::vector<TreeNode> nodes;
    std::vector<TreeEdge> edges;
    std::vector<Observation> obs;
    nodes.push_back({"x0", transitions[0].source(), TreeNode::Role::Root});
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const std::string prev = "x" + std::to_string(i);
        const std::string cur = "x" + std::to_string(i + 1);
        nodes.push_back({cur, transitions[i].target(), TreeNode::Role::Latent});
        edges.push_back({prev, cur, transitions[i], std::nullopt});
        if (emissions[i].has_value()) {
            const std::string leaf = "y" + std::to_string(i + 1);
            nodes.push_back({leaf, emissions[i]->kernel.target(), TreeNode::Role::Leaf});
            edges.push_back({cur, leaf, emissions[i]->kernel, std::nullopt});
            obs.push_back({leaf, emissions[i]->observed_value});
        }
    }
    return TreeModel(std::move(nodes), std::move(edges), Point::vector(root_value),
                     std::move(obs));
}

inline Eigen::MatrixXd uniform_rows(int n, int m) {
    return Eigen::MatrixXd::Constant(n, m, 1.0 / static_cast<double>(m));
}

} // namespace bffg::testing
