#include "bffg/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <exception>
#include <limits>
#include <thread>
#include <utility>

#include "bffg/errors.hpp"
#include "bffg/potential.hpp"
#include "bffg/sampling.hpp"

namespace bffg {

TreeModel::TreeModel(std::vector<TreeNode> nodes, std::vector<TreeEdge> edges, Point root_value,
                     std::vector<Observation> observations)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), root_value_(std::move(root_value)),
      observations_(std::move(observations)) {
    if (nodes_.empty()) throw ModelError("tree: no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const TreeNode& n = nodes_[i];
        if (n.id.empty()) throw ModelError("tree: node ids must be non-empty");
        if (!node_index_.emplace(n.id, i).second)
            throw ModelError("tree: duplicate node id '" + n.id + "'");
        children_.emplace(n.id, std::vector<std::size_t>{});
        if (n.role == TreeNode::Role::Root) {
            if (!root_id_.empty()) throw ModelError("tree: more than one root");
            root_id_ = n.id;
        }
    }
    if (root_id_.empty()) throw ModelError("tree: no root node");
    if (!root_value_.valid_for(node(root_id_).space))
        throw ModelError("tree: root value does not belong to the root space");

    std::map<std::string, int> incoming;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const TreeEdge& ed = edges_[e];
        if (!node_index_.count(ed.from) || !node_index_.count(ed.to))
            throw ModelError("tree: edge endpoint is not a declared node");
        if (ed.from == ed.to) throw ModelError("tree: self-loop at '" + ed.from + "'");
        const TreeNode& src = node(ed.from);
        const TreeNode& dst = node(ed.to);
        if (!(ed.forward.source() == src.space) || !(ed.forward.target() == dst.space))
            throw ModelError("tree: kernel spaces of edge '" + ed.from + "' -> '" + ed.to +
                             "' do not match the node spaces");
        if (ed.backward && (!(ed.backward->source() == src.space) ||
                            !(ed.backward->target() == dst.space)))
            throw ModelError("tree: backward kernel spaces of edge '" + ed.from + "' -> '" +
                             ed.to + "' do not match the node spaces");
        if (dst.role == TreeNode::Role::Root)
            throw ModelError("tree: the root cannot have a parent");
        if (dst.role == TreeNode::Role::Leaf && ed.backward && !ed.backward->same_as(ed.forward))
            throw ModelError("tree: an observation edge must filter with its own kernel");
        incoming[ed.to] += 1;
        children_[ed.from].push_back(e);
    }
    for (const TreeNode& n : nodes_) {
        int in = incoming.count(n.id) ? incoming[n.id] : 0;
        if (n.role == TreeNode::Role::Root) {
            if (in != 0) throw ModelError("tree: the root cannot have a parent");
        } else if (in != 1) {
            throw ModelError("tree: node '" + n.id + "' must have exactly one parent");
        }
        std::size_t out = children_.at(n.id).size();
        if (n.role == TreeNode::Role::Leaf && out != 0)
            throw ModelError("tree: leaf '" + n.id + "' cannot have children");
        if (n.role != TreeNode::Role::Leaf && out == 0)
            throw ModelError("tree: terminal node '" + n.id + "' must be an observed leaf");
    }

    std::size_t reached = 0;
    std::deque<std::string> frontier{root_id_};
    std::map<std::string, bool> seen{{root_id_, true}};
    while (!frontier.empty()) {
        std::string u = frontier.front();
        frontier.pop_front();
        ++reached;
        for (std::size_t e : children_.at(u)) {
            const std::string& v = edges_[e].to;
            if (!seen.emplace(v, true).second)
                throw ModelError("tree: node '" + v + "' reached twice");
            frontier.push_back(v);
        }
    }
    if (reached != nodes_.size())
        throw ModelError("tree: not all nodes are reachable from the root");

    for (std::size_t i = 0; i < observations_.size(); ++i) {
        const Observation& ob = observations_[i];
        if (!node_index_.count(ob.leaf))
            throw ModelError("tree: observation on unknown node '" + ob.leaf + "'");
        const TreeNode& n = node(ob.leaf);
        if (n.role != TreeNode::Role::Leaf)
            throw ModelError("tree: observation on non-leaf node '" + ob.leaf + "'");
        if (!ob.value.valid_for(n.space))
            throw ModelError("tree: observed value does not belong to the space of leaf '" +
                             ob.leaf + "'");
        if (!observation_index_.emplace(ob.leaf, i).second)
            throw ModelError("tree: duplicate observation for leaf '" + ob.leaf + "'");
    }
    for (const TreeNode& n : nodes_)
        if (n.role == TreeNode::Role::Leaf && !observation_index_.count(n.id))
            throw ModelError("tree: leaf '" + n.id + "' has no observation");
}

const TreeNode& TreeModel::node(const std::string& id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) throw ModelError("tree: unknown node '" + id + "'");
    return nodes_[it->second];
}

const std::vector<std::size_t>& TreeModel::children_of(const std::string& id) const {
    auto it = children_.find(id);
    if (it == children_.end()) throw ModelError("tree: unknown node '" + id + "'");
    return it->second;
}

const Observation& TreeModel::observation_for(const std::string& leaf_id) const {
    auto it = observation_index_.find(leaf_id);
    if (it == observation_index_.end())
        throw ModelError("tree: no observation for '" + leaf_id + "'");
    return observations_[it->second];
}

namespace {

struct Branch {
    OpticProgram program;
    HPotential potential;
};

Branch build_subtree(const TreeModel& t, const std::string& u,
                     std::map<std::string, Optic>& edge_optics) {
    std::vector<Branch> branches;
    for (std::size_t e : t.children_of(u)) {
        const TreeEdge& ed = t.edges()[e];
        const TreeNode& child = t.node(ed.to);
        if (child.role == TreeNode::Role::Leaf) {
            HPotential g = observation_potential({ed.forward, t.observation_for(child.id).value});
            branches.push_back({OpticProgram::seq({}), std::move(g)});
            continue;
        }
        Branch sub = build_subtree(t, child.id, edge_optics);
        Optic o(ed.forward, ed.backward ? *ed.backward : ed.forward);
        edge_optics.emplace(child.id, o);
        std::vector<OpticProgram> stages;
        stages.push_back(OpticProgram::prim(std::move(o), child.id));
        if (!sub.program.is_identity()) stages.push_back(std::move(sub.program));
        branches.push_back({OpticProgram::seq(std::move(stages)), std::move(sub.potential)});
    }
    if (branches.empty()) return {OpticProgram::seq({}), HPotential::one()};
    Branch acc = std::move(branches.back());
    for (std::size_t i = branches.size() - 1; i-- > 0;) {
        Branch left = std::move(branches[i]);
        OpticProgram dup =
            OpticProgram::prim(Optic::exact(Kernel::duplication(t.node(u).space)));
        OpticProgram par = par_compose(std::move(left.program), std::move(acc.program));
        acc = {seq_compose(std::move(dup), std::move(par)),
               HPotential::pair(std::move(left.potential), std::move(acc.potential))};
    }
    return acc;
}

void collect_messages(const OpticProgram& p, const MessageTree& mt,
                      std::map<std::string, Message>& out) {
    if (p.kind() == OpticProgram::Kind::Prim) {
        if (!p.label().empty()) out.emplace(p.label(), *mt.message);
        return;
    }
    for (std::size_t i = 0; i < p.children().size(); ++i)
        collect_messages(p.children()[i], mt.children[i], out);
}

void record_marginals(const TreeModel& t, const CompiledTree& ct,
                      const std::map<std::string, Message>& messages, const std::string& u,
                      const FiniteMeasure& mu, std::map<std::string, FiniteMeasure>& marginals) {
    for (std::size_t e : t.children_of(u)) {
        const TreeEdge& ed = t.edges()[e];
        if (t.node(ed.to).role == TreeNode::Role::Leaf) continue;
        FiniteMeasure nu = forward_map(ct.edge_optics.at(ed.to), messages.at(ed.to), mu);
        auto [it, inserted] = marginals.emplace(ed.to, normalized(nu));
        (void)inserted;
        record_marginals(t, ct, messages, ed.to, it->second, marginals);
    }
}

int threads_from_env() {
    const char* raw = std::getenv("BFFG_THREADS");
    if (raw == nullptr || *raw == '\0') return 1;
    char* end = nullptr;
    long v = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || v < 1)
        throw ModelError("BFFG_THREADS must be a positive integer");
    return static_cast<int>(std::min<long>(v, 256));
}

} // namespace

CompiledTree compile_tree(const TreeModel& t) {
    std::map<std::string, Optic> edge_optics;
    Branch root = build_subtree(t, t.root_id(), edge_optics);
    return CompiledTree{std::move(root.program), std::move(root.potential),
                        std::move(edge_optics)};
}

SmoothingResult run_bffg_exact(const TreeModel& t) {
    CompiledTree ct = compile_tree(t);
    BackwardPassState st = run_backward(ct.program, ct.initial_potential);

    const Space& root_space = t.node(t.root_id()).space;
    SmoothingResult res;
    res.mode = "exact";
    res.evidence = evaluate_on(st.pulled_back, root_space, t.root_value());
    res.log_evidence = log_evaluate_on(st.pulled_back, root_space, t.root_value());
    if (!(res.evidence > 0.0))
        throw NumericalError("smoothing: the observations have zero likelihood under the model");

    std::map<std::string, Message> messages;
    collect_messages(ct.program, st.messages, messages);
    record_marginals(t, ct, messages, t.root_id(),
                     FiniteMeasure::dirac(t.root_value(), 1.0), res.marginals);
    return res;
}

namespace {

// Self-normalized estimate at one node: posterior state probabilities on a
// finite space, posterior mean on a Euclidean space, nothing otherwise.
std::optional<Eigen::VectorXd> node_estimate(const Space& s, const std::string& id,
                                             const std::vector<Trajectory>& trajectories,
                                             double max_log_w) {
    if (s.kind() == Space::Kind::Finite) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(s.cardinality());
        double total = 0.0;
        for (const Trajectory& tr : trajectories) {
            double w = std::exp(tr.log_weight - max_log_w);
            acc[tr.points.at(id).index_value()] += w;
            total += w;
        }
        if (total > 0.0) acc /= total;
        return acc;
    }
    if (s.kind() == Space::Kind::Euclidean) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(s.dimension());
        double total = 0.0;
        for (const Trajectory& tr : trajectories) {
            double w = std::exp(tr.log_weight - max_log_w);
            acc += w * tr.points.at(id).vector_value();
            total += w;
        }
        if (total > 0.0) acc /= total;
        return acc;
    }
    return std::nullopt;
}

} // namespace

SmoothingResult run_bffg_sampling(const TreeModel& t, std::int64_t replicates,
                                  std::uint64_t seed) {
    if (replicates <= 0) throw ModelError("sampling: replicate count must be positive");
    CompiledTree ct = compile_tree(t);
    BackwardPassState st = run_backward(ct.program, ct.initial_potential);
    const Space& root_space = t.node(t.root_id()).space;
    const Point& x0 = t.root_value();
    double log_h_root = log_evaluate_on(st.pulled_back, root_space, x0);

    std::vector<std::optional<SampleTrace>> traces(static_cast<std::size_t>(replicates));
    int n_threads = std::min<std::int64_t>(threads_from_env(), replicates);
    auto run_range = [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r)
            traces[static_cast<std::size_t>(r)].emplace(run_forward_sampling(
                ct.program, st, x0,
                RandomStream::for_replicate(seed, static_cast<std::uint64_t>(r))));
    };
    if (n_threads <= 1) {
        run_range(0, replicates);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
        for (int ti = 0; ti < n_threads; ++ti) {
            std::int64_t lo = replicates * ti / n_threads;
            std::int64_t hi = replicates * (ti + 1) / n_threads;
            pool.emplace_back([&, ti, lo, hi] {
                try {
                    run_range(lo, hi);
                } catch (...) {
                    errors[static_cast<std::size_t>(ti)] = std::current_exception();
                }
            });
        }
        for (std::thread& th : pool) th.join();
        for (const std::exception_ptr& err : errors)
            if (err) std::rethrow_exception(err);
    }

    SmoothingResult res;
    res.mode = "sampling";
    res.seed = seed;
    res.replicates = replicates;
    res.trajectories.reserve(traces.size());
    for (const auto& trace : traces) {
        Trajectory tr{trace->weight, trace->log_weight, {}};
        if (!trace->linear_ok) tr.weight = std::exp(trace->log_weight);
        tr.points.emplace(t.root_id(), x0);
        for (const auto& [label, point] : trace->visited) tr.points.emplace(label, point);
        res.trajectories.push_back(std::move(tr));
    }

    double max_log_w = -std::numeric_limits<double>::infinity();
    for (const Trajectory& tr : res.trajectories) max_log_w = std::max(max_log_w, tr.log_weight);
    double log_mean_w;
    if (std::isinf(max_log_w) && max_log_w < 0.0) {
        log_mean_w = -std::numeric_limits<double>::infinity();
    } else {
        double sum = 0.0;
        for (const Trajectory& tr : res.trajectories) sum += std::exp(tr.log_weight - max_log_w);
        log_mean_w = max_log_w + std::log(sum / static_cast<double>(replicates));
    }
    res.log_evidence = log_h_root + log_mean_w;
    res.evidence = std::exp(res.log_evidence);

    double shift = std::isinf(max_log_w) ? 0.0 : max_log_w;
    for (const TreeNode& n : t.nodes()) {
        if (n.role == TreeNode::Role::Leaf) continue;
        if (n.role == TreeNode::Role::Root) continue;
        if (auto est = node_estimate(n.space, n.id, res.trajectories, shift))
            res.node_estimates.emplace(n.id, std::move(*est));
    }
    return res;
}

} // namespace bffg
