#include "bffg/oracle.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bffg/errors.hpp"
#include "bffg/linalg.hpp"

namespace bffg {

EnumeratedPosterior brute_force_smoother(const TreeModel& t) {
    for (const TreeNode& n : t.nodes())
        if (n.space.kind() != Space::Kind::Finite)
            throw ModelError("enumeration: all node spaces must be finite");

    EnumeratedPosterior out;
    std::map<std::string, std::size_t> position; // latent node -> slot in node_order
    std::vector<std::int64_t> radix;
    double total_paths = 1.0;
    for (const TreeNode& n : t.nodes()) {
        if (n.role != TreeNode::Role::Latent) continue;
        position.emplace(n.id, out.node_order.size());
        out.node_order.push_back(n.id);
        radix.push_back(n.space.cardinality());
        total_paths *= static_cast<double>(n.space.cardinality());
        if (total_paths > 1e7) throw ModelError("enumeration: state space exceeds 1e7 paths");
    }
    auto path_count = static_cast<std::int64_t>(total_paths);

    // Value of a non-leaf node under the current assignment.
    std::vector<std::int64_t> assignment(radix.size(), 0);
    auto value_of = [&](const std::string& id) -> std::int64_t {
        if (id == t.root_id()) return t.root_value().index_value();
        return assignment[position.at(id)];
    };

    out.joint.assign(static_cast<std::size_t>(path_count), 0.0);
    double evidence = 0.0;
    for (std::int64_t flat = 0; flat < path_count; ++flat) {
        std::int64_t rem = flat;
        for (std::size_t j = radix.size(); j-- > 0;) {
            assignment[j] = rem % radix[j];
            rem /= radix[j];
        }
        double p = 1.0;
        for (const TreeEdge& ed : t.edges()) {
            std::int64_t from = value_of(ed.from);
            const TreeNode& child = t.node(ed.to);
            std::int64_t to = child.role == TreeNode::Role::Leaf
                                  ? t.observation_for(ed.to).value.index_value()
                                  : value_of(ed.to);
            p *= ed.forward.matrix()(from, to);
        }
        out.joint[static_cast<std::size_t>(flat)] = p;
        evidence += p;
    }
    if (!(evidence > 0.0))
        throw NumericalError("enumeration: the observations have zero likelihood under the model");
    out.evidence = evidence;
    for (double& p : out.joint) p /= evidence;

    for (std::size_t j = 0; j < out.node_order.size(); ++j)
        out.marginals.emplace(out.node_order[j], Eigen::VectorXd::Zero(radix[j]));
    for (std::int64_t flat = 0; flat < path_count; ++flat) {
        std::int64_t rem = flat;
        for (std::size_t j = radix.size(); j-- > 0;) {
            assignment[j] = rem % radix[j];
            rem /= radix[j];
        }
        for (std::size_t j = 0; j < radix.size(); ++j)
            out.marginals[out.node_order[j]][assignment[j]] +=
                out.joint[static_cast<std::size_t>(flat)];
    }
    return out;
}

std::vector<SmoothedMoments> rts_smoother(
    const std::vector<Kernel>& chain,
    const std::vector<std::optional<ObservationModel>>& observations,
    const Eigen::VectorXd& root_value) {
    if (chain.empty()) throw ModelError("rts: empty chain");
    if (observations.size() != chain.size())
        throw ModelError("rts: one (possibly absent) observation slot per transition");
    for (const Kernel& k : chain)
        if (k.kind() != Kernel::Kind::LinearGaussian)
            throw ModelError("rts: chain kernels must be linear-Gaussian");
    if (chain.front().transition().cols() != root_value.size())
        throw ModelError("rts: root value dimension mismatch");

    const std::size_t n = chain.size();
    // Filtered and one-step-ahead predicted moments; index i holds node i.
    std::vector<Eigen::VectorXd> mean_f(n + 1), mean_p(n + 1);
    std::vector<Eigen::MatrixXd> cov_f(n + 1), cov_p(n + 1);
    mean_f[0] = root_value;
    cov_f[0] = Eigen::MatrixXd::Zero(root_value.size(), root_value.size());

    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::MatrixXd& b = chain[i].transition();
        if (b.cols() != mean_f[i].size())
            throw ModelError("rts: chain kernel dimensions do not line up");
        mean_p[i + 1] = b * mean_f[i] + chain[i].shift();
        cov_p[i + 1] = b * cov_f[i] * b.transpose() + chain[i].noise_cov();
        cov_p[i + 1] = 0.5 * (cov_p[i + 1] + cov_p[i + 1].transpose());

        if (!observations[i]) {
            mean_f[i + 1] = mean_p[i + 1];
            cov_f[i + 1] = cov_p[i + 1];
            continue;
        }
        const ObservationModel& om = *observations[i];
        if (om.kernel.kind() != Kernel::Kind::LinearGaussian)
            throw ModelError("rts: observation kernels must be linear-Gaussian");
        const Eigen::MatrixXd& c = om.kernel.transition();
        const Eigen::MatrixXd& r = om.kernel.noise_cov();
        if (c.cols() != mean_p[i + 1].size())
            throw ModelError("rts: observation kernel dimension mismatch");
        Eigen::VectorXd v = om.observed_value.vector_value();
        Eigen::MatrixXd s = c * cov_p[i + 1] * c.transpose() + r;
        Eigen::LLT<Eigen::MatrixXd> s_llt(0.5 * (s + s.transpose()));
        if (s_llt.info() != Eigen::Success)
            throw NumericalError("rts: innovation covariance is not positive definite");
        Eigen::MatrixXd gain = s_llt.solve(c * cov_p[i + 1]).transpose();
        mean_f[i + 1] = mean_p[i + 1] + gain * (v - c * mean_p[i + 1] - om.kernel.shift());
        Eigen::MatrixXd complement =
            Eigen::MatrixXd::Identity(gain.rows(), gain.rows()) - gain * c;
        cov_f[i + 1] = complement * cov_p[i + 1] * complement.transpose() +
                       gain * r * gain.transpose();
        cov_f[i + 1] = 0.5 * (cov_f[i + 1] + cov_f[i + 1].transpose());
    }

    std::vector<Eigen::VectorXd> mean_s(n + 1);
    std::vector<Eigen::MatrixXd> cov_s(n + 1);
    mean_s[n] = mean_f[n];
    cov_s[n] = cov_f[n];
    for (std::size_t i = n; i-- > 0;) {
        Eigen::LLT<Eigen::MatrixXd> p_llt(cov_p[i + 1]);
        if (p_llt.info() != Eigen::Success)
            throw NumericalError("rts: predicted covariance is not positive definite");
        Eigen::MatrixXd gain =
            p_llt.solve(chain[i].transition() * cov_f[i].transpose()).transpose();
        mean_s[i] = mean_f[i] + gain * (mean_s[i + 1] - mean_p[i + 1]);
        cov_s[i] = cov_f[i] + gain * (cov_s[i + 1] - cov_p[i + 1]) * gain.transpose();
        cov_s[i] = 0.5 * (cov_s[i] + cov_s[i].transpose());
    }

    std::vector<SmoothedMoments> out;
    out.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) out.push_back({mean_s[i], cov_s[i]});
    return out;
}

double quadrature_pullback_1d(const Kernel& k, const HPotential& h, double x) {
    if (k.kind() != Kernel::Kind::LinearGaussian || k.transition().rows() != 1 ||
        k.transition().cols() != 1)
        throw ModelError("quadrature: kernel must be one-dimensional linear-Gaussian");
    double mean = k.transition()(0, 0) * x + k.shift()(0);
    double var = k.noise_cov()(0, 0);
    double sd = std::sqrt(var);

    double logc = 0.0, lin = 0.0, quad = 0.0;
    if (!h.is_one()) {
        if (h.kind() != HPotential::Kind::Gaussian || h.gaussian_dim() != 1)
            throw ModelError("quadrature: potential must be one-dimensional");
        logc = h.logc();
        lin = h.lin()(0);
        quad = h.quad()(0, 0);
    }
    if (1.0 / var + quad <= 0.0) throw NumericalError("quadrature: integrand diverges");

    const double inv_norm = 1.0 / (sd * std::sqrt(2.0 * M_PI));
    auto integrand = [&](double y) {
        double z = (y - mean) / sd;
        return std::exp(logc + lin * y - 0.5 * quad * y * y - 0.5 * z * z) * inv_norm;
    };
    double error = 0.0;
    double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, mean - 12.0 * sd, mean + 12.0 * sd, 15, 1e-12, &error);
    if (!std::isfinite(value)) throw NumericalError("quadrature: integrand diverges");
    return value;
}

} // namespace bffg
