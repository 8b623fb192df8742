#include "bffg/measure.hpp"

#include <cmath>

#include "bffg/errors.hpp"
#include "bffg/linalg.hpp"

namespace bffg {

FiniteMeasure FiniteMeasure::discrete(Eigen::VectorXd weights) {
    if (weights.size() == 0) throw ModelError("discrete measure must be nonempty");
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
            throw ModelError("discrete measure weights must be finite and nonnegative");
    FiniteMeasure m;
    m.kind_ = Kind::Discrete;
    m.weights_ = std::move(weights);
    return m;
}

FiniteMeasure FiniteMeasure::weighted_gaussian(double mass, Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    if (!(mass >= 0.0) || !std::isfinite(mass)) throw ModelError("gaussian measure mass must be finite and nonnegative");
    if (!mean.allFinite() || !cov.allFinite()) throw ModelError("gaussian measure parameters must be finite");
    if (cov.rows() != mean.size()) throw ModelError("gaussian measure: mean and cov sizes disagree");
    Eigen::MatrixXd c = linalg::symmetrized(cov, 1e-10, "gaussian measure cov");
    linalg::check_psd(c, "gaussian measure cov");
    FiniteMeasure m;
    m.kind_ = Kind::Gaussian;
    m.mass_ = mass;
    m.mean_ = std::move(mean);
    m.cov_ = std::move(c);
    return m;
}

FiniteMeasure FiniteMeasure::dirac(Point point, double mass) {
    if (!(mass >= 0.0) || !std::isfinite(mass)) throw ModelError("dirac mass must be finite and nonnegative");
    FiniteMeasure m;
    m.kind_ = Kind::Dirac;
    m.mass_ = mass;
    m.point_.push_back(std::move(point));
    return m;
}

FiniteMeasure FiniteMeasure::product(std::vector<FiniteMeasure> parts) {
    if (parts.size() < 2) throw ModelError("product measure needs at least 2 factors");
    FiniteMeasure m;
    m.kind_ = Kind::Product;
    m.parts_ = std::move(parts);
    return m;
}

FiniteMeasure FiniteMeasure::pair(FiniteMeasure a, FiniteMeasure b) {
    std::vector<FiniteMeasure> ps;
    ps.push_back(std::move(a));
    ps.push_back(std::move(b));
    return product(std::move(ps));
}

const Eigen::VectorXd& FiniteMeasure::weights() const {
    if (kind_ != Kind::Discrete) throw ModelError("weights() on non-discrete measure");
    return weights_;
}

double FiniteMeasure::mass() const {
    if (kind_ != Kind::Gaussian && kind_ != Kind::Dirac) throw ModelError("mass() on this measure family");
    return mass_;
}

const Eigen::VectorXd& FiniteMeasure::mean() const {
    if (kind_ != Kind::Gaussian) throw ModelError("mean() on non-gaussian measure");
    return mean_;
}

const Eigen::MatrixXd& FiniteMeasure::cov() const {
    if (kind_ != Kind::Gaussian) throw ModelError("cov() on non-gaussian measure");
    return cov_;
}

const Point& FiniteMeasure::point() const {
    if (kind_ != Kind::Dirac) throw ModelError("point() on non-dirac measure");
    return point_.front();
}

const std::vector<FiniteMeasure>& FiniteMeasure::parts() const {
    if (kind_ != Kind::Product) throw ModelError("parts() on non-product measure");
    return parts_;
}

double total_mass(const FiniteMeasure& mu) {
    switch (mu.kind()) {
        case FiniteMeasure::Kind::Discrete: return mu.weights().sum();
        case FiniteMeasure::Kind::Gaussian: return mu.mass();
        case FiniteMeasure::Kind::Dirac: return mu.mass();
        case FiniteMeasure::Kind::Product: {
            double m = 1.0;
            for (const auto& p : mu.parts()) m *= total_mass(p);
            return m;
        }
    }
    throw ModelError("total_mass: bad measure");
}

double gaussian_integral(double mass, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                         double logc, const Eigen::VectorXd& F, const Eigen::MatrixXd& H) {
    if (mean.size() != F.size()) throw ModelError("gaussian integral: dimension mismatch");
    // Shift x = mean + y:  h(x) = exp(base + u.y - y.Hy/2), u = F - H mean.
    // With cov = L L^T and M = I + L^T H L (positive definite iff the integral
    // converges):  integral = exp(base + q.M^{-1}q/2 - logdet(M)/2), q = L^T u.
    const double base = logc + F.dot(mean) - 0.5 * mean.dot(H * mean);
    const Eigen::VectorXd u = F - H * mean;
    const Eigen::MatrixXd L = linalg::psd_half_factor(cov, "gaussian integral cov");
    const Eigen::Index d = mean.size();
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) + L.transpose() * H * L;
    M = 0.5 * (M + M.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success)
        throw NumericalError("gaussian integral diverges: cov^{-1} + H is not positive definite");
    const Eigen::VectorXd q = L.transpose() * u;
    const double quad = 0.5 * q.dot(llt.solve(q));
    return mass * std::exp(base + quad - 0.5 * linalg::logdet(llt));
}

double integrate(const FiniteMeasure& mu, const HPotential& h) {
    if (h.is_one()) return total_mass(mu);
    switch (mu.kind()) {
        case FiniteMeasure::Kind::Dirac:
            return mu.mass() * evaluate(h, mu.point());
        case FiniteMeasure::Kind::Discrete: {
            if (h.kind() != HPotential::Kind::Discrete)
                throw UnsupportedOperation("integrate: discrete measure needs a discrete potential");
            if (h.values().size() != mu.weights().size())
                throw ModelError("integrate: discrete sizes disagree");
            return mu.weights().dot(h.values());
        }
        case FiniteMeasure::Kind::Gaussian: {
            if (h.kind() != HPotential::Kind::Gaussian)
                throw UnsupportedOperation("integrate: gaussian measure needs a gaussian potential");
            return gaussian_integral(mu.mass(), mu.mean(), mu.cov(), h.logc(), h.lin(), h.quad());
        }
        case FiniteMeasure::Kind::Product: {
            if (h.kind() != HPotential::Kind::Product || h.parts().size() != mu.parts().size())
                throw UnsupportedOperation("integrate: product measure needs a matching product potential");
            double out = 1.0;
            for (std::size_t i = 0; i < mu.parts().size(); ++i)
                out *= integrate(mu.parts()[i], h.parts()[i]);
            return out;
        }
    }
    throw ModelError("integrate: bad measure");
}

FiniteMeasure normalized(const FiniteMeasure& mu) {
    const double m = total_mass(mu);
    if (!(m > 0.0)) throw NumericalError("cannot normalize a zero-mass measure");
    switch (mu.kind()) {
        case FiniteMeasure::Kind::Discrete:
            return FiniteMeasure::discrete(mu.weights() / m);
        case FiniteMeasure::Kind::Gaussian:
            return FiniteMeasure::weighted_gaussian(1.0, mu.mean(), mu.cov());
        case FiniteMeasure::Kind::Dirac:
            return FiniteMeasure::dirac(mu.point(), 1.0);
        case FiniteMeasure::Kind::Product: {
            std::vector<FiniteMeasure> out;
            out.reserve(mu.parts().size());
            for (const auto& p : mu.parts()) out.push_back(normalized(p));
            return FiniteMeasure::product(std::move(out));
        }
    }
    throw ModelError("normalized: bad measure");
}

Eigen::VectorXd tabulate_measure(const FiniteMeasure& mu, const Space& s) {
    if (!s.all_finite()) throw UnsupportedOperation("tabulate_measure needs a fully finite space");
    const std::int64_t n = s.flat_cardinality();
    switch (mu.kind()) {
        case FiniteMeasure::Kind::Discrete: {
            if (mu.weights().size() != n) throw ModelError("discrete measure length does not match space");
            return mu.weights();
        }
        case FiniteMeasure::Kind::Dirac: {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
            w[mu.point().flatten_index(s)] = mu.mass();
            return w;
        }
        case FiniteMeasure::Kind::Gaussian:
            throw UnsupportedOperation("cannot tabulate a gaussian measure on a finite space");
        case FiniteMeasure::Kind::Product: {
            if (s.kind() != Space::Kind::Product || mu.parts().size() != s.parts().size())
                throw ModelError("product measure arity mismatch with space");
            Eigen::VectorXd acc = tabulate_measure(mu.parts()[0], s.parts()[0]);
            for (std::size_t i = 1; i < mu.parts().size(); ++i)
                acc = linalg::kron(acc, tabulate_measure(mu.parts()[i], s.parts()[i]));
            return acc;
        }
    }
    throw ModelError("tabulate_measure: bad measure");
}

FiniteMeasure merge_gaussian(const FiniteMeasure& mu, const Space& s) {
    if (!s.all_euclidean()) throw UnsupportedOperation("merge_gaussian needs a fully euclidean space");
    switch (mu.kind()) {
        case FiniteMeasure::Kind::Gaussian: {
            if (mu.mean().size() != s.flat_dimension()) throw ModelError("gaussian measure does not match space");
            return mu;
        }
        case FiniteMeasure::Kind::Dirac: {
            Eigen::VectorXd x = mu.point().flatten_vector(s);
            const Eigen::Index d = x.size();
            return FiniteMeasure::weighted_gaussian(mu.mass(), std::move(x), Eigen::MatrixXd::Zero(d, d));
        }
        case FiniteMeasure::Kind::Product: {
            if (s.kind() != Space::Kind::Product || mu.parts().size() != s.parts().size())
                throw ModelError("product measure arity mismatch with space");
            double mass = 1.0;
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(0);
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(0, 0);
            for (std::size_t i = 0; i < mu.parts().size(); ++i) {
                FiniteMeasure g = merge_gaussian(mu.parts()[i], s.parts()[i]);
                mass *= g.mass();
                mean = linalg::concat(mean, g.mean());
                cov = linalg::block_diag(cov, g.cov());
            }
            return FiniteMeasure::weighted_gaussian(mass, std::move(mean), std::move(cov));
        }
        case FiniteMeasure::Kind::Discrete:
            throw UnsupportedOperation("cannot merge a discrete measure into a gaussian");
    }
    throw ModelError("merge_gaussian: bad measure");
}

} // namespace bffg
