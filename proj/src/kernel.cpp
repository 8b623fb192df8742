#include "bffg/kernel.hpp"

#include <cmath>
#include <optional>

#include <boost/math/distributions/normal.hpp>

#include "bffg/errors.hpp"
#include "bffg/linalg.hpp"

namespace bffg {

struct Kernel::Impl {
    Kind kind = Kind::Identity;
    Space source = Space::finite(1);
    Space target = Space::finite(1);
    // Discrete
    Eigen::MatrixXd matrix;
    // LinearGaussian
    Eigen::MatrixXd B;
    Eigen::VectorXd beta;
    Eigen::MatrixXd Q;
    Eigen::LLT<Eigen::MatrixXd> Qllt;
    double logdetQ = 0.0;
    // Sequence / Product
    std::vector<Kernel> children;
};

namespace {

Eigen::MatrixXd validated_stochastic(Eigen::MatrixXd m) {
    if (m.rows() == 0 || m.cols() == 0) throw ModelError("discrete kernel matrix must be nonempty");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            if (!std::isfinite(v) || v < 0.0)
                throw ModelError("discrete kernel entries must be finite and nonnegative");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-8)
            throw ModelError("discrete kernel row " + std::to_string(i) + " sums to " +
                             std::to_string(sum) + ", not 1");
        m.row(i) /= sum;
    }
    return m;
}

} // namespace

Kernel Kernel::discrete(Eigen::MatrixXd row_stochastic) {
    Space src = Space::finite(row_stochastic.rows());
    Space tgt = Space::finite(row_stochastic.cols());
    return discrete_on(std::move(src), std::move(tgt), std::move(row_stochastic));
}

Kernel Kernel::discrete_on(Space source, Space target, Eigen::MatrixXd row_stochastic) {
    if (!source.all_finite() || !target.all_finite())
        throw ModelError("discrete kernel needs finite spaces");
    if (source.flat_cardinality() != row_stochastic.rows() ||
        target.flat_cardinality() != row_stochastic.cols())
        throw ModelError("discrete kernel matrix shape does not match spaces");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Discrete;
    impl->source = std::move(source);
    impl->target = std::move(target);
    impl->matrix = validated_stochastic(std::move(row_stochastic));
    return Kernel(std::move(impl));
}

Kernel Kernel::linear_gaussian(Eigen::MatrixXd B, Eigen::VectorXd beta, Eigen::MatrixXd Q) {
    Space src = Space::euclidean(static_cast<int>(B.cols()));
    Space tgt = Space::euclidean(static_cast<int>(B.rows()));
    return linear_gaussian_on(std::move(src), std::move(tgt), std::move(B), std::move(beta), std::move(Q));
}

Kernel Kernel::linear_gaussian_on(Space source, Space target, Eigen::MatrixXd B,
                                  Eigen::VectorXd beta, Eigen::MatrixXd Q) {
    if (!source.all_euclidean() || !target.all_euclidean())
        throw ModelError("linear-gaussian kernel needs euclidean spaces");
    if (source.flat_dimension() != B.cols() || target.flat_dimension() != B.rows())
        throw ModelError("linear-gaussian kernel B shape does not match spaces");
    if (beta.size() != B.rows() || Q.rows() != B.rows())
        throw ModelError("linear-gaussian kernel beta/Q shapes do not match B");
    if (!B.allFinite() || !beta.allFinite() || !Q.allFinite())
        throw ModelError("linear-gaussian kernel parameters must be finite");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::LinearGaussian;
    impl->source = std::move(source);
    impl->target = std::move(target);
    impl->B = std::move(B);
    impl->beta = std::move(beta);
    impl->Q = linalg::symmetrized(Q, 1e-10, "linear-gaussian kernel Q");
    impl->Qllt = Eigen::LLT<Eigen::MatrixXd>(impl->Q);
    if (impl->Qllt.info() != Eigen::Success)
        throw ModelError("linear-gaussian kernel Q must be positive definite");
    impl->logdetQ = linalg::logdet(impl->Qllt);
    return Kernel(std::move(impl));
}

Kernel Kernel::identity(Space s) {
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Identity;
    impl->source = s;
    impl->target = std::move(s);
    return Kernel(std::move(impl));
}

Kernel Kernel::duplication(Space s) {
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Duplication;
    impl->source = s;
    impl->target = Space::pair(s, s);
    return Kernel(std::move(impl));
}

Kernel Kernel::sequence(std::vector<Kernel> steps) {
    if (steps.empty()) throw ModelError("sequence kernel needs at least one step");
    if (steps.size() == 1) return steps.front();
    for (std::size_t i = 0; i + 1 < steps.size(); ++i)
        if (steps[i].target() != steps[i + 1].source())
            throw ModelError("sequence kernel: adjacent spaces do not match");
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Sequence;
    impl->source = steps.front().source();
    impl->target = steps.back().target();
    impl->children = std::move(steps);
    return Kernel(std::move(impl));
}

Kernel Kernel::product(std::vector<Kernel> factors) {
    if (factors.size() < 2) throw ModelError("product kernel needs at least 2 factors");
    std::vector<Space> srcs, tgts;
    for (const auto& f : factors) {
        srcs.push_back(f.source());
        tgts.push_back(f.target());
    }
    auto impl = std::make_shared<Impl>();
    impl->kind = Kind::Product;
    impl->source = Space::product(std::move(srcs));
    impl->target = Space::product(std::move(tgts));
    impl->children = std::move(factors);
    return Kernel(std::move(impl));
}

Kernel::Kind Kernel::kind() const { return impl_->kind; }
const Space& Kernel::source() const { return impl_->source; }
const Space& Kernel::target() const { return impl_->target; }

const Eigen::MatrixXd& Kernel::matrix() const {
    if (impl_->kind != Kind::Discrete) throw ModelError("matrix() on non-discrete kernel");
    return impl_->matrix;
}

const Eigen::MatrixXd& Kernel::transition() const {
    if (impl_->kind != Kind::LinearGaussian) throw ModelError("transition() on non-LG kernel");
    return impl_->B;
}

const Eigen::VectorXd& Kernel::shift() const {
    if (impl_->kind != Kind::LinearGaussian) throw ModelError("shift() on non-LG kernel");
    return impl_->beta;
}

const Eigen::MatrixXd& Kernel::noise_cov() const {
    if (impl_->kind != Kind::LinearGaussian) throw ModelError("noise_cov() on non-LG kernel");
    return impl_->Q;
}

const Eigen::LLT<Eigen::MatrixXd>& Kernel::noise_chol() const {
    if (impl_->kind != Kind::LinearGaussian) throw ModelError("noise_chol() on non-LG kernel");
    return impl_->Qllt;
}

double Kernel::noise_logdet() const {
    if (impl_->kind != Kind::LinearGaussian) throw ModelError("noise_logdet() on non-LG kernel");
    return impl_->logdetQ;
}

const std::vector<Kernel>& Kernel::steps() const {
    if (impl_->kind != Kind::Sequence) throw ModelError("steps() on non-sequence kernel");
    return impl_->children;
}

const std::vector<Kernel>& Kernel::factors() const {
    if (impl_->kind != Kind::Product) throw ModelError("factors() on non-product kernel");
    return impl_->children;
}

bool Kernel::same_as(const Kernel& other) const {
    if (impl_ == other.impl_) return true;
    if (kind() != other.kind() || source() != other.source() || target() != other.target()) return false;
    switch (kind()) {
        case Kind::Identity:
        case Kind::Duplication:
            return true;
        case Kind::Discrete:
            return matrix() == other.matrix();
        case Kind::LinearGaussian:
            return transition() == other.transition() && shift() == other.shift() &&
                   noise_cov() == other.noise_cov();
        case Kind::Sequence:
        case Kind::Product: {
            const auto& a = impl_->children;
            const auto& b = other.impl_->children;
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (!a[i].same_as(b[i])) return false;
            return true;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// composition and tensoring

Kernel compose_kernels(const Kernel& k1, const Kernel& k2) {
    if (k1.target() != k2.source())
        throw ModelError("compose: k1 target " + k1.target().describe() + " != k2 source " +
                         k2.source().describe());
    if (k1.kind() == Kernel::Kind::Identity) return k2;
    if (k2.kind() == Kernel::Kind::Identity) return k1;
    if (k1.kind() == Kernel::Kind::Discrete && k2.kind() == Kernel::Kind::Discrete)
        return Kernel::discrete_on(k1.source(), k2.target(), k1.matrix() * k2.matrix());
    if (k1.kind() == Kernel::Kind::LinearGaussian && k2.kind() == Kernel::Kind::LinearGaussian) {
        const Eigen::MatrixXd B = k2.transition() * k1.transition();
        const Eigen::VectorXd beta = k2.transition() * k1.shift() + k2.shift();
        Eigen::MatrixXd Q = k2.transition() * k1.noise_cov() * k2.transition().transpose() + k2.noise_cov();
        Q = 0.5 * (Q + Q.transpose());
        return Kernel::linear_gaussian_on(k1.source(), k2.target(), B, beta, std::move(Q));
    }
    // No closed form: keep the chain for sampling/fold-style transport.
    std::vector<Kernel> steps;
    auto append = [&steps](const Kernel& k) {
        if (k.kind() == Kernel::Kind::Sequence)
            steps.insert(steps.end(), k.steps().begin(), k.steps().end());
        else
            steps.push_back(k);
    };
    append(k1);
    append(k2);
    return Kernel::sequence(std::move(steps));
}

namespace {

// Discrete matrix view of a kernel, materializing finite identities.
std::optional<Eigen::MatrixXd> as_discrete_matrix(const Kernel& k) {
    if (k.kind() == Kernel::Kind::Discrete) return k.matrix();
    if (k.kind() == Kernel::Kind::Identity && k.source().all_finite()) {
        const std::int64_t n = k.source().flat_cardinality();
        return Eigen::MatrixXd::Identity(n, n);
    }
    return std::nullopt;
}

} // namespace

Kernel tensor_kernels(const Kernel& k1, const Kernel& k2) {
    const Space src = Space::pair(k1.source(), k2.source());
    const Space tgt = Space::pair(k1.target(), k2.target());
    if (k1.kind() == Kernel::Kind::Identity && k2.kind() == Kernel::Kind::Identity)
        return Kernel::identity(src);
    const auto m1 = as_discrete_matrix(k1);
    const auto m2 = as_discrete_matrix(k2);
    if (m1 && m2) return Kernel::discrete_on(src, tgt, linalg::kron(*m1, *m2));
    if (k1.kind() == Kernel::Kind::LinearGaussian && k2.kind() == Kernel::Kind::LinearGaussian) {
        return Kernel::linear_gaussian_on(src, tgt, linalg::block_diag(k1.transition(), k2.transition()),
                                          linalg::concat(k1.shift(), k2.shift()),
                                          linalg::block_diag(k1.noise_cov(), k2.noise_cov()));
    }
    return Kernel::product({k1, k2});
}

// ---------------------------------------------------------------------------
// pushforward

FiniteMeasure pushforward(const Kernel& k, const FiniteMeasure& mu) {
    switch (k.kind()) {
        case Kernel::Kind::Identity:
            return mu;
        case Kernel::Kind::Discrete: {
            if (mu.kind() == FiniteMeasure::Kind::Dirac) {
                const std::int64_t i = mu.point().flatten_index(k.source());
                return FiniteMeasure::discrete(mu.mass() * k.matrix().row(i).transpose());
            }
            const Eigen::VectorXd w = tabulate_measure(mu, k.source());
            return FiniteMeasure::discrete(k.matrix().transpose() * w);
        }
        case Kernel::Kind::LinearGaussian: {
            if (mu.kind() == FiniteMeasure::Kind::Dirac) {
                const Eigen::VectorXd x = mu.point().flatten_vector(k.source());
                return FiniteMeasure::weighted_gaussian(mu.mass(), k.transition() * x + k.shift(),
                                                        k.noise_cov());
            }
            const FiniteMeasure g = merge_gaussian(mu, k.source());
            Eigen::MatrixXd cov =
                k.transition() * g.cov() * k.transition().transpose() + k.noise_cov();
            return FiniteMeasure::weighted_gaussian(g.mass(), k.transition() * g.mean() + k.shift(),
                                                    0.5 * (cov + cov.transpose()));
        }
        case Kernel::Kind::Duplication: {
            if (mu.kind() != FiniteMeasure::Kind::Dirac)
                throw UnsupportedOperation(
                    "duplication pushforward needs an atomic measure: the copied law is not a "
                    "product measure");
            return FiniteMeasure::dirac(Point::pair(mu.point(), mu.point()), mu.mass());
        }
        case Kernel::Kind::Sequence: {
            FiniteMeasure out = mu;
            for (const auto& step : k.steps()) out = pushforward(step, out);
            return out;
        }
        case Kernel::Kind::Product: {
            const auto& fs = k.factors();
            std::vector<FiniteMeasure> parts;
            parts.reserve(fs.size());
            if (mu.kind() == FiniteMeasure::Kind::Dirac) {
                const auto& xs = mu.point().parts();
                if (xs.size() != fs.size()) throw ModelError("product kernel: tuple arity mismatch");
                for (std::size_t i = 0; i < fs.size(); ++i)
                    parts.push_back(pushforward(fs[i], FiniteMeasure::dirac(xs[i], i == 0 ? mu.mass() : 1.0)));
            } else if (mu.kind() == FiniteMeasure::Kind::Product && mu.parts().size() == fs.size()) {
                for (std::size_t i = 0; i < fs.size(); ++i)
                    parts.push_back(pushforward(fs[i], mu.parts()[i]));
            } else {
                throw UnsupportedOperation("product kernel pushforward needs a product or atomic measure");
            }
            return FiniteMeasure::product(std::move(parts));
        }
    }
    throw ModelError("pushforward: bad kernel");
}

// ---------------------------------------------------------------------------
// pullback

namespace {

// Backward transport of exp(logc + F.y - y.Hy/2) through y | x ~ N(Bx+beta, Q):
// integrating out y leaves another exponential-quadratic in x. With
// G = (H + Q^{-1})^{-1} computed as L M^{-1} L^T, M = I + L^T H L, L = chol(Q):
//   H' = B^T (H - H G H) B
//   F' = B^T (I - H G) v0,            v0 = F - H beta
//   logc' = logc + F.beta - beta.H beta/2 + v0.G v0/2 - logdet(M)/2
HPotential lg_pullback(const Kernel& k, const HPotential& h) {
    const Eigen::MatrixXd& B = k.transition();
    const Eigen::VectorXd& beta = k.shift();
    const Eigen::MatrixXd L = k.noise_chol().matrixL();
    const Eigen::MatrixXd& H = h.quad();
    const Eigen::VectorXd& F = h.lin();
    if (F.size() != B.rows()) throw ModelError("potential dimension does not match kernel target");

    const Eigen::Index d = B.rows();
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) + L.transpose() * H * L;
    M = 0.5 * (M + M.transpose());
    Eigen::LLT<Eigen::MatrixXd> Mllt(M);
    if (Mllt.info() != Eigen::Success)
        throw NumericalError("pullback diverges: H + Q^{-1} is not positive definite");
    const Eigen::MatrixXd G = L * Mllt.solve(L.transpose());

    const Eigen::VectorXd v0 = F - H * beta;
    Eigen::MatrixXd Hp = B.transpose() * (H - H * G * H) * B;
    Hp = 0.5 * (Hp + Hp.transpose());
    Eigen::VectorXd Fp = B.transpose() * (v0 - H * (G * v0));
    const double logcp = h.logc() + F.dot(beta) - 0.5 * beta.dot(H * beta) +
                         0.5 * v0.dot(G * v0) - 0.5 * linalg::logdet(Mllt);
    return HPotential::gaussian(logcp, std::move(Fp), std::move(Hp));
}

// Restriction of a potential on s x s to the diagonal x -> h((x, x)).
HPotential duplication_pullback(const Kernel& k, const HPotential& h) {
    const Space& s = k.source();
    if (h.is_one()) return HPotential::one();
    if (h.kind() == HPotential::Kind::Product) {
        if (h.parts().size() != 2) throw ModelError("duplication pullback expects a binary product potential");
        return pointwise_product(h.parts()[0], h.parts()[1]);
    }
    if (h.kind() == HPotential::Kind::Discrete && s.all_finite()) {
        const std::int64_t n = s.flat_cardinality();
        if (h.values().size() != n * n) throw ModelError("potential length does not match duplicated space");
        Eigen::VectorXd diag(n);
        for (std::int64_t i = 0; i < n; ++i) diag[i] = h.values()[i * n + i];
        return HPotential::discrete(std::move(diag));
    }
    if (h.kind() == HPotential::Kind::Gaussian && s.all_euclidean()) {
        const int d = s.flat_dimension();
        if (h.lin().size() != 2 * d) throw ModelError("potential dimension does not match duplicated space");
        const Eigen::VectorXd F = h.lin().head(d) + h.lin().tail(d);
        Eigen::MatrixXd H = h.quad().topLeftCorner(d, d) + h.quad().bottomRightCorner(d, d) +
                            h.quad().topRightCorner(d, d) + h.quad().bottomLeftCorner(d, d);
        H = 0.5 * (H + H.transpose());
        return HPotential::gaussian(h.logc(), F, std::move(H));
    }
    throw UnsupportedOperation("duplication pullback not defined for this potential family");
}

} // namespace

HPotential pullback(const Kernel& k, const HPotential& h) {
    switch (k.kind()) {
        case Kernel::Kind::Identity:
            return h;
        case Kernel::Kind::Discrete: {
            const HPotential flat = flatten_potential(h, k.target());
            if (flat.is_one()) return HPotential::one(); // rows sum to one exactly
            return HPotential::discrete(k.matrix() * flat.values());
        }
        case Kernel::Kind::LinearGaussian: {
            const HPotential flat = flatten_potential(h, k.target());
            if (flat.is_one()) return HPotential::one(); // mass preservation
            return lg_pullback(k, flat);
        }
        case Kernel::Kind::Duplication:
            return duplication_pullback(k, h);
        case Kernel::Kind::Sequence: {
            HPotential out = h;
            for (auto it = k.steps().rbegin(); it != k.steps().rend(); ++it) out = pullback(*it, out);
            return out;
        }
        case Kernel::Kind::Product: {
            if (h.is_one()) return HPotential::one();
            if (h.kind() != HPotential::Kind::Product || h.parts().size() != k.factors().size())
                throw UnsupportedOperation("product kernel pullback needs a matching product potential");
            std::vector<HPotential> parts;
            parts.reserve(k.factors().size());
            bool all_one = true;
            for (std::size_t i = 0; i < k.factors().size(); ++i) {
                parts.push_back(pullback(k.factors()[i], h.parts()[i]));
                all_one = all_one && parts.back().is_one();
            }
            if (all_one) return HPotential::one();
            return HPotential::product(std::move(parts));
        }
    }
    throw ModelError("pullback: bad kernel");
}

// ---------------------------------------------------------------------------
// observation densities

HPotential observation_potential(const ObservationModel& om) {
    const Kernel& k = om.kernel;
    switch (k.kind()) {
        case Kernel::Kind::Discrete: {
            const std::int64_t j = om.observed_value.flatten_index(k.target());
            return HPotential::discrete(k.matrix().col(j));
        }
        case Kernel::Kind::LinearGaussian: {
            // x -> N(v; Bx + beta, Q) as an exponential-quadratic in x.
            const Eigen::VectorXd v = om.observed_value.flatten_vector(k.target());
            const Eigen::VectorXd r = v - k.shift();
            const Eigen::VectorXd s = k.noise_chol().solve(r);
            const Eigen::MatrixXd QiB = k.noise_chol().solve(k.transition());
            Eigen::MatrixXd H = k.transition().transpose() * QiB;
            H = 0.5 * (H + H.transpose());
            Eigen::VectorXd F = k.transition().transpose() * s;
            const double d = static_cast<double>(k.transition().rows());
            const double logc = -0.5 * r.dot(s) - 0.5 * (d * std::log(2.0 * M_PI) + k.noise_logdet());
            return HPotential::gaussian(logc, std::move(F), std::move(H));
        }
        default:
            throw ModelError("observation kernel must be discrete or linear-gaussian (a pointwise density is required)");
    }
}

// ---------------------------------------------------------------------------
// sampling

Point sample_kernel(const Kernel& k, const Point& x, RandomStream& stream) {
    switch (k.kind()) {
        case Kernel::Kind::Identity:
            return x;
        case Kernel::Kind::Duplication:
            return Point::pair(x, x); // consumes no randomness
        case Kernel::Kind::Discrete: {
            const std::int64_t i = x.flatten_index(k.source());
            const auto row = k.matrix().row(i);
            const double u = stream.next_uniform();
            // Inverse CDF, fixed left-to-right cumulative order.
            double c = 0.0;
            std::int64_t last_positive = -1;
            for (Eigen::Index j = 0; j < row.size(); ++j) {
                if (row[j] <= 0.0) continue;
                last_positive = j;
                c += row[j];
                if (u < c) return Point::unflatten_index(j, k.target());
            }
            if (last_positive < 0) throw NumericalError("discrete kernel row is all zero");
            return Point::unflatten_index(last_positive, k.target());
        }
        case Kernel::Kind::LinearGaussian: {
            const Eigen::VectorXd xv = x.flatten_vector(k.source());
            const Eigen::Index d = k.transition().rows();
            Eigen::VectorXd z(d);
            static const boost::math::normal_distribution<double> unit_normal(0.0, 1.0);
            for (Eigen::Index j = 0; j < d; ++j)
                z[j] = boost::math::quantile(unit_normal, stream.next_uniform());
            const Eigen::MatrixXd L = k.noise_chol().matrixL();
            const Eigen::VectorXd y = k.transition() * xv + k.shift() + L * z;
            return Point::unflatten_vector(y, k.target());
        }
        case Kernel::Kind::Sequence: {
            Point cur = x;
            for (const auto& step : k.steps()) {
                auto [draw, rest] = stream.split();
                cur = sample_kernel(step, cur, draw);
                stream = rest;
            }
            return cur;
        }
        case Kernel::Kind::Product: {
            const auto& fs = k.factors();
            if (x.kind() != Point::Kind::Tuple || x.parts().size() != fs.size())
                throw ModelError("product kernel: tuple arity mismatch");
            std::vector<Point> out;
            out.reserve(fs.size());
            for (std::size_t i = 0; i < fs.size(); ++i) {
                if (i + 1 < fs.size()) {
                    auto [draw, rest] = stream.split();
                    out.push_back(sample_kernel(fs[i], x.parts()[i], draw));
                    stream = rest;
                } else {
                    out.push_back(sample_kernel(fs[i], x.parts()[i], stream));
                }
            }
            return Point::tuple(std::move(out));
        }
    }
    throw ModelError("sample_kernel: bad kernel");
}

} // namespace bffg
