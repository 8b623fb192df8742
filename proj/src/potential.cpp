#include "bffg/potential.hpp"

#include <cmath>
#include <limits>

#include "bffg/errors.hpp"
#include "bffg/linalg.hpp"

namespace bffg {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

HPotential HPotential::one() { return HPotential(); }

HPotential HPotential::discrete(Eigen::VectorXd values) {
    if (values.size() == 0) throw ModelError("discrete potential must be nonempty");
    bool any_positive = false;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
            throw ModelError("discrete potential entries must be finite and nonnegative");
        if (values[i] > 0.0) any_positive = true;
    }
    if (!any_positive) throw ModelError("discrete potential must have a positive entry");
    HPotential h;
    h.kind_ = Kind::Discrete;
    h.values_ = std::move(values);
    return h;
}

HPotential HPotential::gaussian(double logc, Eigen::VectorXd F, Eigen::MatrixXd H) {
    if (!std::isfinite(logc)) throw ModelError("gaussian potential logc must be finite");
    if (H.rows() != F.size()) throw ModelError("gaussian potential: F and H sizes disagree");
    if (!F.allFinite() || !H.allFinite()) throw ModelError("gaussian potential parameters must be finite");
    HPotential h;
    h.kind_ = Kind::Gaussian;
    h.logc_ = logc;
    h.lin_ = std::move(F);
    h.quad_ = linalg::symmetrized(H, 1e-10, "gaussian potential H");
    return h;
}

HPotential HPotential::product(std::vector<HPotential> parts) {
    if (parts.size() < 2) throw ModelError("product potential needs at least 2 factors");
    HPotential h;
    h.kind_ = Kind::Product;
    h.parts_ = std::move(parts);
    return h;
}

HPotential HPotential::pair(HPotential a, HPotential b) {
    std::vector<HPotential> ps;
    ps.push_back(std::move(a));
    ps.push_back(std::move(b));
    return product(std::move(ps));
}

const Eigen::VectorXd& HPotential::values() const {
    if (kind_ != Kind::Discrete) throw ModelError("values() on non-discrete potential");
    return values_;
}

double HPotential::logc() const {
    if (kind_ != Kind::Gaussian) throw ModelError("logc() on non-gaussian potential");
    return logc_;
}

const Eigen::VectorXd& HPotential::lin() const {
    if (kind_ != Kind::Gaussian) throw ModelError("lin() on non-gaussian potential");
    return lin_;
}

const Eigen::MatrixXd& HPotential::quad() const {
    if (kind_ != Kind::Gaussian) throw ModelError("quad() on non-gaussian potential");
    return quad_;
}

int HPotential::gaussian_dim() const { return static_cast<int>(lin().size()); }

const std::vector<HPotential>& HPotential::parts() const {
    if (kind_ != Kind::Product) throw ModelError("parts() on non-product potential");
    return parts_;
}

double evaluate(const HPotential& h, const Point& x) {
    switch (h.kind()) {
        case HPotential::Kind::One:
            return 1.0;
        case HPotential::Kind::Discrete: {
            if (x.kind() != Point::Kind::Index) throw ModelError("discrete potential expects an index point");
            std::int64_t i = x.index_value();
            if (i >= h.values().size()) throw ModelError("index point out of range for discrete potential");
            return h.values()[i];
        }
        case HPotential::Kind::Gaussian: {
            if (x.kind() != Point::Kind::Vector) throw ModelError("gaussian potential expects a vector point");
            const Eigen::VectorXd& v = x.vector_value();
            if (v.size() != h.lin().size()) throw ModelError("vector point has wrong dimension for potential");
            return std::exp(h.logc() + h.lin().dot(v) - 0.5 * v.dot(h.quad() * v));
        }
        case HPotential::Kind::Product: {
            if (x.kind() != Point::Kind::Tuple) throw ModelError("product potential expects a tuple point");
            const auto& ps = h.parts();
            const auto& xs = x.parts();
            if (ps.size() != xs.size()) throw ModelError("tuple arity mismatch for product potential");
            double out = 1.0;
            for (std::size_t i = 0; i < ps.size(); ++i) out *= evaluate(ps[i], xs[i]);
            return out;
        }
    }
    throw ModelError("evaluate: bad potential");
}

double log_evaluate(const HPotential& h, const Point& x) {
    switch (h.kind()) {
        case HPotential::Kind::One:
            return 0.0;
        case HPotential::Kind::Discrete: {
            double v = evaluate(h, x);
            return v > 0.0 ? std::log(v) : kNegInf;
        }
        case HPotential::Kind::Gaussian: {
            if (x.kind() != Point::Kind::Vector) throw ModelError("gaussian potential expects a vector point");
            const Eigen::VectorXd& v = x.vector_value();
            if (v.size() != h.lin().size()) throw ModelError("vector point has wrong dimension for potential");
            return h.logc() + h.lin().dot(v) - 0.5 * v.dot(h.quad() * v);
        }
        case HPotential::Kind::Product: {
            const auto& ps = h.parts();
            const auto& xs = x.parts();
            if (ps.size() != xs.size()) throw ModelError("tuple arity mismatch for product potential");
            double out = 0.0;
            for (std::size_t i = 0; i < ps.size(); ++i) out += log_evaluate(ps[i], xs[i]);
            return out;
        }
    }
    throw ModelError("log_evaluate: bad potential");
}

HPotential tensor_potential(const HPotential& g1, const HPotential& g2) {
    if (g1.is_one() && g2.is_one()) return HPotential::one();
    return HPotential::pair(g1, g2);
}

HPotential pointwise_product(const HPotential& a, const HPotential& b) {
    if (a.is_one()) return b;
    if (b.is_one()) return a;
    if (a.kind() == HPotential::Kind::Discrete && b.kind() == HPotential::Kind::Discrete) {
        if (a.values().size() != b.values().size())
            throw ModelError("pointwise product of discrete potentials of different sizes");
        return HPotential::discrete(a.values().cwiseProduct(b.values()));
    }
    if (a.kind() == HPotential::Kind::Gaussian && b.kind() == HPotential::Kind::Gaussian) {
        if (a.lin().size() != b.lin().size())
            throw ModelError("pointwise product of gaussian potentials of different dimensions");
        return HPotential::gaussian(a.logc() + b.logc(), a.lin() + b.lin(), a.quad() + b.quad());
    }
    if (a.kind() == HPotential::Kind::Product && b.kind() == HPotential::Kind::Product &&
        a.parts().size() == b.parts().size()) {
        std::vector<HPotential> out;
        out.reserve(a.parts().size());
        for (std::size_t i = 0; i < a.parts().size(); ++i)
            out.push_back(pointwise_product(a.parts()[i], b.parts()[i]));
        return HPotential::product(std::move(out));
    }
    throw UnsupportedOperation("pointwise product not defined for this potential pairing");
}

double evaluate_on(const HPotential& h, const Space& s, const Point& x) {
    switch (h.kind()) {
        case HPotential::Kind::One:
            return 1.0;
        case HPotential::Kind::Discrete: {
            std::int64_t i = x.flatten_index(s);
            if (i >= h.values().size()) throw ModelError("flat index out of range for discrete potential");
            return h.values()[i];
        }
        case HPotential::Kind::Gaussian:
            return evaluate(h, Point::vector(x.flatten_vector(s)));
        case HPotential::Kind::Product: {
            if (s.kind() != Space::Kind::Product)
                throw ModelError("product potential needs a product space");
            if (x.kind() != Point::Kind::Tuple) {
                // flat representations are fine: restructure against the space
                if (x.kind() == Point::Kind::Index && s.all_finite())
                    return evaluate_on(h, s, Point::unflatten_index(x.index_value(), s));
                if (x.kind() == Point::Kind::Vector && s.all_euclidean())
                    return evaluate_on(h, s, Point::unflatten_vector(x.vector_value(), s));
                throw ModelError("product potential needs a tuple point or a flat equivalent");
            }
            const auto& ps = h.parts();
            const auto& ss = s.parts();
            const auto& xs = x.parts();
            if (ps.size() != ss.size() || ps.size() != xs.size())
                throw ModelError("product potential arity mismatch");
            double out = 1.0;
            for (std::size_t i = 0; i < ps.size(); ++i) out *= evaluate_on(ps[i], ss[i], xs[i]);
            return out;
        }
    }
    throw ModelError("evaluate_on: bad potential");
}

double log_evaluate_on(const HPotential& h, const Space& s, const Point& x) {
    switch (h.kind()) {
        case HPotential::Kind::One:
            return 0.0;
        case HPotential::Kind::Discrete: {
            double v = evaluate_on(h, s, x);
            return v > 0.0 ? std::log(v) : kNegInf;
        }
        case HPotential::Kind::Gaussian:
            return log_evaluate(h, Point::vector(x.flatten_vector(s)));
        case HPotential::Kind::Product: {
            if (s.kind() != Space::Kind::Product)
                throw ModelError("product potential needs a product space");
            if (x.kind() != Point::Kind::Tuple) {
                if (x.kind() == Point::Kind::Index && s.all_finite())
                    return log_evaluate_on(h, s, Point::unflatten_index(x.index_value(), s));
                if (x.kind() == Point::Kind::Vector && s.all_euclidean())
                    return log_evaluate_on(h, s, Point::unflatten_vector(x.vector_value(), s));
                throw ModelError("product potential needs a tuple point or a flat equivalent");
            }
            const auto& ps = h.parts();
            const auto& ss = s.parts();
            const auto& xs = x.parts();
            if (ps.size() != ss.size() || ps.size() != xs.size())
                throw ModelError("product potential arity mismatch");
            double out = 0.0;
            for (std::size_t i = 0; i < ps.size(); ++i) out += log_evaluate_on(ps[i], ss[i], xs[i]);
            return out;
        }
    }
    throw ModelError("log_evaluate_on: bad potential");
}

Eigen::VectorXd tabulate(const HPotential& h, const Space& s) {
    if (!s.all_finite()) throw UnsupportedOperation("tabulate needs a fully finite space");
    const std::int64_t n = s.flat_cardinality();
    switch (h.kind()) {
        case HPotential::Kind::One:
            return Eigen::VectorXd::Ones(n);
        case HPotential::Kind::Discrete: {
            if (h.values().size() != n) throw ModelError("discrete potential length does not match space");
            return h.values();
        }
        case HPotential::Kind::Gaussian:
            throw UnsupportedOperation("cannot tabulate a gaussian potential on a finite space");
        case HPotential::Kind::Product: {
            if (s.kind() != Space::Kind::Product || h.parts().size() != s.parts().size())
                throw ModelError("product potential arity mismatch with space");
            Eigen::VectorXd acc = tabulate(h.parts()[0], s.parts()[0]);
            for (std::size_t i = 1; i < h.parts().size(); ++i)
                acc = linalg::kron(acc, tabulate(h.parts()[i], s.parts()[i]));
            return acc;
        }
    }
    throw ModelError("tabulate: bad potential");
}

HPotential flatten_potential(const HPotential& h, const Space& s) {
    switch (h.kind()) {
        case HPotential::Kind::One:
            return HPotential::one();
        case HPotential::Kind::Discrete:
            if (!s.all_finite() || h.values().size() != s.flat_cardinality())
                throw ModelError("discrete potential does not match space");
            return h;
        case HPotential::Kind::Gaussian:
            if (!s.all_euclidean() || h.lin().size() != s.flat_dimension())
                throw ModelError("gaussian potential does not match space");
            return h;
        case HPotential::Kind::Product: {
            if (s.kind() != Space::Kind::Product || h.parts().size() != s.parts().size())
                throw ModelError("product potential arity mismatch with space");
            bool all_one = true;
            for (const auto& p : h.parts())
                if (!p.is_one()) all_one = false;
            if (all_one) return HPotential::one();
            if (s.all_finite()) return HPotential::discrete(tabulate(h, s));
            if (s.all_euclidean()) {
                double logc = 0.0;
                Eigen::VectorXd F = Eigen::VectorXd::Zero(0);
                Eigen::MatrixXd H = Eigen::MatrixXd::Zero(0, 0);
                for (std::size_t i = 0; i < h.parts().size(); ++i) {
                    HPotential fi = flatten_potential(h.parts()[i], s.parts()[i]);
                    int d = s.parts()[i].flat_dimension();
                    if (fi.is_one()) {
                        F = linalg::concat(F, Eigen::VectorXd::Zero(d));
                        H = linalg::block_diag(H, Eigen::MatrixXd::Zero(d, d));
                    } else {
                        logc += fi.logc();
                        F = linalg::concat(F, fi.lin());
                        H = linalg::block_diag(H, fi.quad());
                    }
                }
                return HPotential::gaussian(logc, std::move(F), std::move(H));
            }
            throw UnsupportedOperation("cannot flatten a potential over a mixed finite/euclidean space");
        }
    }
    throw ModelError("flatten_potential: bad potential");
}

} // namespace bffg
