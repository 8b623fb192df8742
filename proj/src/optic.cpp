#include "bffg/optic.hpp"

#include <cmath>
#include <utility>

#include "bffg/errors.hpp"
#include "bffg/linalg.hpp"
#include "bffg/random_models.hpp"

namespace bffg {

namespace {

// Collapse Dirac and product-of-Dirac measures to one atom; nullopt otherwise.
std::optional<FiniteMeasure> as_atomic(const FiniteMeasure& mu) {
    if (mu.kind() == FiniteMeasure::Kind::Dirac) return mu;
    if (mu.kind() == FiniteMeasure::Kind::Product) {
        std::vector<Point> points;
        double mass = 1.0;
        points.reserve(mu.parts().size());
        for (const auto& part : mu.parts()) {
            auto atom = as_atomic(part);
            if (!atom) return std::nullopt;
            points.push_back(atom->point());
            mass *= atom->mass();
        }
        return FiniteMeasure::dirac(Point::tuple(std::move(points)), mass);
    }
    return std::nullopt;
}

struct GaussParams {
    double logc;
    Eigen::VectorXd lin;
    Eigen::MatrixXd quad;
};

// Flat potential on a Euclidean space as explicit exponential-quadratic data;
// One contributes the zero form.
GaussParams gaussian_params(const HPotential& flat, int dim) {
    if (flat.is_one())
        return {0.0, Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim)};
    if (flat.kind() == HPotential::Kind::Gaussian) return {flat.logc(), flat.lin(), flat.quad()};
    throw UnsupportedOperation("expected a Gaussian or constant potential on a Euclidean space");
}

// The i-th factor of a potential on a k-part product space; One spreads to One.
HPotential potential_part(const HPotential& h, std::size_t i, std::size_t arity) {
    if (h.is_one()) return HPotential::one();
    if (h.kind() == HPotential::Kind::Product && h.parts().size() == arity) return h.parts()[i];
    throw UnsupportedOperation("potential does not factor across the parallel block");
}

// integral of num(x)/den(x) d mu(x); the common core of weight().
double ratio_integral(const HPotential& num, const HPotential& den, const FiniteMeasure& mu,
                      const Space& s) {
    if (auto atom = as_atomic(mu)) {
        double log_den = log_evaluate_on(den, s, atom->point());
        if (std::isinf(log_den) && log_den < 0.0)
            throw NumericalError("weight: message denominator vanishes at the evaluation point");
        double log_num = log_evaluate_on(num, s, atom->point());
        return atom->mass() * std::exp(log_num - log_den);
    }
    if (s.all_finite()) {
        Eigen::VectorXd mu_v = tabulate_measure(mu, s);
        Eigen::VectorXd num_v = tabulate(num, s);
        Eigen::VectorXd den_v = tabulate(den, s);
        double total = 0.0;
        for (Eigen::Index i = 0; i < mu_v.size(); ++i) {
            if (mu_v[i] == 0.0) continue;
            if (den_v[i] <= 0.0)
                throw NumericalError("weight: message denominator vanishes on the support of the measure");
            total += mu_v[i] * num_v[i] / den_v[i];
        }
        return total;
    }
    if (s.all_euclidean()) {
        FiniteMeasure merged = merge_gaussian(mu, s);
        int dim = s.flat_dimension();
        GaussParams np = gaussian_params(flatten_potential(num, s), dim);
        GaussParams dp = gaussian_params(flatten_potential(den, s), dim);
        return gaussian_integral(merged.mass(), merged.mean(), merged.cov(), np.logc - dp.logc,
                                 np.lin - dp.lin, np.quad - dp.quad);
    }
    if (s.kind() == Space::Kind::Product && mu.kind() == FiniteMeasure::Kind::Product &&
        mu.parts().size() == s.parts().size()) {
        std::size_t arity = s.parts().size();
        double total = 1.0;
        for (std::size_t i = 0; i < arity; ++i)
            total *= ratio_integral(potential_part(num, i, arity), potential_part(den, i, arity),
                                    mu.parts()[i], s.parts()[i]);
        return total;
    }
    throw UnsupportedOperation("weight: mixed spaces need a product or atomic measure");
}

// Proper conditional dynamics kappa^g(x, dy) proportional to g(y) kappa(x, dy).
Kernel guided_from(const Kernel& k, const HPotential& numerator) {
    switch (k.kind()) {
    case Kernel::Kind::Identity:
    case Kernel::Kind::Duplication:
        // Deterministic kernels are unchanged by conditioning on the future.
        return k;
    case Kernel::Kind::Discrete: {
        HPotential flat = flatten_potential(numerator, k.target());
        if (flat.is_one()) return k;
        Eigen::VectorXd g = tabulate(flat, k.target());
        Eigen::MatrixXd m = k.matrix();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            Eigen::RowVectorXd row = m.row(r).cwiseProduct(g.transpose());
            double total = row.sum();
            if (!(total > 0.0) || !std::isfinite(total))
                throw NumericalError("guided kernel: state " + std::to_string(r) +
                                     " has no mass under the target potential");
            m.row(r) = row / total;
        }
        return Kernel::discrete_on(k.source(), k.target(), m);
    }
    case Kernel::Kind::LinearGaussian: {
        HPotential flat = flatten_potential(numerator, k.target());
        if (flat.is_one()) return k;
        int d = k.target().flat_dimension();
        Eigen::MatrixXd q_inv = k.noise_chol().solve(Eigen::MatrixXd::Identity(d, d));
        Eigen::MatrixXd prec =
            linalg::symmetrized(q_inv + flat.quad(), 1e-8, "guided kernel precision");
        Eigen::LLT<Eigen::MatrixXd> prec_llt = linalg::chol_pd(prec, "guided kernel precision");
        Eigen::MatrixXd b_star = prec_llt.solve(q_inv * k.transition());
        Eigen::VectorXd beta_star = prec_llt.solve(q_inv * k.shift() + flat.lin());
        Eigen::MatrixXd q_star = prec_llt.solve(Eigen::MatrixXd::Identity(d, d));
        return Kernel::linear_gaussian_on(k.source(), k.target(), b_star, beta_star,
                                          0.5 * (q_star + q_star.transpose()));
    }
    case Kernel::Kind::Product: {
        if (numerator.is_one()) return k;
        std::size_t arity = k.factors().size();
        std::vector<Kernel> guided;
        guided.reserve(arity);
        for (std::size_t i = 0; i < arity; ++i)
            guided.push_back(guided_from(k.factors()[i], potential_part(numerator, i, arity)));
        return Kernel::product(std::move(guided));
    }
    case Kernel::Kind::Sequence:
        throw UnsupportedOperation(
            "guided kernel: a sequence kernel has no one-step conditional; compose the steps first");
    }
    throw ModelError("guided kernel: unknown kernel kind");
}

} // namespace

Optic::Optic(Kernel forward, Kernel backward)
    : forward_(std::move(forward)), backward_(std::move(backward)) {
    if (!(forward_.source() == backward_.source()) || !(forward_.target() == backward_.target()))
        throw ModelError("optic: forward and backward kernels must share source and target spaces");
}

OpticProgram OpticProgram::prim(Optic o, std::string label) {
    OpticProgram p;
    p.kind_ = Kind::Prim;
    p.optic_ = std::move(o);
    p.label_ = std::move(label);
    return p;
}

OpticProgram OpticProgram::seq(std::vector<OpticProgram> children) {
    std::optional<Space> flowing; // last determined target along the chain
    for (const auto& child : children) {
        if (child.is_identity()) continue;
        auto src = child.source();
        if (src && flowing && !(*src == *flowing))
            throw ModelError("sequential composition: consecutive stages disagree on their space");
        flowing = child.target();
    }
    OpticProgram p;
    p.kind_ = Kind::Seq;
    p.children_ = std::move(children);
    return p;
}

OpticProgram OpticProgram::par(std::vector<OpticProgram> children) {
    if (children.empty()) throw ModelError("parallel composition: needs at least one branch");
    OpticProgram p;
    p.kind_ = Kind::Par;
    p.children_ = std::move(children);
    return p;
}

const Optic& OpticProgram::optic() const {
    if (kind_ != Kind::Prim) throw ModelError("optic(): not a primitive program");
    return *optic_;
}

const std::string& OpticProgram::label() const {
    if (kind_ != Kind::Prim) throw ModelError("label(): not a primitive program");
    return label_;
}

const std::vector<OpticProgram>& OpticProgram::children() const { return children_; }

std::optional<Space> OpticProgram::source() const {
    switch (kind_) {
    case Kind::Prim:
        return optic_->source();
    case Kind::Seq:
        for (const auto& child : children_) {
            if (child.is_identity()) continue;
            return child.source();
        }
        return std::nullopt;
    case Kind::Par: {
        std::vector<Space> parts;
        for (const auto& child : children_) {
            auto s = child.source();
            if (!s) return std::nullopt;
            parts.push_back(*s);
        }
        return Space::product(std::move(parts));
    }
    }
    return std::nullopt;
}

std::optional<Space> OpticProgram::target() const {
    switch (kind_) {
    case Kind::Prim:
        return optic_->target();
    case Kind::Seq:
        for (auto it = children_.rbegin(); it != children_.rend(); ++it) {
            if (it->is_identity()) continue;
            return it->target();
        }
        return std::nullopt;
    case Kind::Par: {
        std::vector<Space> parts;
        for (const auto& child : children_) {
            auto t = child.target();
            if (!t) return std::nullopt;
            parts.push_back(*t);
        }
        return Space::product(std::move(parts));
    }
    }
    return std::nullopt;
}

int OpticProgram::prim_count() const {
    if (kind_ == Kind::Prim) return 1;
    int n = 0;
    for (const auto& child : children_) n += child.prim_count();
    return n;
}

int OpticProgram::duplication_count() const {
    if (kind_ == Kind::Prim)
        return optic_->forward_kernel().kind() == Kernel::Kind::Duplication ? 1 : 0;
    int n = 0;
    for (const auto& child : children_) n += child.duplication_count();
    return n;
}

OpticProgram seq_compose(OpticProgram p1, OpticProgram p2) {
    std::vector<OpticProgram> children;
    children.push_back(std::move(p1));
    children.push_back(std::move(p2));
    return OpticProgram::seq(std::move(children));
}

OpticProgram par_compose(OpticProgram p1, OpticProgram p2) {
    std::vector<OpticProgram> children;
    children.push_back(std::move(p1));
    children.push_back(std::move(p2));
    return OpticProgram::par(std::move(children));
}

std::pair<Message, HPotential> backward_map(const Optic& o, const HPotential& h) {
    HPotential denominator = pullback(o.backward_kernel(), h);
    return {Message{h, denominator}, denominator};
}

double weight(const Optic& o, const Message& m, const FiniteMeasure& mu) {
    HPotential pulled_true = pullback(o.forward_kernel(), m.numerator);
    return ratio_integral(pulled_true, m.denominator, mu, o.source());
}

Kernel guided_kernel(const Optic& o, const Message& m) {
    return guided_from(o.forward_kernel(), m.numerator);
}

namespace {

// Tilted probability row of a discrete kernel at one source state only.
Eigen::VectorXd tilted_row(const Kernel& k, const HPotential& numerator, const Point& x) {
    const std::int64_t i = x.flatten_index(k.source());
    Eigen::VectorXd row = k.matrix().row(i).transpose();
    HPotential flat = flatten_potential(numerator, k.target());
    if (!flat.is_one()) row = row.cwiseProduct(tabulate(flat, k.target()));
    double total = row.sum();
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericalError("guided kernel: state " + std::to_string(i) +
                             " has no mass under the target potential");
    return row / total;
}

} // namespace

FiniteMeasure guided_step(const Optic& o, const Message& m, const Point& x, double mass) {
    const Kernel& k = o.forward_kernel();
    switch (k.kind()) {
    case Kernel::Kind::Identity:
        return FiniteMeasure::dirac(x, mass);
    case Kernel::Kind::Duplication:
        return FiniteMeasure::dirac(Point::pair(x, x), mass);
    case Kernel::Kind::Discrete:
        return FiniteMeasure::discrete(tilted_row(k, m.numerator, x) * mass);
    default:
        return pushforward(guided_kernel(o, m), FiniteMeasure::dirac(x, mass));
    }
}

Point sample_guided(const Optic& o, const Message& m, const Point& x, RandomStream& stream) {
    const Kernel& k = o.forward_kernel();
    switch (k.kind()) {
    case Kernel::Kind::Identity:
        return x;
    case Kernel::Kind::Duplication:
        return Point::pair(x, x);
    case Kernel::Kind::Discrete: {
        const Eigen::VectorXd row = tilted_row(k, m.numerator, x);
        const double u = stream.next_uniform();
        // Inverse CDF, fixed left-to-right cumulative order.
        double c = 0.0;
        Eigen::Index last_positive = 0;
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            if (row[j] <= 0.0) continue;
            last_positive = j;
            c += row[j];
            if (u < c) return Point::unflatten_index(j, k.target());
        }
        return Point::unflatten_index(last_positive, k.target());
    }
    default:
        return sample_kernel(guided_kernel(o, m), x, stream);
    }
}

FiniteMeasure forward_map(const Optic& o, const Message& m, const FiniteMeasure& mu) {
    const Kernel& k = o.forward_kernel();

    // Atomic inputs: scale by the local weight and take one guided step. This
    // is exact, covers the duplication kernel, and stays usable when other
    // states have no conditional mass.
    if (auto atom = as_atomic(mu)) {
        double w = weight(o, m, FiniteMeasure::dirac(atom->point(), 1.0));
        return guided_step(o, m, atom->point(), atom->mass() * w);
    }

    switch (k.kind()) {
    case Kernel::Kind::Discrete: {
        Eigen::VectorXd mu_v = tabulate_measure(mu, k.source());
        Eigen::VectorXd den_v = tabulate(m.denominator, k.source());
        Eigen::VectorXd num_v = tabulate(m.numerator, k.target());
        Eigen::VectorXd tilted(mu_v.size());
        for (Eigen::Index i = 0; i < mu_v.size(); ++i) {
            if (mu_v[i] == 0.0) {
                tilted[i] = 0.0;
                continue;
            }
            if (den_v[i] <= 0.0)
                throw NumericalError(
                    "forward: message denominator vanishes on the support of the measure");
            tilted[i] = mu_v[i] / den_v[i];
        }
        Eigen::VectorXd nu = num_v.cwiseProduct(k.matrix().transpose() * tilted);
        return FiniteMeasure::discrete(std::move(nu));
    }
    case Kernel::Kind::LinearGaussian: {
        FiniteMeasure prior = merge_gaussian(mu, k.source());
        int d_in = k.source().flat_dimension();
        int d_out = k.target().flat_dimension();
        GaussParams np = gaussian_params(flatten_potential(m.numerator, k.target()), d_out);
        GaussParams dp = gaussian_params(flatten_potential(m.denominator, k.source()), d_in);

        Eigen::LLT<Eigen::MatrixXd> c0_llt = linalg::chol_pd(prior.cov(), "forward: input covariance");
        Eigen::MatrixXd c0_inv = c0_llt.solve(Eigen::MatrixXd::Identity(d_in, d_in));
        Eigen::MatrixXd q_inv = k.noise_chol().solve(Eigen::MatrixXd::Identity(d_out, d_out));
        const Eigen::MatrixXd& b = k.transition();
        const Eigen::VectorXd& beta = k.shift();

        // Integrate out the source: J collects all x-curvature, including the
        // denominator tilt, and must stay positive definite for the integral
        // to converge.
        Eigen::MatrixXd j = c0_inv + b.transpose() * q_inv * b - dp.quad;
        j = 0.5 * (j + j.transpose());
        Eigen::LLT<Eigen::MatrixXd> j_llt = linalg::chol_pd(j, "forward: source integral");
        Eigen::VectorXd a0 = c0_inv * prior.mean() - dp.lin - b.transpose() * q_inv * beta;

        Eigen::MatrixXd lam =
            q_inv - q_inv * b * j_llt.solve(b.transpose() * q_inv) + np.quad;
        lam = 0.5 * (lam + lam.transpose());
        Eigen::LLT<Eigen::MatrixXd> lam_llt = linalg::chol_pd(lam, "forward: output precision");
        Eigen::VectorXd l = np.lin + q_inv * beta + q_inv * b * j_llt.solve(a0);

        Eigen::VectorXd mean = lam_llt.solve(l);
        Eigen::MatrixXd cov = lam_llt.solve(Eigen::MatrixXd::Identity(d_out, d_out));
        double log_mass = np.logc - dp.logc - 0.5 * prior.mean().dot(c0_inv * prior.mean()) -
                          0.5 * beta.dot(q_inv * beta) + 0.5 * a0.dot(j_llt.solve(a0)) +
                          0.5 * l.dot(mean) -
                          0.5 * (linalg::logdet(c0_llt) + k.noise_logdet() + linalg::logdet(j_llt) +
                                 linalg::logdet(lam_llt));
        return FiniteMeasure::weighted_gaussian(prior.mass() * std::exp(log_mass), std::move(mean),
                                                0.5 * (cov + cov.transpose()));
    }
    case Kernel::Kind::Identity: {
        HPotential num_flat = flatten_potential(m.numerator, k.source());
        HPotential den_flat = flatten_potential(m.denominator, k.source());
        if (num_flat.is_one() && den_flat.is_one()) return mu;
        if (k.source().all_finite()) {
            Eigen::VectorXd mu_v = tabulate_measure(mu, k.source());
            Eigen::VectorXd num_v = tabulate(num_flat, k.source());
            Eigen::VectorXd den_v = tabulate(den_flat, k.source());
            Eigen::VectorXd nu(mu_v.size());
            for (Eigen::Index i = 0; i < mu_v.size(); ++i) {
                if (mu_v[i] == 0.0) {
                    nu[i] = 0.0;
                    continue;
                }
                if (den_v[i] <= 0.0)
                    throw NumericalError(
                        "forward: message denominator vanishes on the support of the measure");
                nu[i] = mu_v[i] * num_v[i] / den_v[i];
            }
            return FiniteMeasure::discrete(std::move(nu));
        }
        if (k.source().all_euclidean()) {
            int d = k.source().flat_dimension();
            GaussParams np = gaussian_params(num_flat, d);
            GaussParams dp = gaussian_params(den_flat, d);
            double logc = np.logc - dp.logc;
            Eigen::VectorXd f = np.lin - dp.lin;
            Eigen::MatrixXd h = np.quad - dp.quad;
            if (logc == 0.0 && f.isZero(0.0) && h.isZero(0.0)) return mu;
            FiniteMeasure prior = merge_gaussian(mu, k.source());
            double new_mass = gaussian_integral(prior.mass(), prior.mean(), prior.cov(), logc, f, h);
            Eigen::LLT<Eigen::MatrixXd> c_llt =
                linalg::chol_pd(prior.cov(), "forward: input covariance");
            Eigen::MatrixXd c_inv = c_llt.solve(Eigen::MatrixXd::Identity(d, d));
            Eigen::MatrixXd lam = c_inv + h;
            lam = 0.5 * (lam + lam.transpose());
            Eigen::LLT<Eigen::MatrixXd> lam_llt = linalg::chol_pd(lam, "forward: output precision");
            Eigen::VectorXd mean = lam_llt.solve(c_inv * prior.mean() + f);
            Eigen::MatrixXd cov = lam_llt.solve(Eigen::MatrixXd::Identity(d, d));
            return FiniteMeasure::weighted_gaussian(new_mass, std::move(mean),
                                                    0.5 * (cov + cov.transpose()));
        }
        throw UnsupportedOperation("forward: identity over a mixed space needs an atomic measure");
    }
    case Kernel::Kind::Duplication:
        throw UnsupportedOperation(
            "forward: a duplicated law is only representable for atomic inputs");
    case Kernel::Kind::Product: {
        std::size_t arity = k.factors().size();
        if (mu.kind() != FiniteMeasure::Kind::Product || mu.parts().size() != arity)
            throw UnsupportedOperation("forward: parallel transport needs a product measure");
        std::vector<FiniteMeasure> outs;
        outs.reserve(arity);
        for (std::size_t i = 0; i < arity; ++i) {
            Message part{potential_part(m.numerator, i, arity),
                         potential_part(m.denominator, i, arity)};
            outs.push_back(forward_map(Optic::exact(k.factors()[i]), part, mu.parts()[i]));
        }
        return FiniteMeasure::product(std::move(outs));
    }
    case Kernel::Kind::Sequence:
        throw UnsupportedOperation(
            "forward: a sequence kernel has no single-step transport; run its stages in order");
    }
    throw ModelError("forward: unknown kernel kind");
}

BackwardPassState run_backward(const OpticProgram& p, const HPotential& h) {
    switch (p.kind()) {
    case OpticProgram::Kind::Prim: {
        auto [message, pulled] = backward_map(p.optic(), h);
        MessageTree mt;
        mt.message = std::move(message);
        return {std::move(pulled), std::move(mt)};
    }
    case OpticProgram::Kind::Seq: {
        const auto& children = p.children();
        MessageTree mt;
        mt.children.resize(children.size());
        HPotential flowing = h;
        for (std::size_t i = children.size(); i-- > 0;) {
            BackwardPassState st = run_backward(children[i], flowing);
            mt.children[i] = std::move(st.messages);
            flowing = std::move(st.pulled_back);
        }
        return {std::move(flowing), std::move(mt)};
    }
    case OpticProgram::Kind::Par: {
        const auto& children = p.children();
        std::vector<HPotential> parts;
        if (h.is_one())
            parts.assign(children.size(), HPotential::one());
        else if (h.kind() == HPotential::Kind::Product && h.parts().size() == children.size())
            parts = h.parts();
        else
            throw UnsupportedOperation(
                "backward: a parallel block needs a product potential (or the constant 1)");
        MessageTree mt;
        mt.children.resize(children.size());
        std::vector<HPotential> pulled;
        pulled.reserve(children.size());
        bool all_one = true;
        for (std::size_t i = 0; i < children.size(); ++i) {
            BackwardPassState st = run_backward(children[i], parts[i]);
            mt.children[i] = std::move(st.messages);
            all_one = all_one && st.pulled_back.is_one();
            pulled.push_back(std::move(st.pulled_back));
        }
        HPotential joined = all_one ? HPotential::one() : HPotential::product(std::move(pulled));
        return {std::move(joined), std::move(mt)};
    }
    }
    throw ModelError("run_backward: unknown program kind");
}

namespace {

FiniteMeasure forward_rec(const OpticProgram& p, const MessageTree& mt, const FiniteMeasure& mu) {
    switch (p.kind()) {
    case OpticProgram::Kind::Prim:
        return forward_map(p.optic(), *mt.message, mu);
    case OpticProgram::Kind::Seq: {
        FiniteMeasure flowing = mu;
        for (std::size_t i = 0; i < p.children().size(); ++i)
            flowing = forward_rec(p.children()[i], mt.children[i], flowing);
        return flowing;
    }
    case OpticProgram::Kind::Par: {
        const auto& children = p.children();
        std::vector<FiniteMeasure> parts;
        if (mu.kind() == FiniteMeasure::Kind::Product && mu.parts().size() == children.size()) {
            parts = mu.parts();
        } else if (auto atom = as_atomic(mu)) {
            const Point& pt = atom->point();
            if (pt.kind() != Point::Kind::Tuple || pt.parts().size() != children.size())
                throw UnsupportedOperation(
                    "forward: a parallel block needs a product or atomic tuple measure");
            for (std::size_t i = 0; i < children.size(); ++i)
                parts.push_back(FiniteMeasure::dirac(pt.parts()[i], i == 0 ? atom->mass() : 1.0));
        } else {
            throw UnsupportedOperation(
                "forward: a parallel block needs a product or atomic tuple measure");
        }
        std::vector<FiniteMeasure> outs;
        outs.reserve(children.size());
        for (std::size_t i = 0; i < children.size(); ++i)
            outs.push_back(forward_rec(children[i], mt.children[i], parts[i]));
        return FiniteMeasure::product(std::move(outs));
    }
    }
    throw ModelError("run_forward_measure: unknown program kind");
}

} // namespace

FiniteMeasure run_forward_measure(const OpticProgram& p, const BackwardPassState& s,
                                  const FiniteMeasure& mu) {
    return forward_rec(p, s.messages, mu);
}

double measure_distance(const FiniteMeasure& a, const FiniteMeasure& b, const Space& s) {
    if (s.all_finite()) {
        Eigen::VectorXd va = tabulate_measure(a, s);
        Eigen::VectorXd vb = tabulate_measure(b, s);
        return (va - vb).cwiseAbs().maxCoeff();
    }
    if (s.all_euclidean()) {
        FiniteMeasure ga = merge_gaussian(a, s);
        FiniteMeasure gb = merge_gaussian(b, s);
        double d = std::abs(ga.mass() - gb.mass());
        d = std::max(d, (ga.mean() - gb.mean()).cwiseAbs().maxCoeff());
        d = std::max(d, (ga.cov() - gb.cov()).cwiseAbs().maxCoeff());
        return d;
    }
    throw UnsupportedOperation("measure_distance: mixed spaces are not comparable here");
}

namespace {

// m(x, y) = numerator(y) / denominator(x), evaluated with explicit spaces.
double message_value(const Message& m, const Space& src, const Space& tgt, const Point& x,
                     const Point& y) {
    double den = evaluate_on(m.denominator, src, x);
    if (den <= 0.0) throw NumericalError("message probe: denominator vanishes at the probe point");
    return evaluate_on(m.numerator, tgt, y) / den;
}

} // namespace

EquivalenceReport check_sequential_equivalence(const Kernel& k01, const Kernel& kb01,
                                               const Kernel& k12, const Kernel& kb12,
                                               const HPotential& h, const FiniteMeasure& mu,
                                               RandomStream& probes) {
    Optic o01(k01, kb01);
    Optic o12(k12, kb12);
    Optic o02(compose_kernels(k01, k12), compose_kernels(kb01, kb12));

    auto [m02, pulled_joint] = backward_map(o02, h);
    FiniteMeasure nu_joint = forward_map(o02, m02, mu);

    OpticProgram chain = seq_compose(OpticProgram::prim(o01), OpticProgram::prim(o12));
    BackwardPassState st = run_backward(chain, h);
    FiniteMeasure nu_staged = run_forward_measure(chain, st, mu);

    EquivalenceReport report;
    report.measure_deviation = measure_distance(nu_joint, nu_staged, k12.target());

    const Message& m01 = *st.messages.children[0].message;
    const Message& m12 = *st.messages.children[1].message;
    Point x = random_point(k01.source(), probes);
    Point y = random_point(k12.target(), probes);
    double joint = message_value(m02, k01.source(), k12.target(), x, y);
    for (int t = 0; t < 10; ++t) {
        Point z = random_point(k01.target(), probes);
        double staged = message_value(m01, k01.source(), k01.target(), x, z) *
                        message_value(m12, k12.source(), k12.target(), z, y);
        double rel = std::abs(staged - joint) / std::max(std::abs(joint), 1e-300);
        report.message_deviation = std::max(report.message_deviation, rel);
    }
    return report;
}

EquivalenceReport check_parallel_equivalence(const Kernel& k1, const Kernel& kb1, const Kernel& k2,
                                             const Kernel& kb2, const HPotential& g1,
                                             const HPotential& g2, const FiniteMeasure& mu1,
                                             const FiniteMeasure& mu2, RandomStream& probes) {
    Optic o1(k1, kb1);
    Optic o2(k2, kb2);
    Optic joint_optic(tensor_kernels(k1, k2), tensor_kernels(kb1, kb2));
    HPotential h = tensor_potential(g1, g2);
    FiniteMeasure mu = FiniteMeasure::pair(mu1, mu2);

    auto [m_joint, pulled_joint] = backward_map(joint_optic, h);
    FiniteMeasure nu_joint = forward_map(joint_optic, m_joint, mu);

    OpticProgram block = par_compose(OpticProgram::prim(o1), OpticProgram::prim(o2));
    BackwardPassState st = run_backward(block, h);
    FiniteMeasure nu_staged = run_forward_measure(block, st, mu);

    Space source = Space::pair(k1.source(), k2.source());
    Space target = Space::pair(k1.target(), k2.target());
    EquivalenceReport report;
    report.measure_deviation = measure_distance(nu_joint, nu_staged, target);

    const Message& m1 = *st.messages.children[0].message;
    const Message& m2 = *st.messages.children[1].message;
    for (int t = 0; t < 10; ++t) {
        Point x1 = random_point(k1.source(), probes);
        Point x2 = random_point(k2.source(), probes);
        Point y1 = random_point(k1.target(), probes);
        Point y2 = random_point(k2.target(), probes);
        double staged = message_value(m1, k1.source(), k1.target(), x1, y1) *
                        message_value(m2, k2.source(), k2.target(), x2, y2);
        double joint = message_value(m_joint, source, target, Point::pair(x1, x2),
                                     Point::pair(y1, y2));
        double rel = std::abs(staged - joint) / std::max(std::abs(joint), 1e-300);
        report.message_deviation = std::max(report.message_deviation, rel);
    }
    return report;
}

} // namespace bffg
