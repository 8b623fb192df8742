#include "bffg/random_models.hpp"

#include <vector>

#include "bffg/errors.hpp"

namespace bffg {

double uniform_in(RandomStream& rs, double lo, double hi) {
    return lo + (hi - lo) * rs.next_uniform();
}

Eigen::MatrixXd random_stochastic_matrix(int rows, int cols, RandomStream& rs) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = uniform_in(rs, 0.05, 1.05);
        m.row(i) /= m.row(i).sum();
    }
    return m;
}

Kernel random_discrete_kernel(int n_from, int n_to, RandomStream& rs) {
    return Kernel::discrete_on(Space::finite(n_from), Space::finite(n_to),
                               random_stochastic_matrix(n_from, n_to, rs));
}

Kernel random_lg_kernel(int d_from, int d_to, RandomStream& rs) {
    Eigen::MatrixXd B(d_to, d_from);
    for (int i = 0; i < d_to; ++i)
        for (int j = 0; j < d_from; ++j) B(i, j) = uniform_in(rs, -1.0, 1.0);
    Eigen::VectorXd beta(d_to);
    for (int i = 0; i < d_to; ++i) beta[i] = uniform_in(rs, -1.0, 1.0);
    Eigen::MatrixXd a(d_to, d_to);
    for (int i = 0; i < d_to; ++i)
        for (int j = 0; j < d_to; ++j) a(i, j) = uniform_in(rs, -0.6, 0.6);
    Eigen::MatrixXd q = 0.5 * Eigen::MatrixXd::Identity(d_to, d_to) + a * a.transpose();
    return Kernel::linear_gaussian(B, beta, 0.5 * (q + q.transpose()));
}

HPotential random_discrete_potential(int n, RandomStream& rs) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform_in(rs, 0.1, 1.1);
    return HPotential::discrete(v);
}

HPotential random_gaussian_potential(int d, RandomStream& rs) {
    double logc = uniform_in(rs, -0.3, 0.3);
    Eigen::VectorXd f(d);
    for (int i = 0; i < d; ++i) f[i] = uniform_in(rs, -0.8, 0.8);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = uniform_in(rs, -0.5, 0.5);
    Eigen::MatrixXd h = 0.2 * Eigen::MatrixXd::Identity(d, d) + a * a.transpose();
    return HPotential::gaussian(logc, f, 0.5 * (h + h.transpose()));
}

FiniteMeasure random_discrete_probability(int n, RandomStream& rs) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = uniform_in(rs, 0.05, 1.05);
    return FiniteMeasure::discrete(w / w.sum());
}

FiniteMeasure random_gaussian_probability(int d, RandomStream& rs) {
    Eigen::VectorXd mean(d);
    for (int i = 0; i < d; ++i) mean[i] = uniform_in(rs, -1.0, 1.0);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = uniform_in(rs, -0.5, 0.5);
    Eigen::MatrixXd c = 0.4 * Eigen::MatrixXd::Identity(d, d) + a * a.transpose();
    return FiniteMeasure::weighted_gaussian(1.0, mean, 0.5 * (c + c.transpose()));
}

Point random_point(const Space& s, RandomStream& rs) {
    switch (s.kind()) {
    case Space::Kind::Finite: {
        auto n = s.cardinality();
        auto i = static_cast<std::int64_t>(rs.next_uniform() * static_cast<double>(n));
        if (i >= n) i = n - 1;
        return Point::index(i);
    }
    case Space::Kind::Euclidean: {
        Eigen::VectorXd v(s.dimension());
        for (int i = 0; i < s.dimension(); ++i) v[i] = uniform_in(rs, -2.0, 2.0);
        return Point::vector(v);
    }
    case Space::Kind::Product: {
        std::vector<Point> parts;
        parts.reserve(s.parts().size());
        for (const auto& part : s.parts()) parts.push_back(random_point(part, rs));
        return Point::tuple(std::move(parts));
    }
    }
    throw ModelError("random_point: unknown space kind");
}

} // namespace bffg
