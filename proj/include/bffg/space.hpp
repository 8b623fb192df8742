#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bffg {

// A measurable space: finite {0,...,n-1}, Euclidean R^d, or a product of spaces.
// Immutable value type. Structural equality is what "same space" means everywhere.
class Space {
public:
    enum class Kind { Finite, Euclidean, Product };

    static Space finite(std::int64_t cardinality);
    static Space euclidean(int dimension);
    static Space product(std::vector<Space> parts);
    static Space pair(const Space& a, const Space& b) { return product({a, b}); }

    Kind kind() const { return kind_; }
    std::int64_t cardinality() const;        // Finite only
    int dimension() const;                   // Euclidean only
    const std::vector<Space>& parts() const; // Product only

    bool all_finite() const;
    bool all_euclidean() const;

    // Number of points of a fully finite space (product of cardinalities).
    std::int64_t flat_cardinality() const;
    // Total dimension of a fully Euclidean space (sum of dimensions).
    int flat_dimension() const;

    bool operator==(const Space& other) const;
    bool operator!=(const Space& other) const { return !(*this == other); }

    std::string describe() const;

private:
    Space() = default;
    Kind kind_ = Kind::Finite;
    std::int64_t card_ = 0;
    int dim_ = 0;
    std::vector<Space> parts_;
};

// A point of a space, mirroring the Space variants.
class Point {
public:
    enum class Kind { Index, Vector, Tuple };

    static Point index(std::int64_t i);
    static Point vector(Eigen::VectorXd v);
    static Point tuple(std::vector<Point> parts);
    static Point pair(Point a, Point b);

    Kind kind() const { return kind_; }
    std::int64_t index_value() const;
    const Eigen::VectorXd& vector_value() const;
    const std::vector<Point>& parts() const;

    bool valid_for(const Space& s) const;

    // Row-major mixed-radix index in a fully finite space (leftmost component
    // most significant), matching the Kronecker-product index convention.
    std::int64_t flatten_index(const Space& s) const;
    // Concatenation of components in a fully Euclidean space.
    Eigen::VectorXd flatten_vector(const Space& s) const;

    static Point unflatten_index(std::int64_t flat, const Space& s);
    static Point unflatten_vector(const Eigen::VectorXd& v, const Space& s);

    bool operator==(const Point& other) const; // exact coordinate equality
    bool operator!=(const Point& other) const { return !(*this == other); }

    std::string describe() const;

private:
    Point() = default;
    Kind kind_ = Kind::Index;
    std::int64_t index_ = 0;
    Eigen::VectorXd vec_;
    std::vector<Point> parts_;
};

} // namespace bffg
