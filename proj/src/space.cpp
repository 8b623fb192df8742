#include "bffg/space.hpp"

#include <sstream>

#include "bffg/errors.hpp"

namespace bffg {

Space Space::finite(std::int64_t cardinality) {
    if (cardinality < 1) throw ModelError("finite space needs cardinality >= 1");
    Space s;
    s.kind_ = Kind::Finite;
    s.card_ = cardinality;
    return s;
}

Space Space::euclidean(int dimension) {
    if (dimension < 1) throw ModelError("euclidean space needs dimension >= 1");
    Space s;
    s.kind_ = Kind::Euclidean;
    s.dim_ = dimension;
    return s;
}

Space Space::product(std::vector<Space> parts) {
    if (parts.size() < 2) throw ModelError("product space needs at least 2 factors");
    Space s;
    s.kind_ = Kind::Product;
    s.parts_ = std::move(parts);
    return s;
}

std::int64_t Space::cardinality() const {
    if (kind_ != Kind::Finite) throw ModelError("cardinality() on non-finite space");
    return card_;
}

int Space::dimension() const {
    if (kind_ != Kind::Euclidean) throw ModelError("dimension() on non-euclidean space");
    return dim_;
}

const std::vector<Space>& Space::parts() const {
    if (kind_ != Kind::Product) throw ModelError("parts() on non-product space");
    return parts_;
}

bool Space::all_finite() const {
    switch (kind_) {
        case Kind::Finite: return true;
        case Kind::Euclidean: return false;
        case Kind::Product:
            for (const auto& p : parts_)
                if (!p.all_finite()) return false;
            return true;
    }
    return false;
}

bool Space::all_euclidean() const {
    switch (kind_) {
        case Kind::Finite: return false;
        case Kind::Euclidean: return true;
        case Kind::Product:
            for (const auto& p : parts_)
                if (!p.all_euclidean()) return false;
            return true;
    }
    return false;
}

std::int64_t Space::flat_cardinality() const {
    switch (kind_) {
        case Kind::Finite: return card_;
        case Kind::Euclidean: throw ModelError("flat_cardinality() on euclidean space");
        case Kind::Product: {
            std::int64_t n = 1;
            for (const auto& p : parts_) n *= p.flat_cardinality();
            return n;
        }
    }
    return 0;
}

int Space::flat_dimension() const {
    switch (kind_) {
        case Kind::Finite: throw ModelError("flat_dimension() on finite space");
        case Kind::Euclidean: return dim_;
        case Kind::Product: {
            int d = 0;
            for (const auto& p : parts_) d += p.flat_dimension();
            return d;
        }
    }
    return 0;
}

bool Space::operator==(const Space& other) const {
    if (kind_ != other.kind_) return false;
    switch (kind_) {
        case Kind::Finite: return card_ == other.card_;
        case Kind::Euclidean: return dim_ == other.dim_;
        case Kind::Product: {
            if (parts_.size() != other.parts_.size()) return false;
            for (std::size_t i = 0; i < parts_.size(); ++i)
                if (!(parts_[i] == other.parts_[i])) return false;
            return true;
        }
    }
    return false;
}

std::string Space::describe() const {
    switch (kind_) {
        case Kind::Finite: return "finite(" + std::to_string(card_) + ")";
        case Kind::Euclidean: return "euclidean(" + std::to_string(dim_) + ")";
        case Kind::Product: {
            std::string s = "product(";
            for (std::size_t i = 0; i < parts_.size(); ++i) {
                if (i) s += ", ";
                s += parts_[i].describe();
            }
            return s + ")";
        }
    }
    return "?";
}

Point Point::index(std::int64_t i) {
    if (i < 0) throw ModelError("index point must be nonnegative");
    Point p;
    p.kind_ = Kind::Index;
    p.index_ = i;
    return p;
}

Point Point::vector(Eigen::VectorXd v) {
    Point p;
    p.kind_ = Kind::Vector;
    p.vec_ = std::move(v);
    return p;
}

Point Point::tuple(std::vector<Point> parts) {
    if (parts.size() < 2) throw ModelError("tuple point needs at least 2 components");
    Point p;
    p.kind_ = Kind::Tuple;
    p.parts_ = std::move(parts);
    return p;
}

Point Point::pair(Point a, Point b) {
    std::vector<Point> ps;
    ps.push_back(std::move(a));
    ps.push_back(std::move(b));
    return tuple(std::move(ps));
}

std::int64_t Point::index_value() const {
    if (kind_ != Kind::Index) throw ModelError("index_value() on non-index point");
    return index_;
}

const Eigen::VectorXd& Point::vector_value() const {
    if (kind_ != Kind::Vector) throw ModelError("vector_value() on non-vector point");
    return vec_;
}

const std::vector<Point>& Point::parts() const {
    if (kind_ != Kind::Tuple) throw ModelError("parts() on non-tuple point");
    return parts_;
}

bool Point::valid_for(const Space& s) const {
    switch (s.kind()) {
        case Space::Kind::Finite:
            return kind_ == Kind::Index && index_ >= 0 && index_ < s.cardinality();
        case Space::Kind::Euclidean:
            return kind_ == Kind::Vector && vec_.size() == s.dimension() && vec_.allFinite();
        case Space::Kind::Product: {
            if (kind_ != Kind::Tuple) return false;
            if (parts_.size() != s.parts().size()) return false;
            for (std::size_t i = 0; i < parts_.size(); ++i)
                if (!parts_[i].valid_for(s.parts()[i])) return false;
            return true;
        }
    }
    return false;
}

std::int64_t Point::flatten_index(const Space& s) const {
    switch (s.kind()) {
        case Space::Kind::Finite: {
            if (kind_ != Kind::Index) throw ModelError("point/space mismatch: expected index point");
            if (index_ >= s.cardinality()) throw ModelError("index point out of range");
            return index_;
        }
        case Space::Kind::Euclidean:
            throw ModelError("flatten_index on euclidean space");
        case Space::Kind::Product: {
            if (kind_ != Kind::Tuple || parts_.size() != s.parts().size())
                throw ModelError("point/space mismatch: expected matching tuple");
            std::int64_t idx = 0;
            for (std::size_t i = 0; i < parts_.size(); ++i) {
                const Space& si = s.parts()[i];
                idx = idx * si.flat_cardinality() + parts_[i].flatten_index(si);
            }
            return idx;
        }
    }
    throw ModelError("flatten_index: bad space");
}

Eigen::VectorXd Point::flatten_vector(const Space& s) const {
    switch (s.kind()) {
        case Space::Kind::Finite:
            throw ModelError("flatten_vector on finite space");
        case Space::Kind::Euclidean: {
            if (kind_ != Kind::Vector || vec_.size() != s.dimension())
                throw ModelError("point/space mismatch: expected vector point");
            return vec_;
        }
        case Space::Kind::Product: {
            if (kind_ != Kind::Tuple || parts_.size() != s.parts().size())
                throw ModelError("point/space mismatch: expected matching tuple");
            Eigen::VectorXd out(s.flat_dimension());
            int at = 0;
            for (std::size_t i = 0; i < parts_.size(); ++i) {
                Eigen::VectorXd v = parts_[i].flatten_vector(s.parts()[i]);
                out.segment(at, v.size()) = v;
                at += static_cast<int>(v.size());
            }
            return out;
        }
    }
    throw ModelError("flatten_vector: bad space");
}

Point Point::unflatten_index(std::int64_t flat, const Space& s) {
    switch (s.kind()) {
        case Space::Kind::Finite: {
            if (flat < 0 || flat >= s.cardinality()) throw ModelError("unflatten_index out of range");
            return Point::index(flat);
        }
        case Space::Kind::Euclidean:
            throw ModelError("unflatten_index on euclidean space");
        case Space::Kind::Product: {
            const auto& ps = s.parts();
            std::vector<Point> comps(ps.size(), Point::index(0));
            for (std::size_t i = ps.size(); i-- > 0;) {
                std::int64_t n = ps[i].flat_cardinality();
                comps[i] = unflatten_index(flat % n, ps[i]);
                flat /= n;
            }
            if (flat != 0) throw ModelError("unflatten_index out of range");
            return Point::tuple(std::move(comps));
        }
    }
    throw ModelError("unflatten_index: bad space");
}

Point Point::unflatten_vector(const Eigen::VectorXd& v, const Space& s) {
    switch (s.kind()) {
        case Space::Kind::Finite:
            throw ModelError("unflatten_vector on finite space");
        case Space::Kind::Euclidean: {
            if (v.size() != s.dimension()) throw ModelError("unflatten_vector: wrong length");
            return Point::vector(v);
        }
        case Space::Kind::Product: {
            const auto& ps = s.parts();
            std::vector<Point> comps;
            comps.reserve(ps.size());
            int at = 0;
            for (const auto& pi : ps) {
                int d = pi.flat_dimension();
                comps.push_back(unflatten_vector(v.segment(at, d), pi));
                at += d;
            }
            if (at != v.size()) throw ModelError("unflatten_vector: wrong length");
            return Point::tuple(std::move(comps));
        }
    }
    throw ModelError("unflatten_vector: bad space");
}

bool Point::operator==(const Point& other) const {
    if (kind_ != other.kind_) return false;
    switch (kind_) {
        case Kind::Index: return index_ == other.index_;
        case Kind::Vector:
            return vec_.size() == other.vec_.size() && vec_ == other.vec_;
        case Kind::Tuple: {
            if (parts_.size() != other.parts_.size()) return false;
            for (std::size_t i = 0; i < parts_.size(); ++i)
                if (!(parts_[i] == other.parts_[i])) return false;
            return true;
        }
    }
    return false;
}

std::string Point::describe() const {
    switch (kind_) {
        case Kind::Index: return std::to_string(index_);
        case Kind::Vector: {
            std::ostringstream os;
            os << "[";
            for (int i = 0; i < vec_.size(); ++i) {
                if (i) os << ", ";
                os << vec_[i];
            }
            os << "]";
            return os.str();
        }
        case Kind::Tuple: {
            std::string s = "(";
            for (std::size_t i = 0; i < parts_.size(); ++i) {
                if (i) s += ", ";
                s += parts_[i].describe();
            }
            return s + ")";
        }
    }
    return "?";
}

} // namespace bffg
