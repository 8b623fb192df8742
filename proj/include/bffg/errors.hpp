#pragma once

#include <stdexcept>

namespace bffg {

// Invalid input: bad shapes, malformed trees or files, matrices out of tolerance.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The requested operation has no implementation for this family pairing.
class UnsupportedOperation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical breakdown: a matrix that must be positive definite is not, a
// normalizer is zero, or an accumulation overflowed.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace bffg
