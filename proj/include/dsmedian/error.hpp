#pragma once

#include <stdexcept>
#include <string>

namespace dsmedian {

// Bad input data or arguments: empty samples, non-finite values, malformed
// files, size orderings that cannot hold.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Inputs are well-formed but the model is undefined for them: zero density,
// collinear auxiliaries, a ratio with a zero denominator, an empty stratum.
class DegenerateModel : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace dsmedian
