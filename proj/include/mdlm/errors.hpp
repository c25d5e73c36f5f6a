#ifndef MDLM_ERRORS_HPP
#define MDLM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mdlm {

/// Malformed or inconsistent input data.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factorization or other numerical failure.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mdlm

#endif  // MDLM_ERRORS_HPP
