#pragma once

#include <stdexcept>
#include <string>

namespace cow {

/// Parameter outside its documented domain.
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Eve's attack mix violates p_IR + p_2c <= 1 - mu(1-t), or the
/// beam-splitting fraction saturates.
class InfeasibleStrategy : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// QBER requested while the raw rate is zero.
class UndefinedQber : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A visibility estimate has an empty denominator.
class EstimateUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw InvalidParameter(what);
    }
}

}  // namespace detail
}  // namespace cow
