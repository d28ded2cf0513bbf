#pragma once

#include <stdexcept>
#include <string>

namespace gsm {

// Input violates a model or data domain (negative entries, zero with b = 0,
// dimension mismatch, malformed spec strings).
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// A numerical procedure could not produce a result (singular block,
// quadrature failure, sampler underflow).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gsm
