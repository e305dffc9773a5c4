#ifndef SEQFLOW_ERROR_HPP
#define SEQFLOW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace seqflow {

// Invalid experiment configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Integrator drift or divergence; the CLI maps this to exit code 3.
class NumericalAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace seqflow

#endif  // SEQFLOW_ERROR_HPP
