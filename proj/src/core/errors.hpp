#ifndef ADSIM_CORE_ERRORS_HPP
#define ADSIM_CORE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace adsim {

/// Malformed input documents (config files, policy files, traces, models).
class ParseError : public std::runtime_error {
public:
    ParseError(std::string msg, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Contract violations detected while the system is running (ordering,
/// dimension mismatches, capacity, divergence).
class RuntimeFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace adsim

#endif
