#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsl {

// Shapes disagree between operands (linear inner dims, feature dims, ...).
class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid hyperparameters or configuration values. Carries an optional
// 1-based line number when raised while parsing a config file.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

// API misuse: backward twice, stepping a frozen model, missing gradients.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Input data violates a documented contract (e.g. a target row that is not one-hot).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Teacher/student pair violates the shared feature-dim / class-count constraint.
class CompatibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed binary file. `kind` distinguishes magic/version/checksum/truncation/... failures.
class FormatError : public std::runtime_error {
public:
    enum class Kind { Magic, Version, Checksum, Truncated, Layout, Label, Spec };

    FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace tsl
