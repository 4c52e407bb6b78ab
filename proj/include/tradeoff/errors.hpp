#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tradeoff {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration: missing input columns, out-of-range parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data cannot satisfy an operation's precondition.
class DataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    NumericError(const std::string& what, int iteration)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(int found, int expected)
        : Error("schema_version " + std::to_string(found) + " is not supported (expected " +
                std::to_string(expected) + ")"),
          found_(found) {}

    int found() const noexcept { return found_; }

private:
    int found_;
};

// A loaded document violates a named invariant.
class IntegrityError : public Error {
public:
    IntegrityError(std::string invariant, const std::string& detail)
        : Error("integrity violation [" + invariant + "]: " + detail), invariant_(std::move(invariant)) {}

    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

class NotFoundError : public Error {
public:
    NotFoundError(const std::string& what, std::vector<std::string> valid_values = {})
        : Error(what), valid_values_(std::move(valid_values)) {}

    const std::vector<std::string>& valid_values() const noexcept { return valid_values_; }

private:
    std::vector<std::string> valid_values_;
};

struct FieldIssue {
    std::string field;
    std::string reason;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<FieldIssue> issues)
        : Error(summarize(issues)), issues_(std::move(issues)) {}

    const std::vector<FieldIssue>& issues() const noexcept { return issues_; }

private:
    static std::string summarize(const std::vector<FieldIssue>& issues) {
        std::string out = "invalid record:";
        for (const auto& issue : issues) {
            out += " " + issue.field + " (" + issue.reason + ")";
        }
        return out;
    }

    std::vector<FieldIssue> issues_;
};

}  // namespace tradeoff
