#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cmfg {

// Caller broke a precondition: shape mismatch, empty window, bad index.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Argument outside the mathematical domain of a formula (t outside (0,T), D >= M, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// An eta function failed its sampled validity checks.
class ConstructionError : public std::runtime_error {
public:
    ConstructionError(const std::string& what, std::vector<double> point)
        : std::runtime_error(what), point_(std::move(point)) {}
    const std::vector<double>& point() const { return point_; }

private:
    std::vector<double> point_;
};

// Picard iteration did not converge; carries the iterate-change history.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), history_(std::move(history)) {}
    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

// Conjugate gradient stopped making progress; carries the residual trace.
class StagnationError : public std::runtime_error {
public:
    StagnationError(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const { return trace_; }

private:
    std::vector<double> trace_;
};

// Stability-theorem hypothesis not met by the supplied configuration.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace cmfg
