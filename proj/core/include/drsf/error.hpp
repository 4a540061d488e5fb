#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace drsf {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class TopologyError : public Error {
public:
    using Error::Error;
};

class UnitError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A reactive setpoint outside the inverter's apparent-power rating.
class RatingError : public Error {
public:
    RatingError(std::size_t unit, double margin);
    std::size_t unit() const noexcept { return unit_; }
    /// p^2 + q^2 - s^2 for the offending unit (positive).
    double margin() const noexcept { return margin_; }

private:
    std::size_t unit_;
    double margin_;
};

class NoConvergence : public Error {
public:
    NoConvergence(int iterations, double residual);
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    int iterations_;
    double residual_;
};

class VoltageCollapse : public Error {
public:
    VoltageCollapse(std::size_t bus, double v_sq);
    std::size_t bus() const noexcept { return bus_; }

private:
    std::size_t bus_;
};

class NumericalFailure : public Error {
public:
    NumericalFailure(int iteration, double primal, double dual, double gap, const std::string& detail);
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

class BoxError : public Error {
public:
    using Error::Error;
};

class InfeasibleBounds : public Error {
public:
    InfeasibleBounds(double max_coverage, const std::string& detail);
    /// Best worst-case coverage reachable within the search space.
    double max_coverage() const noexcept { return max_coverage_; }

private:
    double max_coverage_;
};

class SizeGuard : public Error {
public:
    SizeGuard(std::size_t n, std::size_t limit);
};

class BoundsMissing : public Error {
public:
    using Error::Error;
};

class InfeasibleFilter : public Error {
public:
    /// `classes` names the constraint classes that cannot be met ("voltage", "current", "substation").
    explicit InfeasibleFilter(std::vector<std::string> classes);
    const std::vector<std::string>& classes() const noexcept { return classes_; }

private:
    std::vector<std::string> classes_;
};

class SolverFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Wraps a failure inside a longer run with the step or sample index where it happened.
class StepError : public Error {
public:
    StepError(const std::string& where, std::size_t index, const std::string& cause);
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace drsf
