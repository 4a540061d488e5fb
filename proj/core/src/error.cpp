#include "drsf/error.hpp"

#include <sstream>

namespace drsf {

namespace {

std::string join(const std::vector<std::string>& parts)
{
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ", ";
        out += p;
    }
    return out;
}

}  // namespace

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : Error(file + ":" + std::to_string(line) + ": " + what), line_(line)
{
}

RatingError::RatingError(std::size_t unit, double margin)
    : Error("PV unit " + std::to_string(unit) + " exceeds its apparent-power rating (p^2+q^2-s^2 = " +
            std::to_string(margin) + ")"),
      unit_(unit),
      margin_(margin)
{
}

NoConvergence::NoConvergence(int iterations, double residual)
    : Error([&] {
          std::ostringstream os;
          os << "power flow did not converge after " << iterations << " iterations (residual " << residual << ")";
          return os.str();
      }()),
      iterations_(iterations),
      residual_(residual)
{
}

VoltageCollapse::VoltageCollapse(std::size_t bus, double v_sq)
    : Error("voltage collapse at bus " + std::to_string(bus) + " (v_sq = " + std::to_string(v_sq) + ")"), bus_(bus)
{
}

NumericalFailure::NumericalFailure(int iteration, double primal, double dual, double gap, const std::string& detail)
    : Error([&] {
          std::ostringstream os;
          os << "conic solver numerical failure at iteration " << iteration << ": " << detail << " (pres " << primal
             << ", dres " << dual << ", gap " << gap << ")";
          return os.str();
      }()),
      iteration_(iteration)
{
}

InfeasibleBounds::InfeasibleBounds(double max_coverage, const std::string& detail)
    : Error("robust bounds infeasible: " + detail + " (max achievable coverage " + std::to_string(max_coverage) + ")"),
      max_coverage_(max_coverage)
{
}

SizeGuard::SizeGuard(std::size_t n, std::size_t limit)
    : Error("sample count " + std::to_string(n) + " exceeds the branch-and-bound guard of " + std::to_string(limit))
{
}

InfeasibleFilter::InfeasibleFilter(std::vector<std::string> classes)
    : Error("robust safety filter infeasible; binding constraint classes: " + join(classes)),
      classes_(std::move(classes))
{
}

StepError::StepError(const std::string& where, std::size_t index, const std::string& cause)
    : Error(where + " " + std::to_string(index) + ": " + cause), index_(index)
{
}

}  // namespace drsf
