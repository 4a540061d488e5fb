#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace drsf::dro {

enum class ErrorKind { Voltage, Current, Substation };

const char* to_string(ErrorKind kind);
/// Accepts "voltage", "current", "substation". Throws ValidationError otherwise.
ErrorKind kind_from_string(const std::string& name);

/// N samples of one error vector. Voltage errors are in p.u.^2 per bus,
/// current errors in p.u.^2 per line, the substation error is the scalar
/// change of P0^2 + Q0^2.
struct ErrorSampleSet {
    ErrorKind kind = ErrorKind::Voltage;
    std::vector<std::vector<double>> samples;

    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return samples.empty() ? 0 : samples.front().size(); }
    /// Throws ValidationError on N = 0, ragged rows or non-finite entries.
    void validate() const;
};

/// Ball of radius epsilon around the empirical distribution in the
/// 1-Wasserstein distance with the l-infinity ground metric.
struct WassersteinBall {
    double epsilon = 0.01;
    double alpha = 0.1;

    /// Throws ValidationError unless epsilon >= 0 and 0 <= alpha < 1.
    void validate() const;
};

struct RobustBounds {
    ErrorKind kind = ErrorKind::Voltage;
    std::vector<double> lower;
    std::vector<double> upper;
    double epsilon = 0.0;
    double alpha = 0.0;
    double certified_prob = 1.0;

    double width() const;
    /// Degenerate bounds [0, 0] of the given dimension.
    static RobustBounds zero(ErrorKind kind, std::size_t dim);
};

/// Exact infimum of P[xi in [lower, upper]] over the ball. Infinite bounds are allowed.
/// Throws BoxError if lower > upper anywhere, DimensionError on size mismatch.
double worst_case_box_probability(const ErrorSampleSet& samples, const WassersteinBall& ball,
                                  std::span<const double> lower, std::span<const double> upper);

/// Smallest total-width box containing 0 whose worst-case coverage is at least 1 - alpha.
/// Exact for one-dimensional sets; a local search for vector sets.
/// Throws InfeasibleBounds when no box reaches the target.
RobustBounds solve_bounds(const ErrorSampleSet& samples, const WassersteinBall& ball);

struct MipOptions {
    std::size_t max_samples = 20;
    double lp_tol = 1e-12;
};

/// Big-M mixed-integer formulation solved by branch-and-bound over the sample
/// inclusion binaries, with LP relaxations solved by the conic engine.
/// Throws SizeGuard when N exceeds options.max_samples, InfeasibleBounds when the MIP is infeasible.
RobustBounds solve_bounds_mip(const ErrorSampleSet& samples, const WassersteinBall& ball,
                              const MipOptions& options = {});

struct BoundsCertificate {
    double coverage = 0.0;
    bool pass = false;
};

/// Recomputes the worst-case coverage; passes when coverage >= 1 - alpha - 1e-12.
BoundsCertificate validate_bounds(const RobustBounds& bounds, const ErrorSampleSet& samples,
                                  const WassersteinBall& ball);

}  // namespace drsf::dro
