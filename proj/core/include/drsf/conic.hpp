#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace drsf::conic {

enum class ConeKind { Nonneg, SecondOrder };

/// A cone membership over variable indices. For SecondOrder the first index
/// is the scalar bound t and the rest form u, meaning t >= ||u||_2.
struct ConeBlock {
    ConeKind kind = ConeKind::Nonneg;
    std::vector<std::size_t> indices;
};

struct Entry {
    std::size_t col = 0;
    double value = 0.0;
};

/// minimize  c'z
/// subject to A z = b,  z restricted to a product of cones on disjoint index sets.
///
/// Variables that belong to no cone block are free. A variable may appear in
/// at most one block; duplicate it through a slack equality when it must
/// appear in two.
class ConicProgram {
public:
    ConicProgram() = default;
    explicit ConicProgram(std::size_t n_vars);

    std::size_t add_variable(double cost = 0.0);
    /// Appends `count` variables and returns the index of the first.
    std::size_t add_variables(std::size_t count);
    std::size_t num_vars() const { return cost_.size(); }

    void set_cost(std::size_t var, double c);
    void add_cost(std::size_t var, double c);

    /// Adds sum(entries) == rhs and returns the row index. Repeated columns are summed.
    std::size_t add_equality(std::span<const Entry> entries, double rhs);
    std::size_t add_equality(std::initializer_list<Entry> entries, double rhs);

    void add_nonneg(std::vector<std::size_t> indices);
    void add_soc(std::vector<std::size_t> indices);

    /// Appends t with t >= ||z[vec]||_2 and returns t's index (t >= 0 when `vec` is empty).
    std::size_t add_epigraph_norm(std::span<const std::size_t> vec);

    const std::vector<double>& cost() const { return cost_; }
    const std::vector<std::vector<Entry>>& rows() const { return rows_; }
    const std::vector<double>& rhs() const { return rhs_; }
    const std::vector<ConeBlock>& cones() const { return cones_; }
    std::size_t num_equalities() const { return rows_.size(); }
    /// Total number of cone entries.
    std::size_t cone_dimension() const;

    double objective_value(std::span<const double> z) const;

    /// Throws DimensionError on out-of-range or repeated cone indices.
    void validate() const;

    /// Plain-text dump for external cross-checking; see parse().
    void dump(std::ostream& os) const;
    static ConicProgram parse(std::istream& is);

private:
    std::vector<double> cost_;
    std::vector<std::vector<Entry>> rows_;
    std::vector<double> rhs_;
    std::vector<ConeBlock> cones_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };
const char* to_string(SolveStatus status);

struct KktResiduals {
    double primal = 0.0;  // max(||Az - b||_inf, cone violation of z)
    double dual = 0.0;    // max(||c + A'y - E's||_inf, cone violation of s)
    double gap = 0.0;     // |c'z + b'y| / (1 + |c'z|)

    double max() const;
};

/// Dual convention: the dual program is  max -b'y  s.t. c + A'y = E's, s in K,
/// where E scatters cone entries back to variables. Weak duality reads
/// c'z >= -b'y for feasible pairs, and the gap equals s'z[cones].
struct ConicSolution {
    SolveStatus status = SolveStatus::MaxIter;
    std::vector<double> primal;     // z
    std::vector<double> eq_dual;    // y, one per equality row
    std::vector<double> cone_dual;  // s, concatenated in cone-block order
    KktResiduals kkt;
    int iterations = 0;
    double objective = 0.0;
    std::vector<std::string> warnings;
};

struct SolverSettings {
    double tol = 1e-8;
    int max_iter = 100;
    double infeasibility_tol = 1e-8;
    bool presolve = true;
    bool verbose = false;
};

/// Homogeneous self-dual primal-dual interior-point method with Nesterov-Todd
/// scaling and Mehrotra predictor-corrector steps. Deterministic for identical
/// inputs. An Optimal result has every KKT residual of the original program
/// at most `tol`. Throws NumericalFailure when the KKT system cannot be factored.
ConicSolution solve(const ConicProgram& prog, const SolverSettings& settings = {});

/// Residuals of `sol` against `prog`. Throws DimensionError on size mismatch.
KktResiduals kkt_residuals(const ConicProgram& prog, const ConicSolution& sol);

}  // namespace drsf::conic
