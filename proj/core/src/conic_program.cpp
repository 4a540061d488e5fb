#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "drsf/conic.hpp"
#include "drsf/error.hpp"

namespace drsf::conic {

ConicProgram::ConicProgram(std::size_t n_vars) : cost_(n_vars, 0.0) {}

std::size_t ConicProgram::add_variable(double cost)
{
    cost_.push_back(cost);
    return cost_.size() - 1;
}

std::size_t ConicProgram::add_variables(std::size_t count)
{
    const std::size_t first = cost_.size();
    cost_.resize(first + count, 0.0);
    return first;
}

void ConicProgram::set_cost(std::size_t var, double c)
{
    if (var >= cost_.size()) throw DimensionError("cost index out of range");
    cost_[var] = c;
}

void ConicProgram::add_cost(std::size_t var, double c)
{
    if (var >= cost_.size()) throw DimensionError("cost index out of range");
    cost_[var] += c;
}

std::size_t ConicProgram::add_equality(std::span<const Entry> entries, double rhs)
{
    std::vector<Entry> row;
    row.reserve(entries.size());
    for (const auto& e : entries) {
        if (e.col >= cost_.size()) throw DimensionError("equality references variable " + std::to_string(e.col));
        auto it = std::find_if(row.begin(), row.end(), [&](const Entry& r) { return r.col == e.col; });
        if (it != row.end()) {
            it->value += e.value;
        } else {
            row.push_back(e);
        }
    }
    std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    rows_.push_back(std::move(row));
    rhs_.push_back(rhs);
    return rows_.size() - 1;
}

std::size_t ConicProgram::add_equality(std::initializer_list<Entry> entries, double rhs)
{
    return add_equality(std::span<const Entry>(entries.begin(), entries.size()), rhs);
}

void ConicProgram::add_nonneg(std::vector<std::size_t> indices)
{
    cones_.push_back(ConeBlock{ConeKind::Nonneg, std::move(indices)});
}

void ConicProgram::add_soc(std::vector<std::size_t> indices)
{
    if (indices.empty()) throw DimensionError("second-order cone needs at least one index");
    cones_.push_back(ConeBlock{ConeKind::SecondOrder, std::move(indices)});
}

std::size_t ConicProgram::add_epigraph_norm(std::span<const std::size_t> vec)
{
    const std::size_t t = add_variable();
    std::vector<std::size_t> idx;
    idx.reserve(vec.size() + 1);
    idx.push_back(t);
    idx.insert(idx.end(), vec.begin(), vec.end());
    add_soc(std::move(idx));
    return t;
}

std::size_t ConicProgram::cone_dimension() const
{
    std::size_t m = 0;
    for (const auto& c : cones_) m += c.indices.size();
    return m;
}

double ConicProgram::objective_value(std::span<const double> z) const
{
    if (z.size() != cost_.size()) throw DimensionError("objective_value: size mismatch");
    double v = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) v += cost_[i] * z[i];
    return v;
}

void ConicProgram::validate() const
{
    std::vector<bool> used(cost_.size(), false);
    for (std::size_t k = 0; k < cones_.size(); ++k) {
        for (std::size_t i : cones_[k].indices) {
            if (i >= cost_.size()) throw DimensionError("cone " + std::to_string(k) + " index out of range");
            if (used[i]) throw DimensionError("variable " + std::to_string(i) + " appears in two cone blocks");
            used[i] = true;
        }
    }
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        if (!std::isfinite(rhs_[r])) throw DimensionError("non-finite rhs in row " + std::to_string(r));
        for (const auto& e : rows_[r]) {
            if (!std::isfinite(e.value)) throw DimensionError("non-finite coefficient in row " + std::to_string(r));
        }
    }
}

// Format, one record per line:
//   conic-program 1
//   vars <n>
//   c <index> <value>            (nonzero costs only)
//   eq <row> <rhs>               (declares a row)
//   a <row> <col> <value>
//   nonneg <k> <i1> ... <ik>
//   soc <k> <t> <u1> ... <u(k-1)>
void ConicProgram::dump(std::ostream& os) const
{
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "conic-program 1\nvars " << cost_.size() << '\n';
    for (std::size_t i = 0; i < cost_.size(); ++i) {
        if (cost_[i] != 0.0) os << "c " << i << ' ' << cost_[i] << '\n';
    }
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        os << "eq " << r << ' ' << rhs_[r] << '\n';
        for (const auto& e : rows_[r]) os << "a " << r << ' ' << e.col << ' ' << e.value << '\n';
    }
    for (const auto& c : cones_) {
        os << (c.kind == ConeKind::Nonneg ? "nonneg " : "soc ") << c.indices.size();
        for (std::size_t i : c.indices) os << ' ' << i;
        os << '\n';
    }
    os.precision(old_precision);
}

ConicProgram ConicProgram::parse(std::istream& is)
{
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) -> ConicProgram { throw ParseError("<conic>", lineno, what); };

    if (!std::getline(is, line) || line.rfind("conic-program 1", 0) != 0) {
        ++lineno;
        return fail("missing 'conic-program 1' header");
    }
    ++lineno;
    ConicProgram prog;
    std::vector<std::vector<Entry>> rows;
    bool have_vars = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "vars") {
            std::size_t n = 0;
            if (!(ls >> n)) return fail("bad vars record");
            prog = ConicProgram(n);
            have_vars = true;
        } else if (!have_vars) {
            return fail("'vars' must come first");
        } else if (tag == "c") {
            std::size_t i = 0;
            double v = 0.0;
            if (!(ls >> i >> v) || i >= prog.num_vars()) return fail("bad cost record");
            prog.cost_[i] = v;
        } else if (tag == "eq") {
            std::size_t r = 0;
            double b = 0.0;
            if (!(ls >> r >> b) || r != rows.size()) return fail("rows must be declared in order");
            rows.emplace_back();
            prog.rhs_.push_back(b);
        } else if (tag == "a") {
            std::size_t r = 0, col = 0;
            double v = 0.0;
            if (!(ls >> r >> col >> v) || r >= rows.size() || col >= prog.num_vars()) return fail("bad entry record");
            rows[r].push_back(Entry{col, v});
        } else if (tag == "nonneg" || tag == "soc") {
            std::size_t k = 0;
            if (!(ls >> k)) return fail("bad cone record");
            std::vector<std::size_t> idx(k);
            for (auto& i : idx) {
                if (!(ls >> i)) return fail("short cone record");
            }
            prog.cones_.push_back(ConeBlock{tag == "soc" ? ConeKind::SecondOrder : ConeKind::Nonneg, std::move(idx)});
        } else {
            return fail("unknown record '" + tag + "'");
        }
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<Entry> merged;
        for (const auto& e : rows[r]) {
            auto it = std::find_if(merged.begin(), merged.end(), [&](const Entry& m) { return m.col == e.col; });
            if (it != merged.end()) {
                it->value += e.value;
            } else {
                merged.push_back(e);
            }
        }
        std::sort(merged.begin(), merged.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
        prog.rows_.push_back(std::move(merged));
    }
    prog.validate();
    return prog;
}

const char* to_string(SolveStatus status)
{
    switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIter: return "max_iter";
    }
    return "unknown";
}

double KktResiduals::max() const
{
    return std::max({primal, dual, gap});
}

namespace {

double cone_violation(const ConeBlock& cone, const double* v)
{
    const std::size_t d = cone.indices.size();
    if (cone.kind == ConeKind::Nonneg) {
        double worst = 0.0;
        for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, -v[i]);
        return worst;
    }
    double norm2 = 0.0;
    for (std::size_t i = 1; i < d; ++i) norm2 += v[i] * v[i];
    return std::max(0.0, std::sqrt(norm2) - v[0]);
}

}  // namespace

KktResiduals kkt_residuals(const ConicProgram& prog, const ConicSolution& sol)
{
    const std::size_t n = prog.num_vars();
    const std::size_t p = prog.num_equalities();
    const std::size_t m = prog.cone_dimension();
    if (sol.primal.size() != n || sol.eq_dual.size() != p || sol.cone_dual.size() != m) {
        throw DimensionError("kkt_residuals: solution dimensions do not match the program");
    }
    KktResiduals res;
    const auto& z = sol.primal;
    const auto& y = sol.eq_dual;
    const auto& s = sol.cone_dual;

    std::vector<double> dual(prog.cost());
    for (std::size_t r = 0; r < p; ++r) {
        double az = 0.0;
        for (const auto& e : prog.rows()[r]) {
            az += e.value * z[e.col];
            dual[e.col] += e.value * y[r];
        }
        res.primal = std::max(res.primal, std::abs(az - prog.rhs()[r]));
    }
    std::size_t offset = 0;
    std::vector<double> zc;
    for (const auto& cone : prog.cones()) {
        zc.resize(cone.indices.size());
        for (std::size_t k = 0; k < cone.indices.size(); ++k) {
            zc[k] = z[cone.indices[k]];
            dual[cone.indices[k]] -= s[offset + k];
        }
        res.primal = std::max(res.primal, cone_violation(cone, zc.data()));
        res.dual = std::max(res.dual, cone_violation(cone, s.data() + offset));
        offset += cone.indices.size();
    }
    for (double d : dual) res.dual = std::max(res.dual, std::abs(d));

    double pcost = 0.0;
    double dcost = 0.0;
    for (std::size_t i = 0; i < n; ++i) pcost += prog.cost()[i] * z[i];
    for (std::size_t r = 0; r < p; ++r) dcost -= prog.rhs()[r] * y[r];
    res.gap = std::abs(pcost - dcost) / (1.0 + std::abs(pcost));
    return res;
}

}  // namespace drsf::conic
