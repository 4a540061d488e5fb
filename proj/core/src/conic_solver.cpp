// Primal-dual interior-point method for linear objectives over products of
// nonnegative orthants and second-order cones, in the homogeneous self-dual
// embedding with Nesterov-Todd scaling (the ECOS scheme).
//
// Internal form:  min c'x  s.t.  A x = b,  G x + s = h,  s in K
// with G = -E (E selects the cone members of x) and h = 0.

#include <Eigen/OrderingMethods>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseQR>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>

#include "drsf/conic.hpp"
#include "drsf/error.hpp"

namespace drsf::conic {

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kPolishSteps = 5;
constexpr double kPolishTarget = 1e-3;  // relative to settings.tol

struct Cone {
    ConeKind kind;
    std::size_t offset;
    std::size_t dim;
};

// ---------------------------------------------------------------------------
// presolve

struct Presolve {
    std::vector<std::ptrdiff_t> var_to_red;
    std::vector<std::size_t> red_to_var;
    std::vector<double> fixed;
    std::vector<std::ptrdiff_t> row_to_red;
    std::vector<std::size_t> red_to_row;
    struct Elim {
        std::size_t row, var;
        double coef;
    };
    std::vector<Elim> eliminated;
    std::vector<std::vector<Entry>> columns;  // original A by column, Entry::col holds the row
    bool infeasible = false;
    std::vector<std::string> warnings;

    // reduced data
    SpMat A;
    Vec b, c;
    std::vector<Cone> cones;
    std::vector<std::size_t> cone_var;  // reduced variable per cone row
};

Presolve presolve(const ConicProgram& prog, bool enabled)
{
    const std::size_t n = prog.num_vars();
    const std::size_t p = prog.num_equalities();
    Presolve ps;
    ps.fixed.assign(n, 0.0);
    ps.columns.assign(n, {});
    for (std::size_t r = 0; r < p; ++r) {
        for (const auto& e : prog.rows()[r]) ps.columns[e.col].push_back(Entry{r, e.value});
    }

    std::vector<bool> in_cone(n, false);
    for (const auto& cone : prog.cones()) {
        for (std::size_t i : cone.indices) in_cone[i] = true;
    }

    std::vector<bool> var_alive(n, true);
    std::vector<bool> row_alive(p, true);
    std::vector<double> rhs = prog.rhs();
    std::vector<std::size_t> dropped;

    double rhs_scale = 1.0;
    for (double v : rhs) rhs_scale = std::max(rhs_scale, std::abs(v));

    if (enabled) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t r = 0; r < p; ++r) {
                if (!row_alive[r]) continue;
                std::size_t live = 0;
                const Entry* last = nullptr;
                for (const auto& e : prog.rows()[r]) {
                    if (var_alive[e.col] && e.value != 0.0) {
                        ++live;
                        last = &e;
                    }
                }
                if (live == 0) {
                    row_alive[r] = false;
                    changed = true;
                    if (std::abs(rhs[r]) > 1e-9 * rhs_scale) {
                        ps.infeasible = true;
                        ps.warnings.push_back("equality row " + std::to_string(r) + " reduces to 0 = " +
                                              std::to_string(rhs[r]));
                    } else {
                        dropped.push_back(r);
                    }
                } else if (live == 1 && !in_cone[last->col]) {
                    const std::size_t j = last->col;
                    const double value = rhs[r] / last->value;
                    ps.fixed[j] = value;
                    var_alive[j] = false;
                    row_alive[r] = false;
                    ps.eliminated.push_back({r, j, last->value});
                    for (const auto& ce : ps.columns[j]) {
                        if (row_alive[ce.col]) rhs[ce.col] -= ce.value * value;
                    }
                    changed = true;
                }
            }
        }
    }

    ps.var_to_red.assign(n, -1);
    for (std::size_t j = 0; j < n; ++j) {
        if (var_alive[j]) {
            ps.var_to_red[j] = static_cast<std::ptrdiff_t>(ps.red_to_var.size());
            ps.red_to_var.push_back(j);
        }
    }
    std::vector<std::size_t> live_rows;
    for (std::size_t r = 0; r < p; ++r) {
        if (row_alive[r]) live_rows.push_back(r);
    }

    auto build_A = [&](const std::vector<std::size_t>& rows) {
        std::vector<Triplet> trips;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            for (const auto& e : prog.rows()[rows[k]]) {
                if (var_alive[e.col] && e.value != 0.0) {
                    trips.emplace_back(static_cast<int>(k), static_cast<int>(ps.var_to_red[e.col]), e.value);
                }
            }
        }
        SpMat A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ps.red_to_var.size()));
        A.setFromTriplets(trips.begin(), trips.end());
        A.makeCompressed();
        return A;
    };

    // dependent rows: rank-revealing QR of A'
    std::vector<std::size_t> kept = live_rows;
    if (enabled && !live_rows.empty() && !ps.red_to_var.empty()) {
        SpMat At = SpMat(build_A(live_rows).transpose());
        At.makeCompressed();
        Eigen::SparseQR<SpMat, Eigen::COLAMDOrdering<int>> qr;
        qr.compute(At);
        if (qr.info() == Eigen::Success && static_cast<std::size_t>(qr.rank()) < live_rows.size()) {
            const auto& perm = qr.colsPermutation().indices();
            std::vector<bool> keep(live_rows.size(), false);
            for (Eigen::Index k = 0; k < qr.rank(); ++k) keep[static_cast<std::size_t>(perm[k])] = true;
            kept.clear();
            std::vector<std::size_t> dependent;
            for (std::size_t k = 0; k < live_rows.size(); ++k) {
                (keep[k] ? kept : dependent).push_back(live_rows[k]);
            }
            // consistency: any solution of the kept rows must satisfy the dropped ones
            const SpMat Ak = build_A(kept);
            Vec bk(static_cast<Eigen::Index>(kept.size()));
            for (std::size_t k = 0; k < kept.size(); ++k) bk[static_cast<Eigen::Index>(k)] = rhs[kept[k]];
            Vec xp = Vec::Zero(Ak.cols());
            if (!kept.empty()) {
                SpMat AAt = Ak * SpMat(Ak.transpose());
                Eigen::SimplicialLDLT<SpMat> ldlt(AAt);
                if (ldlt.info() == Eigen::Success) xp = Ak.transpose() * ldlt.solve(bk);
            }
            const SpMat Ad = build_A(dependent);
            const Vec ad = Ad * xp;
            for (std::size_t k = 0; k < dependent.size(); ++k) {
                const double mismatch = std::abs(ad[static_cast<Eigen::Index>(k)] - rhs[dependent[k]]);
                if (mismatch > 1e-8 * rhs_scale) {
                    ps.infeasible = true;
                    ps.warnings.push_back("dependent equality row " + std::to_string(dependent[k]) +
                                          " is inconsistent");
                }
                dropped.push_back(dependent[k]);
            }
            ps.warnings.push_back("presolve dropped " + std::to_string(dependent.size()) +
                                  " linearly dependent equality row(s)");
        }
    }

    ps.row_to_red.assign(p, -1);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        ps.row_to_red[kept[k]] = static_cast<std::ptrdiff_t>(k);
        ps.red_to_row.push_back(kept[k]);
    }
    ps.A = build_A(kept);
    ps.b.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) ps.b[static_cast<Eigen::Index>(k)] = rhs[kept[k]];
    ps.c.resize(static_cast<Eigen::Index>(ps.red_to_var.size()));
    for (std::size_t k = 0; k < ps.red_to_var.size(); ++k) {
        ps.c[static_cast<Eigen::Index>(k)] = prog.cost()[ps.red_to_var[k]];
    }

    std::size_t offset = 0;
    for (const auto& cone : prog.cones()) {
        ps.cones.push_back(Cone{cone.kind, offset, cone.indices.size()});
        for (std::size_t i : cone.indices) ps.cone_var.push_back(static_cast<std::size_t>(ps.var_to_red[i]));
        offset += cone.indices.size();
    }
    return ps;
}

// ---------------------------------------------------------------------------
// cone algebra

struct ConeScaling {
    Vec w;                 // nonneg: diagonal of W
    Eigen::MatrixXd W, Winv;  // second-order
};

class ConeSet {
public:
    explicit ConeSet(std::vector<Cone> cones, std::size_t m) : cones_(std::move(cones)), m_(m)
    {
        for (const auto& c : cones_) degree_ += c.kind == ConeKind::Nonneg ? c.dim : 1;
    }

    std::size_t dim() const { return m_; }
    std::size_t degree() const { return degree_; }
    const std::vector<Cone>& cones() const { return cones_; }

    Vec identity() const
    {
        Vec e = Vec::Zero(static_cast<Eigen::Index>(m_));
        for (const auto& c : cones_) {
            if (c.kind == ConeKind::Nonneg) {
                e.segment(off(c), len(c)).setOnes();
            } else {
                e[off(c)] = 1.0;
            }
        }
        return e;
    }

    // Largest t with u - t e still on the boundary: positive means u lies outside K.
    double violation(const Vec& u) const
    {
        double worst = -kInf;
        for (const auto& c : cones_) {
            if (c.dim == 0) continue;
            if (c.kind == ConeKind::Nonneg) {
                worst = std::max(worst, -u.segment(off(c), len(c)).minCoeff());
            } else {
                const double tail = c.dim > 1 ? u.segment(off(c) + 1, len(c) - 1).norm() : 0.0;
                worst = std::max(worst, tail - u[off(c)]);
            }
        }
        return worst;
    }

    void shift_into_interior(Vec& u) const
    {
        if (m_ == 0) return;
        const double alpha = violation(u);
        if (alpha >= -1e-8) u += (1.0 + std::max(alpha, 0.0)) * identity();
    }

    std::vector<ConeScaling> scaling(const Vec& s, const Vec& z, Vec& lambda) const
    {
        std::vector<ConeScaling> out(cones_.size());
        lambda.resize(static_cast<Eigen::Index>(m_));
        for (std::size_t k = 0; k < cones_.size(); ++k) {
            const auto& c = cones_[k];
            auto& sc = out[k];
            const auto o = off(c);
            const auto d = len(c);
            if (c.kind == ConeKind::Nonneg) {
                sc.w = (s.segment(o, d).array() / z.segment(o, d).array()).sqrt();
                lambda.segment(o, d) = (s.segment(o, d).array() * z.segment(o, d).array()).sqrt();
                continue;
            }
            const Vec sk = s.segment(o, d);
            const Vec zk = z.segment(o, d);
            const double s_res = soc_residual(sk);
            const double z_res = soc_residual(zk);
            if (!(s_res > 0.0) || !(z_res > 0.0)) {
                throw NumericalFailure(0, 0, 0, 0, "iterate left the second-order cone");
            }
            const double snorm = std::sqrt(s_res);
            const double znorm = std::sqrt(z_res);
            const Vec sbar = sk / snorm;
            const Vec zbar = zk / znorm;
            const double gamma = std::sqrt(std::max(0.5 * (1.0 + sbar.dot(zbar)), 1e-300));
            Vec wbar(d);
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            if (d > 1) wbar.tail(d - 1) = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
            const double eta = std::sqrt(snorm / znorm);
            sc.W.resize(d, d);
            sc.Winv.resize(d, d);
            sc.W(0, 0) = wbar[0];
            sc.Winv(0, 0) = wbar[0];
            if (d > 1) {
                const Vec w1 = wbar.tail(d - 1);
                const Eigen::MatrixXd block =
                    Eigen::MatrixXd::Identity(d - 1, d - 1) + w1 * w1.transpose() / (1.0 + wbar[0]);
                sc.W.block(1, 0, d - 1, 1) = w1;
                sc.W.block(0, 1, 1, d - 1) = w1.transpose();
                sc.W.block(1, 1, d - 1, d - 1) = block;
                sc.Winv.block(1, 0, d - 1, 1) = -w1;
                sc.Winv.block(0, 1, 1, d - 1) = -w1.transpose();
                sc.Winv.block(1, 1, d - 1, d - 1) = block;
            }
            sc.W *= eta;
            sc.Winv /= eta;
            lambda.segment(o, d) = sc.W * zk;
        }
        return out;
    }

    Vec apply(const std::vector<ConeScaling>& sc, const Vec& u, bool inverse) const
    {
        Vec out(u.size());
        for (std::size_t k = 0; k < cones_.size(); ++k) {
            const auto& c = cones_[k];
            const auto o = off(c);
            const auto d = len(c);
            if (c.kind == ConeKind::Nonneg) {
                out.segment(o, d) = inverse ? Vec(u.segment(o, d).array() / sc[k].w.array())
                                            : Vec(u.segment(o, d).array() * sc[k].w.array());
            } else {
                out.segment(o, d) = (inverse ? sc[k].Winv : sc[k].W) * u.segment(o, d);
            }
        }
        return out;
    }

    Vec jordan_product(const Vec& u, const Vec& v) const
    {
        Vec out(u.size());
        for (const auto& c : cones_) {
            const auto o = off(c);
            const auto d = len(c);
            if (c.kind == ConeKind::Nonneg) {
                out.segment(o, d) = u.segment(o, d).array() * v.segment(o, d).array();
            } else {
                out[o] = u.segment(o, d).dot(v.segment(o, d));
                if (d > 1) out.segment(o + 1, d - 1) = u[o] * v.segment(o + 1, d - 1) + v[o] * u.segment(o + 1, d - 1);
            }
        }
        return out;
    }

    // Solves lambda o x = d for x.
    Vec jordan_divide(const Vec& lambda, const Vec& dvec) const
    {
        Vec out(lambda.size());
        for (const auto& c : cones_) {
            const auto o = off(c);
            const auto d = len(c);
            if (c.kind == ConeKind::Nonneg) {
                out.segment(o, d) = dvec.segment(o, d).array() / lambda.segment(o, d).array();
                continue;
            }
            const double l0 = lambda[o];
            if (d == 1) {
                out[o] = dvec[o] / l0;
                continue;
            }
            const auto l1 = lambda.segment(o + 1, d - 1);
            const double det = l0 * l0 - l1.squaredNorm();
            const double x0 = (l0 * dvec[o] - l1.dot(dvec.segment(o + 1, d - 1))) / det;
            out[o] = x0;
            out.segment(o + 1, d - 1) = (dvec.segment(o + 1, d - 1) - x0 * l1) / l0;
        }
        return out;
    }

    // Largest step alpha with u + alpha du in K (u interior).
    double max_step(const Vec& u, const Vec& du) const
    {
        double alpha = kInf;
        for (const auto& c : cones_) {
            const auto o = off(c);
            const auto d = len(c);
            if (c.kind == ConeKind::Nonneg) {
                for (Eigen::Index i = o; i < o + d; ++i) {
                    if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
                }
                continue;
            }
            alpha = std::min(alpha, soc_step(u.segment(o, d), du.segment(o, d)));
        }
        return alpha;
    }

    bool interior(const Vec& u) const
    {
        for (const auto& c : cones_) {
            if (c.kind == ConeKind::Nonneg) {
                if (c.dim > 0 && !(u.segment(off(c), len(c)).minCoeff() > 0.0)) return false;
            } else if (!(soc_residual(u.segment(off(c), len(c))) > 0.0)) {
                return false;
            }
        }
        return true;
    }

private:
    static Eigen::Index off(const Cone& c) { return static_cast<Eigen::Index>(c.offset); }
    static Eigen::Index len(const Cone& c) { return static_cast<Eigen::Index>(c.dim); }

    static double soc_residual(const Vec& u)
    {
        const double tail = u.size() > 1 ? u.tail(u.size() - 1).norm() : 0.0;
        return (u[0] - tail) * (u[0] + tail);
    }

    static double soc_step(const Vec& u, const Vec& du)
    {
        double alpha = kInf;
        if (du[0] < 0.0) alpha = -u[0] / du[0];
        const Eigen::Index d = u.size();
        const double a = du[0] * du[0] - (d > 1 ? du.tail(d - 1).squaredNorm() : 0.0);
        const double b = u[0] * du[0] - (d > 1 ? u.tail(d - 1).dot(du.tail(d - 1)) : 0.0);
        const double c = soc_residual(u);
        // f(t) = a t^2 + 2 b t + c, f(0) = c > 0; first positive root leaves the cone
        const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
        if (std::abs(a) <= 1e-14 * scale) {
            if (b < 0.0) alpha = std::min(alpha, -c / (2.0 * b));
            return alpha;
        }
        const double disc = b * b - a * c;
        if (disc < 0.0) return alpha;
        const double q = -(b + std::copysign(std::sqrt(disc), b));
        const double r1 = q / a;
        const double r2 = q != 0.0 ? c / q : kInf;
        if (r1 > 0.0) alpha = std::min(alpha, r1);
        if (r2 > 0.0) alpha = std::min(alpha, r2);
        return alpha;
    }

    std::vector<Cone> cones_;
    std::size_t m_;
    std::size_t degree_ = 0;
};

// ---------------------------------------------------------------------------
// Sparse LDL' for quasi-definite matrices with known pivot signs. Pivots that
// come out with the wrong sign or too small are replaced by sign * delta,
// which keeps the factorization well defined near the end of the iterations
// when the scaling matrices become very ill-conditioned.

class SparseLdl {
public:
    // `lower` holds the lower triangle; `sign` is +1 or -1 per row.
    void analyze(const SpMat& lower, std::vector<int> sign)
    {
        const auto n = static_cast<int>(lower.rows());
        n_ = n;
        Eigen::AMDOrdering<int> amd;
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> order;
        const SpMat full = lower.selfadjointView<Eigen::Lower>();
        amd(full, order);
        const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm = order.inverse();
        newidx_.assign(perm.indices().data(), perm.indices().data() + n);
        sign_.assign(static_cast<std::size_t>(n), 1);
        for (int i = 0; i < n; ++i) sign_[static_cast<std::size_t>(newidx_[i])] = sign[static_cast<std::size_t>(i)];

        const SpMat upper = permuted_upper(lower);
        const int* Ap = upper.outerIndexPtr();
        const int* Ai = upper.innerIndexPtr();
        etree_.assign(static_cast<std::size_t>(n), -1);
        std::vector<int> work(static_cast<std::size_t>(n), -1), lnz(static_cast<std::size_t>(n), 0);
        for (int j = 0; j < n; ++j) {
            work[static_cast<std::size_t>(j)] = j;
            for (int p = Ap[j]; p < Ap[j + 1]; ++p) {
                int i = Ai[p];
                while (i != j && work[static_cast<std::size_t>(i)] != j) {
                    if (etree_[static_cast<std::size_t>(i)] == -1) etree_[static_cast<std::size_t>(i)] = j;
                    ++lnz[static_cast<std::size_t>(i)];
                    work[static_cast<std::size_t>(i)] = j;
                    i = etree_[static_cast<std::size_t>(i)];
                }
            }
        }
        Lp_.assign(static_cast<std::size_t>(n) + 1, 0);
        for (int i = 0; i < n; ++i) Lp_[static_cast<std::size_t>(i) + 1] = Lp_[static_cast<std::size_t>(i)] + lnz[static_cast<std::size_t>(i)];
        Li_.assign(static_cast<std::size_t>(Lp_.back()), 0);
        Lx_.assign(static_cast<std::size_t>(Lp_.back()), 0.0);
        D_.assign(static_cast<std::size_t>(n), 0.0);
    }

    // Returns the number of regularized pivots.
    int factor(const SpMat& lower, double delta)
    {
        const SpMat upper = permuted_upper(lower);
        const int* Ap = upper.outerIndexPtr();
        const int* Ai = upper.innerIndexPtr();
        const double* Ax = upper.valuePtr();
        const auto n = static_cast<std::size_t>(n_);
        std::vector<double> y(n, 0.0);
        std::vector<char> marked(n, 0);
        std::vector<int> pattern, stack;
        std::vector<int> next(Lp_.begin(), Lp_.end() - 1);
        int regularized = 0;
        for (int k = 0; k < n_; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            double dk = 0.0;
            pattern.clear();
            for (int p = Ap[k]; p < Ap[k + 1]; ++p) {
                const int i = Ai[p];
                if (i == k) {
                    dk += Ax[p];
                    continue;
                }
                y[static_cast<std::size_t>(i)] += Ax[p];
                stack.clear();
                for (int t = i; t != -1 && t < k && !marked[static_cast<std::size_t>(t)]; t = etree_[static_cast<std::size_t>(t)]) {
                    marked[static_cast<std::size_t>(t)] = 1;
                    stack.push_back(t);
                }
                while (!stack.empty()) {
                    pattern.push_back(stack.back());
                    stack.pop_back();
                }
            }
            for (auto it = pattern.rbegin(); it != pattern.rend(); ++it) {
                const auto c = static_cast<std::size_t>(*it);
                const double yc = y[c];
                for (int q = Lp_[c]; q < next[c]; ++q) y[static_cast<std::size_t>(Li_[static_cast<std::size_t>(q)])] -= Lx_[static_cast<std::size_t>(q)] * yc;
                const auto slot = static_cast<std::size_t>(next[c]++);
                Li_[slot] = k;
                Lx_[slot] = yc / D_[c];
                dk -= yc * Lx_[slot];
                y[c] = 0.0;
                marked[c] = 0;
            }
            if (sign_[ku] * dk <= 1e-13) {
                dk = sign_[ku] * delta;
                ++regularized;
            }
            D_[ku] = dk;
        }
        return regularized;
    }

    Vec solve(const Vec& rhs) const
    {
        const auto n = static_cast<std::size_t>(n_);
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[static_cast<std::size_t>(newidx_[i])] = rhs[static_cast<Eigen::Index>(i)];
        for (std::size_t i = 0; i < n; ++i) {
            for (int q = Lp_[i]; q < Lp_[i + 1]; ++q) x[static_cast<std::size_t>(Li_[static_cast<std::size_t>(q)])] -= Lx_[static_cast<std::size_t>(q)] * x[i];
        }
        for (std::size_t i = 0; i < n; ++i) x[i] /= D_[i];
        for (std::size_t i = n; i-- > 0;) {
            for (int q = Lp_[i]; q < Lp_[i + 1]; ++q) x[i] -= Lx_[static_cast<std::size_t>(q)] * x[static_cast<std::size_t>(Li_[static_cast<std::size_t>(q)])];
        }
        Vec out(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = x[static_cast<std::size_t>(newidx_[i])];
        return out;
    }

private:
    SpMat permuted_upper(const SpMat& lower) const
    {
        std::vector<Triplet> trips;
        trips.reserve(static_cast<std::size_t>(lower.nonZeros()));
        for (int j = 0; j < lower.outerSize(); ++j) {
            for (SpMat::InnerIterator it(lower, j); it; ++it) {
                const int a = newidx_[static_cast<std::size_t>(it.row())];
                const int b = newidx_[static_cast<std::size_t>(j)];
                trips.emplace_back(std::min(a, b), std::max(a, b), it.value());
            }
        }
        SpMat upper(lower.rows(), lower.cols());
        upper.setFromTriplets(trips.begin(), trips.end());
        upper.makeCompressed();
        return upper;
    }

    int n_ = 0;
    std::vector<int> newidx_;
    std::vector<int> sign_;
    std::vector<int> etree_;
    std::vector<int> Lp_, Li_;
    std::vector<double> Lx_, D_;
};

// ---------------------------------------------------------------------------
// KKT system
//
//   [ dI   A'   G'  ]
//   [ A   -dI   0   ]
//   [ G    0  -W^2  ]
//
// factored by sparse LDL' (quasi-definite, so any symmetric ordering works),
// with iterative refinement against the unregularized matrix.

class KktSystem {
public:
    KktSystem(const SpMat& A, const ConeSet& cones, const std::vector<std::size_t>& cone_var, std::size_t n,
              double delta)
        : A_(A), cones_(cones), cone_var_(cone_var), n_(n), p_(static_cast<std::size_t>(A.rows())),
          m_(cones.dim()), delta_(delta)
    {
        std::vector<Triplet> trips;
        for (std::size_t k = 0; k < m_; ++k) trips.emplace_back(static_cast<int>(k), static_cast<int>(cone_var_[k]), -1.0);
        G_.resize(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n_));
        G_.setFromTriplets(trips.begin(), trips.end());
        G_.makeCompressed();
    }

    std::size_t size() const { return n_ + p_ + m_; }

    void factor(const std::vector<ConeScaling>& sc, int iteration)
    {
        scaling_ = &sc;
        std::vector<Triplet> trips;
        trips.reserve(n_ + static_cast<std::size_t>(A_.nonZeros()) + p_ + 2 * m_ + 16 * m_);
        for (std::size_t j = 0; j < n_; ++j) trips.emplace_back(static_cast<int>(j), static_cast<int>(j), delta_);
        for (int j = 0; j < A_.outerSize(); ++j) {
            for (SpMat::InnerIterator it(A_, j); it; ++it) {
                trips.emplace_back(static_cast<int>(n_ + static_cast<std::size_t>(it.row())), j, it.value());
            }
        }
        for (std::size_t r = 0; r < p_; ++r) {
            trips.emplace_back(static_cast<int>(n_ + r), static_cast<int>(n_ + r), -delta_);
        }
        const std::size_t zo = n_ + p_;
        for (std::size_t k = 0; k < m_; ++k) {
            trips.emplace_back(static_cast<int>(zo + k), static_cast<int>(cone_var_[k]), -1.0);
        }
        const auto& cones = cones_.cones();
        for (std::size_t c = 0; c < cones.size(); ++c) {
            const auto& cone = cones[c];
            if (cone.kind == ConeKind::Nonneg) {
                for (std::size_t i = 0; i < cone.dim; ++i) {
                    const double w = sc[c].w[static_cast<Eigen::Index>(i)];
                    const int idx = static_cast<int>(zo + cone.offset + i);
                    trips.emplace_back(idx, idx, -w * w);
                }
                continue;
            }
            const Eigen::MatrixXd W2 = sc[c].W * sc[c].W;
            for (std::size_t a = 0; a < cone.dim; ++a) {
                for (std::size_t b = 0; b <= a; ++b) {
                    trips.emplace_back(static_cast<int>(zo + cone.offset + a), static_cast<int>(zo + cone.offset + b),
                                       -W2(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
                }
            }
        }
        K_.resize(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
        K_.setFromTriplets(trips.begin(), trips.end());
        if (!analyzed_) {
            std::vector<int> sign(size(), -1);
            std::fill(sign.begin(), sign.begin() + static_cast<std::ptrdiff_t>(n_), 1);
            ldl_.analyze(K_, std::move(sign));
            analyzed_ = true;
        }
        ldl_.factor(K_, 1e-7);
        (void)iteration;
    }

    Vec solve(const Vec& rhs) const
    {
        Vec u = ldl_.solve(rhs);
        const double target = 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
        for (int k = 0; k < 8; ++k) {
            const Vec err = rhs - multiply(u);
            if (err.lpNorm<Eigen::Infinity>() <= target) break;
            u += ldl_.solve(err);
        }
        return u;
    }

private:
    Vec multiply(const Vec& u) const
    {
        const auto ux = u.head(static_cast<Eigen::Index>(n_));
        const auto uy = u.segment(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(p_));
        const Vec uz = u.tail(static_cast<Eigen::Index>(m_));
        Vec out(u.size());
        out.head(static_cast<Eigen::Index>(n_)) = A_.transpose() * uy + G_.transpose() * uz;
        out.segment(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(p_)) = A_ * ux;
        const Vec w2z = cones_.apply(*scaling_, cones_.apply(*scaling_, uz, false), false);
        out.tail(static_cast<Eigen::Index>(m_)) = G_ * ux - w2z;
        return out;
    }

    const SpMat& A_;
    const ConeSet& cones_;
    const std::vector<std::size_t>& cone_var_;
    std::size_t n_, p_, m_;
    double delta_;
    SpMat G_;
    SpMat K_;
    SparseLdl ldl_;
    bool analyzed_ = false;
    const std::vector<ConeScaling>* scaling_ = nullptr;

public:
    const SpMat& G() const { return G_; }
};

// ---------------------------------------------------------------------------

struct Iterate {
    Vec x, y, z, s;
    double tau = 1.0, kappa = 1.0;
};

ConicSolution unpresolve(const ConicProgram& prog, const Presolve& ps, const Vec& x, const Vec& y, const Vec& z)
{
    ConicSolution sol;
    const std::size_t n = prog.num_vars();
    const std::size_t p = prog.num_equalities();
    sol.primal.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        sol.primal[j] = ps.var_to_red[j] >= 0 ? x[ps.var_to_red[j]] : ps.fixed[j];
    }
    sol.eq_dual.assign(p, 0.0);
    for (std::size_t r = 0; r < p; ++r) {
        if (ps.row_to_red[r] >= 0) sol.eq_dual[r] = y[ps.row_to_red[r]];
    }
    for (auto it = ps.eliminated.rbegin(); it != ps.eliminated.rend(); ++it) {
        double acc = prog.cost()[it->var];
        for (const auto& e : ps.columns[it->var]) {
            if (e.col != it->row) acc += e.value * sol.eq_dual[e.col];
        }
        sol.eq_dual[it->row] = -acc / it->coef;
    }
    sol.cone_dual.assign(z.data(), z.data() + z.size());
    sol.objective = prog.objective_value(sol.primal);
    return sol;
}

}  // namespace

ConicSolution solve(const ConicProgram& prog, const SolverSettings& settings)
{
    prog.validate();
    Presolve ps = presolve(prog, settings.presolve);

    const std::size_t n = ps.red_to_var.size();
    const std::size_t p = ps.red_to_row.size();
    const std::size_t m = ps.cone_var.size();
    const ConeSet cones(ps.cones, m);

    auto finish = [&](ConicSolution sol, SolveStatus status, int iterations) {
        sol.status = status;
        sol.iterations = iterations;
        sol.kkt = kkt_residuals(prog, sol);
        sol.warnings.insert(sol.warnings.begin(), ps.warnings.begin(), ps.warnings.end());
        if (status == SolveStatus::Optimal && sol.kkt.max() > settings.tol) {
            sol.status = SolveStatus::MaxIter;
            sol.warnings.push_back("KKT verification failed after convergence");
        }
        return sol;
    };

    if (ps.infeasible) {
        return finish(unpresolve(prog, ps, Vec::Zero(static_cast<Eigen::Index>(n)),
                                 Vec::Zero(static_cast<Eigen::Index>(p)), Vec::Zero(static_cast<Eigen::Index>(m))),
                      SolveStatus::Infeasible, 0);
    }
    if (n == 0) {
        return finish(unpresolve(prog, ps, Vec(), Vec::Zero(static_cast<Eigen::Index>(p)), Vec()),
                      SolveStatus::Optimal, 0);
    }

    const SpMat& A = ps.A;
    const Vec& b = ps.b;
    const Vec& c = ps.c;
    KktSystem kkt(A, cones, ps.cone_var, n, 1e-9);
    const SpMat& G = kkt.G();
    const auto ni = static_cast<Eigen::Index>(n);
    const auto pi = static_cast<Eigen::Index>(p);
    const auto mi = static_cast<Eigen::Index>(m);

    auto pack = [&](const Vec& rx, const Vec& ry, const Vec& rz) {
        Vec r(ni + pi + mi);
        r << rx, ry, rz;
        return r;
    };

    // initial point from two least-squares solves with W = I
    std::vector<ConeScaling> unit(cones.cones().size());
    for (std::size_t k = 0; k < unit.size(); ++k) {
        const auto d = static_cast<Eigen::Index>(cones.cones()[k].dim);
        unit[k].w = Vec::Ones(d);
        unit[k].W = Eigen::MatrixXd::Identity(d, d);
        unit[k].Winv = Eigen::MatrixXd::Identity(d, d);
    }
    kkt.factor(unit, 0);
    Iterate it;
    {
        const Vec primal = kkt.solve(pack(Vec::Zero(ni), b, Vec::Zero(mi)));
        it.x = primal.head(ni);
        it.s = -primal.tail(mi);
        cones.shift_into_interior(it.s);
        const Vec dual = kkt.solve(pack(-c, Vec::Zero(pi), Vec::Zero(mi)));
        it.y = dual.segment(ni, pi);
        it.z = dual.tail(mi);
        cones.shift_into_interior(it.z);
    }

    const double degree = static_cast<double>(cones.degree());
    const Vec e = cones.identity();

    if (settings.verbose) {
        std::clog << " it     pcost         dcost        gap      pres     dres      k/t      s'z     step\n";
    }

    double last_step = 0.0;
    std::optional<ConicSolution> best;
    double best_err = kInf;
    int polish = 0;
    for (int iter = 0;; ++iter) {
        // residuals of the embedding
        const Vec rx = A.transpose() * it.y + G.transpose() * it.z + c * it.tau;
        const Vec ry = b * it.tau - A * it.x;
        const Vec rz = -G * it.x - it.s;
        const double rtau = -c.dot(it.x) - b.dot(it.y) - it.kappa;

        // convergence on the unscaled iterate
        const double inv_tau = 1.0 / it.tau;
        const double pres = std::max((A * it.x * inv_tau - b).lpNorm<Eigen::Infinity>(),
                                     ((G * it.x + it.s) * inv_tau).lpNorm<Eigen::Infinity>());
        const double dres = ((A.transpose() * it.y + G.transpose() * it.z) * inv_tau + c).lpNorm<Eigen::Infinity>();
        const double pcost = c.dot(it.x) * inv_tau;
        const double dcost = -b.dot(it.y) * inv_tau;
        const double gap = std::abs(pcost - dcost) / (1.0 + std::abs(pcost));
        const double compl_gap = m > 0 ? it.s.dot(it.z) * inv_tau * inv_tau / (1.0 + std::abs(pcost)) : 0.0;

        if (settings.verbose) {
            std::clog << std::setw(3) << iter << std::scientific << std::setprecision(4) << "  " << pcost << "  "
                      << dcost << "  " << std::setprecision(2) << gap << "  " << pres << "  " << dres << "  "
                      << it.kappa / it.tau << "  " << compl_gap << "  " << last_step << std::defaultfloat << '\n';
        }
        if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) {
            if (best) return finish(std::move(*best), SolveStatus::Optimal, iter);
            throw NumericalFailure(iter, pres, dres, gap, "non-finite iterate");
        }

        if (pres <= settings.tol && dres <= settings.tol && gap <= settings.tol) {
            ConicSolution sol = unpresolve(prog, ps, it.x * inv_tau, it.y * inv_tau, it.z * inv_tau);
            const auto check = kkt_residuals(prog, sol);
            const double err = check.max();
            if (settings.verbose) {
                std::clog << "     original program: pres " << check.primal << "  dres " << check.dual << "  gap " << check.gap
                          << '\n';
            }
            const bool improved = err < best_err;
            if (err < best_err) {
                best_err = err;
                best = std::move(sol);
            }
            // past the tolerance, keep stepping while the error still drops
            if (best_err <= settings.tol &&
                (best_err <= kPolishTarget * settings.tol || !improved || ++polish > kPolishSteps)) {
                return finish(std::move(*best), SolveStatus::Optimal, iter);
            }
            if (iter >= settings.max_iter) return finish(std::move(*best), SolveStatus::Optimal, iter);
        } else if (best_err <= settings.tol) {
            return finish(std::move(*best), SolveStatus::Optimal, iter);
        }

        // infeasibility certificates
        if (it.tau < it.kappa) {
            const double bty = b.dot(it.y);
            if (bty < 0.0) {
                const double res = (A.transpose() * it.y + G.transpose() * it.z).lpNorm<Eigen::Infinity>() / -bty;
                if (res <= settings.infeasibility_tol) {
                    return finish(unpresolve(prog, ps, it.x, it.y / -bty, it.z / -bty), SolveStatus::Infeasible, iter);
                }
            }
            const double ctx = c.dot(it.x);
            if (ctx < 0.0) {
                const double res = std::max((A * it.x).lpNorm<Eigen::Infinity>(),
                                            (G * it.x + it.s).lpNorm<Eigen::Infinity>()) / -ctx;
                if (res <= settings.infeasibility_tol) {
                    return finish(unpresolve(prog, ps, it.x / -ctx, it.y, it.z), SolveStatus::Unbounded, iter);
                }
            }
        }

        if (iter >= settings.max_iter) {
            return finish(unpresolve(prog, ps, it.x * inv_tau, it.y * inv_tau, it.z * inv_tau), SolveStatus::MaxIter,
                          iter);
        }

        // Newton step
        Vec lambda;
        const auto sc = cones.scaling(it.s, it.z, lambda);
        kkt.factor(sc, iter);

        const Vec u1 = kkt.solve(pack(-c, b, Vec::Zero(mi)));
        const Vec x1 = u1.head(ni), y1 = u1.segment(ni, pi), z1 = u1.tail(mi);
        const double denom_base = -c.dot(x1) - b.dot(y1);

        struct Direction {
            Vec dx, dy, dz, ds;
            double dtau, dkappa;
        };
        auto direction = [&](double scale, const Vec& d_s, double d_kappa) {
            const Vec dx_rhs = -scale * rx;
            const Vec dy_rhs = -scale * ry;
            const Vec dz_rhs = -scale * rz;
            const double d_tau = -scale * rtau;
            const Vec wu = cones.apply(sc, cones.jordan_divide(lambda, d_s), false);
            const Vec u2 = kkt.solve(pack(dx_rhs, -dy_rhs, -dz_rhs - wu));
            const Vec x2 = u2.head(ni), y2 = u2.segment(ni, pi), z2 = u2.tail(mi);
            Direction dir;
            dir.dtau = (d_tau + d_kappa / it.tau + c.dot(x2) + b.dot(y2)) / (it.kappa / it.tau + denom_base);
            dir.dx = x2 + dir.dtau * x1;
            dir.dy = y2 + dir.dtau * y1;
            dir.dz = z2 + dir.dtau * z1;
            dir.ds = cones.apply(sc, cones.jordan_divide(lambda, d_s) - cones.apply(sc, dir.dz, false), false);
            dir.dkappa = (d_kappa - it.kappa * dir.dtau) / it.tau;
            return dir;
        };
        auto step_length = [&](const Direction& dir) {
            double alpha = std::min(cones.max_step(it.s, dir.ds), cones.max_step(it.z, dir.dz));
            if (dir.dtau < 0.0) alpha = std::min(alpha, -it.tau / dir.dtau);
            if (dir.dkappa < 0.0) alpha = std::min(alpha, -it.kappa / dir.dkappa);
            return alpha;
        };

        // predictor
        const Vec lam_sq = cones.jordan_product(lambda, lambda);
        const Direction aff = direction(1.0, -lam_sq, -it.tau * it.kappa);
        const double alpha_aff = std::min(1.0, step_length(aff));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);
        const double mu = (it.s.dot(it.z) + it.tau * it.kappa) / (degree + 1.0);

        // corrector
        const Vec corr = cones.jordan_product(cones.apply(sc, aff.ds, true), cones.apply(sc, aff.dz, false));
        const Vec d_s = -lam_sq - corr + sigma * mu * e;
        const double d_kappa = -it.tau * it.kappa - aff.dtau * aff.dkappa + sigma * mu;
        const Direction dir = direction(1.0 - sigma, d_s, d_kappa);
        double alpha = std::min(1.0, 0.99 * step_length(dir));
        for (int k = 0; k < 40 && !(cones.interior(it.s + alpha * dir.ds) && cones.interior(it.z + alpha * dir.dz)); ++k) {
            alpha *= 0.8;
        }
        last_step = alpha;
        if (!(alpha > 1e-12) || !std::isfinite(alpha) || !cones.interior(it.s + alpha * dir.ds) ||
            !cones.interior(it.z + alpha * dir.dz)) {
            if (best) return finish(std::move(*best), SolveStatus::Optimal, iter);
            throw NumericalFailure(iter, pres, dres, gap, "zero step length");
        }

        it.x += alpha * dir.dx;
        it.y += alpha * dir.dy;
        it.z += alpha * dir.dz;
        it.s += alpha * dir.ds;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
    }
}

}  // namespace drsf::conic
