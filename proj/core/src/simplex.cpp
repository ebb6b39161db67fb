#include "gridsec/simplex.hpp"

#include <cmath>
#include <vector>

namespace gridsec {

namespace {

constexpr double kEps = 1e-9;

// Tableau simplex with Bland's rule ("positive reduced cost enters").
// t is (m+1) x (cols+1): m constraint rows, objective row, RHS last column.
// Returns false when the iteration guard trips.
bool run_simplex(Eigen::MatrixXd& t, std::vector<int>& basis, bool& unbounded) {
    const Eigen::Index m = t.rows() - 1;
    const Eigen::Index total = t.cols() - 1;
    unbounded = false;

    const long max_iter = 500L * static_cast<long>(m + total + 10);
    for (long iter = 0; iter < max_iter; ++iter) {
        Eigen::Index pivot_col = -1;
        for (Eigen::Index j = 0; j < total; ++j) {
            if (t(m, j) > kEps) {
                pivot_col = j;
                break;
            }
        }
        if (pivot_col < 0) return true; // optimal

        Eigen::Index pivot_row = -1;
        double best_ratio = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (t(i, pivot_col) > kEps) {
                const double ratio = t(i, total) / t(i, pivot_col);
                if (pivot_row < 0 || ratio < best_ratio - kEps ||
                    (std::abs(ratio - best_ratio) <= kEps && basis[i] < basis[pivot_row])) {
                    pivot_row = i;
                    best_ratio = ratio;
                }
            }
        }
        if (pivot_row < 0) {
            unbounded = true;
            return true;
        }

        const double piv = t(pivot_row, pivot_col);
        t.row(pivot_row) /= piv;
        for (Eigen::Index i = 0; i <= m; ++i) {
            if (i == pivot_row) continue;
            const double f = t(i, pivot_col);
            if (f != 0.0) t.row(i) -= f * t.row(pivot_row);
        }
        basis[pivot_row] = static_cast<int>(pivot_col);
    }
    return false;
}

} // namespace

LpResult solve_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                      const Eigen::VectorXd& b) {
    const int n = static_cast<int>(c.size());
    const int m = static_cast<int>(a.rows());
    LpResult result;
    if (a.cols() != n || b.size() != m) {
        result.status = LpStatus::NumericalFailure;
        return result;
    }

    // Phase 1 columns: n structural, m slacks, m artificials, RHS.
    const int total1 = n + 2 * m;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, total1 + 1);
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) {
        const double sign = (b[i] < 0.0) ? -1.0 : 1.0; // keep RHS nonnegative
        t.block(i, 0, 1, n) = sign * a.row(i);
        t(i, n + i) = sign;
        t(i, n + m + i) = 1.0;
        t(i, total1) = sign * b[i];
        basis[i] = n + m + i;
    }
    // Minimizing the artificial sum == maximizing its negative; with the
    // artificials basic, the reduced-cost row is the sum of constraint rows
    // over the non-artificial columns, RHS included.
    for (int i = 0; i < m; ++i) t.row(m) += t.row(i);
    for (int i = 0; i < m; ++i) t(m, n + m + i) = 0.0;

    bool unbounded = false;
    if (!run_simplex(t, basis, unbounded)) {
        result.status = LpStatus::NumericalFailure;
        return result;
    }
    if (t(m, total1) > 1e-7) {
        result.status = LpStatus::Infeasible;
        return result;
    }

    // Pivot any degenerate artificial out of the basis, then drop those columns.
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n + m) continue;
        bool pivoted = false;
        for (int j = 0; j < n + m && !pivoted; ++j) {
            if (std::abs(t(i, j)) > kEps) {
                const double piv = t(i, j);
                t.row(i) /= piv;
                for (int r = 0; r <= m; ++r) {
                    if (r == i) continue;
                    const double f = t(r, j);
                    if (f != 0.0) t.row(r) -= f * t.row(i);
                }
                basis[i] = j;
                pivoted = true;
            }
        }
        // A row that cannot be pivoted is redundant (all-zero); leave it.
    }

    const int total2 = n + m;
    Eigen::MatrixXd t2(m + 1, total2 + 1);
    t2.block(0, 0, m, total2) = t.block(0, 0, m, total2);
    t2.block(0, total2, m, 1) = t.block(0, total1, m, 1);

    // Phase 2 objective row: c over structural columns, reduced by the basis.
    t2.row(m).setZero();
    for (int j = 0; j < n; ++j) t2(m, j) = c[j];
    for (int i = 0; i < m; ++i) {
        if (basis[i] < total2 && basis[i] < n && c[basis[i]] != 0.0)
            t2.row(m) -= c[basis[i]] * t2.row(i);
        else if (basis[i] >= total2)
            basis[i] = total2; // redundant row marker; never selected as pivot
    }

    if (!run_simplex(t2, basis, unbounded)) {
        result.status = LpStatus::NumericalFailure;
        return result;
    }
    if (unbounded) {
        result.status = LpStatus::Unbounded;
        return result;
    }

    result.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) result.x[basis[i]] = t2(i, total2);
    result.objective = c.dot(result.x);
    result.status = LpStatus::Optimal;
    return result;
}

} // namespace gridsec
