#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "demoq/errors.hpp"

namespace demoq {

struct LpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  long iterations = 0;
};

// Dense two-phase tableau simplex for min c'v s.t. Av = b, v >= 0.
// Dantzig pricing, with a permanent switch to Bland's rule once the
// iteration count suggests cycling/stalling. Target scale is a few
// hundred rows (the democratic-embedding LP at N <= 512).
class SimplexSolver {
 public:
  explicit SimplexSolver(long max_iterations = 200000)
      : max_iterations_(max_iterations) {}

  LpResult solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                 const Eigen::VectorXd& c) {
    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    if (b.size() != m || c.size() != n) {
      throw DimensionMismatch("simplex: inconsistent LP dimensions");
    }

    // Work with b >= 0.
    Eigen::MatrixXd Aw = A;
    Eigen::VectorXd bw = b;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (bw[i] < 0.0) {
        bw[i] = -bw[i];
        Aw.row(i) = -Aw.row(i);
      }
    }

    // Reuse unit columns as the starting basis where possible; artificials
    // fill the remaining rows.
    std::vector<Eigen::Index> basis(m, -1);
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::Index row = -1;
      bool unit = true;
      for (Eigen::Index i = 0; i < m && unit; ++i) {
        const double v = Aw(i, j);
        if (v == 1.0 && row == -1) {
          row = i;
        } else if (v != 0.0) {
          unit = false;
        }
      }
      if (unit && row >= 0 && basis[row] == -1) basis[row] = j;
    }
    Eigen::Index n_art = 0;
    for (Eigen::Index i = 0; i < m; ++i)
      if (basis[i] == -1) ++n_art;

    const Eigen::Index total = n + n_art;
    tableau_.resize(m, total + 1);
    tableau_.leftCols(n) = Aw;
    tableau_.middleCols(n, n_art).setZero();
    tableau_.col(total) = bw;
    {
      Eigen::Index a = 0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (basis[i] == -1) {
          basis[i] = n + a;
          tableau_(i, n + a) = 1.0;
          ++a;
        }
      }
    }
    basis_ = basis;
    n_real_ = n;
    n_total_ = total;
    m_ = m;
    iterations_ = 0;

    if (n_art > 0) {
      // Phase 1: drive the artificials to zero.
      Eigen::VectorXd c1 = Eigen::VectorXd::Zero(total);
      c1.segment(n, n_art).setOnes();
      rebuild_cost_row(c1);
      run(/*block_artificials=*/false);
      if (objective_value(c1) > 1e-7) {
        throw SolverFailure("simplex: LP infeasible in phase 1");
      }
      pivot_out_artificials();
    }

    Eigen::VectorXd c2 = Eigen::VectorXd::Zero(total);
    c2.head(n) = c;
    rebuild_cost_row(c2);
    run(/*block_artificials=*/true);

    LpResult result;
    result.x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (basis_[i] < n) result.x[basis_[i]] = tableau_(i, n_total_);
    }
    result.objective = c.dot(result.x);
    result.iterations = iterations_;
    return result;
  }

 private:
  static constexpr double kPivotEps = 1e-9;
  static constexpr double kCostEps = 1e-9;

  void rebuild_cost_row(const Eigen::VectorXd& costs) {
    // Reduced costs r_j = c_j - c_B' B^{-1} A_j; the tableau already holds
    // B^{-1} A, so this is one pass over the columns.
    cost_row_ = costs;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double cb = costs[basis_[i]];
      if (cb != 0.0) cost_row_ -= cb * tableau_.row(i).head(n_total_).transpose();
    }
  }

  double objective_value(const Eigen::VectorXd& costs) const {
    double v = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      v += costs[basis_[i]] * tableau_(i, n_total_);
    }
    return v;
  }

  void run(bool block_artificials) {
    const Eigen::Index limit = block_artificials ? n_real_ : n_total_;
    long local_iters = 0;
    const long bland_after = 20 * static_cast<long>(n_total_);
    while (true) {
      if (++iterations_ > max_iterations_) {
        throw SolverFailure("simplex: iteration cap exceeded");
      }
      const bool bland = ++local_iters > bland_after;
      Eigen::Index enter = -1;
      if (bland) {
        for (Eigen::Index j = 0; j < limit; ++j) {
          if (cost_row_[j] < -kCostEps) {
            enter = j;
            break;
          }
        }
      } else {
        double best = -kCostEps;
        for (Eigen::Index j = 0; j < limit; ++j) {
          if (cost_row_[j] < best) {
            best = cost_row_[j];
            enter = j;
          }
        }
      }
      if (enter < 0) return;  // optimal

      Eigen::Index leave = -1;
      double best_ratio = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = tableau_(i, enter);
        if (a > kPivotEps) {
          const double ratio = tableau_(i, n_total_) / a;
          if (leave < 0 || ratio < best_ratio - 1e-12 ||
              (std::abs(ratio - best_ratio) <= 1e-12 &&
               basis_[i] < basis_[leave])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) {
        throw SolverFailure("simplex: LP unbounded");
      }
      pivot(leave, enter);
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    tableau_.row(row) /= tableau_(row, col);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = tableau_(i, col);
      if (f != 0.0) tableau_.row(i) -= f * tableau_.row(row);
    }
    const double fc = cost_row_[col];
    if (fc != 0.0) {
      cost_row_ -= fc * tableau_.row(row).head(n_total_).transpose();
    }
    basis_[row] = col;
  }

  void pivot_out_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[i] < n_real_) continue;
      Eigen::Index col = -1;
      for (Eigen::Index j = 0; j < n_real_; ++j) {
        if (std::abs(tableau_(i, j)) > kPivotEps) {
          col = j;
          break;
        }
      }
      // A redundant row keeps its zero-level artificial; it can never
      // re-enter because phase 2 prices real columns only.
      if (col >= 0) pivot(i, col);
    }
  }

  Eigen::MatrixXd tableau_;
  Eigen::VectorXd cost_row_;
  std::vector<Eigen::Index> basis_;
  Eigen::Index m_ = 0;
  Eigen::Index n_real_ = 0;
  Eigen::Index n_total_ = 0;
  long iterations_ = 0;
  long max_iterations_;
};

}  // namespace demoq
