#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "demoq/errors.hpp"
#include "demoq/frame.hpp"
#include "demoq/simplex.hpp"

namespace demoq {

enum class EmbeddingMode : std::uint8_t { Democratic = 0, NearDemocratic = 1 };

struct Embedding {
  Vector coefficients;          // x in R^N with y = S x
  double gain = 0.0;            // ||x||_inf
  int source_dim = 0;           // n
  EmbeddingMode mode = EmbeddingMode::NearDemocratic;
  double residual = 0.0;        // ||y - S x||_2 achieved
};

namespace detail {

inline Embedding make_embedding(const Frame& frame, const Vector& y, Vector x,
                                EmbeddingMode mode) {
  Embedding e;
  e.residual = (y - frame.apply(x)).norm();
  e.gain = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  e.coefficients = std::move(x);
  e.source_dim = frame.n();
  e.mode = mode;
  return e;
}

}  // namespace detail

// Minimum-l2 solution of y = S x. For Parseval frames this is just S'y;
// otherwise solve the normal equations with the Gram matrix.
inline Embedding near_democratic(const Frame& frame, const Vector& y) {
  if (y.size() != frame.n()) throw DimensionMismatch("near_democratic: bad y size");
  Vector x;
  if (frame.exact_parseval()) {
    x = frame.apply_adjoint(y);
  } else {
    const Matrix s = frame.to_dense();
    const Matrix gram = s * s.transpose();
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw SingularGram("near_democratic: S S' is not invertible");
    }
    x = s.transpose() * ldlt.solve(y);
  }
  return detail::make_embedding(frame, y, std::move(x), EmbeddingMode::NearDemocratic);
}

// Minimum-l_inf solution of y = S x, via the LP
//   min t  s.t.  S x = y,  -t*1 <= x <= t*1.
// Standard form uses z = x + t*1 >= 0 and slacks s with z + s = 2t*1.
inline Embedding democratic_lp(const Frame& frame, const Vector& y) {
  const int n = frame.n();
  const int N = frame.N();
  if (y.size() != n) throw DimensionMismatch("democratic_lp: bad y size");
  const double scale = y.norm();
  if (scale == 0.0) {
    return detail::make_embedding(frame, y, Vector::Zero(N),
                                  EmbeddingMode::Democratic);
  }

  const Matrix s = frame.to_dense();
  const int cols = 2 * N + 1;  // z (N), slack (N), t
  Matrix A = Matrix::Zero(n + N, cols);
  Vector b = Vector::Zero(n + N);
  A.topLeftCorner(n, N) = s;
  A.topRightCorner(n, 1) = -s.rowwise().sum();
  b.head(n) = y / scale;
  A.block(n, 0, N, N).setIdentity();
  A.block(n, N, N, N).setIdentity();
  A.block(n, 2 * N, N, 1).setConstant(-2.0);

  Vector c = Vector::Zero(cols);
  c[2 * N] = 1.0;

  SimplexSolver solver;
  const LpResult lp = solver.solve(A, b, c);
  const double t = lp.x[2 * N];
  Vector x = scale * (lp.x.head(N).array() - t).matrix();

  // One projection onto {x : Sx = y} cleans up accumulated pivot round-off
  // without moving the l_inf objective measurably.
  if (frame.exact_parseval()) {
    x += frame.apply_adjoint(y - frame.apply(x));
  }
  return detail::make_embedding(frame, y, std::move(x), EmbeddingMode::Democratic);
}

// Truncate-and-project iteration of the Kashin-embedding construction:
// each step embeds the residual, clips coordinates at ||r||_2 / sqrt(delta*N)
// (magnitudes only, signs kept) and re-projects. The UP hypothesis makes the
// residual contract by eta per step.
inline Embedding democratic_iterative(const Frame& frame, const Vector& y,
                                      const KashinParams& params, int iters) {
  const int N = frame.N();
  if (y.size() != frame.n()) throw DimensionMismatch("democratic_iterative: bad y size");
  if (iters < 1) throw InvalidUP("democratic_iterative: iters must be >= 1");
  if (!(params.frame_lower > params.eta * std::sqrt(params.frame_upper))) {
    throw InvalidUP("democratic_iterative: params violate A > eta*sqrt(B)");
  }
  const double level_scale = 1.0 / std::sqrt(params.delta * N);
  Vector x = Vector::Zero(N);
  Vector r = y;
  for (int it = 0; it < iters; ++it) {
    const double rnorm = r.norm();
    if (rnorm == 0.0) break;
    const double level = rnorm * level_scale;
    Vector u = frame.apply_adjoint(r);
    for (int i = 0; i < N; ++i) {
      u[i] = std::clamp(u[i], -level, level);
    }
    x += u;
    r -= frame.apply(u);
    if (r.norm() > (params.eta + 0.05) * rnorm) {
      throw NonContracting(
          "democratic_iterative: residual failed to contract; "
          "UP parameters (eta, delta) do not hold for this frame");
    }
  }
  return detail::make_embedding(frame, y, std::move(x), EmbeddingMode::Democratic);
}

// Multiplicative bound on ||x||_inf / ||y||_2 for the given embedding mode.
// All logs are natural.
inline double dynamic_range_bound(const Frame& frame, EmbeddingMode mode,
                                  const KashinParams* params = nullptr) {
  const double N = frame.N();
  if (mode == EmbeddingMode::Democratic) {
    if (params == nullptr) {
      throw MissingParams("dynamic_range_bound: democratic mode needs KashinParams");
    }
    return params->k_upper / std::sqrt(N);
  }
  const double log2N = std::log(2.0 * N);
  if (frame.kind() == FrameKind::RandomizedHadamard) {
    return 2.0 * std::sqrt(log2N / N);
  }
  return 2.0 * std::sqrt(frame.aspect_ratio() * log2N / N);
}

}  // namespace demoq
