#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "demoq/errors.hpp"
#include "demoq/rng.hpp"

namespace demoq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class FrameKind : std::uint8_t {
  RandomOrthonormal = 0,
  RandomizedHadamard = 1,
  SubGaussian = 2,
  Identity = 3,
};

inline std::string to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::RandomOrthonormal: return "orthonormal";
    case FrameKind::RandomizedHadamard: return "hadamard";
    case FrameKind::SubGaussian: return "subgaussian";
    case FrameKind::Identity: return "identity";
  }
  return "?";
}

inline FrameKind frame_kind_from_string(const std::string& s) {
  if (s == "orthonormal") return FrameKind::RandomOrthonormal;
  if (s == "hadamard") return FrameKind::RandomizedHadamard;
  if (s == "subgaussian") return FrameKind::SubGaussian;
  if (s == "identity") return FrameKind::Identity;
  throw ConfigError("unknown frame kind: " + s);
}

// Lemma-1 constants for a frame with bounds (A, B) satisfying the
// uncertainty principle with parameters (eta, delta).
struct KashinParams {
  double eta = 0.0;
  double delta = 0.0;
  double frame_lower = 1.0;   // A
  double frame_upper = 1.0;   // B
  double k_lower = 1.0;       // 1/sqrt(B)
  double k_upper = 0.0;       // eta / ((A - eta*sqrt(B)) * sqrt(delta))
};

inline KashinParams kashin_constants(double eta, double delta, double A, double B) {
  if (!(eta > 0.0)) throw InvalidUP("eta must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidUP("delta must lie in (0,1)");
  if (!(A > 0.0 && A <= B)) throw InvalidUP("frame bounds require 0 < A <= B");
  const double sqrtB = std::sqrt(B);
  if (!(A > eta * sqrtB)) {
    throw InvalidUP("Lemma hypothesis violated: need A > eta*sqrt(B)");
  }
  KashinParams p;
  p.eta = eta;
  p.delta = delta;
  p.frame_lower = A;
  p.frame_upper = B;
  p.k_lower = 1.0 / sqrtB;
  p.k_upper = eta / ((A - eta * sqrtB) * std::sqrt(delta));
  return p;
}

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// In-place unnormalized fast Walsh-Hadamard transform (Sylvester ordering).
inline void fwht(Vector& v) {
  const Eigen::Index n = v.size();
  for (Eigen::Index h = 1; h < n; h <<= 1) {
    for (Eigen::Index i = 0; i < n; i += h << 1) {
      for (Eigen::Index j = i; j < i + h; ++j) {
        const double a = v[j];
        const double b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
    }
  }
}

// An n x N analysis operator S. Dense kinds store the matrix; the randomized
// Hadamard kind stores only the sign diagonal and sampled row set, and both
// apply directions run through the fast transform.
class Frame {
 public:
  static Frame build(FrameKind kind, int n, int N, std::uint64_t seed) {
    if (n < 1 || N < n) throw InvalidDimensions("need 1 <= n <= N");
    Frame f;
    f.kind_ = kind;
    f.n_ = n;
    f.N_ = N;
    f.seed_ = seed;
    Rng rng(seed);
    switch (kind) {
      case FrameKind::Identity:
        if (N != n) throw InvalidDimensions("identity frame requires N = n");
        break;
      case FrameKind::RandomizedHadamard: {
        if (!is_power_of_two(N)) {
          throw InvalidDimensions("hadamard frame requires N a power of two");
        }
        f.signs_.resize(N);
        for (int i = 0; i < N; ++i) f.signs_[i] = rng.coin() ? 1.0 : -1.0;
        f.rows_ = sample_without_replacement(N, n, rng);
        break;
      }
      case FrameKind::RandomOrthonormal: {
        Matrix g(N, N);
        for (int j = 0; j < N; ++j)
          for (int i = 0; i < N; ++i) g(i, j) = rng.normal();
        Eigen::BDCSVD<Matrix> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Matrix q = svd.matrixU() * svd.matrixV().transpose();
        const auto rows = sample_without_replacement(N, n, rng);
        f.dense_.resize(n, N);
        for (int i = 0; i < n; ++i) f.dense_.row(i) = q.row(rows[i]);
        break;
      }
      case FrameKind::SubGaussian: {
        f.dense_.resize(n, N);
        const double scale = 1.0 / std::sqrt(static_cast<double>(N));
        for (int j = 0; j < N; ++j)
          for (int i = 0; i < n; ++i) f.dense_(i, j) = scale * rng.normal();
        break;
      }
    }
    return f;
  }

  FrameKind kind() const { return kind_; }
  int n() const { return n_; }
  int N() const { return N_; }
  std::uint64_t seed() const { return seed_; }
  double aspect_ratio() const { return static_cast<double>(N_) / n_; }

  bool exact_parseval() const { return kind_ != FrameKind::SubGaussian; }

  // S * x
  Vector apply(const Vector& x) const {
    if (x.size() != N_) throw DimensionMismatch("apply: expected length N");
    switch (kind_) {
      case FrameKind::Identity:
        return x;
      case FrameKind::RandomizedHadamard: {
        Vector h = x;
        fwht(h);
        h *= 1.0 / std::sqrt(static_cast<double>(N_));
        Vector out(n_);
        for (int i = 0; i < n_; ++i) out[i] = signs_[rows_[i]] * h[rows_[i]];
        return out;
      }
      default:
        return dense_ * x;
    }
  }

  // S^T * y
  Vector apply_adjoint(const Vector& y) const {
    if (y.size() != n_) throw DimensionMismatch("apply_adjoint: expected length n");
    switch (kind_) {
      case FrameKind::Identity:
        return y;
      case FrameKind::RandomizedHadamard: {
        Vector z = Vector::Zero(N_);
        for (int i = 0; i < n_; ++i) z[rows_[i]] = signs_[rows_[i]] * y[i];
        fwht(z);
        z *= 1.0 / std::sqrt(static_cast<double>(N_));
        return z;
      }
      default:
        return dense_.transpose() * y;
    }
  }

  // Materializes S; for the Hadamard kind this is test/benchmark support only.
  Matrix to_dense() const {
    switch (kind_) {
      case FrameKind::Identity:
        return Matrix::Identity(n_, N_);
      case FrameKind::RandomizedHadamard: {
        Matrix m(n_, N_);
        Vector e = Vector::Zero(N_);
        for (int j = 0; j < N_; ++j) {
          e[j] = 1.0;
          m.col(j) = apply(e);
          e[j] = 0.0;
        }
        return m;
      }
      default:
        return dense_;
    }
  }

  const std::vector<int>& sampled_rows() const { return rows_; }
  const std::vector<double>& sign_diagonal() const { return signs_; }

 private:
  static std::vector<int> sample_without_replacement(int N, int n, Rng& rng) {
    std::vector<int> pool(N);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < n; ++i) {
      const int j = i + static_cast<int>(rng.uniform_below(N - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  FrameKind kind_ = FrameKind::Identity;
  int n_ = 0;
  int N_ = 0;
  std::uint64_t seed_ = 0;
  Matrix dense_;                // RandomOrthonormal, SubGaussian
  std::vector<double> signs_;   // RandomizedHadamard
  std::vector<int> rows_;       // RandomizedHadamard, RandomOrthonormal (applied)
};

// Monte-Carlo lower estimate of the UP parameter eta: the max of ||S x||_2
// over random floor(delta*N)-sparse unit vectors.
inline double estimate_up_eta(const Frame& frame, double delta, int trials,
                              std::uint64_t seed) {
  const int N = frame.N();
  const int k = static_cast<int>(std::floor(delta * N));
  if (k < 1) throw InvalidDelta("delta*N must be at least 1");
  if (trials < 1) throw InvalidDelta("trials must be at least 1");
  Rng rng(seed);
  double best = 0.0;
  std::vector<int> support(N);
  std::iota(support.begin(), support.end(), 0);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.uniform_below(N - i));
      std::swap(support[i], support[j]);
    }
    Vector x = Vector::Zero(N);
    for (int i = 0; i < k; ++i) x[support[i]] = rng.normal();
    const double norm = x.norm();
    if (norm == 0.0) continue;
    x /= norm;
    best = std::max(best, frame.apply(x).norm());
  }
  return best;
}

// Default UP parameters when the user supplies none: delta = 1/(2*lambda),
// eta estimated over 200 trials and inflated 10% as safety margin.
inline KashinParams default_kashin_params(const Frame& frame,
                                          std::uint64_t seed,
                                          double delta = 0.0,
                                          int trials = 200) {
  const double lambda = frame.aspect_ratio();
  if (delta <= 0.0) delta = 1.0 / (2.0 * lambda);
  if (delta * frame.N() < 1.0) delta = 1.0 / frame.N();
  const double estimate = estimate_up_eta(frame, delta, trials, seed);
  // Inflate the Monte-Carlo lower estimate 10% as safety margin, but never
  // past the A > eta*sqrt(B) validity boundary (eta < 1 for Parseval kinds);
  // near-square frames can measure eta close to 1.
  const double eta = std::min(1.1 * estimate, 0.5 * (1.0 + estimate));
  double A = 1.0, B = 1.0;
  if (frame.kind() == FrameKind::SubGaussian) {
    // Approximate Parseval only; measure the actual frame bounds.
    const Matrix gram = frame.to_dense() * frame.to_dense().transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    A = eig.eigenvalues().minCoeff();
    B = eig.eigenvalues().maxCoeff();
  }
  return kashin_constants(eta, delta, A, B);
}

}  // namespace demoq
