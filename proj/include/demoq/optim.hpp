#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "demoq/embedding.hpp"
#include "demoq/errors.hpp"
#include "demoq/frame.hpp"
#include "demoq/quantizer.hpp"
#include "demoq/rng.hpp"

namespace demoq {

// ---------------------------------------------------------------------------
// Objectives.
// ---------------------------------------------------------------------------

// f(x) = 0.5 ||A x - b||^2 + 0.5 * reg * ||x||^2. Covers plain least squares
// (reg = 0) and the ridge variant. L and mu come from the spectrum of A'A.
struct QuadraticObjective {
  Matrix A;
  Vector b;
  double reg = 0.0;
  double L = 0.0;
  double mu = 0.0;
  Vector xstar;

  static QuadraticObjective build(Matrix A_, Vector b_, double reg_ = 0.0) {
    if (A_.rows() != b_.size()) {
      throw DimensionMismatch("quadratic objective: A rows != b size");
    }
    if (reg_ < 0.0) throw InvalidSpec("quadratic objective: reg must be >= 0");
    QuadraticObjective obj;
    obj.A = std::move(A_);
    obj.b = std::move(b_);
    obj.reg = reg_;
    const Matrix gram = obj.A.transpose() * obj.A;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    obj.L = eig.eigenvalues().maxCoeff() + reg_;
    obj.mu = eig.eigenvalues().minCoeff() + reg_;
    Matrix reg_gram = gram;
    reg_gram.diagonal().array() += reg_;
    obj.xstar = reg_gram.ldlt().solve(obj.A.transpose() * obj.b);
    return obj;
  }

  int dim() const { return static_cast<int>(A.cols()); }
  double value(const Vector& x) const {
    return 0.5 * (A * x - b).squaredNorm() + 0.5 * reg * x.squaredNorm();
  }
  Vector gradient(const Vector& x) const {
    return A.transpose() * (A * x - b) + reg * x;
  }
};

// Average hinge loss f(x) = (1/m) sum_i max(0, 1 - y_i * a_i'x). At the kink
// (margin exactly 0) the per-sample subgradient is 0; the full subgradient
// uses the same rule so the batched oracle is exactly unbiased.
struct HingeObjective {
  Matrix A;       // rows a_i
  Vector labels;  // +-1
  double B = 0.0; // subgradient bound: max_i ||a_i||_2

  static HingeObjective build(Matrix A_, Vector labels_) {
    if (A_.rows() != labels_.size()) {
      throw DimensionMismatch("hinge objective: A rows != labels size");
    }
    for (Eigen::Index i = 0; i < labels_.size(); ++i) {
      if (labels_[i] != 1.0 && labels_[i] != -1.0) {
        throw InvalidSpec("hinge objective: labels must be +-1");
      }
    }
    HingeObjective obj;
    obj.A = std::move(A_);
    obj.labels = std::move(labels_);
    obj.B = 0.0;
    for (Eigen::Index i = 0; i < obj.A.rows(); ++i) {
      obj.B = std::max(obj.B, obj.A.row(i).norm());
    }
    return obj;
  }

  int dim() const { return static_cast<int>(A.cols()); }
  int samples() const { return static_cast<int>(A.rows()); }

  double value(const Vector& x) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      total += std::max(0.0, 1.0 - labels[i] * A.row(i).dot(x));
    }
    return total / static_cast<double>(A.rows());
  }

  Vector sample_subgradient(const Vector& x, Eigen::Index i) const {
    const double margin = 1.0 - labels[i] * A.row(i).dot(x);
    if (margin > 0.0) return -labels[i] * A.row(i).transpose();
    return Vector::Zero(dim());
  }

  Vector subgradient(const Vector& x) const {
    Vector g = Vector::Zero(dim());
    for (Eigen::Index i = 0; i < A.rows(); ++i) g += sample_subgradient(x, i);
    return g / static_cast<double>(A.rows());
  }

  // Unbiased minibatch oracle: mean of `batch` uniformly sampled per-sample
  // subgradients. ||output||_2 <= B always.
  Vector stochastic_subgradient(const Vector& x, int batch, Rng& rng) const {
    if (batch < 1) throw InvalidSpec("batch must be >= 1");
    Vector g = Vector::Zero(dim());
    for (int t = 0; t < batch; ++t) {
      const auto i = static_cast<Eigen::Index>(rng.uniform_below(A.rows()));
      g += sample_subgradient(x, i);
    }
    return g / static_cast<double>(batch);
  }

  double classification_error(const Vector& x) const {
    int wrong = 0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double score = A.row(i).dot(x);
      if (labels[i] * score <= 0.0) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(A.rows());
  }
};

// ---------------------------------------------------------------------------
// Projection domains.
// ---------------------------------------------------------------------------

struct Domain {
  enum class Kind { Ball, Box } kind = Kind::Ball;
  Vector center;  // Ball
  double radius = 0.0;
  Vector lo, hi;  // Box

  static Domain ball(Vector center, double radius) {
    if (!(radius > 0.0)) throw InvalidDomain("ball radius must be positive");
    Domain d;
    d.kind = Kind::Ball;
    d.center = std::move(center);
    d.radius = radius;
    return d;
  }
  static Domain box(Vector lo, Vector hi) {
    if (lo.size() != hi.size()) throw InvalidDomain("box bounds size mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (!(lo[i] <= hi[i])) throw InvalidDomain("box needs lo <= hi");
    }
    Domain d;
    d.kind = Kind::Box;
    d.lo = std::move(lo);
    d.hi = std::move(hi);
    return d;
  }

  double diameter() const {
    return kind == Kind::Ball ? 2.0 * radius : (hi - lo).norm();
  }
};

inline Vector project(const Domain& domain, const Vector& x) {
  if (domain.kind == Domain::Kind::Ball) {
    if (x.size() != domain.center.size()) {
      throw InvalidDomain("project: dimension mismatch");
    }
    const Vector d = x - domain.center;
    const double norm = d.norm();
    if (norm <= domain.radius) return x;
    return domain.center + (domain.radius / norm) * d;
  }
  if (x.size() != domain.lo.size()) {
    throw InvalidDomain("project: dimension mismatch");
  }
  return x.cwiseMax(domain.lo).cwiseMin(domain.hi);
}

// ---------------------------------------------------------------------------
// Run reports.
// ---------------------------------------------------------------------------

struct RunReport {
  std::vector<double> distance;       // ||x_hat_t - x*||, t = 0..T
  std::vector<double> objective;      // f(x_hat_t), t = 0..T
  std::vector<long> bits;             // transmitted bits, iteration 1..T
  std::vector<Vector> iterates;       // x_hat_t if recording was requested
  std::vector<Vector> access_points;  // z_t, likewise
  Vector final_iterate;
  Vector averaged_iterate;            // subgradient runs
  std::vector<double> gap_trace;      // f(running average) - f*, if f* known
  double empirical_rate = 1.0;        // (d_T / d_0)^{1/T}, clipped at 1
  double gap = 0.0;
  long total_bits = 0;
};

inline double empirical_rate(double d0, double dT, int T) {
  if (d0 <= 0.0) return 0.0;
  const double r = std::pow(dT / d0, 1.0 / T);
  if (!std::isfinite(r)) return 1.0;
  return std::min(r, 1.0);
}

// ---------------------------------------------------------------------------
// Closed-form bounds.
// ---------------------------------------------------------------------------

inline double thm1_lower(double sigma, double rate) {
  if (sigma < 0.0 || sigma >= 1.0) throw OutOfRange("thm1_lower: sigma in [0,1)");
  return std::max(sigma, std::pow(2.0, -rate));
}

inline double prop2_bound(double nu, double beta, double alpha, double L,
                          int T, double D) {
  if (std::abs(nu - beta) <= 1e-12) {
    return std::pow(nu, T) * (1.0 + alpha * L * T) * D;
  }
  const double base = std::max(nu, beta);
  return std::pow(base, T) * (1.0 + beta * alpha * L / std::abs(beta - nu)) * D;
}

inline double prop4_bound(double k_upper, double D, double B, int T) {
  return k_upper * D * B / std::sqrt(static_cast<double>(T));
}

// Radius of the coder input at iteration t: r_t = L*D * sum_{j=0}^t nu^j beta^{t-j}.
inline double lemma5_radius(double L, double D, double nu, double beta, int t) {
  double sum = 0.0;
  for (int j = 0; j <= t; ++j) {
    sum += std::pow(nu, j) * std::pow(beta, t - j);
  }
  return L * D * sum;
}

// Unquantized-GD rate at step size alpha: nu = (1 - (2/(L+mu)) * L * mu * alpha)^{1/2}.
inline double gd_rate(double L, double mu, double alpha) {
  const double alpha_star = 2.0 / (L + mu);
  return std::sqrt(std::max(0.0, 1.0 - alpha_star * L * mu * alpha));
}

// Worst-case normalized coder error at the per-coordinate budget actually
// used, b = floor(n*R/N). Democratic: 2^{1-b} K_u. Near-democratic:
// 2^{2-b} sqrt(ln 2N) (times sqrt(lambda) unless randomized Hadamard).
inline double coder_beta(const Frame& frame, double rate, EmbeddingMode mode,
                         const KashinParams* params = nullptr) {
  const int b = dsc_bits_per_coord(frame.n(), rate, frame.N());
  if (b < 1) throw BudgetTooSmall("coder_beta: floor(n*R/N) < 1");
  if (mode == EmbeddingMode::Democratic) {
    if (params == nullptr) throw MissingParams("coder_beta: need KashinParams");
    return std::pow(2.0, 1.0 - b) * params->k_upper;
  }
  double logf = std::log(2.0 * frame.N());
  if (frame.kind() != FrameKind::RandomizedHadamard) logf *= frame.aspect_ratio();
  return std::pow(2.0, 2.0 - b) * std::sqrt(logf);
}

// ---------------------------------------------------------------------------
// Algorithms.
// ---------------------------------------------------------------------------

struct DgdOptions {
  GainEncoding gain = GainEncoding::exact32();
  DemocraticMethod method = DemocraticMethod::Lp;
  const KashinParams* params = nullptr;
  int iterative_iters = 50;
  Rng* rng = nullptr;            // dithered gain only
  bool record_trajectory = false;
};

// Error-feedback quantized gradient descent. Worker state e_t; per iteration
//   z_t = x_hat_t + alpha * e_{t-1}
//   u_t = grad f(z_t) - e_{t-1}
//   v_t = E(u_t);  e_t = D(v_t) - u_t
//   x_hat_{t+1} = x_hat_t - alpha * D(v_t)
inline RunReport dgd_def(const QuadraticObjective& obj, const Frame& frame,
                         double rate, EmbeddingMode mode, double alpha, int T,
                         const DgdOptions& opts = {}) {
  if (obj.mu <= 0.0) throw InvalidSpec("dgd_def: objective must be strongly convex");
  if (!(alpha > 0.0) || alpha > 2.0 / (obj.L + obj.mu) + 1e-12) {
    throw InvalidStepSize("dgd_def: need 0 < alpha <= 2/(L+mu)");
  }
  if (obj.dim() != frame.n()) {
    throw DimensionMismatch("dgd_def: frame dimension != objective dimension");
  }
  const long budget = static_cast<long>(std::floor(frame.n() * rate)) +
                      opts.gain.bit_cost();

  DscOptions coder;
  coder.gain = opts.gain;
  coder.method = opts.method;
  coder.params = opts.params;
  coder.iterative_iters = opts.iterative_iters;
  coder.rng = opts.rng;

  RunReport report;
  Vector x_hat = Vector::Zero(obj.dim());
  Vector e = Vector::Zero(obj.dim());
  report.distance.push_back((x_hat - obj.xstar).norm());
  report.objective.push_back(obj.value(x_hat));
  if (opts.record_trajectory) report.iterates.push_back(x_hat);

  bool diverged = false;
  for (int t = 0; t < T; ++t) {
    const Vector z = x_hat + alpha * e;
    const Vector u = obj.gradient(z) - e;
    // Divergence guard: the coder has no defined behavior on non-finite
    // input, and a diverging run's rate is clipped at 1 anyway.
    if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 1e120) {
      diverged = true;
      break;
    }
    const QuantizedPayload payload = dsc_encode(frame, u, rate, mode, coder);
    const long bits = payload.total_bits();
    if (bits > budget) {
      throw BudgetExceeded("dgd_def: payload exceeds the per-iteration budget");
    }
    const Vector decoded =
        dsc_decode(frame, payload, opts.gain.is_exact() ? 0.0 : opts.gain.bmax);
    e = decoded - u;
    x_hat -= alpha * decoded;

    report.bits.push_back(bits);
    report.total_bits += bits;
    report.distance.push_back((x_hat - obj.xstar).norm());
    report.objective.push_back(obj.value(x_hat));
    if (opts.record_trajectory) {
      report.iterates.push_back(x_hat);
      report.access_points.push_back(z);
    }
  }
  report.final_iterate = x_hat;
  report.empirical_rate = diverged
                              ? 1.0
                              : empirical_rate(report.distance.front(),
                                               report.distance.back(), T);
  return report;
}

inline RunReport unquantized_gd(const QuadraticObjective& obj, double alpha,
                                int T, bool record_trajectory = false) {
  if (!(alpha > 0.0) || alpha > 2.0 / (obj.L + obj.mu) + 1e-12) {
    throw InvalidStepSize("unquantized_gd: need 0 < alpha <= 2/(L+mu)");
  }
  RunReport report;
  Vector x = Vector::Zero(obj.dim());
  report.distance.push_back((x - obj.xstar).norm());
  report.objective.push_back(obj.value(x));
  if (record_trajectory) report.iterates.push_back(x);
  for (int t = 0; t < T; ++t) {
    x -= alpha * obj.gradient(x);
    report.distance.push_back((x - obj.xstar).norm());
    report.objective.push_back(obj.value(x));
    if (record_trajectory) report.iterates.push_back(x);
  }
  report.final_iterate = x;
  report.empirical_rate = empirical_rate(report.distance.front(),
                                         report.distance.back(), T);
  return report;
}

// Scalar-quantizer baseline: quantized gradient descent with a uniform grid
// over a pre-agreed dynamic-range schedule instead of a per-step transmitted
// gain. Each iteration the worker quantizes the gradient innovation
// g_t - q_{t-1} on a 2^b-level grid of radius r_t; both sides then shrink the
// radius by rho = max{(L-mu)/(L+mu), sqrt(n) * 2^-b}, the contraction the
// grid can certify. When sqrt(n) * 2^-b > 1 the schedule expands, the grid
// resolution decays, and the run fails to converge (rate clipped at 1) --
// this is the dynamic-range blow-up the frame-based coders avoid. Only the
// initial radius is sent (32 bits); every later iteration costs n*b bits.
inline RunReport scalar_dqgd_baseline(const QuadraticObjective& obj, double rate,
                                      double alpha, int T) {
  if (obj.mu <= 0.0) {
    throw InvalidSpec("scalar_dqgd_baseline: objective must be strongly convex");
  }
  if (!(alpha > 0.0) || alpha > 2.0 / (obj.L + obj.mu) + 1e-12) {
    throw InvalidStepSize("scalar_dqgd_baseline: need 0 < alpha <= 2/(L+mu)");
  }
  const int n = obj.dim();
  const int b = static_cast<int>(std::floor(rate));
  if (b < 1) throw BudgetTooSmall("scalar_dqgd_baseline: need at least 1 bit");
  const int bits_cap = std::min(b, 62);
  const long levels = 1L << bits_cap;
  const double sigma = (obj.L - obj.mu) / (obj.L + obj.mu);
  const double rho = std::max(sigma, std::sqrt(static_cast<double>(n)) *
                                         std::pow(2.0, -b));

  RunReport report;
  Vector x = Vector::Zero(n);
  Vector q = Vector::Zero(n);  // decoded gradient estimate, shared state
  double radius = obj.gradient(x).cwiseAbs().maxCoeff();
  report.distance.push_back((x - obj.xstar).norm());
  report.objective.push_back(obj.value(x));

  bool diverged = false;
  for (int t = 0; t < T; ++t) {
    const Vector g = obj.gradient(x);
    if (!g.allFinite() || g.cwiseAbs().maxCoeff() > 1e120 ||
        !std::isfinite(radius)) {
      diverged = true;
      break;
    }
    const double delta = 2.0 * radius / static_cast<double>(levels);
    for (int i = 0; i < n; ++i) {
      const double u = std::clamp(g[i] - q[i], -radius, radius);
      long idx = (delta > 0.0)
                     ? static_cast<long>(std::floor((u + radius) / delta))
                     : 0L;
      idx = std::clamp(idx, 0L, levels - 1);
      q[i] += -radius + (2.0 * static_cast<double>(idx) + 1.0) * delta / 2.0;
    }
    x -= alpha * q;
    radius *= rho;

    const long bits = static_cast<long>(n) * b + (t == 0 ? 32 : 0);
    report.bits.push_back(bits);
    report.total_bits += bits;
    report.distance.push_back((x - obj.xstar).norm());
    report.objective.push_back(obj.value(x));
  }
  report.final_iterate = x;
  report.empirical_rate = diverged
                              ? 1.0
                              : empirical_rate(report.distance.front(),
                                               report.distance.back(), T);
  return report;
}

struct DqPsgdOptions {
  std::optional<double> step;        // default D / (B * K_u * sqrt(T))
  int gain_bits = 32;
  DemocraticMethod method = DemocraticMethod::Iterative;
  int iterative_iters = 50;
  int batch = 0;                     // 0 = exact full subgradient
  std::optional<double> fstar;       // enables the gap trace
  bool record_trajectory = false;
};

// Projected subgradient descent with the unbiased gain-shape coder. The
// objective needs dim(), value(x), subgradient(x), stochastic_subgradient(
// x, batch, rng) and a subgradient bound B.
template <class Objective>
RunReport dq_psgd(const Objective& obj, const Frame& frame,
                  double rate, int T, const Domain& domain,
                  const KashinParams& params, Rng& rng,
                  const DqPsgdOptions& opts = {}) {
  if (obj.dim() != frame.n()) {
    throw DimensionMismatch("dq_psgd: frame dimension != objective dimension");
  }
  if (T < 1) throw InvalidSpec("dq_psgd: T must be >= 1");
  const double D = domain.diameter();
  const double bmax = obj.B;
  // A zero subgradient bound means every oracle output is 0; the step size
  // is irrelevant then and is pinned to 0 to avoid 0 * inf.
  const double denom = obj.B * params.k_upper * std::sqrt(static_cast<double>(T));
  const double eta = opts.step.value_or(denom > 0.0 ? D / denom : 0.0);
  if (!(eta > 0.0) && obj.B > 0.0) {
    throw InvalidStepSize("dq_psgd: step must be positive");
  }
  const long budget = static_cast<long>(std::floor(frame.n() * rate)) +
                      opts.gain_bits;

  GainShapeOptions coder;
  coder.gain_bits = opts.gain_bits;
  coder.method = opts.method;
  coder.iterative_iters = opts.iterative_iters;

  RunReport report;
  Vector x = project(domain, Vector::Zero(obj.dim()));
  Vector avg = Vector::Zero(obj.dim());
  report.distance.push_back(x.norm());
  report.objective.push_back(obj.value(x));
  if (opts.record_trajectory) report.iterates.push_back(x);

  for (int t = 0; t < T; ++t) {
    const Vector g = (opts.batch > 0)
                         ? obj.stochastic_subgradient(x, opts.batch, rng)
                         : obj.subgradient(x);
    long bits = opts.gain_bits;
    Vector q;
    if (g.norm() == 0.0) {
      // A zero subgradient needs no shape payload; the gain index alone
      // decodes to 0 exactly.
      q = Vector::Zero(obj.dim());
    } else {
      const QuantizedPayload payload =
          gain_shape_quantize(frame, g, rate, bmax, params, rng, coder);
      bits = payload.total_bits();
      if (bits > budget) {
        throw BudgetExceeded("dq_psgd: payload exceeds the per-iteration budget");
      }
      q = gain_shape_decode(frame, payload, bmax, params);
    }
    avg += x;
    x = project(domain, x - eta * q);

    report.bits.push_back(bits);
    report.total_bits += bits;
    report.distance.push_back(x.norm());
    report.objective.push_back(obj.value(x));
    if (opts.record_trajectory) report.iterates.push_back(x);
    if (opts.fstar) {
      report.gap_trace.push_back(obj.value(avg / (t + 1)) - *opts.fstar);
    }
  }
  report.final_iterate = x;
  report.averaged_iterate = avg / T;
  if (opts.fstar) {
    report.gap = obj.value(report.averaged_iterate) - *opts.fstar;
  }
  return report;
}

// Long-horizon averaged projected subgradient reference for f*.
inline double hinge_reference_fstar(const HingeObjective& obj,
                                    const Domain& domain, long T) {
  const double D = domain.diameter();
  Vector x = project(domain, Vector::Zero(obj.dim()));
  Vector avg = Vector::Zero(obj.dim());
  double best = obj.value(x);
  for (long t = 1; t <= T; ++t) {
    const double eta = D / (obj.B * std::sqrt(static_cast<double>(t)));
    avg += x;
    x = project(domain, x - eta * obj.subgradient(x));
    if ((t & (t - 1)) == 0 || t == T) {
      best = std::min(best, obj.value(avg / static_cast<double>(t)));
    }
  }
  return best;
}

}  // namespace demoq
