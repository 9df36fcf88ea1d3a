#include <catch2/catch_amalgamated.hpp>

#include "demoq/demoq.hpp"

using namespace demoq;

namespace {

QuadraticObjective random_quadratic(int n, std::uint64_t seed, double reg = 0.0) {
  Rng rng(seed);
  Matrix A(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) A(i, j) = rng.normal() / std::sqrt(n);
  A += Matrix::Identity(n, n);  // keep the spectrum away from 0
  Vector b(n);
  for (int i = 0; i < n; ++i) b[i] = rng.normal();
  return QuadraticObjective::build(std::move(A), std::move(b), reg);
}

// f(x) = |x| on [-1, 1], exact subgradient oracle with B = 1.
struct AbsObjective {
  double B = 1.0;
  int dim() const { return 1; }
  double value(const Vector& x) const { return std::abs(x[0]); }
  Vector subgradient(const Vector& x) const {
    Vector g(1);
    g[0] = (x[0] > 0.0) ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0);
    return g;
  }
  Vector stochastic_subgradient(const Vector& x, int, Rng&) const {
    return subgradient(x);
  }
};

}  // namespace

TEST_CASE("quadratic objective constants") {
  const QuadraticObjective obj = random_quadratic(8, 3, 0.1);
  REQUIRE(obj.L >= obj.mu);
  REQUIRE(obj.mu > 0.0);
  REQUIRE(obj.gradient(obj.xstar).norm() <= 1e-8);
}

TEST_CASE("projections") {
  const Domain ball = Domain::ball(Vector::Zero(2), 1.0);
  Vector inside(2);
  inside << 0.3, 0.2;
  REQUIRE((project(ball, inside) - inside).norm() == 0.0);
  Vector outside(2);
  outside << 3, 4;
  const Vector p = project(ball, outside);
  REQUIRE(p[0] == Catch::Approx(0.6).epsilon(1e-12));
  REQUIRE(p[1] == Catch::Approx(0.8).epsilon(1e-12));
  // Idempotent and non-expansive.
  REQUIRE((project(ball, p) - p).norm() <= 1e-15);
  REQUIRE((project(ball, outside) - project(ball, inside)).norm() <=
          (outside - inside).norm());

  Vector lo = Vector::Zero(3), hi = Vector::Ones(3);
  const Domain box = Domain::box(lo, hi);
  Vector q(3);
  q << -1, 0.5, 2;
  const Vector pq = project(box, q);
  REQUIRE(pq[0] == 0.0);
  REQUIRE(pq[1] == 0.5);
  REQUIRE(pq[2] == 1.0);

  REQUIRE_THROWS_AS(Domain::ball(Vector::Zero(2), -1.0), InvalidDomain);
  REQUIRE_THROWS_AS(Domain::box(hi, lo), InvalidDomain);
}

TEST_CASE("bound formulas") {
  REQUIRE(thm1_lower(0.5, 1.0) == 0.5);
  REQUIRE(thm1_lower(0.5, 3.0) == 0.5);
  REQUIRE(thm1_lower(0.1, 1.0) == 0.5);  // 2^-1 dominates
  REQUIRE_THROWS_AS(thm1_lower(1.5, 1.0), OutOfRange);

  REQUIRE(prop4_bound(2.0, 1.0, 1.0, 100) == Catch::Approx(0.2).epsilon(1e-12));

  // beta = 0 collapses to the unquantized envelope nu^T * D.
  REQUIRE(prop2_bound(0.9, 0.0, 0.1, 2.0, 10, 3.0) ==
          Catch::Approx(std::pow(0.9, 10) * 3.0).epsilon(1e-12));
  // Equal-rate branch.
  REQUIRE(prop2_bound(0.5, 0.5, 0.1, 2.0, 4, 1.0) ==
          Catch::Approx(std::pow(0.5, 4) * (1.0 + 0.1 * 2.0 * 4)).epsilon(1e-12));
  // Distinct-rate branch.
  const double expect = std::pow(0.8, 5) * (1.0 + 0.6 * 0.1 * 2.0 / 0.2) * 2.0;
  REQUIRE(prop2_bound(0.8, 0.6, 0.1, 2.0, 5, 2.0) ==
          Catch::Approx(expect).epsilon(1e-12));

  // Lemma 5 radius at t=0 is L*D.
  REQUIRE(lemma5_radius(2.0, 3.0, 0.9, 0.5, 0) == Catch::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("unquantized GD") {
  SECTION("isotropic quadratic converges in one step") {
    Matrix A = 2.0 * Matrix::Identity(4, 4);
    Vector b(4);
    b << 1, -1, 2, 0.5;
    const QuadraticObjective obj = QuadraticObjective::build(A, b, 0.0);
    REQUIRE(obj.L == Catch::Approx(obj.mu));
    const RunReport r = unquantized_gd(obj, 1.0 / obj.L, 1);
    REQUIRE(r.distance.back() <= 1e-12);
  }

  SECTION("rate matches the nu formula") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
      const QuadraticObjective obj = random_quadratic(12, seed);
      const double alpha = 2.0 / (obj.L + obj.mu);
      const RunReport r = unquantized_gd(obj, alpha, 80);
      REQUIRE(r.empirical_rate <= gd_rate(obj.L, obj.mu, alpha) + 0.02);
    }
  }

  SECTION("x* is a fixed point") {
    Matrix A = Matrix::Identity(3, 3);
    const QuadraticObjective obj =
        QuadraticObjective::build(A, Vector::Zero(3), 0.0);  // x* = 0 = x_0
    const RunReport r = unquantized_gd(obj, 1.0 / obj.L, 10);
    REQUIRE(r.distance.back() == 0.0);
  }

  SECTION("step size validation") {
    const QuadraticObjective obj = random_quadratic(4, 9);
    REQUIRE_THROWS_AS(unquantized_gd(obj, 0.0, 5), InvalidStepSize);
    REQUIRE_THROWS_AS(unquantized_gd(obj, 3.0 / obj.L, 5), InvalidStepSize);
  }
}

TEST_CASE("error-feedback loop degenerates to GD at high rate") {
  const QuadraticObjective obj = random_quadratic(16, 21);
  const double alpha = 2.0 / (obj.L + obj.mu);
  const Frame id = Frame::build(FrameKind::Identity, 16, 16, 0);
  const RunReport quantized =
      dgd_def(obj, id, 24.0, EmbeddingMode::NearDemocratic, alpha, 50);
  const RunReport exact = unquantized_gd(obj, alpha, 50);
  REQUIRE((quantized.final_iterate - exact.final_iterate).norm() <= 1e-5);
}

TEST_CASE("x* is a fixed point of the error-feedback loop") {
  Matrix A = Matrix::Identity(4, 4) * 1.5;
  const QuadraticObjective obj = QuadraticObjective::build(A, Vector::Zero(4), 0.0);
  const Frame id = Frame::build(FrameKind::Identity, 4, 4, 0);
  const RunReport r = dgd_def(obj, id, 4.0, EmbeddingMode::NearDemocratic,
                              1.0 / obj.L, 20);
  REQUIRE(r.distance.back() == 0.0);
}

TEST_CASE("error-feedback recursion invariant") {
  // x_hat_t = x_t - alpha*e_{t-1}, where x_{t+1} = x_t - alpha*grad f(z_t)
  // replays the unquantized recursion at the recorded access points.
  const QuadraticObjective obj = random_quadratic(16, 31);
  const double alpha = 2.0 / (obj.L + obj.mu);
  const Frame frame = Frame::build(FrameKind::RandomOrthonormal, 16, 16, 8);
  DgdOptions opts;
  opts.record_trajectory = true;
  const RunReport r =
      dgd_def(obj, frame, 4.0, EmbeddingMode::NearDemocratic, alpha, 40, opts);

  Vector x_t = Vector::Zero(16);
  for (std::size_t t = 0; t + 1 < r.iterates.size(); ++t) {
    const Vector& z_t = r.access_points[t];
    // e_{t-1} recovered from z_t = x_hat_t + alpha*e_{t-1}.
    const Vector e_prev = (z_t - r.iterates[t]) / alpha;
    REQUIRE((r.iterates[t] - (x_t - alpha * e_prev)).cwiseAbs().maxCoeff() <= 1e-8);
    REQUIRE((z_t - x_t).cwiseAbs().maxCoeff() <= 1e-8);
    x_t -= alpha * obj.gradient(z_t);
  }
}

TEST_CASE("coder input stays inside the Lemma 5 radius") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const QuadraticObjective obj = random_quadratic(16, seed);
    const double alpha = 2.0 / (obj.L + obj.mu);
    const Frame frame = Frame::build(FrameKind::RandomOrthonormal, 16, 16, seed);
    DgdOptions opts;
    opts.record_trajectory = true;
    const int T = 30;
    const RunReport r =
        dgd_def(obj, frame, 4.0, EmbeddingMode::NearDemocratic, alpha, T, opts);
    const double nu = gd_rate(obj.L, obj.mu, alpha);
    const double beta = coder_beta(frame, 4.0, EmbeddingMode::NearDemocratic);
    const double D = r.distance.front();
    for (int t = 0; t < T; ++t) {
      const Vector& z_t = r.access_points[static_cast<std::size_t>(t)];
      const Vector e_prev = (z_t - r.iterates[static_cast<std::size_t>(t)]) / alpha;
      const Vector u_t = obj.gradient(z_t) - e_prev;
      REQUIRE(u_t.norm() <= lemma5_radius(obj.L, D, nu, beta, t) + 1e-9);
    }
  }
}

TEST_CASE("scalar baseline: bit ledger, high-rate agreement, range blow-up") {
  const QuadraticObjective obj = random_quadratic(8, 77);
  const double alpha = 2.0 / (obj.L + obj.mu);

  // Ledger: 32 bits of initial radius, then n*b bits every iteration.
  const RunReport a = scalar_dqgd_baseline(obj, 3.0, alpha, 25);
  REQUIRE(a.bits.size() == 25);
  REQUIRE(a.bits.front() == 8 * 3 + 32);
  for (std::size_t t = 1; t < a.bits.size(); ++t) REQUIRE(a.bits[t] == 8 * 3);

  // At a high rate the grid is fine enough that the run tracks plain GD.
  const RunReport fine = scalar_dqgd_baseline(obj, 16.0, alpha, 25);
  const RunReport gd = unquantized_gd(obj, alpha, 25);
  REQUIRE(std::abs(fine.empirical_rate - gd.empirical_rate) <= 0.02);

  // With b bits the range schedule contracts by max{sigma, sqrt(n)*2^-b};
  // when that factor exceeds 1 the grid resolution degrades every step and
  // the run is clipped at rate 1. sqrt(8)*2^-1 = sqrt(2) > 1.
  const RunReport coarse = scalar_dqgd_baseline(obj, 1.0, alpha, 60);
  REQUIRE(coarse.empirical_rate == 1.0);

  REQUIRE_THROWS_AS(scalar_dqgd_baseline(obj, 0.5, alpha, 5), BudgetTooSmall);
}

TEST_CASE("per-iteration bit ledger respects the budget") {
  const QuadraticObjective obj = random_quadratic(16, 5);
  const double alpha = 2.0 / (obj.L + obj.mu);
  const Frame frame = Frame::build(FrameKind::RandomOrthonormal, 16, 16, 3);
  const double R = 4.0;
  const RunReport r = dgd_def(obj, frame, R, EmbeddingMode::NearDemocratic, alpha, 30);
  const long budget = static_cast<long>(std::floor(16 * R)) + 32;
  for (long bits : r.bits) REQUIRE(bits <= budget);
  REQUIRE(r.total_bits == 30 * (16 * 4 + 32));
}

TEST_CASE("hinge objective and its oracles") {
  const Dataset data = synthetic_dataset(40, 8, 7);
  const HingeObjective obj = HingeObjective::build(data.A, data.labels);
  REQUIRE(obj.B > 0.0);

  Rng rng(2);
  Vector x(8);
  for (int i = 0; i < 8; ++i) x[i] = rng.normal();

  // Full-batch mean of per-sample subgradients equals the full subgradient.
  Vector mean = Vector::Zero(8);
  for (int i = 0; i < 40; ++i) mean += obj.sample_subgradient(x, i);
  mean /= 40.0;
  REQUIRE((mean - obj.subgradient(x)).cwiseAbs().maxCoeff() == 0.0);

  // Every oracle output is bounded by B.
  for (int trial = 0; trial < 50; ++trial) {
    for (int i = 0; i < 8; ++i) x[i] = 3.0 * rng.normal();
    REQUIRE(obj.subgradient(x).norm() <= obj.B + 1e-12);
    REQUIRE(obj.stochastic_subgradient(x, 3, rng).norm() <= obj.B + 1e-12);
  }

  // Kink rule: zero margin contributes a zero subgradient.
  Matrix A(1, 2);
  A << 1.0, 0.0;
  Vector lab(1);
  lab << 1.0;
  const HingeObjective kink = HingeObjective::build(A, lab);
  Vector at_kink(2);
  at_kink << 1.0, 0.0;  // margin = 1 - 1 = 0
  REQUIRE(kink.subgradient(at_kink).norm() == 0.0);
}

TEST_CASE("projected subgradient descent with the gain-shape coder") {
  const Frame frame = Frame::build(FrameKind::RandomizedHadamard, 1, 2, 1);
  const KashinParams params = kashin_constants(0.6, 0.5, 1.0, 1.0);

  SECTION("zero oracle keeps the start point") {
    struct ZeroObjective {
      double B = 0.0;
      int dim() const { return 1; }
      double value(const Vector&) const { return 0.0; }
      Vector subgradient(const Vector&) const { return Vector::Zero(1); }
      Vector stochastic_subgradient(const Vector&, int, Rng&) const {
        return Vector::Zero(1);
      }
    } obj;
    Rng rng(3);
    const Domain domain = Domain::ball(Vector::Ones(1) * 0.5, 0.25);
    const RunReport r = dq_psgd(obj, frame, 4.0, 20, domain, params, rng);
    const Vector start = project(domain, Vector::Zero(1));
    REQUIRE((r.final_iterate - start).norm() == 0.0);
    REQUIRE((r.averaged_iterate - start).norm() == 0.0);
  }

  SECTION("1-D |x| toy meets the Prop. 4 gap bound") {
    AbsObjective obj;
    Rng rng(5);
    Vector lo(1), hi(1);
    lo << -1.0;
    hi << 1.0;
    const Domain domain = Domain::box(lo, hi);
    const int T = 400;
    DqPsgdOptions opts;
    opts.fstar = 0.0;
    const RunReport r = dq_psgd(obj, frame, 4.0, T, domain, params, rng, opts);
    REQUIRE(r.gap <= prop4_bound(params.k_upper, domain.diameter(), obj.B, T));
  }
}
