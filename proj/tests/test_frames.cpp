#include <catch2/catch_amalgamated.hpp>

#include "demoq/demoq.hpp"

using namespace demoq;

TEST_CASE("identity frame is the identity matrix") {
  const Frame f = Frame::build(FrameKind::Identity, 4, 4, 99);
  REQUIRE((f.to_dense() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  Vector x(4);
  x << 1, -2, 3, 0.5;
  REQUIRE((f.apply(x) - x).norm() == 0.0);
  REQUIRE((f.apply_adjoint(x) - x).norm() == 0.0);
}

TEST_CASE("4x4 randomized Hadamard with all-ones signs matches the hand matrix") {
  // Seed 11 draws the all-ones sign diagonal; with full sampling the rows
  // are 0..3, so S is the normalized 4x4 Hadamard matrix (Sylvester order).
  const Frame f = Frame::build(FrameKind::RandomizedHadamard, 4, 4, 11);
  for (double s : f.sign_diagonal()) REQUIRE(s == 1.0);
  const Matrix S = f.to_dense();
  Matrix H(4, 4);
  H << 1, 1, 1, 1,
       1, -1, 1, -1,
       1, 1, -1, -1,
       1, -1, -1, 1;
  H *= 0.5;
  REQUIRE((S - H).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((S.row(0) - 0.5 * Matrix::Ones(1, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("1x2 frame adjoint hand example") {
  // Seed 1 samples row 0 with sign +1: S = (1/sqrt(2), 1/sqrt(2)).
  const Frame f = Frame::build(FrameKind::RandomizedHadamard, 1, 2, 1);
  Vector y(1);
  y << 1.0;
  const Vector x = f.apply_adjoint(y);
  REQUIRE(x[0] == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  REQUIRE(x[1] == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("random orthonormal frames are Parseval") {
  const Frame f = Frame::build(FrameKind::RandomOrthonormal, 8, 16, 5);
  const Matrix S = f.to_dense();
  REQUIRE((S * S.transpose() - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() <=
          1e-9);
}

TEST_CASE("Parseval and roundtrip invariants over many draws") {
  Rng meta(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t seed = meta.next_u64();
    FrameKind kind;
    int n, N;
    switch (trial % 3) {
      case 0:
        kind = FrameKind::RandomOrthonormal;
        n = 4 + static_cast<int>(meta.uniform_below(12));
        N = n + static_cast<int>(meta.uniform_below(16));
        break;
      case 1:
        kind = FrameKind::RandomizedHadamard;
        N = 1 << (2 + static_cast<int>(meta.uniform_below(4)));
        n = 1 + static_cast<int>(meta.uniform_below(static_cast<std::uint64_t>(N)));
        break;
      default:
        kind = FrameKind::Identity;
        n = N = 1 + static_cast<int>(meta.uniform_below(16));
        break;
    }
    const Frame f = Frame::build(kind, n, N, seed);
    const Matrix S = f.to_dense();
    REQUIRE((S * S.transpose() - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() <=
            1e-9);
    Vector y(n);
    for (int i = 0; i < n; ++i) y[i] = meta.normal();
    const Vector back = f.apply(f.apply_adjoint(y));
    REQUIRE((back - y).norm() <= 1e-9 * y.norm());
    // Operator norm 1: the frame never expands.
    Vector x(N);
    for (int i = 0; i < N; ++i) x[i] = meta.normal();
    REQUIRE(f.apply(x).norm() <= (1.0 + 1e-9) * x.norm());
  }
}

TEST_CASE("fast Hadamard path matches dense multiplication") {
  const Frame f = Frame::build(FrameKind::RandomizedHadamard, 40, 64, 77);
  const Matrix S = f.to_dense();
  Rng rng(7);
  Vector x(64), y(40);
  for (int i = 0; i < 64; ++i) x[i] = rng.normal();
  for (int i = 0; i < 40; ++i) y[i] = rng.normal();
  REQUIRE((f.apply(x) - S * x).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE((f.apply_adjoint(y) - S.transpose() * y).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("frame construction is deterministic") {
  const Frame a = Frame::build(FrameKind::RandomOrthonormal, 6, 12, 42);
  const Frame b = Frame::build(FrameKind::RandomOrthonormal, 6, 12, 42);
  REQUIRE((a.to_dense() - b.to_dense()).cwiseAbs().maxCoeff() == 0.0);
  const Frame h1 = Frame::build(FrameKind::RandomizedHadamard, 5, 16, 42);
  const Frame h2 = Frame::build(FrameKind::RandomizedHadamard, 5, 16, 42);
  REQUIRE(h1.sampled_rows() == h2.sampled_rows());
  REQUIRE(h1.sign_diagonal() == h2.sign_diagonal());
}

TEST_CASE("frame dimension errors") {
  REQUIRE_THROWS_AS(Frame::build(FrameKind::RandomOrthonormal, 8, 4, 1),
                    InvalidDimensions);
  REQUIRE_THROWS_AS(Frame::build(FrameKind::RandomizedHadamard, 4, 12, 1),
                    InvalidDimensions);
  REQUIRE_THROWS_AS(Frame::build(FrameKind::Identity, 4, 8, 1),
                    InvalidDimensions);
  const Frame f = Frame::build(FrameKind::Identity, 4, 4, 1);
  REQUIRE_THROWS_AS(f.apply(Vector::Zero(5)), DimensionMismatch);
  REQUIRE_THROWS_AS(f.apply_adjoint(Vector::Zero(5)), DimensionMismatch);
}

TEST_CASE("Lemma 1 constants") {
  const KashinParams a = kashin_constants(0.5, 0.25, 1.0, 1.0);
  REQUIRE(a.k_lower == Catch::Approx(1.0));
  REQUIRE(a.k_upper == Catch::Approx(2.0));

  const KashinParams b = kashin_constants(0.9, 0.5, 1.0, 1.0);
  REQUIRE(b.k_upper == Catch::Approx(0.9 / (0.1 * std::sqrt(0.5))).epsilon(1e-12));
  REQUIRE(b.k_upper == Catch::Approx(12.7279).epsilon(1e-4));

  REQUIRE_THROWS_AS(kashin_constants(1.0, 0.5, 1.0, 1.0), InvalidUP);
  REQUIRE_THROWS_AS(kashin_constants(0.5, 1.5, 1.0, 1.0), InvalidUP);
  REQUIRE_THROWS_AS(kashin_constants(-0.1, 0.5, 1.0, 1.0), InvalidUP);
}

TEST_CASE("UP parameter estimation") {
  const Frame id = Frame::build(FrameKind::Identity, 8, 8, 3);
  REQUIRE(estimate_up_eta(id, 0.5, 10, 9) == Catch::Approx(1.0).epsilon(1e-12));

  const Frame f = Frame::build(FrameKind::RandomOrthonormal, 8, 16, 3);
  const double eta = estimate_up_eta(f, 0.25, 1000, 9);
  REQUIRE(eta > 0.0);
  REQUIRE(eta <= 1.0 + 1e-9);
  REQUIRE(estimate_up_eta(f, 0.25, 1000, 9) == eta);

  REQUIRE_THROWS_AS(estimate_up_eta(f, 0.01, 10, 9), InvalidDelta);
  REQUIRE_THROWS_AS(estimate_up_eta(f, 0.25, 0, 9), InvalidDelta);
}

TEST_CASE("default UP parameters satisfy the Lemma 1 hypothesis") {
  const Frame f = Frame::build(FrameKind::RandomizedHadamard, 16, 64, 21);
  const KashinParams p = default_kashin_params(f, 5);
  REQUIRE(p.eta < 1.0);
  REQUIRE(p.frame_lower > p.eta * std::sqrt(p.frame_upper));
  REQUIRE(p.k_upper > 0.0);
  REQUIRE(p.delta == Catch::Approx(1.0 / (2.0 * f.aspect_ratio())));
}

TEST_CASE("frame kind strings roundtrip") {
  for (FrameKind k : {FrameKind::RandomOrthonormal, FrameKind::RandomizedHadamard,
                      FrameKind::SubGaussian, FrameKind::Identity}) {
    REQUIRE(frame_kind_from_string(to_string(k)) == k);
  }
  REQUIRE_THROWS_AS(frame_kind_from_string("nope"), ConfigError);
}
