#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "demoq/embedding.hpp"
#include "demoq/errors.hpp"
#include "demoq/frame.hpp"
#include "demoq/quantizer.hpp"
#include "demoq/rng.hpp"

namespace demoq {

enum class CompressorType : std::uint8_t {
  RandomSparsify = 0,
  TopK = 1,
  Sign = 2,
  StandardDither = 3,
};

struct CompressorSpec {
  CompressorType type = CompressorType::Sign;
  int k = 1;              // sparsifiers
  bool rescale = true;    // RandomSparsify only: multiply kept values by m/k
  double scale = 1.0;     // Sign
  int levels = 1;         // StandardDither: s >= 1
  int value_bits = 32;    // sparsifiers: bits per transmitted value

  static CompressorSpec random_sparsify(int k, bool rescale = true,
                                        int value_bits = 32) {
    CompressorSpec s;
    s.type = CompressorType::RandomSparsify;
    s.k = k;
    s.rescale = rescale;
    s.value_bits = value_bits;
    return s;
  }
  static CompressorSpec top_k(int k, int value_bits = 32) {
    CompressorSpec s;
    s.type = CompressorType::TopK;
    s.k = k;
    s.value_bits = value_bits;
    return s;
  }
  static CompressorSpec sign(double scale = 1.0) {
    CompressorSpec s;
    s.type = CompressorType::Sign;
    s.scale = scale;
    return s;
  }
  static CompressorSpec standard_dither(int levels) {
    CompressorSpec s;
    s.type = CompressorType::StandardDither;
    s.levels = levels;
    return s;
  }

  void validate(int m) const {
    switch (type) {
      case CompressorType::RandomSparsify:
      case CompressorType::TopK:
        if (k < 1 || k > m) throw InvalidSpec("sparsifier needs 1 <= k <= m");
        if (value_bits < 1 || value_bits > 32) {
          throw InvalidSpec("sparsifier needs 1 <= value_bits <= 32");
        }
        break;
      case CompressorType::Sign:
        if (!(scale > 0.0)) throw InvalidSpec("sign compressor needs scale > 0");
        break;
      case CompressorType::StandardDither:
        if (levels < 1) throw InvalidSpec("standard dither needs s >= 1");
        break;
    }
  }

  bool unbiased() const {
    return (type == CompressorType::RandomSparsify && rescale) ||
           type == CompressorType::StandardDither;
  }

  // Prop-5 hypothesis: sign preserved and |C(x)_j| <= ||x||_inf per
  // coordinate. Rescaled sparsification inflates magnitudes and falls
  // outside it.
  bool max_magnitude_preserving() const {
    switch (type) {
      case CompressorType::RandomSparsify: return !rescale;
      case CompressorType::TopK: return true;
      case CompressorType::Sign: return false;
      case CompressorType::StandardDither: return false;
    }
    return false;
  }
};

struct CompressReport {
  Vector value;
  long bits = 0;
};

namespace detail {

inline long index_set_bits(int m, int k) {
  // ceil(log2 C(m,k)) via lgamma; the tiny slack guards against a ceil
  // flipping on round-off when C(m,k) is an exact power of two.
  const double log2c = (std::lgamma(m + 1.0) - std::lgamma(k + 1.0) -
                        std::lgamma(m - k + 1.0)) /
                       std::log(2.0);
  return static_cast<long>(std::ceil(log2c - 1e-9));
}

// Kept values on the wire: 32-bit floats, or a value_bits-wide uniform grid
// normalized by the kept l_inf (transmitted as one extra 32-bit gain). The
// quantized path builds the fractional-rate pipelines (e.g. keep m/2, 1 bit
// each ~ R = 0.5).
inline long sparsifier_bits(int m, int k, int value_bits) {
  long bits = static_cast<long>(k) * value_bits + index_set_bits(m, k);
  if (value_bits < 32) bits += 32;
  return bits;
}

inline void quantize_kept_values(Vector& x, const std::vector<int>& kept,
                                 int value_bits) {
  if (value_bits >= 32) return;
  double g = 0.0;
  for (int j : kept) g = std::max(g, std::abs(x[j]));
  if (g == 0.0) return;
  const ScalarQuantizerSpec spec(value_bits);
  for (int j : kept) x[j] = g * spec.grid_value(spec.index_of(x[j] / g));
}

}  // namespace detail

inline CompressReport compress(const CompressorSpec& spec, const Vector& x,
                               Rng& rng) {
  const int m = static_cast<int>(x.size());
  spec.validate(m);
  CompressReport out;
  switch (spec.type) {
    case CompressorType::RandomSparsify: {
      std::vector<int> pool(m);
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < spec.k; ++i) {
        const int j = i + static_cast<int>(rng.uniform_below(m - i));
        std::swap(pool[i], pool[j]);
      }
      std::vector<int> kept(pool.begin(), pool.begin() + spec.k);
      out.value = Vector::Zero(m);
      const double factor = spec.rescale ? static_cast<double>(m) / spec.k : 1.0;
      for (int j : kept) out.value[j] = factor * x[j];
      detail::quantize_kept_values(out.value, kept, spec.value_bits);
      out.bits = detail::sparsifier_bits(m, spec.k, spec.value_bits);
      break;
    }
    case CompressorType::TopK: {
      std::vector<int> order(m);
      std::iota(order.begin(), order.end(), 0);
      // Lower index wins magnitude ties.
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(x[a]) > std::abs(x[b]);
      });
      std::vector<int> kept(order.begin(), order.begin() + spec.k);
      out.value = Vector::Zero(m);
      for (int j : kept) out.value[j] = x[j];
      detail::quantize_kept_values(out.value, kept, spec.value_bits);
      out.bits = detail::sparsifier_bits(m, spec.k, spec.value_bits);
      break;
    }
    case CompressorType::Sign: {
      out.value.resize(m);
      for (int j = 0; j < m; ++j) {
        out.value[j] = (x[j] < 0.0) ? -spec.scale : spec.scale;
      }
      out.bits = m;
      break;
    }
    case CompressorType::StandardDither: {
      // QSGD: per coordinate, |x_j|/||x||_2 dithered onto {0, 1/s, ..., 1}.
      // Wire: 32-bit gain + per-coordinate sign and level,
      // ceil(log2(s+1)) + 1 bits each.
      const double norm = x.norm();
      out.value = Vector::Zero(m);
      if (norm > 0.0) {
        const int s = spec.levels;
        for (int j = 0; j < m; ++j) {
          const double a = std::abs(x[j]) / norm * s;
          auto lvl = static_cast<long>(std::floor(a));
          if (lvl < s && rng.uniform() >= (lvl + 1 - a)) ++lvl;
          const double sign = (x[j] < 0.0) ? -1.0 : 1.0;
          out.value[j] = sign * norm * static_cast<double>(lvl) / s;
        }
      }
      const long per_coord =
          static_cast<long>(std::ceil(std::log2(spec.levels + 1.0))) + 1;
      out.bits = 32 + static_cast<long>(m) * per_coord;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Democratic wrapper: E(y) = C(x) for the (near-)democratic embedding x of y,
// D = S. For sign- and max-magnitude-preserving C the wrapped error obeys
// E||Sy' - y||^2 <= gamma^2 ||y||^2 with gamma = K_u (democratic) or
// 2*sqrt(ln 2N) (near-democratic).
// ---------------------------------------------------------------------------

struct WrapOptions {
  DemocraticMethod method = DemocraticMethod::Lp;
  const KashinParams* params = nullptr;  // required for method == Iterative
  int iterative_iters = 50;
};

inline CompressReport democratic_wrap(const Frame& frame,
                                      const CompressorSpec& spec,
                                      const Vector& y, EmbeddingMode mode,
                                      Rng& rng, const WrapOptions& opts = {}) {
  Embedding emb;
  if (mode == EmbeddingMode::Democratic) {
    if (opts.method == DemocraticMethod::Iterative) {
      if (opts.params == nullptr) {
        throw MissingParams("democratic_wrap: iterative embedding needs KashinParams");
      }
      emb = democratic_iterative(frame, y, *opts.params, opts.iterative_iters);
    } else {
      emb = democratic_lp(frame, y);
    }
  } else {
    emb = near_democratic(frame, y);
  }
  CompressReport inner = compress(spec, emb.coefficients, rng);
  CompressReport out;
  out.value = frame.apply(inner.value);
  out.bits = inner.bits;
  return out;
}

// Second-moment factor gamma of the wrapped compressor.
inline double wrap_gamma(const Frame& frame, EmbeddingMode mode,
                         const KashinParams* params = nullptr) {
  if (mode == EmbeddingMode::Democratic) {
    if (params == nullptr) throw MissingParams("wrap_gamma: need KashinParams");
    return params->k_upper;
  }
  return 2.0 * std::sqrt(std::log(2.0 * frame.N()));
}

}  // namespace demoq
