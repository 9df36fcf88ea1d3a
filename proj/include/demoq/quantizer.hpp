#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <vector>

#include "demoq/embedding.hpp"
#include "demoq/errors.hpp"
#include "demoq/frame.hpp"
#include "demoq/rng.hpp"

namespace demoq {

// ---------------------------------------------------------------------------
// Uniform scalar quantizer on B_inf(1): M = 2^b symmetric grid points
// v_i = -1 + (2i - 1) * delta / 2 with resolution delta = 2 / M.
// ---------------------------------------------------------------------------

struct ScalarQuantizerSpec {
  int bits = 1;
  int levels = 2;
  double resolution = 1.0;

  explicit ScalarQuantizerSpec(int b) {
    if (b < 1 || b > 31) throw InvalidSpec("scalar quantizer needs 1 <= bits <= 31");
    bits = b;
    levels = 1 << b;
    resolution = 2.0 / levels;
  }

  double grid_value(std::uint32_t index) const {
    return -1.0 + (2.0 * index + 1.0) * resolution / 2.0;
  }

  // Nearest grid point; exact halfway ties round toward the lower index.
  std::uint32_t index_of(double x) const {
    const double pos = (x + 1.0) / resolution;
    double idx = std::floor(pos);
    if (idx == pos && idx > 0.0) idx -= 1.0;  // tie: lower index wins
    if (idx < 0.0) idx = 0.0;
    if (idx > levels - 1) idx = levels - 1;
    return static_cast<std::uint32_t>(idx);
  }
};

inline std::vector<std::uint32_t> uniform_quantize(const Vector& x,
                                                   const ScalarQuantizerSpec& spec) {
  std::vector<std::uint32_t> indices(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (std::abs(x[j]) > 1.0 + 1e-12) {
      throw OutOfRange("uniform_quantize: |x_j| > 1");
    }
    indices[j] = spec.index_of(x[j]);
  }
  return indices;
}

// ---------------------------------------------------------------------------
// Dithered scalar paths: stochastic rounding on a uniform grid, unbiased.
// ---------------------------------------------------------------------------

// Grid of 2^bits points spanning [lo, hi]; the paper's m interior points plus
// the two endpoints, sized so an index fits in exactly `bits` bits.
struct DitherGrid {
  double lo;
  double hi;
  int bits;
  std::uint64_t points;
  double spacing;

  DitherGrid(double lo_, double hi_, int bits_) : lo(lo_), hi(hi_), bits(bits_) {
    if (bits < 1 || bits > 62) throw InvalidSpec("dither grid needs 1 <= bits <= 62");
    if (!(hi > lo)) throw InvalidSpec("dither grid needs hi > lo");
    points = 1ULL << bits;
    spacing = (hi - lo) / static_cast<double>(points - 1);
  }

  double value(std::uint64_t index) const { return lo + index * spacing; }

  // Stochastic rounding: for v in [g_j, g_{j+1}), emit j with probability
  // (g_{j+1} - v) / spacing, else j + 1. Exactly unbiased; grid points are
  // reproduced with probability 1.
  std::uint64_t encode(double v, Rng& rng) const {
    if (v < lo - 1e-12 * (hi - lo) || v > hi + 1e-12 * (hi - lo)) {
      throw OutOfRange("dithered quantizer: input outside dynamic range");
    }
    const double pos = (v - lo) / spacing;
    auto j = static_cast<std::uint64_t>(std::floor(pos));
    if (j >= points - 1) return points - 1;
    const double keep_low = (value(j + 1) - v) / spacing;
    return (rng.uniform() < keep_low) ? j : j + 1;
  }
};

// Uniformly dithered gain quantizer on [0, bmax] (gain values are norms).
inline std::uint64_t gain_quantize_dithered(double v, int bits, double bmax,
                                            Rng& rng) {
  if (v < 0.0) throw OutOfRange("gain_quantize_dithered: negative gain");
  return DitherGrid(0.0, bmax, bits).encode(v, rng);
}

inline double gain_dequantize_dithered(std::uint64_t index, int bits, double bmax) {
  const DitherGrid grid(0.0, bmax, bits);
  if (index >= grid.points) throw CorruptPayload("gain index out of range");
  return grid.value(index);
}

// Coordinate-wise uniformly dithered quantizer (CUQ) on [-level, +level].
inline std::vector<std::uint32_t> cuq_encode(const Vector& x, double level,
                                             int bits, Rng& rng) {
  const DitherGrid grid(-level, level, bits);
  std::vector<std::uint32_t> indices(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    indices[j] = static_cast<std::uint32_t>(grid.encode(x[j], rng));
  }
  return indices;
}

inline Vector cuq_decode(const std::vector<std::uint32_t>& indices, double level,
                         int bits) {
  const DitherGrid grid(-level, level, bits);
  Vector x(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= grid.points) throw CorruptPayload("CUQ index out of range");
    x[static_cast<Eigen::Index>(j)] = grid.value(indices[j]);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Bit-exact payloads.
// ---------------------------------------------------------------------------

enum class PayloadMode : std::uint8_t { Dsc = 0, Ndsc = 1, Dithered = 2 };

// gain bits = 0 means Exact32 (a 32-bit float, counted in the ledger).
struct GainEncoding {
  int bits = 0;
  double bmax = 0.0;  // dynamic range of the dithered gain; unused for Exact32

  static GainEncoding exact32() { return {}; }
  static GainEncoding dithered(int bits, double bmax) { return {bits, bmax}; }
  bool is_exact() const { return bits == 0; }
  int bit_cost() const { return is_exact() ? 32 : bits; }
};

struct QuantizedPayload {
  static constexpr std::uint8_t kVersion = 1;

  PayloadMode mode = PayloadMode::Dsc;
  std::uint32_t n = 0;
  std::uint32_t N = 0;
  std::uint8_t bits_per_coord = 0;
  std::uint8_t gain_bits = 0;          // 0 = Exact32
  FrameKind frame_kind = FrameKind::Identity;
  std::uint64_t frame_seed = 0;
  float gain_value = 0.0f;             // Exact32 gain
  std::uint64_t gain_index = 0;        // dithered gain
  std::vector<std::uint8_t> body;      // ceil(N*b/8) bytes, coordinate-major

  long total_bits() const {
    return static_cast<long>(N) * bits_per_coord + (gain_bits == 0 ? 32 : gain_bits);
  }

  static std::size_t body_bytes(std::uint32_t N, int b) {
    return (static_cast<std::size_t>(N) * b + 7) / 8;
  }

  void pack_indices(const std::vector<std::uint32_t>& indices) {
    body.assign(body_bytes(N, bits_per_coord), 0);
    std::size_t bit = 0;
    for (std::uint32_t v : indices) {
      for (int k = 0; k < bits_per_coord; ++k, ++bit) {
        if ((v >> k) & 1u) body[bit >> 3] |= static_cast<std::uint8_t>(1u << (bit & 7));
      }
    }
  }

  std::vector<std::uint32_t> unpack_indices() const {
    if (body.size() != body_bytes(N, bits_per_coord)) {
      throw CorruptPayload("payload body has wrong length");
    }
    std::vector<std::uint32_t> indices(N, 0);
    std::size_t bit = 0;
    for (std::uint32_t i = 0; i < N; ++i) {
      std::uint32_t v = 0;
      for (int k = 0; k < bits_per_coord; ++k, ++bit) {
        if ((body[bit >> 3] >> (bit & 7)) & 1u) v |= 1u << k;
      }
      indices[i] = v;
    }
    return indices;
  }

  // Wire format, all multi-byte integers little-endian:
  //   "DSC1" | version u8 | mode u8 | n u32 | N u32 | b u8 | gain_enc u8 |
  //   frame kind u8 | frame seed u64 | gain field | body
  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out;
    out.reserve(24 + body.size());
    const char magic[4] = {'D', 'S', 'C', '1'};
    out.insert(out.end(), magic, magic + 4);
    out.push_back(kVersion);
    out.push_back(static_cast<std::uint8_t>(mode));
    put_u32(out, n);
    put_u32(out, N);
    out.push_back(bits_per_coord);
    out.push_back(gain_bits);
    out.push_back(static_cast<std::uint8_t>(frame_kind));
    put_u64(out, frame_seed);
    if (gain_bits == 0) {
      std::uint32_t raw;
      static_assert(sizeof(raw) == sizeof(gain_value));
      std::memcpy(&raw, &gain_value, 4);
      put_u32(out, raw);
    } else {
      const int nbytes = (gain_bits + 7) / 8;
      for (int k = 0; k < nbytes; ++k) {
        out.push_back(static_cast<std::uint8_t>((gain_index >> (8 * k)) & 0xff));
      }
    }
    out.insert(out.end(), body.begin(), body.end());
    return out;
  }

  static QuantizedPayload deserialize(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    auto need = [&](std::size_t k) {
      if (pos + k > bytes.size()) throw CorruptPayload("payload truncated");
    };
    need(4);
    if (std::memcmp(bytes.data(), "DSC1", 4) != 0) {
      throw CorruptPayload("bad payload magic");
    }
    pos = 4;
    QuantizedPayload p;
    need(2);
    const std::uint8_t version = bytes[pos++];
    if (version != kVersion) throw CorruptPayload("unsupported payload version");
    const std::uint8_t mode = bytes[pos++];
    if (mode > 2) throw CorruptPayload("bad payload mode");
    p.mode = static_cast<PayloadMode>(mode);
    p.n = get_u32(bytes, pos, need);
    p.N = get_u32(bytes, pos, need);
    need(3);
    p.bits_per_coord = bytes[pos++];
    p.gain_bits = bytes[pos++];
    const std::uint8_t kind = bytes[pos++];
    if (kind > 3) throw CorruptPayload("bad frame kind");
    p.frame_kind = static_cast<FrameKind>(kind);
    p.frame_seed = get_u64(bytes, pos, need);
    if (p.gain_bits == 0) {
      const std::uint32_t raw = get_u32(bytes, pos, need);
      std::memcpy(&p.gain_value, &raw, 4);
    } else {
      const int nbytes = (p.gain_bits + 7) / 8;
      need(nbytes);
      p.gain_index = 0;
      for (int k = 0; k < nbytes; ++k) {
        p.gain_index |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * k);
      }
    }
    const std::size_t blen = body_bytes(p.N, p.bits_per_coord);
    need(blen);
    p.body.assign(bytes.begin() + pos, bytes.begin() + pos + blen);
    pos += blen;
    if (pos != bytes.size()) throw CorruptPayload("trailing bytes in payload");
    return p;
  }

 private:
  static void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
  }
  static void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
  }
  template <class Need>
  static std::uint32_t get_u32(const std::vector<std::uint8_t>& b, std::size_t& pos, Need need) {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[pos++]) << (8 * k);
    return v;
  }
  template <class Need>
  static std::uint64_t get_u64(const std::vector<std::uint8_t>& b, std::size_t& pos, Need need) {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[pos++]) << (8 * k);
    return v;
  }
};

// ---------------------------------------------------------------------------
// DSC / NDSC: l_inf-normalize the embedding, scalar-quantize with
// b = floor(n*R/N) bits per coordinate, encode the gain.
// ---------------------------------------------------------------------------

enum class DemocraticMethod { Lp, Iterative };

struct DscOptions {
  GainEncoding gain = GainEncoding::exact32();
  DemocraticMethod method = DemocraticMethod::Lp;
  const KashinParams* params = nullptr;  // required for method == Iterative
  int iterative_iters = 50;
  Rng* rng = nullptr;                    // required for dithered gain
};

inline int dsc_bits_per_coord(int n, double rate, int N) {
  return static_cast<int>(std::floor(n * rate / N));
}

inline QuantizedPayload dsc_encode(const Frame& frame, const Vector& y,
                                   double rate, EmbeddingMode mode,
                                   const DscOptions& opts = {}) {
  const int b = dsc_bits_per_coord(frame.n(), rate, frame.N());
  if (b < 1) {
    throw BudgetTooSmall("dsc_encode: floor(n*R/N) < 1 bit per embedding coordinate");
  }
  QuantizedPayload p;
  p.mode = (mode == EmbeddingMode::Democratic) ? PayloadMode::Dsc : PayloadMode::Ndsc;
  p.n = static_cast<std::uint32_t>(frame.n());
  p.N = static_cast<std::uint32_t>(frame.N());
  p.bits_per_coord = static_cast<std::uint8_t>(std::min(b, 255));
  p.gain_bits = static_cast<std::uint8_t>(opts.gain.bits);
  p.frame_kind = frame.kind();
  p.frame_seed = frame.seed();

  Embedding emb;
  if (mode == EmbeddingMode::Democratic) {
    if (opts.method == DemocraticMethod::Iterative) {
      if (opts.params == nullptr) {
        throw MissingParams("dsc_encode: iterative embedding needs KashinParams");
      }
      emb = democratic_iterative(frame, y, *opts.params, opts.iterative_iters);
    } else {
      emb = democratic_lp(frame, y);
    }
  } else {
    emb = near_democratic(frame, y);
  }

  const ScalarQuantizerSpec spec(p.bits_per_coord);
  std::vector<std::uint32_t> indices;
  if (emb.gain == 0.0) {
    indices.assign(p.N, 0);
  } else {
    Vector normalized = emb.coefficients / emb.gain;
    // x / ||x||_inf can exceed 1 by an ulp; the quantizer tolerates 1e-12.
    indices = uniform_quantize(normalized, spec);
  }
  p.pack_indices(indices);

  if (opts.gain.is_exact()) {
    p.gain_value = static_cast<float>(emb.gain);
  } else {
    if (opts.rng == nullptr) throw MissingParams("dsc_encode: dithered gain needs an rng");
    p.gain_index = gain_quantize_dithered(emb.gain, opts.gain.bits, opts.gain.bmax, *opts.rng);
  }
  return p;
}

inline Vector dsc_decode(const Frame& frame, const QuantizedPayload& payload,
                         double gain_bmax = 0.0) {
  if (payload.frame_kind != frame.kind() ||
      payload.n != static_cast<std::uint32_t>(frame.n()) ||
      payload.N != static_cast<std::uint32_t>(frame.N()) ||
      payload.frame_seed != frame.seed()) {
    throw HeaderMismatch("dsc_decode: payload header does not match frame");
  }
  double gain;
  if (payload.gain_bits == 0) {
    gain = payload.gain_value;
  } else {
    if (gain_bmax <= 0.0) throw MissingParams("dsc_decode: dithered gain needs bmax");
    gain = gain_dequantize_dithered(payload.gain_index, payload.gain_bits, gain_bmax);
  }
  const ScalarQuantizerSpec spec(payload.bits_per_coord);
  const auto indices = payload.unpack_indices();
  Vector values(payload.N);
  for (std::uint32_t j = 0; j < payload.N; ++j) {
    if (indices[j] >= static_cast<std::uint32_t>(spec.levels)) {
      throw CorruptPayload("dsc_decode: level index out of range");
    }
    values[j] = spec.grid_value(indices[j]);
  }
  return gain * frame.apply(values);
}

// ---------------------------------------------------------------------------
// Gain-shape quantizer: Q(y) = Q_G(||y||_2) * S Q_CUQ(x_d), with the
// democratic embedding x_d of y/||y||_2 dithered on [-L, +L], L ~ K_u/sqrt(N).
// Unbiased; worst-case second moment <= (bmax * K_u)^2.
// ---------------------------------------------------------------------------

// Headroom over K_u/sqrt(N) absorbing the iterative-embedding residual and
// projection cleanup; both encoder and decoder derive the same level.
inline double cuq_level(const KashinParams& params, int N) {
  return 1.01 * params.k_upper / std::sqrt(static_cast<double>(N));
}

struct GainShapeOptions {
  int gain_bits = 32;
  DemocraticMethod method = DemocraticMethod::Iterative;
  int iterative_iters = 50;
};

inline QuantizedPayload gain_shape_quantize(const Frame& frame, const Vector& y,
                                            double rate, double bmax,
                                            const KashinParams& params, Rng& rng,
                                            const GainShapeOptions& opts = {}) {
  const int b = dsc_bits_per_coord(frame.n(), rate, frame.N());
  if (b < 1) throw BudgetTooSmall("gain_shape_quantize: floor(n*R/N) < 1");
  const double gain = y.norm();
  if (gain > bmax) throw OutOfRange("gain_shape_quantize: ||y||_2 > bmax");

  QuantizedPayload p;
  p.mode = PayloadMode::Dithered;
  p.n = static_cast<std::uint32_t>(frame.n());
  p.N = static_cast<std::uint32_t>(frame.N());
  p.bits_per_coord = static_cast<std::uint8_t>(std::min(b, 255));
  p.gain_bits = static_cast<std::uint8_t>(opts.gain_bits);
  p.frame_kind = frame.kind();
  p.frame_seed = frame.seed();
  p.gain_index = gain_quantize_dithered(gain, opts.gain_bits, bmax, rng);

  if (gain == 0.0) {
    // Mid-grid indices decode to 0 only for odd grids; encode the zero shape
    // explicitly by dithering the zero vector (still unbiased).
    p.pack_indices(cuq_encode(Vector::Zero(frame.N()), cuq_level(params, frame.N()),
                              p.bits_per_coord, rng));
    return p;
  }

  const Vector shape = y / gain;
  Embedding emb = (opts.method == DemocraticMethod::Iterative)
                      ? democratic_iterative(frame, shape, params, opts.iterative_iters)
                      : democratic_lp(frame, shape);
  Vector x = emb.coefficients;
  if (frame.exact_parseval()) {
    // Make S x = shape hold to machine precision so the dither is exactly
    // centered on the shape.
    x += frame.apply_adjoint(shape - frame.apply(x));
  }
  const double level = cuq_level(params, frame.N());
  if (x.cwiseAbs().maxCoeff() > level) {
    throw OutOfRange("gain_shape_quantize: embedding exceeds the CUQ range; "
                     "KashinParams underestimate K_u for this frame");
  }
  p.pack_indices(cuq_encode(x, level, p.bits_per_coord, rng));
  return p;
}

inline Vector gain_shape_decode(const Frame& frame, const QuantizedPayload& payload,
                                double bmax, const KashinParams& params) {
  if (payload.mode != PayloadMode::Dithered) {
    throw HeaderMismatch("gain_shape_decode: payload is not gain-shape coded");
  }
  if (payload.frame_kind != frame.kind() ||
      payload.n != static_cast<std::uint32_t>(frame.n()) ||
      payload.N != static_cast<std::uint32_t>(frame.N()) ||
      payload.frame_seed != frame.seed()) {
    throw HeaderMismatch("gain_shape_decode: payload header does not match frame");
  }
  const double gain =
      gain_dequantize_dithered(payload.gain_index, payload.gain_bits, bmax);
  const Vector shape =
      frame.apply(cuq_decode(payload.unpack_indices(), cuq_level(params, frame.N()),
                             payload.bits_per_coord));
  return gain * shape;
}

// ---------------------------------------------------------------------------
// Closed-form error / efficiency figures.
// ---------------------------------------------------------------------------

// Normalized worst-case error beta of DSC / NDSC at rate R. For the
// near-democratic branch the log factor depends on the frame class:
// sqrt(log 2N) for randomized Hadamard, sqrt(lambda log 2N) for random
// orthonormal. Natural log throughout.
inline double prop1_bound(double rate, double lambda, EmbeddingMode mode,
                          double k_upper, int N,
                          FrameKind kind = FrameKind::RandomizedHadamard) {
  if (mode == EmbeddingMode::Democratic) {
    return std::pow(2.0, 1.0 - rate / lambda) * k_upper;
  }
  double logf = std::log(2.0 * static_cast<double>(N));
  if (kind != FrameKind::RandomizedHadamard) logf *= lambda;
  return std::pow(2.0, 2.0 - rate / lambda) * std::sqrt(logf);
}

struct CoveringReport {
  double rate = 0.0;
  double lambda = 1.0;
  std::optional<double> k_upper;
  std::optional<int> N;
  double rho = 0.0;
};

inline CoveringReport covering_efficiency(double rate, double lambda,
                                          EmbeddingMode mode, double k_upper,
                                          int N) {
  CoveringReport r;
  r.rate = rate;
  r.lambda = lambda;
  if (mode == EmbeddingMode::Democratic) {
    r.k_upper = k_upper;
    r.rho = std::pow(2.0, 1.0 + rate * (1.0 - 1.0 / lambda)) * k_upper;
  } else {
    r.N = N;
    r.rho = std::pow(2.0, 2.0 + rate * (1.0 - 1.0 / lambda)) *
            std::sqrt(std::log(2.0 * N));
  }
  return r;
}

// Reference value for the plain uniform scalar quantizer.
inline double scalar_covering_efficiency(int n) {
  return std::sqrt(static_cast<double>(n));
}

}  // namespace demoq
