#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoq/compressor.hpp"
#include "demoq/embedding.hpp"
#include "demoq/errors.hpp"
#include "demoq/frame.hpp"
#include "demoq/optim.hpp"
#include "demoq/quantizer.hpp"
#include "demoq/rng.hpp"

namespace demoq {

// ---------------------------------------------------------------------------
// Simulated worker->server channel with a hard per-iteration bit budget.
// ---------------------------------------------------------------------------

struct ChannelEntry {
  long iteration = 0;
  std::size_t payload_bytes = 0;
  long bits = 0;
};

class BitChannel {
 public:
  explicit BitChannel(long budget_per_iteration)
      : budget_(budget_per_iteration) {
    if (budget_ < 1) throw BudgetTooSmall("channel budget must be positive");
  }

  long budget() const { return budget_; }
  const std::vector<ChannelEntry>& ledger() const { return ledger_; }
  long total_bits() const {
    long total = 0;
    for (const auto& e : ledger_) total += e.bits;
    return total;
  }

  // Counts the payload against the budget; an over-budget payload aborts the
  // run with the ledger attached (hard failure, never silent truncation).
  void send(long iteration, std::size_t payload_bytes, long bits) {
    if (bits > budget_) {
      std::ostringstream msg;
      msg << "bit budget exceeded at iteration " << iteration << ": " << bits
          << " > " << budget_ << " bits; ledger:";
      for (const auto& e : ledger_) {
        msg << " (" << e.iteration << "," << e.bits << ")";
      }
      throw BudgetExceeded(msg.str());
    }
    ledger_.push_back({iteration, payload_bytes, bits});
  }

 private:
  long budget_;
  std::vector<ChannelEntry> ledger_;
};

// ---------------------------------------------------------------------------
// Datasets.
// ---------------------------------------------------------------------------

struct Dataset {
  Matrix A;       // one sample per row
  Vector labels;  // +-1
};

// Two Gaussian classes with opposite means +-mu*1/sqrt(n); the separation is
// wide enough that the draw is linearly separable with positive margin.
inline Dataset synthetic_dataset(int m, int n, std::uint64_t seed,
                                 double mean_scale = 3.0,
                                 double noise_scale = 0.5) {
  if (m < 2 || n < 1) throw InvalidDimensions("synthetic dataset needs m >= 2, n >= 1");
  Rng rng(seed);
  Dataset d;
  d.A.resize(m, n);
  d.labels.resize(m);
  const double mean_coord = mean_scale / std::sqrt(static_cast<double>(n));
  const double noise_coord = noise_scale / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < m; ++i) {
    const double label = (i % 2 == 0) ? 1.0 : -1.0;
    d.labels[i] = label;
    for (int j = 0; j < n; ++j) {
      d.A(i, j) = label * mean_coord + noise_coord * rng.normal();
    }
  }
  return d;
}

namespace detail {

inline std::uint32_t read_be_u32(std::ifstream& in, const std::string& what) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw ParseError("IDX: truncated " + what);
  }
  return (static_cast<std::uint32_t>(buf[0]) << 24) |
         (static_cast<std::uint32_t>(buf[1]) << 16) |
         (static_cast<std::uint32_t>(buf[2]) << 8) | buf[3];
}

}  // namespace detail

// IDX image/label pair (big-endian magic + dims, unsigned bytes). Pixel
// values are scaled to [0,1]; labels equal to `positive_class` map to +1.
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path,
                        int positive_class = 0) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw ParseError("cannot open " + images_path);
  if (detail::read_be_u32(img, "image magic") != 0x00000803u) {
    throw ParseError("IDX: bad image magic");
  }
  const std::uint32_t count = detail::read_be_u32(img, "image count");
  const std::uint32_t rows = detail::read_be_u32(img, "rows");
  const std::uint32_t cols = detail::read_be_u32(img, "cols");

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw ParseError("cannot open " + labels_path);
  if (detail::read_be_u32(lab, "label magic") != 0x00000801u) {
    throw ParseError("IDX: bad label magic");
  }
  if (detail::read_be_u32(lab, "label count") != count) {
    throw DimensionMismatch("IDX: image/label counts differ");
  }

  Dataset d;
  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  d.A.resize(count, static_cast<Eigen::Index>(dim));
  d.labels.resize(count);
  std::vector<unsigned char> pixels(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixels.data()),
                  static_cast<std::streamsize>(dim))) {
      throw ParseError("IDX: truncated image data");
    }
    for (std::size_t j = 0; j < dim; ++j) {
      d.A(i, static_cast<Eigen::Index>(j)) = pixels[j] / 255.0;
    }
    char label;
    if (!lab.get(label)) throw ParseError("IDX: truncated label data");
    d.labels[i] = (static_cast<unsigned char>(label) == positive_class) ? 1.0 : -1.0;
  }
  return d;
}

// CSV with m rows and n+1 columns: n features then the +-1 label.
inline Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("CSV: bad numeric value '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DimensionMismatch("CSV: ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().size() < 2) {
    throw ParseError("CSV: need at least one row with features + label");
  }
  Dataset d;
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto n = static_cast<Eigen::Index>(rows.front().size() - 1);
  d.A.resize(m, n);
  d.labels.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d.A(i, j) = rows[i][static_cast<std::size_t>(j)];
    d.labels[i] = rows[i][static_cast<std::size_t>(n)];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Experiment configuration.
// ---------------------------------------------------------------------------

enum class ExperimentKind {
  CompressionMap,
  RateVsR,
  Wallclock,
  SparsifiedGd,
  Svm,
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::CompressionMap;
  int n = 256;
  int N = 0;  // 0 = derived per experiment
  std::vector<double> rates;
  std::vector<std::uint64_t> seeds;
  int realizations = 50;
  int T = 150;
  std::string output = "out.csv";
  // sparsified_gd knobs
  double reg_fraction = 0.1;
  double keep_fraction = 0.5;
  // svm dataset
  std::string dataset_source = "synthetic";
  int dataset_m = 100;
  int dataset_n = 30;
  std::string images_path, labels_path, csv_path;

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    const std::string kind = j.at("experiment").get<std::string>();
    if (kind == "compression_map") cfg.kind = ExperimentKind::CompressionMap;
    else if (kind == "rate_vs_R") cfg.kind = ExperimentKind::RateVsR;
    else if (kind == "wallclock") cfg.kind = ExperimentKind::Wallclock;
    else if (kind == "sparsified_gd") cfg.kind = ExperimentKind::SparsifiedGd;
    else if (kind == "svm") cfg.kind = ExperimentKind::Svm;
    else throw ConfigError("unknown experiment kind: " + kind);

    if (j.contains("n")) cfg.n = j.at("n").get<int>();
    if (j.contains("N")) cfg.N = j.at("N").get<int>();
    if (j.contains("rates")) cfg.rates = j.at("rates").get<std::vector<double>>();
    if (j.contains("seeds")) {
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } else if (j.contains("seed")) {
      cfg.seeds = {j.at("seed").get<std::uint64_t>()};
    }
    if (j.contains("realizations")) cfg.realizations = j.at("realizations").get<int>();
    if (j.contains("T")) cfg.T = j.at("T").get<int>();
    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    if (j.contains("reg_fraction")) cfg.reg_fraction = j.at("reg_fraction").get<double>();
    if (j.contains("keep_fraction")) cfg.keep_fraction = j.at("keep_fraction").get<double>();
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      cfg.dataset_source = d.value("source", std::string("synthetic"));
      cfg.dataset_m = d.value("m", 100);
      cfg.dataset_n = d.value("n", 30);
      cfg.images_path = d.value("images", std::string());
      cfg.labels_path = d.value("labels", std::string());
      cfg.csv_path = d.value("path", std::string());
    }
    if (cfg.seeds.empty()) throw ConfigError("config needs 'seed' or 'seeds'");
    if (cfg.n < 1) throw ConfigError("config needs n >= 1");
    return cfg;
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("config parse error: ") + ex.what());
    }
    return from_json(j);
  }
};

// ---------------------------------------------------------------------------
// CSV emission. Numeric formatting is pinned so identical configs reproduce
// byte-identical files.
// ---------------------------------------------------------------------------

struct CsvTable {
  std::string header;
  std::vector<std::string> rows;

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << header << "\n";
    for (const auto& r : rows) out << r << "\n";
  }
};

inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Experiments.
// ---------------------------------------------------------------------------

inline Vector gaussian_cubed(int n, Rng& rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    v[i] = g * g * g;
  }
  return v;
}

namespace detail {

// Largest k whose sparsifier wire cost fits in `budget` bits.
inline int sparsifier_k_for_budget(int m, long budget, int value_bits = 32) {
  int best = 0;
  for (int k = 1; k <= m; ++k) {
    if (detail::sparsifier_bits(m, k, value_bits) <= budget) best = k;
    else break;
  }
  return best;
}

inline std::uint64_t cell_seed(std::uint64_t base, const std::string& scheme,
                               long a, long b = 0) {
  std::uint64_t s = Rng::derive(base, Rng::hash_string(scheme));
  s = Rng::derive(s, static_cast<std::uint64_t>(a));
  return Rng::derive(s, static_cast<std::uint64_t>(b));
}

}  // namespace detail

// Normalized compression error E||Q(y) - y|| / ||y|| on heavy-tailed inputs,
// one row per (scheme, R). Schemes: standard dithering (sd), top-k, DSC on a
// lambda=2 Hadamard frame (kashin), near-democratic Hadamard (ndh) and
// random orthonormal (ndo). All schemes spend at most floor(n*R) payload
// bits plus one 32-bit gain. Frames are drawn once per scheme from the
// config seed; only the input vectors are redrawn per realization.
inline CsvTable run_compression_map(const ExperimentConfig& cfg) {
  const int n = cfg.n;
  const int N = (cfg.N > 0) ? cfg.N : 2 * n;
  if (!is_power_of_two(N)) throw ConfigError("compression_map needs N a power of two");
  std::vector<double> rates = cfg.rates.empty()
                                  ? std::vector<double>{1, 2, 4, 6}
                                  : cfg.rates;
  const std::uint64_t seed = cfg.seeds.front();

  const Frame hadamard = Frame::build(FrameKind::RandomizedHadamard, n, N,
                                      Rng::derive(seed, 1));
  const Frame ortho = Frame::build(FrameKind::RandomOrthonormal, n, N,
                                   Rng::derive(seed, 2));
  const KashinParams params =
      default_kashin_params(hadamard, Rng::derive(seed, 3));

  CsvTable table;
  table.header = "scheme,R,mean_normalized_error,std_normalized_error";
  const std::vector<std::string> schemes = {"sd", "topk", "kashin", "ndh", "ndo"};

  for (const auto& scheme : schemes) {
    for (std::size_t ri = 0; ri < rates.size(); ++ri) {
      const double R = rates[ri];
      const long budget = static_cast<long>(std::floor(n * R));
      std::vector<double> errors;
      errors.reserve(static_cast<std::size_t>(cfg.realizations));
      for (int rep = 0; rep < cfg.realizations; ++rep) {
        Rng rng(detail::cell_seed(seed, scheme, static_cast<long>(ri), rep));
        const Vector y = gaussian_cubed(n, rng);
        const double ynorm = y.norm();
        Vector decoded;
        if (scheme == "sd") {
          // s chosen as the largest level count fitting R bits/coordinate.
          const int per_coord = std::max(1, static_cast<int>(std::floor(R)));
          const int s = std::max(1, (1 << (per_coord - 1)) - 1);
          decoded = compress(CompressorSpec::standard_dither(s), y, rng).value;
        } else if (scheme == "topk") {
          const int k = std::max(1, detail::sparsifier_k_for_budget(n, budget));
          decoded = compress(CompressorSpec::top_k(k), y, rng).value;
        } else {
          const Frame& frame = (scheme == "ndo") ? ortho : hadamard;
          if (dsc_bits_per_coord(n, R, frame.N()) < 1) {
            // Below one bit per embedding coordinate nothing can be sent;
            // record the error of transmitting zero.
            errors.push_back(1.0);
            continue;
          }
          const EmbeddingMode mode = (scheme == "kashin")
                                         ? EmbeddingMode::Democratic
                                         : EmbeddingMode::NearDemocratic;
          DscOptions opts;
          if (mode == EmbeddingMode::Democratic) {
            opts.method = DemocraticMethod::Iterative;
            opts.params = &params;
          }
          const QuantizedPayload p = dsc_encode(frame, y, R, mode, opts);
          decoded = dsc_decode(frame, p);
        }
        errors.push_back((decoded - y).norm() / ynorm);
      }
      double mean = 0.0;
      for (double e : errors) mean += e;
      mean /= static_cast<double>(errors.size());
      double var = 0.0;
      for (double e : errors) var += (e - mean) * (e - mean);
      var /= static_cast<double>(errors.size());
      table.rows.push_back(scheme + "," + csv_num(R) + "," + csv_num(mean) +
                           "," + csv_num(std::sqrt(var)));
    }
  }
  return table;
}

// Empirical linear convergence rate of the error-feedback loop versus the bit
// budget R, on a heavy-tailed least-squares instance. Methods: unquantized
// GD, the identity-frame scalar baseline, DSC and NDSC on a square random
// orthonormal frame.
inline CsvTable run_rate_vs_R(const ExperimentConfig& cfg) {
  const int n = cfg.n;
  const std::uint64_t seed = cfg.seeds.front();
  std::vector<double> rates = cfg.rates.empty()
                                  ? std::vector<double>{1, 2, 3, 4, 6, 8, 12}
                                  : cfg.rates;

  Rng data_rng(Rng::derive(seed, 11));
  Matrix A(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double g = data_rng.normal();
      A(i, j) = g * g * g / std::sqrt(static_cast<double>(n));
    }
  }
  Vector b(n);
  for (int i = 0; i < n; ++i) b[i] = data_rng.normal();
  // A small ridge keeps mu bounded away from 0 so sigma < 1 at desk scale.
  QuadraticObjective obj = QuadraticObjective::build(A, b, 0.0);
  obj = QuadraticObjective::build(std::move(A), std::move(b), 1e-3 * obj.L);
  const double alpha = 2.0 / (obj.L + obj.mu);

  const Frame frame = Frame::build(FrameKind::RandomOrthonormal, n, n,
                                   Rng::derive(seed, 12));

  CsvTable table;
  table.header = "method,R,empirical_rate";
  const RunReport gd = unquantized_gd(obj, alpha, cfg.T);
  for (double R : rates) {
    table.rows.push_back("unquantized," + csv_num(R) + "," +
                         csv_num(gd.empirical_rate));
  }

  for (const std::string method : {"scalar", "dsc", "ndsc"}) {
    for (double R : rates) {
      RunReport report;
      try {
        if (method == "scalar") {
          report = scalar_dqgd_baseline(obj, R, alpha, cfg.T);
        } else {
          const EmbeddingMode mode = (method == "dsc")
                                         ? EmbeddingMode::Democratic
                                         : EmbeddingMode::NearDemocratic;
          report = dgd_def(obj, frame, R, mode, alpha, cfg.T);
        }
        table.rows.push_back(method + "," + csv_num(R) + "," +
                             csv_num(report.empirical_rate));
      } catch (const BudgetTooSmall&) {
        // Below one bit per coordinate: record as non-converging.
        table.rows.push_back(method + "," + csv_num(R) + ",1");
      }
    }
  }
  return table;
}

// Wall-clock comparison of the LP democratic embedding against the
// closed-form near-democratic one. Timing excludes frame construction;
// 1 warm-up then `realizations` measured repetitions per cell.
inline CsvTable run_wallclock(const ExperimentConfig& cfg) {
  const std::uint64_t seed = cfg.seeds.front();
  std::vector<int> dims;
  if (cfg.rates.empty()) {
    dims = {64, 128, 256};
  } else {
    for (double r : cfg.rates) dims.push_back(static_cast<int>(r));
  }
  const int reps = std::max(1, std::min(cfg.realizations, 10));

  CsvTable table;
  table.header = "n,method,mean_seconds,min_seconds";
  for (int n : dims) {
    const Frame frame = Frame::build(FrameKind::RandomOrthonormal, n, n,
                                     Rng::derive(seed, static_cast<std::uint64_t>(n)));
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(n) + 1000));
    Vector y(n);
    for (int i = 0; i < n; ++i) y[i] = rng.normal();

    for (const std::string method : {"democratic", "near_democratic"}) {
      auto solve = [&]() {
        if (method == "democratic") (void)democratic_lp(frame, y);
        else (void)near_democratic(frame, y);
      };
      solve();  // warm-up
      double total = 0.0, best = 1e300;
      for (int rep = 0; rep < reps; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        solve();
        const auto t1 = std::chrono::steady_clock::now();
        const double sec = std::chrono::duration<double>(t1 - t0).count();
        total += sec;
        best = std::min(best, sec);
      }
      table.rows.push_back(std::to_string(n) + "," + method + "," +
                           csv_num(total / reps) + "," + csv_num(best));
    }
  }
  return table;
}

// Fractional-rate ridge regression: random sparsification of half the
// coordinates with 1-bit values (~R = 0.5 total) applied to the gradient,
// naively versus through the democratic wrapper, inside the same
// error-feedback loop and through the same bit-audited channel.
inline CsvTable run_sparsified_gd(const ExperimentConfig& cfg) {
  const int n = cfg.n;
  const std::uint64_t seed = cfg.seeds.front();

  Rng data_rng(Rng::derive(seed, 21));
  Matrix A(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double g = data_rng.normal();
      A(i, j) = g * g * g / std::sqrt(static_cast<double>(n));
    }
  }
  Vector b(n);
  for (int i = 0; i < n; ++i) b[i] = data_rng.normal();
  QuadraticObjective obj = QuadraticObjective::build(A, b, 0.0);
  obj = QuadraticObjective::build(std::move(A), std::move(b),
                                  cfg.reg_fraction * obj.L);
  const double alpha = 2.0 / (obj.L + obj.mu);

  const int keep = std::max(1, static_cast<int>(std::floor(cfg.keep_fraction * n)));
  const CompressorSpec naive_spec = CompressorSpec::random_sparsify(keep, false, 1);
  const long budget = detail::sparsifier_bits(n, keep, 1);

  // The wrapper spreads the gradient over a rotated basis before the same
  // sparsify + 1-bit pipeline; its keep count is chosen so the wire cost
  // never exceeds the naive pipeline's budget.
  const int Nf = 1 << static_cast<int>(std::ceil(std::log2(static_cast<double>(n))));
  const Frame frame = Frame::build(FrameKind::RandomizedHadamard, n, Nf,
                                   Rng::derive(seed, 22));
  const int keep_w = std::max(1, detail::sparsifier_k_for_budget(Nf, budget, 1));
  const CompressorSpec wrapped_spec = CompressorSpec::random_sparsify(keep_w, false, 1);

  CsvTable table;
  table.header = "iteration,method,objective,distance,bits";
  for (const std::string method : {"naive", "wrapped"}) {
    Rng rng(detail::cell_seed(seed, method, 0));
    BitChannel channel(budget);
    Vector x = Vector::Zero(n);
    Vector e = Vector::Zero(n);
    bool diverged = false;
    for (int t = 0; t < cfg.T; ++t) {
      double dist = (x - obj.xstar).norm();
      if (!std::isfinite(dist)) {
        dist = std::numeric_limits<double>::infinity();
        diverged = true;
      }
      table.rows.push_back(std::to_string(t) + "," + method + "," +
                           csv_num(diverged ? INFINITY : obj.value(x)) + "," +
                           csv_num(dist) + "," + std::to_string(budget));
      if (diverged) continue;
      const Vector u = obj.gradient(x + alpha * e) - e;
      if (!u.allFinite()) {
        diverged = true;
        continue;
      }
      CompressReport rep = (method == "naive")
                               ? compress(naive_spec, u, rng)
                               : democratic_wrap(frame, wrapped_spec, u,
                                                 EmbeddingMode::NearDemocratic, rng);
      channel.send(t, static_cast<std::size_t>((rep.bits + 7) / 8), rep.bits);
      e = rep.value - u;
      x -= alpha * rep.value;
    }
  }
  return table;
}

// Hinge-loss SVM traces: the unbiased gain-shape coder inside projected
// subgradient descent, against naive rescaled random sparsification at a
// matched per-iteration bit budget. Rows are means over the config seeds.
inline CsvTable run_svm(const ExperimentConfig& cfg) {
  Dataset data;
  if (cfg.dataset_source == "synthetic") {
    data = synthetic_dataset(cfg.dataset_m, cfg.dataset_n, cfg.seeds.front());
  } else if (cfg.dataset_source == "idx") {
    data = load_idx(cfg.images_path, cfg.labels_path);
  } else if (cfg.dataset_source == "csv") {
    data = load_csv_dataset(cfg.csv_path);
  } else {
    throw ConfigError("unknown dataset source: " + cfg.dataset_source);
  }
  const HingeObjective obj = HingeObjective::build(data.A, data.labels);
  const int n = obj.dim();
  const double R = cfg.rates.empty() ? 2.0 : cfg.rates.front();
  const int T = cfg.T;

  const Domain domain = Domain::ball(Vector::Zero(n), 1.0);
  const double fstar = hinge_reference_fstar(obj, domain, 100000);

  const int Nf = 1 << static_cast<int>(std::ceil(std::log2(std::max(2, 2 * n))));
  const Frame frame = Frame::build(FrameKind::RandomizedHadamard, n, Nf,
                                   Rng::derive(cfg.seeds.front(), 31));
  const KashinParams params =
      default_kashin_params(frame, Rng::derive(cfg.seeds.front(), 32));
  const long budget = static_cast<long>(std::floor(n * R)) + 32;
  const int k_sparse = std::max(1, detail::sparsifier_k_for_budget(n, budget, 32));

  // trace[method][t] accumulators
  std::vector<std::string> methods = {"gain_shape", "sparsified"};
  std::vector<std::vector<double>> gap(2, std::vector<double>(T, 0.0));
  std::vector<std::vector<double>> err(2, std::vector<double>(T, 0.0));
  std::vector<std::vector<double>> objv(2, std::vector<double>(T, 0.0));

  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    const std::uint64_t seed = cfg.seeds[si];
    {
      Rng rng(detail::cell_seed(seed, "gain_shape", 0));
      DqPsgdOptions opts;
      opts.fstar = fstar;
      opts.record_trajectory = true;
      RunReport rep = dq_psgd(obj, frame, R, T, domain, params, rng, opts);
      // Running average over the recorded iterates x_hat_0..x_hat_{t} drives
      // the classification-error trace, matching the averaged output.
      Vector running = Vector::Zero(n);
      for (int t = 0; t < T; ++t) {
        gap[0][t] += rep.gap_trace[static_cast<std::size_t>(t)];
        objv[0][t] += rep.objective[static_cast<std::size_t>(t)];
        running += rep.iterates[static_cast<std::size_t>(t)];
        err[0][t] += obj.classification_error(running / (t + 1));
      }
    }
    {
      const double D = domain.diameter();
      const double eta = D / (obj.B * params.k_upper * std::sqrt(static_cast<double>(T)));
      Rng rng(detail::cell_seed(seed, "sparsified", 0));
      BitChannel channel(budget);
      Vector x = project(domain, Vector::Zero(n));
      Vector avg = Vector::Zero(n);
      const CompressorSpec spec = CompressorSpec::random_sparsify(k_sparse, true, 32);
      for (int t = 0; t < T; ++t) {
        objv[1][t] += obj.value(x);
        const Vector g = obj.subgradient(x);
        CompressReport rep = compress(spec, g, rng);
        channel.send(t, static_cast<std::size_t>((rep.bits + 7) / 8), rep.bits);
        avg += x;
        x = project(domain, x - eta * rep.value);
        const Vector mean = avg / (t + 1);
        gap[1][t] += obj.value(mean) - fstar;
        err[1][t] += obj.classification_error(mean);
      }
    }
  }

  const double denom = static_cast<double>(cfg.seeds.size());
  CsvTable table;
  table.header = "iteration,method,objective,gap,classification_error";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (int t = 0; t < T; ++t) {
      table.rows.push_back(std::to_string(t) + "," + methods[m] + "," +
                           csv_num(objv[m][static_cast<std::size_t>(t)] / denom) + "," +
                           csv_num(gap[m][static_cast<std::size_t>(t)] / denom) + "," +
                           csv_num(err[m][static_cast<std::size_t>(t)] / denom));
    }
  }
  return table;
}

inline CsvTable run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::CompressionMap: return run_compression_map(cfg);
    case ExperimentKind::RateVsR: return run_rate_vs_R(cfg);
    case ExperimentKind::Wallclock: return run_wallclock(cfg);
    case ExperimentKind::SparsifiedGd: return run_sparsified_gd(cfg);
    case ExperimentKind::Svm: return run_svm(cfg);
  }
  throw ConfigError("unhandled experiment kind");
}

}  // namespace demoq
