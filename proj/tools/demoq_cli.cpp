// Command-line front end. Every command is a thin shell over the library;
// no logic lives only here.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "demoq/demoq.hpp"

namespace {

using demoq::Vector;

// One value per line, or a single comma-separated row.
Vector read_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw demoq::ParseError("cannot open " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw demoq::ParseError("bad numeric value '" + cell + "' in " + path);
      }
    }
  }
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = values[i];
  }
  return v;
}

void write_vector(const std::string& path, const Vector& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw demoq::ConfigError("cannot write " + path);
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    out << buf << "\n";
  }
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw demoq::ConfigError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw demoq::ParseError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

demoq::EmbeddingMode parse_mode(const std::string& mode) {
  if (mode == "dem" || mode == "democratic") return demoq::EmbeddingMode::Democratic;
  if (mode == "near" || mode == "near_democratic") {
    return demoq::EmbeddingMode::NearDemocratic;
  }
  throw CLI::ValidationError("--mode", "expected dem|near");
}

struct FrameFlags {
  std::string kind = "hadamard";
  int n = 0;
  int N = 0;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--frame", kind, "frame kind: orthonormal|hadamard|subgaussian|identity");
    cmd->add_option("--n", n, "source dimension")->required();
    cmd->add_option("--N", N, "embedding dimension (default n)");
    cmd->add_option("--seed", seed, "frame / RNG seed")->required();
  }

  demoq::Frame build() const {
    return demoq::Frame::build(demoq::frame_kind_from_string(kind), n,
                               N > 0 ? N : n, seed);
  }
};

void write_run_report(const std::string& path, const demoq::RunReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw demoq::ConfigError("cannot write " + path);
  out << "iteration,distance,objective,bits\n";
  for (std::size_t t = 0; t < report.distance.size(); ++t) {
    out << t << "," << demoq::csv_num(report.distance[t]) << ","
        << demoq::csv_num(report.objective[t]) << ","
        << (t == 0 ? 0L : report.bits[t - 1]) << "\n";
  }
}

demoq::QuadraticObjective synthetic_quadratic(int n, std::uint64_t seed) {
  demoq::Rng rng(demoq::Rng::derive(seed, 11));
  demoq::Matrix A(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double g = rng.normal();
      A(i, j) = g * g * g / std::sqrt(static_cast<double>(n));
    }
  }
  Vector b(n);
  for (int i = 0; i < n; ++i) b[i] = rng.normal();
  demoq::QuadraticObjective obj = demoq::QuadraticObjective::build(A, b, 0.0);
  return demoq::QuadraticObjective::build(std::move(A), std::move(b), 1e-3 * obj.L);
}

int run(int argc, char** argv) {
  CLI::App app{"democratic embeddings, bit-budgeted quantizers, and quantized first-order methods"};
  app.require_subcommand(1);

  // ---- embed ----
  auto* embed = app.add_subcommand("embed", "embed a vector and report the gain");
  FrameFlags embed_frame;
  embed_frame.attach(embed);
  std::string embed_mode = "near", embed_in, embed_out;
  std::string embed_method = "lp";
  embed->add_option("--mode", embed_mode, "dem|near");
  embed->add_option("--method", embed_method, "dem solver: lp|iterative");
  embed->add_option("--in", embed_in, "input vector file")->required();
  embed->add_option("--out", embed_out, "output coefficients file")->required();

  // ---- quantize ----
  auto* quantize = app.add_subcommand("quantize", "encode a vector into a wire payload");
  FrameFlags q_frame;
  q_frame.attach(quantize);
  std::string q_mode = "near", q_in, q_out, q_decode_out;
  double q_rate = 1.0;
  quantize->add_option("--mode", q_mode, "dem|near");
  quantize->add_option("--rate", q_rate, "bits per source dimension")->required();
  quantize->add_option("--in", q_in, "input vector file")->required();
  quantize->add_option("--out", q_out, "payload output file (.dsc)")->required();
  quantize->add_option("--decode-out", q_decode_out, "also write the decode here");

  // ---- dequantize ----
  auto* dequantize = app.add_subcommand("dequantize", "decode a wire payload file");
  FrameFlags d_frame;
  d_frame.attach(dequantize);
  std::string d_in, d_out;
  dequantize->add_option("--in", d_in, "payload file")->required();
  dequantize->add_option("--out", d_out, "decoded vector file")->required();

  // ---- compress ----
  auto* comp = app.add_subcommand("compress", "apply a compression operator");
  std::string c_type = "topk", c_in, c_out;
  int c_k = 1, c_levels = 1, c_value_bits = 32;
  double c_scale = 1.0;
  bool c_rescale = false, c_wrap = false;
  std::string c_mode = "near";
  std::uint64_t c_seed = 0;
  FrameFlags c_frame;
  comp->add_option("--type", c_type, "random|topk|sign|dither")->required();
  comp->add_option("--k", c_k, "sparsifier keep count");
  comp->add_option("--levels", c_levels, "dither level count s");
  comp->add_option("--scale", c_scale, "sign output magnitude");
  comp->add_option("--value-bits", c_value_bits, "bits per kept value");
  comp->add_flag("--rescale", c_rescale, "unbiased rescaling for random sparsify");
  comp->add_flag("--wrap", c_wrap, "compress the democratic embedding instead");
  comp->add_option("--mode", c_mode, "wrap mode: dem|near");
  comp->add_option("--seed", c_seed, "RNG seed")->required();
  comp->add_option("--in", c_in, "input vector file")->required();
  comp->add_option("--out", c_out, "output vector file")->required();
  comp->add_option("--frame", c_frame.kind, "wrap frame kind");
  comp->add_option("--n", c_frame.n, "wrap frame n");
  comp->add_option("--N", c_frame.N, "wrap frame N");
  comp->add_option("--frame-seed", c_frame.seed, "wrap frame seed");

  // ---- optimize ----
  auto* opt = app.add_subcommand("optimize", "run a first-order method, write a run report");
  std::string o_algo, o_mode = "near", o_out;
  std::string o_frame_kind = "orthonormal";
  int o_n = 16, o_N = 0, o_T = 100, o_m = 100;
  double o_rate = 4.0;
  std::uint64_t o_seed = 0;
  opt->add_option("--algo", o_algo, "dgd-def|dq-psgd|gd|scalar")->required();
  opt->add_option("--n", o_n, "problem dimension");
  opt->add_option("--N", o_N, "embedding dimension (default n)");
  opt->add_option("--m", o_m, "SVM sample count");
  opt->add_option("--T", o_T, "iterations");
  opt->add_option("--rate", o_rate, "bits per dimension R");
  opt->add_option("--mode", o_mode, "dem|near");
  opt->add_option("--frame", o_frame_kind, "frame kind");
  opt->add_option("--seed", o_seed, "RNG seed")->required();
  opt->add_option("--out", o_out, "run report CSV")->required();

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "run a configured experiment");
  std::string b_config, b_out;
  bench->add_option("--config", b_config, "experiment config (JSON)")->required();
  bench->add_option("--out", b_out, "override the config output path");

  // ---- bounds ----
  auto* bounds = app.add_subcommand("bounds", "evaluate closed-form bound formulas");
  std::string w_which, w_mode = "near", w_kind = "hadamard";
  double w_sigma = 0.0, w_rate = 1.0, w_lambda = 1.0, w_ku = 0.0;
  double w_nu = 0.0, w_beta = 0.0, w_alpha = 0.0, w_L = 0.0, w_D = 1.0, w_B = 1.0;
  int w_N = 0, w_T = 1;
  bounds->add_option("--which", w_which, "thm1|prop1|prop2|prop4|lemma4")->required();
  bounds->add_option("--sigma", w_sigma);
  bounds->add_option("--rate", w_rate);
  bounds->add_option("--lambda", w_lambda);
  bounds->add_option("--ku", w_ku);
  bounds->add_option("--N", w_N);
  bounds->add_option("--nu", w_nu);
  bounds->add_option("--beta", w_beta);
  bounds->add_option("--alpha", w_alpha);
  bounds->add_option("--L", w_L);
  bounds->add_option("--T", w_T);
  bounds->add_option("--D", w_D);
  bounds->add_option("--B", w_B);
  bounds->add_option("--mode", w_mode, "dem|near");
  bounds->add_option("--kind", w_kind, "frame kind for prop1/lemma4");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage errors exit 1 regardless of CLI11's default codes
  }

  if (embed->parsed()) {
    const demoq::Frame frame = embed_frame.build();
    const Vector y = read_vector(embed_in);
    demoq::Embedding emb;
    if (parse_mode(embed_mode) == demoq::EmbeddingMode::Democratic) {
      if (embed_method == "iterative") {
        const demoq::KashinParams params =
            demoq::default_kashin_params(frame, demoq::Rng::derive(embed_frame.seed, 7));
        emb = demoq::democratic_iterative(frame, y, params, 50);
      } else {
        emb = demoq::democratic_lp(frame, y);
      }
    } else {
      emb = demoq::near_democratic(frame, y);
    }
    write_vector(embed_out, emb.coefficients);
    std::cout << "gain " << demoq::csv_num(emb.gain) << "\n";
    std::cout << "residual " << demoq::csv_num(emb.residual) << "\n";
    return 0;
  }

  if (quantize->parsed()) {
    const demoq::Frame frame = q_frame.build();
    const Vector y = read_vector(q_in);
    const demoq::QuantizedPayload payload =
        demoq::dsc_encode(frame, y, q_rate, parse_mode(q_mode));
    write_bytes(q_out, payload.serialize());
    std::cout << "bits " << payload.total_bits() << "\n";
    if (!q_decode_out.empty()) {
      write_vector(q_decode_out, demoq::dsc_decode(frame, payload));
    }
    return 0;
  }

  if (dequantize->parsed()) {
    const demoq::Frame frame = d_frame.build();
    const demoq::QuantizedPayload payload =
        demoq::QuantizedPayload::deserialize(read_bytes(d_in));
    write_vector(d_out, demoq::dsc_decode(frame, payload));
    return 0;
  }

  if (comp->parsed()) {
    demoq::CompressorSpec spec;
    if (c_type == "random") {
      spec = demoq::CompressorSpec::random_sparsify(c_k, c_rescale, c_value_bits);
    } else if (c_type == "topk") {
      spec = demoq::CompressorSpec::top_k(c_k, c_value_bits);
    } else if (c_type == "sign") {
      spec = demoq::CompressorSpec::sign(c_scale);
    } else if (c_type == "dither") {
      spec = demoq::CompressorSpec::standard_dither(c_levels);
    } else {
      throw CLI::ValidationError("--type", "expected random|topk|sign|dither");
    }
    const Vector x = read_vector(c_in);
    demoq::Rng rng(c_seed);
    demoq::CompressReport report;
    if (c_wrap) {
      if (c_frame.n == 0) c_frame.n = static_cast<int>(x.size());
      report = demoq::democratic_wrap(c_frame.build(), spec, x,
                                      parse_mode(c_mode), rng);
    } else {
      report = demoq::compress(spec, x, rng);
    }
    write_vector(c_out, report.value);
    std::cout << "bits " << report.bits << "\n";
    return 0;
  }

  if (opt->parsed()) {
    demoq::RunReport report;
    if (o_algo == "dq-psgd") {
      const demoq::Dataset data = demoq::synthetic_dataset(o_m, o_n, o_seed);
      const demoq::HingeObjective obj =
          demoq::HingeObjective::build(data.A, data.labels);
      const int Nf = o_N > 0 ? o_N
                             : 1 << static_cast<int>(std::ceil(
                                   std::log2(std::max(2, 2 * o_n))));
      const demoq::Frame frame =
          demoq::Frame::build(demoq::FrameKind::RandomizedHadamard, o_n, Nf,
                              demoq::Rng::derive(o_seed, 31));
      const demoq::KashinParams params =
          demoq::default_kashin_params(frame, demoq::Rng::derive(o_seed, 32));
      const demoq::Domain domain =
          demoq::Domain::ball(Vector::Zero(o_n), 1.0);
      demoq::Rng rng(demoq::Rng::derive(o_seed, 33));
      report = demoq::dq_psgd(obj, frame, o_rate, o_T, domain, params, rng);
    } else {
      const demoq::QuadraticObjective obj = synthetic_quadratic(o_n, o_seed);
      const double alpha = 2.0 / (obj.L + obj.mu);
      if (o_algo == "gd") {
        report = demoq::unquantized_gd(obj, alpha, o_T);
      } else if (o_algo == "scalar") {
        report = demoq::scalar_dqgd_baseline(obj, o_rate, alpha, o_T);
      } else if (o_algo == "dgd-def") {
        const demoq::Frame frame = demoq::Frame::build(
            demoq::frame_kind_from_string(o_frame_kind), o_n,
            o_N > 0 ? o_N : o_n, demoq::Rng::derive(o_seed, 12));
        report = demoq::dgd_def(obj, frame, o_rate, parse_mode(o_mode), alpha, o_T);
      } else {
        throw CLI::ValidationError("--algo", "expected dgd-def|dq-psgd|gd|scalar");
      }
    }
    write_run_report(o_out, report);
    std::cout << "empirical_rate " << demoq::csv_num(report.empirical_rate) << "\n";
    std::cout << "total_bits " << report.total_bits << "\n";
    return 0;
  }

  if (bench->parsed()) {
    demoq::ExperimentConfig cfg = demoq::ExperimentConfig::from_file(b_config);
    if (!b_out.empty()) cfg.output = b_out;
    const demoq::CsvTable table = demoq::run_experiment(cfg);
    table.write(cfg.output);
    std::cout << "wrote " << cfg.output << " (" << table.rows.size() << " rows)\n";
    return 0;
  }

  if (bounds->parsed()) {
    double value = 0.0;
    if (w_which == "thm1") {
      value = demoq::thm1_lower(w_sigma, w_rate);
    } else if (w_which == "prop1") {
      value = demoq::prop1_bound(w_rate, w_lambda, parse_mode(w_mode), w_ku, w_N,
                                 demoq::frame_kind_from_string(w_kind));
    } else if (w_which == "prop2") {
      value = demoq::prop2_bound(w_nu, w_beta, w_alpha, w_L, w_T, w_D);
    } else if (w_which == "prop4") {
      value = demoq::prop4_bound(w_ku, w_D, w_B, w_T);
    } else if (w_which == "lemma4") {
      // Dynamic-range bound on ||x||_inf / ||y||_2 for the chosen mode.
      if (parse_mode(w_mode) == demoq::EmbeddingMode::Democratic) {
        value = w_ku / std::sqrt(static_cast<double>(w_N));
      } else if (demoq::frame_kind_from_string(w_kind) ==
                 demoq::FrameKind::RandomizedHadamard) {
        value = 2.0 * std::sqrt(std::log(2.0 * w_N) / w_N);
      } else {
        value = 2.0 * std::sqrt(w_lambda * std::log(2.0 * w_N) / w_N);
      }
    } else {
      throw CLI::ValidationError("--which", "expected thm1|prop1|prop2|prop4|lemma4");
    }
    std::cout << demoq::csv_num(value) << "\n";
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& ex) {
    std::cerr << ex.what() << "\n";
    return 1;
  } catch (const demoq::Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
}
