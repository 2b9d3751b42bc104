// kae — fit, inspect, and apply kernel autoencoders from the command line.
//
// Every subcommand runs once per process, reads/writes headerless CSV (17
// significant digits, so save→load round trips are exact) and exits nonzero
// with a single "error: ..." line on stderr when anything goes wrong.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "kae/datasets.hpp"
#include "kae/gradients.hpp"
#include "kae/io.hpp"
#include "kae/kernels.hpp"
#include "kae/kpca.hpp"
#include "kae/layers.hpp"
#include "kae/rng.hpp"
#include "kae/simd.hpp"
#include "kae/trainer.hpp"
#include "kae/types.hpp"

namespace {

using kae::GramTable;
using kae::Index;
using kae::Matrix;
using kae::ScalarKernel;
using kae::Vector;

// -------------------------------------------------------------------------
// Small parsing helpers
// -------------------------------------------------------------------------

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_num(std::string_view raw, const std::string& what) {
  const std::string_view s = trimmed(raw);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw std::runtime_error("cannot parse " + what + " from '" + std::string(raw) + "'");
  }
  return v;
}

long parse_long(std::string_view raw, const std::string& what) {
  const std::string_view s = trimmed(raw);
  long v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw std::runtime_error("cannot parse " + what + " from '" + std::string(raw) + "'");
  }
  return v;
}

std::vector<Index> parse_dims(const std::string& s) {
  std::vector<Index> dims;
  for (const std::string& part : split(s, ',')) {
    const long d = parse_long(part, "a layer dimension");
    if (d <= 0) throw std::runtime_error("layer dimensions must be positive, got " + part);
    dims.push_back(static_cast<Index>(d));
  }
  return dims;
}

std::vector<double> parse_lambdas(const std::string& s, std::size_t count) {
  std::vector<double> values;
  for (const std::string& part : split(s, ',')) {
    values.push_back(parse_num(part, "a lambda value"));
  }
  if (values.size() == 1 && count > 1) values.assign(count, values.front());
  if (values.size() != count) {
    throw std::runtime_error("--lambda needs " + std::to_string(count) + " value(s), got " +
                             std::to_string(values.size()));
  }
  for (double v : values) {
    if (v < 0.0) throw std::runtime_error("lambda values must be non-negative");
  }
  return values;
}

// A kernel choice from the command line; `median` marks a Gaussian whose
// bandwidth is still to be resolved from the layer's input representation.
struct KernelChoice {
  ScalarKernel kernel;
  bool median = false;
};

KernelChoice parse_kernel_one(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string name(trimmed(spec.substr(0, colon)));
  const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (name == "linear") {
    if (!args.empty()) throw std::runtime_error("the linear kernel takes no parameters");
    return {ScalarKernel::linear(), false};
  }
  if (name == "gaussian") {
    if (args.empty()) {
      throw std::runtime_error("gaussian kernel needs a bandwidth: gaussian:<gamma> or gaussian:median");
    }
    if (trimmed(args) == "median") return {ScalarKernel::gaussian(1.0), true};
    const double gamma = parse_num(args, "the gaussian bandwidth");
    return {ScalarKernel::gaussian(gamma), false};
  }
  if (name == "poly" || name == "polynomial") {
    const std::vector<std::string> parts = split(args, ',');
    if (parts.size() != 3) {
      throw std::runtime_error("polynomial kernel needs three parameters: poly:<a>,<b>,<c>");
    }
    return {ScalarKernel::polynomial(parse_num(parts[0], "the polynomial scale"),
                                     parse_num(parts[1], "the polynomial offset"),
                                     static_cast<int>(parse_long(parts[2], "the polynomial degree"))),
            false};
  }
  throw std::runtime_error("unknown kernel '" + name +
                           "' (expected gaussian:<gamma>, gaussian:median, poly:<a>,<b>,<c>, or linear)");
}

std::vector<KernelChoice> parse_kernels(const std::string& s, std::size_t count) {
  std::vector<KernelChoice> choices;
  for (const std::string& part : split(s, ';')) choices.push_back(parse_kernel_one(part));
  if (choices.size() == 1 && count > 1) choices.assign(count, choices.front());
  if (choices.size() != count) {
    throw std::runtime_error("--kernel needs " + std::to_string(count) + " spec(s), got " +
                             std::to_string(choices.size()));
  }
  return choices;
}

std::string kernel_to_string(const ScalarKernel& k) {
  char buf[96];
  switch (k.kind) {
    case kae::KernelKind::gaussian:
      std::snprintf(buf, sizeof buf, "gaussian:%.6g", k.gamma);
      return buf;
    case kae::KernelKind::polynomial:
      std::snprintf(buf, sizeof buf, "poly:%.6g,%.6g,%d", k.a, k.b, k.c);
      return buf;
    case kae::KernelKind::linear:
      return "linear";
  }
  return "?";
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// -------------------------------------------------------------------------
// Median bandwidth heuristic: gamma = 1 / (2 * median^2) over the pairwise
// distances of the layer's input representation (lower median for even
// counts, so the value is always an observed distance).
// -------------------------------------------------------------------------

double gamma_from_sq_dists(std::vector<double>& sq) {
  if (sq.empty()) {
    throw std::runtime_error("the median bandwidth heuristic needs at least two points");
  }
  std::sort(sq.begin(), sq.end());
  const double med = std::sqrt(std::max(0.0, sq[(sq.size() - 1) / 2]));
  if (med <= 0.0) {
    throw std::runtime_error(
        "median pairwise distance is zero; pass an explicit bandwidth (gaussian:<gamma>)");
  }
  return 0.5 / (med * med);
}

double median_gamma_points(const Matrix& points) {
  const Index n = points.rows();
  std::vector<double> sq;
  sq.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      sq.push_back(kae::simd::sqdist(kae::row_span(points, i), kae::row_span(points, j)));
    }
  }
  return gamma_from_sq_dists(sq);
}

double median_gamma_gram(const Matrix& k) {
  const Index n = k.rows();
  std::vector<double> sq;
  sq.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      sq.push_back(std::max(0.0, k(i, i) - 2.0 * k(i, j) + k(j, j)));
    }
  }
  return gamma_from_sq_dists(sq);
}

// Resolving a median bandwidth for layer l needs the representation X^(l-1)
// produced by the already-resolved earlier layers, so layers are built in
// order, advancing the representations with the same seeded initial
// coefficients the trainer will draw.
std::vector<kae::LayerSpec> resolve_layers_finite(const Matrix& inputs,
                                                  const std::vector<Index>& dims,
                                                  const std::vector<KernelChoice>& choices,
                                                  const std::vector<double>& lambdas,
                                                  const kae::TrainConfig& cfg) {
  bool later_median = false;
  for (std::size_t l = 1; l < choices.size(); ++l) later_median |= choices[l].median;
  std::vector<Matrix> coeffs;
  if (later_median) coeffs = kae::init_coefficients(cfg, inputs.rows(), dims);

  std::vector<kae::LayerSpec> layers;
  Matrix rep = inputs;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    ScalarKernel kernel = choices[l].kernel;
    if (choices[l].median) kernel = ScalarKernel::gaussian(median_gamma_points(rep));
    layers.push_back(kae::LayerSpec::make(kernel, dims[l], lambdas[l]));
    if (later_median && l + 1 < dims.size()) {
      rep = kae::forward_layer(layers.back(), coeffs[l], rep, rep);
    }
  }
  return layers;
}

// Same idea for the kernelized model: layer 1's distances come from the input
// Gram matrix, and the implicit last kernel resolves against the deepest
// finite representation.
std::pair<std::vector<kae::LayerSpec>, ScalarKernel> resolve_layers_k2ae(
    const GramTable& k_in, const std::vector<Index>& dims, const std::vector<KernelChoice>& choices,
    const std::vector<double>& lambdas, const kae::TrainConfig& cfg) {
  bool need_reps = false;
  for (std::size_t l = 1; l < choices.size(); ++l) need_reps |= choices[l].median;
  std::vector<Matrix> coeffs;
  if (need_reps) coeffs = kae::init_coefficients(cfg, k_in.size(), dims);

  std::vector<kae::LayerSpec> inner;
  Matrix rep;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    ScalarKernel kernel = choices[l].kernel;
    if (choices[l].median) {
      kernel = ScalarKernel::gaussian(l == 0 ? median_gamma_gram(k_in.matrix())
                                             : median_gamma_points(rep));
    }
    inner.push_back(kae::LayerSpec::make(kernel, dims[l], lambdas[l]));
    if (need_reps) {
      if (l == 0) {
        rep = kae::gram_induced(inner[0].kernel, k_in.matrix()) * coeffs[0] *
              inner[0].a_diag.asDiagonal();
      } else {
        rep = kae::forward_layer(inner[l], coeffs[l], rep, rep);
      }
    }
  }
  ScalarKernel last = choices.back().kernel;
  if (choices.back().median) last = ScalarKernel::gaussian(median_gamma_points(rep));
  return {std::move(inner), last};
}

// -------------------------------------------------------------------------
// Subcommand argument bundles
// -------------------------------------------------------------------------

struct GenDataArgs {
  std::string kind = "circles";
  int n = 50;
  int clusters = 2;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string labels;
};

struct FitArgs {
  std::string mode = "finite";
  std::string data;
  std::string gram;
  std::string layers;
  std::string kernel = "gaussian:median";
  std::string lambda = "0.001";
  int epochs = 100;
  double step = 0.1;
  bool decay = false;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  double jitter = 0.0;
  std::string out;
  std::string trace;
  bool no_validate = false;
};

struct EncodeArgs {
  std::string model;
  std::string data;
  std::string gram_test;
  std::string gram_test_diag;
  int layer = 0;
  std::string out;
  bool no_validate = false;  // unused; kept for symmetry of test Gram rows
};

struct TestDistortionArgs {
  std::string model;
  std::string gram_test;
  std::string gram_test_diag;
  std::string out;
};

struct KpcaArgs {
  std::string data;
  std::string gram;
  std::string kernel = "linear";
  int components = 0;
  bool center = false;
  std::string out;
  std::string eigvals;
  bool no_validate = false;
};

struct GradcheckArgs {
  std::string data;
  std::string layers = "3,2,3";
  std::string kernel = "gaussian:0.5";
  std::string lambda = "0.1";
  int n = 6;
  std::uint64_t seed = 0;
  double fd_step = 1e-5;
  double tol = 1e-5;
};

struct ToyArgs {
  double lambda = 0.1;
  double mu = 0.1;
  double range = 2.0;
  int steps = 101;
  std::string out;
};

// -------------------------------------------------------------------------
// Subcommand implementations
// -------------------------------------------------------------------------

void run_gen_data(const GenDataArgs& a) {
  kae::SyntheticSpec spec;
  if (a.kind == "circles") {
    spec.kind = kae::DatasetKind::circles;
  } else if (a.kind == "moons") {
    spec.kind = kae::DatasetKind::moons;
  } else if (a.kind == "gaussians") {
    spec.kind = kae::DatasetKind::gaussians;
  } else {
    throw std::runtime_error("unknown dataset kind '" + a.kind +
                             "' (expected circles, moons, or gaussians)");
  }
  spec.n_per_cluster = a.n;
  spec.n_clusters = a.clusters;
  spec.noise = a.noise;
  spec.seed = a.seed;
  const kae::Dataset ds = kae::gen_dataset(spec);
  kae::save_matrix(a.out, ds.points);
  std::cout << "wrote " << ds.points.rows() << " points (" << ds.points.cols() << "-d) to "
            << a.out << "\n";
  if (!a.labels.empty()) {
    Matrix lab(static_cast<Index>(ds.labels.size()), 1);
    for (Index i = 0; i < lab.rows(); ++i) lab(i, 0) = ds.labels[static_cast<std::size_t>(i)];
    kae::save_matrix(a.labels, lab);
    std::cout << "wrote labels to " << a.labels << "\n";
  }
}

std::string default_trace_path(const std::string& model_path) {
  const std::size_t slash = model_path.find_last_of('/');
  const std::size_t dot = model_path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return model_path + ".trace.csv";
  }
  return model_path.substr(0, dot) + ".trace.csv";
}

void save_trace(const std::string& path, const std::vector<kae::TraceRecord>& trace) {
  if (trace.empty()) throw std::logic_error("empty training trace");
  const Index cols = 3 + static_cast<Index>(trace.front().norms.size());
  Matrix t(static_cast<Index>(trace.size()), cols);
  for (Index i = 0; i < t.rows(); ++i) {
    const kae::TraceRecord& r = trace[static_cast<std::size_t>(i)];
    t(i, 0) = r.epoch;
    t(i, 1) = r.total;
    t(i, 2) = r.distortion;
    for (std::size_t l = 0; l < r.norms.size(); ++l) t(i, 3 + static_cast<Index>(l)) = r.norms[l];
  }
  kae::save_matrix(path, t);
}

void print_fit_summary(const std::vector<kae::TraceRecord>& trace) {
  const kae::TraceRecord& first = trace.front();
  const kae::TraceRecord& last = trace.back();
  std::cout << "initial: total=" << format_g(first.total)
            << " distortion=" << format_g(first.distortion) << "\n";
  std::cout << "epoch " << last.epoch << ": total=" << format_g(last.total)
            << " distortion=" << format_g(last.distortion) << "\n";
}

void run_fit(const FitArgs& a) {
  if (a.layers.empty()) throw std::runtime_error("--layers is required");
  if (a.data.empty() == a.gram.empty()) {
    throw std::runtime_error("pass exactly one of --data or --gram");
  }
  const std::vector<Index> dims = parse_dims(a.layers);

  kae::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.step = a.step;
  cfg.decay = a.decay ? kae::StepRule::inverse_t : kae::StepRule::constant;
  cfg.seed = a.seed;
  cfg.init_scale = a.init_scale;
  cfg.jitter = a.jitter;
  if (cfg.epochs < 0) throw std::runtime_error("--epochs must be non-negative");

  const std::string trace_path = a.trace.empty() ? default_trace_path(a.out) : a.trace;

  if (a.mode == "finite") {
    if (a.data.empty()) {
      throw std::runtime_error("finite mode trains on raw samples; pass --data (not --gram)");
    }
    const Matrix inputs = kae::load_matrix(a.data);
    if (dims.back() != inputs.cols()) {
      throw std::runtime_error("the last layer dimension (" + std::to_string(dims.back()) +
                               ") must match the data dimension (" + std::to_string(inputs.cols()) +
                               ") so the model can reconstruct its input");
    }
    const std::vector<double> lambdas = parse_lambdas(a.lambda, dims.size());
    const std::vector<KernelChoice> choices = parse_kernels(a.kernel, dims.size());
    const std::vector<kae::LayerSpec> layers =
        resolve_layers_finite(inputs, dims, choices, lambdas, cfg);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::cout << "layer " << l + 1 << ": dim=" << layers[l].dim << " kernel="
                << kernel_to_string(layers[l].kernel) << " lambda=" << format_g(layers[l].lambda)
                << "\n";
    }
    const kae::FiniteFit fit = kae::fit_finite(inputs, layers, cfg);
    kae::save_model(a.out, kae::to_model_file(fit.state));
    save_trace(trace_path, fit.trace);
    print_fit_summary(fit.trace);
  } else if (a.mode == "k2ae") {
    GramTable k_in;
    if (!a.gram.empty()) {
      k_in = kae::load_gram(a.gram, !a.no_validate);
    } else {
      const Matrix x = kae::load_matrix(a.data);
      k_in = GramTable(x * x.transpose(), false);  // linear Gram of the raw samples
      std::cout << "built the linear Gram of " << x.rows() << " samples from " << a.data << "\n";
    }
    const std::vector<double> lambdas = parse_lambdas(a.lambda, dims.size() + 1);
    const std::vector<KernelChoice> choices = parse_kernels(a.kernel, dims.size() + 1);
    const std::vector<double> inner_lambdas(lambdas.begin(), lambdas.end() - 1);
    auto [inner, last_kernel] = resolve_layers_k2ae(k_in, dims, choices, inner_lambdas, cfg);
    for (std::size_t l = 0; l < inner.size(); ++l) {
      std::cout << "layer " << l + 1 << ": dim=" << inner[l].dim << " kernel="
                << kernel_to_string(inner[l].kernel) << " lambda=" << format_g(inner[l].lambda)
                << "\n";
    }
    std::cout << "layer " << inner.size() + 1 << ": implicit, kernel="
              << kernel_to_string(last_kernel) << " lambda=" << format_g(lambdas.back()) << "\n";
    const kae::K2aeFit fit = kae::fit_k2ae(k_in, inner, last_kernel, lambdas.back(), cfg);
    kae::save_model(a.out, kae::to_model_file(fit.state));
    save_trace(trace_path, fit.trace);
    print_fit_summary(fit.trace);
  } else {
    throw std::runtime_error("unknown mode '" + a.mode + "' (expected finite or k2ae)");
  }
  std::cout << "model -> " << a.out << "\n";
  std::cout << "trace -> " << trace_path << "\n";
}

// Loads the test-side kernel rows/diagonal used by encode/test-distortion.
std::pair<Matrix, Vector> load_test_gram(const std::string& rows_path,
                                         const std::string& diag_path, Index n_train) {
  const Matrix k_test_train = kae::load_matrix(rows_path);
  const Vector k_test_diag = kae::load_vector(diag_path);
  if (k_test_train.cols() != n_train) {
    throw std::runtime_error("--gram-test has " + std::to_string(k_test_train.cols()) +
                             " columns but the model was trained on " + std::to_string(n_train) +
                             " samples");
  }
  if (k_test_diag.size() != k_test_train.rows()) {
    throw std::runtime_error("--gram-test-diag has " + std::to_string(k_test_diag.size()) +
                             " entries for " + std::to_string(k_test_train.rows()) +
                             " test rows");
  }
  return {k_test_train, k_test_diag};
}

void run_encode(const EncodeArgs& a) {
  const kae::ModelFile file = kae::load_model(a.model);
  Matrix codes;
  if (file.mode == "finite") {
    if (a.data.empty()) throw std::runtime_error("encoding with a finite model needs --data");
    const kae::ModelState state = kae::finite_state_from(file);
    codes = kae::encode(state, kae::load_matrix(a.data), a.layer);
  } else {
    if (a.gram_test.empty() || a.gram_test_diag.empty()) {
      throw std::runtime_error(
          "encoding with a kernelized model needs --gram-test and --gram-test-diag");
    }
    const kae::K2aeState state = kae::k2ae_state_from(file);
    const auto [k_test_train, k_test_diag] =
        load_test_gram(a.gram_test, a.gram_test_diag, state.k_in_diag.size());
    codes = kae::encode(state, k_test_train, k_test_diag, a.layer);
  }
  kae::save_matrix(a.out, codes);
  std::cout << "wrote " << codes.rows() << " x " << codes.cols() << " codes to " << a.out << "\n";
}

void run_reconstruct(const EncodeArgs& a) {
  const kae::ModelFile file = kae::load_model(a.model);
  if (file.mode != "finite") {
    throw std::runtime_error(
        "reconstruct needs a finite model; kernelized reconstructions live in the induced "
        "feature space (use test-distortion to measure their error)");
  }
  const kae::ModelState state = kae::finite_state_from(file);
  const Matrix recon =
      kae::encode(state, kae::load_matrix(a.data), static_cast<int>(file.layers.size()));
  kae::save_matrix(a.out, recon);
  std::cout << "wrote " << recon.rows() << " x " << recon.cols() << " reconstructions to "
            << a.out << "\n";
}

void run_test_distortion(const TestDistortionArgs& a) {
  const kae::ModelFile file = kae::load_model(a.model);
  if (file.mode != "k2ae") {
    throw std::runtime_error("test-distortion needs a kernelized (k2ae) model");
  }
  const kae::K2aeState state = kae::k2ae_state_from(file);
  const auto [k_test_train, k_test_diag] =
      load_test_gram(a.gram_test, a.gram_test_diag, state.k_in_diag.size());
  const Vector d = kae::test_distortion(state, k_test_train, k_test_diag);
  kae::save_vector(a.out, d);
  std::cout << "mean test distortion over " << d.size() << " points: " << format_g(d.mean())
            << "\n";
  std::cout << "per-point distortions -> " << a.out << "\n";
}

void run_kpca(const KpcaArgs& a) {
  if (a.data.empty() == a.gram.empty()) {
    throw std::runtime_error("pass exactly one of --data or --gram");
  }
  GramTable k;
  if (!a.gram.empty()) {
    k = kae::load_gram(a.gram, !a.no_validate);
  } else {
    const Matrix x = kae::load_matrix(a.data);
    KernelChoice choice = parse_kernel_one(a.kernel);
    if (choice.median) choice.kernel = ScalarKernel::gaussian(median_gamma_points(x));
    k = GramTable(kae::gram(choice.kernel, x, x), false);
    std::cout << "built the " << kernel_to_string(choice.kernel) << " Gram of " << x.rows()
              << " samples\n";
  }
  if (a.components <= 0) throw std::runtime_error("--components must be positive");
  const Matrix codes = kae::kpca(k, a.components, a.center);
  kae::save_matrix(a.out, codes);
  std::cout << "wrote " << codes.rows() << " x " << codes.cols() << " embedding to " << a.out
            << "\n";
  if (!a.eigvals.empty()) {
    GramTable centered = k;
    if (a.center) {
      Matrix c = k.matrix();
      const Vector row_mean = c.rowwise().mean();
      const double grand_mean = row_mean.mean();
      c.colwise() -= row_mean;
      c.rowwise() -= row_mean.transpose();
      c.array() += grand_mean;
      centered = GramTable(std::move(c), false);
    }
    kae::save_vector(a.eigvals, kae::spectral(centered).eigvals);
    std::cout << "eigenvalues -> " << a.eigvals << "\n";
  }
}

void run_gradcheck(const GradcheckArgs& a) {
  const std::vector<Index> dims = parse_dims(a.layers);

  kae::TrainConfig cfg;
  cfg.seed = a.seed;

  Matrix inputs;
  if (!a.data.empty()) {
    inputs = kae::load_matrix(a.data);
    if (dims.back() != inputs.cols()) {
      throw std::runtime_error("the last layer dimension must match the data dimension (" +
                               std::to_string(inputs.cols()) + ")");
    }
  } else {
    if (a.n < 2) throw std::runtime_error("--n must be at least 2");
    inputs.resize(a.n, dims.back());
    kae::Rng rng(a.seed ^ 0x9e3779b97f4a7c15ULL);  // distinct stream from the coefficient init
    for (Index i = 0; i < inputs.rows(); ++i) {
      for (Index j = 0; j < inputs.cols(); ++j) inputs(i, j) = rng.normal();
    }
  }

  const std::vector<double> lambdas = parse_lambdas(a.lambda, dims.size());
  const std::vector<KernelChoice> choices = parse_kernels(a.kernel, dims.size());
  kae::ModelState state;
  state.layers = resolve_layers_finite(inputs, dims, choices, lambdas, cfg);
  state.coeffs = kae::init_coefficients(cfg, inputs.rows(), dims);
  kae::forward_all(state, inputs);

  const kae::JacobianTable jt = kae::jacobians(state);
  const std::vector<Matrix> analytic = kae::full_gradient(state, jt);
  const std::vector<Matrix> fd = kae::fd_gradient(state, inputs, a.fd_step);

  double max_rel = 0.0;
  for (std::size_t l = 0; l < analytic.size(); ++l) {
    const Matrix diff = (analytic[l] - fd[l]).cwiseAbs();
    const Matrix scale = fd[l].cwiseAbs().cwiseMax(1e-8);
    max_rel = std::max(max_rel, (diff.array() / scale.array()).maxCoeff());
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "max relative error = %.3e (central differences, step %.1e)",
                max_rel, a.fd_step);
  std::cout << buf << "\n";
  if (max_rel > a.tol) {
    std::snprintf(buf, sizeof buf, "gradient check failed: %.3e exceeds the tolerance %.1e",
                  max_rel, a.tol);
    throw std::runtime_error(buf);
  }
}

void run_toy(const ToyArgs& a) {
  if (a.steps < 2) throw std::runtime_error("--steps must be at least 2");
  if (a.range <= 0.0) throw std::runtime_error("--range must be positive");
  Matrix grid(a.steps, a.steps);
  for (Index i = 0; i < a.steps; ++i) {
    const double psi = -a.range + 2.0 * a.range * static_cast<double>(i) / (a.steps - 1);
    for (Index j = 0; j < a.steps; ++j) {
      const double phi = -a.range + 2.0 * a.range * static_cast<double>(j) / (a.steps - 1);
      grid(i, j) = kae::toy_objective(phi, psi, a.lambda, a.mu);
    }
  }
  kae::save_matrix(a.out, grid);
  std::cout << "wrote the " << a.steps << " x " << a.steps << " grid of P(phi, psi) over [-"
            << format_g(a.range) << ", " << format_g(a.range) << "]^2 to " << a.out << "\n";
  std::cout << "row i = psi, column j = phi, both increasing; lambda=" << format_g(a.lambda)
            << " mu=" << format_g(a.mu) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "kae: kernel autoencoders.  Learns low-dimensional codes by composing\n"
      "kernel-expansion layers, in two flavors: `finite` trains on raw sample\n"
      "vectors, `k2ae` autoencodes any data presented as a Gram matrix by\n"
      "working in the kernel-induced feature space end to end."};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a seeded synthetic dataset");
  gen_cmd->add_option("--kind", gen.kind, "circles | moons | gaussians")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "points per cluster")->capture_default_str();
  gen_cmd->add_option("--clusters", gen.clusters, "cluster count (moons is always 2)")
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise std")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output CSV (one point per row)")->required();
  gen_cmd->add_option("--labels", gen.labels, "also write cluster labels to this CSV");

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Train an autoencoder and save the model");
  fit_cmd->add_option("--mode", fit.mode, "finite | k2ae")->capture_default_str();
  fit_cmd->add_option("--data", fit.data, "training samples CSV (k2ae: builds the linear Gram)");
  fit_cmd->add_option("--gram", fit.gram, "training Gram matrix CSV (k2ae mode)");
  fit_cmd->add_option("--layers", fit.layers,
                      "layer dimensions d1,d2,... (k2ae: the finite inner layers)")
      ->required();
  fit_cmd->add_option("--kernel", fit.kernel,
                      "per-layer kernels gaussian:<g>|gaussian:median|poly:<a>,<b>,<c>|linear, "
                      "';'-separated or one for all (k2ae: one extra for the implicit last layer)")
      ->capture_default_str();
  fit_cmd->add_option("--lambda", fit.lambda,
                      "per-layer ridge weights, ','-separated or one for all "
                      "(k2ae: one extra for the implicit last layer, must be > 0)")
      ->capture_default_str();
  fit_cmd->add_option("--epochs", fit.epochs, "gradient epochs")->capture_default_str();
  fit_cmd->add_option("--step", fit.step, "gradient step size")->capture_default_str();
  fit_cmd->add_flag("--decay", fit.decay, "divide the step by (1 + epoch)");
  fit_cmd->add_option("--seed", fit.seed, "coefficient init seed")->capture_default_str();
  fit_cmd->add_option("--init-scale", fit.init_scale, "initial coefficient scale")
      ->capture_default_str();
  fit_cmd->add_option("--jitter", fit.jitter,
                      "diagonal jitter if the ridge factorization fails (<= 0: automatic)");
  fit_cmd->add_option("--out", fit.out, "model output path (JSON)")->required();
  fit_cmd->add_option("--trace", fit.trace,
                      "objective trace CSV (default: alongside the model); rows are "
                      "epoch,total,distortion,per-layer norms");
  fit_cmd->add_flag("--no-validate", fit.no_validate, "skip Gram matrix validation");

  EncodeArgs enc;
  CLI::App* enc_cmd = app.add_subcommand("encode", "Map data to a layer's codes");
  enc_cmd->add_option("--model", enc.model, "trained model path")->required();
  enc_cmd->add_option("--data", enc.data, "samples CSV (finite models)");
  enc_cmd->add_option("--gram-test", enc.gram_test,
                      "kernel rows k(test, train) CSV (kernelized models)");
  enc_cmd->add_option("--gram-test-diag", enc.gram_test_diag,
                      "self inner products k(test, test) CSV, one per row");
  enc_cmd->add_option("--layer", enc.layer,
                      "1-based layer to read codes from (0 = narrowest layer)")
      ->capture_default_str();
  enc_cmd->add_option("--out", enc.out, "codes output CSV")->required();

  EncodeArgs rec;
  CLI::App* rec_cmd =
      app.add_subcommand("reconstruct", "Run a finite model end to end on samples");
  rec_cmd->add_option("--model", rec.model, "trained finite model path")->required();
  rec_cmd->add_option("--data", rec.data, "samples CSV")->required();
  rec_cmd->add_option("--out", rec.out, "reconstruction output CSV")->required();

  TestDistortionArgs td;
  CLI::App* td_cmd = app.add_subcommand(
      "test-distortion", "Reconstruction error of a kernelized model on new points");
  td_cmd->add_option("--model", td.model, "trained k2ae model path")->required();
  td_cmd->add_option("--gram-test", td.gram_test, "kernel rows k(test, train) CSV")->required();
  td_cmd->add_option("--gram-test-diag", td.gram_test_diag,
                     "self inner products k(test, test) CSV, one per row")
      ->required();
  td_cmd->add_option("--out", td.out, "per-point distortion output CSV")->required();

  KpcaArgs kp;
  CLI::App* kp_cmd = app.add_subcommand("kpca", "Kernel PCA embedding of a Gram matrix");
  kp_cmd->add_option("--data", kp.data, "samples CSV (builds the Gram with --kernel)");
  kp_cmd->add_option("--gram", kp.gram, "Gram matrix CSV");
  kp_cmd->add_option("--kernel", kp.kernel, "kernel for --data")->capture_default_str();
  kp_cmd->add_option("--components", kp.components, "number of principal components")->required();
  kp_cmd->add_flag("--center", kp.center, "double-center the Gram matrix first");
  kp_cmd->add_option("--out", kp.out, "embedding output CSV")->required();
  kp_cmd->add_option("--eigvals", kp.eigvals, "also write the full eigenvalue spectrum here");
  kp_cmd->add_flag("--no-validate", kp.no_validate, "skip Gram matrix validation");

  GradcheckArgs gc;
  CLI::App* gc_cmd = app.add_subcommand(
      "gradcheck", "Compare analytic gradients against central finite differences");
  gc_cmd->add_option("--data", gc.data, "samples CSV (default: seeded random normals)");
  gc_cmd->add_option("--layers", gc.layers, "layer dimensions")->capture_default_str();
  gc_cmd->add_option("--kernel", gc.kernel, "per-layer kernels")->capture_default_str();
  gc_cmd->add_option("--lambda", gc.lambda, "per-layer ridge weights")->capture_default_str();
  gc_cmd->add_option("--n", gc.n, "random sample count when --data is absent")
      ->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed, "RNG seed")->capture_default_str();
  gc_cmd->add_option("--fd-step", gc.fd_step, "finite-difference step")->capture_default_str();
  gc_cmd->add_option("--tol", gc.tol, "fail above this max relative error")
      ->capture_default_str();

  ToyArgs toy;
  CLI::App* toy_cmd = app.add_subcommand(
      "toy", "Emit the non-convex two-layer toy objective P(phi, psi) as a heatmap grid");
  toy_cmd->add_option("--lambda", toy.lambda, "weight of phi^2")->capture_default_str();
  toy_cmd->add_option("--mu", toy.mu, "weight of psi^2")->capture_default_str();
  toy_cmd->add_option("--range", toy.range, "grid spans [-range, range]^2")
      ->capture_default_str();
  toy_cmd->add_option("--steps", toy.steps, "grid points per axis")->capture_default_str();
  toy_cmd->add_option("--out", toy.out, "grid output CSV")->required();

  gen_cmd->callback([&] { run_gen_data(gen); });
  fit_cmd->callback([&] { run_fit(fit); });
  enc_cmd->callback([&] { run_encode(enc); });
  rec_cmd->callback([&] { run_reconstruct(rec); });
  td_cmd->callback([&] { run_test_distortion(td); });
  kp_cmd->callback([&] { run_kpca(kp); });
  gc_cmd->callback([&] { run_gradcheck(gc); });
  toy_cmd->callback([&] { run_toy(toy); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
