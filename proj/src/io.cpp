#include "kae/io.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

namespace kae {

namespace {

using nlohmann::json;

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw std::runtime_error("failed while writing '" + tmp + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move '" + tmp + "' into place at '" + path + "'");
  }
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_value(std::string_view field, Index row, Index col) {
  std::size_t lo = 0, hi = field.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(field[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(field[hi - 1]))) --hi;
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data() + lo, field.data() + hi, v);
  if (ec != std::errc() || end != field.data() + hi || lo == hi) {
    throw std::runtime_error("parse error at row " + std::to_string(row + 1) + ", column " +
                             std::to_string(col + 1) + ": '" + std::string(field) +
                             "' is not a number");
  }
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array()) throw std::runtime_error("model field '" + what + "' is not a matrix");
  const Index r = static_cast<Index>(rows.size());
  if (r == 0) return Matrix(0, 0);
  if (!rows[0].is_array()) throw std::runtime_error("model field '" + what + "' is not a matrix");
  const Index c = static_cast<Index>(rows[0].size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (!rows[i].is_array() || static_cast<Index>(rows[i].size()) != c) {
      throw std::runtime_error("model field '" + what + "' has ragged rows");
    }
    for (Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array()) throw std::runtime_error("model field '" + what + "' is not a vector");
  Vector v(static_cast<Index>(arr.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

const char* kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::polynomial: return "polynomial";
    case KernelKind::linear: return "linear";
  }
  throw std::invalid_argument("unknown kernel kind");
}

KernelKind kernel_kind_from(const std::string& name) {
  if (name == "gaussian") return KernelKind::gaussian;
  if (name == "polynomial") return KernelKind::polynomial;
  if (name == "linear") return KernelKind::linear;
  throw std::runtime_error("model file names unknown kernel kind '" + name + "'");
}

json kernel_to_json(const ScalarKernel& k) {
  json j;
  j["kind"] = kernel_kind_name(k.kind);
  switch (k.kind) {
    case KernelKind::gaussian:
      j["gamma"] = k.gamma;
      break;
    case KernelKind::polynomial:
      j["a"] = k.a;
      j["b"] = k.b;
      j["c"] = k.c;
      break;
    case KernelKind::linear:
      break;
  }
  return j;
}

ScalarKernel kernel_from_json(const json& j) {
  const KernelKind kind = kernel_kind_from(j.at("kind").get<std::string>());
  switch (kind) {
    case KernelKind::gaussian:
      return ScalarKernel::gaussian(j.at("gamma").get<double>());
    case KernelKind::polynomial:
      return ScalarKernel::polynomial(j.at("a").get<double>(), j.at("b").get<double>(),
                                      j.at("c").get<int>());
    case KernelKind::linear:
      return ScalarKernel::linear();
  }
  throw std::runtime_error("unknown kernel kind");
}

}  // namespace

void save_matrix(const std::string& path, const Matrix& m) {
  std::string content;
  content.reserve(static_cast<std::size_t>(m.size()) * 20);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) content += ',';
      content += format_value(m(i, j));
    }
    content += '\n';
  }
  write_file_atomic(path, content);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    std::vector<double> row;
    std::string_view rest = line;
    if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);
    Index col = 0;
    while (true) {
      const std::size_t comma = rest.find(',');
      const std::string_view field = rest.substr(0, comma);
      row.push_back(parse_value(field, lineno, col));
      ++col;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error("row " + std::to_string(lineno + 1) + " of '" + path + "' has " +
                               std::to_string(row.size()) + " fields, expected " +
                               std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
    ++lineno;
  }
  if (rows.empty()) throw std::runtime_error("'" + path + "' contains no data");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

void save_vector(const std::string& path, const Vector& v) {
  Matrix m(v.size(), 1);
  m.col(0) = v;
  save_matrix(path, m);
}

Vector load_vector(const std::string& path) {
  const Matrix m = load_matrix(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw std::runtime_error("'" + path + "' is not a vector (got " + std::to_string(m.rows()) +
                           "x" + std::to_string(m.cols()) + ")");
}

GramTable load_gram(const std::string& path, bool validate) {
  Matrix m = load_matrix(path);
  if (m.rows() != m.cols()) {
    throw std::runtime_error("gram file '" + path + "' must be square, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  return GramTable(std::move(m), validate);
}

ModelFile to_model_file(const ModelState& state) {
  state.validate();
  if (state.induced_input) {
    throw std::logic_error("to_model_file: kernelized states carry their own conversion");
  }
  if (!state.fresh || state.reps.empty()) {
    throw std::logic_error("to_model_file: refresh the state before saving");
  }
  ModelFile file;
  file.mode = "finite";
  file.layers = state.layers;
  file.coeffs = state.coeffs;
  for (int l = 0; l < state.depth(); ++l) {
    file.supports.push_back(state.reps[static_cast<std::size_t>(l)]);
  }
  return file;
}

ModelFile to_model_file(const K2aeState& state) {
  state.inner.validate();
  if (!state.inner.fresh || !state.synced) {
    throw std::logic_error("to_model_file: refresh the state before saving");
  }
  ModelFile file;
  file.mode = "k2ae";
  file.layers = state.inner.layers;
  file.last_kernel = state.last_kernel;
  file.lambda_last = state.lambda_last;
  file.coeffs = state.inner.coeffs;
  for (int l = 1; l <= state.inner.depth(); ++l) {
    file.supports.push_back(state.inner.reps[static_cast<std::size_t>(l)]);
  }
  file.k_in_diag = state.k_in_diag;
  file.n_last = state.n_last;
  file.w_inv = state.w_inv;
  return file;
}

ModelState finite_state_from(const ModelFile& file) {
  if (file.mode != "finite") {
    throw std::runtime_error("model file is '" + file.mode + "' mode, expected a finite model");
  }
  ModelState state;
  state.layers = file.layers;
  state.coeffs = file.coeffs;
  state.validate();
  if (file.supports.size() != file.layers.size()) {
    throw std::runtime_error("model file support count does not match its layer count");
  }
  state.reps = file.supports;         // X^(0)..X^(L-1)
  state.reps.emplace_back();          // X^(L) is not persisted
  state.grams.assign(file.layers.size(), Matrix());
  state.fresh = true;                 // evaluation-ready (supports present)
  return state;
}

K2aeState k2ae_state_from(const ModelFile& file) {
  if (file.mode != "k2ae") {
    throw std::runtime_error("model file is '" + file.mode + "' mode, expected a kernelized model");
  }
  K2aeState state;
  state.inner.layers = file.layers;
  state.inner.coeffs = file.coeffs;
  state.inner.induced_input = true;
  state.inner.validate();
  if (file.supports.size() != file.layers.size()) {
    throw std::runtime_error("model file support count does not match its layer count");
  }
  state.inner.reps.emplace_back();    // X^(0) lives in the implicit space
  for (const Matrix& s : file.supports) state.inner.reps.push_back(s);
  state.inner.grams.assign(file.layers.size(), Matrix());
  state.inner.fresh = true;
  state.last_kernel = file.last_kernel;
  state.lambda_last = file.lambda_last;
  state.k_in_diag = file.k_in_diag;
  state.n_last = file.n_last;
  state.w_inv = file.w_inv;
  state.synced = true;
  return state;
}

void save_model(const std::string& path, const ModelFile& file) {
  json root;
  root["format"] = "kae-model";
  root["version"] = file.version;
  root["mode"] = file.mode;
  json layers = json::array();
  for (const LayerSpec& l : file.layers) {
    json jl;
    jl["kernel"] = kernel_to_json(l.kernel);
    jl["dim"] = l.dim;
    jl["lambda"] = l.lambda;
    jl["a_diag"] = vector_to_json(l.a_diag);
    layers.push_back(std::move(jl));
  }
  if (file.mode == "k2ae") {
    json jl;
    jl["kernel"] = kernel_to_json(file.last_kernel);
    jl["lambda"] = file.lambda_last;
    jl["implicit"] = true;
    layers.push_back(std::move(jl));
  }
  root["layers"] = std::move(layers);
  json coeffs = json::array();
  for (const Matrix& m : file.coeffs) coeffs.push_back(matrix_to_json(m));
  root["coeffs"] = std::move(coeffs);
  json supports = json::array();
  for (const Matrix& m : file.supports) supports.push_back(matrix_to_json(m));
  root["supports"] = std::move(supports);
  if (file.mode == "k2ae") {
    root["k_in_diag"] = vector_to_json(file.k_in_diag);
    root["n_last"] = matrix_to_json(file.n_last);
    root["w_inv"] = matrix_to_json(file.w_inv);
  }
  write_file_atomic(path, root.dump(1) + "\n");
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw std::runtime_error("model file '" + path + "' is corrupted: " + e.what());
  }
  try {
    if (!root.is_object() || root.value("format", "") != "kae-model") {
      throw std::runtime_error("'" + path + "' is not a model file");
    }
    ModelFile file;
    file.version = root.at("version").get<int>();
    if (file.version != 1) {
      throw std::runtime_error("unsupported model version " + std::to_string(file.version));
    }
    file.mode = root.at("mode").get<std::string>();
    if (file.mode != "finite" && file.mode != "k2ae") {
      throw std::runtime_error("unknown model mode '" + file.mode + "'");
    }
    for (const json& jl : root.at("layers")) {
      if (jl.value("implicit", false)) {
        file.last_kernel = kernel_from_json(jl.at("kernel"));
        file.lambda_last = jl.at("lambda").get<double>();
        continue;
      }
      LayerSpec spec;
      spec.kernel = kernel_from_json(jl.at("kernel"));
      spec.dim = jl.at("dim").get<Index>();
      spec.lambda = jl.at("lambda").get<double>();
      spec.a_diag = vector_from_json(jl.at("a_diag"), "a_diag");
      spec.validate();
      file.layers.push_back(std::move(spec));
    }
    for (const json& jm : root.at("coeffs")) {
      file.coeffs.push_back(matrix_from_json(jm, "coeffs"));
    }
    for (const json& jm : root.at("supports")) {
      file.supports.push_back(matrix_from_json(jm, "supports"));
    }
    if (file.mode == "k2ae") {
      file.k_in_diag = vector_from_json(root.at("k_in_diag"), "k_in_diag");
      file.n_last = matrix_from_json(root.at("n_last"), "n_last");
      file.w_inv = matrix_from_json(root.at("w_inv"), "w_inv");
    }
    return file;
  } catch (const json::exception& e) {
    throw std::runtime_error("model file '" + path + "' is incomplete: " + e.what());
  }
}

}  // namespace kae
