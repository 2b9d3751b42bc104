#ifndef KAE_IO_HPP
#define KAE_IO_HPP

#include <string>
#include <vector>

#include "kae/kernels.hpp"
#include "kae/layers.hpp"
#include "kae/trainer.hpp"
#include "kae/types.hpp"

namespace kae {

/// CSV without header, one sample per row, 17-significant-digit floats (so a
/// save/load round trip is bitwise exact).  Writes go to a temporary file
/// that is renamed into place only after a complete write.
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

/// Column vector as a one-column CSV; loading accepts a single row too.
void save_vector(const std::string& path, const Vector& v);
Vector load_vector(const std::string& path);

/// Loads a square CSV as a Gram table (validation per GramTable unless
/// disabled).
GramTable load_gram(const std::string& path, bool validate = true);

/// In-memory image of a persisted model.  `layers` covers the explicit layers
/// only; a kernelized model's implicit last layer is carried by `last_kernel`
/// and `lambda_last` (and serialized as an extra layer entry flagged
/// "implicit").  `supports` are the per-layer support point sets needed to
/// evaluate on new data: X^(0)..X^(L-1) for finite mode, X^(1)..X^(L-1) for
/// k2ae.
struct ModelFile {
  int version = 1;
  std::string mode;  // "finite" | "k2ae"
  std::vector<LayerSpec> layers;
  double lambda_last = 0.0;      // k2ae: ridge weight of the implicit layer
  ScalarKernel last_kernel;      // k2ae: kernel of the implicit layer
  std::vector<Matrix> coeffs;    // explicit layers only
  std::vector<Matrix> supports;  // see above
  Vector k_in_diag;              // k2ae
  Matrix n_last, w_inv;          // k2ae
};

ModelFile to_model_file(const ModelState& state);
ModelFile to_model_file(const K2aeState& state);

/// Rebuilds evaluation-ready states (enough caches for encode / reconstruct /
/// test_distortion; training caches like Gram matrices are not persisted).
ModelState finite_state_from(const ModelFile& file);
K2aeState k2ae_state_from(const ModelFile& file);

/// Versioned JSON container; unknown versions, malformed or truncated files,
/// and wrong-mode access all fail with single-line errors.
void save_model(const std::string& path, const ModelFile& file);
ModelFile load_model(const std::string& path);

}  // namespace kae

#endif  // KAE_IO_HPP
