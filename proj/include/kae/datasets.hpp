#ifndef KAE_DATASETS_HPP
#define KAE_DATASETS_HPP

#include <cstdint>
#include <vector>

#include "kae/types.hpp"

namespace kae {

enum class DatasetKind { circles, moons, gaussians };

struct SyntheticSpec {
  DatasetKind kind = DatasetKind::circles;
  int n_per_cluster = 0;
  int n_clusters = 1;  // moons is always 2
  double noise = 0.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix points;            // one sample per row
  std::vector<int> labels;  // cluster of each row
};

/// Seeded synthetic fixtures:
///   circles  — n_clusters concentric circles of radii 1, 2, ... with
///              isotropic Gaussian noise of std `noise` (2-D points);
///   moons    — two interleaved half-circles plus noise (2-D points);
///   gaussians— n_clusters 1-D Gaussian blobs with means 0, 2, 4, ... and
///              std `noise`.
Dataset gen_dataset(const SyntheticSpec& spec);

/// P(phi, psi) = (1 - phi^2 psi)^2 + lambda phi^2 + mu psi^2, the closed-form
/// objective of the one-point two-layer toy problem.
double toy_objective(double phi, double psi, double lambda, double mu);

}  // namespace kae

#endif  // KAE_DATASETS_HPP
