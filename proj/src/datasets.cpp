#include "kae/datasets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kae/rng.hpp"

namespace kae {

Dataset gen_dataset(const SyntheticSpec& spec) {
  if (spec.n_per_cluster < 1) throw std::invalid_argument("gen_dataset: n_per_cluster must be >= 1");
  if (spec.noise < 0.0) throw std::invalid_argument("gen_dataset: noise must be non-negative");
  const int clusters = spec.kind == DatasetKind::moons ? 2 : spec.n_clusters;
  if (clusters < 1) throw std::invalid_argument("gen_dataset: n_clusters must be >= 1");
  if (spec.kind == DatasetKind::moons && spec.n_clusters != 2) {
    throw std::invalid_argument("gen_dataset: the moons fixture always has 2 clusters");
  }

  Rng rng(spec.seed);
  const Index m = static_cast<Index>(clusters) * spec.n_per_cluster;
  Dataset ds;
  ds.labels.reserve(static_cast<std::size_t>(m));

  switch (spec.kind) {
    case DatasetKind::circles: {
      ds.points.resize(m, 2);
      Index row = 0;
      for (int c = 0; c < clusters; ++c) {
        const double radius = static_cast<double>(c + 1);
        for (int j = 0; j < spec.n_per_cluster; ++j, ++row) {
          const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
          ds.points(row, 0) = radius * std::cos(theta) + spec.noise * rng.normal();
          ds.points(row, 1) = radius * std::sin(theta) + spec.noise * rng.normal();
          ds.labels.push_back(c);
        }
      }
      return ds;
    }
    case DatasetKind::moons: {
      ds.points.resize(m, 2);
      Index row = 0;
      for (int c = 0; c < 2; ++c) {
        for (int j = 0; j < spec.n_per_cluster; ++j, ++row) {
          const double t = rng.uniform(0.0, std::numbers::pi);
          if (c == 0) {
            ds.points(row, 0) = std::cos(t);
            ds.points(row, 1) = std::sin(t);
          } else {
            ds.points(row, 0) = 1.0 - std::cos(t);
            ds.points(row, 1) = 0.5 - std::sin(t);
          }
          ds.points(row, 0) += spec.noise * rng.normal();
          ds.points(row, 1) += spec.noise * rng.normal();
          ds.labels.push_back(c);
        }
      }
      return ds;
    }
    case DatasetKind::gaussians: {
      ds.points.resize(m, 1);
      Index row = 0;
      for (int c = 0; c < clusters; ++c) {
        const double mean = 2.0 * static_cast<double>(c);
        for (int j = 0; j < spec.n_per_cluster; ++j, ++row) {
          ds.points(row, 0) = mean + spec.noise * rng.normal();
          ds.labels.push_back(c);
        }
      }
      return ds;
    }
  }
  throw std::invalid_argument("gen_dataset: unknown dataset kind");
}

double toy_objective(double phi, double psi, double lambda, double mu) {
  const double fit = 1.0 - phi * phi * psi;
  return fit * fit + lambda * phi * phi + mu * psi * psi;
}

}  // namespace kae
