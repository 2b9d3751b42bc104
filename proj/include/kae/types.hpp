#ifndef KAE_TYPES_HPP
#define KAE_TYPES_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace kae {

/// Dense double matrix, row-major so that sample i is the contiguous range
/// [data() + i*cols(), data() + (i+1)*cols()).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline std::span<const double> row_span(const Matrix& m, Index i) {
  return {m.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(m.cols()),
          static_cast<std::size_t>(m.cols())};
}

inline std::span<double> row_span(Matrix& m, Index i) {
  return {m.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(m.cols()),
          static_cast<std::size_t>(m.cols())};
}

}  // namespace kae

#endif  // KAE_TYPES_HPP
