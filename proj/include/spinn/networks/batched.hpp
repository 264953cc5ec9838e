#pragma once

// Batched second-order forward evaluation with a hand-written reverse sweep.
//
// A batch is a matrix whose rows are neurons and whose columns are jet
// channels: one value column per point, then for each input dimension d a
// block of first-derivative columns and (optionally) a block of
// second-derivative columns for the points [0, deriv_points[d]). Dense layers
// become one GEMM over all columns; the bias touches value columns only.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "spinn/autodiff/jet.hpp"
#include "spinn/networks/config.hpp"
#include "spinn/networks/forward.hpp"
#include "spinn/simd/kernels.hpp"

namespace spinn::networks {

using autodiff::kMaxDim;

struct JetLayout {
  std::size_t dims = 0;
  std::size_t points = 0;
  std::array<std::size_t, kMaxDim> deriv_points{};
  std::array<int, kMaxDim> order{};  // 0, 1 or 2

  // Filled by finalize().
  std::array<std::size_t, kMaxDim> g_offset{};
  std::array<std::size_t, kMaxDim> h_offset{};
  std::size_t cols = 0;

  void finalize();
  bool has_g(std::size_t d) const { return order[d] >= 1 && deriv_points[d] > 0; }
  bool has_h(std::size_t d) const { return order[d] >= 2 && deriv_points[d] > 0; }
};

/// Owning row-major matrix.
class Matrix {
 public:
  void resize(std::size_t rows, std::size_t cols);
  void fill(double v);
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }
  simd::MatrixView view() { return {data_.data(), rows_, cols_, cols_}; }
  simd::ConstMatrixView view() const { return {data_.data(), rows_, cols_, cols_}; }

 private:
  std::vector<double> data_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

void transpose(simd::ConstMatrixView src, Matrix& dst);

class BatchedNetwork {
 public:
  explicit BatchedNetwork(BackboneConfig cfg);

  const BackboneConfig& config() const { return cfg_; }

  /// coords: dims x points (row-major). Output: output_dim x layout.cols.
  void forward(std::span<const double> params, const JetLayout& layout,
               simd::ConstMatrixView coords);
  simd::ConstMatrixView output() const;

  /// Adds d(loss)/d(params) to `grad` given d(loss)/d(output). Must follow
  /// forward() with the same params.
  void backward(std::span<const double> params, simd::ConstMatrixView output_adjoint,
                std::span<double> grad);

 private:
  struct Derivs {
    Matrix d1, d2, d3;  // rows x points
  };

  void mlp_forward(std::span<const double> params);
  void mlp_backward(std::span<const double> params, simd::ConstMatrixView out_adj,
                    std::span<double> grad);
  void kan_forward(std::span<const double> params);
  void kan_backward(std::span<const double> params, simd::ConstMatrixView out_adj,
                    std::span<double> grad);

  BackboneConfig cfg_;
  JetLayout layout_;
  std::vector<Matrix> acts_;     // layer inputs (acts_[0] = coordinate jets)
  std::vector<Matrix> pre_;      // MLP: pre-activations; KAN: tanh-normalized inputs
  std::vector<Matrix> basis_;    // KAN only
  std::vector<Derivs> act_d_;    // MLP activation / KAN tanh derivatives
  std::vector<Derivs> basis_d_;  // KAN Chebyshev derivatives
  Matrix out_;
  // Scratch for the reverse sweep.
  Matrix adj_a_, adj_b_, trans_, wt_, tmp_;
  std::vector<double> row_;
};

}  // namespace spinn::networks
