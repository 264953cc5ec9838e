#pragma once

// Batched evaluation of a composed model over a fixed point set, with the
// parameter gradient of any linear functional of the output jets.
//
// ASPINN evaluates its single backbone once over the original points and the
// (deduplicated) projected points. GKPINN runs 1 + N backbones over the
// original points and combines them with the product rule.

#include <span>
#include <vector>

#include "spinn/models/model.hpp"
#include "spinn/networks/batched.hpp"

namespace spinn::models {

class BatchedModel {
 public:
  explicit BatchedModel(Model model);

  const Model& model() const { return model_; }

  /// Fixes the evaluation points. coords: input_dim x layout.points.
  void prepare(const networks::JetLayout& layout, simd::ConstMatrixView coords);
  const networks::JetLayout& layout() const { return layout_; }
  /// Points the backbone actually sees (original plus projected).
  std::size_t backbone_points() const { return net_layout_.points; }

  void forward(std::span<const double> params);
  /// 1 x layout.cols in the layout's column order.
  simd::ConstMatrixView output() const { return out_.view(); }
  double value(std::size_t p) const { return out_.row(0)[p]; }
  double first(std::size_t d, std::size_t p) const { return out_.row(0)[layout_.g_offset[d] + p]; }
  double second(std::size_t d, std::size_t p) const { return out_.row(0)[layout_.h_offset[d] + p]; }

  /// Adds d(sum adjoint * output)/d(params) to grad. Follows forward().
  void backward(std::span<const double> params, std::span<const double> adjoint,
                std::span<double> grad);

 private:
  void prepare_aspinn(simd::ConstMatrixView coords);
  void forward_aspinn();
  void forward_gkpinn();
  void backward_aspinn(std::span<const double> params, std::span<const double> adjoint,
                       std::span<double> grad);
  void backward_gkpinn(std::span<const double> params, std::span<const double> adjoint,
                       std::span<double> grad);

  Model model_;
  networks::JetLayout layout_;
  networks::JetLayout net_layout_;
  networks::Matrix net_coords_;
  std::vector<networks::BatchedNetwork> nets_;
  // Per prior, per original point.
  std::vector<std::vector<double>> e_, e_n_, e_nn_;
  std::vector<std::vector<TraceValue>> trace_;
  std::vector<std::vector<std::size_t>> proj_;  // backbone point index of the projection
  std::vector<std::size_t> orig_;               // backbone point index of each original point
  networks::Matrix out_;
  std::vector<networks::Matrix> adj_;
  bool prepared_ = false;
  bool forwarded_ = false;
};

/// Model values at many points (no derivatives), evaluated in chunks.
std::vector<double> predict_batch(const Model& model, std::span<const double> params,
                                  simd::ConstMatrixView coords);

}  // namespace spinn::models
