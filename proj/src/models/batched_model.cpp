#include "spinn/models/batched_model.hpp"

#include <algorithm>
#include <array>
#include <map>

namespace spinn::models {

using networks::JetLayout;
using networks::Matrix;

BatchedModel::BatchedModel(Model model) : model_(std::move(model)) {
  for (std::size_t k = 0; k < model_.network_count(); ++k) nets_.emplace_back(model_.backbone());
}

void BatchedModel::prepare(const JetLayout& layout, simd::ConstMatrixView coords) {
  if (layout.dims != model_.input_dim()) throw ConfigError("layout dimension does not match model");
  if (coords.rows != layout.dims || coords.cols != layout.points) {
    throw ConfigError("coordinate matrix shape does not match layout");
  }
  layout_ = layout;
  layout_.finalize();
  const std::size_t np = model_.priors().size();
  e_.assign(np, {});
  e_n_.assign(np, {});
  e_nn_.assign(np, {});
  trace_.assign(np, {});
  std::vector<double> x(layout_.dims);
  for (std::size_t i = 0; i < np; ++i) {
    const AsymptoticPrior& prior = model_.priors()[i];
    e_[i].resize(layout_.points);
    e_n_[i].resize(layout_.points);
    e_nn_[i].resize(layout_.points);
    trace_[i].resize(layout_.points);
    for (std::size_t p = 0; p < layout_.points; ++p) {
      for (std::size_t d = 0; d < layout_.dims; ++d) x[d] = coords.row(d)[p];
      const Jet<double> e = exp_layer_jet(x, prior, model_.epsilon());
      e_[i][p] = e.v;
      e_n_[i][p] = e.g[prior.normal_dim];
      e_nn_[i][p] = e.h[prior.normal_dim];
      trace_[i][p] = prior.trace_at(x);
    }
  }

  if (model_.kind() == ModelKind::kAspinn && np > 0) {
    prepare_aspinn(coords);
  } else {
    net_layout_ = layout_;
    net_coords_.resize(layout_.dims, layout_.points);
    for (std::size_t d = 0; d < layout_.dims; ++d) {
      std::copy_n(coords.row(d), layout_.points, net_coords_.row(d));
    }
  }
  out_.resize(1, layout_.cols);
  prepared_ = true;
  forwarded_ = false;
}

void BatchedModel::prepare_aspinn(simd::ConstMatrixView coords) {
  const JetLayout& L = layout_;
  const auto& priors = model_.priors();
  const std::size_t normal = priors.front().normal_dim;
  const bool has_tangent = L.dims > 1;
  const std::size_t tangent = has_tangent ? 1 - normal : 0;
  const std::size_t n_t = has_tangent && L.has_g(tangent) ? L.deriv_points[tangent] : 0;
  std::size_t n0 = 0;
  for (std::size_t d = 0; d < L.dims; ++d) {
    if (L.has_g(d)) n0 = std::max(n0, L.deriv_points[d]);
  }

  // Projected points: those of derivative-carrying originals first, so that
  // they fall inside the tangential derivative prefix.
  std::vector<std::array<double, 2>> with_derivs, values_only;
  proj_.assign(priors.size(), std::vector<std::size_t>(L.points));
  std::vector<std::vector<std::pair<bool, std::size_t>>> slot(
      priors.size(), std::vector<std::pair<bool, std::size_t>>(L.points));
  auto key_of = [&](std::size_t i, std::size_t p) {
    std::array<double, 2> k{0.0, 0.0};
    for (std::size_t d = 0; d < L.dims; ++d) k[d] = coords.row(d)[p];
    k[priors[i].normal_dim] = priors[i].position;
    return k;
  };
  std::map<std::array<double, 2>, std::pair<bool, std::size_t>> seen;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t p = 0; p < L.points; ++p) {
      const bool deriv = p < n_t;
      if (deriv != (pass == 0)) continue;
      for (std::size_t i = 0; i < priors.size(); ++i) {
        const auto k = key_of(i, p);
        auto it = seen.find(k);
        if (it == seen.end()) {
          auto& list = deriv ? with_derivs : values_only;
          it = seen.emplace(k, std::pair{deriv, list.size()}).first;
          list.push_back(k);
        }
        slot[i][p] = it->second;
      }
    }
  }

  const std::size_t na = with_derivs.size();
  const std::size_t nb = values_only.size();
  net_layout_ = L;
  net_layout_.points = L.points + na + nb;
  if (n_t > 0) net_layout_.deriv_points[tangent] = n0 + na;
  net_layout_.finalize();

  orig_.resize(L.points);
  for (std::size_t p = 0; p < L.points; ++p) orig_[p] = p < n0 ? p : n0 + na + (p - n0);
  for (std::size_t i = 0; i < priors.size(); ++i) {
    for (std::size_t p = 0; p < L.points; ++p) {
      const auto [deriv, j] = slot[i][p];
      proj_[i][p] = deriv ? n0 + j : L.points + na + j;
    }
  }

  net_coords_.resize(L.dims, net_layout_.points);
  for (std::size_t d = 0; d < L.dims; ++d) {
    double* row = net_coords_.row(d);
    for (std::size_t p = 0; p < L.points; ++p) row[orig_[p]] = coords.row(d)[p];
    for (std::size_t j = 0; j < na; ++j) row[n0 + j] = with_derivs[j][d];
    for (std::size_t j = 0; j < nb; ++j) row[L.points + na + j] = values_only[j][d];
  }
}

void BatchedModel::forward(std::span<const double> params) {
  if (!prepared_) throw ConfigError("BatchedModel::prepare must be called before forward");
  model_.check_params(params.size());
  const std::size_t bs = model_.backbone_size();
  for (std::size_t k = 0; k < nets_.size(); ++k) {
    nets_[k].forward(params.subspan(k * bs, bs), net_layout_, net_coords_.view());
  }
  if (model_.kind() == ModelKind::kAspinn && !model_.priors().empty()) {
    forward_aspinn();
  } else {
    forward_gkpinn();
  }
  forwarded_ = true;
}

void BatchedModel::forward_gkpinn() {
  const JetLayout& L = layout_;
  double* u = out_.row(0);
  const double* n0 = nets_[0].output().data;
  std::copy_n(n0, L.cols, u);
  const std::size_t normal = model_.priors().empty() ? 0 : model_.priors().front().normal_dim;
  for (std::size_t i = 0; i < model_.priors().size(); ++i) {
    const double* ni = nets_[i + 1].output().data;
    const double* e = e_[i].data();
    const double* en = e_n_[i].data();
    const double* enn = e_nn_[i].data();
    for (std::size_t p = 0; p < L.points; ++p) u[p] += ni[p] * e[p];
    for (std::size_t d = 0; d < L.dims; ++d) {
      const std::size_t n = L.deriv_points[d];
      const std::size_t go = L.g_offset[d], ho = L.h_offset[d];
      if (d == normal) {
        if (L.has_g(d)) {
          for (std::size_t p = 0; p < n; ++p) u[go + p] += ni[go + p] * e[p] + ni[p] * en[p];
        }
        if (L.has_h(d)) {
          for (std::size_t p = 0; p < n; ++p) {
            u[ho + p] += ni[ho + p] * e[p] + 2.0 * ni[go + p] * en[p] + ni[p] * enn[p];
          }
        }
      } else {
        if (L.has_g(d)) {
          for (std::size_t p = 0; p < n; ++p) u[go + p] += ni[go + p] * e[p];
        }
        if (L.has_h(d)) {
          for (std::size_t p = 0; p < n; ++p) u[ho + p] += ni[ho + p] * e[p];
        }
      }
    }
  }
}

void BatchedModel::forward_aspinn() {
  const JetLayout& L = layout_;
  const JetLayout& X = net_layout_;
  const double* net = nets_[0].output().data;
  double* u = out_.row(0);
  const std::size_t normal = model_.priors().front().normal_dim;

  for (std::size_t p = 0; p < L.points; ++p) u[p] = net[orig_[p]];
  for (std::size_t d = 0; d < L.dims; ++d) {
    for (std::size_t p = 0; p < L.deriv_points[d]; ++p) {
      if (L.has_g(d)) u[L.g_offset[d] + p] = net[X.g_offset[d] + p];
      if (L.has_h(d)) u[L.h_offset[d] + p] = net[X.h_offset[d] + p];
    }
  }
  for (std::size_t i = 0; i < model_.priors().size(); ++i) {
    const auto& q = proj_[i];
    const auto& g = trace_[i];
    const double* e = e_[i].data();
    for (std::size_t p = 0; p < L.points; ++p) u[p] += (g[p].v - net[q[p]]) * e[p];
    for (std::size_t d = 0; d < L.dims; ++d) {
      const std::size_t n = L.deriv_points[d];
      const std::size_t go = L.g_offset[d], ho = L.h_offset[d];
      if (d == normal) {
        if (L.has_g(d)) {
          for (std::size_t p = 0; p < n; ++p) u[go + p] += (g[p].v - net[q[p]]) * e_n_[i][p];
        }
        if (L.has_h(d)) {
          for (std::size_t p = 0; p < n; ++p) u[ho + p] += (g[p].v - net[q[p]]) * e_nn_[i][p];
        }
      } else {
        if (L.has_g(d)) {
          for (std::size_t p = 0; p < n; ++p) {
            u[go + p] += (g[p].d1 - net[X.g_offset[d] + q[p]]) * e[p];
          }
        }
        if (L.has_h(d)) {
          for (std::size_t p = 0; p < n; ++p) {
            u[ho + p] += (g[p].d2 - net[X.h_offset[d] + q[p]]) * e[p];
          }
        }
      }
    }
  }
}

void BatchedModel::backward(std::span<const double> params, std::span<const double> adjoint,
                            std::span<double> grad) {
  if (!forwarded_) throw ConfigError("BatchedModel::forward must be called before backward");
  if (adjoint.size() != layout_.cols) throw ConfigError("adjoint size does not match layout");
  model_.check_params(params.size());
  if (grad.size() != params.size()) throw ConfigError("gradient size mismatch");
  if (model_.kind() == ModelKind::kAspinn && !model_.priors().empty()) {
    backward_aspinn(params, adjoint, grad);
  } else {
    backward_gkpinn(params, adjoint, grad);
  }
}

void BatchedModel::backward_gkpinn(std::span<const double> params, std::span<const double> ub,
                                   std::span<double> grad) {
  const JetLayout& L = layout_;
  const std::size_t bs = model_.backbone_size();
  nets_[0].backward(params.subspan(0, bs), {ub.data(), 1, L.cols, L.cols}, grad.subspan(0, bs));
  adj_.resize(1);
  Matrix& a = adj_[0];
  a.resize(1, L.cols);
  const std::size_t normal = model_.priors().empty() ? 0 : model_.priors().front().normal_dim;
  for (std::size_t i = 0; i < model_.priors().size(); ++i) {
    double* ab = a.row(0);
    const double* e = e_[i].data();
    const double* en = e_n_[i].data();
    const double* enn = e_nn_[i].data();
    for (std::size_t p = 0; p < L.points; ++p) ab[p] = ub[p] * e[p];
    for (std::size_t d = 0; d < L.dims; ++d) {
      const std::size_t n = L.deriv_points[d];
      const std::size_t go = L.g_offset[d], ho = L.h_offset[d];
      if (d == normal) {
        if (L.has_g(d)) {
          for (std::size_t p = 0; p < n; ++p) {
            ab[p] += ub[go + p] * en[p];
            ab[go + p] = ub[go + p] * e[p];
          }
        }
        if (L.has_h(d)) {
          for (std::size_t p = 0; p < n; ++p) {
            ab[p] += ub[ho + p] * enn[p];
            ab[go + p] += 2.0 * ub[ho + p] * en[p];
            ab[ho + p] = ub[ho + p] * e[p];
          }
        }
      } else {
        if (L.has_g(d)) {
          for (std::size_t p = 0; p < n; ++p) ab[go + p] = ub[go + p] * e[p];
        }
        if (L.has_h(d)) {
          for (std::size_t p = 0; p < n; ++p) ab[ho + p] = ub[ho + p] * e[p];
        }
      }
    }
    const std::size_t off = (i + 1) * bs;
    nets_[i + 1].backward(params.subspan(off, bs), a.view(), grad.subspan(off, bs));
  }
}

void BatchedModel::backward_aspinn(std::span<const double> params, std::span<const double> ub,
                                   std::span<double> grad) {
  const JetLayout& L = layout_;
  const JetLayout& X = net_layout_;
  adj_.resize(1);
  Matrix& a = adj_[0];
  a.resize(1, X.cols);
  a.fill(0.0);
  double* ab = a.row(0);
  for (std::size_t p = 0; p < L.points; ++p) ab[orig_[p]] = ub[p];
  for (std::size_t d = 0; d < L.dims; ++d) {
    for (std::size_t p = 0; p < L.deriv_points[d]; ++p) {
      if (L.has_g(d)) ab[X.g_offset[d] + p] = ub[L.g_offset[d] + p];
      if (L.has_h(d)) ab[X.h_offset[d] + p] = ub[L.h_offset[d] + p];
    }
  }
  const std::size_t normal = model_.priors().front().normal_dim;
  for (std::size_t i = 0; i < model_.priors().size(); ++i) {
    const auto& q = proj_[i];
    const double* e = e_[i].data();
    for (std::size_t p = 0; p < L.points; ++p) ab[q[p]] -= ub[p] * e[p];
    for (std::size_t d = 0; d < L.dims; ++d) {
      const std::size_t n = L.deriv_points[d];
      const std::size_t go = L.g_offset[d], ho = L.h_offset[d];
      if (d == normal) {
        if (L.has_g(d)) {
          for (std::size_t p = 0; p < n; ++p) ab[q[p]] -= ub[go + p] * e_n_[i][p];
        }
        if (L.has_h(d)) {
          for (std::size_t p = 0; p < n; ++p) ab[q[p]] -= ub[ho + p] * e_nn_[i][p];
        }
      } else {
        if (L.has_g(d)) {
          for (std::size_t p = 0; p < n; ++p) ab[X.g_offset[d] + q[p]] -= ub[go + p] * e[p];
        }
        if (L.has_h(d)) {
          for (std::size_t p = 0; p < n; ++p) ab[X.h_offset[d] + q[p]] -= ub[ho + p] * e[p];
        }
      }
    }
  }
  nets_[0].backward(params, a.view(), grad);
}

std::vector<double> predict_batch(const Model& model, std::span<const double> params,
                                  simd::ConstMatrixView coords) {
  if (coords.rows != model.input_dim()) throw ConfigError("coordinate rows must equal input dimension");
  const simd::ScopedFlushDenormals ftz;
  constexpr std::size_t kChunk = 4096;
  std::vector<double> out(coords.cols);
  BatchedModel bm(model);
  for (std::size_t start = 0; start < coords.cols; start += kChunk) {
    const std::size_t n = std::min(kChunk, coords.cols - start);
    JetLayout L;
    L.dims = coords.rows;
    L.points = n;
    L.finalize();
    bm.prepare(L, {coords.data + start, coords.rows, n, coords.stride});
    bm.forward(params);
    std::copy_n(bm.output().data, n, out.begin() + static_cast<std::ptrdiff_t>(start));
  }
  return out;
}

}  // namespace spinn::models
