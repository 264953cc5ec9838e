#include "spinn/networks/batched.hpp"

#include <algorithm>
#include <cmath>

#include "spinn/error.hpp"

namespace spinn::networks {

namespace {

using simd::ConstMatrixView;
using simd::KernelTable;
using simd::MatrixView;

void activation_values(Activation act, const double* z, double* a, double* d1, double* d2,
                       double* d3, std::size_t n) {
  if (act == Activation::kTanh) {
    for (std::size_t p = 0; p < n; ++p) {
      const double t = std::tanh(z[p]);
      const double e1 = 1.0 - t * t;
      const double e2 = -2.0 * t * e1;
      a[p] = t;
      d1[p] = e1;
      d2[p] = e2;
      d3[p] = -2.0 * (e1 * e1 + t * e2);
    }
    return;
  }
  for (std::size_t p = 0; p < n; ++p) {
    const double s = autodiff::sigmoid(z[p]);
    const double e1 = s * (1.0 - s);
    const double e2 = e1 * (1.0 - 2.0 * s);
    a[p] = s;
    d1[p] = e1;
    d2[p] = e2;
    d3[p] = e2 * (1.0 - 2.0 * s) - 2.0 * e1 * e1;
  }
}

// Derivative channels of a = phi(z); the value channel is filled by the caller.
void map_forward(const KernelTable& kt, const JetLayout& L, const double* z, double* a,
                 const double* d1, const double* d2) {
  for (std::size_t d = 0; d < L.dims; ++d) {
    if (!L.has_g(d)) continue;
    const bool h = L.has_h(d);
    kt.jet_forward(d1, d2, z + L.g_offset[d], h ? z + L.h_offset[d] : nullptr, a + L.g_offset[d],
                   h ? a + L.h_offset[d] : nullptr, L.deriv_points[d]);
  }
}

// zbar = adjoint of z given abar, for a = phi(z).
void map_backward(const KernelTable& kt, const JetLayout& L, const double* z, const double* abar,
                  double* zbar, const double* d1, const double* d2, const double* d3) {
  kt.mul(d1, abar, zbar, L.points);
  for (std::size_t d = 0; d < L.dims; ++d) {
    const std::size_t n = L.deriv_points[d];
    const std::size_t g = L.g_offset[d];
    if (L.has_h(d)) {
      const std::size_t h = L.h_offset[d];
      kt.jet_backward2(d1, d2, d3, z + g, z + h, abar + g, abar + h, zbar, zbar + g, zbar + h, n);
    } else if (L.has_g(d)) {
      kt.jet_backward1(d1, d2, z + g, abar + g, zbar, zbar + g, n);
    }
  }
}

ConstMatrixView param_matrix(std::span<const double> p, std::size_t offset, std::size_t rows,
                             std::size_t cols) {
  return {p.data() + offset, rows, cols, cols};
}

}  // namespace

void JetLayout::finalize() {
  if (dims == 0 || dims > kMaxDim) throw ConfigError("jet layout supports 1 or 2 input dimensions");
  cols = points;
  for (std::size_t d = 0; d < kMaxDim; ++d) {
    if (d >= dims || order[d] == 0) deriv_points[d] = 0;
    if (order[d] < 0 || order[d] > 2) throw ConfigError("jet order must be 0, 1 or 2");
    if (deriv_points[d] > points) throw ConfigError("derivative points exceed batch size");
    g_offset[d] = h_offset[d] = cols;
    if (has_g(d)) {
      g_offset[d] = cols;
      cols += deriv_points[d];
    }
    if (has_h(d)) {
      h_offset[d] = cols;
      cols += deriv_points[d];
    }
  }
}

void Matrix::resize(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.resize(rows * cols);
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void transpose(ConstMatrixView src, Matrix& dst) {
  dst.resize(src.cols, src.rows);
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < src.rows; r0 += kBlock) {
    const std::size_t r1 = std::min(src.rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < src.cols; c0 += kBlock) {
      const std::size_t c1 = std::min(src.cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r) {
        const double* s = src.row(r);
        for (std::size_t c = c0; c < c1; ++c) dst.row(c)[r] = s[c];
      }
    }
  }
}

BatchedNetwork::BatchedNetwork(BackboneConfig cfg) : cfg_(std::move(cfg)) {
  std::visit([](const auto& c) { c.validate(); }, cfg_);
}

simd::ConstMatrixView BatchedNetwork::output() const { return out_.view(); }

void BatchedNetwork::forward(std::span<const double> params, const JetLayout& layout,
                             ConstMatrixView coords) {
  if (params.size() != param_count(cfg_)) throw ConfigError("parameter count mismatch");
  if (layout.dims != input_dim(cfg_)) throw ConfigError("layout dimension does not match network");
  if (coords.rows != layout.dims || coords.cols != layout.points) {
    throw ConfigError("coordinate matrix shape does not match layout");
  }
  layout_ = layout;
  const JetLayout& L = layout_;

  const std::size_t depth = std::holds_alternative<MlpConfig>(cfg_)
                                ? mlp_slices(std::get<MlpConfig>(cfg_)).size()
                                : kan_slices(std::get<KanConfig>(cfg_)).size();
  acts_.resize(depth);
  pre_.resize(depth);
  act_d_.resize(depth);

  Matrix& a0 = acts_[0];
  a0.resize(L.dims, L.cols);
  a0.fill(0.0);
  for (std::size_t d = 0; d < L.dims; ++d) {
    std::copy_n(coords.row(d), L.points, a0.row(d));
    if (L.has_g(d)) std::fill_n(a0.row(d) + L.g_offset[d], L.deriv_points[d], 1.0);
  }

  if (std::holds_alternative<MlpConfig>(cfg_)) {
    mlp_forward(params);
  } else {
    kan_forward(params);
  }
}

void BatchedNetwork::backward(std::span<const double> params, ConstMatrixView output_adjoint,
                              std::span<double> grad) {
  if (grad.size() != params.size()) throw ConfigError("gradient size mismatch");
  if (output_adjoint.rows != out_.rows() || output_adjoint.cols != out_.cols()) {
    throw ConfigError("output adjoint shape mismatch");
  }
  if (std::holds_alternative<MlpConfig>(cfg_)) {
    mlp_backward(params, output_adjoint, grad);
  } else {
    kan_backward(params, output_adjoint, grad);
  }
}

// --- MLP ----------------------------------------------------------------------

void BatchedNetwork::mlp_forward(std::span<const double> params) {
  const KernelTable& kt = simd::kernels();
  const MlpConfig& cfg = std::get<MlpConfig>(cfg_);
  const JetLayout& L = layout_;
  const auto slices = mlp_slices(cfg);
  for (std::size_t l = 0; l < slices.size(); ++l) {
    const DenseSlice& s = slices[l];
    const bool last = l + 1 == slices.size();
    Matrix& z = last ? out_ : pre_[l];
    z.resize(s.out, L.cols);
    kt.gemm(param_matrix(params, s.w_offset, s.out, s.in), acts_[l].view(), z.view(), false);
    for (std::size_t o = 0; o < s.out; ++o) {
      const double b = params[s.b_offset + o];
      double* zr = z.row(o);
      for (std::size_t p = 0; p < L.points; ++p) zr[p] += b;
    }
    if (last) break;
    Matrix& a = acts_[l + 1];
    Derivs& dv = act_d_[l];
    a.resize(s.out, L.cols);
    dv.d1.resize(s.out, L.points);
    dv.d2.resize(s.out, L.points);
    dv.d3.resize(s.out, L.points);
    for (std::size_t o = 0; o < s.out; ++o) {
      activation_values(cfg.activation, z.row(o), a.row(o), dv.d1.row(o), dv.d2.row(o),
                        dv.d3.row(o), L.points);
      map_forward(kt, L, z.row(o), a.row(o), dv.d1.row(o), dv.d2.row(o));
    }
  }
}

void BatchedNetwork::mlp_backward(std::span<const double> params, ConstMatrixView out_adj,
                                  std::span<double> grad) {
  const KernelTable& kt = simd::kernels();
  const JetLayout& L = layout_;
  const auto slices = mlp_slices(std::get<MlpConfig>(cfg_));
  ConstMatrixView zbar = out_adj;
  for (std::size_t l = slices.size(); l-- > 0;) {
    const DenseSlice& s = slices[l];
    transpose(acts_[l].view(), trans_);
    kt.gemm(zbar, trans_.view(), MatrixView{grad.data() + s.w_offset, s.out, s.in, s.in}, true);
    for (std::size_t o = 0; o < s.out; ++o) {
      const double* zr = zbar.row(o);
      double acc = grad[s.b_offset + o];
      for (std::size_t p = 0; p < L.points; ++p) acc += zr[p];
      grad[s.b_offset + o] = acc;
    }
    if (l == 0) break;
    transpose(param_matrix(params, s.w_offset, s.out, s.in), wt_);
    adj_b_.resize(s.in, L.cols);
    kt.gemm(wt_.view(), zbar, adj_b_.view(), false);
    const Derivs& dv = act_d_[l - 1];
    adj_a_.resize(s.in, L.cols);
    for (std::size_t r = 0; r < s.in; ++r) {
      map_backward(kt, L, pre_[l - 1].row(r), adj_b_.row(r), adj_a_.row(r), dv.d1.row(r),
                   dv.d2.row(r), dv.d3.row(r));
    }
    zbar = adj_a_.view();
  }
}

// --- KAN ----------------------------------------------------------------------

void BatchedNetwork::kan_forward(std::span<const double> params) {
  const KernelTable& kt = simd::kernels();
  const JetLayout& L = layout_;
  const auto slices = kan_slices(std::get<KanConfig>(cfg_));
  basis_.resize(slices.size());
  basis_d_.resize(slices.size());
  for (std::size_t l = 0; l < slices.size(); ++l) {
    const ChebSlice& s = slices[l];
    const std::size_t nb = s.degree + 1;
    const Matrix& a = acts_[l];

    Matrix& sn = pre_[l];
    Derivs& td = act_d_[l];
    sn.resize(s.in, L.cols);
    td.d1.resize(s.in, L.points);
    td.d2.resize(s.in, L.points);
    td.d3.resize(s.in, L.points);
    for (std::size_t i = 0; i < s.in; ++i) {
      activation_values(Activation::kTanh, a.row(i), sn.row(i), td.d1.row(i), td.d2.row(i),
                        td.d3.row(i), L.points);
      map_forward(kt, L, a.row(i), sn.row(i), td.d1.row(i), td.d2.row(i));
    }

    Matrix& b = basis_[l];
    Derivs& bd = basis_d_[l];
    b.resize(s.in * nb, L.cols);
    b.fill(0.0);
    bd.d1.resize(s.in * nb, L.points);
    bd.d2.resize(s.in * nb, L.points);
    bd.d3.resize(s.in * nb, L.points);
    bd.d1.fill(0.0);
    bd.d2.fill(0.0);
    bd.d3.fill(0.0);
    for (std::size_t i = 0; i < s.in; ++i) {
      const double* x = sn.row(i);
      const std::size_t r0 = i * nb;
      for (std::size_t p = 0; p < L.points; ++p) b.row(r0)[p] = 1.0;
      if (nb > 1) {
        for (std::size_t p = 0; p < L.points; ++p) {
          b.row(r0 + 1)[p] = x[p];
          bd.d1.row(r0 + 1)[p] = 1.0;
        }
      }
      for (std::size_t k = 2; k < nb; ++k) {
        const std::size_t r = r0 + k;
        const double* t1 = b.row(r - 1);
        const double* t2 = b.row(r - 2);
        const double* p1 = bd.d1.row(r - 1);
        const double* p2 = bd.d1.row(r - 2);
        const double* q1 = bd.d2.row(r - 1);
        const double* q2 = bd.d2.row(r - 2);
        const double* c1 = bd.d3.row(r - 1);
        const double* c2 = bd.d3.row(r - 2);
        double* t = b.row(r);
        double* pd = bd.d1.row(r);
        double* qd = bd.d2.row(r);
        double* cd = bd.d3.row(r);
        for (std::size_t p = 0; p < L.points; ++p) {
          const double xs = x[p];
          t[p] = 2.0 * (xs * t1[p]) - t2[p];
          pd[p] = 2.0 * t1[p] + 2.0 * xs * p1[p] - p2[p];
          qd[p] = 4.0 * p1[p] + 2.0 * xs * q1[p] - q2[p];
          cd[p] = 6.0 * q1[p] + 2.0 * xs * c1[p] - c2[p];
        }
      }
      for (std::size_t k = 1; k < nb; ++k) {
        map_forward(kt, L, sn.row(i), b.row(r0 + k), bd.d1.row(r0 + k), bd.d2.row(r0 + k));
      }
    }

    // theta'[j][i*nb + k] = theta[i][j][k]
    wt_.resize(s.out, s.in * nb);
    for (std::size_t i = 0; i < s.in; ++i) {
      for (std::size_t j = 0; j < s.out; ++j) {
        for (std::size_t k = 0; k < nb; ++k) {
          wt_.row(j)[i * nb + k] = params[s.offset + (i * s.out + j) * nb + k];
        }
      }
    }
    const bool last = l + 1 == slices.size();
    Matrix& z = last ? out_ : acts_[l + 1];
    z.resize(s.out, L.cols);
    kt.gemm(wt_.view(), b.view(), z.view(), false);
  }
}

void BatchedNetwork::kan_backward(std::span<const double> params, ConstMatrixView out_adj,
                                  std::span<double> grad) {
  const KernelTable& kt = simd::kernels();
  const JetLayout& L = layout_;
  const auto slices = kan_slices(std::get<KanConfig>(cfg_));
  ConstMatrixView zbar = out_adj;
  row_.resize(L.cols);
  for (std::size_t l = slices.size(); l-- > 0;) {
    const ChebSlice& s = slices[l];
    const std::size_t nb = s.degree + 1;
    const Matrix& b = basis_[l];
    const Derivs& bd = basis_d_[l];

    transpose(b.view(), trans_);
    tmp_.resize(s.out, s.in * nb);
    kt.gemm(zbar, trans_.view(), tmp_.view(), false);
    for (std::size_t i = 0; i < s.in; ++i) {
      for (std::size_t j = 0; j < s.out; ++j) {
        for (std::size_t k = 0; k < nb; ++k) {
          grad[s.offset + (i * s.out + j) * nb + k] += tmp_.row(j)[i * nb + k];
        }
      }
    }
    if (l == 0) break;

    // basis adjoint = theta'^T zbar
    wt_.resize(s.in * nb, s.out);
    for (std::size_t i = 0; i < s.in; ++i) {
      for (std::size_t j = 0; j < s.out; ++j) {
        for (std::size_t k = 0; k < nb; ++k) {
          wt_.row(i * nb + k)[j] = params[s.offset + (i * s.out + j) * nb + k];
        }
      }
    }
    adj_b_.resize(s.in * nb, L.cols);
    kt.gemm(wt_.view(), zbar, adj_b_.view(), false);

    // adjoint of the normalized inputs, summed over basis functions
    const Matrix& sn = pre_[l];
    tmp_.resize(s.in, L.cols);
    tmp_.fill(0.0);
    for (std::size_t i = 0; i < s.in; ++i) {
      double* acc = tmp_.row(i);
      for (std::size_t k = 1; k < nb; ++k) {
        const std::size_t r = i * nb + k;
        map_backward(kt, L, sn.row(i), adj_b_.row(r), row_.data(), bd.d1.row(r), bd.d2.row(r),
                     bd.d3.row(r));
        for (std::size_t c = 0; c < L.cols; ++c) acc[c] += row_[c];
      }
    }

    const Derivs& td = act_d_[l];
    adj_a_.resize(s.in, L.cols);
    for (std::size_t i = 0; i < s.in; ++i) {
      map_backward(kt, L, acts_[l].row(i), tmp_.row(i), adj_a_.row(i), td.d1.row(i),
                   td.d2.row(i), td.d3.row(i));
    }
    zbar = adj_a_.view();
  }
}

}  // namespace spinn::networks
