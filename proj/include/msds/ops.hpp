#pragma once

#include <cmath>
#include <initializer_list>
#include <utility>
#include <vector>

#include "msds/graph.hpp"
#include "msds/interp.hpp"
#include "msds/tensor.hpp"

namespace msds {
namespace ops {

template <typename S>
bool any_needs_grad(const Graph<S>& g, std::initializer_list<int> ids) {
  for (int id : ids) {
    if (id >= 0 && g.needs_grad(id)) return true;
  }
  return false;
}

inline int conv_out_dim(int in, int k, int stride, int pad) {
  const int span = in + 2 * pad - k;
  require(span >= 0, "conv2d: kernel larger than padded input");
  return span / stride + 1;
}

// Valid output-column range [lo, hi) for one kernel tap along an axis.
inline std::pair<int, int> tap_range(int in_size, int out_size, int stride,
                                     int pad, int k) {
  int lo = 0;
  while (lo < out_size && lo * stride + k - pad < 0) ++lo;
  int hi = out_size;
  while (hi > lo && (hi - 1) * stride + k - pad >= in_size) --hi;
  return {lo, hi};
}

/// Gathers conv receptive fields into a (Cin*kh*kw) x (B*Ho*Wo) row-major
/// matrix, zero-padding out-of-bounds taps. Row-major layout makes each
/// kernel tap a contiguous, run-copyable slice of the input.
template <typename S>
void im2col(const Tensor4<S>& x, int kh, int kw, int sy, int sx, int py,
            int px, int ho, int wo, RowMajorMatrixX<S>& cols) {
  const int cin = x.channels(), h = x.height(), w = x.width();
  const Eigen::Index rows = static_cast<Eigen::Index>(cin) * kh * kw;
  const Eigen::Index cols_per_item = static_cast<Eigen::Index>(ho) * wo;
  cols.resize(rows, static_cast<Eigen::Index>(x.batch()) * cols_per_item);
  for (int ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const Eigen::Index r = (static_cast<Eigen::Index>(ci) * kh + ky) * kw + kx;
        S* out_row = cols.data() + r * cols.cols();
        const auto [ox_lo, ox_hi] = tap_range(w, wo, sx, px, kx);
        for (int b = 0; b < x.batch(); ++b) {
          const S* plane = x.data() + ((static_cast<Eigen::Index>(b) * cin + ci) * h) * w;
          S* dst_item = out_row + b * cols_per_item;
          for (int oy = 0; oy < ho; ++oy) {
            S* dst = dst_item + static_cast<Eigen::Index>(oy) * wo;
            const int iy = oy * sy + ky - py;
            if (iy < 0 || iy >= h) {
              std::fill(dst, dst + wo, S(0));
              continue;
            }
            const S* src = plane + static_cast<Eigen::Index>(iy) * w;
            std::fill(dst, dst + ox_lo, S(0));
            if (sx == 1) {
              const S* s0 = src + (static_cast<Eigen::Index>(ox_lo) + kx - px);
              std::copy(s0, s0 + (ox_hi - ox_lo), dst + ox_lo);
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                dst[ox] = src[ox * sx + kx - px];
              }
            }
            std::fill(dst + ox_hi, dst + wo, S(0));
          }
        }
      }
    }
  }
}

/// Transpose of im2col: scatter-adds row-major column entries back into an
/// image gradient.
template <typename S>
void col2im_add(const RowMajorMatrixX<S>& cols, int kh, int kw, int sy, int sx,
                int py, int px, int ho, int wo, Tensor4<S>& dx) {
  const int cin = dx.channels(), h = dx.height(), w = dx.width();
  const Eigen::Index cols_per_item = static_cast<Eigen::Index>(ho) * wo;
  for (int ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const Eigen::Index r = (static_cast<Eigen::Index>(ci) * kh + ky) * kw + kx;
        const S* in_row = cols.data() + r * cols.cols();
        const auto [ox_lo, ox_hi] = tap_range(w, wo, sx, px, kx);
        for (int b = 0; b < dx.batch(); ++b) {
          S* plane = dx.data() + ((static_cast<Eigen::Index>(b) * cin + ci) * h) * w;
          const S* src_item = in_row + b * cols_per_item;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * sy + ky - py;
            if (iy < 0 || iy >= h) continue;
            const S* src = src_item + static_cast<Eigen::Index>(oy) * wo;
            S* drow = plane + static_cast<Eigen::Index>(iy) * w;
            if (sx == 1) {
              S* d0 = drow + (static_cast<Eigen::Index>(ox_lo) + kx - px);
              for (int i = 0; i < ox_hi - ox_lo; ++i) d0[i] += src[ox_lo + i];
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                drow[ox * sx + kx - px] += src[ox];
              }
            }
          }
        }
      }
    }
  }
}

/// 2-D convolution, weight (Cout, Cin, kh, kw), optional bias (1, Cout, 1, 1)
/// (pass bias_id = -1 for none). Output spatial dims follow floor semantics.
template <typename S>
int conv2d(Graph<S>& g, int x_id, int w_id, int bias_id, int sy, int sx,
           int py, int px) {
  const Tensor4<S>& x = g.value(x_id);
  const Tensor4<S>& w = g.value(w_id);
  require(x.channels() == w.channels(),
          "conv2d: input channels " + std::to_string(x.channels()) +
              " do not match weight channels " + std::to_string(w.channels()));
  const int batch = x.batch(), cout = w.batch();
  const int kh = w.height(), kw = w.width();
  const int ho = conv_out_dim(x.height(), kh, sy, py);
  const int wo = conv_out_dim(x.width(), kw, sx, px);
  const Eigen::Index ckk = static_cast<Eigen::Index>(x.channels()) * kh * kw;
  const Eigen::Index cols_per_item = static_cast<Eigen::Index>(ho) * wo;

  RowMajorMatrixX<S> cols;
  im2col(x, kh, kw, sy, sx, py, px, ho, wo, cols);
  Eigen::Map<const RowMajorMatrixX<S>> wmat(w.data(), cout, ckk);

  Tensor4<S> y = Tensor4<S>::uninit(batch, cout, ho, wo);
  for (int b = 0; b < batch; ++b) {
    Eigen::Map<RowMajorMatrixX<S>> yb(y.data() + b * cout * cols_per_item, cout,
                                      cols_per_item);
    yb.noalias() = wmat * cols.middleCols(b * cols_per_item, cols_per_item);
  }
  if (bias_id >= 0) {
    const Tensor4<S>& bias = g.value(bias_id);
    require(bias.channels() == cout, "conv2d: bias channel mismatch");
    for (int b = 0; b < batch; ++b) {
      for (int c = 0; c < cout; ++c) y.plane(b, c) += bias.array()[c];
    }
  }

  const bool ng = any_needs_grad(g, {x_id, w_id, bias_id});
  return g.add_node(
      std::move(y), ng,
      [=](Graph<S>& gg, int self) {
        const Tensor4<S>& dy = gg.grad(self);
        const Tensor4<S>& xv = gg.value(x_id);
        const Tensor4<S>& wv = gg.value(w_id);
        const auto dy_item = [&](int b) {
          return Eigen::Map<const RowMajorMatrixX<S>>(
              dy.data() + b * cout * cols_per_item, cout, cols_per_item);
        };
        if (gg.needs_grad(w_id)) {
          RowMajorMatrixX<S> cols_b;
          im2col(xv, kh, kw, sy, sx, py, px, ho, wo, cols_b);
          MatrixX<S> dw_mat = MatrixX<S>::Zero(cout, ckk);
          for (int b = 0; b < batch; ++b) {
            dw_mat.noalias() +=
                dy_item(b) * cols_b.middleCols(b * cols_per_item, cols_per_item).transpose();
          }
          Tensor4<S> dw = Tensor4<S>::uninit(cout, xv.channels(), kh, kw);
          Eigen::Map<RowMajorMatrixX<S>>(dw.data(), cout, ckk) = dw_mat;
          gg.accumulate_grad(w_id, dw);
        }
        if (gg.needs_grad(x_id)) {
          Eigen::Map<const RowMajorMatrixX<S>> wm(wv.data(), cout, ckk);
          RowMajorMatrixX<S> dcols(ckk, static_cast<Eigen::Index>(batch) * cols_per_item);
          for (int b = 0; b < batch; ++b) {
            dcols.middleCols(b * cols_per_item, cols_per_item).noalias() =
                wm.transpose() * dy_item(b);
          }
          Tensor4<S> dx(batch, xv.channels(), xv.height(), xv.width());
          col2im_add(dcols, kh, kw, sy, sx, py, px, ho, wo, dx);
          gg.accumulate_grad(x_id, dx);
        }
        if (bias_id >= 0 && gg.needs_grad(bias_id)) {
          Tensor4<S> db(1, cout, 1, 1);
          for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < cout; ++c) {
              db.array()[c] += dy.plane(b, c).sum();
            }
          }
          gg.accumulate_grad(bias_id, db);
        }
      });
}

/// Batch normalization with per-channel affine parameters (1, C, 1, 1).
/// Training mode normalizes by batch statistics and updates the running
/// buffers in place; eval mode normalizes by the running buffers.
template <typename S>
int batch_norm(Graph<S>& g, int x_id, int gamma_id, int beta_id,
               Tensor4<S>* running_mean, Tensor4<S>* running_var,
               bool train_mode, double momentum = 0.1, double eps = 1e-5) {
  const Tensor4<S>& x = g.value(x_id);
  const int batch = x.batch(), ch = x.channels(), h = x.height(), w = x.width();
  require(g.value(gamma_id).channels() == ch && g.value(beta_id).channels() == ch,
          "batch_norm: affine parameter channel mismatch");
  require(running_mean->channels() == ch && running_var->channels() == ch,
          "batch_norm: running buffer channel mismatch");
  const Eigen::Index n_per_ch = static_cast<Eigen::Index>(batch) * h * w;

  std::vector<double> mean(static_cast<size_t>(ch)), inv_std(static_cast<size_t>(ch));
  if (train_mode) {
    for (int c = 0; c < ch; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int b = 0; b < batch; ++b) {
        auto p = x.plane(b, c);
        sum += p.template cast<double>().sum();
        sq += p.template cast<double>().square().sum();
      }
      const double mu = sum / static_cast<double>(n_per_ch);
      const double var = std::max(0.0, sq / static_cast<double>(n_per_ch) - mu * mu);
      mean[static_cast<size_t>(c)] = mu;
      inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(var + eps);
      const double unbias =
          n_per_ch > 1 ? var * static_cast<double>(n_per_ch) / (n_per_ch - 1) : var;
      running_mean->array()[c] =
          static_cast<S>((1.0 - momentum) * running_mean->array()[c] + momentum * mu);
      running_var->array()[c] =
          static_cast<S>((1.0 - momentum) * running_var->array()[c] + momentum * unbias);
    }
  } else {
    for (int c = 0; c < ch; ++c) {
      mean[static_cast<size_t>(c)] = running_mean->array()[c];
      inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(
          static_cast<double>(running_var->array()[c]) + eps);
    }
  }

  const Tensor4<S>& gamma = g.value(gamma_id);
  const Tensor4<S>& beta = g.value(beta_id);
  Tensor4<S> xhat = Tensor4<S>::uninit(batch, ch, h, w);
  Tensor4<S> y = Tensor4<S>::uninit(batch, ch, h, w);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      auto xh = xhat.plane(b, c);
      xh = (x.plane(b, c) - static_cast<S>(mean[static_cast<size_t>(c)])) *
           static_cast<S>(inv_std[static_cast<size_t>(c)]);
      y.plane(b, c) = xh * gamma.array()[c] + beta.array()[c];
    }
  }

  const bool ng = any_needs_grad(g, {x_id, gamma_id, beta_id});
  return g.add_node(
      std::move(y), ng,
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph<S>& gg,
                                                                int self) {
        const Tensor4<S>& dy = gg.grad(self);
        const Tensor4<S>& gam = gg.value(gamma_id);
        std::vector<double> dbeta(static_cast<size_t>(ch), 0.0);
        std::vector<double> dgamma(static_cast<size_t>(ch), 0.0);
        for (int c = 0; c < ch; ++c) {
          double db = 0.0, dg = 0.0;
          for (int b = 0; b < batch; ++b) {
            auto d = dy.plane(b, c);
            db += d.template cast<double>().sum();
            dg += (d * xhat.plane(b, c)).template cast<double>().sum();
          }
          dbeta[static_cast<size_t>(c)] = db;
          dgamma[static_cast<size_t>(c)] = dg;
        }
        if (gg.needs_grad(beta_id)) {
          Tensor4<S> d(1, ch, 1, 1);
          for (int c = 0; c < ch; ++c) d.array()[c] = static_cast<S>(dbeta[static_cast<size_t>(c)]);
          gg.accumulate_grad(beta_id, d);
        }
        if (gg.needs_grad(gamma_id)) {
          Tensor4<S> d(1, ch, 1, 1);
          for (int c = 0; c < ch; ++c) d.array()[c] = static_cast<S>(dgamma[static_cast<size_t>(c)]);
          gg.accumulate_grad(gamma_id, d);
        }
        if (gg.needs_grad(x_id)) {
          Tensor4<S> dx = Tensor4<S>::uninit(batch, ch, h, w);
          for (int c = 0; c < ch; ++c) {
            const S k = gam.array()[c] * static_cast<S>(inv_std[static_cast<size_t>(c)]);
            if (train_mode) {
              const S mean_dy = static_cast<S>(dbeta[static_cast<size_t>(c)] /
                                               static_cast<double>(n_per_ch));
              const S mean_dyxh = static_cast<S>(dgamma[static_cast<size_t>(c)] /
                                                 static_cast<double>(n_per_ch));
              for (int b = 0; b < batch; ++b) {
                dx.plane(b, c) =
                    (dy.plane(b, c) - mean_dy - xhat.plane(b, c) * mean_dyxh) * k;
              }
            } else {
              for (int b = 0; b < batch; ++b) {
                dx.plane(b, c) = dy.plane(b, c) * k;
              }
            }
          }
          gg.accumulate_grad(x_id, dx);
        }
      });
}

template <typename S>
int relu(Graph<S>& g, int x_id) {
  const Tensor4<S>& x = g.value(x_id);
  Tensor4<S> y = x;
  y.array() = y.array().max(S(0));
  return g.add_node(std::move(y), g.needs_grad(x_id),
                    [x_id](Graph<S>& gg, int self) {
                      if (!gg.needs_grad(x_id)) return;
                      const Tensor4<S>& xv = gg.value(x_id);
                      Tensor4<S> dx = gg.grad(self);
                      dx.array() *= (xv.array() > S(0)).template cast<S>();
                      gg.accumulate_grad(x_id, dx);
                    });
}

template <typename S>
int sigmoid(Graph<S>& g, int x_id) {
  const Tensor4<S>& x = g.value(x_id);
  Tensor4<S> y = x;
  y.array() = S(1) / (S(1) + (-y.array()).exp());
  return g.add_node(std::move(y), g.needs_grad(x_id),
                    [x_id](Graph<S>& gg, int self) {
                      if (!gg.needs_grad(x_id)) return;
                      const Tensor4<S>& yv = gg.value(self);
                      Tensor4<S> dx = gg.grad(self);
                      dx.array() *= yv.array() * (S(1) - yv.array());
                      gg.accumulate_grad(x_id, dx);
                    });
}

/// Sums across the channel axis: (B, C, H, W) -> (B, 1, H, W).
template <typename S>
int sum_channels(Graph<S>& g, int x_id) {
  const Tensor4<S>& x = g.value(x_id);
  Tensor4<S> y = Tensor4<S>::uninit(x.batch(), 1, x.height(), x.width());
  for (int b = 0; b < x.batch(); ++b) {
    auto out = y.plane(b, 0);
    out = x.plane(b, 0);
    for (int c = 1; c < x.channels(); ++c) out += x.plane(b, c);
  }
  const int ch = x.channels();
  return g.add_node(std::move(y), g.needs_grad(x_id),
                    [x_id, ch](Graph<S>& gg, int self) {
                      if (!gg.needs_grad(x_id)) return;
                      const Tensor4<S>& dy = gg.grad(self);
                      const Tensor4<S>& xv = gg.value(x_id);
                      Tensor4<S> dx =
                          Tensor4<S>::uninit(xv.batch(), ch, xv.height(), xv.width());
                      for (int b = 0; b < xv.batch(); ++b) {
                        for (int c = 0; c < ch; ++c) {
                          dx.plane(b, c) = dy.plane(b, 0);
                        }
                      }
                      gg.accumulate_grad(x_id, dx);
                    });
}

/// Hadamard gating: x (B, C, H, W) scaled per pixel by a (B, 1, H, W).
template <typename S>
int broadcast_mul(Graph<S>& g, int x_id, int a_id) {
  const Tensor4<S>& x = g.value(x_id);
  const Tensor4<S>& a = g.value(a_id);
  require(a.channels() == 1 && a.batch() == x.batch() &&
              a.height() == x.height() && a.width() == x.width(),
          "broadcast_mul: attention shape mismatch");
  Tensor4<S> y = Tensor4<S>::uninit(x.batch(), x.channels(), x.height(), x.width());
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      y.plane(b, c) = x.plane(b, c) * a.plane(b, 0);
    }
  }
  return g.add_node(
      std::move(y), any_needs_grad(g, {x_id, a_id}),
      [x_id, a_id](Graph<S>& gg, int self) {
        const Tensor4<S>& dy = gg.grad(self);
        const Tensor4<S>& xv = gg.value(x_id);
        const Tensor4<S>& av = gg.value(a_id);
        if (gg.needs_grad(x_id)) {
          Tensor4<S> dx =
              Tensor4<S>::uninit(xv.batch(), xv.channels(), xv.height(), xv.width());
          for (int b = 0; b < xv.batch(); ++b) {
            for (int c = 0; c < xv.channels(); ++c) {
              dx.plane(b, c) = dy.plane(b, c) * av.plane(b, 0);
            }
          }
          gg.accumulate_grad(x_id, dx);
        }
        if (gg.needs_grad(a_id)) {
          Tensor4<S> da = Tensor4<S>::uninit(av.batch(), 1, av.height(), av.width());
          for (int b = 0; b < xv.batch(); ++b) {
            auto acc = da.plane(b, 0);
            acc = dy.plane(b, 0) * xv.plane(b, 0);
            for (int c = 1; c < xv.channels(); ++c) {
              acc += dy.plane(b, c) * xv.plane(b, c);
            }
          }
          gg.accumulate_grad(a_id, da);
        }
      });
}

/// Channel concatenation of same-resolution maps.
template <typename S>
int concat_channels(Graph<S>& g, const std::vector<int>& ids) {
  require(!ids.empty(), "concat_channels: no inputs");
  const Tensor4<S>& first = g.value(ids[0]);
  int total_ch = 0;
  bool ng = false;
  for (int id : ids) {
    const Tensor4<S>& t = g.value(id);
    require(t.batch() == first.batch() && t.height() == first.height() &&
                t.width() == first.width(),
            "concat_channels: resolution mismatch");
    total_ch += t.channels();
    ng = ng || g.needs_grad(id);
  }
  Tensor4<S> y = Tensor4<S>::uninit(first.batch(), total_ch, first.height(), first.width());
  for (int b = 0; b < first.batch(); ++b) {
    int co = 0;
    for (int id : ids) {
      const Tensor4<S>& t = g.value(id);
      for (int c = 0; c < t.channels(); ++c) {
        y.plane(b, co++) = t.plane(b, c);
      }
    }
  }
  return g.add_node(std::move(y), ng, [ids](Graph<S>& gg, int self) {
    const Tensor4<S>& dy = gg.grad(self);
    int co = 0;
    for (int id : ids) {
      const Tensor4<S>& t = gg.value(id);
      if (gg.needs_grad(id)) {
        Tensor4<S> dt = Tensor4<S>::uninit(t.batch(), t.channels(), t.height(), t.width());
        for (int b = 0; b < t.batch(); ++b) {
          for (int c = 0; c < t.channels(); ++c) {
            dt.plane(b, c) = dy.plane(b, co + c);
          }
        }
        gg.accumulate_grad(id, dt);
      }
      co += t.channels();
    }
  });
}

/// Align-corners bilinear upsampling to an explicit output resolution.
template <typename S>
int upsample_bilinear(Graph<S>& g, int x_id, int out_h, int out_w) {
  const Tensor4<S>& x = g.value(x_id);
  Tensor4<S> y = Tensor4<S>::uninit(x.batch(), x.channels(), out_h, out_w);
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      bilinear_resize_plane(x.plane(b, c).data(), x.height(), x.width(),
                            y.plane(b, c).data(), out_h, out_w);
    }
  }
  return g.add_node(
      std::move(y), g.needs_grad(x_id),
      [x_id, out_h, out_w](Graph<S>& gg, int self) {
        if (!gg.needs_grad(x_id)) return;
        const Tensor4<S>& dy = gg.grad(self);
        const Tensor4<S>& xv = gg.value(x_id);
        const auto ys = bilinear_axis(xv.height(), out_h);
        const auto xs = bilinear_axis(xv.width(), out_w);
        Tensor4<S> dx(xv.batch(), xv.channels(), xv.height(), xv.width());
        for (int b = 0; b < xv.batch(); ++b) {
          for (int c = 0; c < xv.channels(); ++c) {
            auto din = dx.plane(b, c);
            auto dout = dy.plane(b, c);
            for (int oy = 0; oy < out_h; ++oy) {
              const AxisCoeff& cy = ys[static_cast<size_t>(oy)];
              for (int ox = 0; ox < out_w; ++ox) {
                const AxisCoeff& cx = xs[static_cast<size_t>(ox)];
                const S gval = dout[static_cast<Eigen::Index>(oy) * out_w + ox];
                const S w00 = static_cast<S>((1.0 - cy.t) * (1.0 - cx.t));
                const S w01 = static_cast<S>((1.0 - cy.t) * cx.t);
                const S w10 = static_cast<S>(cy.t * (1.0 - cx.t));
                const S w11 = static_cast<S>(cy.t * cx.t);
                din[static_cast<Eigen::Index>(cy.lo) * xv.width() + cx.lo] += w00 * gval;
                din[static_cast<Eigen::Index>(cy.lo) * xv.width() + cx.hi] += w01 * gval;
                din[static_cast<Eigen::Index>(cy.hi) * xv.width() + cx.lo] += w10 * gval;
                din[static_cast<Eigen::Index>(cy.hi) * xv.width() + cx.hi] += w11 * gval;
              }
            }
          }
        }
        gg.accumulate_grad(x_id, dx);
      });
}

/// Mean squared error against a constant target; result is scalar-shaped.
template <typename S>
int mse_loss(Graph<S>& g, int pred_id, Tensor4<S> target) {
  const Tensor4<S>& pred = g.value(pred_id);
  require(pred.same_shape(target),
          "mse_loss: prediction " + pred.shape_string() + " vs target " +
              target.shape_string());
  const double numel = static_cast<double>(pred.size());
  const double sse =
      (pred.array() - target.array()).template cast<double>().square().sum();
  Tensor4<S> y = Tensor4<S>::scalar(static_cast<S>(sse / numel));
  return g.add_node(
      std::move(y), g.needs_grad(pred_id),
      [pred_id, target = std::move(target), numel](Graph<S>& gg, int self) {
        if (!gg.needs_grad(pred_id)) return;
        const S seed = gg.grad(self).array()[0];
        const Tensor4<S>& pv = gg.value(pred_id);
        Tensor4<S> dp = Tensor4<S>::uninit(pv.batch(), pv.channels(), pv.height(), pv.width());
        dp.array() =
            (pv.array() - target.array()) * static_cast<S>(2.0 / numel) * seed;
        gg.accumulate_grad(pred_id, dp);
      });
}

/// Weighted sum of scalar-shaped nodes.
template <typename S>
int weighted_sum(Graph<S>& g, const std::vector<int>& ids,
                 const std::vector<double>& weights) {
  require(ids.size() == weights.size() && !ids.empty(),
          "weighted_sum: ids/weights mismatch");
  double total = 0.0;
  bool ng = false;
  for (size_t i = 0; i < ids.size(); ++i) {
    const Tensor4<S>& v = g.value(ids[i]);
    require(v.size() == 1, "weighted_sum: inputs must be scalar-shaped");
    total += weights[i] * static_cast<double>(v.array()[0]);
    ng = ng || g.needs_grad(ids[i]);
  }
  return g.add_node(Tensor4<S>::scalar(static_cast<S>(total)), ng,
                    [ids, weights](Graph<S>& gg, int self) {
                      const S seed = gg.grad(self).array()[0];
                      for (size_t i = 0; i < ids.size(); ++i) {
                        if (!gg.needs_grad(ids[i])) continue;
                        gg.accumulate_grad(
                            ids[i], Tensor4<S>::scalar(
                                        static_cast<S>(weights[i]) * seed));
                      }
                    });
}

}  // namespace ops
}  // namespace msds
