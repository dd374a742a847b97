#include "tsf/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace tsf::autograd {

Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Var constant(Tensor value) { return leaf(std::move(value), false); }

namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool any = false;
  for (const auto& p : parents)
    if (p && p->requires_grad) any = true;
  n->requires_grad = any;
  if (any) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

void topo(const Var& v, std::unordered_set<Node*>& seen, std::vector<Var>& order) {
  if (!v || !v->requires_grad || seen.count(v.get())) return;
  seen.insert(v.get());
  for (const auto& p : v->parents) topo(p, seen, order);
  order.push_back(v);
}

}  // namespace

void backward(const Var& root) {
  if (root->value.numel() != 1) throw std::logic_error("backward: root must be scalar");
  std::unordered_set<Node*> seen;
  std::vector<Var> order;
  topo(root, seen, order);
  for (const auto& v : order) v->ensure_grad();
  root->grad.fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = **it;
    if (n.backprop) {
      for (const auto& p : n.parents)
        if (p && p->requires_grad) p->ensure_grad();
      n.backprop(n);
    }
  }
}

void zero_grad(const std::vector<Var>& params) {
  for (const auto& p : params)
    if (p) p->ensure_grad().zero();
}

Var conv2d(const Var& x, const Var& w, const Var& b, const kernels::ConvSpec& spec) {
  Tensor y = kernels::conv2d_forward(x->value, w->value, b ? b->value : Tensor(), spec);
  std::vector<Var> parents{x, w, b};
  return make_node(std::move(y), std::move(parents), [x, w, b, spec](Node& n) {
    if (w->requires_grad) {
      Tensor dummy;
      kernels::conv2d_backward_weights(n.grad, x->value, w->grad,
                                       (b && b->requires_grad) ? b->grad : dummy, spec);
    }
    if (x->requires_grad) {
      Tensor gx = kernels::conv2d_backward_data(n.grad, w->value, x->value.dim(2), x->value.dim(3), spec);
      for (long i = 0; i < gx.numel(); ++i) x->grad[i] += gx[i];
    }
  });
}

Var relu(const Var& x) {
  Tensor y(x->value.shape());
  const long n = y.numel();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) y[i] = x->value[i] > 0.0 ? x->value[i] : 0.0;
  return make_node(std::move(y), {x}, [x](Node& nd) {
    const long m = nd.value.numel();
    for (long i = 0; i < m; ++i)
      if (x->value[i] > 0.0) x->grad[i] += nd.grad[i];
  });
}

Var maxpool(const Var& x, int kernel, int stride, int pad) {
  auto argmax = std::make_shared<std::vector<long>>();
  Tensor y = kernels::maxpool_forward(x->value, kernel, stride, pad, *argmax);
  auto xshape = x->value.shape();
  return make_node(std::move(y), {x}, [x, argmax, xshape](Node& nd) {
    Tensor gx = kernels::maxpool_backward(nd.grad, *argmax, xshape);
    for (long i = 0; i < gx.numel(); ++i) x->grad[i] += gx[i];
  });
}

Var batchnorm_train(const Var& x, const Var& gamma, const Var& beta, Tensor& batch_mean,
                    Tensor& batch_var, double eps) {
  kernels::channel_stats(x->value, batch_mean, batch_var);
  const int N = x->value.dim(0), C = x->value.dim(1);
  const long plane = static_cast<long>(x->value.dim(2)) * x->value.dim(3);
  Tensor y(x->value.shape());
  Tensor mean = batch_mean, var = batch_var;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const double inv = 1.0 / std::sqrt(var[c] + eps);
    const double g = gamma->value[c], bt = beta->value[c], mu = mean[c];
    for (int n = 0; n < N; ++n) {
      const double* xp = x->value.data() + (static_cast<long>(n) * C + c) * plane;
      double* yp = y.data() + (static_cast<long>(n) * C + c) * plane;
      for (long j = 0; j < plane; ++j) yp[j] = g * (xp[j] - mu) * inv + bt;
    }
  }
  return make_node(std::move(y), {x, gamma, beta}, [x, gamma, beta, mean, var, eps](Node& nd) {
    const int N = x->value.dim(0), C = x->value.dim(1);
    const long plane = static_cast<long>(x->value.dim(2)) * x->value.dim(3);
    const double M = static_cast<double>(N) * plane;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(var[c] + eps);
      const double mu = mean[c];
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* xp = x->value.data() + (static_cast<long>(n) * C + c) * plane;
        const double* gp = nd.grad.data() + (static_cast<long>(n) * C + c) * plane;
        for (long j = 0; j < plane; ++j) {
          sum_gy += gp[j];
          sum_gy_xhat += gp[j] * (xp[j] - mu) * inv;
        }
      }
      if (gamma->requires_grad) gamma->grad[c] += sum_gy_xhat;
      if (beta->requires_grad) beta->grad[c] += sum_gy;
      if (x->requires_grad) {
        const double g = gamma->value[c];
        const double mgy = sum_gy / M, mgx = sum_gy_xhat / M;
        for (int n = 0; n < N; ++n) {
          const double* xp = x->value.data() + (static_cast<long>(n) * C + c) * plane;
          const double* gp = nd.grad.data() + (static_cast<long>(n) * C + c) * plane;
          double* dxp = x->grad.data() + (static_cast<long>(n) * C + c) * plane;
          for (long j = 0; j < plane; ++j) {
            const double xhat = (xp[j] - mu) * inv;
            dxp[j] += g * inv * (gp[j] - mgy - xhat * mgx);
          }
        }
      }
    }
  });
}

Var batchnorm_eval(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean,
                   const Tensor& var, double eps) {
  const int N = x->value.dim(0), C = x->value.dim(1);
  const long plane = static_cast<long>(x->value.dim(2)) * x->value.dim(3);
  Tensor y(x->value.shape());
  Tensor m = mean, v = var;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const double inv = 1.0 / std::sqrt(v[c] + eps);
    const double g = gamma->value[c], bt = beta->value[c], mu = m[c];
    for (int n = 0; n < N; ++n) {
      const double* xp = x->value.data() + (static_cast<long>(n) * C + c) * plane;
      double* yp = y.data() + (static_cast<long>(n) * C + c) * plane;
      for (long j = 0; j < plane; ++j) yp[j] = g * (xp[j] - mu) * inv + bt;
    }
  }
  return make_node(std::move(y), {x, gamma, beta}, [x, gamma, beta, m, v, eps](Node& nd) {
    const int N = x->value.dim(0), C = x->value.dim(1);
    const long plane = static_cast<long>(x->value.dim(2)) * x->value.dim(3);
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(v[c] + eps);
      const double g = gamma->value[c], mu = m[c];
      for (int n = 0; n < N; ++n) {
        const double* xp = x->value.data() + (static_cast<long>(n) * C + c) * plane;
        const double* gp = nd.grad.data() + (static_cast<long>(n) * C + c) * plane;
        for (long j = 0; j < plane; ++j) {
          if (x->requires_grad) x->grad.data()[(static_cast<long>(n) * C + c) * plane + j] += gp[j] * g * inv;
          if (gamma->requires_grad) gamma->grad[c] += gp[j] * (xp[j] - mu) * inv;
          if (beta->requires_grad) beta->grad[c] += gp[j];
        }
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) {
    if (a->value.numel() == 1 && b->value.numel() == 1) {
      Tensor y = Tensor::scalar(a->value[0] + b->value[0]);
      return make_node(std::move(y), {a, b}, [a, b](Node& nd) {
        if (a->requires_grad) a->grad[0] += nd.grad[0];
        if (b->requires_grad) b->grad[0] += nd.grad[0];
      });
    }
    throw std::invalid_argument("add: shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
  }
  Tensor y(a->value.shape());
  const long n = y.numel();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) y[i] = a->value[i] + b->value[i];
  return make_node(std::move(y), {a, b}, [a, b](Node& nd) {
    const long m = nd.value.numel();
    if (a->requires_grad)
      for (long i = 0; i < m; ++i) a->grad[i] += nd.grad[i];
    if (b->requires_grad)
      for (long i = 0; i < m; ++i) b->grad[i] += nd.grad[i];
  });
}

Var scale(const Var& x, double c) {
  Tensor y(x->value.shape());
  const long n = y.numel();
  for (long i = 0; i < n; ++i) y[i] = c * x->value[i];
  return make_node(std::move(y), {x}, [x, c](Node& nd) {
    const long m = nd.value.numel();
    for (long i = 0; i < m; ++i) x->grad[i] += c * nd.grad[i];
  });
}

Var scale_by(const Var& x, const Var& s) {
  if (s->value.numel() != 1) throw std::invalid_argument("scale_by: scale must be 1-element");
  const double c = s->value[0];
  Tensor y(x->value.shape());
  const long n = y.numel();
  for (long i = 0; i < n; ++i) y[i] = c * x->value[i];
  return make_node(std::move(y), {x, s}, [x, s](Node& nd) {
    const long m = nd.value.numel();
    const double c = s->value[0];
    if (x->requires_grad)
      for (long i = 0; i < m; ++i) x->grad[i] += c * nd.grad[i];
    if (s->requires_grad) {
      double acc = 0.0;
      for (long i = 0; i < m; ++i) acc += nd.grad[i] * x->value[i];
      s->grad[0] += acc;
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input");
  const int N = xs[0]->value.dim(0), H = xs[0]->value.dim(2), W = xs[0]->value.dim(3);
  int C = 0;
  for (const auto& x : xs) {
    if (x->value.dim(0) != N || x->value.dim(2) != H || x->value.dim(3) != W)
      throw std::invalid_argument("concat: spatial/batch mismatch");
    C += x->value.dim(1);
  }
  Tensor y({N, C, H, W});
  const long plane = static_cast<long>(H) * W;
  long coff = 0;
  for (const auto& x : xs) {
    const int xc = x->value.dim(1);
    for (int n = 0; n < N; ++n)
      std::copy(x->value.data() + static_cast<long>(n) * xc * plane,
                x->value.data() + static_cast<long>(n + 1) * xc * plane,
                y.data() + (static_cast<long>(n) * C + coff) * plane);
    coff += xc;
  }
  return make_node(std::move(y), std::vector<Var>(xs.begin(), xs.end()), [xs, N, C, plane](Node& nd) {
    long off = 0;
    for (const auto& x : xs) {
      const int xc = x->value.dim(1);
      if (x->requires_grad)
        for (int n = 0; n < N; ++n) {
          const double* g = nd.grad.data() + (static_cast<long>(n) * C + off) * plane;
          double* dst = x->grad.data() + static_cast<long>(n) * xc * plane;
          for (long i = 0; i < xc * plane; ++i) dst[i] += g[i];
        }
      off += xc;
    }
  });
}

Var center_crop(const Var& x, int out_h, int out_w) {
  const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
  if (out_h > H || out_w > W) throw std::invalid_argument("center_crop: output larger than input");
  const int oy = (H - out_h) / 2, ox = (W - out_w) / 2;
  Tensor y({N, C, out_h, out_w});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < out_h; ++i)
        for (int j = 0; j < out_w; ++j) y.at(n, c, i, j) = x->value.at(n, c, oy + i, ox + j);
  return make_node(std::move(y), {x}, [x, oy, ox, out_h, out_w](Node& nd) {
    const int N = nd.value.dim(0), C = nd.value.dim(1);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < out_h; ++i)
          for (int j = 0; j < out_w; ++j) x->grad.at(n, c, oy + i, ox + j) += nd.grad.at(n, c, i, j);
  });
}

Var xcorr_depthwise(const Var& z, const Var& x) {
  Tensor y = kernels::xcorr_depthwise(z->value, x->value);
  return make_node(std::move(y), {z, x}, [z, x](Node& nd) {
    if (z->requires_grad) {
      Tensor gz = kernels::xcorr_backward_z(nd.grad, x->value, z->value.dim(2));
      for (long i = 0; i < gz.numel(); ++i) z->grad[i] += gz[i];
    }
    if (x->requires_grad) {
      Tensor gx = kernels::xcorr_backward_x(nd.grad, z->value, x->value.dim(2));
      for (long i = 0; i < gx.numel(); ++i) x->grad[i] += gx[i];
    }
  });
}

Var exp_clamped(const Var& x, double hi) {
  Tensor y(x->value.shape());
  const long n = y.numel();
  for (long i = 0; i < n; ++i) y[i] = std::exp(std::min(x->value[i], hi));
  return make_node(std::move(y), {x}, [x, hi](Node& nd) {
    const long m = nd.value.numel();
    for (long i = 0; i < m; ++i)
      if (x->value[i] < hi) x->grad[i] += nd.grad[i] * nd.value[i];
  });
}

Var softmax_cross_entropy(const Var& logits, const Tensor& labels) {
  const int N = logits->value.dim(0), C = logits->value.dim(1);
  if (C != 2) throw std::invalid_argument("softmax_cross_entropy: two-class maps expected");
  const long plane = static_cast<long>(logits->value.dim(2)) * logits->value.dim(3);
  if (labels.numel() != N * plane) throw std::invalid_argument("softmax_cross_entropy: label shape");
  long count = 0;
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    const double* l0 = logits->value.data() + (static_cast<long>(n) * C + 0) * plane;
    const double* l1 = logits->value.data() + (static_cast<long>(n) * C + 1) * plane;
    const double* lb = labels.data() + static_cast<long>(n) * plane;
    for (long j = 0; j < plane; ++j) {
      if (lb[j] < 0.0) continue;
      ++count;
      const double m = std::max(l0[j], l1[j]);
      const double lse = m + std::log(std::exp(l0[j] - m) + std::exp(l1[j] - m));
      loss += lse - (lb[j] > 0.5 ? l1[j] : l0[j]);
    }
  }
  if (count == 0) throw std::invalid_argument("softmax_cross_entropy: no labelled cells");
  Tensor labs = labels;
  Tensor out = Tensor::scalar(loss / static_cast<double>(count));
  return make_node(std::move(out), {logits}, [logits, labs, count, plane](Node& nd) {
    const int N = logits->value.dim(0);
    const double w = nd.grad[0] / static_cast<double>(count);
    for (int n = 0; n < N; ++n) {
      const double* l0 = logits->value.data() + (static_cast<long>(n) * 2 + 0) * plane;
      const double* l1 = logits->value.data() + (static_cast<long>(n) * 2 + 1) * plane;
      double* g0 = logits->grad.data() + (static_cast<long>(n) * 2 + 0) * plane;
      double* g1 = logits->grad.data() + (static_cast<long>(n) * 2 + 1) * plane;
      const double* lb = labs.data() + static_cast<long>(n) * plane;
      for (long j = 0; j < plane; ++j) {
        if (lb[j] < 0.0) continue;
        const double m = std::max(l0[j], l1[j]);
        const double e0 = std::exp(l0[j] - m), e1 = std::exp(l1[j] - m);
        const double p1 = e1 / (e0 + e1);
        const bool pos = lb[j] > 0.5;
        g0[j] += w * ((1.0 - p1) - (pos ? 0.0 : 1.0));
        g1[j] += w * (p1 - (pos ? 1.0 : 0.0));
      }
    }
  });
}

Var iou_loss_ltrb(const Var& pred, const Tensor& target, const Tensor& mask) {
  const int N = pred->value.dim(0), C = pred->value.dim(1);
  if (C != 4) throw std::invalid_argument("iou_loss: four-channel maps expected");
  const long plane = static_cast<long>(pred->value.dim(2)) * pred->value.dim(3);
  long npos = 0;
  for (long i = 0; i < mask.numel(); ++i)
    if (mask[i] > 0.5) ++npos;
  if (npos == 0) throw std::invalid_argument("iou_loss: no positive cells");
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    const double* pp = pred->value.data() + static_cast<long>(n) * 4 * plane;
    const double* tp = target.data() + static_cast<long>(n) * 4 * plane;
    const double* mp = mask.data() + static_cast<long>(n) * plane;
    for (long j = 0; j < plane; ++j) {
      if (mp[j] < 0.5) continue;
      const double lp = pp[j], tpv = pp[plane + j], rp = pp[2 * plane + j], bp = pp[3 * plane + j];
      const double lg = tp[j], tg = tp[plane + j], rg = tp[2 * plane + j], bg = tp[3 * plane + j];
      const double iw = std::min(lp, lg) + std::min(rp, rg);
      const double ih = std::min(tpv, tg) + std::min(bp, bg);
      const double inter = iw * ih;
      const double ap = (lp + rp) * (tpv + bp), ag = (lg + rg) * (tg + bg);
      const double uni = ap + ag - inter;
      loss += 1.0 - (uni > 0.0 ? inter / uni : 0.0);
    }
  }
  Tensor tgt = target, msk = mask;
  Tensor out = Tensor::scalar(loss / static_cast<double>(npos));
  return make_node(std::move(out), {pred}, [pred, tgt, msk, npos, plane](Node& nd) {
    const int N = pred->value.dim(0);
    const double w = nd.grad[0] / static_cast<double>(npos);
    for (int n = 0; n < N; ++n) {
      const double* pp = pred->value.data() + static_cast<long>(n) * 4 * plane;
      const double* tp = tgt.data() + static_cast<long>(n) * 4 * plane;
      const double* mp = msk.data() + static_cast<long>(n) * plane;
      double* gp = pred->grad.data() + static_cast<long>(n) * 4 * plane;
      for (long j = 0; j < plane; ++j) {
        if (mp[j] < 0.5) continue;
        const double lp = pp[j], tpv = pp[plane + j], rp = pp[2 * plane + j], bp = pp[3 * plane + j];
        const double lg = tp[j], tg = tp[plane + j], rg = tp[2 * plane + j], bg = tp[3 * plane + j];
        const double iw = std::min(lp, lg) + std::min(rp, rg);
        const double ih = std::min(tpv, tg) + std::min(bp, bg);
        const double inter = iw * ih;
        const double ap = (lp + rp) * (tpv + bp), ag = (lg + rg) * (tg + bg);
        const double uni = ap + ag - inter;
        if (uni <= 0.0) continue;
        // d(1-I/U) = -(I'U - IU')/U^2 ; U' = Ap' - I'
        auto acc = [&](long ch, double dI, double dAp) {
          const double dU = dAp - dI;
          gp[ch * plane + j] += w * (-(dI * uni - inter * dU) / (uni * uni));
        };
        acc(0, (lp < lg ? 1.0 : 0.0) * ih, tpv + bp);
        acc(1, (tpv < tg ? 1.0 : 0.0) * iw, lp + rp);
        acc(2, (rp < rg ? 1.0 : 0.0) * ih, tpv + bp);
        acc(3, (bp < bg ? 1.0 : 0.0) * iw, lp + rp);
      }
    }
  });
}

Var l2_distance(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("l2_distance: shape mismatch");
  double s = 0.0;
  const long n = a->value.numel();
  for (long i = 0; i < n; ++i) {
    const double d = a->value[i] - b->value[i];
    s += d * d;
  }
  const double norm = std::sqrt(s);
  Tensor out = Tensor::scalar(norm);
  return make_node(std::move(out), {a, b}, [a, b, norm](Node& nd) {
    if (norm == 0.0) return;
    const double w = nd.grad[0] / norm;
    const long m = a->value.numel();
    for (long i = 0; i < m; ++i) {
      const double d = a->value[i] - b->value[i];
      if (a->requires_grad) a->grad[i] += w * d;
      if (b->requires_grad) b->grad[i] -= w * d;
    }
  });
}

}  // namespace tsf::autograd
