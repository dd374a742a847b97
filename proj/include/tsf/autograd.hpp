#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tsf/kernels.hpp"
#include "tsf/tensor.hpp"

// Minimal reverse-mode tape. Each op returns a Var; when no input requires a
// gradient the node records neither parents nor a closure, so inference runs
// graph-free and activations are released as soon as the Vars go out of scope.

namespace tsf::autograd {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;

  Tensor& ensure_grad() {
    if (!grad.same_shape(value) || grad.numel() != value.numel()) grad = Tensor(value.shape());
    return grad;
  }
};

Var leaf(Tensor value, bool requires_grad = false);
Var constant(Tensor value);

// Runs reverse-mode accumulation from a scalar root. Leaf grads are added
// into Node::grad; call zero_grad between steps.
void backward(const Var& root);
void zero_grad(const std::vector<Var>& params);

Var conv2d(const Var& x, const Var& w, const Var& b, const kernels::ConvSpec& spec);
Var relu(const Var& x);
Var maxpool(const Var& x, int kernel, int stride, int pad);

// Batch-statistics normalization: mean/var computed from x, full backward.
Var batchnorm_train(const Var& x, const Var& gamma, const Var& beta, Tensor& batch_mean,
                    Tensor& batch_var, double eps);
// Running-statistics normalization: a per-channel affine map.
Var batchnorm_eval(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean,
                   const Tensor& var, double eps);

Var add(const Var& a, const Var& b);
Var scale(const Var& x, double c);
Var scale_by(const Var& x, const Var& s);  // s is a 1-element parameter
Var concat_channels(const std::vector<Var>& xs);
Var center_crop(const Var& x, int out_h, int out_w);
Var xcorr_depthwise(const Var& z, const Var& x);
Var exp_clamped(const Var& x, double hi);

// labels: (N,H,W) with 1 = positive, 0 = negative, -1 = ignored.
Var softmax_cross_entropy(const Var& logits, const Tensor& labels);
// pred/target: (N,4,H,W) nonnegative (l,t,r,b) distances; mask: (N,H,W) in {0,1}.
// Mean of (1 - IoU) over masked cells.
Var iou_loss_ltrb(const Var& pred, const Tensor& target, const Tensor& mask);
// sqrt(sum((a-b)^2)), a scalar.
Var l2_distance(const Var& a, const Var& b);

}  // namespace tsf::autograd
