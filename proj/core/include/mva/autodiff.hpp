#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mva/rng.hpp"
#include "mva/tensor.hpp"

namespace mva::ad {

class Node;
using Var = std::shared_ptr<Node>;

// One record of the computation tape. Saved activations needed for the
// backward pass live in the closure of backward_fn.
class Node {
public:
    Tensor value;
    Tensor grad;  // allocated on first touch during backward
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;
    bool backward_done = false;  // set on the root after backward()

    Tensor& ensure_grad() {
        if (grad.empty()) grad = Tensor::zeros(value.shape());
        return grad;
    }
};

Var constant(Tensor value);
Var leaf(Tensor value);  // trainable: requires_grad = true
Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn);

// Reverse-mode sweep from a scalar root. Topological order, each node
// visited exactly once. Throws if called twice on the same root.
void backward(const Var& root);

// ---- ops -------------------------------------------------------------

// input [Cin,H,W] * kernel [Cout,Cin,kH,kW] -> [Cout,H',W'], zero padding.
Var conv2d(const Var& input, const Var& kernel, int stride, int padding);
// Per-output-channel bias add on a [C,H,W] map.
Var bias_channels(const Var& x, const Var& bias);

// 2x2 max pooling, H and W must be even. Gradient routes to the argmax
// cell; ties go to the lowest linear index.
Var maxpool2(const Var& input);

// Nearest-neighbour 2x upsample.
Var upsample2(const Var& input);

struct BatchNormStats {
    Tensor running_mean;  // [C]
    Tensor running_var;   // [C]
    bool initialized = false;
    double momentum = 0.9;
};

// Per-channel normalisation over the spatial positions of the current
// batch, affine rescale by gamma/beta. `stats` accumulates running moments
// for inference mode (training=false reads them instead).
Var batchnorm(const Var& x, const Var& gamma, const Var& beta, double eps,
              BatchNormStats* stats, bool training);

Var relu(const Var& x);

// x flat [n], weight [out,n], bias [out] -> [out].
Var dense(const Var& x, const Var& weight, const Var& bias);

// View with a different shape, same element count.
Var reshape(const Var& x, std::vector<int> shape);

// Row-wise softmax on [rows,k] (or a single [k] vector).
Var softmax(const Var& logits);

// Scalar loss: -log softmax(logits)[label], logits [k].
Var softmax_cross_entropy(const Var& logits, int label);

// Elementwise smooth-L1: 0.5 x^2 for |x|<1 else |x|-0.5.
Var smooth_l1(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& x, double s);
Var sum(const Var& x);                       // scalar
Var concat(const std::vector<Var>& parts);   // flat concatenation
Var concat_channels(const Var& a, const Var& b);  // [Ca+Cb,H,W]

// ---- optimiser -------------------------------------------------------

// Plain SGD with optional momentum. Velocity is kept per parameter node.
class Sgd {
public:
    Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    // In-place descent update; rejects non-finite gradients.
    void step(const std::vector<Var>& params);
    static void zero_grad(const std::vector<Var>& params);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    // Per-tensor gradient-norm clipping applied inside step(); 0 disables it.
    void set_clip_norm(double max_norm) { clip_norm_ = max_norm; }

private:
    double lr_;
    double momentum_;
    double clip_norm_ = 0.0;
    std::vector<std::pair<Node*, Tensor>> velocity_;
};

// Fan-in scaled Gaussian init (He-style), seeded.
Tensor he_init(const std::vector<int>& shape, int fan_in, Rng& rng);

}  // namespace mva::ad
