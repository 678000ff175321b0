#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "mva/autodiff.hpp"
#include "mva/heatmap.hpp"
#include "mva/rng.hpp"
#include "mva/serialize.hpp"

namespace mva {

// ---- parameter-owning layers -----------------------------------------

struct Conv2dLayer {
    ad::Var kernel, bias;
    int stride = 1, padding = 0;

    Conv2dLayer() = default;
    Conv2dLayer(int cin, int cout, int k, int stride, int padding, Rng& rng);
    ad::Var forward(const ad::Var& x) const;
    void collect(std::vector<ad::Var>& params) const;
    void save(WeightContainer& w, const std::string& prefix) const;
    void load(const WeightContainer& w, const std::string& prefix);
};

struct BatchNormLayer {
    ad::Var gamma, beta;
    ad::BatchNormStats stats;
    // Large enough that channels with near-zero batch variance (dead ReLU
    // inputs) cannot amplify the backward signal by more than ~30x.
    double eps = 1e-3;

    BatchNormLayer() = default;
    explicit BatchNormLayer(int channels);
    ad::Var forward(const ad::Var& x, bool training);
    void collect(std::vector<ad::Var>& params) const;
    void save(WeightContainer& w, const std::string& prefix) const;
    void load(const WeightContainer& w, const std::string& prefix);
};

struct DenseLayer {
    ad::Var weight, bias;

    DenseLayer() = default;
    DenseLayer(int in, int out, Rng& rng);
    ad::Var forward(const ad::Var& x) const;
    void collect(std::vector<ad::Var>& params) const;
    void save(WeightContainer& w, const std::string& prefix) const;
    void load(const WeightContainer& w, const std::string& prefix);
};

// ---- residual unit and hourglass -------------------------------------

// x_out = skip(x) + F(x): F is BN-ReLU-conv stacked 1x1 -> 3x3 -> 1x1
// with a C/2 bottleneck; skip is identity when channels match, else 1x1.
struct ResidualUnit {
    BatchNormLayer bn1, bn2, bn3;
    Conv2dLayer c1, c2, c3;
    Conv2dLayer skip;
    bool has_skip = false;

    ResidualUnit() = default;
    ResidualUnit(int cin, int cout, Rng& rng);
    ad::Var forward(const ad::Var& x, bool training);
    void collect(std::vector<ad::Var>& params) const;
    void save(WeightContainer& w, const std::string& prefix) const;
    void load(const WeightContainer& w, const std::string& prefix);
};

// Symmetric top-down/bottom-up module; spatial size preserved end to end.
struct Hourglass {
    int scales = 2;
    ResidualUnit branch, down, post;
    std::unique_ptr<Hourglass> inner;  // null at scales == 1
    ResidualUnit innermost;            // used when inner is null

    Hourglass() = default;
    Hourglass(int scales, int channels, Rng& rng);
    ad::Var forward(const ad::Var& x, bool training);
    void collect(std::vector<ad::Var>& params) const;
    void save(WeightContainer& w, const std::string& prefix) const;
    void load(const WeightContainer& w, const std::string& prefix);
};

struct HourglassConfig {
    int scales = 2;
    int channels = 64;
    int input_size = 64;
    int heatmap_channels = 68;
    int stacks = 1;  // 2 = intermediate supervision
    double sigma = 1.0;

    int heatmap_size() const { return input_size / 4; }
    void validate() const;  // input_size must be divisible by 2^(scales+2)
};

// Multi-view Hourglass Model: stem (7x7 stride-2 conv, residual, maxpool)
// then one or two hourglass stacks with 1x1 heads.
struct MhmModel {
    HourglassConfig cfg;
    Conv2dLayer stem_conv;
    BatchNormLayer stem_bn;
    ResidualUnit stem_res;
    Hourglass hg1;
    Conv2dLayer head1;
    // second stack (intermediate supervision)
    Conv2dLayer fuse;
    Hourglass hg2;
    Conv2dLayer head2;
    bool training = false;

    MhmModel() = default;
    MhmModel(const HourglassConfig& cfg, Rng& rng);
    // One Var per stack; the final prediction is the last stack.
    std::vector<ad::Var> forward(const ad::Var& face_crop);
    HeatmapStack predict(const Tensor& face_crop);
    std::vector<ad::Var> params() const;
    void save(const std::string& path) const;  // weights + JSON sidecar
    static MhmModel load(const std::string& path);
};

// ---- cascade stage networks ------------------------------------------

struct CascadeHeads {
    ad::Var cls;        // [2] or [2,H,W]
    ad::Var box;        // [4] or [4,H,W]
    ad::Var landmarks;  // [10] or [10,H,W]
};

// Stage 1: fully convolutional, 12x12 receptive field, stride 2.
// Stages 2/3: fixed-size crops (24 / 48) with dense heads.
struct CascadeStageNet {
    int stage = 1;
    std::vector<Conv2dLayer> convs;
    DenseLayer fc_trunk, fc_cls, fc_box, fc_lmk;
    Conv2dLayer conv_cls, conv_box, conv_lmk;  // stage 1 heads

    CascadeStageNet() = default;
    CascadeStageNet(int stage, Rng& rng);
    static int input_size(int stage) { return stage == 1 ? 12 : (stage == 2 ? 24 : 48); }
    CascadeHeads forward(const ad::Var& x) const;  // stage-1: any H,W
    std::vector<ad::Var> params() const;
    void save(const std::string& path) const;
    static CascadeStageNet load(const std::string& path);
};

struct CascadeLabels {
    int cls = 0;                    // p*: 1 positive, 0 negative
    std::array<double, 4> box{};    // t*
    std::array<double, 10> lmk{};   // l*, xy interleaved
    std::array<double, 5> valid{};  // v* per landmark
    bool use_cls = true;            // part samples train the box term only
};

// Eq-style multi-task loss: CE + lambda1 p* R(t - t*) + lambda2 p* R v*(l - l*).
ad::Var cascade_multitask_loss(const CascadeHeads& heads, const CascadeLabels& labels,
                               double lambda1, double lambda2);

// Landmark regression targets are window-relative:
// l* = (l - window centre) / window side, inverted exactly at decode time.
std::array<double, 10> encode_landmark_target(const Box& window, const LandmarkSet& five);
LandmarkSet decode_landmark_target(const Box& window, const std::array<double, 10>& t);

// ---- shape-indexed patch classifier ----------------------------------

// Shared per-patch conv tower, concatenated features, 2-way softmax.
struct PatchClassifier {
    int n_patches = 68;
    int patch_size = 24;
    Conv2dLayer c1, c2;
    DenseLayer fc1, fc2;

    PatchClassifier() = default;
    PatchClassifier(int n_patches, Rng& rng);
    // patches: one [1,24,24] tensor per landmark, in landmark order.
    ad::Var forward(const std::vector<ad::Var>& patches) const;  // [2] logits
    double face_probability(const std::vector<Tensor>& patches) const;
    std::vector<ad::Var> params() const;
    void save(const std::string& path) const;
    static PatchClassifier load(const std::string& path);
};

// One patch_size x patch_size grayscale window centred on each landmark,
// zero-filled outside the image. Masked-out landmarks yield zero patches.
std::vector<Tensor> extract_patches(const Tensor& gray, const LandmarkSet& landmarks,
                                    int patch_size);

}  // namespace mva
