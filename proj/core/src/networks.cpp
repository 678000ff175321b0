#include "mva/networks.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

#include "mva/image.hpp"

namespace mva {

using ad::Var;

// ---- layers ----------------------------------------------------------

Conv2dLayer::Conv2dLayer(int cin, int cout, int k, int stride, int padding, Rng& rng)
    : stride(stride), padding(padding) {
    kernel = ad::leaf(ad::he_init({cout, cin, k, k}, cin * k * k, rng));
    bias = ad::leaf(Tensor::zeros({cout}));
}

Var Conv2dLayer::forward(const Var& x) const {
    return ad::bias_channels(ad::conv2d(x, kernel, stride, padding), bias);
}

void Conv2dLayer::collect(std::vector<Var>& params) const {
    params.push_back(kernel);
    params.push_back(bias);
}

void Conv2dLayer::save(WeightContainer& w, const std::string& prefix) const {
    w.push_back({prefix + "/kernel", kernel->value});
    w.push_back({prefix + "/bias", bias->value});
}

namespace {

const Tensor& required(const WeightContainer& w, const std::string& name) {
    const Tensor* t = find_weight(w, name);
    if (!t) throw std::runtime_error("missing weight entry: " + name);
    return *t;
}

}  // namespace

void Conv2dLayer::load(const WeightContainer& w, const std::string& prefix) {
    kernel->value = required(w, prefix + "/kernel");
    bias->value = required(w, prefix + "/bias");
}

BatchNormLayer::BatchNormLayer(int channels) {
    gamma = ad::leaf(Tensor::full({channels}, 1.0));
    beta = ad::leaf(Tensor::zeros({channels}));
}

Var BatchNormLayer::forward(const Var& x, bool training) {
    return ad::batchnorm(x, gamma, beta, eps, &stats, training);
}

void BatchNormLayer::collect(std::vector<Var>& params) const {
    params.push_back(gamma);
    params.push_back(beta);
}

void BatchNormLayer::save(WeightContainer& w, const std::string& prefix) const {
    w.push_back({prefix + "/gamma", gamma->value});
    w.push_back({prefix + "/beta", beta->value});
    if (stats.initialized) {
        w.push_back({prefix + "/running_mean", stats.running_mean});
        w.push_back({prefix + "/running_var", stats.running_var});
    }
}

void BatchNormLayer::load(const WeightContainer& w, const std::string& prefix) {
    gamma->value = required(w, prefix + "/gamma");
    beta->value = required(w, prefix + "/beta");
    const Tensor* rm = find_weight(w, prefix + "/running_mean");
    const Tensor* rv = find_weight(w, prefix + "/running_var");
    if (rm && rv) {
        stats.running_mean = *rm;
        stats.running_var = *rv;
        stats.initialized = true;
    }
}

DenseLayer::DenseLayer(int in, int out, Rng& rng) {
    weight = ad::leaf(ad::he_init({out, in}, in, rng));
    bias = ad::leaf(Tensor::zeros({out}));
}

Var DenseLayer::forward(const Var& x) const { return ad::dense(x, weight, bias); }

void DenseLayer::collect(std::vector<Var>& params) const {
    params.push_back(weight);
    params.push_back(bias);
}

void DenseLayer::save(WeightContainer& w, const std::string& prefix) const {
    w.push_back({prefix + "/weight", weight->value});
    w.push_back({prefix + "/bias", bias->value});
}

void DenseLayer::load(const WeightContainer& w, const std::string& prefix) {
    weight->value = required(w, prefix + "/weight");
    bias->value = required(w, prefix + "/bias");
}

// ---- residual unit ---------------------------------------------------

ResidualUnit::ResidualUnit(int cin, int cout, Rng& rng) {
    const int mid = std::max(cout / 2, 1);
    bn1 = BatchNormLayer(cin);
    c1 = Conv2dLayer(cin, mid, 1, 1, 0, rng);
    bn2 = BatchNormLayer(mid);
    c2 = Conv2dLayer(mid, mid, 3, 1, 1, rng);
    bn3 = BatchNormLayer(mid);
    c3 = Conv2dLayer(mid, cout, 1, 1, 0, rng);
    if (cin != cout) {
        skip = Conv2dLayer(cin, cout, 1, 1, 0, rng);
        has_skip = true;
    }
}

Var ResidualUnit::forward(const Var& x, bool training) {
    Var f = c1.forward(ad::relu(bn1.forward(x, training)));
    f = c2.forward(ad::relu(bn2.forward(f, training)));
    f = c3.forward(ad::relu(bn3.forward(f, training)));
    Var h = has_skip ? skip.forward(x) : x;
    return ad::add(h, f);
}

void ResidualUnit::collect(std::vector<Var>& params) const {
    bn1.collect(params);
    c1.collect(params);
    bn2.collect(params);
    c2.collect(params);
    bn3.collect(params);
    c3.collect(params);
    if (has_skip) skip.collect(params);
}

void ResidualUnit::save(WeightContainer& w, const std::string& prefix) const {
    bn1.save(w, prefix + "/bn1");
    c1.save(w, prefix + "/c1");
    bn2.save(w, prefix + "/bn2");
    c2.save(w, prefix + "/c2");
    bn3.save(w, prefix + "/bn3");
    c3.save(w, prefix + "/c3");
    if (has_skip) skip.save(w, prefix + "/skip");
}

void ResidualUnit::load(const WeightContainer& w, const std::string& prefix) {
    bn1.load(w, prefix + "/bn1");
    c1.load(w, prefix + "/c1");
    bn2.load(w, prefix + "/bn2");
    c2.load(w, prefix + "/c2");
    bn3.load(w, prefix + "/bn3");
    c3.load(w, prefix + "/c3");
    if (has_skip) skip.load(w, prefix + "/skip");
}

// ---- hourglass -------------------------------------------------------

Hourglass::Hourglass(int scales, int channels, Rng& rng) : scales(scales) {
    if (scales < 1) throw DimensionError("hourglass: scales must be >= 1");
    branch = ResidualUnit(channels, channels, rng);
    down = ResidualUnit(channels, channels, rng);
    post = ResidualUnit(channels, channels, rng);
    if (scales > 1)
        inner = std::make_unique<Hourglass>(scales - 1, channels, rng);
    else
        innermost = ResidualUnit(channels, channels, rng);
}

Var Hourglass::forward(const Var& x, bool training) {
    const int s = x->value.dim(1);
    if (s % 2 != 0)
        throw DimensionError("hourglass: spatial size not divisible at scale " +
                             std::to_string(scales));
    Var b = branch.forward(x, training);
    Var d = down.forward(ad::maxpool2(x), training);
    Var i = inner ? inner->forward(d, training) : innermost.forward(d, training);
    Var up = ad::upsample2(i);
    return post.forward(ad::add(b, up), training);
}

void Hourglass::collect(std::vector<Var>& params) const {
    branch.collect(params);
    down.collect(params);
    post.collect(params);
    if (inner)
        inner->collect(params);
    else
        innermost.collect(params);
}

void Hourglass::save(WeightContainer& w, const std::string& prefix) const {
    branch.save(w, prefix + "/branch");
    down.save(w, prefix + "/down");
    post.save(w, prefix + "/post");
    if (inner)
        inner->save(w, prefix + "/inner");
    else
        innermost.save(w, prefix + "/innermost");
}

void Hourglass::load(const WeightContainer& w, const std::string& prefix) {
    branch.load(w, prefix + "/branch");
    down.load(w, prefix + "/down");
    post.load(w, prefix + "/post");
    if (inner)
        inner->load(w, prefix + "/inner");
    else
        innermost.load(w, prefix + "/innermost");
}

// ---- MHM -------------------------------------------------------------

void HourglassConfig::validate() const {
    if (scales < 1 || channels < 1 || input_size < 8)
        throw DimensionError("hourglass config: bad scales/channels/input_size");
    const int div = 1 << (scales + 2);
    if (input_size % div != 0)
        throw DimensionError("hourglass config: input_size " + std::to_string(input_size) +
                             " not divisible by 2^(scales+2) = " + std::to_string(div));
    if (heatmap_channels < 1)
        throw DimensionError("hourglass config: heatmap_channels must be >= 1");
    if (stacks != 1 && stacks != 2)
        throw DimensionError("hourglass config: stacks must be 1 or 2");
}

MhmModel::MhmModel(const HourglassConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    stem_conv = Conv2dLayer(3, cfg.channels, 7, 2, 3, rng);
    stem_bn = BatchNormLayer(cfg.channels);
    stem_res = ResidualUnit(cfg.channels, cfg.channels, rng);
    hg1 = Hourglass(cfg.scales, cfg.channels, rng);
    head1 = Conv2dLayer(cfg.channels, cfg.heatmap_channels, 1, 1, 0, rng);
    if (cfg.stacks == 2) {
        fuse = Conv2dLayer(cfg.channels + cfg.heatmap_channels, cfg.channels, 1, 1, 0, rng);
        hg2 = Hourglass(cfg.scales, cfg.channels, rng);
        head2 = Conv2dLayer(cfg.channels, cfg.heatmap_channels, 1, 1, 0, rng);
    }
    // damp the heads so the initial prediction sits near zero; keeps the
    // first regression steps stable at practical learning rates
    for (Conv2dLayer* head : {&head1, &head2}) {
        if (!head->kernel) continue;
        for (std::size_t i = 0; i < head->kernel->value.numel(); ++i)
            head->kernel->value[i] *= 0.01;
    }
}

std::vector<Var> MhmModel::forward(const Var& face_crop) {
    if (face_crop->value.dim(1) != cfg.input_size)
        throw DimensionError("mhm: input size mismatch");
    Var f = stem_conv.forward(face_crop);
    f = ad::relu(stem_bn.forward(f, training));
    f = stem_res.forward(f, training);
    f = ad::maxpool2(f);
    Var h1 = hg1.forward(f, training);
    Var m1 = head1.forward(h1);
    if (cfg.stacks == 1) return {m1};
    Var cat = ad::concat_channels(h1, m1);
    Var f2 = ad::add(f, fuse.forward(cat));
    Var h2 = hg2.forward(f2, training);
    Var m2 = head2.forward(h2);
    return {m1, m2};
}

HeatmapStack MhmModel::predict(const Tensor& face_crop) {
    const bool was_training = training;
    training = false;
    auto outs = forward(ad::constant(face_crop));
    training = was_training;
    HeatmapStack stack;
    stack.maps = outs.back()->value;
    stack.ratio = 4.0;
    return stack;
}

std::vector<Var> MhmModel::params() const {
    std::vector<Var> p;
    stem_conv.collect(p);
    stem_bn.collect(p);
    stem_res.collect(p);
    hg1.collect(p);
    head1.collect(p);
    if (cfg.stacks == 2) {
        fuse.collect(p);
        hg2.collect(p);
        head2.collect(p);
    }
    return p;
}

void MhmModel::save(const std::string& path) const {
    WeightContainer w;
    stem_conv.save(w, "stem/conv");
    stem_bn.save(w, "stem/bn");
    stem_res.save(w, "stem/res");
    hg1.save(w, "hg1");
    head1.save(w, "head1");
    if (cfg.stacks == 2) {
        fuse.save(w, "fuse");
        hg2.save(w, "hg2");
        head2.save(w, "head2");
    }
    save_weights(path, w);
    nlohmann::json j;
    j["type"] = "mhm";
    j["scales"] = cfg.scales;
    j["channels"] = cfg.channels;
    j["input_size"] = cfg.input_size;
    j["heatmap_channels"] = cfg.heatmap_channels;
    j["stacks"] = cfg.stacks;
    j["sigma"] = cfg.sigma;
    std::ofstream os(path + ".json");
    os << j.dump(1);
}

MhmModel MhmModel::load(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw std::runtime_error("missing model sidecar: " + path + ".json");
    nlohmann::json j;
    is >> j;
    HourglassConfig cfg;
    cfg.scales = j.at("scales").get<int>();
    cfg.channels = j.at("channels").get<int>();
    cfg.input_size = j.at("input_size").get<int>();
    cfg.heatmap_channels = j.at("heatmap_channels").get<int>();
    cfg.stacks = j.at("stacks").get<int>();
    cfg.sigma = j.at("sigma").get<double>();
    Rng rng(0);
    MhmModel m(cfg, rng);
    WeightContainer w = load_weights(path);
    m.stem_conv.load(w, "stem/conv");
    m.stem_bn.load(w, "stem/bn");
    m.stem_res.load(w, "stem/res");
    m.hg1.load(w, "hg1");
    m.head1.load(w, "head1");
    if (cfg.stacks == 2) {
        m.fuse.load(w, "fuse");
        m.hg2.load(w, "hg2");
        m.head2.load(w, "head2");
    }
    return m;
}

// ---- cascade stage nets ----------------------------------------------

CascadeStageNet::CascadeStageNet(int stage_, Rng& rng) : stage(stage_) {
    if (stage == 1) {
        convs.push_back(Conv2dLayer(3, 10, 3, 1, 0, rng));
        convs.push_back(Conv2dLayer(10, 16, 3, 1, 0, rng));
        convs.push_back(Conv2dLayer(16, 32, 3, 1, 0, rng));
        conv_cls = Conv2dLayer(32, 2, 1, 1, 0, rng);
        conv_box = Conv2dLayer(32, 4, 1, 1, 0, rng);
        conv_lmk = Conv2dLayer(32, 10, 1, 1, 0, rng);
    } else if (stage == 2) {
        convs.push_back(Conv2dLayer(3, 28, 3, 2, 0, rng));
        convs.push_back(Conv2dLayer(28, 48, 3, 2, 0, rng));
        convs.push_back(Conv2dLayer(48, 64, 3, 1, 0, rng));
        fc_trunk = DenseLayer(64 * 3 * 3, 128, rng);
        fc_cls = DenseLayer(128, 2, rng);
        fc_box = DenseLayer(128, 4, rng);
        fc_lmk = DenseLayer(128, 10, rng);
    } else if (stage == 3) {
        convs.push_back(Conv2dLayer(3, 32, 3, 2, 0, rng));
        convs.push_back(Conv2dLayer(32, 64, 3, 2, 0, rng));
        convs.push_back(Conv2dLayer(64, 64, 3, 2, 0, rng));
        convs.push_back(Conv2dLayer(64, 128, 3, 1, 0, rng));
        fc_trunk = DenseLayer(128 * 3 * 3, 256, rng);
        fc_cls = DenseLayer(256, 2, rng);
        fc_box = DenseLayer(256, 4, rng);
        fc_lmk = DenseLayer(256, 10, rng);
    } else {
        throw DimensionError("cascade stage must be 1..3");
    }
}

CascadeHeads CascadeStageNet::forward(const Var& x) const {
    CascadeHeads heads;
    if (stage == 1) {
        Var f = ad::relu(convs[0].forward(x));
        f = ad::maxpool2(f);
        f = ad::relu(convs[1].forward(f));
        f = ad::relu(convs[2].forward(f));
        heads.cls = conv_cls.forward(f);
        heads.box = conv_box.forward(f);
        heads.landmarks = conv_lmk.forward(f);
    } else {
        Var f = x;
        for (const auto& c : convs) f = ad::relu(c.forward(f));
        f = ad::relu(fc_trunk.forward(ad::reshape(
            f, {static_cast<int>(f->value.numel())})));
        heads.cls = fc_cls.forward(f);
        heads.box = fc_box.forward(f);
        heads.landmarks = fc_lmk.forward(f);
    }
    return heads;
}

std::vector<Var> CascadeStageNet::params() const {
    std::vector<Var> p;
    for (const auto& c : convs) c.collect(p);
    if (stage == 1) {
        conv_cls.collect(p);
        conv_box.collect(p);
        conv_lmk.collect(p);
    } else {
        fc_trunk.collect(p);
        fc_cls.collect(p);
        fc_box.collect(p);
        fc_lmk.collect(p);
    }
    return p;
}

void CascadeStageNet::save(const std::string& path) const {
    WeightContainer w;
    for (std::size_t i = 0; i < convs.size(); ++i)
        convs[i].save(w, "conv" + std::to_string(i));
    if (stage == 1) {
        conv_cls.save(w, "head_cls");
        conv_box.save(w, "head_box");
        conv_lmk.save(w, "head_lmk");
    } else {
        fc_trunk.save(w, "fc_trunk");
        fc_cls.save(w, "head_cls");
        fc_box.save(w, "head_box");
        fc_lmk.save(w, "head_lmk");
    }
    save_weights(path, w);
    nlohmann::json j;
    j["type"] = "cascade_stage";
    j["stage"] = stage;
    std::ofstream os(path + ".json");
    os << j.dump(1);
}

CascadeStageNet CascadeStageNet::load(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw std::runtime_error("missing model sidecar: " + path + ".json");
    nlohmann::json j;
    is >> j;
    Rng rng(0);
    CascadeStageNet net(j.at("stage").get<int>(), rng);
    WeightContainer w = load_weights(path);
    for (std::size_t i = 0; i < net.convs.size(); ++i)
        net.convs[i].load(w, "conv" + std::to_string(i));
    if (net.stage == 1) {
        net.conv_cls.load(w, "head_cls");
        net.conv_box.load(w, "head_box");
        net.conv_lmk.load(w, "head_lmk");
    } else {
        net.fc_trunk.load(w, "fc_trunk");
        net.fc_cls.load(w, "head_cls");
        net.fc_box.load(w, "head_box");
        net.fc_lmk.load(w, "head_lmk");
    }
    return net;
}

// ---- multi-task loss -------------------------------------------------

namespace {

// Elementwise product with a constant mask.
Var mask_mul(const Var& x, Tensor mask) {
    require_same_shape(x->value, mask, "mask_mul");
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
    auto m = std::make_shared<Tensor>(std::move(mask));
    return ad::make_node(std::move(out), {x}, [m](ad::Node& n) {
        Var in = n.parents[0];
        if (!in->requires_grad) return;
        Tensor& g = in->ensure_grad();
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * (*m)[i];
    });
}

}  // namespace

Var cascade_multitask_loss(const CascadeHeads& heads, const CascadeLabels& labels,
                           double lambda1, double lambda2) {
    if (lambda1 < 0 || lambda2 < 0)
        throw NumericError("cascade_multitask_loss: lambdas must be >= 0");
    Var cls = heads.cls->value.rank() == 3
                  ? ad::reshape(heads.cls, {2})
                  : heads.cls;
    Var loss = labels.use_cls ? ad::softmax_cross_entropy(cls, labels.cls)
                              : ad::constant(Tensor::scalar(0.0));
    if (labels.cls == 1) {
        Var box = heads.box->value.rank() == 3 ? ad::reshape(heads.box, {4}) : heads.box;
        Tensor tstar({4}, std::vector<double>(labels.box.begin(), labels.box.end()));
        Var box_term = ad::sum(ad::smooth_l1(ad::sub(box, ad::constant(tstar))));
        loss = ad::add(loss, ad::scale(box_term, lambda1));

        Var lmk = heads.landmarks->value.rank() == 3 ? ad::reshape(heads.landmarks, {10})
                                                     : heads.landmarks;
        Tensor lstar({10}, std::vector<double>(labels.lmk.begin(), labels.lmk.end()));
        Tensor validity({10});
        for (int i = 0; i < 5; ++i)
            validity[2 * i] = validity[2 * i + 1] = labels.valid[i];
        Var lmk_term = ad::sum(mask_mul(
            ad::smooth_l1(ad::sub(lmk, ad::constant(lstar))), std::move(validity)));
        loss = ad::add(loss, ad::scale(lmk_term, lambda2));
    }
    return loss;
}

std::array<double, 10> encode_landmark_target(const Box& window, const LandmarkSet& five) {
    if (five.size() != 5) throw DimensionError("encode_landmark_target: expected 5 points");
    if (!window.valid()) throw NumericError("encode_landmark_target: degenerate window");
    std::array<double, 10> t{};
    for (int k = 0; k < 5; ++k) {
        t[2 * k] = (five.points[k].x - window.cx()) / window.max_side();
        t[2 * k + 1] = (five.points[k].y - window.cy()) / window.max_side();
    }
    return t;
}

LandmarkSet decode_landmark_target(const Box& window, const std::array<double, 10>& t) {
    LandmarkSet five = LandmarkSet::make(Schema::P5);
    for (int k = 0; k < 5; ++k) {
        five.points[k].x = window.cx() + t[2 * k] * window.max_side();
        five.points[k].y = window.cy() + t[2 * k + 1] * window.max_side();
        five.mask[k] = true;
    }
    return five;
}

// ---- patch classifier ------------------------------------------------

PatchClassifier::PatchClassifier(int n_patches_, Rng& rng) : n_patches(n_patches_) {
    c1 = Conv2dLayer(1, 8, 3, 2, 0, rng);   // 24 -> 11
    c2 = Conv2dLayer(8, 8, 3, 2, 0, rng);   // 11 -> 5
    fc1 = DenseLayer(n_patches * 8 * 5 * 5, 64, rng);
    fc2 = DenseLayer(64, 2, rng);
}

Var PatchClassifier::forward(const std::vector<Var>& patches) const {
    if (static_cast<int>(patches.size()) != n_patches)
        throw DimensionError("patch classifier expects " + std::to_string(n_patches) +
                             " patches, got " + std::to_string(patches.size()));
    std::vector<Var> feats;
    feats.reserve(patches.size());
    for (const auto& p : patches) {
        Var f = ad::relu(c1.forward(p));
        f = ad::relu(c2.forward(f));
        feats.push_back(ad::reshape(f, {static_cast<int>(f->value.numel())}));
    }
    Var cat = ad::concat(feats);
    return fc2.forward(ad::relu(fc1.forward(cat)));
}

double PatchClassifier::face_probability(const std::vector<Tensor>& patches) const {
    std::vector<Var> vars;
    vars.reserve(patches.size());
    for (const auto& p : patches) vars.push_back(ad::constant(p));
    Var logits = forward(vars);
    Var probs = ad::softmax(logits);
    return probs->value[1];
}

std::vector<Var> PatchClassifier::params() const {
    std::vector<Var> p;
    c1.collect(p);
    c2.collect(p);
    fc1.collect(p);
    fc2.collect(p);
    return p;
}

void PatchClassifier::save(const std::string& path) const {
    WeightContainer w;
    c1.save(w, "c1");
    c2.save(w, "c2");
    fc1.save(w, "fc1");
    fc2.save(w, "fc2");
    save_weights(path, w);
    nlohmann::json j;
    j["type"] = "patch_classifier";
    j["n_patches"] = n_patches;
    j["patch_size"] = patch_size;
    std::ofstream os(path + ".json");
    os << j.dump(1);
}

PatchClassifier PatchClassifier::load(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw std::runtime_error("missing model sidecar: " + path + ".json");
    nlohmann::json j;
    is >> j;
    Rng rng(0);
    PatchClassifier pc(j.at("n_patches").get<int>(), rng);
    WeightContainer w = load_weights(path);
    pc.c1.load(w, "c1");
    pc.c2.load(w, "c2");
    pc.fc1.load(w, "fc1");
    pc.fc2.load(w, "fc2");
    return pc;
}

std::vector<Tensor> extract_patches(const Tensor& gray, const LandmarkSet& landmarks,
                                    int patch_size) {
    if (gray.rank() != 3 || gray.dim(0) != 1)
        throw DimensionError("extract_patches: expected a [1,H,W] grayscale image");
    std::vector<Tensor> patches;
    patches.reserve(landmarks.points.size());
    for (int k = 0; k < landmarks.size(); ++k) {
        if (!landmarks.mask[k]) {
            patches.push_back(Tensor::zeros({1, patch_size, patch_size}));
            continue;
        }
        const int x0 = static_cast<int>(std::lround(landmarks.points[k].x)) - patch_size / 2;
        const int y0 = static_cast<int>(std::lround(landmarks.points[k].y)) - patch_size / 2;
        patches.push_back(crop(gray, x0, y0, patch_size, patch_size));
    }
    return patches;
}

}  // namespace mva
