#include "mva/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mva/image.hpp"

namespace mva {

using ad::Var;

namespace {

// Exponentially smoothed loss used for logging and early stopping.
class RunningLoss {
public:
    double update(double v) {
        value_ = first_ ? v : 0.9 * value_ + 0.1 * v;
        first_ = false;
        return value_;
    }
    double value() const { return value_; }

private:
    double value_ = 0.0;
    bool first_ = true;
};

void maybe_log(const TrainOptions& opt, const char* tag, int step, double running) {
    if (opt.log_every > 0 && (step % opt.log_every == 0))
        std::printf("%s step %d  loss %.6f\n", tag, step, running);
    if (opt.on_step) opt.on_step(step, running);
}

}  // namespace

// ---- hourglass landmark model ----------------------------------------

MhmTrainItem prepare_mhm_item(const Sample& sample, const UnionSchema& schema,
                              const HourglassConfig& cfg) {
    if (schema.size != cfg.heatmap_channels)
        throw DimensionError("prepare_mhm_item: schema size does not match model channels");
    MhmTrainItem item;
    item.view = sample.view;
    LandmarkSet five = five_from_landmarks(sample.landmarks, sample.view);
    item.image_to_crop = estimate_similarity(five, five_point_template(cfg.input_size));
    item.crop = warp_image(sample.image, item.image_to_crop, cfg.input_size);
    LandmarkSet crop_lmks = transform_landmarks(sample.landmarks, item.image_to_crop);
    UnionPlacement placed = to_union(crop_lmks, sample.view, schema);
    item.mask = placed.mask;
    const int hm = cfg.heatmap_size();
    item.gt = render_heatmaps(placed.landmarks, item.mask, hm, hm, cfg.sigma);
    return item;
}

TrainStats train_mhm(MhmModel& model, const std::vector<Sample>& samples,
                     const UnionSchema& schema, const TrainOptions& opt) {
    if (samples.empty()) throw DimensionError("train_mhm: no samples");
    Rng rng(opt.seed);
    std::vector<MhmTrainItem> items;
    if (!opt.augment) {
        items.reserve(samples.size());
        for (const auto& s : samples) items.push_back(prepare_mhm_item(s, schema, model.cfg));
    }

    ad::Sgd sgd(opt.lr, opt.momentum);
    sgd.set_clip_norm(opt.grad_clip);
    std::vector<Var> params = model.params();
    model.training = !opt.freeze_bn;
    TrainStats stats;
    RunningLoss running;
    // Epoch-shuffled visit order: every sample appears equally often, which
    // matters when the batch size is a large fraction of a small training set.
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();
    for (int step = 0; step < opt.steps; ++step) {
        ad::Sgd::zero_grad(params);
        double batch_loss = 0.0;
        int used = 0;
        for (int b = 0; b < opt.batch; ++b) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[rng.index(i)]);
                cursor = 0;
            }
            const std::size_t idx = order[cursor++];
            MhmTrainItem fresh;
            const MhmTrainItem& item =
                opt.augment
                    ? (fresh = prepare_mhm_item(augment(samples[idx], rng.next_u64()),
                                                schema, model.cfg))
                    : items[idx];
            if (!item.mask.any()) continue;
            std::vector<Var> stacks = model.forward(ad::constant(item.crop));
            Var loss;
            for (std::size_t si = 0; si < stacks.size(); ++si) {
                Var l = masked_mse_loss(stacks[si], item.gt, item.mask).loss;
                if (si + 1 < stacks.size() && opt.stack1_weight != 1.0)
                    l = ad::scale(l, opt.stack1_weight);
                loss = loss ? ad::add(loss, l) : l;
            }
            batch_loss += loss->value[0];
            ++used;
            ad::backward(ad::scale(loss, 1.0 / opt.batch));
        }
        if (used == 0) throw NumericError("train_mhm: every sample in the batch had an empty mask");
        sgd.step(params);
        const double mean_loss = batch_loss / used;
        stats.loss_history.push_back(mean_loss);
        stats.final_loss = running.update(mean_loss);
        stats.steps_run = step + 1;
        maybe_log(opt, "mhm", step, stats.final_loss);
        if (opt.target_loss > 0 && step >= 10 && stats.final_loss < opt.target_loss) break;
    }
    model.training = false;
    return stats;
}

std::vector<double> evaluate_mhm(MhmModel& model, const std::vector<Sample>& samples,
                                 const UnionSchema& schema) {
    std::vector<double> errors;
    errors.reserve(samples.size());
    for (const auto& s : samples) {
        MhmTrainItem item = prepare_mhm_item(s, schema, model.cfg);
        HeatmapStack pred = model.predict(item.crop);
        LandmarkSet decoded = decode_peaks(pred, item.mask, item.image_to_crop.inverse());
        UnionPlacement gt = to_union(s.landmarks, s.view, schema);

        double sum = 0.0;
        int n = 0;
        for (int k = 0; k < decoded.size(); ++k) {
            if (!decoded.mask[k] || !gt.mask.v[k]) continue;
            sum += std::hypot(decoded.points[k].x - gt.landmarks.points[k].x,
                              decoded.points[k].y - gt.landmarks.points[k].y);
            ++n;
        }
        // inter-eye normaliser; profile views (coincident eye centres)
        // fall back to the face-box longest side
        LandmarkSet five = five_from_landmarks(s.landmarks, s.view);
        double norm = std::hypot(five.points[0].x - five.points[1].x,
                                 five.points[0].y - five.points[1].y);
        if (norm < 1e-9) norm = s.landmarks.bounding_box().max_side();
        if (n == 0 || norm < 1e-9) {
            errors.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        errors.push_back(sum / n / norm);
    }
    return errors;
}

// ---- detection cascade -----------------------------------------------

namespace {

Box rounded_window(double cx, double cy, double side, int image_size) {
    const int s = std::max(4, static_cast<int>(std::lround(side)));
    const int x1 = static_cast<int>(std::lround(cx - 0.5 * s));
    const int y1 = static_cast<int>(std::lround(cy - 0.5 * s));
    Box w{static_cast<double>(x1), static_cast<double>(y1),
          static_cast<double>(x1 + s), static_cast<double>(y1 + s)};
    (void)image_size;
    return w;
}

Tensor window_crop(const Tensor& image, const Box& w, int stage_size) {
    Tensor c = crop(image, static_cast<int>(w.x1), static_cast<int>(w.y1),
                    static_cast<int>(w.width()), static_cast<int>(w.height()));
    return resize(c, stage_size, stage_size);
}

double max_face_iou(const Scene& scene, const Box& w) {
    double best = 0.0;
    for (const auto& f : scene.faces) best = std::max(best, iou(w, f.box));
    return best;
}

}  // namespace

std::vector<CascadeExample> sample_cascade_examples(const Scene& scene, int stage_size,
                                                    int n_pos, int n_part, int n_neg,
                                                    Rng& rng) {
    if (scene.faces.empty() && (n_pos > 0 || n_part > 0))
        throw DimensionError("sample_cascade_examples: scene has no faces");
    const int H = scene.image.dim(1), W = scene.image.dim(2);
    std::vector<CascadeExample> out;

    auto push = [&](const Box& w, const CascadeLabels& labels) {
        CascadeExample ex;
        ex.window = w;
        ex.crop = window_crop(scene.image, w, stage_size);
        ex.labels = labels;
        out.push_back(std::move(ex));
    };

    for (int i = 0; i < n_pos; ++i) {
        for (int attempt = 0; attempt < 100; ++attempt) {
            const SceneFace& f = scene.faces[rng.index(scene.faces.size())];
            const double side = f.box.max_side();
            Box w = rounded_window(f.box.cx() + rng.uniform(-0.1, 0.1) * side,
                                   f.box.cy() + rng.uniform(-0.1, 0.1) * side,
                                   side * rng.uniform(0.85, 1.2), W);
            if (iou(w, f.box) <= 0.6) continue;
            CascadeLabels labels;
            labels.cls = 1;
            labels.box = encode_box_target(w, f.box);
            labels.lmk = encode_landmark_target(w, f.five);
            labels.valid.fill(1.0);
            push(w, labels);
            break;
        }
    }

    for (int i = 0; i < n_part; ++i) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            const SceneFace& f = scene.faces[rng.index(scene.faces.size())];
            const double side = f.box.max_side();
            Box w = rounded_window(f.box.cx() + rng.uniform(-0.4, 0.4) * side,
                                   f.box.cy() + rng.uniform(-0.4, 0.4) * side,
                                   side * rng.uniform(0.6, 1.4), W);
            const double v = iou(w, f.box);
            if (v <= 0.4 || v >= 0.65) continue;
            CascadeLabels labels;
            labels.cls = 1;          // keeps the box term active
            labels.use_cls = false;  // ambiguous for classification
            labels.box = encode_box_target(w, f.box);
            labels.valid.fill(0.0);
            push(w, labels);
            break;
        }
    }

    double mean_side = 40.0;
    if (!scene.faces.empty()) {
        mean_side = 0.0;
        for (const auto& f : scene.faces) mean_side += f.box.max_side();
        mean_side /= scene.faces.size();
    }
    for (int i = 0; i < n_neg; ++i) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            const double side = mean_side * rng.uniform(0.4, 1.6);
            if (side >= std::min(H, W)) continue;
            Box w = rounded_window(rng.uniform(0.5 * side, W - 0.5 * side),
                                   rng.uniform(0.5 * side, H - 0.5 * side), side, W);
            if (max_face_iou(scene, w) >= 0.3) continue;
            CascadeLabels labels;
            labels.cls = 0;
            push(w, labels);
            break;
        }
    }
    return out;
}

TrainStats train_cascade_stage(CascadeStageNet& net, const std::vector<CascadeExample>& data,
                               const TrainOptions& opt, double lambda1, double lambda2) {
    if (data.empty()) throw DimensionError("train_cascade_stage: no examples");
    Rng rng(opt.seed);
    ad::Sgd sgd(opt.lr, opt.momentum);
    sgd.set_clip_norm(opt.grad_clip);
    std::vector<Var> params = net.params();
    TrainStats stats;
    RunningLoss running;
    for (int step = 0; step < opt.steps; ++step) {
        ad::Sgd::zero_grad(params);
        double batch_loss = 0.0;
        for (int b = 0; b < opt.batch; ++b) {
            const CascadeExample& ex = data[rng.index(data.size())];
            CascadeHeads heads = net.forward(ad::constant(ex.crop));
            Var loss = cascade_multitask_loss(heads, ex.labels, lambda1, lambda2);
            batch_loss += loss->value[0];
            ad::backward(ad::scale(loss, 1.0 / opt.batch));
        }
        sgd.step(params);
        const double mean_loss = batch_loss / opt.batch;
        stats.loss_history.push_back(mean_loss);
        stats.final_loss = running.update(mean_loss);
        stats.steps_run = step + 1;
        maybe_log(opt, "cascade", step, stats.final_loss);
        if (opt.target_loss > 0 && step >= 10 && stats.final_loss < opt.target_loss) break;
    }
    return stats;
}

// ---- shape-indexed patch classifier ----------------------------------

std::vector<PatchExample> make_patch_examples(const std::vector<Sample>& samples,
                                              const UnionSchema& schema, int crop_size,
                                              int patch_size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PatchExample> out;
    for (const auto& s : samples) {
        LandmarkSet five = five_from_landmarks(s.landmarks, s.view);
        SimilarityTransform T;
        try {
            T = estimate_similarity(five, five_point_template(crop_size));
        } catch (const NumericError&) {
            continue;
        }
        Tensor gray = to_gray(warp_image(s.image, T, crop_size));
        UnionPlacement placed = to_union(transform_landmarks(s.landmarks, T), s.view, schema);
        PatchExample pos;
        pos.label = 1;
        pos.patches = extract_patches(gray, placed.landmarks, patch_size);
        out.push_back(std::move(pos));

        LandmarkSet scattered = LandmarkSet::make(placed.landmarks.schema);
        for (int k = 0; k < scattered.size(); ++k) {
            scattered.points[k] = {rng.uniform(0, crop_size - 1), rng.uniform(0, crop_size - 1)};
            scattered.mask[k] = true;
        }
        PatchExample neg;
        neg.label = 0;
        neg.patches = extract_patches(gray, scattered, patch_size);
        out.push_back(std::move(neg));
    }
    return out;
}

TrainStats train_patch_classifier(PatchClassifier& model,
                                  const std::vector<PatchExample>& data,
                                  const TrainOptions& opt) {
    if (data.empty()) throw DimensionError("train_patch_classifier: no examples");
    Rng rng(opt.seed);
    ad::Sgd sgd(opt.lr, opt.momentum);
    sgd.set_clip_norm(opt.grad_clip);
    std::vector<Var> params = model.params();
    TrainStats stats;
    RunningLoss running;
    for (int step = 0; step < opt.steps; ++step) {
        ad::Sgd::zero_grad(params);
        double batch_loss = 0.0;
        for (int b = 0; b < opt.batch; ++b) {
            const PatchExample& ex = data[rng.index(data.size())];
            std::vector<Var> patches;
            patches.reserve(ex.patches.size());
            for (const auto& p : ex.patches) patches.push_back(ad::constant(p));
            Var loss = ad::softmax_cross_entropy(model.forward(patches), ex.label);
            batch_loss += loss->value[0];
            ad::backward(ad::scale(loss, 1.0 / opt.batch));
        }
        sgd.step(params);
        const double mean_loss = batch_loss / opt.batch;
        stats.loss_history.push_back(mean_loss);
        stats.final_loss = running.update(mean_loss);
        stats.steps_run = step + 1;
        maybe_log(opt, "patches", step, stats.final_loss);
        if (opt.target_loss > 0 && step >= 10 && stats.final_loss < opt.target_loss) break;
    }
    return stats;
}

}  // namespace mva
