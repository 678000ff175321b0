#include "mva/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "mva/image.hpp"

namespace mva {

namespace {

// NMS that reports surviving indices so per-box payloads stay attached.
// Same ordering rules as mva::nms: score descending, ties to lower index.
std::vector<std::size_t> nms_indices(const std::vector<Box>& boxes, double thr) {
    std::vector<std::size_t> order(boxes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return boxes[a].score > boxes[b].score;
    });
    std::vector<std::size_t> keep;
    std::vector<bool> dropped(boxes.size(), false);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t i = order[oi];
        if (dropped[i]) continue;
        keep.push_back(i);
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            const std::size_t j = order[oj];
            if (!dropped[j] && iou(boxes[i], boxes[j]) > thr) dropped[j] = true;
        }
    }
    return keep;
}

double softmax_face(double c0, double c1) { return 1.0 / (1.0 + std::exp(c0 - c1)); }

Box square_window(const Box& b) {
    const double side = std::max(4.0, std::round(b.max_side()));
    const double x1 = std::round(b.cx() - 0.5 * side);
    const double y1 = std::round(b.cy() - 0.5 * side);
    Box w{x1, y1, x1 + side, y1 + side};
    w.score = b.score;
    return w;
}

Tensor window_crop(const Tensor& image, const Box& w, int out_size) {
    Tensor c = crop(image, static_cast<int>(w.x1), static_cast<int>(w.y1),
                    static_cast<int>(w.width()), static_cast<int>(w.height()));
    return resize(c, out_size, out_size);
}

std::array<double, 4> box_head_at(const Tensor& m, int i, int j) {
    return {m.at(0, i, j), m.at(1, i, j), m.at(2, i, j), m.at(3, i, j)};
}

}  // namespace

// ---- detection cascade -----------------------------------------------

std::vector<Detection> CascadeDetector::detect(const Tensor& image, const PipelineParams& p,
                                               DetectionTrace* trace) const {
    const int H = image.dim(1), W = image.dim(2);
    std::vector<Box> candidates;

    // stage 1: fully convolutional over an image pyramid; each output cell
    // scores a 12x12 window at stride 2 in level coordinates
    double s = 12.0 / p.min_face;
    while (true) {
        int eh = static_cast<int>(H * s) & ~1;
        int ew = static_cast<int>(W * s) & ~1;
        if (eh < 12 || ew < 12) break;
        Tensor level = resize(image, eh, ew);
        const double sx = static_cast<double>(ew) / W;
        const double sy = static_cast<double>(eh) / H;
        CascadeHeads heads = stage1.forward(ad::constant(level));
        const Tensor& cls = heads.cls->value;
        const Tensor& reg = heads.box->value;
        std::vector<Box> level_boxes;
        for (int i = 0; i < cls.dim(1); ++i) {
            for (int j = 0; j < cls.dim(2); ++j) {
                const double prob = softmax_face(cls.at(0, i, j), cls.at(1, i, j));
                if (prob <= p.thresholds[0]) continue;
                Box window{(2.0 * j) / sx, (2.0 * i) / sy, (2.0 * j + 12) / sx,
                           (2.0 * i + 12) / sy};
                Box b = decode_box_target(window, box_head_at(reg, i, j));
                b.score = prob;
                if (b.valid()) level_boxes.push_back(b);
            }
        }
        for (std::size_t k : nms_indices(level_boxes, p.level_nms_iou))
            candidates.push_back(level_boxes[k]);
        s *= p.pyramid_factor;
    }
    {
        std::vector<std::size_t> keep = nms_indices(candidates, p.nms_iou[0]);
        if (static_cast<int>(keep.size()) > p.max_candidates)
            keep.resize(p.max_candidates);
        std::vector<Box> merged;
        for (std::size_t k : keep) merged.push_back(candidates[k]);
        candidates = std::move(merged);
    }
    if (trace) trace->stage1 = static_cast<int>(candidates.size());

    // stage 2: refine each candidate on a 24x24 crop
    std::vector<Box> refined;
    for (const Box& c : candidates) {
        Box w = square_window(c);
        CascadeHeads heads = stage2.forward(ad::constant(window_crop(image, w, 24)));
        const double prob = softmax_face(heads.cls->value[0], heads.cls->value[1]);
        if (prob <= p.thresholds[1]) continue;
        Box b = decode_box_target(
            w, {heads.box->value[0], heads.box->value[1], heads.box->value[2],
                heads.box->value[3]});
        b.score = prob;
        if (b.valid()) refined.push_back(b);
    }
    {
        std::vector<Box> merged;
        for (std::size_t k : nms_indices(refined, p.nms_iou[1])) merged.push_back(refined[k]);
        refined = std::move(merged);
    }
    if (trace) trace->stage2 = static_cast<int>(refined.size());

    // stage 3: final score, box and five landmarks on a 48x48 crop
    std::vector<Detection> dets;
    std::vector<Box> det_boxes;
    for (const Box& c : refined) {
        std::optional<Detection> d = refine(image, c, p.thresholds[2]);
        if (!d) continue;
        det_boxes.push_back(d->box);
        dets.push_back(std::move(*d));
    }
    std::vector<Detection> out;
    for (std::size_t k : nms_indices(det_boxes, p.nms_iou[2])) out.push_back(dets[k]);
    if (trace) trace->stage3 = static_cast<int>(out.size());
    return out;
}

std::optional<Detection> CascadeDetector::refine(const Tensor& image, const Box& window,
                                                 double threshold) const {
    Box w = square_window(window);
    if (!w.valid()) return std::nullopt;
    CascadeHeads heads = stage3.forward(ad::constant(window_crop(image, w, 48)));
    const double prob = softmax_face(heads.cls->value[0], heads.cls->value[1]);
    if (prob <= threshold) return std::nullopt;
    Detection d;
    d.box = decode_box_target(w, {heads.box->value[0], heads.box->value[1],
                                  heads.box->value[2], heads.box->value[3]});
    d.box.score = prob;
    if (!d.box.valid()) return std::nullopt;
    std::array<double, 10> t;
    for (int i = 0; i < 10; ++i) t[i] = heads.landmarks->value[i];
    d.five = decode_landmark_target(w, t);
    return d;
}

void CascadeDetector::save(const std::string& prefix) const {
    stage1.save(prefix + "_s1");
    stage2.save(prefix + "_s2");
    stage3.save(prefix + "_s3");
}

CascadeDetector CascadeDetector::load(const std::string& prefix) {
    CascadeDetector d;
    d.stage1 = CascadeStageNet::load(prefix + "_s1");
    d.stage2 = CascadeStageNet::load(prefix + "_s2");
    d.stage3 = CascadeStageNet::load(prefix + "_s3");
    return d;
}

// ---- alignment -------------------------------------------------------

SimilarityTransform box_crop_transform(const Box& box, int crop_size, double box_expand) {
    if (!box.valid()) throw NumericError("box_crop_transform: degenerate box");
    SimilarityTransform T;
    T.scale = crop_size / (box_expand * box.max_side());
    T.tx = 0.5 * crop_size - T.scale * box.cx();
    T.ty = 0.5 * crop_size - T.scale * box.cy();
    return T;
}

SimilarityTransform normalize_face(const LandmarkSet& five, const Box& box, int crop_size,
                                   double box_expand) {
    try {
        return estimate_similarity(five, five_point_template(crop_size));
    } catch (const NumericError&) {
        return box_crop_transform(box, crop_size, box_expand);
    }
}

FitResult fit_landmarks(MhmModel& model, const UnionSchema& schema, const Tensor& image,
                        const SimilarityTransform& image_to_crop) {
    if (schema.size != model.cfg.heatmap_channels)
        throw DimensionError("fit_landmarks: schema size does not match model channels");
    Tensor face = warp_image(image, image_to_crop, model.cfg.input_size);
    HeatmapStack pred = model.predict(face);
    std::vector<double> conf = peak_confidence(pred);

    // candidate channel masks and mean responses per view
    const View views[3] = {View::Frontal, View::LeftProfile, View::RightProfile};
    FitResult best;
    double best_mean = -1.0;
    for (View v : views) {
        const std::vector<int>& map =
            v == View::Frontal ? schema.frontal_map : schema.profile_map(v);
        ViewMask mask = ViewMask::none(schema.size);
        double mean = 0.0;
        for (int slot : map) {
            mask.v[slot] = true;
            mean += conf[slot];
        }
        mean /= map.size();
        if (mean > best_mean) {
            best_mean = mean;
            best.view = v;
            best.mask = std::move(mask);
        }
    }
    best.confidence = best_mean;
    best.union_landmarks = decode_peaks(pred, best.mask, image_to_crop.inverse());
    best.landmarks = from_union(best.union_landmarks, best.mask, best.view, schema);
    return best;
}

double check_fit(const PatchClassifier& checker, const Tensor& image, const FitResult& fit,
                 const PipelineParams& p) {
    LandmarkSet five = five_from_landmarks(fit.landmarks, fit.view);
    SimilarityTransform T =
        normalize_face(five, fit.landmarks.bounding_box(), p.check_crop, p.box_expand);
    Tensor gray = to_gray(warp_image(image, T, p.check_crop));
    LandmarkSet in_crop = transform_landmarks(fit.union_landmarks, T);
    return checker.face_probability(extract_patches(gray, in_crop, checker.patch_size));
}

// ---- tracking --------------------------------------------------------

FaceTracker::FaceTracker(CascadeDetector detector, MhmModel mhm, UnionSchema schema,
                         PatchClassifier checker, PipelineParams params)
    : detector_(std::move(detector)),
      mhm_(std::move(mhm)),
      schema_(std::move(schema)),
      checker_(std::move(checker)),
      params_(std::move(params)) {}

TrackStepResult FaceTracker::detect_and_fit(const Tensor& frame) {
    TrackStepResult r;
    std::vector<Detection> dets = detector_.detect(frame, params_);
    if (dets.empty()) {
        state_ = TrackerState{};
        return r;
    }
    const Detection& d = dets.front();  // highest score after NMS
    SimilarityTransform T =
        normalize_face(d.five, d.box, mhm_.cfg.input_size, params_.box_expand);
    r.fit = fit_landmarks(mhm_, schema_, frame, T);
    r.check_probability = check_fit(checker_, frame, r.fit, params_);
    if (r.check_probability < params_.thresholds[3]) {
        state_ = TrackerState{};
        return r;
    }
    r.found = true;
    r.detection = d;
    state_.active = true;
    state_.box = d.box;
    state_.five = d.five;
    ++state_.frames_tracked;
    return r;
}

TrackStepResult FaceTracker::step(const Tensor& frame) {
    if (!state_.active) {
        TrackStepResult r = detect_and_fit(frame);
        r.redetected = true;
        return r;
    }
    const double grow = params_.track_margin * state_.box.max_side();
    Box search{state_.box.x1 - grow, state_.box.y1 - grow, state_.box.x2 + grow,
               state_.box.y2 + grow};
    std::optional<Detection> d = detector_.refine(frame, search, params_.thresholds[2]);
    if (d) {
        SimilarityTransform T =
            normalize_face(d->five, d->box, mhm_.cfg.input_size, params_.box_expand);
        TrackStepResult r;
        r.fit = fit_landmarks(mhm_, schema_, frame, T);
        r.check_probability = check_fit(checker_, frame, r.fit, params_);
        if (r.check_probability >= params_.thresholds[3]) {
            r.found = true;
            r.detection = *d;
            state_.box = d->box;
            state_.five = d->five;
            ++state_.frames_tracked;
            return r;
        }
    }
    // track lost: fall back to full detection on this frame
    state_ = TrackerState{};
    TrackStepResult r = detect_and_fit(frame);
    r.redetected = true;
    if (r.found) ++state_.redetections;
    return r;
}

// ---- temporal smoothing ----------------------------------------------

void LandmarkSmoother::update(Track& t, double z) {
    if (!t.init) {
        t.pos = z;
        t.vel = 0;
        t.p00 = 1;
        t.p01 = 0;
        t.p11 = 1;
        t.init = true;
        return;
    }
    // predict with constant velocity
    t.pos += t.vel;
    const double p00 = t.p00 + 2 * t.p01 + t.p11 + q_;
    const double p01 = t.p01 + t.p11;
    const double p11 = t.p11 + q_;
    // measurement update
    const double k0 = p00 / (p00 + r_);
    const double k1 = p01 / (p00 + r_);
    const double innovation = z - t.pos;
    t.pos += k0 * innovation;
    t.vel += k1 * innovation;
    t.p00 = (1 - k0) * p00;
    t.p01 = (1 - k0) * p01;
    t.p11 = p11 - k1 * p01;
}

LandmarkSet LandmarkSmoother::apply(const LandmarkSet& measured) {
    if (tracks_.size() != measured.points.size() * 2) {
        tracks_.assign(measured.points.size() * 2, Track{});
    }
    LandmarkSet out = measured;
    for (std::size_t k = 0; k < measured.points.size(); ++k) {
        if (!measured.mask[k]) continue;  // no measurement: leave as is
        update(tracks_[2 * k], measured.points[k].x);
        update(tracks_[2 * k + 1], measured.points[k].y);
        out.points[k].x = tracks_[2 * k].pos;
        out.points[k].y = tracks_[2 * k + 1].pos;
    }
    return out;
}

}  // namespace mva
