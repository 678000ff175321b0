#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mva/networks.hpp"
#include "mva/schema.hpp"

namespace mva {

struct PipelineParams {
    // score thresholds for the four classifiers: pyramid stage, 24x24
    // refine stage, 48x48 output stage, shape-indexed patch check
    std::array<double, 4> thresholds{0.6, 0.7, 0.7, 0.7};
    double pyramid_factor = 0.709;
    double min_face = 20.0;
    std::array<double, 3> nms_iou{0.7, 0.7, 0.5};
    double level_nms_iou = 0.5;     // per-pyramid-level NMS before merging
    double box_expand = 1.2;        // box-only crop margin for alignment
    double track_margin = 0.2;      // search-window growth around the last box
    int check_crop = 128;           // failure-check frame size
    int max_candidates = 200;       // stage-1 survivors passed downstream
};

struct Detection {
    Box box;  // score in box.score
    LandmarkSet five;
};

// Surviving box counts after each stage's NMS pass.
struct DetectionTrace {
    int stage1 = 0, stage2 = 0, stage3 = 0;
};

struct CascadeDetector {
    CascadeStageNet stage1, stage2, stage3;

    // Full coarse-to-fine pass: image pyramid + fully convolutional stage
    // 1, then crop-based refinement. Landmarks come from stage 3.
    std::vector<Detection> detect(const Tensor& image, const PipelineParams& p,
                                  DetectionTrace* trace = nullptr) const;

    // Stage 3 only, on one candidate window (used by the tracker).
    std::optional<Detection> refine(const Tensor& image, const Box& window,
                                    double threshold) const;

    void save(const std::string& prefix) const;  // prefix + "_s1" / "_s2" / "_s3"
    static CascadeDetector load(const std::string& prefix);
};

// ---- alignment -------------------------------------------------------

struct FitResult {
    LandmarkSet landmarks;        // view-native schema, image coordinates
    LandmarkSet union_landmarks;  // union schema, image coordinates
    ViewMask mask;
    View view = View::Frontal;
    double confidence = 0.0;  // mean peak response of the selected view
};

// Face crop transform from five landmarks; falls back to a box-only
// similarity (centre + expanded max side) when the fit is degenerate.
SimilarityTransform normalize_face(const LandmarkSet& five, const Box& box,
                                   int crop_size, double box_expand = 1.2);
SimilarityTransform box_crop_transform(const Box& box, int crop_size,
                                       double box_expand = 1.2);

// Joint multi-view fit: predict union heatmaps on the normalised crop,
// pick the view whose channels respond strongest, decode that subset.
FitResult fit_landmarks(MhmModel& model, const UnionSchema& schema, const Tensor& image,
                        const SimilarityTransform& image_to_crop);

// Face probability of the patch classifier on the fitted landmarks,
// evaluated in a fresh check_crop-sized normalised frame.
double check_fit(const PatchClassifier& checker, const Tensor& image,
                 const FitResult& fit, const PipelineParams& p);

// ---- tracking --------------------------------------------------------

struct TrackerState {
    bool active = false;
    Box box;
    LandmarkSet five;
    int frames_tracked = 0;
    int redetections = 0;
};

struct TrackStepResult {
    bool found = false;
    bool redetected = false;  // this frame fell back to full detection
    Detection detection;
    FitResult fit;
    double check_probability = 1.0;
};

// Detection-by-tracking: refine within the previous box grown by
// track_margin; on low score or a failed patch check, re-run the full
// detector and reinitialise.
class FaceTracker {
public:
    FaceTracker(CascadeDetector detector, MhmModel mhm, UnionSchema schema,
                PatchClassifier checker, PipelineParams params);

    TrackStepResult step(const Tensor& frame);
    const TrackerState& state() const { return state_; }
    void reset() { state_ = TrackerState{}; }

private:
    TrackStepResult detect_and_fit(const Tensor& frame);

    CascadeDetector detector_;
    MhmModel mhm_;
    UnionSchema schema_;
    PatchClassifier checker_;
    PipelineParams params_;
    TrackerState state_;
};

// Optional temporal smoothing: an independent constant-velocity Kalman
// filter per landmark coordinate. Off by default; reset() on track loss.
class LandmarkSmoother {
public:
    explicit LandmarkSmoother(double process_noise = 1e-2, double measurement_noise = 1.0)
        : q_(process_noise), r_(measurement_noise) {}

    LandmarkSet apply(const LandmarkSet& measured);
    void reset() { tracks_.clear(); }

private:
    struct Track {
        double pos = 0, vel = 0;
        double p00 = 1, p01 = 0, p11 = 1;
        bool init = false;
    };
    void update(Track& t, double z);

    double q_, r_;
    std::vector<Track> tracks_;  // 2 per landmark (x then y)
};

}  // namespace mva
