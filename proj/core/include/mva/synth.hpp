#pragma once

#include <vector>

#include "mva/rng.hpp"
#include "mva/schema.hpp"

namespace mva {

// Shape parameters of the procedural face figure, in the unit square
// (y down). Landmark curves and the painted image derive from the same
// parameters, so landmark positions are exact by construction.
struct FaceShapeParams {
    double jaw_cy = 0.42, jaw_rx = 0.40, jaw_ry = 0.50;
    double brow_y = 0.315, brow_rx = 0.105, brow_ry = 0.035;
    double eye_dx = 0.18, eye_y = 0.38, eye_rx = 0.062, eye_ry = 0.026;
    double nose_top_y = 0.38, nose_base_y = 0.555, nose_rx = 0.065;
    double mouth_y = 0.72, mouth_rx = 0.125, mouth_ry = 0.055;
    double mouth_inner_rx = 0.080, mouth_inner_ry = 0.028;

    static FaceShapeParams canonical() { return {}; }
    static FaceShapeParams sample(Rng& rng);  // mild per-face variation
};

// 68-point frontal shape for the given parameters, unit square.
LandmarkSet frontal_shape(const FaceShapeParams& p);
// 39-point profile shape: the visible-feature subset of the squeezed
// frontal shape. Left profile; mirror for right.
LandmarkSet profile_shape(const FaceShapeParams& p);

// Painted figure value at a canonical-frame point, in [0,1].
double paint_face(const FaceShapeParams& p, View view, double x, double y);

// One face drawn under canonical_to_image; landmarks mapped by the same
// transform (bit-exact), box = landmark bounds padded 10%.
Sample render_face(const FaceShapeParams& p, View view,
                   const SimilarityTransform& canonical_to_image, int image_size,
                   double noise_sigma, Rng& rng);

// n samples, alternating frontal and (left/right) profile, with similarity
// jitter: rotation +/-30 deg, scale 0.75-1.25, translation +/-20 px.
std::vector<Sample> synthesize_dataset(int n, std::uint64_t seed, int image_size);

// Rotation/scale/translation in the same ranges, applied consistently to
// image (bilinear) and landmarks.
Sample augment(const Sample& sample, std::uint64_t seed);

// ---- detection / tracking scenes -------------------------------------

struct SceneFace {
    Box box;
    LandmarkSet five;
    LandmarkSet full;
    View view = View::Frontal;
};

struct Scene {
    Tensor image;
    std::vector<SceneFace> faces;
};

// Frontal faces on a noisy background, non-overlapping, sizes in
// [min_face, max_face] pixels.
Scene synthesize_scene(int n_faces, std::uint64_t seed, int image_size,
                       double min_face, double max_face);

// Single face on a smooth trajectory; frames in [occlude_from,
// occlude_until) have the face region replaced by noise.
std::vector<Scene> synthesize_sequence(int n_frames, std::uint64_t seed, int image_size,
                                       int occlude_from = -1, int occlude_until = -1);

}  // namespace mva
