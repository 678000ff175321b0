#pragma once

#include <vector>

#include "mva/autodiff.hpp"
#include "mva/geometry.hpp"
#include "mva/tensor.hpp"

namespace mva {

// Per-landmark response maps at 1/ratio of the face crop resolution.
struct HeatmapStack {
    Tensor maps;          // [N,Hm,Wm], values >= 0
    double ratio = 4.0;   // crop pixels per heatmap pixel

    int channels() const { return maps.dim(0); }
};

// v_n of the masked loss: selects the response maps of the sample's view.
struct ViewMask {
    std::vector<bool> v;

    int count() const;
    bool any() const { return count() > 0; }
    static ViewMask all(int n) { return {std::vector<bool>(n, true)}; }
    static ViewMask none(int n) { return {std::vector<bool>(n, false)}; }
};

// Gaussian ground-truth rendering; the peak value is exactly 1.0 at the
// grid point nearest the landmark. Landmarks outside the crop render as a
// zero channel and are dropped from the mask.
HeatmapStack render_heatmaps(const LandmarkSet& crop_coords, ViewMask& mask,
                             int hm, int wm, double sigma, double ratio = 4.0);

struct MaskedLossResult {
    ad::Var loss;
    bool empty_mask_warning = false;
};

// (1/N_sel) * sum_n v_n * sum_ij (pred - gt)^2 over the selected channels;
// gradients on unselected channels are exactly zero.
MaskedLossResult masked_mse_loss(const ad::Var& pred, const HeatmapStack& gt,
                                 const ViewMask& mask);
double masked_mse_value(const Tensor& pred, const HeatmapStack& gt, const ViewMask& mask);

// Argmax plus a quarter-pixel shift toward the stronger 4-neighbour,
// scaled to crop coordinates and mapped through crop_to_image. Flat
// channels come back masked out.
LandmarkSet decode_peaks(const HeatmapStack& pred, const ViewMask& mask,
                         const SimilarityTransform& crop_to_image);

// Per-channel max response clamped to [0,1].
std::vector<double> peak_confidence(const HeatmapStack& pred);

// Debug dump in the weight-container format, names "heatmap/<index>".
void save_heatmaps(const std::string& path, const HeatmapStack& stack);
HeatmapStack load_heatmaps(const std::string& path);

}  // namespace mva
