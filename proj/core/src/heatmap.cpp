#include "mva/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "mva/serialize.hpp"

namespace mva {

int ViewMask::count() const {
    return static_cast<int>(std::count(v.begin(), v.end(), true));
}

HeatmapStack render_heatmaps(const LandmarkSet& crop_coords, ViewMask& mask,
                             int hm, int wm, double sigma, double ratio) {
    if (sigma <= 0) throw NumericError("render_heatmaps: sigma must be > 0");
    const int n = crop_coords.size();
    if (static_cast<int>(mask.v.size()) != n)
        throw DimensionError("render_heatmaps: mask/landmark count mismatch");
    HeatmapStack stack;
    stack.ratio = ratio;
    stack.maps = Tensor::zeros({n, hm, wm});
    for (int k = 0; k < n; ++k) {
        if (!mask.v[k] || !crop_coords.mask[k]) {
            mask.v[k] = false;
            continue;
        }
        const double mx = crop_coords.points[k].x / ratio;
        const double my = crop_coords.points[k].y / ratio;
        const int py = static_cast<int>(std::lround(my));
        const int px = static_cast<int>(std::lround(mx));
        if (px < 0 || py < 0 || px > wm - 1 || py > hm - 1) {
            mask.v[k] = false;  // nearest grid point out of crop: zero channel, dropped
            continue;
        }
        const double peak = std::exp(-((py - my) * (py - my) + (px - mx) * (px - mx)) /
                                     (2 * sigma * sigma));
        for (int i = 0; i < hm; ++i) {
            for (int j = 0; j < wm; ++j) {
                const double d2 = (i - my) * (i - my) + (j - mx) * (j - mx);
                stack.maps.at(k, i, j) = std::exp(-d2 / (2 * sigma * sigma)) / peak;
            }
        }
        stack.maps.at(k, py, px) = 1.0;  // exact peak regardless of rounding
    }
    return stack;
}

MaskedLossResult masked_mse_loss(const ad::Var& pred, const HeatmapStack& gt,
                                 const ViewMask& mask) {
    require_same_shape(pred->value, gt.maps, "masked_mse_loss");
    const int n = pred->value.dim(0);
    if (static_cast<int>(mask.v.size()) != n)
        throw DimensionError("masked_mse_loss: mask size mismatch");
    const int n_sel = mask.count();
    MaskedLossResult res;
    if (n_sel == 0) {
        res.empty_mask_warning = true;
        res.loss = ad::make_node(Tensor::scalar(0.0), {pred}, [](ad::Node&) {});
        return res;
    }
    const int hw = pred->value.dim(1) * pred->value.dim(2);
    double acc = 0;
    for (int k = 0; k < n; ++k) {
        if (!mask.v[k]) continue;
        for (int i = 0; i < hw; ++i) {
            const std::size_t idx = static_cast<std::size_t>(k) * hw + i;
            const double d = pred->value[idx] - gt.maps[idx];
            acc += d * d;
        }
    }
    auto gt_copy = std::make_shared<Tensor>(gt.maps);
    auto mask_copy = std::make_shared<std::vector<bool>>(mask.v);
    res.loss = ad::make_node(Tensor::scalar(acc / n_sel), {pred},
        [gt_copy, mask_copy, n, hw, n_sel](ad::Node& node) {
            ad::Var in = node.parents[0];
            if (!in->requires_grad) return;
            Tensor& g = in->ensure_grad();
            const double gy = node.grad[0];
            for (int k = 0; k < n; ++k) {
                if (!(*mask_copy)[k]) continue;  // unselected channels: zero, bit-exact
                for (int i = 0; i < hw; ++i) {
                    const std::size_t idx = static_cast<std::size_t>(k) * hw + i;
                    g[idx] += gy * 2.0 / n_sel * (in->value[idx] - (*gt_copy)[idx]);
                }
            }
        });
    return res;
}

double masked_mse_value(const Tensor& pred, const HeatmapStack& gt, const ViewMask& mask) {
    auto v = ad::constant(pred);
    return masked_mse_loss(v, gt, mask).loss->value[0];
}

LandmarkSet decode_peaks(const HeatmapStack& pred, const ViewMask& mask,
                         const SimilarityTransform& crop_to_image) {
    const int n = pred.channels();
    const int hm = pred.maps.dim(1), wm = pred.maps.dim(2);
    LandmarkSet out;
    out.points.resize(n);
    out.mask.assign(n, false);
    switch (n) {
        case 5: out.schema = Schema::P5; break;
        case 39: out.schema = Schema::P39; break;
        case 86: out.schema = Schema::U86; break;
        default: out.schema = Schema::U68; break;
    }
    for (int k = 0; k < n; ++k) {
        if (!mask.v[k]) continue;
        int bi = 0, bj = 0;
        double best = pred.maps.at(k, 0, 0), worst = best;
        for (int i = 0; i < hm; ++i) {
            for (int j = 0; j < wm; ++j) {
                const double v = pred.maps.at(k, i, j);
                worst = std::min(worst, v);
                if (v > best) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (best - worst < 1e-12) continue;  // flat channel: low confidence, masked out
        double fy = bi, fx = bj;
        const double left = bj > 0 ? pred.maps.at(k, bi, bj - 1) : -1e300;
        const double right = bj < wm - 1 ? pred.maps.at(k, bi, bj + 1) : -1e300;
        if (right > left) fx += 0.25;
        else if (left > right) fx -= 0.25;
        const double up = bi > 0 ? pred.maps.at(k, bi - 1, bj) : -1e300;
        const double down = bi < hm - 1 ? pred.maps.at(k, bi + 1, bj) : -1e300;
        if (down > up) fy += 0.25;
        else if (up > down) fy -= 0.25;
        Point crop_pt{fx * pred.ratio, fy * pred.ratio};
        out.points[k] = crop_to_image.apply(crop_pt);
        out.mask[k] = true;
    }
    return out;
}

std::vector<double> peak_confidence(const HeatmapStack& pred) {
    const int n = pred.channels();
    const int hw = pred.maps.dim(1) * pred.maps.dim(2);
    std::vector<double> conf(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double mx = 0;
        for (int i = 0; i < hw; ++i)
            mx = std::max(mx, pred.maps[static_cast<std::size_t>(k) * hw + i]);
        conf[k] = std::clamp(mx, 0.0, 1.0);
    }
    return conf;
}

void save_heatmaps(const std::string& path, const HeatmapStack& stack) {
    WeightContainer w;
    const int hm = stack.maps.dim(1), wm = stack.maps.dim(2);
    for (int k = 0; k < stack.channels(); ++k) {
        Tensor ch({hm, wm});
        const int hw = hm * wm;
        for (int i = 0; i < hw; ++i) ch[i] = stack.maps[static_cast<std::size_t>(k) * hw + i];
        w.push_back({"heatmap/" + std::to_string(k), std::move(ch)});
    }
    save_weights(path, w);
}

HeatmapStack load_heatmaps(const std::string& path) {
    WeightContainer w = load_weights(path);
    if (w.empty()) throw std::runtime_error("empty heatmap dump: " + path);
    const int hm = w[0].tensor.dim(0), wm = w[0].tensor.dim(1);
    HeatmapStack stack;
    stack.maps = Tensor::zeros({static_cast<int>(w.size()), hm, wm});
    const int hw = hm * wm;
    for (std::size_t k = 0; k < w.size(); ++k)
        for (int i = 0; i < hw; ++i) stack.maps[k * hw + i] = w[k].tensor[i];
    return stack;
}

}  // namespace mva
