#include "mva/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mva {

// ---- alignment error -------------------------------------------------

std::string normalizer_name(Normalizer n) {
    switch (n) {
        case Normalizer::EyeCentres: return "eye_centre";
        case Normalizer::OuterCorners: return "outer_eye_corner";
        case Normalizer::BoxDiagonal: return "bbox_diagonal";
    }
    throw std::runtime_error("unknown normalizer");
}

Normalizer normalizer_from_name(const std::string& name) {
    if (name == "eye_centre") return Normalizer::EyeCentres;
    if (name == "outer_eye_corner") return Normalizer::OuterCorners;
    if (name == "bbox_diagonal") return Normalizer::BoxDiagonal;
    throw std::runtime_error("unknown normalizer name: " + name);
}

namespace {

Point mean_point(const LandmarkSet& L, int start, int count) {
    Point m{0, 0};
    for (int i = 0; i < count; ++i) {
        m.x += L.points[start + i].x;
        m.y += L.points[start + i].y;
    }
    m.x /= count;
    m.y /= count;
    return m;
}

}  // namespace

double normalizer_value(const LandmarkSet& gt, View view, Normalizer kind, const Box& box) {
    if (kind == Normalizer::BoxDiagonal || view != View::Frontal) {
        const double d = box.diagonal();
        if (d <= 0) throw NumericError("normalizer_value: degenerate box");
        return d;
    }
    if (gt.schema != Schema::P68 && gt.schema != Schema::U68 && gt.schema != Schema::U86)
        throw DimensionError("normalizer_value: eye normalisers need frontal 68-point data");
    double d = 0;
    if (kind == Normalizer::EyeCentres) {
        const Point l = mean_point(gt, 36, 6);
        const Point r = mean_point(gt, 42, 6);
        d = std::hypot(l.x - r.x, l.y - r.y);
    } else {
        d = std::hypot(gt.points[36].x - gt.points[45].x, gt.points[36].y - gt.points[45].y);
    }
    if (d <= 0) throw NumericError("normalizer_value: degenerate eye distance");
    return d;
}

double nme(const LandmarkSet& pred, const LandmarkSet& gt, double norm) {
    if (pred.size() != gt.size())
        throw DimensionError("nme: landmark count mismatch");
    if (norm <= 0) throw NumericError("nme: normaliser must be > 0");
    double sum = 0;
    int n = 0;
    for (int k = 0; k < pred.size(); ++k) {
        if (!pred.mask[k] || !gt.mask[k]) continue;
        sum += std::hypot(pred.points[k].x - gt.points[k].x,
                          pred.points[k].y - gt.points[k].y);
        ++n;
    }
    if (n == 0) throw NumericError("nme: no commonly active points");
    return sum / n / norm;
}

// ---- cumulative error distribution -----------------------------------

CedCurve CedCurve::from_errors(std::vector<double> errors) {
    std::sort(errors.begin(), errors.end());
    return CedCurve{std::move(errors)};
}

double CedCurve::ced(double threshold) const {
    if (errors.empty()) throw NumericError("CedCurve: no errors");
    const auto it = std::upper_bound(errors.begin(), errors.end(), threshold);
    return static_cast<double>(it - errors.begin()) / errors.size();
}

double CedCurve::auc(double max_error) const {
    if (errors.empty()) throw NumericError("CedCurve: no errors");
    if (max_error <= 0) throw NumericError("CedCurve::auc: max_error must be > 0");
    // CED is a step function jumping by 1/n at each sorted error; integrate
    // the constant pieces exactly up to max_error
    const double n = static_cast<double>(errors.size());
    double integral = 0;
    double prev = 0;
    std::size_t below = 0;
    for (; below < errors.size() && errors[below] < max_error; ++below) {
        const double e = std::max(errors[below], 0.0);
        integral += (e - prev) * (static_cast<double>(below) / n);
        prev = e;
    }
    integral += (max_error - prev) * (static_cast<double>(below) / n);
    return integral / max_error;
}

double CedCurve::failure_rate(double threshold) const { return 1.0 - ced(threshold); }

// ---- detection -------------------------------------------------------

DetectionCurve match_detections(const std::vector<std::vector<Box>>& detections,
                                const std::vector<std::vector<Box>>& ground_truth,
                                double iou_thr) {
    if (detections.size() != ground_truth.size())
        throw DimensionError("match_detections: image count mismatch");
    DetectionCurve curve;
    for (const auto& g : ground_truth) curve.total_gt += static_cast<int>(g.size());

    struct Cand {
        double score;
        std::size_t image;
        std::size_t index;
    };
    std::vector<Cand> cands;
    for (std::size_t im = 0; im < detections.size(); ++im)
        for (std::size_t i = 0; i < detections[im].size(); ++i)
            cands.push_back({detections[im][i].score, im, i});
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.score > b.score; });

    std::vector<std::vector<bool>> taken(ground_truth.size());
    for (std::size_t im = 0; im < ground_truth.size(); ++im)
        taken[im].assign(ground_truth[im].size(), false);

    for (const Cand& c : cands) {
        const Box& d = detections[c.image][c.index];
        int best = -1;
        double best_iou = iou_thr;
        for (std::size_t g = 0; g < ground_truth[c.image].size(); ++g) {
            if (taken[c.image][g]) continue;
            const double v = iou(d, ground_truth[c.image][g]);
            if (v >= best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        ScoredMatch m{c.score, best >= 0};
        if (best >= 0) taken[c.image][best] = true;
        curve.matches.push_back(m);
    }
    return curve;
}

double DetectionCurve::recall_at_fp(int max_fp) const {
    if (total_gt == 0) throw NumericError("DetectionCurve: no ground truth");
    int tp = 0, fp = 0;
    for (const auto& m : matches) {
        if (m.tp) {
            ++tp;
        } else {
            if (fp + 1 > max_fp) break;
            ++fp;
        }
    }
    return static_cast<double>(tp) / total_gt;
}

double DetectionCurve::precision_at_recall(double min_recall) const {
    if (total_gt == 0) throw NumericError("DetectionCurve: no ground truth");
    int tp = 0, fp = 0;
    for (const auto& m : matches) {
        m.tp ? ++tp : ++fp;
        if (static_cast<double>(tp) / total_gt >= min_recall)
            return static_cast<double>(tp) / (tp + fp);
    }
    return 0.0;
}

double DetectionCurve::average_precision() const {
    if (total_gt == 0) throw NumericError("DetectionCurve: no ground truth");
    int tp = 0, fp = 0;
    double ap = 0;
    for (const auto& m : matches) {
        m.tp ? ++tp : ++fp;
        if (m.tp) ap += static_cast<double>(tp) / (tp + fp);
    }
    return ap / total_gt;
}

// ---- report writers --------------------------------------------------

void print_report(const MetricReport& metrics) {
    std::size_t width = 0;
    for (const auto& [k, v] : metrics) width = std::max(width, k.size());
    for (const auto& [k, v] : metrics)
        std::printf("%-*s  %.6f\n", static_cast<int>(width), k.c_str(), v);
}

void write_report_csv(const std::string& path, const MetricReport& metrics) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "metric,value\n";
    char buf[64];
    for (const auto& [k, v] : metrics) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << k << "," << buf << "\n";
    }
}

void write_report_json(const std::string& path, const MetricReport& metrics) {
    nlohmann::json j;
    for (const auto& [k, v] : metrics) j[k] = v;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(1) << "\n";
}

}  // namespace mva
