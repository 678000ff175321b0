#pragma once

#include <map>
#include <string>
#include <vector>

#include "mva/geometry.hpp"
#include "mva/schema.hpp"

namespace mva {

// ---- alignment error -------------------------------------------------

enum class Normalizer {
    EyeCentres,    // distance between the mean of each eye's contour points
    OuterCorners,  // outer eye corners (68-point indices 36 and 45)
    BoxDiagonal,   // ground-truth face box diagonal
};

std::string normalizer_name(Normalizer n);
Normalizer normalizer_from_name(const std::string& name);

// Reference length for a ground-truth sample. Eye-based kinds need a
// frontal 68-point set; profile views fall back to the box diagonal.
double normalizer_value(const LandmarkSet& gt, View view, Normalizer kind, const Box& box);

// Mean Euclidean point-to-point distance over points active in both sets,
// divided by `norm`. Throws when no point is shared or norm is not positive.
double nme(const LandmarkSet& pred, const LandmarkSet& gt, double norm);

// ---- cumulative error distribution -----------------------------------

struct CedCurve {
    std::vector<double> errors;  // sorted ascending on construction

    static CedCurve from_errors(std::vector<double> errors);
    double ced(double threshold) const;          // fraction of errors <= threshold
    double auc(double max_error) const;          // exact integral of CED / max_error
    double failure_rate(double threshold) const; // 1 - ced
};

// ---- detection -------------------------------------------------------

struct ScoredMatch {
    double score = 0;
    bool tp = false;
};

struct DetectionCurve {
    std::vector<ScoredMatch> matches;  // sorted by score descending
    int total_gt = 0;

    // Recall after admitting detections until max_fp false positives.
    double recall_at_fp(int max_fp) const;
    double precision_at_recall(double min_recall) const;
    double average_precision() const;
};

// Greedy score-ordered matching: a detection is a true positive when it
// overlaps an unmatched ground-truth box of the same image above iou_thr.
DetectionCurve match_detections(const std::vector<std::vector<Box>>& detections,
                                const std::vector<std::vector<Box>>& ground_truth,
                                double iou_thr = 0.5);

// ---- report writers --------------------------------------------------

using MetricReport = std::map<std::string, double>;

void print_report(const MetricReport& metrics);                        // aligned table
void write_report_csv(const std::string& path, const MetricReport& metrics);
void write_report_json(const std::string& path, const MetricReport& metrics);

}  // namespace mva
