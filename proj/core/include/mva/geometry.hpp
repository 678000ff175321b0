#pragma once

#include <array>
#include <string>
#include <vector>

#include "mva/tensor.hpp"

namespace mva {

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double score = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
    double max_side() const { return std::max(width(), height()); }
    double diagonal() const;
    bool valid() const { return x2 > x1 && y2 > y1; }
};

enum class Schema { P5, P39, P68, U68, U86 };

int schema_points(Schema s);
std::string schema_name(Schema s);
Schema schema_from_name(const std::string& name);

struct Point {
    double x = 0, y = 0;
};

// Ordered 2D points with a per-point selection mask. Masked-out points
// are excluded from every metric and every fit.
struct LandmarkSet {
    std::vector<Point> points;
    std::vector<bool> mask;  // true = usable
    Schema schema = Schema::P5;

    static LandmarkSet make(Schema s);
    int size() const { return static_cast<int>(points.size()); }
    int active_count() const;
    void validate() const;  // point count must match schema
    Box bounding_box() const;
};

// p -> scale * R(rotation) * p + t
struct SimilarityTransform {
    double scale = 1.0;
    double rotation = 0.0;  // radians
    double tx = 0.0, ty = 0.0;

    Point apply(const Point& p) const;
    SimilarityTransform inverse() const;
    SimilarityTransform compose(const SimilarityTransform& inner) const;  // this ∘ inner
    static SimilarityTransform identity() { return {}; }
};

double iou(const Box& a, const Box& b);

// Greedy NMS: keep highest score, drop overlaps above threshold. Output
// sorted by score descending, ties broken by lower original index.
std::vector<Box> nms(const std::vector<Box>& boxes, double iou_threshold);

// Center/log-size offsets normalised by the ground-truth max side.
std::array<double, 4> encode_box_target(const Box& anchor, const Box& gt);
Box decode_box_target(const Box& anchor, const std::array<double, 4>& target);

// Least-squares similarity src -> dst (Umeyama, no reflection). Masked
// points are excluded; throws NumericError on < 2 usable points or a
// degenerate (coincident) source.
SimilarityTransform estimate_similarity(const LandmarkSet& src, const LandmarkSet& dst);

// Inverse-mapped bilinear warp: out(q) = img(T^-1 q); out of bounds = 0.
Tensor warp_image(const Tensor& img, const SimilarityTransform& T, int out_size);

LandmarkSet transform_landmarks(const LandmarkSet& L, const SimilarityTransform& T);

// Canonical five-landmark template (eyes, nose, mouth corners) scaled to
// an out_size x out_size crop. Fractions are configurable at call sites.
LandmarkSet five_point_template(double out_size);

// ---- landmark file formats -------------------------------------------
// Text: first line the point count, then "x y" per line with an optional
// third 0/1 visibility column. JSON adds the schema tag.
void save_landmarks_text(const std::string& path, const LandmarkSet& L);
LandmarkSet load_landmarks_text(const std::string& path);
void save_landmarks_json(const std::string& path, const LandmarkSet& L);
LandmarkSet load_landmarks_json(const std::string& path);

}  // namespace mva
