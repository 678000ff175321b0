#include "mva/geometry.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mva {

double Box::diagonal() const { return std::hypot(width(), height()); }

int schema_points(Schema s) {
    switch (s) {
        case Schema::P5: return 5;
        case Schema::P39: return 39;
        case Schema::P68: return 68;
        case Schema::U68: return 68;
        case Schema::U86: return 86;
    }
    return 0;
}

std::string schema_name(Schema s) {
    switch (s) {
        case Schema::P5: return "P5";
        case Schema::P39: return "P39";
        case Schema::P68: return "P68";
        case Schema::U68: return "U68";
        case Schema::U86: return "U86";
    }
    return "?";
}

Schema schema_from_name(const std::string& name) {
    if (name == "P5") return Schema::P5;
    if (name == "P39") return Schema::P39;
    if (name == "P68") return Schema::P68;
    if (name == "U68") return Schema::U68;
    if (name == "U86") return Schema::U86;
    throw std::runtime_error("unknown landmark schema: " + name);
}

LandmarkSet LandmarkSet::make(Schema s) {
    LandmarkSet L;
    L.schema = s;
    L.points.resize(static_cast<std::size_t>(schema_points(s)));
    L.mask.assign(L.points.size(), true);
    return L;
}

int LandmarkSet::active_count() const {
    return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

void LandmarkSet::validate() const {
    if (size() != schema_points(schema))
        throw DimensionError("landmark set has " + std::to_string(size()) +
                             " points, schema " + schema_name(schema) + " wants " +
                             std::to_string(schema_points(schema)));
    if (mask.size() != points.size())
        throw DimensionError("landmark mask length mismatch");
}

Box LandmarkSet::bounding_box() const {
    Box b{1e300, 1e300, -1e300, -1e300, 1.0};
    bool any = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!mask[i]) continue;
        any = true;
        b.x1 = std::min(b.x1, points[i].x);
        b.y1 = std::min(b.y1, points[i].y);
        b.x2 = std::max(b.x2, points[i].x);
        b.y2 = std::max(b.y2, points[i].y);
    }
    if (!any) throw NumericError("bounding_box of fully masked landmark set");
    return b;
}

Point SimilarityTransform::apply(const Point& p) const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty};
}

SimilarityTransform SimilarityTransform::inverse() const {
    SimilarityTransform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = -rotation;
    const double c = std::cos(inv.rotation), s = std::sin(inv.rotation);
    inv.tx = -inv.scale * (c * tx - s * ty);
    inv.ty = -inv.scale * (s * tx + c * ty);
    return inv;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& inner) const {
    SimilarityTransform out;
    out.scale = scale * inner.scale;
    out.rotation = rotation + inner.rotation;
    Point t = apply({inner.tx, inner.ty});
    out.tx = t.x;
    out.ty = t.y;
    return out;
}

double iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

std::vector<Box> nms(const std::vector<Box>& boxes, double iou_threshold) {
    std::vector<int> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return boxes[a].score > boxes[b].score;
    });
    std::vector<bool> removed(boxes.size(), false);
    std::vector<Box> kept;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (removed[order[i]]) continue;
        const Box& top = boxes[order[i]];
        kept.push_back(top);
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            if (!removed[order[j]] && iou(top, boxes[order[j]]) > iou_threshold)
                removed[order[j]] = true;
        }
    }
    return kept;
}

std::array<double, 4> encode_box_target(const Box& anchor, const Box& gt) {
    const double d = gt.max_side();
    return {(gt.cx() - anchor.cx()) / d, (gt.cy() - anchor.cy()) / d,
            std::log(gt.width() / anchor.width()), std::log(gt.height() / anchor.height())};
}

Box decode_box_target(const Box& anchor, const std::array<double, 4>& t) {
    // gt max side depends on the decoded box; recover it from the log-size
    // terms, which are independent of the normaliser.
    const double w = anchor.width() * std::exp(t[2]);
    const double h = anchor.height() * std::exp(t[3]);
    const double d = std::max(w, h);
    const double cx = anchor.cx() + t[0] * d;
    const double cy = anchor.cy() + t[1] * d;
    Box out{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h, anchor.score};
    return out;
}

SimilarityTransform estimate_similarity(const LandmarkSet& src, const LandmarkSet& dst) {
    if (src.size() != dst.size())
        throw DimensionError("estimate_similarity: point count mismatch");
    std::vector<Point> a, b;
    for (int i = 0; i < src.size(); ++i) {
        if (src.mask[i] && dst.mask[i]) {
            a.push_back(src.points[i]);
            b.push_back(dst.points[i]);
        }
    }
    const int n = static_cast<int>(a.size());
    if (n < 2) throw NumericError("estimate_similarity: fewer than 2 usable points");

    Point ma{0, 0}, mb{0, 0};
    for (int i = 0; i < n; ++i) {
        ma.x += a[i].x; ma.y += a[i].y;
        mb.x += b[i].x; mb.y += b[i].y;
    }
    ma.x /= n; ma.y /= n; mb.x /= n; mb.y /= n;

    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    double var_src = 0;
    for (int i = 0; i < n; ++i) {
        Eigen::Vector2d pa(a[i].x - ma.x, a[i].y - ma.y);
        Eigen::Vector2d pb(b[i].x - mb.x, b[i].y - mb.y);
        cov += pb * pa.transpose();
        var_src += pa.squaredNorm();
    }
    cov /= n;
    var_src /= n;
    if (var_src < 1e-18)
        throw NumericError("estimate_similarity: degenerate (coincident) source points");

    Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(1, 1) = -1;
    Eigen::Matrix2d rot = svd.matrixU() * d * svd.matrixV().transpose();
    const double s = (svd.singularValues().asDiagonal() * d).trace() / var_src;

    SimilarityTransform T;
    T.scale = s;
    T.rotation = std::atan2(rot(1, 0), rot(0, 0));
    Point rm = {s * (rot(0, 0) * ma.x + rot(0, 1) * ma.y),
                s * (rot(1, 0) * ma.x + rot(1, 1) * ma.y)};
    T.tx = mb.x - rm.x;
    T.ty = mb.y - rm.y;
    return T;
}

namespace {

double bilinear(const Tensor& img, int c, double x, double y) {
    const int h = img.dim(1), w = img.dim(2);
    if (x < 0 || y < 0 || x > w - 1 || y > h - 1) {
        // partial overlap at the border still contributes its inside part
        if (x <= -1 || y <= -1 || x >= w || y >= h) return 0.0;
    }
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto px = [&](int yy, int xx) -> double {
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) return 0.0;
        return img.at(c, yy, xx);
    };
    return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
           fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
}

}  // namespace

Tensor warp_image(const Tensor& img, const SimilarityTransform& T, int out_size) {
    if (out_size <= 0) throw DimensionError("warp_image: out_size must be positive");
    if (img.rank() != 3) throw DimensionError("warp_image: expected [C,H,W]");
    const int c = img.dim(0);
    Tensor out({c, out_size, out_size});
    const SimilarityTransform inv = T.inverse();
    for (int y = 0; y < out_size; ++y) {
        for (int x = 0; x < out_size; ++x) {
            Point p = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            for (int ch = 0; ch < c; ++ch)
                out.at(ch, y, x) = bilinear(img, ch, p.x, p.y);
        }
    }
    return out;
}

LandmarkSet transform_landmarks(const LandmarkSet& L, const SimilarityTransform& T) {
    LandmarkSet out = L;
    for (int i = 0; i < out.size(); ++i)
        if (out.mask[i]) out.points[i] = T.apply(out.points[i]);
    return out;
}

LandmarkSet five_point_template(double out_size) {
    LandmarkSet t = LandmarkSet::make(Schema::P5);
    t.points = {{0.35 * out_size, 0.35 * out_size},
                {0.65 * out_size, 0.35 * out_size},
                {0.50 * out_size, 0.55 * out_size},
                {0.38 * out_size, 0.72 * out_size},
                {0.62 * out_size, 0.72 * out_size}};
    return t;
}

void save_landmarks_text(const std::string& path, const LandmarkSet& L) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.precision(17);
    os << L.size() << "\n";
    for (int i = 0; i < L.size(); ++i)
        os << L.points[i].x << " " << L.points[i].y << " " << (L.mask[i] ? 1 : 0) << "\n";
}

LandmarkSet load_landmarks_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    int n = 0;
    is >> n;
    if (!is || n <= 0) throw std::runtime_error("bad landmark file header: " + path);
    LandmarkSet L;
    L.points.resize(n);
    L.mask.assign(n, true);
    std::string line;
    std::getline(is, line);
    for (int i = 0; i < n; ++i) {
        if (!std::getline(is, line))
            throw std::runtime_error("truncated landmark file: " + path);
        std::istringstream ls(line);
        int vis = 1;
        if (!(ls >> L.points[i].x >> L.points[i].y))
            throw std::runtime_error("bad landmark line " + std::to_string(i + 2) +
                                     " in " + path);
        if (ls >> vis) L.mask[i] = vis != 0;
    }
    switch (n) {
        case 5: L.schema = Schema::P5; break;
        case 39: L.schema = Schema::P39; break;
        case 68: L.schema = Schema::P68; break;
        case 86: L.schema = Schema::U86; break;
        default:
            throw std::runtime_error("unsupported landmark count " + std::to_string(n) +
                                     " in " + path);
    }
    return L;
}

void save_landmarks_json(const std::string& path, const LandmarkSet& L) {
    nlohmann::json j;
    j["schema"] = schema_name(L.schema);
    auto& pts = j["points"] = nlohmann::json::array();
    for (const auto& p : L.points) pts.push_back({p.x, p.y});
    j["mask"] = std::vector<int>();
    for (bool m : L.mask) j["mask"].push_back(m ? 1 : 0);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << j.dump(1);
}

LandmarkSet load_landmarks_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    is >> j;
    LandmarkSet L;
    L.schema = schema_from_name(j.at("schema").get<std::string>());
    for (const auto& p : j.at("points"))
        L.points.push_back({p[0].get<double>(), p[1].get<double>()});
    if (j.contains("mask"))
        for (const auto& m : j["mask"]) L.mask.push_back(m.get<int>() != 0);
    else
        L.mask.assign(L.points.size(), true);
    L.validate();
    return L;
}

}  // namespace mva
