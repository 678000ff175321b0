#include "mva/synth.hpp"

#include <algorithm>
#include <cmath>

#include "mva/image.hpp"

namespace mva {

namespace {

constexpr double kProfileSqueezeAnchor = 0.10;
constexpr double kProfileSqueezeFactor = 0.60;

void ellipse_arc(LandmarkSet& L, int start, int count, double cx, double cy,
                 double rx, double ry, double a0_deg, double a1_deg) {
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        const double a = (a0_deg + t * (a1_deg - a0_deg)) * M_PI / 180.0;
        L.points[start + i] = {cx + rx * std::cos(a), cy + ry * std::sin(a)};
    }
}

void ellipse_closed(LandmarkSet& L, int start, int count, double cx, double cy,
                    double rx, double ry) {
    for (int i = 0; i < count; ++i) {
        const double a = 2.0 * M_PI * i / count;
        // start at the left corner, run over the top first (y down)
        L.points[start + i] = {cx - rx * std::cos(a), cy - ry * std::sin(a)};
    }
}

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
}

}  // namespace

FaceShapeParams FaceShapeParams::sample(Rng& rng) {
    FaceShapeParams p;
    p.jaw_rx *= rng.uniform(0.92, 1.08);
    p.jaw_ry *= rng.uniform(0.92, 1.08);
    p.brow_y += rng.uniform(-0.012, 0.012);
    p.eye_dx = rng.uniform(0.165, 0.195);
    p.eye_y += rng.uniform(-0.012, 0.012);
    p.eye_rx *= rng.uniform(0.85, 1.15);
    p.eye_ry *= rng.uniform(0.85, 1.15);
    p.nose_rx *= rng.uniform(0.9, 1.1);
    p.mouth_y += rng.uniform(-0.015, 0.015);
    p.mouth_rx *= rng.uniform(0.88, 1.12);
    p.mouth_ry *= rng.uniform(0.88, 1.12);
    p.mouth_inner_rx = p.mouth_rx * 0.64;
    p.mouth_inner_ry = p.mouth_ry * 0.51;
    return p;
}

LandmarkSet frontal_shape(const FaceShapeParams& p) {
    LandmarkSet L = LandmarkSet::make(Schema::P68);
    // jaw contour, left ear to right ear through the chin
    ellipse_arc(L, 0, 17, 0.50, p.jaw_cy, p.jaw_rx, p.jaw_ry, 180.0, 0.0);
    ellipse_arc(L, 17, 5, 0.50 - p.eye_dx, p.brow_y, p.brow_rx, p.brow_ry, 180.0, 360.0);
    ellipse_arc(L, 22, 5, 0.50 + p.eye_dx, p.brow_y, p.brow_rx, p.brow_ry, 180.0, 360.0);
    // nose bridge and base
    for (int i = 0; i < 4; ++i) {
        const double y =
            p.nose_top_y + i * (p.nose_base_y - 0.025 - p.nose_top_y) / 3.0;
        L.points[27 + i] = {0.50, y};
    }
    ellipse_arc(L, 31, 5, 0.50, p.nose_base_y, p.nose_rx, 0.02, 160.0, 20.0);
    ellipse_closed(L, 36, 6, 0.50 - p.eye_dx, p.eye_y, p.eye_rx, p.eye_ry);
    ellipse_closed(L, 42, 6, 0.50 + p.eye_dx, p.eye_y, p.eye_rx, p.eye_ry);
    ellipse_closed(L, 48, 12, 0.50, p.mouth_y, p.mouth_rx, p.mouth_ry);
    ellipse_closed(L, 60, 8, 0.50, p.mouth_y, p.mouth_inner_rx, p.mouth_inner_ry);
    return L;
}

LandmarkSet canonical_frontal_template() {
    return frontal_shape(FaceShapeParams::canonical());
}

LandmarkSet profile_shape(const FaceShapeParams& p) {
    const LandmarkSet frontal = frontal_shape(p);
    LandmarkSet L = LandmarkSet::make(Schema::P39);
    for (int i = 0; i < 39; ++i) {
        const Point& src = frontal.points[profile_source_indices()[i]];
        L.points[i] = {kProfileSqueezeAnchor +
                           kProfileSqueezeFactor * (src.x - kProfileSqueezeAnchor),
                       src.y};
    }
    return L;
}

namespace {

// Fixed fine-grained shading in canonical face coordinates. It deforms with
// the face, so every surface point carries a locally unique intensity
// signature; without it, position along smooth contours (jaw, brows, lips)
// is unobservable from local appearance.
double surface_texture(double x, double y) {
    return std::sin(37.0 * x + 2.1 * y) * std::sin(31.0 * y - 1.7 * x);
}

double paint_frontal(const FaceShapeParams& p, double x, double y, bool skip_right) {
    if (!in_ellipse(x, y, 0.5, p.jaw_cy, p.jaw_rx, p.jaw_ry)) return 0.05;
    double v = 0.75;  // skin
    const double lx = 0.5 - p.eye_dx, rx = 0.5 + p.eye_dx;
    if (in_ellipse(x, y, lx, p.brow_y, p.brow_rx, p.brow_ry)) v = 0.18;
    if (!skip_right && in_ellipse(x, y, rx, p.brow_y, p.brow_rx, p.brow_ry)) v = 0.18;
    if (in_ellipse(x, y, lx, p.eye_y, p.eye_rx, p.eye_ry)) v = 0.10;
    if (!skip_right && in_ellipse(x, y, rx, p.eye_y, p.eye_rx, p.eye_ry)) v = 0.10;
    // nose wedge
    if (y >= p.nose_top_y && y <= p.nose_base_y) {
        const double half = p.nose_rx * (y - p.nose_top_y) / (p.nose_base_y - p.nose_top_y);
        if (std::abs(x - 0.5) <= half) v = 0.55;
    }
    if (in_ellipse(x, y, 0.5, p.nose_base_y, p.nose_rx, 0.02)) v = 0.30;
    // lips ring and mouth interior
    const bool outer = in_ellipse(x, y, 0.5, p.mouth_y, p.mouth_rx, p.mouth_ry);
    const bool inner = in_ellipse(x, y, 0.5, p.mouth_y, p.mouth_inner_rx, p.mouth_inner_ry);
    if (outer && !inner) v = 0.22;
    else if (inner) v = 0.38;
    return v * (1.0 + 0.15 * surface_texture(x, y));
}

}  // namespace

double paint_face(const FaceShapeParams& p, View view, double x, double y) {
    if (view == View::Frontal) return paint_frontal(p, x, y, false);
    if (view == View::RightProfile) x = 1.0 - x;
    // undo the horizontal squeeze of the profile figure
    const double xf =
        kProfileSqueezeAnchor + (x - kProfileSqueezeAnchor) / kProfileSqueezeFactor;
    if (xf < -0.2 || xf > 1.2) return 0.05;
    return paint_frontal(p, xf, y, true);
}

Sample render_face(const FaceShapeParams& p, View view,
                   const SimilarityTransform& canonical_to_image, int image_size,
                   double noise_sigma, Rng& rng) {
    Sample s;
    s.view = view;
    LandmarkSet shape = view == View::Frontal ? frontal_shape(p) : profile_shape(p);
    if (view == View::RightProfile) shape = mirror_landmarks(shape);
    s.landmarks = transform_landmarks(shape, canonical_to_image);

    s.image = Tensor::zeros({3, image_size, image_size});
    const SimilarityTransform inv = canonical_to_image.inverse();
    for (int y = 0; y < image_size; ++y) {
        for (int x = 0; x < image_size; ++x) {
            const Point q = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            const double base = paint_face(p, view, q.x, q.y);
            for (int ch = 0; ch < 3; ++ch) {
                const double tint = ch == 0 ? 1.0 : (ch == 1 ? 0.92 : 0.85);
                const double noise = noise_sigma > 0 ? rng.gaussian(0, noise_sigma) : 0.0;
                s.image.at(ch, y, x) = std::clamp(base * tint + noise, 0.0, 1.0);
            }
        }
    }
    Box b = s.landmarks.bounding_box();
    const double mx = 0.10 * b.width(), my = 0.10 * b.height();
    s.box = {b.x1 - mx, b.y1 - my, b.x2 + mx, b.y2 + my, 1.0};
    return s;
}

std::vector<Sample> synthesize_dataset(int n, std::uint64_t seed, int image_size) {
    if (n <= 0) throw std::runtime_error("synthesize_dataset: n must be > 0");
    Rng master(seed);
    std::vector<Sample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng rng = master.fork();
        const View view = i % 2 == 0 ? View::Frontal
                        : (i % 4 == 1 ? View::LeftProfile : View::RightProfile);
        const FaceShapeParams p = FaceShapeParams::sample(rng);
        // jitter mirrors the training augmentation ranges
        const double rot = rng.uniform(-30.0, 30.0) * M_PI / 180.0;
        const double sc = rng.uniform(0.75, 1.25);
        const double tx = rng.uniform(-20.0, 20.0);
        const double ty = rng.uniform(-20.0, 20.0);
        SimilarityTransform T;
        T.scale = 0.55 * image_size * sc;
        T.rotation = rot;
        // canonical face centre to image centre plus jitter
        const Point c0{0.5, 0.45};
        const double c = std::cos(rot), s = std::sin(rot);
        T.tx = 0.5 * image_size + tx - T.scale * (c * c0.x - s * c0.y);
        T.ty = 0.5 * image_size + ty - T.scale * (s * c0.x + c * c0.y);
        out.push_back(render_face(p, view, T, image_size, 0.02, rng));
    }
    return out;
}

Sample augment(const Sample& sample, std::uint64_t seed) {
    Rng rng(seed);
    const double rot = rng.uniform(-30.0, 30.0) * M_PI / 180.0;
    const double sc = rng.uniform(0.75, 1.25);
    const double tx = rng.uniform(-20.0, 20.0);
    const double ty = rng.uniform(-20.0, 20.0);
    const Point c{sample.box.cx(), sample.box.cy()};
    SimilarityTransform T;
    T.scale = sc;
    T.rotation = rot;
    const double cr = std::cos(rot), sr = std::sin(rot);
    T.tx = c.x + tx - sc * (cr * c.x - sr * c.y);
    T.ty = c.y + ty - sc * (sr * c.x + cr * c.y);

    Sample out;
    out.view = sample.view;
    const int hs = sample.image.dim(1);
    if (sample.image.dim(2) != hs)
        throw DimensionError("augment: expected a square image");
    out.image = warp_image(sample.image, T, hs);
    out.landmarks = transform_landmarks(sample.landmarks, T);
    Box b = out.landmarks.bounding_box();
    const double mx = 0.10 * b.width(), my = 0.10 * b.height();
    out.box = {b.x1 - mx, b.y1 - my, b.x2 + mx, b.y2 + my, 1.0};
    return out;
}

Scene synthesize_scene(int n_faces, std::uint64_t seed, int image_size,
                       double min_face, double max_face) {
    Rng rng(seed);
    Scene scene;
    scene.image = Tensor::zeros({3, image_size, image_size});
    for (auto& v : scene.image.vec()) v = std::clamp(0.05 + rng.gaussian(0, 0.02), 0.0, 1.0);
    // background clutter: a few gray rectangles
    for (int r = 0; r < 4; ++r) {
        const int bw = static_cast<int>(rng.uniform(10, 40));
        const int bh = static_cast<int>(rng.uniform(10, 40));
        const int bx = static_cast<int>(rng.uniform(0, image_size - bw));
        const int by = static_cast<int>(rng.uniform(0, image_size - bh));
        const double shade = rng.uniform(0.2, 0.6);
        for (int y = by; y < by + bh; ++y)
            for (int x = bx; x < bx + bw; ++x)
                for (int ch = 0; ch < 3; ++ch) scene.image.at(ch, y, x) = shade;
    }

    for (int f = 0; f < n_faces; ++f) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            const double face = rng.uniform(min_face, max_face);
            const double scale = face;  // canonical face spans roughly the unit box
            const double margin = 0.62 * scale;
            const double cx = rng.uniform(margin, image_size - margin);
            const double cy = rng.uniform(margin, image_size - margin);
            Box proposal{cx - 0.5 * scale, cy - 0.55 * scale, cx + 0.5 * scale,
                         cy + 0.55 * scale, 1.0};
            bool clash = false;
            for (const auto& placed : scene.faces)
                if (iou(proposal, placed.box) > 0.0) clash = true;
            if (clash) continue;

            Rng face_rng = rng.fork();
            const FaceShapeParams p = FaceShapeParams::sample(face_rng);
            SimilarityTransform T;
            T.scale = scale;
            T.rotation = face_rng.uniform(-8.0, 8.0) * M_PI / 180.0;
            const Point c0{0.5, 0.45};
            const double c = std::cos(T.rotation), s = std::sin(T.rotation);
            T.tx = cx - T.scale * (c * c0.x - s * c0.y);
            T.ty = cy - T.scale * (s * c0.x + c * c0.y);

            const LandmarkSet shape = frontal_shape(p);
            LandmarkSet full = transform_landmarks(shape, T);
            // paint the face over the background inside its head ellipse
            const SimilarityTransform inv = T.inverse();
            const Box extent = full.bounding_box();
            const int x0 = std::max(0, static_cast<int>(extent.x1 - 0.2 * scale));
            const int x1 = std::min(image_size - 1, static_cast<int>(extent.x2 + 0.2 * scale));
            const int y0 = std::max(0, static_cast<int>(extent.y1 - 0.2 * scale));
            const int y1 = std::min(image_size - 1, static_cast<int>(extent.y2 + 0.2 * scale));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const Point q = inv.apply({static_cast<double>(x), static_cast<double>(y)});
                    if (!in_ellipse(q.x, q.y, 0.5, p.jaw_cy, p.jaw_rx, p.jaw_ry)) continue;
                    const double base = paint_face(p, View::Frontal, q.x, q.y);
                    for (int ch = 0; ch < 3; ++ch) {
                        const double tint = ch == 0 ? 1.0 : (ch == 1 ? 0.92 : 0.85);
                        scene.image.at(ch, y, x) = std::clamp(
                            base * tint + face_rng.gaussian(0, 0.02), 0.0, 1.0);
                    }
                }
            }
            SceneFace sf;
            sf.full = full;
            sf.five = five_from_landmarks(full, View::Frontal);
            Box b = full.bounding_box();
            const double mx2 = 0.10 * b.width(), my2 = 0.10 * b.height();
            sf.box = {b.x1 - mx2, b.y1 - my2, b.x2 + mx2, b.y2 + my2, 1.0};
            scene.faces.push_back(std::move(sf));
            break;
        }
    }
    return scene;
}

std::vector<Scene> synthesize_sequence(int n_frames, std::uint64_t seed, int image_size,
                                       int occlude_from, int occlude_until) {
    Rng master(seed);
    const FaceShapeParams p = FaceShapeParams::sample(master);
    std::vector<Scene> frames;
    frames.reserve(n_frames);
    for (int t = 0; t < n_frames; ++t) {
        Rng rng = master.fork();
        const double phase = 2.0 * M_PI * t / std::max(n_frames, 1);
        const double scale = 0.40 * image_size + 0.03 * image_size * std::sin(2 * phase);
        const double cx = 0.5 * image_size + 0.14 * image_size * std::sin(phase);
        const double cy = 0.5 * image_size + 0.10 * image_size * std::cos(1.3 * phase);
        SimilarityTransform T;
        T.scale = scale;
        T.rotation = 10.0 * std::sin(1.7 * phase) * M_PI / 180.0;
        const Point c0{0.5, 0.45};
        const double c = std::cos(T.rotation), s = std::sin(T.rotation);
        T.tx = cx - T.scale * (c * c0.x - s * c0.y);
        T.ty = cy - T.scale * (s * c0.x + c * c0.y);

        Sample sample = render_face(p, View::Frontal, T, image_size, 0.02, rng);
        Scene scene;
        scene.image = std::move(sample.image);
        SceneFace sf;
        sf.full = sample.landmarks;
        sf.five = five_from_landmarks(sample.landmarks, View::Frontal);
        sf.box = sample.box;

        if (t >= occlude_from && t < occlude_until) {
            const int x0 = std::max(0, static_cast<int>(sf.box.x1) - 4);
            const int x1 = std::min(image_size - 1, static_cast<int>(sf.box.x2) + 4);
            const int y0 = std::max(0, static_cast<int>(sf.box.y1) - 4);
            const int y1 = std::min(image_size - 1, static_cast<int>(sf.box.y2) + 4);
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        scene.image.at(ch, y, x) =
                            std::clamp(0.4 + rng.gaussian(0, 0.15), 0.0, 1.0);
        }
        scene.faces.push_back(std::move(sf));
        frames.push_back(std::move(scene));
    }
    return frames;
}

}  // namespace mva
