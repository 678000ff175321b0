#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mva/geometry.hpp"
#include "test_helpers.hpp"

using namespace mva;

namespace {

// O(n^2) reference NMS: repeatedly take the best remaining box and erase
// everything overlapping it.
std::vector<Box> brute_force_nms(std::vector<Box> boxes, double thr) {
    std::vector<std::size_t> order(boxes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return boxes[a].score > boxes[b].score; });
    std::vector<bool> alive(boxes.size(), true);
    std::vector<Box> kept;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        if (!alive[order[oi]]) continue;
        kept.push_back(boxes[order[oi]]);
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj)
            if (alive[order[oj]] && iou(boxes[order[oi]], boxes[order[oj]]) > thr)
                alive[order[oj]] = false;
    }
    return kept;
}

std::vector<Box> random_boxes(Rng& rng, int n) {
    std::vector<Box> boxes;
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
        Box b{x, y, x + rng.uniform(5, 40), y + rng.uniform(5, 40)};
        b.score = rng.uniform();
        boxes.push_back(b);
    }
    return boxes;
}

LandmarkSet random_points(Rng& rng, int n) {
    LandmarkSet L;
    L.schema = Schema::P5;
    for (int i = 0; i < n; ++i) {
        L.points.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
        L.mask.push_back(true);
    }
    return L;
}

double similarity_residual(const SimilarityTransform& T, const LandmarkSet& src,
                           const LandmarkSet& dst) {
    double r = 0;
    for (int i = 0; i < src.size(); ++i) {
        const Point p = T.apply(src.points[i]);
        r += (p.x - dst.points[i].x) * (p.x - dst.points[i].x) +
             (p.y - dst.points[i].y) * (p.y - dst.points[i].y);
    }
    return r;
}

}  // namespace

TEST_CASE("iou basics") {
    Box a{0, 0, 10, 10}, b{5, 0, 15, 10}, c{20, 20, 30, 30};
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, b) == doctest::Approx(50.0 / 150.0));
    CHECK(iou(a, c) == 0.0);
}

TEST_CASE("nms equals the brute-force oracle on 1000 seeded cases") {
    Rng rng(31);
    for (int it = 0; it < 1000; ++it) {
        const int n = 1 + static_cast<int>(rng.index(25));
        const double thr = rng.uniform(0.1, 0.9);
        std::vector<Box> boxes = random_boxes(rng, n);
        std::vector<Box> fast = nms(boxes, thr);
        std::vector<Box> slow = brute_force_nms(boxes, thr);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(fast[i].x1 == slow[i].x1);
            CHECK(fast[i].y1 == slow[i].y1);
            CHECK(fast[i].score == slow[i].score);
        }
    }
}

TEST_CASE("box target encode/decode round trip") {
    Rng rng(32);
    for (int it = 0; it < 200; ++it) {
        const double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
        Box anchor{x, y, x + rng.uniform(5, 30), y + rng.uniform(5, 30)};
        const double gx = rng.uniform(0, 50), gy = rng.uniform(0, 50);
        Box gt{gx, gy, gx + rng.uniform(5, 30), gy + rng.uniform(5, 30)};
        Box back = decode_box_target(anchor, encode_box_target(anchor, gt));
        CHECK(std::abs(back.x1 - gt.x1) < 1e-9);
        CHECK(std::abs(back.y1 - gt.y1) < 1e-9);
        CHECK(std::abs(back.x2 - gt.x2) < 1e-9);
        CHECK(std::abs(back.y2 - gt.y2) < 1e-9);
    }
}

TEST_CASE("estimate_similarity recovers a known transform") {
    Rng rng(33);
    for (int it = 0; it < 50; ++it) {
        LandmarkSet src = random_points(rng, 5);
        SimilarityTransform T;
        T.scale = rng.uniform(0.5, 2.0);
        T.rotation = rng.uniform(-M_PI, M_PI);
        T.tx = rng.uniform(-20, 20);
        T.ty = rng.uniform(-20, 20);
        LandmarkSet dst = transform_landmarks(src, T);
        SimilarityTransform E = estimate_similarity(src, dst);
        CHECK(E.scale == doctest::Approx(T.scale).epsilon(1e-9));
        CHECK(std::abs(std::remainder(E.rotation - T.rotation, 2 * M_PI)) < 1e-9);
        CHECK(E.tx == doctest::Approx(T.tx).epsilon(1e-7));
        CHECK(E.ty == doctest::Approx(T.ty).epsilon(1e-7));
    }
}

TEST_CASE("estimate_similarity is a least-squares optimum (grid refinement oracle)") {
    Rng rng(34);
    for (int it = 0; it < 20; ++it) {
        LandmarkSet src = random_points(rng, 6);
        LandmarkSet dst = random_points(rng, 6);  // unrelated: noisy problem
        SimilarityTransform E = estimate_similarity(src, dst);
        const double base = similarity_residual(E, src, dst);
        // local grid around the estimate must not improve the residual
        double best = base;
        for (int ds = -2; ds <= 2; ++ds)
            for (int dr = -2; dr <= 2; ++dr)
                for (int dx = -2; dx <= 2; ++dx)
                    for (int dy = -2; dy <= 2; ++dy) {
                        SimilarityTransform P = E;
                        P.scale += ds * 1e-4;
                        P.rotation += dr * 1e-4;
                        P.tx += dx * 1e-3;
                        P.ty += dy * 1e-3;
                        best = std::min(best, similarity_residual(P, src, dst));
                    }
        CHECK(base - best < 1e-6);
    }
}

TEST_CASE("estimate_similarity rejects degenerate input") {
    LandmarkSet src = LandmarkSet::make(Schema::P5);
    LandmarkSet dst = LandmarkSet::make(Schema::P5);
    for (int i = 0; i < 5; ++i) {
        src.points[i] = {1.0, 2.0};  // all coincident
        dst.points[i] = {static_cast<double>(i), 0.0};
        src.mask[i] = dst.mask[i] = true;
    }
    CHECK_THROWS_AS(estimate_similarity(src, dst), NumericError);

    LandmarkSet one = src;
    one.mask.assign(5, false);
    one.mask[0] = true;
    CHECK_THROWS_AS(estimate_similarity(one, dst), NumericError);
}

TEST_CASE("similarity transform compose and inverse") {
    Rng rng(35);
    SimilarityTransform A{1.4, 0.3, 2, -5}, B{0.7, -1.1, -3, 4};
    const Point p{3.3, -2.2};
    const Point q1 = A.apply(B.apply(p));
    const Point q2 = A.compose(B).apply(p);
    CHECK(q1.x == doctest::Approx(q2.x).epsilon(1e-12));
    CHECK(q1.y == doctest::Approx(q2.y).epsilon(1e-12));
    const Point r = A.inverse().apply(A.apply(p));
    CHECK(r.x == doctest::Approx(p.x).epsilon(1e-12));
    CHECK(r.y == doctest::Approx(p.y).epsilon(1e-12));
}

TEST_CASE("warp_image: identity transform is the identity") {
    Rng rng(36);
    Tensor img = testutil::random_tensor({3, 8, 8}, rng, 0, 1);
    Tensor out = warp_image(img, SimilarityTransform::identity(), 8);
    for (std::size_t i = 0; i < img.numel(); ++i)
        CHECK(out[i] == doctest::Approx(img[i]).epsilon(1e-12));
}

TEST_CASE("landmark text and json round trips") {
    Rng rng(37);
    LandmarkSet L = random_points(rng, 5);
    L.mask[2] = false;
    const std::string base =
        (std::filesystem::temp_directory_path() / "mva_test_landmarks").string();
    save_landmarks_text(base + ".txt", L);
    LandmarkSet t = load_landmarks_text(base + ".txt");
    REQUIRE(t.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(t.points[i].x == doctest::Approx(L.points[i].x).epsilon(1e-9));
        CHECK(t.mask[i] == L.mask[i]);
    }
    save_landmarks_json(base + ".json", L);
    LandmarkSet j = load_landmarks_json(base + ".json");
    CHECK(j.schema == L.schema);
    for (int i = 0; i < 5; ++i) CHECK(j.points[i].y == doctest::Approx(L.points[i].y));
    std::remove((base + ".txt").c_str());
    std::remove((base + ".json").c_str());
}

TEST_CASE("five point template spans the crop sensibly") {
    LandmarkSet t = five_point_template(64);
    CHECK(t.size() == 5);
    for (const auto& p : t.points) {
        CHECK(p.x > 0);
        CHECK(p.x < 64);
        CHECK(p.y > 0);
        CHECK(p.y < 64);
    }
    CHECK(t.points[0].y == t.points[1].y);        // eyes level
    CHECK(t.points[0].x < t.points[1].x);         // left eye left of right eye
    CHECK(t.points[2].y > t.points[0].y);         // nose below the eyes
    CHECK(t.points[3].y > t.points[2].y);         // mouth below the nose
}
