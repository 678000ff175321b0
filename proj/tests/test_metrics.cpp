#include <doctest.h>

#include <cmath>

#include "mva/metrics.hpp"
#include "test_helpers.hpp"

using namespace mva;

namespace {

LandmarkSet random_set(Rng& rng, int n) {
    LandmarkSet L;
    L.schema = Schema::P5;
    for (int i = 0; i < n; ++i) {
        L.points.push_back({rng.uniform(0, 100), rng.uniform(0, 100)});
        L.mask.push_back(true);
    }
    return L;
}

}  // namespace

TEST_CASE("nme: trivial identities") {
    Rng rng(81);
    LandmarkSet gt = random_set(rng, 10);
    CHECK(nme(gt, gt, 5.0) == 0.0);

    LandmarkSet off = gt;
    off.points[0].x += 7.0;  // one point off by exactly the normaliser
    CHECK(nme(off, gt, 7.0) == doctest::Approx(1.0 / 10).epsilon(1e-12));
}

TEST_CASE("nme matches the two-loop oracle on 20 seeded samples") {
    Rng rng(82);
    for (int it = 0; it < 20; ++it) {
        const int n = 5 + static_cast<int>(rng.index(64));
        LandmarkSet gt = random_set(rng, n);
        LandmarkSet pred = random_set(rng, n);
        pred.mask[static_cast<std::size_t>(rng.index(n))] = false;
        const double norm = rng.uniform(1, 50);

        double sum = 0;
        int count = 0;
        for (int k = 0; k < n; ++k) {
            if (!pred.mask[k] || !gt.mask[k]) continue;
            const double dx = pred.points[k].x - gt.points[k].x;
            const double dy = pred.points[k].y - gt.points[k].y;
            sum += std::sqrt(dx * dx + dy * dy);
            ++count;
        }
        CHECK(std::abs(nme(pred, gt, norm) - sum / count / norm) < 1e-12);
    }
}

TEST_CASE("nme error cases") {
    Rng rng(83);
    LandmarkSet gt = random_set(rng, 5);
    LandmarkSet pred = random_set(rng, 5);
    CHECK_THROWS_AS(nme(pred, gt, 0.0), NumericError);
    pred.mask.assign(5, false);
    CHECK_THROWS_AS(nme(pred, gt, 1.0), NumericError);
}

TEST_CASE("nme invariance under a joint similarity transform") {
    Rng rng(84);
    LandmarkSet gt = random_set(rng, 8);
    LandmarkSet pred = random_set(rng, 8);
    SimilarityTransform T{1.7, 0.6, 12, -4};
    const double norm = 9.0;
    const double before = nme(pred, gt, norm);
    const double after =
        nme(transform_landmarks(pred, T), transform_landmarks(gt, T), norm * T.scale);
    CHECK(before == doctest::Approx(after).epsilon(1e-12));
}

TEST_CASE("normalizer kinds") {
    CHECK(normalizer_from_name("eye_centre") == Normalizer::EyeCentres);
    CHECK(normalizer_name(Normalizer::BoxDiagonal) == "bbox_diagonal");
    LandmarkSet gt = LandmarkSet::make(Schema::P68);
    for (int i = 0; i < 68; ++i) {
        gt.points[i] = {static_cast<double>(i), 0.0};
        gt.mask[i] = true;
    }
    Box box{0, 0, 30, 40};
    CHECK(normalizer_value(gt, View::Frontal, Normalizer::BoxDiagonal, box) ==
          doctest::Approx(50.0));
    CHECK(normalizer_value(gt, View::Frontal, Normalizer::OuterCorners, box) ==
          doctest::Approx(std::abs(36.0 - 45.0)));
    // eye centre: means of indices 36..41 and 42..47 -> 38.5 and 44.5
    CHECK(normalizer_value(gt, View::Frontal, Normalizer::EyeCentres, box) ==
          doctest::Approx(6.0));
    // profile views fall back to the diagonal for eye-based kinds
    CHECK(normalizer_value(gt, View::LeftProfile, Normalizer::EyeCentres, box) ==
          doctest::Approx(50.0));
}

TEST_CASE("ced/auc/failure rate: hand-checked examples") {
    CedCurve zero = CedCurve::from_errors({0, 0, 0});
    CHECK(zero.auc(0.1) == doctest::Approx(1.0));
    CHECK(zero.failure_rate(0.1) == doctest::Approx(0.0));

    CedCurve c = CedCurve::from_errors({0.05, 0.05, 0.15});
    CHECK(c.failure_rate(0.1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(c.auc(0.1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(c.ced(0.05) == doctest::Approx(2.0 / 3));
    // FR == 1 - CED exactly
    for (double thr : {0.01, 0.05, 0.1, 0.2})
        CHECK(c.failure_rate(thr) == 1.0 - c.ced(thr));
}

TEST_CASE("auc equals a dense-grid trapezoid oracle on 100 seeded lists") {
    Rng rng(85);
    for (int it = 0; it < 100; ++it) {
        const int n = 1 + static_cast<int>(rng.index(40));
        std::vector<double> errors;
        for (int i = 0; i < n; ++i) errors.push_back(rng.uniform(0, 0.3));
        const double max_err = rng.uniform(0.05, 0.25);
        CedCurve c = CedCurve::from_errors(errors);

        const int grid = 10000;
        double acc = 0;
        for (int gi = 0; gi < grid; ++gi) {
            const double e0 = max_err * gi / grid;
            const double e1 = max_err * (gi + 1) / grid;
            acc += 0.5 * (c.ced(e0) + c.ced(e1)) * (e1 - e0);
        }
        CHECK(std::abs(c.auc(max_err) - acc / max_err) < 1e-3);
    }
}

TEST_CASE("ced curve is monotone with range [0,1]") {
    Rng rng(86);
    std::vector<double> errors;
    for (int i = 0; i < 50; ++i) errors.push_back(rng.uniform(0, 0.4));
    CedCurve c = CedCurve::from_errors(errors);
    double prev = -1;
    for (int i = 0; i <= 100; ++i) {
        const double v = c.ced(0.005 * i);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
    }
    CHECK(c.auc(0.2) >= 0.0);
    CHECK(c.auc(0.2) <= 1.0);
}

TEST_CASE("detection matching: perfect detector and score ordering") {
    std::vector<std::vector<Box>> gt{{Box{0, 0, 10, 10}, Box{30, 30, 44, 44}}};
    std::vector<std::vector<Box>> det = gt;
    det[0][0].score = 0.9;
    det[0][1].score = 0.8;
    DetectionCurve c = match_detections(det, gt, 0.5);
    CHECK(c.total_gt == 2);
    CHECK(c.recall_at_fp(0) == doctest::Approx(1.0));
    CHECK(c.average_precision() == doctest::Approx(1.0));
}

TEST_CASE("detection matching equals a brute-force sweep oracle on seeded cases") {
    Rng rng(87);
    for (int it = 0; it < 20; ++it) {
        // seeded ground truth and noisy detections over 10 images
        std::vector<std::vector<Box>> gt(10), det(10);
        for (int im = 0; im < 10; ++im) {
            const int ngt = 1 + static_cast<int>(rng.index(3));
            for (int i = 0; i < ngt; ++i) {
                const double x = rng.uniform(0, 150), y = rng.uniform(0, 150);
                gt[im].push_back(Box{x, y, x + 30, y + 30});
            }
            for (const auto& g : gt[im]) {
                if (rng.uniform() < 0.8) {  // jittered true detection
                    Box d = g;
                    d.x1 += rng.uniform(-3, 3);
                    d.y1 += rng.uniform(-3, 3);
                    d.score = rng.uniform(0.5, 1.0);
                    det[im].push_back(d);
                }
            }
            const int nfp = static_cast<int>(rng.index(3));
            for (int i = 0; i < nfp; ++i) {
                const double x = rng.uniform(200, 400), y = rng.uniform(200, 400);
                Box d{x, y, x + 25, y + 25};
                d.score = rng.uniform(0.0, 0.9);
                det[im].push_back(d);
            }
        }
        DetectionCurve c = match_detections(det, gt, 0.5);

        // oracle: explicit threshold sweep; at each threshold re-run the
        // greedy matching from scratch and count TP/FP
        for (double thr : {0.0, 0.3, 0.6, 0.9}) {
            int tp_oracle = 0, fp_oracle = 0;
            std::vector<std::vector<Box>> kept(10);
            for (int im = 0; im < 10; ++im)
                for (const auto& d : det[im])
                    if (d.score >= thr) kept[im].push_back(d);
            DetectionCurve sub = match_detections(kept, gt, 0.5);
            for (const auto& m : sub.matches) (m.tp ? tp_oracle : fp_oracle) += 1;

            int tp = 0, fp = 0;
            for (const auto& m : c.matches)
                if (m.score >= thr) (m.tp ? tp : fp) += 1;
            CHECK(tp == tp_oracle);
            CHECK(fp == fp_oracle);
        }
    }
}
