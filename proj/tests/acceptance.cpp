// Property-based acceptance suite. Each criterion prints a single
// PASS/FAIL line; the exit status is the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iterator>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mva/gradcheck.hpp"
#include "mva/metrics.hpp"
#include "mva/pipeline.hpp"
#include "mva/synth.hpp"
#include "mva/trainer.hpp"

using namespace mva;

namespace {

bool g_verbose = false;

void vlog(const char* fmt, ...) {
    if (!g_verbose) return;
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
    std::fflush(stderr);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

UnionSchema u68_schema() {
    return build_union_schema(UnionKind::U68, canonical_frontal_template(),
                              canonical_profile_template());
}

Tensor noise(const std::vector<int>& shape, Rng& rng, double lo, double hi) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

ad::Var fit_loss(const ad::Var& out, const Tensor& target) {
    return ad::sum(ad::smooth_l1(ad::sub(out, ad::constant(target))));
}

ViewMask view_mask(const UnionSchema& schema, View view) {
    ViewMask m = ViewMask::none(schema.size);
    const std::vector<int>& map =
        view == View::Frontal ? schema.frontal_map : schema.profile_map(view);
    for (int slot : map) m.v[slot] = true;
    return m;
}

// Training-set landmark error of the heatmap model, normalised by the
// ground-truth box diagonal.
std::vector<double> bbox_nme(MhmModel& model, const UnionSchema& schema,
                             const std::vector<Sample>& samples) {
    const bool was_training = model.training;
    model.training = false;
    std::vector<double> errors;
    for (const auto& s : samples) {
        MhmTrainItem item = prepare_mhm_item(s, schema, model.cfg);
        HeatmapStack pred = model.predict(item.crop);
        ViewMask vm = view_mask(schema, s.view);
        LandmarkSet decoded = decode_peaks(pred, vm, item.image_to_crop.inverse());
        LandmarkSet native = from_union(decoded, vm, s.view, schema);
        const double norm = normalizer_value(s.landmarks, s.view, Normalizer::BoxDiagonal, s.box);
        errors.push_back(nme(native, s.landmarks, norm));
    }
    model.training = was_training;
    return errors;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
}

// ---- criterion 1: gradient suite --------------------------------------

bool criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(11);
    double worst = 0;
    auto run = [&](const char* tag, const std::function<ad::Var()>& loss,
                   const std::vector<ad::Var>& params, int samples) {
        GradCheckReport r = gradient_check(loss, params, samples, 1e-5, rng);
        vlog("  gradcheck %-16s checked %4d  max rel %.3e (%s)", tag, r.checked,
             r.max_rel_error, r.worst_location.c_str());
        worst = std::max(worst, r.max_rel_error);
    };

    {
        ResidualUnit unit(4, 6, rng);
        Tensor input = noise({4, 8, 8}, rng, -1, 1);
        Tensor target = noise({6, 8, 8}, rng, -1, 1);
        std::vector<ad::Var> params;
        unit.collect(params);
        run("residual", [&] { return fit_loss(unit.forward(ad::constant(input), true), target); },
            params, 4);
    }
    {
        Hourglass hg(2, 4, rng);
        Tensor input = noise({4, 16, 16}, rng, -1, 1);
        Tensor target = noise({4, 16, 16}, rng, -1, 1);
        std::vector<ad::Var> params;
        hg.collect(params);
        run("hourglass", [&] { return fit_loss(hg.forward(ad::constant(input), true), target); },
            params, 3);
    }
    {
        // full model at the working configuration, masked heatmap loss
        HourglassConfig cfg;
        cfg.scales = 2;
        cfg.channels = 64;
        cfg.input_size = 64;
        cfg.heatmap_channels = 68;
        cfg.stacks = 2;
        MhmModel model(cfg, rng);
        model.training = true;
        Tensor input = noise({3, 64, 64}, rng, 0, 1);
        LandmarkSet gt = LandmarkSet::make(Schema::U68);
        for (int i = 0; i < 68; ++i) {
            gt.points[i] = {rng.uniform(8, 56), rng.uniform(8, 56)};
            gt.mask[i] = true;
        }
        ViewMask mask = ViewMask::all(68);
        for (int i = 0; i < 20; ++i) mask.v[rng.index(68)] = false;  // exercise masking
        HeatmapStack target = render_heatmaps(gt, mask, 16, 16, 1.0);
        run("mhm",
            [&] {
                std::vector<ad::Var> outs = model.forward(ad::constant(input));
                ad::Var loss = masked_mse_loss(outs[0], target, mask).loss;
                return ad::add(loss, masked_mse_loss(outs[1], target, mask).loss);
            },
            model.params(), 2);
    }
    {
        // cascade multi-task loss on stages 1 and 2
        for (int stage : {1, 2}) {
            CascadeStageNet net(stage, rng);
            const int size = CascadeStageNet::input_size(stage);
            Tensor input = noise({3, size, size}, rng, 0, 1);
            CascadeLabels labels;
            labels.cls = 1;
            for (auto& t : labels.box) t = rng.uniform(-0.2, 0.2);
            for (auto& t : labels.lmk) t = rng.uniform(-0.4, 0.4);
            labels.valid = {1, 1, 0, 1, 1};
            run(stage == 1 ? "cascade s1" : "cascade s2",
                [&] {
                    return cascade_multitask_loss(net.forward(ad::constant(input)), labels,
                                                  0.5, 0.5);
                },
                net.params(), 3);
        }
    }
    {
        PatchClassifier pc(3, rng);
        std::vector<Tensor> patches;
        for (int i = 0; i < 3; ++i) patches.push_back(noise({1, 24, 24}, rng, 0, 1));
        run("patch cls",
            [&] {
                std::vector<ad::Var> vars;
                for (const auto& p : patches) vars.push_back(ad::constant(p));
                return ad::softmax_cross_entropy(pc.forward(vars), 1);
            },
            pc.params(), 4);
    }

    const double elapsed = seconds_since(t0);
    vlog("  gradient suite: worst rel %.3e, %.1f s", worst, elapsed);
    return worst < 1e-4 && elapsed < 300.0;
}

// ---- criterion 2: oracle equivalence ----------------------------------

std::vector<Box> brute_force_nms(std::vector<Box> boxes, double thr) {
    std::stable_sort(boxes.begin(), boxes.end(),
                     [](const Box& a, const Box& b) { return a.score > b.score; });
    std::vector<Box> keep;
    for (const Box& b : boxes) {
        bool suppressed = false;
        for (const Box& k : keep) suppressed = suppressed || iou(k, b) > thr;
        if (!suppressed) keep.push_back(b);
    }
    return keep;
}

bool criterion_oracles() {
    Rng rng(21);
    bool ok = true;

    // NMS vs the O(n^2) greedy oracle
    for (int it = 0; it < 1000 && ok; ++it) {
        const int n = 1 + static_cast<int>(rng.index(40));
        std::vector<Box> boxes;
        for (int i = 0; i < n; ++i) {
            const double x = rng.uniform(0, 80), y = rng.uniform(0, 80);
            Box b{x, y, x + rng.uniform(5, 40), y + rng.uniform(5, 40)};
            b.score = rng.uniform(0, 1);
            boxes.push_back(b);
        }
        const double thr = rng.uniform(0.2, 0.7);
        std::vector<Box> fast = nms(boxes, thr);
        std::vector<Box> slow = brute_force_nms(boxes, thr);
        ok = ok && fast.size() == slow.size();
        for (std::size_t i = 0; ok && i < fast.size(); ++i)
            ok = fast[i].x1 == slow[i].x1 && fast[i].score == slow[i].score;
    }
    if (!ok) {
        vlog("  nms oracle mismatch");
        return false;
    }

    // Procrustes vs grid-refined least squares
    auto residual = [](const LandmarkSet& src, const LandmarkSet& dst,
                       const SimilarityTransform& T) {
        double r = 0;
        for (int i = 0; i < src.size(); ++i) {
            const Point p = T.apply(src.points[i]);
            r += (p.x - dst.points[i].x) * (p.x - dst.points[i].x) +
                 (p.y - dst.points[i].y) * (p.y - dst.points[i].y);
        }
        return r;
    };
    for (int it = 0; it < 20; ++it) {
        LandmarkSet src = LandmarkSet::make(Schema::P5);
        LandmarkSet dst = LandmarkSet::make(Schema::P5);
        for (int i = 0; i < 5; ++i) {
            src.points[i] = {rng.uniform(0, 10), rng.uniform(0, 10)};
            dst.points[i] = {rng.uniform(0, 10), rng.uniform(0, 10)};
            src.mask[i] = dst.mask[i] = true;
        }
        SimilarityTransform best = estimate_similarity(src, dst);
        const double base = residual(src, dst, best);
        double refined = base;
        for (int a = -2; a <= 2; ++a)
            for (int b = -2; b <= 2; ++b)
                for (int c = -2; c <= 2; ++c)
                    for (int d = -2; d <= 2; ++d) {
                        SimilarityTransform T = best;
                        T.scale += 1e-3 * a;
                        T.rotation += 1e-3 * b;
                        T.tx += 1e-2 * c;
                        T.ty += 1e-2 * d;
                        refined = std::min(refined, residual(src, dst, T));
                    }
        if (base - refined > 1e-6) {
            vlog("  procrustes beat by grid: gap %.3e", base - refined);
            return false;
        }
    }

    // AUC exact vs dense grid
    for (int it = 0; it < 50; ++it) {
        std::vector<double> errors;
        const int n = 1 + static_cast<int>(rng.index(30));
        for (int i = 0; i < n; ++i) errors.push_back(rng.uniform(0, 0.3));
        CedCurve c = CedCurve::from_errors(errors);
        const double max_err = 0.1;
        const int grid = 20000;
        double acc = 0;
        for (int gi = 0; gi < grid; ++gi)
            acc += c.ced(max_err * (gi + 0.5) / grid) * (max_err / grid);
        if (std::abs(c.auc(max_err) - acc / max_err) > 1e-3) {
            vlog("  auc oracle gap too large");
            return false;
        }
    }

    // NME vs the naive loop
    for (int it = 0; it < 50; ++it) {
        const int n = 4 + static_cast<int>(rng.index(60));
        LandmarkSet gt, pred;
        gt.schema = pred.schema = Schema::P5;
        for (int i = 0; i < n; ++i) {
            gt.points.push_back({rng.uniform(0, 50), rng.uniform(0, 50)});
            pred.points.push_back({rng.uniform(0, 50), rng.uniform(0, 50)});
            gt.mask.push_back(true);
            pred.mask.push_back(rng.uniform() > 0.1);
        }
        const double norm = rng.uniform(1, 30);
        double sum = 0;
        int count = 0;
        for (int i = 0; i < n; ++i) {
            if (!pred.mask[i]) continue;
            sum += std::hypot(pred.points[i].x - gt.points[i].x,
                              pred.points[i].y - gt.points[i].y);
            ++count;
        }
        if (count == 0) continue;
        if (std::abs(nme(pred, gt, norm) - sum / count / norm) > 1e-12) {
            vlog("  nme oracle mismatch");
            return false;
        }
    }
    return true;
}

// ---- criterion 3: masked-loss correctness ------------------------------

bool criterion_masking() {
    Rng rng(31);
    UnionSchema schema = u68_schema();

    // profile-view mask over the union channels
    LandmarkSet profile = LandmarkSet::make(Schema::P39);
    for (int i = 0; i < 39; ++i) {
        profile.points[i] = {rng.uniform(4, 60), rng.uniform(4, 60)};
        profile.mask[i] = true;
    }
    UnionPlacement placed = to_union(profile, View::LeftProfile, schema);
    ViewMask mask = placed.mask;
    HeatmapStack gt = render_heatmaps(placed.landmarks, mask, 16, 16, 1.0);

    Tensor pred_value = noise({68, 16, 16}, rng, -0.5, 1.5);
    ad::Var pred = ad::leaf(pred_value);
    MaskedLossResult r = masked_mse_loss(pred, gt, mask);
    ad::backward(r.loss);

    // gradients on every non-selected channel are bit-exact zero
    for (int c = 0; c < 68; ++c) {
        if (mask.v[c]) continue;
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j)
                if (pred->grad.at(c, i, j) != 0.0) {
                    vlog("  nonzero gradient on masked channel %d", c);
                    return false;
                }
    }

    // loss equals brute-force per-pixel accumulation
    double acc = 0;
    int selected = 0;
    for (int c = 0; c < 68; ++c) {
        if (!mask.v[c]) continue;
        ++selected;
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) {
                const double d = pred_value.at(c, i, j) - gt.maps.at(c, i, j);
                acc += d * d;
            }
    }
    acc /= selected;
    if (std::abs(acc - r.loss->value[0]) > 1e-12) {
        vlog("  loss vs brute force: %.3e vs %.3e", r.loss->value[0], acc);
        return false;
    }
    return true;
}

// ---- criteria 4/5: training -------------------------------------------

struct ChunkedTrainResult {
    double initial_loss = 0;
    double final_loss = 0;
    int steps = 0;
    double train_nme = 0;
};

// Train in evaluation-interleaved chunks so the run can stop as soon as
// the landmark error target is met.
ChunkedTrainResult chunked_train(MhmModel& model, const std::vector<Sample>& samples,
                                 const UnionSchema& schema, TrainOptions opt, int max_steps,
                                 int chunk, double nme_target) {
    ChunkedTrainResult r;
    const std::uint64_t base_seed = opt.seed;
    while (r.steps < max_steps) {
        opt.steps = std::min(chunk, max_steps - r.steps);
        opt.seed = base_seed + static_cast<std::uint64_t>(r.steps);
        TrainStats stats = train_mhm(model, samples, schema, opt);
        if (r.steps == 0) r.initial_loss = stats.loss_history.front();
        r.steps += stats.steps_run;
        r.final_loss = stats.final_loss;
        r.train_nme = mean(bbox_nme(model, schema, samples));
        vlog("  step %5d  loss %.4f  train nme %.4f", r.steps, r.final_loss, r.train_nme);
        if (r.train_nme < nme_target && r.final_loss < 0.1 * r.initial_loss) break;
    }
    return r;
}

bool criterion_overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    UnionSchema schema = u68_schema();
    HourglassConfig cfg;
    cfg.scales = 2;
    cfg.channels = 64;
    cfg.input_size = 64;
    cfg.heatmap_channels = 68;
    cfg.stacks = 2;
    cfg.sigma = 1.5;  // wider peaks regress better at 16x16 map resolution
    Rng rng(41);
    MhmModel model(cfg, rng);

    std::vector<Sample> samples = synthesize_dataset(8, 42, 160);  // 4 frontal + 4 profile

    // Warm up with batch statistics, then fine-tune against the running
    // (inference-time) statistics at decaying rates, shifting weight to
    // the final stack and growing the batch as the rate drops.
    struct Phase { double lr; int steps; bool freeze; int batch; double s1w; std::uint64_t seed; };
    const Phase phases[] = {
        {2e-4, 150, false, 8, 1.0, 44},  {2e-3, 650, true, 8, 1.0, 51},
        {1e-3, 500, true, 8, 0.5, 58},   {5e-4, 300, true, 16, 0.25, 65},
        {2e-4, 250, true, 16, 0.25, 72}, {1e-4, 150, true, 24, 0.25, 79},
    };
    double initial_loss = 0, final_loss = 0, train_nme = 1.0;
    int steps = 0;
    for (const Phase& ph : phases) {
        TrainOptions opt;
        opt.lr = ph.lr;
        opt.steps = ph.steps;
        opt.freeze_bn = ph.freeze;
        opt.batch = ph.batch;
        opt.stack1_weight = ph.s1w;
        opt.seed = ph.seed;
        TrainStats stats = train_mhm(model, samples, schema, opt);
        if (steps == 0) initial_loss = stats.loss_history.front();
        steps += stats.steps_run;
        final_loss = stats.final_loss;
        train_nme = mean(bbox_nme(model, schema, samples));
        vlog("  step %5d  loss %.4f  train nme %.4f", steps, final_loss, train_nme);
        if (train_nme < 0.015 && final_loss < 0.1 * initial_loss) break;
    }
    const double elapsed = seconds_since(t0);
    vlog("  overfit: %d steps, loss %.4f / initial %.4f, nme %.4f, %.0f s", steps,
         final_loss, initial_loss, train_nme, elapsed);
    return train_nme < 0.015 && final_loss < 0.1 * initial_loss && elapsed < 900.0;
}

bool criterion_generalization() {
    const auto t0 = std::chrono::steady_clock::now();
    UnionSchema schema = u68_schema();
    HourglassConfig cfg;
    cfg.scales = 2;
    cfg.channels = 32;
    cfg.input_size = 64;
    cfg.heatmap_channels = 68;
    cfg.stacks = 2;
    Rng rng(51);
    MhmModel model(cfg, rng);

    std::vector<Sample> train = synthesize_dataset(200, 52, 160);
    std::vector<Sample> held_out = synthesize_dataset(50, 53, 160);
    TrainOptions opt;
    opt.batch = 12;
    opt.lr = 2e-4;
    opt.seed = 54;
    chunked_train(model, train, schema, opt, 2500, 250, 0.0);

    std::vector<double> errors = bbox_nme(model, schema, held_out);
    std::vector<double> frontal, profile;
    for (std::size_t i = 0; i < held_out.size(); ++i)
        (held_out[i].view == View::Frontal ? frontal : profile).push_back(errors[i]);
    const double overall = mean(errors);
    const double f = mean(frontal), p = mean(profile);
    vlog("  held-out nme %.4f (frontal %.4f, profile %.4f), %.0f s", overall, f, p,
         seconds_since(t0));

    // stash the model for the pipeline/tracking criteria
    model.save("acceptance_mhm.mvaw");
    return overall < 0.04 && p <= 1.5 * f;
}

// ---- criteria 6/7: pipeline and tracking -------------------------------

struct PipelineModels {
    CascadeDetector detector;
    MhmModel mhm;
    PatchClassifier checker;
    UnionSchema schema;
    bool ready = false;
};

PipelineModels& pipeline_models() {
    static PipelineModels m;
    if (m.ready) return m;
    const auto t0 = std::chrono::steady_clock::now();
    m.schema = u68_schema();
    Rng rng(61);
    m.detector.stage1 = CascadeStageNet(1, rng);
    m.detector.stage2 = CascadeStageNet(2, rng);
    m.detector.stage3 = CascadeStageNet(3, rng);

    // windows pooled over many synthetic scenes
    std::vector<CascadeExample> d1, d2, d3;
    Rng sample_rng(62);
    for (int i = 0; i < 40; ++i) {
        Scene scene = synthesize_scene(1 + i % 3, 100 + i, 200, 40, 80);
        for (auto& ex : sample_cascade_examples(scene, 12, 6, 3, 9, sample_rng))
            d1.push_back(std::move(ex));
        for (auto& ex : sample_cascade_examples(scene, 24, 6, 3, 9, sample_rng))
            d2.push_back(std::move(ex));
        for (auto& ex : sample_cascade_examples(scene, 48, 6, 3, 6, sample_rng))
            d3.push_back(std::move(ex));
    }
    TrainOptions opt;
    opt.batch = 16;
    opt.lr = 5e-3;
    opt.steps = 600;
    opt.seed = 63;
    TrainStats s1 = train_cascade_stage(m.detector.stage1, d1, opt);
    TrainStats s2 = train_cascade_stage(m.detector.stage2, d2, opt);
    opt.steps = 400;
    TrainStats s3 = train_cascade_stage(m.detector.stage3, d3, opt);
    vlog("  cascade losses: %.4f / %.4f / %.4f", s1.final_loss, s2.final_loss, s3.final_loss);

    if (std::filesystem::exists("acceptance_mhm.mvaw")) {
        m.mhm = MhmModel::load("acceptance_mhm.mvaw");
    } else {
        // criteria run standalone: fall back to a freshly trained model
        HourglassConfig cfg;
        cfg.scales = 2;
        cfg.channels = 32;
        cfg.input_size = 64;
        cfg.heatmap_channels = 68;
        cfg.stacks = 2;
        Rng mr(64);
        m.mhm = MhmModel(cfg, mr);
        TrainOptions mopt;
        mopt.batch = 12;
        mopt.lr = 2e-4;
        mopt.seed = 65;
        chunked_train(m.mhm, synthesize_dataset(200, 52, 160), m.schema, mopt, 2500, 250, 0.0);
    }
    m.mhm.save("acceptance_mhm.mvaw");

    Rng pr(66);
    m.checker = PatchClassifier(m.schema.size, pr);
    std::vector<Sample> patch_data = synthesize_dataset(60, 67, 160);
    std::vector<PatchExample> patches = make_patch_examples(patch_data, m.schema, 128, 24, 68);
    TrainOptions popt;
    popt.batch = 8;
    popt.lr = 2e-3;
    popt.steps = 300;
    popt.seed = 69;
    TrainStats ps = train_patch_classifier(m.checker, patches, popt);
    vlog("  patch classifier loss %.4f; models ready in %.0f s", ps.final_loss,
         seconds_since(t0));
    m.ready = true;
    return m;
}

bool criterion_pipeline() {
    PipelineModels& m = pipeline_models();
    PipelineParams params;
    params.thresholds = {0.5, 0.5, 0.3, 0.7};

    int total_gt = 0, matched_gt = 0, false_positives = 0;
    bool counts_ok = true;
    for (int i = 0; i < 5; ++i) {
        Scene scene = synthesize_scene(3, 1000 + i, 200, 40, 80);
        DetectionTrace trace;
        std::vector<Detection> dets = m.detector.detect(scene.image, params, &trace);
        counts_ok = counts_ok && trace.stage1 >= trace.stage2 && trace.stage2 >= trace.stage3;

        // patch-classifier stage: keep detections whose fitted landmarks
        // look like a face
        std::vector<Detection> kept;
        for (const Detection& d : dets) {
            SimilarityTransform T =
                normalize_face(d.five, d.box, m.mhm.cfg.input_size, params.box_expand);
            FitResult fit = fit_landmarks(m.mhm, m.schema, scene.image, T);
            if (check_fit(m.checker, scene.image, fit, params) >= params.thresholds[3])
                kept.push_back(d);
        }

        std::vector<bool> gt_used(scene.faces.size(), false);
        for (const Detection& d : kept) {
            bool is_tp = false;
            for (std::size_t g = 0; g < scene.faces.size(); ++g) {
                if (!gt_used[g] && iou(d.box, scene.faces[g].box) >= 0.5) {
                    gt_used[g] = true;
                    is_tp = true;
                    break;
                }
            }
            if (!is_tp) ++false_positives;
        }
        total_gt += static_cast<int>(scene.faces.size());
        for (bool u : gt_used) matched_gt += u ? 1 : 0;
        vlog("  scene %d: stages %d/%d/%d, kept %zu, matched %d/%zu", i, trace.stage1,
             trace.stage2, trace.stage3, kept.size(),
             static_cast<int>(std::count(gt_used.begin(), gt_used.end(), true)),
             scene.faces.size());
    }
    vlog("  recall %d/%d, false positives %d, counts %s", matched_gt, total_gt,
         false_positives, counts_ok ? "ok" : "violated");
    return matched_gt == total_gt && false_positives == 0 && counts_ok;
}

bool criterion_tracking() {
    PipelineModels& m = pipeline_models();
    PipelineParams params;
    params.thresholds = {0.5, 0.5, 0.3, 0.7};

    // clean sequence: every frame tracked, per-frame landmark error small
    {
        std::vector<Scene> frames = synthesize_sequence(100, 71, 160);
        FaceTracker tracker(m.detector, MhmModel::load("acceptance_mhm.mvaw"), m.schema,
                            m.checker, params);
        int lost = 0;
        double worst = 0;
        for (std::size_t t = 0; t < frames.size(); ++t) {
            TrackStepResult r = tracker.step(frames[t].image);
            if (!r.found) {
                ++lost;
                continue;
            }
            const SceneFace& gt = frames[t].faces[0];
            const double norm =
                normalizer_value(gt.full, gt.view, Normalizer::BoxDiagonal, gt.box);
            worst = std::max(worst, nme(r.fit.landmarks, gt.full, norm));
        }
        vlog("  clean sequence: lost %d, worst nme %.4f", lost, worst);
        if (lost != 0 || worst >= 0.02) return false;
    }

    // occluded sequence: frames 12..16 blanked; the checker must trip and
    // tracking must resume within 3 frames of the occlusion end
    {
        std::vector<Scene> frames = synthesize_sequence(30, 72, 160, 12, 17);
        FaceTracker tracker(m.detector, MhmModel::load("acceptance_mhm.mvaw"), m.schema,
                            m.checker, params);
        bool tripped = false;
        int resumed_at = -1;
        for (std::size_t t = 0; t < frames.size(); ++t) {
            TrackStepResult r = tracker.step(frames[t].image);
            if (t >= 12 && t < 17 && (!r.found || r.redetected)) tripped = true;
            if (t >= 17 && r.found && resumed_at < 0) resumed_at = static_cast<int>(t);
        }
        vlog("  occlusion: checker tripped %d, resumed at frame %d", tripped ? 1 : 0,
             resumed_at);
        if (!tripped || resumed_at < 0 || resumed_at > 19) return false;
    }
    return true;
}

// ---- criterion 8: round trips ------------------------------------------

bool criterion_roundtrips() {
    Rng rng(81);
    UnionSchema schema = u68_schema();

    // heatmap render -> decode within half a heatmap cell
    for (int it = 0; it < 50; ++it) {
        LandmarkSet L = LandmarkSet::make(Schema::P5);
        for (int i = 0; i < 5; ++i) {
            L.points[i] = {rng.uniform(8, 56), rng.uniform(8, 56)};
            L.mask[i] = true;
        }
        ViewMask mask = ViewMask::all(5);
        HeatmapStack hm = render_heatmaps(L, mask, 16, 16, 1.0);
        LandmarkSet back = decode_peaks(hm, mask, SimilarityTransform::identity());
        for (int i = 0; i < 5; ++i) {
            const double err = std::hypot(back.points[i].x - L.points[i].x,
                                          back.points[i].y - L.points[i].y) /
                               hm.ratio;
            if (err > 0.5) {
                vlog("  heatmap round trip error %.3f cells", err);
                return false;
            }
        }
    }

    // box target codec
    for (int it = 0; it < 200; ++it) {
        const double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
        Box anchor{x, y, x + rng.uniform(10, 50), y + rng.uniform(10, 50)};
        Box gt{x + rng.uniform(-10, 10), y + rng.uniform(-10, 10), 0, 0};
        gt.x2 = gt.x1 + rng.uniform(10, 50);
        gt.y2 = gt.y1 + rng.uniform(10, 50);
        Box back = decode_box_target(anchor, encode_box_target(anchor, gt));
        if (std::abs(back.x1 - gt.x1) > 1e-9 || std::abs(back.y2 - gt.y2) > 1e-9) {
            vlog("  box codec round trip exceeded 1e-9");
            return false;
        }
    }

    // union placement round trip is exact
    for (View view : {View::Frontal, View::LeftProfile, View::RightProfile}) {
        LandmarkSet L = LandmarkSet::make(view == View::Frontal ? Schema::P68 : Schema::P39);
        for (int i = 0; i < L.size(); ++i) {
            L.points[i] = {rng.uniform(0, 64), rng.uniform(0, 64)};
            L.mask[i] = true;
        }
        UnionPlacement placed = to_union(L, view, schema);
        LandmarkSet back = from_union(placed.landmarks, placed.mask, view, schema);
        for (int i = 0; i < L.size(); ++i)
            if (back.points[i].x != L.points[i].x || back.points[i].y != L.points[i].y) {
                vlog("  union round trip not exact");
                return false;
            }
    }

    // weight save/load reproduces predictions bit-exactly
    {
        HourglassConfig cfg;
        cfg.scales = 1;
        cfg.channels = 8;
        cfg.input_size = 32;
        cfg.heatmap_channels = 68;
        MhmModel model(cfg, rng);
        Tensor input = noise({3, 32, 32}, rng, 0, 1);
        model.training = true;
        model.forward(ad::constant(input));  // prime batchnorm running stats
        model.training = false;
        HeatmapStack before = model.predict(input);
        model.save("acceptance_roundtrip.mvaw");
        MhmModel loaded = MhmModel::load("acceptance_roundtrip.mvaw");
        HeatmapStack after = loaded.predict(input);
        for (std::size_t i = 0; i < before.maps.numel(); ++i)
            if (before.maps[i] != after.maps[i]) {
                vlog("  reloaded weights changed the prediction");
                return false;
            }
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    long only = 0;  // 0 = run everything
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--verbose") == 0) g_verbose = true;
        else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atol(argv[++i]);
    }

    struct Criterion {
        const char* name;
        bool (*fn)();
    };
    const Criterion criteria[] = {
        {"gradient suite", criterion_gradients},
        {"oracle equivalence", criterion_oracles},
        {"masked loss", criterion_masking},
        {"overfit reproduction", criterion_overfit},
        {"generalization sanity", criterion_generalization},
        {"detection pipeline", criterion_pipeline},
        {"tracking", criterion_tracking},
        {"round trips", criterion_roundtrips},
    };

    int failures = 0;
    for (std::size_t i = 0; i < std::size(criteria); ++i) {
        if (only > 0 && static_cast<long>(i + 1) != only) continue;
        bool ok = false;
        std::string note;
        try {
            ok = criteria[i].fn();
        } catch (const std::exception& e) {
            note = std::string(" (") + e.what() + ")";
        }
        std::printf("criterion %zu (%s): %s%s\n", i + 1, criteria[i].name,
                    ok ? "PASS" : "FAIL", note.c_str());
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    return failures;
}
