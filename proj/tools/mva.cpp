// Command-line surface for the multi-view alignment library: dataset
// synthesis, model training, alignment, detection, tracking, evaluation
// and gradient checking. Every run writes a manifest (command, config,
// seed, version) into the output directory for reproducibility.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "mva/config.hpp"
#include "mva/gradcheck.hpp"
#include "mva/image.hpp"
#include "mva/metrics.hpp"
#include "mva/pipeline.hpp"
#include "mva/synth.hpp"
#include "mva/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out = "out";
    mva::Config cfg;
};

void write_manifest(const GlobalArgs& g, const std::string& command) {
    fs::create_directories(g.out);
    json j;
    j["command"] = command;
    j["seed"] = g.seed;
    j["version"] = MVA_VERSION;
    json c = json::object();
    for (const auto& [k, v] : g.cfg.values()) c[k] = v;
    j["config"] = c;
    std::ofstream os(g.out + "/run_manifest.json");
    os << j.dump(1) << "\n";
}

mva::UnionSchema make_union(const std::string& kind) {
    mva::LandmarkSet frontal = mva::canonical_frontal_template();
    mva::LandmarkSet profile = mva::canonical_profile_template();
    if (kind == "u68")
        return mva::build_union_schema(mva::UnionKind::U68, frontal, profile);
    if (kind == "u86")
        return mva::build_union_schema(mva::UnionKind::U86, frontal, profile,
                                       mva::default_dissimilated(profile));
    throw std::runtime_error("unknown union schema: " + kind + " (use u68 or u86)");
}

json box_to_json(const mva::Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

json landmarks_to_json(const mva::LandmarkSet& L) {
    json pts = json::array();
    for (int k = 0; k < L.size(); ++k)
        pts.push_back(json::array({L.points[k].x, L.points[k].y, L.mask[k] ? 1 : 0}));
    return pts;
}

// CLI value if the flag was given, else config value, else the default.
template <typename T>
T resolve(const CLI::Option* opt, T cli_value, const mva::Config& cfg,
          const std::string& key, T fallback) {
    if (opt->count() > 0) return cli_value;
    return cfg.get(key, fallback);
}

// ---- synth -----------------------------------------------------------

void run_synth(const GlobalArgs& g, const std::string& kind, int count, int image_size,
               int faces_per_scene) {
    fs::create_directories(g.out);
    if (kind == "faces") {
        std::vector<mva::Sample> samples = mva::synthesize_dataset(count, g.seed, image_size);
        mva::save_dataset(g.out, "manifest.jsonl", samples);
        std::printf("wrote %zu face samples to %s\n", samples.size(), g.out.c_str());
    } else if (kind == "scenes") {
        json index = json::array();
        for (int i = 0; i < count; ++i) {
            mva::Scene scene = mva::synthesize_scene(faces_per_scene, g.seed + i, image_size,
                                                     30.0, 0.45 * image_size);
            char name[64];
            std::snprintf(name, sizeof name, "scene_%04d.ppm", i);
            mva::save_image(g.out + "/" + name, scene.image);
            json entry;
            entry["image"] = name;
            json boxes = json::array();
            for (const auto& f : scene.faces) boxes.push_back(box_to_json(f.box));
            entry["boxes"] = boxes;
            index.push_back(entry);
        }
        std::ofstream os(g.out + "/scenes.json");
        os << index.dump(1) << "\n";
        std::printf("wrote %d scenes to %s\n", count, g.out.c_str());
    } else if (kind == "sequence") {
        std::vector<mva::Scene> frames = mva::synthesize_sequence(count, g.seed, image_size);
        std::ofstream os(g.out + "/sequence_gt.jsonl");
        for (std::size_t i = 0; i < frames.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "frame_%04zu.ppm", i);
            mva::save_image(g.out + "/" + name, frames[i].image);
            json entry;
            entry["frame"] = name;
            entry["boxes"] = json::array();
            for (const auto& f : frames[i].faces)
                entry["boxes"].push_back(box_to_json(f.box));
            os << entry.dump() << "\n";
        }
        std::printf("wrote %zu frames to %s\n", frames.size(), g.out.c_str());
    } else {
        throw std::runtime_error("unknown synth kind: " + kind);
    }
}

// ---- train -----------------------------------------------------------

std::vector<mva::Sample> load_samples(const std::string& data,
                                      const std::string& manifest) {
    mva::DatasetLoadResult r = mva::load_dataset(data, manifest);
    for (const auto& e : r.errors) std::fprintf(stderr, "skipping entry: %s\n", e.c_str());
    if (r.samples.empty()) throw std::runtime_error("dataset is empty: " + data);
    return r.samples;
}

void run_train(const GlobalArgs& g, const std::string& model_kind, const std::string& data,
               const std::string& manifest, const mva::TrainOptions& opt,
               const mva::HourglassConfig& hg_cfg, const std::string& schema_kind,
               int scenes, int faces_per_scene, int scene_size) {
    fs::create_directories(g.out);
    mva::Rng rng(g.seed);
    if (model_kind == "mhm") {
        std::vector<mva::Sample> samples = load_samples(data, manifest);
        mva::UnionSchema schema = make_union(schema_kind);
        mva::HourglassConfig cfg = hg_cfg;
        cfg.heatmap_channels = schema.size;
        cfg.validate();
        mva::MhmModel model(cfg, rng);
        mva::TrainStats stats = mva::train_mhm(model, samples, schema, opt);
        model.save(g.out + "/mhm_model");
        std::vector<double> errors = mva::evaluate_mhm(model, samples, schema);
        double mean = 0;
        for (double e : errors) mean += e;
        mean /= errors.size();
        std::printf("mhm: %d steps, final loss %.6f, training NME %.4f\n", stats.steps_run,
                    stats.final_loss, mean);
    } else if (model_kind == "cascade") {
        std::vector<mva::CascadeExample> ex1, ex2, ex3;
        for (int i = 0; i < scenes; ++i) {
            mva::Scene scene = mva::synthesize_scene(faces_per_scene, g.seed + i, scene_size,
                                                     30.0, 0.45 * scene_size);
            mva::Rng srng = rng.fork();
            auto a = mva::sample_cascade_examples(scene, 12, 6, 3, 9, srng);
            auto b = mva::sample_cascade_examples(scene, 24, 6, 3, 9, srng);
            auto c = mva::sample_cascade_examples(scene, 48, 6, 3, 9, srng);
            ex1.insert(ex1.end(), a.begin(), a.end());
            ex2.insert(ex2.end(), b.begin(), b.end());
            ex3.insert(ex3.end(), c.begin(), c.end());
        }
        mva::CascadeDetector det;
        det.stage1 = mva::CascadeStageNet(1, rng);
        det.stage2 = mva::CascadeStageNet(2, rng);
        det.stage3 = mva::CascadeStageNet(3, rng);
        mva::TrainStats s1 = mva::train_cascade_stage(det.stage1, ex1, opt);
        mva::TrainStats s2 = mva::train_cascade_stage(det.stage2, ex2, opt);
        mva::TrainStats s3 = mva::train_cascade_stage(det.stage3, ex3, opt);
        det.save(g.out + "/cascade");
        std::printf("cascade: losses %.4f / %.4f / %.4f on %zu/%zu/%zu examples\n",
                    s1.final_loss, s2.final_loss, s3.final_loss, ex1.size(), ex2.size(),
                    ex3.size());
    } else if (model_kind == "patches") {
        std::vector<mva::Sample> samples = load_samples(data, manifest);
        mva::UnionSchema schema = make_union(schema_kind);
        std::vector<mva::PatchExample> examples =
            mva::make_patch_examples(samples, schema, 128, 24, g.seed);
        mva::PatchClassifier model(schema.size, rng);
        mva::TrainStats stats = mva::train_patch_classifier(model, examples, opt);
        model.save(g.out + "/patch_model");
        std::printf("patches: %d steps, final loss %.6f\n", stats.steps_run,
                    stats.final_loss);
    } else {
        throw std::runtime_error("unknown model kind: " + model_kind);
    }
}

// ---- fit -------------------------------------------------------------

void run_fit(const GlobalArgs& g, const std::string& data, const std::string& manifest,
             const std::string& model_path, const std::string& schema_kind) {
    fs::create_directories(g.out);
    std::vector<mva::Sample> samples = load_samples(data, manifest);
    mva::UnionSchema schema = make_union(schema_kind);
    mva::MhmModel model = mva::MhmModel::load(model_path);
    std::ofstream os(g.out + "/fit_manifest.jsonl");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        mva::SimilarityTransform T =
            mva::box_crop_transform(samples[i].box, model.cfg.input_size);
        mva::FitResult fit = mva::fit_landmarks(model, schema, samples[i].image, T);
        char name[64];
        std::snprintf(name, sizeof name, "fit_%04zu.json", i);
        mva::save_landmarks_json(g.out + "/" + name, fit.landmarks);
        json entry;
        entry["landmarks"] = name;
        entry["view"] = mva::view_name(fit.view);
        entry["confidence"] = fit.confidence;
        entry["box"] = box_to_json(samples[i].box);
        os << entry.dump() << "\n";
    }
    std::printf("fitted %zu samples into %s\n", samples.size(), g.out.c_str());
}

// ---- detect ----------------------------------------------------------

void run_detect(const GlobalArgs& g, const std::string& image_path,
                const std::string& model_prefix, const mva::PipelineParams& params) {
    fs::create_directories(g.out);
    mva::Tensor image = mva::load_image(image_path);
    mva::CascadeDetector det = mva::CascadeDetector::load(model_prefix);
    std::vector<mva::Detection> found = det.detect(image, params);
    json out = json::array();
    for (const auto& d : found) {
        json e;
        e["box"] = box_to_json(d.box);
        e["score"] = d.box.score;
        e["five"] = landmarks_to_json(d.five);
        out.push_back(e);
    }
    std::ofstream os(g.out + "/detections.json");
    os << out.dump(1) << "\n";
    std::printf("%zu detections -> %s/detections.json\n", found.size(), g.out.c_str());
}

// ---- track -----------------------------------------------------------

void run_track(const GlobalArgs& g, const std::string& frames_dir,
               const std::string& cascade_prefix, const std::string& mhm_path,
               const std::string& patch_path, const std::string& schema_kind,
               bool smooth, const mva::PipelineParams& params) {
    fs::create_directories(g.out);
    std::vector<std::string> frames;
    for (const auto& entry : fs::directory_iterator(frames_dir)) {
        if (entry.path().extension() == ".ppm" || entry.path().extension() == ".pgm")
            frames.push_back(entry.path().string());
    }
    std::sort(frames.begin(), frames.end());
    if (frames.empty()) throw std::runtime_error("no frames in " + frames_dir);

    mva::FaceTracker tracker(mva::CascadeDetector::load(cascade_prefix),
                             mva::MhmModel::load(mhm_path), make_union(schema_kind),
                             mva::PatchClassifier::load(patch_path), params);
    mva::LandmarkSmoother smoother;
    std::ofstream os(g.out + "/track.jsonl");
    int found = 0;
    for (const auto& path : frames) {
        mva::TrackStepResult r = tracker.step(mva::load_image(path));
        json e;
        e["frame"] = fs::path(path).filename().string();
        e["found"] = r.found;
        e["redetected"] = r.redetected;
        if (r.found) {
            ++found;
            e["box"] = box_to_json(r.detection.box);
            e["check_probability"] = r.check_probability;
            mva::LandmarkSet L = r.fit.landmarks;
            if (smooth) L = smoother.apply(L);
            e["landmarks"] = landmarks_to_json(L);
        } else if (smooth) {
            smoother.reset();
        }
        os << e.dump() << "\n";
    }
    std::printf("tracked %d/%zu frames -> %s/track.jsonl\n", found, frames.size(),
                g.out.c_str());
}

// ---- eval ------------------------------------------------------------

void run_eval(const GlobalArgs& g, const std::string& pred_dir, const std::string& gt_root,
              const std::string& gt_manifest, const std::string& normalizer_name,
              double threshold) {
    fs::create_directories(g.out);
    std::vector<mva::Sample> gt = load_samples(gt_root, gt_manifest);
    std::ifstream is(pred_dir + "/fit_manifest.jsonl");
    if (!is) throw std::runtime_error("missing " + pred_dir + "/fit_manifest.jsonl");
    mva::Normalizer kind = mva::normalizer_from_name(normalizer_name);

    std::vector<double> errors;
    std::string line;
    std::size_t i = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (i >= gt.size()) throw std::runtime_error("more predictions than ground truth");
        json e = json::parse(line);
        mva::LandmarkSet pred =
            mva::load_landmarks_json(pred_dir + "/" + e.at("landmarks").get<std::string>());
        const mva::Sample& sample = gt[i++];
        if (pred.schema != sample.landmarks.schema) {
            errors.push_back(std::numeric_limits<double>::infinity());  // wrong view
            continue;
        }
        const double norm =
            mva::normalizer_value(sample.landmarks, sample.view, kind, sample.box);
        errors.push_back(mva::nme(pred, sample.landmarks, norm));
    }
    if (i != gt.size()) throw std::runtime_error("fewer predictions than ground truth");

    mva::CedCurve curve = mva::CedCurve::from_errors(errors);
    double mean = 0;
    int finite = 0;
    for (double e : errors)
        if (std::isfinite(e)) {
            mean += e;
            ++finite;
        }
    mva::MetricReport report;
    report["count"] = static_cast<double>(errors.size());
    report["nme_mean"] = finite > 0 ? mean / finite : std::numeric_limits<double>::infinity();
    report["auc"] = curve.auc(threshold);
    report["failure_rate"] = curve.failure_rate(threshold);
    report["threshold"] = threshold;
    mva::print_report(report);
    mva::write_report_json(g.out + "/report.json", report);
    mva::write_report_csv(g.out + "/report.csv", report);

    std::ofstream cs(g.out + "/ced_curve.csv");
    cs << "error,ced\n";
    for (std::size_t k = 0; k < curve.errors.size(); ++k)
        cs << curve.errors[k] << "," << static_cast<double>(k + 1) / curve.errors.size()
           << "\n";
}

// ---- gradcheck -------------------------------------------------------

int run_gradcheck(const GlobalArgs& g, double tolerance) {
    mva::Rng rng(g.seed);
    bool ok = true;
    auto report = [&](const char* name, const mva::GradCheckReport& r) {
        const bool pass = r.max_rel_error < tolerance;
        ok = ok && pass;
        std::printf("%-24s max rel error %.3e over %d probes  [%s]\n", name,
                    r.max_rel_error, r.checked, pass ? "ok" : "FAIL");
    };

    {
        mva::HourglassConfig cfg;
        cfg.scales = 1;
        cfg.channels = 4;
        cfg.input_size = 16;
        cfg.heatmap_channels = 3;
        cfg.stacks = 2;
        mva::MhmModel model(cfg, rng);
        model.training = true;
        mva::Tensor input({3, 16, 16});
        for (std::size_t i = 0; i < input.numel(); ++i) input[i] = rng.uniform(-1, 1);
        mva::LandmarkSet three = mva::LandmarkSet::make(mva::Schema::P5);
        three.points = {{3, 3}, {12, 3}, {8, 8}};
        three.points.resize(3);
        three.mask.assign(3, true);
        mva::ViewMask m3{{true, true, false}};
        mva::HeatmapStack gt = mva::render_heatmaps(three, m3, 4, 4, 1.0);
        auto loss = [&]() {
            std::vector<mva::ad::Var> stacks = model.forward(mva::ad::constant(input));
            mva::ad::Var total;
            for (const auto& s : stacks) {
                mva::ad::Var l = mva::masked_mse_loss(s, gt, m3).loss;
                total = total ? mva::ad::add(total, l) : l;
            }
            return total;
        };
        report("hourglass + masked mse", mva::gradient_check(loss, model.params(), 4, 1e-5, rng));
    }
    {
        mva::CascadeStageNet net(2, rng);
        mva::Tensor input({3, 24, 24});
        for (std::size_t i = 0; i < input.numel(); ++i) input[i] = rng.uniform(-1, 1);
        mva::CascadeLabels labels;
        labels.cls = 1;
        for (int i = 0; i < 4; ++i) labels.box[i] = rng.uniform(-0.2, 0.2);
        for (int i = 0; i < 10; ++i) labels.lmk[i] = rng.uniform(-0.4, 0.4);
        labels.valid = {1, 1, 0, 1, 1};
        auto loss = [&]() {
            return mva::cascade_multitask_loss(net.forward(mva::ad::constant(input)), labels,
                                               0.5, 0.5);
        };
        report("cascade multi-task", mva::gradient_check(loss, net.params(), 4, 1e-5, rng));
    }
    {
        mva::PatchClassifier pc(3, rng);
        std::vector<mva::Tensor> patches;
        for (int k = 0; k < 3; ++k) {
            mva::Tensor p({1, 24, 24});
            for (std::size_t i = 0; i < p.numel(); ++i) p[i] = rng.uniform(-1, 1);
            patches.push_back(std::move(p));
        }
        auto loss = [&]() {
            std::vector<mva::ad::Var> vars;
            for (const auto& p : patches) vars.push_back(mva::ad::constant(p));
            return mva::ad::softmax_cross_entropy(pc.forward(vars), 1);
        };
        report("patch classifier", mva::gradient_check(loss, pc.params(), 4, 1e-5, rng));
    }
    (void)g;
    return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-view face detection, alignment and tracking"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "flat key = value configuration file");
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--out", g.out, "output directory");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_kind = "faces";
    int synth_count = 40, synth_size = 160, synth_faces = 3;
    synth->add_option("--kind", synth_kind, "faces | scenes | sequence");
    synth->add_option("--count", synth_count, "samples / scenes / frames");
    synth->add_option("--image-size", synth_size, "image side in pixels");
    synth->add_option("--faces-per-scene", synth_faces, "faces per scene");

    // train
    auto* train = app.add_subcommand("train", "train a model");
    std::string train_kind = "mhm", train_data, train_manifest = "manifest.jsonl";
    std::string train_schema = "u68";
    int t_steps = 300, t_batch = 12, t_stacks = 1, t_channels = 64, t_input = 64,
        t_scales = 2;
    double t_lr = 1e-4, t_momentum = 0.9, t_target = 0.0, t_sigma = 1.0;
    bool t_augment = false;
    int t_scenes = 12, t_scene_faces = 3, t_scene_size = 160;
    train->add_option("--model", train_kind, "mhm | cascade | patches");
    train->add_option("--data", train_data, "dataset directory");
    train->add_option("--manifest", train_manifest, "manifest file name");
    train->add_option("--schema", train_schema, "u68 | u86");
    auto* o_steps = train->add_option("--steps", t_steps, "SGD steps");
    auto* o_batch = train->add_option("--batch", t_batch, "batch size");
    auto* o_lr = train->add_option("--lr", t_lr, "learning rate");
    auto* o_momentum = train->add_option("--momentum", t_momentum, "SGD momentum");
    auto* o_target = train->add_option("--target-loss", t_target, "early-stop loss");
    auto* o_stacks = train->add_option("--stacks", t_stacks, "hourglass stacks (1 or 2)");
    auto* o_channels = train->add_option("--channels", t_channels, "hourglass channels");
    auto* o_input = train->add_option("--input-size", t_input, "face crop size");
    auto* o_scales = train->add_option("--scales", t_scales, "hourglass scales");
    auto* o_sigma = train->add_option("--sigma", t_sigma, "heatmap sigma");
    train->add_flag("--augment", t_augment, "similarity jitter per draw");
    train->add_option("--scenes", t_scenes, "scene count for cascade training");
    train->add_option("--scene-faces", t_scene_faces, "faces per training scene");
    train->add_option("--scene-size", t_scene_size, "scene image size");

    // fit
    auto* fit = app.add_subcommand("fit", "align faces in a dataset");
    std::string fit_data, fit_manifest = "manifest.jsonl", fit_model, fit_schema = "u68";
    fit->add_option("--data", fit_data, "dataset directory")->required();
    fit->add_option("--manifest", fit_manifest, "manifest file name");
    fit->add_option("--model", fit_model, "MHM weight file")->required();
    fit->add_option("--schema", fit_schema, "u68 | u86");

    // detect
    auto* detect = app.add_subcommand("detect", "detect faces in one image");
    std::string det_image, det_model;
    double det_min_face = 20.0;
    detect->add_option("--image", det_image, "PPM/PGM image")->required();
    detect->add_option("--model-prefix", det_model, "cascade weight prefix")->required();
    detect->add_option("--min-face", det_min_face, "minimum face size (px)");

    // track
    auto* track = app.add_subcommand("track", "track a face through a frame directory");
    std::string trk_frames, trk_cascade, trk_mhm, trk_patches, trk_schema = "u68";
    bool trk_smooth = false;
    track->add_option("--frames", trk_frames, "directory of ordered frames")->required();
    track->add_option("--cascade", trk_cascade, "cascade weight prefix")->required();
    track->add_option("--mhm", trk_mhm, "MHM weight file")->required();
    track->add_option("--patches", trk_patches, "patch classifier weights")->required();
    track->add_option("--schema", trk_schema, "u68 | u86");
    track->add_flag("--smooth", trk_smooth, "Kalman-smooth the landmark tracks");

    // eval
    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    std::string ev_pred, ev_gt, ev_gt_manifest = "manifest.jsonl";
    std::string ev_norm = "eye_centre";
    double ev_threshold = 0.1;
    eval->add_option("--pred", ev_pred, "fit output directory")->required();
    eval->add_option("--gt", ev_gt, "ground-truth dataset directory")->required();
    eval->add_option("--gt-manifest", ev_gt_manifest, "ground-truth manifest name");
    eval->add_option("--normalizer", ev_norm, "eye_centre | outer_eye_corner | bbox_diagonal");
    eval->add_option("--threshold", ev_threshold, "CED threshold for AUC / failure rate");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    double gc_tolerance = 1e-4;
    gradcheck->add_option("--tolerance", gc_tolerance, "max allowed relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!g.config_path.empty()) g.cfg = mva::Config::load(g.config_path);
        write_manifest(g, app.get_subcommands().front()->get_name());

        if (synth->parsed()) {
            run_synth(g, synth_kind, synth_count, synth_size, synth_faces);
        } else if (train->parsed()) {
            mva::TrainOptions opt;
            opt.steps = resolve(o_steps, t_steps, g.cfg, "steps", t_steps);
            opt.batch = resolve(o_batch, t_batch, g.cfg, "batch", t_batch);
            opt.lr = resolve(o_lr, t_lr, g.cfg, "lr", t_lr);
            opt.momentum = resolve(o_momentum, t_momentum, g.cfg, "momentum", t_momentum);
            opt.target_loss = resolve(o_target, t_target, g.cfg, "target_loss", t_target);
            opt.seed = g.seed;
            opt.augment = t_augment || g.cfg.get("augment", false);
            opt.log_every = g.cfg.get("log_every", 25);
            mva::HourglassConfig cfg;
            cfg.stacks = resolve(o_stacks, t_stacks, g.cfg, "stacks", t_stacks);
            cfg.channels = resolve(o_channels, t_channels, g.cfg, "channels", t_channels);
            cfg.input_size = resolve(o_input, t_input, g.cfg, "input_size", t_input);
            cfg.scales = resolve(o_scales, t_scales, g.cfg, "scales", t_scales);
            cfg.sigma = resolve(o_sigma, t_sigma, g.cfg, "sigma", t_sigma);
            run_train(g, train_kind, train_data, train_manifest, opt, cfg, train_schema,
                      t_scenes, t_scene_faces, t_scene_size);
        } else if (fit->parsed()) {
            run_fit(g, fit_data, fit_manifest, fit_model, fit_schema);
        } else if (detect->parsed()) {
            mva::PipelineParams params;
            params.min_face = det_min_face;
            run_detect(g, det_image, det_model, params);
        } else if (track->parsed()) {
            run_track(g, trk_frames, trk_cascade, trk_mhm, trk_patches, trk_schema,
                      trk_smooth, mva::PipelineParams{});
        } else if (eval->parsed()) {
            run_eval(g, ev_pred, ev_gt, ev_gt_manifest, ev_norm, ev_threshold);
        } else if (gradcheck->parsed()) {
            return run_gradcheck(g, gc_tolerance);
        }
    } catch (const mva::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
