#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mva/networks.hpp"
#include "mva/schema.hpp"
#include "mva/synth.hpp"

namespace mva {

struct TrainOptions {
    int steps = 2000;
    int batch = 12;
    double lr = 1e-4;
    double momentum = 0.9;
    double grad_clip = 10.0;  // global gradient-norm cap, 0 = off
    std::uint64_t seed = 1;
    bool augment = false;         // fresh similarity jitter per epoch (MHM only)
    // Fine-tuning mode (MHM only): normalise with the accumulated running
    // statistics instead of per-crop batch statistics, so the weights adapt
    // to the exact normalisation used at inference time.
    bool freeze_bn = false;
    // Intermediate-supervision weight on the first stack's loss (MHM only).
    // 1.0 = equal weighting of both stacks; lower values favour the final
    // prediction during late fine-tuning.
    double stack1_weight = 1.0;
    double target_loss = 0.0;     // early stop when the running loss drops below
    int log_every = 0;            // 0 = silent
    std::function<void(int, double)> on_step;  // (step index, running loss)
};

struct TrainStats {
    int steps_run = 0;
    double final_loss = 0.0;           // running average at the last step
    std::vector<double> loss_history;  // one entry per step (batch mean)
};

// ---- hourglass landmark model ----------------------------------------

// One sample prepared for heatmap regression: the face crop normalised by
// its ground-truth five points, union-space target maps and channel mask.
struct MhmTrainItem {
    Tensor crop;  // [3,S,S]
    HeatmapStack gt;
    ViewMask mask;
    SimilarityTransform image_to_crop;
    View view = View::Frontal;
};

MhmTrainItem prepare_mhm_item(const Sample& sample, const UnionSchema& schema,
                              const HourglassConfig& cfg);

// Mini-batch SGD on the masked heatmap loss (both stacks supervised when
// the model has two). Samples with an empty channel mask are skipped.
TrainStats train_mhm(MhmModel& model, const std::vector<Sample>& samples,
                     const UnionSchema& schema, const TrainOptions& opt);

// Per-sample landmark error of the model on ground-truth-normalised crops:
// mean point-to-point distance over active points, divided by the
// inter-eye-centre distance of the ground truth.
std::vector<double> evaluate_mhm(MhmModel& model, const std::vector<Sample>& samples,
                                 const UnionSchema& schema);

// ---- detection cascade -----------------------------------------------

struct CascadeExample {
    Tensor crop;  // [3,s,s], s = stage input size
    Box window;   // source window in scene coordinates
    CascadeLabels labels;
};

// IoU-stratified windows from a scene: positives (IoU > 0.6 with jittered
// centre/size), part faces (0.4..0.65, box target only) and random
// negatives (IoU < 0.3 with every face).
std::vector<CascadeExample> sample_cascade_examples(const Scene& scene, int stage_size,
                                                    int n_pos, int n_part, int n_neg,
                                                    Rng& rng);

TrainStats train_cascade_stage(CascadeStageNet& net, const std::vector<CascadeExample>& data,
                               const TrainOptions& opt, double lambda1 = 0.5,
                               double lambda2 = 0.5);

// ---- shape-indexed patch classifier ----------------------------------

struct PatchExample {
    std::vector<Tensor> patches;
    int label = 1;  // 1 = landmarks on the face, 0 = scattered
};

// Positives: patches at the ground-truth landmarks of a normalised
// frontal crop. Negatives: patches at uniformly random positions in the
// same crop. crop_size is the failure-check frame (128).
std::vector<PatchExample> make_patch_examples(const std::vector<Sample>& samples,
                                              const UnionSchema& schema, int crop_size,
                                              int patch_size, std::uint64_t seed);

TrainStats train_patch_classifier(PatchClassifier& model,
                                  const std::vector<PatchExample>& data,
                                  const TrainOptions& opt);

}  // namespace mva
