#pragma once

#include <string>
#include <vector>

#include "mva/geometry.hpp"
#include "mva/heatmap.hpp"
#include "mva/tensor.hpp"

namespace mva {

enum class View { Frontal, LeftProfile, RightProfile };

std::string view_name(View v);
View view_from_name(const std::string& name);
bool is_profile(View v);

enum class UnionKind { U68, U86 };

// Union landmark set: frontal slots plus, for U-86, dedicated slots for
// the profile landmarks whose definition differs from any frontal one.
struct UnionSchema {
    UnionKind kind = UnionKind::U68;
    int size = 68;
    std::vector<int> frontal_map;        // 68 indices into the union (identity)
    std::vector<int> profile_left_map;   // 39 indices into the union
    std::vector<int> profile_right_map;  // 39 indices into the union

    Schema union_schema() const { return size == 68 ? Schema::U68 : Schema::U86; }
    const std::vector<int>& profile_map(View v) const;
};

// Nearest-frontal-landmark assignment (ties to the lower frontal index).
// For U-86 the `dissimilated` profile indices (default: the outermost
// eyebrow pair and the 7 lowest contour points) bypass matching and take
// slots 68..76 (left profile) / 77..85 (right profile). Templates must be
// in a common normalised frame. Throws on a non-injective assignment.
UnionSchema build_union_schema(UnionKind kind, const LandmarkSet& frontal_template,
                               const LandmarkSet& profile_template,
                               const std::vector<int>& dissimilated = {});

// Default dissimilated profile indices for a given profile template.
std::vector<int> default_dissimilated(const LandmarkSet& profile_template);

struct UnionPlacement {
    LandmarkSet landmarks;  // union-sized
    ViewMask mask;
};

UnionPlacement to_union(const LandmarkSet& L, View view, const UnionSchema& schema);
LandmarkSet from_union(const LandmarkSet& U, const ViewMask& mask, View view,
                       const UnionSchema& schema);

// ---- built-in mean-shape templates -----------------------------------
// Parametric 68/39 mean shapes in the unit square; the shipped data files
// under data/ are generated from these and are the preferred source.
LandmarkSet canonical_frontal_template();
LandmarkSet canonical_profile_template();  // left-profile; mirror for right
// Frontal source index of each of the 39 profile landmarks.
const std::array<int, 39>& profile_source_indices();
LandmarkSet mirror_landmarks(const LandmarkSet& L, double axis_x = 0.5);

// Five-point subset (eye centres, nose tip, mouth corners) of a 68-point
// frontal shape; for profile shapes the hidden eye reuses the visible one.
LandmarkSet five_from_landmarks(const LandmarkSet& L, View view);

// ---- datasets --------------------------------------------------------

struct Sample {
    Tensor image;  // [3,H,W]
    LandmarkSet landmarks;
    View view = View::Frontal;
    Box box;
};

struct DatasetLoadResult {
    std::vector<Sample> samples;
    std::vector<std::string> errors;  // one message per malformed entry
};

// Manifest: one JSON object per line {image, landmarks, view, box:[x1,y1,x2,y2]}.
DatasetLoadResult load_dataset(const std::string& root, const std::string& manifest);
void save_dataset(const std::string& root, const std::string& manifest,
                  const std::vector<Sample>& samples, const std::string& prefix = "sample");

}  // namespace mva
