#include "mva/schema.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mva/image.hpp"

namespace mva {

std::string view_name(View v) {
    switch (v) {
        case View::Frontal: return "frontal";
        case View::LeftProfile: return "left_profile";
        case View::RightProfile: return "right_profile";
    }
    return "?";
}

View view_from_name(const std::string& name) {
    if (name == "frontal") return View::Frontal;
    if (name == "left_profile") return View::LeftProfile;
    if (name == "right_profile") return View::RightProfile;
    throw std::runtime_error("unknown view tag: " + name);
}

bool is_profile(View v) { return v != View::Frontal; }

const std::vector<int>& UnionSchema::profile_map(View v) const {
    if (v == View::LeftProfile) return profile_left_map;
    if (v == View::RightProfile) return profile_right_map;
    throw std::runtime_error("profile_map requested for frontal view");
}

// Frontal landmark source indices for the shipped left-profile template:
// visible jaw, left eyebrow, nose bridge plus base, left eye, outer mouth.
const std::array<int, 39>& profile_source_indices() {
    static const std::array<int, 39> idx = {
        0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12,   // contour
        17, 18, 19, 20, 21,                          // eyebrow
        27, 28, 29, 30, 31, 32, 33,                  // nose
        36, 37, 38, 39, 40,                          // eye
        48, 49, 50, 51, 52, 53, 54, 55, 56};         // mouth
    return idx;
}

LandmarkSet canonical_profile_template() {
    const LandmarkSet frontal = canonical_frontal_template();
    LandmarkSet L = LandmarkSet::make(Schema::P39);
    for (int i = 0; i < 39; ++i) {
        const Point& src = frontal.points[profile_source_indices()[i]];
        // small deterministic annotation offset so nearest matching is a
        // real computation rather than an identity lookup
        L.points[i] = {src.x + 0.004 * std::sin(7.0 * i + 1.0),
                       src.y + 0.004 * std::cos(5.0 * i + 2.0)};
    }
    return L;
}

LandmarkSet mirror_landmarks(const LandmarkSet& L, double axis_x) {
    LandmarkSet out = L;
    for (auto& p : out.points) p.x = 2.0 * axis_x - p.x;
    return out;
}

std::vector<int> default_dissimilated(const LandmarkSet& profile_template) {
    // outermost eyebrow pair
    std::vector<int> out = {13, 17};
    // the 7 lowest contour points
    std::vector<int> contour(13);
    for (int i = 0; i < 13; ++i) contour[i] = i;
    std::sort(contour.begin(), contour.end(), [&](int a, int b) {
        return profile_template.points[a].y > profile_template.points[b].y;
    });
    out.insert(out.end(), contour.begin(), contour.begin() + 7);
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::vector<int> nearest_assignment(const LandmarkSet& profile, const LandmarkSet& frontal,
                                    const std::vector<bool>& dissim, int dissim_base) {
    std::vector<int> map(profile.size(), -1);
    int dslot = dissim_base;
    for (int i = 0; i < profile.size(); ++i) {
        if (dissim[i]) {
            map[i] = dslot++;
            continue;
        }
        int best = 0;
        double best_d = 1e300;
        for (int j = 0; j < frontal.size(); ++j) {
            const double dx = profile.points[i].x - frontal.points[j].x;
            const double dy = profile.points[i].y - frontal.points[j].y;
            const double d = dx * dx + dy * dy;
            if (d < best_d) {  // strict: ties resolve to the lower frontal index
                best_d = d;
                best = j;
            }
        }
        map[i] = best;
    }
    std::vector<int> sorted = map;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::runtime_error(
            "build_union_schema: non-injective profile assignment; adjust templates");
    return map;
}

}  // namespace

UnionSchema build_union_schema(UnionKind kind, const LandmarkSet& frontal_template,
                               const LandmarkSet& profile_template,
                               const std::vector<int>& dissimilated) {
    frontal_template.validate();
    profile_template.validate();
    if (frontal_template.schema != Schema::P68 || profile_template.schema != Schema::P39)
        throw DimensionError("build_union_schema: expected P68 frontal and P39 profile");

    UnionSchema s;
    s.kind = kind;
    s.size = kind == UnionKind::U68 ? 68 : 86;
    s.frontal_map.resize(68);
    for (int i = 0; i < 68; ++i) s.frontal_map[i] = i;

    std::vector<bool> dissim(39, false);
    if (kind == UnionKind::U86) {
        std::vector<int> d = dissimilated.empty()
                                 ? default_dissimilated(profile_template)
                                 : dissimilated;
        if (d.size() != 9)
            throw std::runtime_error("build_union_schema: expected 9 dissimilated indices");
        for (int i : d) {
            if (i < 0 || i >= 39)
                throw std::runtime_error("build_union_schema: dissimilated index out of range");
            dissim[i] = true;
        }
    }

    s.profile_left_map = nearest_assignment(profile_template, frontal_template, dissim, 68);
    const LandmarkSet right = mirror_landmarks(profile_template);
    s.profile_right_map = nearest_assignment(right, frontal_template, dissim, 77);
    return s;
}

UnionPlacement to_union(const LandmarkSet& L, View view, const UnionSchema& schema) {
    L.validate();
    UnionPlacement out;
    out.landmarks = LandmarkSet::make(schema.union_schema());
    out.landmarks.mask.assign(schema.size, false);
    out.mask = ViewMask::none(schema.size);
    if (view == View::Frontal) {
        if (L.schema != Schema::P68)
            throw DimensionError("to_union: frontal view needs a P68 landmark set");
        for (int i = 0; i < 68; ++i) {
            const int slot = schema.frontal_map[i];
            out.landmarks.points[slot] = L.points[i];
            out.landmarks.mask[slot] = L.mask[i];
            out.mask.v[slot] = true;
        }
    } else {
        if (L.schema != Schema::P39)
            throw DimensionError("to_union: profile view needs a P39 landmark set");
        const auto& map = schema.profile_map(view);
        for (int i = 0; i < 39; ++i) {
            const int slot = map[i];
            out.landmarks.points[slot] = L.points[i];
            out.landmarks.mask[slot] = L.mask[i];
            out.mask.v[slot] = true;
        }
    }
    return out;
}

LandmarkSet from_union(const LandmarkSet& U, const ViewMask& mask, View view,
                       const UnionSchema& schema) {
    if (U.size() != schema.size || static_cast<int>(mask.v.size()) != schema.size)
        throw DimensionError("from_union: union size mismatch");
    LandmarkSet out;
    if (view == View::Frontal) {
        out = LandmarkSet::make(Schema::P68);
        for (int i = 0; i < 68; ++i) {
            const int slot = schema.frontal_map[i];
            if (!mask.v[slot])
                throw DimensionError("from_union: mask inconsistent with frontal view");
            out.points[i] = U.points[slot];
            out.mask[i] = U.mask[slot];
        }
    } else {
        out = LandmarkSet::make(Schema::P39);
        const auto& map = schema.profile_map(view);
        for (int i = 0; i < 39; ++i) {
            const int slot = map[i];
            if (!mask.v[slot])
                throw DimensionError("from_union: mask inconsistent with profile view");
            out.points[i] = U.points[slot];
            out.mask[i] = U.mask[slot];
        }
    }
    return out;
}

LandmarkSet five_from_landmarks(const LandmarkSet& L, View view) {
    LandmarkSet five = LandmarkSet::make(Schema::P5);
    auto mean_of = [&](int start, int count) {
        Point m{0, 0};
        for (int i = 0; i < count; ++i) {
            m.x += L.points[start + i].x;
            m.y += L.points[start + i].y;
        }
        m.x /= count;
        m.y /= count;
        return m;
    };
    if (view == View::Frontal) {
        five.points[0] = mean_of(36, 6);
        five.points[1] = mean_of(42, 6);
        five.points[2] = L.points[30];  // nose tip
        five.points[3] = L.points[48];
        five.points[4] = L.points[54];
    } else {
        // one eye visible; both eye slots carry it
        Point eye = mean_of(25, 5);
        five.points[0] = eye;
        five.points[1] = eye;
        five.points[2] = L.points[21];  // nose tip (local index of frontal 30)
        five.points[3] = L.points[30];
        five.points[4] = L.points[36];
    }
    return five;
}

DatasetLoadResult load_dataset(const std::string& root, const std::string& manifest) {
    const std::string manifest_path = root + "/" + manifest;
    std::ifstream is(manifest_path);
    if (!is) throw std::runtime_error("cannot open manifest: " + manifest_path);
    DatasetLoadResult res;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = manifest_path + ":" + std::to_string(lineno);
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            Sample s;
            s.view = view_from_name(j.at("view").get<std::string>());
            const std::string img_path = root + "/" + j.at("image").get<std::string>();
            const std::string lmk_path = root + "/" + j.at("landmarks").get<std::string>();
            s.image = load_image(img_path);
            s.landmarks = lmk_path.size() > 5 && lmk_path.ends_with(".json")
                              ? load_landmarks_json(lmk_path)
                              : load_landmarks_text(lmk_path);
            const auto& b = j.at("box");
            s.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                     b[3].get<double>(), 1.0};
            const int expected = s.view == View::Frontal ? 68 : 39;
            if (s.landmarks.size() != expected)
                throw std::runtime_error("view " + view_name(s.view) + " expects " +
                                         std::to_string(expected) + " landmarks, got " +
                                         std::to_string(s.landmarks.size()));
            int inside = 0, active = 0;
            for (int i = 0; i < s.landmarks.size(); ++i) {
                if (!s.landmarks.mask[i]) continue;
                ++active;
                const Point& p = s.landmarks.points[i];
                if (p.x >= s.box.x1 && p.x <= s.box.x2 && p.y >= s.box.y1 &&
                    p.y <= s.box.y2)
                    ++inside;
            }
            if (active > 0 && inside < 0.9 * active)
                throw std::runtime_error("box contains fewer than 90% of landmarks");
            res.samples.push_back(std::move(s));
        } catch (const std::exception& e) {
            res.errors.push_back(where + ": " + e.what());
        }
    }
    return res;
}

void save_dataset(const std::string& root, const std::string& manifest,
                  const std::vector<Sample>& samples, const std::string& prefix) {
    const std::string manifest_path = root + "/" + manifest;
    std::ofstream os(manifest_path);
    if (!os) throw std::runtime_error("cannot open for writing: " + manifest_path);
    os.precision(17);
    char name[64];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(name, sizeof(name), "%s_%04zu", prefix.c_str(), i);
        const std::string img_rel = std::string(name) + ".ppm";
        const std::string lmk_rel = std::string(name) + ".txt";
        save_image(root + "/" + img_rel, samples[i].image);
        save_landmarks_text(root + "/" + lmk_rel, samples[i].landmarks);
        nlohmann::json j;
        j["image"] = img_rel;
        j["landmarks"] = lmk_rel;
        j["view"] = view_name(samples[i].view);
        j["box"] = {samples[i].box.x1, samples[i].box.y1, samples[i].box.x2,
                    samples[i].box.y2};
        os << j.dump() << "\n";
    }
}

}  // namespace mva
