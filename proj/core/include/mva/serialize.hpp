#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mva/tensor.hpp"

namespace mva {

// Named tensor collection, the on-disk currency for weights and heatmap
// dumps. Binary layout, little-endian:
//   magic "MVAW" | version u32 | count u32 |
//   per entry: name_len u32 | name bytes | rank u32 | dims u64... | f64 payload
struct WeightEntry {
    std::string name;
    Tensor tensor;
};

using WeightContainer = std::vector<WeightEntry>;

void save_weights(const std::string& path, const WeightContainer& weights);
WeightContainer load_weights(const std::string& path);

// JSON mirror for debugging; round-trips exactly (doubles serialised
// bit-exact via hex).
void save_weights_json(const std::string& path, const WeightContainer& weights);
WeightContainer load_weights_json(const std::string& path);

const Tensor* find_weight(const WeightContainer& w, const std::string& name);

}  // namespace mva
