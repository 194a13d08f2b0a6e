#pragma once

#include <cstdint>
#include <map>

#include "pddllm/features.hpp"

namespace pddllm {

// Sparse cell addressing shared by sample_and_filter and the derivation
// pipeline. Addresses are linear with the first feature most significant.

std::vector<std::size_t> cell_strides(const std::vector<FeatureDef>& features);

std::uint64_t cell_count_total(const std::vector<FeatureDef>& features);

std::vector<int> address_to_indices(const std::vector<FeatureDef>& features,
                                    std::uint64_t address);

// feasible flag per touched cell address
std::map<std::uint64_t, bool> sample_cell_flags(const std::vector<FeatureDef>& features,
                                                const Scene& scene_template, std::size_t n,
                                                std::uint64_t seed);

}  // namespace pddllm
