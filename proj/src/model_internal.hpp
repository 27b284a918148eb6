#pragma once

// Shared between model.cpp and model_io.cpp; not part of the public surface.

#include <cstdint>
#include <string>
#include <vector>

#include "model.hpp"

namespace pointode::model::detail {

// Empty parameter set with every tensor sized (and every fc dim set) from
// the config; build() and the weight loader fill in the values.
ModelParams allocate_params(const ModelConfig& config);

// Walks every tensor of a parameter set in serialization order. dims follow
// the convention weight=[out,in], everything else rank 1.
struct TensorRef {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double>* data;
};
std::vector<TensorRef> tensor_table(ModelParams& params);

// Per-stage split of the iteration budget: equal shares with the remainder
// folded into the first block. A zero share disables that block.
std::vector<int> iteration_shares(int total, std::size_t blocks);

}  // namespace pointode::model::detail
