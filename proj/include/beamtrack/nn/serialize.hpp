// SPDX-License-Identifier: Apache-2.0

#ifndef BEAMTRACK_NN_SERIALIZE_HPP
#define BEAMTRACK_NN_SERIALIZE_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "beamtrack/nn/layers.hpp"
#include "beamtrack/types.hpp"

namespace beamtrack::nn {

inline constexpr int kWeightFormatVersion = 1;

/// Named-tensor document: {"format_version": 1, "tensors": [{name, shape,
/// values}]} with values flattened row-major at full decimal precision.
nlohmann::json tensors_to_json(const std::vector<ParamRef>& params);

/// Loads tensors by name into the given parameter views; shapes must match
/// exactly and every parameter must be present.
void tensors_from_json(const nlohmann::json& doc, const std::vector<ParamRef>& params);

void save_json_file(const std::string& path, const nlohmann::json& doc);
nlohmann::json load_json_file(const std::string& path);

}  // namespace beamtrack::nn

#endif
