// SPDX-License-Identifier: Apache-2.0

#include "beamtrack/nn/serialize.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

namespace beamtrack::nn {

nlohmann::json tensors_to_json(const std::vector<ParamRef>& params) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params) {
    const Matrix& m = *p.value;
    std::vector<Scalar> values;
    values.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
    }
    tensors.push_back({{"name", p.name},
                       {"shape", {m.rows(), m.cols()}},
                       {"values", values}});
  }
  return {{"format_version", kWeightFormatVersion}, {"tensors", tensors}};
}

void tensors_from_json(const nlohmann::json& doc, const std::vector<ParamRef>& params) {
  if (doc.at("format_version").get<int>() != kWeightFormatVersion) {
    throw std::runtime_error("tensors_from_json: unsupported format_version");
  }
  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& t : doc.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;

  for (const auto& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw std::runtime_error("tensors_from_json: missing tensor " + p.name);
    }
    const auto& t = *it->second;
    const auto shape = t.at("shape").get<std::vector<Index>>();
    if (shape.size() != 2 || shape[0] != p.value->rows() || shape[1] != p.value->cols()) {
      throw std::runtime_error("tensors_from_json: shape mismatch for " + p.name);
    }
    const auto values = t.at("values").get<std::vector<Scalar>>();
    if (static_cast<Index>(values.size()) != p.value->size()) {
      throw std::runtime_error("tensors_from_json: value count mismatch for " + p.name);
    }
    std::size_t k = 0;
    for (Index r = 0; r < p.value->rows(); ++r) {
      for (Index c = 0; c < p.value->cols(); ++c) (*p.value)(r, c) = values[k++];
    }
  }
}

void save_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_json_file: cannot open " + path);
  out << doc.dump();
  out << '\n';
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_json_file: cannot open " + path);
  nlohmann::json doc;
  in >> doc;
  return doc;
}

}  // namespace beamtrack::nn
