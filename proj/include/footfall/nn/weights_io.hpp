#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "footfall/error.hpp"
#include "footfall/nn/convlstm.hpp"
#include "footfall/nn/tensor.hpp"

namespace footfall::nn {

// {"<name>": {"shape": [...], "data": [...]}, ...}
inline nlohmann::json weights_to_json(const ParamSet& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& e : params) j[e.name] = {{"shape", e.tensor.shape}, {"data", e.tensor.data}};
  return j;
}

// Fills every tensor of `params` from `j`; names and shapes must match.
inline void weights_from_json(const nlohmann::json& j, ParamSet& params) {
  if (!j.is_object()) throw FormatError("weights: expected a JSON object");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    if (!j.contains(name)) throw FormatError("weights: missing tensor '" + name + "'");
    const auto& t = j.at(name);
    if (!t.contains("shape") || !t.contains("data")) throw FormatError("weights: tensor '" + name + "' lacks shape/data");
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    if (shape != params[i].shape) throw FormatError("weights: shape mismatch for '" + name + "'");
    auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != params[i].size()) throw FormatError("weights: data length mismatch for '" + name + "'");
    params[i].data = std::move(data);
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline void save_weights(const ParamSet& params, const std::filesystem::path& path) {
  write_text_file(path, weights_to_json(params).dump() + "\n");
}

inline void load_weights(const std::filesystem::path& path, ParamSet& params) {
  weights_from_json(parse_json(read_text_file(path), "weights " + path.string()), params);
}

// Hidden size is recovered from the shape of lstm.l0.fwd.w_hh (4H x H).
inline ConvLstm convlstm_from_json(const nlohmann::json& j) {
  const std::string key = "lstm.l0.fwd.w_hh";
  if (!j.is_object() || !j.contains(key)) throw FormatError("weights: missing tensor '" + key + "'");
  const auto shape = j.at(key).at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2 || shape[0] != 4 * shape[1] || shape[1] == 0)
    throw FormatError("weights: '" + key + "' must have shape [4H, H]");
  ConvLstm model(shape[1]);
  weights_from_json(j, model.params());
  return model;
}

inline ConvLstm load_convlstm(const std::filesystem::path& path) {
  return convlstm_from_json(parse_json(read_text_file(path), "weights " + path.string()));
}

}  // namespace footfall::nn
