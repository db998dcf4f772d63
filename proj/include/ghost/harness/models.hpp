#pragma once

// Architecture menu and checkpoint files.
//
//   linear    d -> K
//   mlp_tanh  d -> 64 -> K, tanh
//   mlp_relu  d -> 64 -> K, relu
//   deep_mlp  d -> 64 -> 64 -> 64 -> K, relu
//   mlp_ln    d -> 64 -> K, standardization then relu
//   wide_mlp  d -> 256 -> K, relu
//
// "custom" builds from hidden = 64,64 and activation = gelu (one entry or one
// per hidden layer) and normalize = true/false.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghost/autonet.hpp"
#include "ghost/error.hpp"
#include "ghost/harness/config.hpp"

namespace ghost::harness {

inline const std::vector<std::string>& architecture_menu() {
  static const std::vector<std::string> menu{"linear", "mlp_tanh", "mlp_relu", "deep_mlp", "mlp_ln", "wide_mlp"};
  return menu;
}

inline NetworkSpec make_architecture(const std::string& id, std::size_t input_dim, std::size_t classes,
                                     std::uint64_t seed) {
  NetworkSpec s;
  s.seed = seed;
  auto hidden = [&](std::vector<std::size_t> widths, const char* act, bool norm = false) {
    s.layer_widths = {input_dim};
    for (auto w : widths) {
      s.layer_widths.push_back(w);
      s.activations.push_back(parse_activation(act));
      s.normalize.push_back(norm);
    }
    s.layer_widths.push_back(classes);
  };
  if (id == "linear")
    hidden({}, "identity");
  else if (id == "mlp_tanh")
    hidden({64}, "tanh");
  else if (id == "mlp_relu")
    hidden({64}, "relu");
  else if (id == "deep_mlp")
    hidden({64, 64, 64}, "relu");
  else if (id == "mlp_ln")
    hidden({64}, "relu", true);
  else if (id == "wide_mlp")
    hidden({256}, "relu");
  else
    throw Error("architecture: unknown id '" + id + "'");
  if (s.num_hidden() == 0) s.normalize.clear();
  s.validate();
  return s;
}

/// Architecture from config keys arch (menu id or "custom"), hidden, activation, normalize.
inline NetworkSpec architecture_from_config(const Config& c, std::size_t input_dim, std::size_t classes,
                                            std::uint64_t seed, const std::string& fallback = "deep_mlp") {
  const std::string id = c.str("arch", fallback);
  if (id != "custom") return make_architecture(id, input_dim, classes, seed);
  NetworkSpec s;
  s.seed = seed;
  s.layer_widths = {input_dim};
  const auto widths = c.reals("hidden", {64.0});
  const auto acts = c.list("activation", {"relu"});
  require(acts.size() == 1 || acts.size() == widths.size(), "architecture: one activation or one per hidden layer");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    require(widths[i] >= 1.0, "architecture: hidden widths must be positive");
    s.layer_widths.push_back(static_cast<std::size_t>(widths[i]));
    s.activations.push_back(parse_activation(acts.size() == 1 ? acts[0] : acts[i]));
  }
  s.layer_widths.push_back(classes);
  if (c.flag("normalize", false)) s.normalize.assign(widths.size(), true);
  s.validate();
  return s;
}

// --- checkpoints ----------------------------------------------------------------

inline nlohmann::json checkpoint_json(const NetworkSpec& spec, const Params& params) {
  nlohmann::json acts = nlohmann::json::array();
  for (const auto& a : spec.activations) acts.push_back(to_string(a));
  nlohmann::json norm = nlohmann::json::array();
  for (bool b : spec.normalize) norm.push_back(b);
  return {{"format", "ghost-checkpoint"}, {"version", 1},       {"layer_widths", spec.layer_widths},
          {"activations", acts},          {"normalize", norm},  {"seed", spec.seed},
          {"params", params}};
}

inline void save_checkpoint(const std::string& path, const NetworkSpec& spec, const Params& params) {
  std::ofstream f(path);
  if (!f) throw Error("checkpoint: cannot write '" + path + "'");
  f << checkpoint_json(spec, params).dump() << '\n';
}

struct Checkpoint {
  NetworkSpec spec;
  Params params;
};

inline Checkpoint parse_checkpoint(const nlohmann::json& j) {
  if (j.value("format", "") != "ghost-checkpoint" || j.value("version", 0) != 1)
    throw Error("checkpoint: unsupported format");
  Checkpoint c;
  c.spec.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
  for (const auto& a : j.at("activations")) c.spec.activations.push_back(parse_activation(a.get<std::string>()));
  c.spec.normalize = j.at("normalize").get<std::vector<bool>>();
  c.spec.seed = j.at("seed").get<std::uint64_t>();
  c.spec.validate();
  c.params = j.at("params").get<Params>();
  if (c.params.size() != param_count(c.spec)) throw Error("checkpoint: parameter count does not match the network layout");
  return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("checkpoint: cannot open '" + path + "'");
  try {
    return parse_checkpoint(nlohmann::json::parse(f));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: malformed file: ") + e.what());
  }
}

}  // namespace ghost::harness
