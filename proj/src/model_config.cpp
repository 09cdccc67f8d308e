#include "anonet/model_config.hpp"

#include "anonet/core/errors.hpp"

namespace anonet {

const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::he: return "he";
    case InitKind::unit_normal: return "unit_normal";
    case InitKind::filterbank: return "filterbank";
  }
  return "?";
}

const char* to_string(InputNorm n) { return n == InputNorm::center ? "center" : "none"; }

InputNorm input_norm_from_string(const std::string& s) {
  if (s == "center") return InputNorm::center;
  if (s == "none") return InputNorm::none;
  throw ConfigError("unknown input normalization '" + s + "' (expected center or none)");
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::table1: return "table1";
    case Provenance::table2: return "table2";
    case Provenance::baseline: return "baseline";
    case Provenance::custom: return "custom";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (layers.empty()) throw ConfigError("model '" + name + "' has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "model '" + name + "' layer " + std::to_string(i) + ": ";
    if (l.kernel % 2 == 0) throw ConfigError(where + "kernel size must be odd");
    if (l.stride < 1) throw ConfigError(where + "stride must be >= 1");
    if (l.out_channels < 1) throw ConfigError(where + "needs at least one output channel");
    if (l.activation == Activation::tanh && i + 1 != layers.size()) {
      throw ConfigError(where + "tanh is reserved for the segmentation layer");
    }
    if (l.init == InitKind::filterbank) {
      if (i != 0) throw ConfigError(where + "only the first layer can be seeded from a filter bank");
      if (l.out_channels != bank_size(l.family)) {
        throw ConfigError(where + "filter bank " + to_string(l.family) + " has " +
                          std::to_string(bank_size(l.family)) + " filters");
      }
    }
  }
  const auto& head = layers.back();
  if (head.out_channels != 1 || head.activation != Activation::tanh) {
    throw ConfigError("model '" + name + "' must end in a single-channel tanh segmentation layer");
  }
}

std::size_t ModelConfig::total_stride() const {
  std::size_t s = 1;
  for (const auto& l : layers) s *= l.stride;
  return s;
}

const std::vector<FilterConfigRow>& filter_config_rows() {
  static const std::vector<FilterConfigRow> rows = {
      {"LMExp1", FilterFamily::LM, 7, false},   {"LMExp2", FilterFamily::LM, 7, true},
      {"LMExp3", FilterFamily::LM, 11, false},  {"LMExp4", FilterFamily::LM, 11, true},
      {"RFSExp1", FilterFamily::RFS, 7, false}, {"RFSExp2", FilterFamily::RFS, 7, true},
      {"RFSExp3", FilterFamily::RFS, 11, false}, {"RFSExp4", FilterFamily::RFS, 11, true},
      {"SExp1", FilterFamily::S, 7, false},     {"SExp2", FilterFamily::S, 7, true},
      {"SExp3", FilterFamily::S, 11, false},    {"SExp4", FilterFamily::S, 11, true},
  };
  return rows;
}

const std::vector<AblationRow>& ablation_rows() {
  static const std::vector<AblationRow> rows = {
      {"Exp1", 2, 3, {11, 7, 3}, {32, 64, 128}}, {"Exp2", 2, 2, {11, 7, 3}, {32, 64, 128}},
      {"Exp3", 1, 1, {11, 7, 3}, {32, 64, 128}}, {"Exp4", 1, 1, {11, 7, 3}, {32, 32, 32}},
      {"Exp5", 1, 1, {11, 7, 3}, {8, 32, 32}},   {"Exp6", 1, 1, {3, 3, 3}, {32, 32, 32}},
      {"Exp7", 1, 1, {7, 7, 7}, {32, 32, 32}},   {"Exp8", 1, 1, {11, 11, 11}, {32, 32, 32}},
      {"Exp9", 1, 1, {3, 7, 11}, {32, 32, 32}},
  };
  return rows;
}

namespace {

LayerSpec hidden(std::size_t k, std::size_t depth, std::size_t stride = 1) {
  return {k, depth, stride, Activation::relu, true, true, InitKind::he, FilterFamily::S};
}

LayerSpec segmentation_head() {
  return {1, 1, 1, Activation::tanh, false, true, InitKind::he, FilterFamily::S};
}

ModelConfig from_ablation_row(const AblationRow& row, std::string name, Provenance provenance) {
  ModelConfig cfg{std::move(name), {}, provenance};
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t l = 0; l < row.layers_per_block; ++l) {
      // stride applies to the first layer of blocks 1 and 2
      const std::size_t stride = (l == 0 && b < 2) ? row.stride : 1;
      cfg.layers.push_back(hidden(row.kernels[b], row.depths[b], stride));
    }
  }
  cfg.layers.push_back(segmentation_head());
  cfg.validate();
  return cfg;
}

}  // namespace

ModelConfig anonet_config(const std::string& name) {
  for (const auto& row : filter_config_rows()) {
    if (name != row.name) continue;
    ModelConfig cfg{name, {}, Provenance::table1};
    LayerSpec filter = hidden(row.kernel, bank_size(row.family));
    filter.trainable = row.trainable;
    filter.init = InitKind::filterbank;
    filter.family = row.family;
    cfg.layers.push_back(filter);
    cfg.layers.push_back(hidden(7, 32));
    cfg.layers.push_back(hidden(3, 32));
    cfg.layers.push_back(segmentation_head());
    cfg.validate();
    return cfg;
  }
  throw ConfigError("unknown filter bank configuration '" + name + "'");
}

ModelConfig ablation_config(const std::string& name) {
  for (const auto& row : ablation_rows()) {
    if (name == row.name) return from_ablation_row(row, name, Provenance::table2);
  }
  throw ConfigError("unknown ablation configuration '" + name + "'");
}

ModelConfig baseline_config() {
  return from_ablation_row(ablation_rows().front(), "CompactCNN", Provenance::baseline);
}

ModelConfig config_by_name(const std::string& name) {
  if (name == "CompactCNN") return baseline_config();
  for (const auto& row : filter_config_rows()) {
    if (name == row.name) return anonet_config(name);
  }
  for (const auto& row : ablation_rows()) {
    if (name == row.name) return ablation_config(name);
  }
  throw ConfigError("unknown model configuration '" + name + "'");
}

std::vector<std::string> filter_config_names() {
  std::vector<std::string> out;
  for (const auto& row : filter_config_rows()) out.emplace_back(row.name);
  return out;
}

std::vector<std::string> ablation_names() {
  std::vector<std::string> out;
  for (const auto& row : ablation_rows()) out.emplace_back(row.name);
  return out;
}

ModelConfig with_hidden_init(ModelConfig cfg, InitKind init) {
  if (init == InitKind::filterbank) throw ConfigError("hidden layers cannot use filter bank init");
  for (auto& l : cfg.layers) {
    if (l.init != InitKind::filterbank) l.init = init;
  }
  return cfg;
}

}  // namespace anonet
