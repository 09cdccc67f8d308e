#include "anonet/cli/run_config.hpp"

#include <fstream>
#include <set>

#include "anonet/cli/commands.hpp"
#include "anonet/core/errors.hpp"

namespace anonet::cli {

using nlohmann::json;

namespace {

// Pulls typed fields out of one JSON object and rejects whatever is left.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() == 0) finish();
  }
  Fields(const Fields&) = delete;
  Fields& operator=(const Fields&) = delete;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type (" + it->type_name() + ")");
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }
  [[nodiscard]] const std::string& where() const { return where_; }

 private:
  void finish() {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + where_ + "." + k + "'");
    }
  }
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

InitKind hidden_init_from_string(const std::string& s) {
  if (s == "he") return InitKind::he;
  if (s == "unit_normal") return InitKind::unit_normal;
  throw ConfigError("unknown hidden_init '" + s + "' (expected he or unit_normal)");
}

json synth_to_json(const SynthSpec& s) {
  return {{"count", s.count},
          {"height", s.height},
          {"width", s.width},
          {"octaves", s.octaves},
          {"base_period", s.base_period},
          {"persistence", s.persistence},
          {"blur_sigma", s.blur_sigma},
          {"background_mean", s.background_mean},
          {"background_std", s.background_std},
          {"axis_min", s.axis_min},
          {"axis_max", s.axis_max},
          {"delta_min", s.delta_min},
          {"delta_max", s.delta_max},
          {"core", s.core},
          {"weak_scale", s.weak_scale},
          {"defect_free_fraction", s.defect_free_fraction},
          {"seed", s.seed},
          {"name", s.name}};
}

void synth_from_json(const json& j, SynthSpec& s) {
  Fields f(j, "synth");
  f.get("count", s.count);
  f.get("height", s.height);
  f.get("width", s.width);
  f.get("octaves", s.octaves);
  f.get("base_period", s.base_period);
  f.get("persistence", s.persistence);
  f.get("blur_sigma", s.blur_sigma);
  f.get("background_mean", s.background_mean);
  f.get("background_std", s.background_std);
  f.get("axis_min", s.axis_min);
  f.get("axis_max", s.axis_max);
  f.get("delta_min", s.delta_min);
  f.get("delta_max", s.delta_max);
  f.get("core", s.core);
  f.get("weak_scale", s.weak_scale);
  f.get("defect_free_fraction", s.defect_free_fraction);
  f.get("seed", s.seed);
  f.get("name", s.name);
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["model"] = model;
  j["seed"] = seed;
  j["hidden_init"] = to_string(hidden_init);
  j["normalize_filters"] = normalize_filters;
  j["input_norm"] = to_string(input_norm);
  j["dataset"] = dataset ? json(dataset->string()) : json(nullptr);
  j["synth"] = synth_to_json(synth);
  j["validation_fraction"] = validation_fraction;
  j["split_seed"] = split_seed;
  j["allow_defect_free"] = allow_defect_free;
  j["dilate"] = dilate;
  const TrainConfig& t = train;
  j["train"] = {{"epochs", t.epochs},
                {"batch", t.batch},
                {"loss", to_string(t.loss)},
                {"rho", t.adadelta.rho},
                {"epsilon", t.adadelta.epsilon},
                {"learning_rate", t.adadelta.learning_rate},
                {"seed", t.seed},
                {"checkpoint_every", t.checkpoint_every},
                {"freeze_filters", t.freeze_filters ? json(*t.freeze_filters) : json(nullptr)},
                {"shuffle", t.shuffle},
                {"recalibrate_bn", t.recalibrate_bn},
                {"batch_mode", t.batch_mode == BatchMode::center_crop ? "center_crop" : "group_by_size"}};
  j["metrics"] = {{"threshold", t.threshold}, {"pooling", to_string(t.pooling)}};
  j["output_dir"] = output_dir.string();
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig rc;
  Fields f(j, "config");
  f.get("model", rc.model);
  f.get("seed", rc.seed);
  std::string s = to_string(rc.hidden_init);
  f.get("hidden_init", s);
  rc.hidden_init = hidden_init_from_string(s);
  f.get("normalize_filters", rc.normalize_filters);
  s = to_string(rc.input_norm);
  f.get("input_norm", s);
  rc.input_norm = input_norm_from_string(s);
  std::string ds;
  f.get("dataset", ds);
  if (!ds.empty()) rc.dataset = ds;
  if (const json* sj = f.sub("synth")) synth_from_json(*sj, rc.synth);
  f.get("validation_fraction", rc.validation_fraction);
  f.get("split_seed", rc.split_seed);
  f.get("allow_defect_free", rc.allow_defect_free);
  f.get("dilate", rc.dilate);
  if (const json* tj = f.sub("train")) {
    Fields t(*tj, "train");
    TrainConfig& c = rc.train;
    t.get("epochs", c.epochs);
    t.get("batch", c.batch);
    s = to_string(c.loss);
    t.get("loss", s);
    c.loss = loss_from_string(s);
    t.get("rho", c.adadelta.rho);
    t.get("epsilon", c.adadelta.epsilon);
    t.get("learning_rate", c.adadelta.learning_rate);
    t.get("seed", c.seed);
    t.get("checkpoint_every", c.checkpoint_every);
    std::optional<bool> freeze;
    if (const json* fz = t.sub("freeze_filters")) {
      if (!fz->is_boolean()) throw ConfigError("train.freeze_filters: expected true, false or null");
      freeze = fz->get<bool>();
    }
    c.freeze_filters = freeze;
    t.get("shuffle", c.shuffle);
    t.get("recalibrate_bn", c.recalibrate_bn);
    s = c.batch_mode == BatchMode::center_crop ? "center_crop" : "group_by_size";
    t.get("batch_mode", s);
    if (s == "center_crop") c.batch_mode = BatchMode::center_crop;
    else if (s == "group_by_size") c.batch_mode = BatchMode::group_by_size;
    else throw ConfigError("train.batch_mode: expected group_by_size or center_crop");
  }
  if (const json* mj = f.sub("metrics")) {
    Fields m(*mj, "metrics");
    m.get("threshold", rc.train.threshold);
    s = to_string(rc.train.pooling);
    m.get("pooling", s);
    rc.train.pooling = pooling_from_string(s);
  }
  std::string out;
  f.get("output_dir", out);
  rc.output_dir = out;
  return rc;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("config file '" + path.string() + "' not found");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::pair<Dataset, Dataset> load_split(const RunConfig& rc) {
  Dataset all;
  if (rc.dataset) {
    if (!std::filesystem::is_directory(*rc.dataset)) {
      throw MissingFile("dataset directory '" + rc.dataset->string() + "' not found");
    }
    LoadOptions opts;
    opts.allow_defect_free = rc.allow_defect_free;
    opts.dilate = rc.dilate;
    all = load_dataset(*rc.dataset, opts);
  } else {
    all = synth_generate(rc.synth).dataset;
  }
  if (all.empty()) throw ConfigError("dataset is empty");
  return split_dataset(all, rc.validation_fraction, rc.split_seed);
}

Model build_run_model(const RunConfig& rc) { return build_run_model(rc, rc.model); }

Model build_run_model(const RunConfig& rc, const std::string& name) {
  ModelConfig cfg = with_hidden_init(config_by_name(name), rc.hidden_init);
  cfg.input_norm = rc.input_norm;
  const LayerSpec& first = cfg.layers.front();
  if (first.init == InitKind::filterbank) {
    const FilterBank bank = build_bank(first.family, first.kernel, rc.normalize_filters);
    return Model(cfg, rc.seed, &bank);
  }
  return Model(cfg, rc.seed);
}

void write_snapshot(const RunConfig& rc) {
  std::filesystem::create_directories(rc.output_dir);
  std::ofstream out(rc.output_dir / "resolved_config.json");
  if (!out) throw FormatError("cannot write '" + (rc.output_dir / "resolved_config.json").string() + "'");
  out << rc.to_json().dump(2) << '\n';
}

}  // namespace anonet::cli
