#include "anonet/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <exception>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "anonet/cli/run_config.hpp"
#include "anonet/core/errors.hpp"
#include "anonet/export.hpp"
#include "anonet/filterbank.hpp"
#include "anonet/image.hpp"
#include "anonet/introspect.hpp"
#include "anonet/serialize.hpp"

namespace anonet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw MissingFile(std::string(what) + " '" + p.string() + "' not found");
}

fs::path default_out(const std::string& command) {
  const char* root = std::getenv("ANONET_OUT_ROOT");
  return fs::path(root && *root ? root : "runs") / command;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + p.string() + "'");
  out << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

bool parse_bool(const std::string& s, const char* flag) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(std::string(flag) + ": expected true or false, got '" + s + "'");
}

std::string optional_number(const std::optional<double>& v) {
  if (!v) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

Tensor<float> image_tensor(const GrayImage& img) {
  return Tensor<float>({1, 1, img.height, img.width}, img.pixels);
}

/// Flags shared by every config-driven command.
struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> threshold;
  std::string loss;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::string freeze;
  std::string model;
  std::string dataset;

  void attach(CLI::App* app, bool training_flags) {
    app->add_option("--config", config, "Run configuration (JSON)");
    app->add_option("--seed", seed, "Seed for weight initialization and shuffling");
    app->add_option("--out", out, "Output directory");
    app->add_option("--threshold", threshold, "Score threshold for positive pixels");
    app->add_option("--model", model, "Configuration name (e.g. SExp1, Exp4, CompactCNN)");
    app->add_option("--dataset", dataset, "Dataset directory (images/, masks/)");
    if (training_flags) {
      app->add_option("--loss", loss, "mse or cross_entropy");
      app->add_option("--epochs", epochs, "Training epochs");
      app->add_option("--batch", batch, "Batch size");
      app->add_option("--freeze-filters", freeze, "Freeze (true) or train (false) the filter-bank layer")
          ->expected(0, 1)
          ->default_str("true");
    }
  }

  RunConfig resolve(const std::string& command, CLI::App* app) const {
    RunConfig rc = config.empty() ? RunConfig{} : RunConfig::load(config);
    if (seed) {
      rc.seed = *seed;
      rc.train.seed = *seed;
    }
    if (threshold) rc.train.threshold = *threshold;
    if (!model.empty()) rc.model = model;
    if (!dataset.empty()) rc.dataset = dataset;
    if (!loss.empty()) rc.train.loss = loss_from_string(loss);
    if (epochs) rc.train.epochs = *epochs;
    if (batch) rc.train.batch = *batch;
    if (app->get_option_no_throw("--freeze-filters") && app->count("--freeze-filters") > 0) {
      rc.train.freeze_filters = freeze.empty() ? true : parse_bool(freeze, "--freeze-filters");
    }
    if (!out.empty()) rc.output_dir = out;
    if (rc.output_dir.empty()) rc.output_dir = default_out(command);
    config_by_name(rc.model);  // unknown names fail before any work
    rc.train.validate();
    return rc;
  }
};

// ---------------------------------------------------------------- synth

int cmd_synth(const RunConfig& rc) {
  write_snapshot(rc);
  const auto result = synth_generate(rc.synth);
  write_synth(rc.output_dir, rc.synth, result);
  std::printf("wrote %zu samples to %s\n", result.dataset.size(), rc.output_dir.string().c_str());
  return ok;
}

// ----------------------------------------------------------- filterbank

int cmd_filterbank(const std::string& family, std::size_t k, bool raw, const fs::path& out) {
  const FilterBank bank = build_bank(family_from_string(family), k, !raw);
  fs::create_directories(out);
  write_json(out / "resolved_config.json", {{"family", to_string(bank.family)}, {"k", k}, {"normalize", !raw}});
  const std::string stem = std::string(to_string(bank.family)) + "_" + std::to_string(k);
  write_tensor_file(out / (stem + ".ant"), bank.to_weights<float>(), stem);
  write_image(out / (stem + ".png"), filter_contact_sheet(bank));
  std::string meta = "index,kind,sigma,elongation,orientation,tau\n";
  char buf[160];
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& f = bank.info[i];
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%.17g\n", i, to_string(f.kind), f.sigma,
                  f.elongation, f.orientation, f.tau);
    meta += buf;
  }
  write_text(out / (stem + ".csv"), meta);
  std::printf("%s: %zu filters of %zux%zu -> %s\n", stem.c_str(), bank.size(), k, k, out.string().c_str());
  return ok;
}

// ---------------------------------------------------------------- train

struct RunOutcome {
  std::string name;
  Provenance provenance = Provenance::custom;
  std::size_t parameters = 0;
  TrainHistory history;
  MetricsReport final_report;
};

RunOutcome train_one(const RunConfig& rc, const std::string& name, const Dataset& tr, const Dataset& va,
                     const fs::path& out, bool verbose) {
  Model model = build_run_model(rc, name);
  TrainConfig tc = rc.train;
  if (tc.checkpoint_every > 0) tc.checkpoint_dir = out / "checkpoints";
  RunOutcome o;
  o.name = name;
  o.provenance = model.config().provenance;
  o.parameters = model.count_parameters();
  std::string metrics_csv = MetricsReport::csv_header() + "\n";
  try {
    o.history = train(model, tr, va, tc, [&](const EpochRecord& e) {
      metrics_csv += e.validation->csv_row() + "\n";
      if (verbose) {
        std::printf("[%s] epoch %zu  loss %.6f  f1 %.4f  auroc %s\n", name.c_str(), e.epoch, e.loss,
                    e.validation->f1, e.validation->auroc ? std::to_string(*e.validation->auroc).c_str() : "n/a");
        std::fflush(stdout);
      }
    });
  } catch (const NumericError&) {
    save_weights(model, out / "last_good.anw");
    throw;
  }
  o.final_report = o.history.epochs.back().validation.value();
  fs::create_directories(out);
  save_weights(model, out / "weights.anw");
  write_text(out / "history.csv", o.history.to_csv());
  write_text(out / "metrics.csv", metrics_csv);
  write_text(out / "report.json", o.final_report.to_json() + "\n");
  return o;
}

int cmd_train(const RunConfig& rc) {
  write_snapshot(rc);
  const auto [tr, va] = load_split(rc);
  if (va.empty()) throw ConfigError("validation split is empty; raise validation_fraction");
  const auto o = train_one(rc, rc.model, tr, va, rc.output_dir, true);
  std::printf("final: f1 %.6f auroc %s params %zu -> %s\n", o.final_report.f1,
              o.final_report.auroc ? std::to_string(*o.final_report.auroc).c_str() : "n/a", o.parameters,
              rc.output_dir.string().c_str());
  return ok;
}

// ----------------------------------------------------------------- eval

int cmd_eval(const RunConfig& rc, const fs::path& weights, const std::string& split, bool scores,
             const std::string& pooling) {
  require_file(weights, "weights file");
  const Model model = load_weights(weights);
  Dataset ds;
  if (split == "all") {
    if (rc.dataset) {
      if (!fs::is_directory(*rc.dataset)) throw MissingFile("dataset directory '" + rc.dataset->string() + "' not found");
      ds = load_dataset(*rc.dataset, {rc.allow_defect_free, rc.dilate});
    } else {
      ds = synth_generate(rc.synth).dataset;
    }
  } else if (split == "validation" || split == "train") {
    auto [tr, va] = load_split(rc);
    ds = split == "train" ? std::move(tr) : std::move(va);
  } else {
    throw ConfigError("--split: expected validation, train or all");
  }
  RunConfig snap = rc;
  write_snapshot(snap);
  const Pooling pool = pooling.empty() ? rc.train.pooling : pooling_from_string(pooling);
  MetricsReport rep = validate(model, ds, rc.train.threshold, pool);
  rep.epoch = 0;
  write_text(rc.output_dir / "report.json", rep.to_json() + "\n");
  write_text(rc.output_dir / "report.csv", MetricsReport::csv_header() + "\n" + rep.csv_row() + "\n");
  if (scores) {
    for (const auto& s : ds.samples) {
      const auto y = model.forward(image_tensor(s.image));
      write_tensor_file(rc.output_dir / "scores" / (s.id + ".ant"), y, s.id);
    }
  }
  std::printf("%s (%s, %zu images): f1 %.6f auroc %s\n", rep.dataset.c_str(), split.c_str(), ds.size(), rep.f1,
              rep.auroc ? std::to_string(*rep.auroc).c_str() : "n/a");
  return ok;
}

// ---------------------------------------------------------------- infer

int cmd_infer(const fs::path& weights, const fs::path& image, const fs::path& out, double threshold, bool scores) {
  require_file(weights, "weights file");
  require_file(image, "image");
  const Model model = load_weights(weights);
  const GrayImage img = read_image(image);
  const auto y = model.forward(image_tensor(img));
  fs::create_directories(out);
  const std::string stem = image.stem().string();
  // Strided models score a coarser grid; the mask keeps that grid.
  write_score_mask(out / (stem + "_mask.png"), y, threshold);
  if (scores) write_tensor_file(out / (stem + "_scores.ant"), y, stem);
  write_json(out / "resolved_config.json",
             {{"weights", weights.string()}, {"image", image.string()}, {"threshold", threshold}, {"scores", scores}});
  std::printf("%s: %zux%zu -> %zux%zu mask in %s\n", image.string().c_str(), img.height, img.width, y.shape().h,
              y.shape().w, out.string().c_str());
  return ok;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const RunConfig& rc, const std::string& table, std::size_t jobs) {
  std::vector<std::string> names;
  std::vector<RunConfig> configs;
  if (table == "table1") {
    names = filter_config_names();
    names.push_back("CompactCNN");
  } else if (table == "table2") {
    names = ablation_names();
  } else if (table != "loss") {
    throw ConfigError("sweep: expected table1, table2 or loss, got '" + table + "'");
  }
  if (table == "loss") {
    for (LossKind k : {LossKind::mse, LossKind::cross_entropy}) {
      RunConfig c = rc;
      c.train.loss = k;
      configs.push_back(c);
      names.push_back(rc.model);
    }
  } else {
    configs.assign(names.size(), rc);
  }
  write_snapshot(rc);
  const auto [tr, va] = load_split(rc);
  if (va.empty()) throw ConfigError("validation split is empty; raise validation_fraction");

  std::vector<std::optional<RunOutcome>> results(names.size());
  std::vector<std::exception_ptr> errors(names.size());
  auto run = [&](std::size_t i) {
    const std::string dir = table == "loss" ? std::string(to_string(configs[i].train.loss)) : names[i];
    try {
      results[i] = train_one(configs[i], names[i], tr, va, rc.output_dir / dir, jobs <= 1);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (jobs <= 1) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      run(i);
      if (errors[i]) break;
    }
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    for (std::size_t w = 0; w < std::min(jobs, names.size()); ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next >= names.size()) return;
            i = next++;
          }
          run(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }

  char buf[512];
  std::string csv;
  if (table == "loss") {
    csv = "loss,model,f1,auroc,avg_f1_auroc,epoch1_f1,final_loss,parameters\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto& o = *results[i];
      const auto& r = o.final_report;
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%s,%.17g,%.17g,%.17g,%zu\n", to_string(configs[i].train.loss),
                    o.name.c_str(), r.f1, optional_number(r.auroc).c_str(), r.avg_f1_auroc(),
                    o.history.epochs.front().validation->f1, o.history.final_loss, o.parameters);
      csv += buf;
    }
  } else {
    std::vector<std::size_t> order(names.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return results[a]->final_report.avg_f1_auroc() > results[b]->final_report.avg_f1_auroc();
    });
    csv = "rank,name,provenance,parameters,f1,auroc,avg_f1_auroc,epoch1_f1,final_loss\n";
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto& o = *results[order[r]];
      const auto& m = o.final_report;
      std::snprintf(buf, sizeof buf, "%zu,%s,%s,%zu,%.17g,%s,%.17g,%.17g,%.17g\n", r + 1, o.name.c_str(),
                    to_string(o.provenance), o.parameters, m.f1, optional_number(m.auroc).c_str(),
                    m.avg_f1_auroc(), o.history.epochs.front().validation->f1, o.history.final_loss);
      csv += buf;
    }
  }
  const fs::path path = rc.output_dir / (table == "loss" ? "loss_comparison.csv" : "sweep.csv");
  write_text(path, csv);
  std::printf("%zu runs -> %s\n", names.size(), path.string().c_str());
  return ok;
}

// ------------------------------------------------------------ visualize

struct VisFlags {
  std::string weights;
  std::string image;
  std::string out;
  bool actmax = false;
  std::size_t layer = 0;
  std::optional<std::size_t> filter;
  std::size_t steps = 500;
  double step_size = 1.0;
  std::uint64_t seed = 0;
  bool standardize = false;
  std::size_t size = 64;
};

int cmd_visualize(const VisFlags& v) {
  require_file(v.weights, "weights file");
  const Model model = load_weights(v.weights);
  const fs::path out = v.out.empty() ? default_out("visualize") : fs::path(v.out);
  fs::create_directories(out);
  json snap = {{"weights", v.weights}, {"image", v.image}, {"actmax", v.actmax}, {"layer", v.layer},
               {"filter", v.filter ? json(*v.filter) : json(nullptr)}, {"steps", v.steps},
               {"step_size", v.step_size}, {"seed", v.seed}, {"standardize", v.standardize}, {"size", v.size}};
  write_json(out / "resolved_config.json", snap);
  if (!v.image.empty()) {
    require_file(v.image, "image");
    const auto acts = intermediate_activations(model, image_tensor(read_image(v.image)));
    for (std::size_t l = 0; l < acts.size(); ++l) {
      char name[32];
      std::snprintf(name, sizeof name, "layer_%02zu.png", l);
      write_image(out / name, tile_grid(acts[l], 8));
    }
    std::printf("wrote %zu activation grids to %s\n", acts.size(), out.string().c_str());
  }
  if (v.actmax) {
    if (v.layer >= model.layers().size()) throw ConfigError("--layer " + std::to_string(v.layer) + " out of range");
    std::vector<std::size_t> filters;
    if (v.filter) {
      filters.push_back(*v.filter);
    } else {
      for (std::size_t f = 0; f < model.layers()[v.layer].spec.out_channels; ++f) filters.push_back(f);
    }
    Tensor<float> stims({1, filters.size(), v.size, v.size});
    std::string summary = "filter,converged,retries,initial,final,monotone_fraction,note\n";
    for (std::size_t i = 0; i < filters.size(); ++i) {
      ActMaxConfig c;
      c.layer = v.layer;
      c.filter = filters[i];
      c.steps = v.steps;
      c.step_size = v.step_size;
      c.seed = v.seed;
      c.standardize = v.standardize;
      c.height = c.width = v.size;
      const auto r = activation_maximization(model, c);
      char stem[48];
      std::snprintf(stem, sizeof stem, "actmax_l%02zu_f%03zu", v.layer, filters[i]);
      write_text(out / (std::string(stem) + "_trace.csv"), r.trace_csv());
      for (const auto& [step, x] : r.snapshots) {
        write_image(out / (std::string(stem) + "_step" + std::to_string(step) + ".png"), tile_grid(x, 1));
      }
      std::copy(r.image.values().begin(), r.image.values().end(), stims.plane(0, i));
      char buf[256];
      std::snprintf(buf, sizeof buf, "%zu,%d,%zu,%.17g,%.17g,%.6f,%s\n", filters[i], r.converged ? 1 : 0, r.retries,
                    r.trace.front(), r.trace.back(), r.monotone_fraction(), r.note.c_str());
      summary += buf;
    }
    char grid[48];
    std::snprintf(grid, sizeof grid, "actmax_l%02zu.png", v.layer);
    write_image(out / grid, tile_grid(stims, 8));
    write_text(out / "actmax_summary.csv", summary);
    std::printf("activation maximization for %zu filters of layer %zu -> %s\n", filters.size(), v.layer,
                out.string().c_str());
  }
  if (v.image.empty() && !v.actmax) throw ConfigError("visualize needs --image and/or --actmax");
  return ok;
}

int fail(int code, const char* cls, const std::string& msg) {
  std::string one_line = msg;
  std::replace(one_line.begin(), one_line.end(), '\n', ' ');
  std::fprintf(stderr, "anonet: %s: %s\n", cls, one_line.c_str());
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Filter-bank seeded fully convolutional anomaly segmentation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  RunFlags synth_f, train_f, eval_f, sweep_f;
  std::optional<std::size_t> count, height, width;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic textured-defect dataset");
  synth->add_option("--config", synth_f.config, "Run configuration (JSON); its synth section is used");
  synth->add_option("--seed", synth_f.seed, "Dataset seed");
  synth->add_option("--out", synth_f.out, "Output directory");
  synth->add_option("--count", count, "Number of images");
  synth->add_option("--height", height, "Image height");
  synth->add_option("--width", width, "Image width");

  std::string family = "S";
  std::size_t k = 7;
  bool raw = false;
  std::string fb_out;
  auto* fb = app.add_subcommand("filterbank", "Build a filter bank and export it");
  fb->add_option("--family", family, "LM, S or RFS");
  fb->add_option("--k", k, "Odd kernel size");
  fb->add_flag("--raw", raw, "Skip normalization");
  fb->add_option("--out", fb_out, "Output directory");

  auto* tr = app.add_subcommand("train", "Train a model");
  train_f.attach(tr, true);

  std::string weights, split = "validation", pooling;
  bool scores = false;
  auto* ev = app.add_subcommand("eval", "Evaluate saved weights");
  eval_f.attach(ev, false);
  ev->add_option("--weights", weights, "Weight file")->required();
  ev->add_option("--split", split, "validation, train or all");
  ev->add_option("--pooling", pooling, "pooled or per_image");
  ev->add_flag("--scores", scores, "Also write raw score tensors");

  std::string inf_weights, inf_image, inf_out;
  double inf_threshold = 0.0;
  bool inf_scores = false;
  auto* inf = app.add_subcommand("infer", "Segment one image");
  inf->add_option("--weights", inf_weights, "Weight file")->required();
  inf->add_option("--image", inf_image, "Input image (PNG or PGM)")->required();
  inf->add_option("--out", inf_out, "Output directory");
  inf->add_option("--threshold", inf_threshold, "Score threshold");
  inf->add_flag("--scores", inf_scores, "Also write the raw score tensor");

  std::string table;
  std::size_t jobs = 1;
  auto* sw = app.add_subcommand("sweep", "Train and rank a family of configurations");
  sw->add_option("table", table, "table1, table2 or loss")->required();
  sweep_f.attach(sw, true);
  sw->add_option("--jobs", jobs, "Concurrent runs");

  VisFlags vis;
  auto* vz = app.add_subcommand("visualize", "Activation grids and activation maximization");
  vz->add_option("--weights", vis.weights, "Weight file")->required();
  vz->add_option("--image", vis.image, "Image for intermediate activations");
  vz->add_option("--out", vis.out, "Output directory");
  vz->add_flag("--actmax", vis.actmax, "Run activation maximization");
  vz->add_option("--layer", vis.layer, "Layer index");
  vz->add_option("--filter", vis.filter, "Filter index (all filters when omitted)");
  vz->add_option("--steps", vis.steps, "Ascent steps");
  vz->add_option("--step-size", vis.step_size, "Step size on the normalized gradient");
  vz->add_option("--seed", vis.seed, "Noise seed");
  vz->add_flag("--standardize", vis.standardize, "Renormalize the input after every step");
  vz->add_option("--size", vis.size, "Stimulus height and width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(bad_config, "bad arguments", e.what());
  }

  try {
    if (synth->parsed()) {
      RunConfig rc = synth_f.config.empty() ? RunConfig{} : RunConfig::load(synth_f.config);
      if (synth_f.seed) rc.synth.seed = *synth_f.seed;
      if (count) rc.synth.count = *count;
      if (height) rc.synth.height = *height;
      if (width) rc.synth.width = *width;
      rc.output_dir = !synth_f.out.empty() ? fs::path(synth_f.out)
                      : !rc.output_dir.empty() ? rc.output_dir : default_out("synth");
      rc.synth.validate();
      return cmd_synth(rc);
    }
    if (fb->parsed()) return cmd_filterbank(family, k, raw, fb_out.empty() ? default_out("filterbank") : fs::path(fb_out));
    if (tr->parsed()) return cmd_train(train_f.resolve("train", tr));
    if (ev->parsed()) return cmd_eval(eval_f.resolve("eval", ev), weights, split, scores, pooling);
    if (inf->parsed()) {
      return cmd_infer(inf_weights, inf_image, inf_out.empty() ? default_out("infer") : fs::path(inf_out),
                       inf_threshold, inf_scores);
    }
    if (sw->parsed()) return cmd_sweep(sweep_f.resolve("sweep", sw), table, jobs);
    if (vz->parsed()) return cmd_visualize(vis);
  } catch (const MissingFile& e) {
    return fail(missing_file, "missing file", e.what());
  } catch (const ShapeError& e) {
    return fail(shape_mismatch, "shape mismatch", e.what());
  } catch (const ConfigError& e) {
    return fail(bad_config, "bad config", e.what());
  } catch (const NumericError& e) {
    return fail(numeric_abort, "numeric abort", e.what());
  } catch (const FormatError& e) {
    return fail(bad_file, "bad file", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(bad_file, "filesystem", e.what());
  } catch (const std::exception& e) {
    return fail(internal, "internal error", e.what());
  }
  return bad_config;
}

}  // namespace anonet::cli
