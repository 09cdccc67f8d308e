#include "anonet/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "anonet/core/errors.hpp"

namespace anonet {

namespace {

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ShapeError("scores and truth differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

// Exact rank-sum AUROC over items sorted by score. The numerator is kept in
// half-units so every partial sum is an exact integer.
std::optional<double> auroc_sorted(const std::vector<std::pair<float, std::uint8_t>>& items,
                                   std::uint64_t pos, std::uint64_t neg) {
  if (pos == 0 || neg == 0) return std::nullopt;
  unsigned __int128 twice_wins = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, n = 0;
    while (j < items.size() && items[j].first == items[i].first) {
      (items[j].second ? p : n)++;
      ++j;
    }
    twice_wins += static_cast<unsigned __int128>(p) * (2 * neg_below + n);
    neg_below += n;
    i = j;
  }
  const long double num = static_cast<long double>(twice_wins);
  const long double den = 2.0L * static_cast<long double>(pos) * static_cast<long double>(neg);
  return static_cast<double>(num / den);
}

}  // namespace

ConfusionCounts confusion(std::span<const float> scores, std::span<const std::uint8_t> truth,
                          double threshold) {
  check_sizes(scores.size(), truth.size());
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    const bool t = truth[i] != 0;
    if (pred && t) ++c.tp;
    else if (pred) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

F1Result f1_from_counts(const ConfusionCounts& c) {
  F1Result r;
  r.counts = c;
  r.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  if (r.precision + r.recall == 0.0) {
    r.degenerate = true;
    r.f1 = 0.0;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

F1Result f1_score(std::span<const float> scores, std::span<const std::uint8_t> truth,
                  double threshold) {
  return f1_from_counts(confusion(scores, truth, threshold));
}

std::optional<double> auroc(std::span<const float> scores, std::span<const std::uint8_t> truth) {
  RocAccumulator acc;
  acc.add(scores, truth);
  return acc.value();
}

void RocAccumulator::add(std::span<const float> scores, std::span<const std::uint8_t> truth) {
  check_sizes(scores.size(), truth.size());
  items_.reserve(items_.size() + scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::uint8_t t = truth[i] ? 1 : 0;
    items_.emplace_back(scores[i], t);
    (t ? pos_ : neg_)++;
  }
}

std::optional<double> RocAccumulator::value() const {
  auto sorted = items_;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return auroc_sorted(sorted, pos_, neg_);
}

const char* to_string(Pooling p) { return p == Pooling::pooled ? "pooled" : "per_image"; }

Pooling pooling_from_string(const std::string& s) {
  if (s == "pooled") return Pooling::pooled;
  if (s == "per_image") return Pooling::per_image;
  throw ConfigError("unknown pooling '" + s + "' (expected pooled or per_image)");
}

double MetricsReport::avg_f1_auroc() const { return anonet::avg_f1_auroc(std::span(this, 1)); }

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["f1"] = f1;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1_degenerate"] = f1_degenerate;
  j["auroc"] = auroc ? nlohmann::json(*auroc) : nlohmann::json(nullptr);
  j["tp"] = counts.tp;
  j["fp"] = counts.fp;
  j["fn"] = counts.fn;
  j["tn"] = counts.tn;
  j["parameters"] = parameters;
  j["epoch"] = epoch;
  j["threshold"] = threshold;
  j["pooling"] = to_string(pooling);
  return j.dump();
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.f1 = j.at("f1").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1_degenerate = j.at("f1_degenerate").get<bool>();
    if (!j.at("auroc").is_null()) r.auroc = j.at("auroc").get<double>();
    r.counts = {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
                j.at("fn").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>()};
    r.parameters = j.at("parameters").get<std::size_t>();
    r.epoch = j.at("epoch").get<std::size_t>();
    r.threshold = j.at("threshold").get<double>();
    r.pooling = pooling_from_string(j.at("pooling").get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad metrics report: ") + e.what());
  }
}

std::string MetricsReport::csv_header() {
  return "dataset,epoch,f1,precision,recall,auroc,avg_f1_auroc,tp,fp,fn,tn,parameters,threshold,pooling";
}

std::string MetricsReport::csv_row() const {
  char buf[512];
  const std::string au = auroc ? [&] {
    char b[32];
    std::snprintf(b, sizeof b, "%.17g", *auroc);
    return std::string(b);
  }() : std::string();
  std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g,%s,%.17g,%llu,%llu,%llu,%llu,%zu,%.17g,%s",
                dataset.c_str(), epoch, f1, precision, recall, au.c_str(), avg_f1_auroc(),
                static_cast<unsigned long long>(counts.tp), static_cast<unsigned long long>(counts.fp),
                static_cast<unsigned long long>(counts.fn), static_cast<unsigned long long>(counts.tn),
                parameters, threshold, to_string(pooling));
  return buf;
}

double avg_f1_auroc(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw ConfigError("avg_f1_auroc needs at least one report");
  double f1_sum = 0.0, au_sum = 0.0;
  std::size_t au_n = 0;
  for (const auto& r : reports) {
    f1_sum += r.f1;
    if (r.auroc) {
      au_sum += *r.auroc;
      ++au_n;
    }
  }
  const double f1_mean = f1_sum / static_cast<double>(reports.size());
  if (au_n == 0) return f1_mean;
  return 0.5 * (f1_mean + au_sum / static_cast<double>(au_n));
}

}  // namespace anonet
