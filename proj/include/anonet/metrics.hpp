#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anonet {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct F1Result {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool degenerate = false;  ///< P + R = 0; f1 reported as 0
  ConfusionCounts counts;
};

/// Prediction is score > threshold.
ConfusionCounts confusion(std::span<const float> scores, std::span<const std::uint8_t> truth,
                          double threshold = 0.0);
F1Result f1_from_counts(const ConfusionCounts& c);
F1Result f1_score(std::span<const float> scores, std::span<const std::uint8_t> truth,
                  double threshold = 0.0);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Empty when either class is absent.
std::optional<double> auroc(std::span<const float> scores, std::span<const std::uint8_t> truth);

/// Streaming accumulator for pooled-pixel AUROC: scores are bucketed by
/// exact value, so the result equals auroc() on the concatenation.
class RocAccumulator {
 public:
  void add(std::span<const float> scores, std::span<const std::uint8_t> truth);
  [[nodiscard]] std::optional<double> value() const;
  [[nodiscard]] std::uint64_t positives() const { return pos_; }
  [[nodiscard]] std::uint64_t negatives() const { return neg_; }

 private:
  std::vector<std::pair<float, std::uint8_t>> items_;
  std::uint64_t pos_ = 0;
  std::uint64_t neg_ = 0;
};

enum class Pooling { pooled, per_image };
const char* to_string(Pooling p);
Pooling pooling_from_string(const std::string& s);

struct MetricsReport {
  std::string dataset;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool f1_degenerate = false;
  std::optional<double> auroc;
  ConfusionCounts counts;
  std::size_t parameters = 0;
  std::size_t epoch = 0;
  double threshold = 0.0;
  Pooling pooling = Pooling::pooled;

  /// For per-dataset aggregation: the report's own F1/AUROC mean.
  [[nodiscard]] double avg_f1_auroc() const;

  [[nodiscard]] std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
  static std::string csv_header();
  [[nodiscard]] std::string csv_row() const;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Mean of F1 over reports, mean of AUROC over reports that have one, then
/// the mean of the two (the F1 mean alone if no report has an AUROC).
double avg_f1_auroc(std::span<const MetricsReport> reports);

}  // namespace anonet
