#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace amqc {

// True-vs-predicted count table: rows = true class, columns = predicted class.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(size_t k);

  size_t k() const { return k_; }
  uint64_t total() const { return total_; }
  uint64_t count(size_t true_class, size_t predicted_class) const;

  void accumulate(size_t true_class, size_t predicted_class);

private:
  size_t k_;
  uint64_t total_ = 0;
  std::vector<uint64_t> counts_;  // k*k row-major
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// One-vs-rest precision/recall/F1 for class c; 0/0 ratios are defined as 0.
ClassMetrics per_class_metrics(const ConfusionMatrix& cm, size_t c);

// trace/total; invalid-argument on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct TimingMetrics {
  double mean_ms = 0.0;
  double fps = 0.0;
};

// mean_ms = total_ms / frames, fps = 1000 / mean_ms.
TimingMetrics timing_metrics(double total_ms, uint64_t frames);

// (before - after) / before * 100; negative when counts worsen.
double defect_reduction_rate(double before, double after);

// 100 * successful / total_actions; 0 when no actions were taken.
double correction_rate(uint64_t successful, uint64_t total_actions);

struct MetricsReport {
  size_t k = 0;
  std::vector<ClassMetrics> per_class;
  std::vector<uint64_t> support;  // true-class sample counts
  double accuracy = 0.0;
  ClassMetrics macro;  // unweighted mean over classes
  bool has_timing = false;
  TimingMetrics timing;
};

MetricsReport build_report(const ConfusionMatrix& cm);

// Human-readable table (values at 2 decimals) and a JSONL line per class plus
// a summary line (full precision). Both renderings are byte-deterministic.
std::string render_report_text(const MetricsReport& report);
std::string render_report_jsonl(const MetricsReport& report);

}  // namespace amqc
