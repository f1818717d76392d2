#include "amqc/metrics.hpp"

#include <cctype>
#include <cstdio>

#include "amqc/annotation.hpp"
#include "amqc/error.hpp"

#include "json.hpp"

namespace amqc {

ConfusionMatrix::ConfusionMatrix(size_t k) : k_(k), counts_(k * k, 0) {
  if (k == 0) fail(ErrorKind::invalid_argument, "confusion matrix needs at least one class");
}

uint64_t ConfusionMatrix::count(size_t true_class, size_t predicted_class) const {
  if (true_class >= k_ || predicted_class >= k_)
    fail(ErrorKind::invalid_argument, "class index out of range");
  return counts_[true_class * k_ + predicted_class];
}

void ConfusionMatrix::accumulate(size_t true_class, size_t predicted_class) {
  if (true_class >= k_ || predicted_class >= k_)
    fail(ErrorKind::invalid_argument,
         "accumulate: class index out of range (k=" + std::to_string(k_) + ")");
  ++counts_[true_class * k_ + predicted_class];
  ++total_;
}

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, size_t c) {
  if (c >= cm.k()) fail(ErrorKind::invalid_argument, "class index out of range");
  uint64_t tp = cm.count(c, c), fp = 0, fn = 0;
  for (size_t r = 0; r < cm.k(); ++r)
    if (r != c) fp += cm.count(r, c);
  for (size_t p = 0; p < cm.k(); ++p)
    if (p != c) fn += cm.count(c, p);

  ClassMetrics m;
  m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) fail(ErrorKind::invalid_argument, "accuracy of an empty matrix");
  uint64_t trace = 0;
  for (size_t c = 0; c < cm.k(); ++c) trace += cm.count(c, c);
  return static_cast<double>(trace) / static_cast<double>(cm.total());
}

TimingMetrics timing_metrics(double total_ms, uint64_t frames) {
  if (frames == 0) fail(ErrorKind::invalid_argument, "timing_metrics: frames must be >= 1");
  if (!(total_ms > 0.0)) fail(ErrorKind::invalid_argument, "timing_metrics: total_ms must be > 0");
  TimingMetrics t;
  t.mean_ms = total_ms / static_cast<double>(frames);
  t.fps = 1000.0 / t.mean_ms;
  return t;
}

double defect_reduction_rate(double before, double after) {
  if (!(before > 0.0))
    fail(ErrorKind::invalid_argument, "defect_reduction_rate: before must be > 0");
  if (after < 0.0) fail(ErrorKind::invalid_argument, "defect_reduction_rate: after must be >= 0");
  return (before - after) / before * 100.0;
}

double correction_rate(uint64_t successful, uint64_t total_actions) {
  if (successful > total_actions)
    fail(ErrorKind::invalid_argument, "correction_rate: successful exceeds total actions");
  if (total_actions == 0) return 0.0;
  return 100.0 * static_cast<double>(successful) / static_cast<double>(total_actions);
}

MetricsReport build_report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.k = cm.k();
  r.accuracy = accuracy(cm);
  for (size_t c = 0; c < cm.k(); ++c) {
    r.per_class.push_back(per_class_metrics(cm, c));
    uint64_t support = 0;
    for (size_t p = 0; p < cm.k(); ++p) support += cm.count(c, p);
    r.support.push_back(support);
    r.macro.precision += r.per_class.back().precision;
    r.macro.recall += r.per_class.back().recall;
    r.macro.f1 += r.per_class.back().f1;
  }
  r.macro.precision /= static_cast<double>(cm.k());
  r.macro.recall /= static_cast<double>(cm.k());
  r.macro.f1 /= static_cast<double>(cm.k());
  return r;
}

namespace {

std::string row_label(const MetricsReport& r, size_t c) {
  if (r.k == static_cast<size_t>(kNumClasses)) {
    std::string name(kClassNames[c]);
    name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    return name;
  }
  return "class" + std::to_string(c);
}

}  // namespace

std::string render_report_text(const MetricsReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %5s %9s %7s %9s %12s\n", "Label", "Class", "precision",
                "Recall", "F1-score", "Test Sample");
  out += line;
  for (size_t c = 0; c < report.k; ++c) {
    const auto& m = report.per_class[c];
    std::snprintf(line, sizeof(line), "%-10s %5zu %9.2f %7.2f %9.2f %12llu\n",
                  row_label(report, c).c_str(), c, m.precision, m.recall, m.f1,
                  static_cast<unsigned long long>(report.support[c]));
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-10s %5s %9.2f %7.2f %9.2f %12s\n", "macro", "-",
                report.macro.precision, report.macro.recall, report.macro.f1, "-");
  out += line;
  std::snprintf(line, sizeof(line), "accuracy %.4f\n", report.accuracy);
  out += line;
  if (report.has_timing) {
    std::snprintf(line, sizeof(line), "mean inference %.2f ms (%.2f fps)\n", report.timing.mean_ms,
                  report.timing.fps);
    out += line;
  }
  return out;
}

std::string render_report_jsonl(const MetricsReport& report) {
  std::string out;
  for (size_t c = 0; c < report.k; ++c) {
    nlohmann::ordered_json j;
    j["class_id"] = c;
    j["label"] = row_label(report, c);
    j["precision"] = report.per_class[c].precision;
    j["recall"] = report.per_class[c].recall;
    j["f1"] = report.per_class[c].f1;
    j["support"] = report.support[c];
    out += j.dump();
    out += "\n";
  }
  nlohmann::ordered_json s;
  s["accuracy"] = report.accuracy;
  s["macro_precision"] = report.macro.precision;
  s["macro_recall"] = report.macro.recall;
  s["macro_f1"] = report.macro.f1;
  if (report.has_timing) {
    // Timing is wall-clock and therefore not deterministic across runs.
    s["mean_ms"] = report.timing.mean_ms;
    s["fps"] = report.timing.fps;
  }
  out += s.dump();
  out += "\n";
  return out;
}

}  // namespace amqc
