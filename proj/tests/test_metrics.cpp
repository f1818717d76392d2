#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "amqc/error.hpp"
#include "amqc/metrics.hpp"
#include "amqc/rng.hpp"

using namespace amqc;

TEST_CASE("confusion matrix accumulates where it should") {
  ConfusionMatrix cm(4);
  CHECK(cm.total() == 0);

  cm.accumulate(0, 1);
  CHECK(cm.total() == 1);
  cm.accumulate(1, 1);
  cm.accumulate(1, 0);
  CHECK(cm.count(0, 1) == 1);
  CHECK(cm.count(1, 1) == 1);
  CHECK(cm.count(1, 0) == 1);
  CHECK(cm.count(0, 0) == 0);
  CHECK(cm.total() == 3);

  CHECK_THROWS_AS(cm.accumulate(4, 0), Error);
  CHECK_THROWS_AS(cm.accumulate(0, 4), Error);
}

TEST_CASE("all-correct stream yields a diagonal matrix") {
  ConfusionMatrix cm(3);
  for (size_t c = 0; c < 3; ++c)
    for (int i = 0; i < 5; ++i) cm.accumulate(c, c);
  for (size_t r = 0; r < 3; ++r)
    for (size_t p = 0; p < 3; ++p) CHECK(cm.count(r, p) == (r == p ? 5u : 0u));
  CHECK(accuracy(cm) == 1.0);
}

TEST_CASE("per-class metrics reproduce the reference table values") {
  // Class 0: TP=49, FN=1 -> recall 0.98. FP sized to give precision ~0.96:
  // 49/(49+2) = 0.96078...; use the direct ratio check instead of rounding.
  ConfusionMatrix cm(2);
  for (int i = 0; i < 49; ++i) cm.accumulate(0, 0);
  cm.accumulate(0, 1);  // FN for class 0
  ClassMetrics m = per_class_metrics(cm, 0);
  CHECK(m.recall == doctest::Approx(0.98).epsilon(1e-12));
  CHECK(m.precision == 1.0);

  // F1 from P=0.96, R=0.98 via a matrix realizing those ratios exactly:
  // TP=2352, FP=98 -> P=2352/2450=0.96; FN=48 -> R=2352/2400=0.98.
  ConfusionMatrix cm2(2);
  for (int i = 0; i < 2352; ++i) cm2.accumulate(0, 0);
  for (int i = 0; i < 48; ++i) cm2.accumulate(0, 1);
  for (int i = 0; i < 98; ++i) cm2.accumulate(1, 0);
  ClassMetrics m2 = per_class_metrics(cm2, 0);
  CHECK(m2.precision == doctest::Approx(0.96).epsilon(1e-12));
  CHECK(m2.recall == doctest::Approx(0.98).epsilon(1e-12));
  CHECK(m2.f1 == doctest::Approx(2 * 0.96 * 0.98 / (0.96 + 0.98)).epsilon(1e-12));
  CHECK(m2.f1 == doctest::Approx(0.96990).epsilon(1e-4));
}

TEST_CASE("empty matrix metrics are zero by the 0/0 rule") {
  ConfusionMatrix cm(4);
  ClassMetrics m = per_class_metrics(cm, 2);
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK_THROWS_AS(accuracy(cm), Error);
}

TEST_CASE("accuracy realizes the headline ratio") {
  ConfusionMatrix cm(2);
  for (int i = 0; i < 9954; ++i) cm.accumulate(0, 0);
  for (int i = 0; i < 46; ++i) cm.accumulate(0, 1);
  CHECK(accuracy(cm) == doctest::Approx(0.9954).epsilon(1e-12));

  ConfusionMatrix off(2);
  off.accumulate(0, 1);
  off.accumulate(1, 0);
  CHECK(accuracy(off) == 0.0);
}

TEST_CASE("metrics agree with a brute-force counting oracle") {
  // Predicted/true label streams, k=4, checked against per-sample counting.
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 1 + rng.below(500);
    std::vector<size_t> t(n), p(n);
    ConfusionMatrix cm(4);
    for (size_t i = 0; i < n; ++i) {
      t[i] = rng.below(4);
      p[i] = rng.below(4);
      cm.accumulate(t[i], p[i]);
    }
    size_t correct = 0;
    for (size_t i = 0; i < n; ++i)
      if (t[i] == p[i]) ++correct;
    CHECK(std::abs(accuracy(cm) - static_cast<double>(correct) / n) <= 1e-12);

    for (size_t c = 0; c < 4; ++c) {
      size_t tp = 0, fp = 0, fn = 0;
      for (size_t i = 0; i < n; ++i) {
        if (t[i] == c && p[i] == c) ++tp;
        if (t[i] != c && p[i] == c) ++fp;
        if (t[i] == c && p[i] != c) ++fn;
      }
      double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
      double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
      double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      ClassMetrics m = per_class_metrics(cm, c);
      CHECK(std::abs(m.precision - prec) <= 1e-12);
      CHECK(std::abs(m.recall - rec) <= 1e-12);
      CHECK(std::abs(m.f1 - f1) <= 1e-12);
      CHECK(m.precision >= 0.0);
      CHECK(m.precision <= 1.0);
      if (m.precision > 0 && m.recall > 0) {
        CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-12);
        CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-12);
      }
    }
  }
}

TEST_CASE("timing metrics follow the definitional formulas") {
  TimingMetrics t = timing_metrics(1000.0, 10);
  CHECK(t.mean_ms == 100.0);
  CHECK(t.fps == 10.0);

  t = timing_metrics(32.4, 1);
  CHECK(t.mean_ms == doctest::Approx(32.4).epsilon(1e-12));
  CHECK(t.fps == doctest::Approx(1000.0 / 32.4).epsilon(1e-12));
  CHECK(t.fps == doctest::Approx(30.86).epsilon(1e-3));

  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    double total = 1.0 + rng.unit() * 10000.0;
    uint64_t frames = 1 + rng.below(1000);
    TimingMetrics tm = timing_metrics(total, frames);
    CHECK(tm.mean_ms * tm.fps == doctest::Approx(1000.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(timing_metrics(1000.0, 0), Error);
}

TEST_CASE("defect reduction rate handles improvement and regression") {
  CHECK(defect_reduction_rate(100, 27) == 73.0);
  CHECK(defect_reduction_rate(42, 42) == 0.0);
  CHECK(defect_reduction_rate(50, 75) == -50.0);
  CHECK(defect_reduction_rate(7, 0) == 100.0);
  CHECK_THROWS_AS(defect_reduction_rate(0, 5), Error);
}

TEST_CASE("correction rate follows the convention") {
  CHECK(correction_rate(89, 100) == 89.0);
  CHECK(correction_rate(0, 0) == 0.0);
  CHECK(correction_rate(3, 4) == 75.0);
  CHECK_THROWS_AS(correction_rate(5, 4), Error);
}

TEST_CASE("report rendering is deterministic and structured") {
  ConfusionMatrix cm(4);
  Rng rng(8);
  for (int i = 0; i < 400; ++i) {
    size_t t = rng.below(4);
    size_t p = rng.unit() < 0.9 ? t : rng.below(4);
    cm.accumulate(t, p);
  }
  MetricsReport report = build_report(cm);
  CHECK(report.k == 4);
  uint64_t sum = 0;
  for (uint64_t s : report.support) sum += s;
  CHECK(sum == cm.total());

  double mp = 0;
  for (const auto& m : report.per_class) mp += m.precision;
  CHECK(report.macro.precision == doctest::Approx(mp / 4).epsilon(1e-12));

  std::string text = render_report_text(report);
  CHECK(text == render_report_text(report));
  // Four data rows plus a macro row.
  for (const char* label : {"Crack", "Pinhole", "Hole", "Spatter", "macro"})
    CHECK(text.find(label) != std::string::npos);

  std::string jsonl = render_report_jsonl(report);
  CHECK(jsonl == render_report_jsonl(report));
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 5);  // 4 classes + summary
}
