#include "amqc/twin.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "amqc/broker.hpp"
#include "amqc/client.hpp"
#include "amqc/datagen.hpp"
#include "amqc/metrics.hpp"
#include "amqc/rng.hpp"

namespace amqc {

void validate_state(const ProcessState& s) {
  auto check = [](double v, double lo, double hi, const char* name) {
    if (!(v >= lo && v <= hi))
      fail(ErrorKind::invalid_argument, std::string(name) + " " + std::to_string(v) +
                                            " outside [" + std::to_string(lo) + "," +
                                            std::to_string(hi) + "]");
  };
  check(s.laser_power_w, kPowerMin, kPowerMax, "laser_power_w");
  check(s.scan_speed_mm_s, kSpeedMin, kSpeedMax, "scan_speed_mm_s");
  check(s.feed_rate_rel, kFeedMin, kFeedMax, "feed_rate_rel");
  if (s.layer_thickness_mm != 0.05)
    fail(ErrorKind::invalid_argument, "layer_thickness_mm is fixed at 0.05");
  if (s.hatch_spacing_mm != 0.1)
    fail(ErrorKind::invalid_argument, "hatch_spacing_mm is fixed at 0.1");
}

ProcessState clamp_state(ProcessState s) {
  s.laser_power_w = std::clamp(s.laser_power_w, kPowerMin, kPowerMax);
  s.scan_speed_mm_s = std::clamp(s.scan_speed_mm_s, kSpeedMin, kSpeedMax);
  s.feed_rate_rel = std::clamp(s.feed_rate_rel, kFeedMin, kFeedMax);
  return s;
}

double energy_density(const ProcessState& s) {
  return s.laser_power_w / (s.scan_speed_mm_s * s.hatch_spacing_mm * s.layer_thickness_mm);
}

DefectProbabilities defect_probability(const ProcessState& s) {
  validate_state(s);
  const double e = energy_density(s);
  const double d = std::max({0.0, (kEnergyLo - e) / kEnergyLo, (e - kEnergyHi) / kEnergyHi});
  const double total = std::min(0.95, 0.02 + 1.5 * d + 0.3 * std::abs(s.feed_rate_rel - 1.0));
  DefectProbabilities p;
  if (e > kEnergyHi) {
    p.p_class[static_cast<size_t>(DefectClass::spatter)] = 0.6 * total;
    p.p_class[static_cast<size_t>(DefectClass::hole)] = 0.4 * total;
  } else if (e < kEnergyLo) {
    p.p_class[static_cast<size_t>(DefectClass::crack)] = 0.6 * total;
    p.p_class[static_cast<size_t>(DefectClass::pinhole)] = 0.4 * total;
  } else {
    for (auto& v : p.p_class) v = total / 4.0;
  }
  p.p_none = 1.0 - total;
  return p;
}

ClassCounts sample_counts(const DefectProbabilities& p, size_t sites, uint64_t seed) {
  if (sites < 1) fail(ErrorKind::invalid_argument, "sample_counts: sites must be >= 1");
  Rng rng(seed);
  ClassCounts counts{};
  for (size_t i = 0; i < sites; ++i) {
    const double u = rng.unit();
    double acc = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      acc += p.p_class[static_cast<size_t>(c)];
      if (u < acc) {
        ++counts[static_cast<size_t>(c)];
        break;
      }
    }
  }
  return counts;
}

ClassCounts sample_layer_outcome(const ProcessState& s, size_t sites, uint64_t seed) {
  return sample_counts(defect_probability(s), sites, seed);
}

const char* action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::none: return "none";
    case ActionKind::cool_down: return "cool_down";
    case ActionKind::feed_correct: return "feed_correct";
  }
  return "?";
}

ControlAction decide_action(const ClassCounts& counts, size_t sites, const ProcessState& s,
                            const Thresholds& th) {
  validate_state(s);
  if (sites < 1) fail(ErrorKind::invalid_argument, "decide_action: sites must be >= 1");
  size_t total = 0;
  for (size_t c : counts) total += c;
  if (total > sites)
    fail(ErrorKind::invalid_argument, "decide_action: counts exceed site count");

  const double hot_rate =
      static_cast<double>(counts[static_cast<size_t>(DefectClass::spatter)] +
                          counts[static_cast<size_t>(DefectClass::hole)]) /
      static_cast<double>(sites);
  const double cold_rate =
      static_cast<double>(counts[static_cast<size_t>(DefectClass::crack)] +
                          counts[static_cast<size_t>(DefectClass::pinhole)]) /
      static_cast<double>(sites);
  if (hot_rate >= th.hot) return {ActionKind::cool_down, -10.0, 50.0, 0.0};
  if (cold_rate >= th.cold) return {ActionKind::feed_correct, 10.0, 0.0, 0.02};
  return {ActionKind::none, 0.0, 0.0, 0.0};
}

ProcessState apply_action(const ProcessState& s, const ControlAction& a) {
  ProcessState next = s;
  next.laser_power_w += a.dpower_w;
  next.scan_speed_mm_s += a.dspeed_mm_s;
  next.feed_rate_rel += a.dfeed_rel;
  return clamp_state(next);
}

std::vector<uint8_t> encode_action(const ControlAction& a) {
  std::vector<uint8_t> out;
  out.reserve(kActionBytes);
  put_u8(out, static_cast<uint8_t>(a.kind));
  put_f32le(out, static_cast<float>(a.dpower_w));
  put_f32le(out, static_cast<float>(a.dspeed_mm_s));
  put_f32le(out, static_cast<float>(a.dfeed_rel));
  return out;
}

ControlAction decode_action(std::span<const uint8_t> bytes) {
  if (bytes.size() != kActionBytes)
    fail(ErrorKind::format, "control record must be exactly " + std::to_string(kActionBytes) +
                                " bytes, got " + std::to_string(bytes.size()));
  ByteReader r{bytes};
  const uint8_t kind = r.u8();
  if (kind > 2)
    fail(ErrorKind::format, "control record field kind: " + std::to_string(kind) + " unknown");
  ControlAction a;
  a.kind = static_cast<ActionKind>(kind);
  a.dpower_w = r.f32le();
  a.dspeed_mm_s = r.f32le();
  a.dfeed_rel = r.f32le();
  return a;
}

namespace {

void finish_report(LoopReport& rep) {
  const size_t n = rep.layers.size();
  const size_t w = std::min<size_t>(10, n);
  double first = 0.0, last = 0.0;
  for (size_t i = 0; i < w; ++i) first += static_cast<double>(rep.layers[i].defects);
  for (size_t i = n - w; i < n; ++i) last += static_cast<double>(rep.layers[i].defects);
  rep.baseline_defect_rate = first / static_cast<double>(w);
  rep.final_defect_rate = last / static_cast<double>(w);
  rep.defect_reduction_pct =
      rep.baseline_defect_rate > 0.0
          ? defect_reduction_rate(rep.baseline_defect_rate, rep.final_defect_rate)
          : 0.0;
  rep.actions_taken = 0;
  rep.actions_improved = 0;
  for (size_t i = 0; i < n; ++i) {
    if (rep.layers[i].action.kind == ActionKind::none) continue;
    ++rep.actions_taken;
    if (i + 1 < n && rep.layers[i + 1].defects < rep.layers[i].defects) ++rep.actions_improved;
  }
  rep.correction_rate_pct = correction_rate(rep.actions_improved, rep.actions_taken);
}

LoopReport run_model_only(const LoopConfig& cfg) {
  LoopReport rep;
  rep.sites_per_layer = cfg.sites_per_layer;
  ProcessState state = cfg.start;
  validate_state(state);
  for (size_t layer = 0; layer < cfg.layers; ++layer) {
    LayerRecord rec;
    rec.layer = layer;
    rec.state = state;
    rec.energy = energy_density(state);
    rec.counts = sample_layer_outcome(state, cfg.sites_per_layer, derive_seed(cfg.seed, layer));
    for (size_t c : rec.counts) rec.defects += c;
    rec.rate = static_cast<double>(rec.defects) / static_cast<double>(cfg.sites_per_layer);
    rec.action = cfg.controller_on
                     ? decide_action(rec.counts, cfg.sites_per_layer, state, cfg.thresholds)
                     : ControlAction{};
    state = apply_action(state, rec.action);
    rep.layers.push_back(rec);
  }
  finish_report(rep);
  return rep;
}

struct RenderJob {
  size_t layer;
  size_t index;  // running defect index within the layer
  int class_id;
  GrayImage image;
  Annotation ann;
};

// Small blocking queue (backpressure, no drops). close() unblocks both ends.
class JobQueue {
public:
  explicit JobQueue(size_t cap) : cap_(cap) {}

  // False once the queue is closed (consumer is gone).
  bool push(RenderJob job) {
    std::unique_lock lk(mu_);
    cv_pop_.wait(lk, [&] { return q_.size() < cap_ || done_; });
    if (done_) return false;
    q_.push_back(std::move(job));
    cv_push_.notify_one();
    return true;
  }

  bool pop(RenderJob& out) {
    std::unique_lock lk(mu_);
    cv_push_.wait(lk, [&] { return !q_.empty() || done_; });
    if (q_.empty()) return false;
    out = std::move(q_.front());
    q_.pop_front();
    cv_pop_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lk(mu_);
    done_ = true;
    cv_push_.notify_all();
    cv_pop_.notify_all();
  }

private:
  std::mutex mu_;
  std::condition_variable cv_push_, cv_pop_;
  std::deque<RenderJob> q_;
  size_t cap_;
  bool done_ = false;
};

LoopReport run_full_pipeline(const LoopConfig& cfg) {
  if (!cfg.net || !cfg.broker)
    fail(ErrorKind::config, "full_pipeline mode requires a network and a broker");
  if (cfg.net->weights.size() != cfg.net->param_layer_count())
    fail(ErrorKind::config, "full_pipeline: network parameters not initialized");

  const std::string defects_topic = "amqc/defects/" + std::to_string(cfg.node_id);
  const std::string control_topic = "amqc/control/" + std::to_string(cfg.node_id);
  const int th = static_cast<int>(cfg.net->input_shape[1]);
  const int tw = static_cast<int>(cfg.net->input_shape[2]);

  // Twin side: subscribes to the defect stream and accumulates per-layer
  // classified counts, deduplicating QoS-1 redeliveries by timestamp.
  std::mutex twin_mu;
  std::condition_variable twin_cv;
  ClassCounts twin_counts{};
  size_t twin_layer = 0;
  size_t twin_received = 0;
  std::unordered_set<uint64_t> seen;

  Client twin(cfg.broker->connect_local(), "twin-" + std::to_string(cfg.node_id));
  twin.subscribe(defects_topic, [&](const PublishPacket& p) {
    const DefectRecord rec = decode_record(p.payload);
    std::lock_guard lk(twin_mu);
    if (rec.layer_index != twin_layer) return;  // stale duplicate from a previous layer
    if (!seen.insert(rec.timestamp_us).second) return;
    ++twin_counts[rec.class_id];
    ++twin_received;
    twin_cv.notify_all();
  });

  // Edge side: classifies rendered defect sites and publishes records.
  Client edge(cfg.broker->connect_local(), "edge-" + std::to_string(cfg.node_id));
  JobQueue queue(32);
  std::exception_ptr worker_error;  // guarded by twin_mu
  std::thread worker([&] {
    try {
      RenderJob job;
      while (queue.pop(job)) {
        const Tensor x = preprocess(job.image, th, tw);
        const Tensor prob = forward_sample(*cfg.net, x);
        size_t pred = 0;
        for (size_t i = 1; i < prob.size(); ++i)
          if (prob[i] > prob[pred]) pred = i;
        DefectRecord rec;
        rec.version = 1;
        rec.timestamp_us = static_cast<uint64_t>(job.layer) * 1'000'000 + job.index;
        rec.layer_index = static_cast<uint32_t>(job.layer);
        rec.class_id = static_cast<uint8_t>(pred);
        rec.confidence_q = static_cast<uint16_t>(std::llround(prob[pred] * 65535.0));
        rec.xmin = static_cast<uint16_t>(job.ann.xmin);
        rec.ymin = static_cast<uint16_t>(job.ann.ymin);
        rec.xmax = static_cast<uint16_t>(job.ann.xmax);
        rec.ymax = static_cast<uint16_t>(job.ann.ymax);
        rec.node_id = cfg.node_id;
        const auto bytes = encode_record(rec);
        edge.publish_qos1(defects_topic, bytes);
      }
    } catch (...) {
      {
        std::lock_guard lk(twin_mu);
        worker_error = std::current_exception();
      }
      queue.close();  // unblock the producer
      twin_cv.notify_all();
    }
  });

  LoopReport rep;
  rep.sites_per_layer = cfg.sites_per_layer;
  ProcessState state = cfg.start;
  validate_state(state);
  try {
    for (size_t layer = 0; layer < cfg.layers; ++layer) {
      const ClassCounts truth =
          sample_layer_outcome(state, cfg.sites_per_layer, derive_seed(cfg.seed, layer));
      size_t expected = 0;
      for (size_t c : truth) expected += c;

      {
        std::lock_guard lk(twin_mu);
        twin_layer = layer;
        twin_counts = {};
        twin_received = 0;
        seen.clear();
      }

      const uint64_t layer_seed = derive_seed(cfg.seed, layer);
      size_t index = 0;
      for (int c = 0; c < kNumClasses; ++c) {
        for (size_t i = 0; i < truth[static_cast<size_t>(c)]; ++i) {
          auto [img, ann] = synth_image(c, derive_seed(layer_seed, index + 1));
          if (!queue.push({layer, index, c, std::move(img), std::move(ann)})) break;
          ++index;
        }
      }

      ClassCounts counts{};
      {
        std::unique_lock lk(twin_mu);
        twin_cv.wait(lk, [&] { return twin_received >= expected || worker_error; });
        if (worker_error) std::rethrow_exception(worker_error);
        counts = twin_counts;
      }

      LayerRecord rec;
      rec.layer = layer;
      rec.state = state;
      rec.energy = energy_density(state);
      rec.counts = counts;
      rec.defects = expected;
      rec.rate = static_cast<double>(expected) / static_cast<double>(cfg.sites_per_layer);
      rec.action = cfg.controller_on
                       ? decide_action(counts, cfg.sites_per_layer, state, cfg.thresholds)
                       : ControlAction{};
      if (rec.action.kind != ActionKind::none) {
        const auto bytes = encode_action(rec.action);
        twin.publish_qos1(control_topic, bytes);
      }
      state = apply_action(state, rec.action);
      rep.layers.push_back(rec);
    }
  } catch (...) {
    queue.close();
    worker.join();
    throw;
  }
  queue.close();
  worker.join();
  if (worker_error) std::rethrow_exception(worker_error);
  finish_report(rep);
  return rep;
}

}  // namespace

LoopReport run_closed_loop(const LoopConfig& cfg) {
  if (cfg.layers < 2) fail(ErrorKind::invalid_argument, "run_closed_loop: need at least 2 layers");
  if (cfg.sites_per_layer < 1)
    fail(ErrorKind::invalid_argument, "run_closed_loop: sites_per_layer must be >= 1");
  return cfg.mode == LoopConfig::Mode::model_only ? run_model_only(cfg) : run_full_pipeline(cfg);
}

std::string loop_report_jsonl(const LoopReport& r) {
  std::string out;
  for (const auto& l : r.layers) {
    nlohmann::ordered_json j;
    j["layer"] = l.layer;
    j["power_w"] = l.state.laser_power_w;
    j["speed_mm_s"] = l.state.scan_speed_mm_s;
    j["feed"] = l.state.feed_rate_rel;
    j["energy_j_mm3"] = l.energy;
    j["counts"] = l.counts;
    j["defects"] = l.defects;
    j["rate"] = l.rate;
    j["action"] = action_kind_name(l.action.kind);
    out += j.dump();
    out += '\n';
  }
  nlohmann::ordered_json s;
  s["layers"] = r.layers.size();
  s["sites_per_layer"] = r.sites_per_layer;
  s["baseline_defect_rate"] = r.baseline_defect_rate;
  s["final_defect_rate"] = r.final_defect_rate;
  s["defect_reduction_pct"] = r.defect_reduction_pct;
  s["actions_taken"] = r.actions_taken;
  s["actions_improved"] = r.actions_improved;
  s["correction_rate_pct"] = r.correction_rate_pct;
  out += s.dump();
  out += '\n';
  return out;
}

}  // namespace amqc
