#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amqc/annotation.hpp"
#include "amqc/network.hpp"
#include "amqc/wire.hpp"

namespace amqc {

class Broker;

// Process parameter window; layer thickness and hatch spacing are fixed by
// the build setup.
struct ProcessState {
  double laser_power_w = 200.0;     // [150, 350]
  double scan_speed_mm_s = 1000.0;  // [500, 1500]
  double layer_thickness_mm = 0.05;
  double hatch_spacing_mm = 0.1;
  double feed_rate_rel = 1.0;  // [0.8, 1.2]

  bool operator==(const ProcessState&) const = default;
};

inline constexpr double kPowerMin = 150.0, kPowerMax = 350.0;
inline constexpr double kSpeedMin = 500.0, kSpeedMax = 1500.0;
inline constexpr double kFeedMin = 0.8, kFeedMax = 1.2;

void validate_state(const ProcessState& s);
ProcessState clamp_state(ProcessState s);

// Volumetric energy density E = P / (v * h * t), J/mm^3.
double energy_density(const ProcessState& s);

inline constexpr double kEnergyLo = 35.0, kEnergyHi = 45.0;  // optimal band, J/mm^3

// Reduced-order defect model. Deviation from the band drives the total
// defect probability: d = max(0, (Elo-E)/Elo, (E-Ehi)/Ehi), total =
// min(0.95, 0.02 + 1.5 d + 0.3 |feed-1|). Overheating splits 60% spatter /
// 40% hole, underheating 60% crack / 40% pinhole, in-band is uniform.
struct DefectProbabilities {
  std::array<double, kNumClasses> p_class{};
  double p_none = 1.0;
};

DefectProbabilities defect_probability(const ProcessState& s);

using ClassCounts = std::array<size_t, kNumClasses>;

// `sites` independent categorical draws.
ClassCounts sample_counts(const DefectProbabilities& p, size_t sites, uint64_t seed);
ClassCounts sample_layer_outcome(const ProcessState& s, size_t sites, uint64_t seed);

enum class ActionKind : uint8_t { none = 0, cool_down = 1, feed_correct = 2 };

const char* action_kind_name(ActionKind k);

struct ControlAction {
  ActionKind kind = ActionKind::none;
  double dpower_w = 0.0;
  double dspeed_mm_s = 0.0;
  double dfeed_rel = 0.0;

  bool operator==(const ControlAction&) const = default;
};

struct Thresholds {
  double hot = 0.05;   // (spatter+hole)/sites for cool_down
  double cold = 0.05;  // (crack+pinhole)/sites for feed_correct
};

// Pseudocode controller: overheating -> cool_down (-10 W, +50 mm/s);
// deposition error -> feed_correct (+0.02 feed, +10 W); otherwise none.
ControlAction decide_action(const ClassCounts& counts, size_t sites, const ProcessState& s,
                            const Thresholds& th = {});

// Applies deltas and clamps to the ProcessState bounds.
ProcessState apply_action(const ProcessState& s, const ControlAction& a);

// 13-byte control record: u8 kind, then the three deltas as little-endian
// 32-bit floats (power, speed, feed).
inline constexpr size_t kActionBytes = 13;
std::vector<uint8_t> encode_action(const ControlAction& a);
ControlAction decode_action(std::span<const uint8_t> bytes);

struct LoopConfig {
  size_t layers = 200;
  size_t sites_per_layer = 500;
  uint64_t seed = 42;
  bool controller_on = true;
  enum class Mode { model_only, full_pipeline } mode = Mode::model_only;
  ProcessState start;
  Thresholds thresholds;
  uint16_t node_id = 1;

  // full_pipeline dependencies; both required in that mode.
  const Network* net = nullptr;
  Broker* broker = nullptr;
};

struct LayerRecord {
  size_t layer = 0;
  ProcessState state;  // state the layer ran with
  double energy = 0.0;
  ClassCounts counts{};  // counts the controller saw
  size_t defects = 0;
  double rate = 0.0;  // defects / sites
  ControlAction action;
};

struct LoopReport {
  std::vector<LayerRecord> layers;
  size_t sites_per_layer = 0;
  double baseline_defect_rate = 0.0;  // mean defects/layer over the first 10
  double final_defect_rate = 0.0;     // mean defects/layer over the last 10
  double defect_reduction_pct = 0.0;
  size_t actions_taken = 0;
  size_t actions_improved = 0;  // strictly fewer defects on the next layer
  double correction_rate_pct = 0.0;
};

// model_only: sample -> decide -> apply per layer, bit-deterministic.
// full_pipeline: renders an image per defect, classifies with cfg.net,
// publishes DefectRecords over cfg.broker, and controls on classified counts.
LoopReport run_closed_loop(const LoopConfig& cfg);

// One JSON object per layer plus a summary line.
std::string loop_report_jsonl(const LoopReport& r);

}  // namespace amqc
