#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace amqc {

// Flat INI-style run configuration. Precedence: defaults < file < flags; every
// value funnels through the same keyed validator, so bounds are enforced no
// matter where a setting came from.
struct RunConfig {
  struct Data {
    size_t n_samples = 2000;  // [8, 1000000]
    uint64_t seed = 42;
    std::string out_dir = "data";

    bool operator==(const Data&) const = default;
  } data;

  struct Train {
    std::string preset = "tiny";  // {tiny, full}
    size_t epochs = 30;           // [1, 1000]
    double lr = 0.01;             // (0, 1]
    size_t batch_size = 32;       // [1, 1024]
    uint64_t seed = 42;

    bool operator==(const Train&) const = default;
  } train;

  struct Quant {
    size_t calibration_n = 64;  // [16, 100000]

    bool operator==(const Quant&) const = default;
  } quant;

  struct Broker {
    uint16_t port = 1883;         // [0, 65535]; 0 picks a free port
    uint32_t retransmit_ms = 200;  // [10, 60000]

    bool operator==(const Broker&) const = default;
  } broker;

  struct Loop {
    size_t layers = 200;          // [2, 1000000]
    size_t sites = 500;           // [1, 1000000]
    double hot_threshold = 0.05;  // (0, 1]
    double cold_threshold = 0.05;  // (0, 1]
    std::string mode = "model_only";  // {model_only, full_pipeline}
    bool controller = true;
    uint64_t seed = 42;
    double power_w = 350.0;      // [150, 350]
    double speed_mm_s = 500.0;   // [500, 1500]
    double feed = 1.0;           // [0.8, 1.2]
    uint16_t node_id = 1;        // [1, 65535]

    bool operator==(const Loop&) const = default;
  } loop;

  bool operator==(const RunConfig&) const = default;
};

// Sets one dotted "section.key"; unknown keys and out-of-range values raise a
// configuration error naming the key and the documented bound.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Defaults, then the INI file (if `path` is non-empty), then the overrides in
// order. File syntax: `[section]` headers, `key = value` lines, `#`/`;`
// comments.
RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Canonical INI rendering, parseable by load_config; embedded in artifacts
// for provenance.
std::string render_config(const RunConfig& cfg);

}  // namespace amqc
