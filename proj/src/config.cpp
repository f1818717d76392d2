#include "amqc/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amqc/error.hpp"

namespace amqc {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    fail(ErrorKind::config, key + " = '" + v + "' is not an unsigned integer");
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (errno == ERANGE || end != v.c_str() + v.size())
    fail(ErrorKind::config, key + " = '" + v + "' does not fit in 64 bits");
  return x;
}

uint64_t parse_count(const std::string& key, const std::string& v, uint64_t lo, uint64_t hi) {
  const uint64_t x = parse_u64(key, v);
  if (x < lo || x > hi)
    fail(ErrorKind::config, key + " = " + v + " out of range [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  return x;
}

// `bounds` is the documented interval, e.g. "[150, 350]" or "(0, 1]"; an open
// lower end excludes lo itself.
double parse_real(const std::string& key, const std::string& v, double lo, double hi,
                  const char* bounds, bool lo_open = false) {
  if (v.empty()) fail(ErrorKind::config, key + " = '' is not a number");
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x))
    fail(ErrorKind::config, key + " = '" + v + "' is not a finite number");
  if ((lo_open ? x <= lo : x < lo) || x > hi)
    fail(ErrorKind::config, key + " = " + v + " out of range " + bounds);
  return x;
}

std::string parse_choice(const std::string& key, const std::string& v,
                         std::initializer_list<const char*> allowed) {
  std::string opts;
  for (const char* a : allowed) {
    if (v == a) return v;
    if (!opts.empty()) opts += ", ";
    opts += a;
  }
  fail(ErrorKind::config, key + " = '" + v + "' is not one of {" + opts + "}");
}

bool parse_onoff(const std::string& key, const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  fail(ErrorKind::config, key + " = '" + v + "' is not one of {on, off}");
}

std::string num(double v) { return nlohmann::json(v).dump(); }

}  // namespace

void apply_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "data.n_samples") {
    c.data.n_samples = parse_count(key, value, 8, 1'000'000);
  } else if (key == "data.seed") {
    c.data.seed = parse_u64(key, value);
  } else if (key == "data.out_dir") {
    if (value.empty()) fail(ErrorKind::config, "data.out_dir must not be empty");
    c.data.out_dir = value;
  } else if (key == "train.preset") {
    c.train.preset = parse_choice(key, value, {"tiny", "full"});
  } else if (key == "train.epochs") {
    c.train.epochs = parse_count(key, value, 1, 1000);
  } else if (key == "train.lr") {
    c.train.lr = parse_real(key, value, 0.0, 1.0, "(0, 1]", /*lo_open=*/true);
  } else if (key == "train.batch_size") {
    c.train.batch_size = parse_count(key, value, 1, 1024);
  } else if (key == "train.seed") {
    c.train.seed = parse_u64(key, value);
  } else if (key == "quant.calibration_n") {
    c.quant.calibration_n = parse_count(key, value, 16, 100'000);
  } else if (key == "broker.port") {
    c.broker.port = static_cast<uint16_t>(parse_count(key, value, 0, 65535));
  } else if (key == "broker.retransmit_ms") {
    c.broker.retransmit_ms = static_cast<uint32_t>(parse_count(key, value, 10, 60'000));
  } else if (key == "loop.layers") {
    c.loop.layers = parse_count(key, value, 2, 1'000'000);
  } else if (key == "loop.sites") {
    c.loop.sites = parse_count(key, value, 1, 1'000'000);
  } else if (key == "loop.hot_threshold") {
    c.loop.hot_threshold = parse_real(key, value, 0.0, 1.0, "(0, 1]", /*lo_open=*/true);
  } else if (key == "loop.cold_threshold") {
    c.loop.cold_threshold = parse_real(key, value, 0.0, 1.0, "(0, 1]", /*lo_open=*/true);
  } else if (key == "loop.mode") {
    c.loop.mode = parse_choice(key, value, {"model_only", "full_pipeline"});
  } else if (key == "loop.controller") {
    c.loop.controller = parse_onoff(key, value);
  } else if (key == "loop.seed") {
    c.loop.seed = parse_u64(key, value);
  } else if (key == "loop.power_w") {
    c.loop.power_w = parse_real(key, value, 150.0, 350.0, "[150, 350]");
  } else if (key == "loop.speed_mm_s") {
    c.loop.speed_mm_s = parse_real(key, value, 500.0, 1500.0, "[500, 1500]");
  } else if (key == "loop.feed") {
    c.loop.feed = parse_real(key, value, 0.8, 1.2, "[0.8, 1.2]");
  } else if (key == "loop.node_id") {
    c.loop.node_id = static_cast<uint16_t>(parse_count(key, value, 1, 65535));
  } else {
    fail(ErrorKind::config, "unknown key '" + key + "'");
  }
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::config, "cannot open config file '" + path + "'");
    std::string line;
    std::string section;
    int ln = 0;
    auto here = [&] { return path + ":" + std::to_string(ln) + ": "; };
    while (std::getline(f, line)) {
      ++ln;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(ErrorKind::config, here() + "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section != "data" && section != "train" && section != "quant" &&
            section != "broker" && section != "loop")
          fail(ErrorKind::config, here() + "unknown section '[" + section + "]'");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(ErrorKind::config, here() + "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) fail(ErrorKind::config, here() + "expected 'key = value'");
      if (section.empty())
        fail(ErrorKind::config, here() + "key '" + key + "' appears outside a [section]");
      try {
        apply_config_value(cfg, section + "." + key, value);
      } catch (const Error& e) {
        fail(ErrorKind::config, here() + e.what());
      }
    }
  }
  for (const auto& [key, value] : overrides) apply_config_value(cfg, key, value);
  return cfg;
}

std::string render_config(const RunConfig& c) {
  std::ostringstream s;
  s << "[data]\n"
    << "n_samples = " << c.data.n_samples << "\n"
    << "seed = " << c.data.seed << "\n"
    << "out_dir = " << c.data.out_dir << "\n\n";
  s << "[train]\n"
    << "preset = " << c.train.preset << "\n"
    << "epochs = " << c.train.epochs << "\n"
    << "lr = " << num(c.train.lr) << "\n"
    << "batch_size = " << c.train.batch_size << "\n"
    << "seed = " << c.train.seed << "\n\n";
  s << "[quant]\n"
    << "calibration_n = " << c.quant.calibration_n << "\n\n";
  s << "[broker]\n"
    << "port = " << c.broker.port << "\n"
    << "retransmit_ms = " << c.broker.retransmit_ms << "\n\n";
  s << "[loop]\n"
    << "layers = " << c.loop.layers << "\n"
    << "sites = " << c.loop.sites << "\n"
    << "hot_threshold = " << num(c.loop.hot_threshold) << "\n"
    << "cold_threshold = " << num(c.loop.cold_threshold) << "\n"
    << "mode = " << c.loop.mode << "\n"
    << "controller = " << (c.loop.controller ? "on" : "off") << "\n"
    << "seed = " << c.loop.seed << "\n"
    << "power_w = " << num(c.loop.power_w) << "\n"
    << "speed_mm_s = " << num(c.loop.speed_mm_s) << "\n"
    << "feed = " << num(c.loop.feed) << "\n"
    << "node_id = " << c.loop.node_id << "\n";
  return s.str();
}

}  // namespace amqc
