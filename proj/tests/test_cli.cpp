#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>
#include <sys/wait.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "amqc/client.hpp"
#include "amqc/commands.hpp"
#include "amqc/config.hpp"
#include "amqc/error.hpp"
#include "amqc/link.hpp"

using namespace amqc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / (tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(bool(f));
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  REQUIRE(bool(f));
  f << text;
}

// Relative path -> file bytes, for whole-tree identity checks.
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

std::string error_message(const std::function<void()>& fn, ErrorKind expect_kind) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.kind() == expect_kind);
    return e.what();
  }
  FAIL("expected an amqc::Error");
  return "";
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

std::vector<nlohmann::json> jsonl_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("defaults are the documented ones") {
  const RunConfig c = load_config("");
  CHECK(c == RunConfig{});
  CHECK(c.data.n_samples == 2000);
  CHECK(c.data.seed == 42);
  CHECK(c.data.out_dir == "data");
  CHECK(c.train.preset == "tiny");
  CHECK(c.train.epochs == 30);
  CHECK(c.train.lr == doctest::Approx(0.01));
  CHECK(c.train.batch_size == 32);
  CHECK(c.quant.calibration_n == 64);
  CHECK(c.broker.port == 1883);
  CHECK(c.broker.retransmit_ms == 200);
  CHECK(c.loop.layers == 200);
  CHECK(c.loop.sites == 500);
  CHECK(c.loop.mode == "model_only");
  CHECK(c.loop.controller);
  CHECK(c.loop.power_w == doctest::Approx(350.0));
  CHECK(c.loop.speed_mm_s == doctest::Approx(500.0));
  CHECK(c.loop.feed == doctest::Approx(1.0));
  CHECK(c.loop.node_id == 1);
}

TEST_CASE("file overrides defaults and flags override the file") {
  TempDir dir("amqc_cli_prec");
  const fs::path ini = dir.path / "run.ini";
  spit(ini,
       "# build configuration\n"
       "[train]\n"
       "epochs = 5   ; trailing comment\n"
       "lr = 0.02\n"
       "\n"
       "[loop]\n"
       "layers = 44\n");

  const RunConfig from_file = load_config(ini.string());
  CHECK(from_file.train.epochs == 5);
  CHECK(from_file.train.lr == doctest::Approx(0.02));
  CHECK(from_file.loop.layers == 44);
  CHECK(from_file.train.batch_size == 32);  // untouched default

  const RunConfig with_flag = load_config(ini.string(), {{"train.epochs", "7"}});
  CHECK(with_flag.train.epochs == 7);
  CHECK(with_flag.train.lr == doctest::Approx(0.02));  // file value survives
}

TEST_CASE("out-of-range values name the key and the documented bound") {
  RunConfig c;
  CHECK(contains(error_message([&] { apply_config_value(c, "loop.power_w", "400"); },
                               ErrorKind::config),
                 "loop.power_w"));
  CHECK(contains(error_message([&] { apply_config_value(c, "loop.power_w", "400"); },
                               ErrorKind::config),
                 "[150, 350]"));
  CHECK(contains(error_message([&] { apply_config_value(c, "loop.speed_mm_s", "400"); },
                               ErrorKind::config),
                 "[500, 1500]"));
  CHECK(contains(error_message([&] { apply_config_value(c, "loop.feed", "1.5"); },
                               ErrorKind::config),
                 "[0.8, 1.2]"));
  CHECK(contains(error_message([&] { apply_config_value(c, "train.lr", "0"); },
                               ErrorKind::config),
                 "(0, 1]"));
  CHECK(contains(error_message([&] { apply_config_value(c, "train.epochs", "0"); },
                               ErrorKind::config),
                 "[1, 1000]"));
  CHECK_THROWS_AS(apply_config_value(c, "data.seed", "-1"), Error);
  CHECK_THROWS_AS(apply_config_value(c, "loop.feed", "fast"), Error);

  // The same violation inside a file carries file:line context.
  TempDir dir("amqc_cli_bounds");
  const fs::path ini = dir.path / "bad.ini";
  spit(ini, "[loop]\npower_w = 400\n");
  const std::string msg =
      error_message([&] { load_config(ini.string()); }, ErrorKind::config);
  CHECK(contains(msg, ":2:"));
  CHECK(contains(msg, "[150, 350]"));
}

TEST_CASE("unknown keys, sections, and malformed lines are rejected") {
  RunConfig c;
  CHECK(contains(error_message([&] { apply_config_value(c, "train.momentum", "0.9"); },
                               ErrorKind::config),
                 "unknown key 'train.momentum'"));
  CHECK(contains(error_message([&] { apply_config_value(c, "train.preset", "medium"); },
                               ErrorKind::config),
                 "{tiny, full}"));
  CHECK(contains(error_message([&] { apply_config_value(c, "loop.controller", "yes"); },
                               ErrorKind::config),
                 "{on, off}"));
  CHECK(contains(error_message([&] { apply_config_value(c, "loop.mode", "hybrid"); },
                               ErrorKind::config),
                 "{model_only, full_pipeline}"));

  TempDir dir("amqc_cli_badfile");
  const auto expect_config_error = [&](const char* name, const std::string& text,
                                       const std::string& needle) {
    const fs::path p = dir.path / name;
    spit(p, text);
    CHECK(contains(error_message([&] { load_config(p.string()); }, ErrorKind::config), needle));
  };
  expect_config_error("sect.ini", "[solver]\ntol = 1\n", "unknown section");
  expect_config_error("noeq.ini", "[train]\nepochs 5\n", "key = value");
  expect_config_error("loose.ini", "epochs = 5\n", "outside a [section]");
  expect_config_error("open.ini", "[train\nepochs = 5\n", "unterminated");

  CHECK_THROWS_AS(load_config((dir.path / "missing.ini").string()), Error);
}

TEST_CASE("render_config round-trips through load_config") {
  RunConfig c;
  c.data.n_samples = 64;
  c.data.seed = 9;
  c.data.out_dir = "dsets";
  c.train.preset = "full";
  c.train.epochs = 3;
  c.train.lr = 0.25;
  c.train.batch_size = 16;
  c.train.seed = 11;
  c.quant.calibration_n = 32;
  c.broker.port = 0;
  c.broker.retransmit_ms = 50;
  c.loop.layers = 12;
  c.loop.sites = 9;
  c.loop.hot_threshold = 0.125;
  c.loop.cold_threshold = 0.0625;
  c.loop.mode = "full_pipeline";
  c.loop.controller = false;
  c.loop.seed = 77;
  c.loop.power_w = 151.5;
  c.loop.speed_mm_s = 1200.0;
  c.loop.feed = 0.9;
  c.loop.node_id = 42;

  TempDir dir("amqc_cli_render");
  const fs::path ini = dir.path / "echo.ini";
  spit(ini, render_config(c));
  const RunConfig back = load_config(ini.string());
  CHECK(back == c);
  CHECK(render_config(back) == render_config(c));  // rendering is stable
}

TEST_CASE("exit codes follow the status contract") {
  CHECK(error_exit_code(ErrorKind::config) == 2);
  CHECK(error_exit_code(ErrorKind::dependency) == 3);
  for (const ErrorKind k : {ErrorKind::invalid_argument, ErrorKind::shape, ErrorKind::format,
                            ErrorKind::numeric, ErrorKind::state, ErrorKind::protocol,
                            ErrorKind::io})
    CHECK(error_exit_code(k) == 4);
}

TEST_CASE("gen-data is byte-identical on repeat and self-describing") {
  TempDir dir("amqc_cli_gendata");
  RunConfig cfg;
  cfg.data.n_samples = 60;
  cfg.data.seed = 1;
  cfg.data.out_dir = (dir.path / "ds").string();

  std::ostringstream log;
  cmd_gen_data(cfg, log);
  const auto first = tree_bytes(dir.path / "ds");
  cmd_gen_data(cfg, log);
  const auto second = tree_bytes(dir.path / "ds");

  CHECK(first.size() == 2 * 60 + 1);  // pgm + xml per sample, plus the manifest
  CHECK(first == second);

  const auto manifest = nlohmann::json::parse(first.at("manifest.json"));
  CHECK(manifest.at("artifact") == "dataset");
  CHECK(manifest.at("samples") == 60);
  CHECK(manifest.at("config").at("data").at("seed") == 1);
  CHECK(contains(log.str(), "60 samples"));
}

TEST_CASE("smoke chain: gen-data, train, eval, quantize, bench, run-loop, report") {
  TempDir dir("amqc_cli_chain");
  RunConfig cfg;
  cfg.data.n_samples = 120;
  cfg.data.seed = 5;
  cfg.data.out_dir = (dir.path / "ds").string();
  cfg.train.preset = "tiny";
  cfg.train.epochs = 2;
  cfg.train.lr = 0.05;
  cfg.train.batch_size = 8;
  cfg.train.seed = 3;
  cfg.loop.layers = 8;
  cfg.loop.sites = 40;
  cfg.loop.seed = 13;
  const std::string run = (dir.path / "run").string();
  std::ostringstream log;

  // eval before train names the missing artifact and its producer
  const std::string missing =
      error_message([&] { cmd_eval(cfg, run, log); }, ErrorKind::dependency);
  CHECK(contains(missing, "model.bin"));
  CHECK(contains(missing, "train"));

  cmd_gen_data(cfg, log);
  cmd_train(cfg, run, log);
  CHECK(fs::exists(fs::path(run) / "model.bin"));
  const auto train_lines = jsonl_lines(slurp(fs::path(run) / "train_log.jsonl"));
  REQUIRE(train_lines.size() == 1 + 2 + 1);  // header, one line per epoch, summary
  CHECK(train_lines.front().at("artifact") == "train_log");
  CHECK(train_lines.front().at("config").at("train").at("epochs") == 2);
  CHECK(train_lines.back().contains("test_accuracy"));

  cmd_eval(cfg, run, log);
  const auto metric_lines = jsonl_lines(slurp(fs::path(run) / "metrics.jsonl"));
  REQUIRE(metric_lines.size() == 1 + 4 + 1);  // header, one per class, summary
  // 120 samples split 30 per class; a 4:1 split leaves 6 of each in the test set.
  uint64_t support_total = 0;
  for (size_t i = 1; i <= 4; ++i) {
    CHECK(metric_lines[i].at("support") == 6);
    support_total += metric_lines[i].at("support").get<uint64_t>();
  }
  CHECK(support_total == 24);
  CHECK(metric_lines.back().contains("accuracy"));

  cmd_quantize(cfg, run, log);
  CHECK(fs::exists(fs::path(run) / "model_q8.bin"));
  const auto qinfo = nlohmann::json::parse(slurp(fs::path(run) / "quantize.json"));
  const double agreement = qinfo.at("top1_agreement_test").get<double>();
  CHECK(agreement >= 0.0);
  CHECK(agreement <= 1.0);
  CHECK(qinfo.at("calibration_samples") == 64);

  cmd_bench(cfg, run, log);
  const auto bench_lines = jsonl_lines(slurp(fs::path(run) / "bench.jsonl"));
  REQUIRE(bench_lines.size() == 4);  // header, float, quantized, summary
  CHECK(bench_lines.front().contains("nondeterministic_fields"));
  CHECK(bench_lines[1].at("variant") == "float");
  CHECK(bench_lines[2].at("variant") == "quantized");
  CHECK(bench_lines.back().contains("reduction_pct"));

  cmd_run_loop(cfg, run, log);
  const std::string loop_first = slurp(fs::path(run) / "loop.jsonl");
  cmd_run_loop(cfg, run, log);
  CHECK(slurp(fs::path(run) / "loop.jsonl") == loop_first);  // deterministic artifact
  const auto loop_lines = jsonl_lines(loop_first);
  REQUIRE(loop_lines.size() == 1 + 8 + 1);
  CHECK(loop_lines.front().at("artifact") == "loop");
  CHECK(loop_lines.back().contains("defect_reduction_pct"));

  std::ostringstream rep;
  cmd_report(cfg, run, rep);
  CHECK(contains(rep.str(), "== training =="));
  CHECK(contains(rep.str(), "== evaluation =="));
  CHECK(contains(rep.str(), "== quantization =="));
  CHECK(contains(rep.str(), "== latency =="));
  CHECK(contains(rep.str(), "== closed loop =="));

  std::ostringstream empty_rep;
  CHECK_THROWS_AS(cmd_report(cfg, (dir.path / "nothing").string(), empty_rep), Error);
}

namespace {

// std::ostringstream is not safe to read while another thread writes; the
// broker command logs from its own thread, so the test needs a locked sink.
class SyncLogBuf : public std::streambuf {
public:
  std::string str() {
    std::lock_guard<std::mutex> lock(m_);
    return s_;
  }

protected:
  int_type overflow(int_type ch) override {
    if (ch != traits_type::eof()) {
      std::lock_guard<std::mutex> lock(m_);
      s_.push_back(static_cast<char>(ch));
    }
    return ch;
  }
  std::streamsize xsputn(const char* p, std::streamsize n) override {
    std::lock_guard<std::mutex> lock(m_);
    s_.append(p, static_cast<size_t>(n));
    return n;
  }

private:
  std::mutex m_;
  std::string s_;
};

}  // namespace

TEST_CASE("broker command serves TCP clients until told to stop") {
  RunConfig cfg;
  cfg.broker.port = 0;  // pick a free port
  cfg.broker.retransmit_ms = 100;

  SyncLogBuf buf;
  std::ostream log(&buf);
  std::atomic<bool> stop{false};
  std::thread server([&] { cmd_broker(cfg, log, &stop); });

  // The startup line is the only way to learn the ephemeral port.
  const std::string marker = "listening on 127.0.0.1:";
  uint16_t port = 0;
  for (int i = 0; i < 200 && port == 0; ++i) {
    const std::string s = buf.str();
    if (const auto at = s.find(marker); at != std::string::npos) {
      const auto end = s.find('\n', at);
      if (end != std::string::npos)
        port = static_cast<uint16_t>(std::stoi(s.substr(at + marker.size())));
    }
    if (port == 0) std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
  REQUIRE(port != 0);

  {
    std::mutex m;
    std::condition_variable cv;
    std::vector<uint8_t> got;
    Client sub(connect_tcp("127.0.0.1", port), "cli-sub");
    sub.subscribe("amqc/t", [&](const PublishPacket& p) {
      std::lock_guard<std::mutex> lock(m);
      got = p.payload;
      cv.notify_all();
    });
    Client pub(connect_tcp("127.0.0.1", port), "cli-pub");
    const std::vector<uint8_t> payload{0x61, 0x00, 0x62};
    pub.publish_qos1("amqc/t", payload);
    std::unique_lock<std::mutex> lock(m);
    REQUIRE(cv.wait_for(lock, std::chrono::seconds(5), [&] { return !got.empty(); }));
    CHECK(got == payload);
  }

  stop = true;
  server.join();
  CHECK(contains(buf.str(), "broker stopped:"));
  CHECK(contains(buf.str(), "2 connects"));
}

#ifdef AMQC_BIN

namespace {

int run_binary(const std::string& args, const fs::path& capture) {
  const std::string cmd =
      std::string(AMQC_BIN) + " " + args + " >" + capture.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("the installed binary maps errors to exit codes") {
  TempDir dir("amqc_cli_bin");
  const fs::path cap = dir.path / "out.txt";

  CHECK(run_binary("--help", cap) == 0);

  // unknown subcommand: nonzero, usage text
  CHECK(run_binary("frobnicate", cap) == 2);
  CHECK(contains(slurp(cap), "Usage"));

  // configuration error: exit 2, one-line machine-parsable message first
  CHECK(run_binary("run-loop --power-w 400 --out " + (dir.path / "x").string(), cap) == 2);
  CHECK(contains(slurp(cap), "error: config: loop.power_w = 400 out of range [150, 350]"));

  // missing upstream artifact: exit 3
  CHECK(run_binary("eval --out " + (dir.path / "fresh").string(), cap) == 3);
  CHECK(contains(slurp(cap), "error: dependency:"));
  CHECK(contains(slurp(cap), "model.bin"));

  // runtime/format error: exit 4 (torn artifact)
  fs::create_directories(dir.path / "torn");
  spit(dir.path / "torn" / "loop.jsonl", "not json\n");
  CHECK(run_binary("report --out " + (dir.path / "torn").string(), cap) == 4);
  CHECK(contains(slurp(cap), "error: format:"));

  // happy path: exit 0 and a dataset on disk
  const fs::path ds = dir.path / "ds";
  CHECK(run_binary("gen-data --n-samples 16 --seed 2 --out " + ds.string(), cap) == 0);
  CHECK(fs::exists(ds / "manifest.json"));
  CHECK(fs::exists(ds / "img_00015.pgm"));
}

#endif  // AMQC_BIN
