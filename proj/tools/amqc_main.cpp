#include <atomic>
#include <csignal>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "amqc/commands.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

// A per-command flag mirroring one dotted config key; values stay strings so
// every input funnels through the same config validator.
struct FlagBinding {
  CLI::App* cmd = nullptr;
  std::string flag;
  std::string key;
  std::shared_ptr<std::string> value;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surface-defect classification, MQTT telemetry, and closed-loop process control"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string seed;
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--out", out_dir, "artifact directory (for gen-data: the dataset directory)");
  app.add_option("--seed", seed, "override the data, train, and loop seeds at once");

  std::vector<FlagBinding> binds;
  auto bind = [&binds](CLI::App* cmd, const char* flag, const char* key, const char* desc) {
    auto value = std::make_shared<std::string>();
    cmd->add_option(flag, *value, desc);
    binds.push_back({cmd, flag, key, value});
  };

  CLI::App* gen = app.add_subcommand("gen-data", "render the synthetic defect dataset");
  bind(gen, "--n-samples", "data.n_samples", "sample count [8, 1000000]");

  CLI::App* train = app.add_subcommand("train", "train the classifier on the generated dataset");
  bind(train, "--data-dir", "data.out_dir", "dataset directory (from gen-data)");
  bind(train, "--preset", "train.preset", "architecture {tiny, full}");
  bind(train, "--epochs", "train.epochs", "epoch count [1, 1000]");
  bind(train, "--lr", "train.lr", "SGD learning rate (0, 1]");
  bind(train, "--batch-size", "train.batch_size", "mini-batch size [1, 1024]");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate the trained model on the test split");
  bind(eval_cmd, "--data-dir", "data.out_dir", "dataset directory (from gen-data)");

  CLI::App* quantize = app.add_subcommand("quantize", "post-training int8 quantization");
  bind(quantize, "--data-dir", "data.out_dir", "dataset directory (from gen-data)");
  bind(quantize, "--calibration-n", "quant.calibration_n",
       "calibration sample count [16, 100000]");

  CLI::App* bench = app.add_subcommand("bench", "latency benchmark of the float and int8 paths");
  bind(bench, "--batch-size", "train.batch_size", "mini-batch size [1, 1024]");

  CLI::App* broker = app.add_subcommand("broker", "serve the MQTT-subset broker until interrupted");
  bind(broker, "--port", "broker.port", "TCP port [0, 65535]; 0 picks a free port");
  bind(broker, "--retransmit-ms", "broker.retransmit_ms",
       "QoS-1 retransmit interval in ms [10, 60000]");

  CLI::App* run_loop = app.add_subcommand("run-loop", "closed-loop digital-twin build simulation");
  bind(run_loop, "--layers", "loop.layers", "build layers [2, 1000000]");
  bind(run_loop, "--sites", "loop.sites", "inspection sites per layer [1, 1000000]");
  bind(run_loop, "--mode", "loop.mode", "{model_only, full_pipeline}");
  bind(run_loop, "--controller", "loop.controller", "{on, off}");
  bind(run_loop, "--hot-threshold", "loop.hot_threshold", "cool_down trigger (0, 1]");
  bind(run_loop, "--cold-threshold", "loop.cold_threshold", "feed_correct trigger (0, 1]");
  bind(run_loop, "--power-w", "loop.power_w", "start laser power in W [150, 350]");
  bind(run_loop, "--speed-mm-s", "loop.speed_mm_s", "start scan speed in mm/s [500, 1500]");
  bind(run_loop, "--feed", "loop.feed", "start feed-rate factor [0.8, 1.2]");

  CLI::App* report = app.add_subcommand("report", "render human-readable artifact summaries");

  // Let the global --config/--out/--seed appear after the subcommand too.
  for (CLI::App* c : {gen, train, eval_cmd, quantize, bench, broker, run_loop, report})
    c->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: config: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    if (app.count("--seed") > 0) {
      overrides.emplace_back("data.seed", seed);
      overrides.emplace_back("train.seed", seed);
      overrides.emplace_back("loop.seed", seed);
    }
    if (app.count("--out") > 0 && gen->parsed()) overrides.emplace_back("data.out_dir", out_dir);
    for (const auto& b : binds)
      if (b.cmd->count(b.flag) > 0) overrides.emplace_back(b.key, *b.value);

    const amqc::RunConfig cfg = amqc::load_config(config_path, overrides);

    if (gen->parsed()) {
      amqc::cmd_gen_data(cfg, std::cout);
    } else if (train->parsed()) {
      amqc::cmd_train(cfg, out_dir, std::cout);
    } else if (eval_cmd->parsed()) {
      amqc::cmd_eval(cfg, out_dir, std::cout);
    } else if (quantize->parsed()) {
      amqc::cmd_quantize(cfg, out_dir, std::cout);
    } else if (bench->parsed()) {
      amqc::cmd_bench(cfg, out_dir, std::cout);
    } else if (broker->parsed()) {
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      amqc::cmd_broker(cfg, std::cout, &g_stop);
    } else if (run_loop->parsed()) {
      amqc::cmd_run_loop(cfg, out_dir, std::cout);
    } else if (report->parsed()) {
      amqc::cmd_report(cfg, out_dir, std::cout);
    }
    return 0;
  } catch (const amqc::Error& e) {
    std::cerr << "error: " << amqc::error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return amqc::error_exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 4;
  }
}
