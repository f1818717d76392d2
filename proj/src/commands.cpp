#include "amqc/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "amqc/broker.hpp"
#include "amqc/datagen.hpp"
#include "amqc/metrics.hpp"
#include "amqc/quant.hpp"
#include "amqc/train.hpp"
#include "amqc/twin.hpp"

namespace amqc {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["data"] = {{"n_samples", c.data.n_samples}, {"seed", c.data.seed}, {"out_dir", c.data.out_dir}};
  j["train"] = {{"preset", c.train.preset},
                {"epochs", c.train.epochs},
                {"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed}};
  j["quant"] = {{"calibration_n", c.quant.calibration_n}};
  j["broker"] = {{"port", c.broker.port}, {"retransmit_ms", c.broker.retransmit_ms}};
  j["loop"] = {{"layers", c.loop.layers},
               {"sites", c.loop.sites},
               {"hot_threshold", c.loop.hot_threshold},
               {"cold_threshold", c.loop.cold_threshold},
               {"mode", c.loop.mode},
               {"controller", c.loop.controller ? "on" : "off"},
               {"seed", c.loop.seed},
               {"power_w", c.loop.power_w},
               {"speed_mm_s", c.loop.speed_mm_s},
               {"feed", c.loop.feed},
               {"node_id", c.loop.node_id}};
  return j;
}

std::string artifact_header(const char* name, const RunConfig& cfg) {
  ordered_json j;
  j["artifact"] = name;
  j["config"] = config_json(cfg);
  return j.dump() + "\n";
}

std::string sample_stem(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05zu", i);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(ErrorKind::io, "short write to " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void require_file(const fs::path& path, const char* producer) {
  if (!fs::exists(path))
    fail(ErrorKind::dependency,
         "missing " + path.string() + " (run `amqc " + producer + "` first)");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

ordered_json parse_json(const std::string& text, const fs::path& origin) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, origin.string() + ": " + e.what());
  }
}

SampleSet load_dataset(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  require_file(manifest_path, "gen-data");
  const ordered_json manifest = parse_json(read_file(manifest_path), manifest_path);
  SampleSet set;
  size_t n = 0;
  try {
    n = manifest.at("samples").get<size_t>();
    set.seed = manifest.at("config").at("data").at("seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, manifest_path.string() + ": " + e.what());
  }
  for (size_t i = 0; i < n; ++i) {
    const std::string stem = sample_stem(i);
    const fs::path pgm = fs::path(dir) / (stem + ".pgm");
    const fs::path xml = fs::path(dir) / (stem + ".xml");
    require_file(pgm, "gen-data");
    require_file(xml, "gen-data");
    GrayImage img = read_pgm(pgm);
    const Annotation ann = annotation_from_xml(read_file(xml));
    ++set.class_counts[static_cast<size_t>(ann.class_id)];
    set.samples.emplace_back(std::move(img), ann);
  }
  return set;
}

Network load_model(const RunConfig& cfg, const fs::path& out_dir) {
  Network net = make_preset(cfg.train.preset);
  const fs::path path = out_dir / "model.bin";
  require_file(path, "train");
  load_weights(net, path.string());
  return net;
}

ConfusionMatrix confusion_on(const Network& net, const DataSet& ds) {
  ConfusionMatrix cm(net.class_count);
  for (size_t i = 0; i < ds.size(); ++i) {
    const Tensor p = forward_sample(net, ds.inputs[i]);
    cm.accumulate(static_cast<size_t>(ds.labels[i]), argmax_index(p));
  }
  return cm;
}

struct SplitSets {
  DataSet train;
  DataSet test;
};

SplitSets load_split(const RunConfig& cfg, const Network& net) {
  const SampleSet set = load_dataset(cfg.data.out_dir);
  auto [tr, te] = split_dataset(set, 4, 1, cfg.train.seed);
  const int h = static_cast<int>(net.input_shape[1]);
  const int w = static_cast<int>(net.input_shape[2]);
  return {to_dataset(tr, h, w), to_dataset(te, h, w)};
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  const SampleSet set = make_dataset(cfg.data.n_samples, cfg.data.seed);
  make_dir(cfg.data.out_dir);
  for (size_t i = 0; i < set.samples.size(); ++i) {
    const std::string stem = sample_stem(i);
    const auto& [img, ann] = set.samples[i];
    write_pgm(img, fs::path(cfg.data.out_dir) / (stem + ".pgm"));
    write_file(fs::path(cfg.data.out_dir) / (stem + ".xml"),
               annotation_to_xml(ann, stem + ".pgm"));
  }
  ordered_json manifest;
  manifest["artifact"] = "dataset";
  manifest["config"] = config_json(cfg);
  manifest["samples"] = set.samples.size();
  manifest["class_counts"] = set.class_counts;
  write_file(fs::path(cfg.data.out_dir) / "manifest.json", manifest.dump() + "\n");
  log << "wrote " << set.samples.size() << " samples to " << cfg.data.out_dir
      << " (crack/pinhole/hole/spatter = " << set.class_counts[0] << "/" << set.class_counts[1]
      << "/" << set.class_counts[2] << "/" << set.class_counts[3] << ")\n";
}

void cmd_train(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  Network net = make_preset(cfg.train.preset);
  SplitSets ds = load_split(cfg, net);
  init_params(net, cfg.train.seed);
  const TrainConfig tc{cfg.train.lr, cfg.train.batch_size, cfg.train.epochs, cfg.train.seed};

  std::string lines = artifact_header("train_log", cfg);
  train(net, ds.train, tc, [&](const EpochStats& st) {
    ordered_json j;
    j["epoch"] = st.epoch;
    j["mean_loss"] = st.mean_loss;
    lines += j.dump() + "\n";
    log << "epoch " << (st.epoch + 1) << "/" << cfg.train.epochs << "  mean loss " << st.mean_loss
        << std::endl;
  });

  const double train_acc = accuracy(confusion_on(net, ds.train));
  const double test_acc = accuracy(confusion_on(net, ds.test));
  make_dir(out_dir);
  save_weights(net, (fs::path(out_dir) / "model.bin").string());
  ordered_json summary;
  summary["train_accuracy"] = train_acc;
  summary["test_accuracy"] = test_acc;
  summary["weights"] = "model.bin";
  lines += summary.dump() + "\n";
  write_file(fs::path(out_dir) / "train_log.jsonl", lines);
  log << "wrote " << (fs::path(out_dir) / "model.bin").string() << "  (train accuracy "
      << train_acc << ", test accuracy " << test_acc << ")\n";
}

void cmd_eval(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  const Network net = load_model(cfg, out_dir);
  SplitSets ds = load_split(cfg, net);
  const MetricsReport report = build_report(confusion_on(net, ds.test));
  make_dir(out_dir);
  write_file(fs::path(out_dir) / "metrics.jsonl",
             artifact_header("metrics", cfg) + render_report_jsonl(report));
  log << render_report_text(report);
}

void cmd_quantize(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  const Network net = load_model(cfg, out_dir);
  SplitSets ds = load_split(cfg, net);
  const size_t n_calib = std::min(cfg.quant.calibration_n, ds.train.size());
  const std::vector<Tensor> calib_inputs(ds.train.inputs.begin(),
                                         ds.train.inputs.begin() + static_cast<long>(n_calib));
  const Calibration calib = calibrate(net, calib_inputs);
  const QuantizedNetwork qnet = quantize_network(net, calib);
  make_dir(out_dir);
  save_qnetwork(qnet, (fs::path(out_dir) / "model_q8.bin").string());
  const double agreement = top1_agreement(net, qnet, ds.test.inputs);

  ordered_json j;
  j["artifact"] = "quantize";
  j["config"] = config_json(cfg);
  j["weights"] = "model_q8.bin";
  j["calibration_samples"] = n_calib;
  j["input_scale"] = qnet.input_qp.scale;
  j["input_zero_point"] = qnet.input_qp.zero_point;
  j["top1_agreement_test"] = agreement;
  write_file(fs::path(out_dir) / "quantize.json", j.dump() + "\n");
  log << "wrote " << (fs::path(out_dir) / "model_q8.bin").string()
      << "  (top-1 agreement on the test split: " << agreement << ")\n";
}

void cmd_bench(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  const Network net = load_model(cfg, out_dir);
  const fs::path qpath = fs::path(out_dir) / "model_q8.bin";
  require_file(qpath, "quantize");
  const QuantizedNetwork qnet = load_qnetwork(qpath.string());

  const size_t frames = 128;
  const LatencyReport rf = bench_latency(net, cfg.train.batch_size, frames);
  log << "float:     " << rf.mean_ms << " ms/frame  (" << rf.fps << " fps, p95 " << rf.p95_ms
      << " ms)" << std::endl;
  const LatencyReport rq = bench_latency(qnet, cfg.train.batch_size, frames);
  log << "quantized: " << rq.mean_ms << " ms/frame  (" << rq.fps << " fps, p95 " << rq.p95_ms
      << " ms)" << std::endl;
  const double reduction = reduction_pct(rf.mean_ms, rq.mean_ms);
  log << "latency reduction: " << reduction << "%\n";

  ordered_json header;
  header["artifact"] = "bench";
  header["config"] = config_json(cfg);
  header["nondeterministic_fields"] = {"mean_ms", "p50_ms", "p95_ms", "fps", "reduction_pct"};
  ordered_json summary;
  summary["reduction_pct"] = reduction;
  make_dir(out_dir);
  write_file(fs::path(out_dir) / "bench.jsonl",
             header.dump() + "\n" + latency_report_json(rf) + "\n" + latency_report_json(rq) +
                 "\n" + summary.dump() + "\n");
}

void cmd_broker(const RunConfig& cfg, std::ostream& log, const std::atomic<bool>* stop) {
  BrokerOptions opt;
  opt.retransmit_interval = std::chrono::milliseconds(cfg.broker.retransmit_ms);
  Broker broker(opt);
  broker.start_tcp(cfg.broker.port);
  log << "broker listening on 127.0.0.1:" << broker.port() << std::endl;
  while (stop == nullptr || !stop->load())
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  broker.stop();
  const BrokerStats st = broker.stats();
  log << "broker stopped: " << st.connects << " connects, " << st.publishes << " publishes, "
      << st.forwarded << " forwarded, " << st.retransmits << " retransmits, " << st.malformed
      << " malformed" << std::endl;
}

void cmd_run_loop(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  LoopConfig lc;
  lc.layers = cfg.loop.layers;
  lc.sites_per_layer = cfg.loop.sites;
  lc.seed = cfg.loop.seed;
  lc.controller_on = cfg.loop.controller;
  lc.mode = cfg.loop.mode == "full_pipeline" ? LoopConfig::Mode::full_pipeline
                                             : LoopConfig::Mode::model_only;
  lc.start.laser_power_w = cfg.loop.power_w;
  lc.start.scan_speed_mm_s = cfg.loop.speed_mm_s;
  lc.start.feed_rate_rel = cfg.loop.feed;
  lc.thresholds = {cfg.loop.hot_threshold, cfg.loop.cold_threshold};
  lc.node_id = cfg.loop.node_id;

  std::optional<Network> net;
  std::optional<Broker> broker;
  if (lc.mode == LoopConfig::Mode::full_pipeline) {
    net.emplace(load_model(cfg, out_dir));
    BrokerOptions opt;
    opt.retransmit_interval = std::chrono::milliseconds(cfg.broker.retransmit_ms);
    broker.emplace(std::move(opt));
    lc.net = &*net;
    lc.broker = &*broker;
  }

  const LoopReport rep = run_closed_loop(lc);
  make_dir(out_dir);
  write_file(fs::path(out_dir) / "loop.jsonl", artifact_header("loop", cfg) + loop_report_jsonl(rep));
  log << rep.layers.size() << " layers at " << rep.sites_per_layer
      << " sites: " << rep.baseline_defect_rate << " -> " << rep.final_defect_rate
      << " defects/layer (" << rep.defect_reduction_pct << "% reduction); " << rep.actions_taken
      << " actions, " << rep.actions_improved << " improved (" << rep.correction_rate_pct
      << "% correction rate)\n";
}

void cmd_report(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  (void)cfg;
  const fs::path dir(out_dir);
  bool any = false;

  auto lines_of = [&](const fs::path& p) {
    std::vector<ordered_json> out;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) out.push_back(parse_json(line, p));
    return out;
  };

  if (fs::exists(dir / "train_log.jsonl")) {
    any = true;
    const auto lines = lines_of(dir / "train_log.jsonl");
    log << "== training ==\n";
    size_t epochs = 0;
    double last_loss = 0.0;
    for (const auto& j : lines)
      if (j.contains("epoch")) {
        ++epochs;
        last_loss = j.at("mean_loss").get<double>();
      }
    log << "epochs: " << epochs << ", final mean loss: " << last_loss << "\n";
    const auto& tail = lines.back();
    if (tail.contains("test_accuracy"))
      log << "train accuracy: " << tail.at("train_accuracy").get<double>()
          << ", test accuracy: " << tail.at("test_accuracy").get<double>() << "\n";
  }

  if (fs::exists(dir / "metrics.jsonl")) {
    any = true;
    log << "== evaluation ==\n";
    MetricsReport rep;
    for (const auto& j : lines_of(dir / "metrics.jsonl")) {
      if (j.contains("class_id")) {
        rep.per_class.push_back({j.at("precision").get<double>(), j.at("recall").get<double>(),
                                 j.at("f1").get<double>()});
        rep.support.push_back(j.at("support").get<uint64_t>());
      } else if (j.contains("accuracy")) {
        rep.accuracy = j.at("accuracy").get<double>();
        rep.macro = {j.at("macro_precision").get<double>(), j.at("macro_recall").get<double>(),
                     j.at("macro_f1").get<double>()};
      }
    }
    rep.k = rep.per_class.size();
    log << render_report_text(rep);
  }

  if (fs::exists(dir / "quantize.json")) {
    any = true;
    const auto j = parse_json(read_file(dir / "quantize.json"), dir / "quantize.json");
    log << "== quantization ==\n"
        << "top-1 agreement (test): " << j.at("top1_agreement_test").get<double>() << "\n";
  }

  if (fs::exists(dir / "bench.jsonl")) {
    any = true;
    log << "== latency ==\n";
    for (const auto& j : lines_of(dir / "bench.jsonl")) {
      if (j.contains("variant"))
        log << j.at("variant").get<std::string>() << ": " << j.at("mean_ms").get<double>()
            << " ms/frame, " << j.at("fps").get<double>() << " fps (batch "
            << j.at("batch_size").get<size_t>() << ")\n";
      else if (j.contains("reduction_pct"))
        log << "latency reduction: " << j.at("reduction_pct").get<double>() << "%\n";
    }
  }

  if (fs::exists(dir / "loop.jsonl")) {
    any = true;
    log << "== closed loop ==\n";
    const auto lines = lines_of(dir / "loop.jsonl");
    const auto& s = lines.back();
    if (s.contains("defect_reduction_pct"))
      log << s.at("layers").get<size_t>()
          << " layers, defect reduction: " << s.at("defect_reduction_pct").get<double>()
          << "%, correction rate: " << s.at("correction_rate_pct").get<double>() << "%\n";
  }

  if (!any)
    fail(ErrorKind::dependency,
         "no artifacts in '" + out_dir +
             "' (expected train_log.jsonl, metrics.jsonl, quantize.json, bench.jsonl, or "
             "loop.jsonl)");
}

int error_exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::dependency: return 3;
    default: return 4;
  }
}

}  // namespace amqc
