#pragma once

#include <atomic>
#include <iosfwd>
#include <string>

#include "amqc/config.hpp"
#include "amqc/error.hpp"

namespace amqc {

// Subcommand bodies. Each throws amqc::Error on failure; progress and
// human-readable results go to `log`. Artifacts land in `out_dir` except for
// gen-data, which owns cfg.data.out_dir. Missing upstream artifacts raise
// dependency errors naming the file.
void cmd_gen_data(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
void cmd_eval(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
void cmd_quantize(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
void cmd_bench(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
// Serves cfg.broker.port until *stop becomes true (never, when stop is null).
void cmd_broker(const RunConfig& cfg, std::ostream& log,
                const std::atomic<bool>* stop = nullptr);
void cmd_run_loop(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
void cmd_report(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);

// Exit-status contract: 0 success, 2 configuration, 3 dependency, 4 anything
// else (runtime, numeric, protocol, io, ...).
int error_exit_code(ErrorKind kind);

}  // namespace amqc
