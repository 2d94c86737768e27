#pragma once

#include "cosearch/cli/config.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace cosearch::cli {

using Log = std::function<void(const std::string&)>;

// Artifact locations for one config. Every file name carries the hash of the
// stage that produced it.
struct Artifacts {
  explicit Artifacts(const RunConfig& cfg);

  StageHashes hash;
  std::filesystem::path dir;
  std::filesystem::path beats, patient;                          // synth
  std::filesystem::path network, alpha_trace, search_history;    // search-net
  std::filesystem::path checkpoint, train, train_loss, correlation;  // train (checkpoint is a stem)
  std::filesystem::path design, layer_cost, das_trace;           // search-acc
  std::filesystem::path summary, stage_cycles, alpha_final, config;  // report
};

// Exclusive lock on a run directory (creates the directory). Throws RunLocked
// when the lock file already exists.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path file_;
};

// Each command reads its upstream artifacts (MissingArtifact if absent) and
// rewrites its own outputs; reruns with the same config give identical files.
void cmd_synth(const RunConfig& cfg, const Log& log);
void cmd_search_net(const RunConfig& cfg, const Log& log);
void cmd_train(const RunConfig& cfg, const Log& log);
void cmd_search_acc(const RunConfig& cfg, const Log& log);
// Returns the summary CSV path.
std::filesystem::path cmd_report(const RunConfig& cfg, const Log& log);
std::filesystem::path cmd_all(const RunConfig& cfg, const Log& log);

// Validates, locks the run directory and dispatches on the verb
// (synth | search-net | train | search-acc | report | all).
void run_command(const std::string& verb, const RunConfig& cfg, const Log& log);

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingArtifact = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitLocked = 5;

}  // namespace cosearch::cli
