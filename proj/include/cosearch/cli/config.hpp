#pragma once

#include "cosearch/das/das.hpp"
#include "cosearch/hwmodel/design.hpp"
#include "cosearch/nas/dns.hpp"
#include "cosearch/sigproc/stft.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosearch::cli {

// Field-level validation failures, one message per field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> fields);
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

// An upstream stage has not been run for this config.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Another command holds the run directory.
class RunLocked : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSection {
  std::string source = "synthetic";  // "synthetic" or "directory"
  int n_beats = 2000;
  std::int64_t patient_id = 0;
  std::optional<double> gain;      // overrides of the default patient model
  std::optional<double> noise_sd;
  std::string beat_dir;            // source == "directory"
  std::vector<int> egm_channels;   // empty: all five
};

struct TrainSection {
  int epochs = 40;
  int batch = 16;
  double lr = 1e-3;
  double weight_decay = 1e-3;
};

struct DasSection {
  das::DasConfig search;  // seed is taken from RunConfig::seed
  das::SpaceConfig space;
  hw::Platform platform;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DataSection data;
  sigproc::StftConfig stft;
  int width = 96;          // backbone channels
  nas::DnsConfig dns;      // seed is taken from RunConfig::seed
  TrainSection train;
  DasSection das;
  std::filesystem::path out = "run";
};

// Missing fields keep their defaults; unknown fields and bad values are
// collected and thrown together as ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
// Cross-field checks and path checks; throws ConfigError.
void validate(const RunConfig& cfg);

nlohmann::ordered_json to_json(const RunConfig& cfg);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

// Per-stage hashes. Each covers the config sections the stage reads plus the
// hash of its upstream stage, so changing e.g. the DAS objective leaves the
// network artifacts where they are.
struct StageHashes {
  std::string synth, net, train, acc, report;
};
StageHashes stage_hashes(const RunConfig& cfg);

}  // namespace cosearch::cli
