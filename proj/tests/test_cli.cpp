#include "cosearch/cli/commands.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace cosearch;
using namespace cosearch::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("cosearch_test_cli_" + name);
  fs::remove_all(d);
  return d;
}

RunConfig tiny(const fs::path& out) {
  auto cfg = config_from_json(json::parse(R"({
    "data": {"n_beats": 16}, "width": 4,
    "dns": {"steps": 3}, "train": {"epochs": 1}, "das": {"steps": 200}})"));
  cfg.out = out;
  return cfg;
}

const Log quiet = [](const std::string&) {};

std::vector<std::string> errors_of(const std::string& text) {
  try {
    validate(config_from_json(json::parse(text)));
  } catch (const ConfigError& e) {
    return e.fields();
  }
  return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& field) {
  for (const auto& e : errs)
    if (e.rfind(field + ":", 0) == 0) return true;
  return false;
}

}  // namespace

TEST_CASE("config defaults follow the training setup") {
  const auto cfg = config_from_json(json::object());
  CHECK(cfg.dns.batch == 16);
  CHECK(cfg.dns.lr == 1e-3);
  CHECK(cfg.dns.weight_decay == 1e-3);
  CHECK(cfg.dns.alpha_lr == 1e-3);
  CHECK(cfg.dns.tau == 1.0);
  CHECK(cfg.train.batch == 16);
  CHECK(cfg.width == 96);
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("config round trip through json") {
  const auto cfg = config_from_json(json::parse(R"({
    "seed": 7, "data": {"n_beats": 100, "egm_channels": [0, 3], "noise_sd": 0.0},
    "dns": {"lambda": 10, "depth_limit": 15, "mac_term": "sampled"},
    "das": {"objective": "startup", "space": {"nocs": ["KERNEL_PARALLEL"], "pe_menu": [4, 8],
            "tiled_dims": ["M", "C"], "order_slots": 2}, "platform": {"dram_bw": 8}}})"));
  CHECK(cfg.dns.seed == 7);
  CHECK(cfg.das.search.seed == 7);
  CHECK(cfg.dns.depth_limit == 15);
  CHECK(cfg.das.space.tiled_dims == std::array<bool, 6>{true, true, false, false, false, false});
  CHECK(cfg.das.platform.dram_bw == 8);
  const auto again = config_from_json(json::parse(to_json(cfg).dump()));
  CHECK(to_json(again).dump() == to_json(cfg).dump());
}

TEST_CASE("config errors name every bad field") {
  auto e = errors_of(R"({"sed": 1, "dns": {"lambda": "big"}, "das": {"objective": "speed", "space": {"nocs": ["RING"]}}})");
  CHECK(mentions(e, "sed"));
  CHECK(mentions(e, "dns.lambda"));
  CHECK(mentions(e, "das.objective"));
  CHECK(mentions(e, "das.space.nocs"));

  e = errors_of(R"({"data": {"source": "directory"}, "dns": {"depth_limit": 3, "tau": 0},
                    "stft": {"window_len": 32}})");
  CHECK(mentions(e, "data.beat_dir"));
  CHECK(mentions(e, "dns.depth_limit"));
  CHECK(mentions(e, "dns.tau"));
  CHECK(mentions(e, "stft.window_len"));

  e = errors_of(R"({"data": {"egm_channels": [0, 5, 0]}, "das": {"space": {"pe_menu": [2000]}}})");
  CHECK(mentions(e, "data.egm_channels"));
  CHECK(mentions(e, "das.space.pe_menu"));
  CHECK(errors_of("{}").empty());
}

TEST_CASE("stage hashes") {
  const auto base = config_from_json(json::object());
  const auto h = stage_hashes(base);
  CHECK(h.synth.size() == 12);

  auto cfg = base;
  cfg.das.search.objective = das::Objective::startup;
  auto g = stage_hashes(cfg);
  CHECK(g.synth == h.synth);
  CHECK(g.net == h.net);
  CHECK(g.train == h.train);
  CHECK(g.acc != h.acc);
  CHECK(g.report != h.report);

  cfg = base;
  cfg.train.epochs = 3;
  g = stage_hashes(cfg);
  CHECK(g.net == h.net);
  CHECK(g.acc == h.acc);
  CHECK(g.train != h.train);

  cfg = base;
  cfg.out = "/elsewhere";
  CHECK(stage_hashes(cfg).report == h.report);

  cfg = base;
  cfg.seed = 1;
  g = stage_hashes(cfg);
  CHECK(g.synth != h.synth);
  CHECK(g.acc != h.acc);

  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("missing upstream artifacts name the stage") {
  const auto cfg = tiny(fresh_dir("missing"));
  fs::create_directories(cfg.out);
  try {
    cmd_search_net(cfg, quiet);
    FAIL("expected MissingArtifact");
  } catch (const MissingArtifact& e) {
    CHECK(std::string(e.what()).find("synth") != std::string::npos);
  }
  try {
    cmd_search_acc(cfg, quiet);
    FAIL("expected MissingArtifact");
  } catch (const MissingArtifact& e) {
    CHECK(std::string(e.what()).find("search-net") != std::string::npos);
  }
  CHECK_THROWS_AS(cmd_report(cfg, quiet), MissingArtifact);
}

TEST_CASE("run directory lock") {
  const auto dir = fresh_dir("lock");
  {
    RunLock a(dir);
    CHECK(fs::exists(dir / ".lock"));
    CHECK_THROWS_AS(RunLock{dir}, RunLocked);
    auto cfg = tiny(dir);
    CHECK_THROWS_AS(run_command("synth", cfg, quiet), RunLocked);
  }
  CHECK_FALSE(fs::exists(dir / ".lock"));
  CHECK_NOTHROW(RunLock{dir});
}

TEST_CASE("pipeline is deterministic and leaves upstream artifacts alone") {
  const auto a = tiny(fresh_dir("det_a"));
  const auto b = tiny(fresh_dir("det_b"));
  run_command("all", a, quiet);
  run_command("all", b, quiet);
  const Artifacts fa(a), fb(b);
  REQUIRE(fs::exists(fa.summary));
  CHECK(fa.summary.filename().string().find(fa.hash.report) != std::string::npos);
  const auto summary = slurp(fa.summary);
  CHECK(summary == slurp(fb.summary));
  CHECK(summary.rfind("config_hash,mean_test_pearson,network_macs,network_depth,das_objective,feasible,fps,"
                      "startup_ms\n", 0) == 0);

  // rerun in place: same bytes
  const auto network = slurp(fa.network);
  run_command("all", a, quiet);
  CHECK(slurp(fa.summary) == summary);
  CHECK(slurp(fa.network) == network);

  // a different DAS objective writes new files next to the old ones
  auto s = a;
  s.das.search.objective = das::Objective::startup;
  run_command("search-acc", s, quiet);
  run_command("report", s, quiet);
  const Artifacts fs_(s);
  CHECK(fs_.design != fa.design);
  CHECK(fs::exists(fa.design));
  CHECK(slurp(fa.network) == network);
  CHECK(slurp(fa.summary) == summary);
  const auto startup_summary = slurp(fs_.summary);
  CHECK(startup_summary.find(",startup,") != std::string::npos);
}

TEST_CASE("startup objective does not lose on start-up latency") {
  auto f = tiny(fresh_dir("objective"));
  f.das.search.steps = das::DasConfig{}.steps;
  run_command("all", f, quiet);
  auto s = f;
  s.das.search.objective = das::Objective::startup;
  run_command("search-acc", s, quiet);
  const auto jf = json::parse(slurp(Artifacts(f).design));
  const auto js = json::parse(slurp(Artifacts(s).design));
  MESSAGE("fps mode: fps " << jf["fps"] << " startup " << jf["startup_s"]);
  MESSAGE("startup mode: fps " << js["fps"] << " startup " << js["startup_s"]);
  CHECK(js["startup_s"].get<double>() <= jf["startup_s"].get<double>());
  CHECK(jf["fps"].get<double>() >= js["fps"].get<double>());
}
