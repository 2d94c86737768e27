#include "cosearch/cli/commands.hpp"

#include "cosearch/autodiff/checkpoint.hpp"
#include "cosearch/datasynth/generator.hpp"
#include "cosearch/sigproc/beat_io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cosearch::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kLeadNames[sigproc::kEcgChannels] = {"I",   "II",  "III", "aVR", "aVL", "aVF",
                                                           "V1",  "V2",  "V3",  "V4",  "V5",  "V6"};

// Writes to a sibling temp file and renames, so a crash never leaves a
// half-written artifact under its final name.
void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << text;
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path, const char* stage) {
  if (!fs::exists(path))
    throw MissingArtifact(path.string() + " not found; run `" + stage + "` with this config first");
  std::ifstream is(path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw MissingArtifact(path.string() + " is unreadable (" + e.what() + "); rerun `" + stage + "`");
  }
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::vector<int> egm_channels(const RunConfig& cfg) {
  if (!cfg.data.egm_channels.empty()) return cfg.data.egm_channels;
  std::vector<int> all;
  for (int c = 0; c < sigproc::kEgmChannels; ++c) all.push_back(c);
  return all;
}

sigproc::Dataset load_dataset(const RunConfig& cfg, const Artifacts& a) {
  fs::path dir = a.beats;
  if (cfg.data.source == "directory") dir = cfg.data.beat_dir;
  else if (!fs::exists(dir / "index.csv"))
    throw MissingArtifact("beat directory " + dir.string() + " not found; run `synth` with this config first");
  auto ds = sigproc::read_beat_directory(dir);
  if (ds.train.empty() && ds.test.empty()) sigproc::split_halves(ds, cfg.seed);
  if (ds.train.empty() || ds.test.empty())
    throw ConfigError({"data: " + dir.string() + " yields an empty train or test split"});
  return ds;
}

nas::GridData load_grids(const RunConfig& cfg, const Artifacts& a) {
  return nas::prepare_grids(load_dataset(cfg, a), egm_channels(cfg), cfg.stft);
}

nas::NetworkSpec base_spec(const RunConfig& cfg) {
  auto spec = nas::NetworkSpec::uniform(nas::OpKind::skip);
  spec.in_channels = 2 * static_cast<int>(egm_channels(cfg).size());
  spec.width = cfg.width;
  return spec;
}

nas::NetworkSpec load_network(const Artifacts& a) {
  return nas::spec_from_json(read_json(a.network, "search-net"));
}

}  // namespace

Artifacts::Artifacts(const RunConfig& cfg) : hash(stage_hashes(cfg)), dir(cfg.out) {
  auto f = [&](const std::string& stem, const std::string& h, const char* ext) {
    return dir / (stem + "_" + h + ext);
  };
  beats = f("beats", hash.synth, "");
  patient = f("patient", hash.synth, ".json");
  network = f("network", hash.net, ".json");
  alpha_trace = f("alpha_trace", hash.net, ".csv");
  search_history = f("search_history", hash.net, ".csv");
  checkpoint = f("checkpoint", hash.train, "");
  train = f("train", hash.train, ".json");
  train_loss = f("train_loss", hash.train, ".csv");
  correlation = f("correlation", hash.train, ".csv");
  design = f("design", hash.acc, ".json");
  layer_cost = f("layer_cost", hash.acc, ".csv");
  das_trace = f("das_trace", hash.acc, ".csv");
  summary = f("summary", hash.report, ".csv");
  stage_cycles = f("stage_cycles", hash.report, ".csv");
  alpha_final = f("alpha_final", hash.report, ".csv");
  config = f("config", hash.report, ".json");
}

RunLock::RunLock(const fs::path& dir) {
  fs::create_directories(dir);
  file_ = dir / ".lock";
  const int fd = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw RunLocked("run directory " + dir.string() + " is locked by another command (" + file_.string() +
                    "); delete the file if no command is running");
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

void cmd_synth(const RunConfig& cfg, const Log& log) {
  const Artifacts a(cfg);
  if (cfg.data.source == "directory") {
    log("[synth] data.source is \"directory\"; reading " + cfg.data.beat_dir + ", nothing to generate");
    return;
  }
  auto model = datasynth::default_model(cfg.seed, cfg.data.patient_id);
  if (cfg.data.gain) model.gain = *cfg.data.gain;
  if (cfg.data.noise_sd) model.noise_sd = *cfg.data.noise_sd;
  model.validate();
  const auto ds = datasynth::gen_dataset(model, cfg.data.n_beats);
  // rebuild from scratch so stale beats never survive a rerun
  fs::remove_all(a.beats);
  sigproc::write_beat_directory(a.beats, ds);
  write_json(a.patient, datasynth::to_json(model));
  for (int c = 0; c < sigproc::kEgmChannels; ++c)
    if (datasynth::weak_egm_channel(model, c))
      log("[synth] warning: EGM channel " + std::to_string(c) + " carries little signal");
  log("[synth] " + std::to_string(ds.beats.size()) + " beats -> " + a.beats.string());
}

void cmd_search_net(const RunConfig& cfg, const Log& log) {
  const Artifacts a(cfg);
  const auto data = load_grids(cfg, a);
  const auto base = base_spec(cfg);
  const int total = cfg.dns.steps;
  const auto res = nas::run_search(data, base, cfg.dns, [&](const nas::StepStats& s) {
    if ((s.step + 1) % 50 == 0 || s.step + 1 == total)
      log("[search-net] step " + std::to_string(s.step + 1) + "/" + std::to_string(total) +
          " loss " + num(s.loss_rec) + " GMACs " + num(s.gmacs) + " lambda " + num(s.lambda));
  });

  auto j = nas::to_json(res.spec);
  ordered_json meta;
  meta["config_hash"] = a.hash.net;
  meta["macs"] = nas::network_macs(res.spec);
  meta["depth"] = res.spec.depth();
  meta["steps_run"] = res.steps_run;
  meta["final_lambda"] = res.final_lambda;
  meta["depth_satisfied"] = res.depth_satisfied;
  meta["lambda_changes"] = ordered_json::array();
  for (const auto& [step, l] : res.lambda_changes) meta["lambda_changes"].push_back({step, l});
  meta["alpha"] = res.alpha;
  j["search"] = meta;
  write_json(a.network, j);
  nas::write_alpha_trace(a.alpha_trace, res.trace);

  std::ostringstream h;
  h << "step,loss_rec,gmacs,lambda,degenerate\n";
  for (const auto& s : res.history)
    h << s.step << "," << num(s.loss_rec) << "," << num(s.gmacs) << "," << num(s.lambda) << ","
      << (s.degenerate ? 1 : 0) << "\n";
  write_text(a.search_history, h.str());

  std::string ops;
  for (auto op : res.spec.blocks) ops += std::string(" ") + nas::op_name(op);
  log("[search-net] derived:" + ops);
  log("[search-net] MACs " + std::to_string(nas::network_macs(res.spec)) + ", depth " +
      std::to_string(res.spec.depth()) + (res.depth_satisfied ? "" : " (depth limit NOT met)"));
}

void cmd_train(const RunConfig& cfg, const Log& log) {
  const Artifacts a(cfg);
  const auto spec = load_network(a);
  const auto data = load_grids(cfg, a);
  nas::TrainConfig tc;
  tc.epochs = cfg.train.epochs;
  tc.batch = cfg.train.batch;
  tc.lr = cfg.train.lr;
  tc.weight_decay = cfg.train.weight_decay;
  tc.seed = cfg.seed;
  const auto res = nas::train_network(spec, data, tc, [&](int e, double l) {
    log("[train] epoch " + std::to_string(e + 1) + "/" + std::to_string(tc.epochs) + " loss " + num(l));
  });

  ad::save_checkpoint(a.checkpoint, res.net.named_parameters());
  ordered_json j;
  j["config_hash"] = a.hash.train;
  j["mean_test_pearson"] = res.test.mean;
  j["per_lead"] = res.test.per_channel;
  j["degenerate"] = res.test.degenerate;
  j["epoch_loss"] = res.epoch_loss;
  write_json(a.train, j);

  std::ostringstream loss, corr;
  loss << "epoch,train_loss\n";
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) loss << e + 1 << "," << num(res.epoch_loss[e]) << "\n";
  write_text(a.train_loss, loss.str());
  corr << "lead,test_pearson\n";
  for (std::size_t c = 0; c < res.test.per_channel.size(); ++c)
    corr << kLeadNames[c] << "," << num(res.test.per_channel[c]) << "\n";
  write_text(a.correlation, corr.str());
  log("[train] mean test Pearson " + num(res.test.mean));
}

void cmd_search_acc(const RunConfig& cfg, const Log& log) {
  const Artifacts a(cfg);
  const auto spec = load_network(a);
  const das::SearchSpace space(spec.conv_shapes(), cfg.das.platform, cfg.das.space);
  const double n = space.cardinality();
  log("[search-acc] " + std::to_string(space.params().size()) + " parameters, " +
      (std::isfinite(n) ? "~" + num(n) : std::string("more than 1e308")) + " designs, objective " +
      das::objective_name(cfg.das.search.objective));
  const int total = cfg.das.search.steps;
  const auto out = das::run_das(space, cfg.das.search, [&](const das::StepRecord& r) {
    if ((r.step + 1) % 500 == 0 || r.step + 1 == total)
      log("[search-acc] step " + std::to_string(r.step + 1) + "/" + std::to_string(total) + " best " +
          num(r.best_cost) + " cycles");
  });

  ordered_json j;
  j["config_hash"] = a.hash.acc;
  j["objective"] = das::objective_name(cfg.das.search.objective);
  j["feasible"] = out.eval.feasible;
  j["cost_cycles"] = out.eval.cost;
  j["fps"] = out.eval.report.fps;
  j["startup_s"] = out.eval.report.startup_latency_s;
  j["used_best_seen"] = out.used_best_seen;
  j["evaluations"] = out.evaluations;
  j["design"] = hw::to_json(out.design);
  write_json(a.design, j);
  hw::write_cost_csv(a.layer_cost, out.eval.report);
  das::write_das_trace(a.das_trace, out.trace);
  if (!out.eval.feasible) log("[search-acc] warning: no feasible design found");
  log("[search-acc] fps " + num(out.eval.report.fps) + ", startup " +
      num(out.eval.report.startup_latency_s * 1e3) + " ms");
}

fs::path cmd_report(const RunConfig& cfg, const Log& log) {
  const Artifacts a(cfg);
  const auto spec = load_network(a);
  const auto net = read_json(a.network, "search-net");
  const auto train = read_json(a.train, "train");
  const auto acc = read_json(a.design, "search-acc");

  // recompute the hardware numbers from the stored design
  const auto design = hw::design_from_json(acc.at("design"));
  const auto layers = spec.conv_shapes();
  const auto rep = hw::estimate_network(layers, design, cfg.das.platform);

  std::ostringstream s;
  s << "config_hash,mean_test_pearson,network_macs,network_depth,das_objective,feasible,fps,startup_ms\n";
  s << a.hash.report << "," << num(train.at("mean_test_pearson").get<double>()) << ","
    << nas::network_macs(spec) << "," << spec.depth() << "," << das::objective_name(cfg.das.search.objective)
    << "," << (rep.feasible ? 1 : 0) << "," << num(rep.fps) << "," << num(rep.startup_latency_s * 1e3) << "\n";
  write_text(a.summary, s.str());

  std::ostringstream st;
  st << "stage,cycles,layers\n";
  for (std::size_t k = 0; k < rep.stage_cycles.size(); ++k) {
    int n = 0;
    for (int x : rep.assignment) n += x == static_cast<int>(k);
    st << k << "," << num(rep.stage_cycles[k]) << "," << n << "\n";
  }
  write_text(a.stage_cycles, st.str());

  std::ostringstream al;
  al << "block,op,probability\n";
  const auto alpha = net.at("search").at("alpha");
  for (int b = 0; b < nas::kSearchableBlocks; ++b) {
    const auto row = alpha.at(b).get<std::vector<double>>();
    double mx = row[0], z = 0;
    for (double v : row) mx = std::max(mx, v);
    for (double v : row) z += std::exp(v - mx);
    for (int k = 0; k < nas::kNumOps; ++k)
      al << b << "," << nas::op_name(nas::kAllOps[k]) << "," << num(std::exp(row[k] - mx) / z) << "\n";
  }
  write_text(a.alpha_final, al.str());
  write_json(a.config, to_json(cfg));
  log("[report] " + a.summary.string());
  return a.summary;
}

fs::path cmd_all(const RunConfig& cfg, const Log& log) {
  cmd_synth(cfg, log);
  cmd_search_net(cfg, log);
  cmd_train(cfg, log);
  cmd_search_acc(cfg, log);
  return cmd_report(cfg, log);
}

void run_command(const std::string& verb, const RunConfig& cfg, const Log& log) {
  validate(cfg);
  RunLock lock(cfg.out);
  if (verb == "synth") cmd_synth(cfg, log);
  else if (verb == "search-net") cmd_search_net(cfg, log);
  else if (verb == "train") cmd_train(cfg, log);
  else if (verb == "search-acc") cmd_search_acc(cfg, log);
  else if (verb == "report") cmd_report(cfg, log);
  else if (verb == "all") cmd_all(cfg, log);
  else throw ConfigError({"verb: unknown command '" + verb + "'"});
}

}  // namespace cosearch::cli
