#include "cosearch/cli/config.hpp"

#include "cosearch/core/errors.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace cosearch::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string join_fields(const std::vector<std::string>& f) {
  std::string s = "invalid config:";
  for (const auto& x : f) s += "\n  " + x;
  return s;
}

// Reads one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& errs)
      : j_(j), path_(std::move(path)), errs_(errs) {}

  template <typename T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::invalid_argument("expected true/false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v->is_number_integer() && !v->is_number_unsigned()) throw std::invalid_argument("must be >= 0");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::invalid_argument("expected a string");
      }
      out = v->get<T>();
    } catch (const std::exception& e) {
      error(key, e.what());
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    const json* v = find(key);
    if (!v || v->is_null()) return;
    T tmp{};
    const auto before = errs_.size();
    get(key, tmp);
    if (errs_.size() == before) out = tmp;
  }

  template <typename T>
  void get_list(const char* key, std::vector<T>& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_array()) return error(key, "expected a list");
    std::vector<T> tmp;
    for (const auto& x : *v) {
      if constexpr (std::is_integral_v<T>) {
        if (!x.is_number_integer()) return error(key, "expected a list of integers");
      } else {
        if (!x.is_string()) return error(key, "expected a list of strings");
      }
      tmp.push_back(x.get<T>());
    }
    out = std::move(tmp);
  }

  const json* object(const char* key) {
    const json* v = find(key);
    if (v && !v->is_object()) {
      error(key, "expected an object");
      return nullptr;
    }
    return v;
  }

  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  void error(const char* key, const std::string& msg) { errs_.push_back(path(key) + ": " + msg); }

  void finish() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) errs_.push_back(path(it.key().c_str()) + ": unknown field");
  }

 private:
  const json* find(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& j_;
  std::string path_;
  std::vector<std::string>& errs_;
  std::set<std::string> used_;
};

void read_data(Reader& r, DataSection& d) {
  r.get("source", d.source);
  r.get("n_beats", d.n_beats);
  r.get("patient_id", d.patient_id);
  r.get("gain", d.gain);
  r.get("noise_sd", d.noise_sd);
  r.get("beat_dir", d.beat_dir);
  r.get_list("egm_channels", d.egm_channels);
}

void read_dns(Reader& r, nas::DnsConfig& d) {
  r.get("lambda", d.lambda);
  r.get("steps", d.steps);
  r.get("depth_limit", d.depth_limit);
  r.get("depth_check_every", d.depth_check_every);
  r.get("max_extra_rounds", d.max_extra_rounds);
  r.get("batch", d.batch);
  r.get("lr", d.lr);
  r.get("weight_decay", d.weight_decay);
  r.get("alpha_lr", d.alpha_lr);
  r.get("tau", d.tau);
  r.get("trace_every", d.trace_every);
  std::string mac = d.mac_term == nas::MacTerm::expected ? "expected" : "sampled";
  r.get("mac_term", mac);
  if (mac == "expected") d.mac_term = nas::MacTerm::expected;
  else if (mac == "sampled") d.mac_term = nas::MacTerm::sampled;
  else r.error("mac_term", "expected \"expected\" or \"sampled\"");
}

void read_train(Reader& r, TrainSection& t) {
  r.get("epochs", t.epochs);
  r.get("batch", t.batch);
  r.get("lr", t.lr);
  r.get("weight_decay", t.weight_decay);
}

void read_space(Reader& r, das::SpaceConfig& s) {
  std::vector<std::string> nocs;
  r.get_list("nocs", nocs);
  if (!nocs.empty()) {
    s.nocs.clear();
    for (const auto& n : nocs) {
      try {
        s.nocs.push_back(hw::noc_from_name(n));
      } catch (const ParameterError&) {
        r.error("nocs", "unknown NoC '" + n + "'");
      }
    }
  }
  r.get_list("pe_menu", s.pe_menu);
  std::vector<std::string> dims;
  r.get_list("tiled_dims", dims);
  if (!dims.empty()) {  // an explicit list replaces the default
    s.tiled_dims.fill(false);
    for (const auto& n : dims) {
      bool found = false;
      for (Dim d : kAllDims)
        if (n == dim_name(d)) s.tiled_dims[static_cast<int>(d)] = found = true;
      if (!found) r.error("tiled_dims", "unknown dim '" + n + "' (M C E F R S)");
    }
  }
  r.get("order_slots", s.order_slots);
  r.get("assignment_choices", s.assignment_choices);
}

void read_platform(Reader& r, hw::Platform& p) {
  r.get("freq_hz", p.freq_hz);
  r.get("dram_bw", p.dram_bw);
  r.get("gb_bw", p.gb_bw);
  r.get("gb_capacity", p.gb_capacity);
  r.get("rf_capacity", p.rf_capacity);
  r.get("pe_limit", p.pe_limit);
  r.get("bytes_per_word", p.bytes_per_word);
}

void read_das(Reader& r, DasSection& d, std::vector<std::string>& errs) {
  std::string obj = das::objective_name(d.search.objective);
  r.get("objective", obj);
  try {
    d.search.objective = das::objective_from_name(obj);
  } catch (const ParameterError&) {
    r.error("objective", "expected \"fps\" or \"startup\"");
  }
  r.get("steps", d.search.steps);
  r.get("lr", d.search.lr);
  r.get("tau", d.search.tau);
  r.get("baseline_decay", d.search.baseline_decay);
  r.get("layer_credit", d.search.layer_credit);
  std::string sur = d.search.surrogate == das::Surrogate::sum ? "sum" : "product";
  r.get("surrogate", sur);
  if (sur == "sum") d.search.surrogate = das::Surrogate::sum;
  else if (sur == "product") d.search.surrogate = das::Surrogate::product;
  else r.error("surrogate", "expected \"sum\" or \"product\"");
  if (const json* s = r.object("space")) {
    Reader sr(*s, r.path("space"), errs);
    read_space(sr, d.space);
    sr.finish();
  }
  if (const json* p = r.object("platform")) {
    Reader pr(*p, r.path("platform"), errs);
    read_platform(pr, d.platform);
    pr.finish();
  }
}

void expect(std::vector<std::string>& errs, const std::string& field, bool ok, const std::string& msg) {
  if (!ok) errs.push_back(field + ": " + msg);
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 12);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> fields)
    : std::runtime_error(join_fields(fields)), fields_(std::move(fields)) {}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  std::vector<std::string> errs;
  if (!j.is_object()) throw ConfigError({"<root>: expected an object"});
  Reader root(j, "", errs);
  root.get("seed", cfg.seed);
  std::string out = cfg.out.string();
  root.get("out", out);
  cfg.out = out;
  root.get("width", cfg.width);
  if (const json* d = root.object("data")) {
    Reader r(*d, "data", errs);
    read_data(r, cfg.data);
    r.finish();
  }
  if (const json* s = root.object("stft")) {
    Reader r(*s, "stft", errs);
    r.get("window_len", cfg.stft.window_len);
    r.get("overlap", cfg.stft.overlap);
    r.finish();
  }
  if (const json* d = root.object("dns")) {
    Reader r(*d, "dns", errs);
    read_dns(r, cfg.dns);
    r.finish();
  }
  if (const json* t = root.object("train")) {
    Reader r(*t, "train", errs);
    read_train(r, cfg.train);
    r.finish();
  }
  if (const json* d = root.object("das")) {
    Reader r(*d, "das", errs);
    read_das(r, cfg.das, errs);
    r.finish();
  }
  root.finish();
  if (!errs.empty()) throw ConfigError(errs);
  cfg.dns.seed = cfg.seed;
  cfg.das.search.seed = cfg.seed;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError({"--config: cannot open " + path.string()});
  json j;
  try {
    j = json::parse(is, nullptr, true, true);  // comments allowed
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return config_from_json(j);
}

void validate(const RunConfig& cfg) {
  std::vector<std::string> e;
  const auto& d = cfg.data;
  expect(e, "data.source", d.source == "synthetic" || d.source == "directory",
         "expected \"synthetic\" or \"directory\"");
  if (d.source == "synthetic") {
    expect(e, "data.n_beats", d.n_beats >= 2, "need at least 2 beats");
    if (d.gain) expect(e, "data.gain", *d.gain > 0, "must be > 0");
    if (d.noise_sd) expect(e, "data.noise_sd", *d.noise_sd >= 0, "must be >= 0");
  } else if (d.source == "directory") {
    expect(e, "data.beat_dir", !d.beat_dir.empty(), "required when source is \"directory\"");
    if (!d.beat_dir.empty())
      expect(e, "data.beat_dir", std::filesystem::is_directory(d.beat_dir),
             "no such directory: " + d.beat_dir);
  }
  std::set<int> seen;
  for (int c : d.egm_channels) {
    expect(e, "data.egm_channels", c >= 0 && c < sigproc::kEgmChannels, "channel out of range 0..4");
    expect(e, "data.egm_channels", seen.insert(c).second, "duplicate channel " + std::to_string(c));
  }

  expect(e, "stft.window_len", cfg.stft.window_len == 30, "the 16x16 grid needs window_len 30");
  expect(e, "stft.overlap", cfg.stft.overlap == 6, "the 16x16 grid needs overlap 6");
  expect(e, "width", cfg.width >= 1, "must be >= 1");

  const auto& n = cfg.dns;
  expect(e, "dns.steps", n.steps >= 0, "must be >= 0");
  expect(e, "dns.batch", n.batch >= 1, "must be >= 1");
  expect(e, "dns.lr", n.lr > 0, "must be > 0");
  expect(e, "dns.alpha_lr", n.alpha_lr > 0, "must be > 0");
  expect(e, "dns.weight_decay", n.weight_decay >= 0, "must be >= 0");
  expect(e, "dns.lambda", n.lambda >= 0, "must be >= 0");
  expect(e, "dns.tau", n.tau > 0, "must be > 0");
  expect(e, "dns.depth_check_every", n.depth_check_every >= 1, "must be >= 1");
  expect(e, "dns.max_extra_rounds", n.max_extra_rounds >= 0, "must be >= 0");
  expect(e, "dns.trace_every", n.trace_every >= 1, "must be >= 1");
  if (n.depth_limit) expect(e, "dns.depth_limit", *n.depth_limit >= nas::backbone_depth(),
                            "below the fixed backbone depth " + std::to_string(nas::backbone_depth()));

  const auto& t = cfg.train;
  expect(e, "train.epochs", t.epochs >= 0, "must be >= 0");
  expect(e, "train.batch", t.batch >= 1, "must be >= 1");
  expect(e, "train.lr", t.lr > 0, "must be > 0");
  expect(e, "train.weight_decay", t.weight_decay >= 0, "must be >= 0");

  const auto& a = cfg.das;
  expect(e, "das.steps", a.search.steps >= 0, "must be >= 0");
  expect(e, "das.lr", a.search.lr > 0, "must be > 0");
  expect(e, "das.tau", a.search.tau > 0, "must be > 0");
  expect(e, "das.baseline_decay", a.search.baseline_decay >= 0 && a.search.baseline_decay < 1,
         "must be in [0, 1)");
  try {
    a.platform.validate();
  } catch (const ParameterError& x) {
    e.push_back(std::string("das.platform: ") + x.what());
  }
  try {
    a.space.validate();
  } catch (const ParameterError& x) {
    e.push_back(std::string("das.space: ") + x.what());
  }
  for (int p : a.space.pe_menu)
    expect(e, "das.space.pe_menu", p >= 1 && p <= a.platform.pe_limit,
           std::to_string(p) + " outside 1..pe_limit");

  expect(e, "out", !cfg.out.empty(), "required");
  if (!cfg.out.empty()) {
    std::error_code ec;
    std::filesystem::path p = std::filesystem::absolute(cfg.out, ec);
    while (!p.empty() && !std::filesystem::exists(p, ec) && p != p.parent_path()) p = p.parent_path();
    expect(e, "out", std::filesystem::is_directory(p, ec), "cannot create " + cfg.out.string());
  }
  if (!e.empty()) throw ConfigError(e);
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  const auto& d = cfg.data;
  ordered_json data;
  data["source"] = d.source;
  if (d.source == "synthetic") {
    data["n_beats"] = d.n_beats;
    data["patient_id"] = d.patient_id;
    if (d.gain) data["gain"] = *d.gain;
    if (d.noise_sd) data["noise_sd"] = *d.noise_sd;
  } else {
    data["beat_dir"] = d.beat_dir;
  }
  data["egm_channels"] = d.egm_channels;
  j["data"] = data;
  j["stft"] = {{"window_len", cfg.stft.window_len}, {"overlap", cfg.stft.overlap}};
  j["width"] = cfg.width;
  const auto& n = cfg.dns;
  ordered_json dns;
  dns["lambda"] = n.lambda;
  dns["steps"] = n.steps;
  dns["depth_limit"] = n.depth_limit ? ordered_json(*n.depth_limit) : ordered_json(nullptr);
  dns["depth_check_every"] = n.depth_check_every;
  dns["max_extra_rounds"] = n.max_extra_rounds;
  dns["batch"] = n.batch;
  dns["lr"] = n.lr;
  dns["weight_decay"] = n.weight_decay;
  dns["alpha_lr"] = n.alpha_lr;
  dns["tau"] = n.tau;
  dns["mac_term"] = n.mac_term == nas::MacTerm::expected ? "expected" : "sampled";
  dns["trace_every"] = n.trace_every;
  j["dns"] = dns;
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch", cfg.train.batch},
                {"lr", cfg.train.lr},
                {"weight_decay", cfg.train.weight_decay}};
  const auto& a = cfg.das;
  ordered_json das;
  das["objective"] = das::objective_name(a.search.objective);
  das["steps"] = a.search.steps;
  das["lr"] = a.search.lr;
  das["tau"] = a.search.tau;
  das["baseline_decay"] = a.search.baseline_decay;
  das["layer_credit"] = a.search.layer_credit;
  das["surrogate"] = a.search.surrogate == das::Surrogate::sum ? "sum" : "product";
  ordered_json space;
  space["nocs"] = ordered_json::array();
  for (auto noc : a.space.nocs) space["nocs"].push_back(hw::noc_name(noc));
  space["pe_menu"] = a.space.pe_menu;
  space["tiled_dims"] = ordered_json::array();
  for (Dim dim : kAllDims)
    if (a.space.tiled_dims[static_cast<int>(dim)]) space["tiled_dims"].push_back(dim_name(dim));
  space["order_slots"] = a.space.order_slots;
  space["assignment_choices"] = a.space.assignment_choices;
  das["space"] = space;
  das["platform"] = hw::to_json(a.platform);
  j["das"] = das;
  j["out"] = cfg.out.string();
  return j;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

StageHashes stage_hashes(const RunConfig& cfg) {
  const auto j = to_json(cfg);
  auto chain = [](const std::string& up, std::initializer_list<const char*> keys, const ordered_json& j) {
    ordered_json part;
    part["upstream"] = up;
    for (const char* k : keys) part[k] = j[k];
    return hex(fnv1a(part.dump()));
  };
  StageHashes h;
  h.synth = chain("", {"seed", "data"}, j);
  h.net = chain(h.synth, {"stft", "width", "dns"}, j);
  h.train = chain(h.net, {"train"}, j);
  h.acc = chain(h.net, {"das"}, j);
  h.report = hex(fnv1a(h.train + h.acc));
  return h;
}

}  // namespace cosearch::cli
