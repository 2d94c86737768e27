#pragma once

#include "cosearch/autodiff/adam.hpp"
#include "cosearch/nas/supernet.hpp"
#include "cosearch/nas/train.hpp"

#include <filesystem>
#include <functional>
#include <optional>

namespace cosearch::nas {

// Which op weights price the MAC term: softmax(alpha) (expected MACs), or the
// Gumbel-softmax weights sampled for the step.
enum class MacTerm { expected, sampled };

struct DnsConfig {
  int steps = 1000;
  int batch = 16;
  double lr = 1e-3;             // supernet weights
  double weight_decay = 1e-3;   // supernet weights only
  double alpha_lr = 1e-3;
  double lambda = 1.0;          // per giga-MAC
  double tau = 1.0;
  MacTerm mac_term = MacTerm::expected;
  std::optional<int> depth_limit;
  int depth_check_every = 500;
  // Extra check intervals allowed after `steps` while the depth limit is violated.
  int max_extra_rounds = 20;
  int trace_every = 10;
  std::uint64_t seed = 0;
};

struct StepStats {
  std::int64_t step = 0;
  double loss_rec = 0;
  double gmacs = 0;  // expected MACs / 1e9 after the step's forward
  double lambda = 0;
  bool degenerate = false;
};

struct DnsState {
  DnsState(const NetworkSpec& base, const DnsConfig& cfg);

  Supernet net;
  ad::Adam weight_opt;
  ad::Adam alpha_opt;
  double lambda;
  double tau;
  MacTerm mac_term;
  std::int64_t step = 0;
  std::mt19937_64 rng;
};

// One joint update of weights and alpha on a single batch:
// loss = pearson_loss + lambda * GMACs. Throws NumericDivergence on NaN.
StepStats dns_step(DnsState& state, const ad::Tensor4& x, const ad::Tensor4& y);

struct DepthReport {
  int depth = 0;
  bool violated = false;
};
// Conv-layer depth of the argmax network against an optional limit.
DepthReport derive_network(const DnsState& state, std::optional<int> depth_limit, NetworkSpec& out);

struct AlphaTraceRow {
  std::int64_t step;
  int block;
  AlphaRow logits;
};

struct DnsResult {
  NetworkSpec spec;
  AlphaTable alpha{};
  double final_lambda = 0;
  std::int64_t steps_run = 0;
  bool depth_satisfied = true;
  std::vector<StepStats> history;
  std::vector<AlphaTraceRow> trace;
  std::vector<std::pair<std::int64_t, double>> lambda_changes;  // (step, new lambda)
};

using StepCallback = std::function<void(const StepStats&)>;

// Runs cfg.steps search steps. With a depth limit, the derived network is
// checked every depth_check_every steps and lambda doubles on violation (0
// becomes 1); the search continues past cfg.steps until the limit holds or
// max_extra_rounds intervals have elapsed.
DnsResult run_search(const GridData& data, const NetworkSpec& base, const DnsConfig& cfg,
                     const StepCallback& on_step = {});

// CSV: step,block,<9 op names>
void write_alpha_trace(const std::filesystem::path& path, const std::vector<AlphaTraceRow>& rows);

}  // namespace cosearch::nas
