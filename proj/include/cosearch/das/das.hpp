#pragma once

#include "cosearch/autodiff/adam.hpp"
#include "cosearch/autodiff/ops.hpp"
#include "cosearch/das/space.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <random>

namespace cosearch::das {

// How the sampled cost c is attached to the selected Gumbel-softmax weights.
enum class Surrogate { sum, product };

struct DasConfig {
  int steps = 50000;
  double lr = 3e-3;
  double tau = 1.0;
  Objective objective = Objective::fps;
  Surrogate surrogate = Surrogate::sum;
  // Subtract an exponential moving average of past costs from c (0 disables).
  double baseline_decay = 0.9;
  // Per-layer params see c minus the cost of the same sample with that
  // layer's cycles removed, instead of the whole c. Only for the built-in
  // cost (a custom CostFn has no per-layer report).
  bool layer_credit = true;
  std::uint64_t seed = 0;
};

struct Sample {
  std::vector<int> choices;
  std::vector<std::vector<double>> weights;  // soft GS weights per parameter (masked entries 0)
  hw::AcceleratorDesign design;
};

// Cost of a sampled design; defaults to evaluate() with the configured objective.
using CostFn = std::function<Evaluation(const std::vector<int>& choices, const hw::AcceleratorDesign& d)>;

// gamma: one logit vector per parameter of the space.
struct DasState {
  DasState(const SearchSpace& space, const DasConfig& cfg);

  const SearchSpace* space;
  DasConfig cfg;
  std::vector<ad::Var> gamma;
  ad::Adam opt;
  std::mt19937_64 rng;
  std::int64_t step = 0;
  double baseline = 0;
  std::vector<double> layer_baseline;
  std::optional<Evaluation> best;
  std::vector<int> best_choices;
  CostFn cost_fn;
};

// Hard sample: per parameter, argmax of softmax((gamma + g) / tau) over the
// allowed options; soft weights are kept for the backward pass.
Sample sample_design(const DasState& state, std::mt19937_64& rng);

struct StepRecord {
  std::int64_t step = 0;
  double cost = 0;
  bool feasible = false;
  double best_cost = 0;  // best feasible so far (infinite when none)
};

// Samples, evaluates, and applies one Adam step to the surrogate
// c * sum_s w_s[selected_s] (or the product). Tracks the best feasible sample.
StepRecord das_step(DasState& state);

// Argmax per parameter in order, masked like sampling; ties to the lowest index.
std::vector<int> derive_choices(const DasState& state);
hw::AcceleratorDesign derive_design(const DasState& state);

struct SearchOutcome {
  hw::AcceleratorDesign design;
  Evaluation eval;
  bool derived_feasible = false;
  bool used_best_seen = false;
  std::int64_t evaluations = 0;
  std::vector<StepRecord> trace;
};

using DasCallback = std::function<void(const StepRecord&)>;

// cfg.steps DAS steps, then the better of the derived design (if feasible)
// and the best feasible sample seen.
SearchOutcome run_das(const SearchSpace& space, const DasConfig& cfg, const DasCallback& cb = {},
                      const CostFn& cost_fn = {});

// Uniform sampling over the allowed options of each parameter.
SearchOutcome random_search(const SearchSpace& space, Objective obj, std::int64_t evaluations,
                            std::uint64_t seed);

// Exhaustive enumeration; throws ParameterError (with the size) above max_designs.
SearchOutcome brute_force(const SearchSpace& space, Objective obj, double max_designs = 1e5);

// CSV: step,cost,feasible,best_cost
void write_das_trace(const std::filesystem::path& path, const std::vector<StepRecord>& trace);

}  // namespace cosearch::das
