#include "cosearch/das/das.hpp"

#include "cosearch/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace cosearch::das {

namespace {

std::vector<ad::Var> init_gamma(const SearchSpace& space) {
  std::vector<ad::Var> g;
  for (const auto& p : space.params()) g.push_back(ad::parameter(ad::Tensor4({1, 1, 1, p.size})));
  return g;
}

void track_best(DasState& s, const Evaluation& e, const std::vector<int>& choices) {
  if (!e.feasible) return;
  if (!s.best || e.cost < s.best->cost) {
    s.best = e;
    s.best_choices = choices;
  }
}

// Cost of the sample with each layer's cycles taken out in turn.
std::vector<double> cost_without_layer(const SearchSpace& space, const Evaluation& e, Objective obj) {
  const auto& r = e.report;
  const double penalty = 10.0 * space.single_pe_bound();
  const auto bad = std::count_if(r.layers.begin(), r.layers.end(), [](const auto& l) { return !l.feasible; });
  const bool design_bad = !r.feasible && bad == 0;
  std::vector<double> out(r.layers.size());
  for (std::size_t l = 0; l < r.layers.size(); ++l) {
    const auto& lc = r.layers[l];
    if (design_bad || bad - !lc.feasible > 0) {
      out[l] = penalty;
    } else if (obj == Objective::startup) {
      out[l] = r.total_cycles - lc.total_cycles;
    } else {
      double m = 0;
      for (std::size_t k = 0; k < r.stage_cycles.size(); ++k)
        m = std::max(m, r.stage_cycles[k] - (static_cast<int>(k) == r.assignment[l] ? lc.total_cycles : 0.0));
      out[l] = m;
    }
  }
  return out;
}

}  // namespace

DasState::DasState(const SearchSpace& sp, const DasConfig& c)
    : space(&sp), cfg(c), gamma(init_gamma(sp)), opt(gamma, {c.lr, 0.9, 0.999, 1e-8, 0.0}), rng(c.seed) {
  if (!(c.tau > 0)) throw ParameterError("das: tau must be positive");
  if (c.steps < 0) throw ParameterError("das: steps must be >= 0");
  if (c.baseline_decay < 0 || c.baseline_decay >= 1) throw ParameterError("das: baseline_decay in [0, 1)");
}

Sample sample_design(const DasState& state, std::mt19937_64& rng) {
  const auto& params = state.space->params();
  Sample s;
  s.choices.resize(params.size());
  s.weights.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const int n = params[i].size;
    const auto ok = state.space->allowed(i, s.choices);
    const auto g = ad::sample_gumbels(rng, n);
    const auto& gam = state.gamma[i]->value;
    std::vector<double> z(n, -std::numeric_limits<double>::infinity());
    double mx = -std::numeric_limits<double>::infinity();
    int best = -1;
    for (int k = 0; k < n; ++k) {
      if (!ok[k]) continue;
      z[k] = (gam[k] + g[k]) / state.cfg.tau;
      if (best < 0 || z[k] > z[best]) best = k;
      mx = std::max(mx, z[k]);
    }
    std::vector<double> w(n, 0.0);
    double sum = 0;
    for (int k = 0; k < n; ++k)
      if (ok[k]) sum += (w[k] = std::exp(z[k] - mx));
    for (double& v : w) v /= sum;
    s.choices[i] = best;
    s.weights[i] = std::move(w);
  }
  s.design = state.space->decode(s.choices);
  return s;
}

StepRecord das_step(DasState& state) {
  const Sample s = sample_design(state, state.rng);
  const Evaluation e = state.cost_fn ? state.cost_fn(s.choices, s.design)
                                     : evaluate(*state.space, s.design, state.cfg.objective);
  track_best(state, e, s.choices);

  double c = e.cost;
  if (state.cfg.baseline_decay > 0) {
    const double b = state.step == 0 ? e.cost : state.baseline;
    c = e.cost - b;
    state.baseline = state.cfg.baseline_decay * b + (1 - state.cfg.baseline_decay) * e.cost;
  }

  std::vector<double> layer_c;
  const auto& layers = state.space->layers();
  if (state.cfg.layer_credit && !state.cost_fn && e.report.layers.size() == layers.size()) {
    layer_c = cost_without_layer(*state.space, e, state.cfg.objective);
    if (state.layer_baseline.empty()) state.layer_baseline.assign(layers.size(), 0.0);
    for (std::size_t l = 0; l < layer_c.size(); ++l) {
      const double share = e.cost - layer_c[l];
      layer_c[l] = share;
      if (state.cfg.baseline_decay > 0) {
        const double b = state.step == 0 ? share : state.layer_baseline[l];
        layer_c[l] = share - b;
        state.layer_baseline[l] = state.cfg.baseline_decay * b + (1 - state.cfg.baseline_decay) * share;
      }
    }
  }

  // d/dgamma_k of w_sel = w_sel (delta_k - w_k) / tau
  double prod = 1;
  if (state.cfg.surrogate == Surrogate::product)
    for (std::size_t i = 0; i < s.choices.size(); ++i) prod *= s.weights[i][s.choices[i]];
  state.opt.zero_grad();
  for (std::size_t i = 0; i < s.choices.size(); ++i) {
    const auto& w = s.weights[i];
    const int sel = s.choices[i];
    const int layer = state.space->params()[i].layer;
    const double ci = layer >= 0 && !layer_c.empty() ? layer_c[layer] : c;
    const double coeff = ci * (state.cfg.surrogate == Surrogate::sum ? w[sel] : prod) / state.cfg.tau;
    auto& g = state.gamma[i]->grad_buffer();
    for (std::size_t k = 0; k < w.size(); ++k)
      g[k] = coeff * ((static_cast<int>(k) == sel ? 1.0 : 0.0) - w[k]);
  }
  state.opt.step();
  ++state.step;

  StepRecord r;
  r.step = state.step;
  r.cost = e.cost;
  r.feasible = e.feasible;
  r.best_cost = state.best ? state.best->cost : std::numeric_limits<double>::infinity();
  return r;
}

std::vector<int> derive_choices(const DasState& state) {
  const auto& params = state.space->params();
  std::vector<int> c(params.size(), 0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto ok = state.space->allowed(i, c);
    const auto& gam = state.gamma[i]->value;
    int best = -1;
    for (int k = 0; k < params[i].size; ++k)
      if (ok[k] && (best < 0 || gam[k] > gam[best])) best = k;
    c[i] = best;
  }
  return c;
}

hw::AcceleratorDesign derive_design(const DasState& state) {
  return state.space->decode(derive_choices(state));
}

SearchOutcome run_das(const SearchSpace& space, const DasConfig& cfg, const DasCallback& cb,
                      const CostFn& cost_fn) {
  DasState state(space, cfg);
  state.cost_fn = cost_fn;
  SearchOutcome out;
  for (int i = 0; i < cfg.steps; ++i) {
    out.trace.push_back(das_step(state));
    if (cb) cb(out.trace.back());
  }
  const auto derived = derive_choices(state);
  out.design = space.decode(derived);
  out.eval = cost_fn ? cost_fn(derived, out.design) : evaluate(space, out.design, cfg.objective);
  out.evaluations = cfg.steps + 1;
  out.derived_feasible = out.eval.feasible;
  if (state.best && (!out.eval.feasible || state.best->cost < out.eval.cost)) {
    out.design = space.decode(state.best_choices);
    out.eval = *state.best;
    out.used_best_seen = true;
  }
  return out;
}

void write_das_trace(const std::filesystem::path& path, const std::vector<StepRecord>& trace) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << std::setprecision(17) << "step,cost,feasible,best_cost\n";
  for (const auto& r : trace) {
    f << r.step << ',' << r.cost << ',' << (r.feasible ? 1 : 0) << ',';
    if (std::isfinite(r.best_cost)) f << r.best_cost;
    f << '\n';
  }
}

}  // namespace cosearch::das
