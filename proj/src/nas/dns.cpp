#include "cosearch/nas/dns.hpp"

#include "cosearch/core/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace cosearch::nas {

DnsState::DnsState(const NetworkSpec& base, const DnsConfig& cfg)
    : net(base, cfg.seed),
      weight_opt(net.weight_parameters(), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay}),
      alpha_opt(net.alpha(), {cfg.alpha_lr, 0.9, 0.999, 1e-8, 0.0}),
      lambda(cfg.lambda),
      tau(cfg.tau),
      mac_term(cfg.mac_term),
      rng(cfg.seed ^ 0x9e3779b97f4a7c15ull) {
  if (!(cfg.tau > 0)) throw ParameterError("dns: tau must be positive");
  if (!(cfg.lambda >= 0)) throw ParameterError("dns: lambda must be >= 0");
}

StepStats dns_step(DnsState& state, const ad::Tensor4& x, const ad::Tensor4& y) {
  ad::Tape tape;
  const auto weights = state.net.sample_weights(tape, state.rng, state.tau);
  const auto pred = state.net.forward(tape, ad::constant(x), weights);
  const auto rec = ad::pearson_loss(tape, pred, ad::constant(y));

  StepStats st;
  st.step = state.step;
  st.loss_rec = rec.loss->value[0];
  st.degenerate = rec.degenerate;
  st.lambda = state.lambda;
  st.gmacs = expected_macs(state.net, state.net.alpha_values()) * 1e-9;

  ad::Var total = rec.loss;
  if (state.lambda > 0) {
    const auto mac = state.mac_term == MacTerm::expected ? expected_gmacs(tape, state.net)
                                                         : weighted_gmacs(tape, state.net, weights);
    total = ad::add(tape, total, ad::scale(tape, mac, state.lambda));
  }
  if (!std::isfinite(total->value[0]))
    throw NumericDivergence("dns: non-finite loss at step " + std::to_string(state.step) +
                            " (reconstruction " + std::to_string(st.loss_rec) + ")");
  state.weight_opt.zero_grad();
  state.alpha_opt.zero_grad();
  tape.backward(total);
  state.weight_opt.step();
  state.alpha_opt.step();
  ++state.step;
  for (const auto& a : state.net.alpha())
    if (!a->value.all_finite()) throw NumericDivergence("dns: alpha became non-finite");
  return st;
}

DepthReport derive_network(const DnsState& state, std::optional<int> depth_limit, NetworkSpec& out) {
  out = derive_spec(state.net.base(), state.net.alpha_values());
  DepthReport r;
  r.depth = out.depth();
  r.violated = depth_limit && r.depth > *depth_limit;
  return r;
}

DnsResult run_search(const GridData& data, const NetworkSpec& base, const DnsConfig& cfg,
                     const StepCallback& on_step) {
  if (cfg.steps < 0 || cfg.batch < 1) throw ParameterError("dns: bad steps/batch");
  if (cfg.depth_limit && (cfg.depth_check_every < 1 || *cfg.depth_limit < backbone_depth()))
    throw ParameterError("dns: depth_limit below the backbone depth or bad check interval");
  DnsState state(base, cfg);
  BatchSampler sampler(data.train, cfg.batch, cfg.seed ^ 0x2545f4914f6cdd1dull);
  DnsResult res;

  auto record_alpha = [&] {
    const auto a = state.net.alpha_values();
    for (int b = 0; b < kSearchableBlocks; ++b) res.trace.push_back({state.step, b, a[b]});
  };
  record_alpha();

  const std::int64_t hard_cap =
      cfg.steps + (cfg.depth_limit ? static_cast<std::int64_t>(cfg.max_extra_rounds) * cfg.depth_check_every : 0);
  NetworkSpec spec;
  while (state.step < hard_cap) {
    const auto idx = sampler.next();
    const auto st = dns_step(state, batch_inputs(data, idx), batch_targets(data, idx));
    res.history.push_back(st);
    if (on_step) on_step(st);
    if (cfg.trace_every > 0 && state.step % cfg.trace_every == 0) record_alpha();

    const bool at_check = cfg.depth_limit && state.step % cfg.depth_check_every == 0;
    if (at_check || state.step >= cfg.steps) {
      const auto rep = derive_network(state, cfg.depth_limit, spec);
      if (rep.violated && at_check) {
        state.lambda = state.lambda > 0 ? 2 * state.lambda : 1.0;
        res.lambda_changes.emplace_back(state.step, state.lambda);
      }
      if (state.step >= cfg.steps && !rep.violated) break;
    }
  }
  if (cfg.trace_every <= 0 || state.step % cfg.trace_every != 0) record_alpha();

  const auto rep = derive_network(state, cfg.depth_limit, res.spec);
  res.depth_satisfied = !rep.violated;
  res.alpha = state.net.alpha_values();
  res.final_lambda = state.lambda;
  res.steps_run = state.step;
  return res;
}

void write_alpha_trace(const std::filesystem::path& path, const std::vector<AlphaTraceRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "step,block";
  for (OpKind op : kAllOps) f << ',' << op_name(op);
  f << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    f << r.step << ',' << r.block;
    for (double v : r.logits) f << ',' << v;
    f << '\n';
  }
}

}  // namespace cosearch::nas
