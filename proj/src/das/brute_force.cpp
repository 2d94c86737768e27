#include "cosearch/core/errors.hpp"
#include "cosearch/das/das.hpp"

#include <limits>
#include <sstream>

namespace cosearch::das {

namespace {

void keep_if_better(SearchOutcome& out, const SearchSpace& space, const std::vector<int>& choices,
                    Objective obj, bool& have) {
  const auto d = space.decode(choices);
  auto e = evaluate(space, d, obj);
  ++out.evaluations;
  // infeasible designs only count when nothing feasible was found yet
  const bool better = !have || (e.feasible && !out.eval.feasible) ||
                      (e.feasible == out.eval.feasible && e.cost < out.eval.cost);
  if (better) {
    out.design = d;
    out.eval = std::move(e);
    have = true;
  }
}

}  // namespace

SearchOutcome random_search(const SearchSpace& space, Objective obj, std::int64_t evaluations,
                            std::uint64_t seed) {
  if (evaluations < 1) throw ParameterError("random_search: need at least one evaluation");
  std::mt19937_64 rng(seed);
  const auto& params = space.params();
  SearchOutcome out;
  bool have = false;
  std::vector<int> c(params.size());
  std::vector<int> opts;
  for (std::int64_t n = 0; n < evaluations; ++n) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto ok = space.allowed(i, c);
      opts.clear();
      for (int k = 0; k < params[i].size; ++k)
        if (ok[k]) opts.push_back(k);
      c[i] = opts[rng() % opts.size()];
    }
    keep_if_better(out, space, c, obj, have);
    out.trace.push_back({n + 1, out.eval.cost, out.eval.feasible,
                         out.eval.feasible ? out.eval.cost : std::numeric_limits<double>::infinity()});
  }
  out.derived_feasible = out.eval.feasible;
  return out;
}

SearchOutcome brute_force(const SearchSpace& space, Objective obj, double max_designs) {
  const double size = space.cardinality();
  if (size > max_designs) {
    std::ostringstream msg;
    msg << "brute_force: space has " << size << " designs, limit is " << max_designs;
    throw ParameterError(msg.str());
  }
  const auto& params = space.params();
  SearchOutcome out;
  bool have = false;
  std::vector<int> c(params.size(), 0);
  // depth-first over parameters in order, respecting masks
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == params.size()) {
      keep_if_better(out, space, c, obj, have);
      return;
    }
    const auto ok = space.allowed(i, c);
    for (int k = 0; k < params[i].size; ++k) {
      if (!ok[k]) continue;
      c[i] = k;
      self(self, i + 1);
    }
  };
  rec(rec, 0);
  out.derived_feasible = out.eval.feasible;
  return out;
}

}  // namespace cosearch::das
