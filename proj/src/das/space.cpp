#include "cosearch/das/space.hpp"

#include "cosearch/core/errors.hpp"

#include <algorithm>

namespace cosearch::das {

void SpaceConfig::validate() const {
  if (nocs.empty()) throw ParameterError("das space: empty NoC menu");
  if (order_slots < 0 || order_slots > kNumDims) throw ParameterError("das space: order_slots in [0, 6]");
  if (assignment_choices < 1 || assignment_choices > hw::kSubAccelerators)
    throw ParameterError("das space: assignment_choices in [1, 10]");
  for (int p : pe_menu)
    if (p < 1) throw ParameterError("das space: PE menu entries must be positive");
}

std::vector<int> default_pe_menu(int pe_limit) {
  std::vector<int> m;
  for (int p = 1; p <= pe_limit; p *= 2) m.push_back(p);
  if (m.back() != pe_limit) m.push_back(pe_limit);
  return m;
}

SearchSpace::SearchSpace(std::vector<ConvShape> layers, hw::Platform platform, SpaceConfig cfg)
    : layers_(std::move(layers)), platform_(platform), cfg_(std::move(cfg)) {
  platform_.validate();
  cfg_.validate();
  if (layers_.empty()) throw ParameterError("das space: no layers");
  pe_menu_ = cfg_.pe_menu.empty() ? default_pe_menu(platform_.pe_limit) : cfg_.pe_menu;
  for (int p : pe_menu_)
    if (p > platform_.pe_limit) throw ParameterError("das space: PE menu exceeds pe_limit");

  params_.push_back({ParamKind::noc, -1, 0, static_cast<int>(cfg_.nocs.size()), "noc"});
  params_.push_back({ParamKind::max_pes, -1, 0, static_cast<int>(pe_menu_.size()), "max_pes"});
  for (int l = 0; l < static_cast<int>(layers_.size()); ++l) {
    const auto& sh = layers_[l];
    std::array<std::vector<std::pair<int, int>>, kNumDims> t;
    const std::string ln = "L" + std::to_string(l) + ".";
    for (Dim d : kAllDims) {
      const int i = static_cast<int>(d);
      if (cfg_.tiled_dims[i]) {
        t[i] = hw::enumerate_tilings(sh[d]);
        if (t[i].size() > 1)
          params_.push_back({ParamKind::tiling, l, i, static_cast<int>(t[i].size()),
                             ln + "tile_" + dim_name(d)});
      } else {
        t[i] = {{1, sh[d]}};
      }
    }
    tilings_.push_back(std::move(t));
    for (int s = 0; s < cfg_.order_slots; ++s)
      params_.push_back({ParamKind::order_dram, l, s, kNumDims, ln + "dram_slot" + std::to_string(s)});
    for (int s = 0; s < cfg_.order_slots; ++s)
      params_.push_back({ParamKind::order_gb, l, s, kNumDims, ln + "gb_slot" + std::to_string(s)});
    params_.push_back({ParamKind::assignment, l, 0, cfg_.assignment_choices, ln + "assign"});
  }
}

const std::vector<std::pair<int, int>>& SearchSpace::tilings(int layer, Dim dim) const {
  return tilings_.at(layer)[static_cast<int>(dim)];
}

std::vector<bool> SearchSpace::allowed(std::size_t i, std::span<const int> choices) const {
  const Param& p = params_.at(i);
  std::vector<bool> ok(p.size, true);
  switch (p.kind) {
    case ParamKind::tiling: {
      const hw::Noc noc = cfg_.nocs.at(choices[0]);
      const Dim d = static_cast<Dim>(p.slot);
      if (!hw::is_spatial(noc, d)) {
        const auto& t = tilings(p.layer, d);
        for (int k = 0; k < p.size; ++k) ok[k] = t[k].first == 1;
      }
      // PEs already unrolled by earlier tiling params of this layer
      long used = 1;
      for (std::size_t j = i; j-- > 2 && params_[j].kind == ParamKind::tiling && params_[j].layer == p.layer;)
        used *= tilings(p.layer, static_cast<Dim>(params_[j].slot))[choices[j]].first;
      const long budget = pe_menu_.at(choices[1]);
      const auto& t = tilings(p.layer, d);
      for (int k = 0; k < p.size; ++k)
        if (used * t[k].first > budget) ok[k] = false;
      break;
    }
    case ParamKind::order_dram:
    case ParamKind::order_gb:
      // earlier slots of the same order are the immediately preceding params
      for (int s = 1; s <= p.slot; ++s) ok[choices[i - s]] = false;
      break;
    default:
      break;
  }
  return ok;
}

hw::AcceleratorDesign SearchSpace::decode(std::span<const int> choices) const {
  if (choices.size() != params_.size()) throw ShapeError("das decode: wrong number of choices");
  hw::AcceleratorDesign d;
  d.noc = cfg_.nocs.at(choices[0]);
  d.max_pes = pe_menu_.at(choices[1]);
  const int n = static_cast<int>(layers_.size());
  d.mappings.resize(n);
  d.assignment.assign(n, 0);
  for (int l = 0; l < n; ++l)
    for (Dim dim : kAllDims) {
      const auto [pe, gb] = tilings(l, dim).front();
      d.mappings[l].tile_pe[static_cast<int>(dim)] = pe;
      d.mappings[l].tile_gb[static_cast<int>(dim)] = gb;
    }
  std::vector<std::vector<int>> dram(n), gbo(n);
  for (std::size_t i = 2; i < params_.size(); ++i) {
    const Param& p = params_[i];
    const int c = choices[i];
    if (c < 0 || c >= p.size) throw ShapeError("das decode: choice out of range for " + p.name);
    auto& m = d.mappings[p.layer];
    switch (p.kind) {
      case ParamKind::tiling: {
        const auto [pe, gb] = tilings(p.layer, static_cast<Dim>(p.slot))[c];
        m.tile_pe[p.slot] = pe;
        m.tile_gb[p.slot] = gb;
        break;
      }
      case ParamKind::order_dram: dram[p.layer].push_back(c); break;
      case ParamKind::order_gb: gbo[p.layer].push_back(c); break;
      case ParamKind::assignment: d.assignment[p.layer] = c; break;
      default: break;
    }
  }
  auto complete = [](const std::vector<int>& picked) {
    hw::DimOrder o{};
    std::array<bool, kNumDims> used{};
    int k = 0;
    for (int c : picked) {
      o[k++] = static_cast<Dim>(c);
      used[c] = true;
    }
    for (int c = 0; c < kNumDims; ++c)
      if (!used[c]) o[k++] = static_cast<Dim>(c);
    return o;
  };
  for (int l = 0; l < n; ++l) {
    d.mappings[l].loop_order_dram = complete(dram[l]);
    d.mappings[l].loop_order_gb = complete(gbo[l]);
  }
  return d;
}

double SearchSpace::cardinality() const {
  double orders = 1;
  for (int s = 0; s < cfg_.order_slots; ++s) orders *= kNumDims - s;
  const double per_layer = orders * orders * cfg_.assignment_choices;
  double total = 0;
  for (hw::Noc noc : cfg_.nocs)
    for (int budget : pe_menu_) {
      double n = 1;
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        // tilings whose PE product fits the budget, by depth-first count
        auto count = [&](auto&& self, int di, long used) -> double {
          if (di == kNumDims) return 1;
          const Dim d = kAllDims[di];
          double c = 0;
          for (const auto& [pe, gb] : tilings(static_cast<int>(l), d))
            if ((pe == 1 || hw::is_spatial(noc, d)) && used * pe <= budget) c += self(self, di + 1, used * pe);
          return c;
        };
        n *= count(count, 0, 1) * per_layer;
      }
      total += n;
    }
  return total;
}

double SearchSpace::single_pe_bound() const {
  double s = 0;
  for (const auto& l : layers_) s += static_cast<double>(l.macs());
  return s;
}

const char* objective_name(Objective o) { return o == Objective::fps ? "fps" : "startup"; }

Objective objective_from_name(const std::string& s) {
  if (s == "fps") return Objective::fps;
  if (s == "startup") return Objective::startup;
  throw ParameterError("objective must be fps or startup, got '" + s + "'");
}

Evaluation evaluate(const SearchSpace& space, const hw::AcceleratorDesign& d, Objective obj) {
  Evaluation e;
  e.report = hw::estimate_network(space.layers(), d, space.platform());
  e.feasible = e.report.feasible;
  e.cost = !e.feasible ? 10.0 * space.single_pe_bound()
           : obj == Objective::fps ? e.report.max_stage_cycles
                                   : e.report.total_cycles;
  return e;
}

}  // namespace cosearch::das
