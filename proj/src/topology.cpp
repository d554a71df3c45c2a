#include "sdrl/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace sdrl {

namespace {

std::size_t round_half_even(real x) {
  return static_cast<std::size_t>(std::nearbyint(x));
}

}  // namespace

void RegimeConfig::finalize(std::uint64_t total_steps) {
  switch (kind) {
    case RegimeKind::dense:
      global_sparsity = 0;
      break;
    case RegimeKind::sst:
    case RegimeKind::dst:
      break;
    case RegimeKind::d2s:
      schedule.s_i = 0;
      schedule.s_f = global_sparsity;
      break;
    case RegimeKind::s2d:
      schedule.s_i = global_sparsity;
      schedule.s_f = 0;
      break;
  }
  if (schedule.t_end <= schedule.t_start) {
    schedule.t_start = 0;
    schedule.t_end = total_steps > 0 ? total_steps : 1;
  }
  validate();
}

void RegimeConfig::validate() const {
  if (global_sparsity < 0 || global_sparsity >= 1)
    throw std::invalid_argument("global_sparsity must be in [0,1)");
  if (kind == RegimeKind::dense && global_sparsity != 0)
    throw std::invalid_argument("dense regime requires S = 0");
  if (schedule.lambda <= 0)
    throw std::invalid_argument("schedule lambda must be positive");
  if (update_interval == 0)
    throw std::invalid_argument("update_interval must be positive");
}

std::size_t LayerSparsityPlan::total_params() const {
  return std::accumulate(param_count.begin(), param_count.end(),
                         std::size_t{0});
}

std::size_t LayerSparsityPlan::total_pruned() const {
  return std::accumulate(prune_count.begin(), prune_count.end(),
                         std::size_t{0});
}

namespace {

// Integer counts from real-valued per-layer sparsities, with the global sum
// corrected to round(S * total) one entry at a time. Adjustments pick the
// layer whose count moves least from its real target (ties: smallest index).
LayerSparsityPlan counts_from_sparsities(
    const std::vector<real>& s,
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes, real S) {
  LayerSparsityPlan plan;
  plan.sparsity = s;
  std::size_t total = 0;
  for (auto& [nin, nout] : shapes) {
    plan.param_count.push_back(nin * nout);
    total += nin * nout;
  }
  for (std::size_t l = 0; l < s.size(); ++l)
    plan.prune_count.push_back(
        round_half_even(s[l] * static_cast<real>(plan.param_count[l])));
  const long long target =
      static_cast<long long>(round_half_even(S * static_cast<real>(total)));
  long long diff = target - static_cast<long long>(plan.total_pruned());
  while (diff != 0) {
    const int step = diff > 0 ? 1 : -1;
    long long best = -1;
    real best_err = 0;
    for (std::size_t l = 0; l < s.size(); ++l) {
      const long long cand =
          static_cast<long long>(plan.prune_count[l]) + step;
      if (cand < 0 || cand > static_cast<long long>(plan.param_count[l]))
        continue;
      const real err = std::abs(static_cast<real>(cand) -
                                s[l] * static_cast<real>(plan.param_count[l]));
      if (best < 0 || err < best_err) {
        best = static_cast<long long>(l);
        best_err = err;
      }
    }
    if (best < 0) throw std::runtime_error("sparsity target infeasible");
    plan.prune_count[static_cast<std::size_t>(best)] += step;
    diff -= step;
  }
  for (std::size_t l = 0; l < plan.prune_count.size(); ++l)
    if (plan.prune_count[l] >= plan.param_count[l] && plan.param_count[l] > 0)
      throw std::runtime_error(
          "sparsity target would remove every connection of a layer");
  return plan;
}

}  // namespace

LayerSparsityPlan er_layer_sparsities(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes, real S) {
  if (shapes.empty()) throw std::invalid_argument("no layers to sparsify");
  if (S < 0 || S >= 1) throw std::invalid_argument("S must be in [0,1)");
  const std::size_t L = shapes.size();
  std::vector<real> c(L);
  real total = 0;
  for (std::size_t l = 0; l < L; ++l) {
    auto [nin, nout] = shapes[l];
    c[l] = static_cast<real>(nin + nout) / static_cast<real>(nin * nout);
    total += static_cast<real>(nin * nout);
  }
  const real target_active = (real(1) - S) * total;
  auto active_for = [&](real eps) {
    real a = 0;
    for (std::size_t l = 0; l < L; ++l) {
      auto [nin, nout] = shapes[l];
      a += std::min(real(1), eps * c[l]) * static_cast<real>(nin * nout);
    }
    return a;
  };
  real lo = 0, hi = real(1) / *std::min_element(c.begin(), c.end());
  for (int it = 0; it < 200; ++it) {
    const real mid = (lo + hi) / 2;
    if (active_for(mid) < target_active)
      lo = mid;
    else
      hi = mid;
  }
  const real eps = (lo + hi) / 2;
  std::vector<real> s(L);
  for (std::size_t l = 0; l < L; ++l)
    s[l] = real(1) - std::min(real(1), eps * c[l]);
  return counts_from_sparsities(s, shapes, S);
}

LayerSparsityPlan uniform_layer_sparsities(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes, real S) {
  if (shapes.empty()) throw std::invalid_argument("no layers to sparsify");
  std::vector<real> s(shapes.size(), S);
  return counts_from_sparsities(s, shapes, S);
}

LayerSparsityPlan make_plan(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes, real S,
    Allocation alloc) {
  return alloc == Allocation::er ? er_layer_sparsities(shapes, S)
                                 : uniform_layer_sparsities(shapes, S);
}

void one_shot_random_prune(const std::vector<MaskedParameter*>& layers,
                           const LayerSparsityPlan& plan, Rng& rng) {
  if (layers.size() != plan.prune_count.size())
    throw std::invalid_argument("plan/layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    MaskedParameter& p = *layers[l];
    const std::size_t n = p.size();
    if (p.active_count() != n)
      throw std::logic_error("one_shot_random_prune expects all-ones masks");
    const std::size_t k = plan.prune_count[l];
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.uniform_index(n - i);
      std::swap(idx[i], idx[j]);
      p.mask.data[idx[i]] = 0;
    }
    p.apply_mask();
  }
}

real cosine_zeta(std::uint64_t t, std::uint64_t T, real z_i, real z_f) {
  const real frac = static_cast<real>(t) / static_cast<real>(T);
  return z_f + real(0.5) * (z_i - z_f) *
                   (real(1) + std::cos(real(3.14159265358979323846) * frac));
}

real sparsity_schedule(std::uint64_t t, const ScheduleConfig& cfg) {
  if (t <= cfg.t_start) return cfg.s_i;
  if (t >= cfg.t_end) return cfg.s_f;
  const real frac = static_cast<real>(t - cfg.t_start) /
                    static_cast<real>(cfg.t_end - cfg.t_start);
  real s = cfg.s_f + (cfg.s_i - cfg.s_f) *
                         std::pow(real(1) - frac, cfg.lambda);
  const real lo = std::min(cfg.s_i, cfg.s_f);
  const real hi = std::max(cfg.s_i, cfg.s_f);
  return std::clamp(s, lo, hi);
}

namespace {

// Active entries ranked by (|weight| asc, index asc).
std::vector<std::size_t> actives_by_magnitude(const MaskedParameter& p) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.mask.data[i] != 0) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(p.weight.data[a]) < std::abs(p.weight.data[b]);
  });
  return idx;
}

std::vector<std::size_t> rank_by_grad(const Tensor2& g,
                                      std::vector<std::size_t> idx) {
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(g.data[a]) > std::abs(g.data[b]);
  });
  return idx;
}

void activate_entry(MaskedParameter& p, std::size_t i) {
  p.mask.data[i] = 1;
  p.weight.data[i] = 0;
  p.m1.data[i] = 0;
  p.m2.data[i] = 0;
}

void deactivate_entry(MaskedParameter& p, std::size_t i) {
  p.mask.data[i] = 0;
  p.weight.data[i] = 0;
  p.m1.data[i] = 0;
  p.m2.data[i] = 0;
}

}  // namespace

RigLResult rigl_update(MaskedParameter& layer, const Tensor2& dense_grad,
                       real zeta_t, real s_l, bool growth_includes_dropped) {
  check_shape(dense_grad.same_shape(layer.weight), "rigl dense_grad");
  RigLResult res;
  const std::size_t n = layer.size();
  const auto actives = actives_by_magnitude(layer);
  std::size_t k = round_half_even(zeta_t * (real(1) - s_l) *
                                  static_cast<real>(n));
  k = std::min(k, actives.size());
  if (k == 0) return res;

  const std::vector<std::size_t> dropped(actives.begin(), actives.begin() + k);
  std::vector<bool> is_dropped(n, false);
  for (std::size_t i : dropped) is_dropped[i] = true;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (layer.mask.data[i] == 0)
      candidates.push_back(i);
    else if (growth_includes_dropped && is_dropped[i])
      candidates.push_back(i);
  }
  candidates = rank_by_grad(dense_grad, std::move(candidates));
  const std::size_t g = std::min(k, candidates.size());

  for (std::size_t i : dropped) deactivate_entry(layer, i);
  for (std::size_t j = 0; j < g; ++j) activate_entry(layer, candidates[j]);
  if (g < k) {
    // Not enough inactive entries; restore the largest-|weight| dropped ones
    // to keep the active count. They keep weight 0 (already zeroed).
    const std::size_t surplus = k - g;
    for (std::size_t j = 0; j < surplus; ++j)
      activate_entry(layer, dropped[k - 1 - j]);
    std::fprintf(stderr,
                 "[topology] %s: only %zu growth candidates for k=%zu, "
                 "re-added %zu dropped entries\n",
                 layer.name.c_str(), g, k, surplus);
    res.readded = surplus;
  }
  res.dropped = k;
  res.grown = g;
  return res;
}

void retarget_active_count(MaskedParameter& layer, const Tensor2& dense_grad,
                           std::size_t target_active) {
  std::size_t active = layer.active_count();
  if (active > target_active) {
    const auto ranked = actives_by_magnitude(layer);
    for (std::size_t j = 0; j < active - target_active; ++j)
      deactivate_entry(layer, ranked[j]);
  } else if (active < target_active) {
    std::vector<std::size_t> inactive;
    for (std::size_t i = 0; i < layer.size(); ++i)
      if (layer.mask.data[i] == 0) inactive.push_back(i);
    inactive = rank_by_grad(dense_grad, std::move(inactive));
    const std::size_t need = target_active - active;
    if (need > inactive.size())
      throw std::logic_error("retarget_active_count: target exceeds capacity");
    for (std::size_t j = 0; j < need; ++j) activate_entry(layer, inactive[j]);
  }
}

void TopologyState::init(const std::vector<MaskedParameter*>& layers,
                         RegimeConfig cfg, std::uint64_t steps, Rng& rng) {
  regime = cfg;
  regime.finalize(steps);
  total_steps = steps > 0 ? steps : 1;
  shapes.clear();
  for (const MaskedParameter* p : layers)
    shapes.emplace_back(p->weight.cols, p->weight.rows);
  switch (regime.kind) {
    case RegimeKind::dense:
      break;
    case RegimeKind::sst:
    case RegimeKind::dst:
      plan = make_plan(shapes, regime.global_sparsity, regime.allocation);
      one_shot_random_prune(layers, plan, rng);
      break;
    case RegimeKind::d2s:
      // starts dense
      plan = make_plan(shapes, 0, regime.allocation);
      break;
    case RegimeKind::s2d:
      plan = make_plan(shapes, regime.global_sparsity, regime.allocation);
      one_shot_random_prune(layers, plan, rng);
      break;
  }
}

void regime_step(TopologyState& state,
                 const std::vector<MaskedParameter*>& layers, std::uint64_t t) {
  if (layers.size() != state.shapes.size())
    throw std::invalid_argument("regime_step layer count mismatch");
  const RegimeConfig& rc = state.regime;
  if (rc.kind == RegimeKind::dense || rc.kind == RegimeKind::sst) return;
  const real zeta = cosine_zeta(std::min(t, state.total_steps),
                                state.total_steps, rc.zeta_initial,
                                rc.zeta_final);
  if (rc.kind == RegimeKind::dst) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      MaskedParameter& p = *layers[l];
      if (p.active_count() == p.size()) continue;  // saturated layer
      const RigLResult r = rigl_update(p, p.dense_grad, zeta,
                                       state.plan.sparsity[l],
                                       rc.growth_includes_dropped);
      state.cumulative_dropped += r.dropped;
      state.cumulative_grown += r.grown;
    }
    return;
  }
  // d2s / s2d: re-target counts against the schedule, then exchange.
  const real s_t = sparsity_schedule(t, rc.schedule);
  const LayerSparsityPlan plan_t =
      make_plan(state.shapes, s_t, rc.allocation);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    MaskedParameter& p = *layers[l];
    const std::size_t target_active = p.size() - plan_t.prune_count[l];
    retarget_active_count(p, p.dense_grad, target_active);
    if (p.active_count() == p.size()) continue;
    const RigLResult r = rigl_update(p, p.dense_grad, zeta, plan_t.sparsity[l],
                                     rc.growth_includes_dropped);
    state.cumulative_dropped += r.dropped;
    state.cumulative_grown += r.grown;
  }
  state.plan = plan_t;
}

}  // namespace sdrl
