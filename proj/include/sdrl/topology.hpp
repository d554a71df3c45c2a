#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sdrl/nn.hpp"
#include "sdrl/rng.hpp"

namespace sdrl {

enum class RegimeKind { dense, sst, dst, s2d, d2s };
enum class Allocation { er, uniform };

struct ScheduleConfig {
  real s_i = 0;
  real s_f = 0;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 1;
  real lambda = 2;
};

struct RegimeConfig {
  RegimeKind kind = RegimeKind::dense;
  real global_sparsity = 0;  // S
  Allocation allocation = Allocation::er;
  real zeta_initial = 0.3;
  real zeta_final = 0.0;
  std::uint64_t update_interval = 1000;
  ScheduleConfig schedule;
  bool exempt_io_layers = false;
  // Alternate reading of the growth candidate set: include entries dropped in
  // the same update.
  bool growth_includes_dropped = false;

  // Fills schedule endpoints from kind/S and checks the invariants.
  void finalize(std::uint64_t total_steps);
  void validate() const;
};

// Per-layer sparsity targets. sparsity holds the real-valued ER/uniform
// solution (equal for same-shape layers); prune_count holds integer counts
// whose sum is within one parameter of round(S * total).
struct LayerSparsityPlan {
  std::vector<real> sparsity;
  std::vector<std::size_t> param_count;
  std::vector<std::size_t> prune_count;

  std::size_t total_params() const;
  std::size_t total_pruned() const;
};

// Erdos-Renyi allocation: density_l = min(1, eps*(n_in+n_out)/(n_in*n_out)),
// eps found by bisection against the global density target. Throws if the
// target would empty a layer.
LayerSparsityPlan er_layer_sparsities(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes, real S);
LayerSparsityPlan uniform_layer_sparsities(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes, real S);
LayerSparsityPlan make_plan(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes, real S,
    Allocation alloc);

// Sets exactly prune_count[l] mask entries to zero, chosen uniformly without
// replacement; zeroes the weights underneath.
void one_shot_random_prune(const std::vector<MaskedParameter*>& layers,
                           const LayerSparsityPlan& plan, Rng& rng);

// zeta_t = z_f + (z_i - z_f)/2 * (1 + cos(pi t / T))
real cosine_zeta(std::uint64_t t, std::uint64_t T, real z_i, real z_f);

// s_t = s_f + (s_i - s_f) * (1 - (t - t_start)/(t_end - t_start))^lambda,
// clamped outside [t_start, t_end].
real sparsity_schedule(std::uint64_t t, const ScheduleConfig& cfg);

struct RigLResult {
  std::size_t dropped = 0;
  std::size_t grown = 0;
  std::size_t readded = 0;  // nonzero only when growth candidates ran out
};

// One RigL drop/grow exchange: k = round(zeta*(1-s_l)*N) capped at the active
// count; drops smallest-|weight| actives, grows largest-|dense_grad| inactives
// (ties: smallest row-major index). Grown entries start at weight 0 with zero
// moments. Active count is preserved.
RigLResult rigl_update(MaskedParameter& layer, const Tensor2& dense_grad,
                       real zeta_t, real s_l,
                       bool growth_includes_dropped = false);

// Changes the active count of a layer by pruning smallest-|weight| actives or
// growing largest-|dense_grad| inactives until it equals target_active.
void retarget_active_count(MaskedParameter& layer, const Tensor2& dense_grad,
                           std::size_t target_active);

struct TopologyState {
  RegimeConfig regime;
  std::uint64_t total_steps = 0;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  LayerSparsityPlan plan;  // constant-S plan (sst/dst)
  std::uint64_t cumulative_dropped = 0;
  std::uint64_t cumulative_grown = 0;

  // Builds the plan and, for sparse-at-init regimes (sst/dst/s2d), applies
  // one-shot random pruning.
  void init(const std::vector<MaskedParameter*>& layers, RegimeConfig cfg,
            std::uint64_t total_steps, Rng& rng);
};

// Periodic topology update driven by the regime; layers must match the state.
void regime_step(TopologyState& state,
                 const std::vector<MaskedParameter*>& layers, std::uint64_t t);

}  // namespace sdrl
