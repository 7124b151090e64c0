// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mmknn {

struct EpochRecord;

/// Per-example costs and neighbour counts of one augmentation scheme.
///
/// forward/backward/sort are F, B and S: FLOPs of one forward pass, one
/// backward pass and one sort of a candidate score vector. Vanilla kNN uses
/// k1 neighbours; MiniMax retrieves k2 and back-propagates through n of them.
/// With `reforward_selected` the n selected neighbours are fed to the student a
/// second time before the backward pass.
struct CostParams {
  double forward = 1.0;
  double backward = 1.0;
  double sort = 0.0;
  std::size_t k1 = 8;
  std::size_t k2 = 8;
  std::size_t n = 4;
  bool reforward_selected = false;

  /// Throws kConfig unless n <= k2 and every cost is non-negative.
  void validate() const;
  /// False when S is not small against F (S >= F / 10).
  bool sort_cost_negligible() const { return sort < 0.1 * forward; }
};

/// k1 F + k1 B.
double vanilla_flops(const CostParams& p);
/// k2 F + S + n B, plus n F with re-forwarding.
double minimax_flops(const CostParams& p);

struct DeltaFlops {
  double exact = 0.0;   // vanilla_flops - minimax_flops
  double approx = 0.0;  // (2 k1 - k2 - n) F, or (2 k1 - k2 - 2n) F with re-forwarding
};

DeltaFlops delta_flops(const CostParams& p);

/// k2 + n < 2 k1, or k2 + 2n < 2 k1 with re-forwarding.
bool efficiency_condition(const CostParams& p);

/// 2 * sum_i d_i d_{i+1}: multiply-accumulates of one example forward pass.
double forward_flops(std::span<const std::size_t> layer_dims);
/// Twice the forward cost (input and weight gradients).
double backward_flops(std::span<const std::size_t> layer_dims);
/// m log2 m comparisons at one FLOP each; 0 for m < 2.
double sort_flops(std::size_t m);

/// Unit costs for a student architecture, with k/n taken from the arguments.
CostParams calibrate(std::span<const std::size_t> student_dims, std::size_t k1, std::size_t k2,
                     std::size_t n, bool reforward_selected);

struct FlopsRow {
  int epoch = 0;
  double predicted_flops = 0.0;
  double measured_seconds = 0.0;
};

/// Counted passes of a run against a baseline run, priced with CostParams.
///
/// Predicted FLOPs per epoch = aug forward * F + aug backward * B + scored
/// examples * S. Reductions are 1 - run / baseline, so positive means the run
/// is cheaper. `agreement` is the ratio of measured to predicted run/baseline
/// cost ratios (1.0 when wall time tracks the FLOP model exactly).
struct FlopsReport {
  std::size_t augmented_forward = 0;
  std::size_t augmented_backward = 0;
  std::size_t baseline_augmented_forward = 0;
  std::size_t baseline_augmented_backward = 0;
  double predicted_flops = 0.0;
  double baseline_predicted_flops = 0.0;
  double measured_seconds = 0.0;
  double baseline_measured_seconds = 0.0;
  double predicted_reduction = 0.0;
  double measured_reduction = 0.0;
  double speedup = 1.0;
  double agreement = 1.0;
  bool sort_cost_negligible = true;
  std::vector<FlopsRow> rows;

  /// key=value lines.
  void write_text(std::ostream& out) const;
  /// Whitespace-separated "epoch predicted measured" table with header.
  void write_table(std::ostream& out) const;
};

/// Throws kComparison when the baseline has no records.
FlopsReport measure_run(std::span<const EpochRecord> run, std::span<const EpochRecord> baseline,
                        const CostParams& unit_costs);

}  // namespace mmknn
