// SPDX-License-Identifier: Apache-2.0
#include "mmknn/flops_accounting.hpp"

#include <cmath>
#include <iomanip>

#include "mmknn/error.hpp"
#include "mmknn/trainer.hpp"

namespace mmknn {

void CostParams::validate() const {
  if (n > k2) {
    throw Error(ErrorKind::kConfig,
                "n (" + std::to_string(n) + ") must not exceed k2 (" + std::to_string(k2) + ")");
  }
  if (!(forward >= 0.0) || !(backward >= 0.0) || !(sort >= 0.0)) {
    throw Error(ErrorKind::kConfig, "costs must be non-negative");
  }
}

double vanilla_flops(const CostParams& p) {
  p.validate();
  const auto k1 = static_cast<double>(p.k1);
  return k1 * p.forward + k1 * p.backward;
}

double minimax_flops(const CostParams& p) {
  p.validate();
  const auto n = static_cast<double>(p.n);
  double total = static_cast<double>(p.k2) * p.forward + p.sort + n * p.backward;
  if (p.reforward_selected) total += n * p.forward;
  return total;
}

DeltaFlops delta_flops(const CostParams& p) {
  DeltaFlops d;
  d.exact = vanilla_flops(p) - minimax_flops(p);
  const auto k1 = static_cast<double>(p.k1);
  const auto k2 = static_cast<double>(p.k2);
  const auto n = static_cast<double>(p.n);
  const double selected = p.reforward_selected ? 2.0 * n : n;
  d.approx = (2.0 * k1 - k2 - selected) * p.forward;
  return d;
}

bool efficiency_condition(const CostParams& p) {
  p.validate();
  const std::size_t selected = p.reforward_selected ? 2 * p.n : p.n;
  return p.k2 + selected < 2 * p.k1;
}

double forward_flops(std::span<const std::size_t> layer_dims) {
  double macs = 0.0;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    macs += static_cast<double>(layer_dims[i]) * static_cast<double>(layer_dims[i + 1]);
  }
  return 2.0 * macs;
}

double backward_flops(std::span<const std::size_t> layer_dims) {
  return 2.0 * forward_flops(layer_dims);
}

double sort_flops(std::size_t m) {
  if (m < 2) return 0.0;
  const auto mm = static_cast<double>(m);
  return mm * std::log2(mm);
}

CostParams calibrate(std::span<const std::size_t> student_dims, std::size_t k1, std::size_t k2,
                     std::size_t n, bool reforward_selected) {
  CostParams p;
  p.forward = forward_flops(student_dims);
  p.backward = backward_flops(student_dims);
  p.sort = sort_flops(k2);
  p.k1 = k1;
  p.k2 = k2;
  p.n = n;
  p.reforward_selected = reforward_selected;
  p.validate();
  return p;
}

void FlopsReport::write_text(std::ostream& out) const {
  out << std::setprecision(10);
  out << "augmented_forward=" << augmented_forward << '\n'
      << "augmented_backward=" << augmented_backward << '\n'
      << "baseline_augmented_forward=" << baseline_augmented_forward << '\n'
      << "baseline_augmented_backward=" << baseline_augmented_backward << '\n'
      << "predicted_flops=" << predicted_flops << '\n'
      << "baseline_predicted_flops=" << baseline_predicted_flops << '\n'
      << "measured_seconds=" << measured_seconds << '\n'
      << "baseline_measured_seconds=" << baseline_measured_seconds << '\n'
      << "predicted_reduction=" << predicted_reduction << '\n'
      << "measured_reduction=" << measured_reduction << '\n'
      << "speedup=" << speedup << '\n'
      << "agreement=" << agreement << '\n'
      << "sort_cost_negligible=" << (sort_cost_negligible ? "true" : "false") << '\n';
}

void FlopsReport::write_table(std::ostream& out) const {
  out << std::setprecision(10);
  out << "epoch predicted measured\n";
  for (const auto& r : rows) {
    out << r.epoch << ' ' << r.predicted_flops << ' ' << r.measured_seconds << '\n';
  }
}

namespace {

double predicted(const EpochRecord& r, const CostParams& c) {
  return static_cast<double>(r.augmented_forward) * c.forward +
         static_cast<double>(r.augmented_backward) * c.backward +
         static_cast<double>(r.scored_examples) * c.sort;
}

double ratio_or_one(double num, double den) { return den > 0.0 ? num / den : 1.0; }

}  // namespace

FlopsReport measure_run(std::span<const EpochRecord> run, std::span<const EpochRecord> baseline,
                        const CostParams& unit_costs) {
  if (baseline.empty()) throw Error(ErrorKind::kComparison, "baseline run has no epoch records");
  unit_costs.validate();
  FlopsReport report;
  report.sort_cost_negligible = unit_costs.sort_cost_negligible();
  for (const auto& r : run) {
    report.augmented_forward += r.augmented_forward;
    report.augmented_backward += r.augmented_backward;
    const double flops = predicted(r, unit_costs);
    report.predicted_flops += flops;
    report.measured_seconds += r.augmented_wall_time;
    report.rows.push_back({r.epoch, flops, r.augmented_wall_time});
  }
  for (const auto& r : baseline) {
    report.baseline_augmented_forward += r.augmented_forward;
    report.baseline_augmented_backward += r.augmented_backward;
    report.baseline_predicted_flops += predicted(r, unit_costs);
    report.baseline_measured_seconds += r.augmented_wall_time;
  }
  const double predicted_ratio = ratio_or_one(report.predicted_flops, report.baseline_predicted_flops);
  const double measured_ratio =
      ratio_or_one(report.measured_seconds, report.baseline_measured_seconds);
  report.predicted_reduction = 1.0 - predicted_ratio;
  report.measured_reduction = 1.0 - measured_ratio;
  report.speedup = measured_ratio > 0.0 ? 1.0 / measured_ratio : 1.0;
  report.agreement = predicted_ratio > 0.0 ? measured_ratio / predicted_ratio : 1.0;
  return report;
}

}  // namespace mmknn
