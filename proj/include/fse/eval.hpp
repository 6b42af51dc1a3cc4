// Reconstruction quality on clipped positions and the clipping-level sweep.
#pragma once

#include "fse/core.hpp"
#include "fse/engine.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fse {

/// The metric has no clipped positions to look at.
class MetricUndefined : public Error {
 public:
  using Error::Error;
};

/// Stand-in for -infinity when the reference is silent on every clipped position.
inline constexpr double kSnrFloorDb = -99.0;

/// 10 log10(sum s^2 / sum (s - s_hat)^2) over positions the mask labels lost
/// or reconstructed, i.e. the positions that were clipped. Pass the mask
/// from detection time or the one declip returns; both mark the same set.
template <typename DerivedS, typename DerivedH>
SnrValue snr_miss(const Eigen::MatrixBase<DerivedS>& s, const Eigen::MatrixBase<DerivedH>& s_hat,
                  const SampleMask& mask) {
  if (s.size() != s_hat.size() || static_cast<std::size_t>(s.size()) != mask.size())
    throw Error("snr_miss needs equal lengths");
  double signal = 0.0;
  double error = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)] == SampleLabel::support) continue;
    const double e = s(i) - s_hat(i);
    signal += s(i) * s(i);
    error += e * e;
    ++count;
  }
  if (count == 0) throw MetricUndefined("metric undefined: no clipped positions");
  if (error == 0.0) return SnrValue::exact_match();
  if (signal == 0.0) return SnrValue::finite(kSnrFloorDb);
  return SnrValue::finite(std::max(kSnrFloorDb, 10.0 * std::log10(signal / error)));
}

inline SnrValue snr_miss(const AudioSignal& s, const AudioSignal& s_hat, const SampleMask& mask) {
  return snr_miss(s.samples(), s_hat.samples(), mask);
}

inline constexpr const char* kBaselineEngine = "clipped";

struct SweepSpec {
  std::vector<double> thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<EngineKind> engines{EngineKind::spectral};
  FseParams params{};
  double detect_tolerance = 0.0;
  int workers = 1;  ///< threads over sweep cells
};

void validate_sweep(const SweepSpec& spec);

struct SweepOutput {
  double theta_c = 0.0;
  EngineKind engine = EngineKind::spectral;
  AudioSignal signal;
};

/// Clips `clean` at every threshold, declips with every engine and records
/// SNR on the clipped positions, clipped-sample count and declip wall time.
/// Each threshold also gets a baseline row for the clipped signal itself.
/// A failing cell is recorded with its message instead of aborting.
SnrReport run_sweep(const AudioSignal& clean, const SweepSpec& spec, const std::string& signal_id = "signal",
                    std::vector<SweepOutput>* outputs = nullptr);

/// Mean over matching (signal, theta) cells of snr_a - snr_b. Baseline rows
/// are ignored. Throws when the cell sets differ.
double average_gain(const SnrReport& a, const SnrReport& b);

/// One row per (theta, engine) with the dB-domain mean over signals, signal
/// id "average". Exact cells are left out of the mean; a cell that is exact
/// for every signal stays exact.
SnrReport average_by_threshold(const SnrReport& report);

struct ReportFormat {
  bool include_timing = false;  ///< wall time breaks byte-for-byte reproducibility
};

/// Header `signal,theta_c,engine,snr_db,clipped,seconds`.
std::string to_csv(const SnrReport& report, ReportFormat fmt = {});
std::string to_json(const SnrReport& report, ReportFormat fmt = {});

}  // namespace fse
