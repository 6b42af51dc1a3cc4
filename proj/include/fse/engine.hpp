// Frequency selective extrapolation of clipped samples.
//
// Every lost sample is estimated from its own extrapolation window: the
// center sample plus `support` samples on each side, embedded in a length-N
// transform whose surplus positions are zero padding. Inside the window the
// signal is approximated by a sparse sum of Fourier basis functions chosen
// greedily under an exponentially decaying weight. The model value at the
// center, clamped to the band between the clipping level and the peak,
// replaces the lost sample.
//
// Two engines produce the same models. `reference` keeps the residual in
// the time domain and re-transforms it every iteration. `spectral` keeps only
// the transform of the weighted residual and updates it by a shifted copy of
// the weight spectrum, which is what makes full-length runs affordable.
#pragma once

#include "fse/core.hpp"

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fse {

enum class EngineKind { reference, spectral };

EngineKind parse_engine(std::string_view name);
std::string_view to_string(EngineKind e) noexcept;

/// The window has no sample with nonzero weight.
class NoSupportError : public Error {
 public:
  using Error::Error;
};

enum class WindowSlot : std::uint8_t { support, lost, reconstructed, padding };

/// One extrapolation window laid out in transform order.
struct WindowData {
  Eigen::VectorXd values;         ///< length N, zero on lost and padding slots
  std::vector<WindowSlot> slots;  ///< length N
  int center = 0;                 ///< window position of the sample being estimated
  std::int64_t origin = 0;        ///< absolute index of window position 0
};

/// Cuts the window around `index`. Position `support` holds the center;
/// positions past the signal ends and past 2*support are padding.
WindowData extract_window(const Eigen::VectorXd& signal, const SampleMask& mask, std::size_t index,
                          const FseParams& p);

struct WeightVector {
  Eigen::VectorXd w;
  double sum = 0.0;

  bool usable() const noexcept { return sum > 0.0; }
};

/// rho^|n - center| on support, delta times that on reconstructed slots,
/// zero on lost and padding.
WeightVector build_weights(std::span<const WindowSlot> slots, int center, const FseParams& p);

/// Weighted residual energy sum(w * r^2); works on any pair of Eigen expressions.
template <typename DerivedW, typename DerivedR>
double weighted_energy(const Eigen::MatrixBase<DerivedW>& w, const Eigen::MatrixBase<DerivedR>& r) {
  return (w.array() * r.array().square()).sum();
}

struct Selection {
  int u = 0;
  bool paired = false;     ///< N-u is updated together with u
  bool converged = false;  ///< every projection is zero
};

/// Per-bin quadratic form alpha|X|^2 - Re(beta conj(X)^2) giving the weighted
/// residual energy removed by the unscaled update of bin k in [0, N/2], where
/// X is the weighted residual spectrum at k.
struct SelectionWeights {
  Eigen::ArrayXd alpha, beta_re, beta_im;
};

SelectionWeights selection_weights(double weight_sum, const Eigen::VectorXcd& weight_spectrum);

/// Frequency-domain state of one window: the transform of w*r on bins
/// [0, N/2] (the rest follows by conjugate symmetry) and the transform of w.
class SpectralState {
 public:
  SpectralState(const Eigen::VectorXd& values, const WeightVector& weights);

  int fft_size() const noexcept { return fft_size_; }
  int iteration() const noexcept { return nu_; }
  double weight_sum() const noexcept { return weight_sum_; }
  /// Tracked sum(w * r^2), updated analytically with every step.
  double residual_energy() const noexcept { return energy_; }

  std::complex<double> weighted_residual(int k) const;
  Eigen::VectorXcd weighted_residual_spectrum() const;
  std::complex<double> weight_spectrum(int k) const;

 private:
  friend struct SpectralKernel;
  friend Selection select_basis(const SpectralState& state);
  friend std::complex<double> odc_update(SpectralState&, WindowModel&, const Selection&, double);

  int fft_size_ = 0;
  int nu_ = 0;
  double weight_sum_ = 0.0;
  double energy_ = 0.0;
  Eigen::ArrayXd re_, im_;    // weighted residual spectrum, bins [0, N/2]
  Eigen::ArrayXd wre_, wim_;  // weight spectrum, periodically extended to 2N
  Eigen::ArrayXd alpha_, beta_re_, beta_im_;  // selection weights, bins [0, N/2]
  Eigen::ArrayXd score_;                       // energy each bin would remove
};

/// p_k = Wr[k] / sum(w) for every k in [0, N). With |phi_k|^2 = 1 the
/// projection denominator is the same weight sum for every k.
Eigen::VectorXcd project(const SpectralState& state, const WeightVector& weights);

/// Picks the basis function whose fit removes the most weighted residual
/// energy, searching k in [0, N/2] with the smallest k winning ties.
/// Residuals are real, so bins above N/2 mirror the lower half. Bins 0 and
/// N/2 are their own conjugates and are fitted alone, where the energy
/// removed is Re(p_k)^2 sum(w). Every other bin is fitted together with N-u as
/// a real pair, and the energy removed also depends on the overlap of the
/// pair under the weight (the weight spectrum at 2k).
Selection select_basis(const Eigen::VectorXcd& p, const WeightVector& weights);
Selection select_basis(const SpectralState& state);

/// Expansion coefficient for the selected basis function. For a conjugate
/// pair this is the weighted least-squares fit of the real pair
/// a*phi_u + conj(a)*phi_-u to the residual, scaled by gamma; it reduces to
/// gamma * p_u when the pair is orthogonal under the weight. `gram` is
/// sum(w * conj(phi_u)^2), i.e. the weight spectrum at bin 2u.
std::complex<double> odc_coefficient(const Selection& sel, std::complex<double> weighted_residual_u,
                                     double weight_sum, std::complex<double> gram, double gamma);

/// Adds gamma-scaled coefficients for `sel` to the model and removes the
/// corresponding component from the weighted residual spectrum. Returns the
/// coefficient stored at bin u.
std::complex<double> odc_update(SpectralState& state, WindowModel& model, const Selection& sel,
                                double gamma);

/// Per-iteration record for diagnostics and tests.
struct WindowTrace {
  std::vector<int> selected;
  std::vector<double> residual_energy;  ///< after each iteration; front() is the initial energy
};

/// Builds the sparse model of one window. Throws NoSupportError when the
/// weights vanish. Stops after max_iter iterations, when every projection
/// is zero, or when the weighted residual energy falls to residual_tol
/// times its initial value.
WindowModel generate_window_model(const WindowData& window, const FseParams& p,
                                  EngineKind engine = EngineKind::spectral, WindowTrace* trace = nullptr);

/// Clamps a model value into the band between the clipping level and the
/// peak on the rail given by the sign of `rail_value`.
double clamp_estimate(double g_center, double rail_value, const FseParams& p);

struct ClippedRun {
  std::size_t start = 0;
  std::size_t length = 0;

  friend bool operator==(const ClippedRun&, const ClippedRun&) = default;
};

/// Maximal blocks of lost samples, left to right.
std::vector<ClippedRun> clipped_runs(const SampleMask& mask);

/// Lost indices in reconstruction order. Shorter runs go first (leftmost on
/// ties); each run is eaten from both ends inward, alternating, left end
/// first. A run touching a signal end is eaten from its interior end only.
std::vector<std::size_t> processing_order(const SampleMask& mask);

/// processing_order split into groups whose windows never reach each other:
/// consecutive runs closer than 2*support + 1 samples share a group.
std::vector<std::vector<std::size_t>> processing_groups(const SampleMask& mask, int support);

struct SampleStat {
  std::size_t index = 0;
  int iterations = 0;
  bool converged = false;
};

struct RunStat {
  std::size_t start = 0;
  std::size_t length = 0;
  double seconds = 0.0;
};

struct DeclipStats {
  std::vector<SampleStat> samples;  ///< in processing order within each group
  std::vector<RunStat> runs;        ///< sorted by start
  std::vector<std::size_t> skipped; ///< lost samples without usable support
  std::size_t reconstructed = 0;
  std::int64_t total_iterations = 0;
  double seconds = 0.0;
};

struct DeclipResult {
  AudioSignal signal;
  SampleMask mask;
  DeclipStats stats;
};

struct DeclipOptions {
  EngineKind engine = EngineKind::spectral;
  int workers = 1;  ///< threads over independent groups; output does not depend on it
};

/// Replaces every lost sample of `f` by its clamped model estimate and
/// relabels it reconstructed. Support samples are copied bit-exactly.
/// `p.clip_threshold` must be the clipping level of `f`.
DeclipResult declip(const AudioSignal& f, const SampleMask& mask, const FseParams& p,
                    const DeclipOptions& options = {});

}  // namespace fse
