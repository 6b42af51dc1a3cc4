// Domain types shared by the declipping pipeline.
#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fse {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter set violated one of its invariants. `field()` names the offender.
class ParamError : public Error {
 public:
  ParamError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Mono waveform with its sample rate. Samples are always finite.
class AudioSignal {
 public:
  AudioSignal() = default;
  AudioSignal(Eigen::VectorXd samples, int sample_rate);

  const Eigen::VectorXd& samples() const noexcept { return samples_; }
  int sample_rate() const noexcept { return sample_rate_; }
  Eigen::Index size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.size() == 0; }
  double operator[](Eigen::Index i) const { return samples_[i]; }

  /// Same sample rate, new samples (checked).
  AudioSignal with_samples(Eigen::VectorXd samples) const {
    return AudioSignal(std::move(samples), sample_rate_);
  }

 private:
  Eigen::VectorXd samples_;
  int sample_rate_ = 1;
};

/// Per-sample area label: support (valid), lost (clipped), reconstructed.
enum class SampleLabel : std::uint8_t { support, lost, reconstructed };

char label_char(SampleLabel l) noexcept;

/// Labels over a signal. Each index carries exactly one label, so the
/// support, loss and reconstructed areas are disjoint by construction.
class SampleMask {
 public:
  SampleMask() = default;
  explicit SampleMask(std::size_t n, SampleLabel fill = SampleLabel::support) : labels_(n, fill) {}
  explicit SampleMask(std::vector<SampleLabel> labels) : labels_(std::move(labels)) {}

  std::size_t size() const noexcept { return labels_.size(); }
  SampleLabel operator[](std::size_t i) const { return labels_[i]; }
  void set(std::size_t i, SampleLabel l) { labels_.at(i) = l; }
  const std::vector<SampleLabel>& labels() const noexcept { return labels_; }

  /// Masking function: 1 on support and reconstructed, 0 on lost.
  int indicator(std::size_t i) const { return labels_[i] == SampleLabel::lost ? 0 : 1; }

  std::size_t count(SampleLabel l) const noexcept;
  std::vector<std::size_t> indices(SampleLabel l) const;

  /// String of 'A', 'B', 'R' characters; handy in tests and diagnostics.
  std::string to_string() const;
  static SampleMask from_string(std::string_view s);

  friend bool operator==(const SampleMask&, const SampleMask&) = default;

 private:
  std::vector<SampleLabel> labels_;
};

/// Extrapolation parameters. Defaults are the published parameter set.
struct FseParams {
  double gamma = 1.25;          ///< orthogonality deficiency compensation factor
  double rho = 0.99;            ///< weighting function decay
  double delta = 1.0;           ///< extra weight on reconstructed samples
  int support = 1000;           ///< support samples on each side of the center
  int fft_size = 2048;          ///< transform length N
  int max_iter = 1500;
  double residual_tol = 0.0;    ///< relative weighted-residual early stop, 0 disables
  double clip_threshold = 1.0;  ///< clipping level of the signal being repaired
  double peak = 1.0;            ///< largest representable magnitude

  friend bool operator==(const FseParams&, const FseParams&) = default;
};

/// Throws ParamError naming the first field that breaks an invariant.
void validate_params(const FseParams& p);

/// `key = value` lines, one per field, in declaration order.
std::string to_config(const FseParams& p);

/// Parses config text on top of `base`. Blank lines and `#` comments are
/// ignored; unknown keys and malformed values raise ParamError. The result
/// is validated.
FseParams parse_config(std::string_view text, FseParams base = {});
FseParams load_config(const std::string& path, FseParams base = {});

/// Sparse Fourier model of one extrapolation window.
struct WindowModel {
  std::int64_t center = 0;  ///< absolute sample index being reconstructed
  int fft_size = 0;
  /// Expansion coefficients keyed by frequency index. Closed under
  /// (k, N-k) with conjugate values, so the model is real.
  std::map<int, std::complex<double>> coeffs;
  int iterations_used = 0;
  bool converged = false;

  /// Complex model value at window position n; the imaginary part is
  /// rounding residue only.
  std::complex<double> evaluate_complex(int n) const;
  double evaluate(int n) const { return evaluate_complex(n).real(); }
  /// Model over all N window positions.
  Eigen::VectorXd synthesize() const;
};

/// SNR value on clipped positions. `exact` stands in for +infinity.
struct SnrValue {
  bool exact = false;
  double db = 0.0;

  static SnrValue exact_match() { return {true, 0.0}; }
  static SnrValue finite(double db) { return {false, db}; }
  friend bool operator==(const SnrValue&, const SnrValue&) = default;
};

std::string to_string(SnrValue v);

struct SnrEntry {
  std::string signal;
  double theta_c = 0.0;
  std::string engine;  ///< engine id, or "clipped" for the untouched baseline
  std::optional<SnrValue> snr;  ///< empty when the cell failed
  std::size_t clipped = 0;
  double seconds = 0.0;
  std::string error;   ///< failure message for failed cells
};

struct SnrReport {
  std::vector<SnrEntry> entries;

  /// Canonical row order: (signal, theta_c, engine).
  void sort();
};

}  // namespace fse
