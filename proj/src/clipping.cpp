#include "fse/clipping.hpp"

#include <algorithm>
#include <cmath>

namespace fse {

void validate_clip_spec(const ClipSpec& spec) {
  if (!std::isfinite(spec.threshold) || spec.threshold <= 0.0 || spec.threshold > 1.0)
    throw ParamError("threshold", "must lie in (0, 1]");
  if (!std::isfinite(spec.detect_tolerance) || spec.detect_tolerance < 0.0)
    throw ParamError("detect_tolerance", "must be >= 0");
  if (spec.threshold - spec.detect_tolerance <= 0.0)
    throw ParamError("detect_tolerance", "must be smaller than the threshold");
}

AudioSignal normalize_peak(const AudioSignal& x) {
  const double peak = x.empty() ? 0.0 : x.samples().cwiseAbs().maxCoeff();
  if (peak == 0.0) throw Error("cannot normalize a signal without a nonzero sample");
  return x.with_samples(x.samples() / peak);
}

AudioSignal hard_clip(const AudioSignal& x, double theta) {
  if (!(theta > 0.0)) throw ParamError("theta", "clipping level must be positive");
  return x.with_samples(x.samples().cwiseMax(-theta).cwiseMin(theta));
}

SampleMask detect_clipped(const AudioSignal& f, const ClipSpec& spec) {
  validate_clip_spec(spec);
  const double level = spec.threshold - spec.detect_tolerance;
  SampleMask mask(static_cast<std::size_t>(f.size()));
  for (Eigen::Index i = 0; i < f.size(); ++i)
    if (std::abs(f[i]) >= level) mask.set(static_cast<std::size_t>(i), SampleLabel::lost);
  return mask;
}

double estimate_threshold(const AudioSignal& f) {
  if (f.empty()) throw Error("cannot estimate the clipping level of an empty signal");
  return f.samples().cwiseAbs().maxCoeff();
}

bool has_clipping_plateau(const AudioSignal& f, const ClipSpec& spec, std::size_t min_run) {
  validate_clip_spec(spec);
  const double level = spec.threshold - spec.detect_tolerance;
  std::size_t run = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    run = std::abs(f[i]) >= level ? run + 1 : 0;
    if (run >= std::max<std::size_t>(min_run, 1)) return true;
  }
  return false;
}

}  // namespace fse
