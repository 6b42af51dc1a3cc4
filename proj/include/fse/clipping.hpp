// Peak normalization, artificial hard clipping and clipped-sample detection.
#pragma once

#include "fse/core.hpp"

namespace fse {

struct ClipSpec {
  double threshold = 1.0;
  /// Slack for recognizing plateaus in quantized data.
  double detect_tolerance = 0.0;
};

void validate_clip_spec(const ClipSpec& spec);

/// x / max|x|. Throws on an all-zero signal.
AudioSignal normalize_peak(const AudioSignal& x);

/// Clamps every sample to [-theta, theta]. Samples strictly inside the band
/// are returned untouched.
AudioSignal hard_clip(const AudioSignal& x, double theta);

/// Labels lost every sample with |f| >= threshold - tolerance, support otherwise.
SampleMask detect_clipped(const AudioSignal& f, const ClipSpec& spec);

/// max|f|, the tightest clipping level consistent with the data.
double estimate_threshold(const AudioSignal& f);

/// True when at least `min_run` consecutive samples sit at or beyond the
/// detection level. A clean recording reaches its own peak in isolated
/// samples, a clipped one in plateaus.
bool has_clipping_plateau(const AudioSignal& f, const ClipSpec& spec, std::size_t min_run = 2);

}  // namespace fse
