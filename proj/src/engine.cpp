#include "fse/engine.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

namespace fse {

EngineKind parse_engine(std::string_view name) {
  if (name == "spectral") return EngineKind::spectral;
  if (name == "reference") return EngineKind::reference;
  throw Error("unknown engine '" + std::string(name) + "' (expected reference or spectral)");
}

std::string_view to_string(EngineKind e) noexcept {
  return e == EngineKind::spectral ? "spectral" : "reference";
}

namespace {

Eigen::FFT<double>& local_fft() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

// Forward transform of a real length-N vector, bins [0, N/2].
void forward_half(const Eigen::VectorXd& x, Eigen::ArrayXd& re, Eigen::ArrayXd& im) {
  thread_local std::vector<double> in;
  thread_local std::vector<std::complex<double>> out;
  in.assign(x.data(), x.data() + x.size());
  local_fft().fwd(out, in);
  const Eigen::Index half = x.size() / 2 + 1;
  re.resize(half);
  im.resize(half);
  for (Eigen::Index k = 0; k < half; ++k) {
    re[k] = out[static_cast<std::size_t>(k)].real();
    im[k] = out[static_cast<std::size_t>(k)].imag();
  }
}

// Below this relative Gram determinant a conjugate pair is treated as one
// real direction.
constexpr double kDegenerateGram = 1e-10;

// cos and sin of 2*pi*j/N for j in [0, N).
struct Twiddles {
  int n = 0;
  Eigen::ArrayXd cos, sin;
};

const Twiddles& twiddles(int n) {
  thread_local Twiddles t;
  if (t.n != n) {
    t.n = n;
    t.cos.resize(n);
    t.sin.resize(n);
    for (int j = 0; j < n; ++j) {
      const double a = 2.0 * std::numbers::pi * j / n;
      t.cos[j] = std::cos(a);
      t.sin[j] = std::sin(a);
    }
  }
  return t;
}

Selection pick_largest(const double* score, int half, int n) {
  // Lane-wise maximum first so the scan vectorizes, then the first bin that
  // attains it.
  constexpr int lanes = 8;
  double lane[lanes];
  std::fill(lane, lane + lanes, score[0]);
  int k = 0;
  for (; k + lanes <= half; k += lanes)
    for (int j = 0; j < lanes; ++j) lane[j] = lane[j] < score[k + j] ? score[k + j] : lane[j];
  double best_score = *std::max_element(lane, lane + lanes);
  for (; k < half; ++k) best_score = std::max(best_score, score[k]);
  const int best = static_cast<int>(std::find(score, score + half, best_score) - score);
  Selection sel;
  sel.u = best;
  sel.paired = best != 0 && 2 * best != n;
  sel.converged = !(best_score > 0.0);
  return sel;
}

void add_coefficient(WindowModel& model, const Selection& sel, std::complex<double> a) {
  model.coeffs[sel.u] += a;
  if (sel.paired) model.coeffs[model.fft_size - sel.u] += std::conj(a);
}

// Energy change sum(w*(r-d)^2) - sum(w*r^2) for the update d built from `a`.
double energy_change(const Selection& sel, std::complex<double> a, std::complex<double> wr_u,
                     double weight_sum, std::complex<double> gram) {
  if (!sel.paired) {
    const double c = a.real();
    return -2.0 * c * wr_u.real() + c * c * weight_sum;
  }
  const double cross = 2.0 * (std::conj(a) * wr_u).real();
  const double self = 2.0 * std::norm(a) * weight_sum + 2.0 * (a * a * std::conj(gram)).real();
  return -2.0 * cross + self;
}

// Kept as free functions with restrict parameters so the loops vectorize.
void pair_update(double* __restrict re, double* __restrict im, double* __restrict score,
                 const double* __restrict alpha, const double* __restrict beta_re,
                 const double* __restrict beta_im, const double* lo_re, const double* lo_im,
                 const double* hi_re, const double* hi_im, double ar, double ai, int half) {
  for (int k = 0; k < half; ++k) {
    const double dr = ar * (lo_re[k] + hi_re[k]) - ai * (lo_im[k] - hi_im[k]);
    const double di = ar * (lo_im[k] + hi_im[k]) + ai * (lo_re[k] - hi_re[k]);
    const double nr = re[k] - dr;
    const double ni = im[k] - di;
    re[k] = nr;
    im[k] = ni;
    score[k] = alpha[k] * (nr * nr + ni * ni) - beta_re[k] * (nr * nr - ni * ni) - beta_im[k] * (2.0 * nr * ni);
  }
}

void single_update(double* __restrict re, double* __restrict im, double* __restrict score,
                   const double* __restrict alpha, const double* __restrict beta_re,
                   const double* __restrict beta_im, const double* lo_re, const double* lo_im, double c,
                   int half) {
  for (int k = 0; k < half; ++k) {
    const double nr = re[k] - c * lo_re[k];
    const double ni = im[k] - c * lo_im[k];
    re[k] = nr;
    im[k] = ni;
    score[k] = alpha[k] * (nr * nr + ni * ni) - beta_re[k] * (nr * nr - ni * ni) - beta_im[k] * (2.0 * nr * ni);
  }
}

}  // namespace

struct SpectralKernel {
  // Wr[k] -= a W[k-u] + conj(a) W[k+u] on bins [0, N/2], refreshing the scores.
  static void apply(SpectralState& s, const Selection& sel, std::complex<double> a) {
    const int n = s.fft_size_;
    const int half = n / 2 + 1;
    const int u = sel.u;
    const double* lo_re = s.wre_.data() + (n - u);
    const double* lo_im = s.wim_.data() + (n - u);
    if (sel.paired) {
      pair_update(s.re_.data(), s.im_.data(), s.score_.data(), s.alpha_.data(), s.beta_re_.data(),
                  s.beta_im_.data(), lo_re, lo_im, s.wre_.data() + u, s.wim_.data() + u, a.real(), a.imag(), half);
    } else {
      single_update(s.re_.data(), s.im_.data(), s.score_.data(), s.alpha_.data(), s.beta_re_.data(),
                    s.beta_im_.data(), lo_re, lo_im, a.real(), half);
    }
  }

  static void refresh(SpectralState& s) {
    s.score_ = s.alpha_ * (s.re_.square() + s.im_.square()) - s.beta_re_ * (s.re_.square() - s.im_.square()) -
               s.beta_im_ * (2.0 * s.re_ * s.im_);
  }
};

WindowData extract_window(const Eigen::VectorXd& signal, const SampleMask& mask, std::size_t index,
                          const FseParams& p) {
  if (static_cast<std::size_t>(signal.size()) != mask.size())
    throw Error("signal and mask lengths differ");
  const int n = p.fft_size;
  const int support = p.support;
  WindowData win;
  win.values = Eigen::VectorXd::Zero(n);
  win.slots.assign(static_cast<std::size_t>(n), WindowSlot::padding);
  win.center = support;
  win.origin = static_cast<std::int64_t>(index) - support;
  const auto len = static_cast<std::int64_t>(signal.size());
  for (int m = 0; m <= 2 * support; ++m) {
    const std::int64_t i = win.origin + m;
    if (i < 0 || i >= len) continue;
    const auto label = mask[static_cast<std::size_t>(i)];
    switch (label) {
      case SampleLabel::support:
        win.slots[m] = WindowSlot::support;
        win.values[m] = signal[i];
        break;
      case SampleLabel::reconstructed:
        win.slots[m] = WindowSlot::reconstructed;
        win.values[m] = signal[i];
        break;
      case SampleLabel::lost:
        win.slots[m] = WindowSlot::lost;
        break;
    }
  }
  return win;
}

WeightVector build_weights(std::span<const WindowSlot> slots, int center, const FseParams& p) {
  if (static_cast<int>(slots.size()) != p.fft_size)
    throw Error("window length must equal fft_size");
  WeightVector out;
  out.w = Eigen::VectorXd::Zero(p.fft_size);
  for (int m = 0; m < p.fft_size; ++m) {
    const auto slot = slots[static_cast<std::size_t>(m)];
    if (slot != WindowSlot::support && slot != WindowSlot::reconstructed) continue;
    const double decay = std::pow(p.rho, std::abs(m - center));
    out.w[m] = slot == WindowSlot::support ? decay : p.delta * decay;
  }
  out.sum = out.w.sum();
  return out;
}

SpectralState::SpectralState(const Eigen::VectorXd& values, const WeightVector& weights)
    : fft_size_(static_cast<int>(values.size())), weight_sum_(weights.sum) {
  if (weights.w.size() != values.size()) throw Error("weights and window lengths differ");
  const Eigen::VectorXd weighted = values.cwiseProduct(weights.w);
  forward_half(weighted, re_, im_);
  energy_ = weighted_energy(weights.w, values);

  std::vector<double> in(weights.w.data(), weights.w.data() + weights.w.size());
  std::vector<std::complex<double>> out;
  local_fft().fwd(out, in);
  const int n = fft_size_;
  wre_.resize(2 * n);
  wim_.resize(2 * n);
  Eigen::VectorXcd spectrum(n);
  for (int j = 0; j < 2 * n; ++j) {
    wre_[j] = out[static_cast<std::size_t>(j % n)].real();
    wim_[j] = out[static_cast<std::size_t>(j % n)].imag();
  }
  for (int j = 0; j < n; ++j) spectrum[j] = out[static_cast<std::size_t>(j)];
  auto sw = selection_weights(weight_sum_, spectrum);
  alpha_ = std::move(sw.alpha);
  beta_re_ = std::move(sw.beta_re);
  beta_im_ = std::move(sw.beta_im);
  SpectralKernel::refresh(*this);
}

SelectionWeights selection_weights(double weight_sum, const Eigen::VectorXcd& weight_spectrum) {
  const auto n = static_cast<int>(weight_spectrum.size());
  const int half = n / 2 + 1;
  const double a = weight_sum;
  const double a2 = a * a;
  SelectionWeights sw{Eigen::ArrayXd::Zero(half), Eigen::ArrayXd::Zero(half), Eigen::ArrayXd::Zero(half)};
  for (int k = 0; k < half; ++k) {
    if (k == 0 || 2 * k == n) {
      // Re(X)^2 / A
      sw.alpha[k] = 0.5 / a;
      sw.beta_re[k] = -0.5 / a;
      continue;
    }
    const std::complex<double> g = weight_spectrum[(2 * k) % n];
    const double det = a2 - std::norm(g);
    if (det > kDegenerateGram * a2) {
      sw.alpha[k] = 2.0 * a / det;
      sw.beta_re[k] = 2.0 * g.real() / det;
      sw.beta_im[k] = 2.0 * g.imag() / det;
    } else {
      // Energy removed by the fallback coefficient X / (A + |G|).
      const double s = a + std::abs(g);
      sw.alpha[k] = 4.0 / s - 2.0 * a / (s * s);
      sw.beta_re[k] = 2.0 * g.real() / (s * s);
      sw.beta_im[k] = 2.0 * g.imag() / (s * s);
    }
  }
  return sw;
}

std::complex<double> SpectralState::weighted_residual(int k) const {
  const int n = fft_size_;
  k = ((k % n) + n) % n;
  if (k <= n / 2) return {re_[k], im_[k]};
  return {re_[n - k], -im_[n - k]};
}

Eigen::VectorXcd SpectralState::weighted_residual_spectrum() const {
  Eigen::VectorXcd out(fft_size_);
  for (int k = 0; k < fft_size_; ++k) out[k] = weighted_residual(k);
  return out;
}

std::complex<double> SpectralState::weight_spectrum(int k) const {
  const int n = fft_size_;
  k = ((k % n) + n) % n;
  return {wre_[k], wim_[k]};
}

Eigen::VectorXcd project(const SpectralState& state, const WeightVector& weights) {
  if (!weights.usable()) throw NoSupportError("projection needs a positive weight sum");
  return state.weighted_residual_spectrum() / weights.sum;
}

Selection select_basis(const Eigen::VectorXcd& p, const WeightVector& weights) {
  const int n = static_cast<int>(p.size());
  if (weights.w.size() != p.size()) throw Error("projection and weight lengths differ");
  if (!weights.usable()) throw NoSupportError("selection needs a positive weight sum");
  std::vector<double> in(weights.w.data(), weights.w.data() + n);
  std::vector<std::complex<double>> out;
  local_fft().fwd(out, in);
  const Eigen::VectorXcd spectrum = Eigen::Map<const Eigen::VectorXcd>(out.data(), n);
  const auto sw = selection_weights(weights.sum, spectrum);
  const Eigen::ArrayXcd x = p.head(n / 2 + 1).array() * weights.sum;
  const Eigen::ArrayXd xr = x.real(), xi = x.imag();
  const Eigen::ArrayXd score =
      sw.alpha * (xr.square() + xi.square()) - sw.beta_re * (xr.square() - xi.square()) - sw.beta_im * (2.0 * xr * xi);
  return pick_largest(score.data(), n / 2 + 1, n);
}

Selection select_basis(const SpectralState& state) {
  return pick_largest(state.score_.data(), state.fft_size_ / 2 + 1, state.fft_size_);
}

std::complex<double> odc_coefficient(const Selection& sel, std::complex<double> weighted_residual_u,
                                     double weight_sum, std::complex<double> gram, double gamma) {
  if (!sel.paired) return {gamma * weighted_residual_u.real() / weight_sum, 0.0};
  const double a2 = weight_sum * weight_sum;
  const double det = a2 - std::norm(gram);
  std::complex<double> a;
  if (det > kDegenerateGram * a2) {
    a = (weight_sum * weighted_residual_u - gram * std::conj(weighted_residual_u)) / det;
  } else {
    // phi_u and its conjugate are nearly dependent under w; this step still
    // never increases the weighted residual energy for gamma < 2.
    a = weighted_residual_u / (weight_sum + std::abs(gram));
  }
  return gamma * a;
}

std::complex<double> odc_update(SpectralState& state, WindowModel& model, const Selection& sel,
                                double gamma) {
  const std::complex<double> wr_u = state.weighted_residual(sel.u);
  const std::complex<double> gram = state.weight_spectrum(2 * sel.u);
  const std::complex<double> a = odc_coefficient(sel, wr_u, state.weight_sum_, gram, gamma);
  state.energy_ += energy_change(sel, a, wr_u, state.weight_sum_, gram);
  SpectralKernel::apply(state, sel, a);
  add_coefficient(model, sel, a);
  ++state.nu_;
  return a;
}

namespace {

WindowModel spectral_model(const WindowData& window, const WeightVector& weights, const FseParams& p,
                           WindowModel model, WindowTrace* trace) {
  SpectralState state(window.values, weights);
  const double initial = state.residual_energy();
  if (trace) trace->residual_energy.push_back(initial);
  for (int it = 0; it < p.max_iter; ++it) {
    const Selection sel = select_basis(state);
    if (sel.converged) {
      model.converged = true;
      break;
    }
    odc_update(state, model, sel, p.gamma);
    ++model.iterations_used;
    if (trace) {
      trace->selected.push_back(sel.u);
      trace->residual_energy.push_back(state.residual_energy());
    }
    if (p.residual_tol > 0.0 && state.residual_energy() <= p.residual_tol * initial) {
      model.converged = true;
      break;
    }
  }
  return model;
}

WindowModel reference_model(const WindowData& window, const WeightVector& weights, const FseParams& p,
                            WindowModel model, WindowTrace* trace) {
  const int n = p.fft_size;
  const int half = n / 2 + 1;
  const Twiddles& tw = twiddles(n);
  const Eigen::VectorXd& w = weights.w;
  Eigen::VectorXd residual = window.values;
  Eigen::ArrayXd re, im;
  Eigen::VectorXcd weight_spectrum(n);
  {
    std::vector<double> in(w.data(), w.data() + n);
    std::vector<std::complex<double>> out;
    local_fft().fwd(out, in);
    for (int k = 0; k < n; ++k) weight_spectrum[k] = out[static_cast<std::size_t>(k)];
  }
  const SelectionWeights sw = selection_weights(weights.sum, weight_spectrum);

  const double initial = weighted_energy(w, residual);
  if (trace) trace->residual_energy.push_back(initial);
  for (int it = 0; it < p.max_iter; ++it) {
    forward_half(residual.cwiseProduct(w), re, im);
    const Eigen::ArrayXd score =
        sw.alpha * (re.square() + im.square()) - sw.beta_re * (re.square() - im.square()) - sw.beta_im * (2.0 * re * im);
    const Selection sel = pick_largest(score.data(), half, n);
    if (sel.converged) {
      model.converged = true;
      break;
    }
    const long long u = sel.u;
    std::complex<double> gram{0.0, 0.0};
    for (int m = 0; m < n; ++m) {
      const auto j = static_cast<Eigen::Index>((2 * u * m) % n);
      gram += w[m] * std::complex<double>(tw.cos[j], -tw.sin[j]);
    }
    const std::complex<double> a =
        odc_coefficient(sel, {re[sel.u], im[sel.u]}, weights.sum, gram, p.gamma);
    for (int m = 0; m < n; ++m) {
      const auto j = static_cast<Eigen::Index>((u * m) % n);
      const double term = a.real() * tw.cos[j] - a.imag() * tw.sin[j];
      residual[m] -= sel.paired ? 2.0 * term : term;
    }
    add_coefficient(model, sel, a);
    ++model.iterations_used;
    const double energy = weighted_energy(w, residual);
    if (trace) {
      trace->selected.push_back(sel.u);
      trace->residual_energy.push_back(energy);
    }
    if (p.residual_tol > 0.0 && energy <= p.residual_tol * initial) {
      model.converged = true;
      break;
    }
  }
  return model;
}

}  // namespace

WindowModel generate_window_model(const WindowData& window, const FseParams& p, EngineKind engine,
                                  WindowTrace* trace) {
  if (window.values.size() != p.fft_size || static_cast<int>(window.slots.size()) != p.fft_size)
    throw Error("window length must equal fft_size");
  const WeightVector weights = build_weights(window.slots, window.center, p);
  if (!weights.usable())
    throw NoSupportError("no support around sample " + std::to_string(window.origin + window.center));

  WindowModel model;
  model.center = window.origin + window.center;
  model.fft_size = p.fft_size;
  return engine == EngineKind::spectral ? spectral_model(window, weights, p, std::move(model), trace)
                                        : reference_model(window, weights, p, std::move(model), trace);
}

double clamp_estimate(double g_center, double rail_value, const FseParams& p) {
  if (rail_value >= 0.0) return std::clamp(g_center, p.clip_threshold, p.peak);
  return std::clamp(g_center, -p.peak, -p.clip_threshold);
}

std::vector<ClippedRun> clipped_runs(const SampleMask& mask) {
  std::vector<ClippedRun> runs;
  const std::size_t n = mask.size();
  for (std::size_t i = 0; i < n;) {
    if (mask[i] != SampleLabel::lost) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && mask[j] == SampleLabel::lost) ++j;
    runs.push_back({i, j - i});
    i = j;
  }
  return runs;
}

namespace {

std::vector<std::size_t> run_order(const ClippedRun& run, std::size_t signal_length) {
  std::vector<std::size_t> order;
  order.reserve(run.length);
  const bool at_start = run.start == 0;
  const bool at_end = run.start + run.length == signal_length;
  if (at_start && !at_end) {
    for (std::size_t k = run.length; k-- > 0;) order.push_back(run.start + k);
  } else if (at_end && !at_start) {
    for (std::size_t k = 0; k < run.length; ++k) order.push_back(run.start + k);
  } else {
    std::size_t lo = run.start;
    std::size_t hi = run.start + run.length;  // one past
    bool left = true;
    while (lo < hi) {
      order.push_back(left ? lo++ : --hi);
      left = !left;
    }
  }
  return order;
}

void sort_by_priority(std::vector<ClippedRun>& runs) {
  std::stable_sort(runs.begin(), runs.end(), [](const ClippedRun& a, const ClippedRun& b) {
    return a.length != b.length ? a.length < b.length : a.start < b.start;
  });
}

// Runs partitioned into independent groups, each in processing order.
std::vector<std::vector<ClippedRun>> group_runs(const SampleMask& mask, int support) {
  const auto runs = clipped_runs(mask);
  std::vector<std::vector<ClippedRun>> groups;
  const std::size_t min_gap = 2 * static_cast<std::size_t>(support) + 1;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i == 0 || runs[i].start - (runs[i - 1].start + runs[i - 1].length) >= min_gap)
      groups.emplace_back();
    groups.back().push_back(runs[i]);
  }
  for (auto& g : groups) sort_by_priority(g);
  return groups;
}

}  // namespace

std::vector<std::size_t> processing_order(const SampleMask& mask) {
  auto runs = clipped_runs(mask);
  sort_by_priority(runs);
  std::vector<std::size_t> order;
  for (const auto& run : runs) {
    const auto part = run_order(run, mask.size());
    order.insert(order.end(), part.begin(), part.end());
  }
  return order;
}

std::vector<std::vector<std::size_t>> processing_groups(const SampleMask& mask, int support) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& group : group_runs(mask, support)) {
    auto& indices = out.emplace_back();
    for (const auto& run : group) {
      const auto part = run_order(run, mask.size());
      indices.insert(indices.end(), part.begin(), part.end());
    }
  }
  return out;
}

namespace {

struct GroupOutcome {
  std::vector<SampleStat> samples;
  std::vector<RunStat> runs;
  std::vector<std::size_t> skipped;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

DeclipResult declip(const AudioSignal& f, const SampleMask& mask, const FseParams& p,
                    const DeclipOptions& options) {
  validate_params(p);
  if (static_cast<std::size_t>(f.size()) != mask.size())
    throw Error("mask length " + std::to_string(mask.size()) + " differs from signal length " +
                std::to_string(f.size()));
  const auto t0 = Clock::now();

  Eigen::VectorXd work = f.samples();
  SampleMask labels = mask;
  const auto groups = group_runs(mask, p.support);
  std::vector<GroupOutcome> outcomes(groups.size());

  // Groups touch disjoint samples, so they can run in any order.
  auto process_group = [&](std::size_t g) {
    GroupOutcome& out = outcomes[g];
    for (const auto& run : groups[g]) {
      const auto run_start = Clock::now();
      for (std::size_t idx : run_order(run, labels.size())) {
        const WindowData window = extract_window(work, labels, idx, p);
        WindowModel model;
        try {
          model = generate_window_model(window, p, options.engine);
        } catch (const NoSupportError&) {
          out.skipped.push_back(idx);
          continue;
        }
        const double g_center = model.evaluate(window.center);
        work[static_cast<Eigen::Index>(idx)] = clamp_estimate(g_center, f[static_cast<Eigen::Index>(idx)], p);
        labels.set(idx, SampleLabel::reconstructed);
        out.samples.push_back({idx, model.iterations_used, model.converged});
      }
      out.runs.push_back({run.start, run.length, seconds_since(run_start)});
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, options.workers));
  if (workers == 1 || groups.size() <= 1) {
    for (std::size_t g = 0; g < groups.size(); ++g) process_group(g);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(workers, groups.size()); ++t) {
      pool.emplace_back([&] {
        for (std::size_t g; (g = next.fetch_add(1)) < groups.size();) process_group(g);
      });
    }
  }

  DeclipStats stats;
  for (auto& out : outcomes) {
    stats.samples.insert(stats.samples.end(), out.samples.begin(), out.samples.end());
    stats.runs.insert(stats.runs.end(), out.runs.begin(), out.runs.end());
    stats.skipped.insert(stats.skipped.end(), out.skipped.begin(), out.skipped.end());
  }
  std::sort(stats.runs.begin(), stats.runs.end(),
            [](const RunStat& a, const RunStat& b) { return a.start < b.start; });
  std::sort(stats.skipped.begin(), stats.skipped.end());
  stats.reconstructed = stats.samples.size();
  for (const auto& s : stats.samples) stats.total_iterations += s.iterations;
  stats.seconds = seconds_since(t0);

  return {f.with_samples(std::move(work)), std::move(labels), std::move(stats)};
}

}  // namespace fse
