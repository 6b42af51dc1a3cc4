#include <doctest.h>

#include "fse/fse.hpp"
#include "oracle.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

using fse::EngineKind;
using fse::FseParams;
using fse::SampleLabel;
using fse::WindowSlot;

namespace {

fse::WindowData full_window(const Eigen::VectorXd& values, int center) {
  fse::WindowData win;
  win.values = values;
  win.slots.assign(static_cast<std::size_t>(values.size()), WindowSlot::support);
  win.center = center;
  return win;
}

Eigen::VectorXd cosine(int n, double bin, double amp = 1.0, double phase = 0.0, int N = 2048) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = amp * std::cos(2.0 * std::numbers::pi * bin * i / N + phase);
  return x;
}

// A window cut from speech-like audio around a lost run that holds the center.
fse::WindowData random_window(std::mt19937& gen, const FseParams& p) {
  static const Eigen::VectorXd audio = oracle::speech_like(20000, 16000, 11);
  std::uniform_int_distribution<int> where(0, 19999);
  std::uniform_int_distribution<int> lost(1, 200);
  const auto index = static_cast<std::size_t>(where(gen));
  const int count = lost(gen);
  std::uniform_int_distribution<int> offset(0, count - 1);
  const auto start = static_cast<std::int64_t>(index) - offset(gen);
  fse::SampleMask mask(20000);
  for (int i = 0; i < count; ++i) {
    const auto j = start + i;
    if (j >= 0 && j < 20000) mask.set(static_cast<std::size_t>(j), SampleLabel::lost);
  }
  return fse::extract_window(audio, mask, index, p);
}

}  // namespace

TEST_CASE("weights decay from the center and vanish off support") {
  FseParams p;
  std::vector<WindowSlot> slots(2048, WindowSlot::support);
  for (int m = 2001; m < 2048; ++m) slots[m] = WindowSlot::padding;
  slots[1000] = WindowSlot::lost;
  slots[1001] = WindowSlot::reconstructed;
  p.delta = 0.5;
  auto w = fse::build_weights(slots, 999, p);
  CHECK(w.w[999] == 1.0);
  CHECK(w.w[899] == doctest::Approx(0.3660).epsilon(1e-4));
  CHECK(w.w[899] == w.w[1099]);
  CHECK(w.w[1000] == 0.0);
  CHECK(w.w[1001] == doctest::Approx(0.5 * 0.99 * 0.99).epsilon(1e-15));
  for (int m = 2001; m < 2048; ++m) CHECK(w.w[m] == 0.0);
  CHECK(w.sum == doctest::Approx(w.w.sum()).epsilon(1e-15));
  CHECK(w.usable());

  std::vector<WindowSlot> empty(2048, WindowSlot::lost);
  CHECK_FALSE(fse::build_weights(empty, 1000, p).usable());
  p.delta = 0.0;
  std::vector<WindowSlot> only_r(2048, WindowSlot::reconstructed);
  CHECK_FALSE(fse::build_weights(only_r, 1000, p).usable());

  CHECK_THROWS_AS(fse::build_weights(std::vector<WindowSlot>(100, WindowSlot::support), 50, p), fse::Error);
}

TEST_CASE("extract_window centers the sample and pads past the signal") {
  FseParams p;
  p.support = 4;
  p.fft_size = 16;
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(10, 0.1, 1.0);
  auto mask = fse::SampleMask::from_string("AABBARAAAA");
  auto win = fse::extract_window(x, mask, 2, p);
  CHECK(win.center == 4);
  CHECK(win.origin == -2);
  // window positions 0..8 cover signal indices -2..6, the rest is padding
  const std::vector<WindowSlot> expect{WindowSlot::padding, WindowSlot::padding, WindowSlot::support,
                                       WindowSlot::support, WindowSlot::lost,    WindowSlot::lost,
                                       WindowSlot::support, WindowSlot::reconstructed, WindowSlot::support};
  for (std::size_t m = 0; m < expect.size(); ++m) CHECK(win.slots[m] == expect[m]);
  for (std::size_t m = expect.size(); m < 16; ++m) CHECK(win.slots[m] == WindowSlot::padding);
  CHECK(win.values[2] == x[0]);
  CHECK(win.values[4] == 0.0);
  CHECK(win.values[7] == x[5]);
  CHECK(win.values.tail(7).isZero());
}

TEST_CASE("projection of simple residuals") {
  FseParams p;
  p.support = 1023;
  const auto win = full_window(Eigen::VectorXd::Constant(2048, 0.37), 1023);
  auto slots = win.slots;
  slots[2047] = WindowSlot::padding;
  const auto w = fse::build_weights(slots, 1023, p);
  fse::SpectralState st(win.values, w);
  const auto pk = fse::project(st, w);
  CHECK(pk[0].real() == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(std::abs(pk[0].imag()) < 1e-14);
}

TEST_CASE("projection equals the literal weighted double sum") {
  std::mt19937 gen(5);
  FseParams p;
  for (int trial = 0; trial < 3; ++trial) {
    const auto win = random_window(gen, p);
    const auto w = fse::build_weights(win.slots, win.center, p);
    fse::SpectralState st(win.values, w);
    const auto fast = fse::project(st, w);
    const auto slow = oracle::projection(std::vector<double>(win.values.data(), win.values.data() + 2048),
                                         oracle::weights(win, p.rho, p.delta));
    double worst = 0.0, scale = 0.0;
    for (int k = 0; k < 2048; ++k) {
      worst = std::max(worst, std::abs(fast[k] - slow[static_cast<std::size_t>(k)]));
      scale = std::max(scale, std::abs(slow[static_cast<std::size_t>(k)]));
    }
    CHECK(worst <= 1e-12 * scale);
  }
}

TEST_CASE("projection on the clipped sinusoid window matches the double sum") {
  FseParams p;
  const auto x = cosine(6000, 64.0, 1.0, 0.3);
  Eigen::VectorXd f = x.cwiseMax(-0.7).cwiseMin(0.7);
  const auto mask = fse::detect_clipped(fse::AudioSignal(f, 16000), {0.7, 0.0});
  const auto lost = mask.indices(SampleLabel::lost);
  const auto win = fse::extract_window(f, mask, lost[lost.size() / 2], p);
  const auto w = fse::build_weights(win.slots, win.center, p);
  const auto fast = fse::project(fse::SpectralState(win.values, w), w);
  const auto slow = oracle::projection(std::vector<double>(win.values.data(), win.values.data() + 2048),
                                       oracle::weights(win, p.rho, p.delta));
  double worst = 0.0, scale = 0.0;
  for (int k = 0; k < 2048; ++k) {
    worst = std::max(worst, std::abs(fast[k] - slow[static_cast<std::size_t>(k)]));
    scale = std::max(scale, std::abs(slow[static_cast<std::size_t>(k)]));
  }
  CHECK(worst <= 1e-12 * scale);
}

TEST_CASE("projection without support") {
  FseParams p;
  const fse::WindowData win = full_window(Eigen::VectorXd::Zero(2048), 1000);
  std::vector<WindowSlot> lost(2048, WindowSlot::lost);
  const auto w = fse::build_weights(lost, 1000, p);
  fse::SpectralState st(win.values, w);
  CHECK_THROWS_AS(fse::project(st, w), fse::NoSupportError);
}

TEST_CASE("basis selection") {
  FseParams p;
  p.support = 1023;
  std::vector<WindowSlot> slots(2048, WindowSlot::support);
  slots[2047] = WindowSlot::padding;
  const auto w = fse::build_weights(slots, 1023, p);

  SUBCASE("a cosine selects its conjugate pair") {
    const fse::SpectralState st(cosine(2048, 50.0), w);
    const auto sel = fse::select_basis(st);
    CHECK(sel.u == 50);
    CHECK(sel.paired);
    CHECK_FALSE(sel.converged);
    const auto by_projection = fse::select_basis(fse::project(st, w), w);
    CHECK(by_projection.u == 50);
    CHECK(by_projection.paired);
  }
  SUBCASE("zero residual has nothing to select") {
    const fse::SpectralState st(Eigen::VectorXd::Zero(2048), w);
    CHECK(fse::select_basis(st).converged);
  }
  SUBCASE("a DC offset selects bin 0 alone") {
    const fse::SpectralState st(Eigen::VectorXd::Constant(2048, -0.2), w);
    const auto sel = fse::select_basis(st);
    CHECK(sel.u == 0);
    CHECK_FALSE(sel.paired);
  }
  SUBCASE("the alternating sequence selects bin N/2 alone") {
    Eigen::VectorXd alt(2048);
    for (int n = 0; n < 2048; ++n) alt[n] = n % 2 ? -0.3 : 0.3;
    const auto sel = fse::select_basis(fse::SpectralState(alt, w));
    CHECK(sel.u == 1024);
    CHECK_FALSE(sel.paired);
  }
}

TEST_CASE("selection prefers the bin that removes the most energy") {
  // Under a gap, a masked cosine correlates strongly with its harmonics.
  // The best single fit is still the cosine itself.
  FseParams p;
  const auto x = cosine(6000, 64.0, 0.9);
  fse::SampleMask mask(6000);
  for (int i = 2990; i < 3010; ++i) mask.set(static_cast<std::size_t>(i), SampleLabel::lost);
  const auto win = fse::extract_window(x, mask, 3000, p);
  const auto w = fse::build_weights(win.slots, win.center, p);
  CHECK(fse::select_basis(fse::SpectralState(win.values, w)).u == 64);
}

TEST_CASE("coefficient for a selected bin") {
  const double A = 3.0;
  SUBCASE("self-conjugate bin") {
    const fse::Selection dc{0, false, false};
    const auto c = fse::odc_coefficient(dc, {0.4 * A, 0.0}, A, {A, 0.0}, 1.25);
    CHECK(c.real() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c.imag() == 0.0);
  }
  SUBCASE("pair that is orthogonal under the weight") {
    const fse::Selection pair{7, true, false};
    const auto c = fse::odc_coefficient(pair, {0.4 * A, 0.0}, A, {0.0, 0.0}, 1.25);
    CHECK(c.real() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(c.imag()) < 1e-15);
  }
}

TEST_CASE("an exact basis match is removed in one step with gamma 1") {
  FseParams p;
  p.support = 1023;
  p.gamma = 1.0;
  std::vector<WindowSlot> slots(2048, WindowSlot::support);
  slots[2047] = WindowSlot::padding;
  const auto w = fse::build_weights(slots, 1023, p);
  fse::SpectralState st(cosine(2048, 17.0, 0.6, 0.4), w);
  const double before = st.weighted_residual_spectrum().cwiseAbs().maxCoeff();
  fse::WindowModel model;
  model.fft_size = 2048;
  const auto sel = fse::select_basis(st);
  CHECK(sel.u == 17);
  fse::odc_update(st, model, sel, p.gamma);
  CHECK(st.weighted_residual_spectrum().cwiseAbs().maxCoeff() <= 1e-12 * before);
  CHECK(st.residual_energy() <= 1e-12 * fse::SpectralState(cosine(2048, 17.0, 0.6, 0.4), w).residual_energy());
  CHECK(st.iteration() == 1);
  CHECK(model.coeffs.size() == 2);
  CHECK(std::abs(model.coeffs.at(17) - std::conj(model.coeffs.at(2031))) < 1e-15);
}

TEST_CASE("the spectral state tracks the transform of the weighted residual") {
  std::mt19937 gen(9);
  FseParams p;
  const auto win = random_window(gen, p);
  const auto w = fse::build_weights(win.slots, win.center, p);
  fse::SpectralState st(win.values, w);
  fse::WindowModel model;
  model.fft_size = p.fft_size;
  for (int it = 0; it < 25; ++it) fse::odc_update(st, model, fse::select_basis(st), p.gamma);

  // r = values - g on weighted positions; compare with a fresh transform.
  const Eigen::VectorXd g = model.synthesize();
  const Eigen::VectorXd r = win.values - g;
  const fse::SpectralState fresh(r, w);
  const double scale = fresh.weighted_residual_spectrum().cwiseAbs().maxCoeff();
  CHECK((st.weighted_residual_spectrum() - fresh.weighted_residual_spectrum()).cwiseAbs().maxCoeff() <=
        1e-10 * std::max(scale, 1.0));
  CHECK(st.residual_energy() == doctest::Approx(fse::weighted_energy(w.w, r)).epsilon(1e-9));
}

TEST_CASE("window model against the literal time-domain fit") {
  std::mt19937 gen(21);
  FseParams p;
  for (int trial = 0; trial < 2; ++trial) {
    const auto win = random_window(gen, p);
    const auto w = oracle::weights(win, p.rho, p.delta);
    const auto run = oracle::fit(std::vector<double>(win.values.data(), win.values.data() + 2048), w, p.gamma, 40,
                                 {1, 10, 40});
    for (const auto& snap : run.snapshots) {
      FseParams q = p;
      q.max_iter = snap.iterations;
      fse::WindowTrace trace;
      const auto model = fse::generate_window_model(win, q, EngineKind::spectral, &trace);
      const Eigen::VectorXd g = model.synthesize();
      double worst = 0.0;
      for (int n = 0; n < 2048; ++n) worst = std::max(worst, std::abs(g[n] - snap.g[static_cast<std::size_t>(n)]));
      CHECK(worst <= 1e-9);
      CHECK(std::equal(trace.selected.begin(), trace.selected.end(), run.selected.begin()));
    }
  }
}

TEST_CASE("repeated selections accumulate into one coefficient") {
  std::mt19937 gen(33);
  FseParams p;
  p.max_iter = 300;
  const auto win = random_window(gen, p);
  fse::WindowTrace trace;
  const auto model = fse::generate_window_model(win, p, EngineKind::spectral, &trace);
  const std::set<int> distinct(trace.selected.begin(), trace.selected.end());
  REQUIRE(distinct.size() < trace.selected.size());
  std::size_t expected = 0;
  for (int u : distinct) expected += (u == 0 || 2 * u == p.fft_size) ? 1 : 2;
  CHECK(model.coeffs.size() == expected);
  for (const auto& [k, c] : model.coeffs) {
    if (k == 0 || 2 * k == p.fft_size) continue;
    CHECK(std::abs(c - std::conj(model.coeffs.at(p.fft_size - k))) < 1e-15);
  }
  // Accumulated model still matches the literal fit.
  const auto run = oracle::fit(std::vector<double>(win.values.data(), win.values.data() + 2048),
                               oracle::weights(win, p.rho, p.delta), p.gamma, 300, {300});
  const Eigen::VectorXd g = model.synthesize();
  for (int n = 0; n < 2048; ++n) CHECK(g[n] == doctest::Approx(run.snapshots.back().g[static_cast<std::size_t>(n)]).epsilon(1e-9));
}

TEST_CASE("window models") {
  FseParams p;
  p.clip_threshold = 0.7;

  SUBCASE("constant signal with a short gap") {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(4000, 0.8);
    fse::SampleMask mask(4000);
    for (int i = 1999; i <= 2001; ++i) mask.set(static_cast<std::size_t>(i), SampleLabel::lost);
    const auto win = fse::extract_window(x, mask, 2000, p);
    const auto model = fse::generate_window_model(win, p);
    CHECK(model.center == 2000);
    CHECK(model.evaluate(win.center) == doctest::Approx(0.8).epsilon(1e-6));
  }
  SUBCASE("on-bin sinusoid clipped at 0.7") {
    const auto s = cosine(8000, 64.0, 0.9);
    const Eigen::VectorXd f = s.cwiseMax(-0.7).cwiseMin(0.7);
    const auto mask = fse::detect_clipped(fse::AudioSignal(f, 16000), {0.7, 0.0});
    const auto lost = mask.indices(SampleLabel::lost);
    for (std::size_t idx : {lost[lost.size() / 2], lost[lost.size() / 3]}) {
      const auto win = fse::extract_window(f, mask, idx, p);
      const auto model = fse::generate_window_model(win, p);
      CHECK(std::abs(model.evaluate(win.center) - s[static_cast<Eigen::Index>(idx)]) <= 1e-3);
    }
  }
  SUBCASE("zero iterations give the zero model") {
    const auto s = cosine(4000, 12.0);
    fse::SampleMask mask(4000);
    mask.set(2000, SampleLabel::lost);
    FseParams q = p;
    q.max_iter = 0;
    const auto model = fse::generate_window_model(fse::extract_window(s, mask, 2000, q), q);
    CHECK(model.coeffs.empty());
    CHECK_FALSE(model.converged);
    CHECK(model.synthesize().isZero());
  }
  SUBCASE("no support") {
    fse::SampleMask mask(3000, SampleLabel::lost);
    const auto win = fse::extract_window(Eigen::VectorXd::Zero(3000), mask, 1500, p);
    CHECK_THROWS_AS(fse::generate_window_model(win, p), fse::NoSupportError);
  }
}

TEST_CASE("synthesized models are real") {
  std::mt19937 gen(4);
  FseParams p;
  p.max_iter = 100;
  const auto model = fse::generate_window_model(random_window(gen, p), p);
  for (int n = 0; n < p.fft_size; n += 7) CHECK(std::abs(model.evaluate_complex(n).imag()) <= 1e-12);
}

TEST_CASE("weighted residual energy never grows") {
  std::mt19937 gen(17);
  FseParams p;
  p.max_iter = 400;
  for (int trial = 0; trial < 5; ++trial) {
    fse::WindowTrace trace;
    fse::generate_window_model(random_window(gen, p), p, EngineKind::spectral, &trace);
    for (std::size_t i = 1; i < trace.residual_energy.size(); ++i)
      CHECK(trace.residual_energy[i] <= trace.residual_energy[i - 1]);
  }
}

TEST_CASE("residual tolerance stops early") {
  std::mt19937 gen(8);
  FseParams p;
  p.residual_tol = 1e-2;
  fse::WindowTrace trace;
  const auto model = fse::generate_window_model(random_window(gen, p), p, EngineKind::spectral, &trace);
  CHECK(model.converged);
  CHECK(model.iterations_used < p.max_iter);
  CHECK(trace.residual_energy.back() <= 1e-2 * trace.residual_energy.front());
  CHECK(trace.residual_energy[trace.residual_energy.size() - 2] > 1e-2 * trace.residual_energy.front());
}

TEST_CASE("engines agree on random clipped windows") {
  std::mt19937 gen(77);
  FseParams p;
  p.max_iter = 300;
  for (int trial = 0; trial < 20; ++trial) {
    const auto win = random_window(gen, p);
    fse::WindowTrace ts, tr;
    const auto a = fse::generate_window_model(win, p, EngineKind::spectral, &ts);
    const auto b = fse::generate_window_model(win, p, EngineKind::reference, &tr);
    CHECK(ts.selected == tr.selected);
    CHECK((a.synthesize() - b.synthesize()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("clamp_estimate") {
  FseParams p;
  p.clip_threshold = 0.7;
  CHECK(fse::clamp_estimate(0.93, 0.7, p) == 0.93);
  CHECK(fse::clamp_estimate(0.42, 0.7, p) == 0.7);
  CHECK(fse::clamp_estimate(1.3, 0.7, p) == 1.0);
  CHECK(fse::clamp_estimate(-1.3, -0.7, p) == -1.0);
  CHECK(fse::clamp_estimate(-0.2, -0.7, p) == -0.7);
  CHECK(fse::clamp_estimate(-0.8, -0.7, p) == -0.8);
}

TEST_CASE("processing order") {
  using V = std::vector<std::size_t>;
  CHECK(fse::processing_order(fse::SampleMask::from_string("AAABBBAAA")) == V{3, 5, 4});
  CHECK(fse::processing_order(fse::SampleMask::from_string("AAAABAAAA")) == V{4});
  CHECK(fse::processing_order(fse::SampleMask::from_string("AABBBBBAAABBAA")) == V{10, 11, 2, 6, 3, 5, 4});
  // Runs at the signal ends grow inward from their only supported side.
  CHECK(fse::processing_order(fse::SampleMask::from_string("BBBAAAABB")) == V{7, 8, 2, 1, 0});
  CHECK(fse::processing_order(fse::SampleMask::from_string("AAA")).empty());
}

TEST_CASE("processing order matches a greedy scheduler that re-scores after every sample") {
  const int support = 20;
  std::mt19937 gen(12);
  std::uniform_int_distribution<int> len(1, 9);
  for (int trial = 0; trial < 30; ++trial) {
    // Interior runs separated by more than a window so every run sees only its own gap.
    std::string s;
    const int runs = 2 + trial % 4;
    for (int r = 0; r < runs; ++r) {
      s += std::string(2 * support + 5, 'A');
      s += std::string(static_cast<std::size_t>(len(gen)), 'B');
    }
    s += std::string(2 * support + 5, 'A');
    const auto mask = fse::SampleMask::from_string(s);
    CHECK(fse::processing_order(mask) == oracle::greedy_order(mask, support, 0.5));
  }
  // The short run and the long run from the order example, far apart.
  const auto mask = fse::SampleMask::from_string(std::string(50, 'A') + "BB" + std::string(50, 'A') + "BBBBB" +
                                                 std::string(50, 'A'));
  CHECK(fse::processing_order(mask) == oracle::greedy_order(mask, support, 0.5));
}

TEST_CASE("runs at the signal edges keep the length rule") {
  // A greedy re-score would defer these, since padding carries no weight;
  // the order still goes by run length, each edge run consumed from its inner end.
  const auto mask = fse::SampleMask::from_string("BB" + std::string(50, 'A') + "BBBBB" + std::string(50, 'A') + "BBB");
  CHECK(fse::processing_order(mask) ==
        std::vector<std::size_t>{1, 0, 107, 108, 109, 52, 56, 53, 55, 54});
}

TEST_CASE("processing groups split at wide gaps") {
  const auto mask = fse::SampleMask::from_string("ABBAAAAABAABBBAAAAAAAAB");
  const auto groups = fse::processing_groups(mask, 2);  // gaps of >= 5 split
  REQUIRE(groups.size() == 3);
  CHECK(groups[0] == std::vector<std::size_t>{1, 2});
  CHECK(groups[1] == std::vector<std::size_t>{8, 11, 13, 12});
  CHECK(groups[2] == std::vector<std::size_t>{22});
}

TEST_CASE("declip") {
  FseParams p;
  p.support = 200;
  p.fft_size = 512;
  p.max_iter = 200;
  p.clip_threshold = 0.6;
  const fse::AudioSignal clean(oracle::speech_like(6000, 16000), 16000);
  const auto clipped = fse::hard_clip(clean, 0.6);
  const auto mask = fse::detect_clipped(clipped, {0.6, 0.0});

  SUBCASE("nothing lost leaves the signal untouched") {
    const auto r = fse::declip(clean, fse::SampleMask(6000), p);
    CHECK(r.signal.samples() == clean.samples());
    CHECK(r.stats.reconstructed == 0);
  }
  SUBCASE("support preserved, band respected, every lost sample relabeled") {
    const auto r = fse::declip(clipped, mask, p);
    CHECK(r.mask.count(SampleLabel::lost) == 0);
    CHECK(r.stats.reconstructed == mask.count(SampleLabel::lost));
    CHECK(r.stats.skipped.empty());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const auto n = static_cast<Eigen::Index>(i);
      if (mask[i] == SampleLabel::support) {
        CHECK(r.signal[n] == clipped[n]);
        CHECK(r.mask[i] == SampleLabel::support);
      } else {
        CHECK(r.mask[i] == SampleLabel::reconstructed);
        const double v = clipped[n] > 0 ? r.signal[n] : -r.signal[n];
        CHECK(v >= 0.6);
        CHECK(v <= 1.0);
      }
    }
    CHECK(fse::snr_miss(clean, r.signal, mask).db > fse::snr_miss(clean, clipped, mask).db);
  }
  SUBCASE("worker count does not change the output") {
    p.support = 50;
    p.fft_size = 128;
    const auto a = fse::declip(clipped, mask, p, {EngineKind::spectral, 1});
    const auto b = fse::declip(clipped, mask, p, {EngineKind::spectral, 4});
    REQUIRE(fse::processing_groups(mask, p.support).size() > 1);
    CHECK(a.signal.samples() == b.signal.samples());
    CHECK(a.mask == b.mask);
    CHECK(a.stats.total_iterations == b.stats.total_iterations);
  }
  SUBCASE("engines agree on a whole signal") {
    p.max_iter = 50;
    const fse::AudioSignal shorter(clipped.samples().head(1500), 16000);
    const auto m = fse::detect_clipped(shorter, {0.6, 0.0});
    const auto a = fse::declip(shorter, m, p, {EngineKind::spectral, 1});
    const auto b = fse::declip(shorter, m, p, {EngineKind::reference, 1});
    CHECK((a.signal.samples() - b.signal.samples()).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("samples without support are skipped, not fatal") {
    const fse::AudioSignal silent(Eigen::VectorXd::Constant(300, 0.6), 16000);
    const auto all_lost = fse::detect_clipped(silent, {0.6, 0.0});
    const auto r = fse::declip(silent, all_lost, p);
    CHECK(r.stats.skipped.size() == 300);
    CHECK(r.mask.count(SampleLabel::lost) == 300);
    CHECK(r.signal.samples() == silent.samples());
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(fse::declip(clipped, fse::SampleMask(10), p), fse::Error);
    FseParams bad = p;
    bad.rho = 2.0;
    CHECK_THROWS_AS(fse::declip(clipped, mask, bad), fse::ParamError);
  }
}

TEST_CASE("with delta 1 a reconstructed sample counts like support of equal value") {
  FseParams p;
  const auto x = oracle::speech_like(5000, 16000);
  fse::SampleMask with_r(5000), with_a(5000);
  for (int i = 2480; i < 2520; ++i) {
    with_r.set(static_cast<std::size_t>(i), i < 2500 ? SampleLabel::reconstructed : SampleLabel::lost);
    with_a.set(static_cast<std::size_t>(i), i < 2500 ? SampleLabel::support : SampleLabel::lost);
  }
  p.max_iter = 100;
  const auto a = fse::generate_window_model(fse::extract_window(x, with_r, 2510, p), p);
  const auto b = fse::generate_window_model(fse::extract_window(x, with_a, 2510, p), p);
  CHECK(a.coeffs == b.coeffs);
}
