#include "fse/core.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <tuple>

namespace fse {

AudioSignal::AudioSignal(Eigen::VectorXd samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw Error("sample_rate must be positive");
  if (!samples_.allFinite()) throw Error("signal contains non-finite samples");
}

char label_char(SampleLabel l) noexcept {
  switch (l) {
    case SampleLabel::support: return 'A';
    case SampleLabel::lost: return 'B';
    case SampleLabel::reconstructed: return 'R';
  }
  return '?';
}

std::size_t SampleMask::count(SampleLabel l) const noexcept {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
}

std::vector<std::size_t> SampleMask::indices(SampleLabel l) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == l) out.push_back(i);
  return out;
}

std::string SampleMask::to_string() const {
  std::string s(labels_.size(), 'A');
  std::transform(labels_.begin(), labels_.end(), s.begin(), label_char);
  return s;
}

SampleMask SampleMask::from_string(std::string_view s) {
  std::vector<SampleLabel> labels;
  labels.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case 'A': labels.push_back(SampleLabel::support); break;
      case 'B': labels.push_back(SampleLabel::lost); break;
      case 'R': labels.push_back(SampleLabel::reconstructed); break;
      default: throw Error(std::string("bad mask character '") + c + "'");
    }
  }
  return SampleMask(std::move(labels));
}

void validate_params(const FseParams& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(p.gamma) || p.gamma <= 0.0 || p.gamma > 2.0)
    throw ParamError("gamma", "must lie in (0, 2]");
  if (!finite(p.rho) || p.rho <= 0.0 || p.rho >= 1.0)
    throw ParamError("rho", "decay must lie in (0, 1)");
  if (!finite(p.delta) || p.delta < 0.0) throw ParamError("delta", "must be >= 0");
  if (p.support <= 0) throw ParamError("support", "must be a positive sample count");
  if (p.fft_size <= 0 || (p.fft_size & (p.fft_size - 1)) != 0)
    throw ParamError("fft_size", "must be a positive power of two");
  if (static_cast<long long>(p.fft_size) < 2LL * p.support + 1)
    throw ParamError("fft_size", "must be >= 2*support + 1 (" + std::to_string(2LL * p.support + 1) +
                                     "), got " + std::to_string(p.fft_size));
  if (p.max_iter <= 0) throw ParamError("max_iter", "must be positive");
  if (!finite(p.residual_tol) || p.residual_tol < 0.0) throw ParamError("residual_tol", "must be >= 0");
  if (!finite(p.clip_threshold) || p.clip_threshold <= 0.0 || p.clip_threshold > 1.0)
    throw ParamError("clip_threshold", "must lie in (0, 1]");
  if (!finite(p.peak) || p.peak <= 0.0) throw ParamError("peak", "must be positive");
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParamError(std::string(key), "cannot parse value '" + std::string(text) + "'");
  return v;
}

}  // namespace

std::string to_config(const FseParams& p) {
  std::ostringstream os;
  os << "gamma = " << format_double(p.gamma) << '\n'
     << "rho = " << format_double(p.rho) << '\n'
     << "delta = " << format_double(p.delta) << '\n'
     << "support = " << p.support << '\n'
     << "fft_size = " << p.fft_size << '\n'
     << "max_iter = " << p.max_iter << '\n'
     << "residual_tol = " << format_double(p.residual_tol) << '\n'
     << "clip_threshold = " << format_double(p.clip_threshold) << '\n'
     << "peak = " << format_double(p.peak) << '\n';
  return os.str();
}

FseParams parse_config(std::string_view text, FseParams base) {
  FseParams p = base;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParamError("line " + std::to_string(line_no), "expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));

    if (key == "gamma") p.gamma = parse_value<double>(key, value);
    else if (key == "rho") p.rho = parse_value<double>(key, value);
    else if (key == "delta") p.delta = parse_value<double>(key, value);
    else if (key == "support") p.support = parse_value<int>(key, value);
    else if (key == "fft_size") p.fft_size = parse_value<int>(key, value);
    else if (key == "max_iter") p.max_iter = parse_value<int>(key, value);
    else if (key == "residual_tol") p.residual_tol = parse_value<double>(key, value);
    else if (key == "clip_threshold") p.clip_threshold = parse_value<double>(key, value);
    else if (key == "peak") p.peak = parse_value<double>(key, value);
    else throw ParamError(std::string(key), "unknown configuration key");
  }
  validate_params(p);
  return p;
}

FseParams load_config(const std::string& path, FseParams base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), base);
}

std::complex<double> WindowModel::evaluate_complex(int n) const {
  std::complex<double> acc{0.0, 0.0};
  const long long N = fft_size;
  for (const auto& [k, c] : coeffs) {
    const long long phase = (static_cast<long long>(k) * n) % N;
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(phase) / static_cast<double>(N);
    acc += c * std::polar(1.0, angle);
  }
  return acc;
}

Eigen::VectorXd WindowModel::synthesize() const {
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(fft_size));
  for (const auto& [k, c] : coeffs) spectrum[static_cast<std::size_t>(k)] = c;
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<std::complex<double>> time;
  fft.inv(time, spectrum);
  Eigen::VectorXd g(fft_size);
  for (int n = 0; n < fft_size; ++n) g[n] = time[static_cast<std::size_t>(n)].real();
  return g;
}

std::string to_string(SnrValue v) {
  if (v.exact) return "exact";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v.db, std::chars_format::fixed, 6);
  return std::string(buf, end);
}

void SnrReport::sort() {
  std::stable_sort(entries.begin(), entries.end(), [](const SnrEntry& a, const SnrEntry& b) {
    return std::tie(a.signal, a.theta_c, a.engine) < std::tie(b.signal, b.theta_c, b.engine);
  });
}

}  // namespace fse
