// fse-declip: clip, declip, evaluate and sweep WAV files.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 processing.

#include "fse/fse.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitProcessing = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_theta(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw UsageError("--theta expects a number in (0, 1], got '" + text + "'");
  }
  if (used != text.size() || !(v > 0.0 && v <= 1.0))
    throw UsageError("--theta expects a number in (0, 1], got '" + text + "'");
  return v;
}

std::optional<fse::WavEncoding> parse_encoding(const std::string& name) {
  if (name == "same") return std::nullopt;
  if (name == "pcm16") return fse::WavEncoding::pcm16;
  if (name == "float32") return fse::WavEncoding::float32;
  throw UsageError("--encoding must be same, pcm16 or float32");
}

fse::FseParams read_config(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw IoError("cannot open config file " + path);
  return fse::load_config(path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

// Divides every channel by the largest magnitude over all channels.
std::vector<fse::AudioSignal> normalize_jointly(const std::vector<fse::AudioSignal>& channels) {
  double peak = 0.0;
  for (const auto& ch : channels)
    if (!ch.empty()) peak = std::max(peak, ch.samples().cwiseAbs().maxCoeff());
  if (peak == 0.0) throw fse::Error("cannot normalize a silent file");
  std::vector<fse::AudioSignal> out;
  for (const auto& ch : channels) out.push_back(ch.with_samples(ch.samples() / peak));
  return out;
}

void write_output(const std::vector<fse::AudioSignal>& channels, fse::WavEncoding enc, const std::string& path) {
  const auto summary = fse::write_wav(channels, enc, path);
  if (summary.clamped > 0)
    std::cerr << "warning: " << summary.clamped << " samples outside [-1, 1] were clamped\n";
}

struct ClipArgs {
  std::string input, output, encoding = "same";
  std::string theta;
};

int cmd_clip(const ClipArgs& a) {
  const double theta = parse_theta(a.theta);
  const auto enc_override = parse_encoding(a.encoding);
  const fse::WavData in = fse::read_wav(a.input);
  const auto normalized = normalize_jointly(in.channels);
  std::vector<fse::AudioSignal> clipped;
  std::size_t count = 0, total = 0;
  for (const auto& ch : normalized) {
    clipped.push_back(fse::hard_clip(ch, theta));
    // Samples the clip changed; a peak sitting exactly at theta is not counted.
    count += static_cast<std::size_t>((clipped.back().samples().array() != ch.samples().array()).count());
    total += static_cast<std::size_t>(ch.size());
  }
  write_output(clipped, enc_override.value_or(in.descriptor.encoding), a.output);
  const double pct = total ? 100.0 * static_cast<double>(count) / static_cast<double>(total) : 0.0;
  std::printf("clipped %zu of %zu samples (%.1f%%) at theta %g\n", count, total, pct, theta);
  return 0;
}

struct DeclipArgs {
  std::string input, output, config, engine = "spectral", theta = "auto", encoding = "same", stats;
  std::optional<double> tolerance;
  int workers = 1;
};

int cmd_declip(const DeclipArgs& a) {
  const auto engine = [&] {
    try {
      return fse::parse_engine(a.engine);
    } catch (const fse::Error& e) {
      throw UsageError(e.what());
    }
  }();
  const bool auto_theta = a.theta == "auto";
  const std::optional<double> fixed_theta = auto_theta ? std::nullopt : std::optional(parse_theta(a.theta));
  if (a.tolerance && *a.tolerance < 0.0) throw UsageError("--tolerance must be >= 0");
  if (a.workers < 1) throw UsageError("--workers must be >= 1");
  const auto enc_override = parse_encoding(a.encoding);

  fse::FseParams base;
  if (!a.config.empty()) base = read_config(a.config);
  const fse::WavData in = fse::read_wav(a.input);
  // One quantization step absorbs rounding of the plateau in pcm16 files.
  const double tolerance = a.tolerance.value_or(
      !auto_theta && in.descriptor.encoding == fse::WavEncoding::pcm16 ? 1.0 / 32768.0 : 0.0);

  std::vector<fse::AudioSignal> out;
  std::size_t reconstructed = 0, skipped = 0;
  long long iterations = 0;
  double seconds = 0.0;
  nlohmann::ordered_json stats = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < in.channels.size(); ++c) {
    const auto& ch = in.channels[c];
    if (ch.empty()) {
      out.push_back(ch);
      continue;
    }
    const double theta = fixed_theta.value_or(fse::estimate_threshold(ch));
    const fse::ClipSpec spec{theta, tolerance};
    if (auto_theta && !fse::has_clipping_plateau(ch, spec)) {
      std::printf("channel %zu: no clipped samples found\n", c);
      out.push_back(ch);
      continue;
    }
    const fse::SampleMask mask = fse::detect_clipped(ch, spec);
    if (mask.count(fse::SampleLabel::lost) == 0) {
      std::printf("channel %zu: no clipped samples found\n", c);
      out.push_back(ch);
      continue;
    }
    fse::FseParams p = base;
    p.clip_threshold = theta;
    fse::validate_params(p);
    auto result = fse::declip(ch, mask, p, {engine, a.workers});
    reconstructed += result.stats.reconstructed;
    skipped += result.stats.skipped.size();
    iterations += result.stats.total_iterations;
    seconds += result.stats.seconds;
    nlohmann::ordered_json s;
    s["channel"] = c;
    s["theta_c"] = theta;
    s["engine"] = a.engine;
    s["reconstructed"] = result.stats.reconstructed;
    s["skipped"] = result.stats.skipped;
    s["iterations"] = result.stats.total_iterations;
    s["seconds"] = result.stats.seconds;
    auto& samples = s["samples"] = nlohmann::ordered_json::array();
    for (const auto& st : result.stats.samples)
      samples.push_back({{"index", st.index}, {"iterations", st.iterations}, {"converged", st.converged}});
    auto& runs = s["runs"] = nlohmann::ordered_json::array();
    for (const auto& r : result.stats.runs)
      runs.push_back({{"start", r.start}, {"length", r.length}, {"seconds", r.seconds}});
    stats.push_back(std::move(s));
    out.push_back(std::move(result.signal));
  }
  write_output(out, enc_override.value_or(in.descriptor.encoding), a.output);
  if (!a.stats.empty()) write_text(a.stats, stats.dump(2) + "\n");
  std::printf("reconstructed %zu samples (%zu skipped), %lld iterations, %.3f s\n", reconstructed, skipped,
              iterations, seconds);
  return 0;
}

struct EvalArgs {
  std::string clean, processed, theta;
};

int cmd_eval(const EvalArgs& a) {
  const double theta = parse_theta(a.theta);
  const fse::WavData clean = fse::read_wav(a.clean);
  const fse::WavData processed = fse::read_wav(a.processed);
  if (clean.channels.size() != processed.channels.size() ||
      clean.descriptor.frames != processed.descriptor.frames)
    throw fse::Error("clean and processed files differ in length or channel count");
  const auto reference = normalize_jointly(clean.channels);
  for (std::size_t c = 0; c < reference.size(); ++c) {
    const auto mask = fse::detect_clipped(fse::hard_clip(reference[c], theta), {theta, 0.0});
    const auto snr = fse::snr_miss(reference[c], processed.channels[c], mask);
    std::printf("channel %zu: snr_miss %s%s (%zu clipped samples)\n", c, fse::to_string(snr).c_str(),
                snr.exact ? "" : " dB", mask.count(fse::SampleLabel::lost));
  }
  return 0;
}

struct SweepArgs {
  std::string input, out, json, config, save_dir;
  std::vector<std::string> engines{"spectral"};
  std::vector<double> thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
  double tolerance = 0.0;
  int workers = 1;
  bool timing = false;
};

std::vector<fs::path> sweep_inputs(const std::string& input, bool& directory) {
  std::vector<fs::path> files;
  std::error_code ec;
  directory = fs::is_directory(input, ec);
  if (directory) {
    for (const auto& entry : fs::directory_iterator(input, ec)) {
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (entry.is_regular_file() && ext == ".wav") files.push_back(entry.path());
    }
    if (ec) throw IoError("cannot list " + input);
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .wav files in " + input);
  } else {
    if (!fs::is_regular_file(input, ec)) throw IoError("no such file: " + input);
    files.emplace_back(input);
  }
  return files;
}

std::string theta_tag(double theta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", theta);
  return buf;
}

int cmd_sweep(const SweepArgs& a) {
  fse::SweepSpec spec;
  spec.thresholds = a.thresholds;
  spec.engines.clear();
  for (const auto& e : a.engines) {
    try {
      spec.engines.push_back(fse::parse_engine(e));
    } catch (const fse::Error& err) {
      throw UsageError(err.what());
    }
  }
  if (a.workers < 1) throw UsageError("--workers must be >= 1");
  spec.workers = a.workers;
  spec.detect_tolerance = a.tolerance;
  if (!a.config.empty()) spec.params = read_config(a.config);
  try {
    fse::validate_sweep(spec);
  } catch (const fse::ParamError& e) {
    throw UsageError(e.what());
  }

  bool directory = false;
  const auto files = sweep_inputs(a.input, directory);
  if (!a.save_dir.empty()) fs::create_directories(a.save_dir);

  fse::SnrReport report;
  for (const auto& file : files) {
    std::vector<fse::AudioSignal> channels;
    try {
      channels = fse::read_wav(file.string()).channels;
    } catch (const fse::WavError& e) {
      std::cerr << "skipping " << file.string() << ": " << e.what() << '\n';
      fse::SnrEntry failed;
      failed.signal = file.stem().string();
      failed.engine = "read";
      failed.error = e.what();
      report.entries.push_back(std::move(failed));
      continue;
    }
    for (std::size_t c = 0; c < channels.size(); ++c) {
      std::string id = file.stem().string();
      if (channels.size() > 1) id += "#" + std::to_string(c);
      std::vector<fse::SweepOutput> outputs;
      fse::SnrReport part;
      try {
        part = fse::run_sweep(fse::normalize_peak(channels[c]), spec, id, a.save_dir.empty() ? nullptr : &outputs);
      } catch (const fse::Error& e) {
        std::cerr << "skipping " << id << ": " << e.what() << '\n';
        fse::SnrEntry failed;
        failed.signal = id;
        failed.engine = "sweep";
        failed.error = e.what();
        report.entries.push_back(std::move(failed));
        continue;
      }
      report.entries.insert(report.entries.end(), part.entries.begin(), part.entries.end());
      for (const auto& o : outputs) {
        const auto name = id + "_theta" + theta_tag(o.theta_c) + "_" + std::string(fse::to_string(o.engine)) + ".wav";
        fse::write_wav({o.signal}, fse::WavEncoding::float32, (fs::path(a.save_dir) / name).string());
      }
    }
  }
  if (directory) {
    auto avg = fse::average_by_threshold(report);
    report.entries.insert(report.entries.end(), avg.entries.begin(), avg.entries.end());
  }
  report.sort();

  const fse::ReportFormat fmt{a.timing};
  write_text(a.out, fse::to_csv(report, fmt));
  if (!a.json.empty()) write_text(a.json, fse::to_json(report, fmt));

  std::size_t ok = 0, failed = 0;
  for (const auto& e : report.entries) {
    if (e.signal == "average" || e.engine == fse::kBaselineEngine) continue;
    (e.snr ? ok : failed)++;
  }
  std::printf("%zu cells succeeded, %zu failed; report written to %s\n", ok, failed, a.out.c_str());
  return ok > 0 ? 0 : kExitProcessing;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstruct hard-clipped audio by frequency selective extrapolation"};
  app.require_subcommand(1);

  ClipArgs clip;
  auto* clip_cmd = app.add_subcommand("clip", "Peak-normalize a file and hard-clip it");
  clip_cmd->add_option("input", clip.input, "Clean WAV file")->required();
  clip_cmd->add_option("-o,--output", clip.output, "Clipped WAV file")->required();
  clip_cmd->add_option("--theta", clip.theta, "Clipping level in (0, 1]")->required();
  clip_cmd->add_option("--encoding", clip.encoding, "same, pcm16 or float32");

  DeclipArgs dec;
  auto* dec_cmd = app.add_subcommand("declip", "Reconstruct clipped samples");
  dec_cmd->add_option("input", dec.input, "Clipped WAV file")->required();
  dec_cmd->add_option("-o,--output", dec.output, "Reconstructed WAV file")->required();
  dec_cmd->add_option("--theta", dec.theta, "Clipping level, or 'auto' for the file peak");
  dec_cmd->add_option("--tolerance", dec.tolerance, "Detection slack below the clipping level");
  dec_cmd->add_option("--engine", dec.engine, "spectral or reference");
  dec_cmd->add_option("--config", dec.config, "Parameter file (key = value)");
  dec_cmd->add_option("--workers", dec.workers, "Threads over independent clipped regions");
  dec_cmd->add_option("--encoding", dec.encoding, "same, pcm16 or float32");
  dec_cmd->add_option("--stats", dec.stats, "Write per-sample statistics as JSON");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "SNR on the clipped positions against a clean reference");
  eval_cmd->add_option("clean", ev.clean, "Clean reference WAV file")->required();
  eval_cmd->add_option("processed", ev.processed, "Processed WAV file")->required();
  eval_cmd->add_option("--theta", ev.theta, "Clipping level that defines the evaluated positions")->required();

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Clip, declip and score over several clipping levels");
  sweep_cmd->add_option("input", sw.input, "Clean WAV file or directory of WAV files")->required();
  sweep_cmd->add_option("--out", sw.out, "CSV report")->required();
  sweep_cmd->add_option("--json", sw.json, "JSON report");
  sweep_cmd->add_option("--config", sw.config, "Parameter file (key = value)");
  sweep_cmd->add_option("--engine", sw.engines, "Engines to run")->delimiter(',');
  sweep_cmd->add_option("--thresholds", sw.thresholds, "Clipping levels")->delimiter(',');
  sweep_cmd->add_option("--tolerance", sw.tolerance, "Detection slack below the clipping level");
  sweep_cmd->add_option("--workers", sw.workers, "Threads over sweep cells");
  sweep_cmd->add_option("--save-dir", sw.save_dir, "Directory for reconstructed WAV files");
  sweep_cmd->add_flag("--timing", sw.timing, "Include wall time in the reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*clip_cmd) return cmd_clip(clip);
    if (*dec_cmd) return cmd_declip(dec);
    if (*eval_cmd) return cmd_eval(ev);
    if (*sweep_cmd) return cmd_sweep(sw);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fse::WavError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fse::ParamError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fse::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitProcessing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitProcessing;
  }
  return kExitUsage;
}
