#include "fse/eval.hpp"

#include "fse/clipping.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

namespace fse {

void validate_sweep(const SweepSpec& spec) {
  if (spec.thresholds.empty()) throw ParamError("thresholds", "at least one clipping level is needed");
  for (double t : spec.thresholds)
    if (!(t > 0.0 && t < 1.0)) throw ParamError("thresholds", "clipping levels must lie in (0, 1)");
  if (spec.engines.empty()) throw ParamError("engines", "at least one engine is needed");
  if (spec.detect_tolerance < 0.0) throw ParamError("detect_tolerance", "must be >= 0");
  validate_params(spec.params);
}

SnrReport run_sweep(const AudioSignal& clean, const SweepSpec& spec, const std::string& signal_id,
                    std::vector<SweepOutput>* outputs) {
  validate_sweep(spec);
  if (clean.empty() || std::abs(clean.samples().cwiseAbs().maxCoeff() - 1.0) > 1e-12)
    throw Error("run_sweep expects a peak-normalized signal");

  struct Cell {
    double theta;
    EngineKind engine;
    SnrEntry entry;
    std::optional<AudioSignal> output;
  };
  std::vector<Cell> cells;
  SnrReport report;
  for (double theta : spec.thresholds) {
    const AudioSignal clipped = hard_clip(clean, theta);
    SnrEntry base{signal_id, theta, kBaselineEngine, std::nullopt, 0, 0.0, {}};
    try {
      const SampleMask mask = detect_clipped(clipped, {theta, spec.detect_tolerance});
      base.clipped = mask.count(SampleLabel::lost);
      base.snr = snr_miss(clean, clipped, mask);
    } catch (const Error& e) {
      base.error = e.what();
    }
    report.entries.push_back(std::move(base));
    for (EngineKind engine : spec.engines)
      cells.push_back({theta, engine, {signal_id, theta, std::string(to_string(engine)), std::nullopt, 0, 0.0, {}}, {}});
  }

  auto run_cell = [&](Cell& cell) {
    try {
      const AudioSignal clipped = hard_clip(clean, cell.theta);
      const SampleMask mask = detect_clipped(clipped, {cell.theta, spec.detect_tolerance});
      cell.entry.clipped = mask.count(SampleLabel::lost);
      FseParams p = spec.params;
      p.clip_threshold = cell.theta;
      const auto t0 = std::chrono::steady_clock::now();
      DeclipResult result = declip(clipped, mask, p, {cell.engine, 1});
      cell.entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      cell.entry.snr = snr_miss(clean, result.signal, mask);
      if (outputs) cell.output = std::move(result.signal);
    } catch (const Error& e) {
      cell.entry.error = e.what();
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, spec.workers));
  if (workers == 1 || cells.size() <= 1) {
    for (auto& c : cells) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(workers, cells.size()); ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) run_cell(cells[i]);
      });
  }

  for (auto& c : cells) {
    report.entries.push_back(c.entry);
    if (outputs && c.output) outputs->push_back({c.theta, c.engine, std::move(*c.output)});
  }
  report.sort();
  return report;
}

namespace {

using CellKey = std::tuple<std::string, double>;

std::map<CellKey, SnrValue> engine_cells(const SnrReport& r) {
  std::map<CellKey, SnrValue> cells;
  for (const auto& e : r.entries) {
    if (e.engine == kBaselineEngine) continue;
    if (!e.snr) throw Error("cell " + e.signal + " @ " + std::to_string(e.theta_c) + " has no result");
    if (!cells.emplace(CellKey{e.signal, e.theta_c}, *e.snr).second)
      throw Error("report has several engine rows for " + e.signal + " @ " + std::to_string(e.theta_c));
  }
  return cells;
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format_fixed(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  return std::string(buf, end);
}

}  // namespace

double average_gain(const SnrReport& a, const SnrReport& b) {
  const auto ca = engine_cells(a);
  const auto cb = engine_cells(b);
  if (ca.size() != cb.size() || ca.empty()) throw Error("reports cover different cells");
  double sum = 0.0;
  for (const auto& [key, va] : ca) {
    auto it = cb.find(key);
    if (it == cb.end()) throw Error("reports cover different cells");
    const SnrValue vb = it->second;
    if (va.exact != vb.exact) throw Error("gain against an exact reconstruction is unbounded");
    sum += va.exact ? 0.0 : va.db - vb.db;
  }
  return sum / static_cast<double>(ca.size());
}

SnrReport average_by_threshold(const SnrReport& report) {
  struct Acc {
    double sum = 0.0;
    std::size_t finite = 0, exact = 0, clipped = 0;
    double seconds = 0.0;
  };
  std::map<std::tuple<double, std::string>, Acc> acc;
  for (const auto& e : report.entries) {
    if (!e.snr) continue;
    Acc& a = acc[{e.theta_c, e.engine}];
    if (e.snr->exact) ++a.exact;
    else {
      a.sum += e.snr->db;
      ++a.finite;
    }
    a.clipped += e.clipped;
    a.seconds += e.seconds;
  }
  SnrReport out;
  for (const auto& [key, a] : acc) {
    SnrEntry row;
    row.signal = "average";
    row.theta_c = std::get<0>(key);
    row.engine = std::get<1>(key);
    row.snr = a.finite == 0 ? SnrValue::exact_match() : SnrValue::finite(a.sum / static_cast<double>(a.finite));
    row.clipped = a.clipped;
    row.seconds = a.seconds;
    out.entries.push_back(std::move(row));
  }
  out.sort();
  return out;
}

std::string to_csv(const SnrReport& report, ReportFormat fmt) {
  std::ostringstream os;
  os << "signal,theta_c,engine,snr_db,clipped,seconds\n";
  for (const auto& e : report.entries) {
    os << e.signal << ',' << format_number(e.theta_c) << ',' << e.engine << ','
       << (e.snr ? to_string(*e.snr) : std::string("failed")) << ',' << e.clipped << ','
       << (fmt.include_timing ? format_fixed(e.seconds) : std::string()) << '\n';
  }
  return os.str();
}

std::string to_json(const SnrReport& report, ReportFormat fmt) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& e : report.entries) {
    nlohmann::ordered_json row;
    row["signal"] = e.signal;
    row["theta_c"] = e.theta_c;
    row["engine"] = e.engine;
    if (!e.snr) row["snr_db"] = nullptr;
    else if (e.snr->exact) row["snr_db"] = "exact";
    else row["snr_db"] = e.snr->db;
    row["clipped"] = e.clipped;
    if (fmt.include_timing) row["seconds"] = e.seconds;
    if (!e.error.empty()) row["error"] = e.error;
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json doc;
  doc["columns"] = {"signal", "theta_c", "engine", "snr_db", "clipped", "seconds"};
  doc["entries"] = std::move(rows);
  return doc.dump(2) + "\n";
}

}  // namespace fse
