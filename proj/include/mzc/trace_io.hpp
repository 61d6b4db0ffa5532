#pragma once

// Oscilloscope-style traces (load, threshold pulse detection, synthesis) and
// the toolkit's CSV formats for fringe scans and pulse trains.

#include <mzc/analysis.hpp>
#include <mzc/detection.hpp>
#include <mzc/error.hpp>
#include <mzc/interferometer.hpp>
#include <mzc/random.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mzc {

inline constexpr double kDefaultSamplePeriod = 2e-9;
inline constexpr int kFringeCsvVersion = 1;

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace io_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline double parse_double(std::string_view cell, std::size_t line, std::string_view column) {
  double x = 0.0;
  const auto *end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, x);
  if (cell.empty() || ec != std::errc{} || ptr != end || !std::isfinite(x))
    throw DataError("non-numeric value '" + std::string(cell) + "' in column " + std::string(column), line);
  return x;
}

inline std::size_t parse_index(std::string_view cell, std::size_t line, std::string_view column) {
  std::size_t x = 0;
  const auto *end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, x);
  if (cell.empty() || ec != std::errc{} || ptr != end)
    throw DataError("invalid integer '" + std::string(cell) + "' in column " + std::string(column), line);
  return x;
}

inline void expect_header(std::string_view line, const std::vector<std::string_view> &want,
                          std::size_t line_no, std::string_view what) {
  const auto got = split(line);
  std::string problems;
  auto note = [&](const std::string &msg) { problems += (problems.empty() ? "" : "; ") + msg; };
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (i >= got.size())
      note("missing column '" + std::string(want[i]) + "'");
    else if (got[i] != want[i])
      note("column " + std::to_string(i + 1) + " is '" + std::string(got[i]) + "', expected '" +
           std::string(want[i]) + "'");
  }
  if (got.size() > want.size()) note("unexpected extra column '" + std::string(got[want.size()]) + "'");
  if (!problems.empty()) throw DataError(std::string(what) + " header: " + problems, line_no);
}

inline std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

} // namespace io_detail

// ---------------------------------------------------------------------------
// Waveforms

struct Waveform {
  double sample_period = kDefaultSamplePeriod; ///< s
  double start_time = 0.0;                     ///< s, time of sample 0
  std::vector<std::vector<double>> channels;   ///< equal lengths

  std::size_t samples() const { return channels.empty() ? 0 : channels.front().size(); }
  double duration() const { return static_cast<double>(samples()) * sample_period; }
};

/// Reads a `time_s,ch1_v,ch2_v` trace. Time steps must be uniform to 1 ppm.
inline Waveform load_trace(const std::filesystem::path &path, std::vector<std::string> *warnings = nullptr) {
  using namespace io_detail;
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<double> t;
  Waveform wf;
  wf.channels.assign(2, {});
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!have_header) {
      expect_header(view, {"time_s", "ch1_v", "ch2_v"}, line_no, "trace");
      have_header = true;
      continue;
    }
    const auto cells = split(view);
    if (cells.size() != 3) throw DataError("expected 3 cells, found " + std::to_string(cells.size()), line_no);
    const double ti = parse_double(cells[0], line_no, "time_s");
    if (t.size() >= 2) {
      const double dt = t[1] - t[0];
      const double expect = t[0] + static_cast<double>(t.size()) * dt;
      if (std::abs(ti - expect) > 1e-6 * dt)
        throw DataError("non-uniform sampling (step deviates by more than 1 ppm)", line_no);
    } else if (t.size() == 1 && !(ti > t[0])) {
      throw DataError("time must increase", line_no);
    }
    t.push_back(ti);
    wf.channels[0].push_back(parse_double(cells[1], line_no, "ch1_v"));
    wf.channels[1].push_back(parse_double(cells[2], line_no, "ch2_v"));
  }
  if (!have_header) throw DataError("trace: missing header time_s,ch1_v,ch2_v");
  if (t.empty()) {
    if (warnings) warnings->push_back("trace has no samples: " + path.string());
    return wf;
  }
  wf.start_time = t.front();
  if (t.size() >= 2) wf.sample_period = t[1] - t[0];
  return wf;
}

inline void write_trace(const std::filesystem::path &path, const Waveform &wf) {
  auto out = io_detail::open_output(path);
  out << "time_s,ch1_v,ch2_v\n";
  for (std::size_t i = 0; i < wf.samples(); ++i) {
    out << format_double(wf.start_time + static_cast<double>(i) * wf.sample_period);
    for (std::size_t c = 0; c < 2; ++c)
      out << ',' << format_double(c < wf.channels.size() ? wf.channels[c][i] : 0.0);
    out << '\n';
  }
}

/// Rising-edge threshold crossings (previous sample below, current at or
/// above; a trace that opens above threshold counts as an edge at sample 0).
/// Crossings within `min_separation` of the last accepted one are treated as
/// re-triggers and dropped.
inline std::vector<double> threshold_count(std::span<const double> samples, double sample_period,
                                           double threshold, double min_separation, double start_time = 0.0) {
  if (!(sample_period > 0.0)) throw std::invalid_argument("threshold_count: sample period must be > 0");
  std::vector<double> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool below_before = i == 0 || samples[i - 1] < threshold;
    if (!(below_before && samples[i] >= threshold)) continue;
    const double t = start_time + static_cast<double>(i) * sample_period;
    if (out.empty() || t - out.back() >= min_separation) out.push_back(t);
  }
  return out;
}

/// Square pulses of height `amplitude` on a zero baseline, plus optional
/// white noise. One channel per train.
inline Waveform synthesize_waveform(std::span<const PulseTrain> trains, double sample_period, double duration,
                                    double amplitude = 1.0, double noise_rms = 0.0, std::uint64_t seed = 0) {
  if (!(sample_period > 0.0)) throw std::invalid_argument("synthesize_waveform: sample period must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(duration / sample_period));
  Waveform wf{sample_period, 0.0, {}};
  for (std::size_t c = 0; c < trains.size(); ++c) {
    std::vector<double> ch(n, 0.0);
    for (double s : trains[c].starts) {
      auto i = static_cast<std::size_t>(std::ceil(s / sample_period));
      for (; i < n && static_cast<double>(i) * sample_period < s + trains[c].width; ++i) ch[i] = amplitude;
    }
    if (noise_rms > 0.0) {
      Rng rng(derive_seed(seed, c));
      for (double &x : ch) x += rng.normal(0.0, noise_rms);
    }
    wf.channels.push_back(std::move(ch));
  }
  return wf;
}

// ---------------------------------------------------------------------------
// Pulse trains

inline void write_pulse_csv(const std::filesystem::path &path, const PulseTrain &train) {
  auto out = io_detail::open_output(path);
  out << "# duration_s: " << format_double(train.duration) << "\n";
  out << "start_time_s,width_s\n";
  for (double s : train.starts) out << format_double(s) << ',' << format_double(train.width) << '\n';
}

inline PulseTrain read_pulse_csv(const std::filesystem::path &path) {
  using namespace io_detail;
  auto in = open_input(path);
  PulseTrain train;
  train.starts.clear();
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false, have_width = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      constexpr std::string_view key = "# duration_s:";
      if (view.starts_with(key)) train.duration = parse_double(trim(view.substr(key.size())), line_no, "duration_s");
      continue;
    }
    if (!have_header) {
      expect_header(view, {"start_time_s", "width_s"}, line_no, "pulse csv");
      have_header = true;
      continue;
    }
    const auto cells = split(view);
    if (cells.size() != 2) throw DataError("expected 2 cells", line_no);
    train.starts.push_back(parse_double(cells[0], line_no, "start_time_s"));
    const double w = parse_double(cells[1], line_no, "width_s");
    if (have_width && w != train.width) throw DataError("pulse widths differ within one train", line_no);
    train.width = w;
    have_width = true;
  }
  if (!have_header) throw DataError("pulse csv: missing header start_time_s,width_s");
  return train;
}

// ---------------------------------------------------------------------------
// Fringe images

/// Row-major grid, one CSV row per pixel row (y), one column per x.
inline std::string image_csv_string(const FringeImage &img, const std::string &manifest_digest) {
  std::ostringstream out;
  out << "# mzc fringe-image v1\n";
  out << "# manifest_digest: " << manifest_digest << "\n";
  out << "# pixels: " << img.nx << 'x' << img.ny << "\n";
  out << "# pixel_pitch_m: " << format_double(img.pixel_pitch) << "\n";
  out << "# spatial_frequency_rad_per_m: " << format_double(img.spatial_frequency) << "\n";
  for (std::size_t j = 0; j < img.ny; ++j) {
    for (std::size_t i = 0; i < img.nx; ++i) out << (i ? "," : "") << format_double(img.at(i, j));
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Fringe scans

struct FringeCsv {
  FringeData data;
  std::string manifest_digest;

  bool operator==(const FringeCsv &) const = default;
};

inline std::string fringe_csv_string(const FringeData &data, const std::string &manifest_digest) {
  std::ostringstream out;
  out << "# mzc fringe-csv v" << kFringeCsvVersion << "\n";
  out << "# manifest_digest: " << manifest_digest << "\n";
  out << "# accumulation_s: " << format_double(data.accumulation) << "\n";
  out << "bin_index,pzt_voltage_v,phase_rad,counts_d1,counts_d2,coincidences\n";
  for (const auto &p : data.points) {
    out << p.bin_index << ',' << format_double(p.voltage) << ',' << format_double(p.phase) << ','
        << format_double(p.counts_d1) << ',' << format_double(p.counts_d2) << ','
        << format_double(p.coincidences) << '\n';
  }
  return out.str();
}

inline void write_fringe_csv(const std::filesystem::path &path, const FringeData &data,
                             const std::string &manifest_digest = {}) {
  auto out = io_detail::open_output(path);
  out << fringe_csv_string(data, manifest_digest);
}

inline FringeCsv read_fringe_csv(const std::filesystem::path &path) {
  using namespace io_detail;
  auto in = open_input(path);
  FringeCsv result;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  static const std::vector<std::string_view> columns{"bin_index", "pzt_voltage_v", "phase_rad",
                                                     "counts_d1", "counts_d2",     "coincidences"};
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      constexpr std::string_view version_key = "# mzc fringe-csv v";
      constexpr std::string_view digest_key = "# manifest_digest:";
      constexpr std::string_view acc_key = "# accumulation_s:";
      if (view.starts_with(version_key)) {
        const auto v = parse_index(view.substr(version_key.size()), line_no, "schema version");
        if (v != static_cast<std::size_t>(kFringeCsvVersion))
          throw SchemaVersionError("fringe csv schema v" + std::to_string(v) + " is not supported (expected v" +
                                       std::to_string(kFringeCsvVersion) + ")",
                                   line_no);
      } else if (view.starts_with(digest_key)) {
        result.manifest_digest = std::string(trim(view.substr(digest_key.size())));
      } else if (view.starts_with(acc_key)) {
        result.data.accumulation = parse_double(trim(view.substr(acc_key.size())), line_no, "accumulation_s");
      }
      continue;
    }
    if (!have_header) {
      expect_header(view, columns, line_no, "fringe csv");
      have_header = true;
      continue;
    }
    const auto cells = split(view);
    if (cells.size() != columns.size())
      throw DataError("expected 6 cells, found " + std::to_string(cells.size()), line_no);
    FringePoint p;
    p.bin_index = parse_index(cells[0], line_no, columns[0]);
    p.voltage = parse_double(cells[1], line_no, columns[1]);
    p.phase = parse_double(cells[2], line_no, columns[2]);
    p.counts_d1 = parse_double(cells[3], line_no, columns[3]);
    p.counts_d2 = parse_double(cells[4], line_no, columns[4]);
    p.coincidences = parse_double(cells[5], line_no, columns[5]);
    if (p.counts_d1 < 0 || p.counts_d2 < 0 || p.coincidences < 0)
      throw DataError("negative count", line_no);
    result.data.points.push_back(p);
  }
  if (!have_header) throw DataError("fringe csv: missing column header");
  return result;
}

} // namespace mzc
