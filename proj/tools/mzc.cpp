// mzc: command-line driver for simulation, analysis and trace processing.
//
// Exit codes: 0 ok, 1 usage or config error, 2 data error, 3 fit did not converge.

#include <mzc/mzc.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNoConvergence = 3;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool paper_scale = false;
  bool dark_port_b = false;
  bool overwrite = false;
};

mzc::Config resolve_config(const GlobalOptions &g) {
  mzc::Config c = g.config_path.empty() ? mzc::Config{} : mzc::load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.output_dir = *g.out;
  if (g.paper_scale) c.calibration.singles_max_per_bin = mzc::kPaperSinglesMax;
  if (g.dark_port_b) c.scan.phase_offset += std::numbers::pi;
  c.validate();
  return c;
}

json derived_values(const mzc::Config &c) {
  const double p = mzc::attenuated_power(c.source);
  const double rate = mzc::photon_rate(p, c.source.wavelength);
  const double window = c.photon_window();
  return {{"attenuated_power_w", p},
          {"physical_photon_rate_hz", rate},
          {"mean_photon_window_s", window},
          {"mean_photon_number", rate * window},
          {"input_photon_rate_hz", mzc::input_photon_rate(c)},
          {"effective_window_s", c.effective_window()},
          {"coherence_time_s", c.source.coherence_time()},
          {"coherence_length_m", c.source.coherence_length()},
          {"scan_step_v", c.scan.step()},
          {"scan_period_v", c.scan.period()}};
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mzc::DataError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Collects a run's outputs in memory and writes them together with the
/// manifest only once everything has been produced.
class RunOutput {
public:
  RunOutput(const mzc::Config &c, std::string command) : dir_(c.output_dir) {
    manifest_.command = std::move(command);
    manifest_.seed = c.seed;
    manifest_.parameters = mzc::config_to_json(c);
    manifest_.derived = derived_values(c);
  }

  void add_input(const fs::path &path) {
    manifest_.inputs.push_back({path.string(), mzc::sha256_hex(read_file(path))});
  }

  json &derived() { return manifest_.derived; }

  /// Digest that outputs cite; fixed once the first output is added.
  const std::string &digest() {
    if (digest_.empty()) digest_ = mzc::manifest_digest(manifest_);
    return digest_;
  }

  void add(const std::string &name, std::string content) { files_.emplace_back(name, std::move(content)); }

  /// An output directory holds exactly one run. Another run's outputs are
  /// replaced only with `overwrite`; an identical rerun may always replace them.
  void commit(bool overwrite) {
    const fs::path manifest_path = dir_ / "manifest.json";
    if (fs::exists(manifest_path)) {
      std::optional<mzc::RunManifest> previous;
      try {
        previous = mzc::read_manifest(manifest_path);
      } catch (const mzc::DataError &) {
      }
      if (!previous && !overwrite)
        throw mzc::ConfigError(dir_.string() + " holds an unreadable manifest; pass --overwrite to replace it");
      if (previous && mzc::manifest_digest(*previous) != digest() && !overwrite)
        throw mzc::ConfigError(dir_.string() + " already holds a different run; choose another --out or pass --overwrite");
      if (previous && mzc::manifest_digest(*previous) != digest()) {
        for (const auto &in : manifest_.inputs)
          if (fs::equivalent(fs::absolute(in.path).parent_path(), fs::absolute(dir_)))
            throw mzc::ConfigError("input " + in.path + " belongs to the run in " + dir_.string() +
                                   "; write to another --out");
      }
      if (previous)
        for (const auto &f : previous->outputs) fs::remove(dir_ / fs::path(f.path).filename());
    }
    fs::create_directories(dir_);
    manifest_.created_utc = utc_now();
    for (const auto &[name, content] : files_) manifest_.outputs.push_back({name, mzc::sha256_hex(content)});
    files_.emplace_back("manifest.json", mzc::manifest_string(manifest_));
    std::vector<fs::path> staged;
    try {
      for (const auto &[name, content] : files_) {
        const fs::path tmp = dir_ / (name + ".partial");
        std::ofstream out(tmp, std::ios::binary);
        out << content;
        out.close();
        if (!out) throw mzc::DataError("cannot write " + tmp.string());
        staged.push_back(tmp);
      }
    } catch (...) {
      for (const auto &p : staged) fs::remove(p);
      throw;
    }
    for (std::size_t i = 0; i < files_.size(); ++i) fs::rename(staged[i], dir_ / files_[i].first);
  }

private:
  fs::path dir_;
  mzc::RunManifest manifest_;
  std::string digest_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string json_text(const json &j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

int cmd_simulate(const GlobalOptions &g, unsigned threads) {
  const auto c = resolve_config(g);
  RunOutput run(c, "simulate");
  const auto fringe = mzc::simulate_scan(c, 0, c.scan.points_per_scan, threads);
  run.add("fringe.csv", mzc::fringe_csv_string(fringe, run.digest()));
  run.commit(g.overwrite);
  std::cout << "wrote " << fringe.size() << " scan points to " << (fs::path(c.output_dir) / "fringe.csv").string()
            << "\n";
  return kExitOk;
}

int cmd_simulate_analytic(const GlobalOptions &g) {
  const auto c = resolve_config(g);
  RunOutput run(c, "simulate-analytic");
  const auto fringe = mzc::analytic_scan(c);
  const auto cw = mzc::cw_fringes(c.scan, c.analysis.cw_power, c.split_imbalance);
  const double i2 = c.analysis.cw_power * c.analysis.cw_power;

  std::ostringstream product;
  product << "# manifest_digest: " << run.digest() << "\n";
  product << "bin_index,pzt_voltage_v,phase_rad,visibility,intensity_a_w,intensity_b_w,product_w2,"
             "normalized_product\n";
  for (std::size_t i = 0; i < cw.voltage.size(); ++i) {
    product << i << ',' << mzc::format_double(cw.voltage[i]) << ',' << mzc::format_double(cw.phase[i]) << ','
            << mzc::format_double(cw.visibility[i]) << ',' << mzc::format_double(cw.a[i]) << ','
            << mzc::format_double(cw.b[i]) << ',' << mzc::format_double(cw.product[i]) << ','
            << mzc::format_double(i2 > 0.0 ? cw.product[i] / i2 : 0.0) << '\n';
  }
  run.add("fringe.csv", mzc::fringe_csv_string(fringe, run.digest()));
  run.add("product.csv", product.str());
  run.commit(g.overwrite);
  std::cout << "wrote analytic fringe and product curves to " << c.output_dir << "\n";
  return kExitOk;
}

mzc::FringeData load_fringe(const fs::path &path) {
  auto csv = mzc::read_fringe_csv(path);
  try {
    csv.data.validate();
  } catch (const std::invalid_argument &e) {
    throw mzc::DataError(path.string() + ": " + e.what());
  }
  return std::move(csv.data);
}

int cmd_analyze(const GlobalOptions &g, const fs::path &input) {
  const auto c = resolve_config(g);
  const auto fringe = load_fringe(input);
  if (fringe.empty()) throw mzc::DataError(input.string() + ": no data rows");
  RunOutput run(c, "analyze");
  run.add_input(input);

  mzc::AnalysisReport report;
  try {
    report = mzc::analyze_fringe(fringe, {c.effective_window(), c.analysis.outer_fraction, c.analysis.max_shift});
  } catch (const std::domain_error &e) {
    throw mzc::DataError(std::string("analysis undefined for this input: ") + e.what());
  }
  report.json["input"] = input.string();
  report.json["manifest_digest"] = run.digest();
  run.add("report.json", json_text(report.json));
  run.commit(g.overwrite);

  const auto &g2 = report.json["g2"];
  std::printf("visibility d1 %.6f  d2 %.6f\n", report.json["visibility"]["d1"].get<double>(),
              report.json["visibility"]["d2"].get<double>());
  std::printf("g2 %.4f +/- %.4f  below 0.5: %s\n", g2["g2"].get<double>(), g2["uncertainty"].get<double>(),
              g2["below_g2_bound"].get<bool>() ? "yes" : "no");
  if (!report.fits_converged) {
    std::cerr << "mzc: envelope fit did not converge (see report.json)\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

int cmd_fit(const GlobalOptions &g, const fs::path &input, const std::string &channel) {
  const auto c = resolve_config(g);
  const auto fringe = load_fringe(input);
  RunOutput run(c, "fit");
  run.add_input(input);
  const auto v = fringe.voltages();
  json out{{"input", input.string()}, {"manifest_digest", run.digest()}};
  bool converged = true;
  for (const auto &[name, ch] : {std::pair{"d1", mzc::Channel::d1}, std::pair{"d2", mzc::Channel::d2}}) {
    if (channel != "both" && channel != name) continue;
    const auto counts = ch == mzc::Channel::d1 ? fringe.d1() : fringe.d2();
    const auto r = mzc::try_fit_envelope(v, counts, ch);
    converged = converged && r.converged;
    out[name] = mzc::to_json_value(r);
    std::printf("%s: %s  V_max %.5f  sigma %.4f V  omega %.6f rad/V\n", name, r.message.c_str(), r.max_visibility,
                r.sigma, r.omega);
  }
  run.add("fit.json", json_text(out));
  run.commit(g.overwrite);
  return converged ? kExitOk : kExitNoConvergence;
}

struct TraceOptions {
  std::string input;
  double synthesize = 0.0; ///< s of synthetic stream; 0 reads `input`
  std::optional<double> rate;
  double sample_period = mzc::kDefaultSamplePeriod;
  double noise_rms = 0.0;
  double threshold = 0.5;
  double min_separation = 20e-9;
  double cluster_window = 20e-9;
  std::size_t histogram_bins = 20;
};

json channel_summary(const std::vector<double> &starts, double duration, double window, std::size_t bins) {
  const auto b = mzc::bunched_event_stats(starts, window);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < starts.size(); ++i) gaps.push_back(starts[i] - starts[i - 1]);
  const double max_gap = gaps.empty() ? 0.0 : *std::max_element(gaps.begin(), gaps.end());
  const double width = max_gap > 0.0 ? max_gap / static_cast<double>(bins) : 0.0;
  std::vector<std::size_t> hist(gaps.empty() ? 0 : bins, 0);
  for (double x : gaps) hist[std::min(bins - 1, static_cast<std::size_t>(x / width))]++;
  return {{"pulses", starts.size()},
          {"rate_hz", duration > 0.0 ? static_cast<double>(starts.size()) / duration : 0.0},
          {"clusters",
           {{"single", b.singles},
            {"double", b.doubles},
            {"triple", b.triples},
            {"higher", b.higher},
            {"double_to_single", b.double_to_single()}}},
          {"inter_arrival", {{"bin_width_s", width}, {"counts", hist}}}};
}

/// Clusters of the merged stream (gaps < window) holding pulses of both channels.
std::size_t cross_channel_clusters(const std::vector<double> &a, const std::vector<double> &b, double window) {
  std::vector<std::pair<double, int>> all;
  for (double t : a) all.emplace_back(t, 1);
  for (double t : b) all.emplace_back(t, 2);
  std::sort(all.begin(), all.end());
  std::size_t count = 0;
  int mask = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i > 0 && all[i].first - all[i - 1].first >= window) {
      count += mask == 3;
      mask = 0;
    }
    mask |= all[i].second;
  }
  return count + (mask == 3);
}

int cmd_traces(const GlobalOptions &g, const TraceOptions &o) {
  const auto c = resolve_config(g);
  if (o.synthesize <= 0.0 && o.input.empty()) throw mzc::ConfigError("traces: give a trace file or --synthesize");
  if (!(o.min_separation >= o.sample_period)) throw mzc::ConfigError("traces: --min-separation must be >= sample period");
  if (o.histogram_bins == 0) throw mzc::ConfigError("traces: --histogram-bins must be > 0");
  RunOutput run(c, "traces");

  mzc::Waveform wf;
  std::vector<std::string> warnings;
  if (o.synthesize > 0.0) {
    const double rate = o.rate.value_or(mzc::photon_rate(mzc::attenuated_power(c.source), c.source.wavelength));
    if (!(rate >= 0.0)) throw mzc::ConfigError("traces: --rate must be >= 0");
    run.derived()["synthesis"] = {{"photon_rate_hz", rate}, {"duration_s", o.synthesize}};
    // The second splitter is absent: each photon goes to either detector with probability 1/2.
    const auto photons = mzc::sample_arrivals(rate, o.synthesize, mzc::derive_seed(c.seed, 200));
    const auto routed = mzc::route_photons(photons, mzc::MziState{std::numbers::pi / 2, 1.0, 0.0},
                                           mzc::derive_seed(c.seed, 201));
    const std::vector<mzc::PulseTrain> trains{mzc::detect(routed.a, c.detectors[0], mzc::derive_seed(c.seed, 202)),
                                              mzc::detect(routed.b, c.detectors[1], mzc::derive_seed(c.seed, 203))};
    wf = mzc::synthesize_waveform(trains, o.sample_period, o.synthesize, 1.0, o.noise_rms,
                                  mzc::derive_seed(c.seed, 204));
  } else {
    run.add_input(o.input);
    wf = mzc::load_trace(o.input, &warnings);
  }
  for (const auto &w : warnings) std::cerr << "mzc: warning: " << w << "\n";

  std::vector<std::vector<double>> starts;
  for (const auto &ch : wf.channels) {
    auto s = mzc::threshold_count(ch, wf.sample_period, o.threshold, o.min_separation, 0.0);
    starts.push_back(std::move(s));
  }
  const double duration = wf.duration();

  json report{{"schema_version", mzc::kReportSchemaVersion},
              {"manifest_digest", run.digest()},
              {"input", o.synthesize > 0.0 ? json("trace.csv") : json(o.input)},
              {"samples", wf.samples()},
              {"sample_period_s", wf.sample_period},
              {"duration_s", duration},
              {"threshold_v", o.threshold},
              {"min_separation_s", o.min_separation},
              {"cluster_window_s", o.cluster_window},
              {"warnings", warnings}};
  json channels = json::array();
  for (std::size_t k = 0; k < starts.size(); ++k) {
    auto s = channel_summary(starts[k], duration, o.cluster_window, o.histogram_bins);
    s["name"] = "ch" + std::to_string(k + 1);
    channels.push_back(std::move(s));
  }
  report["channels"] = channels;

  std::uint64_t coincidences = 0;
  if (duration > 0.0) {
    const mzc::PulseTrain a{starts[0], c.detectors[0].pulse_width, duration};
    const mzc::PulseTrain b{starts[1], c.detectors[1].pulse_width, duration};
    coincidences = mzc::count_coincidences(a, b, c.ccu());
  }
  report["coincidences"] = coincidences;
  report["cross_channel_clusters"] = cross_channel_clusters(starts[0], starts[1], o.cluster_window);

  if (o.synthesize > 0.0) {
    std::ostringstream trace;
    trace << "time_s,ch1_v,ch2_v\n";
    for (std::size_t i = 0; i < wf.samples(); ++i)
      trace << mzc::format_double(static_cast<double>(i) * wf.sample_period) << ','
            << mzc::format_double(wf.channels[0][i]) << ',' << mzc::format_double(wf.channels[1][i]) << '\n';
    run.add("trace.csv", trace.str());
  }
  run.add("traces.json", json_text(report));
  run.commit(g.overwrite);
  std::printf("ch1 %zu pulses, ch2 %zu pulses, %llu coincidences\n", starts[0].size(), starts[1].size(),
              static_cast<unsigned long long>(coincidences));
  return kExitOk;
}

struct ImageOptions {
  std::optional<double> voltage;
  std::size_t pixels = 200;
  double pitch = 10e-6;
  double waist = 20e-3;
  std::optional<double> tilt;
};

int cmd_render_image(const GlobalOptions &g, const ImageOptions &o) {
  const auto c = resolve_config(g);
  mzc::ImageParams p;
  p.pixels_x = p.pixels_y = o.pixels;
  p.pixel_pitch = o.pitch;
  p.beam_waist = o.waist;
  p.wavelength = c.source.wavelength;
  if (o.tilt) {
    p.tilt_per_volt = *o.tilt;
  } else if (const auto *w = std::get_if<mzc::WalkOffEnvelope>(&c.scan.envelope)) {
    p.tilt_per_volt = w->tilt_per_volt;
  } else {
    p.tilt_per_volt =
        mzc::walk_off_matching_gaussian(std::get<mzc::GaussianEnvelope>(c.scan.envelope).sigma, 1e-3, p.wavelength)
            .tilt_per_volt;
  }
  const double v = o.voltage.value_or(c.scan.v_center);
  mzc::FringeImage img;
  try {
    p.validate();
    img = mzc::render_fringe_image(v, c.scan, p);
  } catch (const std::invalid_argument &e) {
    throw mzc::ConfigError(e.what());
  } catch (const std::out_of_range &e) {
    throw mzc::ConfigError(e.what());
  }
  RunOutput run(c, "render-image");
  run.derived()["image"] = {{"voltage_v", v},
                            {"pixels", o.pixels},
                            {"pixel_pitch_m", p.pixel_pitch},
                            {"beam_waist_m", p.beam_waist},
                            {"tilt_per_volt_rad", p.tilt_per_volt},
                            {"spatial_frequency_rad_per_m", img.spatial_frequency}};
  run.add("image.csv", mzc::image_csv_string(img, run.digest()));
  run.commit(g.overwrite);
  std::cout << "wrote " << o.pixels << "x" << o.pixels << " image at " << v << " V to " << c.output_dir << "\n";
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Monte Carlo simulator and analysis toolkit for Mach-Zehnder coincidence counting"};
  app.set_version_flag("--version", std::string(mzc::kToolkitVersion));
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON config file (unknown keys are rejected)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out", g.out, "Output directory (overrides config output_dir)");
  app.add_flag("--paper-scale", g.paper_scale, "Calibrate singles maxima to 2e5 per bin instead of 2e4");
  app.add_flag("--overwrite", g.overwrite, "Replace another run's outputs in the output directory");
  app.add_flag("--dark-port-b", g.dark_port_b, "Put the dark port on D2 at the scan center (adds pi to the phase)");

  unsigned threads = 0;
  auto *simulate = app.add_subcommand("simulate", "Monte Carlo fringe scan -> fringe.csv");
  simulate->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto *analytic = app.add_subcommand("simulate-analytic", "Expected-count fringe and cw product curves");

  std::string fringe_path;
  auto *analyze = app.add_subcommand("analyze", "Visibility, g2, product prediction, fits -> report.json");
  analyze->add_option("fringe", fringe_path, "Fringe CSV")->required()->check(CLI::ExistingFile);

  std::string fit_path, channel = "both";
  auto *fit = app.add_subcommand("fit", "Gaussian-envelope fringe fit -> fit.json");
  fit->add_option("fringe", fit_path, "Fringe CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--channel", channel, "d1, d2 or both")->check(CLI::IsMember({"d1", "d2", "both"}));

  TraceOptions to;
  auto *traces = app.add_subcommand("traces", "Threshold-count a two-channel trace -> traces.json");
  traces->add_option("trace", to.input, "Trace CSV (time_s,ch1_v,ch2_v)")->check(CLI::ExistingFile);
  traces->add_option("--synthesize", to.synthesize, "Synthesize this many seconds of trace instead of reading one");
  traces->add_option("--rate", to.rate, "Photon rate for synthesis (default: attenuated source rate)");
  traces->add_option("--sample-period", to.sample_period, "Synthesis sample period, s")
      ->check(CLI::PositiveNumber);
  traces->add_option("--noise-rms", to.noise_rms, "Synthesis white-noise RMS, V")->check(CLI::NonNegativeNumber);
  traces->add_option("--threshold", to.threshold, "Rising-edge threshold, V");
  traces->add_option("--min-separation", to.min_separation, "Re-trigger suppression, s");
  traces->add_option("--cluster-window", to.cluster_window, "Gap below which pulses form one cluster, s")
      ->check(CLI::PositiveNumber);
  traces->add_option("--histogram-bins", to.histogram_bins, "Inter-arrival histogram bins");

  ImageOptions io;
  auto *image = app.add_subcommand("render-image", "Camera-plane fringe image at one PZT voltage -> image.csv");
  image->add_option("--voltage", io.voltage, "PZT voltage (default: scan center)");
  image->add_option("--pixels", io.pixels, "Pixels per side")->check(CLI::PositiveNumber);
  image->add_option("--pitch", io.pitch, "Pixel pitch, m")->check(CLI::PositiveNumber);
  image->add_option("--waist", io.waist, "Beam 1/e^2 radius, m")->check(CLI::PositiveNumber);
  image->add_option("--tilt", io.tilt, "Mirror tilt per volt, rad/V (default: matched to the envelope)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(g, threads);
    if (*analytic) return cmd_simulate_analytic(g);
    if (*analyze) return cmd_analyze(g, fringe_path);
    if (*fit) return cmd_fit(g, fit_path, channel);
    if (*traces) return cmd_traces(g, to);
    if (*image) return cmd_render_image(g, io);
  } catch (const mzc::ConfigError &e) {
    std::cerr << "mzc: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mzc::DataError &e) {
    std::cerr << "mzc: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception &e) {
    std::cerr << "mzc: error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
