#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dwts/bench.hpp"
#include "dwts/errors.hpp"
#include "dwts/io.hpp"
#include "dwts/optimize.hpp"
#include "dwts/spectral.hpp"

namespace dwts::cli {
namespace {

namespace fs = std::filesystem;

/// Thrown for bad input that CLI11 cannot catch on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const UnsupportedError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const InvalidState& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const NumericError& e) {
    err << "numeric failure in " << e.block() << " at iteration " << e.iteration() << ": "
        << e.what() << '\n';
    return exit_runtime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

std::string default_loss_path(const std::string& track_path) {
  fs::path p(track_path);
  return (p.parent_path() / (p.stem().string() + "_loss.csv")).string();
}

double peak_of(const std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  return peak;
}

void print_render(std::ostream& out, const std::vector<double>& x, double sr, const std::string& path) {
  const double peak = peak_of(x);
  out << "wrote " << path << ": " << std::fixed << std::setprecision(3)
      << static_cast<double>(x.size()) / sr << " s, peak " << std::setprecision(6) << peak;
  if (peak > 0.0) out << " (" << std::setprecision(2) << 20.0 * std::log10(peak) << " dBFS)";
  out << std::defaultfloat << '\n';
}

// Fills unvoiced frames with the nearest voiced estimate.
std::vector<double> fill_unvoiced(const F0Track& track) {
  std::vector<double> f0(track.f0.size(), 0.0);
  std::optional<std::size_t> last;
  for (std::size_t t = 0; t < f0.size(); ++t)
    if (track.voiced[t] && track.f0[t] > 0.0) last = t;
  if (!last) throw std::runtime_error("no voiced frames found in target; supply --f0 <path>");
  std::vector<std::size_t> voiced;
  for (std::size_t t = 0; t < f0.size(); ++t)
    if (track.voiced[t] && track.f0[t] > 0.0) voiced.push_back(t);
  for (std::size_t t = 0; t < f0.size(); ++t) {
    const auto it = std::lower_bound(voiced.begin(), voiced.end(), t);
    std::size_t pick;
    if (it == voiced.end()) {
      pick = voiced.back();
    } else if (it == voiced.begin()) {
      pick = *it;
    } else {
      pick = (*it - t) < (t - *(it - 1)) ? *it : *(it - 1);
    }
    f0[t] = track.f0[pick];
  }
  return f0;
}

struct FitInputs {
  std::vector<double> target;
  std::vector<double> f0;
};

// Loads the target and its f0 track, trimming the target to whole frames.
FitInputs load_fit_inputs(const std::string& target_path, const std::string& f0_source,
                          const FitConfig& cfg, std::ostream& out) {
  require_file(target_path, "target WAV");
  WavInfo info;
  const auto audio = wav_read(target_path, &info);
  if (info.channels == 2) out << "warning: stereo target downmixed to mono\n";
  if (audio.sample_rate != cfg.sample_rate)
    throw UsageError("target sample rate " + format_double(audio.sample_rate) +
                     " Hz differs from configured " + format_double(cfg.sample_rate) +
                     " Hz (no resampling is performed)");
  const std::size_t hop = hop_size(cfg.sample_rate, cfg.frame_rate);

  FitInputs in;
  if (f0_source == "auto") {
    const auto est = estimate_f0(audio.samples, cfg.sample_rate, cfg.frame_rate);
    in.f0 = fill_unvoiced(est);
    out << "estimated f0 over " << in.f0.size() << " frames\n";
  } else {
    require_file(f0_source, "f0 track");
    in.f0 = f0_track_load(f0_source).f0;
  }
  const std::size_t need = in.f0.size() * hop;
  if (in.f0.empty() || audio.samples.size() < need)
    throw UsageError("target has " + std::to_string(audio.samples.size()) + " samples; " +
                     std::to_string(in.f0.size()) + " f0 frames need " + std::to_string(need));
  in.target.assign(audio.samples.begin(), audio.samples.begin() + static_cast<std::ptrdiff_t>(need));
  return in;
}

struct CommonFitFlags {
  std::string config_path;
  std::string f0 = "auto";
  std::string loss_out;
  std::optional<int> iters;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> fft_sizes;
  bool no_antialias = false;
};

void add_fit_flags(CLI::App* cmd, CommonFitFlags& f) {
  cmd->add_option("--config", f.config_path, "key=value run configuration file");
  cmd->add_option("--f0", f.f0, "'auto' (built-in estimator) or a frame,f0_hz,confidence CSV");
  cmd->add_option("--iters", f.iters, "Adam iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f.lr, "learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "initialization seed");
  cmd->add_option("--fft-sizes", f.fft_sizes, "comma-separated loss FFT sizes");
  cmd->add_option("--loss-out", f.loss_out, "loss curve CSV (default: <track>_loss.csv)");
  cmd->add_flag("--no-antialias", f.no_antialias, "disable per-frame band-limiting");
}

RunConfig resolve_config(const CommonFitFlags& f) {
  RunConfig rc;
  if (!f.config_path.empty()) {
    require_file(f.config_path, "config");
    rc = run_config_load(f.config_path);
  }
  if (f.iters) rc.iterations = *f.iters;
  if (f.lr) rc.learning_rate = *f.lr;
  if (f.seed) rc.seed = *f.seed;
  if (f.no_antialias) rc.antialias = false;
  if (f.fft_sizes) {
    rc.fft_sizes.clear();
    std::stringstream ss(*f.fft_sizes);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        rc.fft_sizes.push_back(std::stoul(item));
      } catch (const std::exception&) {
        throw UsageError("bad --fft-sizes entry '" + item + "'");
      }
    }
  }
  return rc;
}

void print_losses(std::ostream& out, const std::vector<double>& curve, double final_loss) {
  out << "initial loss " << format_double(curve.front()) << ", final loss "
      << format_double(final_loss) << " (" << std::fixed << std::setprecision(2)
      << 100.0 * final_loss / curve.front() << "% of initial)" << std::defaultfloat << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differentiable wavetable synthesis toolkit", "dwts"};
  app.require_subcommand(1);

  // synth
  std::string bank_path, track_path, out_wav, codec = "float32";
  double sr = default_sample_rate, frame_rate = default_frame_rate;
  bool no_antialias = false;
  auto* synth = app.add_subcommand("synth", "render a bank and control track to WAV");
  synth->add_option("bank", bank_path, "bank file")->required();
  synth->add_option("track", track_path, "control track CSV")->required();
  synth->add_option("out", out_wav, "output WAV")->required();
  synth->add_option("--sr", sr, "sample rate")->check(CLI::PositiveNumber);
  synth->add_option("--frame-rate", frame_rate, "control frame rate")->check(CLI::PositiveNumber);
  synth->add_flag("--no-antialias", no_antialias, "read tables without band-limiting");
  synth->add_option("--codec", codec, "pcm16 or float32")->check(CLI::IsMember({"pcm16", "float32"}));

  // fit
  std::string target_wav, out_bank, out_track;
  std::size_t n_tables = 0, table_len = 0;
  CommonFitFlags fit_flags;
  auto* fitc = app.add_subcommand("fit", "learn a wavetable bank and controls from a target WAV");
  fitc->add_option("target", target_wav, "target WAV")->required();
  fitc->add_option("out_bank", out_bank, "output bank file")->required();
  fitc->add_option("out_track", out_track, "output control track CSV")->required();
  fitc->add_option("--n-tables", n_tables, "number of wavetables")->check(CLI::PositiveNumber);
  fitc->add_option("--table-len", table_len, "wavetable length")->check(CLI::Range(4, 1 << 16));
  add_fit_flags(fitc, fit_flags);

  // oneshot
  CommonFitFlags one_flags;
  auto* oneshot = app.add_subcommand("oneshot", "fit controls for a target against a frozen bank");
  oneshot->add_option("target", target_wav, "target WAV")->required();
  oneshot->add_option("bank", bank_path, "frozen bank file")->required();
  oneshot->add_option("out_track", out_track, "output control track CSV")->required();
  add_fit_flags(oneshot, one_flags);

  // shift
  double octaves = 0.0;
  auto* shift = app.add_subcommand("shift", "re-render a track with f0 scaled by 2^octaves");
  shift->add_option("bank", bank_path, "bank file")->required();
  shift->add_option("track", track_path, "control track CSV")->required();
  shift->add_option("out", out_wav, "output WAV")->required();
  shift->add_option("--octaves", octaves, "shift in octaves (negative is down)")->required();
  shift->add_option("--sr", sr, "sample rate")->check(CLI::PositiveNumber);
  shift->add_option("--frame-rate", frame_rate, "control frame rate")->check(CLI::PositiveNumber);
  shift->add_option("--codec", codec, "pcm16 or float32")->check(CLI::IsMember({"pcm16", "float32"}));

  // bench
  BenchOptions bench_opts;
  std::string bench_csv = "bench.csv";
  auto* bench = app.add_subcommand("bench", "time additive vs wavetable synthesis");
  bench->add_option("--trials", bench_opts.trials, "timed trials")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", bench_opts.warmup, "untimed warmup rounds");
  bench->add_option("--seconds", bench_opts.seconds, "audio seconds per trial")->check(CLI::PositiveNumber);
  bench->add_option("--sr", bench_opts.sample_rate, "sample rate")->check(CLI::PositiveNumber);
  bench->add_option("--fps", bench_opts.frame_rate, "control frames per second")->check(CLI::PositiveNumber);
  bench->add_option("--harmonics", bench_opts.harmonics, "additive harmonics")->check(CLI::PositiveNumber);
  bench->add_option("--n-tables", bench_opts.n_tables, "wavetables")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_opts.seed, "material seed");
  bench->add_option("--csv", bench_csv, "per-trial CSV output");

  // inspect
  std::string inspect_track, out_dir = ".";
  auto* inspect = app.add_subcommand("inspect", "export wavetables and attention as CSV");
  inspect->add_option("bank", bank_path, "bank file")->required();
  inspect->add_option("track", inspect_track, "control track CSV (enables attention ranking)");
  inspect->add_option("--out-dir", out_dir, "output directory");
  inspect->add_option("--frame-rate", frame_rate, "control frame rate")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  if (*synth) {
    return guarded(err, [&] {
      require_file(bank_path, "bank");
      require_file(track_path, "track");
      const auto bank = bank_load(bank_path);
      const auto track = track_load(track_path, frame_rate);
      const auto x = synthesize(bank, track, sr, !no_antialias);
      wav_write(out_wav, {sr, x}, codec == "pcm16" ? WavCodec::Pcm16 : WavCodec::Float32);
      print_render(out, x, sr, out_wav);
      return exit_ok;
    });
  }

  if (*fitc) {
    return guarded(err, [&] {
      RunConfig rc = resolve_config(fit_flags);
      if (n_tables) rc.n_tables = n_tables;
      if (table_len) rc.table_len = table_len;
      rc.validate();
      const FitConfig cfg = rc.to_fit_config();
      const auto in = load_fit_inputs(target_wav, fit_flags.f0, cfg, out);
      out << "fitting " << rc.n_tables << " tables x " << rc.table_len << " samples, "
          << rc.iterations << " iterations\n";
      const auto result = fit(in.target, in.f0, rc.n_tables, cfg);
      bank_save(out_bank, result.bank);
      track_save(out_track, result.track);
      const std::string loss_path = fit_flags.loss_out.empty() ? default_loss_path(out_track) : fit_flags.loss_out;
      loss_curve_save(loss_path, result.loss_curve);
      print_losses(out, result.loss_curve, result.final_loss);
      return exit_ok;
    });
  }

  if (*oneshot) {
    return guarded(err, [&] {
      require_file(bank_path, "bank");
      const auto bank = bank_load(bank_path);
      RunConfig rc = resolve_config(one_flags);
      rc.n_tables = bank.n_tables();
      rc.table_len = bank.table_len();
      rc.validate();
      const FitConfig cfg = rc.to_fit_config();
      const auto in = load_fit_inputs(target_wav, one_flags.f0, cfg, out);
      const auto result = fit_oneshot(in.target, in.f0, bank, cfg);
      track_save(out_track, result.track);
      const std::string loss_path = one_flags.loss_out.empty() ? default_loss_path(out_track) : one_flags.loss_out;
      loss_curve_save(loss_path, result.loss_curve);
      print_losses(out, result.loss_curve, result.final_loss);
      return exit_ok;
    });
  }

  if (*shift) {
    return guarded(err, [&] {
      require_file(bank_path, "bank");
      require_file(track_path, "track");
      const auto bank = bank_load(bank_path);
      const auto track = track_load(track_path, frame_rate);
      const double factor = std::exp2(octaves);
      const auto x = pitch_shift(bank, track, factor, sr);
      wav_write(out_wav, {sr, x}, codec == "pcm16" ? WavCodec::Pcm16 : WavCodec::Float32);
      out << "pitch factor " << format_double(factor) << '\n';
      print_render(out, x, sr, out_wav);
      return exit_ok;
    });
  }

  if (*bench) {
    return guarded(err, [&] {
      const auto report = run_bench(bench_opts);
      bench_csv_save(bench_csv, report);
      out << std::fixed << std::setprecision(3)
          << "additive (" << report.harmonics << " harmonics): " << report.additive_ms_per_second_audio
          << " ms per second of audio\n"
          << "wavetable (" << report.n_tables << " tables):   " << report.dwts_ms_per_second_audio
          << " ms per second of audio\n"
          << "speedup: " << std::setprecision(2) << report.speedup_ratio << "x over "
          << report.trials << " trials\n"
          << std::defaultfloat << "per-trial timings: " << bench_csv << '\n';
      return exit_ok;
    });
  }

  if (*inspect) {
    return guarded(err, [&] {
      require_file(bank_path, "bank");
      const auto bank = bank_load(bank_path);
      std::vector<std::size_t> order(bank.n_tables());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::optional<ControlTrack> track;
      std::vector<double> mean(bank.n_tables(), 0.0);
      if (!inspect_track.empty()) {
        require_file(inspect_track, "track");
        track = track_load(inspect_track, frame_rate);
        const auto ranking = rank_wavetables(bank, *track);
        order = ranking.order;
        mean = ranking.mean_attention;
      }
      fs::create_directories(out_dir);
      const int width = bank.n_tables() > 100 ? 3 : 2;
      for (std::size_t r = 0; r < order.size(); ++r) {
        std::ostringstream name;
        name << "table_" << std::setw(width) << std::setfill('0') << r << ".csv";
        std::ofstream f(fs::path(out_dir) / name.str());
        if (!f) throw IoError("cannot write " + (fs::path(out_dir) / name.str()).string());
        f << "index,value\n";
        const auto& table = bank.table(order[r]);
        for (std::size_t k = 0; k < table.size(); ++k) f << k << ',' << format_double(table[k]) << '\n';
      }
      {
        std::ofstream f(fs::path(out_dir) / "ranking.csv");
        f << "rank,table,mean_attention\n";
        for (std::size_t r = 0; r < order.size(); ++r)
          f << r << ',' << order[r] << ',' << format_double(mean[order[r]]) << '\n';
      }
      if (track) {
        std::ofstream f(fs::path(out_dir) / "attention.csv");
        f << "frame,time_s";
        for (std::size_t i : order) f << ",table_" << i;
        f << '\n';
        for (std::size_t t = 0; t < track->n_frames(); ++t) {
          f << t << ',' << format_double(static_cast<double>(t) / track->frame_rate);
          const auto row = track->attention_row(t);
          for (std::size_t i : order) f << ',' << format_double(row[i]);
          f << '\n';
        }
      }
      out << "wrote " << order.size() << " tables to " << out_dir
          << (track ? " (ranked by mean attention)" : "") << '\n';
      return exit_ok;
    });
  }
  return exit_usage;
}

}  // namespace dwts::cli
