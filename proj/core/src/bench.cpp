#include "dwts/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "dwts/errors.hpp"

namespace dwts {

void BenchOptions::validate() const {
  if (trials < 1) throw std::invalid_argument("bench: trials must be >= 1");
  if (!(seconds > 0.0)) throw std::invalid_argument("bench: seconds must be > 0");
  if (harmonics < 1) throw std::invalid_argument("bench: harmonics must be >= 1");
  if (n_tables < 1) throw std::invalid_argument("bench: n_tables must be >= 1");
  if (table_len < 4) throw std::invalid_argument("bench: table_len must be >= 4");
  if (0.5 * sample_rate <= 800.0) throw std::invalid_argument("bench: sample rate too low for 800 Hz f0");
  hop_size(sample_rate, frame_rate);
}

BenchMaterial make_bench_material(const BenchOptions& options) {
  options.validate();
  const auto frames = static_cast<std::size_t>(std::llround(options.seconds * options.frame_rate));
  if (frames == 0) throw std::invalid_argument("bench: duration shorter than one frame");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> step(0.0, 0.05);

  BenchMaterial m;
  auto& add = m.additive;
  auto& wt = m.wavetable;
  add.frame_rate = wt.frame_rate = options.frame_rate;
  add.n_harmonics = options.harmonics;
  wt.n_tables = options.n_tables;

  double f0 = 220.0;
  for (std::size_t t = 0; t < frames; ++t) {
    f0 *= std::exp(step(rng));
    if (f0 < 80.0) f0 = 160.0 - f0;
    if (f0 > 800.0) f0 = 1600.0 - f0;
    add.f0.push_back(f0);
    wt.f0.push_back(f0);
    for (std::size_t k = 0; k < options.harmonics; ++k) add.amplitudes.push_back(unit(rng));
    double sum = 0.0;
    const std::size_t row = wt.attention.size();
    for (std::size_t i = 0; i < options.n_tables; ++i) {
      wt.attention.push_back(unit(rng) + 1e-3);
      sum += wt.attention.back();
    }
    for (std::size_t i = 0; i < options.n_tables; ++i) wt.attention[row + i] /= sum;
    wt.amplitude.push_back(unit(rng));
  }
  return m;
}

MipmapBank make_bench_bank(const BenchOptions& options) {
  auto bank = init_bank(options.n_tables, options.table_len, 0.3, options.seed);
  bank.freeze();
  return build_mipmaps(bank, options.sample_rate, octaves_to_nyquist(options.sample_rate));
}

BenchReport run_bench(const BenchOptions& options) {
  const auto material = make_bench_material(options);
  const auto bank = make_bench_bank(options);
  using clock = std::chrono::steady_clock;

  double sink = 0.0;
  auto time_additive = [&] {
    PhaseState state;
    const auto start = clock::now();
    const auto out = synthesize_additive(material.additive, options.sample_rate, state,
                                         SineEvaluation::Table);
    const auto stop = clock::now();
    sink += out[out.size() / 2];
    return std::chrono::duration<double, std::milli>(stop - start).count();
  };
  auto time_dwts = [&] {
    PhaseState state;
    const auto start = clock::now();
    const auto out = synthesize_mipmapped(bank, material.wavetable, options.sample_rate, state);
    const auto stop = clock::now();
    sink += out[out.size() / 2];
    return std::chrono::duration<double, std::milli>(stop - start).count();
  };

  for (std::size_t i = 0; i < options.warmup; ++i) {
    time_additive();
    time_dwts();
  }

  BenchReport r;
  r.trials = options.trials;
  r.harmonics = options.harmonics;
  r.n_tables = options.n_tables;
  r.additive_ms.reserve(options.trials);
  r.dwts_ms.reserve(options.trials);
  for (std::size_t i = 0; i < options.trials; ++i) {
    r.additive_ms.push_back(time_additive());
    r.dwts_ms.push_back(time_dwts());
  }
  double add_total = 0.0, dwts_total = 0.0;
  for (std::size_t i = 0; i < options.trials; ++i) {
    add_total += r.additive_ms[i];
    dwts_total += r.dwts_ms[i];
  }
  const double denom = static_cast<double>(options.trials) * options.seconds;
  r.additive_ms_per_second_audio = add_total / denom;
  r.dwts_ms_per_second_audio = dwts_total / denom;
  r.speedup_ratio = r.additive_ms_per_second_audio / r.dwts_ms_per_second_audio;
  if (!std::isfinite(sink)) throw NumericError(0, "bench", "non-finite benchmark output");
  return r;
}

void bench_csv_save(const std::filesystem::path& path, const BenchReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "trial,additive_ms,dwts_ms\n";
  for (std::size_t i = 0; i < report.trials; ++i)
    out << i << ',' << report.additive_ms[i] << ',' << report.dwts_ms[i] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dwts
