#ifndef DWTS_BENCH_HPP
#define DWTS_BENCH_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dwts/oscillator.hpp"
#include "dwts/wavetable.hpp"

namespace dwts {

struct BenchOptions {
  std::size_t trials = 1000;
  std::size_t warmup = 10;
  double seconds = 1.0;
  double sample_rate = default_sample_rate;
  double frame_rate = default_frame_rate;
  std::size_t harmonics = 100;
  std::size_t n_tables = 10;
  std::size_t table_len = 512;
  std::uint64_t seed = 1234;

  void validate() const;
};

/// Identical control material for both synthesis paths: an f0 random walk in
/// [80, 800] Hz and per-frame coefficients drawn from [0, 1] (attention rows
/// normalized to sum to one).
struct BenchMaterial {
  HarmonicTrack additive;
  ControlTrack wavetable;
};

BenchMaterial make_bench_material(const BenchOptions& options);

/// Frozen Gaussian bank (sigma 0.3, so harmonically rich) with mipmaps up to
/// Nyquist.
MipmapBank make_bench_bank(const BenchOptions& options);

struct BenchReport {
  double additive_ms_per_second_audio = 0.0;
  double dwts_ms_per_second_audio = 0.0;
  double speedup_ratio = 0.0;
  std::size_t trials = 0;
  std::size_t harmonics = 0;
  std::size_t n_tables = 0;
  std::vector<double> additive_ms;  // per trial, whole render
  std::vector<double> dwts_ms;
};

/// Times synthesize_additive() (sine-table mode) against
/// synthesize_mipmapped() on one thread, alternating the two per trial after
/// `warmup` untimed rounds.
BenchReport run_bench(const BenchOptions& options);

/// CSV `trial,additive_ms,dwts_ms`.
void bench_csv_save(const std::filesystem::path& path, const BenchReport& report);

}  // namespace dwts

#endif  // DWTS_BENCH_HPP
