#include "dwts/oscillator.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "dwts/wavetable.hpp"

namespace dwts {

void ControlTrack::validate() const {
  const std::size_t frames = n_frames();
  if (!(frame_rate > 0.0)) throw std::invalid_argument("ControlTrack: frame_rate must be > 0");
  if (amplitude.size() != frames || attention.size() != frames * n_tables)
    throw std::invalid_argument("ControlTrack: f0, amplitude and attention lengths differ");
  for (std::size_t t = 0; t < frames; ++t) {
    const std::string where = " at frame " + std::to_string(t);
    if (!(f0[t] >= 0.0) || !std::isfinite(f0[t]))
      throw std::invalid_argument("ControlTrack: invalid f0" + where);
    if (!(amplitude[t] >= 0.0) || !std::isfinite(amplitude[t]))
      throw std::invalid_argument("ControlTrack: invalid amplitude" + where);
    double sum = 0.0;
    for (double c : attention_row(t)) {
      if (!(c >= 0.0)) throw std::invalid_argument("ControlTrack: negative attention" + where);
      sum += c;
    }
    if (n_tables > 0 && std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("ControlTrack: attention sums to " + std::to_string(sum) + where);
  }
}

std::size_t hop_size(double sample_rate, double frame_rate) {
  if (!(sample_rate > 0.0) || !(frame_rate > 0.0))
    throw std::invalid_argument("hop_size: rates must be positive");
  const double hop = sample_rate / frame_rate;
  if (hop < 1.0 || hop != std::floor(hop))
    throw std::invalid_argument("hop_size: sample_rate / frame_rate = " + std::to_string(hop) +
                                " is not a positive integer");
  return static_cast<std::size_t>(hop);
}

std::vector<double> accumulate_phase(std::span<const double> f0_per_sample, double sample_rate,
                                     double initial_phase) {
  if (!(sample_rate > 0.0)) throw std::invalid_argument("accumulate_phase: sample_rate must be > 0");
  for (double f : f0_per_sample)
    if (!(f >= 0.0)) throw std::invalid_argument("accumulate_phase: negative f0");
  std::vector<double> phase(f0_per_sample.size());
  double p = initial_phase;
  for (std::size_t n = 0; n < phase.size(); ++n) {
    phase[n] = p;
    p = advance_phase(p, f0_per_sample[n], sample_rate);
  }
  return phase;
}

SampleControls upsample_controls(const ControlTrack& track, double sample_rate,
                                 std::size_t n_samples) {
  const std::size_t hop = hop_size(sample_rate, track.frame_rate);
  const std::size_t frames = track.n_frames();
  const std::size_t n_tables = track.n_tables;
  if (frames == 0 && n_samples > 0)
    throw std::invalid_argument("upsample_controls: empty track");

  SampleControls out;
  out.n_tables = n_tables;
  out.f0.resize(n_samples);
  out.amplitude.resize(n_samples);
  out.attention.resize(n_samples * n_tables);
  for (std::size_t n = 0; n < n_samples; ++n) {
    std::size_t t = n / hop;
    double alpha = frame_alpha(n % hop, hop);
    if (t >= frames) {
      t = frames - 1;
      alpha = 0.0;
    }
    const std::size_t next = t + 1 < frames ? t + 1 : t;
    out.f0[n] = smooth(track.f0[t], track.f0[next], alpha);
    out.amplitude[n] = smooth(track.amplitude[t], track.amplitude[next], alpha);
    for (std::size_t i = 0; i < n_tables; ++i)
      out.attention[n * n_tables + i] =
          smooth(track.attention[t * n_tables + i], track.attention[next * n_tables + i], alpha);
  }
  return out;
}

namespace {

void check_f0_range(std::span<const double> f0, double sample_rate) {
  for (std::size_t t = 0; t < f0.size(); ++t)
    if (!(f0[t] >= 0.0 && f0[t] < 0.5 * sample_rate))
      throw std::invalid_argument("f0 " + std::to_string(f0[t]) + " Hz at frame " +
                                  std::to_string(t) + " outside [0, Nyquist)");
}

void smooth_row(std::span<const double> from, std::span<const double> to, double alpha,
                std::span<double> out) noexcept {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = smooth(from[i], to[i], alpha);
}

// Drives the per-sample loop shared by every synthesis path: f0 smoothing,
// phase accumulation and buffer layout. Kernels differ only in how a sample is
// formed from the (smoothed) frame controls.
template <class Kernel>
void render_frames(std::span<const double> f0, double sample_rate, std::size_t hop,
                   PhaseState& state, std::span<double> out, Kernel& kernel) {
  const std::size_t frames = f0.size();
  double phase = state.phase;
  std::size_t n = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t next = t + 1 < frames ? t + 1 : t;
    kernel.begin_frame(t, next);
    for (std::size_t s = 0; s < hop; ++s, ++n) {
      const double alpha = frame_alpha(s, hop);
      const double f = smooth(f0[t], f0[next], alpha);
      out[n] = kernel.sample(alpha, phase, f);
      phase = advance_phase(phase, f, sample_rate);
    }
  }
  state.phase = phase;
}

struct WavetableKernel {
  const ControlTrack& track;
  std::size_t table_len;
  std::size_t row_stride;  // L, or L+1 for rows carrying their wrap sample
  std::vector<const double*> frame_tables;
  std::vector<double> coeffs;

  std::span<const double> c_from, c_to;
  double a_from = 0.0, a_to = 0.0;
  const double* tables = nullptr;

  void begin_frame(std::size_t t, std::size_t next) {
    c_from = track.attention_row(t);
    c_to = track.attention_row(next);
    a_from = track.amplitude[t];
    a_to = track.amplitude[next];
    tables = frame_tables[t];
  }

  double sample(double alpha, double phase, double) {
    smooth_row(c_from, c_to, alpha, coeffs);
    const double j = phase_to_index(phase, table_len);
    double sum = 0.0;
    if (row_stride == table_len) {
      for (std::size_t i = 0; i < coeffs.size(); ++i)
        sum += coeffs[i] * detail::lerp_read(tables + i * row_stride, table_len, j);
    } else {
      const auto k = static_cast<std::size_t>(j);
      const double frac = j - static_cast<double>(k);
      for (std::size_t i = 0; i < coeffs.size(); ++i) {
        const double* row = tables + i * row_stride;
        sum += coeffs[i] * (row[k] + frac * (row[k + 1] - row[k]));
      }
    }
    return smooth(a_from, a_to, alpha) * sum;
  }
};

const std::vector<double>& sine_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(sine_table_size + 1);
    for (std::size_t i = 0; i < sine_table_size; ++i)
      t[i] = std::sin(two_pi * static_cast<double>(i) / static_cast<double>(sine_table_size));
    t[sine_table_size] = t[0];
    return t;
  }();
  return table;
}

struct AdditiveKernel {
  const HarmonicTrack& track;
  double nyquist;
  SineEvaluation sine;
  std::vector<double> coeffs;
  std::span<const double> a_from, a_to;

  void begin_frame(std::size_t t, std::size_t next) {
    const std::size_t h = track.n_harmonics;
    a_from = std::span<const double>(track.amplitudes).subspan(t * h, h);
    a_to = std::span<const double>(track.amplitudes).subspan(next * h, h);
  }

  double sample(double alpha, double phase, double f0) {
    smooth_row(a_from, a_to, alpha, coeffs);
    // Every harmonic is evaluated; those at or above Nyquist get weight zero.
    double sum = 0.0;
    if (sine == SineEvaluation::Exact) {
      for (std::size_t k = 1; k <= coeffs.size(); ++k) {
        const double gain = static_cast<double>(k) * f0 < nyquist ? coeffs[k - 1] : 0.0;
        sum += gain * std::sin(static_cast<double>(k) * phase);
      }
      return sum;
    }
    // 32-bit phase accumulator: harmonic k sits at k times the fundamental's
    // position and wraps by integer overflow.
    constexpr int frac_bits = 32 - 12;
    static_assert(sine_table_size == std::size_t{1} << 12);
    constexpr double frac_scale = 1.0 / static_cast<double>(1u << frac_bits);
    const double* table = sine_table().data();
    const auto base = static_cast<std::uint32_t>(
        static_cast<std::uint64_t>(phase * (4294967296.0 / two_pi)) & 0xFFFFFFFFu);
    std::uint32_t pos = 0;
    double harmonic_f0 = 0.0;
    for (std::size_t k = 1; k <= coeffs.size(); ++k) {
      pos += base;
      harmonic_f0 += f0;
      const std::uint32_t i = pos >> frac_bits;
      const double frac = static_cast<double>(pos & ((1u << frac_bits) - 1)) * frac_scale;
      const double gain = harmonic_f0 < nyquist ? coeffs[k - 1] : 0.0;
      sum += gain * (table[i] + frac * (table[i + 1] - table[i]));
    }
    return sum;
  }
};

void check_track(const ControlTrack& track, std::size_t n_tables, double sample_rate) {
  track.validate();
  if (track.n_tables != n_tables)
    throw std::invalid_argument("synthesize: track has " + std::to_string(track.n_tables) +
                                " attention columns, bank has " + std::to_string(n_tables) +
                                " tables");
  check_f0_range(track.f0, sample_rate);
}

}  // namespace

std::vector<double> synthesize(const WavetableBank& bank, const ControlTrack& track,
                               double sample_rate, bool antialias, PhaseState& state) {
  check_track(track, bank.n_tables(), sample_rate);
  const std::size_t hop = hop_size(sample_rate, track.frame_rate);
  const std::size_t len = bank.table_len();
  const std::size_t frames = track.n_frames();

  // Band-limited copies are shared by all frames with the same harmonic limit.
  std::map<std::size_t, std::vector<double>> by_limit;
  auto flat_copy = [&](std::size_t limit) {
    std::vector<double> data(bank.n_tables() * len);
    for (std::size_t i = 0; i < bank.n_tables(); ++i) {
      std::span<double> row(data.data() + i * len, len);
      if (antialias)
        bandlimit(bank.table(i).samples(), limit, row);
      else
        std::copy_n(bank.table(i).samples().begin(), len, row.begin());
    }
    return data;
  };

  WavetableKernel kernel{track, len, len, {}, std::vector<double>(bank.n_tables()), {}, {}};
  kernel.frame_tables.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t limit = len / 2;
    if (antialias) {
      const std::size_t next = t + 1 < frames ? t + 1 : t;
      limit = std::min(harmonic_limit(sample_rate, std::max(track.f0[t], track.f0[next])), limit);
    }
    auto it = by_limit.find(limit);
    if (it == by_limit.end()) it = by_limit.emplace(limit, flat_copy(limit)).first;
    kernel.frame_tables[t] = it->second.data();
  }

  std::vector<double> out(frames * hop);
  render_frames(track.f0, sample_rate, hop, state, out, kernel);
  return out;
}

std::vector<double> synthesize(const WavetableBank& bank, const ControlTrack& track,
                               double sample_rate, bool antialias) {
  PhaseState state;
  return synthesize(bank, track, sample_rate, antialias, state);
}

std::vector<double> synthesize_mipmapped(const MipmapBank& bank, const ControlTrack& track,
                                         double sample_rate, PhaseState& state) {
  check_track(track, bank.n_tables(), sample_rate);
  const std::size_t hop = hop_size(sample_rate, track.frame_rate);
  const std::size_t len = bank.table_len();
  const std::size_t frames = track.n_frames();

  WavetableKernel kernel{track, len, len + 1, {}, std::vector<double>(bank.n_tables()), {}, {}};
  kernel.frame_tables.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t next = t + 1 < frames ? t + 1 : t;
    kernel.frame_tables[t] = bank.row(bank.level_for(std::max(track.f0[t], track.f0[next])), 0);
  }

  std::vector<double> out(frames * hop);
  render_frames(track.f0, sample_rate, hop, state, out, kernel);
  return out;
}

std::vector<double> synthesize_additive(const HarmonicTrack& track, double sample_rate,
                                        PhaseState& state, SineEvaluation sine) {
  const std::size_t hop = hop_size(sample_rate, track.frame_rate);
  if (track.n_harmonics == 0)
    throw std::invalid_argument("synthesize_additive: n_harmonics must be >= 1");
  if (track.amplitudes.size() != track.n_frames() * track.n_harmonics)
    throw std::invalid_argument("synthesize_additive: amplitude rows do not match frames");
  check_f0_range(track.f0, sample_rate);

  AdditiveKernel kernel{track, 0.5 * sample_rate, sine, std::vector<double>(track.n_harmonics), {}, {}};
  std::vector<double> out(track.n_frames() * hop);
  render_frames(track.f0, sample_rate, hop, state, out, kernel);
  return out;
}

std::vector<double> synthesize_additive(const HarmonicTrack& track, double sample_rate,
                                        SineEvaluation sine) {
  PhaseState state;
  return synthesize_additive(track, sample_rate, state, sine);
}

}  // namespace dwts
