#ifndef DWTS_OSCILLATOR_HPP
#define DWTS_OSCILLATOR_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "dwts/wavetable.hpp"

namespace dwts {

inline constexpr double default_sample_rate = 16000.0;
inline constexpr double default_frame_rate = 250.0;

/// Frame-rate controls for the wavetable synth: f0 in Hz, amplitude A >= 0 and
/// one attention row of n_tables weights per frame (row-major).
struct ControlTrack {
  double frame_rate = default_frame_rate;
  std::size_t n_tables = 0;
  std::vector<double> f0;
  std::vector<double> amplitude;
  std::vector<double> attention;

  std::size_t n_frames() const noexcept { return f0.size(); }
  std::span<const double> attention_row(std::size_t t) const {
    return std::span<const double>(attention).subspan(t * n_tables, n_tables);
  }

  /// Checks shapes, f0 >= 0, A >= 0, and that every attention row is
  /// nonnegative and sums to 1 within 1e-6. Throws std::invalid_argument
  /// naming the offending frame.
  void validate() const;
};

/// Controls for the additive baseline: n_harmonics sine amplitudes per frame.
struct HarmonicTrack {
  double frame_rate = default_frame_rate;
  std::size_t n_harmonics = 0;
  std::vector<double> f0;
  std::vector<double> amplitudes;  // frames x n_harmonics

  std::size_t n_frames() const noexcept { return f0.size(); }
};

/// Oscillator phase in radians, always in [0, 2*pi). Carried across calls to
/// render contiguous buffers.
struct PhaseState {
  double phase = 0.0;
};

/// Samples per control frame. Throws std::invalid_argument unless
/// sample_rate / frame_rate is a positive integer.
std::size_t hop_size(double sample_rate, double frame_rate);

/// Advances a phase by one sample at frequency f0 and wraps into [0, 2*pi).
inline double advance_phase(double phase, double f0, double sample_rate) noexcept {
  phase += two_pi * f0 / sample_rate;
  if (phase >= two_pi) {
    phase -= two_pi;
    if (phase >= two_pi) phase = std::fmod(phase, two_pi);
  }
  return phase;
}

/// Fractional table index for a phase; always in [0, table_len).
inline double phase_to_index(double phase, std::size_t table_len) noexcept {
  const double len = static_cast<double>(table_len);
  const double j = phase * (len / two_pi);
  return j < len ? j : 0.0;
}

/// Linear ramp weight of sample `offset` inside a frame of `hop` samples.
inline double frame_alpha(std::size_t offset, std::size_t hop) noexcept {
  return static_cast<double>(offset) / static_cast<double>(hop);
}

inline double smooth(double from, double to, double alpha) noexcept {
  return from + (to - from) * alpha;
}

/// phi(0) = initial_phase, phi(n) = (phi(n-1) + 2*pi*f0(n-1)/sr) mod 2*pi.
std::vector<double> accumulate_phase(std::span<const double> f0_per_sample, double sample_rate,
                                     double initial_phase = 0.0);

struct SampleControls {
  std::size_t n_tables = 0;
  std::vector<double> f0;
  std::vector<double> amplitude;
  std::vector<double> attention;  // n_samples x n_tables
};

/// Piecewise-linear interpolation of every control between frame anchors at
/// the first sample of each frame; holds the last frame's value afterwards.
SampleControls upsample_controls(const ControlTrack& track, double sample_rate,
                                 std::size_t n_samples);

/// Wavetable synthesis: x(n) = A(n) * sum_i c_i(n) * read(w_i, j(n)).
/// With `antialias`, each frame reads tables projected onto the harmonics
/// that stay below Nyquist at that frame's peak f0. Output length is
/// n_frames * hop. `state` enters as the starting phase and leaves as the
/// phase of the sample after the buffer.
std::vector<double> synthesize(const WavetableBank& bank, const ControlTrack& track,
                               double sample_rate, bool antialias, PhaseState& state);
std::vector<double> synthesize(const WavetableBank& bank, const ControlTrack& track,
                               double sample_rate, bool antialias = true);

/// Realtime path: as synthesize() but reading the precomputed mipmap level
/// chosen by each frame's peak f0.
std::vector<double> synthesize_mipmapped(const MipmapBank& bank, const ControlTrack& track,
                                         double sample_rate, PhaseState& state);

/// How the additive baseline evaluates sin(k * phi). Table mode performs one
/// linear-interpolated read of a 4096-point sine table per harmonic (the
/// realtime formulation; error below 1e-6), Exact calls std::sin.
enum class SineEvaluation { Exact, Table };

inline constexpr std::size_t sine_table_size = 4096;

/// Additive baseline: x(n) = sum_k a_k(n) * sin(k * phi(n)); harmonics with
/// k * f0(n) >= sr/2 are dropped sample by sample.
std::vector<double> synthesize_additive(const HarmonicTrack& track, double sample_rate,
                                        PhaseState& state,
                                        SineEvaluation sine = SineEvaluation::Exact);
std::vector<double> synthesize_additive(const HarmonicTrack& track, double sample_rate,
                                        SineEvaluation sine = SineEvaluation::Exact);

}  // namespace dwts

#endif  // DWTS_OSCILLATOR_HPP
