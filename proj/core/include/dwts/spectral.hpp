#ifndef DWTS_SPECTRAL_HPP
#define DWTS_SPECTRAL_HPP

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dwts {

enum class Window { Hann, Rectangular };

/// Magnitude smoothing: |X|_eps = sqrt(re^2 + im^2 + eps^2).
inline constexpr double magnitude_epsilon = 1e-7;

struct SpectralConfig {
  std::vector<std::size_t> fft_sizes{64, 128, 256, 512, 1024, 2048};
  std::size_t hop_divisor = 4;
  Window window = Window::Hann;

  std::size_t hop(std::size_t fft_size) const { return fft_size / hop_divisor; }
  std::size_t max_fft_size() const;
  /// Sizes must be powers of two >= 32 and hop_divisor in [1, smallest size].
  void validate() const;
};

struct Spectrogram {
  std::size_t fft_size = 0;
  std::size_t hop = 0;
  std::size_t frames = 0;
  std::vector<double> magnitudes;  // frames x bins, row-major

  std::size_t bins() const noexcept { return fft_size / 2 + 1; }
  double at(std::size_t frame, std::size_t bin) const { return magnitudes[frame * bins() + bin]; }
};

/// Periodic window of length n.
std::vector<double> make_window(Window window, std::size_t n);

/// Number of full frames; the trailing partial frame is dropped.
std::size_t stft_frames(std::size_t n_samples, std::size_t fft_size, std::size_t hop);

/// Complex STFT, frames x (fft_size/2+1), row-major. No padding.
std::vector<std::complex<double>> stft(std::span<const double> signal, std::size_t fft_size,
                                       std::size_t hop, Window window);

/// Adjoint of stft() under the real inner product Re<u, v>: windowed
/// overlap-add of each frame's Hermitian-extended inverse.
std::vector<double> stft_adjoint(std::span<const std::complex<double>> coeffs,
                                 std::size_t fft_size, std::size_t hop, Window window,
                                 std::size_t n_samples);

Spectrogram stft_magnitude(std::span<const double> signal, std::size_t fft_size,
                           std::size_t hop, Window window = Window::Hann);

/// Sum over FFT sizes of the mean absolute magnitude difference.
double multiscale_loss(std::span<const double> x, std::span<const double> y,
                       const SpectralConfig& config);

/// d multiscale_loss(x, y) / dx.
std::vector<double> multiscale_loss_grad(std::span<const double> x, std::span<const double> y,
                                         const SpectralConfig& config);

/// Loss and gradient in one pass; `grad` must have x.size() entries.
double multiscale_loss_and_grad(std::span<const double> x, std::span<const double> y,
                                const SpectralConfig& config, std::span<double> grad);

inline constexpr double loudness_floor_db = -120.0;
inline constexpr std::size_t loudness_fft_size = 2048;

/// Gain of the IEC 61672 A-weighting curve at `hz`, in dB (0 dB at 1 kHz).
double a_weighting_db(double hz);

/// Per-frame mean power in dB from a 2048-point Hann power spectrum,
/// optionally A-weighted, floored at -120 dB. One value per hop; frames
/// running past the end are zero-padded.
std::vector<double> extract_loudness(std::span<const double> signal, double sample_rate,
                                     double frame_rate, bool a_weighted = true);

struct F0Track {
  std::vector<double> f0;          // Hz; 0 for silent frames
  std::vector<double> confidence;  // 1 - min normalized difference, in [0, 1]
  std::vector<bool> voiced;

  std::size_t n_frames() const noexcept { return f0.size(); }
};

struct F0Options {
  double f0_min = 20.0;
  double f0_max = 4000.0;
  double threshold = 0.15;
};

/// YIN-style estimate: cumulative-mean-normalized difference function, first
/// dip under the threshold, parabolic lag refinement. Frames whose minimum
/// stays above the threshold are flagged unvoiced.
F0Track estimate_f0(std::span<const double> signal, double sample_rate, double frame_rate,
                    const F0Options& options = {});

}  // namespace dwts

#endif  // DWTS_SPECTRAL_HPP
