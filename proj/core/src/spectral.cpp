#include "dwts/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dwts/fft.hpp"
#include "dwts/oscillator.hpp"
#include "dwts/wavetable.hpp"

namespace dwts {

std::size_t SpectralConfig::max_fft_size() const {
  return fft_sizes.empty() ? 0 : *std::max_element(fft_sizes.begin(), fft_sizes.end());
}

void SpectralConfig::validate() const {
  if (fft_sizes.empty()) throw std::invalid_argument("SpectralConfig: no FFT sizes");
  if (hop_divisor < 1) throw std::invalid_argument("SpectralConfig: hop_divisor must be >= 1");
  for (std::size_t n : fft_sizes) {
    if (n < 32 || (n & (n - 1)) != 0)
      throw std::invalid_argument("SpectralConfig: FFT size " + std::to_string(n) +
                                  " is not a power of two >= 32");
    if (hop_divisor > n) throw std::invalid_argument("SpectralConfig: hop_divisor exceeds FFT size");
  }
}

std::vector<double> make_window(Window window, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (window == Window::Hann)
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::size_t stft_frames(std::size_t n_samples, std::size_t fft_size, std::size_t hop) {
  if (fft_size == 0 || hop == 0) throw std::invalid_argument("stft: fft_size and hop must be > 0");
  if (n_samples < fft_size)
    throw std::invalid_argument("stft: signal of " + std::to_string(n_samples) +
                                " samples is shorter than one " + std::to_string(fft_size) +
                                "-sample window");
  return 1 + (n_samples - fft_size) / hop;
}

std::vector<std::complex<double>> stft(std::span<const double> signal, std::size_t fft_size,
                                       std::size_t hop, Window window) {
  const std::size_t frames = stft_frames(signal.size(), fft_size, hop);
  const auto w = make_window(window, fft_size);
  auto& fft = RealFft::get(fft_size);
  const std::size_t bins = fft.bins();
  std::vector<std::complex<double>> out(frames * bins);
  std::vector<double> buf(fft_size);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = signal.data() + f * hop;
    for (std::size_t i = 0; i < fft_size; ++i) buf[i] = w[i] * src[i];
    fft.forward(buf, std::span(out).subspan(f * bins, bins));
  }
  return out;
}

namespace {

// Accumulates w[n] * Re(sum_k u_k e^{+2 pi i k n / N}) for one frame into out.
void adjoint_frame(RealFft& fft, std::span<const std::complex<double>> u,
                   std::span<const double> w, std::vector<std::complex<double>>& scratch,
                   std::vector<double>& buf, double* out) {
  const std::size_t n = fft.size();
  const std::size_t bins = fft.bins();
  scratch[0] = u[0];
  for (std::size_t k = 1; k < bins; ++k) scratch[k] = 0.5 * u[k];
  if (n % 2 == 0) scratch[bins - 1] = u[bins - 1];
  fft.inverse(scratch, buf);
  for (std::size_t i = 0; i < n; ++i) out[i] += w[i] * buf[i];
}

}  // namespace

std::vector<double> stft_adjoint(std::span<const std::complex<double>> coeffs,
                                 std::size_t fft_size, std::size_t hop, Window window,
                                 std::size_t n_samples) {
  const std::size_t frames = stft_frames(n_samples, fft_size, hop);
  auto& fft = RealFft::get(fft_size);
  const std::size_t bins = fft.bins();
  if (coeffs.size() != frames * bins)
    throw std::invalid_argument("stft_adjoint: coefficient count does not match frames x bins");
  const auto w = make_window(window, fft_size);
  std::vector<double> out(n_samples, 0.0);
  std::vector<std::complex<double>> scratch(bins);
  std::vector<double> buf(fft_size);
  for (std::size_t f = 0; f < frames; ++f)
    adjoint_frame(fft, coeffs.subspan(f * bins, bins), w, scratch, buf, out.data() + f * hop);
  return out;
}

Spectrogram stft_magnitude(std::span<const double> signal, std::size_t fft_size,
                           std::size_t hop, Window window) {
  const auto spec = stft(signal, fft_size, hop, window);
  Spectrogram s;
  s.fft_size = fft_size;
  s.hop = hop;
  s.frames = stft_frames(signal.size(), fft_size, hop);
  s.magnitudes.resize(spec.size());
  constexpr double eps2 = magnitude_epsilon * magnitude_epsilon;
  for (std::size_t i = 0; i < spec.size(); ++i) s.magnitudes[i] = std::sqrt(std::norm(spec[i]) + eps2);
  return s;
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, const SpectralConfig& config) {
  config.validate();
  if (x.size() != y.size())
    throw std::invalid_argument("multiscale_loss: signal lengths differ (" +
                                std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  if (x.size() < config.max_fft_size())
    throw std::invalid_argument("multiscale_loss: signals shorter than the largest FFT size");
}

// One scale of the loss. When grad is non-empty, d(loss)/dx is added to it.
double scale_term(std::span<const double> x, std::span<const double> y, std::size_t fft_size,
                  std::size_t hop, Window window, std::span<double> grad) {
  const auto sx = stft(x, fft_size, hop, window);
  const auto sy = stft(y, fft_size, hop, window);
  constexpr double eps2 = magnitude_epsilon * magnitude_epsilon;
  const double norm = 1.0 / static_cast<double>(sx.size());

  std::vector<std::complex<double>> upstream;
  if (!grad.empty()) upstream.resize(sx.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < sx.size(); ++i) {
    const double mx = std::sqrt(std::norm(sx[i]) + eps2);
    const double my = std::sqrt(std::norm(sy[i]) + eps2);
    const double diff = mx - my;
    sum += std::abs(diff);
    if (!grad.empty()) {
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      upstream[i] = (sign * norm / mx) * sx[i];
    }
  }
  if (!grad.empty()) {
    const auto g = stft_adjoint(upstream, fft_size, hop, window, x.size());
    for (std::size_t n = 0; n < grad.size(); ++n) grad[n] += g[n];
  }
  return sum * norm;
}

}  // namespace

double multiscale_loss(std::span<const double> x, std::span<const double> y,
                       const SpectralConfig& config) {
  check_pair(x, y, config);
  double loss = 0.0;
  for (std::size_t n : config.fft_sizes) loss += scale_term(x, y, n, config.hop(n), config.window, {});
  return loss;
}

double multiscale_loss_and_grad(std::span<const double> x, std::span<const double> y,
                                const SpectralConfig& config, std::span<double> grad) {
  check_pair(x, y, config);
  if (grad.size() != x.size())
    throw std::invalid_argument("multiscale_loss_and_grad: gradient buffer has wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t n : config.fft_sizes)
    loss += scale_term(x, y, n, config.hop(n), config.window, grad);
  return loss;
}

std::vector<double> multiscale_loss_grad(std::span<const double> x, std::span<const double> y,
                                         const SpectralConfig& config) {
  std::vector<double> grad(x.size());
  multiscale_loss_and_grad(x, y, config, grad);
  return grad;
}

double a_weighting_db(double hz) {
  if (hz <= 0.0) return -std::numeric_limits<double>::infinity();
  const double f2 = hz * hz;
  const double num = 12194.0 * 12194.0 * f2 * f2;
  const double den = (f2 + 20.6 * 20.6) * std::sqrt((f2 + 107.7 * 107.7) * (f2 + 737.9 * 737.9)) *
                     (f2 + 12194.0 * 12194.0);
  return 20.0 * std::log10(num / den) + 2.0;
}

std::vector<double> extract_loudness(std::span<const double> signal, double sample_rate,
                                     double frame_rate, bool a_weighted) {
  const std::size_t hop = hop_size(sample_rate, frame_rate);
  const std::size_t n = loudness_fft_size;
  const std::size_t frames = signal.size() / hop;
  const auto w = make_window(Window::Hann, n);
  double w_energy = 0.0;
  for (double v : w) w_energy += v * v;

  auto& fft = RealFft::get(n);
  std::vector<double> weight(fft.bins());
  for (std::size_t k = 0; k < weight.size(); ++k) {
    const double gain = a_weighted ? std::pow(10.0, a_weighting_db(k * sample_rate / n) / 10.0) : 1.0;
    const double fold = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    weight[k] = fold * gain / (static_cast<double>(n) * w_energy);
  }

  std::vector<double> out(frames);
  std::vector<double> buf(n);
  std::vector<std::complex<double>> spec(fft.bins());
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * hop;
    for (std::size_t i = 0; i < n; ++i)
      buf[i] = start + i < signal.size() ? w[i] * signal[start + i] : 0.0;
    fft.forward(buf, spec);
    double power = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) power += weight[k] * std::norm(spec[k]);
    out[t] = power > 0.0 ? std::max(10.0 * std::log10(power), loudness_floor_db) : loudness_floor_db;
  }
  return out;
}

F0Track estimate_f0(std::span<const double> signal, double sample_rate, double frame_rate,
                    const F0Options& options) {
  if (!(options.f0_min >= 20.0) || !(options.f0_max > options.f0_min) ||
      !(options.f0_max < 0.5 * sample_rate))
    throw std::invalid_argument("estimate_f0: need 20 <= f0_min < f0_max < sample_rate / 2");
  if (!(options.threshold > 0.0)) throw std::invalid_argument("estimate_f0: threshold must be > 0");
  const std::size_t hop = hop_size(sample_rate, frame_rate);

  const auto lag_max = static_cast<std::size_t>(std::ceil(sample_rate / options.f0_min));
  const auto lag_min = std::max<std::size_t>(2, static_cast<std::size_t>(sample_rate / options.f0_max));
  const std::size_t window = lag_max;
  const std::size_t segment = window + lag_max + 1;
  std::size_t fft_size = 1;
  while (fft_size < segment + window) fft_size <<= 1;
  auto& fft = RealFft::get(fft_size);

  const std::size_t frames = signal.size() / hop;
  F0Track out;
  out.f0.assign(frames, 0.0);
  out.confidence.assign(frames, 0.0);
  out.voiced.assign(frames, false);

  std::vector<double> head(fft_size), seg(fft_size), corr(fft_size);
  std::vector<std::complex<double>> head_spec(fft.bins()), seg_spec(fft.bins());
  std::vector<double> energy(segment + 1), diff(lag_max + 1), cmnd(lag_max + 1);

  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * hop;
    std::fill(head.begin(), head.end(), 0.0);
    std::fill(seg.begin(), seg.end(), 0.0);
    for (std::size_t i = 0; i < segment && start + i < signal.size(); ++i) {
      seg[i] = signal[start + i];
      if (i < window) head[i] = seg[i];
    }
    energy[0] = 0.0;
    for (std::size_t i = 0; i < segment; ++i) energy[i + 1] = energy[i] + seg[i] * seg[i];
    const double e0 = energy[window];
    if (!(e0 > 1e-12 * static_cast<double>(window))) continue;

    // r(tau) = sum_j head[j] * seg[j + tau] via the correlation theorem.
    fft.forward(head, head_spec);
    fft.forward(seg, seg_spec);
    for (std::size_t k = 0; k < head_spec.size(); ++k) seg_spec[k] *= std::conj(head_spec[k]);
    fft.inverse(seg_spec, corr);
    const double scale = 1.0 / static_cast<double>(fft_size);

    double running = 0.0;
    cmnd[0] = 1.0;
    for (std::size_t tau = 0; tau <= lag_max; ++tau) {
      const double e_tau = energy[tau + window] - energy[tau];
      diff[tau] = std::max(0.0, e0 + e_tau - 2.0 * corr[tau] * scale);
      if (tau == 0) continue;
      running += diff[tau];
      cmnd[tau] = running > 0.0 ? diff[tau] * static_cast<double>(tau) / running : 1.0;
    }

    std::size_t best = 0;
    for (std::size_t tau = lag_min; tau < lag_max; ++tau) {
      if (cmnd[tau] < options.threshold) {
        while (tau + 1 < lag_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
        best = tau;
        break;
      }
    }
    bool voiced = best != 0;
    if (!voiced) {
      best = lag_min;
      for (std::size_t tau = lag_min; tau < lag_max; ++tau)
        if (cmnd[tau] < cmnd[best]) best = tau;
    }

    double lag = static_cast<double>(best);
    if (best > 0 && best < lag_max) {
      const double a = diff[best - 1], b = diff[best], c = diff[best + 1];
      const double denom = a - 2.0 * b + c;
      if (denom > 0.0) lag += std::clamp(0.5 * (a - c) / denom, -1.0, 1.0);
    }
    out.f0[t] = sample_rate / lag;
    out.confidence[t] = std::clamp(1.0 - cmnd[best], 0.0, 1.0);
    out.voiced[t] = voiced;
  }
  return out;
}

}  // namespace dwts
