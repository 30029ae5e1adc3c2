#ifndef DWTS_FFT_HPP
#define DWTS_FFT_HPP

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace dwts {

/// Real-input FFT of a fixed size backed by FFTW. Plans are created once per
/// size and thread and cached; use RealFft::get() rather than constructing
/// one per transform.
///
/// forward() maps n reals to n/2+1 complex bins (unnormalized).
/// inverse() maps n/2+1 bins to n reals computing
///   x[t] = sum_{k=0}^{n-1} X[k] exp(+2 pi i k t / n)
/// under Hermitian extension, also unnormalized. The imaginary parts of the DC
/// bin and (for even n) the Nyquist bin are ignored.
class RealFft {
public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  static RealFft& get(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dwts

#endif  // DWTS_FFT_HPP
