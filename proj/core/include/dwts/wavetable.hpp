#ifndef DWTS_WAVETABLE_HPP
#define DWTS_WAVETABLE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dwts {

inline constexpr double pi = 3.14159265358979323846264338327950288;
inline constexpr double two_pi = 2.0 * pi;

/// One period of a waveform, L samples. The wrap sample t[L] == t[0] is
/// implied by every read and never stored.
class Wavetable {
public:
  Wavetable() = default;
  /// Throws std::invalid_argument on an empty or non-finite table.
  explicit Wavetable(std::vector<double> samples);

  std::size_t size() const noexcept { return samples_.size(); }
  std::span<const double> samples() const noexcept { return samples_; }
  double operator[](std::size_t k) const noexcept { return samples_[k]; }

  friend bool operator==(const Wavetable&, const Wavetable&) = default;

private:
  std::vector<double> samples_;
};

/// The dictionary of N tables sharing one length L. Once frozen, every
/// mutating member throws InvalidState.
class WavetableBank {
public:
  WavetableBank() = default;
  /// N zero tables of length L.
  WavetableBank(std::size_t n_tables, std::size_t table_len);
  explicit WavetableBank(std::vector<Wavetable> tables);

  std::size_t n_tables() const noexcept { return tables_.size(); }
  std::size_t table_len() const noexcept { return table_len_; }
  const Wavetable& table(std::size_t i) const { return tables_.at(i); }
  std::span<const Wavetable> tables() const noexcept { return tables_; }

  void set_table(std::size_t i, Wavetable table);

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  /// Compares samples and shape; the frozen flag is not part of the value.
  friend bool operator==(const WavetableBank& a, const WavetableBank& b) {
    return a.table_len_ == b.table_len_ && a.tables_ == b.tables_;
  }

private:
  std::size_t table_len_ = 0;
  std::vector<Wavetable> tables_;
  bool frozen_ = false;
};

/// Draws every sample i.i.d. from N(0, sigma^2). Deterministic in `seed`.
WavetableBank init_bank(std::size_t n_tables, std::size_t table_len, double sigma,
                        std::uint64_t seed);

namespace detail {

// Unchecked linear-interpolated read; 0 <= index < len.
inline double lerp_read(const double* t, std::size_t len, double index) noexcept {
  const auto k = static_cast<std::size_t>(index);
  const double frac = index - static_cast<double>(k);
  const std::size_t next = k + 1 == len ? 0 : k + 1;
  return t[k] + frac * (t[next] - t[k]);
}

}  // namespace detail

/// Linear-interpolated read at a fractional index in [0, L), wrapping from
/// t[L-1] to t[0]. Throws std::invalid_argument outside that range.
double read_fractional(const Wavetable& table, double index);

/// Largest harmonic number K with K * f0 strictly below sample_rate / 2.
/// A zero f0 places no limit and returns SIZE_MAX.
std::size_t harmonic_limit(double sample_rate, double f0);

/// Orthogonal projection onto harmonics 1..max_harmonic. The DC bin is always
/// removed; the Nyquist bin survives only when max_harmonic == L/2.
/// Throws std::invalid_argument when max_harmonic > L/2.
Wavetable bandlimit(const Wavetable& table, std::size_t max_harmonic);

/// Span form of bandlimit(); `in` and `out` may alias.
void bandlimit(std::span<const double> in, std::size_t max_harmonic, std::span<double> out);

/// Per-octave band-limited copies of a frozen bank for the realtime path.
class MipmapBank {
public:
  struct Level {
    double max_f0;              // Hz
    std::size_t max_harmonic;   // clamped to L/2
    // n_tables rows of L+1 samples; the last sample of a row is its wrap.
    std::vector<double> samples;
  };

  MipmapBank(WavetableBank source, std::vector<Level> levels);

  const WavetableBank& source() const noexcept { return source_; }
  std::size_t n_tables() const noexcept { return source_.n_tables(); }
  std::size_t table_len() const noexcept { return source_.table_len(); }
  std::size_t n_levels() const noexcept { return levels_.size(); }
  const Level& level(std::size_t k) const { return levels_.at(k); }

  /// Lowest level whose max_f0 covers `f0`; the last level when none does.
  std::size_t level_for(double f0) const noexcept;

  /// Row of L+1 samples (wrap included) for table i at level k.
  const double* row(std::size_t k, std::size_t i) const noexcept {
    return levels_[k].samples.data() + i * (table_len() + 1);
  }

private:
  WavetableBank source_;
  std::vector<Level> levels_;
};

inline constexpr double default_mipmap_base_f0 = 20.0;

/// Level k covers f0 <= base_f0 * 2^k with K_k = harmonic_limit(sr, max_f0)
/// clamped to [1, L/2]. Throws InvalidState for an unfrozen bank.
MipmapBank build_mipmaps(const WavetableBank& bank, double sample_rate, std::size_t octaves,
                         double base_f0 = default_mipmap_base_f0);

/// Octave count whose top level reaches the Nyquist frequency.
std::size_t octaves_to_nyquist(double sample_rate, double base_f0 = default_mipmap_base_f0);

}  // namespace dwts

#endif  // DWTS_WAVETABLE_HPP
