#include "dwts/wavetable.hpp"

#include <algorithm>
#include <complex>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "dwts/errors.hpp"
#include "dwts/fft.hpp"

namespace dwts {

Wavetable::Wavetable(std::vector<double> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw std::invalid_argument("Wavetable: empty table");
  for (double s : samples_)
    if (!std::isfinite(s)) throw std::invalid_argument("Wavetable: non-finite sample");
}

WavetableBank::WavetableBank(std::size_t n_tables, std::size_t table_len) : table_len_(table_len) {
  if (n_tables == 0 || table_len == 0)
    throw std::invalid_argument("WavetableBank: dimensions must be positive");
  tables_.assign(n_tables, Wavetable(std::vector<double>(table_len, 0.0)));
}

WavetableBank::WavetableBank(std::vector<Wavetable> tables) : tables_(std::move(tables)) {
  if (tables_.empty()) throw std::invalid_argument("WavetableBank: no tables");
  table_len_ = tables_.front().size();
  for (const auto& t : tables_)
    if (t.size() != table_len_)
      throw std::invalid_argument("WavetableBank: tables differ in length");
}

void WavetableBank::set_table(std::size_t i, Wavetable table) {
  if (frozen_) throw InvalidState("WavetableBank: bank is frozen");
  if (table.size() != table_len_)
    throw std::invalid_argument("WavetableBank: table length mismatch");
  tables_.at(i) = std::move(table);
}

WavetableBank init_bank(std::size_t n_tables, std::size_t table_len, double sigma,
                        std::uint64_t seed) {
  if (n_tables < 1) throw std::invalid_argument("init_bank: n_tables must be >= 1");
  if (table_len < 4) throw std::invalid_argument("init_bank: table_len must be >= 4");
  if (!(sigma > 0.0)) throw std::invalid_argument("init_bank: sigma must be > 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<Wavetable> tables;
  tables.reserve(n_tables);
  for (std::size_t i = 0; i < n_tables; ++i) {
    std::vector<double> s(table_len);
    for (auto& v : s) v = dist(rng);
    tables.emplace_back(std::move(s));
  }
  return WavetableBank(std::move(tables));
}

double read_fractional(const Wavetable& table, double index) {
  const auto len = static_cast<double>(table.size());
  if (!(index >= 0.0 && index < len))
    throw std::invalid_argument("read_fractional: index " + std::to_string(index) +
                                " outside [0, " + std::to_string(table.size()) + ")");
  return detail::lerp_read(table.samples().data(), table.size(), index);
}

std::size_t harmonic_limit(double sample_rate, double f0) {
  if (!(sample_rate > 0.0) || f0 < 0.0)
    throw std::invalid_argument("harmonic_limit: invalid sample rate or f0");
  if (f0 == 0.0) return std::numeric_limits<std::size_t>::max();
  const double nyquist = 0.5 * sample_rate;
  auto k = static_cast<std::size_t>(std::floor(nyquist / f0));
  while (k > 0 && static_cast<double>(k) * f0 >= nyquist) --k;
  return k;
}

void bandlimit(std::span<const double> in, std::size_t max_harmonic, std::span<double> out) {
  const std::size_t len = in.size();
  if (out.size() != len) throw std::invalid_argument("bandlimit: size mismatch");
  if (max_harmonic > len / 2)
    throw std::invalid_argument("bandlimit: max_harmonic " + std::to_string(max_harmonic) +
                                " exceeds L/2 = " + std::to_string(len / 2));
  auto& fft = RealFft::get(len);
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(in, spec);
  spec[0] = 0.0;
  for (std::size_t k = max_harmonic + 1; k < spec.size(); ++k) spec[k] = 0.0;
  fft.inverse(spec, out);
  const double scale = 1.0 / static_cast<double>(len);
  for (auto& v : out) v *= scale;
}

Wavetable bandlimit(const Wavetable& table, std::size_t max_harmonic) {
  std::vector<double> out(table.size());
  bandlimit(table.samples(), max_harmonic, out);
  return Wavetable(std::move(out));
}

MipmapBank::MipmapBank(WavetableBank source, std::vector<Level> levels)
    : source_(std::move(source)), levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("MipmapBank: no levels");
}

std::size_t MipmapBank::level_for(double f0) const noexcept {
  for (std::size_t k = 0; k < levels_.size(); ++k)
    if (levels_[k].max_f0 >= f0) return k;
  return levels_.size() - 1;
}

MipmapBank build_mipmaps(const WavetableBank& bank, double sample_rate, std::size_t octaves,
                         double base_f0) {
  if (!bank.frozen()) throw InvalidState("build_mipmaps: bank must be frozen");
  if (octaves < 1) throw std::invalid_argument("build_mipmaps: octaves must be >= 1");
  if (!(sample_rate > 0.0) || !(base_f0 > 0.0))
    throw std::invalid_argument("build_mipmaps: sample rate and base f0 must be positive");

  const std::size_t len = bank.table_len();
  std::vector<MipmapBank::Level> levels;
  levels.reserve(octaves);
  double max_f0 = base_f0;
  for (std::size_t k = 0; k < octaves; ++k, max_f0 *= 2.0) {
    MipmapBank::Level level;
    level.max_f0 = max_f0;
    // Any f0 below Nyquist keeps its fundamental, including past the top level.
    level.max_harmonic = std::clamp<std::size_t>(harmonic_limit(sample_rate, max_f0), 1, len / 2);
    level.samples.resize(bank.n_tables() * (len + 1));
    for (std::size_t i = 0; i < bank.n_tables(); ++i) {
      std::span<double> row(level.samples.data() + i * (len + 1), len + 1);
      bandlimit(bank.table(i).samples(), level.max_harmonic, row.first(len));
      row[len] = row[0];
    }
    levels.push_back(std::move(level));
  }
  return MipmapBank(bank, std::move(levels));
}

std::size_t octaves_to_nyquist(double sample_rate, double base_f0) {
  std::size_t n = 1;
  for (double f = base_f0; f < 0.5 * sample_rate; f *= 2.0) ++n;
  return n;
}

}  // namespace dwts
