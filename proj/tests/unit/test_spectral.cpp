#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dwts/errors.hpp"
#include "dwts/fft.hpp"
#include "dwts/oscillator.hpp"
#include "dwts/spectral.hpp"
#include "oracles.hpp"

using namespace dwts;
using namespace dwts::testing;

namespace {

SpectralConfig small_config() {
  SpectralConfig cfg;
  cfg.fft_sizes = {64, 128};
  return cfg;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<double> sine(std::size_t n, double hz, double amp, double sr = 16000.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * hz * static_cast<double>(i) / sr);
  return x;
}

}  // namespace

TEST_CASE("RealFft matches the direct DFT and inverts") {
  const auto x = random_signal(128, 1);
  auto& fft = RealFft::get(128);
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(x, spec);
  const auto ref = direct_dft(x);
  for (std::size_t k = 0; k < spec.size(); ++k) CHECK(std::abs(spec[k] - ref[k]) < 1e-10);
  std::vector<double> back(128);
  fft.inverse(spec, back);
  for (std::size_t i = 0; i < 128; ++i) CHECK(back[i] / 128.0 == doctest::Approx(x[i]));
}

TEST_CASE("SpectralConfig validation") {
  SpectralConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.max_fft_size() == 2048);
  CHECK(cfg.hop(1024) == 256);
  cfg.fft_sizes = {16};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.fft_sizes = {96};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.fft_sizes = {};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.fft_sizes = {64};
  cfg.hop_divisor = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("periodic Hann window") {
  const auto w = make_window(Window::Hann, 8);
  CHECK(w[0] == 0.0);
  CHECK(w[4] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(0.5));
  for (double v : make_window(Window::Rectangular, 8)) CHECK(v == 1.0);
}

TEST_CASE("stft_frames drops the trailing partial frame") {
  CHECK(stft_frames(256, 64, 16) == 13);
  CHECK(stft_frames(64, 64, 16) == 1);
  CHECK(stft_frames(79, 64, 16) == 1);
  CHECK(stft_frames(80, 64, 16) == 2);
}

TEST_CASE("stft_magnitude of silence is epsilon") {
  const auto s = stft_magnitude(std::vector<double>(256, 0.0), 64, 16);
  CHECK(s.frames == 13);
  CHECK(s.bins() == 33);
  for (double m : s.magnitudes) CHECK(m == doctest::Approx(magnitude_epsilon));
}

TEST_CASE("on-bin sine under a rectangular window peaks at N/2") {
  std::vector<double> x(64);
  for (std::size_t i = 0; i < 64; ++i) x[i] = std::sin(2.0 * kPi * 5.0 * static_cast<double>(i) / 64.0);
  const auto s = stft_magnitude(x, 64, 16, Window::Rectangular);
  REQUIRE(s.frames == 1);
  for (std::size_t k = 0; k < s.bins(); ++k) {
    if (k == 5)
      CHECK(s.at(0, k) == doctest::Approx(32.0));
    else
      CHECK(s.at(0, k) < 1e-6);
  }
}

TEST_CASE("stft_magnitude matches a direct DFT") {
  const auto x = random_signal(256, 2);
  for (std::size_t n : {64, 128, 256}) {
    const auto s = stft_magnitude(x, n, n / 4);
    const auto ref = brute_stft_magnitude(x, n, n / 4);
    REQUIRE(s.magnitudes.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(s.magnitudes[i] == doctest::Approx(ref[i]).epsilon(1e-6));
  }
  CHECK_THROWS_AS(stft_magnitude(std::vector<double>(63, 0.0), 64, 16), std::invalid_argument);
}

TEST_CASE("stft adjoint identity") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t n = 300, fft = 64, hop = 16;
    const auto v = random_signal(n, seed);
    const auto coeffs = stft(v, fft, hop, Window::Hann);
    std::vector<std::complex<double>> u(coeffs.size());
    const auto re = random_signal(u.size(), seed + 100);
    const auto im = random_signal(u.size(), seed + 200);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = {re[i], im[i]};
    const auto adj = stft_adjoint(u, fft, hop, Window::Hann, n);
    double lhs = dot(adj, v);
    double rhs = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) rhs += (u[i] * std::conj(coeffs[i])).real();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("multiscale loss basics") {
  const auto cfg = SpectralConfig{};
  const auto x = random_signal(4096, 3);
  const auto y = random_signal(4096, 4);
  CHECK(multiscale_loss(x, x, cfg) == 0.0);
  CHECK(multiscale_loss(x, y, cfg) > 0.0);
  CHECK(multiscale_loss(x, y, cfg) == multiscale_loss(y, x, cfg));

  std::vector<double> twice(x), zero(x.size(), 0.0);
  for (auto& v : twice) v *= 2.0;
  CHECK(multiscale_loss(x, twice, cfg) == doctest::Approx(multiscale_loss(x, zero, cfg)).epsilon(1e-5));

  std::vector<double> ax(x), ay(y);
  for (auto& v : ax) v *= 3.0;
  for (auto& v : ay) v *= 3.0;
  CHECK(multiscale_loss(ax, ay, cfg) == doctest::Approx(3.0 * multiscale_loss(x, y, cfg)).epsilon(1e-6));

  CHECK_THROWS_AS(multiscale_loss(x, std::span(y).first(4000), cfg), std::invalid_argument);
  CHECK_THROWS_AS(multiscale_loss(std::span(x).first(1000), std::span(y).first(1000), cfg), std::invalid_argument);
}

TEST_CASE("multiscale loss matches the direct oracle on seed-42 signals") {
  const auto x = random_signal(4096, 42);
  const auto y = random_signal(4096, 43);
  const SpectralConfig cfg;
  CHECK(multiscale_loss(x, y, cfg) ==
        doctest::Approx(brute_multiscale_loss(x, y, cfg.fft_sizes)).epsilon(1e-6));
}

TEST_CASE("loss gradient vanishes at the target") {
  const auto x = random_signal(1024, 5);
  for (double g : multiscale_loss_grad(x, x, SpectralConfig{{64, 128, 256}})) CHECK(std::abs(g) < 1e-6);
}

TEST_CASE("loss gradient matches central differences") {
  const auto cfg = small_config();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_signal(256, 10 + seed);
    const auto y = random_signal(256, 20 + seed);
    const auto g = multiscale_loss_grad(x, y, cfg);
    const auto fd = central_differences([&](const std::vector<double>& v) { return multiscale_loss(v, y, cfg); },
                                        x, 1e-4);
    double peak = 0.0;
    for (double v : fd) peak = std::max(peak, std::abs(v));
    const auto stats = compare_relative(g, fd, 1e-3, 1e-7 * peak);
    INFO("worst relative error " << stats.worst);
    CHECK(stats.fraction() >= 0.99);
  }
}

TEST_CASE("loss gradient passes a directional-derivative check") {
  const SpectralConfig cfg{{64, 256, 1024}};
  const auto x = random_signal(2048, 30);
  const auto y = random_signal(2048, 31);
  const auto d = random_signal(2048, 32, 1e-5);
  const auto g = multiscale_loss_grad(x, y, cfg);
  std::vector<double> xd(x);
  for (std::size_t i = 0; i < x.size(); ++i) xd[i] += d[i];
  const double actual = multiscale_loss(xd, y, cfg) - multiscale_loss(x, y, cfg);
  CHECK(dot(g, d) == doctest::Approx(actual).epsilon(0.01));
}

TEST_CASE("loss and gradient agree with the separate entry points") {
  const auto cfg = small_config();
  const auto x = random_signal(512, 33);
  const auto y = random_signal(512, 34);
  std::vector<double> g(512);
  const double loss = multiscale_loss_and_grad(x, y, cfg, g);
  CHECK(loss == doctest::Approx(multiscale_loss(x, y, cfg)).epsilon(1e-12));
  CHECK(max_abs_diff(g, multiscale_loss_grad(x, y, cfg)) < 1e-15);
  std::vector<double> short_grad(10);
  CHECK_THROWS_AS(multiscale_loss_and_grad(x, y, cfg, short_grad), std::invalid_argument);
}

TEST_CASE("gradient of an impulse stays within window reach") {
  const auto cfg = small_config();
  std::vector<double> x(1024, 0.0), zero(1024, 0.0);
  x[500] = 1.0;
  const auto g = multiscale_loss_grad(x, zero, cfg);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (i + 128 <= 500 || i >= 500 + 128) CHECK(g[i] == 0.0);
  CHECK(std::abs(g[500]) > 0.0);
}

TEST_CASE("A-weighting curve") {
  CHECK(a_weighting_db(1000.0) == doctest::Approx(0.0).scale(1.0).epsilon(0.01));
  CHECK(a_weighting_db(100.0) == doctest::Approx(-19.1).epsilon(0.01));
  CHECK(a_weighting_db(10000.0) == doctest::Approx(-2.5).epsilon(0.02));
  CHECK(a_weighting_db(0.0) < -200.0);
}

TEST_CASE("loudness of silence is floored") {
  for (double l : extract_loudness(std::vector<double>(16000, 0.0), 16000, 250)) CHECK(l == loudness_floor_db);
  CHECK(extract_loudness(std::vector<double>(16000, 0.0), 16000, 250).size() == 250);
}

TEST_CASE("loudness of a 1 kHz sine") {
  const auto x = sine(16000, 1000.0, 1.0);
  const auto weighted = extract_loudness(x, 16000, 250, true);
  const auto flat = extract_loudness(x, 16000, 250, false);
  const std::size_t mid = 100;
  CHECK(std::abs(weighted[mid] - flat[mid]) < 0.2);

  const auto half = extract_loudness(sine(16000, 1000.0, 0.5), 16000, 250, true);
  CHECK(weighted[mid] - half[mid] == doctest::Approx(6.02).epsilon(0.1 / 6.02));
  CHECK_THROWS_AS(extract_loudness(x, 16000, 300), std::invalid_argument);
}

TEST_CASE("YIN estimates the pitch of a sawtooth") {
  const WavetableBank bank({Wavetable(sawtooth_table(512))});
  ControlTrack t;
  t.n_tables = 1;
  t.f0.assign(250, 220.0);
  t.amplitude.assign(250, 0.5);
  t.attention.assign(250, 1.0);
  const auto x = synthesize(bank, t, 16000, true);
  const auto est = estimate_f0(x, 16000, 250);
  REQUIRE(est.n_frames() == 250);
  CHECK(median(est.f0) == doctest::Approx(220.0).epsilon(0.005));
  CHECK(std::count(est.voiced.begin(), est.voiced.end(), true) > 200);
}

TEST_CASE("YIN is amplitude invariant") {
  const auto est = estimate_f0(sine(16000, 440.0, 0.01), 16000, 250);
  CHECK(median(est.f0) == doctest::Approx(440.0).epsilon(0.005));
  for (double c : est.confidence) {
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("YIN flags noise and silence as unvoiced") {
  const auto noise = estimate_f0(random_signal(16000, 77), 16000, 250);
  CHECK(std::count(noise.voiced.begin(), noise.voiced.end(), false) > 125);
  const auto quiet = estimate_f0(std::vector<double>(4000, 0.0), 16000, 250);
  for (std::size_t t = 0; t < quiet.n_frames(); ++t) {
    CHECK_FALSE(quiet.voiced[t]);
    CHECK(quiet.f0[t] == 0.0);
  }
}

TEST_CASE("YIN rejects bad ranges") {
  const std::vector<double> x(4000, 0.0);
  CHECK_THROWS_AS(estimate_f0(x, 16000, 250, {10.0, 4000.0, 0.15}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_f0(x, 16000, 250, {20.0, 8000.0, 0.15}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_f0(x, 16000, 250, {500.0, 400.0, 0.15}), std::invalid_argument);
}
