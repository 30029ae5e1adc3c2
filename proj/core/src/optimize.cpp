#include "dwts/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dwts/errors.hpp"

namespace dwts {

FitParams FitParams::zeros(std::size_t n_tables, std::size_t table_len, std::size_t n_frames) {
  FitParams p;
  p.n_tables = n_tables;
  p.table_len = table_len;
  p.n_frames = n_frames;
  p.wavetables.assign(n_tables * table_len, 0.0);
  p.attention_logits.assign(n_frames * n_tables, 0.0);
  p.amp_logits.assign(n_frames, 0.0);
  return p;
}

void FitParams::check_shape() const {
  if (n_tables == 0 || table_len == 0)
    throw std::invalid_argument("FitParams: dimensions must be positive");
  if (wavetables.size() != n_tables * table_len || attention_logits.size() != n_frames * n_tables ||
      amp_logits.size() != n_frames)
    throw std::invalid_argument("FitParams: block sizes do not match dimensions");
}

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t cols) {
  std::vector<double> out(logits.size());
  if (cols == 0) return out;
  for (std::size_t r = 0; r * cols < logits.size(); ++r) {
    const auto row = logits.subspan(r * cols, cols);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < cols; ++i) sum += out[r * cols + i] = std::exp(row[i] - peak);
    for (std::size_t i = 0; i < cols; ++i) out[r * cols + i] /= sum;
  }
  return out;
}

void FitConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("FitConfig: iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("FitConfig: learning_rate must be > 0");
  if (!(init_sigma > 0.0)) throw std::invalid_argument("FitConfig: init_sigma must be > 0");
  spectral.validate();
  hop_size(sample_rate, frame_rate);
}

WavetableBank params_to_bank(const FitParams& params) {
  params.check_shape();
  std::vector<Wavetable> tables;
  tables.reserve(params.n_tables);
  for (std::size_t i = 0; i < params.n_tables; ++i) {
    const auto begin = params.wavetables.begin() + static_cast<std::ptrdiff_t>(i * params.table_len);
    tables.emplace_back(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(params.table_len)));
  }
  return WavetableBank(std::move(tables));
}

ControlTrack params_to_track(const FitParams& params, std::span<const double> f0_frames,
                             double frame_rate, AmplitudeMapping amplitude) {
  params.check_shape();
  if (f0_frames.size() != params.n_frames)
    throw std::invalid_argument("params_to_track: " + std::to_string(f0_frames.size()) +
                                " f0 frames for " + std::to_string(params.n_frames) +
                                " parameter frames");
  ControlTrack track;
  track.frame_rate = frame_rate;
  track.n_tables = params.n_tables;
  track.f0.assign(f0_frames.begin(), f0_frames.end());
  track.amplitude.resize(params.n_frames);
  for (std::size_t t = 0; t < params.n_frames; ++t)
    track.amplitude[t] = amplitude == AmplitudeMapping::Softplus ? softplus(params.amp_logits[t])
                                                                 : sigmoid(params.amp_logits[t]);
  track.attention = softmax_rows(params.attention_logits, params.n_tables);
  return track;
}

std::vector<double> forward(const FitParams& params, std::span<const double> f0_frames,
                            const FitConfig& config) {
  return synthesize(params_to_bank(params),
                    params_to_track(params, f0_frames, config.frame_rate, config.amplitude),
                    config.sample_rate, config.antialias);
}

Gradients backward(const FitParams& params, std::span<const double> f0_frames,
                   std::span<const double> target, const FitConfig& config) {
  const auto bank = params_to_bank(params);
  const auto track = params_to_track(params, f0_frames, config.frame_rate, config.amplitude);
  const double sr = config.sample_rate;
  const auto x = synthesize(bank, track, sr, config.antialias);
  if (target.size() != x.size())
    throw std::invalid_argument("backward: target has " + std::to_string(target.size()) +
                                " samples, render has " + std::to_string(x.size()));

  Gradients out;
  out.grad = FitParams::zeros(params.n_tables, params.table_len, params.n_frames);
  std::vector<double> dx(x.size());
  out.loss = multiscale_loss_and_grad(x, target, config.spectral, dx);

  const std::size_t n_tables = params.n_tables;
  const std::size_t len = params.table_len;
  const std::size_t frames = params.n_frames;
  const std::size_t hop = hop_size(sr, config.frame_rate);
  const bool want_tables = !config.freeze_wavetables;

  const auto controls = upsample_controls(track, sr, x.size());
  const auto phase = accumulate_phase(controls.f0, sr, 0.0);

  // Tables as read by each frame, and the gradient w.r.t. those reads, grouped
  // by harmonic limit exactly as synthesize() groups them.
  struct Group {
    std::vector<double> tables;
    std::vector<double> grad;
  };
  std::map<std::size_t, Group> groups;
  std::vector<Group*> frame_group(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t limit = len / 2;
    if (config.antialias) {
      const std::size_t next = t + 1 < frames ? t + 1 : t;
      limit = std::min(harmonic_limit(sr, std::max(track.f0[t], track.f0[next])), limit);
    }
    auto it = groups.find(limit);
    if (it == groups.end()) {
      Group g;
      g.tables.resize(n_tables * len);
      for (std::size_t i = 0; i < n_tables; ++i) {
        std::span<double> row(g.tables.data() + i * len, len);
        if (config.antialias)
          bandlimit(bank.table(i).samples(), limit, row);
        else
          std::copy_n(bank.table(i).samples().begin(), len, row.begin());
      }
      if (want_tables) g.grad.assign(n_tables * len, 0.0);
      it = groups.emplace(limit, std::move(g)).first;
    }
    frame_group[t] = &it->second;
  }

  // Per-sample adjoints of A(n) and c_i(n), folded straight into frame values
  // with the upsampler's linear weights.
  std::vector<double> d_amp(frames, 0.0);
  std::vector<double> d_att(frames * n_tables, 0.0);
  std::vector<double> reads(n_tables);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t t = n / hop;
    const std::size_t next = t + 1 < frames ? t + 1 : t;
    const double alpha = frame_alpha(n % hop, hop);
    Group& g = *frame_group[t];

    const double j = phase_to_index(phase[n], len);
    const auto k = static_cast<std::size_t>(j);
    const double frac = j - static_cast<double>(k);
    const std::size_t k1 = k + 1 == len ? 0 : k + 1;
    const double* c = controls.attention.data() + n * n_tables;
    const double amp = controls.amplitude[n];

    double mix = 0.0;
    for (std::size_t i = 0; i < n_tables; ++i) {
      reads[i] = detail::lerp_read(g.tables.data() + i * len, len, j);
      mix += c[i] * reads[i];
    }
    const double gn = dx[n];
    const double d_a = gn * mix;
    d_amp[t] += (1.0 - alpha) * d_a;
    d_amp[next] += alpha * d_a;
    for (std::size_t i = 0; i < n_tables; ++i) {
      const double d_c = gn * amp * reads[i];
      d_att[t * n_tables + i] += (1.0 - alpha) * d_c;
      d_att[next * n_tables + i] += alpha * d_c;
      if (want_tables) {
        const double w = gn * amp * c[i];
        g.grad[i * len + k] += (1.0 - frac) * w;
        g.grad[i * len + k1] += frac * w;
      }
    }
  }

  // The band-limiting projection is symmetric, so its adjoint is itself.
  if (want_tables) {
    std::vector<double> projected(len);
    for (auto& [limit, g] : groups) {
      for (std::size_t i = 0; i < n_tables; ++i) {
        std::span<const double> row(g.grad.data() + i * len, len);
        if (config.antialias) {
          bandlimit(row, limit, projected);
        } else {
          std::copy(row.begin(), row.end(), projected.begin());
        }
        for (std::size_t s = 0; s < len; ++s) out.grad.wavetables[i * len + s] += projected[s];
      }
    }
  }

  for (std::size_t t = 0; t < frames; ++t) {
    const double a = params.amp_logits[t];
    const double s = sigmoid(a);
    out.grad.amp_logits[t] = d_amp[t] * (config.amplitude == AmplitudeMapping::Softplus ? s : s * (1.0 - s));

    const double* c = track.attention.data() + t * n_tables;
    const double* dc = d_att.data() + t * n_tables;
    double dot = 0.0;
    for (std::size_t i = 0; i < n_tables; ++i) dot += c[i] * dc[i];
    for (std::size_t i = 0; i < n_tables; ++i)
      out.grad.attention_logits[t * n_tables + i] = c[i] * (dc[i] - dot);
  }
  return out;
}

AdamState AdamState::for_params(const FitParams& params, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment = FitParams::zeros(params.n_tables, params.table_len, params.n_frames);
  s.second_moment = s.first_moment;
  return s;
}

namespace {

void adam_block(std::span<double> p, std::span<const double> g, std::span<double> m,
                std::span<double> v, const AdamState& s, double bias1, double bias2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    p[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

bool same_shape(const FitParams& a, const FitParams& b) {
  return a.wavetables.size() == b.wavetables.size() &&
         a.attention_logits.size() == b.attention_logits.size() &&
         a.amp_logits.size() == b.amp_logits.size();
}

}  // namespace

void adam_step(FitParams& params, const FitParams& grads, AdamState& state, bool update_wavetables) {
  if (!same_shape(params, grads) || !same_shape(params, state.first_moment) ||
      !same_shape(params, state.second_moment))
    throw std::invalid_argument("adam_step: parameter, gradient and moment shapes differ");
  ++state.step;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  if (update_wavetables)
    adam_block(params.wavetables, grads.wavetables, state.first_moment.wavetables,
               state.second_moment.wavetables, state, bias1, bias2);
  adam_block(params.attention_logits, grads.attention_logits, state.first_moment.attention_logits,
             state.second_moment.attention_logits, state, bias1, bias2);
  adam_block(params.amp_logits, grads.amp_logits, state.first_moment.amp_logits,
             state.second_moment.amp_logits, state, bias1, bias2);
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_finite(int iteration, const FitParams& params, const Gradients& g) {
  const std::pair<const char*, std::span<const double>> blocks[] = {
      {"wavetables", params.wavetables},
      {"attention_logits", params.attention_logits},
      {"amp_logits", params.amp_logits},
      {"wavetables gradient", g.grad.wavetables},
      {"attention_logits gradient", g.grad.attention_logits},
      {"amp_logits gradient", g.grad.amp_logits},
  };
  for (const auto& [name, values] : blocks)
    if (!all_finite(values))
      throw NumericError(iteration, name,
                         "non-finite values in " + std::string(name) + " at iteration " +
                             std::to_string(iteration));
  if (!std::isfinite(g.loss))
    throw NumericError(iteration, "loss",
                       "non-finite loss at iteration " + std::to_string(iteration));
}

struct Trajectory {
  std::vector<double> curve;
  double final_loss = 0.0;
};

Trajectory run_adam(FitParams& params, std::span<const double> f0_frames,
                    std::span<const double> target, const FitConfig& config,
                    const FitObserver& observer) {
  AdamState state = AdamState::for_params(params, config.learning_rate);
  Trajectory out;
  out.curve.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    const auto g = backward(params, f0_frames, target, config);
    check_finite(it, params, g);
    out.curve.push_back(g.loss);
    if (observer) observer(it, params, g.loss);
    adam_step(params, g.grad, state, !config.freeze_wavetables);
  }
  out.final_loss = multiscale_loss(forward(params, f0_frames, config), target, config.spectral);
  if (!std::isfinite(out.final_loss))
    throw NumericError(config.iterations, "loss", "non-finite loss after the final update");
  return out;
}

void check_target(std::span<const double> target, std::span<const double> f0_frames,
                  const FitConfig& config) {
  const std::size_t hop = hop_size(config.sample_rate, config.frame_rate);
  if (f0_frames.empty()) throw std::invalid_argument("fit: empty f0 track");
  if (target.size() != f0_frames.size() * hop)
    throw std::invalid_argument("fit: target has " + std::to_string(target.size()) +
                                " samples but " + std::to_string(f0_frames.size()) +
                                " frames need " + std::to_string(f0_frames.size() * hop));
}

}  // namespace

FitResult fit(std::span<const double> target, std::span<const double> f0_frames,
              std::size_t n_tables, const FitConfig& config, const FitObserver& observer) {
  config.validate();
  if (config.freeze_wavetables)
    throw std::invalid_argument("fit: freeze_wavetables is set; use fit_oneshot");
  if (n_tables < 1) throw std::invalid_argument("fit: n_tables must be >= 1");
  check_target(target, f0_frames, config);

  auto params = FitParams::zeros(n_tables, config.table_len, f0_frames.size());
  const auto init = init_bank(n_tables, config.table_len, config.init_sigma, config.seed);
  for (std::size_t i = 0; i < n_tables; ++i)
    std::copy(init.table(i).samples().begin(), init.table(i).samples().end(),
              params.wavetables.begin() + static_cast<std::ptrdiff_t>(i * config.table_len));

  auto traj = run_adam(params, f0_frames, target, config, observer);
  FitResult result;
  result.bank = params_to_bank(params);
  result.bank.freeze();
  result.track = params_to_track(params, f0_frames, config.frame_rate, config.amplitude);
  result.loss_curve = std::move(traj.curve);
  result.final_loss = traj.final_loss;
  return result;
}

OneshotResult fit_oneshot(std::span<const double> target, std::span<const double> f0_frames,
                          const WavetableBank& frozen_bank, const FitConfig& config,
                          const FitObserver& observer) {
  if (!frozen_bank.frozen()) throw InvalidState("fit_oneshot: bank must be frozen");
  config.validate();
  check_target(target, f0_frames, config);

  FitConfig cfg = config;
  cfg.freeze_wavetables = true;
  cfg.table_len = frozen_bank.table_len();
  auto params = FitParams::zeros(frozen_bank.n_tables(), frozen_bank.table_len(), f0_frames.size());
  for (std::size_t i = 0; i < frozen_bank.n_tables(); ++i)
    std::copy(frozen_bank.table(i).samples().begin(), frozen_bank.table(i).samples().end(),
              params.wavetables.begin() + static_cast<std::ptrdiff_t>(i * cfg.table_len));
  const auto before = params.wavetables;

  auto traj = run_adam(params, f0_frames, target, cfg, observer);
  if (std::memcmp(before.data(), params.wavetables.data(), before.size() * sizeof(double)) != 0)
    throw InvalidState("fit_oneshot: frozen wavetables changed during fitting");

  OneshotResult result;
  result.track = params_to_track(params, f0_frames, cfg.frame_rate, cfg.amplitude);
  result.loss_curve = std::move(traj.curve);
  result.final_loss = traj.final_loss;
  return result;
}

std::vector<double> pitch_shift(const WavetableBank& bank, const ControlTrack& track,
                                double factor, double sample_rate, bool antialias) {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw std::invalid_argument("pitch_shift: factor must be positive");
  ControlTrack shifted = track;
  for (auto& f : shifted.f0) {
    f *= factor;
    if (f >= 0.5 * sample_rate)
      throw std::invalid_argument("pitch_shift: shifted f0 " + std::to_string(f) +
                                  " Hz reaches Nyquist (" + std::to_string(0.5 * sample_rate) + " Hz)");
  }
  return synthesize(bank, shifted, sample_rate, antialias);
}

WavetableRanking rank_wavetables(const WavetableBank& bank, const ControlTrack& track) {
  if (track.n_tables != bank.n_tables())
    throw std::invalid_argument("rank_wavetables: track width does not match bank");
  const std::size_t n = bank.n_tables();
  WavetableRanking r;
  r.mean_attention.assign(n, 0.0);
  const std::size_t frames = track.n_frames();
  for (std::size_t t = 0; t < frames; ++t) {
    const auto row = track.attention_row(t);
    for (std::size_t i = 0; i < n; ++i) r.mean_attention[i] += row[i];
  }
  if (frames > 0)
    for (auto& m : r.mean_attention) m /= static_cast<double>(frames);
  r.order.resize(n);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return r.mean_attention[a] > r.mean_attention[b];
  });
  return r;
}

WavetableBank reorder_bank(const WavetableBank& bank, std::span<const std::size_t> order) {
  if (order.size() != bank.n_tables())
    throw std::invalid_argument("reorder_bank: order length does not match bank");
  std::vector<Wavetable> tables;
  tables.reserve(order.size());
  for (std::size_t i : order) tables.push_back(bank.table(i));
  return WavetableBank(std::move(tables));
}

}  // namespace dwts
