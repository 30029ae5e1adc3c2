#ifndef DWTS_OPTIMIZE_HPP
#define DWTS_OPTIMIZE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dwts/oscillator.hpp"
#include "dwts/spectral.hpp"
#include "dwts/wavetable.hpp"

namespace dwts {

/// Unconstrained optimization variables. Attention is the row-wise softmax of
/// attention_logits; amplitude is softplus (or sigmoid) of amp_logits.
struct FitParams {
  std::size_t n_tables = 0;
  std::size_t table_len = 0;
  std::size_t n_frames = 0;
  std::vector<double> wavetables;        // n_tables x table_len
  std::vector<double> attention_logits;  // n_frames x n_tables
  std::vector<double> amp_logits;        // n_frames

  static FitParams zeros(std::size_t n_tables, std::size_t table_len, std::size_t n_frames);
  /// Throws std::invalid_argument if block sizes disagree with the dimensions.
  void check_shape() const;
};

enum class AmplitudeMapping { Softplus, Sigmoid };

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;
/// Row-wise softmax of a rows x cols matrix.
std::vector<double> softmax_rows(std::span<const double> logits, std::size_t cols);

struct FitConfig {
  int iterations = 2000;
  double learning_rate = 1e-3;
  SpectralConfig spectral;
  bool antialias = true;
  std::uint64_t seed = 0;
  bool freeze_wavetables = false;
  double init_sigma = 0.01;
  std::size_t table_len = 512;
  double sample_rate = default_sample_rate;
  double frame_rate = default_frame_rate;
  AmplitudeMapping amplitude = AmplitudeMapping::Softplus;

  void validate() const;
};

WavetableBank params_to_bank(const FitParams& params);
ControlTrack params_to_track(const FitParams& params, std::span<const double> f0_frames,
                             double frame_rate, AmplitudeMapping amplitude);

/// Applies the constraint mappings and renders through synthesize().
std::vector<double> forward(const FitParams& params, std::span<const double> f0_frames,
                            const FitConfig& config = {});

struct Gradients {
  double loss = 0.0;
  FitParams grad;  // same shape as the parameters
};

/// Exact gradients of multiscale_loss(forward(params), target) with respect
/// to every parameter block. With config.freeze_wavetables the wavetable
/// block is left at zero and not computed.
Gradients backward(const FitParams& params, std::span<const double> f0_frames,
                   std::span<const double> target, const FitConfig& config = {});

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  FitParams first_moment;
  FitParams second_moment;

  static AdamState for_params(const FitParams& params, double learning_rate);
};

/// One bias-corrected Adam update. When `update_wavetables` is false the
/// wavetable block and its moments are left untouched.
void adam_step(FitParams& params, const FitParams& grads, AdamState& state,
               bool update_wavetables = true);

/// Called after the gradient of each iteration, before the update.
using FitObserver = std::function<void(int iteration, const FitParams& params, double loss)>;

struct FitResult {
  WavetableBank bank;  // frozen
  ControlTrack track;
  std::vector<double> loss_curve;  // loss before each update
  double final_loss = 0.0;         // loss after the last update
};

/// Learns a dictionary of n_tables wavetables plus per-frame attention and
/// amplitude from a target whose length is n_frames * hop. Throws
/// NumericError naming the iteration and parameter block on non-finite values.
FitResult fit(std::span<const double> target, std::span<const double> f0_frames,
              std::size_t n_tables, const FitConfig& config, const FitObserver& observer = {});

struct OneshotResult {
  ControlTrack track;
  std::vector<double> loss_curve;
  double final_loss = 0.0;
};

/// Fits attention and amplitude only against a frozen bank. Throws
/// InvalidState if the bank is not frozen.
OneshotResult fit_oneshot(std::span<const double> target, std::span<const double> f0_frames,
                          const WavetableBank& frozen_bank, const FitConfig& config,
                          const FitObserver& observer = {});

/// Renders with every f0 multiplied by `factor`; attention and amplitude
/// are reused unchanged.
std::vector<double> pitch_shift(const WavetableBank& bank, const ControlTrack& track,
                                double factor, double sample_rate, bool antialias = true);

struct WavetableRanking {
  std::vector<std::size_t> order;      // original indices, highest mean attention first
  std::vector<double> mean_attention;  // indexed by original table
};

WavetableRanking rank_wavetables(const WavetableBank& bank, const ControlTrack& track);

/// New unfrozen bank with tables in `order`.
WavetableBank reorder_bank(const WavetableBank& bank, std::span<const std::size_t> order);

}  // namespace dwts

#endif  // DWTS_OPTIMIZE_HPP
