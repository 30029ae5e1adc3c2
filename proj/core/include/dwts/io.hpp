#ifndef DWTS_IO_HPP
#define DWTS_IO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dwts/oscillator.hpp"
#include "dwts/optimize.hpp"
#include "dwts/spectral.hpp"
#include "dwts/wavetable.hpp"

namespace dwts {

struct AudioBuffer {
  double sample_rate = default_sample_rate;
  std::vector<double> samples;  // mono
};

enum class WavCodec { Pcm16, Float32 };

struct WavInfo {
  WavCodec codec = WavCodec::Pcm16;
  std::size_t channels = 1;
};

/// Reads PCM-16 or float-32 RIFF/WAVE, mono or stereo. Stereo is averaged to
/// mono (info->channels reports the source layout). Throws FormatError on a
/// malformed or truncated file or a non-finite sample, UnsupportedError on
/// other codecs, IoError if the file cannot be opened.
AudioBuffer wav_read(const std::filesystem::path& path, WavInfo* info = nullptr);

/// Canonical 44-byte header. PCM-16 clamps to [-1, 1] and rounds half away
/// from zero.
void wav_write(const std::filesystem::path& path, const AudioBuffer& buffer,
               WavCodec codec = WavCodec::Float32);

// Bank file: "DWTB", uint32 LE N, uint32 LE L, then N*L float32 LE samples in
// table-major order. The wrap sample is not stored.
inline constexpr char bank_magic[4] = {'D', 'W', 'T', 'B'};
inline constexpr std::size_t bank_header_bytes = 12;

std::size_t bank_file_size(std::size_t n_tables, std::size_t table_len);
void bank_save(const std::filesystem::path& path, const WavetableBank& bank);
/// Loaded banks are frozen.
WavetableBank bank_load(const std::filesystem::path& path);

/// CSV `frame,f0_hz,amp,c_0..c_{N-1}`.
void track_save(const std::filesystem::path& path, const ControlTrack& track);
/// The file carries no frame rate; it is supplied by the caller. Rejects
/// ragged rows and invalid attention rows with the offending row number.
ControlTrack track_load(const std::filesystem::path& path,
                        double frame_rate = default_frame_rate);

/// CSV `frame,f0_hz,confidence`.
void f0_track_save(const std::filesystem::path& path, const F0Track& track);
F0Track f0_track_load(const std::filesystem::path& path);

/// CSV `iteration,loss`.
void loss_curve_save(const std::filesystem::path& path, std::span<const double> losses);

struct RunConfig {
  double sample_rate = default_sample_rate;
  double frame_rate = default_frame_rate;
  std::size_t n_tables = 20;
  std::size_t table_len = 512;
  std::vector<std::size_t> fft_sizes{64, 128, 256, 512, 1024, 2048};
  double learning_rate = 1e-3;
  int iterations = 2000;
  std::uint64_t seed = 0;
  bool antialias = true;

  void validate() const;
  FitConfig to_fit_config() const;
};

/// Flat `key=value` lines; `#` starts a comment. Unknown keys and malformed
/// values throw FormatError.
RunConfig run_config_load(const std::filesystem::path& path);
void run_config_save(const std::filesystem::path& path, const RunConfig& config);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace dwts

#endif  // DWTS_IO_HPP
