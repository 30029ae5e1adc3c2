#include "dwts/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "dwts/errors.hpp"

namespace dwts {
namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_f32(std::vector<unsigned char>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

constexpr std::uint16_t wave_format_pcm = 1;
constexpr std::uint16_t wave_format_float = 3;
constexpr std::uint16_t wave_format_extensible = 0xFFFE;

}  // namespace

AudioBuffer wav_read(const std::filesystem::path& path, WavInfo* info) {
  const auto bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError(name + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw FormatError(name + ": truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = get_u16(f);
      channels = get_u16(f + 2);
      rate = get_u32(f + 4);
      block_align = get_u16(f + 12);
      bits = get_u16(f + 14);
      if (format == wave_format_extensible) {
        if (size < 40) throw FormatError(name + ": truncated extensible fmt chunk");
        format = get_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(name + ": data chunk before fmt chunk");
      if (body + size > bytes.size()) throw FormatError(name + ": truncated data chunk");
      if (channels != 1 && channels != 2)
        throw UnsupportedError(name + ": " + std::to_string(channels) + " channels");
      const bool pcm16 = format == wave_format_pcm && bits == 16;
      const bool float32 = format == wave_format_float && bits == 32;
      if (!pcm16 && !float32)
        throw UnsupportedError(name + ": codec " + std::to_string(format) + " with " +
                               std::to_string(bits) + " bits");
      if (rate == 0) throw FormatError(name + ": zero sample rate");
      const std::size_t width = bits / 8;
      if (block_align != width * channels) throw FormatError(name + ": inconsistent block alignment");

      AudioBuffer buf;
      buf.sample_rate = rate;
      const std::size_t frames = size / block_align;
      buf.samples.resize(frames);
      const unsigned char* d = bytes.data() + body;
      for (std::size_t n = 0; n < frames; ++n) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const unsigned char* s = d + n * block_align + c * width;
          acc += pcm16 ? static_cast<std::int16_t>(get_u16(s)) / 32768.0 : get_f32(s);
        }
        buf.samples[n] = channels == 2 ? 0.5 * acc : acc;
        if (!std::isfinite(buf.samples[n]))
          throw FormatError(name + ": non-finite sample at frame " + std::to_string(n));
      }
      if (info) *info = {pcm16 ? WavCodec::Pcm16 : WavCodec::Float32, channels};
      return buf;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(name + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

void wav_write(const std::filesystem::path& path, const AudioBuffer& buffer, WavCodec codec) {
  if (!(buffer.sample_rate > 0.0)) throw std::invalid_argument("wav_write: sample rate must be > 0");
  const std::uint16_t width = codec == WavCodec::Pcm16 ? 2 : 4;
  const auto data_size = static_cast<std::uint32_t>(buffer.samples.size() * width);
  const auto rate = static_cast<std::uint32_t>(std::lround(buffer.sample_rate));

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, codec == WavCodec::Pcm16 ? wave_format_pcm : wave_format_float);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * width);
  put_u16(out, width);
  put_u16(out, static_cast<std::uint16_t>(8 * width));
  put_tag(out, "data");
  put_u32(out, data_size);
  for (double s : buffer.samples) {
    if (codec == WavCodec::Pcm16) {
      const double q = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
    } else {
      put_f32(out, static_cast<float>(s));
    }
  }
  write_file(path, out);
}

std::size_t bank_file_size(std::size_t n_tables, std::size_t table_len) {
  return bank_header_bytes + 4 * n_tables * table_len;
}

void bank_save(const std::filesystem::path& path, const WavetableBank& bank) {
  std::vector<unsigned char> out;
  out.reserve(bank_file_size(bank.n_tables(), bank.table_len()));
  out.insert(out.end(), std::begin(bank_magic), std::end(bank_magic));
  put_u32(out, static_cast<std::uint32_t>(bank.n_tables()));
  put_u32(out, static_cast<std::uint32_t>(bank.table_len()));
  for (const auto& table : bank.tables())
    for (double s : table.samples()) put_f32(out, static_cast<float>(s));
  write_file(path, out);
}

WavetableBank bank_load(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < bank_header_bytes || std::memcmp(bytes.data(), bank_magic, 4) != 0)
    throw FormatError(name + ": not a wavetable bank (bad magic)");
  const std::size_t n = get_u32(bytes.data() + 4);
  const std::size_t len = get_u32(bytes.data() + 8);
  if (n == 0 || len == 0) throw FormatError(name + ": zero bank dimensions");
  if (bytes.size() != bank_file_size(n, len))
    throw FormatError(name + ": expected " + std::to_string(bank_file_size(n, len)) +
                      " bytes for " + std::to_string(n) + "x" + std::to_string(len) +
                      " bank, found " + std::to_string(bytes.size()));
  std::vector<Wavetable> tables;
  tables.reserve(n);
  const unsigned char* p = bytes.data() + bank_header_bytes;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(len);
    for (auto& v : s) {
      v = get_f32(p);
      p += 4;
      if (!std::isfinite(v)) throw FormatError(name + ": non-finite sample in table " + std::to_string(i));
    }
    tables.emplace_back(std::move(s));
  }
  WavetableBank bank(std::move(tables));
  bank.freeze();
  return bank;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

double parse_double(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v))
    throw FormatError(where + ": cannot parse number '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw FormatError(where + ": cannot parse unsigned integer '" + text + "'");
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void track_save(const std::filesystem::path& path, const ControlTrack& track) {
  track.validate();
  std::string text = "frame,f0_hz,amp";
  for (std::size_t i = 0; i < track.n_tables; ++i) text += ",c_" + std::to_string(i);
  text += '\n';
  for (std::size_t t = 0; t < track.n_frames(); ++t) {
    text += std::to_string(t) + ',' + format_double(track.f0[t]) + ',' + format_double(track.amplitude[t]);
    for (double c : track.attention_row(t)) text += ',' + format_double(c);
    text += '\n';
  }
  write_text(path, text);
}

ControlTrack track_load(const std::filesystem::path& path, double frame_rate) {
  const auto lines = read_lines(path);
  const std::string name = path.string();
  if (lines.empty()) throw FormatError(name + ": missing header");
  const auto header = split(trim(lines[0]), ',');
  if (header.size() < 3 || trim(header[0]) != "frame" || trim(header[1]) != "f0_hz" ||
      trim(header[2]) != "amp")
    throw FormatError(name + ": header must start with frame,f0_hz,amp");
  ControlTrack track;
  track.frame_rate = frame_rate;
  track.n_tables = header.size() - 3;
  for (std::size_t i = 0; i < track.n_tables; ++i)
    if (trim(header[3 + i]) != "c_" + std::to_string(i))
      throw FormatError(name + ": expected column c_" + std::to_string(i) + ", found '" + header[3 + i] + "'");

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string where = name + " row " + std::to_string(r);
    const auto fields = split(lines[r], ',');
    if (fields.size() != header.size())
      throw FormatError(where + ": " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
    if (parse_uint(fields[0], where) != r - 1)
      throw FormatError(where + ": frame index out of sequence");
    const double f0 = parse_double(fields[1], where);
    const double amp = parse_double(fields[2], where);
    if (f0 < 0.0) throw FormatError(where + ": negative f0");
    if (amp < 0.0) throw FormatError(where + ": negative amplitude");
    double sum = 0.0;
    for (std::size_t i = 0; i < track.n_tables; ++i) {
      const double c = parse_double(fields[3 + i], where);
      if (c < 0.0) throw FormatError(where + ": negative attention weight");
      sum += c;
      track.attention.push_back(c);
    }
    if (track.n_tables > 0 && std::abs(sum - 1.0) > 1e-6)
      throw FormatError(where + ": attention sums to " + format_double(sum) + ", expected 1");
    track.f0.push_back(f0);
    track.amplitude.push_back(amp);
  }
  return track;
}

void f0_track_save(const std::filesystem::path& path, const F0Track& track) {
  std::string text = "frame,f0_hz,confidence\n";
  for (std::size_t t = 0; t < track.n_frames(); ++t)
    text += std::to_string(t) + ',' + format_double(track.f0[t]) + ',' +
            format_double(track.confidence[t]) + '\n';
  write_text(path, text);
}

F0Track f0_track_load(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const std::string name = path.string();
  if (lines.empty() || trim(lines[0]) != "frame,f0_hz,confidence")
    throw FormatError(name + ": header must be frame,f0_hz,confidence");
  F0Track track;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string where = name + " row " + std::to_string(r);
    const auto fields = split(lines[r], ',');
    if (fields.size() != 3) throw FormatError(where + ": expected 3 fields");
    if (parse_uint(fields[0], where) != r - 1) throw FormatError(where + ": frame index out of sequence");
    const double f0 = parse_double(fields[1], where);
    if (f0 < 0.0) throw FormatError(where + ": negative f0");
    track.f0.push_back(f0);
    track.confidence.push_back(parse_double(fields[2], where));
    track.voiced.push_back(f0 > 0.0);
  }
  return track;
}

void loss_curve_save(const std::filesystem::path& path, std::span<const double> losses) {
  std::string text = "iteration,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i)
    text += std::to_string(i) + ',' + format_double(losses[i]) + '\n';
  write_text(path, text);
}

void RunConfig::validate() const {
  if (n_tables < 1) throw std::invalid_argument("RunConfig: n_tables must be >= 1");
  if (table_len < 4) throw std::invalid_argument("RunConfig: table_len must be >= 4");
  to_fit_config().validate();
}

FitConfig RunConfig::to_fit_config() const {
  FitConfig c;
  c.iterations = iterations;
  c.learning_rate = learning_rate;
  c.spectral.fft_sizes = fft_sizes;
  c.antialias = antialias;
  c.seed = seed;
  c.table_len = table_len;
  c.sample_rate = sample_rate;
  c.frame_rate = frame_rate;
  return c;
}

RunConfig run_config_load(const std::filesystem::path& path) {
  RunConfig cfg;
  const auto lines = read_lines(path);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    std::string line = lines[r];
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = path.string() + " line " + std::to_string(r + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "sample_rate") {
      cfg.sample_rate = parse_double(value, where);
    } else if (key == "frame_rate") {
      cfg.frame_rate = parse_double(value, where);
    } else if (key == "n_tables") {
      cfg.n_tables = parse_uint(value, where);
    } else if (key == "table_len") {
      cfg.table_len = parse_uint(value, where);
    } else if (key == "fft_sizes") {
      cfg.fft_sizes.clear();
      for (const auto& f : split(value, ',')) cfg.fft_sizes.push_back(parse_uint(f, where));
    } else if (key == "learning_rate") {
      cfg.learning_rate = parse_double(value, where);
    } else if (key == "iterations") {
      cfg.iterations = static_cast<int>(parse_uint(value, where));
    } else if (key == "seed") {
      cfg.seed = parse_uint(value, where);
    } else if (key == "antialias") {
      if (value == "true" || value == "1") {
        cfg.antialias = true;
      } else if (value == "false" || value == "0") {
        cfg.antialias = false;
      } else {
        throw FormatError(where + ": antialias must be true or false");
      }
    } else {
      throw FormatError(where + ": unknown key '" + key + "'");
    }
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return cfg;
}

void run_config_save(const std::filesystem::path& path, const RunConfig& config) {
  std::string sizes;
  for (std::size_t i = 0; i < config.fft_sizes.size(); ++i)
    sizes += (i ? "," : "") + std::to_string(config.fft_sizes[i]);
  std::ostringstream out;
  out << "sample_rate=" << format_double(config.sample_rate) << '\n'
      << "frame_rate=" << format_double(config.frame_rate) << '\n'
      << "n_tables=" << config.n_tables << '\n'
      << "table_len=" << config.table_len << '\n'
      << "fft_sizes=" << sizes << '\n'
      << "learning_rate=" << format_double(config.learning_rate) << '\n'
      << "iterations=" << config.iterations << '\n'
      << "seed=" << config.seed << '\n'
      << "antialias=" << (config.antialias ? "true" : "false") << '\n';
  write_text(path, out.str());
}

}  // namespace dwts
