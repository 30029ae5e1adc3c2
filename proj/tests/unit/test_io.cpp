#include <cmath>
#include <cstring>

#include "doctest.h"
#include "dwts/errors.hpp"
#include "dwts/io.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace dwts;
using namespace dwts::testing;

namespace {

void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back(v >> 8);
}

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}

void put_tag(std::vector<unsigned char>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

// Hand-built RIFF file with an arbitrary format tag and an extra chunk
// ahead of the data.
std::vector<unsigned char> make_wav(std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                                    const std::vector<unsigned char>& data, bool extra_chunk = false) {
  std::vector<unsigned char> body;
  put_tag(body, "WAVE");
  put_tag(body, "fmt ");
  put_u32(body, 16);
  put_u16(body, format);
  put_u16(body, channels);
  put_u32(body, 16000);
  put_u32(body, 16000u * channels * bits / 8);
  put_u16(body, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(body, bits);
  if (extra_chunk) {
    put_tag(body, "LIST");
    put_u32(body, 3);
    body.insert(body.end(), {'a', 'b', 'c', 0});  // odd size plus pad byte
  }
  put_tag(body, "data");
  put_u32(body, static_cast<std::uint32_t>(data.size()));
  body.insert(body.end(), data.begin(), data.end());
  std::vector<unsigned char> out;
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::vector<unsigned char> pcm16(std::initializer_list<std::int16_t> values) {
  std::vector<unsigned char> b;
  for (auto v : values) put_u16(b, static_cast<std::uint16_t>(v));
  return b;
}

ControlTrack sample_track(std::size_t frames, std::size_t n_tables, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ControlTrack t;
  t.n_tables = n_tables;
  for (std::size_t f = 0; f < frames; ++f) {
    t.f0.push_back(50.0 + 1000.0 * u(rng));
    t.amplitude.push_back(u(rng));
    std::vector<double> row(n_tables);
    double s = 0.0;
    for (auto& v : row) s += v = u(rng);
    for (double v : row) t.attention.push_back(v / s);
  }
  return t;
}

}  // namespace

TEST_CASE("float32 WAV round-trips bit-exactly at float precision") {
  TempDir dir;
  AudioBuffer buf;
  buf.sample_rate = 22050;
  for (double v : random_signal(1000, 1)) buf.samples.push_back(static_cast<float>(v));
  wav_write(dir / "a.wav", buf, WavCodec::Float32);
  CHECK(std::filesystem::file_size(dir / "a.wav") == 44 + 4000);
  WavInfo info;
  const auto back = wav_read(dir / "a.wav", &info);
  CHECK(info.codec == WavCodec::Float32);
  CHECK(info.channels == 1);
  CHECK(back.sample_rate == 22050);
  CHECK(back.samples == buf.samples);
}

TEST_CASE("PCM-16 scaling, clamping and rounding") {
  TempDir dir;
  AudioBuffer buf;
  buf.samples = {1.5, -1.5, 1.0, -1.0, 0.5, 0.5 / 32768.0, -0.5 / 32768.0, 0.0};
  wav_write(dir / "p.wav", buf, WavCodec::Pcm16);
  const auto bytes = read_bytes(dir / "p.wav");
  REQUIRE(bytes.size() == 44 + 16);
  auto sample = [&](std::size_t i) {
    return static_cast<std::int16_t>(bytes[44 + 2 * i] | (bytes[45 + 2 * i] << 8));
  };
  CHECK(sample(0) == 32767);
  CHECK(sample(1) == -32768);
  CHECK(sample(2) == 32767);
  CHECK(sample(3) == -32768);
  CHECK(sample(4) == 16384);
  CHECK(sample(5) == 1);
  CHECK(sample(6) == -1);
  CHECK(sample(7) == 0);
  const auto back = wav_read(dir / "p.wav");
  CHECK(back.samples[0] == 32767.0 / 32768.0);
  CHECK(back.samples[1] == -1.0);
}

TEST_CASE("zero-length WAV is valid") {
  TempDir dir;
  wav_write(dir / "z.wav", AudioBuffer{}, WavCodec::Pcm16);
  CHECK(std::filesystem::file_size(dir / "z.wav") == 44);
  CHECK(wav_read(dir / "z.wav").samples.empty());
}

TEST_CASE("stereo is averaged and extra chunks are skipped") {
  TempDir dir;
  write_bytes(dir / "s.wav", make_wav(1, 2, 16, pcm16({16384, 0, -32768, 32767}), true));
  WavInfo info;
  const auto buf = wav_read(dir / "s.wav", &info);
  CHECK(info.channels == 2);
  REQUIRE(buf.samples.size() == 2);
  CHECK(buf.samples[0] == 0.25);
  CHECK(buf.samples[1] == doctest::Approx(-0.5 / 32768.0));
}

TEST_CASE("WAV error paths") {
  TempDir dir;
  CHECK_THROWS_AS(wav_read(dir / "missing.wav"), IoError);

  auto good = make_wav(1, 1, 16, pcm16({1, 2, 3, 4}));
  auto truncated = good;
  truncated.resize(truncated.size() - 3);
  write_bytes(dir / "t.wav", truncated);
  CHECK_THROWS_AS(wav_read(dir / "t.wav"), FormatError);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  write_bytes(dir / "m.wav", bad_magic);
  CHECK_THROWS_AS(wav_read(dir / "m.wav"), FormatError);

  write_bytes(dir / "short.wav", {'R', 'I', 'F', 'F'});
  CHECK_THROWS_AS(wav_read(dir / "short.wav"), FormatError);

  write_bytes(dir / "alaw.wav", make_wav(6, 1, 8, {1, 2, 3}));
  CHECK_THROWS_AS(wav_read(dir / "alaw.wav"), UnsupportedError);
  write_bytes(dir / "pcm24.wav", make_wav(1, 1, 24, {1, 2, 3}));
  CHECK_THROWS_AS(wav_read(dir / "pcm24.wav"), UnsupportedError);
  write_bytes(dir / "surround.wav", make_wav(1, 6, 16, pcm16({1, 2, 3, 4, 5, 6})));
  CHECK_THROWS_AS(wav_read(dir / "surround.wav"), UnsupportedError);

  std::vector<unsigned char> nan_bytes(4);
  const float nan = std::nanf("");
  std::memcpy(nan_bytes.data(), &nan, 4);
  write_bytes(dir / "nan.wav", make_wav(3, 1, 32, nan_bytes));
  CHECK_THROWS_AS(wav_read(dir / "nan.wav"), FormatError);

  CHECK_THROWS_AS(wav_write(dir / "no/such/dir.wav", AudioBuffer{}), IoError);
}

TEST_CASE("bank files") {
  TempDir dir;
  const auto bank = init_bank(20, 512, 0.3, 1);
  bank_save(dir / "b.dwtb", bank);
  CHECK(std::filesystem::file_size(dir / "b.dwtb") == 40972);
  CHECK(bank_file_size(20, 512) == 40972);

  const auto loaded = bank_load(dir / "b.dwtb");
  CHECK(loaded.frozen());
  REQUIRE(loaded.n_tables() == 20);
  REQUIRE(loaded.table_len() == 512);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 512; ++j)
      CHECK(loaded.table(i)[j] == static_cast<double>(static_cast<float>(bank.table(i)[j])));

  // A float-valued bank survives bit-exactly, and so does a second pass.
  bank_save(dir / "c.dwtb", loaded);
  CHECK(bank_load(dir / "c.dwtb") == loaded);
  CHECK(read_bytes(dir / "b.dwtb") == read_bytes(dir / "c.dwtb"));

  const auto bytes = read_bytes(dir / "b.dwtb");
  CHECK(std::memcmp(bytes.data(), "DWTB", 4) == 0);
  CHECK(bytes[4] == 20);
  CHECK(bytes[8] == 0);
  CHECK(bytes[9] == 2);
}

TEST_CASE("bank loader rejects corrupt files") {
  TempDir dir;
  bank_save(dir / "b.dwtb", init_bank(2, 8, 0.3, 1));
  auto bytes = read_bytes(dir / "b.dwtb");

  auto bad = bytes;
  bad[0] = 'X';
  write_bytes(dir / "magic.dwtb", bad);
  CHECK_THROWS_AS(bank_load(dir / "magic.dwtb"), FormatError);

  bad = bytes;
  bad.pop_back();
  write_bytes(dir / "short.dwtb", bad);
  CHECK_THROWS_AS(bank_load(dir / "short.dwtb"), FormatError);

  bad = bytes;
  bad[4] = 0;
  write_bytes(dir / "zero.dwtb", bad);
  CHECK_THROWS_AS(bank_load(dir / "zero.dwtb"), FormatError);

  bad = bytes;
  const float nan = std::nanf("");
  std::memcpy(bad.data() + 12, &nan, 4);
  write_bytes(dir / "nan.dwtb", bad);
  CHECK_THROWS_AS(bank_load(dir / "nan.dwtb"), FormatError);

  write_bytes(dir / "empty.dwtb", {});
  CHECK_THROWS_AS(bank_load(dir / "empty.dwtb"), FormatError);
  CHECK_THROWS_AS(bank_load(dir / "absent.dwtb"), IoError);
}

TEST_CASE("track CSV round trip") {
  TempDir dir;
  const auto track = sample_track(40, 5, 3);
  track_save(dir / "t.csv", track);
  const auto back = track_load(dir / "t.csv", 250);
  REQUIRE(back.n_frames() == 40);
  CHECK(back.n_tables == 5);
  CHECK(back.frame_rate == 250);
  for (std::size_t t = 0; t < 40; ++t) {
    CHECK(std::abs(back.f0[t] - track.f0[t]) <= 1e-6);
    CHECK(std::abs(back.amplitude[t] - track.amplitude[t]) <= 1e-6);
  }
  CHECK(max_abs_diff(back.attention, track.attention) <= 1e-6);

  std::ifstream in(dir / "t.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "frame,f0_hz,amp,c_0,c_1,c_2,c_3,c_4");
}

TEST_CASE("track CSV edge cases") {
  TempDir dir;
  write_text(dir / "h.csv", "frame,f0_hz,amp,c_0\n");
  const auto empty = track_load(dir / "h.csv");
  CHECK(empty.n_frames() == 0);
  CHECK(empty.n_tables == 1);

  write_text(dir / "crlf.csv", "frame,f0_hz,amp,c_0,c_1\r\n0,100,0.5,0.25,0.75\r\n");
  CHECK(track_load(dir / "crlf.csv").attention[1] == 0.75);

  write_text(dir / "sum.csv", "frame,f0_hz,amp,c_0,c_1\n0,100,1,0.5,0.5\n1,100,1,0.4,0.4\n");
  try {
    track_load(dir / "sum.csv");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }

  write_text(dir / "ragged.csv", "frame,f0_hz,amp,c_0,c_1\n0,100,1,0.5\n");
  CHECK_THROWS_AS(track_load(dir / "ragged.csv"), FormatError);
  write_text(dir / "seq.csv", "frame,f0_hz,amp,c_0\n1,100,1,1\n");
  CHECK_THROWS_AS(track_load(dir / "seq.csv"), FormatError);
  write_text(dir / "neg.csv", "frame,f0_hz,amp,c_0\n0,100,-1,1\n");
  CHECK_THROWS_AS(track_load(dir / "neg.csv"), FormatError);
  write_text(dir / "text.csv", "frame,f0_hz,amp,c_0\n0,abc,1,1\n");
  CHECK_THROWS_AS(track_load(dir / "text.csv"), FormatError);
  write_text(dir / "head.csv", "frame,f0,amp\n");
  CHECK_THROWS_AS(track_load(dir / "head.csv"), FormatError);
  write_text(dir / "blank.csv", "");
  CHECK_THROWS_AS(track_load(dir / "blank.csv"), FormatError);
  CHECK_THROWS_AS(track_load(dir / "absent.csv"), IoError);
}

TEST_CASE("f0 track and loss curve CSV") {
  TempDir dir;
  F0Track f;
  f.f0 = {0.0, 220.5, 221.25};
  f.confidence = {0.1, 0.95, 0.9};
  f.voiced = {false, true, true};
  f0_track_save(dir / "f0.csv", f);
  const auto back = f0_track_load(dir / "f0.csv");
  CHECK(back.f0 == f.f0);
  CHECK(back.confidence == f.confidence);
  CHECK(back.voiced == f.voiced);

  loss_curve_save(dir / "loss.csv", std::vector<double>{3.5, 1.25});
  std::ifstream in(dir / "loss.csv");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == "iteration,loss\n0,3.5\n1,1.25\n");
}

TEST_CASE("run config round trip and rejection") {
  TempDir dir;
  RunConfig cfg;
  cfg.sample_rate = 22050;
  cfg.frame_rate = 225;
  cfg.n_tables = 8;
  cfg.fft_sizes = {128, 256};
  cfg.learning_rate = 0.0025;
  cfg.iterations = 77;
  cfg.seed = 123456789012345ULL;
  cfg.antialias = false;
  run_config_save(dir / "run.cfg", cfg);
  const auto back = run_config_load(dir / "run.cfg");
  CHECK(back.sample_rate == cfg.sample_rate);
  CHECK(back.frame_rate == cfg.frame_rate);
  CHECK(back.n_tables == 8);
  CHECK(back.table_len == 512);
  CHECK(back.fft_sizes == cfg.fft_sizes);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.iterations == 77);
  CHECK(back.seed == cfg.seed);
  CHECK_FALSE(back.antialias);

  write_text(dir / "c.cfg", "# comment\n\n iterations = 5 # trailing\n");
  CHECK(run_config_load(dir / "c.cfg").iterations == 5);
  write_text(dir / "u.cfg", "colour=blue\n");
  CHECK_THROWS_AS(run_config_load(dir / "u.cfg"), FormatError);
  write_text(dir / "v.cfg", "iterations=many\n");
  CHECK_THROWS_AS(run_config_load(dir / "v.cfg"), FormatError);
  write_text(dir / "w.cfg", "iterations=0\n");
  CHECK_THROWS_AS(run_config_load(dir / "w.cfg"), FormatError);
  write_text(dir / "x.cfg", "frame_rate=300\n");
  CHECK_THROWS_AS(run_config_load(dir / "x.cfg"), FormatError);
  write_text(dir / "y.cfg", "no equals sign\n");
  CHECK_THROWS_AS(run_config_load(dir / "y.cfg"), FormatError);

  const auto fc = cfg.to_fit_config();
  CHECK(fc.iterations == 77);
  CHECK(fc.spectral.fft_sizes == cfg.fft_sizes);
  CHECK_FALSE(fc.antialias);
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(220.0) == "220");
  for (double v : random_signal(100, 9, 1e5)) CHECK(std::stod(format_double(v)) == v);
}
