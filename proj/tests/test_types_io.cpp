#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "cardioid/io.hpp"
#include "cardioid/types.hpp"

using namespace cardioid;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test run; removed on destruction so repeated
// ctest invocations never see stale files.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cardioid_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("PpgSignal validation and duration") {
  PpgSignal sig;
  sig.samples = Eigen::VectorXd::LinSpaced(101, 0.0, 1.0);
  sig.sample_rate_hz = 100.0;
  CHECK_NOTHROW(sig.validate());
  CHECK(sig.duration_s() == doctest::Approx(1.0));

  PpgSignal one;
  one.samples = Eigen::VectorXd::Ones(1);
  one.sample_rate_hz = 100.0;
  CHECK_THROWS_AS(one.validate(), Error);

  PpgSignal bad_rate = sig;
  bad_rate.sample_rate_hz = 0.0;
  CHECK_THROWS_AS(bad_rate.validate(), Error);

  PpgSignal nan_sig = sig;
  nan_sig.samples[3] = std::nan("");
  CHECK_THROWS_AS(nan_sig.validate(), Error);
}

TEST_CASE("error kind survives the throw") {
  PpgSignal one;
  one.samples = Eigen::VectorXd::Ones(1);
  one.sample_rate_hz = 100.0;
  try {
    one.validate();
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::TooShort);
    CHECK(std::string(e.what()).find("TooShort") != std::string::npos);
  }
}

TEST_CASE("format inferred from the file extension") {
  CHECK(format_from_path("a/b/rec.jsonl") == SignalFormat::Jsonl);
  CHECK(format_from_path("REC.JSONL") == SignalFormat::Jsonl);
  CHECK(format_from_path("rec.csv") == SignalFormat::Csv);
  CHECK(format_from_path("no_extension") == SignalFormat::Csv);
}

TEST_CASE("CSV with a rate header: one value per row") {
  TempDir tmp;
  const auto p = tmp.file("sig.csv");
  write_text(p, "sample_rate_hz=128\n0.5\n0.25\n-1.0\n2.5\n");
  const PpgSignal sig = load_signal(p, SignalFormat::Csv);
  CHECK(sig.sample_rate_hz == doctest::Approx(128.0));
  REQUIRE(sig.samples.size() == 4);
  CHECK(sig.samples[0] == doctest::Approx(0.5));
  CHECK(sig.samples[2] == doctest::Approx(-1.0));
  CHECK_FALSE(sig.t0.has_value());
}

TEST_CASE("two-column CSV with uniform timestamps keeps samples verbatim") {
  TempDir tmp;
  const auto p = tmp.file("sig.csv");
  std::string text = "t_seconds,value\n";
  for (int i = 0; i < 50; ++i)
    text += std::to_string(0.01 * i) + "," + std::to_string(i * i) + "\n";
  write_text(p, text);
  const PpgSignal sig = load_signal(p, SignalFormat::Csv);
  CHECK(sig.sample_rate_hz == doctest::Approx(100.0).epsilon(1e-6));
  REQUIRE(sig.samples.size() == 50);
  for (int i = 0; i < 50; ++i) CHECK(sig.samples[i] == doctest::Approx(double(i) * i));
  REQUIRE(sig.t0.has_value());
  CHECK(*sig.t0 == doctest::Approx(0.0));
}

TEST_CASE("non-uniform timestamps resample onto the median grid") {
  TempDir tmp;
  const auto p = tmp.file("sig.csv");
  // dt alternates 0.1 / 0.3 with median 0.1; values follow v = 2t exactly, so
  // linear interpolation must reproduce v = 2t at every output instant.
  std::string text;
  double t = 0.0;
  for (int i = 0; i < 40; ++i) {
    text += std::to_string(t) + "," + std::to_string(2.0 * t) + "\n";
    t += (i % 3 == 2) ? 0.3 : 0.1;
  }
  write_text(p, text);
  const PpgSignal sig = load_signal(p, SignalFormat::Csv);
  CHECK(sig.sample_rate_hz == doctest::Approx(10.0).epsilon(1e-6));
  for (Eigen::Index i = 0; i < sig.samples.size(); ++i) {
    const double ti = static_cast<double>(i) / sig.sample_rate_hz;
    CHECK(sig.samples[i] == doctest::Approx(2.0 * ti).epsilon(1e-6));
  }
}

TEST_CASE("JSONL rows parse and bad rows are rejected") {
  TempDir tmp;
  const auto good = tmp.file("sig.jsonl");
  write_text(good, "{\"t\": 0.0, \"v\": 1.5}\n{\"t\": 0.5, \"v\": 2.5}\n{\"t\": 1.0, \"v\": 3.5}\n");
  const PpgSignal sig = load_signal(good, SignalFormat::Jsonl);
  CHECK(sig.sample_rate_hz == doctest::Approx(2.0));
  REQUIRE(sig.samples.size() == 3);
  CHECK(sig.samples[1] == doctest::Approx(2.5));

  const auto bad = tmp.file("bad.jsonl");
  write_text(bad, "{\"t\": 0.0}\n");
  CHECK_THROWS_AS(load_signal(bad, SignalFormat::Jsonl), Error);
}

TEST_CASE("malformed and degenerate inputs map to domain errors") {
  TempDir tmp;

  const auto backwards = tmp.file("backwards.csv");
  write_text(backwards, "0.0,1.0\n0.2,2.0\n0.1,3.0\n");
  CHECK_THROWS_AS(load_signal(backwards, SignalFormat::Csv), Error);

  const auto single = tmp.file("single.csv");
  write_text(single, "sample_rate_hz=100\n1.0\n");
  CHECK_THROWS_AS(load_signal(single, SignalFormat::Csv), Error);

  const auto garbage = tmp.file("garbage.csv");
  write_text(garbage, "sample_rate_hz=100\n1.0\nnot-a-number\n");
  CHECK_THROWS_AS(load_signal(garbage, SignalFormat::Csv), Error);

  CHECK_THROWS_AS(load_signal(tmp.file("missing.csv"), SignalFormat::Csv), Error);
}

TEST_CASE("comments and blank lines are skipped") {
  TempDir tmp;
  const auto p = tmp.file("sig.csv");
  write_text(p, "sample_rate_hz=50\n# recorded at the lab\n\n1.0\n# mid-file note\n2.0\n3.0\n");
  const PpgSignal sig = load_signal(p, SignalFormat::Csv);
  REQUIRE(sig.samples.size() == 3);
  CHECK(sig.samples[2] == doctest::Approx(3.0));
}

TEST_CASE("save/load CSV round-trip preserves every sample bit-exactly") {
  TempDir tmp;
  PpgSignal sig;
  sig.sample_rate_hz = 97.3;
  sig.samples.resize(64);
  for (Eigen::Index i = 0; i < 64; ++i)
    sig.samples[i] = std::sin(0.37 * static_cast<double>(i)) * 1e-3 + 1.0 / 3.0;
  const auto p = tmp.file("round.csv");
  save_signal_csv(sig, p);
  const PpgSignal back = load_signal(p, SignalFormat::Csv);
  CHECK(back.sample_rate_hz == doctest::Approx(sig.sample_rate_hz));
  REQUIRE(back.samples.size() == sig.samples.size());
  for (Eigen::Index i = 0; i < 64; ++i) CHECK(back.samples[i] == sig.samples[i]);
}

namespace {

// One flat frame whose pixels all share the given RGB triple.
RgbFrame flat_frame(int w, int h, double r, double g, double b) {
  RgbFrame f;
  f.width = w;
  f.height = h;
  f.pixels.resize(w * h, 3);
  for (Eigen::Index p = 0; p < f.pixels.rows(); ++p) f.pixels.row(p) << r, g, b;
  return f;
}

}  // namespace

TEST_CASE("frames collapse to the red-dominant pixel average") {
  // 2x1 frames: first pixel clearly red-dominant, second balanced (ignored).
  RgbFrame f = flat_frame(2, 1, 0.0, 0.0, 0.0);
  f.pixels.row(0) << 0.9, 0.05, 0.02;  // red > 0.8 * total
  f.pixels.row(1) << 0.4, 0.3, 0.3;
  const FrameIngestResult res = frames_to_signal({f, f, f}, 30.0);
  CHECK(res.signal.sample_rate_hz == doctest::Approx(30.0));
  REQUIRE(res.signal.samples.size() == 3);
  CHECK(res.signal.samples[0] == doctest::Approx(0.9));
  CHECK(res.dropout_frames == 0);
}

TEST_CASE("frames with no usable pixels hold the previous value") {
  RgbFrame lit = flat_frame(1, 1, 0.96, 0.01, 0.01);
  RgbFrame dark = flat_frame(1, 1, 0.2, 0.2, 0.2);
  const FrameIngestResult res = frames_to_signal({lit, dark, lit}, 10.0);
  CHECK(res.dropout_frames == 1);
  CHECK(res.signal.samples[1] == doctest::Approx(0.96));  // held
}

TEST_CASE("frame ingestion rejects inconsistent input") {
  CHECK_THROWS_AS(frames_to_signal({}, 30.0), Error);
  RgbFrame a = flat_frame(2, 2, 0.9, 0.0, 0.0);
  CHECK_THROWS_AS(frames_to_signal({a}, 0.0), Error);
  RgbFrame b = flat_frame(3, 2, 0.9, 0.0, 0.0);
  CHECK_THROWS_AS(frames_to_signal({a, b}, 30.0), Error);

  RgbFrame bad = a;
  bad.pixels(1, 2) = -0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = a;
  bad.pixels.conservativeResize(3, 3);
  CHECK_THROWS_AS(bad.validate(), Error);
}
