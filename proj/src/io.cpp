#include "cardioid/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cardioid {

namespace {

using json = nlohmann::json;

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

PpgSignal from_time_series(std::vector<double> t, std::vector<double> v) {
  if (t.size() < 2) throw Error(Err::TooShort, "fewer than 2 samples");
  std::vector<double> dt(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    dt[i] = t[i + 1] - t[i];
    if (!(dt[i] > 0.0))
      throw Error(Err::NonMonotonicTime, "timestamps must be strictly increasing (row " +
                                             std::to_string(i + 1) + ")");
  }
  std::vector<double> sorted = dt;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double med = sorted[sorted.size() / 2];
  if (sorted.size() % 2 == 0) {
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2 - 1, sorted.end());
    med = 0.5 * (med + sorted[sorted.size() / 2 - 1]);
  }

  PpgSignal sig;
  sig.sample_rate_hz = 1.0 / med;
  sig.t0 = t.front();

  const bool uniform = std::all_of(dt.begin(), dt.end(),
                                   [&](double d) { return std::abs(d - med) <= 1e-9 * med; });
  if (uniform) {
    sig.samples = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return sig;
  }

  // resample onto the median-rate grid by linear interpolation
  const auto n_out = static_cast<Eigen::Index>(std::floor((t.back() - t.front()) / med)) + 1;
  Eigen::VectorXd out(n_out);
  std::size_t j = 0;
  for (Eigen::Index i = 0; i < n_out; ++i) {
    const double ti = t.front() + static_cast<double>(i) * med;
    while (j + 2 < t.size() && t[j + 1] < ti) ++j;
    const double a = (ti - t[j]) / (t[j + 1] - t[j]);
    out[i] = v[j] + std::clamp(a, 0.0, 1.0) * (v[j + 1] - v[j]);
  }
  sig.samples = std::move(out);
  return sig;
}

}  // namespace

SignalFormat format_from_path(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos) {
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == "jsonl") return SignalFormat::Jsonl;
  }
  return SignalFormat::Csv;
}

PpgSignal load_signal(const std::string& path, SignalFormat fmt) {
  std::ifstream in(path);
  if (!in) throw Error(Err::MalformedInput, "cannot open " + path);

  std::vector<double> tcol, vcol;
  std::string line;
  std::size_t lineno = 0;
  double header_rate = 0.0;

  while (std::getline(in, line)) {
    ++lineno;
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;

    if (fmt == SignalFormat::Jsonl) {
      json row = json::parse(line, nullptr, false);
      if (row.is_discarded() || !row.is_object() || !row.contains("t") || !row.contains("v") ||
          !row["t"].is_number() || !row["v"].is_number())
        throw Error(Err::MalformedInput, path + ":" + std::to_string(lineno));
      tcol.push_back(row["t"].get<double>());
      vcol.push_back(row["v"].get<double>());
      continue;
    }

    if (lineno == 1 && line.rfind("sample_rate_hz=", 0) == 0) {
      if (!parse_double(line.substr(15), header_rate) || !(header_rate > 0.0))
        throw Error(Err::MalformedInput, "bad sample_rate_hz header in " + path);
      continue;
    }
    if (line == "t_seconds,value") continue;

    const auto comma = line.find(',');
    double a = 0.0, b = 0.0;
    if (comma == std::string::npos) {
      if (header_rate <= 0.0 || !parse_double(line, a))
        throw Error(Err::MalformedInput, path + ":" + std::to_string(lineno));
      vcol.push_back(a);
    } else {
      if (!parse_double(line.substr(0, comma), a) || !parse_double(line.substr(comma + 1), b))
        throw Error(Err::MalformedInput, path + ":" + std::to_string(lineno));
      if (header_rate > 0.0) {
        vcol.push_back(b);  // header wins; first column ignored
      } else {
        tcol.push_back(a);
        vcol.push_back(b);
      }
    }
  }

  if (header_rate > 0.0) {
    if (vcol.size() < 2) throw Error(Err::TooShort, path);
    PpgSignal sig;
    sig.sample_rate_hz = header_rate;
    sig.samples =
        Eigen::Map<Eigen::VectorXd>(vcol.data(), static_cast<Eigen::Index>(vcol.size()));
    return sig;
  }
  if (tcol.size() != vcol.size() || vcol.size() < 2) throw Error(Err::TooShort, path);
  return from_time_series(std::move(tcol), std::move(vcol));
}

void save_signal_csv(const PpgSignal& sig, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Err::MalformedInput, "cannot write " + path);
  out << "sample_rate_hz=" << sig.sample_rate_hz << "\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < sig.samples.size(); ++i) out << sig.samples[i] << "\n";
}

FrameIngestResult frames_to_signal(const std::vector<RgbFrame>& frames, double fps) {
  if (frames.empty()) throw Error(Err::EmptyFrameSequence, "no frames");
  if (!(fps > 0.0)) throw Error(Err::MalformedInput, "fps must be positive");
  frames.front().validate();
  const int w = frames.front().width, h = frames.front().height;

  FrameIngestResult res;
  Eigen::VectorXd samples(static_cast<Eigen::Index>(frames.size()));
  double last = frames.front().pixels.col(0).mean();

  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const RgbFrame& f = frames[fi];
    f.validate();
    if (f.width != w || f.height != h)
      throw Error(Err::DimensionMismatch, "frame " + std::to_string(fi) + " size differs");

    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index p = 0; p < f.pixels.rows(); ++p) {
      const double red = f.pixels(p, 0);
      const double total = f.pixels.row(p).sum();
      if (red > 0.8 * total) {
        sum += red;
        ++count;
      }
    }
    if (count == 0) {
      ++res.dropout_frames;  // hold last value over dropped frames
    } else {
      last = sum / static_cast<double>(count);
    }
    samples[static_cast<Eigen::Index>(fi)] = last;
  }

  res.signal.samples = std::move(samples);
  res.signal.sample_rate_hz = fps;
  return res;
}

}  // namespace cardioid
