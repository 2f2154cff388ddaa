#include "cardioid/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cardioid {

namespace {

std::vector<FiducialPoint> interleaved_fiducials(const Extrema& ext, Eigen::Index len) {
  std::vector<FiducialPoint> pts;
  pts.reserve(ext.peaks.size() + ext.valleys.size());
  auto push = [&](const std::pair<Eigen::Index, double>& e, FiducialKind kind) {
    FiducialPoint f;
    f.t_norm = static_cast<double>(e.first) / static_cast<double>(len - 1);
    f.a_norm = e.second;
    f.kind = kind;
    pts.push_back(f);
  };
  std::size_t pi = 0, vi = 0;
  while (pi < ext.peaks.size() || vi < ext.valleys.size()) {
    const bool take_peak =
        vi == ext.valleys.size() ||
        (pi < ext.peaks.size() && ext.peaks[pi].first < ext.valleys[vi].first);
    if (take_peak) push(ext.peaks[pi++], FiducialKind::Peak);
    else push(ext.valleys[vi++], FiducialKind::Valley);
  }
  return pts;
}

// (duration, height, slope) triple for each consecutive fiducial pair
void append_pair_triples(const std::vector<FiducialPoint>& pts, std::vector<double>& out) {
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double dt = pts[i + 1].t_norm - pts[i].t_norm;
    const double da = pts[i + 1].a_norm - pts[i].a_norm;
    if (dt <= 0.0) throw Error(Err::DegenerateGap, "coincident fiducial times");
    out.push_back(dt);
    out.push_back(da);
    out.push_back(da / dt);
  }
}

double trapezoid_area(const Eigen::Ref<const Eigen::VectorXd>& y, Eigen::Index from,
                      Eigen::Index to, double dx) {
  double area = 0.0;
  for (Eigen::Index i = from; i < to; ++i) area += 0.5 * (y[i] + y[i + 1]) * dx;
  return area;
}

}  // namespace

int feature_dims(MorphologyClass m) {
  switch (m) {
    case MorphologyClass::M1: return 32;
    case MorphologyClass::M2: return 38;
    case MorphologyClass::M3: return 44;
    case MorphologyClass::Discard: break;
  }
  throw Error(Err::UnknownMorphology, "no feature layout for discarded periods");
}

std::vector<FiducialPoint> fiducials_h(const CardiacPeriod& period, double prominence_frac) {
  const Extrema ext = detect_extrema(period.h_samples, prominence_frac);
  if (ext.peaks.size() != 2 || ext.valleys.size() != 3)
    throw Error(Err::HMorphologyMismatch,
                "expected 2 peaks / 3 valleys, got " + std::to_string(ext.peaks.size()) + "/" +
                    std::to_string(ext.valleys.size()));
  return interleaved_fiducials(ext, period.h_samples.size());
}

FeatureVector extract_features(const CardiacPeriod& period, double prominence_frac) {
  const Extrema ext2 = detect_extrema(period.h2_samples, prominence_frac);
  const MorphologyClass morph = classify_morphology(ext2);
  if (morph == MorphologyClass::Discard)
    throw Error(Err::UnknownMorphology, "period outside the three accepted morphologies");

  const auto hf = fiducials_h(period, prominence_frac);

  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(feature_dims(morph)));
  vals.push_back(period.duration_s);

  // area on each side of the systolic peak, integrated in normalized time
  const auto L = period.h_samples.size();
  const double dx = 1.0 / static_cast<double>(L - 1);
  const auto sys_idx = static_cast<Eigen::Index>(std::lround(hf[1].t_norm * static_cast<double>(L - 1)));
  const double pre = trapezoid_area(period.h_samples, 0, sys_idx, dx);
  const double post = trapezoid_area(period.h_samples, sys_idx, L - 1, dx);
  if (post <= 0.0) throw Error(Err::DegenerateGap, "empty post-systolic area");
  vals.push_back(pre / post);

  append_pair_triples(hf, vals);
  append_pair_triples(interleaved_fiducials(ext2, period.h2_samples.size()), vals);

  FeatureVector fv;
  fv.morphology = morph;
  fv.subject_id = period.subject_id;
  fv.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  if (fv.values.size() != feature_dims(morph) || !fv.values.allFinite())
    throw Error(Err::DegenerateGap, "malformed feature vector");
  return fv;
}

void write_features_csv(const std::vector<FeatureVector>& fvs, const std::string& path) {
  if (fvs.empty()) throw Error(Err::EmptyInput, "no feature vectors to write");
  const auto d = fvs.front().values.size();
  std::ofstream out(path);
  if (!out) throw Error(Err::MalformedInput, "cannot write " + path);
  out << "subject,morphology";
  for (Eigen::Index i = 0; i < d; ++i) out << ",f" << i;
  out << "\n";
  out.precision(17);
  for (const auto& fv : fvs) {
    if (fv.values.size() != d)
      throw Error(Err::DimensionMismatch, "mixed dimensions in one feature file");
    out << fv.subject_id << "," << to_string(fv.morphology);
    for (Eigen::Index i = 0; i < d; ++i) out << "," << fv.values[i];
    out << "\n";
  }
}

std::vector<FeatureVector> read_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::MalformedInput, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("subject,morphology", 0) != 0)
    throw Error(Err::MalformedInput, "missing feature CSV header in " + path);

  std::vector<FeatureVector> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    FeatureVector fv;
    if (!std::getline(ss, fv.subject_id, ',') || fv.subject_id.empty())
      throw Error(Err::MalformedInput, path + ":" + std::to_string(lineno));
    std::string morph;
    if (!std::getline(ss, morph, ','))
      throw Error(Err::MalformedInput, path + ":" + std::to_string(lineno));
    if (morph == "M1") fv.morphology = MorphologyClass::M1;
    else if (morph == "M2") fv.morphology = MorphologyClass::M2;
    else if (morph == "M3") fv.morphology = MorphologyClass::M3;
    else throw Error(Err::UnknownMorphology, "unknown morphology " + morph);

    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(Err::MalformedInput, path + ":" + std::to_string(lineno));
      }
    }
    fv.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    if (fv.values.size() != feature_dims(fv.morphology))
      throw Error(Err::DimensionMismatch, "wrong feature count at " + path + ":" +
                                              std::to_string(lineno));
    out.push_back(std::move(fv));
  }
  return out;
}

}  // namespace cardioid
