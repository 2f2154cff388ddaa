#include "cardioid/authentication.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace cardioid {

namespace {

using json = nlohmann::json;

// Natural cubic spline through (u_i, y_i) with strictly increasing u.
class CubicSpline {
 public:
  CubicSpline(std::vector<double> u, std::vector<double> y)
      : u_(std::move(u)), y_(std::move(y)), m_(u_.size(), 0.0) {
    const std::size_t n = u_.size();
    if (n < 3) return;  // two points: linear, second derivatives stay zero

    // tridiagonal solve for interior second derivatives
    std::vector<double> diag(n, 0.0), rhs(n, 0.0), sub(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double hl = u_[i] - u_[i - 1], hr = u_[i + 1] - u_[i];
      sub[i] = hl;
      diag[i] = 2.0 * (hl + hr);
      rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl);
    }
    for (std::size_t i = 2; i + 1 < n; ++i) {
      const double f = sub[i] / diag[i - 1];
      diag[i] -= f * (u_[i] - u_[i - 1]);
      rhs[i] -= f * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      const double upper = (i + 2 < n) ? (u_[i + 1] - u_[i]) * m_[i + 1] : 0.0;
      m_[i] = (rhs[i] - upper) / diag[i];
      if (i == 1) break;
    }
  }

  double at(double u) const {
    std::size_t i = std::upper_bound(u_.begin(), u_.end(), u) - u_.begin();
    i = std::clamp<std::size_t>(i, 1, u_.size() - 1) - 1;
    const double h = u_[i + 1] - u_[i];
    const double a = (u_[i + 1] - u) / h, b = (u - u_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> u_, y_;
  std::vector<double> m_;  // second derivatives, natural ends
};

double percentile(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

AuthCluster build_cluster(Eigen::MatrixXd members, const EnrollOptions& opts) {
  const auto m = members.cols();
  AuthCluster c;
  if (members.rows() <= m + 1) {
    members = augment_cluster(members, m + 2);
    c.augmented = true;
  }
  c.members = std::move(members);
  c.centroid = c.members.colwise().mean();

  if (opts.mahalanobis) {
    const Eigen::MatrixXd centered = c.members.rowwise() - c.centroid.transpose();
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(c.members.rows() - 1);
    cov += 1e-6 * cov.trace() / static_cast<double>(m) * Eigen::MatrixXd::Identity(m, m);
    c.cov_reg = std::move(cov);
  } else {
    c.cov_reg = Eigen::MatrixXd::Identity(m, m);
  }

  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(c.members.rows()));
  for (Eigen::Index i = 0; i < c.members.rows(); ++i)
    dists.push_back(mahalanobis(c.members.row(i).transpose(), c));
  c.tau = c.members.rows() < 20 ? *std::max_element(dists.begin(), dists.end()) * 1.1
                                : percentile(dists, opts.tau_percentile);
  c.tau = std::max(c.tau, 1e-12);
  return c;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (static_cast<Eigen::Index>(j.at("data").size()) != rows * cols)
    throw Error(Err::MalformedInput, "matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at("data")[at++].get<double>();
  return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v[i]);
  return data;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

MorphologyClass morphology_from_key(const std::string& key) {
  if (key == "M1") return MorphologyClass::M1;
  if (key == "M2") return MorphologyClass::M2;
  if (key == "M3") return MorphologyClass::M3;
  throw Error(Err::UnknownMorphology, "bad morphology key " + key);
}

}  // namespace

Eigen::VectorXd PcaBasis::project(const Eigen::VectorXd& x) const {
  return components.transpose() * ((x - mean) / scale);
}

PcaBasis fit_pca(const std::vector<FeatureVector>& train) {
  if (train.size() < 3)
    throw Error(Err::InsufficientData, "PCA needs at least 3 samples");
  const auto d = train.front().values.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), d);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].morphology != train.front().morphology ||
        train[i].values.size() != d)
      throw Error(Err::DimensionMismatch, "PCA inputs must share one morphology");
    x.row(static_cast<Eigen::Index>(i)) = train[i].values.transpose();
  }

  PcaBasis basis;
  basis.mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - basis.mean.transpose();
  basis.scale = std::sqrt(centered.array().square().mean());
  if (basis.scale < 1e-12)
    throw Error(Err::InsufficientData, "constant training features");
  centered /= basis.scale;

  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error(Err::SingularScatter, "covariance eigendecomposition failed");

  const Eigen::VectorXd evals = solver.eigenvalues().reverse().cwiseMax(0.0);
  const double total = evals.sum();
  basis.explained = evals / total;

  Eigen::Index m = 1;
  double cum = basis.explained[0];
  while (cum < 0.95 && m < d) cum += basis.explained[m++];
  basis.components = solver.eigenvectors().rightCols(m).rowwise().reverse();
  return basis;
}

std::vector<int> wavecluster(const Eigen::MatrixXd& points, int grid_cells_per_dim,
                             double density_threshold) {
  const auto n = points.rows();
  if (n == 0) throw Error(Err::EmptyInput, "no points to cluster");
  if (!points.allFinite()) throw Error(Err::MalformedInput, "non-finite points");
  if (grid_cells_per_dim < 4 || grid_cells_per_dim % 2 != 0)
    throw Error(Err::MalformedInput, "grid cells per dim must be even and >= 4");

  // grid over the two dominant (PCA-ordered) dimensions: a third axis makes
  // the half-resolution grid too sparse for the few hundred points an
  // enrollment produces, shattering one blob into speckle
  const auto dims = std::min<Eigen::Index>(points.cols(), 2);
  const int g = grid_cells_per_dim;
  const int gs = g / 2;  // smoothed (approximation subband) resolution

  Eigen::VectorXd lo(dims), width(dims);
  for (Eigen::Index d = 0; d < dims; ++d) {
    double mn = points.col(d).minCoeff(), mx = points.col(d).maxCoeff();
    double margin = 0.05 * (mx - mn);
    if (margin <= 0.0) margin = 0.05;  // flat dimension
    lo[d] = mn - margin;
    width[d] = (mx + margin) - lo[d];
  }

  auto cell_of = [&](Eigen::Index p) {
    std::array<int, 3> c{0, 0, 0};
    for (Eigen::Index d = 0; d < dims; ++d) {
      const int i = static_cast<int>((points(p, d) - lo[d]) / width[d] * g);
      c[static_cast<std::size_t>(d)] = std::clamp(i, 0, g - 1);
    }
    return c;
  };

  std::size_t n_cells = 1;
  for (Eigen::Index d = 0; d < dims; ++d) n_cells *= static_cast<std::size_t>(gs);
  auto flat = [&](const std::array<int, 3>& c) {
    std::size_t f = 0;
    for (Eigen::Index d = 0; d < dims; ++d)
      f = f * static_cast<std::size_t>(gs) + static_cast<std::size_t>(c[static_cast<std::size_t>(d)]);
    return f;
  };

  // counts accumulated directly at the half-resolution subband: the Haar
  // approximation of a 2-wide block is its average, separably over dims
  std::vector<double> counts(n_cells, 0.0);
  std::vector<std::array<int, 3>> point_cell(static_cast<std::size_t>(n));
  for (Eigen::Index p = 0; p < n; ++p) {
    auto c = cell_of(p);
    for (Eigen::Index d = 0; d < dims; ++d) c[static_cast<std::size_t>(d)] /= 2;
    point_cell[static_cast<std::size_t>(p)] = c;
    counts[flat(c)] += 1.0;
  }
  const double block = std::pow(2.0, static_cast<double>(dims));
  for (auto& v : counts) v /= block;

  double threshold = density_threshold;
  if (threshold <= 0.0) {
    double sum = 0.0, top = 0.0;
    std::size_t nz = 0;
    for (const double v : counts)
      if (v > 0.0) {
        sum += v;
        top = std::max(top, v);
        ++nz;
      }
    threshold = 1.5 * sum / static_cast<double>(nz);
    // extremely compact data can push every cell under 1.5x the mean;
    // keep at least the densest cells so one cluster always survives
    if (threshold > top) threshold = top;
  }

  // connected components over kept cells, face adjacency
  std::vector<int> comp(n_cells, -1);
  int n_comp = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n_cells; ++start) {
    if (counts[start] < threshold || comp[start] >= 0) continue;
    comp[start] = n_comp;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t at = stack.back();
      stack.pop_back();
      std::array<int, 3> c{0, 0, 0};
      std::size_t rem = at;
      for (Eigen::Index d = dims; d-- > 0;) {
        c[static_cast<std::size_t>(d)] = static_cast<int>(rem % static_cast<std::size_t>(gs));
        rem /= static_cast<std::size_t>(gs);
      }
      for (Eigen::Index d = 0; d < dims; ++d) {
        for (const int step : {-1, 1}) {
          auto nb = c;
          nb[static_cast<std::size_t>(d)] += step;
          if (nb[static_cast<std::size_t>(d)] < 0 || nb[static_cast<std::size_t>(d)] >= gs) continue;
          const std::size_t f = flat(nb);
          if (counts[f] >= threshold && comp[f] < 0) {
            comp[f] = n_comp;
            stack.push_back(f);
          }
        }
      }
    }
    ++n_comp;
  }

  // label points; dropped-cell points adopt the nearest kept cell within a
  // 2-cell Chebyshev window, otherwise stay outliers
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (Eigen::Index p = 0; p < n; ++p) {
    const auto& c = point_cell[static_cast<std::size_t>(p)];
    if (comp[flat(c)] >= 0) {
      labels[static_cast<std::size_t>(p)] = comp[flat(c)];
      continue;
    }
    int best_comp = -1;
    double best_d2 = std::numeric_limits<double>::max();
    std::array<int, 3> nb{0, 0, 0};
    for (int dx = -2; dx <= 2; ++dx)
      for (int dy = dims > 1 ? -2 : 0; dy <= (dims > 1 ? 2 : 0); ++dy)
        for (int dz = dims > 2 ? -2 : 0; dz <= (dims > 2 ? 2 : 0); ++dz) {
          nb = {c[0] + dx, c[1] + dy, c[2] + dz};
          bool ok = true;
          for (Eigen::Index d = 0; d < dims; ++d)
            ok = ok && nb[static_cast<std::size_t>(d)] >= 0 && nb[static_cast<std::size_t>(d)] < gs;
          if (!ok) continue;
          const std::size_t f = flat(nb);
          if (comp[f] < 0) continue;
          const double d2 = static_cast<double>(dx * dx + dy * dy + dz * dz);
          if (d2 < best_d2) {
            best_d2 = d2;
            best_comp = comp[f];
          }
        }
    labels[static_cast<std::size_t>(p)] = best_comp;
  }
  return labels;
}

Eigen::MatrixXd augment_cluster(const Eigen::MatrixXd& points, Eigen::Index target_count) {
  const auto n = points.rows();
  if (n < 2) throw Error(Err::TooFewPoints, "augmentation needs at least 2 points");
  if (n >= target_count) return points;
  const auto m = points.cols();

  // order along the first principal axis
  const Eigen::VectorXd mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - mean.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(centered.transpose() * centered);
  const Eigen::VectorXd axis = solver.eigenvectors().col(m - 1);
  const Eigen::VectorXd proj = centered * axis;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return proj[a] != proj[b] ? proj[a] < proj[b] : a < b;
  });

  // arc-length parameter over the ordered points; duplicates collapse to
  // one knot so the spline parameters stay strictly increasing
  std::vector<double> u;
  std::vector<Eigen::Index> knot;
  u.push_back(0.0);
  knot.push_back(order[0]);
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double step = (points.row(order[i]) - points.row(knot.back())).norm();
    if (step > 1e-14) {
      u.push_back(u.back() + step);
      knot.push_back(order[i]);
    }
  }

  if (knot.size() < 2) {  // all points coincide; replicate
    Eigen::MatrixXd out(target_count, m);
    for (Eigen::Index i = 0; i < target_count; ++i)
      out.row(i) = points.row(i < n ? i : 0);
    return out;
  }

  std::vector<CubicSpline> splines;
  splines.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index d = 0; d < m; ++d) {
    std::vector<double> y;
    y.reserve(knot.size());
    for (const auto ki : knot) y.push_back(points(ki, d));
    splines.emplace_back(u, std::move(y));
  }

  // full rounds of midpoint insertion keep symmetric sets symmetric
  std::vector<double> params = u;
  std::vector<double> fresh;
  Eigen::Index total = n;
  while (total < target_count) {
    std::vector<double> next;
    next.reserve(params.size() * 2 - 1);
    for (std::size_t i = 0; i < params.size(); ++i) {
      next.push_back(params[i]);
      if (i + 1 < params.size()) {
        const double mid = 0.5 * (params[i] + params[i + 1]);
        next.push_back(mid);
        fresh.push_back(mid);
        ++total;
      }
    }
    params = std::move(next);
  }

  Eigen::MatrixXd out(n + static_cast<Eigen::Index>(fresh.size()), m);
  out.topRows(n) = points;
  for (std::size_t i = 0; i < fresh.size(); ++i)
    for (Eigen::Index d = 0; d < m; ++d)
      out(n + static_cast<Eigen::Index>(i), d) = splines[static_cast<std::size_t>(d)].at(fresh[i]);
  return out;
}

double mahalanobis(const Eigen::VectorXd& x, const AuthCluster& cluster) {
  if (x.size() != cluster.centroid.size())
    throw Error(Err::DimensionMismatch, "point and cluster dimensions differ");
  const Eigen::LLT<Eigen::MatrixXd> llt(cluster.cov_reg);
  if (llt.info() != Eigen::Success)
    throw Error(Err::NotPositiveDefinite, "cluster covariance is not positive definite");
  const Eigen::VectorXd dev = x - cluster.centroid;
  return std::sqrt(dev.dot(llt.solve(dev)));
}

AuthProfile enroll(const std::vector<FeatureVector>& train, const std::string& subject_id,
                   const EnrollOptions& opts) {
  if (static_cast<int>(train.size()) < opts.min_enroll_periods)
    throw Error(Err::InsufficientData,
                "enrollment needs at least " + std::to_string(opts.min_enroll_periods) +
                    " periods, got " + std::to_string(train.size()));

  std::map<MorphologyClass, std::vector<FeatureVector>> groups;
  for (const auto& fv : train)
    if (fv.morphology != MorphologyClass::Discard) groups[fv.morphology].push_back(fv);

  AuthProfile profile;
  profile.subject_id = subject_id;

  for (const auto& [morph, fvs] : groups) {
    if (fvs.size() < 3) continue;

    AuthProfile::MorphModel mm;
    mm.basis = fit_pca(fvs);
    const auto m = mm.basis.components.cols();

    Eigen::MatrixXd y(static_cast<Eigen::Index>(fvs.size()), m);
    for (std::size_t i = 0; i < fvs.size(); ++i)
      y.row(static_cast<Eigen::Index>(i)) = mm.basis.project(fvs[i].values).transpose();

    std::vector<int> assignment;
    int n_clusters = 1;
    if (opts.multi_cluster) {
      assignment = wavecluster(y, opts.grid_cells_per_dim, opts.density_threshold);
      n_clusters = 0;
      for (const int a : assignment) n_clusters = std::max(n_clusters, a + 1);
    } else {
      assignment.assign(fvs.size(), 0);
    }

    for (int cid = 0; cid < n_clusters; ++cid) {
      std::vector<Eigen::Index> rows;
      for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == cid) rows.push_back(static_cast<Eigen::Index>(i));
      if (rows.size() < 2) continue;  // lone points cannot carry a covariance
      Eigen::MatrixXd members(static_cast<Eigen::Index>(rows.size()), m);
      for (std::size_t i = 0; i < rows.size(); ++i)
        members.row(static_cast<Eigen::Index>(i)) = y.row(rows[i]);
      mm.clusters.push_back(build_cluster(std::move(members), opts));
    }

    if (!mm.clusters.empty()) profile.morphologies.emplace(morph, std::move(mm));
  }

  if (profile.morphologies.empty())
    throw Error(Err::InsufficientData, "no morphology had enough periods to enroll");
  return profile;
}

VerifyResult verify(const AuthProfile& profile, const FeatureVector& fv) {
  VerifyResult res;
  res.distance = std::numeric_limits<double>::infinity();

  const auto it = profile.morphologies.find(fv.morphology);
  if (it == profile.morphologies.end()) return res;
  if (fv.values.size() != it->second.basis.mean.size()) return res;

  const Eigen::VectorXd x = it->second.basis.project(fv.values);
  for (const auto& cluster : it->second.clusters)
    res.distance = std::min(res.distance, mahalanobis(x, cluster) / cluster.tau);
  res.accept = res.distance <= 1.0;
  return res;
}

json AuthProfile::to_json() const {
  json morphs;
  for (const auto& [m, mm] : morphologies) {
    json clusters = json::array();
    for (const auto& c : mm.clusters)
      clusters.push_back({{"centroid", vec_to_json(c.centroid)},
                          {"cov_reg", mat_to_json(c.cov_reg)},
                          {"tau", c.tau},
                          {"augmented", c.augmented},
                          {"member_count", c.members.rows()}});
    morphs[to_string(m)] = {{"mean", vec_to_json(mm.basis.mean)},
                            {"scale", mm.basis.scale},
                            {"components", mat_to_json(mm.basis.components)},
                            {"explained", vec_to_json(mm.basis.explained)},
                            {"clusters", std::move(clusters)}};
  }
  return {{"format", "cardioid-auth"},
          {"version", 1},
          {"subject_id", subject_id},
          {"morphologies", std::move(morphs)}};
}

AuthProfile AuthProfile::from_json(const json& j) {
  if (j.value("format", "") != "cardioid-auth" || j.value("version", 0) != 1)
    throw Error(Err::MalformedInput, "not a version-1 authentication profile");
  AuthProfile p;
  p.subject_id = j.at("subject_id").get<std::string>();
  for (const auto& [key, mj] : j.at("morphologies").items()) {
    MorphModel mm;
    mm.basis.mean = vec_from_json(mj.at("mean"));
    mm.basis.scale = mj.at("scale").get<double>();
    mm.basis.components = mat_from_json(mj.at("components"));
    mm.basis.explained = vec_from_json(mj.at("explained"));
    for (const auto& cj : mj.at("clusters")) {
      AuthCluster c;
      c.centroid = vec_from_json(cj.at("centroid"));
      c.cov_reg = mat_from_json(cj.at("cov_reg"));
      c.tau = cj.at("tau").get<double>();
      c.augmented = cj.at("augmented").get<bool>();
      c.members.resize(0, c.centroid.size());  // members are not persisted
      mm.clusters.push_back(std::move(c));
    }
    p.morphologies.emplace(morphology_from_key(key), std::move(mm));
  }
  return p;
}

void AuthProfile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Err::MalformedInput, "cannot write " + path);
  out << to_json().dump(2) << "\n";
}

AuthProfile AuthProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::MalformedInput, "cannot open " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Err::MalformedInput, "invalid JSON in " + path);
  return from_json(j);
}

}  // namespace cardioid
