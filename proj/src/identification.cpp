#include "cardioid/identification.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "cardioid/rng.hpp"

namespace cardioid {

namespace {

using json = nlohmann::json;

struct MorphGroup {
  Eigen::MatrixXd x;           // one sample per row
  std::vector<int> label_idx;  // into the global label list
};

std::vector<std::string> collect_labels(const std::vector<FeatureVector>& train) {
  std::set<std::string> uniq;
  for (const auto& fv : train) uniq.insert(fv.subject_id);
  return {uniq.begin(), uniq.end()};
}

std::map<MorphologyClass, MorphGroup> group_by_morphology(
    const std::vector<FeatureVector>& train, const std::vector<std::string>& labels) {
  std::map<MorphologyClass, std::vector<const FeatureVector*>> rows;
  for (const auto& fv : train) {
    if (fv.morphology == MorphologyClass::Discard)
      throw Error(Err::UnknownMorphology, "cannot train on discarded periods");
    if (fv.values.size() != feature_dims(fv.morphology))
      throw Error(Err::DimensionMismatch, "feature vector size does not match its morphology");
    rows[fv.morphology].push_back(&fv);
  }
  std::map<MorphologyClass, MorphGroup> out;
  for (auto& [m, list] : rows) {
    MorphGroup g;
    g.x.resize(static_cast<Eigen::Index>(list.size()), list.front()->values.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
      g.x.row(static_cast<Eigen::Index>(i)) = list[i]->values.transpose();
      const auto it = std::lower_bound(labels.begin(), labels.end(), list[i]->subject_id);
      g.label_idx.push_back(static_cast<int>(it - labels.begin()));
    }
    out.emplace(m, std::move(g));
  }
  return out;
}

void require_two_classes(const std::vector<std::string>& labels) {
  if (labels.size() < 2)
    throw Error(Err::InsufficientData, "need at least 2 subjects to train an identifier");
}

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;
};

Standardization fit_standardization(const Eigen::MatrixXd& x) {
  Standardization s;
  s.mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.stdev = (centered.array().square().colwise().mean()).sqrt();
  for (Eigen::Index i = 0; i < s.stdev.size(); ++i)
    if (s.stdev[i] < 1e-12) s.stdev[i] = 1.0;
  return s;
}

Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& x, const Standardization& s) {
  return (x.rowwise() - s.mean.transpose()).array().rowwise() / s.stdev.transpose().array();
}

Eigen::VectorXd standardize_one(const Eigen::VectorXd& v, const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& stdev) {
  return ((v - mean).array() / stdev.array()).matrix();
}

// ---- K-NN ----

int knn_predict(const KnnSubModel& m, const Eigen::VectorXd& raw, double& score) {
  const Eigen::VectorXd q = standardize_one(raw, m.mean, m.stdev);
  const Eigen::VectorXd d2 = (m.train.rowwise() - q.transpose()).rowwise().squaredNorm();

  std::vector<int> order(static_cast<std::size_t>(d2.size()));
  std::iota(order.begin(), order.end(), 0);
  const auto k = static_cast<std::size_t>(std::min<Eigen::Index>(m.k, d2.size()));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](int a, int b) {
                      return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
                    });

  std::map<int, int> votes;
  for (std::size_t i = 0; i < k; ++i) ++votes[m.label_idx[static_cast<std::size_t>(order[i])]];
  int best_votes = 0;
  for (const auto& kv : votes) best_votes = std::max(best_votes, kv.second);

  // tie: nearest neighbour whose label is among the tied winners
  int winner = -1;
  for (std::size_t i = 0; i < k && winner < 0; ++i) {
    const int lbl = m.label_idx[static_cast<std::size_t>(order[i])];
    if (votes[lbl] == best_votes) winner = lbl;
  }
  score = static_cast<double>(best_votes) / static_cast<double>(k);
  return winner;
}

// ---- LDA ----

LdaSubModel fit_lda_group(const MorphGroup& g) {
  const auto n = g.x.rows();
  const auto d = g.x.cols();
  if (n <= d)
    throw Error(Err::InsufficientData,
                "LDA needs more samples than feature dimensions per morphology");

  std::map<int, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < n; ++i)
    by_class[g.label_idx[static_cast<std::size_t>(i)]].push_back(i);
  const auto c = static_cast<Eigen::Index>(by_class.size());

  LdaSubModel sub;
  const Eigen::VectorXd global_mean = g.x.colwise().mean();

  if (c == 1) {
    // single enrolled class: degenerate projection, constant prediction
    sub.w = Eigen::MatrixXd::Zero(d, 1);
    sub.w(0, 0) = 1.0;
    sub.centroids = (sub.w.transpose() * global_mean).transpose();
    sub.label_idx = {by_class.begin()->first};
    return sub;
  }

  Eigen::MatrixXd s_w = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd s_b = Eigen::MatrixXd::Zero(d, d);
  std::vector<Eigen::VectorXd> means;
  for (const auto& [lbl, idx] : by_class) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (const auto i : idx) mu += g.x.row(i).transpose();
    mu /= static_cast<double>(idx.size());
    for (const auto i : idx) {
      const Eigen::VectorXd dev = g.x.row(i).transpose() - mu;
      s_w += dev * dev.transpose();
    }
    const Eigen::VectorXd gap = mu - global_mean;
    s_b += static_cast<double>(idx.size()) * gap * gap.transpose();
    means.push_back(std::move(mu));
    sub.label_idx.push_back(lbl);
  }

  const double lambda = 1e-4;
  s_w += lambda * s_w.trace() / static_cast<double>(d) *
         Eigen::MatrixXd::Identity(d, d);

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(s_b, s_w);
  if (solver.info() != Eigen::Success)
    throw Error(Err::SingularScatter, "generalized eigensolver failed on scatter matrices");

  const auto r = std::min<Eigen::Index>(c - 1, d);
  sub.w = solver.eigenvectors().rightCols(r).rowwise().reverse();

  sub.centroids.resize(c, r);
  for (Eigen::Index ci = 0; ci < c; ++ci)
    sub.centroids.row(ci) = (sub.w.transpose() * means[static_cast<std::size_t>(ci)]).transpose();
  return sub;
}

int lda_predict(const LdaSubModel& m, const Eigen::VectorXd& raw, double& score) {
  const Eigen::VectorXd z = m.w.transpose() * raw;
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (Eigen::Index i = 0; i < m.centroids.rows(); ++i) {
    const double dist = (m.centroids.row(i).transpose() - z).norm();
    if (dist < best_d) {
      best_d = dist;
      best = i;
    }
  }
  score = -best_d;
  return m.label_idx[static_cast<std::size_t>(best)];
}

// ---- NN ----

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& g) {
  const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = (2.0 * rng::uniform01(g) - 1.0) * r;
  return w;
}

void check_finite(double loss) {
  if (!std::isfinite(loss)) throw Error(Err::NonFiniteLoss, "training loss diverged");
}

template <typename Step>
void run_epochs(Eigen::Index n, int epochs, int batch, std::mt19937_64& g, Step step) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    rng::shuffle(order, g);
    for (Eigen::Index at = 0; at < n; at += batch) {
      const auto take = std::min<Eigen::Index>(batch, n - at);
      step(std::vector<Eigen::Index>(order.begin() + at, order.begin() + at + take));
    }
  }
}

NnSubModel fit_nn_group(const MorphGroup& g, MorphologyClass morph, int n_classes,
                        const NnOptions& opts, std::uint64_t stream) {
  std::seed_seq seq{opts.seed, stream};
  std::mt19937_64 gen(seq);

  NnSubModel sub;
  const Standardization stats = fit_standardization(g.x);
  sub.mean = stats.mean;
  sub.stdev = stats.stdev;
  Eigen::MatrixXd rep = apply_standardization(g.x, stats);

  // stage 1: greedy layerwise sparse-autoencoder pretraining
  for (const int h : nn_hidden_sizes(morph)) {
    const auto in = rep.cols();
    Eigen::MatrixXd enc_w = glorot(h, in, gen);
    Eigen::VectorXd enc_b = Eigen::VectorXd::Zero(h);
    Eigen::MatrixXd dec_w = glorot(in, h, gen);
    Eigen::VectorXd dec_b = Eigen::VectorXd::Zero(in);

    run_epochs(rep.rows(), opts.pretrain_epochs, opts.batch, gen,
               [&](const std::vector<Eigen::Index>& idx) {
                 Eigen::MatrixXd xb(static_cast<Eigen::Index>(idx.size()), in);
                 for (std::size_t i = 0; i < idx.size(); ++i)
                   xb.row(static_cast<Eigen::Index>(i)) = rep.row(idx[i]);
                 const auto grad = nn::autoencoder_grad(xb, enc_w, enc_b, dec_w, dec_b,
                                                        opts.l2, opts.rho, opts.beta);
                 check_finite(grad.loss);
                 enc_w -= opts.lr * grad.d_enc_w;
                 enc_b -= opts.lr * grad.d_enc_b;
                 dec_w -= opts.lr * grad.d_dec_w;
                 dec_b -= opts.lr * grad.d_dec_b;
               });

    sub.weights.push_back(std::move(enc_w));
    sub.biases.push_back(std::move(enc_b));
    rep = sigmoid((rep * sub.weights.back().transpose()).rowwise() +
                  sub.biases.back().transpose());
  }

  // stage 2: softmax head, end-to-end cross-entropy fine-tuning
  sub.weights.push_back(glorot(n_classes, sub.weights.back().rows(), gen));
  sub.biases.push_back(Eigen::VectorXd::Zero(n_classes));

  const Eigen::MatrixXd x0 = apply_standardization(g.x, stats);
  run_epochs(x0.rows(), opts.epochs, opts.batch, gen,
             [&](const std::vector<Eigen::Index>& idx) {
               Eigen::MatrixXd xb(static_cast<Eigen::Index>(idx.size()), x0.cols());
               std::vector<int> yb(idx.size());
               for (std::size_t i = 0; i < idx.size(); ++i) {
                 xb.row(static_cast<Eigen::Index>(i)) = x0.row(idx[i]);
                 yb[i] = g.label_idx[static_cast<std::size_t>(idx[i])];
               }
               auto grad = nn::network_grad(xb, yb, sub.weights, sub.biases, opts.l2);
               check_finite(grad.loss);
               for (std::size_t l = 0; l < sub.weights.size(); ++l) {
                 sub.weights[l] -= opts.lr * grad.d_w[l];
                 sub.biases[l] -= opts.lr * grad.d_b[l];
               }
             });
  return sub;
}

int nn_predict(const NnSubModel& m, const Eigen::VectorXd& raw, double& score) {
  const Eigen::MatrixXd p =
      nn::network_forward(standardize_one(raw, m.mean, m.stdev).transpose(), m.weights, m.biases);
  Eigen::Index best = 0;
  score = p.row(0).maxCoeff(&best);
  return static_cast<int>(best);
}

// ---- serialization ----

json mat_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw Error(Err::MalformedInput, "matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[at++].get<double>();
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

json submodel_to_json(const IdentSubModel& sub) {
  json j;
  if (const auto* knn = std::get_if<KnnSubModel>(&sub)) {
    j["kind"] = "knn";
    j["train"] = mat_to_json(knn->train);
    j["label_idx"] = knn->label_idx;
    j["mean"] = vec_to_json(knn->mean);
    j["stdev"] = vec_to_json(knn->stdev);
    j["k"] = knn->k;
  } else if (const auto* lda = std::get_if<LdaSubModel>(&sub)) {
    j["kind"] = "lda";
    j["w"] = mat_to_json(lda->w);
    j["centroids"] = mat_to_json(lda->centroids);
    j["label_idx"] = lda->label_idx;
  } else {
    const auto& nn = std::get<NnSubModel>(sub);
    j["kind"] = "nn";
    json ws = json::array(), bs = json::array();
    for (const auto& w : nn.weights) ws.push_back(mat_to_json(w));
    for (const auto& b : nn.biases) bs.push_back(vec_to_json(b));
    j["weights"] = std::move(ws);
    j["biases"] = std::move(bs);
    j["mean"] = vec_to_json(nn.mean);
    j["stdev"] = vec_to_json(nn.stdev);
  }
  return j;
}

IdentSubModel submodel_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "knn") {
    KnnSubModel m;
    m.train = mat_from_json(j.at("train"));
    m.label_idx = j.at("label_idx").get<std::vector<int>>();
    m.mean = vec_from_json(j.at("mean"));
    m.stdev = vec_from_json(j.at("stdev"));
    m.k = j.at("k").get<int>();
    return m;
  }
  if (kind == "lda") {
    LdaSubModel m;
    m.w = mat_from_json(j.at("w"));
    m.centroids = mat_from_json(j.at("centroids"));
    m.label_idx = j.at("label_idx").get<std::vector<int>>();
    return m;
  }
  if (kind == "nn") {
    NnSubModel m;
    for (const auto& w : j.at("weights")) m.weights.push_back(mat_from_json(w));
    for (const auto& b : j.at("biases")) m.biases.push_back(vec_from_json(b));
    m.mean = vec_from_json(j.at("mean"));
    m.stdev = vec_from_json(j.at("stdev"));
    return m;
  }
  throw Error(Err::MalformedInput, "unknown sub-model kind " + kind);
}

MorphologyClass morphology_from_key(const std::string& key) {
  if (key == "M1") return MorphologyClass::M1;
  if (key == "M2") return MorphologyClass::M2;
  if (key == "M3") return MorphologyClass::M3;
  throw Error(Err::UnknownMorphology, "bad morphology key " + key);
}

}  // namespace

std::vector<int> nn_hidden_sizes(MorphologyClass m) {
  switch (m) {
    case MorphologyClass::M1: return {128, 64, 32};
    case MorphologyClass::M2: return {170, 85, 42};
    case MorphologyClass::M3: return {128, 64, 32};
    case MorphologyClass::Discard: break;
  }
  throw Error(Err::UnknownMorphology, "no architecture for discarded periods");
}

IdentModel train_knn(const std::vector<FeatureVector>& train, int k) {
  if (train.empty()) throw Error(Err::InsufficientData, "empty training set");
  if (k < 1) throw Error(Err::MalformedInput, "k must be positive");
  IdentModel model;
  model.labels = collect_labels(train);
  require_two_classes(model.labels);
  for (auto& [m, g] : group_by_morphology(train, model.labels)) {
    if (g.x.rows() < k)
      throw Error(Err::InsufficientData,
                  "fewer than k samples for morphology " + to_string(m));
    KnnSubModel sub;
    const Standardization stats = fit_standardization(g.x);
    sub.train = apply_standardization(g.x, stats);
    sub.label_idx = g.label_idx;
    sub.mean = stats.mean;
    sub.stdev = stats.stdev;
    sub.k = k;
    model.submodels.emplace(m, std::move(sub));
  }
  return model;
}

IdentModel train_lda(const std::vector<FeatureVector>& train) {
  if (train.empty()) throw Error(Err::InsufficientData, "empty training set");
  IdentModel model;
  model.labels = collect_labels(train);
  require_two_classes(model.labels);
  for (auto& [m, g] : group_by_morphology(train, model.labels))
    model.submodels.emplace(m, fit_lda_group(g));
  return model;
}

IdentModel train_nn(const std::vector<FeatureVector>& train, const NnOptions& opts) {
  if (train.empty()) throw Error(Err::InsufficientData, "empty training set");
  IdentModel model;
  model.labels = collect_labels(train);
  require_two_classes(model.labels);
  std::uint64_t stream = 0;
  for (auto& [m, g] : group_by_morphology(train, model.labels))
    model.submodels.emplace(
        m, fit_nn_group(g, m, static_cast<int>(model.labels.size()), opts, ++stream));
  return model;
}

IdentResult identify(const IdentModel& model, const FeatureVector& fv) {
  const auto it = model.submodels.find(fv.morphology);
  if (fv.morphology == MorphologyClass::Discard || it == model.submodels.end())
    throw Error(Err::UnknownMorphology,
                "no sub-model for morphology " + to_string(fv.morphology));

  IdentResult res;
  int idx = -1;
  if (const auto* knn = std::get_if<KnnSubModel>(&it->second)) {
    idx = knn_predict(*knn, fv.values, res.score);
  } else if (const auto* lda = std::get_if<LdaSubModel>(&it->second)) {
    idx = lda_predict(*lda, fv.values, res.score);
  } else {
    idx = nn_predict(std::get<NnSubModel>(it->second), fv.values, res.score);
  }
  res.label = model.labels[static_cast<std::size_t>(idx)];
  return res;
}

json IdentModel::to_json() const {
  json subs;
  for (const auto& [m, sub] : submodels) subs[to_string(m)] = submodel_to_json(sub);
  return {{"format", "cardioid-ident"},
          {"version", 1},
          {"labels", labels},
          {"submodels", std::move(subs)}};
}

IdentModel IdentModel::from_json(const json& j) {
  if (j.value("format", "") != "cardioid-ident" || j.value("version", 0) != 1)
    throw Error(Err::MalformedInput, "not a version-1 identification model");
  IdentModel model;
  model.labels = j.at("labels").get<std::vector<std::string>>();
  for (const auto& [key, sub] : j.at("submodels").items())
    model.submodels.emplace(morphology_from_key(key), submodel_from_json(sub));
  return model;
}

void IdentModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Err::MalformedInput, "cannot write " + path);
  out << to_json().dump(2) << "\n";
}

IdentModel IdentModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::MalformedInput, "cannot open " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Err::MalformedInput, "invalid JSON in " + path);
  return from_json(j);
}

namespace nn {

AutoencoderGrad autoencoder_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& enc_w,
                                 const Eigen::VectorXd& enc_b, const Eigen::MatrixXd& dec_w,
                                 const Eigen::VectorXd& dec_b, double l2, double rho,
                                 double beta) {
  const auto n = static_cast<double>(x.rows());

  const Eigen::MatrixXd a = sigmoid((x * enc_w.transpose()).rowwise() + enc_b.transpose());
  const Eigen::MatrixXd xhat = (a * dec_w.transpose()).rowwise() + dec_b.transpose();
  const Eigen::MatrixXd resid = xhat - x;

  AutoencoderGrad g;
  g.loss = 0.5 / n * resid.squaredNorm() +
           0.5 * l2 * (enc_w.squaredNorm() + dec_w.squaredNorm());

  Eigen::VectorXd rho_hat = a.colwise().mean();
  Eigen::VectorXd sparse_term = Eigen::VectorXd::Zero(a.cols());
  if (beta > 0.0) {
    for (Eigen::Index j = 0; j < rho_hat.size(); ++j) {
      const double r = std::clamp(rho_hat[j], 1e-12, 1.0 - 1e-12);
      g.loss += beta * (rho * std::log(rho / r) +
                        (1.0 - rho) * std::log((1.0 - rho) / (1.0 - r)));
      sparse_term[j] = beta * (-rho / r + (1.0 - rho) / (1.0 - r));
    }
  }

  const Eigen::MatrixXd d_xhat = resid / n;
  g.d_dec_w = d_xhat.transpose() * a + l2 * dec_w;
  g.d_dec_b = d_xhat.colwise().sum();

  Eigen::MatrixXd d_a = d_xhat * dec_w;
  d_a.rowwise() += (sparse_term / n).transpose();
  const Eigen::MatrixXd d_z = d_a.array() * a.array() * (1.0 - a.array());
  g.d_enc_w = d_z.transpose() * x + l2 * enc_w;
  g.d_enc_b = d_z.colwise().sum();
  return g;
}

Eigen::MatrixXd network_forward(const Eigen::MatrixXd& x,
                                const std::vector<Eigen::MatrixXd>& w,
                                const std::vector<Eigen::VectorXd>& b) {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < w.size(); ++l)
    a = sigmoid((a * w[l].transpose()).rowwise() + b[l].transpose());
  Eigen::MatrixXd z = (a * w.back().transpose()).rowwise() + b.back().transpose();
  z.colwise() -= z.rowwise().maxCoeff();
  Eigen::MatrixXd p = z.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

NetworkGrad network_grad(const Eigen::MatrixXd& x, const std::vector<int>& y,
                         const std::vector<Eigen::MatrixXd>& w,
                         const std::vector<Eigen::VectorXd>& b, double l2) {
  const auto layers = w.size();
  const auto n = x.rows();

  std::vector<Eigen::MatrixXd> acts;  // activation entering each layer
  acts.reserve(layers);
  acts.push_back(x);
  for (std::size_t l = 0; l + 1 < layers; ++l)
    acts.push_back(sigmoid((acts.back() * w[l].transpose()).rowwise() + b[l].transpose()));

  Eigen::MatrixXd z = (acts.back() * w.back().transpose()).rowwise() + b.back().transpose();
  z.colwise() -= z.rowwise().maxCoeff();
  const Eigen::VectorXd log_norm = z.array().exp().rowwise().sum().log();
  Eigen::MatrixXd p = (z.colwise() - log_norm).array().exp();

  NetworkGrad g;
  g.loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    g.loss -= z(i, y[static_cast<std::size_t>(i)]) - log_norm[i];
  g.loss /= static_cast<double>(n);
  for (const auto& wl : w) g.loss += 0.5 * l2 * wl.squaredNorm();

  Eigen::MatrixXd dz = p;
  for (Eigen::Index i = 0; i < n; ++i) dz(i, y[static_cast<std::size_t>(i)]) -= 1.0;
  dz /= static_cast<double>(n);

  g.d_w.resize(layers);
  g.d_b.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    g.d_w[l] = dz.transpose() * acts[l] + l2 * w[l];
    g.d_b[l] = dz.colwise().sum();
    if (l > 0) {
      const Eigen::MatrixXd da = dz * w[l];
      dz = da.array() * acts[l].array() * (1.0 - acts[l].array());
    }
  }
  return g;
}

}  // namespace nn

}  // namespace cardioid
