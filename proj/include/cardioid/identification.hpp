#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cardioid/features.hpp"

namespace cardioid {

struct KnnSubModel {
  Eigen::MatrixXd train;  // standardized samples, one per row
  std::vector<int> label_idx;
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;
  int k = 3;
};

struct LdaSubModel {
  Eigen::MatrixXd w;          // d x r projection
  Eigen::MatrixXd centroids;  // one projected class mean per row
  std::vector<int> label_idx;  // row -> label
};

struct NnSubModel {
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out x in)
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;
};

using IdentSubModel = std::variant<KnnSubModel, LdaSubModel, NnSubModel>;

struct IdentModel {
  std::vector<std::string> labels;  // sorted; sub-models index into this
  std::map<MorphologyClass, IdentSubModel> submodels;

  nlohmann::json to_json() const;
  static IdentModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static IdentModel load(const std::string& path);
};

struct IdentResult {
  std::string label;
  double score = 0.0;  // vote fraction / negative centroid distance / softmax max
};

struct NnOptions {
  int epochs = 200;
  int pretrain_epochs = 100;
  double lr = 0.05;
  int batch = 32;
  double l2 = 1e-4;
  double rho = 0.05;   // sparsity target activation
  double beta = 0.1;   // sparsity penalty weight
  std::uint64_t seed = 0;
};

/// Autoencoder stack widths per morphology.
std::vector<int> nn_hidden_sizes(MorphologyClass m);

IdentModel train_knn(const std::vector<FeatureVector>& train, int k = 3);
IdentModel train_lda(const std::vector<FeatureVector>& train);
IdentModel train_nn(const std::vector<FeatureVector>& train, const NnOptions& opts = {});

IdentResult identify(const IdentModel& model, const FeatureVector& fv);

// Loss/gradient internals, exposed so gradients can be checked against
// finite differences.
namespace nn {

struct AutoencoderGrad {
  double loss = 0.0;
  Eigen::MatrixXd d_enc_w, d_dec_w;
  Eigen::VectorXd d_enc_b, d_dec_b;
};

/// Sparse autoencoder batch loss: mean squared reconstruction error with a
/// linear decoder, L2 weight decay, and KL sparsity on mean activations.
AutoencoderGrad autoencoder_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& enc_w,
                                 const Eigen::VectorXd& enc_b, const Eigen::MatrixXd& dec_w,
                                 const Eigen::VectorXd& dec_b, double l2, double rho,
                                 double beta);

struct NetworkGrad {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> d_w;
  std::vector<Eigen::VectorXd> d_b;
};

/// Cross-entropy over the softmax head of a sigmoid stack, plus L2 decay.
NetworkGrad network_grad(const Eigen::MatrixXd& x, const std::vector<int>& y,
                         const std::vector<Eigen::MatrixXd>& w,
                         const std::vector<Eigen::VectorXd>& b, double l2);

/// Row-wise class probabilities.
Eigen::MatrixXd network_forward(const Eigen::MatrixXd& x,
                                const std::vector<Eigen::MatrixXd>& w,
                                const std::vector<Eigen::VectorXd>& b);

}  // namespace nn

}  // namespace cardioid
