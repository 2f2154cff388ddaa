#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cardioid/features.hpp"

namespace cardioid {

/// PCA basis over standardized features. Standardization is isotropic
/// (mean-centering plus one global scale) so that distances, and therefore
/// accept decisions, are equivariant under rotations of the feature space.
struct PcaBasis {
  Eigen::VectorXd mean;        // feature-space mean
  double scale = 1.0;          // global standard deviation
  Eigen::MatrixXd components;  // d x m, orthonormal columns
  Eigen::VectorXd explained;   // descending variance fractions, length d

  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

struct AuthCluster {
  Eigen::MatrixXd members;  // PCA-space points, one per row (after augmentation)
  Eigen::VectorXd centroid;
  Eigen::MatrixXd cov_reg;  // ridge-regularized covariance (identity for the
                            // Euclidean variant)
  double tau = 0.0;         // accept threshold on the distance
  bool augmented = false;
};

struct AuthProfile {
  struct MorphModel {
    PcaBasis basis;
    std::vector<AuthCluster> clusters;
  };

  std::string subject_id;
  std::map<MorphologyClass, MorphModel> morphologies;

  nlohmann::json to_json() const;
  static AuthProfile from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static AuthProfile load(const std::string& path);
};

struct EnrollOptions {
  bool mahalanobis = true;    // false: identity covariance (plain Euclidean)
  bool multi_cluster = true;  // false: one cluster holding every inlier
  double tau_percentile = 95.0;
  int grid_cells_per_dim = 32;
  double density_threshold = 0.0;  // <= 0: 1.5 x mean nonzero smoothed count
  int min_enroll_periods = 20;
};

struct VerifyResult {
  bool accept = false;
  double distance = 0.0;  // min over clusters of mahalanobis / tau
};

/// Basis over one morphology's feature vectors; keeps the smallest component
/// count explaining >= 95% of variance.
PcaBasis fit_pca(const std::vector<FeatureVector>& train);

/// Grid-quantized density clustering: Haar-smooth the cell counts, keep
/// dense cells, connect them face-wise; returns one id per point, -1 for
/// outliers. Clustering runs on at most the first 3 dimensions.
std::vector<int> wavecluster(const Eigen::MatrixXd& points, int grid_cells_per_dim = 32,
                             double density_threshold = 0.0);

/// Insert spline-interpolated midpoints (ordered along the first principal
/// axis) until the set reaches target_count; originals kept verbatim.
Eigen::MatrixXd augment_cluster(const Eigen::MatrixXd& points, Eigen::Index target_count);

double mahalanobis(const Eigen::VectorXd& x, const AuthCluster& cluster);

AuthProfile enroll(const std::vector<FeatureVector>& train, const std::string& subject_id,
                   const EnrollOptions& opts = {});

/// Total over inputs: unenrolled morphologies reject with infinite distance.
VerifyResult verify(const AuthProfile& profile, const FeatureVector& fv);

}  // namespace cardioid
