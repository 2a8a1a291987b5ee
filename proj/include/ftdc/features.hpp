#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "ftdc/feature_matrix.hpp"

namespace ftdc {

// Per-subject region-to-region weights w_ij = exp(-|m_i - m_j|^2 / (2 sigma_k^2)).
struct ConnectivityMatrix {
    Eigen::MatrixXd weights;
    double bandwidth_mm = 1.0;
};

ConnectivityMatrix connectivity(const Eigen::VectorXd& region_means, double bandwidth_mm);
// Strict upper triangle, row-major; length r(r-1)/2.
Eigen::VectorXd vectorize_connectivity(const ConnectivityMatrix& c);
ConnectivityMatrix devectorize_connectivity(const Eigen::VectorXd& upper, double bandwidth_mm);
// Median of the nonzero pairwise |m_i - m_j| over all rows of `region_means`.
double median_bandwidth(const Eigen::MatrixXd& region_means);

struct VarianceFraction {
    double fraction = 0.95;
};
struct FixedComponents {
    std::size_t k = 1;
};
// No reduction at all: scorers see the raw features.
struct NoReduction {};
using PcaPolicy = std::variant<VarianceFraction, FixedComponents, NoReduction>;

std::string describe(const PcaPolicy& policy);

// Fitted projection. `directions` holds the retained principal axes as
// orthonormal columns (d x k); `eigenvalues` lists every explained variance
// the decomposition produced, descending.
struct PcaModel {
    Eigen::VectorXd means;
    Eigen::MatrixXd directions;
    Eigen::VectorXd eigenvalues;
    std::size_t retained = 0;
    std::vector<std::string> warnings;

    std::size_t input_dim() const { return static_cast<std::size_t>(means.size()); }

    nlohmann::json to_json() const;
    static PcaModel from_json(const nlohmann::json& j);
    // Identity-like model for NoReduction: zero mean, identity directions.
    static PcaModel identity(std::size_t dim);
};

// Sample covariance (1/(n-1)) decomposition; uses the n x n Gram route when
// features outnumber rows. Each direction's largest-magnitude entry is >= 0.
PcaModel pca_fit(const Eigen::MatrixXd& x, const PcaPolicy& policy);
inline PcaModel pca_fit(const FeatureMatrix& x, const PcaPolicy& policy) { return pca_fit(x.values, policy); }

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x);
Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& x);
FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& x);

}  // namespace ftdc
