#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ftdc {

// Row-per-subject numeric features. Row order follows the cohort it came from.
struct FeatureMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> columns;
    std::vector<std::string> row_ids;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    // Throws DataError unless rectangular, finite and consistently named.
    void validate() const;

    // New matrix holding the given rows, in the given order.
    FeatureMatrix select_rows(const std::vector<int>& idx) const;
};

}  // namespace ftdc
