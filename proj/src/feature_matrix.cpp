#include "ftdc/feature_matrix.hpp"

#include "ftdc/errors.hpp"

namespace ftdc {

void FeatureMatrix::validate() const {
    if (static_cast<Eigen::Index>(columns.size()) != values.cols())
        throw DataError("feature matrix: " + std::to_string(columns.size()) + " column names for " +
                        std::to_string(values.cols()) + " columns");
    if (!row_ids.empty() && static_cast<Eigen::Index>(row_ids.size()) != values.rows())
        throw DataError("feature matrix: row id count does not match row count");
    if (!values.allFinite()) throw DataError("feature matrix: non-finite value");
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<int>& idx) const {
    FeatureMatrix out;
    out.columns = columns;
    out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.values.row(static_cast<Eigen::Index>(r)) = values.row(idx[r]);
        if (!row_ids.empty()) out.row_ids.push_back(row_ids[static_cast<std::size_t>(idx[r])]);
    }
    return out;
}

}  // namespace ftdc
