#include "ftdc/features.hpp"

#include <algorithm>
#include <cmath>

#include "ftdc/errors.hpp"

namespace ftdc {

ConnectivityMatrix connectivity(const Eigen::VectorXd& region_means, double bandwidth_mm) {
    if (!(bandwidth_mm > 0.0) || !std::isfinite(bandwidth_mm)) throw UsageError("connectivity: bandwidth must be positive");
    if (region_means.size() < 2) throw DataError("connectivity: need at least two regions");
    const auto r = region_means.size();
    ConnectivityMatrix c;
    c.bandwidth_mm = bandwidth_mm;
    c.weights = Eigen::MatrixXd::Ones(r, r);
    const double denom = 2.0 * bandwidth_mm * bandwidth_mm;
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = i + 1; j < r; ++j) {
            const double d = region_means[i] - region_means[j];
            const double w = std::exp(-d * d / denom);
            c.weights(i, j) = w;
            c.weights(j, i) = w;
        }
    }
    return c;
}

Eigen::VectorXd vectorize_connectivity(const ConnectivityMatrix& c) {
    const auto r = c.weights.rows();
    Eigen::VectorXd out(r * (r - 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = i + 1; j < r; ++j) out[k++] = c.weights(i, j);
    return out;
}

ConnectivityMatrix devectorize_connectivity(const Eigen::VectorXd& upper, double bandwidth_mm) {
    // Solve r(r-1)/2 = m for r.
    const auto m = upper.size();
    const auto r = static_cast<Eigen::Index>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(m))) / 2.0));
    if (r * (r - 1) / 2 != m) throw DataError("devectorize: length is not a triangular number");
    ConnectivityMatrix c;
    c.bandwidth_mm = bandwidth_mm;
    c.weights = Eigen::MatrixXd::Ones(r, r);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = i + 1; j < r; ++j) c.weights(i, j) = c.weights(j, i) = upper[k++];
    return c;
}

double median_bandwidth(const Eigen::MatrixXd& region_means) {
    std::vector<double> d;
    for (Eigen::Index s = 0; s < region_means.rows(); ++s)
        for (Eigen::Index i = 0; i < region_means.cols(); ++i)
            for (Eigen::Index j = i + 1; j < region_means.cols(); ++j) {
                const double v = std::abs(region_means(s, i) - region_means(s, j));
                if (v > 0.0) d.push_back(v);
            }
    if (d.empty()) return 1.0;
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    if (d.size() % 2) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(d.begin(), mid);
    return 0.5 * (upper + lower);
}

std::string describe(const PcaPolicy& policy) {
    if (auto* f = std::get_if<VarianceFraction>(&policy)) return "variance:" + std::to_string(f->fraction);
    if (auto* k = std::get_if<FixedComponents>(&policy)) return "fixed:" + std::to_string(k->k);
    return "none";
}

PcaModel PcaModel::identity(std::size_t dim) {
    PcaModel m;
    const auto d = static_cast<Eigen::Index>(dim);
    m.means = Eigen::VectorXd::Zero(d);
    m.directions = Eigen::MatrixXd::Identity(d, d);
    m.eigenvalues = Eigen::VectorXd::Zero(d);
    m.retained = dim;
    return m;
}

PcaModel pca_fit(const Eigen::MatrixXd& x, const PcaPolicy& policy) {
    const auto n = x.rows();
    const auto d = x.cols();
    if (d < 1) throw DataError("pca: no feature columns");
    if (std::holds_alternative<NoReduction>(policy)) return PcaModel::identity(static_cast<std::size_t>(d));
    if (n < 2) throw DataError("pca: need at least two rows");
    if (auto* f = std::get_if<VarianceFraction>(&policy); f && !(f->fraction > 0.0 && f->fraction <= 1.0))
        throw UsageError("pca: variance fraction must lie in (0, 1]");
    if (auto* k = std::get_if<FixedComponents>(&policy); k && k->k < 1) throw UsageError("pca: fixed k must be >= 1");

    PcaModel model;
    model.means = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - model.means.transpose();
    const double scale = 1.0 / static_cast<double>(n - 1);

    Eigen::VectorXd evals;
    Eigen::MatrixXd evecs;  // d x m, descending
    if (d <= n) {
        const Eigen::MatrixXd cov = (centered.transpose() * centered) * scale;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success) throw NumericalError("pca: covariance eigensolver failed");
        evals = eig.eigenvalues().reverse().cwiseMax(0.0);
        evecs = eig.eigenvectors().rowwise().reverse();
    } else {
        // Gram route: C = X^T X s and G = X X^T s share nonzero eigenvalues; v = X^T u / sqrt(lambda (n-1)).
        const Eigen::MatrixXd gram = (centered * centered.transpose()) * scale;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        if (eig.info() != Eigen::Success) throw NumericalError("pca: Gram eigensolver failed");
        evals = eig.eigenvalues().reverse().cwiseMax(0.0);
        const Eigen::MatrixXd u = eig.eigenvectors().rowwise().reverse();
        evecs = Eigen::MatrixXd::Zero(d, n);
        const double top = evals.size() ? evals[0] : 0.0;
        for (Eigen::Index c = 0; c < n; ++c) {
            if (evals[c] <= top * 1e-13) continue;
            evecs.col(c) = centered.transpose() * u.col(c) / std::sqrt(evals[c] * static_cast<double>(n - 1));
        }
    }

    const double total = evals.sum();
    if (!(total > 0.0)) throw NumericalError("pca: zero-variance data");
    const double top = evals[0];
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < evals.size(); ++i)
        if (evals[i] > top * 1e-12) ++rank;

    std::size_t k = 0;
    if (auto* f = std::get_if<VarianceFraction>(&policy)) {
        double cum = 0.0;
        for (Eigen::Index i = 0; i < evals.size(); ++i) {
            cum += evals[i];
            k = static_cast<std::size_t>(i + 1);
            if (cum >= f->fraction * total * (1.0 - 1e-12)) break;
        }
        k = std::min<std::size_t>(k, static_cast<std::size_t>(rank));
    } else {
        k = std::get<FixedComponents>(policy).k;
        if (k > static_cast<std::size_t>(rank)) {
            model.warnings.push_back("pca: requested " + std::to_string(k) + " components, clamped to rank " +
                                     std::to_string(rank));
            k = static_cast<std::size_t>(rank);
        }
    }

    model.retained = k;
    model.eigenvalues = evals;
    model.directions = evecs.leftCols(static_cast<Eigen::Index>(k));
    for (Eigen::Index c = 0; c < model.directions.cols(); ++c) {
        Eigen::Index arg = 0;
        model.directions.col(c).cwiseAbs().maxCoeff(&arg);
        if (model.directions(arg, c) < 0.0) model.directions.col(c) *= -1.0;
    }
    return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.means.size())
        throw DataError("pca transform: width " + std::to_string(x.cols()) + " does not match fitted width " +
                        std::to_string(model.means.size()));
    return (x.rowwise() - model.means.transpose()) * model.directions;
}

Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.means.size())
        throw DataError("pca transform: width " + std::to_string(x.size()) + " does not match fitted width " +
                        std::to_string(model.means.size()));
    return model.directions.transpose() * (x - model.means);
}

FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& x) {
    FeatureMatrix out;
    out.values = pca_transform(model, x.values);
    out.row_ids = x.row_ids;
    for (std::size_t c = 0; c < model.retained; ++c) out.columns.push_back("pc_" + std::to_string(c + 1));
    return out;
}

nlohmann::json PcaModel::to_json() const {
    nlohmann::json j;
    j["means"] = std::vector<double>(means.data(), means.data() + means.size());
    j["eigenvalues"] = std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
    j["k"] = retained;
    nlohmann::json dirs = nlohmann::json::array();
    for (Eigen::Index c = 0; c < directions.cols(); ++c) {
        Eigen::VectorXd col = directions.col(c);
        dirs.push_back(std::vector<double>(col.data(), col.data() + col.size()));
    }
    j["directions"] = dirs;
    return j;
}

PcaModel PcaModel::from_json(const nlohmann::json& j) {
    PcaModel m;
    const auto means = j.at("means").get<std::vector<double>>();
    const auto evals = j.at("eigenvalues").get<std::vector<double>>();
    m.means = Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
    m.eigenvalues = Eigen::Map<const Eigen::VectorXd>(evals.data(), static_cast<Eigen::Index>(evals.size()));
    m.retained = j.at("k").get<std::size_t>();
    const auto& dirs = j.at("directions");
    if (dirs.size() != m.retained) throw DataError("pca json: direction count does not match k");
    m.directions.resize(m.means.size(), static_cast<Eigen::Index>(m.retained));
    for (std::size_t c = 0; c < m.retained; ++c) {
        const auto col = dirs[c].get<std::vector<double>>();
        if (col.size() != means.size()) throw DataError("pca json: direction length mismatch");
        for (std::size_t r = 0; r < col.size(); ++r)
            m.directions(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
    }
    return m;
}

}  // namespace ftdc
