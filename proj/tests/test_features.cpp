#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "ftdc/errors.hpp"
#include "ftdc/features.hpp"

using namespace ftdc;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = n(rng) * (1.0 + j);
    return m;
}

Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

}  // namespace

TEST_CASE("connectivity weights") {
    const auto flat = connectivity(Eigen::Vector3d(2, 2, 2), 1.0);
    CHECK((flat.weights.array() == 1.0).all());
    const auto two = connectivity(Eigen::Vector2d(1, 3), 1.0);
    CHECK(two.weights(0, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(two.weights(0, 1) == doctest::Approx(0.13534).epsilon(1e-4));
    const auto r = connectivity(Eigen::Vector4d(1.5, 2.5, 2.0, 4.0), 0.8);
    for (int i = 0; i < 4; ++i) {
        CHECK(r.weights(i, i) == 1.0);
        for (int j = 0; j < 4; ++j) CHECK(r.weights(i, j) == r.weights(j, i));
    }
    // 0.5 < 1.0 < 1.5 apart from region 1.
    CHECK(r.weights(1, 2) > r.weights(1, 0));
    CHECK(r.weights(1, 0) > r.weights(1, 3));
    CHECK_THROWS_AS(connectivity(Eigen::Vector2d(1, 3), 0.0), UsageError);
    CHECK_THROWS(connectivity(Eigen::VectorXd::Ones(1), 1.0));
}

TEST_CASE("connectivity vectorization") {
    const auto c2 = connectivity(Eigen::Vector2d(1, 3), 1.0);
    const Eigen::VectorXd v2 = vectorize_connectivity(c2);
    CHECK(v2.size() == 1);
    CHECK(v2[0] == c2.weights(0, 1));
    const auto c4 = connectivity(Eigen::Vector4d(1.0, 2.5, 2.0, 4.0), 0.8);
    const Eigen::VectorXd v4 = vectorize_connectivity(c4);
    CHECK(v4.size() == 6);
    CHECK(v4[1] == c4.weights(0, 2));
    CHECK(v4[3] == c4.weights(1, 2));
    CHECK(devectorize_connectivity(v4, 0.8).weights == c4.weights);
    CHECK_THROWS(devectorize_connectivity(Eigen::VectorXd::Ones(4), 1.0));
}

TEST_CASE("median bandwidth") {
    Eigen::MatrixXd m(1, 3);
    m << 1.0, 2.0, 4.0;  // distances 1, 3, 2
    CHECK(median_bandwidth(m) == doctest::Approx(2.0));
}

TEST_CASE("pca of rank-one data") {
    Eigen::MatrixXd x(5, 2);
    for (int i = 0; i < 5; ++i) x.row(i) << i - 1.0, 2.0 * (i - 1.0);
    const PcaModel m = pca_fit(x, VarianceFraction{0.95});
    CHECK(m.retained == 1);
    CHECK(m.directions(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(m.directions(1, 0) == doctest::Approx(2.0 / std::sqrt(5.0)));
}

TEST_CASE("pca errors") {
    CHECK_THROWS_WITH_AS(pca_fit(Eigen::MatrixXd::Ones(4, 3), VarianceFraction{0.95}),
                         doctest::Contains("zero-variance"), NumericalError);
    CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Ones(1, 3), VarianceFraction{0.95}), DataError);
    const Eigen::MatrixXd x = random_matrix(10, 3, 1);
    CHECK_THROWS_AS(pca_fit(x, VarianceFraction{0.0}), UsageError);
    CHECK_THROWS_AS(pca_fit(x, VarianceFraction{1.2}), UsageError);
    const PcaModel clamped = pca_fit(x, FixedComponents{9});
    CHECK(clamped.retained == 3);
    CHECK_FALSE(clamped.warnings.empty());
    CHECK_THROWS(pca_transform(clamped, Eigen::VectorXd(Eigen::VectorXd::Zero(4))));
}

TEST_CASE("pca retained count from a constructed diag(4,1,0) covariance") {
    // Rows +-a e1 +-b e2 on the four sign patterns: covariance diag(4a^2/3, 4b^2/3, 0).
    const double a = std::sqrt(3.0);
    const double b = std::sqrt(3.0) / 2.0;
    Eigen::MatrixXd x(4, 3);
    x << a, b, 0, a, -b, 0, -a, b, 0, -a, -b, 0;
    const Eigen::MatrixXd cov = sample_cov(x);
    CHECK(cov(0, 0) == doctest::Approx(4.0));
    CHECK(cov(1, 1) == doctest::Approx(1.0));
    CHECK(pca_fit(x, VarianceFraction{0.79}).retained == 1);
    CHECK(pca_fit(x, VarianceFraction{0.81}).retained == 2);
}

TEST_CASE("pca transform laws on a random 50x10 fixture") {
    const Eigen::MatrixXd x = random_matrix(50, 10, 7);
    const PcaModel full = pca_fit(x, FixedComponents{10});
    const Eigen::MatrixXd s = pca_transform(full, x);
    CHECK(s.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::MatrixXd cov = sample_cov(s);
    Eigen::MatrixXd off = cov;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() < 1e-8);
    const Eigen::MatrixXd back = (s * full.directions.transpose()).rowwise() + full.means.transpose();
    CHECK((back - x).norm() / x.norm() < 1e-6);
    CHECK(full.eigenvalues.sum() == doctest::Approx(sample_cov(x).trace()).epsilon(1e-9));
    for (Eigen::Index c = 0; c < full.directions.cols(); ++c) {
        Eigen::Index at = 0;
        full.directions.col(c).cwiseAbs().maxCoeff(&at);
        CHECK(full.directions(at, c) >= 0.0);
    }
}

TEST_CASE("pca gram route for wide data agrees with the covariance route") {
    const Eigen::MatrixXd wide = random_matrix(8, 30, 3);
    const PcaModel m = pca_fit(wide, VarianceFraction{1.0});
    CHECK(m.retained <= 7);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sample_cov(wide));
    const Eigen::VectorXd top = es.eigenvalues().reverse().head(7);
    CHECK((m.eigenvalues.head(7) - top).cwiseAbs().maxCoeff() < 1e-8 * top[0]);
    const Eigen::MatrixXd s = pca_transform(m, wide);
    Eigen::MatrixXd off = sample_cov(s);
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pca json and identity") {
    const Eigen::MatrixXd x = random_matrix(20, 4, 9);
    const PcaModel m = pca_fit(x, VarianceFraction{0.9});
    const PcaModel back = PcaModel::from_json(m.to_json());
    CHECK(pca_transform(back, x) == pca_transform(m, x));
    const PcaModel id = PcaModel::identity(4);
    CHECK(pca_transform(id, x) == x);
    CHECK(describe(VarianceFraction{0.95}).find("0.95") != std::string::npos);
}
