#include "ftdc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "ftdc/errors.hpp"

namespace ftdc {

namespace {

bool graph_connected(std::size_t n, const std::vector<std::array<int, 2>>& edges) {
    std::vector<int> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    std::size_t components = n;
    for (const auto& [a, b] : edges) {
        const int ra = find(a);
        const int rb = find(b);
        if (ra != rb) {
            parent[static_cast<std::size_t>(ra)] = rb;
            --components;
        }
    }
    return components == 1;
}

void fix_signs(Eigen::MatrixXd& vectors) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
            // Strictly larger with a small margin so near-ties resolve to the lowest index.
            const double a = std::abs(vectors(r, c));
            if (a > best * (1.0 + 1e-9)) {
                best = a;
                arg = r;
            }
        }
        if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
    }
}

SpectralBasis dense_basis(std::size_t n, const std::vector<std::array<int, 2>>& edges, std::size_t k) {
    const auto nn = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(nn, nn);
    for (const auto& [a, b] : edges) {
        lap(a, b) -= 1.0;
        lap(b, a) -= 1.0;
        lap(a, a) += 1.0;
        lap(b, b) += 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
    if (eig.info() != Eigen::Success) throw NumericalError("spectral basis: dense eigensolver failed");
    SpectralBasis basis;
    const auto kk = static_cast<Eigen::Index>(k);
    basis.eigenvalues = eig.eigenvalues().head(kk).cwiseMax(0.0);
    basis.eigenvectors = eig.eigenvectors().leftCols(kk);
    return basis;
}

// Shift-inverted subspace iteration with Rayleigh-Ritz extraction.
SpectralBasis iterative_basis(std::size_t n, const std::vector<std::array<int, 2>>& edges, std::size_t k,
                              const SpectralOptions& options) {
    const auto nn = static_cast<Eigen::Index>(n);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(edges.size() * 4);
    Eigen::VectorXd degree = Eigen::VectorXd::Zero(nn);
    for (const auto& [a, b] : edges) {
        trips.emplace_back(a, b, -1.0);
        trips.emplace_back(b, a, -1.0);
        degree[a] += 1.0;
        degree[b] += 1.0;
    }
    for (Eigen::Index i = 0; i < nn; ++i) trips.emplace_back(i, i, degree[i]);
    Eigen::SparseMatrix<double> lap(nn, nn);
    lap.setFromTriplets(trips.begin(), trips.end());

    // Gershgorin bound on the spectrum, used to scale the residual test.
    const double norm_bound = 2.0 * degree.maxCoeff();
    const double shift = 1e-3;
    Eigen::SparseMatrix<double> shifted = lap;
    for (Eigen::Index i = 0; i < nn; ++i) shifted.coeffRef(i, i) += shift;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
    if (solver.info() != Eigen::Success) throw NumericalError("spectral basis: factorization of shifted Laplacian failed");

    const auto kk = static_cast<Eigen::Index>(k);
    const Eigen::Index block = std::min<Eigen::Index>(nn, kk + std::max<Eigen::Index>(kk / 2, 16));
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd x(nn, block);
    for (Eigen::Index c = 0; c < block; ++c)
        for (Eigen::Index r = 0; r < nn; ++r) x(r, c) = unit(rng);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Eigen::MatrixXd y = solver.solve(x);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(nn, block);
        Eigen::MatrixXd lq = lap * q;
        Eigen::MatrixXd h = q.transpose() * lq;
        h = 0.5 * (h + h.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
        if (eig.info() != Eigen::Success) throw NumericalError("spectral basis: Rayleigh-Ritz eigensolver failed");
        x = q * eig.eigenvectors();
        const Eigen::MatrixXd residual = lq * eig.eigenvectors() - x * eig.eigenvalues().asDiagonal();
        double worst = 0.0;
        for (Eigen::Index c = 0; c < kk; ++c) worst = std::max(worst, residual.col(c).norm());
        if (worst <= options.tolerance * norm_bound) {
            SpectralBasis basis;
            basis.eigenvalues = eig.eigenvalues().head(kk).cwiseMax(0.0);
            basis.eigenvectors = x.leftCols(kk);
            return basis;
        }
    }
    throw NumericalError("spectral basis: subspace iteration did not converge in " +
                         std::to_string(options.max_iterations) + " iterations");
}

}  // namespace

SpectralBasis build_basis(std::size_t vertex_count, const std::vector<std::array<int, 2>>& edges, std::size_t k,
                          const SpectralOptions& options) {
    if (vertex_count == 0) throw DataError("spectral basis: empty graph");
    if (k < 1 || k > vertex_count)
        throw UsageError("spectral basis: k=" + std::to_string(k) + " outside 1.." + std::to_string(vertex_count));
    for (const auto& [a, b] : edges)
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= vertex_count || static_cast<std::size_t>(b) >= vertex_count || a == b)
            throw DataError("spectral basis: invalid edge");
    if (!graph_connected(vertex_count, edges)) throw DataError("spectral basis: mesh is disconnected");

    const bool dense = !options.force_iterative && vertex_count < options.dense_threshold;
    SpectralBasis basis = dense ? dense_basis(vertex_count, edges, k) : iterative_basis(vertex_count, edges, k, options);
    fix_signs(basis.eigenvectors);
    return basis;
}

SpectralBasis build_basis(const TriMesh& mesh, std::size_t k, const SpectralOptions& options) {
    auto basis = build_basis(mesh.vertex_count(), mesh.edges(), k, options);
    basis.edge_length_mm = mesh.mean_edge_length();
    return basis;
}

Eigen::VectorXd to_frequency(const ScalarMap& values, const SpectralBasis& basis) {
    if (static_cast<std::size_t>(values.size()) != basis.vertex_count())
        throw DataError("to_frequency: map has " + std::to_string(values.size()) + " values, basis has " +
                        std::to_string(basis.vertex_count()) + " vertices");
    return basis.eigenvectors.transpose() * values;
}

ScalarMap from_frequency(const Eigen::VectorXd& coefficients, const SpectralBasis& basis) {
    if (static_cast<std::size_t>(coefficients.size()) > basis.size())
        throw DataError("from_frequency: " + std::to_string(coefficients.size()) + " coefficients exceed basis size " +
                        std::to_string(basis.size()));
    return basis.eigenvectors.leftCols(coefficients.size()) * coefficients;
}

}  // namespace ftdc
