#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ftdc/mesh.hpp"
#include "ftdc/thickness.hpp"

namespace ftdc {

struct SpectralOptions {
    // Meshes with fewer vertices use a dense symmetric eigensolver.
    std::size_t dense_threshold = 2000;
    bool force_iterative = false;
    int max_iterations = 300;
    // Ritz residual tolerance, relative to the Laplacian's spectral bound.
    double tolerance = 1e-10;
};

// The k lowest-frequency eigenpairs of the combinatorial graph Laplacian
// L = D - A of a connected mesh's edge graph. Eigenvalues ascend from 0;
// eigenvectors are orthonormal columns, each signed so that its entry of
// largest magnitude is positive.
struct SpectralBasis {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;  // vertex_count x k
    // Mean edge length of the source mesh in mm (1 for bare graphs). Converts
    // graph eigenvalues to mm^-2 for heat-kernel smoothing.
    double edge_length_mm = 1.0;

    std::size_t vertex_count() const { return static_cast<std::size_t>(eigenvectors.rows()); }
    std::size_t size() const { return static_cast<std::size_t>(eigenvectors.cols()); }
};

SpectralBasis build_basis(const TriMesh& mesh, std::size_t k, const SpectralOptions& options = {});
SpectralBasis build_basis(std::size_t vertex_count, const std::vector<std::array<int, 2>>& edges, std::size_t k,
                          const SpectralOptions& options = {});

// Coefficients c_i = <eigenvector_i, values>.
Eigen::VectorXd to_frequency(const ScalarMap& values, const SpectralBasis& basis);
// Sum of c_i * eigenvector_i over the supplied coefficients (low-pass when fewer than k).
ScalarMap from_frequency(const Eigen::VectorXd& coefficients, const SpectralBasis& basis);

}  // namespace ftdc
