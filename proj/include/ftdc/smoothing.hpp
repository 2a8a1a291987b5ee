#pragma once

#include <optional>

#include "ftdc/mesh.hpp"
#include "ftdc/spectral.hpp"
#include "ftdc/thickness.hpp"

namespace ftdc {

// sigma = fwhm / (2 sqrt(2 ln 2)).
double fwhm_to_sigma(double fwhm_mm);

struct SusanParams {
    double fwhm_mm = 15.0;
    // Brightness threshold in the map's units; defaults to 0.1 * (max - min) of the input.
    std::optional<double> brightness_threshold;
    // Geodesic neighbourhood radius; defaults to 3 sigma.
    std::optional<double> cutoff_mm;
    double exponent = 6.0;
};

struct HeatParams {
    double fwhm_mm = 15.0;
    // Diffusion time sigma^2 / 2 in mm^2.
    double diffusion_time() const;
};

// Structure-preserving smoothing on the mesh: each vertex becomes the average of
// its geodesic neighbours (centre excluded) weighted by
//   exp(-d^2 / (2 sigma^2)) * exp(-(|I(v) - I(v0)| / t)^exponent),
// with d the shortest edge-path distance truncated at the cutoff. When every
// neighbour weight underflows the vertex takes the median neighbour value.
ScalarMap susan_smooth(const ScalarMap& values, const TriMesh& mesh, const SusanParams& params);

// Heat-kernel smoothing in the spectral subspace: coefficient i is scaled by
// exp(-lambda_i * t / h^2), t the diffusion time and h the basis' mean edge
// length (graph eigenvalues are per squared edge length).
ScalarMap heat_smooth(const ScalarMap& values, const SpectralBasis& basis, const HeatParams& params);

}  // namespace ftdc
