#include "ftdc/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "ftdc/errors.hpp"

namespace ftdc {

double fwhm_to_sigma(double fwhm_mm) {
    if (!(fwhm_mm > 0.0) || !std::isfinite(fwhm_mm)) throw UsageError("fwhm must be a positive finite number");
    return fwhm_mm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
}

double HeatParams::diffusion_time() const {
    const double sigma = fwhm_to_sigma(fwhm_mm);
    return 0.5 * sigma * sigma;
}

namespace {

struct Neighbour {
    int vertex;
    double distance;
};

// Vertices within `cutoff` edge-path distance of `source`, excluding it.
void geodesic_ball(const TriMesh& mesh, int source, double cutoff, std::vector<double>& dist,
                   std::vector<int>& touched, std::vector<Neighbour>& out) {
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    out.clear();
    dist[static_cast<std::size_t>(source)] = 0.0;
    touched.push_back(source);
    heap.emplace(0.0, source);
    const auto& verts = mesh.vertices();
    while (!heap.empty()) {
        const auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[static_cast<std::size_t>(v)]) continue;
        if (v != source) out.push_back({v, d});
        for (int w : mesh.adjacency()[static_cast<std::size_t>(v)]) {
            const double nd = d + (verts[static_cast<std::size_t>(v)] - verts[static_cast<std::size_t>(w)]).norm();
            if (nd > cutoff) continue;
            auto& slot = dist[static_cast<std::size_t>(w)];
            if (nd < slot) {
                if (slot == std::numeric_limits<double>::infinity()) touched.push_back(w);
                slot = nd;
                heap.emplace(nd, w);
            }
        }
    }
    for (int t : touched) dist[static_cast<std::size_t>(t)] = std::numeric_limits<double>::infinity();
    touched.clear();
    // Canonical order so sums do not depend on heap tie-breaking.
    std::sort(out.begin(), out.end(), [](const Neighbour& a, const Neighbour& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.vertex < b.vertex);
    });
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ScalarMap susan_smooth(const ScalarMap& values, const TriMesh& mesh, const SusanParams& params) {
    if (static_cast<std::size_t>(values.size()) != mesh.vertex_count())
        throw DataError("susan: map has " + std::to_string(values.size()) + " values for " +
                        std::to_string(mesh.vertex_count()) + " vertices");
    if (!values.allFinite()) throw DataError("susan: non-finite input value");
    const double sigma = fwhm_to_sigma(params.fwhm_mm);
    const double range = values.size() ? values.maxCoeff() - values.minCoeff() : 0.0;
    // Any positive threshold leaves a constant map unchanged.
    const double t = params.brightness_threshold.value_or(range > 0.0 ? 0.1 * range : 1.0);
    if (!(t > 0.0)) throw UsageError("susan: brightness threshold must be positive");
    const double cutoff = params.cutoff_mm.value_or(3.0 * sigma);
    if (!(cutoff > 0.0)) throw UsageError("susan: cutoff radius must be positive");

    const std::size_t n = mesh.vertex_count();
    ScalarMap out(values.size());
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> touched;
    std::vector<Neighbour> ball;
    const double two_sigma2 = 2.0 * sigma * sigma;
    for (std::size_t v0 = 0; v0 < n; ++v0) {
        geodesic_ball(mesh, static_cast<int>(v0), cutoff, dist, touched, ball);
        if (ball.empty()) throw DataError("susan: vertex " + std::to_string(v0) + " has an empty neighbourhood");
        const double i0 = values[static_cast<Eigen::Index>(v0)];
        double num = 0.0;
        double den = 0.0;
        for (const auto& nb : ball) {
            const double iv = values[nb.vertex];
            const double w = std::exp(-nb.distance * nb.distance / two_sigma2) *
                             std::exp(-std::pow(std::abs(iv - i0) / t, params.exponent));
            num += iv * w;
            den += w;
        }
        if (den < 1e-12) {
            std::vector<double> vals;
            vals.reserve(ball.size());
            for (const auto& nb : ball) vals.push_back(values[nb.vertex]);
            out[static_cast<Eigen::Index>(v0)] = median(std::move(vals));
        } else {
            out[static_cast<Eigen::Index>(v0)] = num / den;
        }
    }
    return out;
}

ScalarMap heat_smooth(const ScalarMap& values, const SpectralBasis& basis, const HeatParams& params) {
    const double time = params.diffusion_time();
    const double h = basis.edge_length_mm > 0.0 ? basis.edge_length_mm : 1.0;
    Eigen::VectorXd c = to_frequency(values, basis);
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= std::exp(-basis.eigenvalues[i] * time / (h * h));
    return from_frequency(c, basis);
}

}  // namespace ftdc
