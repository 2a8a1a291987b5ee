#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "ftdc/errors.hpp"
#include "ftdc/smoothing.hpp"
#include "ftdc/spectral.hpp"

using namespace ftdc;

namespace {

double rms(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return std::sqrt((a - b).squaredNorm() / a.size()); }

// SUSAN evaluated straight from the weight formula, with all-pairs edge-path
// distances from Floyd-Warshall.
Eigen::VectorXd susan_reference(const Eigen::VectorXd& in, const TriMesh& mesh, double sigma, double t, double cutoff) {
    const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < n; ++i) d(i, i) = 0.0;
    for (const auto& e : mesh.edges())
        d(e[0], e[1]) = d(e[1], e[0]) = (mesh.vertices()[static_cast<std::size_t>(e[0])] -
                                         mesh.vertices()[static_cast<std::size_t>(e[1])]).norm();
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    Eigen::VectorXd out(n);
    for (Eigen::Index v = 0; v < n; ++v) {
        double num = 0.0;
        double den = 0.0;
        for (Eigen::Index u = 0; u < n; ++u) {
            if (u == v || d(v, u) > cutoff) continue;
            const double w = std::exp(-d(v, u) * d(v, u) / (2 * sigma * sigma)) *
                             std::exp(-std::pow(std::abs(in[u] - in[v]) / t, 6.0));
            num += w * in[u];
            den += w;
        }
        out[v] = num / den;
    }
    return out;
}

}  // namespace

TEST_CASE("fwhm to sigma") {
    CHECK(fwhm_to_sigma(15.0) == doctest::Approx(6.3700).epsilon(1e-4));
    CHECK(fwhm_to_sigma(2.35482) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK_THROWS_AS(fwhm_to_sigma(0.0), UsageError);
    CHECK(HeatParams{15.0}.diffusion_time() == doctest::Approx(0.5 * fwhm_to_sigma(15.0) * fwhm_to_sigma(15.0)));
}

TEST_CASE("SUSAN matches the direct weight formula") {
    const TriMesh mesh = make_grid(7, 6, 1.5);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(3.0, 0.4);
    Eigen::VectorXd in(static_cast<Eigen::Index>(mesh.vertex_count()));
    for (auto& x : in) x = n(rng);
    SusanParams p;
    p.fwhm_mm = 5.0;
    p.brightness_threshold = 0.5;
    p.cutoff_mm = 4.0;
    const Eigen::VectorXd got = susan_smooth(in, mesh, p);
    const Eigen::VectorXd want = susan_reference(in, mesh, fwhm_to_sigma(5.0), 0.5, 4.0);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("SUSAN constant map, range and spike") {
    const TriMesh mesh = make_grid(9, 9, 2.0);
    const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
    SusanParams p;
    p.brightness_threshold = 0.3;
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(nv, 2.7);
    CHECK((susan_smooth(c, mesh, p) - c).cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(1.0, 4.0);
    Eigen::VectorXd r(nv);
    for (auto& x : r) x = u(rng);
    const Eigen::VectorXd s = susan_smooth(r, mesh, p);
    CHECK(s.minCoeff() >= r.minCoeff() - 1e-12);
    CHECK(s.maxCoeff() <= r.maxCoeff() + 1e-12);

    Eigen::VectorXd spike = Eigen::VectorXd::Constant(nv, 2.0);
    spike[40] += 10 * 0.3;
    const Eigen::VectorXd out = susan_smooth(spike, mesh, p);
    CHECK(std::abs(out[40] - 2.0) < 0.3);
}

TEST_CASE("SUSAN is permutation equivariant") {
    const TriMesh mesh = make_grid(6, 5, 1.0);
    const auto n = mesh.vertex_count();
    std::vector<int> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>((i * 7 + 3) % n);
    std::vector<Vec3> pv(n);
    for (std::size_t i = 0; i < n; ++i) pv[static_cast<std::size_t>(perm[i])] = mesh.vertices()[i];
    std::vector<Triangle> pt;
    for (const auto& t : mesh.triangles()) pt.push_back({perm[static_cast<std::size_t>(t[0])], perm[static_cast<std::size_t>(t[1])],
                                                          perm[static_cast<std::size_t>(t[2])]});
    const TriMesh permuted(pv, pt);
    Eigen::VectorXd in(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) in[static_cast<Eigen::Index>(i)] = std::sin(0.7 * static_cast<double>(i)) + 2.0;
    Eigen::VectorXd pin(in.size());
    for (std::size_t i = 0; i < n; ++i) pin[perm[i]] = in[static_cast<Eigen::Index>(i)];
    SusanParams p;
    p.fwhm_mm = 3.0;
    const Eigen::VectorXd a = susan_smooth(in, mesh, p);
    const Eigen::VectorXd b = susan_smooth(pin, permuted, p);
    for (std::size_t i = 0; i < n; ++i) CHECK(b[perm[i]] == doctest::Approx(a[static_cast<Eigen::Index>(i)]).epsilon(1e-12));
}

TEST_CASE("SUSAN errors") {
    const TriMesh lonely({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}}, {{0, 1, 2}});
    CHECK_THROWS_AS(susan_smooth(Eigen::VectorXd::Ones(4), lonely, {}), DataError);
    const TriMesh grid = make_grid(3, 3, 1.0);
    Eigen::VectorXd bad = Eigen::VectorXd::Ones(9);
    bad[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(susan_smooth(bad, grid, {}), DataError);
}

TEST_CASE("heat smoothing laws") {
    const TriMesh mesh = make_icosphere(2, 20.0);
    const SpectralBasis b = build_basis(mesh, mesh.vertex_count());
    const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
    const HeatParams hp{8.0};
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(nv, 3.0);
    CHECK((heat_smooth(c, b, hp) - c).cwiseAbs().maxCoeff() < 1e-10);

    const double h = b.edge_length_mm;
    const int j = 7;
    const Eigen::VectorXd ej = b.eigenvectors.col(j);
    const double factor = std::exp(-b.eigenvalues[j] * hp.diffusion_time() / (h * h));
    CHECK((heat_smooth(ej, b, hp) - factor * ej).cwiseAbs().maxCoeff() < 1e-10);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd x(nv), y(nv);
    for (auto& v : x) v = n(rng);
    for (auto& v : y) v = n(rng);
    const Eigen::VectorXd lin = heat_smooth(2.0 * x - 0.5 * y, b, hp);
    CHECK((lin - (2.0 * heat_smooth(x, b, hp) - 0.5 * heat_smooth(y, b, hp))).cwiseAbs().maxCoeff() < 1e-9);

    const Eigen::VectorXd inf = heat_smooth(x, b, HeatParams{1e5});
    CHECK((inf.array() - x.mean()).abs().maxCoeff() < 1e-8);

    CHECK_THROWS_AS(heat_smooth(Eigen::VectorXd::Ones(5), b, hp), DataError);
}

TEST_CASE("two-plateau fixture: SUSAN preserves the step, heat blurs it") {
    const auto f = fixture::two_plateau();
    SusanParams sp;
    sp.fwhm_mm = 15.0;
    sp.brightness_threshold = 0.3;
    const Eigen::VectorXd s = susan_smooth(f.clean, f.mesh, sp);
    CHECK((s - f.clean).cwiseAbs().maxCoeff() < 1e-6);
    const SpectralBasis b = build_basis(f.mesh, f.mesh.vertex_count());
    const Eigen::VectorXd h = heat_smooth(f.clean, b, HeatParams{15.0});
    CHECK(rms(s, f.clean) < rms(h, f.clean));
    CHECK(rms(h, f.clean) > 0.1);
}
