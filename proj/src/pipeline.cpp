#include "ftdc/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "ftdc/errors.hpp"
#include "ftdc/features.hpp"

namespace ftdc {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool uses_spectral_features(FeatureKind k) { return k == FeatureKind::Spectral || k == FeatureKind::Concatenated; }

}  // namespace

std::string to_string(SmootherKind k) {
    switch (k) {
        case SmootherKind::None: return "none";
        case SmootherKind::Susan: return "susan";
        case SmootherKind::Heat: return "heat";
    }
    return "?";
}

std::string to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::RegionMeans: return "region_means";
        case FeatureKind::Spectral: return "spectral";
        case FeatureKind::Connectivity: return "connectivity";
        case FeatureKind::Concatenated: return "concatenated";
    }
    return "?";
}

std::optional<SmootherKind> parse_smoother(const std::string& s) {
    const auto l = lower(s);
    if (l == "none") return SmootherKind::None;
    if (l == "susan") return SmootherKind::Susan;
    if (l == "heat") return SmootherKind::Heat;
    return std::nullopt;
}

std::optional<FeatureKind> parse_feature_kind(const std::string& s) {
    const auto l = lower(s);
    if (l == "region_means" || l == "regions") return FeatureKind::RegionMeans;
    if (l == "spectral") return FeatureKind::Spectral;
    if (l == "connectivity") return FeatureKind::Connectivity;
    if (l == "concatenated" || l == "both") return FeatureKind::Concatenated;
    return std::nullopt;
}

Extractor::Extractor(const TriMesh& reference, RegionAtlas atlas, ExtractOptions options)
    : options_(std::move(options)), atlas_(std::move(atlas)) {
    const std::size_t nv = reference.vertex_count();
    if (atlas_.vertex_count() != nv)
        throw DataError("atlas covers " + std::to_string(atlas_.vertex_count()) + " vertices but the mesh has " +
                        std::to_string(nv));
    if (!(options_.fwhm_mm > 0.0)) throw UsageError("fwhm must be positive");
    if (options_.susan_threshold && !(*options_.susan_threshold > 0.0))
        throw UsageError("SUSAN brightness threshold must be positive");
    if (options_.sigma_k && !(*options_.sigma_k > 0.0)) throw UsageError("connectivity bandwidth must be positive");
    need_basis_ = uses_spectral_features(options_.features) || options_.smoother == SmootherKind::Heat ||
                  options_.lowpass_first;
    if (!need_basis_) return;
    if (options_.components == 0) throw UsageError("spectral component count must be positive");
    components_ = options_.components;
    if (components_ > nv) {
        warnings_.push_back("spectral components clamped from " + std::to_string(components_) + " to the " +
                            std::to_string(nv) + " mesh vertices");
        components_ = nv;
    }
    const SpectralOptions so;
    basis_ = build_basis(reference, nv < so.dense_threshold ? nv : components_, so);
}

ScalarMap Extractor::filtered_map(const SurfacePair& pair) const {
    ScalarMap map = compute_thickness(pair, options_.thickness);
    if (options_.lowpass_first) map = from_frequency(to_frequency(map, basis_).head(static_cast<Eigen::Index>(components_)), basis_);
    switch (options_.smoother) {
        case SmootherKind::None: break;
        case SmootherKind::Susan: {
            SusanParams p;
            p.fwhm_mm = options_.fwhm_mm;
            p.brightness_threshold = options_.susan_threshold;
            map = susan_smooth(map, pair.inner(), p);
            break;
        }
        case SmootherKind::Heat: map = heat_smooth(map, basis_, HeatParams{options_.fwhm_mm}); break;
    }
    return map;
}

Eigen::VectorXd Extractor::spectral_features(const ScalarMap& filtered) const {
    return to_frequency(filtered, basis_).head(static_cast<Eigen::Index>(components_));
}

FeatureMatrix Extractor::extract(const std::vector<std::string>& ids, const std::vector<SurfacePair>& pairs) const {
    if (ids.size() != pairs.size()) throw DataError("extract: id/surface count mismatch");
    if (pairs.empty()) throw DataError("extract: no subjects");
    const std::size_t regions = atlas_.region_count();
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::VectorXd> spectral;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].inner().vertex_count() != atlas_.vertex_count())
            throw DataError("subject '" + ids[i] + "': mesh has " + std::to_string(pairs[i].inner().vertex_count()) +
                            " vertices but the atlas covers " + std::to_string(atlas_.vertex_count()));
        const ScalarMap map = filtered_map(pairs[i]);
        means.push_back(region_means(map, atlas_));
        if (uses_spectral_features(options_.features)) spectral.push_back(spectral_features(map));
    }

    FeatureMatrix fm;
    fm.row_ids = ids;
    std::vector<Eigen::VectorXd> blocks(pairs.size());
    auto append = [&](const std::vector<Eigen::VectorXd>& rows) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Eigen::VectorXd joined(blocks[i].size() + rows[i].size());
            joined << blocks[i], rows[i];
            blocks[i] = std::move(joined);
        }
    };
    const auto& names = atlas_.region_names();
    if (options_.features == FeatureKind::RegionMeans || options_.features == FeatureKind::Concatenated) {
        append(means);
        fm.columns.insert(fm.columns.end(), names.begin(), names.end());
    }
    if (uses_spectral_features(options_.features)) {
        append(spectral);
        for (std::size_t c = 0; c < components_; ++c) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "spec_%03zu", c);
            fm.columns.emplace_back(buf);
        }
    }
    if (options_.features == FeatureKind::Connectivity) {
        if (regions < 2) throw DataError("connectivity features need at least two regions");
        Eigen::MatrixXd all(static_cast<Eigen::Index>(means.size()), static_cast<Eigen::Index>(regions));
        for (std::size_t i = 0; i < means.size(); ++i) all.row(static_cast<Eigen::Index>(i)) = means[i].transpose();
        const double sigma = options_.sigma_k ? *options_.sigma_k : median_bandwidth(all);
        std::vector<Eigen::VectorXd> conn;
        for (const auto& m : means) conn.push_back(vectorize_connectivity(connectivity(m, sigma)));
        append(conn);
        for (std::size_t a = 0; a < regions; ++a)
            for (std::size_t b = a + 1; b < regions; ++b) fm.columns.push_back("conn_" + names[a] + "_" + names[b]);
    }
    fm.values.resize(static_cast<Eigen::Index>(pairs.size()), blocks.front().size());
    for (std::size_t i = 0; i < blocks.size(); ++i) fm.values.row(static_cast<Eigen::Index>(i)) = blocks[i].transpose();
    fm.validate();
    return fm;
}

std::filesystem::path inner_mesh_path(const std::filesystem::path& dir, const std::string& id) {
    return dir / (id + ".inner.mesh");
}

std::filesystem::path outer_mesh_path(const std::filesystem::path& dir, const std::string& id) {
    return dir / (id + ".outer.mesh");
}

Cohort extract_cohort(const Cohort& subjects, const std::filesystem::path& mesh_dir, const RegionAtlas& atlas,
                      const ExtractOptions& options, std::vector<std::string>* warnings) {
    std::vector<std::string> ids;
    std::vector<SurfacePair> pairs;
    for (const auto& s : subjects.subjects()) {
        const auto in = inner_mesh_path(mesh_dir, s.id);
        const auto out = outer_mesh_path(mesh_dir, s.id);
        if (!std::filesystem::exists(in) || !std::filesystem::exists(out))
            throw DataError("subject '" + s.id + "': missing surface pair " + in.string() + " / " + out.string());
        SurfacePair pair(read_mesh(in), read_mesh(out));
        if (!pairs.empty() && pair.inner().triangles() != pairs.front().inner().triangles())
            throw DataError("subject '" + s.id + "': mesh topology differs from subject '" + ids.front() + "'");
        ids.push_back(s.id);
        pairs.push_back(std::move(pair));
    }
    if (pairs.empty()) throw DataError("extract: subject list is empty");
    Extractor ex(pairs.front().inner(), atlas, options);
    if (warnings) warnings->insert(warnings->end(), ex.warnings().begin(), ex.warnings().end());
    return subjects.with_features(ex.extract(ids, pairs));
}

RegionAtlas write_mesh_cohort(const Cohort& cohort, const std::filesystem::path& dir, int subdivisions,
                              double radius_mm) {
    if (cohort.feature_count() == 0) throw DataError("mesh cohort: cohort has no region features");
    const TriMesh inner = make_icosphere(subdivisions, radius_mm);
    const int regions = static_cast<int>(cohort.feature_count());
    if (static_cast<std::size_t>(regions) > inner.vertex_count())
        throw DataError("mesh cohort: " + std::to_string(regions) + " regions exceed the " +
                        std::to_string(inner.vertex_count()) + " vertices of the sphere; raise the subdivision level");
    const RegionAtlas atlas = make_sphere_atlas(inner, regions, cohort.feature_names());
    std::filesystem::create_directories(dir);
    write_atlas(atlas, dir / "atlas.csv");
    for (const auto& s : cohort.subjects()) {
        std::vector<Vec3> outer;
        outer.reserve(inner.vertex_count());
        for (std::size_t v = 0; v < inner.vertex_count(); ++v) {
            const double t = s.features[static_cast<std::size_t>(atlas.region_of(v))];
            if (!(t >= 0.0)) throw DataError("mesh cohort: subject '" + s.id + "' has negative thickness");
            const Vec3& p = inner.vertices()[v];
            outer.push_back(p * ((radius_mm + t) / p.norm()));
        }
        write_mesh(inner, inner_mesh_path(dir, s.id));
        write_mesh(inner.with_vertices(std::move(outer)), outer_mesh_path(dir, s.id));
    }
    return atlas;
}

Eigen::VectorXd back_project_spectral(const Eigen::VectorXd& coefficient_weights, const SpectralBasis& basis,
                                      const RegionAtlas& atlas) {
    if (basis.vertex_count() != atlas.vertex_count()) throw DataError("back-projection: basis/atlas size mismatch");
    return region_means(from_frequency(coefficient_weights, basis), atlas);
}

}  // namespace ftdc
