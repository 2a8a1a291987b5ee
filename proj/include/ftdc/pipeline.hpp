#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ftdc/cohort.hpp"
#include "ftdc/mesh.hpp"
#include "ftdc/smoothing.hpp"
#include "ftdc/spectral.hpp"
#include "ftdc/thickness.hpp"

namespace ftdc {

enum class SmootherKind { None, Susan, Heat };
enum class FeatureKind { RegionMeans, Spectral, Connectivity, Concatenated };

std::string to_string(SmootherKind k);
std::string to_string(FeatureKind k);
std::optional<SmootherKind> parse_smoother(const std::string& s);
std::optional<FeatureKind> parse_feature_kind(const std::string& s);

struct ExtractOptions {
    SmootherKind smoother = SmootherKind::Susan;
    double fwhm_mm = 15.0;
    std::optional<double> susan_threshold;
    FeatureKind features = FeatureKind::Concatenated;
    // Spectral coefficients kept per subject (clamped to the vertex count).
    std::size_t components = 280;
    ThicknessMode thickness = ThicknessMode::SymmetricNearest;
    // Low-pass through the spectral basis before smoothing instead of after.
    bool lowpass_first = false;
    // Connectivity kernel bandwidth; median pairwise region distance when unset.
    std::optional<double> sigma_k;
};

// Turns paired surfaces into feature rows. The spectral basis is built once
// from the reference mesh; every subject must share its topology.
class Extractor {
public:
    Extractor(const TriMesh& reference, RegionAtlas atlas, ExtractOptions options);

    const ExtractOptions& options() const { return options_; }
    const RegionAtlas& atlas() const { return atlas_; }
    const SpectralBasis& basis() const { return basis_; }
    std::size_t components() const { return components_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    // Thickness, then the configured smoothing (and low-pass when requested first).
    ScalarMap filtered_map(const SurfacePair& pair) const;
    Eigen::VectorXd spectral_features(const ScalarMap& filtered) const;

    // Feature rows for all subjects, in order. Connectivity bandwidth is shared
    // across subjects.
    FeatureMatrix extract(const std::vector<std::string>& ids, const std::vector<SurfacePair>& pairs) const;

private:
    ExtractOptions options_;
    RegionAtlas atlas_;
    SpectralBasis basis_;
    std::size_t components_ = 0;
    bool need_basis_ = false;
    std::vector<std::string> warnings_;
};

std::filesystem::path inner_mesh_path(const std::filesystem::path& dir, const std::string& id);
std::filesystem::path outer_mesh_path(const std::filesystem::path& dir, const std::string& id);

// Reads `<id>.inner.mesh` / `<id>.outer.mesh` for every subject of `subjects`
// and replaces the cohort's features with the extracted ones.
Cohort extract_cohort(const Cohort& subjects, const std::filesystem::path& mesh_dir, const RegionAtlas& atlas,
                      const ExtractOptions& options, std::vector<std::string>* warnings = nullptr);

// Writes one inner/outer icosphere pair per subject whose vertex thickness is
// the subject's value for the vertex's region (features are read as region
// thicknesses in mm), plus `atlas.csv`. Returns the atlas.
RegionAtlas write_mesh_cohort(const Cohort& cohort, const std::filesystem::path& dir, int subdivisions,
                              double radius_mm = 50.0);

// Maps a spectral-coefficient importance vector back onto the mesh and
// averages it per region.
Eigen::VectorXd back_project_spectral(const Eigen::VectorXd& coefficient_weights, const SpectralBasis& basis,
                                      const RegionAtlas& atlas);

}  // namespace ftdc
