#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ftdc/mesh.hpp"

namespace ftdc {

// Per-vertex scalar over a mesh (thickness in mm, or any smoothed/filtered field).
using ScalarMap = Eigen::VectorXd;

// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Bounding-volume hierarchy over a mesh's triangles for nearest-surface-point queries.
class TriangleTree {
public:
    explicit TriangleTree(const TriMesh& mesh);
    // Euclidean distance from p to the nearest point on any triangle.
    double distance(const Vec3& p) const;

private:
    struct Node {
        Eigen::AlignedBox3d box;
        int left = -1;
        int right = -1;
        int first = 0;  // into order_ for leaves
        int count = 0;
    };
    int build(int first, int count, int depth);

    const TriMesh* mesh_;
    std::vector<int> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

enum class ThicknessMode {
    // Mean of inner->outer-surface and outer->inner-surface nearest-point distances.
    SymmetricNearest,
    // Straight distance between index-linked vertices.
    LinkedVertex,
};

// Per-vertex thickness of a linked surface pair; all values finite and >= 0.
ScalarMap compute_thickness(const SurfacePair& pair, ThicknessMode mode = ThicknessMode::SymmetricNearest);

// vertex -> region assignment with names. Region ids are 0..R-1.
class RegionAtlas {
public:
    RegionAtlas(std::vector<int> vertex_region, std::vector<std::string> region_names);

    std::size_t vertex_count() const { return vertex_region_.size(); }
    std::size_t region_count() const { return region_names_.size(); }
    int region_of(std::size_t vertex) const { return vertex_region_[vertex]; }
    const std::vector<int>& vertex_regions() const { return vertex_region_; }
    const std::vector<std::string>& region_names() const { return region_names_; }

private:
    std::vector<int> vertex_region_;
    std::vector<std::string> region_names_;
};

// CSV `vertex_id,region_id,region_name` with an optional header line.
// `vertex_count` is the mesh size the atlas must cover exactly.
RegionAtlas read_atlas(const std::filesystem::path& path, std::size_t vertex_count);
RegionAtlas parse_atlas(const std::string& text, std::size_t vertex_count, const std::string& source = "<memory>");
void write_atlas(const RegionAtlas& atlas, const std::filesystem::path& path);

// Nearest-seed partition of a sphere-like mesh into `regions` parcels, seeds on a
// Fibonacci lattice. Throws if any parcel would be empty.
RegionAtlas make_sphere_atlas(const TriMesh& mesh, int regions, const std::vector<std::string>& names = {});

// Per-region mean of `values`, ordered by region id.
Eigen::VectorXd region_means(const ScalarMap& values, const RegionAtlas& atlas);

}  // namespace ftdc
