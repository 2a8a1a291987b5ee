#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ftdc {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<int, 3>;

// Triangle mesh in millimetres. Construction checks index range and rejects
// degenerate (repeated-index) triangles. Connectivity is checked separately
// by the spectral and smoothing operations.
class TriMesh {
public:
    TriMesh() = default;
    TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t triangle_count() const { return triangles_.size(); }
    bool empty() const { return vertices_.empty(); }

    // Unique undirected edges (i < j), sorted.
    const std::vector<std::array<int, 2>>& edges() const { return edges_; }
    // Per-vertex sorted neighbour lists.
    const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }

    bool is_connected() const;
    double mean_edge_length() const;

    // Same topology with new vertex positions.
    TriMesh with_vertices(std::vector<Vec3> vertices) const;

private:
    std::vector<Vec3> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::vector<int>> adjacency_;
};

// Inner (white/grey) and outer (pial) surfaces linked by vertex index.
class SurfacePair {
public:
    SurfacePair(TriMesh inner, TriMesh outer);
    const TriMesh& inner() const { return inner_; }
    const TriMesh& outer() const { return outer_; }
    SurfacePair swapped() const { return SurfacePair(outer_, inner_); }

private:
    TriMesh inner_;
    TriMesh outer_;
};

// ASCII mesh: line 1 "nv nt", then nv lines "x y z", then nt lines "i j k" (0-based).
TriMesh read_mesh(const std::filesystem::path& path);
TriMesh parse_mesh(const std::string& text, const std::string& source = "<memory>");
void write_mesh(const TriMesh& mesh, const std::filesystem::path& path);
std::string mesh_to_string(const TriMesh& mesh);

// One value per line.
std::vector<double> read_scalars(const std::filesystem::path& path);
void write_scalars(const std::vector<double>& values, const std::filesystem::path& path);

// Subdivided icosahedron projected to a sphere: 12, 42, 162, 642, 2562, ... vertices.
TriMesh make_icosphere(int subdivisions, double radius_mm);
// Regular planar grid on z = 0 with nx * ny vertices, spacing in mm, split into right triangles.
TriMesh make_grid(int nx, int ny, double spacing_mm);

}  // namespace ftdc
