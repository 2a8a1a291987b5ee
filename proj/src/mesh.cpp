#include "ftdc/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ftdc/errors.hpp"

namespace ftdc {

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    const int n = static_cast<int>(vertices_.size());
    for (const auto& v : vertices_)
        if (!v.allFinite()) throw DataError("mesh: non-finite vertex coordinate");
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int idx : tri)
            if (idx < 0 || idx >= n)
                throw DataError("mesh: triangle " + std::to_string(t) + " index " + std::to_string(idx) +
                                " out of range");
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw DataError("mesh: degenerate triangle " + std::to_string(t));
    }

    edges_.reserve(triangles_.size() * 3);
    for (const auto& tri : triangles_) {
        for (int e = 0; e < 3; ++e) {
            int a = tri[static_cast<std::size_t>(e)];
            int b = tri[static_cast<std::size_t>((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            edges_.push_back({a, b});
        }
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

    adjacency_.assign(vertices_.size(), {});
    for (const auto& [a, b] : edges_) {
        adjacency_[static_cast<std::size_t>(a)].push_back(b);
        adjacency_[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

bool TriMesh::is_connected() const {
    if (vertices_.empty()) return false;
    std::vector<char> seen(vertices_.size(), 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adjacency_[static_cast<std::size_t>(v)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = 1;
                ++visited;
                stack.push_back(w);
            }
        }
    }
    return visited == vertices_.size();
}

double TriMesh::mean_edge_length() const {
    if (edges_.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [a, b] : edges_)
        sum += (vertices_[static_cast<std::size_t>(a)] - vertices_[static_cast<std::size_t>(b)]).norm();
    return sum / static_cast<double>(edges_.size());
}

TriMesh TriMesh::with_vertices(std::vector<Vec3> vertices) const {
    if (vertices.size() != vertices_.size()) throw DataError("mesh: replacement vertex count differs");
    return TriMesh(std::move(vertices), triangles_);
}

SurfacePair::SurfacePair(TriMesh inner, TriMesh outer) : inner_(std::move(inner)), outer_(std::move(outer)) {
    if (inner_.empty() || outer_.empty()) throw DataError("surface pair: empty mesh");
    if (inner_.vertex_count() != outer_.vertex_count())
        throw DataError("surface pair: vertex counts differ (" + std::to_string(inner_.vertex_count()) + " vs " +
                        std::to_string(outer_.vertex_count()) + ")");
    if (inner_.triangles() != outer_.triangles()) throw DataError("surface pair: triangle topology differs");
}

TriMesh parse_mesh(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    long nv = -1;
    long nt = -1;
    if (!(in >> nv >> nt) || nv < 0 || nt < 0) throw DataError(source + ": bad mesh header");
    std::vector<Vec3> verts(static_cast<std::size_t>(nv));
    for (auto& v : verts)
        if (!(in >> v.x() >> v.y() >> v.z())) throw DataError(source + ": truncated vertex block");
    std::vector<Triangle> tris(static_cast<std::size_t>(nt));
    for (auto& t : tris)
        if (!(in >> t[0] >> t[1] >> t[2])) throw DataError(source + ": truncated triangle block");
    return TriMesh(std::move(verts), std::move(tris));
}

TriMesh read_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mesh file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_mesh(buf.str(), path.string());
}

std::string mesh_to_string(const TriMesh& mesh) {
    std::string out = std::to_string(mesh.vertex_count()) + " " + std::to_string(mesh.triangle_count()) + "\n";
    char buf[128];
    for (const auto& v : mesh.vertices()) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out += buf;
    }
    for (const auto& t : mesh.triangles()) {
        std::snprintf(buf, sizeof buf, "%d %d %d\n", t[0], t[1], t[2]);
        out += buf;
    }
    return out;
}

void write_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write mesh file " + path.string());
    out << mesh_to_string(mesh);
}

std::vector<double> read_scalars(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scalar file " + path.string());
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str()) throw DataError(path.string() + ": non-numeric scalar line");
        values.push_back(v);
    }
    return values;
}

void write_scalars(const std::vector<double>& values, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scalar file " + path.string());
    char buf[40];
    for (double v : values) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
}

TriMesh make_icosphere(int subdivisions, double radius_mm) {
    if (subdivisions < 0) throw UsageError("icosphere: negative subdivision count");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
        {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
    };
    for (auto& v : verts) v.normalize();
    std::vector<Triangle> tris = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1},
    };
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = (verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]).normalized();
            verts.push_back(m);
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Triangle> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris) {
            const int ab = mid(t[0], t[1]);
            const int bc = mid(t[1], t[2]);
            const int ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    for (auto& v : verts) v *= radius_mm;
    return TriMesh(std::move(verts), std::move(tris));
}

TriMesh make_grid(int nx, int ny, double spacing_mm) {
    if (nx < 2 || ny < 2) throw UsageError("grid: need at least 2x2 vertices");
    std::vector<Vec3> verts;
    verts.reserve(static_cast<std::size_t>(nx * ny));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) verts.emplace_back(i * spacing_mm, j * spacing_mm, 0.0);
    std::vector<Triangle> tris;
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const int a = j * nx + i;
            const int b = a + 1;
            const int c = a + nx;
            const int d = c + 1;
            tris.push_back({a, b, d});
            tris.push_back({a, d, c});
        }
    }
    return TriMesh(std::move(verts), std::move(tris));
}

}  // namespace ftdc
