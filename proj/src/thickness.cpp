#include "ftdc/thickness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "ftdc/errors.hpp"

namespace ftdc {

// Closest point by Voronoi-region walk (Ericson, Real-Time Collision Detection).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

TriangleTree::TriangleTree(const TriMesh& mesh) : mesh_(&mesh) {
    const auto& tris = mesh.triangles();
    const auto& v = mesh.vertices();
    order_.resize(tris.size());
    centroids_.resize(tris.size());
    for (std::size_t t = 0; t < tris.size(); ++t) {
        order_[t] = static_cast<int>(t);
        centroids_[t] = (v[static_cast<std::size_t>(tris[t][0])] + v[static_cast<std::size_t>(tris[t][1])] +
                         v[static_cast<std::size_t>(tris[t][2])]) / 3.0;
    }
    if (!tris.empty()) build(0, static_cast<int>(tris.size()), 0);
}

int TriangleTree::build(int first, int count, int depth) {
    const auto& tris = mesh_->triangles();
    const auto& v = mesh_->vertices();
    Node node;
    node.box.setEmpty();
    Eigen::AlignedBox3d centroid_box;
    centroid_box.setEmpty();
    for (int i = first; i < first + count; ++i) {
        const auto& t = tris[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
        for (int k : t) node.box.extend(v[static_cast<std::size_t>(k)]);
        centroid_box.extend(centroids_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
    }
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (count <= 4 || depth > 48) {
        nodes_[static_cast<std::size_t>(index)].first = first;
        nodes_[static_cast<std::size_t>(index)].count = count;
        return index;
    }
    int axis = 0;
    centroid_box.sizes().maxCoeff(&axis);
    const int half = count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + first + half, order_.begin() + first + count,
                     [&](int a, int b) {
                         const double ca = centroids_[static_cast<std::size_t>(a)][axis];
                         const double cb = centroids_[static_cast<std::size_t>(b)][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    const int left = build(first, half, depth + 1);
    const int right = build(first + half, count - half, depth + 1);
    nodes_[static_cast<std::size_t>(index)].left = left;
    nodes_[static_cast<std::size_t>(index)].right = right;
    return index;
}

double TriangleTree::distance(const Vec3& p) const {
    if (nodes_.empty()) throw DataError("nearest-point query on a mesh without triangles");
    const auto& tris = mesh_->triangles();
    const auto& v = mesh_->vertices();
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> stack = {0};
    while (!stack.empty()) {
        const auto& node = nodes_[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (node.box.squaredExteriorDistance(p) >= best) continue;
        if (node.left < 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const auto& t = tris[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
                const Vec3 q = closest_point_on_triangle(p, v[static_cast<std::size_t>(t[0])],
                                                         v[static_cast<std::size_t>(t[1])],
                                                         v[static_cast<std::size_t>(t[2])]);
                best = std::min(best, (q - p).squaredNorm());
            }
            continue;
        }
        // Visit the nearer child first.
        const double dl = nodes_[static_cast<std::size_t>(node.left)].box.squaredExteriorDistance(p);
        const double dr = nodes_[static_cast<std::size_t>(node.right)].box.squaredExteriorDistance(p);
        if (dl < dr) {
            stack.push_back(node.right);
            stack.push_back(node.left);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return std::sqrt(best);
}

ScalarMap compute_thickness(const SurfacePair& pair, ThicknessMode mode) {
    const auto& inner = pair.inner();
    const auto& outer = pair.outer();
    const auto n = inner.vertex_count();
    ScalarMap t(static_cast<Eigen::Index>(n));
    if (mode == ThicknessMode::LinkedVertex) {
        for (std::size_t i = 0; i < n; ++i) t[static_cast<Eigen::Index>(i)] = (inner.vertices()[i] - outer.vertices()[i]).norm();
        return t;
    }
    const TriangleTree to_outer(outer);
    const TriangleTree to_inner(inner);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = to_outer.distance(inner.vertices()[i]);
        const double b = to_inner.distance(outer.vertices()[i]);
        t[static_cast<Eigen::Index>(i)] = 0.5 * (a + b);
    }
    return t;
}

RegionAtlas::RegionAtlas(std::vector<int> vertex_region, std::vector<std::string> region_names)
    : vertex_region_(std::move(vertex_region)), region_names_(std::move(region_names)) {
    const int r = static_cast<int>(region_names_.size());
    if (r == 0) throw DataError("atlas: no regions");
    std::vector<int> members(region_names_.size(), 0);
    for (std::size_t v = 0; v < vertex_region_.size(); ++v) {
        const int id = vertex_region_[v];
        if (id < 0 || id >= r) throw DataError("atlas: vertex " + std::to_string(v) + " has unknown region " + std::to_string(id));
        ++members[static_cast<std::size_t>(id)];
    }
    for (int id = 0; id < r; ++id)
        if (members[static_cast<std::size_t>(id)] == 0)
            throw DataError("atlas: region " + std::to_string(id) + " ('" + region_names_[static_cast<std::size_t>(id)] +
                            "') has zero vertices");
}

RegionAtlas parse_atlas(const std::string& text, std::size_t vertex_count, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::vector<int> vertex_region(vertex_count, -1);
    std::vector<std::string> names;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream cells(line);
        std::string vcell, rcell, name;
        std::getline(cells, vcell, ',');
        std::getline(cells, rcell, ',');
        std::getline(cells, name);
        if (line_no == 1 && vcell == "vertex_id") continue;
        char* end = nullptr;
        const long vid = std::strtol(vcell.c_str(), &end, 10);
        if (vcell.empty() || *end != '\0') throw DataError(source + ": bad vertex id at line " + std::to_string(line_no));
        const long rid = std::strtol(rcell.c_str(), &end, 10);
        if (rcell.empty() || *end != '\0' || rid < 0)
            throw DataError(source + ": bad region id at line " + std::to_string(line_no));
        if (vid < 0 || static_cast<std::size_t>(vid) >= vertex_count)
            throw DataError(source + ": atlas references missing vertex " + std::to_string(vid));
        if (vertex_region[static_cast<std::size_t>(vid)] >= 0)
            throw DataError(source + ": vertex " + std::to_string(vid) + " assigned twice");
        vertex_region[static_cast<std::size_t>(vid)] = static_cast<int>(rid);
        if (static_cast<std::size_t>(rid) >= names.size()) names.resize(static_cast<std::size_t>(rid) + 1);
        auto& slot = names[static_cast<std::size_t>(rid)];
        if (slot.empty()) {
            slot = name.empty() ? "region_" + std::to_string(rid) : name;
        } else if (!name.empty() && slot != name) {
            throw DataError(source + ": region " + std::to_string(rid) + " has two names");
        }
    }
    for (std::size_t v = 0; v < vertex_count; ++v)
        if (vertex_region[v] < 0) throw DataError(source + ": atlas does not cover vertex " + std::to_string(v));
    for (std::size_t r = 0; r < names.size(); ++r)
        if (names[r].empty()) names[r] = "region_" + std::to_string(r);  // validated below as empty region
    return RegionAtlas(std::move(vertex_region), std::move(names));
}

RegionAtlas read_atlas(const std::filesystem::path& path, std::size_t vertex_count) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open atlas " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_atlas(buf.str(), vertex_count, path.string());
}

void write_atlas(const RegionAtlas& atlas, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write atlas " + path.string());
    out << "vertex_id,region_id,region_name\n";
    for (std::size_t v = 0; v < atlas.vertex_count(); ++v) {
        const int r = atlas.region_of(v);
        out << v << ',' << r << ',' << atlas.region_names()[static_cast<std::size_t>(r)] << '\n';
    }
}

RegionAtlas make_sphere_atlas(const TriMesh& mesh, int regions, const std::vector<std::string>& names) {
    if (regions <= 0) throw UsageError("atlas: region count must be positive");
    if (!names.empty() && names.size() != static_cast<std::size_t>(regions))
        throw UsageError("atlas: name count must equal region count");
    Vec3 centre = Vec3::Zero();
    for (const auto& v : mesh.vertices()) centre += v;
    centre /= static_cast<double>(std::max<std::size_t>(mesh.vertex_count(), 1));

    std::vector<Vec3> seeds;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < regions; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / regions;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        seeds.emplace_back(r * std::cos(golden * i), y, r * std::sin(golden * i));
    }
    std::vector<int> assign(mesh.vertex_count());
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        const Vec3 dir = (mesh.vertices()[v] - centre).normalized();
        int best = 0;
        double best_dot = -2.0;
        for (int s = 0; s < regions; ++s) {
            const double d = dir.dot(seeds[static_cast<std::size_t>(s)]);
            if (d > best_dot) {
                best_dot = d;
                best = s;
            }
        }
        assign[v] = best;
    }
    std::vector<std::string> region_names = names;
    if (region_names.empty())
        for (int r = 0; r < regions; ++r) region_names.push_back("region_" + std::to_string(r));
    return RegionAtlas(std::move(assign), std::move(region_names));
}

Eigen::VectorXd region_means(const ScalarMap& values, const RegionAtlas& atlas) {
    if (static_cast<std::size_t>(values.size()) != atlas.vertex_count())
        throw DataError("region means: map has " + std::to_string(values.size()) + " vertices, atlas covers " +
                        std::to_string(atlas.vertex_count()));
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(atlas.region_count()));
    Eigen::VectorXd count = Eigen::VectorXd::Zero(sum.size());
    for (std::size_t v = 0; v < atlas.vertex_count(); ++v) {
        sum[atlas.region_of(v)] += values[static_cast<Eigen::Index>(v)];
        count[atlas.region_of(v)] += 1.0;
    }
    return sum.cwiseQuotient(count);
}

}  // namespace ftdc
