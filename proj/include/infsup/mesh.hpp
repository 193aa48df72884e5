#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <utility>
#include <vector>

#include "infsup/errors.hpp"
#include "infsup/geometry.hpp"

namespace infsup {

enum class BoundaryTag : std::uint8_t { dirichlet, neumann };

struct BoundaryEdge {
    int a;
    int b;
    BoundaryTag tag;
};

/// Conforming triangulation. Triangles are counterclockwise; every boundary
/// edge carries exactly one tag.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    int level = 0;

    double signed_area(std::size_t t) const {
        const auto& [i, j, k] = triangles[t];
        const Vec2 e1 = vertices[j] - vertices[i];
        const Vec2 e2 = vertices[k] - vertices[i];
        return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
    }

    double area() const {
        double sum = 0.0;
        for (std::size_t t = 0; t < triangles.size(); ++t) sum += signed_area(t);
        return sum;
    }

    std::size_t count(BoundaryTag tag) const {
        std::size_t n = 0;
        for (const auto& e : boundary_edges) n += e.tag == tag ? 1 : 0;
        return n;
    }

    /// Smallest interior angle over all triangles, in degrees.
    double min_angle_deg() const {
        double smallest = 180.0;
        for (const auto& tri : triangles) {
            for (int c = 0; c < 3; ++c) {
                const Vec2 u = vertices[tri[(c + 1) % 3]] - vertices[tri[c]];
                const Vec2 v = vertices[tri[(c + 2) % 3]] - vertices[tri[c]];
                const double cosine = u.dot(v) / (u.norm() * v.norm());
                smallest = std::min(smallest, std::acos(std::clamp(cosine, -1.0, 1.0)) * 180.0 /
                                                  std::numbers::pi);
            }
        }
        return smallest;
    }
};

/// (nx, ny) with cells no larger than target_h in either direction.
inline std::pair<int, int> anisotropic_resolution(const DomainSpec& spec, double target_h) {
    if (!(target_h > 0.0)) throw InvalidInput("anisotropic_resolution: target_h must be positive");
    // Guard against ceil(4.0000000000000001) style round-up.
    auto cells = [&](double extent) {
        const double ratio = extent / target_h;
        const double nearest = std::round(ratio);
        return static_cast<int>(std::abs(ratio - nearest) < 1e-10 * ratio ? nearest
                                                                           : std::ceil(ratio));
    };
    return {cells(spec.L), cells(spec.H)};
}

/// nx x ny rectangles, each split along its bottom-left to top-right diagonal.
/// Edges on x = L are tagged Neumann, all others Dirichlet.
inline Mesh triangulate_channel(const DomainSpec& spec, int nx, int ny) {
    if (spec.dim != 2) throw InvalidInput("triangulate_channel: only 2D channels are meshed");
    if (nx < 1 || ny < 1) throw InvalidInput("triangulate_channel: nx and ny must be >= 1");
    Mesh mesh;
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    mesh.vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            mesh.vertices.emplace_back(spec.L * i / nx, spec.H * j / ny);
        }
    }
    mesh.triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    // Counterclockwise walk: bottom, outflow, top, left.
    for (int i = 0; i < nx; ++i) mesh.boundary_edges.push_back({id(i, 0), id(i + 1, 0), BoundaryTag::dirichlet});
    for (int j = 0; j < ny; ++j) mesh.boundary_edges.push_back({id(nx, j), id(nx, j + 1), BoundaryTag::neumann});
    for (int i = nx; i > 0; --i) mesh.boundary_edges.push_back({id(i, ny), id(i - 1, ny), BoundaryTag::dirichlet});
    for (int j = ny; j > 0; --j) mesh.boundary_edges.push_back({id(0, j), id(0, j - 1), BoundaryTag::dirichlet});
    return mesh;
}

/// Uniform red refinement: every triangle splits into four congruent children.
inline Mesh refine(const Mesh& mesh) {
    Mesh fine;
    fine.vertices = mesh.vertices;
    fine.level = mesh.level + 1;
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto [it, inserted] = midpoint.try_emplace(key, static_cast<int>(fine.vertices.size()));
        if (inserted) fine.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
        return it->second;
    };
    fine.triangles.reserve(4 * mesh.triangles.size());
    for (const auto& [a, b, c] : mesh.triangles) {
        const int ab = mid(a, b);
        const int bc = mid(b, c);
        const int ca = mid(c, a);
        fine.triangles.push_back({a, ab, ca});
        fine.triangles.push_back({ab, b, bc});
        fine.triangles.push_back({ca, bc, c});
        fine.triangles.push_back({ab, bc, ca});
    }
    fine.boundary_edges.reserve(2 * mesh.boundary_edges.size());
    for (const auto& e : mesh.boundary_edges) {
        const int m = mid(e.a, e.b);
        fine.boundary_edges.push_back({e.a, m, e.tag});
        fine.boundary_edges.push_back({m, e.b, e.tag});
    }
    return fine;
}

inline Mesh refine(const Mesh& mesh, int times) {
    Mesh out = mesh;
    for (int k = 0; k < times; ++k) out = refine(out);
    return out;
}

/// Copy of the mesh with every boundary edge retagged.
inline Mesh retag_boundary(const Mesh& mesh, BoundaryTag tag) {
    Mesh out = mesh;
    for (auto& e : out.boundary_edges) e.tag = tag;
    return out;
}

/// Plain-text dump: "nv nt nbe", then "x y", "i j k" and "i j D|N" lines.
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
    const auto old_precision = os.precision(17);
    os << mesh.vertices.size() << ' ' << mesh.triangles.size() << ' ' << mesh.boundary_edges.size()
       << '\n';
    for (const auto& v : mesh.vertices) os << v.x() << ' ' << v.y() << '\n';
    for (const auto& [i, j, k] : mesh.triangles) os << i << ' ' << j << ' ' << k << '\n';
    for (const auto& e : mesh.boundary_edges) {
        os << e.a << ' ' << e.b << ' ' << (e.tag == BoundaryTag::dirichlet ? 'D' : 'N') << '\n';
    }
    os.precision(old_precision);
}

}  // namespace infsup
