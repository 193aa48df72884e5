#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <vector>

#include "infsup/errors.hpp"
#include "infsup/geometry.hpp"
#include "infsup/mesh.hpp"

namespace infsup {

/// Compressed sparse rows with sorted, unique column indices once compressed.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

struct QuadraturePoint {
    std::array<double, 3> bary;
    double weight;  // fraction of the triangle area
};

/// Six-point rule, exact for polynomials of degree four on triangles.
inline constexpr std::array<QuadraturePoint, 6> triangle_rule = [] {
    constexpr double a1 = 0.44594849091596488632;
    constexpr double w1 = 0.22338158967801146570;
    constexpr double a2 = 0.091576213509770743460;
    constexpr double w2 = 0.10995174365532186764;
    constexpr double b1 = 1.0 - 2.0 * a1;
    constexpr double b2 = 1.0 - 2.0 * a2;
    return std::array<QuadraturePoint, 6>{{
        {{b1, a1, a1}, w1},
        {{a1, b1, a1}, w1},
        {{a1, a1, b1}, w1},
        {{b2, a2, a2}, w2},
        {{a2, b2, a2}, w2},
        {{a2, a2, b2}, w2},
    }};
}();

/// Affine element data: vertex coordinates, area and barycentric gradients.
struct ElementGeometry {
    std::array<Vec2, 3> p;
    double area;
    std::array<Vec2, 3> grad_bary;

    explicit ElementGeometry(const std::array<Vec2, 3>& pts) : p(pts) {
        const double det = (p[1].x() - p[0].x()) * (p[2].y() - p[0].y()) -
                           (p[2].x() - p[0].x()) * (p[1].y() - p[0].y());
        area = 0.5 * det;
        grad_bary[0] = Vec2(p[1].y() - p[2].y(), p[2].x() - p[1].x()) / det;
        grad_bary[1] = Vec2(p[2].y() - p[0].y(), p[0].x() - p[2].x()) / det;
        grad_bary[2] = Vec2(p[0].y() - p[1].y(), p[1].x() - p[0].x()) / det;
    }

    Vec2 point(const std::array<double, 3>& l) const { return l[0] * p[0] + l[1] * p[1] + l[2] * p[2]; }
};

/// P2 shape functions. Local order: vertices 0,1,2 then edges 01, 12, 20.
inline std::array<double, 6> p2_values(const std::array<double, 3>& l) {
    return {l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1),
            4 * l[0] * l[1],       4 * l[1] * l[2],       4 * l[2] * l[0]};
}

inline std::array<Vec2, 6> p2_gradients(const std::array<double, 3>& l, const ElementGeometry& g) {
    const auto& d = g.grad_bary;
    return {(4 * l[0] - 1) * d[0],
            (4 * l[1] - 1) * d[1],
            (4 * l[2] - 1) * d[2],
            4 * (l[0] * d[1] + l[1] * d[0]),
            4 * (l[1] * d[2] + l[2] * d[1]),
            4 * (l[2] * d[0] + l[0] * d[2])};
}

enum class ConstraintPolicy { from_tags, all_dirichlet };

/// Taylor-Hood P2/P1 degree-of-freedom bookkeeping on a mesh.
///
/// Velocity nodes (vertices and edge midpoints) and pressure nodes (vertices) are
/// numbered lexicographically by coordinates (x first, then y). Each free velocity
/// node owns two consecutive dofs (x then y component); nodes on Dirichlet edges,
/// endpoints included, are eliminated.
struct FESystem {
    Mesh mesh;
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 6>> element_nodes;
    std::vector<bool> constrained;
    std::vector<int> velocity_dof;  // node -> first dof, -1 if constrained
    std::vector<int> pressure_dof;  // mesh vertex -> pressure dof
    int n_u = 0;
    int n_p = 0;

    ElementGeometry geometry(std::size_t t) const {
        const auto& tri = mesh.triangles[t];
        return ElementGeometry({mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]});
    }
};

namespace detail {

inline std::vector<int> lexicographic_order(const std::vector<Vec2>& pts) {
    double scale = 0.0;
    for (const auto& p : pts) scale = std::max(scale, p.cwiseAbs().maxCoeff());
    const double tol = 1e-10 * std::max(scale, 1e-300);
    std::vector<int> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (std::abs(pts[a].x() - pts[b].x()) > tol) return pts[a].x() < pts[b].x();
        return pts[a].y() < pts[b].y();
    });
    return order;
}

}  // namespace detail

inline FESystem build_fesystem(const Mesh& mesh, ConstraintPolicy policy = ConstraintPolicy::from_tags) {
    FESystem fes;
    fes.mesh = mesh;
    const auto nv = static_cast<int>(mesh.vertices.size());

    // Provisional node ids: vertices first, then edge midpoints in first-seen order.
    std::vector<Vec2> raw = mesh.vertices;
    std::map<std::pair<int, int>, int> edge_node;
    auto edge = [&](int a, int b) {
        auto [it, inserted] = edge_node.try_emplace(std::minmax(a, b), static_cast<int>(raw.size()));
        if (inserted) raw.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
        return it->second;
    };
    std::vector<std::array<int, 6>> raw_elements;
    raw_elements.reserve(mesh.triangles.size());
    for (const auto& [a, b, c] : mesh.triangles) {
        raw_elements.push_back({a, b, c, edge(a, b), edge(b, c), edge(c, a)});
    }

    std::vector<bool> raw_constrained(raw.size(), false);
    for (const auto& e : mesh.boundary_edges) {
        if (policy == ConstraintPolicy::from_tags && e.tag != BoundaryTag::dirichlet) continue;
        raw_constrained[e.a] = true;
        raw_constrained[e.b] = true;
        auto it = edge_node.find(std::minmax(e.a, e.b));
        if (it == edge_node.end()) throw InvalidInput("build_fesystem: boundary edge not in any triangle");
        raw_constrained[it->second] = true;
    }

    const auto order = detail::lexicographic_order(raw);
    std::vector<int> rank(raw.size());
    for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<int>(k);

    fes.nodes.resize(raw.size());
    fes.constrained.resize(raw.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        fes.nodes[k] = raw[order[k]];
        fes.constrained[k] = raw_constrained[order[k]];
    }
    fes.element_nodes.reserve(raw_elements.size());
    for (const auto& el : raw_elements) {
        std::array<int, 6> mapped{};
        for (int i = 0; i < 6; ++i) mapped[i] = rank[el[i]];
        fes.element_nodes.push_back(mapped);
    }

    fes.velocity_dof.assign(raw.size(), -1);
    int next = 0;
    for (std::size_t k = 0; k < fes.nodes.size(); ++k) {
        if (!fes.constrained[k]) {
            fes.velocity_dof[k] = next;
            next += 2;
        }
    }
    fes.n_u = next;

    const auto vertex_order = detail::lexicographic_order(mesh.vertices);
    fes.pressure_dof.resize(nv);
    for (int k = 0; k < nv; ++k) fes.pressure_dof[vertex_order[k]] = k;
    fes.n_p = nv;
    return fes;
}

/// A[i,j] = (grad phi_j, grad phi_i) over free velocity dofs.
inline SparseMatrix assemble_gradgrad(const FESystem& fes) {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(fes.mesh.triangles.size() * 72);
    for (std::size_t t = 0; t < fes.mesh.triangles.size(); ++t) {
        const auto geo = fes.geometry(t);
        Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
        for (const auto& q : triangle_rule) {
            const auto grads = p2_gradients(q.bary, geo);
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) local(i, j) += q.weight * geo.area * grads[i].dot(grads[j]);
        }
        const auto& nodes = fes.element_nodes[t];
        for (int i = 0; i < 6; ++i) {
            const int di = fes.velocity_dof[nodes[i]];
            if (di < 0) continue;
            for (int j = 0; j < 6; ++j) {
                const int dj = fes.velocity_dof[nodes[j]];
                if (dj < 0) continue;
                for (int c = 0; c < 2; ++c) entries.emplace_back(di + c, dj + c, local(i, j));
            }
        }
    }
    SparseMatrix A(fes.n_u, fes.n_u);
    A.setFromTriplets(entries.begin(), entries.end());
    A.makeCompressed();
    return A;
}

/// B[q,u] = (div phi_u, chi_q): rows are P1 pressure dofs, columns free velocity dofs.
inline SparseMatrix assemble_div(const FESystem& fes) {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(fes.mesh.triangles.size() * 36);
    for (std::size_t t = 0; t < fes.mesh.triangles.size(); ++t) {
        const auto geo = fes.geometry(t);
        Eigen::Matrix<double, 3, 12> local = Eigen::Matrix<double, 3, 12>::Zero();
        for (const auto& q : triangle_rule) {
            const auto grads = p2_gradients(q.bary, geo);
            for (int a = 0; a < 3; ++a)
                for (int j = 0; j < 6; ++j)
                    for (int c = 0; c < 2; ++c)
                        local(a, 2 * j + c) += q.weight * geo.area * q.bary[a] * grads[j][c];
        }
        const auto& tri = fes.mesh.triangles[t];
        const auto& nodes = fes.element_nodes[t];
        for (int a = 0; a < 3; ++a) {
            const int row = fes.pressure_dof[tri[a]];
            for (int j = 0; j < 6; ++j) {
                const int dj = fes.velocity_dof[nodes[j]];
                if (dj < 0) continue;
                for (int c = 0; c < 2; ++c) entries.emplace_back(row, dj + c, local(a, 2 * j + c));
            }
        }
    }
    SparseMatrix B(fes.n_p, fes.n_u);
    B.setFromTriplets(entries.begin(), entries.end());
    B.makeCompressed();
    return B;
}

/// M_p[i,j] = (chi_j, chi_i) for the P1 pressure basis.
inline SparseMatrix assemble_pressure_mass(const FESystem& fes) {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(fes.mesh.triangles.size() * 9);
    for (std::size_t t = 0; t < fes.mesh.triangles.size(); ++t) {
        const auto geo = fes.geometry(t);
        Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
        for (const auto& q : triangle_rule)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) local(a, b) += q.weight * geo.area * q.bary[a] * q.bary[b];
        const auto& tri = fes.mesh.triangles[t];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                entries.emplace_back(fes.pressure_dof[tri[a]], fes.pressure_dof[tri[b]], local(a, b));
    }
    SparseMatrix M(fes.n_p, fes.n_p);
    M.setFromTriplets(entries.begin(), entries.end());
    M.makeCompressed();
    return M;
}

/// Velocity L^2 mass matrix over free dofs (both components).
inline SparseMatrix assemble_velocity_mass(const FESystem& fes) {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(fes.mesh.triangles.size() * 72);
    for (std::size_t t = 0; t < fes.mesh.triangles.size(); ++t) {
        const auto geo = fes.geometry(t);
        Eigen::Matrix<double, 6, 6> local = Eigen::Matrix<double, 6, 6>::Zero();
        for (const auto& q : triangle_rule) {
            const auto phi = p2_values(q.bary);
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) local(i, j) += q.weight * geo.area * phi[i] * phi[j];
        }
        const auto& nodes = fes.element_nodes[t];
        for (int i = 0; i < 6; ++i) {
            const int di = fes.velocity_dof[nodes[i]];
            if (di < 0) continue;
            for (int j = 0; j < 6; ++j) {
                const int dj = fes.velocity_dof[nodes[j]];
                if (dj < 0) continue;
                for (int c = 0; c < 2; ++c) entries.emplace_back(di + c, dj + c, local(i, j));
            }
        }
    }
    SparseMatrix Mu(fes.n_u, fes.n_u);
    Mu.setFromTriplets(entries.begin(), entries.end());
    Mu.makeCompressed();
    return Mu;
}

/// Nodal P2 interpolation of a vector field; constrained nodes get zero.
inline Eigen::VectorXd interpolate_velocity(const FESystem& fes, const std::function<Vec2(const Vec2&)>& f) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(fes.n_u);
    for (std::size_t k = 0; k < fes.nodes.size(); ++k) {
        const int d = fes.velocity_dof[k];
        if (d < 0) continue;
        const Vec2 v = f(fes.nodes[k]);
        u[d] = v.x();
        u[d + 1] = v.y();
    }
    return u;
}

/// Interpolant of ubar = chi_H psi n. Rejects probes reaching the Dirichlet boundary.
inline Eigen::VectorXd interpolate_ubar(const FESystem& fes, const DomainSpec& spec) {
    validate_probe(spec);
    return interpolate_velocity(fes, [&](const Vec2& x) { return ubar_eval(x, spec); });
}

/// Coordinate dump: "rows cols nnz" then "i j value" in row-major order.
inline void write_coordinate(std::ostream& os, const SparseMatrix& m) {
    const auto old_precision = os.precision(17);
    os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (int i = 0; i < m.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(m, i); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    os.precision(old_precision);
}

}  // namespace infsup
