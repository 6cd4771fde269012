#pragma once

#include "error.hpp"
#include "mesh.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <vector>

namespace sapflow {

/// Per-vertex discrete geometry of a mesh.
///
/// Sign convention: outward normals, so a round sphere of radius r has
/// H = n / r > 0. `traceless_norm^2 == second_form_norm^2 - H^2 / n` holds
/// pointwise up to rounding.
struct GeometryCache
{
    int dimension = 2;
    std::vector<double> vertex_area;
    std::vector<Vec3> normal;
    std::vector<double> mean_curvature;
    std::vector<double> second_form_norm;
    std::vector<double> traceless_norm;
    std::vector<double> grad_H_norm;
    /// Sum of face areas (curve length for curves).
    double total_area = 0.0;

    std::size_t size() const { return vertex_area.size(); }
};

namespace detail {

inline double cot(const Vec3& at, const Vec3& a, const Vec3& b)
{
    const Vec3 u = a - at;
    const Vec3 v = b - at;
    const double s = u.cross(v).norm();
    if (!(s > 0.0)) throw DegenerateGeometry("zero-area triangle in cotangent weight");
    return u.dot(v) / s;
}

inline Vec3 curve_edge_normal(const Vec3& from, const Vec3& to)
{
    const Vec3 e = to - from;
    return Vec3(e.y(), -e.x(), 0.0);
}

inline void require_surface_faces(const TriMesh& mesh)
{
    if (mesh.num_faces() == 0) throw TopologyError("surface mesh has no faces");
}

} // namespace detail

/// Area of every face.
inline std::vector<double> face_areas(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    std::vector<double> out;
    out.reserve(mesh.num_faces());
    for (const Face& f : mesh.faces()) {
        out.push_back(0.5 * (x[f[1]] - x[f[0]]).cross(x[f[2]] - x[f[0]]).norm());
    }
    return out;
}

/// Total surface area (surfaces) or length (curves).
inline double total_area(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    double s = 0.0;
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) s += (x[mesh.next(i)] - x[i]).norm();
        return s;
    }
    for (double a : face_areas(mesh)) s += a;
    return s;
}

/// Mixed Voronoi vertex areas: Voronoi cells in non-obtuse triangles, and the
/// half / quarter split of obtuse triangles. Sums to the total face area.
/// Curves use half the length of the two incident edges.
inline std::vector<double> vertex_area_weights(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    std::vector<double> area(mesh.num_vertices(), 0.0);
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            const double len = (x[mesh.next(i)] - x[i]).norm();
            if (!(len > 0.0)) throw DegenerateGeometry("zero-length curve edge");
            area[i] += 0.5 * len;
            area[mesh.next(i)] += 0.5 * len;
        }
        return area;
    }
    detail::require_surface_faces(mesh);
    for (const Face& f : mesh.faces()) {
        const Vec3& p0 = x[f[0]];
        const Vec3& p1 = x[f[1]];
        const Vec3& p2 = x[f[2]];
        const double a = 0.5 * (p1 - p0).cross(p2 - p0).norm();
        if (!(a > 0.0)) throw DegenerateGeometry("zero-area face");
        const std::array<const Vec3*, 3> p{&p0, &p1, &p2};
        // Obtuse corner index, if any.
        int obtuse = -1;
        for (int k = 0; k < 3; ++k) {
            const Vec3& at = *p[k];
            if ((*p[(k + 1) % 3] - at).dot(*p[(k + 2) % 3] - at) < 0.0) obtuse = k;
        }
        if (obtuse >= 0) {
            for (int k = 0; k < 3; ++k) area[f[k]] += (k == obtuse ? 0.5 : 0.25) * a;
            continue;
        }
        for (int k = 0; k < 3; ++k) {
            const Vec3& pi = *p[k];
            const Vec3& pj = *p[(k + 1) % 3];
            const Vec3& pk = *p[(k + 2) % 3];
            const double cot_j = detail::cot(pj, pk, pi);
            const double cot_k = detail::cot(pk, pi, pj);
            area[f[k]] += ((pi - pj).squaredNorm() * cot_k + (pi - pk).squaredNorm() * cot_j) / 8.0;
        }
    }
    return area;
}

/// Signed enclosed volume (surfaces) or signed enclosed area (curves,
/// shoelace). Exact for polyhedra; positive for outward orientation.
inline double enclosed_volume(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    double v = 0.0;
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            const Vec3& a = x[i];
            const Vec3& b = x[mesh.next(i)];
            v += a.x() * b.y() - b.x() * a.y();
        }
        return 0.5 * v;
    }
    const MeshQualityReport r = validate(mesh);
    if (!r.is_closed) throw TopologyError("enclosed volume of an open mesh");
    for (const Face& f : mesh.faces()) v += x[f[0]].dot(x[f[1]].cross(x[f[2]]));
    return v / 6.0;
}

/// Outward unit normals: normalized area-weighted sum of incident face
/// normals (surfaces) or of incident edge normals (curves). Throws
/// OrientationError when the enclosed volume is negative.
inline std::vector<Vec3> vertex_normals(const TriMesh& mesh)
{
    if (enclosed_volume(mesh) < 0.0) {
        throw OrientationError("mesh is inward oriented (negative enclosed volume)");
    }
    const auto& x = mesh.vertices();
    std::vector<Vec3> n(mesh.num_vertices(), Vec3::Zero());
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            const Vec3 e = detail::curve_edge_normal(x[i], x[mesh.next(i)]);
            n[i] += e;
            n[mesh.next(i)] += e;
        }
    } else {
        for (const Face& f : mesh.faces()) {
            const Vec3 an = (x[f[1]] - x[f[0]]).cross(x[f[2]] - x[f[0]]);
            for (int v : f) n[v] += an;
        }
    }
    for (Vec3& v : n) {
        const double len = v.norm();
        if (!(len > 0.0)) throw DegenerateGeometry("zero-length vertex normal");
        v /= len;
    }
    return n;
}

/// Gradient of the total area with respect to each vertex position:
/// 1/2 sum_j (cot a_ij + cot b_ij)(x_i - x_j) on surfaces, the difference of
/// incident unit tangents on curves.
inline std::vector<Vec3> area_gradient(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    std::vector<Vec3> g(mesh.num_vertices(), Vec3::Zero());
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            const Vec3 t = (x[mesh.next(i)] - x[i]).normalized();
            g[i] -= t;
            g[mesh.next(i)] += t;
        }
        return g;
    }
    for (const Face& f : mesh.faces()) {
        for (int k = 0; k < 3; ++k) {
            const int i = f[k];
            const int j = f[(k + 1) % 3];
            const int o = f[(k + 2) % 3];
            // Edge (i, j) sees the opposite corner o.
            const double w = 0.5 * detail::cot(x[o], x[i], x[j]);
            g[i] += w * (x[i] - x[j]);
            g[j] += w * (x[j] - x[i]);
        }
    }
    return g;
}

/// Mean curvature H_i = (dA/dx_i . nu_i) / A_i: the normal component of the
/// cotangent Laplacian of the position. On curves this is the length
/// gradient form 2 sin(turning / 2) / A_i, exact on regular polygons.
inline std::vector<double> mean_curvature_field(const TriMesh& mesh, std::span<const double> weights,
                                                std::span<const Vec3> normals)
{
    const std::vector<Vec3> g = area_gradient(mesh);
    std::vector<double> h(mesh.num_vertices());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = g[i].dot(normals[i]) / weights[i];
    return h;
}

/// Cotangent stiffness matrix K (symmetric negative semidefinite):
/// K_ij = 1/2 (cot a_ij + cot b_ij), K_ii = -sum_j K_ij. Curves use 1/|e|.
/// The strong-form Laplacian is diag(vertex_area)^-1 K, and K x = -dA/dx.
inline Eigen::SparseMatrix<double> cotan_stiffness(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
    std::vector<Eigen::Triplet<double>> trip;
    auto add_edge = [&trip](int i, int j, double w) {
        trip.emplace_back(i, j, w);
        trip.emplace_back(j, i, w);
        trip.emplace_back(i, i, -w);
        trip.emplace_back(j, j, -w);
    };
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            const std::size_t j = mesh.next(i);
            add_edge(static_cast<int>(i), static_cast<int>(j), 1.0 / (x[j] - x[i]).norm());
        }
    } else {
        for (const Face& f : mesh.faces()) {
            for (int k = 0; k < 3; ++k) {
                const int i = f[k];
                const int j = f[(k + 1) % 3];
                const int o = f[(k + 2) % 3];
                add_edge(i, j, 0.5 * detail::cot(x[o], x[i], x[j]));
            }
        }
    }
    Eigen::SparseMatrix<double> k(n, n);
    k.setFromTriplets(trip.begin(), trip.end());
    return k;
}

/// Per-vertex |A| and |A°| (traceless part).
struct SecondFormNorms
{
    std::vector<double> second_form;
    std::vector<double> traceless;
};

namespace detail {

/// Local quadric fit of the second fundamental form at vertex i.
///
/// Each neighbour offset d = (u, v, w) in the frame (t1, t2, nu) gives one
/// equation -2w = a (u^2 + w^2/2) + 2b uv + c (v^2 + w^2/2) + p u + q v.
/// Every sphere satisfies this exactly with a = c = curvature / cos(tilt),
/// b = 0, whatever the tilt of the estimated normal, so the fitted traceless
/// part vanishes on points sampled from any sphere. Rows are scaled by
/// 1/|d|^2. The 1-ring is extended by the 2-ring when it has fewer than 5
/// vertices.
inline Eigen::Matrix2d fit_shape_operator(const TriMesh& mesh, std::size_t i, const Vec3& nu)
{
    const auto& x = mesh.vertices();
    std::vector<int> ring(mesh.neighbors(i).begin(), mesh.neighbors(i).end());
    if (ring.size() < 5) {
        std::vector<int> extended = ring;
        for (int j : ring) {
            for (int k : mesh.neighbors(j)) {
                if (static_cast<std::size_t>(k) != i) extended.push_back(k);
            }
        }
        std::sort(extended.begin(), extended.end());
        extended.erase(std::unique(extended.begin(), extended.end()), extended.end());
        ring = std::move(extended);
    }
    if (ring.size() < 5) {
        throw RankDeficientFit("vertex " + std::to_string(i) + " has fewer than 5 fit neighbours");
    }
    const Vec3 t1 = nu.unitOrthogonal();
    const Vec3 t2 = nu.cross(t1);

    Eigen::MatrixXd m(ring.size(), 5);
    Eigen::VectorXd rhs(ring.size());
    for (std::size_t r = 0; r < ring.size(); ++r) {
        const Vec3 d = x[ring[r]] - x[i];
        const double u = d.dot(t1);
        const double v = d.dot(t2);
        const double w = d.dot(nu);
        const double s = 1.0 / d.squaredNorm();
        m(r, 0) = s * (u * u + 0.5 * w * w);
        m(r, 1) = s * 2.0 * u * v;
        m(r, 2) = s * (v * v + 0.5 * w * w);
        m(r, 3) = s * u;
        m(r, 4) = s * v;
        rhs(r) = s * -2.0 * w;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    qr.setThreshold(1e-10);
    if (qr.rank() < 5) {
        throw RankDeficientFit("rank-deficient curvature fit at vertex " + std::to_string(i));
    }
    const Eigen::VectorXd sol = qr.solve(rhs);
    Eigen::Matrix2d op;
    op << sol(0), sol(1), sol(1), sol(2);
    return op;
}

} // namespace detail

/// |A| and |A°| per vertex from a local shape-operator fit whose trace is
/// shifted to the supplied mean curvature, so that |A°|^2 = |A|^2 - H^2/n
/// with the same H the flow uses. Curves have |A| = |H| and |A°| = 0.
inline SecondFormNorms traceless_second_form_field(const TriMesh& mesh, std::span<const Vec3> normals,
                                                   std::span<const double> mean_curvature,
                                                   const Execution& exec = {})
{
    const std::size_t nv = mesh.num_vertices();
    SecondFormNorms out{std::vector<double>(nv), std::vector<double>(nv, 0.0)};
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < nv; ++i) out.second_form[i] = std::abs(mean_curvature[i]);
        return out;
    }
    parallel_for(nv, exec, [&](std::size_t i) {
        const Eigen::Matrix2d op = detail::fit_shape_operator(mesh, i, normals[i]);
        const double a = op(0, 0);
        const double b = op(0, 1);
        const double c = op(1, 1);
        const double traceless_sq = 0.5 * (a - c) * (a - c) + 2.0 * b * b;
        const double h = mean_curvature[i];
        out.traceless[i] = std::sqrt(traceless_sq);
        out.second_form[i] = std::sqrt(traceless_sq + 0.5 * h * h);
    });
    return out;
}

/// Norm of the intrinsic gradient of a piecewise-linear vertex field.
///
/// Per-face gradients of the linear interpolant are averaged to vertices with
/// face-area weights and projected onto the vertex tangent plane. Curves use
/// length-weighted averages of edge difference quotients.
inline std::vector<double> gradient_norm_field(const TriMesh& mesh, std::span<const double> f,
                                               std::span<const Vec3> normals)
{
    const auto& x = mesh.vertices();
    const std::size_t nv = mesh.num_vertices();
    std::vector<double> out(nv, 0.0);
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < nv; ++i) {
            const std::size_t p = mesh.prev(i);
            const std::size_t q = mesh.next(i);
            const double lp = (x[i] - x[p]).norm();
            const double lq = (x[q] - x[i]).norm();
            const double dp = (f[i] - f[p]) / lp;
            const double dq = (f[q] - f[i]) / lq;
            out[i] = std::abs((lp * dp + lq * dq) / (lp + lq));
        }
        return out;
    }
    std::vector<Vec3> sum(nv, Vec3::Zero());
    std::vector<double> wsum(nv, 0.0);
    for (const Face& t : mesh.faces()) {
        const Vec3 an = (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]);
        const double twice_area = an.norm();
        if (!(twice_area > 0.0)) throw DegenerateGeometry("zero-area face in gradient");
        const Vec3 nrm = an / twice_area;
        Vec3 g = Vec3::Zero();
        for (int k = 0; k < 3; ++k) {
            const Vec3 opposite = x[t[(k + 2) % 3]] - x[t[(k + 1) % 3]];
            g += f[t[k]] * nrm.cross(opposite);
        }
        g /= twice_area;
        const double area = 0.5 * twice_area;
        for (int v : t) {
            sum[v] += area * g;
            wsum[v] += area;
        }
    }
    for (std::size_t i = 0; i < nv; ++i) {
        Vec3 g = sum[i] / wsum[i];
        if (i < normals.size()) g -= g.dot(normals[i]) * normals[i];
        out[i] = g.norm();
    }
    return out;
}

/// Sum_i f_i * weight_i, the discrete integral over the hypersurface.
inline double surface_integral(std::span<const double> weights, std::span<const double> f,
                               const Execution& exec = {})
{
    return parallel_sum(weights.size(), exec, [&](std::size_t i) { return f[i] * weights[i]; });
}

/// Discrete integral of term(i) weighted by vertex area.
template <typename Term>
double integrate(const GeometryCache& cache, Term&& term, const Execution& exec = {})
{
    return parallel_sum(cache.size(), exec, [&](std::size_t i) { return term(i) * cache.vertex_area[i]; });
}

/// Upper-biased estimate of the intrinsic diameter: the largest edge-graph
/// geodesic distance found from up to `max_sources` farthest-point-seeded
/// source vertices. The first source is vertex `first_source % |V|`.
inline double diameter_estimate(const TriMesh& mesh, std::size_t max_sources = 32, std::size_t first_source = 0)
{
    const auto& x = mesh.vertices();
    const std::size_t nv = mesh.num_vertices();
    if (nv == 0) return 0.0;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> nearest_source(nv, inf);
    std::vector<double> dist(nv);
    double diameter = 0.0;
    std::size_t source = first_source % nv;
    const std::size_t count = std::min(max_sources, nv);
    using Item = std::pair<double, int>;
    for (std::size_t s = 0; s < count; ++s) {
        std::fill(dist.begin(), dist.end(), inf);
        std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
        dist[source] = 0.0;
        queue.emplace(0.0, static_cast<int>(source));
        while (!queue.empty()) {
            const auto [d, v] = queue.top();
            queue.pop();
            if (d > dist[v]) continue;
            for (int w : mesh.neighbors(v)) {
                const double nd = d + (x[w] - x[v]).norm();
                if (nd < dist[w]) {
                    dist[w] = nd;
                    queue.emplace(nd, w);
                }
            }
        }
        std::size_t farthest = 0;
        for (std::size_t v = 0; v < nv; ++v) {
            if (dist[v] < inf) diameter = std::max(diameter, dist[v]);
            nearest_source[v] = std::min(nearest_source[v], dist[v]);
            if (nearest_source[v] > nearest_source[farthest]) farthest = v;
        }
        if (nearest_source[farthest] == 0.0) break;
        source = farthest;
    }
    return diameter;
}

/// Computes every cached field for `mesh`.
inline GeometryCache compute_geometry(const TriMesh& mesh, const Execution& exec = {})
{
    GeometryCache c;
    c.dimension = mesh.dimension();
    c.vertex_area = vertex_area_weights(mesh);
    c.normal = vertex_normals(mesh);
    c.mean_curvature = mean_curvature_field(mesh, c.vertex_area, c.normal);
    SecondFormNorms norms = traceless_second_form_field(mesh, c.normal, c.mean_curvature, exec);
    c.second_form_norm = std::move(norms.second_form);
    c.traceless_norm = std::move(norms.traceless);
    c.grad_H_norm = gradient_norm_field(mesh, c.mean_curvature, c.normal);
    c.total_area = total_area(mesh);
    return c;
}

} // namespace sapflow
