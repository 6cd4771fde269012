#pragma once

#include "error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sapflow {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Face = std::array<int, 3>;

/// Surface meshes discretize n = 2 hypersurfaces; curves (closed polylines in
/// the xy-plane) discretize n = 1.
enum class MeshMode { surface, curve };

/// Connectivity shared by every mesh derived from the same construction.
///
/// Edges are stored once with `vertices[0] < vertices[1]`. For surfaces,
/// `faces[0..count)` lists the incident faces; a closed manifold edge has
/// count 2. `same_direction_uses` counts pairs of incident faces that traverse
/// the edge in the same direction (a consistently oriented mesh has none).
struct Topology
{
    struct Edge
    {
        std::array<int, 2> vertices{};
        std::array<int, 2> faces{-1, -1};
        int face_count = 0;
        bool same_direction = false;
    };

    std::vector<Face> faces;
    std::vector<Edge> edges;
    std::vector<std::array<int, 3>> face_edges;

    // CSR vertex -> incident faces and vertex -> neighbouring vertices.
    std::vector<int> vf_offset, vf_index;
    std::vector<int> vv_offset, vv_index;

    int boundary_edges = 0;
    int nonmanifold_edges = 0;
    int misoriented_edges = 0;
};

/// Closed oriented triangulated surface in R^3, or closed polyline in R^2.
///
/// Meshes are immutable values: positions and connectivity are fixed after
/// construction; `with_vertices` creates a new mesh that shares the
/// connectivity. Curve vertices are stored with z = 0 and are traversed in
/// cyclic order; counterclockwise order is outward oriented.
class TriMesh
{
public:
    TriMesh() = default;

    /// Builds a surface mesh. Throws TopologyError for out-of-range indices or
    /// faces that repeat a vertex. Open or non-manifold input is accepted here
    /// and reported by `validate`.
    static TriMesh surface(std::vector<Vec3> vertices, std::vector<Face> faces)
    {
        const int nv = static_cast<int>(vertices.size());
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const Face& t = faces[f];
            for (int v : t) {
                if (v < 0 || v >= nv) {
                    throw TopologyError(
                        "face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                        " outside [0, " + std::to_string(nv) + ")");
                }
            }
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
                throw TopologyError("face " + std::to_string(f) + " repeats a vertex index");
            }
        }
        TriMesh m;
        m.m_mode = MeshMode::surface;
        m.m_vertices = std::move(vertices);
        m.m_topology = std::make_shared<const Topology>(build_surface_topology(nv, std::move(faces)));
        return m;
    }

    /// Builds a closed polyline from points in cyclic order.
    static TriMesh curve(std::span<const Vec2> points)
    {
        if (points.size() < 3) throw TopologyError("a closed curve needs at least 3 points");
        std::vector<Vec3> verts;
        verts.reserve(points.size());
        for (const Vec2& p : points) verts.emplace_back(p.x(), p.y(), 0.0);
        TriMesh m;
        m.m_mode = MeshMode::curve;
        m.m_vertices = std::move(verts);
        m.m_topology = std::make_shared<const Topology>(build_curve_topology(static_cast<int>(points.size())));
        return m;
    }

    /// Same connectivity, new positions.
    TriMesh with_vertices(std::vector<Vec3> vertices) const
    {
        if (vertices.size() != m_vertices.size()) {
            throw InvalidArgument("with_vertices: vertex count mismatch");
        }
        TriMesh m = *this;
        m.m_vertices = std::move(vertices);
        if (m_mode == MeshMode::curve) {
            for (Vec3& v : m.m_vertices) v.z() = 0.0;
        }
        return m;
    }

    MeshMode mode() const { return m_mode; }
    bool is_curve() const { return m_mode == MeshMode::curve; }
    /// Intrinsic dimension n of the discretized hypersurface.
    int dimension() const { return m_mode == MeshMode::curve ? 1 : 2; }

    std::size_t num_vertices() const { return m_vertices.size(); }
    std::size_t num_faces() const { return m_topology ? m_topology->faces.size() : 0; }
    std::size_t num_edges() const { return m_topology ? m_topology->edges.size() : 0; }

    const std::vector<Vec3>& vertices() const { return m_vertices; }
    const Vec3& vertex(std::size_t i) const { return m_vertices[i]; }
    const std::vector<Face>& faces() const { return m_topology->faces; }
    const Topology& topology() const { return *m_topology; }

    std::span<const int> vertex_faces(std::size_t v) const
    {
        const Topology& t = *m_topology;
        return {t.vf_index.data() + t.vf_offset[v], t.vf_index.data() + t.vf_offset[v + 1]};
    }

    std::span<const int> neighbors(std::size_t v) const
    {
        const Topology& t = *m_topology;
        return {t.vv_index.data() + t.vv_offset[v], t.vv_index.data() + t.vv_offset[v + 1]};
    }

    /// Previous / next vertex of a curve in cyclic order.
    std::size_t prev(std::size_t v) const { return v == 0 ? m_vertices.size() - 1 : v - 1; }
    std::size_t next(std::size_t v) const { return v + 1 == m_vertices.size() ? 0 : v + 1; }

    bool shares_topology_with(const TriMesh& other) const { return m_topology == other.m_topology; }

private:
    static Topology build_surface_topology(int nv, std::vector<Face> faces)
    {
        Topology topo;
        topo.faces = std::move(faces);
        const auto& fs = topo.faces;
        topo.face_edges.resize(fs.size());

        std::map<std::pair<int, int>, int> edge_index;
        // Direction of first use per edge: +1 when traversed low -> high.
        std::vector<std::vector<int>> directions;
        for (std::size_t f = 0; f < fs.size(); ++f) {
            for (int k = 0; k < 3; ++k) {
                const int a = fs[f][k];
                const int b = fs[f][(k + 1) % 3];
                const auto key = std::minmax(a, b);
                auto [it, inserted] = edge_index.try_emplace({key.first, key.second}, static_cast<int>(topo.edges.size()));
                if (inserted) {
                    Topology::Edge e;
                    e.vertices = {key.first, key.second};
                    topo.edges.push_back(e);
                    directions.emplace_back();
                }
                const int ei = it->second;
                Topology::Edge& e = topo.edges[ei];
                if (e.face_count < 2) e.faces[e.face_count] = static_cast<int>(f);
                ++e.face_count;
                directions[ei].push_back(a < b ? 1 : -1);
                // Local edge k is opposite to corner (k + 2) % 3.
                topo.face_edges[f][(k + 2) % 3] = ei;
            }
        }
        for (std::size_t ei = 0; ei < topo.edges.size(); ++ei) {
            Topology::Edge& e = topo.edges[ei];
            if (e.face_count == 1) ++topo.boundary_edges;
            if (e.face_count > 2) ++topo.nonmanifold_edges;
            if (e.face_count == 2 && directions[ei][0] == directions[ei][1]) {
                e.same_direction = true;
                ++topo.misoriented_edges;
            }
        }

        std::vector<std::vector<int>> vf(nv), vv(nv);
        for (std::size_t f = 0; f < fs.size(); ++f) {
            for (int v : fs[f]) vf[v].push_back(static_cast<int>(f));
        }
        for (const auto& e : topo.edges) {
            vv[e.vertices[0]].push_back(e.vertices[1]);
            vv[e.vertices[1]].push_back(e.vertices[0]);
        }
        flatten(vf, topo.vf_offset, topo.vf_index);
        for (auto& n : vv) std::sort(n.begin(), n.end());
        flatten(vv, topo.vv_offset, topo.vv_index);
        return topo;
    }

    static Topology build_curve_topology(int nv)
    {
        Topology topo;
        topo.vv_offset.resize(nv + 1);
        topo.vf_offset.assign(nv + 1, 0);
        for (int i = 0; i < nv; ++i) {
            const int j = (i + 1) % nv;
            Topology::Edge e;
            e.vertices = {std::min(i, j), std::max(i, j)};
            e.face_count = 2;
            topo.edges.push_back(e);
            topo.vv_offset[i] = 2 * i;
            topo.vv_index.push_back((i + nv - 1) % nv);
            topo.vv_index.push_back(j);
        }
        topo.vv_offset[nv] = 2 * nv;
        return topo;
    }

    static void flatten(const std::vector<std::vector<int>>& lists, std::vector<int>& offset, std::vector<int>& index)
    {
        offset.assign(lists.size() + 1, 0);
        for (std::size_t i = 0; i < lists.size(); ++i) {
            offset[i + 1] = offset[i] + static_cast<int>(lists[i].size());
        }
        index.clear();
        index.reserve(offset.back());
        for (const auto& l : lists) index.insert(index.end(), l.begin(), l.end());
    }

    MeshMode m_mode = MeshMode::surface;
    std::vector<Vec3> m_vertices;
    std::shared_ptr<const Topology> m_topology = std::make_shared<const Topology>();
};

struct MeshQualityReport
{
    bool is_closed = false;
    bool is_oriented = false;
    /// Smallest face area (surfaces) or edge length (curves).
    double min_face_area = 0.0;
    /// Smallest interior triangle angle (surfaces) or polyline corner angle (curves).
    double min_angle = 0.0;
    int boundary_edge_count = 0;
    int nonmanifold_edge_count = 0;

    bool ok() const { return is_closed && is_oriented && nonmanifold_edge_count == 0; }
};

namespace detail {

inline double corner_angle(const Vec3& at, const Vec3& a, const Vec3& b)
{
    const Vec3 u = a - at;
    const Vec3 v = b - at;
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

} // namespace detail

/// Smallest triangle angle (or curve corner angle) of the mesh.
inline double min_angle(const TriMesh& mesh)
{
    double best = std::numeric_limits<double>::infinity();
    const auto& x = mesh.vertices();
    if (mesh.is_curve()) {
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            best = std::min(best, detail::corner_angle(x[i], x[mesh.prev(i)], x[mesh.next(i)]));
        }
        return best;
    }
    for (const Face& f : mesh.faces()) {
        for (int k = 0; k < 3; ++k) {
            best = std::min(best, detail::corner_angle(x[f[k]], x[f[(k + 1) % 3]], x[f[(k + 2) % 3]]));
        }
    }
    return best;
}

/// Computes connectivity and shape quality; never throws.
inline MeshQualityReport validate(const TriMesh& mesh)
{
    MeshQualityReport r;
    const auto& x = mesh.vertices();
    if (mesh.is_curve()) {
        r.is_closed = true;
        r.is_oriented = true;
        r.min_face_area = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            r.min_face_area = std::min(r.min_face_area, (x[mesh.next(i)] - x[i]).norm());
        }
        r.min_angle = min_angle(mesh);
        return r;
    }
    const Topology& t = mesh.topology();
    r.boundary_edge_count = t.boundary_edges;
    r.nonmanifold_edge_count = t.nonmanifold_edges;
    r.is_closed = t.boundary_edges == 0 && t.nonmanifold_edges == 0 && !t.faces.empty();
    r.is_oriented = t.misoriented_edges == 0;
    r.min_face_area = std::numeric_limits<double>::infinity();
    for (const Face& f : t.faces) {
        const double a = 0.5 * (x[f[1]] - x[f[0]]).cross(x[f[2]] - x[f[0]]).norm();
        r.min_face_area = std::min(r.min_face_area, a);
    }
    r.min_angle = min_angle(mesh);
    return r;
}

/// Throws TopologyError describing the first failed connectivity check.
inline void require_closed_oriented(const TriMesh& mesh)
{
    const MeshQualityReport r = validate(mesh);
    if (r.boundary_edge_count > 0) {
        throw TopologyError(std::to_string(r.boundary_edge_count) + " boundary edges");
    }
    if (r.nonmanifold_edge_count > 0) {
        throw TopologyError(std::to_string(r.nonmanifold_edge_count) + " non-manifold edges");
    }
    if (!r.is_closed) throw TopologyError("mesh has no faces");
    if (!r.is_oriented) throw TopologyError("inconsistent face orientation");
}

} // namespace sapflow
