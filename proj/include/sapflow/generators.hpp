#pragma once

#include "error.hpp"
#include "mesh.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

namespace sapflow {

namespace detail {

inline TriMesh unit_icosahedron()
{
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0},
        {0, -1, p}, {0, 1, p}, {0, -1, -p}, {0, 1, -p},
        {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1},
    };
    for (Vec3& x : v) x.normalize();
    std::vector<Face> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    return TriMesh::surface(std::move(v), std::move(f));
}

/// Midpoint subdivision on the unit sphere: every triangle splits in four and
/// new vertices are projected back to |x| = 1.
inline std::pair<std::vector<Vec3>, std::vector<Face>> subdivide_on_sphere(
    std::vector<Vec3> verts, const std::vector<Face>& faces)
{
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = midpoint.find({key.first, key.second});
        if (it != midpoint.end()) return it->second;
        const int idx = static_cast<int>(verts.size());
        verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
        midpoint.emplace(std::pair{key.first, key.second}, idx);
        return idx;
    };
    std::vector<Face> out;
    out.reserve(faces.size() * 4);
    for (const Face& f : faces) {
        const int ab = mid(f[0], f[1]);
        const int bc = mid(f[1], f[2]);
        const int ca = mid(f[2], f[0]);
        out.push_back({f[0], ab, ca});
        out.push_back({f[1], bc, ab});
        out.push_back({f[2], ca, bc});
        out.push_back({ab, bc, ca});
    }
    return {std::move(verts), std::move(out)};
}

inline TriMesh unit_icosphere(int subdivisions)
{
    if (subdivisions < 0) throw InvalidArgument("subdivisions must be >= 0");
    const TriMesh ico = unit_icosahedron();
    std::vector<Vec3> v = ico.vertices();
    std::vector<Face> f = ico.faces();
    for (int s = 0; s < subdivisions; ++s) {
        std::tie(v, f) = subdivide_on_sphere(std::move(v), f);
    }
    return TriMesh::surface(std::move(v), std::move(f));
}

} // namespace detail

/// Icosahedron refined by `subdivisions` levels of midpoint subdivision, every
/// vertex at distance `radius` from `center`. |F| = 20 * 4^subdivisions.
inline TriMesh gen_icosphere(double radius, const Vec3& center, int subdivisions)
{
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    const TriMesh unit = detail::unit_icosphere(subdivisions);
    std::vector<Vec3> v = unit.vertices();
    for (Vec3& x : v) x = center + radius * x;
    return unit.with_vertices(std::move(v));
}

/// Unit icosphere scaled by (a, b, c) along the coordinate axes.
inline TriMesh gen_ellipsoid(double a, double b, double c, int subdivisions)
{
    if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw InvalidArgument("ellipsoid axes must be positive");
    const TriMesh unit = detail::unit_icosphere(subdivisions);
    std::vector<Vec3> v = unit.vertices();
    for (Vec3& x : v) x = Vec3(a * x.x(), b * x.y(), c * x.z());
    return unit.with_vertices(std::move(v));
}

/// Radial bump profile on the unit sphere.
struct Bump
{
    enum class Kind { harmonic, gaussian_dent };

    Kind kind = Kind::harmonic;
    int degree = 2;
    int order = 0;
    Vec3 direction = Vec3::UnitZ();
    double width = 0.3;

    static Bump harmonic(int degree, int order = 0)
    {
        Bump b;
        b.kind = Kind::harmonic;
        b.degree = degree;
        b.order = order;
        return b;
    }

    static Bump dent(const Vec3& direction, double width)
    {
        Bump b;
        b.kind = Kind::gaussian_dent;
        b.direction = direction.normalized();
        b.width = width;
        return b;
    }

    /// Value at the unit vector u. Harmonics are the real Schmidt
    /// semi-normalized P_l^|m|(cos theta) cos(m phi) (sin for m < 0), with
    /// maximum 1 for m = 0. The dent is exp(-angle^2 / (2 width^2)).
    double operator()(const Vec3& u) const
    {
        if (kind == Kind::gaussian_dent) {
            const double ang = std::atan2(u.cross(direction).norm(), u.dot(direction));
            return std::exp(-ang * ang / (2.0 * width * width));
        }
        const int m = std::abs(order);
        const double ct = std::clamp(u.z(), -1.0, 1.0);
        const double phi = std::atan2(u.y(), u.x());
        // std::assoc_legendre omits the Condon-Shortley phase.
        double p = std::assoc_legendre(static_cast<unsigned>(degree), static_cast<unsigned>(m), ct);
        if (m > 0) {
            p *= std::sqrt(2.0 * std::tgamma(degree - m + 1.0) / std::tgamma(degree + m + 1.0));
        }
        if (order > 0) return p * std::cos(m * phi);
        if (order < 0) return p * std::sin(m * phi);
        return p;
    }
};

/// Sphere of `radius` at the origin with every vertex moved radially by
/// `amplitude * bump(direction)`.
inline TriMesh gen_perturbed_sphere(double radius, double amplitude, const Bump& bump, int subdivisions)
{
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    if (!(std::abs(amplitude) < 0.5 * radius)) {
        throw InvalidArgument("|amplitude| must be below radius / 2");
    }
    if (bump.kind == Bump::Kind::harmonic && (bump.degree < 0 || std::abs(bump.order) > bump.degree)) {
        throw InvalidArgument("harmonic order must satisfy |m| <= l");
    }
    if (bump.kind == Bump::Kind::gaussian_dent && !(bump.width > 0.0)) {
        throw InvalidArgument("dent width must be positive");
    }
    const TriMesh unit = detail::unit_icosphere(subdivisions);
    std::vector<Vec3> v = unit.vertices();
    for (Vec3& x : v) x = (radius + amplitude * bump(x)) * x;
    return unit.with_vertices(std::move(v));
}

/// Elongated surface with a thin waist: x stretched by `length`, y and z scaled
/// by neck + (1 - neck) * x^2 on the unit icosphere.
inline TriMesh gen_dumbbell(double length, double neck, int subdivisions)
{
    if (!(length > 0.0 && neck > 0.0 && neck <= 1.0)) throw InvalidArgument("bad dumbbell parameters");
    const TriMesh unit = detail::unit_icosphere(subdivisions);
    std::vector<Vec3> v = unit.vertices();
    for (Vec3& x : v) {
        const double s = neck + (1.0 - neck) * x.x() * x.x();
        x = Vec3(length * x.x(), s * x.y(), s * x.z());
    }
    return unit.with_vertices(std::move(v));
}

/// Regular m-gon of circumradius `radius`, counterclockwise.
inline TriMesh gen_polygon(int sides, double radius, const Vec2& center = Vec2::Zero())
{
    if (sides < 3) throw InvalidArgument("polygon needs at least 3 sides");
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    std::vector<Vec2> p;
    p.reserve(sides);
    for (int i = 0; i < sides; ++i) {
        const double a = 2.0 * std::numbers::pi * i / sides;
        p.emplace_back(center.x() + radius * std::cos(a), center.y() + radius * std::sin(a));
    }
    return TriMesh::curve(p);
}

/// Axis-aligned ellipse sampled at equal parameter steps, counterclockwise.
inline TriMesh gen_ellipse(double a, double b, int samples)
{
    if (samples < 3 || !(a > 0.0 && b > 0.0)) throw InvalidArgument("bad ellipse parameters");
    std::vector<Vec2> p;
    for (int i = 0; i < samples; ++i) {
        const double t = 2.0 * std::numbers::pi * i / samples;
        p.emplace_back(a * std::cos(t), b * std::sin(t));
    }
    return TriMesh::curve(p);
}

/// Unit cube [0,1]^3 split into 12 outward-oriented triangles.
inline TriMesh gen_unit_cube()
{
    std::vector<Vec3> v = {
        {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
    };
    std::vector<Face> f = {
        {0, 2, 1}, {0, 3, 2}, // z = 0
        {4, 5, 6}, {4, 6, 7}, // z = 1
        {0, 1, 5}, {0, 5, 4}, // y = 0
        {3, 7, 6}, {3, 6, 2}, // y = 1
        {0, 4, 7}, {0, 7, 3}, // x = 0
        {1, 2, 6}, {1, 6, 5}, // x = 1
    };
    return TriMesh::surface(std::move(v), std::move(f));
}

/// Corner tetrahedron (0,0,0), (1,0,0), (0,1,0), (0,0,1), outward oriented.
inline TriMesh gen_tetrahedron()
{
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    std::vector<Face> f = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    return TriMesh::surface(std::move(v), std::move(f));
}

} // namespace sapflow
