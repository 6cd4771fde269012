#include <sapflow/generators.hpp>
#include <sapflow/geometry.hpp>

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace sapflow;

namespace {

constexpr double pi = std::numbers::pi;

/// (n+1) x (n+1) grid over the parameter square [-s, s]^2 mapped by `place`,
/// two triangles per cell.
template <typename Place>
TriMesh grid_patch(int n, double s, Place place)
{
    std::vector<Vec3> v;
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) v.push_back(place(-s + 2.0 * s * i / n, -s + 2.0 * s * j / n));
    }
    std::vector<Face> f;
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return TriMesh::surface(std::move(v), std::move(f));
}

double max_abs_diff(const std::vector<double>& a, double b)
{
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x - b));
    return m;
}

TriMesh sphere(int k, double r = 1.0)
{
    return gen_icosphere(r, Vec3::Zero(), k);
}

} // namespace

TEST(VertexArea, UnitCubeSumsToSix)
{
    const auto w = vertex_area_weights(gen_unit_cube());
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 6.0, 1e-14);
    for (double x : w) EXPECT_GT(x, 0.0);
}

TEST(VertexArea, IcosphereNearFourPi)
{
    const auto w = vertex_area_weights(sphere(3));
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0) / (4.0 * pi), 1.0, 5e-3);
}

TEST(VertexArea, IcosahedronWeightsEqual)
{
    const auto w = vertex_area_weights(sphere(0));
    for (double x : w) EXPECT_NEAR(x, w[0], 1e-14);
}

TEST(VertexArea, PartitionOfUnity)
{
    for (const TriMesh& m : {sphere(3), gen_ellipsoid(1, 1, 2, 3), gen_dumbbell(2.0, 0.4, 2), gen_unit_cube()}) {
        const auto w = vertex_area_weights(m);
        const auto fa = face_areas(m);
        const double sw = std::accumulate(w.begin(), w.end(), 0.0);
        const double sf = std::accumulate(fa.begin(), fa.end(), 0.0);
        EXPECT_NEAR(sw / sf, 1.0, 1e-12);
    }
}

TEST(VertexArea, DegenerateFaceThrows)
{
    const std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 0, 1}};
    const TriMesh m = TriMesh::surface(v, {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}});
    EXPECT_THROW(vertex_area_weights(m), DegenerateGeometry);
}

TEST(Normals, IcosphereConvergesToRadial)
{
    // Area weighting is exact at the valence-5 vertices; elsewhere the
    // unequal triangle areas of the geodesic subdivision leave a first-order
    // error, so the maximum halves per level.
    const Vec3 c(0.5, -1.0, 2.0);
    double prev = 0.0;
    for (int k = 2; k <= 5; ++k) {
        const TriMesh m = gen_icosphere(2.0, c, k);
        const auto n = vertex_normals(m);
        double err = 0.0;
        for (std::size_t i = 0; i < m.num_vertices(); ++i) {
            EXPECT_NEAR(n[i].norm(), 1.0, 1e-12);
            err = std::max(err, (n[i] - (m.vertex(i) - c) / 2.0).norm());
            if (m.neighbors(i).size() == 5) EXPECT_LT((n[i] - (m.vertex(i) - c) / 2.0).norm(), 1e-13);
        }
        if (k > 2) EXPECT_GE(prev / err, 1.9) << "level " << k;
        prev = err;
    }
}

TEST(Normals, CubeCorner)
{
    const auto n = vertex_normals(gen_unit_cube());
    EXPECT_LE((n[6] - Vec3(1, 1, 1) / std::sqrt(3.0)).norm(), 1e-14);
    EXPECT_LE((n[0] + Vec3(1, 1, 1) / std::sqrt(3.0)).norm(), 1e-14);
}

TEST(Normals, InwardOrientationThrows)
{
    const TriMesh m = sphere(2);
    std::vector<Face> f = m.faces();
    for (auto& face : f) std::swap(face[1], face[2]);
    const TriMesh inward = TriMesh::surface(m.vertices(), f);
    EXPECT_LT(enclosed_volume(inward), 0.0);
    EXPECT_THROW(vertex_normals(inward), OrientationError);
}

TEST(MeanCurvature, UnitSphereRefines)
{
    double prev = 0.0;
    for (int k = 2; k <= 5; ++k) {
        const GeometryCache c = compute_geometry(sphere(k));
        const double err = max_abs_diff(c.mean_curvature, 2.0);
        if (k > 2) EXPECT_GE(prev / err, 3.5) << "level " << k;
        prev = err;
    }
    EXPECT_LT(prev, 1e-5);
}

TEST(MeanCurvature, RadiusTwo)
{
    const GeometryCache c = compute_geometry(sphere(3, 2.0));
    EXPECT_LT(max_abs_diff(c.mean_curvature, 1.0), 2e-2);
}

TEST(MeanCurvature, RegularPolygonCurvatureIsOne)
{
    for (int m : {8, 64, 512}) {
        const GeometryCache c = compute_geometry(gen_polygon(m, 1.0));
        EXPECT_EQ(c.dimension, 1);
        EXPECT_LT(max_abs_diff(c.mean_curvature, 1.0), 1e-11) << m << " sides";
        EXPECT_NEAR(c.total_area, 2.0 * m * std::sin(pi / m), 1e-12);
    }
    const GeometryCache c = compute_geometry(gen_polygon(64, 3.0));
    EXPECT_LT(max_abs_diff(c.mean_curvature, 1.0 / 3.0), 1e-12);
}

TEST(SecondForm, SphereIsUmbilic)
{
    double prev = 1e9;
    for (int k = 2; k <= 4; ++k) {
        const GeometryCache c = compute_geometry(sphere(k));
        const double tl = *std::max_element(c.traceless_norm.begin(), c.traceless_norm.end());
        EXPECT_LT(tl, 1e-8);
        const double err = max_abs_diff(c.second_form_norm, std::sqrt(2.0));
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(SecondForm, EllipsoidEquatorIsNotUmbilic)
{
    const TriMesh m = gen_ellipsoid(1, 1, 2, 3);
    const GeometryCache c = compute_geometry(m);
    std::size_t eq = 0;
    for (std::size_t i = 0; i < m.num_vertices(); ++i) {
        if (std::abs(m.vertex(i).z()) < std::abs(m.vertex(eq).z())) eq = i;
    }
    ASSERT_LT(std::abs(m.vertex(eq).z()), 1e-12);
    // Principal curvatures 1 and 1/4 at the equator of x^2 + y^2 + z^2/4 = 1.
    const double exact = std::sqrt(0.5) * (1.0 - 0.25);
    EXPECT_GT(c.traceless_norm[eq], 0.5 * exact);
    EXPECT_NEAR(c.traceless_norm[eq], exact, 0.1);
}

TEST(SecondForm, CylinderPatchTraceless)
{
    double prev = 1e9;
    for (int n : {6, 12, 24}) {
        const double s = 0.3;
        const TriMesh m = grid_patch(n, s, [](double a, double z) { return Vec3(std::cos(a), std::sin(a), z); });
        const std::size_t centre = static_cast<std::size_t>(n / 2 * (n + 1) + n / 2);
        ASSERT_LT((m.vertex(centre) - Vec3(1, 0, 0)).norm(), 1e-14);
        const Eigen::Matrix2d op = detail::fit_shape_operator(m, centre, Vec3(1, 0, 0));
        const double tl2 = 0.5 * std::pow(op(0, 0) - op(1, 1), 2) + 2.0 * op(0, 1) * op(0, 1);
        const double err = std::abs(tl2 - 0.5);
        EXPECT_LT(err, prev) << n;
        prev = err;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(SecondForm, PointwiseIdentity)
{
    for (const TriMesh& m : {gen_ellipsoid(1.2, 1.0, 0.85, 3), gen_dumbbell(2.0, 0.4, 2),
                             gen_perturbed_sphere(1.0, -0.35, Bump::dent(Vec3(0, 0, 1), 0.3), 3)}) {
        const GeometryCache c = compute_geometry(m);
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double lhs = c.traceless_norm[i] * c.traceless_norm[i] + c.mean_curvature[i] * c.mean_curvature[i] / 2.0;
            EXPECT_NEAR(lhs, c.second_form_norm[i] * c.second_form_norm[i], 1e-10 * std::max(1.0, lhs));
            EXPECT_GE(c.traceless_norm[i], 0.0);
        }
    }
}

TEST(Gradient, ConstantFieldHasZeroGradient)
{
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 2);
    const std::vector<double> f(m.num_vertices(), 3.7);
    for (double g : gradient_norm_field(m, f, vertex_normals(m))) EXPECT_LT(g, 1e-12);
}

TEST(Gradient, LinearFieldOnFlatPatch)
{
    const TriMesh m = grid_patch(8, 1.0, [](double x, double y) { return Vec3(x, y + 0.1 * x * x, 0.0); });
    std::vector<double> f;
    for (const Vec3& v : m.vertices()) f.push_back(v.x());
    const std::vector<Vec3> up(m.num_vertices(), Vec3(0, 0, 1));
    for (double g : gradient_norm_field(m, f, up)) EXPECT_NEAR(g, 1.0, 1e-12);
}

TEST(Gradient, MeanCurvatureGradientVanishesOnSphere)
{
    double prev = 1e9;
    for (int k = 2; k <= 4; ++k) {
        const GeometryCache c = compute_geometry(sphere(k));
        const double g = *std::max_element(c.grad_H_norm.begin(), c.grad_H_norm.end());
        EXPECT_LT(g, prev);
        prev = g;
    }
    EXPECT_LT(prev, 1e-2);
}

TEST(SurfaceIntegral, Examples)
{
    const TriMesh cube = gen_unit_cube();
    const auto w = vertex_area_weights(cube);
    EXPECT_NEAR(surface_integral(w, std::vector<double>(w.size(), 1.0)), 6.0, 1e-14);

    const GeometryCache c = compute_geometry(sphere(3));
    std::vector<double> h2;
    for (double h : c.mean_curvature) h2.push_back(h * h);
    EXPECT_NEAR(surface_integral(c.vertex_area, c.mean_curvature) / (8.0 * pi), 1.0, 1e-2);
    EXPECT_NEAR(surface_integral(c.vertex_area, h2) / (16.0 * pi), 1.0, 1e-2);
}

TEST(Volume, Polyhedra)
{
    EXPECT_DOUBLE_EQ(enclosed_volume(gen_unit_cube()), 1.0);
    EXPECT_NEAR(enclosed_volume(gen_tetrahedron()), 1.0 / 6.0, 1e-16);
}

TEST(Volume, IcosphereConverges)
{
    double prev = 1e9;
    for (int k = 1; k <= 4; ++k) {
        const double e = std::abs(enclosed_volume(sphere(k)) - 4.0 * pi / 3.0);
        EXPECT_LT(e, prev);
        prev = e;
    }
    EXPECT_LT(prev / (4.0 * pi / 3.0), 3e-3);
}

TEST(Volume, OpenMeshThrows)
{
    const TriMesh m = grid_patch(2, 1.0, [](double x, double y) { return Vec3(x, y, 0.0); });
    EXPECT_THROW(enclosed_volume(m), TopologyError);
}

TEST(Diameter, UnitSphere)
{
    const double d1 = diameter_estimate(sphere(3));
    EXPECT_NEAR(d1 / pi, 1.0, 0.1);
    const double d2 = diameter_estimate(sphere(3, 2.0));
    EXPECT_NEAR(d2 / d1, 2.0, 1e-12);
}

TEST(Diameter, BoundedBelowByChord)
{
    for (const TriMesh& m : {gen_ellipsoid(1.2, 1.0, 0.85, 2), gen_dumbbell(2.0, 0.4, 2)}) {
        double chord = 0.0;
        for (const Vec3& a : m.vertices()) {
            for (const Vec3& b : m.vertices()) chord = std::max(chord, (a - b).norm());
        }
        EXPECT_GE(diameter_estimate(m, 2), chord);
    }
}

TEST(Invariance, ScaleCovariance)
{
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 2);
    std::vector<Vec3> scaled;
    for (const Vec3& v : m.vertices()) scaled.push_back(2.0 * v);
    const TriMesh s = m.with_vertices(scaled);
    const GeometryCache a = compute_geometry(m);
    const GeometryCache b = compute_geometry(s);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(b.vertex_area[i], 4.0 * a.vertex_area[i], 1e-10);
        EXPECT_NEAR(b.mean_curvature[i], a.mean_curvature[i] / 2.0, 1e-10);
        EXPECT_NEAR(b.traceless_norm[i], a.traceless_norm[i] / 2.0, 1e-10);
        EXPECT_NEAR(b.second_form_norm[i], a.second_form_norm[i] / 2.0, 1e-10);
    }
    EXPECT_NEAR(enclosed_volume(s), 8.0 * enclosed_volume(m), 1e-10);
}

TEST(Invariance, RigidMotion)
{
    const TriMesh m = gen_perturbed_sphere(1.0, 0.1, Bump::harmonic(3, 1), 2);
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    const Vec3 shift(0.3, -4.0, 2.5);
    std::vector<Vec3> moved;
    for (const Vec3& v : m.vertices()) moved.push_back(rot * v + shift);
    const TriMesh r = m.with_vertices(moved);
    const GeometryCache a = compute_geometry(m);
    const GeometryCache b = compute_geometry(r);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(b.vertex_area[i], a.vertex_area[i], 1e-10);
        EXPECT_NEAR(b.mean_curvature[i], a.mean_curvature[i], 1e-10);
        EXPECT_NEAR(b.traceless_norm[i], a.traceless_norm[i], 1e-10);
        EXPECT_NEAR(b.second_form_norm[i], a.second_form_norm[i], 1e-10);
        EXPECT_LE((b.normal[i] - rot * a.normal[i]).norm(), 1e-10);
    }
    EXPECT_NEAR(b.total_area, a.total_area, 1e-10);
    EXPECT_NEAR(enclosed_volume(r), enclosed_volume(m), 1e-10);
}

TEST(Cotan, StiffnessIsSymmetricWithZeroRowSums)
{
    const Eigen::SparseMatrix<double> k = cotan_stiffness(gen_ellipsoid(1.2, 1.0, 0.85, 2));
    const Eigen::MatrixXd d(k);
    EXPECT_LT((d - d.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(d.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(d.diagonal().maxCoeff(), 0.0);
}

TEST(Parallel, ThreadedMatchesSerial)
{
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 3);
    const GeometryCache a = compute_geometry(m, Execution{1, true});
    const GeometryCache b = compute_geometry(m, Execution{4, true});
    EXPECT_EQ(a.mean_curvature, b.mean_curvature);
    EXPECT_EQ(a.traceless_norm, b.traceless_norm);
    EXPECT_EQ(a.total_area, b.total_area);
}
