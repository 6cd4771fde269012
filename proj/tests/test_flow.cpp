#include <sapflow/diagnostics.hpp>
#include <sapflow/flow.hpp>
#include <sapflow/generators.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace sapflow;

namespace {

constexpr double pi = std::numbers::pi;

GeometryCache sphere_cache(std::size_t n, double radius)
{
    GeometryCache c;
    c.dimension = 2;
    c.vertex_area.assign(n, 4.0 * pi * radius * radius / n);
    c.mean_curvature.assign(n, 2.0 / radius);
    for (std::size_t i = 0; i < n; ++i) c.normal.push_back(Vec3(std::cos(i), std::sin(i), 0.0));
    c.second_form_norm.assign(n, std::sqrt(2.0) / radius);
    c.traceless_norm.assign(n, 0.0);
    c.grad_H_norm.assign(n, 0.0);
    c.total_area = 4.0 * pi * radius * radius;
    return c;
}

double hand_min_edge(const TriMesh& m)
{
    double e = 1e300;
    for (const Face& f : m.faces()) {
        for (int k = 0; k < 3; ++k) e = std::min(e, (m.vertex(f[k]) - m.vertex(f[(k + 1) % 3])).norm());
    }
    return e;
}

double max_displacement(const TriMesh& a, const TriMesh& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.num_vertices(); ++i) d = std::max(d, (a.vertex(i) - b.vertex(i)).norm());
    return d;
}

double traceless_energy(const TriMesh& m)
{
    const GeometryCache c = compute_geometry(m);
    return integrate(c, [&](std::size_t i) { return c.traceless_norm[i] * c.traceless_norm[i]; });
}

TriMesh explicit_steps(const TriMesh& mesh, int steps)
{
    FlowConfig cfg;
    FlowState s = make_state(mesh);
    for (int k = 0; k < steps; ++k) {
        const GeometryCache c = compute_geometry(s.mesh);
        s = enforce_area_constraint(advance(s, c, cfg, select_timestep(s.mesh, c, s.h, cfg)));
    }
    return s.mesh;
}

} // namespace

TEST(ComputeH, Spheres)
{
    EXPECT_NEAR(compute_h(gen_icosphere(1.0, Vec3::Zero(), 3)), 0.5, 1e-4);
    EXPECT_NEAR(compute_h(gen_icosphere(2.0, Vec3(1, 1, 1), 3)), 1.0, 2e-4);
    EXPECT_NEAR(compute_h(gen_polygon(256, 1.0)), 1.0, 1e-12);
}

TEST(ComputeH, ZeroMeanCurvatureIsDegenerate)
{
    const std::vector<double> area(10, 0.1);
    const std::vector<double> zero(10, 0.0);
    EXPECT_THROW(compute_h(area, zero), DegenerateMeanCurvature);
}

TEST(ComputeH, DefinitionMatchesIntegrals)
{
    const GeometryCache c = compute_geometry(gen_ellipsoid(1.2, 1.0, 0.85, 3));
    double ih = 0.0;
    double ih2 = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        ih += c.vertex_area[i] * c.mean_curvature[i];
        ih2 += c.vertex_area[i] * c.mean_curvature[i] * c.mean_curvature[i];
    }
    EXPECT_NEAR(compute_h(c), ih / ih2, 1e-15);
}

TEST(Velocity, ExactSphereIsStationary)
{
    const GeometryCache c = sphere_cache(50, 1.5);
    for (const Vec3& v : flow_velocity(c, 1.5 / 2.0)) EXPECT_EQ(v.norm(), 0.0);
}

TEST(Velocity, ZeroHMovesOutward)
{
    const GeometryCache c = sphere_cache(20, 1.0);
    const auto v = flow_velocity(c, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], c.normal[i]);
}

TEST(Velocity, LargeCurvatureMovesInward)
{
    GeometryCache c = sphere_cache(20, 1.0);
    c.mean_curvature[3] = 5.0;
    const auto v = flow_velocity(c, 0.5);
    EXPECT_LT(v[3].dot(c.normal[3]), 0.0);
    EXPECT_NEAR(v[3].dot(c.normal[3]), 1.0 - 2.5, 1e-15);
}

TEST(Timestep, ExplicitFormula)
{
    const TriMesh m = gen_icosphere(1.0, Vec3::Zero(), 3);
    const GeometryCache c = compute_geometry(m);
    const double h = compute_h(c);
    FlowConfig cfg;
    cfg.dt_max = 1.0;
    const double e = hand_min_edge(m);
    EXPECT_NEAR(select_timestep(m, c, h, cfg), 0.5 * e * e / (4.0 * h), 1e-15);
    FlowConfig doubled = cfg;
    doubled.cfl_safety = 1.0;
    EXPECT_NEAR(select_timestep(m, c, h, doubled), 2.0 * select_timestep(m, c, h, cfg), 1e-15);
    cfg.dt_max = 1e-5;
    EXPECT_EQ(select_timestep(m, c, h, cfg), 1e-5);
}

TEST(Timestep, SemiImplicitNearSphereHitsCap)
{
    const TriMesh m = gen_icosphere(1.0, Vec3::Zero(), 3);
    const GeometryCache c = compute_geometry(m);
    FlowConfig cfg;
    cfg.stepping = Stepping::semi_implicit;
    EXPECT_EQ(select_timestep(m, c, compute_h(c), cfg), cfg.dt_max);
}

TEST(Timestep, SemiImplicitFormula)
{
    const TriMesh m = gen_ellipsoid(1.5, 1.0, 0.6, 2);
    const GeometryCache c = compute_geometry(m);
    const double h = compute_h(c);
    FlowConfig cfg;
    cfg.stepping = Stepping::semi_implicit;
    cfg.dt_max = 10.0;
    double speed = 0.0;
    for (double x : c.mean_curvature) speed = std::max(speed, std::abs(1.0 - h * x));
    EXPECT_NEAR(select_timestep(m, c, h, cfg), 0.5 * hand_min_edge(m) / speed, 1e-15);
}

TEST(Timestep, UnderflowIsBlowUp)
{
    const TriMesh m = gen_icosphere(1.0, Vec3::Zero(), 2);
    const GeometryCache c = compute_geometry(m);
    FlowConfig cfg;
    try {
        select_timestep(m, c, 1e12, cfg);
        FAIL();
    } catch (const BlowUpError& e) {
        EXPECT_EQ(e.kind(), BlowUpKind::timestep_underflow);
    }
}

TEST(Advance, ZeroStepIsIdentity)
{
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 2);
    const FlowState s = make_state(m);
    const GeometryCache c = compute_geometry(m);
    for (Stepping st : {Stepping::explicit_euler, Stepping::semi_implicit}) {
        FlowConfig cfg;
        cfg.stepping = st;
        const FlowState out = advance(s, c, cfg, 0.0);
        EXPECT_EQ(out.t, s.t);
        EXPECT_EQ(out.step_index, s.step_index);
        EXPECT_EQ(out.mesh.vertices(), m.vertices());
    }
}

TEST(Advance, ExplicitStepIsForwardEuler)
{
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 2);
    const FlowState s = make_state(m);
    const GeometryCache c = compute_geometry(m);
    const FlowState out = advance(s, c, FlowConfig{}, 1e-3);
    EXPECT_DOUBLE_EQ(out.t, 1e-3);
    EXPECT_EQ(out.step_index, 1);
    const auto v = flow_velocity(c, s.h);
    for (std::size_t i = 0; i < m.num_vertices(); ++i) {
        EXPECT_LE((out.mesh.vertex(i) - (m.vertex(i) + 1e-3 * v[i])).norm(), 1e-15);
    }
    EXPECT_EQ(out.h, compute_h(out.mesh));
    EXPECT_TRUE(out.mesh.shares_topology_with(m));
}

TEST(Advance, SemiImplicitSolvesBackwardEuler)
{
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 2);
    const FlowState s = make_state(m);
    const GeometryCache c = compute_geometry(m);
    FlowConfig cfg;
    cfg.stepping = Stepping::semi_implicit;
    const double dt = 5e-3;
    const FlowState out = advance(s, c, cfg, dt);
    // Residual of (M - dt h K) X' = M (X + dt nu), assembled independently.
    const Eigen::MatrixXd k(cotan_stiffness(m));
    const auto n = static_cast<Eigen::Index>(m.num_vertices());
    Eigen::MatrixXd x1(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) x1.row(i) = out.mesh.vertex(i).transpose();
    const Eigen::MatrixXd kx = k * x1;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 lhs = c.vertex_area[i] * out.mesh.vertex(i) - dt * s.h * kx.row(i).transpose();
        const Vec3 rhs = c.vertex_area[i] * (m.vertex(i) + dt * c.normal[i]);
        EXPECT_LE((lhs - rhs).norm(), 1e-12);
    }
}

TEST(Advance, SphereStationarityRefines)
{
    double prev = 1e9;
    for (int k = 2; k <= 3; ++k) {
        const TriMesh m = gen_icosphere(1.0, Vec3::Zero(), k);
        const double d = max_displacement(m, explicit_steps(m, 100));
        EXPECT_LT(d, prev / 2.0);
        prev = d;
    }
    EXPECT_LT(prev, 1e-5);
}

TEST(Advance, EllipsoidStepReducesTracelessEnergy)
{
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 3);
    EXPECT_LT(traceless_energy(explicit_steps(m, 1)), traceless_energy(m));
}

TEST(AreaConstraint, ExactAreaIsUntouched)
{
    const FlowState s = make_state(gen_ellipsoid(1.2, 1.0, 0.85, 2));
    double scale = 0.0;
    const FlowState out = enforce_area_constraint(s, &scale);
    EXPECT_EQ(scale, 1.0);
    EXPECT_EQ(out.mesh.vertices(), s.mesh.vertices());
}

TEST(AreaConstraint, UndoesUniformScaling)
{
    for (const TriMesh& m : {gen_ellipsoid(1.2, 1.0, 0.85, 2), gen_ellipse(1.5, 1.0, 64)}) {
        FlowState s = make_state(m);
        std::vector<Vec3> big;
        for (const Vec3& v : m.vertices()) big.push_back(1.1 * v + Vec3(0.2, 0.1, 0.0));
        s.mesh = m.with_vertices(big);
        double scale = 0.0;
        const FlowState out = enforce_area_constraint(s, &scale);
        EXPECT_NEAR(scale, 1.0 / 1.1, 1e-14);
        EXPECT_NEAR(total_area(out.mesh) / s.initial_area, 1.0, 1e-12);
        EXPECT_NEAR(out.pending_scale, 1.0 / 1.1, 1e-14);
    }
}

TEST(RunFlow, SphereHitsTimeLimit)
{
    const TriMesh m = gen_icosphere(1.0, Vec3::Zero(), 3);
    FlowConfig cfg;
    cfg.t_max = 1.0;
    const FlowResult r = run_flow(m, cfg);
    EXPECT_EQ(r.termination, Termination::time_limit);
    EXPECT_DOUBLE_EQ(r.final_state.t, 1.0);
    EXPECT_LT(max_displacement(m, r.final_state.mesh), 1e-4);
    EXPECT_DOUBLE_EQ(r.series.records.back().t, 1.0);
}

TEST(RunFlow, DumbbellBlowUpIsReported)
{
    FlowConfig cfg;
    cfg.blowup_max_A = 1e-3;
    FlowResult r;
    ASSERT_NO_THROW(r = run_flow(gen_dumbbell(2.0, 0.3, 2), cfg));
    EXPECT_EQ(r.termination, Termination::blow_up);
    EXPECT_EQ(r.blow_up, BlowUpKind::curvature);
    EXPECT_FALSE(r.message.empty());
    EXPECT_FALSE(r.series.empty());
}

TEST(RunFlow, MaxStepsCountsAsTimeLimit)
{
    FlowConfig cfg;
    cfg.max_steps = 7;
    cfg.snapshot_every = 3;
    const FlowResult r = run_flow(gen_ellipsoid(1.2, 1.0, 0.85, 2), cfg);
    EXPECT_EQ(r.termination, Termination::time_limit);
    EXPECT_EQ(r.final_state.step_index, 7);
    ASSERT_EQ(r.series.size(), 4u);
    EXPECT_EQ(r.series.terms.size(), r.series.size());
}

TEST(RunFlow, ConservationAndMonotonicity)
{
    FlowConfig cfg;
    cfg.t_max = 0.5;
    const FlowResult r = run_flow(gen_perturbed_sphere(1.0, 0.15, Bump::harmonic(3, 1), 3), cfg);
    const auto& rec = r.series.records;
    ASSERT_GT(rec.size(), 5u);
    for (std::size_t i = 0; i < rec.size(); ++i) {
        EXPECT_LE(area_identity_residual(rec[i]), 1e-12);
        EXPECT_NEAR(rec[i].area / rec[0].area, 1.0, 1e-12);
        EXPECT_GE(rec[i].area - rec[i].int_H * rec[i].int_H / rec[i].int_H2, -1e-10);
        if (i > 0) {
            EXPECT_GT(rec[i].t, rec[i - 1].t);
            EXPECT_GE((rec[i].volume - rec[i - 1].volume) / rec[i - 1].volume, -1e-8);
        }
    }
}

TEST(RunFlow, Deterministic)
{
    FlowConfig cfg;
    cfg.t_max = 0.2;
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 2);
    const FlowResult a = run_flow(m, cfg);
    const FlowResult b = run_flow(m, cfg);
    ASSERT_EQ(a.series.size(), b.series.size());
    for (std::size_t i = 0; i < a.series.size(); ++i) {
        EXPECT_EQ(a.series.records[i].values(), b.series.records[i].values());
    }
    EXPECT_EQ(a.final_state.mesh.vertices(), b.final_state.mesh.vertices());
}

TEST(RunFlow, EllipseRoundsUp)
{
    FlowConfig cfg;
    cfg.t_max = 2.0;
    const TriMesh m = gen_ellipse(1.5, 1.0, 128);
    const FlowResult r = run_flow(m, cfg);
    ASSERT_NE(r.termination, Termination::blow_up) << r.message;
    const auto& rec = r.series.records;
    EXPECT_NEAR(rec.back().area / rec.front().area, 1.0, 1e-12);
    EXPECT_GT(rec.back().volume, rec.front().volume);
    EXPECT_LT(best_fit_sphere(r.final_state.mesh).rms_residual, 0.1 * best_fit_sphere(m).rms_residual);
}

TEST(RunFlow, ExplicitAndSemiImplicitAgree)
{
    const TriMesh m = gen_ellipsoid(1.2, 1.0, 0.85, 3);
    FlowConfig ex;
    FlowConfig si;
    si.stepping = Stepping::semi_implicit;
    const FlowResult a = run_flow(m, ex);
    const FlowResult b = run_flow(m, si);
    ASSERT_EQ(a.termination, Termination::converged) << a.message;
    ASSERT_EQ(b.termination, Termination::converged) << b.message;
    const SphereFit fa = best_fit_sphere(a.final_state.mesh);
    const SphereFit fb = best_fit_sphere(b.final_state.mesh);
    EXPECT_NEAR(fb.radius / fa.radius, 1.0, 5e-3);
    EXPECT_LE((fb.center - fa.center).norm(), 5e-3 * fa.radius);
}

TEST(Config, Validation)
{
    FlowConfig cfg;
    EXPECT_NO_THROW(cfg.check());
    cfg.roundness_tol = 1.5;
    EXPECT_THROW(cfg.check(), InvalidArgument);
    cfg = FlowConfig{};
    cfg.cfl_safety = 0.0;
    EXPECT_THROW(cfg.check(), InvalidArgument);
    EXPECT_THROW(run_flow(gen_icosphere(1.0, Vec3::Zero(), 1), cfg), InvalidArgument);
}
