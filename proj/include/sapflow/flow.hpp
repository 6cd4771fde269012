#pragma once

#include "diagnostics.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "mesh.hpp"
#include "state.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace sapflow {

enum class Termination { converged, time_limit, blow_up };

enum class BlowUpKind { none, curvature, timestep_underflow, non_finite, mesh_degeneracy, solver_failure };

inline const char* to_string(Termination t)
{
    switch (t) {
    case Termination::converged: return "Converged";
    case Termination::time_limit: return "TimeLimit";
    case Termination::blow_up: return "BlowUp";
    }
    return "?";
}

inline const char* to_string(BlowUpKind k)
{
    switch (k) {
    case BlowUpKind::none: return "None";
    case BlowUpKind::curvature: return "Curvature";
    case BlowUpKind::timestep_underflow: return "TimestepUnderflow";
    case BlowUpKind::non_finite: return "NonFinite";
    case BlowUpKind::mesh_degeneracy: return "MeshDegeneracy";
    case BlowUpKind::solver_failure: return "SolverFailure";
    }
    return "?";
}

/// Raised by the stepping primitives; `run_flow` turns it into a BlowUp
/// termination.
class BlowUpError : public NumericalError
{
public:
    BlowUpError(BlowUpKind kind, const std::string& what) : NumericalError(what), m_kind(kind) {}
    BlowUpKind kind() const { return m_kind; }

private:
    BlowUpKind m_kind;
};

/// Normal velocity (1 - h H_i) nu_i per vertex.
inline std::vector<Vec3> flow_velocity(const GeometryCache& cache, double h)
{
    std::vector<Vec3> v(cache.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - h * cache.mean_curvature[i]) * cache.normal[i];
    return v;
}

inline double min_edge_length(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    double e = std::numeric_limits<double>::infinity();
    for (const auto& edge : mesh.topology().edges) {
        e = std::min(e, (x[edge.vertices[0]] - x[edge.vertices[1]]).norm());
    }
    return e;
}

/// Explicit CFL constant for the cotangent operator.
inline constexpr double explicit_cfl_constant = 4.0;

/// Time step for the next advance.
///
/// Explicit: cfl * e_min^2 / (4 |h|). Semi-implicit: cfl * e_min / max|1 - hH|,
/// bounding the per-step displacement. Both are capped by dt_max; a result
/// below 1e-12 raises BlowUpError(timestep_underflow).
inline double select_timestep(const TriMesh& mesh, const GeometryCache& cache, double h, const FlowConfig& config)
{
    const double e = min_edge_length(mesh);
    double dt = config.dt_max;
    if (config.stepping == Stepping::explicit_euler) {
        if (h != 0.0) dt = std::min(dt, config.cfl_safety * e * e / (explicit_cfl_constant * std::abs(h)));
    } else {
        double speed = 0.0;
        for (double hv : cache.mean_curvature) speed = std::max(speed, std::abs(1.0 - h * hv));
        if (speed > 0.0) dt = std::min(dt, config.cfl_safety * e / speed);
    }
    if (!(dt >= 1e-12)) {
        throw BlowUpError(BlowUpKind::timestep_underflow, "time step underflow (dt = " + std::to_string(dt) + ")");
    }
    return dt;
}

namespace detail {

inline void require_finite(const std::vector<Vec3>& x)
{
    for (const Vec3& p : x) {
        if (!p.allFinite()) throw BlowUpError(BlowUpKind::non_finite, "non-finite vertex position");
    }
}

} // namespace detail

/// Advances the state by dt with h frozen over the step; h is recomputed on
/// the new mesh.
///
/// Explicit: X <- X + dt (1 - hH) nu. Semi-implicit: the diffusive part is
/// implicit, (M - dt h K) X' = M (X + dt nu), where K is the cotangent
/// stiffness and M the diagonal vertex-area matrix, i.e.
/// (I - dt h L) X' = X + dt nu with the negative-semidefinite strong-form
/// Laplacian L = M^-1 K.
inline FlowState advance(const FlowState& state, const GeometryCache& cache, const FlowConfig& config, double dt)
{
    if (dt < 0.0) throw InvalidArgument("negative time step");
    if (dt == 0.0) return state;
    const auto& x = state.mesh.vertices();
    std::vector<Vec3> next(x.size());
    if (config.stepping == Stepping::explicit_euler) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            next[i] = x[i] + dt * (1.0 - state.h * cache.mean_curvature[i]) * cache.normal[i];
        }
    } else {
        const auto n = static_cast<Eigen::Index>(x.size());
        Eigen::SparseMatrix<double> system = -dt * state.h * cotan_stiffness(state.mesh);
        Eigen::MatrixXd rhs(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = cache.vertex_area[i];
            system.coeffRef(i, i) += m;
            rhs.row(i) = m * (x[i] + dt * cache.normal[i]).transpose();
        }
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
        if (solver.info() != Eigen::Success) {
            throw BlowUpError(BlowUpKind::solver_failure, "semi-implicit system factorization failed");
        }
        const Eigen::MatrixXd sol = solver.solve(rhs);
        if (solver.info() != Eigen::Success) {
            throw BlowUpError(BlowUpKind::solver_failure, "semi-implicit solve failed");
        }
        for (Eigen::Index i = 0; i < n; ++i) next[i] = sol.row(i).transpose();
    }
    detail::require_finite(next);
    FlowState out = state;
    out.mesh = state.mesh.with_vertices(std::move(next));
    out.t = state.t + dt;
    out.step_index = state.step_index + 1;
    try {
        out.h = compute_h(out.mesh, config.exec);
    } catch (const DegenerateGeometry& e) {
        throw BlowUpError(BlowUpKind::mesh_degeneracy, e.what());
    } catch (const OrientationError& e) {
        throw BlowUpError(BlowUpKind::mesh_degeneracy, e.what());
    }
    if (!std::isfinite(out.h)) throw BlowUpError(BlowUpKind::non_finite, "non-finite h");
    return out;
}

/// Area-weighted centroid of the vertices.
inline Vec3 area_centroid(const TriMesh& mesh)
{
    const auto w = vertex_area_weights(mesh);
    Vec3 c = Vec3::Zero();
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        c += w[i] * mesh.vertex(i);
        total += w[i];
    }
    return c / total;
}

/// Uniform scaling about the area centroid that restores the initial area
/// (length for curves). The applied factor is multiplied into
/// `pending_scale`; h is rescaled with the mesh.
inline FlowState enforce_area_constraint(const FlowState& state, double* applied_scale = nullptr)
{
    const double area = total_area(state.mesh);
    if (!(area > 0.0)) throw DegenerateGeometry("area projection of a zero-area mesh");
    const double exponent = state.mesh.is_curve() ? 1.0 : 0.5;
    const double s = std::pow(state.initial_area / area, exponent);
    if (applied_scale) *applied_scale = s;
    if (s == 1.0) return state;
    const Vec3 c = area_centroid(state.mesh);
    std::vector<Vec3> x = state.mesh.vertices();
    for (Vec3& p : x) p = c + s * (p - c);
    FlowState out = state;
    out.mesh = state.mesh.with_vertices(std::move(x));
    out.h = state.h * s;
    out.pending_scale = state.pending_scale * s;
    return out;
}

struct FlowResult
{
    TimeSeries series;
    FlowState final_state;
    Termination termination = Termination::time_limit;
    BlowUpKind blow_up = BlowUpKind::none;
    std::string message;
};

/// Called at every snapshot with the state, its geometry and the record.
using SnapshotObserver = std::function<void(const FlowState&, const GeometryCache&, const DiagnosticsRecord&)>;

namespace detail {

inline bool cache_finite(const GeometryCache& c)
{
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!std::isfinite(c.mean_curvature[i]) || !std::isfinite(c.second_form_norm[i]) ||
            !std::isfinite(c.vertex_area[i]) || !std::isfinite(c.grad_H_norm[i])) {
            return false;
        }
    }
    return true;
}

} // namespace detail

/// Evolves `mesh` until t_max, roundness (int |A°|^2 below roundness_tol of
/// its initial value), or blow-up. Snapshots are taken every
/// `snapshot_every` steps and at termination.
inline FlowResult run_flow(const TriMesh& mesh, const FlowConfig& config, const SnapshotObserver& observer = {})
{
    config.check();
    if (!mesh.is_curve()) require_closed_oriented(mesh);
    const Execution& exec = config.exec;

    FlowResult result;
    result.series.dimension = mesh.dimension();
    GeometryCache cache = compute_geometry(mesh, exec);
    FlowState state = make_state(mesh, cache, exec);

    double max_a0 = 0.0;
    for (double a : cache.second_form_norm) max_a0 = std::max(max_a0, a);
    const double blowup_a = config.blowup_max_A > 0.0 ? config.blowup_max_A : 1e3 * max_a0;
    const double converged_below = config.roundness_tol * state.initial_traceless_L2;

    auto snapshot = [&] {
        if (!result.series.empty() && result.series.back().t >= state.t) return;
        const DiagnosticsRecord rec = record_snapshot(state, cache, exec, config.diameter_sources, config.diameter_seed);
        result.series.records.push_back(rec);
        result.series.terms.push_back(identity_terms(cache, state.h, exec));
        state.pending_scale = 1.0;
        if (observer) observer(state, cache, rec);
    };
    auto finish = [&](Termination t, BlowUpKind kind, std::string msg) {
        result.termination = t;
        result.blow_up = kind;
        result.message = std::move(msg);
    };

    bool cache_current = true;
    try {
        while (true) {
            if (!detail::cache_finite(cache) || !std::isfinite(state.h)) {
                finish(Termination::blow_up, BlowUpKind::non_finite, "non-finite geometry");
                break;
            }
            double max_a = 0.0;
            for (double a : cache.second_form_norm) max_a = std::max(max_a, a);
            if (max_a > blowup_a) {
                finish(Termination::blow_up, BlowUpKind::curvature,
                       "max |A| = " + std::to_string(max_a) + " exceeds " + std::to_string(blowup_a));
                break;
            }
            if (!state.mesh.is_curve() && min_angle(state.mesh) < config.min_angle_floor) {
                finish(Termination::blow_up, BlowUpKind::mesh_degeneracy, "triangle angle below floor");
                break;
            }
            if (state.step_index % config.snapshot_every == 0) snapshot();

            const double traceless = integrate(
                cache, [&](std::size_t i) { return cache.traceless_norm[i] * cache.traceless_norm[i]; }, exec);
            if (traceless < converged_below) {
                finish(Termination::converged, BlowUpKind::none, "roundness tolerance reached");
                break;
            }
            if (state.t >= config.t_max * (1.0 - 1e-14) ||
                (config.max_steps > 0 && state.step_index >= config.max_steps)) {
                finish(Termination::time_limit, BlowUpKind::none, "time limit reached");
                break;
            }

            double dt = select_timestep(state.mesh, cache, state.h, config);
            dt = std::min(dt, config.t_max - state.t);
            cache_current = false;
            state = advance(state, cache, config, dt);
            if (config.area_projection) state = enforce_area_constraint(state);
            cache = compute_geometry(state.mesh, exec);
            state.h = compute_h(cache, exec);
            cache_current = true;
        }
    } catch (const BlowUpError& e) {
        finish(Termination::blow_up, e.kind(), e.what());
    } catch (const DegenerateGeometry& e) {
        finish(Termination::blow_up, BlowUpKind::mesh_degeneracy, e.what());
    } catch (const RankDeficientFit& e) {
        finish(Termination::blow_up, BlowUpKind::mesh_degeneracy, e.what());
    } catch (const OrientationError& e) {
        finish(Termination::blow_up, BlowUpKind::mesh_degeneracy, e.what());
    } catch (const DegenerateMeanCurvature& e) {
        finish(Termination::blow_up, BlowUpKind::non_finite, e.what());
    }

    if (cache_current && detail::cache_finite(cache)) {
        try {
            snapshot();
        } catch (const Error&) {
        }
    }
    result.final_state = state;
    return result;
}

} // namespace sapflow
