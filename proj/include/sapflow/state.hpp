#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "mesh.hpp"
#include "parallel.hpp"

#include <cmath>
#include <cstdint>
#include <string>

namespace sapflow {

enum class Stepping { explicit_euler, semi_implicit };

/// Stepping and stopping parameters of a flow run.
struct FlowConfig
{
    Stepping stepping = Stepping::explicit_euler;
    /// Fraction of the stability / displacement limit used per step, in (0, 1].
    double cfl_safety = 0.5;
    double dt_max = 1e-2;
    /// Rescale after each step so the area stays at its initial value.
    bool area_projection = true;
    double t_max = 10.0;
    /// Stop once the integral of |A°|^2 falls below roundness_tol times its
    /// initial value.
    double roundness_tol = 1e-6;
    /// Curvature blow-up threshold on max |A|; values <= 0 select
    /// 1e3 * (initial max |A|).
    double blowup_max_A = 0.0;
    /// Record a snapshot every this many steps (and always at the end).
    int snapshot_every = 10;
    /// Hard cap on step count; 0 means unlimited. Reaching it ends the run
    /// with TimeLimit.
    std::int64_t max_steps = 0;
    /// Smallest admissible triangle angle (radians) before the run stops with
    /// a mesh degeneracy.
    double min_angle_floor = 0.5 * 3.14159265358979323846 / 180.0;
    /// Farthest-point sources used by the diameter estimate.
    int diameter_sources = 32;
    /// Selects the first diameter source vertex (seed modulo |V|).
    std::uint64_t diameter_seed = 0;
    Execution exec;

    bool operator==(const FlowConfig&) const = default;

    /// Throws InvalidArgument on out-of-range values.
    void check() const
    {
        if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw InvalidArgument("cfl_safety must be in (0, 1]");
        if (!(dt_max > 0.0)) throw InvalidArgument("dt_max must be positive");
        if (!(t_max > 0.0)) throw InvalidArgument("t_max must be positive");
        if (!(roundness_tol > 0.0 && roundness_tol < 1.0)) throw InvalidArgument("roundness_tol must be in (0, 1)");
        if (snapshot_every <= 0) throw InvalidArgument("snapshot_every must be positive");
        if (max_steps < 0) throw InvalidArgument("max_steps must be >= 0");
        if (!(min_angle_floor >= 0.0)) throw InvalidArgument("min_angle_floor must be >= 0");
        if (diameter_sources <= 0) throw InvalidArgument("diameter_sources must be positive");
    }
};

/// Evolving hypersurface plus run bookkeeping.
struct FlowState
{
    TriMesh mesh;
    double t = 0.0;
    /// Nonlocal coefficient h = int H / int H^2 of the current mesh.
    double h = 0.0;
    std::int64_t step_index = 0;
    /// |M_0|, fixed for the run.
    double initial_area = 0.0;
    /// int_{M_0} |A°|^2.
    double initial_traceless_L2 = 0.0;
    /// Product of area-projection scale factors applied since the last snapshot.
    double pending_scale = 1.0;
};

/// h = int H dmu / int H^2 dmu. Throws DegenerateMeanCurvature when
/// int H^2 dmu < 1e-14 * area.
inline double compute_h(std::span<const double> vertex_area, std::span<const double> mean_curvature,
                        const Execution& exec = {})
{
    double area = 0.0;
    for (double a : vertex_area) area += a;
    const double int_h = parallel_sum(vertex_area.size(), exec,
                                      [&](std::size_t i) { return mean_curvature[i] * vertex_area[i]; });
    const double int_h2 = parallel_sum(vertex_area.size(), exec, [&](std::size_t i) {
        return mean_curvature[i] * mean_curvature[i] * vertex_area[i];
    });
    if (!(int_h2 >= 1e-14 * area)) {
        throw DegenerateMeanCurvature("integral of H^2 vanishes; the flow is undefined");
    }
    return int_h / int_h2;
}

inline double compute_h(const GeometryCache& cache, const Execution& exec = {})
{
    return compute_h(cache.vertex_area, cache.mean_curvature, exec);
}

/// h of a mesh without the (costlier) second-form fit.
inline double compute_h(const TriMesh& mesh, const Execution& exec = {})
{
    const auto area = vertex_area_weights(mesh);
    const auto nrm = vertex_normals(mesh);
    const auto mean = mean_curvature_field(mesh, area, nrm);
    return compute_h(area, mean, exec);
}

/// Initial state of a run on `mesh`.
inline FlowState make_state(const TriMesh& mesh, const GeometryCache& cache, const Execution& exec = {})
{
    FlowState s;
    s.mesh = mesh;
    s.h = compute_h(cache, exec);
    s.initial_area = cache.total_area;
    s.initial_traceless_L2 = integrate(
        cache, [&](std::size_t i) { return cache.traceless_norm[i] * cache.traceless_norm[i]; }, exec);
    return s;
}

inline FlowState make_state(const TriMesh& mesh, const Execution& exec = {})
{
    return make_state(mesh, compute_geometry(mesh, exec), exec);
}

} // namespace sapflow
