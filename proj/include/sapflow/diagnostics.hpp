#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "mesh.hpp"
#include "state.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sapflow {

/// One snapshot of every monitored scalar. Field order is the CSV column
/// order.
struct DiagnosticsRecord
{
    double t = 0.0;
    double area = 0.0;
    double volume = 0.0;
    double h = 0.0;
    double int_H = 0.0;
    double int_H2 = 0.0;
    double min_H = 0.0;
    double max_H = 0.0;
    double max_abs_A = 0.0;
    double max_traceless = 0.0;
    double int_traceless_sq = 0.0;
    double max_grad_H = 0.0;
    double sup_one_minus_hH = 0.0;
    double diameter_est = 0.0;
    /// int |H|^(n-1) dmu.
    double int_Hpow = 0.0;
    double min_angle = 0.0;
    /// Product of the area-projection scale factors applied since the
    /// previous snapshot (1 when projection is off).
    double area_scale_applied = 1.0;

    static constexpr std::size_t field_count = 17;

    static constexpr std::array<const char*, field_count> field_names{
        "t", "area", "volume", "h", "int_H", "int_H2", "min_H", "max_H", "max_abs_A",
        "max_traceless", "int_traceless_sq", "max_grad_H", "sup_one_minus_hH", "diameter_est",
        "int_Hpow", "min_angle", "area_scale_applied"};

    std::array<double, field_count> values() const
    {
        return {t, area, volume, h, int_H, int_H2, min_H, max_H, max_abs_A, max_traceless,
                int_traceless_sq, max_grad_H, sup_one_minus_hH, diameter_est, int_Hpow, min_angle,
                area_scale_applied};
    }

    static DiagnosticsRecord from_values(std::span<const double> v)
    {
        if (v.size() != field_count) throw InvalidArgument("record needs 17 values");
        DiagnosticsRecord r;
        double* fields[] = {&r.t, &r.area, &r.volume, &r.h, &r.int_H, &r.int_H2, &r.min_H,
                            &r.max_H, &r.max_abs_A, &r.max_traceless, &r.int_traceless_sq,
                            &r.max_grad_H, &r.sup_one_minus_hH, &r.diameter_est, &r.int_Hpow,
                            &r.min_angle, &r.area_scale_applied};
        for (std::size_t i = 0; i < field_count; ++i) *fields[i] = v[i];
        return r;
    }

    /// Selects a field by its column name; throws InvalidArgument if unknown.
    double field(const std::string& name) const
    {
        const auto vals = values();
        for (std::size_t i = 0; i < field_count; ++i) {
            if (name == field_names[i]) return vals[i];
        }
        throw InvalidArgument("unknown diagnostics field '" + name + "'");
    }
};

/// Right-hand sides of the integral identities, evaluated on one snapshot.
struct IdentityTerms
{
    /// int H (1 - hH) dmu, the area first variation.
    double first_variation = 0.0;
    /// Predicted dh/dt.
    double dh_dt = 0.0;
    /// Predicted d/dt int H^2 dmu.
    double dH2_dt = 0.0;
};

struct TimeSeries
{
    std::vector<DiagnosticsRecord> records;
    /// Identity right-hand sides per record; empty when not tracked.
    std::vector<IdentityTerms> terms;
    /// Hypersurface dimension n of the run.
    int dimension = 2;
    /// Free-form provenance (generator spec or input path).
    std::string provenance;

    bool empty() const { return records.empty(); }
    std::size_t size() const { return records.size(); }
    const DiagnosticsRecord& front() const { return records.front(); }
    const DiagnosticsRecord& back() const { return records.back(); }
};

/// Every monitored scalar of the current state.
inline DiagnosticsRecord record_snapshot(const FlowState& state, const GeometryCache& cache,
                                         const Execution& exec = {}, int diameter_sources = 32,
                                         std::uint64_t diameter_seed = 0)
{
    const std::size_t nv = cache.size();
    const int n = cache.dimension;
    DiagnosticsRecord r;
    r.t = state.t;
    r.area = cache.total_area;
    r.volume = enclosed_volume(state.mesh);
    r.h = compute_h(cache, exec);
    r.int_H = surface_integral(cache.vertex_area, cache.mean_curvature, exec);
    r.int_H2 = integrate(cache, [&](std::size_t i) { return cache.mean_curvature[i] * cache.mean_curvature[i]; }, exec);
    r.int_traceless_sq =
        integrate(cache, [&](std::size_t i) { return cache.traceless_norm[i] * cache.traceless_norm[i]; }, exec);
    r.int_Hpow = integrate(cache, [&](std::size_t i) { return std::pow(std::abs(cache.mean_curvature[i]), n - 1); }, exec);
    r.min_H = std::numeric_limits<double>::infinity();
    r.max_H = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nv; ++i) {
        const double hv = cache.mean_curvature[i];
        r.min_H = std::min(r.min_H, hv);
        r.max_H = std::max(r.max_H, hv);
        r.max_abs_A = std::max(r.max_abs_A, cache.second_form_norm[i]);
        r.max_traceless = std::max(r.max_traceless, cache.traceless_norm[i]);
        r.max_grad_H = std::max(r.max_grad_H, cache.grad_H_norm[i]);
        r.sup_one_minus_hH = std::max(r.sup_one_minus_hH, std::abs(1.0 - r.h * hv));
    }
    r.diameter_est = diameter_estimate(state.mesh, static_cast<std::size_t>(diameter_sources),
                                       static_cast<std::size_t>(diameter_seed % std::max<std::size_t>(1, nv)));
    r.min_angle = min_angle(state.mesh);
    r.area_scale_applied = state.pending_scale;
    return r;
}

/// Identity right-hand sides on a cached geometry with coefficient h.
inline IdentityTerms identity_terms(const GeometryCache& cache, double h, const Execution& exec = {})
{
    const auto& H = cache.mean_curvature;
    const auto& A = cache.second_form_norm;
    const auto& G = cache.grad_H_norm;
    IdentityTerms out;
    out.first_variation = integrate(cache, [&](std::size_t i) { return H[i] * (1.0 - h * H[i]); }, exec);
    const double int_h2 = integrate(cache, [&](std::size_t i) { return H[i] * H[i]; }, exec);
    const double num = integrate(
        cache,
        [&](std::size_t i) {
            const double s = 1.0 - h * H[i];
            return -(1.0 - 2.0 * h * H[i]) * s * A[i] * A[i] + H[i] * H[i] * s * s + 2.0 * h * h * G[i] * G[i];
        },
        exec);
    out.dh_dt = num / int_h2;
    out.dH2_dt = integrate(
        cache,
        [&](std::size_t i) {
            const double s = 1.0 - h * H[i];
            return H[i] * H[i] * H[i] * s - 2.0 * h * G[i] * G[i] - 2.0 * s * H[i] * A[i] * A[i];
        },
        exec);
    return out;
}

/// Identity right-hand sides of a mesh (h recomputed from the mesh).
inline IdentityTerms identity_terms(const TriMesh& mesh, const Execution& exec = {})
{
    const GeometryCache cache = compute_geometry(mesh, exec);
    return identity_terms(cache, compute_h(cache, exec), exec);
}

/// Residual triple for one interval between adjacent snapshots.
struct IntervalResidual
{
    double t0 = 0.0;
    double t1 = 0.0;
    /// |int H (1 - hH)| / (1 + |int H^2|) at the left snapshot.
    double area = 0.0;
    /// |dh/dt (finite difference) - predicted dh/dt at the left snapshot|.
    double h_ode = 0.0;
    /// Same for int H^2 dmu.
    double H2_ode = 0.0;
};

/// Relative area first-variation residual of one record.
inline double area_identity_residual(const DiagnosticsRecord& r)
{
    return std::abs(r.int_H - r.h * r.int_H2) / (1.0 + std::abs(r.int_H2));
}

/// Finite-difference residuals of the h and int H^2 evolution laws.
///
/// Snapshot values at the right end of each interval are mapped back to the
/// unprojected state by undoing the accumulated area-projection scale s:
/// h scales like length, int H^2 dmu like length^(n-2).
inline std::vector<IntervalResidual> identity_residuals(const TimeSeries& series)
{
    if (series.terms.size() != series.records.size()) {
        throw InvalidArgument("identity residuals need per-snapshot identity terms");
    }
    std::vector<IntervalResidual> out;
    const int n = series.dimension;
    for (std::size_t k = 0; k + 1 < series.size(); ++k) {
        const DiagnosticsRecord& a = series.records[k];
        const DiagnosticsRecord& b = series.records[k + 1];
        const IdentityTerms& ta = series.terms[k];
        const double dt = b.t - a.t;
        const double s = b.area_scale_applied;
        const double h1 = b.h / s;
        const double int_h2_1 = b.int_H2 / std::pow(s, n - 2);
        IntervalResidual r;
        r.t0 = a.t;
        r.t1 = b.t;
        r.area = area_identity_residual(a);
        r.h_ode = std::abs((h1 - a.h) / dt - ta.dh_dt);
        r.H2_ode = std::abs((int_h2_1 - a.int_H2) / dt - ta.dH2_dt);
        out.push_back(r);
    }
    return out;
}

struct MaxResiduals
{
    double area = 0.0;
    std::optional<double> h_ode;
    std::optional<double> H2_ode;
};

/// Maxima over the run; the ODE residuals need identity terms.
inline MaxResiduals max_residuals(const TimeSeries& series)
{
    MaxResiduals m;
    for (const auto& r : series.records) m.area = std::max(m.area, area_identity_residual(r));
    if (series.terms.size() == series.records.size() && series.size() >= 2) {
        double rh = 0.0;
        double rh2 = 0.0;
        for (const auto& r : identity_residuals(series)) {
            rh = std::max(rh, r.h_ode);
            rh2 = std::max(rh2, r.H2_ode);
        }
        m.h_ode = rh;
        m.H2_ode = rh2;
    }
    return m;
}

struct ExponentialFit
{
    /// -slope of log(value) against t.
    double rate = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t samples = 0;
};

/// Least-squares line through (t_i, log y_i). Throws WindowTooSmall for
/// fewer than 5 samples and NonPositiveSamples if any y_i <= 0. R^2 is 1 for
/// data with zero variance in log y.
inline ExponentialFit fit_exponential(std::span<const double> t, std::span<const double> y)
{
    if (t.size() != y.size()) throw InvalidArgument("fit: size mismatch");
    if (t.size() < 5) throw WindowTooSmall("exponential fit needs at least 5 samples, got " + std::to_string(t.size()));
    for (double v : y) {
        if (!(v > 0.0)) throw NonPositiveSamples("exponential fit needs strictly positive samples");
    }
    const auto n = static_cast<double>(t.size());
    double mt = 0.0;
    double ml = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        mt += t[i];
        ml += std::log(y[i]);
    }
    mt /= n;
    ml /= n;
    double stt = 0.0;
    double stl = 0.0;
    double sll = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double dt = t[i] - mt;
        const double dl = std::log(y[i]) - ml;
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    if (!(stt > 0.0)) throw WindowTooSmall("exponential fit needs distinct sample times");
    const double slope = stl / stt;
    ExponentialFit f;
    f.rate = -slope;
    f.intercept = ml - slope * mt;
    f.samples = t.size();
    // Identical samples leave only rounding noise in the log variance.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(ml));
    if (sll > n * noise * noise) {
        double sse = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double e = std::log(y[i]) - (f.intercept + slope * t[i]);
            sse += e * e;
        }
        f.r_squared = 1.0 - sse / sll;
    } else {
        f.r_squared = 1.0;
    }
    return f;
}

/// Default decay-fit window: [0.2 T, 0.8 T] of the recorded time span.
inline std::pair<double, double> default_fit_window(const TimeSeries& series)
{
    if (series.empty()) throw InvalidArgument("empty series");
    const double t0 = series.front().t;
    const double span = series.back().t - t0;
    return {t0 + 0.2 * span, t0 + 0.8 * span};
}

/// Fits `field` over records with t in [t0, t1].
inline ExponentialFit fit_exponential_rate(const TimeSeries& series, const std::string& field, double t0, double t1)
{
    std::vector<double> t;
    std::vector<double> y;
    for (const auto& r : series.records) {
        if (r.t >= t0 && r.t <= t1) {
            t.push_back(r.t);
            y.push_back(r.field(field));
        }
    }
    return fit_exponential(t, y);
}

inline ExponentialFit fit_exponential_rate(const TimeSeries& series, const std::string& field)
{
    const auto [t0, t1] = default_fit_window(series);
    return fit_exponential_rate(series, field, t0, t1);
}

/// Exponential decay-rate lower bound delta = 1 / (4 n L^2 |M_0|), where
/// L = max over snapshots of {max|A|, h, 1/h, int H^2, 1/int H^2}.
inline double decay_rate_bound(const TimeSeries& series)
{
    if (series.empty()) throw InvalidArgument("decay bound of an empty series");
    double lambda = 0.0;
    for (const auto& r : series.records) {
        lambda = std::max({lambda, r.max_abs_A, r.h, 1.0 / r.h, r.int_H2, 1.0 / r.int_H2});
    }
    return 1.0 / (4.0 * series.dimension * lambda * lambda * series.front().area);
}

struct SphereFit
{
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
    /// Root mean square of |x - center| - radius over the vertices.
    double rms_residual = 0.0;
};

/// Algebraic least-squares sphere through the vertices (linear in center and
/// radius^2) followed by one Gauss-Newton step on the geometric distances.
/// Curves are fitted with a circle in the xy-plane.
inline SphereFit best_fit_sphere(const TriMesh& mesh)
{
    const auto& x = mesh.vertices();
    const int dim = mesh.is_curve() ? 2 : 3;
    const auto nv = static_cast<Eigen::Index>(x.size());
    if (nv < dim + 1) throw DegenerateFit("too few vertices for a sphere fit");

    // Work relative to the vertex mean for conditioning.
    Vec3 mean = Vec3::Zero();
    for (const Vec3& p : x) mean += p;
    mean /= static_cast<double>(nv);

    Eigen::MatrixXd a(nv, dim + 1);
    Eigen::VectorXd b(nv);
    for (Eigen::Index i = 0; i < nv; ++i) {
        const Vec3 p = x[i] - mean;
        for (int d = 0; d < dim; ++d) a(i, d) = 2.0 * p(d);
        a(i, dim) = 1.0;
        b(i) = p.head(dim).squaredNorm();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < dim + 1) throw DegenerateFit("vertices are coplanar");
    const Eigen::VectorXd sol = qr.solve(b);
    Vec3 c = Vec3::Zero();
    for (int d = 0; d < dim; ++d) c(d) = sol(d);
    const double r2 = sol(dim) + c.squaredNorm();
    if (!(r2 > 0.0)) throw DegenerateFit("algebraic fit produced no real sphere");
    double r = std::sqrt(r2);

    // One Gauss-Newton step on residuals |p - c| - r.
    Eigen::MatrixXd j(nv, dim + 1);
    Eigen::VectorXd res(nv);
    for (Eigen::Index i = 0; i < nv; ++i) {
        const Vec3 d = (x[i] - mean) - c;
        const double len = d.head(dim).norm();
        res(i) = len - r;
        for (int k = 0; k < dim; ++k) j(i, k) = len > 0.0 ? -d(k) / len : 0.0;
        j(i, dim) = -1.0;
    }
    const Eigen::VectorXd step = j.colPivHouseholderQr().solve(-res);
    for (int k = 0; k < dim; ++k) c(k) += step(k);
    r += step(dim);

    SphereFit fit;
    fit.center = c + mean;
    if (dim == 2) fit.center.z() = 0.0;
    fit.radius = r;
    double ss = 0.0;
    for (const Vec3& p : x) {
        const double e = (p - fit.center).norm() - r;
        ss += e * e;
    }
    fit.rms_residual = std::sqrt(ss / static_cast<double>(nv));
    return fit;
}

/// Earliest snapshot time from which min_H stays positive through the end
/// of the series, or nullopt.
inline std::optional<double> mean_convexity_onset(const TimeSeries& series)
{
    std::optional<double> onset;
    for (const auto& r : series.records) {
        if (r.min_H > 0.0) {
            if (!onset) onset = r.t;
        } else {
            onset.reset();
        }
    }
    return onset;
}

} // namespace sapflow
