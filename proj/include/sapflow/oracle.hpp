#pragma once

#include "diagnostics.hpp"
#include "error.hpp"
#include "flow.hpp"
#include "generators.hpp"
#include "geometry.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace sapflow {

/// Exact values for a round n-sphere (n = 2) or circle (n = 1).
struct SphereReference
{
    double radius = 1.0;
    int n = 2;
    double H_exact = 0.0;
    double h_exact = 0.0;
    /// Surface area (n = 2) or length (n = 1).
    double area_exact = 0.0;
    /// Enclosed volume (n = 2) or enclosed area (n = 1).
    double volume_exact = 0.0;
};

inline SphereReference sphere_reference(double radius, int n)
{
    if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
    if (n != 1 && n != 2) throw InvalidArgument("only n = 1 and n = 2 are representable");
    constexpr double pi = std::numbers::pi;
    SphereReference s;
    s.radius = radius;
    s.n = n;
    s.H_exact = n / radius;
    s.h_exact = radius / n;
    s.area_exact = n == 2 ? 4.0 * pi * radius * radius : 2.0 * pi * radius;
    s.volume_exact = n == 2 ? 4.0 / 3.0 * pi * radius * radius * radius : pi * radius * radius;
    return s;
}

/// Surface area of the ellipsoid x^2/a^2 + y^2/b^2 + z^2/c^2 = 1 by nested
/// adaptive Gauss-Kronrod quadrature of the parametric area element.
inline double ellipsoid_area(double a, double b, double c)
{
    using boost::math::quadrature::gauss_kronrod;
    constexpr double pi = std::numbers::pi;
    auto inner = [=](double theta) {
        const double st = std::sin(theta);
        const double ct = std::cos(theta);
        auto integrand = [=](double phi) {
            const double cp = std::cos(phi);
            const double sp = std::sin(phi);
            return st * std::sqrt(b * b * c * c * st * st * cp * cp + a * a * c * c * st * st * sp * sp +
                                  a * a * b * b * ct * ct);
        };
        return gauss_kronrod<double, 61>::integrate(integrand, 0.0, 2.0 * pi, 10, 1e-14);
    };
    return gauss_kronrod<double, 61>::integrate(inner, 0.0, pi, 10, 1e-14);
}

/// Principal-curvature data of the ellipsoid at a point on it (outward
/// normal, H = k1 + k2 > 0).
struct EllipsoidCurvature
{
    double mean = 0.0;
    double gauss = 0.0;
    /// |A°| = |k1 - k2| / sqrt(2).
    double traceless = 0.0;
};

inline EllipsoidCurvature ellipsoid_curvature(double a, double b, double c, const Vec3& x)
{
    const Vec3 p(x.x() / (a * a), x.y() / (b * b), x.z() / (c * c));
    const double pn = p.norm();
    const double abc2 = a * a * b * b * c * c;
    EllipsoidCurvature k;
    k.mean = (a * a + b * b + c * c - x.squaredNorm()) / (abc2 * pn * pn * pn);
    k.gauss = 1.0 / (abc2 * pn * pn * pn * pn);
    const double half = 0.5 * k.mean;
    k.traceless = std::sqrt(2.0 * std::max(0.0, half * half - k.gauss));
    return k;
}

/// A refinable test shape with analytic references.
struct StudyShape
{
    std::string name;
    std::function<TriMesh(int)> generate;
    double area_exact = 0.0;
    double volume_exact = 0.0;
    std::function<double(const Vec3&)> mean_curvature_exact;
    std::function<double(const Vec3&)> traceless_exact;
};

inline StudyShape sphere_shape(double radius)
{
    const SphereReference ref = sphere_reference(radius, 2);
    StudyShape s;
    s.name = "icosphere";
    s.generate = [radius](int level) { return gen_icosphere(radius, Vec3::Zero(), level); };
    s.area_exact = ref.area_exact;
    s.volume_exact = ref.volume_exact;
    s.mean_curvature_exact = [h = ref.H_exact](const Vec3&) { return h; };
    s.traceless_exact = [](const Vec3&) { return 0.0; };
    return s;
}

inline StudyShape ellipsoid_shape(double a, double b, double c)
{
    StudyShape s;
    s.name = "ellipsoid";
    s.generate = [=](int level) { return gen_ellipsoid(a, b, c, level); };
    s.area_exact = ellipsoid_area(a, b, c);
    s.volume_exact = 4.0 / 3.0 * std::numbers::pi * a * b * c;
    s.mean_curvature_exact = [=](const Vec3& x) { return ellipsoid_curvature(a, b, c, x).mean; };
    s.traceless_exact = [=](const Vec3& x) { return ellipsoid_curvature(a, b, c, x).traceless; };
    return s;
}

struct LevelErrors
{
    int level = 0;
    std::size_t faces = 0;
    double area = 0.0;
    double volume = 0.0;
    /// max_i |H_i - H(x_i)|.
    double mean_curvature = 0.0;
    /// max_i ||A°|_i - |A°|(x_i)|.
    double traceless = 0.0;
};

/// Errors per refinement level and log2 ratios between consecutive levels.
struct ConvergenceStudy
{
    std::string shape;
    std::vector<LevelErrors> levels;

    /// log2(e_k / e_{k+1}) for the selected error; empty for fewer than 3
    /// levels.
    std::vector<double> orders(double LevelErrors::*error) const
    {
        std::vector<double> out;
        if (levels.size() < 3) return out;
        for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
            out.push_back(std::log2(levels[k].*error / levels[k + 1].*error));
        }
        return out;
    }

    /// Least-squares slope of -log2(error) against level; NaN for fewer
    /// than 3 levels.
    double fitted_order(double LevelErrors::*error) const
    {
        if (levels.size() < 3) return std::nan("");
        double mx = 0.0;
        double my = 0.0;
        for (const auto& l : levels) {
            mx += l.level;
            my += -std::log2(l.*error);
        }
        mx /= static_cast<double>(levels.size());
        my /= static_cast<double>(levels.size());
        double sxx = 0.0;
        double sxy = 0.0;
        for (const auto& l : levels) {
            sxx += (l.level - mx) * (l.level - mx);
            sxy += (l.level - mx) * (-std::log2(l.*error) - my);
        }
        return sxy / sxx;
    }
};

inline ConvergenceStudy refinement_study(const StudyShape& shape, const std::vector<int>& levels,
                                         const Execution& exec = {})
{
    if (levels.size() < 3) throw InvalidArgument("a refinement study needs at least 3 levels");
    ConvergenceStudy study;
    study.shape = shape.name;
    for (int level : levels) {
        const TriMesh mesh = shape.generate(level);
        const GeometryCache cache = compute_geometry(mesh, exec);
        LevelErrors e;
        e.level = level;
        e.faces = mesh.num_faces();
        e.area = std::abs(cache.total_area - shape.area_exact);
        e.volume = std::abs(enclosed_volume(mesh) - shape.volume_exact);
        for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
            const Vec3& x = mesh.vertex(i);
            e.mean_curvature = std::max(e.mean_curvature, std::abs(cache.mean_curvature[i] - shape.mean_curvature_exact(x)));
            e.traceless = std::max(e.traceless, std::abs(cache.traceless_norm[i] - shape.traceless_exact(x)));
        }
        study.levels.push_back(e);
    }
    return study;
}

inline nlohmann::json to_json(const ConvergenceStudy& study)
{
    using nlohmann::json;
    json table = json::array();
    for (const auto& l : study.levels) {
        table.push_back({{"level", l.level},
                         {"faces", l.faces},
                         {"area_error", l.area},
                         {"volume_error", l.volume},
                         {"max_H_error", l.mean_curvature},
                         {"max_traceless_error", l.traceless}});
    }
    json orders = json::object();
    if (study.levels.size() >= 3) {
        orders["area"] = study.orders(&LevelErrors::area);
        orders["volume"] = study.orders(&LevelErrors::volume);
        orders["max_H"] = study.orders(&LevelErrors::mean_curvature);
        orders["max_traceless"] = study.orders(&LevelErrors::traceless);
    }
    return {{"shape", study.shape}, {"levels", table}, {"orders", orders}};
}

struct ModeRate
{
    int degree = 0;
    double amplitude = 0.0;
    double rate = 0.0;
    double r_squared = 0.0;
    Termination termination = Termination::time_limit;
};

/// Flow-measured decay rate of int |A°|^2 from a sphere perturbed by the
/// zonal harmonic of degree l, fitted over the default window.
///
/// An unperturbed sphere has an identically zero traceless series, so
/// amplitude 0 is fitted on zeros and raises NonPositiveSamples.
inline ModeRate linearized_mode_rates(double radius, int degree, double amplitude, int subdivisions,
                                      const FlowConfig& config)
{
    if (std::abs(amplitude) > 0.02 * radius) {
        throw InvalidArgument("linear-regime amplitude must be at most 0.02 * radius");
    }
    if (amplitude == 0.0) {
        const std::vector<double> t{0.0, 1.0, 2.0, 3.0, 4.0};
        const std::vector<double> zero(t.size(), 0.0);
        fit_exponential(t, zero);
    }
    const TriMesh mesh = gen_perturbed_sphere(radius, amplitude, Bump::harmonic(degree, 0), subdivisions);
    const FlowResult run = run_flow(mesh, config);
    if (run.termination == Termination::blow_up) throw NumericalError("mode-rate run blew up: " + run.message);
    const ExponentialFit fit = fit_exponential_rate(run.series, "int_traceless_sq");
    ModeRate m;
    m.degree = degree;
    m.amplitude = amplitude;
    m.rate = fit.rate;
    m.r_squared = fit.r_squared;
    m.termination = run.termination;
    return m;
}

} // namespace sapflow
