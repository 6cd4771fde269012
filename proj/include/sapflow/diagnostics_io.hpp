#pragma once

#include "diagnostics.hpp"
#include "error.hpp"
#include "mesh_io.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sapflow {

/// Writes one header row and one row per record, 17 significant digits.
inline void write_series_csv(std::ostream& out, const TimeSeries& series)
{
    const auto& names = DiagnosticsRecord::field_names;
    for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
    out << '\n' << std::setprecision(17);
    for (const auto& r : series.records) {
        const auto v = r.values();
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
        out << '\n';
    }
}

inline void save_series_csv(const TimeSeries& series, const std::filesystem::path& path)
{
    std::ofstream out = detail::open_for_write(path);
    write_series_csv(out, series);
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Parses a diagnostics CSV. The header must list exactly the record fields
/// in order; every value must be finite and t strictly increasing.
inline TimeSeries read_series_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw ParseError("series CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string expected;
    for (std::size_t i = 0; i < DiagnosticsRecord::field_count; ++i) {
        expected += (i ? "," : "") + std::string(DiagnosticsRecord::field_names[i]);
    }
    if (line != expected) throw ParseError("series CSV header does not match the diagnostics fields");
    TimeSeries series;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::blank(line)) continue;
        const std::string ctx = "series CSV line " + std::to_string(lineno);
        std::vector<double> vals;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) vals.push_back(detail::parse_double(cell, ctx));
        if (vals.size() != DiagnosticsRecord::field_count) {
            throw ParseError(ctx + ": expected " + std::to_string(DiagnosticsRecord::field_count) + " columns");
        }
        for (double v : vals) {
            if (!std::isfinite(v)) throw ParseError(ctx + ": non-finite value");
        }
        const auto rec = DiagnosticsRecord::from_values(vals);
        if (!series.empty() && !(rec.t > series.back().t)) throw ParseError(ctx + ": t is not strictly increasing");
        series.records.push_back(rec);
    }
    return series;
}

inline TimeSeries load_series_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return read_series_csv(in);
}

/// Post-processed outcome of a run.
struct RunSummary
{
    std::string termination;
    std::optional<double> fitted_rate;
    std::optional<double> r_squared;
    double delta = 0.0;
    std::optional<SphereFit> final_sphere;
    std::optional<double> mean_convexity_onset;
    MaxResiduals residuals;
};

/// Decay fit of int |A°|^2 over the default window, the rate bound, the
/// final sphere fit, mean-convexity onset and residual maxima.
inline RunSummary summarize(const TimeSeries& series, const std::string& termination,
                            const TriMesh* final_mesh = nullptr)
{
    RunSummary s;
    s.termination = termination;
    try {
        const ExponentialFit fit = fit_exponential_rate(series, "int_traceless_sq");
        s.fitted_rate = fit.rate;
        s.r_squared = fit.r_squared;
    } catch (const Error&) {
    }
    s.delta = decay_rate_bound(series);
    if (final_mesh) {
        try {
            s.final_sphere = best_fit_sphere(*final_mesh);
        } catch (const DegenerateFit&) {
        }
    }
    s.mean_convexity_onset = mean_convexity_onset(series);
    s.residuals = max_residuals(series);
    return s;
}

inline nlohmann::json to_json(const RunSummary& s)
{
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["termination"] = s.termination;
    j["fitted_rate"] = opt(s.fitted_rate);
    j["R2"] = opt(s.r_squared);
    j["delta_paper"] = s.delta;
    if (s.final_sphere) {
        const auto& f = *s.final_sphere;
        j["final_sphere"] = {{"center", {f.center.x(), f.center.y(), f.center.z()}},
                             {"radius", f.radius},
                             {"residual", f.rms_residual}};
    } else {
        j["final_sphere"] = nullptr;
    }
    j["mean_convexity_onset"] = opt(s.mean_convexity_onset);
    j["max_residuals"] = {{"area", s.residuals.area}, {"h_ode", opt(s.residuals.h_ode)}, {"H2_ode", opt(s.residuals.H2_ode)}};
    return j;
}

} // namespace sapflow
