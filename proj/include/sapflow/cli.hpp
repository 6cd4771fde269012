#pragma once

#include "diagnostics.hpp"
#include "diagnostics_io.hpp"
#include "error.hpp"
#include "flow.hpp"
#include "generators.hpp"
#include "mesh_io.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sapflow {

/// Parameters of a built-in mesh generator. Only the fields relevant to
/// `kind` are used, but all of them round-trip through the manifest.
struct GeneratorSpec
{
    /// icosphere | ellipsoid | perturbed | dumbbell | polygon | ellipse
    std::string kind = "icosphere";
    double radius = 1.0;
    std::array<double, 3> center{0.0, 0.0, 0.0};
    int subdiv = 3;
    std::array<double, 3> axes{1.0, 1.0, 1.0};
    double amplitude = 0.0;
    /// Gaussian dent instead of a spherical harmonic (perturbed only).
    bool dent = false;
    int degree = 2;
    int order = 0;
    std::array<double, 3> direction{0.0, 0.0, 1.0};
    double width = 0.3;
    double length = 2.0;
    double neck = 0.4;
    int sides = 64;

    bool operator==(const GeneratorSpec&) const = default;
};

inline TriMesh generate_mesh(const GeneratorSpec& g)
{
    auto v3 = [](const std::array<double, 3>& a) { return Vec3(a[0], a[1], a[2]); };
    if (g.kind == "icosphere") return gen_icosphere(g.radius, v3(g.center), g.subdiv);
    if (g.kind == "ellipsoid") return gen_ellipsoid(g.axes[0], g.axes[1], g.axes[2], g.subdiv);
    if (g.kind == "perturbed") {
        const Bump bump = g.dent ? Bump::dent(v3(g.direction), g.width) : Bump::harmonic(g.degree, g.order);
        return gen_perturbed_sphere(g.radius, g.amplitude, bump, g.subdiv);
    }
    if (g.kind == "dumbbell") return gen_dumbbell(g.length, g.neck, g.subdiv);
    if (g.kind == "polygon") return gen_polygon(g.sides, g.radius, Vec2(g.center[0], g.center[1]));
    if (g.kind == "ellipse") return gen_ellipse(g.axes[0], g.axes[1], g.sides);
    throw InvalidArgument("unknown generator '" + g.kind + "'");
}

/// Everything needed to reproduce a run.
struct RunManifest
{
    std::optional<std::string> mesh;
    std::optional<GeneratorSpec> generator;
    FlowConfig config;
    std::string output = "sapflow_out";
    /// Write meshes/step_<n>.off every this many steps (0: at every snapshot).
    int mesh_every = 0;

    bool operator==(const RunManifest&) const = default;

    /// Throws InvalidArgument unless exactly one input is given and the flow
    /// configuration is in range.
    void check() const
    {
        if (mesh.has_value() == generator.has_value()) {
            throw InvalidArgument("manifest needs exactly one of 'mesh' or 'generator'");
        }
        if (output.empty()) throw InvalidArgument("manifest needs an output directory");
        if (mesh_every < 0) throw InvalidArgument("mesh_every must be >= 0");
        config.check();
    }
};

namespace detail {

inline std::string fmt17(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string fmt3(const std::array<double, 3>& a)
{
    return fmt17(a[0]) + "," + fmt17(a[1]) + "," + fmt17(a[2]);
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key)
{
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    throw ParseError("manifest key '" + key + "': expected on/off, got '" + v + "'");
}

inline std::array<double, 3> parse_triple(const std::string& v, const std::string& key)
{
    std::array<double, 3> out{};
    std::stringstream ss(v);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
        if (k >= 3) throw ParseError("manifest key '" + key + "': expected 3 comma-separated values");
        out[k++] = parse_double(trim(cell), "manifest key '" + key + "'");
    }
    if (k != 3) throw ParseError("manifest key '" + key + "': expected 3 comma-separated values");
    return out;
}

} // namespace detail

/// Applies one `key = value` pair; unknown keys raise ParseError.
inline void apply_manifest_entry(RunManifest& m, const std::string& key, const std::string& value)
{
    const std::string ctx = "manifest key '" + key + "'";
    auto num = [&] { return detail::parse_double(value, ctx); };
    auto integer = [&] { return detail::parse_long(value, ctx); };
    auto gen = [&]() -> GeneratorSpec& {
        if (!m.generator) m.generator = GeneratorSpec{};
        return *m.generator;
    };
    FlowConfig& c = m.config;
    if (key == "mesh") m.mesh = value;
    else if (key == "generator") gen().kind = value;
    else if (key == "radius") gen().radius = num();
    else if (key == "center") gen().center = detail::parse_triple(value, key);
    else if (key == "subdiv") gen().subdiv = static_cast<int>(integer());
    else if (key == "axes") gen().axes = detail::parse_triple(value, key);
    else if (key == "amplitude") gen().amplitude = num();
    else if (key == "dent") gen().dent = detail::parse_bool(value, key);
    else if (key == "degree") gen().degree = static_cast<int>(integer());
    else if (key == "order") gen().order = static_cast<int>(integer());
    else if (key == "direction") gen().direction = detail::parse_triple(value, key);
    else if (key == "width") gen().width = num();
    else if (key == "length") gen().length = num();
    else if (key == "neck") gen().neck = num();
    else if (key == "sides") gen().sides = static_cast<int>(integer());
    else if (key == "stepping") {
        if (value == "explicit") c.stepping = Stepping::explicit_euler;
        else if (value == "semi-implicit") c.stepping = Stepping::semi_implicit;
        else throw ParseError(ctx + ": expected explicit or semi-implicit");
    }
    else if (key == "cfl_safety") c.cfl_safety = num();
    else if (key == "dt_max") c.dt_max = num();
    else if (key == "area_projection") c.area_projection = detail::parse_bool(value, key);
    else if (key == "t_max") c.t_max = num();
    else if (key == "roundness_tol") c.roundness_tol = num();
    else if (key == "blowup_max_A") c.blowup_max_A = num();
    else if (key == "snapshot_every") c.snapshot_every = static_cast<int>(integer());
    else if (key == "max_steps") c.max_steps = integer();
    else if (key == "min_angle_floor") c.min_angle_floor = num();
    else if (key == "diameter_sources") c.diameter_sources = static_cast<int>(integer());
    else if (key == "seed") c.diameter_seed = static_cast<std::uint64_t>(integer());
    else if (key == "threads") c.exec.threads = static_cast<unsigned>(std::max(1L, integer()));
    else if (key == "deterministic") c.exec.deterministic = detail::parse_bool(value, key);
    else if (key == "output") m.output = value;
    else if (key == "mesh_every") m.mesh_every = static_cast<int>(integer());
    else throw ParseError("unknown manifest key '" + key + "'");
}

/// Parses `key = value` lines; `#` starts a comment.
inline RunManifest parse_manifest(std::istream& in, RunManifest base = {})
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = detail::trim(detail::strip_comment(line));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ParseError("manifest line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        apply_manifest_entry(base, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
    }
    return base;
}

inline RunManifest parse_manifest(const std::string& text)
{
    std::istringstream in(text);
    return parse_manifest(in);
}

inline RunManifest load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    return parse_manifest(in);
}

/// Canonical manifest text; parse_manifest(manifest_text(m)) == m.
inline std::string manifest_text(const RunManifest& m)
{
    using detail::fmt17;
    std::ostringstream os;
    if (m.mesh) os << "mesh = " << *m.mesh << '\n';
    if (m.generator) {
        const GeneratorSpec& g = *m.generator;
        os << "generator = " << g.kind << '\n'
           << "radius = " << fmt17(g.radius) << '\n'
           << "center = " << detail::fmt3(g.center) << '\n'
           << "subdiv = " << g.subdiv << '\n'
           << "axes = " << detail::fmt3(g.axes) << '\n'
           << "amplitude = " << fmt17(g.amplitude) << '\n'
           << "dent = " << (g.dent ? "on" : "off") << '\n'
           << "degree = " << g.degree << '\n'
           << "order = " << g.order << '\n'
           << "direction = " << detail::fmt3(g.direction) << '\n'
           << "width = " << fmt17(g.width) << '\n'
           << "length = " << fmt17(g.length) << '\n'
           << "neck = " << fmt17(g.neck) << '\n'
           << "sides = " << g.sides << '\n';
    }
    const FlowConfig& c = m.config;
    os << "stepping = " << (c.stepping == Stepping::explicit_euler ? "explicit" : "semi-implicit") << '\n'
       << "cfl_safety = " << fmt17(c.cfl_safety) << '\n'
       << "dt_max = " << fmt17(c.dt_max) << '\n'
       << "area_projection = " << (c.area_projection ? "on" : "off") << '\n'
       << "t_max = " << fmt17(c.t_max) << '\n'
       << "roundness_tol = " << fmt17(c.roundness_tol) << '\n'
       << "blowup_max_A = " << fmt17(c.blowup_max_A) << '\n'
       << "snapshot_every = " << c.snapshot_every << '\n'
       << "max_steps = " << c.max_steps << '\n'
       << "min_angle_floor = " << fmt17(c.min_angle_floor) << '\n'
       << "diameter_sources = " << c.diameter_sources << '\n'
       << "seed = " << c.diameter_seed << '\n'
       << "threads = " << c.exec.threads << '\n'
       << "deterministic = " << (c.exec.deterministic ? "on" : "off") << '\n'
       << "output = " << m.output << '\n'
       << "mesh_every = " << m.mesh_every << '\n';
    return os.str();
}

/// Process exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_input_error = 1, exit_blow_up = 2 };

inline std::string termination_label(const FlowResult& r)
{
    if (r.termination == Termination::blow_up) return std::string("BlowUp(") + to_string(r.blow_up) + ")";
    return to_string(r.termination);
}

namespace detail {

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path)
{
    std::ofstream out = open_for_write(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_text(const std::string& text, const std::filesystem::path& path)
{
    std::ofstream out = open_for_write(path);
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void save_identity_terms(const TimeSeries& s, const std::filesystem::path& path)
{
    std::ofstream out = open_for_write(path);
    out << "t,first_variation,dh_dt,dH2_dt\n" << std::setprecision(17);
    for (std::size_t i = 0; i < s.terms.size(); ++i) {
        const auto& t = s.terms[i];
        out << s.records[i].t << ',' << t.first_variation << ',' << t.dh_dt << ',' << t.dH2_dt << '\n';
    }
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Identity terms matching the records of `series` by time; empty if the
/// file does not cover every record.
inline std::vector<IdentityTerms> load_identity_terms(const std::filesystem::path& path, const TimeSeries& series)
{
    std::ifstream in(path);
    if (!in) return {};
    std::string line;
    std::getline(in, line);
    std::vector<IdentityTerms> out;
    while (std::getline(in, line)) {
        if (blank(line)) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ls, cell, ',')) v.push_back(parse_double(trim(cell), "identity terms"));
        if (v.size() != 4) throw ParseError("identity terms: expected 4 columns");
        if (out.size() >= series.size() || v[0] != series.records[out.size()].t) return {};
        out.push_back({v[1], v[2], v[3]});
    }
    if (out.size() != series.size()) return {};
    return out;
}

inline std::string mesh_extension(const TriMesh& m)
{
    return m.is_curve() ? ".csv" : ".off";
}

} // namespace detail

/// Executes a manifest, writing into `manifest.output`:
/// series.csv, identity_terms.csv, summary.json, metadata.json,
/// manifest.cfg, final.off (final.csv for curves) and meshes/step_<n>.off.
/// Returns exit_ok for Converged / TimeLimit, exit_blow_up for BlowUp and
/// exit_input_error for unusable input (message on `err`).
inline int cmd_run(const RunManifest& manifest, std::ostream& err = std::cerr)
{
    namespace fs = std::filesystem;
    try {
        manifest.check();
        const TriMesh mesh = manifest.mesh ? load_mesh(*manifest.mesh) : generate_mesh(*manifest.generator);
        const fs::path dir(manifest.output);
        std::error_code ec;
        fs::create_directories(dir / "meshes", ec);
        if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

        const int mesh_every = manifest.mesh_every > 0 ? manifest.mesh_every : manifest.config.snapshot_every;
        const std::string ext = detail::mesh_extension(mesh);
        const MeshFormat fmt = mesh.is_curve() ? MeshFormat::csv : MeshFormat::off;
        auto observer = [&](const FlowState& s, const GeometryCache&, const DiagnosticsRecord& rec) {
            if (s.step_index % mesh_every != 0) return;
            char name[32];
            std::snprintf(name, sizeof name, "step_%06lld", static_cast<long long>(s.step_index));
            save_mesh(s.mesh, dir / "meshes" / (name + ext), fmt,
                      {"t " + detail::fmt17(rec.t), "step " + std::to_string(s.step_index)});
        };
        FlowResult result = run_flow(mesh, manifest.config, observer);
        result.series.provenance = manifest.mesh ? *manifest.mesh : "generator:" + manifest.generator->kind;

        save_series_csv(result.series, dir / "series.csv");
        detail::save_identity_terms(result.series, dir / "identity_terms.csv");
        save_mesh(result.final_state.mesh, dir / ("final" + ext), fmt, {"t " + detail::fmt17(result.final_state.t)});
        detail::write_text(manifest_text(manifest), dir / "manifest.cfg");

        const std::string label = termination_label(result);
        nlohmann::json meta = {{"termination", label},
                               {"message", result.message},
                               {"dimension", result.series.dimension},
                               {"provenance", result.series.provenance},
                               {"steps", result.final_state.step_index},
                               {"final_t", result.final_state.t},
                               {"manifest", manifest_text(manifest)}};
        detail::write_json(meta, dir / "metadata.json");
        const RunSummary summary = summarize(result.series, label, &result.final_state.mesh);
        detail::write_json(to_json(summary), dir / "summary.json");

        if (result.termination == Termination::blow_up) {
            err << "blow-up: " << result.message << '\n';
            return exit_blow_up;
        }
        return exit_ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
}

/// Recomputes the summary of a run from its series.csv and sibling files
/// (metadata.json, identity_terms.csv, final mesh) when present.
inline RunSummary analyze_series(const std::filesystem::path& csv)
{
    namespace fs = std::filesystem;
    TimeSeries series = load_series_csv(csv);
    if (series.empty()) throw ParseError("series CSV has no records");
    const fs::path dir = csv.parent_path();
    std::string termination = "Unknown";
    if (std::ifstream meta_in(dir / "metadata.json"); meta_in) {
        try {
            const auto meta = nlohmann::json::parse(meta_in);
            termination = meta.value("termination", termination);
            series.dimension = meta.value("dimension", series.dimension);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("metadata.json: ") + e.what());
        }
    } else if (fs::exists(dir / "final.csv")) {
        series.dimension = 1;
    }
    series.terms = detail::load_identity_terms(dir / "identity_terms.csv", series);
    std::optional<TriMesh> final_mesh;
    for (const char* name : {"final.off", "final.csv"}) {
        if (fs::exists(dir / name)) {
            final_mesh = load_mesh(dir / name);
            break;
        }
    }
    return summarize(series, termination, final_mesh ? &*final_mesh : nullptr);
}

/// Writes the recomputed summary JSON to `out_path`, or to `out` when empty.
inline int cmd_analyze(const std::filesystem::path& csv, const std::filesystem::path& out_path,
                       std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    try {
        const nlohmann::json j = to_json(analyze_series(csv));
        if (out_path.empty()) {
            out << j.dump(2) << '\n';
        } else {
            detail::write_json(j, out_path);
        }
        return exit_ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
}

/// Generates a mesh and writes it to `out_path` (OFF, OBJ or CSV by
/// extension) or to `out` as OFF / CSV when empty. Reports size and the
/// minimum mean curvature on `err`.
inline int cmd_generate(const GeneratorSpec& spec, const std::filesystem::path& out_path,
                        std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    try {
        const TriMesh mesh = generate_mesh(spec);
        if (out_path.empty()) {
            write_mesh(out, mesh, mesh.is_curve() ? MeshFormat::csv : MeshFormat::off);
        } else {
            save_mesh(mesh, out_path);
        }
        const auto w = vertex_area_weights(mesh);
        const auto n = vertex_normals(mesh);
        const auto h = mean_curvature_field(mesh, w, n);
        const double min_h = *std::min_element(h.begin(), h.end());
        err << spec.kind << ": " << mesh.num_vertices() << " vertices, " << mesh.num_faces() << " faces, min H = "
            << std::setprecision(6) << min_h << (min_h < 0.0 ? " (not mean convex)" : "") << '\n';
        return exit_ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
}

} // namespace sapflow
