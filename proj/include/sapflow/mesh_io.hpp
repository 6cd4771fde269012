#pragma once

#include "error.hpp"
#include "mesh.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace sapflow {

enum class MeshFormat { off, obj, csv };

/// Format implied by the file extension (.off, .obj, .csv).
inline MeshFormat format_from_path(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".off") return MeshFormat::off;
    if (ext == ".obj") return MeshFormat::obj;
    if (ext == ".csv") return MeshFormat::csv;
    throw InvalidArgument("cannot infer mesh format from '" + path.string() + "'");
}

namespace detail {

inline std::string strip_comment(const std::string& line)
{
    const auto pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

inline bool blank(const std::string& s)
{
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

inline double parse_double(const std::string& tok, const std::string& context)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(context + ": expected a number, got '" + tok + "'");
    }
}

inline long parse_long(const std::string& tok, const std::string& context)
{
    try {
        std::size_t used = 0;
        const long v = std::stol(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(context + ": expected an integer, got '" + tok + "'");
    }
}

/// Whitespace tokens of the non-comment part of `in`.
inline std::vector<std::string> tokens_without_comments(std::istream& in)
{
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(strip_comment(line));
        std::string tok;
        while (ls >> tok) out.push_back(tok);
    }
    return out;
}

inline std::ofstream open_for_write(const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

} // namespace detail

/// Parses ASCII OFF (triangles only). Connectivity is not validated here.
inline TriMesh parse_off(std::istream& in)
{
    const auto tok = detail::tokens_without_comments(in);
    std::size_t k = 0;
    auto next = [&](const char* what) -> const std::string& {
        if (k >= tok.size()) throw ParseError(std::string("OFF: unexpected end of file reading ") + what);
        return tok[k++];
    };
    if (next("header") != "OFF") throw ParseError("OFF: missing OFF header");
    const long nv = detail::parse_long(next("vertex count"), "OFF header");
    const long nf = detail::parse_long(next("face count"), "OFF header");
    detail::parse_long(next("edge count"), "OFF header");
    if (nv < 0 || nf < 0) throw ParseError("OFF: negative element count");
    std::vector<Vec3> v(static_cast<std::size_t>(nv));
    for (auto& p : v) {
        for (int d = 0; d < 3; ++d) p(d) = detail::parse_double(next("vertex"), "OFF vertex");
    }
    std::vector<Face> f(static_cast<std::size_t>(nf));
    for (auto& t : f) {
        const long arity = detail::parse_long(next("face"), "OFF face");
        if (arity != 3) throw ParseError("OFF: only triangles are supported (face with " + std::to_string(arity) + " vertices)");
        for (int d = 0; d < 3; ++d) t[d] = static_cast<int>(detail::parse_long(next("face index"), "OFF face"));
    }
    if (k != tok.size()) throw ParseError("OFF: trailing data after the last face");
    return TriMesh::surface(std::move(v), std::move(f));
}

/// Parses ASCII OBJ: `v x y z` and triangular `f a b c` records (any
/// `/vt/vn` suffixes and negative relative indices accepted; other records
/// ignored).
inline TriMesh parse_obj(std::istream& in)
{
    std::vector<Vec3> v;
    std::vector<Face> f;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(detail::strip_comment(line));
        std::string key;
        if (!(ls >> key)) continue;
        const std::string ctx = "OBJ line " + std::to_string(lineno);
        if (key == "v") {
            Vec3 p;
            std::string tok;
            for (int d = 0; d < 3; ++d) {
                if (!(ls >> tok)) throw ParseError(ctx + ": vertex needs 3 coordinates");
                p(d) = detail::parse_double(tok, ctx);
            }
            v.push_back(p);
        } else if (key == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                const long raw = detail::parse_long(tok.substr(0, tok.find('/')), ctx);
                if (raw == 0) throw ParseError(ctx + ": OBJ indices are 1-based");
                idx.push_back(static_cast<int>(raw > 0 ? raw - 1 : static_cast<long>(v.size()) + raw));
            }
            if (idx.size() != 3) throw ParseError(ctx + ": only triangles are supported");
            f.push_back({idx[0], idx[1], idx[2]});
        }
    }
    return TriMesh::surface(std::move(v), std::move(f));
}

/// Parses a closed curve: one `x,y` pair per line; blank and `#` lines skipped.
inline TriMesh parse_curve_csv(std::istream& in)
{
    std::vector<Vec2> p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = detail::strip_comment(line);
        if (detail::blank(body)) continue;
        const auto comma = body.find(',');
        const std::string ctx = "CSV line " + std::to_string(lineno);
        if (comma == std::string::npos || body.find(',', comma + 1) != std::string::npos) {
            throw ParseError(ctx + ": expected 'x,y'");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        p.emplace_back(detail::parse_double(trim(body.substr(0, comma)), ctx),
                       detail::parse_double(trim(body.substr(comma + 1)), ctx));
    }
    return TriMesh::curve(p);
}

/// Loads a mesh and requires a closed, consistently oriented manifold.
///
/// Throws IoError (unreadable), ParseError (malformed) or TopologyError
/// ("<k> boundary edges", non-manifold or misoriented input).
inline TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    TriMesh mesh;
    switch (format) {
    case MeshFormat::off: mesh = parse_off(in); break;
    case MeshFormat::obj: mesh = parse_obj(in); break;
    case MeshFormat::csv: mesh = parse_curve_csv(in); break;
    }
    if (!mesh.is_curve()) require_closed_oriented(mesh);
    return mesh;
}

inline TriMesh load_mesh(const std::filesystem::path& path)
{
    return load_mesh(path, format_from_path(path));
}

/// Comment lines (text after '#', leading whitespace trimmed) of a mesh file.
inline std::vector<std::string> read_comments(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find('#');
        if (pos == std::string::npos) continue;
        std::string c = line.substr(pos + 1);
        const auto b = c.find_first_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : c.substr(b));
    }
    return out;
}

/// Writes vertices with 17 significant digits, so loading reproduces every
/// coordinate exactly. Curves are only written as CSV, surfaces only as OFF
/// or OBJ. `comments` become `# ...` lines after the header.
inline void write_mesh(std::ostream& out, const TriMesh& mesh, MeshFormat format,
                       const std::vector<std::string>& comments = {})
{
    out << std::setprecision(17);
    if (mesh.is_curve()) {
        if (format != MeshFormat::csv) throw InvalidArgument("curves are saved as CSV");
        for (const auto& c : comments) out << "# " << c << '\n';
        for (const Vec3& p : mesh.vertices()) out << p.x() << ',' << p.y() << '\n';
        return;
    }
    switch (format) {
    case MeshFormat::off:
        out << "OFF\n";
        for (const auto& c : comments) out << "# " << c << '\n';
        out << mesh.num_vertices() << ' ' << mesh.num_faces() << ' ' << mesh.num_edges() << '\n';
        for (const Vec3& p : mesh.vertices()) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
        for (const Face& f : mesh.faces()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
        break;
    case MeshFormat::obj:
        for (const auto& c : comments) out << "# " << c << '\n';
        for (const Vec3& p : mesh.vertices()) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
        for (const Face& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
        break;
    case MeshFormat::csv: throw InvalidArgument("surfaces are saved as OFF or OBJ");
    }
}

inline void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format,
                      const std::vector<std::string>& comments = {})
{
    std::ofstream out = detail::open_for_write(path);
    write_mesh(out, mesh, format, comments);
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void save_mesh(const TriMesh& mesh, const std::filesystem::path& path)
{
    save_mesh(mesh, path, format_from_path(path));
}

} // namespace sapflow
