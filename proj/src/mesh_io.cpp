#include "lamina/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lamina/errors.hpp"

namespace lamina {

namespace {

// Whitespace tokenizer that remembers the line each token came from and skips '#' comments
// (except the VTK header line, which callers read with next_line()).
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    bool next(std::string& token) {
        while (pos_ >= tokens_.size()) {
            if (!fill()) return false;
        }
        token = tokens_[pos_++];
        return true;
    }

    std::string expect(const char* what) {
        std::string t;
        if (!next(t)) throw ParseError(std::string("unexpected end of file, expected ") + what, line_);
        return t;
    }

    long long expect_int(const char* what) {
        const std::string t = expect(what);
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
            throw ParseError(std::string("expected integer ") + what + ", got '" + t + "'", line_);
        }
        return v;
    }

    double expect_double(const char* what) {
        const std::string t = expect(what);
        try {
            std::size_t used = 0;
            const double v = std::stod(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw ParseError(std::string("expected number ") + what + ", got '" + t + "'", line_);
        }
    }

    // Raw next line, ignoring any pending tokens on the current one.
    bool next_line(std::string& line) {
        tokens_.clear();
        pos_ = 0;
        if (!std::getline(in_, line)) return false;
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    std::size_t line() const { return line_; }

private:
    bool fill() {
        std::string line;
        if (!std::getline(in_, line)) return false;
        ++line_;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        tokens_.clear();
        pos_ = 0;
        std::istringstream ss(line);
        std::string t;
        while (ss >> t) tokens_.push_back(t);
        return true;
    }

    std::istream& in_;
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
};

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

Face read_triangle(TokenReader& r, long long n_vertices) {
    const long long count = r.expect_int("polygon vertex count");
    if (count != 3) throw ParseError("only triangles are supported, got a " + std::to_string(count) + "-gon", r.line());
    Face f{};
    for (int j = 0; j < 3; ++j) {
        const long long idx = r.expect_int("vertex index");
        if (idx < 0 || idx >= n_vertices) {
            throw TopologyError("line " + std::to_string(r.line()) + ": vertex index " + std::to_string(idx) +
                                " out of range [0, " + std::to_string(n_vertices) + ")");
        }
        f[j] = static_cast<int>(idx);
    }
    return f;
}

void write_vec(std::ostream& out, const Vec3& v) {
    out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
    const std::string ext = upper(path.extension().string());
    if (ext == ".OFF") return MeshFormat::Off;
    if (ext == ".VTK") return MeshFormat::Vtk;
    throw ConfigError("unknown mesh extension '" + path.extension().string() + "' for " + path.string());
}

TriMesh read_off(std::istream& in) {
    TokenReader r(in);
    const std::string header = r.expect("OFF header");
    if (upper(header) != "OFF") throw ParseError("expected 'OFF' header, got '" + header + "'", r.line());
    const long long nv = r.expect_int("vertex count");
    const long long nf = r.expect_int("face count");
    r.expect_int("edge count");
    if (nv < 0 || nf < 0) throw ParseError("negative element count", r.line());
    TriMesh mesh;
    mesh.vertices.resize(static_cast<std::size_t>(nv));
    for (auto& v : mesh.vertices) {
        v.x() = r.expect_double("x");
        v.y() = r.expect_double("y");
        v.z() = r.expect_double("z");
    }
    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long long i = 0; i < nf; ++i) mesh.faces.push_back(read_triangle(r, nv));
    return mesh;
}

void write_off(const TriMesh& mesh, std::ostream& out) {
    out << std::setprecision(17);
    out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
    for (const auto& v : mesh.vertices) write_vec(out, v);
    for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

TriMesh read_vtk(std::istream& in) {
    TokenReader r(in);
    std::string line;
    if (!r.next_line(line) || line.rfind("# vtk DataFile", 0) != 0) {
        throw ParseError("missing '# vtk DataFile' header", r.line());
    }
    r.next_line(line);  // title
    if (!r.next_line(line) || upper(line).find("ASCII") == std::string::npos) {
        throw ParseError("only ASCII VTK files are supported", r.line());
    }
    if (upper(r.expect("DATASET")) != "DATASET") throw ParseError("expected DATASET", r.line());
    if (upper(r.expect("POLYDATA")) != "POLYDATA") throw ParseError("expected POLYDATA dataset", r.line());

    TriMesh mesh;
    long long nv = -1;
    enum class Section { None, Point, Cell } section = Section::None;
    std::size_t section_count = 0;
    std::string keyword;
    while (r.next(keyword)) {
        const std::string key = upper(keyword);
        if (key == "POINTS") {
            nv = r.expect_int("point count");
            r.expect("point type");
            mesh.vertices.resize(static_cast<std::size_t>(nv));
            for (auto& v : mesh.vertices) {
                v.x() = r.expect_double("x");
                v.y() = r.expect_double("y");
                v.z() = r.expect_double("z");
            }
        } else if (key == "POLYGONS") {
            if (nv < 0) throw ParseError("POLYGONS before POINTS", r.line());
            const long long nf = r.expect_int("polygon count");
            r.expect_int("polygon list size");
            mesh.faces.reserve(static_cast<std::size_t>(nf));
            for (long long i = 0; i < nf; ++i) mesh.faces.push_back(read_triangle(r, nv));
        } else if (key == "POINT_DATA") {
            section = Section::Point;
            section_count = static_cast<std::size_t>(r.expect_int("point data count"));
            if (static_cast<long long>(section_count) != nv) throw ParseError("POINT_DATA count mismatch", r.line());
        } else if (key == "CELL_DATA") {
            section = Section::Cell;
            section_count = static_cast<std::size_t>(r.expect_int("cell data count"));
            if (section_count != mesh.faces.size()) throw ParseError("CELL_DATA count mismatch", r.line());
        } else if (key == "SCALARS") {
            if (section == Section::None) throw ParseError("SCALARS outside a data section", r.line());
            const std::string name = r.expect("scalar name");
            r.expect("scalar type");
            // Optional component count followed by LOOKUP_TABLE.
            std::string tok = r.expect("LOOKUP_TABLE");
            if (upper(tok) != "LOOKUP_TABLE") {
                if (tok != "1") throw ParseError("only single-component SCALARS are supported", r.line());
                tok = r.expect("LOOKUP_TABLE");
            }
            if (upper(tok) != "LOOKUP_TABLE") throw ParseError("expected LOOKUP_TABLE", r.line());
            r.expect("lookup table name");
            std::vector<double> values(section_count);
            for (auto& v : values) v = r.expect_double("scalar value");
            (section == Section::Point ? mesh.point_scalars : mesh.face_scalars)[name] = std::move(values);
        } else if (key == "VECTORS" || key == "NORMALS") {
            if (section != Section::Point) throw ParseError("only point VECTORS are supported", r.line());
            const std::string name = r.expect("vector name");
            r.expect("vector type");
            std::vector<Vec3> values(section_count);
            for (auto& v : values) {
                v.x() = r.expect_double("x");
                v.y() = r.expect_double("y");
                v.z() = r.expect_double("z");
            }
            mesh.point_vectors[name] = std::move(values);
        } else if (key == "METADATA" || key == "FIELD") {
            throw ParseError("unsupported VTK section " + keyword, r.line());
        } else {
            throw ParseError("unexpected token '" + keyword + "'", r.line());
        }
    }
    if (nv < 0) throw ParseError("no POINTS section", r.line());
    return mesh;
}

void write_vtk(const TriMesh& mesh, std::ostream& out) {
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\nlamina surface\nASCII\nDATASET POLYDATA\n";
    out << "POINTS " << mesh.vertices.size() << " double\n";
    for (const auto& v : mesh.vertices) write_vec(out, v);
    out << "POLYGONS " << mesh.faces.size() << ' ' << 4 * mesh.faces.size() << '\n';
    for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    out << std::setprecision(9);
    if (!mesh.point_scalars.empty() || !mesh.point_vectors.empty()) {
        out << "POINT_DATA " << mesh.vertices.size() << '\n';
        for (const auto& [name, values] : mesh.point_scalars) {
            out << "SCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
            for (double v : values) out << v << '\n';
        }
        for (const auto& [name, values] : mesh.point_vectors) {
            out << "VECTORS " << name << " float\n";
            for (const auto& v : values) write_vec(out, v);
        }
    }
    if (!mesh.face_scalars.empty()) {
        out << "CELL_DATA " << mesh.faces.size() << '\n';
        for (const auto& [name, values] : mesh.face_scalars) {
            out << "SCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
            for (double v : values) out << v << '\n';
        }
    }
}

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mesh file " + path.string());
    TriMesh mesh = format == MeshFormat::Off ? read_off(in) : read_vtk(in);
    validate(mesh);
    return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_path(path)); }

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
    auto out = open_out(path);
    if (format == MeshFormat::Off) {
        write_off(mesh, out);
    } else {
        write_vtk(mesh, out);
    }
    if (!out) throw Error("failed writing " + path.string());
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) { save_mesh(mesh, path, format_from_path(path)); }

void write_vtk_polylines(const PolylineSet& set, const std::filesystem::path& path) {
    auto out = open_out(path);
    std::size_t n_points = 0;
    for (const auto& l : set.lines) n_points += l.size();
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\nlamina streamlines\nASCII\nDATASET POLYDATA\n";
    out << "POINTS " << n_points << " double\n";
    for (const auto& l : set.lines) {
        for (const auto& p : l) write_vec(out, p);
    }
    out << "LINES " << set.lines.size() << ' ' << n_points + set.lines.size() << '\n';
    std::size_t offset = 0;
    for (const auto& l : set.lines) {
        out << l.size();
        for (std::size_t j = 0; j < l.size(); ++j) out << ' ' << offset + j;
        out << '\n';
        offset += l.size();
    }
    out << std::setprecision(9);
    if (!set.point_scalars.empty()) {
        out << "POINT_DATA " << n_points << '\n';
        for (const auto& [name, per_line] : set.point_scalars) {
            out << "SCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
            for (const auto& values : per_line) {
                for (double v : values) out << v << '\n';
            }
        }
    }
    if (!set.line_scalars.empty()) {
        out << "CELL_DATA " << set.lines.size() << '\n';
        for (const auto& [name, values] : set.line_scalars) {
            out << "SCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
            for (double v : values) out << v << '\n';
        }
    }
}

void write_vtk_structured_points(const StructuredPoints& grid, const std::filesystem::path& path) {
    auto out = open_out(path);
    const std::size_t n = static_cast<std::size_t>(grid.dims[0]) * grid.dims[1] * grid.dims[2];
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\nlamina grid\nASCII\nDATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << grid.dims[0] << ' ' << grid.dims[1] << ' ' << grid.dims[2] << '\n';
    out << "ORIGIN " << grid.origin.x() << ' ' << grid.origin.y() << ' ' << grid.origin.z() << '\n';
    out << "SPACING " << grid.spacing << ' ' << grid.spacing << ' ' << grid.spacing << '\n';
    out << std::setprecision(9);
    out << "POINT_DATA " << n << '\n';
    for (const auto& [name, values] : grid.scalars) {
        out << "SCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
        for (double v : values) out << v << '\n';
    }
}

}  // namespace lamina
