// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

#include "layered/error.hpp"

namespace layered {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string lower_ext(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

[[noreturn]] void format_error(const fs::path& path, std::size_t line, const std::string& what) {
    throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// ---------------------------------------------------------------- OBJ

TriMesh load_obj(const fs::path& path) {
    const std::string text = read_file(path);
    TriMesh mesh;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto tok = split_ws(line);
        if (tok.empty()) continue;
        if (tok[0] == "v") {
            if (tok.size() < 4) format_error(path, line_no, "vertex needs three coordinates");
            Vec3 p;
            for (int a = 0; a < 3; ++a) {
                if (!parse_number(tok[1 + a], p[a])) format_error(path, line_no, "bad coordinate");
            }
            mesh.vertices.push_back(p);
        } else if (tok[0] == "f") {
            if (tok.size() < 4) format_error(path, line_no, "face needs at least three vertices");
            std::vector<std::uint32_t> poly;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                auto ref = tok[k].substr(0, tok[k].find('/'));
                long long idx = 0;
                if (!parse_number(ref, idx) || idx == 0) format_error(path, line_no, "bad face index");
                long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(mesh.vertices.size()) + idx;
                if (resolved < 0 || resolved >= static_cast<long long>(mesh.vertices.size())) {
                    format_error(path, line_no, "face index " + std::to_string(idx) + " out of range");
                }
                poly.push_back(static_cast<std::uint32_t>(resolved));
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
                Face t{poly[0], poly[k], poly[k + 1]};
                if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
                    format_error(path, line_no, "degenerate face repeats a vertex");
                }
                mesh.faces.push_back(t);
            }
        }
        // vt, vn, o, g, s, usemtl, mtllib: ignored.
    }
    const auto sidecar = label_sidecar_path(path);
    if (fs::exists(sidecar)) {
        mesh.labels = load_labels(sidecar);
        if (mesh.labels->size() != mesh.vertices.size()) {
            throw Error(ErrorKind::Format, sidecar.string() + ": " + std::to_string(mesh.labels->size()) +
                                               " labels for " + std::to_string(mesh.vertices.size()) + " vertices");
        }
    }
    return mesh;
}

void save_obj(const fs::path& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
    if (mesh.labels) save_labels(label_sidecar_path(path), *mesh.labels);
}

// ---------------------------------------------------------------- PLY

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<Scalar> parse_scalar(std::string_view s) {
    if (s == "char" || s == "int8") return Scalar::I8;
    if (s == "uchar" || s == "uint8") return Scalar::U8;
    if (s == "short" || s == "int16") return Scalar::I16;
    if (s == "ushort" || s == "uint16") return Scalar::U16;
    if (s == "int" || s == "int32") return Scalar::I32;
    if (s == "uint" || s == "uint32") return Scalar::U32;
    if (s == "float" || s == "float32") return Scalar::F32;
    if (s == "double" || s == "float64") return Scalar::F64;
    return std::nullopt;
}

std::size_t scalar_size(Scalar s) {
    switch (s) {
        case Scalar::I8: case Scalar::U8: return 1;
        case Scalar::I16: case Scalar::U16: return 2;
        case Scalar::I32: case Scalar::U32: case Scalar::F32: return 4;
        case Scalar::F64: return 8;
    }
    return 0;
}

struct PlyProperty {
    std::string name;
    Scalar type = Scalar::F32;
    bool is_list = false;
    Scalar count_type = Scalar::U8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

template <typename T>
T read_raw(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

double decode_binary(Scalar s, const char* p) {
    switch (s) {
        case Scalar::I8: return read_raw<std::int8_t>(p);
        case Scalar::U8: return read_raw<std::uint8_t>(p);
        case Scalar::I16: return read_raw<std::int16_t>(p);
        case Scalar::U16: return read_raw<std::uint16_t>(p);
        case Scalar::I32: return read_raw<std::int32_t>(p);
        case Scalar::U32: return read_raw<std::uint32_t>(p);
        case Scalar::F32: return read_raw<float>(p);
        case Scalar::F64: return read_raw<double>(p);
    }
    return 0.0;
}

// Reads values one at a time from either encoding, tracking a location
// string for error messages.
class PlyReader {
public:
    PlyReader(const fs::path& path, const std::string& data, std::size_t offset, bool ascii, std::size_t line)
        : path_(path), data_(data), pos_(offset), ascii_(ascii), line_(line) {}

    double next(Scalar type) {
        if (ascii_) {
            while (true) {
                if (tok_index_ < tokens_.size()) {
                    double v = 0.0;
                    if (!parse_number(tokens_[tok_index_], v)) format_error(path_, line_, "bad number");
                    ++tok_index_;
                    return v;
                }
                if (pos_ >= data_.size()) format_error(path_, line_, "unexpected end of file");
                std::size_t end = data_.find('\n', pos_);
                if (end == std::string::npos) end = data_.size();
                current_ = std::string_view(data_.data() + pos_, end - pos_);
                pos_ = end + 1;
                ++line_;
                tokens_ = split_ws(current_);
                tok_index_ = 0;
            }
        }
        const std::size_t n = scalar_size(type);
        if (pos_ + n > data_.size()) {
            throw Error(ErrorKind::Format, path_.string() + ": truncated binary data in " + where_);
        }
        double v = decode_binary(type, data_.data() + pos_);
        pos_ += n;
        return v;
    }

    // Ascii records end at a newline; extra tokens are an error.
    void end_record() {
        if (ascii_ && tok_index_ < tokens_.size()) format_error(path_, line_, "trailing values on line");
    }

    [[noreturn]] void fail(const std::string& what) const {
        if (ascii_) format_error(path_, line_, what);
        throw Error(ErrorKind::Format, path_.string() + ": " + where_ + ": " + what);
    }

    void set_where(std::string w) { where_ = std::move(w); }

private:
    const fs::path& path_;
    const std::string& data_;
    std::size_t pos_;
    bool ascii_;
    std::size_t line_;
    std::string_view current_;
    std::vector<std::string_view> tokens_;
    std::size_t tok_index_ = 0;
    std::string where_;
};

TriMesh load_ply(const fs::path& path) {
    const std::string data = read_file(path);
    std::size_t pos = 0, line_no = 0;
    auto next_line = [&]() -> std::string_view {
        if (pos >= data.size()) format_error(path, line_no, "unexpected end of header");
        std::size_t end = data.find('\n', pos);
        if (end == std::string::npos) end = data.size();
        std::string_view line(data.data() + pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        ++line_no;
        return line;
    };
    if (next_line() != "ply") format_error(path, line_no, "missing 'ply' magic");
    bool ascii = false;
    bool have_format = false;
    std::vector<PlyElement> elements;
    while (true) {
        auto tok = split_ws(next_line());
        if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "format") {
            if (tok.size() < 2) format_error(path, line_no, "bad format line");
            if (tok[1] == "ascii") ascii = true;
            else if (tok[1] == "binary_little_endian") ascii = false;
            else format_error(path, line_no, "unsupported PLY format " + std::string(tok[1]));
            have_format = true;
        } else if (tok[0] == "element") {
            PlyElement e;
            if (tok.size() != 3 || !parse_number(tok[2], e.count)) format_error(path, line_no, "bad element line");
            e.name = std::string(tok[1]);
            elements.push_back(std::move(e));
        } else if (tok[0] == "property") {
            if (elements.empty()) format_error(path, line_no, "property before element");
            PlyProperty p;
            if (tok.size() == 5 && tok[1] == "list") {
                auto ct = parse_scalar(tok[2]);
                auto it = parse_scalar(tok[3]);
                if (!ct || !it) format_error(path, line_no, "bad list property types");
                p.is_list = true;
                p.count_type = *ct;
                p.type = *it;
                p.name = std::string(tok[4]);
            } else if (tok.size() == 3) {
                auto t = parse_scalar(tok[1]);
                if (!t) format_error(path, line_no, "unknown property type " + std::string(tok[1]));
                p.type = *t;
                p.name = std::string(tok[2]);
            } else {
                format_error(path, line_no, "bad property line");
            }
            elements.back().props.push_back(std::move(p));
        } else {
            format_error(path, line_no, "unknown header keyword " + std::string(tok[0]));
        }
    }
    if (!have_format) format_error(path, line_no, "missing format line");

    TriMesh mesh;
    std::vector<int> labels;
    bool has_labels = false;
    PlyReader reader(path, data, pos, ascii, line_no);
    for (const auto& e : elements) {
        const bool is_vertex = e.name == "vertex";
        const bool is_face = e.name == "face";
        int ix = -1, iy = -1, iz = -1, il = -1, iface = -1;
        for (std::size_t k = 0; k < e.props.size(); ++k) {
            const auto& p = e.props[k];
            if (is_vertex && p.name == "x") ix = int(k);
            if (is_vertex && p.name == "y") iy = int(k);
            if (is_vertex && p.name == "z") iz = int(k);
            if (is_vertex && p.name == "label" && !p.is_list) il = int(k);
            if (is_face && p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) iface = int(k);
        }
        if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) format_error(path, line_no, "vertex element lacks x/y/z");
        if (is_face && iface < 0) format_error(path, line_no, "face element lacks vertex_indices");
        if (is_vertex) {
            mesh.vertices.resize(e.count);
            has_labels = il >= 0;
            if (has_labels) labels.resize(e.count);
        }
        for (std::size_t r = 0; r < e.count; ++r) {
            reader.set_where(e.name + " " + std::to_string(r));
            for (std::size_t k = 0; k < e.props.size(); ++k) {
                const auto& p = e.props[k];
                if (p.is_list) {
                    const double count = reader.next(p.count_type);
                    if (count < 0 || count != std::floor(count)) reader.fail("bad list length");
                    std::vector<std::uint32_t> idx(static_cast<std::size_t>(count));
                    for (auto& v : idx) {
                        const double x = reader.next(p.type);
                        if (int(k) == iface && (x < 0 || x != std::floor(x))) reader.fail("bad face index");
                        v = static_cast<std::uint32_t>(x);
                    }
                    if (int(k) == iface) {
                        if (idx.size() < 3) reader.fail("face with fewer than three vertices");
                        for (std::size_t j = 1; j + 1 < idx.size(); ++j) {
                            Face t{idx[0], idx[j], idx[j + 1]};
                            for (auto v : t) {
                                if (v >= mesh.vertices.size()) {
                                    reader.fail("face index " + std::to_string(v) + " out of range");
                                }
                            }
                            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) reader.fail("degenerate face");
                            mesh.faces.push_back(t);
                        }
                    }
                } else {
                    const double x = reader.next(p.type);
                    if (is_vertex) {
                        if (int(k) == ix) mesh.vertices[r].x() = x;
                        else if (int(k) == iy) mesh.vertices[r].y() = x;
                        else if (int(k) == iz) mesh.vertices[r].z() = x;
                        else if (int(k) == il) labels[r] = static_cast<int>(x);
                    }
                }
            }
            reader.end_record();
        }
    }
    if (has_labels) mesh.labels = std::move(labels);
    return mesh;
}

void save_ply(const fs::path& path, const TriMesh& mesh, PlyEncoding encoding) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    const bool ascii = encoding == PlyEncoding::Ascii;
    out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (mesh.labels) out << "property int label\n";
    out << "element face " << mesh.faces.size() << "\n";
    out << "property list uchar int vertex_indices\nend_header\n";
    if (ascii) {
        out << std::setprecision(17);
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            const auto& v = mesh.vertices[i];
            out << v.x() << ' ' << v.y() << ' ' << v.z();
            if (mesh.labels) out << ' ' << (*mesh.labels)[i];
            out << '\n';
        }
        for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    } else {
        std::string buf;
        const std::size_t vsize = 24 + (mesh.labels ? 4 : 0);
        buf.resize(mesh.vertices.size() * vsize + mesh.faces.size() * 13);
        char* p = buf.data();
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            const auto& v = mesh.vertices[i];
            for (int a = 0; a < 3; ++a) {
                double x = v[a];
                std::memcpy(p, &x, 8);
                p += 8;
            }
            if (mesh.labels) {
                std::int32_t l = (*mesh.labels)[i];
                std::memcpy(p, &l, 4);
                p += 4;
            }
        }
        for (const auto& f : mesh.faces) {
            *p++ = 3;
            for (int c = 0; c < 3; ++c) {
                std::int32_t idx = static_cast<std::int32_t>(f[c]);
                std::memcpy(p, &idx, 4);
                p += 4;
            }
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

fs::path label_sidecar_path(const fs::path& mesh_path) {
    fs::path p = mesh_path;
    p += ".labels";
    return p;
}

std::vector<int> load_labels(const fs::path& path) {
    const std::string text = read_file(path);
    std::vector<int> labels;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        auto tok = split_ws(line);
        if (tok.empty()) continue;
        int v = 0;
        if (tok.size() != 1 || !parse_number(tok[0], v)) format_error(path, line_no, "expected one integer label");
        labels.push_back(v);
    }
    return labels;
}

void save_labels(const fs::path& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    for (int l : labels) out << l << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

TriMesh load_mesh(const fs::path& path) {
    const auto ext = lower_ext(path);
    TriMesh mesh;
    if (ext == ".obj") mesh = load_obj(path);
    else if (ext == ".ply") mesh = load_ply(path);
    else throw Error(ErrorKind::Usage, "unsupported mesh extension '" + ext + "' for " + path.string());
    try {
        mesh.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
    return mesh;
}

void save_mesh(const fs::path& path, const TriMesh& mesh, PlyEncoding encoding) {
    const auto ext = lower_ext(path);
    if (ext == ".obj") save_obj(path, mesh);
    else if (ext == ".ply") save_ply(path, mesh, encoding);
    else throw Error(ErrorKind::Usage, "unsupported mesh extension '" + ext + "' for " + path.string());
}

}  // namespace layered
