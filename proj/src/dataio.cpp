/*
 * headfit - pin-based 3D head model fitting and evaluation.
 *
 * Copyright 2026 The headfit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "headfit/dataio.hpp"

#include "headfit/error.hpp"

#include "openssl/evp.h"

#include "Eigen/LU"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace headfit {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'H', 'F', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::size_t kDigestSize = 32;

[[noreturn]] void schema_error(std::string_view where, const std::string& message)
{
    throw Error(ErrorCode::SchemaMismatch, std::string(where) + ": " + message);
}

std::string join(std::string_view where, std::string_view name)
{
    return std::string(where) + "." + std::string(name);
}

const json& require(const json& j, std::string_view name, std::string_view where)
{
    if (!j.is_object())
    {
        schema_error(where, "expected an object");
    }
    const auto it = j.find(name);
    if (it == j.end())
    {
        schema_error(join(where, name), "missing field");
    }
    return *it;
}

const json* optional_field(const json& j, std::string_view name)
{
    const auto it = j.find(name);
    if (it == j.end() || it->is_null())
    {
        return nullptr;
    }
    return &*it;
}

double number(const json& j, std::string_view where)
{
    if (!j.is_number())
    {
        schema_error(where, "expected a number");
    }
    return j.get<double>();
}

long long integer(const json& j, std::string_view where)
{
    if (!j.is_number_integer())
    {
        schema_error(where, "expected an integer");
    }
    return j.get<long long>();
}

std::string string(const json& j, std::string_view where)
{
    if (!j.is_string())
    {
        schema_error(where, "expected a string");
    }
    return j.get<std::string>();
}

bool boolean(const json& j, std::string_view where)
{
    if (!j.is_boolean())
    {
        schema_error(where, "expected a boolean");
    }
    return j.get<bool>();
}

const json& array(const json& j, std::string_view where)
{
    if (!j.is_array())
    {
        schema_error(where, "expected an array");
    }
    return j;
}

void check_header(const json& j, std::string_view schema, std::string_view where)
{
    const std::string name = string(require(j, "schema", where), join(where, "schema"));
    if (name != schema)
    {
        schema_error(join(where, "schema"), "expected '" + std::string(schema) + "', got '" + name + "'");
    }
    const long long version = integer(require(j, "version", where), join(where, "version"));
    if (version != kFormatVersion)
    {
        schema_error(join(where, "version"), "unsupported version " + std::to_string(version));
    }
}

json header(std::string_view schema)
{
    return json{{"schema", schema}, {"version", kFormatVersion}};
}

json vector_to_json(const Eigen::VectorXd& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        out.push_back(v(i));
    }
    return out;
}

Eigen::VectorXd vector_from_json(const json& j, std::string_view where, Eigen::Index expected = -1)
{
    array(j, where);
    if (expected >= 0 && static_cast<Eigen::Index>(j.size()) != expected)
    {
        schema_error(where, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
    {
        v(static_cast<Eigen::Index>(i)) = number(j[i], std::string(where) + "[" + std::to_string(i) + "]");
    }
    return v;
}

template <typename Matrix>
json rows_to_json(const Matrix& m)
{
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
        {
            row.push_back(m(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

/// Rows of fixed width; `rows` < 0 accepts any count.
Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
rows_from_json(const json& j, Eigen::Index cols, std::string_view where, Eigen::Index rows = -1)
{
    array(j, where);
    if (rows >= 0 && static_cast<Eigen::Index>(j.size()) != rows)
    {
        schema_error(where, "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                                std::to_string(j.size()) + " rows");
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(static_cast<Eigen::Index>(j.size()),
                                                                             cols);
    for (std::size_t r = 0; r < j.size(); ++r)
    {
        const std::string row_where = std::string(where) + "[" + std::to_string(r) + "]";
        const auto row = vector_from_json(j[r], row_where, cols);
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

Eigen::Matrix4d matrix4_from_json(const json& j, std::string_view where)
{
    return rows_from_json(j, 4, where, 4);
}

json image_size_to_json(ImageSize s)
{
    return json{{"width", s.width}, {"height", s.height}, {"units", "px"}};
}

ImageSize image_size_from_json(const json& j, std::string_view where)
{
    ImageSize s;
    s.width = static_cast<int>(integer(require(j, "width", where), join(where, "width")));
    s.height = static_cast<int>(integer(require(j, "height", where), join(where, "height")));
    return s;
}

json bbox_to_json(const BBox& b)
{
    return json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"units", "px"}};
}

BBox bbox_from_json(const json& j, std::string_view where)
{
    BBox b;
    b.x = number(require(j, "x", where), join(where, "x"));
    b.y = number(require(j, "y", where), join(where, "y"));
    b.w = number(require(j, "w", where), join(where, "w"));
    b.h = number(require(j, "h", where), join(where, "h"));
    return b;
}

json optional_number(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_number_from_json(const json& j, std::string_view name, std::string_view where)
{
    if (const json* v = optional_field(j, name))
    {
        return number(*v, join(where, name));
    }
    return std::nullopt;
}

// Little-endian primitives for the binary container.

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
    {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
}

void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
    {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
}

void put_doubles(std::string& out, const double* data, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i)
    {
        put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
    }
}

class Reader
{
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t offset() const { return offset_; }

    void need(std::size_t n) const
    {
        if (bytes_.size() - offset_ < n)
        {
            throw Error(ErrorCode::ParseError, "truncated model container at offset " + std::to_string(offset_) +
                                                   ": need " + std::to_string(n) + " more bytes, have " +
                                                   std::to_string(bytes_.size() - offset_));
        }
    }

    std::string_view take(std::size_t n)
    {
        need(n);
        const auto s = bytes_.substr(offset_, n);
        offset_ += n;
        return s;
    }

    std::uint64_t u(int width)
    {
        const auto s = take(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = width - 1; i >= 0; --i)
        {
            v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
        }
        return v;
    }

    void doubles(double* out, std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            out[i] = std::bit_cast<double>(u(8));
        }
    }

private:
    std::string_view bytes_;
    std::size_t offset_ = 0;
};

std::array<unsigned char, kDigestSize> sha256(std::string_view bytes)
{
    std::array<unsigned char, kDigestSize> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != kDigestSize)
    {
        throw Error(ErrorCode::IoError, "SHA-256 computation failed");
    }
    return digest;
}

std::string format_double(double v)
{
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

std::mutex& path_lock(const std::filesystem::path& path)
{
    static std::mutex registry_mutex;
    static std::map<std::string, std::unique_ptr<std::mutex>> locks;
    std::error_code ec;
    auto key = std::filesystem::weakly_canonical(path, ec);
    const std::string k = ec ? path.string() : key.string();
    std::lock_guard guard(registry_mutex);
    auto& slot = locks[k];
    if (!slot)
    {
        slot = std::make_unique<std::mutex>();
    }
    return *slot;
}

} // namespace

// ---------------------------------------------------------------- model

std::string sha256_hex(std::string_view bytes)
{
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned char c : sha256(bytes))
    {
        out.push_back(kHex[c >> 4]);
        out.push_back(kHex[c & 0xf]);
    }
    return out;
}

std::string encode_model(const HeadModel& model)
{
    const auto k = static_cast<std::size_t>(model.vertex_count());
    json head{{"vertex_count", k},
              {"shape_count", model.shape_count()},
              {"expr_count", model.expr_count()},
              {"face_count", model.faces.size()},
              {"jaw_joint", vector_to_json(model.jaw_joint)},
              {"synthetic_subsets", model.synthetic_subsets},
              {"subsets", json::object()}};
    for (const auto& [name, ids] : model.subsets)
    {
        head["subsets"][name] = ids;
    }
    const std::string header_text = head.dump();

    std::string out(kMagic.begin(), kMagic.end());
    put_u32(out, static_cast<std::uint32_t>(kFormatVersion));
    put_u64(out, header_text.size());
    out += header_text;

    const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> tmpl = model.template_vertices;
    put_doubles(out, tmpl.data(), tmpl.size());
    put_doubles(out, model.shape_basis.data(), static_cast<std::size_t>(model.shape_basis.size()));
    put_doubles(out, model.expr_basis.data(), static_cast<std::size_t>(model.expr_basis.size()));
    put_doubles(out, model.jaw_weights.data(), static_cast<std::size_t>(model.jaw_weights.size()));
    for (const auto& f : model.faces)
    {
        for (int idx : f)
        {
            put_u32(out, static_cast<std::uint32_t>(idx));
        }
    }
    const auto digest = sha256(out);
    out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
    return out;
}

HeadModel decode_model(std::string_view bytes)
{
    Reader in(bytes);
    const auto magic = in.take(kMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kMagic.begin()))
    {
        throw Error(ErrorCode::ParseError, "offset 0: not a headfit model container");
    }
    const auto version = in.u(4);
    if (version != static_cast<std::uint64_t>(kFormatVersion))
    {
        throw Error(ErrorCode::SchemaMismatch, "model container version " + std::to_string(version) +
                                                   " is not supported");
    }
    const auto header_len = in.u(8);
    const std::size_t header_offset = in.offset();
    in.need(header_len);
    const auto header_text = in.take(static_cast<std::size_t>(header_len));
    json head;
    try
    {
        head = json::parse(header_text);
    }
    catch (const json::parse_error& e)
    {
        throw Error(ErrorCode::ParseError, "model header at offset " + std::to_string(header_offset + e.byte) +
                                               ": " + e.what());
    }
    const std::string where = "model";
    const long long k = integer(require(head, "vertex_count", where), "model.vertex_count");
    const long long s = integer(require(head, "shape_count", where), "model.shape_count");
    const long long e = integer(require(head, "expr_count", where), "model.expr_count");
    const long long f = integer(require(head, "face_count", where), "model.face_count");
    if (k <= 0 || s < 0 || e < 0 || f < 0 || k > (1LL << 26) || s > (1LL << 16) || e > (1LL << 16) ||
        f > (1LL << 28))
    {
        schema_error(where, "implausible counts");
    }
    const auto ku = static_cast<std::size_t>(k);
    const std::size_t payload = 8 * (3 * ku + 3 * ku * static_cast<std::size_t>(s) +
                                     3 * ku * static_cast<std::size_t>(e) + ku) +
                                4 * 3 * static_cast<std::size_t>(f);
    in.need(payload + kDigestSize);
    const std::size_t end = in.offset() + payload + kDigestSize;
    if (bytes.size() != end)
    {
        throw Error(ErrorCode::ParseError, "offset " + std::to_string(end) + ": " +
                                               std::to_string(bytes.size() - end) + " trailing bytes");
    }
    const auto expected = sha256(bytes.substr(0, bytes.size() - kDigestSize));
    if (std::memcmp(expected.data(), bytes.data() + bytes.size() - kDigestSize, kDigestSize) != 0)
    {
        throw Error(ErrorCode::ChecksumMismatch, "model container content hash does not match");
    }

    HeadModel model;
    Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> tmpl(k, 3);
    in.doubles(tmpl.data(), static_cast<std::size_t>(tmpl.size()));
    model.template_vertices = tmpl;
    model.shape_basis.resize(3 * k, s);
    in.doubles(model.shape_basis.data(), static_cast<std::size_t>(model.shape_basis.size()));
    model.expr_basis.resize(3 * k, e);
    in.doubles(model.expr_basis.data(), static_cast<std::size_t>(model.expr_basis.size()));
    model.jaw_weights.resize(k);
    in.doubles(model.jaw_weights.data(), ku);
    model.faces.resize(static_cast<std::size_t>(f));
    for (auto& tri : model.faces)
    {
        for (int& idx : tri)
        {
            const std::size_t at = in.offset();
            const auto v = in.u(4);
            if (v >= ku)
            {
                throw Error(ErrorCode::ParseError, "offset " + std::to_string(at) + ": face index " +
                                                       std::to_string(v) + " out of range");
            }
            idx = static_cast<int>(v);
        }
    }
    model.jaw_joint = vector_from_json(require(head, "jaw_joint", where), "model.jaw_joint", 3);
    model.synthetic_subsets = boolean(require(head, "synthetic_subsets", where), "model.synthetic_subsets");
    const json& subsets = require(head, "subsets", where);
    if (!subsets.is_object())
    {
        schema_error("model.subsets", "expected an object");
    }
    for (const auto& [name, ids] : subsets.items())
    {
        const std::string w = "model.subsets." + name;
        std::vector<int> list;
        for (const auto& id : array(ids, w))
        {
            list.push_back(static_cast<int>(integer(id, w)));
        }
        model.subsets[name] = std::move(list);
    }
    const auto problems = check_invariants(model);
    if (!problems.empty())
    {
        schema_error(where, problems.front());
    }
    return model;
}

void save_model(const HeadModel& model, const std::filesystem::path& path)
{
    write_file_atomic(path, encode_model(model));
}

HeadModel load_model(const std::filesystem::path& path)
{
    return decode_model(read_file(path));
}

// ---------------------------------------------------------------- JSON text

json parse_json(std::string_view text, std::string_view source)
{
    try
    {
        return json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        const std::size_t offset = e.byte > 0 ? std::min<std::size_t>(e.byte - 1, text.size()) : 0;
        std::size_t line = 1;
        std::size_t column = 1;
        for (std::size_t i = 0; i < offset; ++i)
        {
            if (text[i] == '\n')
            {
                ++line;
                column = 1;
            }
            else
            {
                ++column;
            }
        }
        throw Error(ErrorCode::ParseError, std::string(source) + ": line " + std::to_string(line) + ", column " +
                                               std::to_string(column) + " (offset " + std::to_string(offset) +
                                               "): " + e.what());
    }
}

std::string dump_json(const json& j)
{
    return j.dump(2) + "\n";
}

json mesh_to_json(const Mesh& mesh)
{
    json j = header("headfit.mesh");
    j["units"] = "model";
    j["vertices"] = rows_to_json(mesh.vertices);
    json faces = json::array();
    for (const auto& f : mesh.faces)
    {
        faces.push_back({f[0], f[1], f[2]});
    }
    j["faces"] = std::move(faces);
    return j;
}

Mesh mesh_from_json(const json& j)
{
    const std::string where = "mesh";
    check_header(j, "headfit.mesh", where);
    Mesh mesh;
    mesh.vertices = rows_from_json(require(j, "vertices", where), 3, "mesh.vertices");
    const json& faces = array(require(j, "faces", where), "mesh.faces");
    for (std::size_t i = 0; i < faces.size(); ++i)
    {
        const std::string w = "mesh.faces[" + std::to_string(i) + "]";
        if (!faces[i].is_array() || faces[i].size() != 3)
        {
            schema_error(w, "expected 3 indices");
        }
        Triangle t{};
        for (std::size_t c = 0; c < 3; ++c)
        {
            const long long idx = integer(faces[i][c], w);
            if (idx < 0 || idx >= mesh.vertices.rows())
            {
                schema_error(w, "index " + std::to_string(idx) + " out of range");
            }
            t[c] = static_cast<int>(idx);
        }
        mesh.faces.push_back(t);
    }
    return mesh;
}

std::string mesh_to_obj(const Mesh& mesh)
{
    std::string out;
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i)
    {
        out += "v " + format_double(mesh.vertices(i, 0)) + " " + format_double(mesh.vertices(i, 1)) + " " +
               format_double(mesh.vertices(i, 2)) + "\n";
    }
    for (const auto& f : mesh.faces)
    {
        out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) +
               "\n";
    }
    return out;
}

Mesh mesh_from_obj(std::string_view text)
{
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::vector<long long>> polygons;
    std::vector<std::size_t> polygon_lines;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size())
    {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
        {
            eol = text.size();
        }
        std::string line(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#')
        {
            continue;
        }
        const auto fail = [&](const std::string& msg) {
            throw Error(ErrorCode::ParseError, "OBJ line " + std::to_string(line_no) + ": " + msg);
        };
        if (tag == "v")
        {
            Eigen::Vector3d v;
            for (int c = 0; c < 3; ++c)
            {
                std::string tok;
                if (!(ss >> tok))
                {
                    fail("vertex needs 3 coordinates");
                }
                const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v(c));
                if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size())
                {
                    fail("bad number '" + tok + "'");
                }
            }
            vertices.push_back(v);
        }
        else if (tag == "f")
        {
            std::vector<long long> poly;
            std::string tok;
            while (ss >> tok)
            {
                const std::string head = tok.substr(0, tok.find('/'));
                long long idx = 0;
                const auto r = std::from_chars(head.data(), head.data() + head.size(), idx);
                if (r.ec != std::errc{} || r.ptr != head.data() + head.size() || idx == 0)
                {
                    fail("bad face index '" + tok + "'");
                }
                // Negative indices count back from the vertices read so far.
                poly.push_back(idx > 0 ? idx - 1 : static_cast<long long>(vertices.size()) + idx);
            }
            if (poly.size() < 3)
            {
                fail("face needs at least 3 vertices");
            }
            polygons.push_back(std::move(poly));
            polygon_lines.push_back(line_no);
        }
    }
    Mesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(vertices.size()), 3);
    for (std::size_t i = 0; i < vertices.size(); ++i)
    {
        mesh.vertices.row(static_cast<Eigen::Index>(i)) = vertices[i].transpose();
    }
    for (std::size_t p = 0; p < polygons.size(); ++p)
    {
        for (long long idx : polygons[p])
        {
            if (idx < 0 || idx >= static_cast<long long>(vertices.size()))
            {
                throw Error(ErrorCode::ParseError,
                            "OBJ line " + std::to_string(polygon_lines[p]) + ": face index out of range");
            }
        }
        const auto& poly = polygons[p];
        for (std::size_t i = 1; i + 1 < poly.size(); ++i)
        {
            mesh.faces.push_back(
                {static_cast<int>(poly[0]), static_cast<int>(poly[i]), static_cast<int>(poly[i + 1])});
        }
    }
    return mesh;
}

// ---------------------------------------------------------------- fit records

json params_to_json(const FitParams& p)
{
    return json{{"beta", vector_to_json(p.shape.beta)},
                {"psi", vector_to_json(p.shape.psi)},
                {"jaw", vector_to_json(p.shape.jaw)},
                {"rotation_6d", {{"a", vector_to_json(p.rotation.a)}, {"b", vector_to_json(p.rotation.b)}}},
                {"scale", p.scale},
                {"translation", vector_to_json(p.translation)},
                {"translation_units", "px"}};
}

FitParams params_from_json(const json& j)
{
    const std::string where = "params";
    FitParams p;
    p.shape.beta = vector_from_json(require(j, "beta", where), "params.beta");
    p.shape.psi = vector_from_json(require(j, "psi", where), "params.psi");
    p.shape.jaw = vector_from_json(require(j, "jaw", where), "params.jaw", 3);
    const json& rot = require(j, "rotation_6d", where);
    p.rotation.a = vector_from_json(require(rot, "a", "params.rotation_6d"), "params.rotation_6d.a", 3);
    p.rotation.b = vector_from_json(require(rot, "b", "params.rotation_6d"), "params.rotation_6d.b", 3);
    p.scale = number(require(j, "scale", where), "params.scale");
    p.translation = vector_from_json(require(j, "translation", where), "params.translation", 3);
    return p;
}

json fit_result_to_json(const FitResult& r)
{
    json residuals = json::array();
    for (const auto& v : r.per_pin_residuals)
    {
        residuals.push_back({v.x(), v.y()});
    }
    return json{{"params", params_to_json(r.params)},
                {"final_cost", r.final_cost},
                {"rms_pin_error", r.rms_pin_error},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"per_pin_residuals", std::move(residuals)},
                {"cost_history", r.cost_history},
                {"units", "px"}};
}

FitResult fit_result_from_json(const json& j)
{
    const std::string where = "fit";
    FitResult r;
    r.params = params_from_json(require(j, "params", where));
    r.final_cost = number(require(j, "final_cost", where), "fit.final_cost");
    r.rms_pin_error = number(require(j, "rms_pin_error", where), "fit.rms_pin_error");
    r.iterations = static_cast<int>(integer(require(j, "iterations", where), "fit.iterations"));
    r.converged = boolean(require(j, "converged", where), "fit.converged");
    const auto res = rows_from_json(require(j, "per_pin_residuals", where), 2, "fit.per_pin_residuals");
    for (Eigen::Index i = 0; i < res.rows(); ++i)
    {
        r.per_pin_residuals.emplace_back(res(i, 0), res(i, 1));
    }
    const auto hist = vector_from_json(require(j, "cost_history", where), "fit.cost_history");
    r.cost_history.assign(hist.data(), hist.data() + hist.size());
    return r;
}

json fit_config_to_json(const FitConfig& c)
{
    return json{{"reg_shape", c.reg_shape},
                {"reg_expr", c.reg_expr},
                {"reg_jaw", c.reg_jaw},
                {"scale_reg_with_pins", c.scale_reg_with_pins},
                {"max_iters", c.max_iters},
                {"lm_lambda0", c.lm_lambda0},
                {"tol_step", c.tol_step},
                {"tol_cost", c.tol_cost},
                {"jacobian", c.jacobian_mode == JacobianMode::Analytic ? "analytic" : "finite-diff"}};
}

FitConfig fit_config_from_json(const json& j)
{
    if (!j.is_object())
    {
        schema_error("config", "expected an object");
    }
    FitConfig c;
    for (const auto& [key, value] : j.items())
    {
        const std::string w = "config." + key;
        if (key == "reg_shape")
            c.reg_shape = number(value, w);
        else if (key == "reg_expr")
            c.reg_expr = number(value, w);
        else if (key == "reg_jaw")
            c.reg_jaw = number(value, w);
        else if (key == "scale_reg_with_pins")
            c.scale_reg_with_pins = boolean(value, w);
        else if (key == "max_iters")
            c.max_iters = static_cast<int>(integer(value, w));
        else if (key == "lm_lambda0")
            c.lm_lambda0 = number(value, w);
        else if (key == "tol_step")
            c.tol_step = number(value, w);
        else if (key == "tol_cost")
            c.tol_cost = number(value, w);
        else if (key == "jacobian")
        {
            const std::string mode = string(value, w);
            if (mode == "analytic")
                c.jacobian_mode = JacobianMode::Analytic;
            else if (mode == "finite-diff")
                c.jacobian_mode = JacobianMode::FiniteDiff;
            else
                schema_error(w, "expected 'analytic' or 'finite-diff'");
        }
        else if (key != "schema" && key != "version")
            schema_error(w, "unknown field");
    }
    if (c.reg_shape < 0 || c.reg_expr < 0 || c.reg_jaw < 0 || c.max_iters < 0 || !(c.lm_lambda0 > 0))
    {
        schema_error("config", "regularization and iteration limits must be non-negative, lm_lambda0 positive");
    }
    return c;
}

// ---------------------------------------------------------------- annotations

json attributes_to_json(const AttributeCard& card)
{
    json j = json::object();
    for (const auto& key : attribute_keys())
    {
        const auto v = attribute_value(card, key);
        if (key == "occlusion")
        {
            j[key] = card.occlusion ? json(*card.occlusion) : json(nullptr);
        }
        else
        {
            j[key] = v ? json(*v) : json(nullptr);
        }
    }
    return j;
}

AttributeCard attributes_from_json(const json& j)
{
    if (!j.is_object())
    {
        schema_error("attributes", "expected an object");
    }
    AttributeCard card;
    for (const auto& [key, value] : j.items())
    {
        const std::string w = "attributes." + key;
        if (!is_attribute_key(key))
        {
            schema_error(w, "unknown attribute");
        }
        if (value.is_null())
        {
            continue;
        }
        std::string text;
        if (canonical_attribute_key(key) == "occlusion")
        {
            text = boolean(value, w) ? "true" : "false";
        }
        else
        {
            text = string(value, w);
        }
        try
        {
            set_attribute(card, key, text);
        }
        catch (const Error&)
        {
            schema_error(w, "invalid value '" + text + "'");
        }
    }
    return card;
}

json annotation_to_json(const Annotation& a)
{
    json j = header("headfit.annotation");
    j["version"] = a.schema_version;
    j["model_id"] = a.model_id;
    j["image_ref"] = a.image_ref;
    j["image_size"] = image_size_to_json(a.image_size);
    j["units"] = "model";
    j["projection"] = a.projection;
    j["vertices"] = rows_to_json(a.vertices);
    j["model_view"] = rows_to_json(a.matrices.model_view);
    j["frustum"] = rows_to_json(a.matrices.frustum);
    j["bbox"] = bbox_to_json(a.bbox);
    j["attributes"] = attributes_to_json(a.attributes);
    if (a.keypoints)
    {
        j["keypoints"] = rows_to_json(*a.keypoints);
    }
    if (a.landmarks2d)
    {
        j["landmarks2d"] = rows_to_json(*a.landmarks2d);
    }
    if (a.fit)
    {
        j["fit"] = fit_result_to_json(*a.fit);
    }
    return j;
}

Annotation annotation_from_json(const json& j)
{
    const std::string where = "annotation";
    check_header(j, "headfit.annotation", where);
    Annotation a;
    if (const json* v = optional_field(j, "model_id"))
        a.model_id = string(*v, "annotation.model_id");
    if (const json* v = optional_field(j, "image_ref"))
        a.image_ref = string(*v, "annotation.image_ref");
    if (const json* v = optional_field(j, "projection"))
        a.projection = string(*v, "annotation.projection");
    a.image_size = image_size_from_json(require(j, "image_size", where), "annotation.image_size");
    a.vertices = rows_from_json(require(j, "vertices", where), 3, "annotation.vertices");
    a.matrices.model_view = matrix4_from_json(require(j, "model_view", where), "annotation.model_view");
    a.matrices.frustum = matrix4_from_json(require(j, "frustum", where), "annotation.frustum");
    a.bbox = bbox_from_json(require(j, "bbox", where), "annotation.bbox");
    if (const json* v = optional_field(j, "attributes"))
        a.attributes = attributes_from_json(*v);
    if (const json* v = optional_field(j, "keypoints"))
        a.keypoints = rows_from_json(*v, 3, "annotation.keypoints");
    if (const json* v = optional_field(j, "landmarks2d"))
        a.landmarks2d = rows_from_json(*v, 2, "annotation.landmarks2d");
    if (const json* v = optional_field(j, "fit"))
        a.fit = fit_result_from_json(*v);
    return a;
}

json pin_to_json(const Pin& p)
{
    return json{{"vertex_id", p.vertex_id}, {"pixel", {p.pixel.x(), p.pixel.y()}}, {"weight", p.weight}};
}

Pin pin_from_json(const json& j, std::string_view where)
{
    Pin p;
    p.vertex_id = static_cast<int>(integer(require(j, "vertex_id", where), join(where, "vertex_id")));
    p.pixel = vector_from_json(require(j, "pixel", where), join(where, "pixel"), 2);
    if (const json* w = optional_field(j, "weight"))
    {
        p.weight = number(*w, join(where, "weight"));
    }
    return p;
}

json pins_to_json(const PinFile& f)
{
    json j = header("headfit.pins");
    j["model_id"] = f.model_id;
    j["image_ref"] = f.image_ref;
    j["image_size"] = image_size_to_json(f.image_size);
    json pins = json::array();
    for (const auto& p : f.pins)
    {
        pins.push_back(pin_to_json(p));
    }
    j["pins"] = std::move(pins);
    return j;
}

PinFile pins_from_json(const json& j)
{
    const std::string where = "pins";
    check_header(j, "headfit.pins", where);
    PinFile f;
    if (const json* v = optional_field(j, "model_id"))
        f.model_id = string(*v, "pins.model_id");
    if (const json* v = optional_field(j, "image_ref"))
        f.image_ref = string(*v, "pins.image_ref");
    f.image_size = image_size_from_json(require(j, "image_size", where), "pins.image_size");
    if (f.image_size.width <= 0 || f.image_size.height <= 0)
    {
        schema_error("pins.image_size", "must be positive");
    }
    const json& pins = array(require(j, "pins", where), "pins.pins");
    for (std::size_t i = 0; i < pins.size(); ++i)
    {
        f.pins.push_back(pin_from_json(pins[i], "pins.pins[" + std::to_string(i) + "]"));
    }
    return f;
}

// ---------------------------------------------------------------- reports

namespace {

json aggregate_to_json(const MetricAggregate& a)
{
    return json{{"count", a.count},   {"nme", a.nme},
                {"z_n", optional_number(a.zn)}, {"z_n_count", a.zn_count},
                {"chamfer", a.chamfer}, {"pose_frob", a.pose_frob},
                {"pose_angle", a.pose_angle}};
}

MetricAggregate aggregate_from_json(const json& j, const std::string& where)
{
    MetricAggregate a;
    a.count = static_cast<std::size_t>(integer(require(j, "count", where), join(where, "count")));
    a.nme = number(require(j, "nme", where), join(where, "nme"));
    a.zn = optional_number_from_json(j, "z_n", where);
    a.zn_count = static_cast<std::size_t>(integer(require(j, "z_n_count", where), join(where, "z_n_count")));
    a.chamfer = number(require(j, "chamfer", where), join(where, "chamfer"));
    a.pose_frob = number(require(j, "pose_frob", where), join(where, "pose_frob"));
    a.pose_angle = number(require(j, "pose_angle", where), join(where, "pose_angle"));
    return a;
}

} // namespace

json report_to_json(const MetricReport& r)
{
    json j = header("headfit.report");
    j["units"] = r.units;
    j["pose_angle_units"] = "deg";
    j["z_n_n"] = r.zn_n;
    j["failed_count"] = r.failed_count;
    j["overall"] = aggregate_to_json(r.overall);
    json groups = json::object();
    for (const auto& [key, values] : r.subgroups)
    {
        json g = json::object();
        for (const auto& [value, agg] : values)
        {
            g[value] = aggregate_to_json(agg);
        }
        groups[key] = std::move(g);
    }
    j["subgroups"] = std::move(groups);
    json samples = json::array();
    for (const auto& s : r.samples)
    {
        json e{{"id", s.id}, {"failed", s.failed}, {"attributes", s.attributes}};
        if (s.failed)
        {
            e["failure"] = s.failure;
        }
        else
        {
            e["nme"] = s.nme;
            e["z_n"] = optional_number(s.zn);
            e["chamfer"] = s.chamfer;
            e["pose_frob"] = s.pose_frob;
            e["pose_angle"] = s.pose_angle;
        }
        samples.push_back(std::move(e));
    }
    j["samples"] = std::move(samples);
    return j;
}

MetricReport report_from_json(const json& j)
{
    const std::string where = "report";
    check_header(j, "headfit.report", where);
    MetricReport r;
    r.units = string(require(j, "units", where), "report.units");
    r.zn_n = static_cast<int>(integer(require(j, "z_n_n", where), "report.z_n_n"));
    r.failed_count = static_cast<std::size_t>(integer(require(j, "failed_count", where), "report.failed_count"));
    r.overall = aggregate_from_json(require(j, "overall", where), "report.overall");
    const json& groups = require(j, "subgroups", where);
    if (!groups.is_object())
    {
        schema_error("report.subgroups", "expected an object");
    }
    for (const auto& [key, values] : groups.items())
    {
        if (!values.is_object())
        {
            schema_error("report.subgroups." + key, "expected an object");
        }
        for (const auto& [value, agg] : values.items())
        {
            r.subgroups[key][value] = aggregate_from_json(agg, "report.subgroups." + key + "." + value);
        }
    }
    const json& samples = array(require(j, "samples", where), "report.samples");
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        const std::string w = "report.samples[" + std::to_string(i) + "]";
        const json& e = samples[i];
        SampleMetrics s;
        s.id = string(require(e, "id", w), join(w, "id"));
        s.failed = boolean(require(e, "failed", w), join(w, "failed"));
        const json& attrs = require(e, "attributes", w);
        if (!attrs.is_object())
        {
            schema_error(join(w, "attributes"), "expected an object");
        }
        for (const auto& [k, v] : attrs.items())
        {
            s.attributes[k] = string(v, join(w, "attributes." + k));
        }
        if (s.failed)
        {
            s.failure = string(require(e, "failure", w), join(w, "failure"));
        }
        else
        {
            s.nme = number(require(e, "nme", w), join(w, "nme"));
            s.zn = optional_number_from_json(e, "z_n", w);
            s.chamfer = number(require(e, "chamfer", w), join(w, "chamfer"));
            s.pose_frob = number(require(e, "pose_frob", w), join(w, "pose_frob"));
            s.pose_angle = number(require(e, "pose_angle", w), join(w, "pose_angle"));
        }
        r.samples.push_back(std::move(s));
    }
    return r;
}

json labels_to_json(const LabeledImage& image)
{
    json j = header("headfit.labels");
    j["image_id"] = image.image_id;
    json labels = json::array();
    for (const auto& l : image.labels)
    {
        labels.push_back({{"annotator_id", l.annotator_id}, {"landmarks", rows_to_json(l.landmarks)}});
    }
    j["labels"] = std::move(labels);
    j["units"] = "px";
    return j;
}

LabeledImage labels_from_json(const json& j)
{
    const std::string where = "labels";
    check_header(j, "headfit.labels", where);
    LabeledImage image;
    image.image_id = string(require(j, "image_id", where), "labels.image_id");
    const json& labels = array(require(j, "labels", where), "labels.labels");
    for (std::size_t i = 0; i < labels.size(); ++i)
    {
        const std::string w = "labels.labels[" + std::to_string(i) + "]";
        LabelSet set;
        set.annotator_id = string(require(labels[i], "annotator_id", w), join(w, "annotator_id"));
        set.landmarks = rows_from_json(require(labels[i], "landmarks", w), 2, join(w, "landmarks"));
        image.labels.push_back(std::move(set));
    }
    return image;
}

json bboxes_to_json(const std::map<std::string, BBox>& boxes)
{
    json j = header("headfit.bboxes");
    json b = json::object();
    for (const auto& [id, box] : boxes)
    {
        b[id] = bbox_to_json(box);
    }
    j["bboxes"] = std::move(b);
    return j;
}

std::map<std::string, BBox> bboxes_from_json(const json& j)
{
    const std::string where = "bboxes";
    check_header(j, "headfit.bboxes", where);
    const json& b = require(j, "bboxes", where);
    if (!b.is_object())
    {
        schema_error("bboxes.bboxes", "expected an object");
    }
    std::map<std::string, BBox> out;
    for (const auto& [id, box] : b.items())
    {
        out[id] = bbox_from_json(box, "bboxes.bboxes." + id);
    }
    return out;
}

// ---------------------------------------------------------------- files

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
    {
        throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
    }
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes)
{
    std::lock_guard guard(path_lock(path));
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out)
        {
            throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
    {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::IoError, "cannot replace '" + path.string() + "'");
    }
}

json load_json(const std::filesystem::path& path)
{
    return parse_json(read_file(path), path.string());
}

void save_json(const std::filesystem::path& path, const json& j)
{
    write_file_atomic(path, dump_json(j));
}

Mesh load_mesh(const std::filesystem::path& path)
{
    if (path.extension() == ".obj")
    {
        return mesh_from_obj(read_file(path));
    }
    return mesh_from_json(load_json(path));
}

void save_mesh(const std::filesystem::path& path, const Mesh& mesh)
{
    if (path.extension() == ".obj")
    {
        write_file_atomic(path, mesh_to_obj(mesh));
    }
    else
    {
        save_json(path, mesh_to_json(mesh));
    }
}

Annotation load_annotation(const std::filesystem::path& path)
{
    return annotation_from_json(load_json(path));
}

void save_annotation(const std::filesystem::path& path, const Annotation& annotation)
{
    save_json(path, annotation_to_json(annotation));
}

PinFile load_pins(const std::filesystem::path& path)
{
    return pins_from_json(load_json(path));
}

void save_pins(const std::filesystem::path& path, const PinFile& pins)
{
    save_json(path, pins_to_json(pins));
}

MetricReport load_report(const std::filesystem::path& path)
{
    return report_from_json(load_json(path));
}

void save_report(const std::filesystem::path& path, const MetricReport& report)
{
    save_json(path, report_to_json(report));
}

// ---------------------------------------------------------------- validation

std::vector<Violation> validate_annotation(const Annotation& a, const HeadModel& model)
{
    std::vector<Violation> out;
    const auto flag = [&](std::string field, std::string message) {
        out.push_back({std::move(field), std::move(message)});
    };
    if (a.schema_version != kFormatVersion)
    {
        flag("schema_version", "unsupported version " + std::to_string(a.schema_version));
    }
    if (a.vertices.rows() != model.vertex_count())
    {
        flag("vertices", "expected " + std::to_string(model.vertex_count()) + " vertices, got " +
                             std::to_string(a.vertices.rows()));
    }
    if (a.vertices.cols() != 3)
    {
        flag("vertices", "expected 3 columns");
    }
    if (!a.vertices.allFinite())
    {
        flag("vertices", "non-finite coordinate");
    }
    if (!a.matrices.model_view.allFinite())
    {
        flag("model_view", "non-finite entry");
    }
    else
    {
        if (a.matrices.model_view.row(3) != Eigen::RowVector4d(0, 0, 0, 1))
        {
            flag("model_view", "bottom row must be [0, 0, 0, 1]");
        }
        if (!Eigen::FullPivLU<Eigen::Matrix4d>(a.matrices.model_view).isInvertible())
        {
            flag("model_view", "matrix is not invertible");
        }
    }
    if (!a.matrices.frustum.allFinite())
    {
        flag("frustum", "non-finite entry");
    }
    else if (!Eigen::FullPivLU<Eigen::Matrix4d>(a.matrices.frustum).isInvertible())
    {
        flag("frustum", "matrix is not invertible");
    }
    if (!(a.bbox.w > 0.0) || !(a.bbox.h > 0.0) || !std::isfinite(a.bbox.x) || !std::isfinite(a.bbox.y) ||
        !std::isfinite(a.bbox.w) || !std::isfinite(a.bbox.h))
    {
        flag("bbox", "width and height must be positive and finite");
    }
    if (a.image_size.width <= 0 || a.image_size.height <= 0)
    {
        flag("image_size", "must be positive");
    }
    if (a.projection != "orthographic" && a.projection != "perspective")
    {
        flag("projection", "unknown projection '" + a.projection + "'");
    }
    if (a.keypoints && a.keypoints->rows() != 7)
    {
        flag("keypoints", "expected 7 rows");
    }
    if (a.landmarks2d && a.landmarks2d->rows() != 68)
    {
        flag("landmarks2d", "expected 68 rows");
    }
    return out;
}

} // namespace headfit
