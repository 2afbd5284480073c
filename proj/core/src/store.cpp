// SPDX-License-Identifier: Apache-2.0
#include "wanda/store.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "wanda/errors.hpp"

namespace wanda {

namespace {

using nlohmann::json;

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32le(std::vector<std::uint8_t>& out, double v) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32le(out, bits);
}

double get_f32le(const std::uint8_t* p) {
    const std::uint32_t bits = get_u32le(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return static_cast<double>(f);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string(), p.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed on " + p.string(), p.string());
    return bytes;
}

void write_file(const std::filesystem::path& p, const void* data, std::size_t nbytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + p.string() + " for writing", p.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(nbytes));
    if (!out) throw IoError("write failed on " + p.string(), p.string());
}

ActivationKind activation_from_name(const std::string& s, const std::string& where) {
    if (s == "none") return ActivationKind::none;
    if (s == "relu") return ActivationKind::relu;
    throw FormatError(FormatError::Kind::bad_field,
                      where + ": unknown activation \"" + s + "\"");
}

}  // namespace

const char* activation_name(ActivationKind k) {
    return k == ActivationKind::relu ? "relu" : "none";
}

void ModelCheckpoint::validate() const {
    if (layers.empty()) throw ArgError("model has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const LinearLayer& l = layers[k];
        if (l.name.empty()) throw ArgError("layer " + std::to_string(k) + " has an empty name");
        if (l.c_out == 0 || l.c_in == 0)
            throw ShapeError("layer '" + l.name + "' has a zero dimension");
        if (l.weight.rows != l.c_out || l.weight.cols != l.c_in)
            throw ShapeError("layer '" + l.name + "' weight is " + std::to_string(l.weight.rows) +
                             "x" + std::to_string(l.weight.cols) + ", expected " +
                             std::to_string(l.c_out) + "x" + std::to_string(l.c_in));
        if (!l.weight.all_finite())
            throw NonFiniteError("layer '" + l.name + "' contains non-finite weights");
        if (k + 1 < layers.size() && layers[k + 1].c_in != l.c_out)
            throw ShapeError("layer '" + layers[k + 1].name + "' expects c_in " +
                             std::to_string(layers[k + 1].c_in) + " but layer '" + l.name +
                             "' produces c_out " + std::to_string(l.c_out));
    }
}

void save_checkpoint(const ModelCheckpoint& m, const std::filesystem::path& dir) {
    m.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string(), dir.string());

    std::vector<std::uint8_t> blob;
    json layers = json::array();
    std::size_t offset = 0;
    for (const LinearLayer& l : m.layers) {
        const std::size_t nbytes = l.c_out * l.c_in * 4;
        layers.push_back({{"name", l.name},
                          {"c_out", l.c_out},
                          {"c_in", l.c_in},
                          {"activation", activation_name(l.activation)},
                          {"weight_offset", offset},
                          {"weight_nbytes", nbytes},
                          {"dtype", "f32le"}});
        blob.reserve(blob.size() + nbytes);
        for (double v : l.weight.data) put_f32le(blob, v);
        offset += nbytes;
    }
    const json manifest = {{"version", 1}, {"layers", layers}};
    const std::string text = manifest.dump(2) + "\n";
    write_file(dir / "manifest.json", text.data(), text.size());
    write_file(dir / "weights.bin", blob.data(), blob.size());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    const std::vector<std::uint8_t> mbytes = read_file(dir / "manifest.json");
    json manifest;
    try {
        manifest = json::parse(mbytes.begin(), mbytes.end());
    } catch (const json::parse_error& e) {
        throw FormatError(FormatError::Kind::malformed_json,
                          "manifest.json is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.is_object() || !manifest.contains("version") ||
        !manifest["version"].is_number_integer())
        throw FormatError(FormatError::Kind::bad_field, "manifest.json: missing integer \"version\"");
    if (manifest["version"].get<std::int64_t>() != 1)
        throw FormatError(FormatError::Kind::bad_version,
                          "manifest.json: unsupported version " + manifest["version"].dump());
    if (!manifest.contains("layers") || !manifest["layers"].is_array() ||
        manifest["layers"].empty())
        throw FormatError(FormatError::Kind::bad_field,
                          "manifest.json: \"layers\" must be a nonempty array");

    const std::vector<std::uint8_t> blob = read_file(dir / "weights.bin");

    ModelCheckpoint m;
    std::size_t running = 0;
    std::size_t idx = 0;
    for (const json& e : manifest["layers"]) {
        const std::string where = "manifest.json: layer " + std::to_string(idx);
        auto need = [&](const char* field) -> const json& {
            if (!e.is_object() || !e.contains(field))
                throw FormatError(FormatError::Kind::bad_field,
                                  where + ": missing field \"" + field + "\"");
            return e[field];
        };
        LinearLayer l;
        const json& jname = need("name");
        if (!jname.is_string() || jname.get<std::string>().empty())
            throw FormatError(FormatError::Kind::bad_field, where + ": \"name\" must be a nonempty string");
        l.name = jname.get<std::string>();
        for (const char* f : {"c_out", "c_in", "weight_offset", "weight_nbytes"})
            if (!need(f).is_number_unsigned())
                throw FormatError(FormatError::Kind::bad_field,
                                  where + ": \"" + f + "\" must be a nonnegative integer");
        l.c_out = e["c_out"].get<std::size_t>();
        l.c_in = e["c_in"].get<std::size_t>();
        if (l.c_out == 0 || l.c_in == 0)
            throw FormatError(FormatError::Kind::bad_field, where + ": dimensions must be >= 1");
        if (!need("dtype").is_string() || e["dtype"].get<std::string>() != "f32le")
            throw FormatError(FormatError::Kind::bad_field,
                              where + ": \"dtype\" must be \"f32le\"");
        if (!need("activation").is_string())
            throw FormatError(FormatError::Kind::bad_field, where + ": \"activation\" must be a string");
        l.activation = activation_from_name(e["activation"].get<std::string>(), where);

        const std::size_t offset = e["weight_offset"].get<std::size_t>();
        const std::size_t nbytes = e["weight_nbytes"].get<std::size_t>();
        if (offset != running)
            throw FormatError(FormatError::Kind::blob_mismatch,
                              where + ": weight_offset " + std::to_string(offset) +
                                  " breaks tight packing (expected " + std::to_string(running) + ")");
        if (nbytes != l.c_out * l.c_in * 4)
            throw FormatError(FormatError::Kind::blob_mismatch,
                              where + ": weight_nbytes " + std::to_string(nbytes) + " does not match " +
                                  std::to_string(l.c_out) + "x" + std::to_string(l.c_in) + " f32");
        if (offset + nbytes > blob.size())
            throw FormatError(FormatError::Kind::truncated,
                              "weights.bin is truncated: layer '" + l.name + "' needs bytes up to " +
                                  std::to_string(offset + nbytes) + " but the file has " +
                                  std::to_string(blob.size()));

        l.weight = DenseMatrix(l.c_out, l.c_in);
        for (std::size_t i = 0; i < l.c_out * l.c_in; ++i) {
            const double v = get_f32le(blob.data() + offset + i * 4);
            if (!std::isfinite(v))
                throw FormatError(FormatError::Kind::non_finite,
                                  "layer '" + l.name + "' weight at flat index " +
                                      std::to_string(i) + " is not finite");
            l.weight.data[i] = v;
        }
        running += nbytes;
        m.layers.push_back(std::move(l));
        ++idx;
    }
    if (running != blob.size())
        throw FormatError(FormatError::Kind::blob_mismatch,
                          "weights.bin length " + std::to_string(blob.size()) +
                              " does not match manifest total " + std::to_string(running));
    for (std::size_t k = 0; k + 1 < m.layers.size(); ++k)
        if (m.layers[k + 1].c_in != m.layers[k].c_out)
            throw FormatError(FormatError::Kind::shape_chain,
                              "layer '" + m.layers[k + 1].name + "' expects c_in " +
                                  std::to_string(m.layers[k + 1].c_in) + " but layer '" +
                                  m.layers[k].name + "' produces c_out " +
                                  std::to_string(m.layers[k].c_out));
    return m;
}

void save_calibration(const CalibrationBatch& b, const std::filesystem::path& file) {
    if (b.n_tokens == 0 || b.c_in == 0)
        throw ArgError("calibration batch must have n_tokens >= 1 and c_in >= 1");
    if (b.data.rows != b.n_tokens || b.data.cols != b.c_in)
        throw ShapeError("calibration data is " + std::to_string(b.data.rows) + "x" +
                         std::to_string(b.data.cols) + ", expected " + std::to_string(b.n_tokens) +
                         "x" + std::to_string(b.c_in));
    if (!b.data.all_finite()) throw NonFiniteError("calibration batch contains non-finite values");
    if (b.n_tokens > std::numeric_limits<std::uint32_t>::max() ||
        b.c_in > std::numeric_limits<std::uint32_t>::max())
        throw ArgError("calibration dimensions exceed the u32 file format");

    std::vector<std::uint8_t> bytes;
    bytes.reserve(16 + b.data.data.size() * 4);
    bytes.insert(bytes.end(), {'C', 'A', 'L', 'B'});
    put_u32le(bytes, 1);
    put_u32le(bytes, static_cast<std::uint32_t>(b.n_tokens));
    put_u32le(bytes, static_cast<std::uint32_t>(b.c_in));
    for (double v : b.data.data) put_f32le(bytes, v);
    write_file(file, bytes.data(), bytes.size());
}

CalibrationBatch load_calibration(const std::filesystem::path& file) {
    const std::vector<std::uint8_t> bytes = read_file(file);
    if (bytes.size() < 16)
        throw FormatError(FormatError::Kind::truncated,
                          file.string() + " is too short for a calibration header");
    if (std::memcmp(bytes.data(), "CALB", 4) != 0)
        throw FormatError(FormatError::Kind::bad_magic,
                          file.string() + " does not start with the CALB magic");
    const std::uint32_t version = get_u32le(bytes.data() + 4);
    if (version != 1)
        throw FormatError(FormatError::Kind::bad_version,
                          file.string() + ": unsupported calibration version " +
                              std::to_string(version));
    CalibrationBatch b;
    b.n_tokens = get_u32le(bytes.data() + 8);
    b.c_in = get_u32le(bytes.data() + 12);
    if (b.n_tokens == 0 || b.c_in == 0)
        throw FormatError(FormatError::Kind::bad_field,
                          file.string() + ": n_tokens and c_in must be >= 1");
    const std::size_t expect = 16 + std::size_t{b.n_tokens} * b.c_in * 4;
    if (bytes.size() < expect)
        throw FormatError(FormatError::Kind::truncated,
                          file.string() + " payload is truncated: have " +
                              std::to_string(bytes.size()) + " bytes, need " + std::to_string(expect));
    if (bytes.size() > expect)
        throw FormatError(FormatError::Kind::blob_mismatch,
                          file.string() + " has trailing bytes: have " + std::to_string(bytes.size()) +
                              ", expected " + std::to_string(expect));
    b.data = DenseMatrix(b.n_tokens, b.c_in);
    for (std::size_t i = 0; i < b.data.data.size(); ++i) {
        const double v = get_f32le(bytes.data() + 16 + i * 4);
        if (!std::isfinite(v))
            throw FormatError(FormatError::Kind::non_finite,
                              file.string() + ": value at flat index " + std::to_string(i) +
                                  " is not finite");
        b.data.data[i] = v;
    }
    return b;
}

}  // namespace wanda
