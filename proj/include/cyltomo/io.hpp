#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <tuple>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>
#include <png.h>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "imgproc.hpp"
#include "projector.hpp"

namespace cyltomo {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

namespace detail {

inline std::filesystem::path raw_sibling(const std::filesystem::path& manifest) {
    auto p = manifest;
    p.replace_extension(".raw");
    return p;
}

template <typename T>
void to_little_endian(std::vector<T>& v) {
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1)
        for (auto& x : v) {
            auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(x);
            std::reverse(bytes.begin(), bytes.end());
            x = std::bit_cast<T>(bytes);
        }
}

inline void write_bytes(const std::filesystem::path& p, const void* data, std::size_t n) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoFailure("cannot open " + p.string() + " for writing");
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!f)
        throw IoFailure("write failed: " + p.string());
}

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f)
        throw IoFailure("cannot open " + p.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad())
        throw IoFailure("read failed: " + p.string());
    return buf;
}

inline void write_float_raw(const std::filesystem::path& p, std::vector<float> v) {
    to_little_endian(v);
    write_bytes(p, v.data(), v.size() * sizeof(float));
}

inline std::vector<float> read_float_raw(const std::filesystem::path& p, std::size_t expected) {
    auto bytes = read_bytes(p);
    if (bytes.size() != expected * sizeof(float))
        throw SizeMismatch(p.string() + ": expected " + std::to_string(expected * sizeof(float)) + " bytes, found " +
                           std::to_string(bytes.size()));
    std::vector<float> v(expected);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    to_little_endian(v);
    return v;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) { write_bytes(p, s.data(), s.size()); }

inline json read_json(const std::filesystem::path& p) {
    auto bytes = read_bytes(p);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw SchemaMismatch(p.string() + ": " + e.what());
    }
}

template <typename F>
auto field(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("manifest field: ") + e.what());
    }
}

inline void check_header(const json& j, const std::string& kind) {
    if (!j.is_object() || !j.contains("schema_version") || j["schema_version"] != schema_version)
        throw SchemaMismatch("unsupported or missing schema_version");
    if (!j.contains("kind") || j["kind"] != kind)
        throw SchemaMismatch("manifest kind is not " + kind);
}

} // namespace detail

// pose and geometry documents

inline json pose_to_json(const Pose& p) {
    constexpr double deg = 180.0 / pi;
    return {{"alpha_rad", p.alpha},        {"beta_rad", p.beta},         {"gamma_rad", p.gamma},
            {"alpha_deg", p.alpha * deg}, {"beta_deg", p.beta * deg},   {"gamma_deg", p.gamma * deg},
            {"t_mm", {p.t.x(), p.t.y(), p.t.z()}}};
}

inline Pose pose_from_json(const json& j) {
    return detail::field([&] {
        Pose p;
        p.alpha = j.at("alpha_rad").get<double>();
        p.beta = j.at("beta_rad").get<double>();
        p.gamma = j.at("gamma_rad").get<double>();
        auto t = j.at("t_mm").get<std::vector<double>>();
        if (t.size() != 3)
            throw SchemaMismatch("t_mm must have three components");
        p.t = Vec3(t[0], t[1], t[2]);
        return p;
    });
}

inline json geometry_to_json(const ScanGeometry& g) {
    return {{"sdd_mm", g.sdd},
            {"sod_mm", g.sod},
            {"det_cols", g.det_cols},
            {"det_rows", g.det_rows},
            {"pixel_pitch_mm", g.pixel_pitch},
            {"principal_point_px", {g.u0, g.v0}},
            {"stage_angles_rad", g.stage_angles}};
}

inline ScanGeometry geometry_from_json(const json& j) {
    return detail::field([&] {
        ScanGeometry g;
        g.sdd = j.at("sdd_mm").get<double>();
        g.sod = j.at("sod_mm").get<double>();
        g.det_cols = j.at("det_cols").get<int>();
        g.det_rows = j.at("det_rows").get<int>();
        g.pixel_pitch = j.at("pixel_pitch_mm").get<double>();
        auto pp = j.at("principal_point_px").get<std::vector<double>>();
        if (pp.size() != 2)
            throw SchemaMismatch("principal_point_px must have two components");
        g.u0 = pp[0];
        g.v0 = pp[1];
        g.stage_angles = j.at("stage_angles_rad").get<std::vector<double>>();
        return g;
    });
}

inline void write_geometry(const std::filesystem::path& p, const ScanGeometry& g) {
    detail::write_text(p, geometry_to_json(g).dump(2) + "\n");
}

inline ScanGeometry read_geometry(const std::filesystem::path& p) { return geometry_from_json(detail::read_json(p)); }

inline json cyl_grid_to_json(const CylGrid& g) {
    return {{"n_h", g.n_h},           {"n_theta", g.n_theta}, {"n_r", g.n_r},
            {"radius_mm", g.radius}, {"height_mm", g.height}, {"pose", pose_to_json(g.pose)}};
}

inline CylGrid cyl_grid_from_json(const json& j) {
    return detail::field([&] {
        CylGrid g;
        g.n_h = j.at("n_h").get<int>();
        g.n_theta = j.at("n_theta").get<int>();
        g.n_r = j.at("n_r").get<int>();
        g.radius = j.at("radius_mm").get<double>();
        g.height = j.at("height_mm").get<double>();
        if (j.contains("pose"))
            g.pose = pose_from_json(j.at("pose"));
        return g;
    });
}

inline json cart_grid_to_json(const CartGrid& g) {
    return {{"n_x", g.n_x},
            {"n_y", g.n_y},
            {"n_z", g.n_z},
            {"voxel_size_mm", g.voxel_size},
            {"origin_mm", {g.origin.x(), g.origin.y(), g.origin.z()}}};
}

inline CartGrid cart_grid_from_json(const json& j) {
    return detail::field([&] {
        CartGrid g;
        g.n_x = j.at("n_x").get<int>();
        g.n_y = j.at("n_y").get<int>();
        g.n_z = j.at("n_z").get<int>();
        g.voxel_size = j.at("voxel_size_mm").get<double>();
        auto o = j.at("origin_mm").get<std::vector<double>>();
        if (o.size() != 3)
            throw SchemaMismatch("origin_mm must have three components");
        g.origin = Vec3(o[0], o[1], o[2]);
        return g;
    });
}

/// Pose document: {"schema_version", "kind": "pose", "pose": {...}, "residuals": {...}}.
inline void write_pose(const std::filesystem::path& p, const Pose& pose, const json& residuals = json::object(),
                       const json& extra = json::object()) {
    json j = {{"schema_version", schema_version}, {"kind", "pose"}, {"pose", pose_to_json(pose)}, {"residuals", residuals}};
    for (auto it = extra.begin(); it != extra.end(); ++it)
        j[it.key()] = it.value();
    detail::write_text(p, j.dump(2) + "\n");
}

inline Pose read_pose(const std::filesystem::path& p) {
    json j = detail::read_json(p);
    detail::check_header(j, "pose");
    return pose_from_json(detail::field([&] { return j.at("pose"); }));
}

// volumes: <name>.json manifest + <name>.raw float32 little-endian

template <typename T>
void write_volume(const std::filesystem::path& manifest, const CylVolume<T>& vol) {
    if (vol.mu.size() != vol.grid.size())
        throw SizeMismatch("write_volume: data size does not match grid");
    auto raw = detail::raw_sibling(manifest);
    json j = {{"schema_version", schema_version},
              {"kind", "volume"},
              {"grid_type", "cylindrical"},
              {"dims", {vol.grid.n_h, vol.grid.n_theta, vol.grid.n_r}},
              {"ordering", "h,theta,r"},
              {"dtype", "float32le"},
              {"data_file", raw.filename().string()},
              {"grid", cyl_grid_to_json(vol.grid)}};
    detail::write_float_raw(raw, std::vector<float>(vol.mu.begin(), vol.mu.end()));
    detail::write_text(manifest, j.dump(2) + "\n");
}

template <typename T>
void write_volume(const std::filesystem::path& manifest, const CartVolume<T>& vol) {
    if (vol.mu.size() != vol.grid.size())
        throw SizeMismatch("write_volume: data size does not match grid");
    auto raw = detail::raw_sibling(manifest);
    json j = {{"schema_version", schema_version},
              {"kind", "volume"},
              {"grid_type", "cartesian"},
              {"dims", {vol.grid.n_z, vol.grid.n_y, vol.grid.n_x}},
              {"ordering", "z,y,x"},
              {"dtype", "float32le"},
              {"data_file", raw.filename().string()},
              {"grid", cart_grid_to_json(vol.grid)}};
    detail::write_float_raw(raw, std::vector<float>(vol.mu.begin(), vol.mu.end()));
    detail::write_text(manifest, j.dump(2) + "\n");
}

using AnyVolume = std::variant<CylVolume<float>, CartVolume<float>>;

inline AnyVolume read_volume(const std::filesystem::path& manifest) {
    json j = detail::read_json(manifest);
    detail::check_header(j, "volume");
    auto [type, dtype, file, dims] = detail::field([&] {
        return std::tuple{j.at("grid_type").get<std::string>(), j.at("dtype").get<std::string>(),
                          j.at("data_file").get<std::string>(), j.at("dims").get<std::vector<int>>()};
    });
    if (dtype != "float32le")
        throw SchemaMismatch("unsupported dtype " + dtype);
    auto raw = manifest.parent_path() / file;
    if (type == "cylindrical") {
        CylVolume<float> v;
        v.grid = cyl_grid_from_json(detail::field([&] { return j.at("grid"); }));
        v.grid.validate();
        if (dims != std::vector<int>{v.grid.n_h, v.grid.n_theta, v.grid.n_r})
            throw SchemaMismatch("dims disagree with grid");
        v.mu = detail::read_float_raw(raw, v.grid.size());
        return v;
    }
    if (type == "cartesian") {
        CartVolume<float> v;
        v.grid = cart_grid_from_json(detail::field([&] { return j.at("grid"); }));
        v.grid.validate();
        if (dims != std::vector<int>{v.grid.n_z, v.grid.n_y, v.grid.n_x})
            throw SchemaMismatch("dims disagree with grid");
        v.mu = detail::read_float_raw(raw, v.grid.size());
        return v;
    }
    throw SchemaMismatch("unknown grid_type " + type);
}

inline CylVolume<float> read_cyl_volume(const std::filesystem::path& manifest) {
    auto v = read_volume(manifest);
    if (auto* c = std::get_if<CylVolume<float>>(&v))
        return std::move(*c);
    throw SchemaMismatch(manifest.string() + " is not a cylindrical volume");
}

// projection stacks: <name>.json manifest with embedded geometry + <name>.raw

template <typename T>
void write_projections(const std::filesystem::path& manifest, const ProjectionSet<T>& ps) {
    ps.validate();
    auto raw = detail::raw_sibling(manifest);
    std::vector<float> data;
    data.reserve(ps.num_views() * static_cast<std::size_t>(ps.geom.det_rows) * ps.geom.det_cols);
    for (const auto& im : ps.images)
        data.insert(data.end(), im.data.begin(), im.data.end());
    json j = {{"schema_version", schema_version},
              {"kind", "projections"},
              {"projection_kind", ps.kind == ProjectionKind::line_integral ? "line_integral" : "intensity"},
              {"dims", {static_cast<int>(ps.num_views()), ps.geom.det_rows, ps.geom.det_cols}},
              {"ordering", "view,row,col"},
              {"dtype", "float32le"},
              {"data_file", raw.filename().string()},
              {"geometry", geometry_to_json(ps.geom)}};
    detail::write_float_raw(raw, std::move(data));
    detail::write_text(manifest, j.dump(2) + "\n");
}

inline ProjectionSet<float> read_projections(const std::filesystem::path& manifest) {
    json j = detail::read_json(manifest);
    detail::check_header(j, "projections");
    ProjectionSet<float> ps;
    auto [kind, dtype, file, dims] = detail::field([&] {
        return std::tuple{j.at("projection_kind").get<std::string>(), j.at("dtype").get<std::string>(),
                          j.at("data_file").get<std::string>(), j.at("dims").get<std::vector<int>>()};
    });
    if (dtype != "float32le")
        throw SchemaMismatch("unsupported dtype " + dtype);
    if (kind == "line_integral")
        ps.kind = ProjectionKind::line_integral;
    else if (kind == "intensity")
        ps.kind = ProjectionKind::intensity;
    else
        throw SchemaMismatch("unknown projection_kind " + kind);
    ps.geom = geometry_from_json(detail::field([&] { return j.at("geometry"); }));
    if (dims.size() != 3 || dims[0] != static_cast<int>(ps.geom.num_views()) || dims[1] != ps.geom.det_rows ||
        dims[2] != ps.geom.det_cols)
        throw SchemaMismatch("projection dims disagree with geometry");
    ps.geom.validate();
    std::size_t per = static_cast<std::size_t>(dims[1]) * dims[2];
    auto data = detail::read_float_raw(manifest.parent_path() / file, per * dims[0]);
    for (int i = 0; i < dims[0]; ++i) {
        Image<float> im(dims[1], dims[2]);
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(i * per), per, im.data.begin());
        ps.images.push_back(std::move(im));
    }
    return ps;
}

// PGM (binary P5)

struct PgmImage {
    Image<std::uint16_t> pixels;
    int max_value = 255;
};

inline PgmImage read_pgm(const std::filesystem::path& p) {
    auto bytes = detail::read_bytes(p);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#')
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            else if (std::isspace(static_cast<unsigned char>(bytes[pos])))
                ++pos;
            else
                break;
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
            t += bytes[pos++];
        return t;
    };
    if (token() != "P5")
        throw SchemaMismatch(p.string() + ": not a binary PGM");
    PgmImage out;
    int cols = 0, rows = 0;
    try {
        cols = std::stoi(token());
        rows = std::stoi(token());
        out.max_value = std::stoi(token());
    } catch (const std::exception&) {
        throw SchemaMismatch(p.string() + ": malformed PGM header");
    }
    if (cols < 1 || rows < 1 || out.max_value < 1 || out.max_value > 65535)
        throw SchemaMismatch(p.string() + ": invalid PGM header values");
    ++pos; // single whitespace before the raster
    std::size_t bpp = out.max_value > 255 ? 2 : 1;
    std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (pos > bytes.size() || bytes.size() - pos != n * bpp)
        throw SizeMismatch(p.string() + ": raster size does not match header");
    out.pixels = Image<std::uint16_t>(rows, cols);
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (std::size_t k = 0; k < n; ++k)
        out.pixels.data[k] = bpp == 2 ? static_cast<std::uint16_t>(b[2 * k] << 8 | b[2 * k + 1]) : b[k];
    return out;
}

inline void write_pgm(const std::filesystem::path& p, const Image<std::uint16_t>& img, int max_value) {
    if (max_value < 1 || max_value > 65535)
        throw ConfigError("write_pgm: max_value out of range");
    std::ostringstream os;
    os << "P5\n" << img.cols << " " << img.rows << "\n" << max_value << "\n";
    std::string s = os.str();
    for (auto v : img.data) {
        if (v > max_value)
            throw ConfigError("write_pgm: pixel exceeds max_value");
        if (max_value > 255)
            s += static_cast<char>(v >> 8);
        s += static_cast<char>(v & 0xff);
    }
    detail::write_text(p, s);
}

inline void write_mask_pgm(const std::filesystem::path& p, const BinaryMask& m) {
    Image<std::uint16_t> img(m.rows, m.cols);
    for (std::size_t k = 0; k < m.bits.size(); ++k)
        img.data[k] = m.bits[k] ? 255 : 0;
    write_pgm(p, img, 255);
}

/// Intensity images from PGM files (one per view) converted to line
/// integrals with the flat-field level flat.
inline ProjectionSet<float> import_pgm_projections(const std::vector<std::filesystem::path>& files,
                                                   const ScanGeometry& geom, double flat) {
    ProjectionSet<float> ps;
    ps.geom = geom;
    ps.kind = ProjectionKind::intensity;
    for (const auto& f : files)
        ps.images.push_back(image_cast<float>(read_pgm(f).pixels));
    ps.validate();
    return intensities_to_line_integrals(ps, flat);
}

// CSV and PNG conveniences

class CsvWriter {
  public:
    explicit CsvWriter(const std::vector<std::string>& header) { row_strings(header); }

    template <typename... Ts>
    void row(const Ts&... values) {
        std::vector<std::string> cells{format(values)...};
        row_strings(cells);
    }
    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k)
            text_ += (k ? "," : "") + cells[k];
        text_ += "\n";
    }
    const std::string& str() const { return text_; }
    void save(const std::filesystem::path& p) const { detail::write_text(p, text_); }

    static std::string format(double v) {
        std::ostringstream os;
        os << std::setprecision(10) << v;
        return os.str();
    }
    static std::string format(float v) { return format(static_cast<double>(v)); }
    static std::string format(const std::string& s) { return s; }
    static std::string format(const char* s) { return s; }
    static std::string format(bool b) { return b ? "1" : "0"; }
    template <typename I>
        requires std::is_integral_v<I>
    static std::string format(I v) {
        return std::to_string(v);
    }

  private:
    std::string text_;
};

/// 8-bit RGB PNG of a scalar field through a blue-to-red colormap spanning
/// [lo, hi]. Cells with mark set are drawn grey.
inline void write_heatmap_png(const std::filesystem::path& p, const Image<double>& field, double lo, double hi,
                              const std::vector<std::uint8_t>& mark = {}, int scale = 1) {
    if (field.empty() || scale < 1)
        throw ConfigError("write_heatmap_png: empty field");
    if (!(hi > lo))
        hi = lo + 1.0;
    const int w = field.cols * scale, h = field.rows * scale;
    std::vector<unsigned char> rgb;
    rgb.reserve(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        int r = field.rows - 1 - y / scale; // row 0 at the bottom
        for (int x = 0; x < w; ++x) {
            std::size_t k = static_cast<std::size_t>(r) * field.cols + x / scale;
            if (!mark.empty() && mark[k]) {
                rgb.insert(rgb.end(), 3, 128);
                continue;
            }
            double t = std::clamp((field.data[k] - lo) / (hi - lo), 0.0, 1.0);
            for (double centre : {3.0, 2.0, 1.0})
                rgb.push_back(
                    static_cast<unsigned char>(std::lround(255 * std::clamp(1.5 - std::abs(4 * t - centre), 0.0, 1.0))));
        }
    }
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, p.string().c_str(), 0, rgb.data(), 0, nullptr))
        throw IoFailure("png: " + std::string(img.message));
}

} // namespace cyltomo
