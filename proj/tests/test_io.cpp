#include "support.hpp"

#include <fstream>

#include <png.h>

using namespace cyltomo;
using namespace testing_support;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

nlohmann::json load(const std::filesystem::path& p) { return nlohmann::json::parse(slurp(p)); }

CylVolume<float> random_volume(std::uint64_t seed) {
    Pose pose;
    pose.alpha = 0.3;
    pose.beta = 0.05;
    pose.t = Vec3(0.1, -0.2, 0.3);
    CylVolume<float> v(cyl_grid(3, 7, 5, 2.5, 4.0, pose));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& x : v.mu)
        x = u(rng);
    return v;
}

} // namespace

TEST(VolumeIo, CylindricalRoundTripIsBitExact) {
    auto dir = scratch_dir();
    auto v = random_volume(1);
    write_volume(dir / "vol.json", v);
    EXPECT_TRUE(std::filesystem::exists(dir / "vol.raw"));
    EXPECT_EQ(std::filesystem::file_size(dir / "vol.raw"), v.mu.size() * 4);
    auto back = read_cyl_volume(dir / "vol.json");
    EXPECT_EQ(back.mu, v.mu);
    EXPECT_TRUE(back.grid.same_shape(v.grid));
    EXPECT_EQ(back.grid.pose.alpha, v.grid.pose.alpha);
    EXPECT_EQ(back.grid.pose.t, v.grid.pose.t);
    auto j = load(dir / "vol.json");
    EXPECT_EQ(j["ordering"], "h,theta,r");
    EXPECT_EQ(j["dims"], (nlohmann::json{3, 7, 5}));
    EXPECT_EQ(j["dtype"], "float32le");
}

TEST(VolumeIo, CartesianRoundTripIsBitExact) {
    auto dir = scratch_dir();
    CartGrid g;
    g.n_x = 4;
    g.n_y = 3;
    g.n_z = 2;
    g.voxel_size = 0.25;
    g.origin = Vec3(-0.5, -0.375, -0.25);
    CartVolume<float> v(g);
    for (std::size_t k = 0; k < v.mu.size(); ++k)
        v.mu[k] = 0.1f * static_cast<float>(k) + 1e-7f;
    write_volume(dir / "c.json", v);
    auto any = read_volume(dir / "c.json");
    ASSERT_TRUE(std::holds_alternative<CartVolume<float>>(any));
    const auto& back = std::get<CartVolume<float>>(any);
    EXPECT_EQ(back.mu, v.mu);
    EXPECT_EQ(back.grid.origin, g.origin);
    EXPECT_EQ(load(dir / "c.json")["ordering"], "z,y,x");
    EXPECT_THROW(read_cyl_volume(dir / "c.json"), SchemaMismatch);
}

TEST(VolumeIo, TruncatedRawIsSizeMismatch) {
    auto dir = scratch_dir();
    write_volume(dir / "vol.json", random_volume(2));
    auto raw = slurp(dir / "vol.raw");
    dump(dir / "vol.raw", raw.substr(0, raw.size() - 4));
    EXPECT_THROW(read_volume(dir / "vol.json"), SizeMismatch);
}

TEST(VolumeIo, SchemaErrors) {
    auto dir = scratch_dir();
    write_volume(dir / "vol.json", random_volume(3));
    auto j = load(dir / "vol.json");
    auto bad = j;
    bad["schema_version"] = 99;
    dump(dir / "bad.json", bad.dump());
    EXPECT_THROW(read_volume(dir / "bad.json"), SchemaMismatch);
    bad = j;
    bad.erase("grid");
    dump(dir / "bad.json", bad.dump());
    EXPECT_THROW(read_volume(dir / "bad.json"), SchemaMismatch);
    bad = j;
    bad["dims"] = {1, 2, 3};
    dump(dir / "bad.json", bad.dump());
    EXPECT_THROW(read_volume(dir / "bad.json"), SchemaMismatch);
    dump(dir / "junk.json", "{not json");
    EXPECT_THROW(read_volume(dir / "junk.json"), SchemaMismatch);
    EXPECT_THROW(read_volume(dir / "missing.json"), IoFailure);
}

TEST(ProjectionIo, RoundTripAndDims) {
    auto dir = scratch_dir();
    auto vol = make_line_phantom(desk_line_phantom(LineDirection::azimuthal, 2));
    auto ps = forward_project_all(vol, desk_mtf_geometry(3));
    write_projections(dir / "p.json", ps);
    auto back = read_projections(dir / "p.json");
    ASSERT_EQ(back.num_views(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
        EXPECT_EQ(back.images[i].data, ps.images[i].data);
    EXPECT_EQ(back.geom.stage_angles, ps.geom.stage_angles);
    EXPECT_EQ(back.kind, ProjectionKind::line_integral);
    auto j = load(dir / "p.json");
    EXPECT_EQ(j["dims"], (nlohmann::json{3, 34, 136}));
    j["dims"] = {2, 34, 136};
    dump(dir / "p.json", j.dump());
    EXPECT_THROW(read_projections(dir / "p.json"), SchemaMismatch);
}

TEST(GeometryIo, ExactKeysAndRoundTrip) {
    auto dir = scratch_dir();
    ScanGeometry g = inline_scan_geometry(64, 32, 5);
    write_geometry(dir / "g.json", g);
    auto j = load(dir / "g.json");
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it)
        keys.push_back(it.key());
    std::sort(keys.begin(), keys.end());
    EXPECT_EQ(keys, (std::vector<std::string>{"det_cols", "det_rows", "pixel_pitch_mm", "principal_point_px", "sdd_mm",
                                              "sod_mm", "stage_angles_rad"}));
    auto back = read_geometry(dir / "g.json");
    EXPECT_EQ(back.sdd, g.sdd);
    EXPECT_EQ(back.u0, g.u0);
    EXPECT_EQ(back.stage_angles, g.stage_angles);
    j.erase("sod_mm");
    dump(dir / "g.json", j.dump());
    EXPECT_THROW(read_geometry(dir / "g.json"), SchemaMismatch);
}

TEST(PoseIo, RoundTripWithDegrees) {
    auto dir = scratch_dir();
    Pose p;
    p.alpha = 0.1;
    p.beta = 0.2;
    p.gamma = -0.3;
    p.t = Vec3(1, 2, 3);
    write_pose(dir / "pose.json", p, {{"top_rms_px", 0.5}});
    auto j = load(dir / "pose.json");
    EXPECT_NEAR(j["pose"]["beta_deg"].get<double>(), 0.2 * 180 / pi, 1e-12);
    EXPECT_EQ(j["residuals"]["top_rms_px"], 0.5);
    Pose q = read_pose(dir / "pose.json");
    EXPECT_EQ(q.alpha, p.alpha);
    EXPECT_EQ(q.gamma, p.gamma);
    EXPECT_EQ(q.t, p.t);
    EXPECT_THROW(read_pose(dir / "nope.json"), IoFailure);
    write_geometry(dir / "g.json", small_geometry(1));
    EXPECT_THROW(read_pose(dir / "g.json"), SchemaMismatch);
}

TEST(PgmIo, EightAndSixteenBitImport) {
    auto dir = scratch_dir();
    ScanGeometry g = small_geometry(1, 3, 2);
    Image<std::uint16_t> wide(2, 3);
    wide.data = {65535, 30000, 1, 65535, 256, 65535};
    write_pgm(dir / "w.pgm", wide, 65535);
    auto r = read_pgm(dir / "w.pgm");
    EXPECT_EQ(r.max_value, 65535);
    EXPECT_EQ(r.pixels.data, wide.data);
    auto ps = import_pgm_projections({dir / "w.pgm"}, g, 65535.0);
    EXPECT_EQ(ps.kind, ProjectionKind::line_integral);
    EXPECT_EQ(ps.images[0].data[0], 0.0f);
    EXPECT_NEAR(ps.images[0].data[1], std::log(65535.0 / 30000.0), 1e-6);
    EXPECT_NEAR(ps.images[0].data[2], std::log(65535.0), 1e-5);

    Image<std::uint16_t> narrow(2, 3);
    narrow.data = {255, 128, 255, 1, 255, 64};
    write_pgm(dir / "n.pgm", narrow, 255);
    EXPECT_EQ(std::filesystem::file_size(dir / "n.pgm"), std::string("P5\n3 2\n255\n").size() + 6);
    auto psn = import_pgm_projections({dir / "n.pgm"}, g, 255.0);
    EXPECT_EQ(psn.images[0].data[0], 0.0f);
    EXPECT_NEAR(psn.images[0].data[1], std::log(255.0 / 128.0), 1e-6);

    narrow.data[3] = 0;
    write_pgm(dir / "z.pgm", narrow, 255);
    EXPECT_THROW(import_pgm_projections({dir / "z.pgm"}, g, 255.0), NonPositiveIntensity);
    EXPECT_THROW(import_pgm_projections({dir / "n.pgm"}, small_geometry(1, 4, 2), 255.0), SchemaMismatch);
}

TEST(PgmIo, MalformedFiles) {
    auto dir = scratch_dir();
    dump(dir / "a.pgm", "P2\n1 1\n255\n0");
    EXPECT_THROW(read_pgm(dir / "a.pgm"), SchemaMismatch);
    dump(dir / "b.pgm", std::string("P5\n2 2\n255\n") + "abc");
    EXPECT_THROW(read_pgm(dir / "b.pgm"), SizeMismatch);
    dump(dir / "c.pgm", "P5\n# comment\n1 1\n255\nx");
    EXPECT_EQ(read_pgm(dir / "c.pgm").pixels.data[0], 'x');
}

TEST(Csv, Formatting) {
    CsvWriter w({"a", "b", "c", "d"});
    w.row(1, 0.5, std::string("x"), true);
    w.row(-3, 1.0 / 3.0, "y", false);
    EXPECT_EQ(w.str(), "a,b,c,d\n1,0.5,x,1\n-3,0.3333333333,y,0\n");
    auto dir = scratch_dir();
    w.save(dir / "t.csv");
    EXPECT_EQ(slurp(dir / "t.csv"), w.str());
}

TEST(Png, ValidHeatmap) {
    auto dir = scratch_dir();
    Image<double> field(3, 5);
    for (std::size_t k = 0; k < field.data.size(); ++k)
        field.data[k] = static_cast<double>(k);
    std::vector<std::uint8_t> mark(15, 0);
    mark[0] = 1;
    write_heatmap_png(dir / "h.png", field, 0.0, 14.0, mark, 2);
    auto bytes = slurp(dir / "h.png");
    ASSERT_GE(bytes.size(), 8u);
    EXPECT_EQ(bytes.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));

    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    ASSERT_TRUE(png_image_begin_read_from_file(&img, (dir / "h.png").string().c_str()));
    EXPECT_EQ(img.width, 10u);
    EXPECT_EQ(img.height, 6u);
    img.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(img));
    ASSERT_TRUE(png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr));
    // field row 0 is drawn at the bottom; its first cell is marked grey
    std::size_t bottom_left = (5 * 10 + 0) * 3;
    EXPECT_EQ(rgb[bottom_left], 128);
    EXPECT_EQ(rgb[bottom_left + 1], 128);
    EXPECT_THROW(write_heatmap_png(dir / "e.png", Image<double>(), 0, 1), ConfigError);
    EXPECT_THROW(write_heatmap_png(dir / "no/such/dir/x.png", field, 0, 1), IoFailure);
}
