// Command-line front end: phantom, simulate, pose, reconstruct, mtf, batch.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cyltomo/cyltomo.hpp>

namespace fs = std::filesystem;
using namespace cyltomo;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string preset = "desk";
    std::string out = ".";
};

fs::path out_dir(const Common& c) {
    fs::path p(c.out);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec)
        throw IoFailure("cannot create output directory " + p.string() + ": " + ec.message());
    return p;
}

void check_preset(const std::string& p) {
    if (p != "paper" && p != "desk")
        throw ConfigError("--preset must be paper or desk");
}

/// Flattens a JSON config object into command-line tokens placed ahead of the
/// real arguments, so explicit flags win. Keys map to flags with '_' -> '-'.
std::vector<std::string> config_tokens(const std::string& path) {
    json j = detail::read_json(path);
    if (!j.is_object())
        throw ConfigError(path + ": config must be a JSON object");
    std::vector<std::string> tokens;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string flag = "--" + it.key();
        for (auto& ch : flag)
            if (ch == '_')
                ch = '-';
        auto scalar = [](const json& v) {
            if (v.is_string())
                return v.get<std::string>();
            if (v.is_number_integer())
                return std::to_string(v.get<long long>());
            if (v.is_number())
                return CsvWriter::format(v.get<double>());
            throw ConfigError("config value must be a string, number, boolean or array");
        };
        const json& v = it.value();
        if (v.is_boolean()) {
            if (v.get<bool>())
                tokens.push_back(flag);
        } else if (v.is_array()) {
            tokens.push_back(flag);
            for (const auto& e : v)
                tokens.push_back(scalar(e));
        } else {
            tokens.push_back(flag);
            tokens.push_back(scalar(v));
        }
    }
    return tokens;
}

LineDirection parse_direction(const std::string& s) {
    if (s == "azimuthal")
        return LineDirection::azimuthal;
    if (s == "radial")
        return LineDirection::radial;
    throw ConfigError("direction must be azimuthal or radial");
}

std::string direction_name(LineDirection d) { return d == LineDirection::azimuthal ? "azimuthal" : "radial"; }

// phantom

struct PhantomOpts {
    std::string direction = "azimuthal";
    int n_lines = 4;
    std::vector<int> shape;
    double radius = 0.0, height = 0.0;
    double amplitude = 1.0;
    bool assembly = false;
};

int cmd_phantom(const Common& c, const PhantomOpts& o) {
    check_preset(c.preset);
    fs::path dir = out_dir(c);
    if (o.assembly) {
        AssemblyModel m = default_assembly();
        CylGrid g = m.grid({240, 40, 60});
        if (o.shape.size() == 3)
            g = m.grid({o.shape[0], o.shape[1], o.shape[2]});
        std::size_t overlaps = 0;
        write_volume(dir / "assembly_present.json", make_assembly_phantom(m.with_target(true), g, &overlaps));
        write_volume(dir / "assembly_missing.json", make_assembly_phantom(m.with_target(false), g));
        write_volume(dir / "weights.json", make_weight_map({{m.roi, m.roi_weight}}, g, m.background_weight));
        std::cout << "assembly phantom " << g.n_h << "x" << g.n_theta << "x" << g.n_r << " overlaps " << overlaps
                  << "\n";
        return 0;
    }
    LineDirection d = parse_direction(o.direction);
    LinePhantomSpec spec = c.preset == "paper" ? paper_line_phantom(d, o.n_lines) : desk_line_phantom(d, o.n_lines);
    if (!o.shape.empty()) {
        if (o.shape.size() != 3)
            throw ConfigError("--shape needs three values (h theta r)");
        spec.shape = {o.shape[0], o.shape[1], o.shape[2]};
    }
    if (o.radius > 0.0)
        spec.radius = o.radius;
    if (o.height > 0.0)
        spec.height = o.height;
    spec.amplitude = o.amplitude;
    auto vol = make_line_phantom(spec);
    write_volume(dir / "phantom.json", vol);
    std::cout << "phantom " << direction_name(d) << " n_lines=" << spec.n_lines << " shape " << spec.shape[0] << "x"
              << spec.shape[1] << "x" << spec.shape[2] << "\n";
    return 0;
}

// simulate

struct SimulateOpts {
    std::string volume;
    std::string geometry;
    std::string pose;
    std::string layout = "auto"; // auto | mtf | inline | aliasing
    int views = 0;
    double arc_deg = 0.0;
    double noise_counts = 0.0;
    bool intensities = false;
    double flat = 65535.0;
};

ScanGeometry simulate_geometry(const Common& c, const SimulateOpts& o) {
    if (!o.geometry.empty())
        return read_geometry(o.geometry);
    std::string layout = o.layout;
    if (layout == "auto")
        layout = "mtf";
    ScanGeometry g;
    if (layout == "mtf")
        g = c.preset == "paper" ? paper_mtf_geometry(o.views > 0 ? o.views : 4096)
                                : desk_mtf_geometry(o.views > 0 ? o.views : 512);
    else if (layout == "aliasing")
        g = c.preset == "paper" ? paper_mtf_geometry(67) : desk_mtf_geometry(67);
    else if (layout == "inline")
        g = c.preset == "paper" ? inline_scan_geometry(1944, 1536, o.views > 0 ? o.views : 21)
                                : inline_scan_geometry(256, 128, o.views > 0 ? o.views : 21);
    else
        throw ConfigError("--layout must be auto, mtf, inline or aliasing");
    if (o.arc_deg > 0.0)
        g.stage_angles = make_circular_trajectory(g.num_views(), o.arc_deg * pi / 180.0);
    return g;
}

int cmd_simulate(const Common& c, const SimulateOpts& o) {
    check_preset(c.preset);
    if (o.volume.empty())
        throw ConfigError("simulate: --volume is required");
    ScanGeometry g = simulate_geometry(c, o);
    g.validate();
    AnyVolume vol = read_volume(o.volume);
    ProjectionSet<float> ps;
    std::visit(
        [&](auto& v) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, CylVolume<float>>)
                if (!o.pose.empty())
                    v.grid.pose = read_pose(o.pose);
            ps = forward_project_all(v, g);
        },
        vol);
    if (o.noise_counts > 0.0)
        add_counting_noise(ps, o.noise_counts, c.seed);
    if (o.intensities)
        ps = line_integrals_to_intensities(ps, o.flat);
    fs::path dir = out_dir(c);
    write_projections(dir / "projections.json", ps);
    write_geometry(dir / "geometry.json", g);
    std::cout << "simulated " << ps.num_views() << " views of " << g.det_cols << "x" << g.det_rows << "\n";
    return 0;
}

// pose

struct PoseOpts {
    std::string projections;
    std::vector<std::string> pgm;
    std::string geometry;
    double flat = 65535.0;
    double level = -1.0; // < 0: Otsu
    int band = 16;
    std::string endpoints = "row_midpoints";
    bool subpixel = true;
    int dilate = 0;
    double nuisance_level = -1.0;
    double phase_width_mm = 0.0; // 0: no internal rotation
    double phase_offset_mm = 0.0;
    std::string phase_signal = "moment";
    double reference_azimuth_deg = 0.0;
    bool precision_study = false;
    int samples = 5;
};

PoseParams pose_params(const PoseOpts& o) {
    PoseParams pp;
    pp.level = o.level >= 0.0 ? ThresholdLevel::at(o.level) : ThresholdLevel::automatic();
    pp.band = o.band;
    pp.dilate_radius = o.dilate;
    if (o.endpoints == "row_midpoints")
        pp.endpoints = EndpointMethod::row_midpoints;
    else if (o.endpoints == "extremal_pixels")
        pp.endpoints = EndpointMethod::extremal_pixels;
    else
        throw ConfigError("--endpoints must be row_midpoints or extremal_pixels");
    pp.subpixel_edges = o.subpixel && pp.endpoints == EndpointMethod::row_midpoints && pp.level.fixed &&
                        pp.dilate_radius == 0;
    if (o.nuisance_level >= 0.0)
        pp.nuisance_level = o.nuisance_level;
    if (o.phase_width_mm > 0.0) {
        PhaseConfig ph;
        ph.width_mm = o.phase_width_mm;
        ph.offset_mm = o.phase_offset_mm;
        ph.reference_azimuth = o.reference_azimuth_deg * pi / 180.0;
        if (o.phase_signal == "moment")
            ph.signal = PhaseSignal::moment;
        else if (o.phase_signal == "strip")
            ph.signal = PhaseSignal::strip;
        else if (o.phase_signal == "differential")
            ph.signal = PhaseSignal::differential;
        else
            throw ConfigError("--phase-signal must be moment, strip or differential");
        pp.phase = ph;
    }
    return pp;
}

int cmd_pose(const Common& c, const PoseOpts& o) {
    check_preset(c.preset);
    fs::path dir = out_dir(c);
    if (o.precision_study) {
        PrecisionConfig pc;
        pc.n_samples = o.samples;
        pc.seed = c.seed;
        if (o.level >= 0.0)
            pc.silhouette_level = o.level;
        auto res = run_precision_study(pc);
        CsvWriter csv({"sample", "sigma_alpha_deg", "sigma_beta_deg", "sigma_gamma_deg", "sigma_tx_mm", "sigma_ty_mm",
                       "sigma_tz_mm"});
        constexpr double deg = 180.0 / pi;
        for (std::size_t s = 0; s < res.size(); ++s) {
            const Pose& sg = res[s].sigma;
            csv.row(s, sg.alpha * deg, sg.beta * deg, sg.gamma * deg, sg.t.x(), sg.t.y(), sg.t.z());
        }
        csv.save(dir / "pose_precision.csv");
        std::cout << "precision study: " << res.size() << " samples x " << pc.center_columns.size()
                  << " rotation centers\n";
        return 0;
    }
    ProjectionSet<float> ps;
    if (!o.pgm.empty()) {
        if (o.geometry.empty())
            throw ConfigError("pose: --pgm needs --geometry");
        ps = import_pgm_projections({o.pgm.begin(), o.pgm.end()}, read_geometry(o.geometry), o.flat);
    } else if (!o.projections.empty()) {
        ps = read_projections(o.projections);
        if (ps.kind == ProjectionKind::intensity)
            ps = intensities_to_line_integrals(ps, o.flat);
    } else {
        throw ConfigError("pose: --projections or --pgm is required");
    }
    PoseEstimate est = estimate_pose(ps, pose_params(o));
    json residuals = {{"top_rms_px", est.top.residual_rms},
                      {"bottom_rms_px", est.bottom.residual_rms},
                      {"top_iterations", est.top.iterations},
                      {"bottom_iterations", est.bottom.iterations},
                      {"converged", est.top.converged && est.bottom.converged}};
    json extra = json::object();
    if (est.phase)
        extra["phase"] = {{"perceived_phase_rad", est.phase->perceived_phase},
                          {"amplitude", est.phase->amplitude},
                          {"signal", est.phase->signal}};
    write_pose(dir / "pose.json", est.pose, residuals, extra);
    constexpr double deg = 180.0 / pi;
    std::cout << "pose alpha=" << est.pose.alpha * deg << " beta=" << est.pose.beta * deg
              << " gamma=" << est.pose.gamma * deg << " deg, t=(" << est.pose.t.x() << ", " << est.pose.t.y() << ", "
              << est.pose.t.z() << ") mm\n";
    return 0;
}

// reconstruct

struct ReconOpts {
    std::string projections;
    std::string pose;
    std::vector<int> grid;
    double radius = 0.0, height = 0.0;
    bool cartesian = false;
    std::vector<int> cart_dims;
    double voxel_size = 0.0;
    std::string init = "none";
    std::string template_path;
    std::string weights = "none";
    std::string weight_map;
    int iterations = 1;
    double relaxation = 1.0;
    std::string order = "acquisition";
    double step = 0.0;
    bool batch_grid = false;
};

int cmd_reconstruct(const Common& c, const ReconOpts& o) {
    check_preset(c.preset);
    if (o.projections.empty())
        throw ConfigError("reconstruct: --projections is required");
    ProjectionSet<float> ps = read_projections(o.projections);
    if (ps.kind != ProjectionKind::line_integral)
        throw ConfigError("reconstruct: convert intensities to line integrals first");
    SartConfig cfg;
    cfg.n_iterations = o.iterations;
    cfg.relaxation = o.relaxation;
    cfg.seed = c.seed;
    cfg.sampling.step = o.step;
    if (o.order == "permuted")
        cfg.order = ViewOrder::permuted;
    else if (o.order != "acquisition")
        throw ConfigError("--order must be acquisition or permuted");
    if (o.init != "none" && o.init != "template")
        throw ConfigError("--init must be none or template");
    if (o.weights != "none" && o.weights != "map")
        throw ConfigError("--weights must be none or map");
    cfg.validate();
    fs::path dir = out_dir(c);
    ReconReport report;

    if (o.cartesian) {
        if (o.cart_dims.size() != 3 || !(o.voxel_size > 0.0))
            throw ConfigError("cartesian grid needs --cart-dims nx ny nz and --voxel-size");
        if (o.init != "none" || o.weights != "none")
            throw ConfigError("templates and weight maps are cylindrical only");
        CartGrid g;
        g.n_x = o.cart_dims[0];
        g.n_y = o.cart_dims[1];
        g.n_z = o.cart_dims[2];
        g.voxel_size = o.voxel_size;
        g.origin = -0.5 * g.extent();
        if (!o.pose.empty())
            g.origin += read_pose(o.pose).t;
        auto res = sart_run(ps, g, cfg);
        write_volume(dir / "volume.json", res.volume);
        report = res.report;
    } else {
        CylGrid g;
        if (o.batch_grid) {
            g.n_h = 240;
            g.n_theta = 40;
            g.n_r = 60;
        } else if (o.grid.size() == 3) {
            g.n_h = o.grid[0];
            g.n_theta = o.grid[1];
            g.n_r = o.grid[2];
        } else {
            throw ConfigError("reconstruct: --grid h theta r (or --batch-grid) is required");
        }
        CylVolume<float> tmpl, wmap;
        if (!o.template_path.empty()) {
            tmpl = read_cyl_volume(o.template_path);
            g.radius = tmpl.grid.radius;
            g.height = tmpl.grid.height;
        }
        if (o.radius > 0.0)
            g.radius = o.radius;
        if (o.height > 0.0)
            g.height = o.height;
        if (!o.pose.empty())
            g.pose = read_pose(o.pose);
        if (o.init == "template" && o.template_path.empty())
            throw ConfigError("--init template needs --template");
        if (o.weights == "map") {
            if (o.weight_map.empty())
                throw ConfigError("--weights map needs --weight-map");
            wmap = read_cyl_volume(o.weight_map);
            if (!wmap.grid.same_shape(g))
                throw ConfigError("weight map shape differs from the grid");
        }
        auto res = sart_run(ps, g, cfg, o.init == "template" ? &tmpl : nullptr,
                            o.weights == "map" ? std::span<const float>(wmap.mu) : std::span<const float>{});
        write_volume(dir / "volume.json", res.volume);
        report = res.report;
    }
    CsvWriter csv({"pass", "residual"});
    for (std::size_t k = 0; k < report.residuals.size(); ++k)
        csv.row(k + 1, report.residuals[k]);
    csv.save(dir / "residuals.csv");
    json rep = {{"iterations", o.iterations},    {"relaxation", o.relaxation}, {"init", o.init},
                {"weights", o.weights},          {"order", o.order},           {"residuals", report.residuals},
                {"wall_seconds", report.wall_seconds}};
    detail::write_text(dir / "report.json", rep.dump(2) + "\n");
    std::cout << "reconstructed in " << report.wall_seconds << " s, final residual "
              << (report.residuals.empty() ? 0.0 : report.residuals.back()) << "\n";
    return 0;
}

// mtf

struct MtfOpts {
    std::string direction = "azimuthal";
    int views = 0;
    int n_theta = 128;
    int max_lines = 0; // 0: n_r / 2 (radial) or n_theta / 2 (azimuthal)
    std::vector<int> lines;
    int iterations = 2;
    bool aliasing = false;
};

int cmd_mtf(const Common& c, const MtfOpts& o) {
    check_preset(c.preset);
    LineDirection d = parse_direction(o.direction);
    LinePhantomSpec base = c.preset == "paper" ? paper_line_phantom(d, 1) : desk_line_phantom(d, 1);
    std::size_t views = o.aliasing ? 67 : (o.views > 0 ? o.views : (c.preset == "paper" ? 4096 : 512));
    std::vector<int> sweep = o.lines;
    if (sweep.empty()) {
        int limit = o.max_lines > 0 ? o.max_lines : (d == LineDirection::radial ? base.shape[2] / 2 : o.n_theta / 2);
        sweep = doubling_sweep(limit);
    }
    MtfCurve curve;
    curve.direction = d;
    CsvWriter csv({"direction", "n_lines", "index", "r_begin", "r_end", "modulation", "aliased"});
    for (int n : sweep) {
        MtfRunConfig rc;
        rc.phantom = base;
        rc.phantom.n_lines = n;
        rc.n_views = views;
        rc.recon_n_theta = o.n_theta;
        rc.sart.n_iterations = o.iterations;
        if (c.preset == "paper")
            rc.geometry = paper_mtf_geometry(views);
        MtfRun run = run_line_phantom(rc);
        if (d == LineDirection::azimuthal) {
            AzimuthalMtf m = mtf_azimuthal(run.volume, n);
            append_azimuthal(curve, m);
            for (std::size_t ir = 0; ir < m.modulation.size(); ++ir)
                csv.row(direction_name(d), n, ir, ir, ir + 1, m.modulation[ir], curve.aliased.back()[ir]);
        } else {
            RadialMtf m = mtf_radial(run.volume, n);
            append_radial(curve, m);
            for (std::size_t k = 0; k < m.windows.size(); ++k)
                csv.row(direction_name(d), n, k, m.windows[k].r_begin, m.windows[k].r_end, m.windows[k].modulation,
                        curve.aliased.back()[k]);
        }
        std::cout << direction_name(d) << " n_lines=" << n << " median modulation " << curve.modulation.back() << "\n";
    }
    fs::path dir = out_dir(c);
    std::string stem = "mtf_" + direction_name(d);
    csv.save(dir / (stem + ".csv"));
    CsvWriter summary({"n_lines", "median_modulation"});
    for (std::size_t k = 0; k < curve.frequencies.size(); ++k)
        summary.row(curve.frequencies[k], curve.modulation[k]);
    summary.save(dir / (stem + "_summary.csv"));

    // heatmap: columns = frequencies, rows = radius (or window)
    std::size_t rows = 0;
    for (const auto& col : curve.by_radius)
        rows = std::max(rows, col.size());
    Image<double> field(static_cast<int>(rows), static_cast<int>(curve.frequencies.size()), 0.0);
    std::vector<std::uint8_t> mark(field.size(), 0);
    for (std::size_t f = 0; f < curve.by_radius.size(); ++f)
        for (std::size_t r = 0; r < curve.by_radius[f].size(); ++r) {
            std::size_t k = r * field.cols + f;
            field.data[k] = curve.by_radius[f][r];
            mark[k] = curve.aliased[f][r] ? 1 : 0;
        }
    write_heatmap_png(dir / (stem + ".png"), field, 0.0, 1.0, mark, 16);
    return 0;
}

// batch

struct BatchOpts {
    int samples = 50;
    int iterations = 1;
    double missing_fraction = 0.5;
    double noise_counts = 2e4;
    bool true_poses = false;
    std::vector<std::string> strategies;
};

Strategy parse_strategy(const std::string& s) {
    if (s == "a" || s == "plain")
        return Strategy::plain;
    if (s == "b" || s == "initial")
        return Strategy::initial;
    if (s == "c" || s == "initial_weighted")
        return Strategy::initial_weighted;
    if (s == "d" || s == "weighted")
        return Strategy::weighted;
    throw ConfigError("unknown strategy " + s);
}

int cmd_batch(const Common& c, const BatchOpts& o) {
    check_preset(c.preset);
    BatchConfig bc;
    bc.n_samples = o.samples;
    bc.sart.n_iterations = o.iterations;
    bc.missing_fraction = o.missing_fraction;
    bc.flat_counts = o.noise_counts;
    bc.estimate_poses = !o.true_poses;
    bc.seed = c.seed;
    if (!o.strategies.empty()) {
        bc.strategies.clear();
        for (const auto& s : o.strategies)
            bc.strategies.push_back(parse_strategy(s));
    }
    fs::path dir = out_dir(c);
    BatchResult res = run_batch(bc);
    std::vector<std::string> header{"sample", "present"};
    for (Strategy s : bc.strategies)
        header.push_back(strategy_name(s));
    CsvWriter csv(header);
    for (const auto& s : res.samples) {
        std::vector<std::string> cells{std::to_string(s.index), s.present ? "1" : "0"};
        for (double m : s.metric)
            cells.push_back(CsvWriter::format(m));
        csv.row_strings(cells);
    }
    csv.save(dir / "batch.csv");
    CsvWriter summary({"strategy", "standardized_gap"});
    for (std::size_t k = 0; k < bc.strategies.size(); ++k) {
        summary.row(strategy_name(bc.strategies[k]), res.gap[k]);
        std::cout << strategy_name(bc.strategies[k]) << ": gap " << res.gap[k] << ", "
                  << res.seconds_per_reconstruction[k] << " s per reconstruction\n";
    }
    summary.save(dir / "batch_summary.csv");
    CsvWriter timing({"strategy", "seconds_per_reconstruction"});
    for (std::size_t k = 0; k < bc.strategies.size(); ++k)
        timing.row(strategy_name(bc.strategies[k]), res.seconds_per_reconstruction[k]);
    timing.save(dir / "batch_timing.csv");
    return 0;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON file whose keys supply default flag values");
    sub->add_option("--seed", c.seed, "seed for noise and permutations");
    sub->add_option("--threads", c.threads, "worker cap (CYLTOMO_THREADS otherwise)");
    sub->add_option("--preset", c.preset, "paper or desk")->check(CLI::IsMember({"paper", "desk"}));
    sub->add_option("--out", c.out, "output directory");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cylindrical-grid cone-beam tomography"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    Common common;

    PhantomOpts po;
    auto* phantom = app.add_subcommand("phantom", "generate a line or assembly phantom");
    add_common(phantom, common);
    phantom->add_option("--direction", po.direction, "line direction")->check(CLI::IsMember({"azimuthal", "radial"}));
    phantom->add_option("--n-lines", po.n_lines, "line pairs across theta or r");
    phantom->add_option("--shape", po.shape, "grid size h theta r")->expected(3)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    phantom->add_option("--radius", po.radius, "mm");
    phantom->add_option("--height", po.height, "mm");
    phantom->add_option("--amplitude", po.amplitude, "line attenuation per mm");
    phantom->add_flag("--assembly", po.assembly, "assembly phantom with weight map");

    SimulateOpts so;
    auto* simulate = app.add_subcommand("simulate", "forward-project a volume");
    add_common(simulate, common);
    simulate->add_option("--volume", so.volume, "volume JSON to project");
    simulate->add_option("--geometry", so.geometry, "geometry JSON (overrides --layout)");
    simulate->add_option("--pose", so.pose, "pose JSON applied to the volume");
    simulate->add_option("--layout", so.layout, "built-in scan layout")->check(CLI::IsMember({"auto", "mtf", "inline", "aliasing"}));
    simulate->add_option("--views", so.views, "number of views");
    simulate->add_option("--arc-deg", so.arc_deg, "angular range of the views");
    simulate->add_option("--noise-counts", so.noise_counts, "flat-field counts for counting noise (0 = none)");
    simulate->add_flag("--intensities", so.intensities, "write intensities instead of line integrals");
    simulate->add_option("--flat", so.flat, "flat-field intensity I0");

    PoseOpts pso;
    auto* pose = app.add_subcommand("pose", "estimate the object pose from projections");
    add_common(pose, common);
    pose->add_option("--projections", pso.projections, "projection JSON");
    pose->add_option("--pgm", pso.pgm, "PGM images, one per view")->expected(1, -1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    pose->add_option("--geometry", pso.geometry, "geometry JSON for PGM input");
    pose->add_option("--flat", pso.flat, "flat-field value for PGM input");
    pose->add_option("--level", pso.level, "silhouette threshold on line integrals");
    pose->add_option("--band", pso.band, "rows averaged at each end of the silhouette");
    pose->add_option("--endpoints", pso.endpoints, "row_midpoints or extremal_pixels");
    pose->add_option("--subpixel", pso.subpixel, "interpolate silhouette edges");
    pose->add_option("--dilate", pso.dilate, "holder mask dilation radius in px");
    pose->add_option("--nuisance-level", pso.nuisance_level, "threshold of the holder mask");
    pose->add_option("--phase-width-mm", pso.phase_width_mm, "strip width for the phase signal");
    pose->add_option("--phase-offset-mm", pso.phase_offset_mm, "strip offset from the axis");
    pose->add_option("--phase-signal", pso.phase_signal, "moment, strip or differential");
    pose->add_option("--reference-azimuth-deg", pso.reference_azimuth_deg, "insert azimuth in the object frame");
    pose->add_flag("--precision-study", pso.precision_study, "repeat the pose estimate over rotation centers");
    pose->add_option("--samples", pso.samples, "precision-study repetitions");

    ReconOpts ro;
    auto* recon = app.add_subcommand("reconstruct", "SART reconstruction");
    add_common(recon, common);
    recon->add_option("--projections", ro.projections, "projection JSON");
    recon->add_option("--pose", ro.pose, "pose JSON for the cylindrical grid");
    recon->add_option("--grid", ro.grid, "grid size h theta r")->expected(3)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    recon->add_flag("--batch-grid", ro.batch_grid, "use the (240,40,60) grid");
    recon->add_option("--radius", ro.radius, "mm");
    recon->add_option("--height", ro.height, "mm");
    recon->add_flag("--cartesian", ro.cartesian, "reconstruct on a Cartesian grid");
    recon->add_option("--cart-dims", ro.cart_dims, "Cartesian size z y x")->expected(3)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    recon->add_option("--voxel-size", ro.voxel_size, "Cartesian voxel edge in mm");
    recon->add_option("--init", ro.init, "initial volume")->check(CLI::IsMember({"none", "template"}));
    recon->add_option("--template", ro.template_path, "template volume JSON for --init template");
    recon->add_option("--weights", ro.weights, "voxel weights")->check(CLI::IsMember({"none", "map"}));
    recon->add_option("--weight-map", ro.weight_map, "weight volume JSON for --weights map");
    recon->add_option("--iterations", ro.iterations, "SART passes");
    recon->add_option("--relaxation", ro.relaxation, "lambda in (0, 2)");
    recon->add_option("--order", ro.order, "view order")->check(CLI::IsMember({"acquisition", "permuted"}));
    recon->add_option("--step", ro.step, "ray sampling step in mm");

    MtfOpts mo;
    auto* mtf = app.add_subcommand("mtf", "line-phantom MTF sweep");
    add_common(mtf, common);
    mtf->add_option("--direction", mo.direction, "line direction")->check(CLI::IsMember({"azimuthal", "radial"}));
    mtf->add_option("--views", mo.views, "number of views");
    mtf->add_option("--n-theta", mo.n_theta, "azimuthal cells of the reconstruction grid");
    mtf->add_option("--max-lines", mo.max_lines, "largest line count of the doubling sweep");
    mtf->add_option("--lines", mo.lines, "explicit line counts")->expected(1, -1)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    mtf->add_option("--iterations", mo.iterations, "SART passes");
    mtf->add_flag("--aliasing", mo.aliasing, "67-view acquisition");

    BatchOpts bo;
    auto* batch = app.add_subcommand("batch", "assembly batch with reconstruction strategies");
    add_common(batch, common);
    batch->add_option("--samples", bo.samples, "assemblies in the batch");
    batch->add_option("--iterations", bo.iterations, "SART passes");
    batch->add_option("--missing-fraction", bo.missing_fraction, "share of assemblies without the target part");
    batch->add_option("--noise-counts", bo.noise_counts, "flat-field counts for counting noise");
    batch->add_flag("--true-poses", bo.true_poses, "skip pose estimation");
    batch->add_option("--strategies", bo.strategies, "subset of a b c d")->expected(1, -1)->multi_option_policy(
        CLI::MultiOptionPolicy::TakeLast);

    std::vector<std::string> args;
    for (int k = argc - 1; k >= 1; --k)
        args.push_back(argv[k]); // CLI11 expects reversed order
    try {
        // config tokens go right after the subcommand name
        auto it = std::find(args.begin(), args.end(), "--config");
        if (it != args.end() && it != args.begin()) {
            std::string path = *(it - 1);
            auto tokens = config_tokens(path);
            // args are reversed: the subcommand name is the last element
            std::vector<std::string> spliced(args.begin(), args.end() - 1);
            for (auto t = tokens.rbegin(); t != tokens.rend(); ++t)
                spliced.push_back(*t);
            spliced.push_back(args.back());
            args = std::move(spliced);
        }
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(errc::config);
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }

    try {
        if (common.threads > 0)
            set_max_threads(common.threads);
        if (*phantom)
            return cmd_phantom(common, po);
        if (*simulate)
            return cmd_simulate(common, so);
        if (*pose)
            return cmd_pose(common, pso);
        if (*recon)
            return cmd_reconstruct(common, ro);
        if (*mtf)
            return cmd_mtf(common, mo);
        if (*batch)
            return cmd_batch(common, bo);
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
