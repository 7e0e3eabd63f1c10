#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <span>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "grid.hpp"
#include "mtf.hpp"
#include "phantom.hpp"
#include "posefit.hpp"
#include "projector.hpp"
#include "recon.hpp"

namespace cyltomo {

// scan layouts

/// Small bench-top layout sized for the desk line phantom (radius 16 mm).
inline ScanGeometry desk_mtf_geometry(std::size_t n_views) {
    ScanGeometry g;
    g.sod = 200.0;
    g.sdd = 400.0;
    g.pixel_pitch = 0.5;
    g.det_cols = 136;
    g.det_rows = 34;
    g.center_principal_point();
    g.stage_angles = make_circular_trajectory(n_views, 2.0 * pi * static_cast<double>(n_views - 1) / n_views);
    return g;
}

/// Full-circle layout for the full-scale line phantom (radius 32 mm).
inline ScanGeometry paper_mtf_geometry(std::size_t n_views) {
    ScanGeometry g = desk_mtf_geometry(n_views);
    g.pixel_pitch = 0.125;
    g.det_cols = 1056;
    g.det_rows = 144;
    g.center_principal_point();
    return g;
}

/// In-line inspection layout: 21 views over 200 degrees on a wide panel.
inline ScanGeometry inline_scan_geometry(int det_cols = 1944, int det_rows = 1536, std::size_t n_views = 21) {
    ScanGeometry g;
    g.sdd = 791.0;
    g.sod = 679.0;
    g.pixel_pitch = 0.748;
    g.det_cols = det_cols;
    g.det_rows = det_rows;
    g.center_principal_point();
    g.stage_angles = make_circular_trajectory(n_views, 200.0 * pi / 180.0);
    return g;
}

/// Pose extraction tuned for clean cylinder silhouettes: fixed cut,
/// full-width row midpoints with interpolated edges, axis-line refinement.
inline PoseParams cylinder_pose_params(double level, int band = 16) {
    PoseParams pp;
    pp.level = ThresholdLevel::at(level);
    pp.band = band;
    pp.endpoints = EndpointMethod::row_midpoints;
    pp.subpixel_edges = true;
    pp.refine_axis_line = true;
    return pp;
}

// MTF study

struct MtfRunConfig {
    LinePhantomSpec phantom;
    std::size_t n_views = 512;
    int recon_n_theta = 128; // recon grid = phantom grid with this azimuthal count
    SartConfig sart;
    std::optional<ScanGeometry> geometry; // defaults to desk_mtf_geometry
};

struct MtfRun {
    CylVolume<float> volume;
    ReconReport report;
};

inline MtfRun run_line_phantom(const MtfRunConfig& cfg) {
    cfg.phantom.validate();
    ScanGeometry geom = cfg.geometry ? *cfg.geometry : desk_mtf_geometry(cfg.n_views);
    auto truth = make_line_phantom(cfg.phantom);
    auto ps = forward_project_all(truth, geom);
    CylGrid rg = cfg.phantom.grid();
    rg.n_theta = cfg.recon_n_theta;
    auto res = sart_run(ps, rg, cfg.sart);
    return {std::move(res.volume), std::move(res.report)};
}

/// 1, 2, 4, ... up to limit.
inline std::vector<int> doubling_sweep(int limit) {
    std::vector<int> out;
    for (int n = 1; n <= limit; n *= 2)
        out.push_back(n);
    return out;
}

// assembly batch

struct AssemblyModel {
    double radius = 10.0;
    double height = 40.0;
    std::vector<ComponentSpec> components; // the last one is the inspected component
    CylRegion roi;                          // presence-metric region
    double roi_weight = 1.0;
    double background_weight = 0.1;

    const ComponentSpec& target() const { return components.back(); }

    std::vector<ComponentSpec> with_target(bool present) const {
        auto c = components;
        c.back().present = present;
        return c;
    }
    CylGrid grid(std::array<int, 3> shape, const Pose& pose = {}) const {
        CylGrid g;
        g.n_h = shape[0];
        g.n_theta = shape[1];
        g.n_r = shape[2];
        g.radius = radius;
        g.height = height;
        g.pose = pose;
        return g;
    }
};

/// Housing tube, core filling and a metal ring whose presence is inspected.
inline AssemblyModel default_assembly() {
    AssemblyModel m;
    auto full = [](double r0, double r1, double h0, double h1) {
        CylRegion c;
        c.r_min = r0;
        c.r_max = r1;
        c.h_min = h0;
        c.h_max = h1;
        return c;
    };
    m.components = {{"housing", full(8.0, 10.0, -20.0, 20.0), 0.02, true},
                    {"core", full(0.0, 8.0, -20.0, -6.0), 0.01, true},
                    {"spring", full(4.0, 6.0, 0.0, 12.0), 0.08, true}};
    m.roi = full(4.0, 6.0, 0.0, 12.0);
    return m;
}

enum class Strategy { plain, initial, initial_weighted, weighted };

inline const char* strategy_name(Strategy s) {
    switch (s) {
    case Strategy::plain: return "a_plain";
    case Strategy::initial: return "b_initial";
    case Strategy::initial_weighted: return "c_initial_weighted";
    case Strategy::weighted: return "d_weighted";
    }
    return "?";
}

inline constexpr Strategy all_strategies[] = {Strategy::plain, Strategy::initial, Strategy::initial_weighted,
                                              Strategy::weighted};

struct BatchConfig {
    AssemblyModel model = default_assembly();
    int n_samples = 50;
    double missing_fraction = 0.5;
    std::array<int, 3> recon_shape{240, 40, 60};
    std::array<int, 3> truth_shape{240, 120, 60};
    std::size_t n_views = 21;
    double arc_deg = 200.0;
    double sod = 200.0, sdd = 400.0, pixel_pitch = 0.75;
    int det_cols = 80, det_rows = 136;
    double silhouette_level = 0.04; // line-integral cut for the housing silhouette
    double max_tilt_deg = 3.0;
    double max_shift_mm = 1.0;
    double flat_counts = 2e4; // 0 disables noise
    bool estimate_poses = true;
    std::uint64_t seed = 0;
    SartConfig sart;
    std::vector<Strategy> strategies{std::begin(all_strategies), std::end(all_strategies)};
};

struct BatchSample {
    int index = 0;
    bool present = true;
    Pose true_pose;
    Pose used_pose;
    std::vector<double> metric; // per strategy in BatchConfig::strategies order
};

struct BatchResult {
    std::vector<BatchSample> samples;
    std::vector<double> gap; // standardized present/missing gap per strategy, NaN if a group is too small
    std::vector<double> seconds_per_reconstruction;
};

inline ScanGeometry batch_geometry(const BatchConfig& c) {
    ScanGeometry g;
    g.sod = c.sod;
    g.sdd = c.sdd;
    g.pixel_pitch = c.pixel_pitch;
    g.det_cols = c.det_cols;
    g.det_rows = c.det_rows;
    g.center_principal_point();
    g.stage_angles = make_circular_trajectory(c.n_views, c.arc_deg * pi / 180.0);
    return g;
}

/// Simulated scans of a batch of assemblies in random poses, each
/// reconstructed with every requested strategy and scored by the mean
/// attenuation in the component region.
inline BatchResult run_batch(const BatchConfig& cfg, const std::function<void(const BatchSample&)>& progress = {}) {
    if (cfg.n_samples < 1)
        throw ConfigError("batch: n_samples must be >= 1");
    const AssemblyModel& m = cfg.model;
    ScanGeometry geom = batch_geometry(cfg);
    geom.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    CylGrid tmpl_grid = m.grid(cfg.recon_shape);
    CylVolume<float> tmpl = make_assembly_phantom(m.with_target(true), tmpl_grid);
    std::vector<WeightRegion> wr{{m.roi, m.roi_weight}};
    CylVolume<float> weights = make_weight_map(wr, tmpl_grid, m.background_weight);

    BatchResult out;
    out.seconds_per_reconstruction.assign(cfg.strategies.size(), 0.0);
    int n_missing = static_cast<int>(std::lround(cfg.missing_fraction * cfg.n_samples));
    std::vector<bool> present(cfg.n_samples, true);
    for (int k = 0; k < n_missing && k < cfg.n_samples; ++k)
        present[k] = false;
    std::shuffle(present.begin(), present.end(), rng);

    for (int s = 0; s < cfg.n_samples; ++s) {
        BatchSample smp;
        smp.index = s;
        smp.present = present[s];
        Pose& p = smp.true_pose;
        p.alpha = 2.0 * pi * unit(rng);
        p.beta = cfg.max_tilt_deg * pi / 180.0 * unit(rng);
        p.gamma = 2.0 * pi * unit(rng);
        p.t = Vec3(cfg.max_shift_mm * (2 * unit(rng) - 1), cfg.max_shift_mm * (2 * unit(rng) - 1),
                   cfg.max_shift_mm * (2 * unit(rng) - 1));
        std::uint64_t noise_seed = rng();

        auto truth = make_assembly_phantom(m.with_target(smp.present), m.grid(cfg.truth_shape, p));
        auto ps = forward_project_all(truth, geom);
        if (cfg.flat_counts > 0.0)
            add_counting_noise(ps, cfg.flat_counts, noise_seed);

        smp.used_pose = p;
        if (cfg.estimate_poses) {
            PoseParams pp = cylinder_pose_params(cfg.silhouette_level);
            smp.used_pose = estimate_pose(ps, pp).pose;
            smp.used_pose.gamma = 0.0; // the inspected parts are rotationally symmetric
        }
        CylGrid rg = m.grid(cfg.recon_shape, smp.used_pose);
        for (std::size_t k = 0; k < cfg.strategies.size(); ++k) {
            Strategy st = cfg.strategies[k];
            bool init = st == Strategy::initial || st == Strategy::initial_weighted;
            bool weigh = st == Strategy::weighted || st == Strategy::initial_weighted;
            auto res = sart_run(ps, rg, cfg.sart, init ? &tmpl : nullptr,
                                weigh ? std::span<const float>(weights.mu) : std::span<const float>{});
            out.seconds_per_reconstruction[k] += res.report.wall_seconds / cfg.n_samples;
            smp.metric.push_back(presence_metric(res.volume, m.roi));
        }
        if (progress)
            progress(smp);
        out.samples.push_back(std::move(smp));
    }
    for (std::size_t k = 0; k < cfg.strategies.size(); ++k) {
        std::vector<double> a, b;
        for (const auto& smp : out.samples)
            (smp.present ? a : b).push_back(smp.metric[k]);
        out.gap.push_back(a.size() >= 2 && b.size() >= 2 ? standardized_gap(a, b)
                                                         : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

// pose precision study

/// Solid cylinder with one off-axis insert; the insert sets the internal
/// rotation reference at azimuth 0.
struct InsertCylinder {
    double radius = 8.0;
    double height = 64.0;
    double mu = 0.02;
    double insert_mu = 0.5;
    double insert_r = 5.0;          // radial center of the insert
    double insert_half_width = 1.5; // radial half-width and half arc length, mm
    std::array<int, 3> shape{128, 96, 32};

    std::vector<ComponentSpec> components() const {
        CylRegion body;
        body.r_max = radius;
        body.h_min = -0.5 * height;
        body.h_max = 0.5 * height;
        CylRegion ins;
        ins.r_min = insert_r - insert_half_width;
        ins.r_max = insert_r + insert_half_width;
        double half = insert_half_width / insert_r;
        ins.theta_min = normalize_theta(-half);
        ins.theta_span = 2.0 * half;
        ins.h_min = -0.4 * height;
        ins.h_max = 0.4 * height;
        return {{"body", body, mu, true}, {"insert", ins, insert_mu, true}};
    }
    CylGrid grid(const Pose& pose) const {
        CylGrid g;
        g.n_h = shape[0];
        g.n_theta = shape[1];
        g.n_r = shape[2];
        g.radius = radius;
        g.height = height;
        g.pose = pose;
        return g;
    }
    CylVolume<float> volume(const Pose& pose) const { return make_assembly_phantom(components(), grid(pose)); }
    PhaseConfig phase() const {
        PhaseConfig c;
        c.signal = PhaseSignal::moment;
        c.width_mm = 2.0 * radius;
        return c;
    }
};

struct PrecisionConfig {
    InsertCylinder object;
    std::vector<double> center_columns{185.2, 574.5, 963.9, 1353.25, 1742.6};
    int n_samples = 5;
    int det_rows = 160;
    double max_tilt_deg = 3.0;
    double flat_counts = 2e4;
    double silhouette_level = 0.05;
    std::uint64_t seed = 0;
};

struct PrecisionSample {
    Pose truth;
    std::vector<Pose> estimates; // per rotation center
    Pose sigma;                  // component-wise standard deviation over centers
};

namespace detail {
inline double stddev(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v)
        m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}
} // namespace detail

/// The same object scanned repeatedly with its rotation axis projected onto
/// different detector columns; reports the spread of the estimated poses.
inline std::vector<PrecisionSample> run_precision_study(const PrecisionConfig& cfg) {
    if (cfg.center_columns.size() < 2)
        throw ConfigError("precision study: need at least two rotation centers");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<PrecisionSample> out;
    for (int s = 0; s < cfg.n_samples; ++s) {
        PrecisionSample smp;
        smp.truth.alpha = 2.0 * pi * unit(rng);
        smp.truth.beta = cfg.max_tilt_deg * pi / 180.0 * unit(rng);
        smp.truth.gamma = 2.0 * pi * unit(rng) - pi;
        smp.truth.t = Vec3(2 * unit(rng) - 1, 2 * unit(rng) - 1, 2 * unit(rng) - 1);
        auto vol = cfg.object.volume(smp.truth);
        for (double col : cfg.center_columns) {
            ScanGeometry g = inline_scan_geometry(1944, cfg.det_rows);
            g.u0 = col;
            auto ps = forward_project_all(vol, g);
            if (cfg.flat_counts > 0.0)
                add_counting_noise(ps, cfg.flat_counts, rng());
            PoseParams pp = cylinder_pose_params(cfg.silhouette_level);
            pp.phase = cfg.object.phase();
            smp.estimates.push_back(estimate_pose(ps, pp).pose);
        }
        auto spread = [&](auto get) {
            std::vector<double> v;
            for (const auto& e : smp.estimates)
                v.push_back(get(e));
            return detail::stddev(v);
        };
        smp.sigma.alpha = spread([&](const Pose& p) { return wrap_angle(p.alpha - smp.estimates[0].alpha); });
        smp.sigma.beta = spread([](const Pose& p) { return p.beta; });
        smp.sigma.gamma = spread([&](const Pose& p) { return wrap_angle(p.gamma - smp.estimates[0].gamma); });
        smp.sigma.t = Vec3(spread([](const Pose& p) { return p.t.x(); }), spread([](const Pose& p) { return p.t.y(); }),
                           spread([](const Pose& p) { return p.t.z(); }));
        out.push_back(std::move(smp));
    }
    return out;
}

} // namespace cyltomo
