// Acceptance runner: `acceptance N` checks criterion N and prints one line.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include <cyltomo/cyltomo.hpp>

using namespace cyltomo;

namespace {

struct Verdict {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double tilt_deg(const Pose& a, const Pose& b) {
    Vec3 da = euler_to_matrix(a).col(2), db = euler_to_matrix(b).col(2);
    return std::acos(std::min(1.0, da.dot(db))) * 180.0 / pi;
}

double deg(double rad) { return rad * 180.0 / pi; }

double mean_of(const std::vector<double>& v, std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t k = b; k < e; ++k)
        s += v[k];
    return s / static_cast<double>(e - b);
}

// 1: rigid transform round trips

Verdict transforms() {
    Verdict out;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ang(-pi, pi), s(-50.0, 50.0);
    double worst_trip = 0.0, worst_orth = 0.0;
    for (int k = 0; k < 10000; ++k) {
        Pose p;
        p.alpha = ang(rng);
        p.beta = std::abs(ang(rng));
        p.gamma = ang(rng);
        p.t = Vec3(s(rng), s(rng), s(rng));
        Vec3 x(s(rng), s(rng), s(rng));
        worst_trip = std::max(worst_trip, (inverse_align_point(p, align_point(p, x)) - x).norm());
        worst_trip = std::max(worst_trip, (align_point(p, inverse_align_point(p, x)) - x).norm());
        Mat3 r = euler_to_matrix(p);
        worst_orth = std::max(worst_orth, (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
        worst_orth = std::max(worst_orth, std::abs(r.determinant() - 1.0));
    }
    out.require(worst_trip <= 1e-10, fmt("round trip %.3g", worst_trip));
    out.require(worst_orth <= 1e-12, fmt("orthonormality %.3g", worst_orth));
    out.detail = fmt("round trip %.2g mm, orthonormality %.2g", worst_trip, worst_orth) +
                 (out.detail.empty() ? "" : " [" + out.detail + "]");
    return out;
}

// 2: projection Jacobian and chord lengths

Verdict projection_model() {
    Verdict out;
    ScanGeometry g = inline_scan_geometry();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    const double h = 1e-4;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        Vec3 x(u(rng), u(rng), u(rng));
        std::size_t i = static_cast<std::size_t>(k) % g.num_views();
        Mat23 j = project_point_jacobian(g, i, x);
        double scale = j.cwiseAbs().maxCoeff();
        for (int c = 0; c < 3; ++c) {
            Vec3 e = Vec3::Zero();
            e(c) = h;
            auto p = project_point(g, i, x + e), m = project_point(g, i, x - e);
            worst = std::max(worst, std::abs(j(0, c) - (p.u - m.u) / (2 * h)) / scale);
            worst = std::max(worst, std::abs(j(1, c) - (p.v - m.v) / (2 * h)) / scale);
        }
    }
    out.require(worst <= 1e-5, "jacobian");

    // uniform cylinder on the stage axis; rays through the central row
    const double mu0 = 0.05, radius = 5.0;
    CylGrid cg;
    cg.n_h = 8;
    cg.n_theta = 32;
    cg.n_r = 10;
    cg.radius = radius;
    cg.height = 40.0;
    CylVolume<double> v(cg, mu0);
    ScanGeometry sg;
    sg.sod = 100.0;
    sg.sdd = 200.0;
    sg.pixel_pitch = 0.5;
    sg.det_cols = 41;
    sg.det_rows = 21;
    sg.center_principal_point();
    sg.stage_angles = {0.0, 1.1, 2.3};
    double ds = default_step(cg), chord_err = 0.0;
    for (std::size_t i = 0; i < sg.num_views(); ++i) {
        auto vp = forward_project_view(v, sg, i, {});
        int r = static_cast<int>(sg.v0);
        for (int c = 0; c < sg.det_cols; ++c) {
            double xd = (c - sg.u0) * sg.pixel_pitch;
            double d = sg.sod * std::abs(xd) / std::hypot(xd, sg.sdd);
            double chord = d < radius ? 2.0 * std::sqrt(radius * radius - d * d) : 0.0;
            chord_err = std::max(chord_err, std::abs(vp.line_integral.at(r, c) - mu0 * chord));
        }
    }
    out.require(chord_err <= mu0 * ds, "chord");
    out.detail = fmt("jacobian rel %.2g (tol 1e-5), chord %.3g (tol %.3g)", worst, chord_err, mu0 * ds) +
                 (out.detail.empty() ? "" : " [" + out.detail + "]");
    return out;
}

// 3: triangulation in the in-line layout

Verdict triangulation() {
    Verdict out;
    ScanGeometry g = inline_scan_geometry();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    double worst = 0.0;
    const int cases = 200;
    for (int k = 0; k < cases; ++k) {
        Vec3 x(u(rng), u(rng), u(rng));
        std::vector<Observation> obs;
        for (std::size_t i = 0; i < g.num_views(); ++i)
            obs.push_back({i, project_point(g, i, x)});
        worst = std::max(worst, (track_point(obs, g).solution - x).norm());
    }
    out.require(worst <= 1e-6, "error");
    out.detail = fmt("%g cases, worst error %.2g mm (tol 1e-6)", cases, worst);
    return out;
}

// 4: end-to-end pose

Verdict pose_pipeline() {
    Verdict out;
    Pose truth;
    truth.alpha = 30.0 * pi / 180.0;
    truth.beta = 5.0 * pi / 180.0;
    truth.gamma = 40.0 * pi / 180.0;
    truth.t = Vec3(1.3, -2.1, 0.7);
    ScanGeometry g = inline_scan_geometry(256, 128);

    // uniform cylinder for translation and tilt
    CylGrid cg;
    cg.n_h = 128;
    cg.n_theta = 96;
    cg.n_r = 32;
    cg.radius = 8.0;
    cg.height = 64.0;
    cg.pose = truth;
    auto plain = estimate_pose(forward_project_all(CylVolume<float>(cg, 0.02f), g), cylinder_pose_params(0.02, 16));
    double dt = (plain.pose.t - truth.t).norm(), tilt = tilt_deg(plain.pose, truth);
    out.require(dt < 0.1 * g.voxel_equivalent(), "translation");
    out.require(tilt < 0.1, "tilt");

    // off-axis insert for the in-plane rotation
    InsertCylinder obj;
    PoseParams pp = cylinder_pose_params(0.02, 16);
    pp.phase = obj.phase();
    auto ins = estimate_pose(forward_project_all(obj.volume(truth), g), pp);
    double dgamma = std::abs(deg(wrap_angle(ins.pose.gamma - truth.gamma)));
    out.require(dgamma <= 2.0, "gamma");

    bool exact = true;
    for (double pp_ : {-2.5, -0.3, 0.0, 1.2, 3.0})
        for (double pg : {-1.0, 0.0, 0.4, 2.9})
            exact = exact && gamma_from_phase(pp_, pg, 0.0, 0.0) == wrap_angle(pp_ - pg);
    out.require(exact, "phase formula");
    out.detail = fmt("dt %.4f mm (tol %.4f), tilt %.4f deg (tol 0.1)", dt, 0.1 * g.voxel_equivalent(), tilt) +
                 fmt(", gamma error %.2f deg (tol 2)", dgamma) + (exact ? ", phase formula exact" : "") +
                 (out.detail.empty() ? "" : " [" + out.detail + "]");
    return out;
}

// 5: SART against an explicit least-squares oracle

Verdict sart() {
    Verdict out;
    CartGrid grid;
    grid.n_x = 3;
    grid.n_y = 3;
    grid.n_z = 1;
    grid.voxel_size = 1.0;
    grid.origin = Vec3(-1.5, -1.5, -0.5);

    ProjectionSet<double> ps;
    ps.geom.sod = 100.0;
    ps.geom.sdd = 200.0;
    ps.geom.pixel_pitch = 0.5;
    ps.geom.det_cols = 16;
    ps.geom.det_rows = 1;
    ps.geom.center_principal_point();
    ps.geom.stage_angles = make_circular_trajectory(12, pi * 11.0 / 12.0);
    ps.kind = ProjectionKind::line_integral;

    // system matrix column by column from unit voxels
    const int n = 9;
    const int rays = ps.geom.det_cols * ps.geom.det_rows;
    const int m = rays * static_cast<int>(ps.geom.num_views());
    Eigen::MatrixXd a(m, n);
    for (int k = 0; k < n; ++k) {
        CartVolume<double> e(grid);
        e.mu[k] = 1.0;
        for (std::size_t i = 0; i < ps.geom.num_views(); ++i) {
            auto img = forward_project(e, ps.geom, i);
            for (int p = 0; p < rays; ++p)
                a(static_cast<int>(i) * rays + p, k) = img.data[p];
        }
    }
    Eigen::VectorXd truth(n);
    truth << 0.1, 0.4, 0.2, 0.3, 0.05, 0.6, 0.15, 0.25, 0.35;
    Eigen::VectorXd b = a * truth;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    Eigen::VectorXd oracle = cod.solve(b);
    out.require(cod.rank() == n, "system rank");
    for (std::size_t i = 0; i < ps.geom.num_views(); ++i) {
        Image<double> img(ps.geom.det_rows, ps.geom.det_cols);
        for (int p = 0; p < rays; ++p)
            img.data[p] = b(static_cast<int>(i) * rays + p);
        ps.images.push_back(img);
    }

    SartConfig cfg;
    cfg.n_iterations = 200;
    auto res = sart_run<double>(ps, grid, cfg);
    double err = 0.0;
    for (int k = 0; k < n; ++k)
        err = std::max(err, std::abs(res.volume.mu[k] - oracle(k)));
    out.require(err <= 1e-3, "oracle");

    // invariants
    CartVolume<double> exact(grid);
    for (int k = 0; k < n; ++k)
        exact.mu[k] = truth(k);
    SartConfig two;
    two.n_iterations = 2;
    auto fixed = sart_run<double>(ps, grid, two, &exact);
    bool fixed_ok = true;
    for (int k = 0; k < n; ++k)
        fixed_ok = fixed_ok && std::abs(fixed.volume.mu[k] - truth(k)) <= 1e-12;
    for (double r : fixed.report.residuals)
        fixed_ok = fixed_ok && r <= 1e-12;
    out.require(fixed_ok, "fixed point");

    std::vector<float> w(n, 1.0f);
    w[4] = 0.0f;
    CartVolume<double> start(grid, 0.2);
    auto frozen = sart_run<double>(ps, grid, two, &start, w);
    out.require(frozen.volume.mu[4] == 0.2, "weight-0 freezing");

    std::vector<float> ones(n, 1.0f);
    out.require(sart_run<double>(ps, grid, two, nullptr, ones).volume.mu == sart_run<double>(ps, grid, two).volume.mu,
                "unit weights");

    auto neg = ps;
    for (auto& img : neg.images)
        for (auto& x : img.data)
            x = -x;
    bool nonneg = true;
    for (double x : sart_run<double>(neg, grid, two).volume.mu)
        nonneg = nonneg && x >= 0.0;
    out.require(nonneg, "nonnegativity");

    out.detail = fmt("max deviation from least-squares oracle %.2g after %g passes (tol 1e-3)", err, 200) +
                 (out.ok ? ", invariants hold" : " [" + out.detail + "]");
    return out;
}

// 6: MTF trends at desk scale

MtfRun desk_run(LineDirection d, int n_lines, std::size_t views, int n_theta) {
    MtfRunConfig rc;
    rc.phantom = desk_line_phantom(d, n_lines);
    rc.n_views = views;
    rc.recon_n_theta = n_theta;
    rc.sart.n_iterations = 2;
    return run_line_phantom(rc);
}

bool in_unit(const std::vector<double>& v) {
    for (double x : v)
        if (!(x >= 0.0 && x <= 1.0))
            return false;
    return true;
}

Verdict mtf_trends() {
    Verdict out;
    auto star = mtf_azimuthal(desk_run(LineDirection::azimuthal, 32, 512, 128).volume, 32);
    std::size_t nr = star.modulation.size(), band = nr / 5;
    double inner = mean_of(star.modulation, 0, band), outer = mean_of(star.modulation, nr - band, nr);
    out.require(inner < outer, "inner vs outer");

    auto rings = mtf_radial(desk_run(LineDirection::radial, 8, 512, 128).volume, 8);
    std::vector<double> wm;
    for (const auto& w : rings.windows)
        wm.push_back(w.modulation);
    double spread = *std::max_element(wm.begin(), wm.end()) - *std::min_element(wm.begin(), wm.end());
    out.require(spread <= 0.15, "radial spread");

    auto low = mtf_azimuthal(desk_run(LineDirection::azimuthal, 1, 512, 128).volume, 1);
    double mid = low.modulation[low.modulation.size() / 2];
    out.require(mid >= 0.9, "low frequency");
    out.require(in_unit(star.modulation) && in_unit(wm) && in_unit(low.modulation), "range");

    out.detail = fmt("azimuthal n=32 inner %.3f < outer %.3f", inner, outer) +
                 fmt(", radial n=8 spread %.3f (tol 0.15), n=1 mid-radius %.3f (min 0.9)", spread, mid) +
                 (out.detail.empty() ? "" : " [" + out.detail + "]");
    return out;
}

// 7: fewer azimuthal cells reduce aliasing for a sparse scan

Verdict aliasing() {
    Verdict out;
    const int n_lines = 16;
    LinePhantomSpec spec = desk_line_phantom(LineDirection::radial, n_lines);
    auto truth = [&](const CylCoord& c) { return line_phantom_value(spec, c); };
    double r_half = 0.5 * spec.radius;

    auto fine = desk_run(LineDirection::radial, n_lines, 67, 128);
    auto coarse = desk_run(LineDirection::radial, n_lines, 67, 67);
    MtfCurve curve;
    append_radial(curve, mtf_radial(fine.volume, n_lines));
    const auto& flags = curve.aliased[0];
    std::size_t half = flags.size() / 2, flagged = 0;
    for (std::size_t k = half; k < flags.size(); ++k)
        flagged += flags[k];
    out.require(flagged > 0, "no outer window flagged");

    double e_fine = central_rmse(fine.volume, truth, r_half, spec.radius, 402, 32);
    double e_coarse = central_rmse(coarse.volume, truth, r_half, spec.radius, 402, 32);
    out.require(e_coarse < e_fine, "rmse");
    out.detail = fmt("%g of %g outer windows flagged at n_theta 128", static_cast<double>(flagged),
                     static_cast<double>(flags.size() - half)) +
                 fmt(", outer rmse %.4f at n_theta 67 vs %.4f at 128", e_coarse, e_fine) +
                 (out.detail.empty() ? "" : " [" + out.detail + "]");
    return out;
}

// 8: reconstruction strategies on a synthetic batch

Verdict strategies() {
    Verdict out;
    BatchConfig bc;
    bc.n_samples = 50;
    bc.sart.n_iterations = 1;
    auto res = run_batch(bc);
    double ga = 0.0, gc = 0.0;
    std::string table;
    for (std::size_t k = 0; k < bc.strategies.size(); ++k) {
        if (bc.strategies[k] == Strategy::plain)
            ga = res.gap[k];
        if (bc.strategies[k] == Strategy::initial_weighted)
            gc = res.gap[k];
        table += std::string(" ") + strategy_name(bc.strategies[k]) +
                 fmt("=%.1f (%.2f s)", res.gap[k], res.seconds_per_reconstruction[k]);
    }
    out.require(gc > ga, "gap(c) <= gap(a)");
    out.detail = "standardized gaps:" + table + (out.detail.empty() ? "" : " [" + out.detail + "]");
    return out;
}

struct Criterion {
    const char* name;
    double budget_s;
    std::function<Verdict()> run;
};

} // namespace

int main(int argc, char** argv) {
    const Criterion all[] = {
        {"transform round trips", 1.0, transforms},
        {"projection model", 10.0, projection_model},
        {"triangulation", 10.0, triangulation},
        {"end-to-end pose", 120.0, pose_pipeline},
        {"SART correctness", 30.0, sart},
        {"MTF trends", 600.0, mtf_trends},
        {"aliasing", 600.0, aliasing},
        {"strategy comparison", 900.0, strategies},
    };
    std::vector<int> which;
    for (int k = 1; k < argc; ++k)
        which.push_back(std::atoi(argv[k]));
    if (which.empty())
        for (int k = 1; k <= 8; ++k)
            which.push_back(k);

    int failures = 0;
    for (int n : which) {
        if (n < 1 || n > 8) {
            std::fprintf(stderr, "unknown criterion %d\n", n);
            return 2;
        }
        const auto& c = all[n - 1];
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.ok = false;
            v.detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool in_time = secs <= c.budget_s;
        bool pass = v.ok && in_time;
        std::printf("[%s] C%d %s: %s; %.1f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", n, c.name, v.detail.c_str(),
                    secs, c.budget_s, in_time ? "" : " over budget");
        std::fflush(stdout);
        failures += !pass;
    }
    return failures == 0 ? 0 : 1;
}
