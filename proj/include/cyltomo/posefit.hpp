#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "geometry.hpp"
#include "imgproc.hpp"
#include "projector.hpp"

namespace cyltomo {

struct Observation {
    std::size_t view = 0;
    DetectorPoint point;
};

struct LmConfig {
    double damping_init = 1e-3;
    double damping_up = 10.0;
    double damping_down = 0.1;
    int max_iterations = 100;
    double step_tolerance = 1e-10;     // mm
    double residual_tolerance = 1e-24; // squared pixels, summed

    void validate() const {
        if (!(damping_init > 0.0) || !(damping_up > 1.0) || !(damping_down > 0.0 && damping_down < 1.0) ||
            max_iterations < 1 || !(step_tolerance > 0.0) || !(residual_tolerance > 0.0))
            throw ConfigError("lm: invalid configuration");
    }
};

struct TrackedPoint {
    std::vector<Observation> observations;
    Vec3 solution = Vec3::Zero();
    double residual_rms = 0.0; // pixels
    int iterations = 0;
    bool converged = false;
    std::vector<double> cost_history; // objective after every accepted step
};

namespace detail {

inline double reprojection_cost(const ScanGeometry& g, const std::vector<Observation>& obs, const Vec3& x) {
    double cost = 0.0;
    for (const auto& o : obs) {
        DetectorPoint p = project_point(g, o.view, x);
        double du = o.point.u - p.u, dv = o.point.v - p.v;
        cost += du * du + dv * dv;
    }
    return cost;
}

/// Closest point between the back-projected rays of two observations.
inline Vec3 midpoint_triangulation(const ScanGeometry& g, const Observation& a, const Observation& b) {
    Ray ra = pixel_ray(g, a.view, a.point.u, a.point.v);
    Ray rb = pixel_ray(g, b.view, b.point.u, b.point.v);
    Vec3 w = ra.origin - rb.origin;
    double dab = ra.direction.dot(rb.direction);
    double denom = 1.0 - dab * dab;
    if (denom < 1e-14)
        throw IllPosed("track_point: back-projected rays are parallel");
    double da = ra.direction.dot(w), db = rb.direction.dot(w);
    double sa = (dab * db - da) / denom;
    double sb = (db - dab * da) / denom;
    return 0.5 * ((ra.origin + sa * ra.direction) + (rb.origin + sb * rb.direction));
}

} // namespace detail

/// Least-squares triangulation of one 3D point from its detector positions in
/// several views, by Levenberg-Marquardt on the reprojection error.
inline TrackedPoint track_point(const std::vector<Observation>& obs, const ScanGeometry& g, const LmConfig& cfg = {}) {
    cfg.validate();
    if (obs.size() < 2)
        throw IllPosed("track_point: need at least two observations");
    // the pair with the widest angular separation seeds the solve
    std::size_t ia = 0, ib = 0;
    double best = 0.0;
    for (std::size_t a = 0; a < obs.size(); ++a)
        for (std::size_t b = a + 1; b < obs.size(); ++b) {
            double s = std::abs(std::sin(g.stage_angles.at(obs[a].view) - g.stage_angles.at(obs[b].view)));
            if (s > best) {
                best = s;
                ia = a;
                ib = b;
            }
        }
    if (best < 1e-9)
        throw IllPosed("track_point: all observations share one viewing direction");

    TrackedPoint out;
    out.observations = obs;
    Vec3 x = detail::midpoint_triangulation(g, obs[ia], obs[ib]);
    double cost = detail::reprojection_cost(g, obs, x);
    double lambda = cfg.damping_init;
    out.cost_history.push_back(cost);

    for (int it = 0; it < cfg.max_iterations; ++it) {
        out.iterations = it + 1;
        if (cost <= cfg.residual_tolerance) {
            out.converged = true;
            break;
        }
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (const auto& o : obs) {
            DetectorPoint p = project_point(g, o.view, x);
            Mat23 j = project_point_jacobian(g, o.view, x);
            Eigen::Vector2d r(o.point.u - p.u, o.point.v - p.v);
            jtj += j.transpose() * j;
            jtr += j.transpose() * r;
        }
        bool accepted = false;
        while (!accepted && lambda < 1e16) {
            Eigen::Matrix3d a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            Eigen::Vector3d step = a.ldlt().solve(jtr);
            Vec3 trial = x + step;
            double trial_cost;
            try {
                trial_cost = detail::reprojection_cost(g, obs, trial);
            } catch (const DegenerateRay&) {
                trial_cost = std::numeric_limits<double>::infinity();
            }
            if (trial_cost < cost) {
                x = trial;
                cost = trial_cost;
                lambda = std::max(lambda * cfg.damping_down, 1e-15);
                accepted = true;
                out.cost_history.push_back(cost);
                if (step.norm() < cfg.step_tolerance)
                    out.converged = true;
            } else {
                lambda *= cfg.damping_up;
                if (step.norm() < cfg.step_tolerance) {
                    // no decrease possible at machine precision
                    out.converged = true;
                    break;
                }
            }
        }
        if (out.converged || !accepted)
            break;
    }
    out.solution = x;
    out.residual_rms = std::sqrt(cost / static_cast<double>(obs.size()));
    return out;
}

/// Pose whose object z axis points from p_bottom to p_top, centered at their
/// midpoint. gamma is left at 0.
inline Pose axis_to_pose(const Vec3& p_top, const Vec3& p_bottom) {
    Vec3 d = p_top - p_bottom;
    double len = d.norm();
    if (!(len > 1e-12))
        throw DegenerateAxis("axis_to_pose: end points coincide");
    d /= len;
    Pose p;
    p.beta = std::acos(std::clamp(d.z(), -1.0, 1.0));
    // R(alpha, beta, 0) z = (sin a sin b, -cos a sin b, cos b)
    p.alpha = std::hypot(d.x(), d.y()) > 1e-15 ? std::atan2(d.x(), -d.y()) : 0.0;
    p.gamma = 0.0;
    p.t = 0.5 * (p_top + p_bottom);
    return p;
}

/// Orientation correction for the perceived phase of an object tilted by
/// (alpha, beta); equals atan(tan(alpha) / cos(beta)) on the branch that is
/// continuous in alpha.
inline double phase_tilt_correction(double alpha, double beta) {
    return std::atan2(std::sin(alpha), std::cos(alpha) * std::cos(beta));
}

/// gamma = phi_P - phi_G - atan(tan(alpha) / cos(beta)), wrapped to (-pi, pi].
inline double gamma_from_phase(double perceived_phase, double stage_angle, double alpha, double beta) {
    return wrap_angle(perceived_phase - stage_angle - phase_tilt_correction(alpha, beta));
}

/// strip: mean of one strip; differential: strip at +offset minus strip at
/// -offset; moment: first moment of the strip about the axis.
enum class PhaseSignal { strip, differential, moment };

struct PhaseConfig {
    PhaseSignal signal = PhaseSignal::moment;
    double offset_mm = 0.0; // strip offset from the axis, in object-space mm
    double width_mm = 1.0;
    double reference_azimuth = 0.0; // template azimuth of the tracked feature
    double flat_tolerance = 0.02;   // min harmonic amplitude relative to the signal scale
};

struct PhaseEstimate {
    double gamma = 0.0;
    double perceived_phase = 0.0; // feature azimuth in the stage frame of view 0
    double amplitude = 0.0;
    std::vector<double> signal;
};

/// Recovers the internal rotation from strip means along the projected axis:
/// the fundamental harmonic of the strip signal over the stage angle places
/// the tracked feature, and the tilt correction maps it onto gamma.
template <typename T>
PhaseEstimate estimate_phase(const ProjectionSet<T>& ps, const std::vector<AxisObservation>& axes, const Pose& pose,
                             const PhaseConfig& cfg) {
    const ScanGeometry& g = ps.geom;
    if (axes.size() != ps.num_views())
        throw ConfigError("estimate_phase: need one axis observation per view");
    if (ps.num_views() < 3)
        throw IllPosed("estimate_phase: need at least three views");
    PhaseEstimate est;
    est.signal.resize(ps.num_views());
    Eigen::MatrixXd a(ps.num_views(), 3);
    Eigen::VectorXd s(ps.num_views());
    for (std::size_t i = 0; i < ps.num_views(); ++i) {
        Vec3 c = rot_z(g.stage_angles[i]) * pose.t;
        double px_per_mm = g.sdd / ((g.sod + c.y()) * g.pixel_pitch);
        double off = cfg.offset_mm * px_per_mm, w = cfg.width_mm * px_per_mm;
        const auto& img = ps.images[i];
        switch (cfg.signal) {
        case PhaseSignal::strip: est.signal[i] = strip_profile(img, axes.at(i), off, w); break;
        case PhaseSignal::differential:
            est.signal[i] = strip_profile(img, axes.at(i), off, w) - strip_profile(img, axes.at(i), -off, w);
            break;
        case PhaseSignal::moment: est.signal[i] = strip_moment(img, axes.at(i), off, w) / px_per_mm; break;
        }
        double phi = g.stage_angles[i];
        a(i, 0) = 1.0;
        a(i, 1) = std::cos(phi);
        a(i, 2) = std::sin(phi);
        s(i) = est.signal[i];
    }
    Eigen::Vector3d coef = a.colPivHouseholderQr().solve(s);
    est.amplitude = std::hypot(coef(1), coef(2));
    // noise floor relative to the brightest pixel (times the strip half-width for moments)
    double scale = 0.0;
    for (const auto& img : ps.images)
        scale = std::max(scale, static_cast<double>(*std::max_element(img.data.begin(), img.data.end())));
    if (cfg.signal == PhaseSignal::moment)
        scale *= 0.5 * cfg.width_mm;
    if (!(est.amplitude > cfg.flat_tolerance * scale))
        throw FlatSignal("estimate_phase: no azimuthal signal; the internal rotation is unidentifiable");
    // the strip signal peaks at the stage angle where the feature faces +u
    double peak = std::atan2(coef(2), coef(1));
    est.perceived_phase = wrap_angle(g.stage_angles[0] - peak);
    est.gamma = wrap_angle(gamma_from_phase(est.perceived_phase, g.stage_angles[0], pose.alpha, pose.beta) -
                           cfg.reference_azimuth);
    return est;
}

struct PoseParams {
    ThresholdLevel level = ThresholdLevel::automatic();
    int dilate_radius = 0;
    std::optional<double> nuisance_level; // brighter features removed before corner extraction
    int nuisance_dilate_radius = 2;
    std::vector<PixelRect> excluded;
    int band = 1;
    EndpointMethod endpoints = EndpointMethod::extremal_pixels;
    bool subpixel_edges = false; // interpolate edge crossings on the image (row_midpoints, fixed level only)
    LmConfig lm;
    bool refine_axis_line = true; // refit the axis to the perpendicular image residuals only
    std::optional<PhaseConfig> phase;
};

struct PoseEstimate {
    Pose pose;
    TrackedPoint top;
    TrackedPoint bottom;
    std::vector<AxisObservation> axes;
    std::optional<PhaseEstimate> phase;
};

/// Projected axis of every view from the triangulated end points.
inline std::vector<AxisObservation> reprojected_axes(const ScanGeometry& g, const Vec3& p_a, const Vec3& p_b) {
    std::vector<AxisObservation> out(g.num_views());
    for (std::size_t i = 0; i < g.num_views(); ++i) {
        out[i] = {project_point(g, i, p_a), project_point(g, i, p_b), i};
        if (out[i].top.v > out[i].bottom.v)
            std::swap(out[i].top, out[i].bottom);
    }
    return out;
}

namespace detail {

inline Vec3 axis_direction(double alpha, double beta) {
    return Vec3(std::sin(alpha) * std::sin(beta), -std::cos(alpha) * std::sin(beta), std::cos(beta));
}

/// Signed perpendicular image distances of the observed end points from the
/// projection of the 3D line (center, dir).
inline Eigen::VectorXd line_residuals(const ScanGeometry& g, const std::vector<AxisObservation>& axes,
                                      const Vec3& center, const Vec3& dir, double half_length) {
    Eigen::VectorXd r(2 * axes.size());
    for (std::size_t k = 0; k < axes.size(); ++k) {
        const AxisObservation& a = axes[k];
        DetectorPoint p0 = project_point(g, a.view, center - half_length * dir);
        DetectorPoint p1 = project_point(g, a.view, center + half_length * dir);
        double du = p1.u - p0.u, dv = p1.v - p0.v, len = std::hypot(du, dv);
        auto dist = [&](const DetectorPoint& q) { return ((q.u - p0.u) * dv - (q.v - p0.v) * du) / len; };
        r(2 * k) = dist(a.top);
        r(2 * k + 1) = dist(a.bottom);
    }
    return r;
}

} // namespace detail

/// Refines (alpha, beta) and the transversal position of the axis so that the
/// projected axis passes through every observed end point in the least-squares
/// sense. Offsets of the end points along the axis, which vary with the view
/// for tilted objects, do not enter. The axial position is kept.
inline Pose refine_axis_line(const ScanGeometry& g, const std::vector<AxisObservation>& axes, Pose p,
                             double half_length, const LmConfig& cfg = {}) {
    const Vec3 d0 = detail::axis_direction(p.alpha, p.beta);
    Vec3 e1 = d0.unitOrthogonal(), e2 = d0.cross(e1);
    const Vec3 t0 = p.t;
    // x = (n1, n2, s1, s2): direction d0 + n1 e1 + n2 e2 (normalized), center t0 + s1 e1 + s2 e2
    auto model = [&](const Eigen::Vector4d& x) {
        Vec3 d = (d0 + x(0) * e1 + x(1) * e2).normalized();
        return std::pair{Vec3(t0 + x(2) * e1 + x(3) * e2), d};
    };
    auto residuals = [&](const Eigen::Vector4d& x) {
        auto [c, d] = model(x);
        return detail::line_residuals(g, axes, c, d, half_length);
    };
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    Eigen::VectorXd r = residuals(x);
    double cost = r.squaredNorm(), lambda = cfg.damping_init;
    const Eigen::Vector4d h(1e-7, 1e-7, 1e-5, 1e-5);
    for (int it = 0; it < cfg.max_iterations; ++it) {
        Eigen::MatrixXd j(r.size(), 4);
        for (int k = 0; k < 4; ++k) {
            Eigen::Vector4d xp = x, xm = x;
            xp(k) += h(k);
            xm(k) -= h(k);
            j.col(k) = (residuals(xp) - residuals(xm)) / (2.0 * h(k));
        }
        Eigen::Matrix4d jtj = j.transpose() * j;
        Eigen::Vector4d jtr = -j.transpose() * r;
        bool accepted = false;
        Eigen::Vector4d step = Eigen::Vector4d::Zero();
        while (!accepted && lambda < 1e16) {
            Eigen::Matrix4d a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            step = a.ldlt().solve(jtr);
            Eigen::VectorXd rt = residuals(x + step);
            if (rt.squaredNorm() < cost) {
                x += step;
                r = rt;
                cost = rt.squaredNorm();
                lambda = std::max(lambda * cfg.damping_down, 1e-15);
                accepted = true;
            } else {
                lambda *= cfg.damping_up;
            }
        }
        if (!accepted || step.norm() < cfg.step_tolerance)
            break;
    }
    auto [c, d] = model(x);
    // keep the axial coordinate of the original center
    c += (t0 - c).dot(d) * d;
    Pose out = axis_to_pose(c + d, c - d);
    out.gamma = p.gamma;
    return out;
}

template <typename T>
AxisObservation observe_axis(const Image<T>& img, const PoseParams& p, std::size_t view) {
    BinaryMask mask = dilate(threshold(img, p.level), p.dilate_radius);
    std::vector<BinaryMask> nuisance;
    if (p.nuisance_level)
        nuisance.push_back(dilate(threshold(img, ThresholdLevel::at(*p.nuisance_level)), p.nuisance_dilate_radius));
    if (!nuisance.empty() || !p.excluded.empty())
        mask = remove_features(mask, nuisance, p.excluded);
    if (p.subpixel_edges) {
        if (p.endpoints != EndpointMethod::row_midpoints || !p.level.fixed || p.dilate_radius != 0)
            throw ConfigError("pose: sub-pixel edges need row_midpoints, a fixed level and no dilation");
        return axis_endpoints_subpixel(mask, img, *p.level.fixed, p.band, view);
    }
    return axis_endpoints(mask, p.band, view, p.endpoints);
}

/// Segmentation, per-view axis end points, triangulation of both ends, and
/// optionally the internal rotation.
template <typename T>
PoseEstimate estimate_pose(const ProjectionSet<T>& ps, const PoseParams& params) {
    ps.validate();
    if (ps.kind != ProjectionKind::line_integral)
        throw ConfigError("estimate_pose: projections must be line integrals");
    PoseEstimate est;
    est.axes.resize(ps.num_views());
    parallel_for(
        ps.num_views(),
        [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i)
                est.axes[i] = observe_axis(ps.images[i], params, i);
        },
        1);
    std::vector<Observation> top, bottom;
    for (const auto& a : est.axes) {
        top.push_back({a.view, a.top});
        bottom.push_back({a.view, a.bottom});
    }
    est.top = track_point(top, ps.geom, params.lm);
    est.bottom = track_point(bottom, ps.geom, params.lm);
    // image rows grow with world z, so the last rows hold the upper end
    est.pose = axis_to_pose(est.bottom.solution, est.top.solution);
    if (params.refine_axis_line) {
        double half = 0.5 * (est.bottom.solution - est.top.solution).norm();
        est.pose = refine_axis_line(ps.geom, est.axes, est.pose, half, params.lm);
    }
    if (params.phase) {
        Vec3 d = euler_to_matrix(est.pose).col(2);
        double half = 0.5 * (est.bottom.solution - est.top.solution).norm();
        est.phase = estimate_phase(ps, reprojected_axes(ps.geom, est.pose.t + half * d, est.pose.t - half * d),
                                   est.pose, *params.phase);
        est.pose.gamma = est.phase->gamma;
    }
    return est;
}

} // namespace cyltomo
