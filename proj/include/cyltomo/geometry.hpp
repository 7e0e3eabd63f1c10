#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "errors.hpp"

namespace cyltomo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

inline constexpr double pi = std::numbers::pi;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * pi);
    if (w <= -pi)
        w += 2.0 * pi;
    return w;
}

inline Mat3 rot_z(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return m;
}

inline Mat3 rot_x(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << 1, 0, 0, 0, c, -s, 0, s, c;
    return m;
}

/// Rigid placement of an object: intrinsic zxz Euler angles and a translation.
/// Maps object coordinates X to world coordinates X' = R X + T.
struct Pose {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    Vec3 t = Vec3::Zero();
};

/// Same rotation, with beta in [0, pi] and alpha, gamma in (-pi, pi].
inline Pose canonical(Pose p) {
    double b = wrap_angle(p.beta);
    if (b < 0.0) {
        // Rz(a) Rx(-b) Rz(g) == Rz(a + pi) Rx(b) Rz(g + pi)
        b = -b;
        p.alpha += pi;
        p.gamma += pi;
    }
    p.beta = b;
    p.alpha = wrap_angle(p.alpha);
    p.gamma = wrap_angle(p.gamma);
    return p;
}

inline Mat3 euler_to_matrix(const Pose& p) {
    return rot_z(p.alpha) * rot_x(p.beta) * rot_z(p.gamma);
}

inline Vec3 align_point(const Pose& p, const Vec3& x) { return euler_to_matrix(p) * x + p.t; }

inline Vec3 inverse_align_point(const Pose& p, const Vec3& x_world) {
    return euler_to_matrix(p).transpose() * (x_world - p.t);
}

/// Precomputed alignment, for code that transforms many points with one pose.
struct Alignment {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Alignment() = default;
    explicit Alignment(const Pose& p) : rotation(euler_to_matrix(p)), translation(p.t) {}

    Vec3 to_world(const Vec3& x) const { return rotation * x + translation; }
    Vec3 to_object(const Vec3& x) const { return rotation.transpose() * (x - translation); }
    Vec3 dir_to_object(const Vec3& d) const { return rotation.transpose() * d; }
};

struct DetectorPoint {
    double u = 0.0;
    double v = 0.0;
};

/// Circular cone-beam layout. The world z axis is the stage axis; at stage
/// angle 0 the source sits at (0, -sod, 0) and the detector plane is y = sdd - sod,
/// with u along +x and v along +z. Pixel (col, row) has its center at (u, v) = (col, row).
/// A view rotates the object by +stage_angle about z before projecting.
struct ScanGeometry {
    double sdd = 0.0;
    double sod = 0.0;
    int det_cols = 0;
    int det_rows = 0;
    double pixel_pitch = 0.0;
    double u0 = 0.0;
    double v0 = 0.0;
    std::vector<double> stage_angles;

    std::size_t num_views() const { return stage_angles.size(); }
    double magnification() const { return sdd / sod; }
    /// Detector pixel size referred back to the rotation axis.
    double voxel_equivalent() const { return pixel_pitch / magnification(); }

    void validate() const {
        if (!(sod > 0.0) || !(sdd > sod))
            throw ConfigError("geometry: require sdd > sod > 0");
        if (!(pixel_pitch > 0.0))
            throw ConfigError("geometry: pixel_pitch must be positive");
        if (det_cols < 1 || det_rows < 1)
            throw ConfigError("geometry: detector dimensions must be >= 1");
        if (stage_angles.empty())
            throw ConfigError("geometry: need at least one projection angle");
    }

    void center_principal_point() {
        u0 = 0.5 * (det_cols - 1);
        v0 = 0.5 * (det_rows - 1);
    }
};

/// n_proj equally spaced angles from 0 to last_angle, both inclusive.
inline std::vector<double> make_circular_trajectory(std::size_t n_proj, double last_angle) {
    std::vector<double> angles(n_proj, 0.0);
    if (n_proj > 1) {
        double step = last_angle / static_cast<double>(n_proj - 1);
        for (std::size_t i = 0; i < n_proj; ++i)
            angles[i] = step * static_cast<double>(i);
    }
    return angles;
}

namespace detail {
inline Vec3 to_stage_frame(const ScanGeometry& g, std::size_t i, const Vec3& x) {
    return rot_z(g.stage_angles.at(i)) * x;
}

inline double check_depth(const ScanGeometry& g, const Vec3& xs) {
    double depth = g.sod + xs.y();
    if (depth <= 1e-9 * g.sod)
        throw DegenerateRay("point lies at or behind the source plane");
    return depth;
}
} // namespace detail

inline DetectorPoint project_point(const ScanGeometry& g, std::size_t i, const Vec3& x) {
    Vec3 xs = detail::to_stage_frame(g, i, x);
    double scale = g.sdd / (detail::check_depth(g, xs) * g.pixel_pitch);
    return {g.u0 + xs.x() * scale, g.v0 + xs.z() * scale};
}

inline Mat23 project_point_jacobian(const ScanGeometry& g, std::size_t i, const Vec3& x) {
    Mat3 rz = rot_z(g.stage_angles.at(i));
    Vec3 xs = rz * x;
    double depth = detail::check_depth(g, xs);
    double scale = g.sdd / (depth * g.pixel_pitch);
    double dscale = -scale / depth;
    Mat23 js;
    js << scale, xs.x() * dscale, 0.0, 0.0, xs.z() * dscale, scale;
    return js * rz;
}

/// World-space ray from the source through a detector position.
struct Ray {
    Vec3 origin;
    Vec3 direction; // unit length
    double length;  // source to detector distance along the ray
};

inline Ray pixel_ray(const ScanGeometry& g, std::size_t i, double u, double v) {
    Mat3 back = rot_z(-g.stage_angles.at(i));
    Vec3 src(0.0, -g.sod, 0.0);
    Vec3 pix((u - g.u0) * g.pixel_pitch, g.sdd - g.sod, (v - g.v0) * g.pixel_pitch);
    Vec3 d = pix - src;
    double len = d.norm();
    return {back * src, back * (d / len), len};
}

/// World-space source position for view i.
inline Vec3 source_position(const ScanGeometry& g, std::size_t i) {
    return rot_z(-g.stage_angles.at(i)) * Vec3(0.0, -g.sod, 0.0);
}

} // namespace cyltomo
