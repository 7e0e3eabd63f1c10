#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "parallel.hpp"

namespace cyltomo {

enum class Interp { linear, nearest };

/// Cylindrical coordinates about the object axis. theta in [0, 2pi).
struct CylCoord {
    double r = 0.0;
    double theta = 0.0;
    double h = 0.0;
};

inline double normalize_theta(double theta) {
    double t = std::fmod(theta, 2.0 * pi);
    if (t < 0.0)
        t += 2.0 * pi;
    if (t >= 2.0 * pi)
        t = 0.0;
    return t;
}

inline CylCoord cart_to_cyl(const Vec3& x) {
    double r = std::hypot(x.x(), x.y());
    double theta = r > 0.0 ? normalize_theta(std::atan2(x.y(), x.x())) : 0.0;
    return {r, theta, x.z()};
}

inline Vec3 cyl_to_cart(const CylCoord& c) {
    return {c.r * std::cos(c.theta), c.r * std::sin(c.theta), c.h};
}

/// Object-aligned cylindrical lattice. The axis runs along the object z axis,
/// h spans [-height/2, height/2], voxels are cell-centered with equal steps in
/// r, theta and h. Storage order is (h, theta, r) with r fastest.
struct CylGrid {
    int n_h = 1;
    int n_theta = 1;
    int n_r = 1;
    double radius = 1.0;
    double height = 1.0;
    Pose pose;

    double dr() const { return radius / n_r; }
    double dtheta() const { return 2.0 * pi / n_theta; }
    double dh() const { return height / n_h; }
    std::size_t size() const {
        return static_cast<std::size_t>(n_h) * static_cast<std::size_t>(n_theta) * static_cast<std::size_t>(n_r);
    }
    std::size_t index(int ih, int it, int ir) const {
        return (static_cast<std::size_t>(ih) * n_theta + it) * n_r + ir;
    }

    double r_center(int ir) const { return (ir + 0.5) * dr(); }
    double theta_center(int it) const { return (it + 0.5) * dtheta(); }
    double h_center(int ih) const { return (ih + 0.5) * dh() - 0.5 * height; }
    CylCoord center(int ih, int it, int ir) const { return {r_center(ir), theta_center(it), h_center(ih)}; }

    bool same_shape(const CylGrid& o) const {
        return n_h == o.n_h && n_theta == o.n_theta && n_r == o.n_r && radius == o.radius && height == o.height;
    }

    void validate() const {
        if (n_h < 1 || n_theta < 1 || n_r < 1)
            throw ConfigError("cylindrical grid: voxel counts must be >= 1");
        if (!(radius > 0.0) || !(height > 0.0))
            throw ConfigError("cylindrical grid: radius and height must be positive");
    }
};

/// World-aligned Cartesian lattice; origin is the world position of the
/// grid's minimum corner. Storage order (z, y, x) with x fastest.
struct CartGrid {
    int n_x = 1;
    int n_y = 1;
    int n_z = 1;
    double voxel_size = 1.0;
    Vec3 origin = Vec3::Zero();

    std::size_t size() const {
        return static_cast<std::size_t>(n_x) * static_cast<std::size_t>(n_y) * static_cast<std::size_t>(n_z);
    }
    std::size_t index(int iz, int iy, int ix) const {
        return (static_cast<std::size_t>(iz) * n_y + iy) * n_x + ix;
    }
    Vec3 center(int iz, int iy, int ix) const {
        return origin + voxel_size * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
    }
    Vec3 extent() const { return voxel_size * Vec3(n_x, n_y, n_z); }

    void validate() const {
        if (n_x < 1 || n_y < 1 || n_z < 1)
            throw ConfigError("cartesian grid: voxel counts must be >= 1");
        if (!(voxel_size > 0.0))
            throw ConfigError("cartesian grid: voxel_size must be positive");
    }
};

template <typename T>
struct CylVolume {
    using value_type = T;
    CylGrid grid;
    std::vector<T> mu;

    CylVolume() = default;
    explicit CylVolume(const CylGrid& g, T fill = T(0)) : grid(g), mu(g.size(), fill) {}

    T& at(int ih, int it, int ir) { return mu[grid.index(ih, it, ir)]; }
    T at(int ih, int it, int ir) const { return mu[grid.index(ih, it, ir)]; }
};

template <typename T>
struct CartVolume {
    using value_type = T;
    CartGrid grid;
    std::vector<T> mu;

    CartVolume() = default;
    explicit CartVolume(const CartGrid& g, T fill = T(0)) : grid(g), mu(g.size(), fill) {}

    T& at(int iz, int iy, int ix) { return mu[grid.index(iz, iy, ix)]; }
    T at(int iz, int iy, int ix) const { return mu[grid.index(iz, iy, ix)]; }
};

inline CylCoord world_to_grid(const Alignment& a, const Vec3& x_world) {
    return cart_to_cyl(a.to_object(x_world));
}

inline CylCoord world_to_grid(const CylGrid& g, const Vec3& x_world) {
    return world_to_grid(Alignment(g.pose), x_world);
}

namespace detail {

struct Axis {
    int i0, i1;
    double w; // weight of i1
};

inline Axis clamped_axis(double f, int n, Interp mode) {
    f = std::clamp(f, 0.0, static_cast<double>(n - 1));
    if (mode == Interp::nearest) {
        int i = static_cast<int>(std::lround(f));
        return {i, i, 0.0};
    }
    int i0 = static_cast<int>(f);
    if (i0 >= n - 1)
        return {n - 1, n - 1, 0.0};
    return {i0, i0 + 1, f - i0};
}

inline Axis periodic_axis(double f, int n, Interp mode) {
    if (mode == Interp::nearest) {
        long i = std::lround(f);
        int k = static_cast<int>(((i % n) + n) % n);
        return {k, k, 0.0};
    }
    double fl = std::floor(f);
    int i0 = static_cast<int>(fl);
    double w = f - fl;
    i0 = ((i0 % n) + n) % n;
    return {i0, (i0 + 1) % n, w};
}

template <typename T>
double trilinear(const std::vector<T>& data, std::size_t s0, std::size_t s1, const Axis& a0, const Axis& a1,
                 const Axis& a2) {
    auto v = [&](int i, int j, int k) {
        return static_cast<double>(data[(static_cast<std::size_t>(i) * s0 + j) * s1 + k]);
    };
    double c00 = v(a0.i0, a1.i0, a2.i0) * (1 - a2.w) + v(a0.i0, a1.i0, a2.i1) * a2.w;
    double c01 = v(a0.i0, a1.i1, a2.i0) * (1 - a2.w) + v(a0.i0, a1.i1, a2.i1) * a2.w;
    double c10 = v(a0.i1, a1.i0, a2.i0) * (1 - a2.w) + v(a0.i1, a1.i0, a2.i1) * a2.w;
    double c11 = v(a0.i1, a1.i1, a2.i0) * (1 - a2.w) + v(a0.i1, a1.i1, a2.i1) * a2.w;
    double c0 = c00 * (1 - a1.w) + c01 * a1.w;
    double c1 = c10 * (1 - a1.w) + c11 * a1.w;
    return c0 * (1 - a0.w) + c1 * a0.w;
}

} // namespace detail

inline bool in_support(const CylGrid& g, const CylCoord& c) {
    return c.r <= g.radius && std::abs(c.h) <= 0.5 * g.height;
}

inline bool in_support(const CartGrid& g, const Vec3& x) {
    Vec3 rel = x - g.origin, ext = g.extent();
    return (rel.array() >= 0.0).all() && (rel.array() <= ext.array()).all();
}

/// Interpolated attenuation at a cylindrical coordinate. theta wraps, r and h
/// clamp to the outermost cell centers, and points outside the support give 0.
template <typename T>
double sample(const CylVolume<T>& vol, const CylCoord& c, Interp mode = Interp::linear) {
    const CylGrid& g = vol.grid;
    if (!in_support(g, c))
        return 0.0;
    auto ah = detail::clamped_axis((c.h + 0.5 * g.height) / g.dh() - 0.5, g.n_h, mode);
    auto at = detail::periodic_axis(normalize_theta(c.theta) / g.dtheta() - 0.5, g.n_theta, mode);
    auto ar = detail::clamped_axis(c.r / g.dr() - 0.5, g.n_r, mode);
    return detail::trilinear(vol.mu, g.n_theta, g.n_r, ah, at, ar);
}

/// Interpolated attenuation at a world-space point.
template <typename T>
double sample(const CartVolume<T>& vol, const Vec3& x, Interp mode = Interp::linear) {
    const CartGrid& g = vol.grid;
    if (!in_support(g, x))
        return 0.0;
    Vec3 f = (x - g.origin) / g.voxel_size - Vec3::Constant(0.5);
    auto az = detail::clamped_axis(f.z(), g.n_z, mode);
    auto ay = detail::clamped_axis(f.y(), g.n_y, mode);
    auto ax = detail::clamped_axis(f.x(), g.n_x, mode);
    return detail::trilinear(vol.mu, g.n_y, g.n_x, az, ay, ax);
}

template <typename T>
double sample_world(const CylVolume<T>& vol, const Alignment& a, const Vec3& x, Interp mode = Interp::linear) {
    return sample(vol, world_to_grid(a, x), mode);
}

template <typename T>
CartVolume<T> resample_cyl_to_cart(const CylVolume<T>& vol, const CartGrid& target,
                                   Interp mode = Interp::linear) {
    target.validate();
    CartVolume<T> out(target);
    Alignment a(vol.grid.pose);
    std::size_t plane = static_cast<std::size_t>(target.n_x) * target.n_y;
    parallel_for(target.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t idx = b; idx < e; ++idx) {
            int iz = static_cast<int>(idx / plane);
            int iy = static_cast<int>((idx % plane) / target.n_x);
            int ix = static_cast<int>(idx % target.n_x);
            out.mu[idx] = static_cast<T>(sample_world(vol, a, target.center(iz, iy, ix), mode));
        }
    });
    return out;
}

/// Re-grids a cylindrical volume onto another cylindrical lattice in object
/// coordinates (pose is not involved; the result takes target's pose).
template <typename T>
CylVolume<T> resample_cyl_to_cyl(const CylVolume<T>& vol, const CylGrid& target, Interp mode = Interp::linear) {
    target.validate();
    CylVolume<T> out(target);
    for (int ih = 0; ih < target.n_h; ++ih)
        for (int it = 0; it < target.n_theta; ++it)
            for (int ir = 0; ir < target.n_r; ++ir)
                out.at(ih, it, ir) = static_cast<T>(sample(vol, target.center(ih, it, ir), mode));
    return out;
}

} // namespace cyltomo
