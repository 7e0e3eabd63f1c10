#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "image.hpp"
#include "parallel.hpp"

namespace cyltomo {

enum class ProjectionKind { intensity, line_integral };

template <typename T>
struct ProjectionSet {
    ScanGeometry geom;
    std::vector<Image<T>> images;
    ProjectionKind kind = ProjectionKind::line_integral;

    std::size_t num_views() const { return images.size(); }

    void validate() const {
        geom.validate();
        if (images.size() != geom.num_views())
            throw SchemaMismatch("projection set: image count does not match geometry");
        for (const auto& im : images)
            if (im.rows != geom.det_rows || im.cols != geom.det_cols)
                throw SchemaMismatch("projection set: image dims do not match detector");
    }
};

struct RaySamplingConfig {
    double step = 0.0;   // mm; <= 0 selects default_step() for the target grid
    int supersample = 1; // rays per pixel along each detector axis

    void validate() const {
        if (!(step > 0.0))
            throw ConfigError("ray sampling step must be positive");
        if (supersample < 1)
            throw ConfigError("supersample factor must be >= 1");
    }
};

inline double default_step(const CylGrid& g) { return 0.5 * std::min(g.dr(), g.dh()); }
inline double default_step(const CartGrid& g) { return 0.5 * g.voxel_size; }

template <typename Grid>
RaySamplingConfig resolve_sampling(RaySamplingConfig cfg, const Grid& g) {
    if (!(cfg.step > 0.0))
        cfg.step = default_step(g);
    cfg.validate();
    return cfg;
}

namespace detail {

struct Interval {
    double t0 = 0.0, t1 = -1.0;
    bool empty() const { return !(t1 > t0); }
};

inline Interval intersect(Interval a, Interval b) { return {std::max(a.t0, b.t0), std::min(a.t1, b.t1)}; }

inline Interval slab(double o, double d, double lo, double hi) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (std::abs(d) < 1e-15)
        return (o >= lo && o <= hi) ? Interval{-inf, inf} : Interval{};
    double a = (lo - o) / d, b = (hi - o) / d;
    if (a > b)
        std::swap(a, b);
    return {a, b};
}

/// Evaluates a volume along rays in its own frame.
template <typename T>
struct Marcher;

template <typename T>
struct Marcher<CylVolume<T>> {
    const CylVolume<T>& vol;
    Alignment align;
    Vec3 o, d;

    explicit Marcher(const CylVolume<T>& v) : vol(v), align(v.grid.pose) {}

    Interval start(const Ray& ray) {
        o = align.to_object(ray.origin);
        d = align.dir_to_object(ray.direction);
        const CylGrid& g = vol.grid;
        Interval hull = slab(o.z(), d.z(), -0.5 * g.height, 0.5 * g.height);
        double a = d.x() * d.x() + d.y() * d.y();
        double b = o.x() * d.x() + o.y() * d.y();
        double c = o.x() * o.x() + o.y() * o.y() - g.radius * g.radius;
        if (a < 1e-15) {
            if (c > 0.0)
                return {};
        } else {
            double disc = b * b - a * c;
            if (disc <= 0.0)
                return {};
            double s = std::sqrt(disc);
            hull = intersect(hull, {(-b - s) / a, (-b + s) / a});
        }
        return intersect(hull, {0.0, ray.length});
    }

    double operator()(double t) const {
        const CylGrid& g = vol.grid;
        double x = o.x() + t * d.x(), y = o.y() + t * d.y(), z = o.z() + t * d.z();
        double r = std::sqrt(x * x + y * y);
        if (r > g.radius || std::abs(z) > 0.5 * g.height)
            return 0.0;
        double theta = r > 0.0 ? std::atan2(y, x) : 0.0;
        if (theta < 0.0)
            theta += 2.0 * pi;
        auto ah = clamped_axis((z + 0.5 * g.height) * inv_dh - 0.5, g.n_h, Interp::linear);
        // theta in [0, 2pi) keeps the index within one period of the wrap
        double ft = theta * inv_dtheta - 0.5, fl = std::floor(ft);
        int t0 = static_cast<int>(fl);
        Axis at{t0 < 0 ? g.n_theta - 1 : t0, t0 + 1 >= g.n_theta ? 0 : t0 + 1, ft - fl};
        if (at.i0 >= g.n_theta)
            at = {0, g.n_theta > 1 ? 1 : 0, 0.0};
        auto ar = clamped_axis(r * inv_dr - 0.5, g.n_r, Interp::linear);
        return trilinear(vol.mu, g.n_theta, g.n_r, ah, at, ar);
    }

    double inv_dr = 1.0 / vol.grid.dr();
    double inv_dh = 1.0 / vol.grid.dh();
    double inv_dtheta = 1.0 / vol.grid.dtheta();
};

template <typename T>
struct Marcher<CartVolume<T>> {
    const CartVolume<T>& vol;
    Vec3 o, d;

    explicit Marcher(const CartVolume<T>& v) : vol(v) {}

    Interval start(const Ray& ray) {
        o = ray.origin;
        d = ray.direction;
        Vec3 lo = vol.grid.origin, hi = lo + vol.grid.extent();
        Interval iv{0.0, ray.length};
        for (int k = 0; k < 3; ++k)
            iv = intersect(iv, slab(o[k], d[k], lo[k], hi[k]));
        return iv;
    }

    double operator()(double t) const { return sample(vol, Vec3(o + t * d)); }
};

/// Equidistant midpoint samples of width step, plus one shorter sample
/// covering the remainder, so the weights sum to the chord length.
template <typename F>
double integrate(const Interval& iv, double step, F&& f, double& chord) {
    chord = 0.0;
    if (iv.empty())
        return 0.0;
    double len = iv.t1 - iv.t0;
    auto n = static_cast<std::size_t>(std::floor(len / step));
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        acc += f(iv.t0 + (static_cast<double>(k) + 0.5) * step);
    acc *= step;
    double rem = len - static_cast<double>(n) * step;
    if (rem > 0.0)
        acc += rem * f(iv.t0 + static_cast<double>(n) * step + 0.5 * rem);
    chord = len;
    return acc;
}

} // namespace detail

/// Simulated line integrals of one view plus, per pixel, the total sampled
/// path length through the volume support (the SART row sums).
struct ViewProjection {
    Image<double> line_integral;
    Image<double> row_sum;
};

/// Pixel-driven projection of view i: one ray per (sub)pixel center,
/// integrated with equidistant samples of the interpolated volume.
template <typename Volume>
ViewProjection forward_project_view(const Volume& vol, const ScanGeometry& geom, std::size_t i,
                                    RaySamplingConfig cfg) {
    cfg = resolve_sampling(cfg, vol.grid);
    ViewProjection out{Image<double>(geom.det_rows, geom.det_cols), Image<double>(geom.det_rows, geom.det_cols)};
    const int ss = cfg.supersample;
    const double inv = 1.0 / (ss * ss);
    const std::size_t cols = static_cast<std::size_t>(geom.det_cols);
    parallel_for(
        out.line_integral.size(),
        [&](std::size_t b, std::size_t e) {
            detail::Marcher<Volume> march(vol);
            for (std::size_t px = b; px < e; ++px) {
                int row = static_cast<int>(px / cols), col = static_cast<int>(px % cols);
                double total = 0.0, chord_total = 0.0;
                for (int sv = 0; sv < ss; ++sv)
                    for (int su = 0; su < ss; ++su) {
                        double u = col + (su + 0.5) / ss - 0.5, v = row + (sv + 0.5) / ss - 0.5;
                        Ray ray = pixel_ray(geom, i, u, v);
                        auto iv = march.start(ray);
                        double chord = 0.0;
                        total += detail::integrate(iv, cfg.step, march, chord);
                        chord_total += chord;
                    }
                out.line_integral.data[px] = total * inv;
                out.row_sum.data[px] = chord_total * inv;
            }
        },
        16);
    return out;
}

template <typename Volume>
Image<typename Volume::value_type> forward_project(const Volume& vol, const ScanGeometry& geom, std::size_t i,
                                                   const RaySamplingConfig& cfg = {}) {
    return image_cast<typename Volume::value_type>(forward_project_view(vol, geom, i, cfg).line_integral);
}

template <typename Volume>
ProjectionSet<typename Volume::value_type> forward_project_all(const Volume& vol, const ScanGeometry& geom,
                                                               const RaySamplingConfig& cfg = {}) {
    geom.validate();
    ProjectionSet<typename Volume::value_type> ps;
    ps.geom = geom;
    ps.kind = ProjectionKind::line_integral;
    ps.images.reserve(geom.num_views());
    for (std::size_t i = 0; i < geom.num_views(); ++i)
        ps.images.push_back(forward_project(vol, geom, i, cfg));
    return ps;
}

/// Per-pixel correction values for back-projection. Pixels with valid == 0
/// carry no information; an empty mask marks every pixel valid.
struct CorrectionImage {
    Image<double> value;
    std::vector<unsigned char> valid; // empty: every pixel valid
};

/// Voxel-wise accumulators: numerator += correction * w, denominator += w.
struct BackprojectionAccumulator {
    std::vector<double> numerator;
    std::vector<double> denominator;

    BackprojectionAccumulator() = default;
    explicit BackprojectionAccumulator(std::size_t n) : numerator(n, 0.0), denominator(n, 0.0) {}
    void reset() {
        std::fill(numerator.begin(), numerator.end(), 0.0);
        std::fill(denominator.begin(), denominator.end(), 0.0);
    }
};

inline std::vector<Vec3> voxel_world_centers(const CylGrid& g) {
    std::vector<Vec3> out(g.size());
    Alignment a(g.pose);
    for (int ih = 0; ih < g.n_h; ++ih)
        for (int it = 0; it < g.n_theta; ++it)
            for (int ir = 0; ir < g.n_r; ++ir)
                out[g.index(ih, it, ir)] = a.to_world(cyl_to_cart(g.center(ih, it, ir)));
    return out;
}

inline std::vector<Vec3> voxel_world_centers(const CartGrid& g) {
    std::vector<Vec3> out(g.size());
    for (int iz = 0; iz < g.n_z; ++iz)
        for (int iy = 0; iy < g.n_y; ++iy)
            for (int ix = 0; ix < g.n_x; ++ix)
                out[g.index(iz, iy, ix)] = g.center(iz, iy, ix);
    return out;
}

/// Voxel-driven back-projection of view i. Each voxel center is projected on
/// the detector and the correction image is sampled bilinearly; the bilinear
/// weights of the valid in-detector neighbours act as the voxel's footprint.
inline void back_project(const CorrectionImage& corr, const ScanGeometry& geom, std::size_t i,
                         const std::vector<Vec3>& centers, BackprojectionAccumulator& acc) {
    const Image<double>& img = corr.value;
    if (img.rows != geom.det_rows || img.cols != geom.det_cols)
        throw SchemaMismatch("back_project: correction image does not match detector");
    if (acc.numerator.size() != centers.size())
        acc = BackprojectionAccumulator(centers.size());
    const bool masked = !corr.valid.empty();
    Mat3 rz = rot_z(geom.stage_angles.at(i));
    const double scale0 = geom.sdd / geom.pixel_pitch;
    parallel_for(centers.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t m = b; m < e; ++m) {
            Vec3 xs = rz * centers[m];
            double depth = geom.sod + xs.y();
            if (depth <= 1e-9 * geom.sod)
                continue;
            double s = scale0 / depth;
            double u = geom.u0 + xs.x() * s, v = geom.v0 + xs.z() * s;
            if (u < -0.5 || v < -0.5 || u > img.cols - 0.5 || v > img.rows - 0.5)
                continue;
            int c0 = static_cast<int>(std::floor(u)), r0 = static_cast<int>(std::floor(v));
            double wu = u - c0, wv = v - r0;
            double num = 0.0, den = 0.0;
            for (int dr = 0; dr < 2; ++dr)
                for (int dc = 0; dc < 2; ++dc) {
                    int r = r0 + dr, c = c0 + dc;
                    if (!img.contains(r, c))
                        continue;
                    std::size_t k = static_cast<std::size_t>(r) * img.cols + c;
                    if (masked && !corr.valid[k])
                        continue;
                    double w = (dr ? wv : 1.0 - wv) * (dc ? wu : 1.0 - wu);
                    num += w * img.data[k];
                    den += w;
                }
            acc.numerator[m] += num;
            acc.denominator[m] += den;
        }
    });
}

template <typename T>
ProjectionSet<T> intensities_to_line_integrals(const ProjectionSet<T>& ps, const Image<double>& flat) {
    if (ps.kind != ProjectionKind::intensity)
        throw ConfigError("projection set is not in intensity form");
    ProjectionSet<T> out = ps;
    out.kind = ProjectionKind::line_integral;
    for (auto& im : out.images) {
        if (flat.data.size() != 1 && (flat.rows != im.rows || flat.cols != im.cols))
            throw SchemaMismatch("flat-field image does not match projection dims");
        for (std::size_t k = 0; k < im.data.size(); ++k) {
            double i0 = flat.data[flat.data.size() == 1 ? 0 : k];
            double iv = static_cast<double>(im.data[k]);
            if (!(iv > 0.0) || !(i0 > 0.0))
                throw NonPositiveIntensity("intensity and flat field must be positive");
            im.data[k] = static_cast<T>(-std::log(iv / i0));
        }
    }
    return out;
}

template <typename T>
ProjectionSet<T> intensities_to_line_integrals(const ProjectionSet<T>& ps, double flat) {
    return intensities_to_line_integrals(ps, Image<double>(1, 1, flat));
}

/// Beer-Lambert forward model: I = I0 exp(-p).
template <typename T>
ProjectionSet<T> line_integrals_to_intensities(const ProjectionSet<T>& ps, double flat) {
    if (ps.kind != ProjectionKind::line_integral)
        throw ConfigError("projection set is not in line-integral form");
    ProjectionSet<T> out = ps;
    out.kind = ProjectionKind::intensity;
    for (auto& im : out.images)
        for (auto& x : im.data)
            x = static_cast<T>(flat * std::exp(-static_cast<double>(x)));
    return out;
}

/// Photon-counting noise on line integrals: counts ~ Poisson(I0 exp(-p)),
/// approximated by a Gaussian with matching variance, floored at one count.
template <typename T>
void add_counting_noise(ProjectionSet<T>& ps, double flat_counts, std::uint64_t seed) {
    if (ps.kind != ProjectionKind::line_integral)
        throw ConfigError("noise model expects line integrals");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& im : ps.images)
        for (auto& x : im.data) {
            double mean = flat_counts * std::exp(-static_cast<double>(x));
            double counts = std::max(1.0, mean + std::sqrt(mean) * gauss(rng));
            x = static_cast<T>(std::max(0.0, -std::log(counts / flat_counts)));
        }
}

} // namespace cyltomo
