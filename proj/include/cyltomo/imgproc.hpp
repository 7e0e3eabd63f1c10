#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "image.hpp"

namespace cyltomo {

struct BinaryMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int r, int c) : rows(r), cols(c), bits(static_cast<std::size_t>(r) * c, 0) {}

    bool operator()(int r, int c) const { return bits[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set(int r, int c, bool on = true) { bits[static_cast<std::size_t>(r) * cols + c] = on ? 1 : 0; }
    std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
    bool operator==(const BinaryMask&) const = default;
};

/// Inclusive pixel rectangle.
struct PixelRect {
    int row_min = 0, row_max = -1;
    int col_min = 0, col_max = -1;
    bool contains(int r, int c) const { return r >= row_min && r <= row_max && c >= col_min && c <= col_max; }
};

/// Projected axis end points of one view; top.v < bottom.v.
struct AxisObservation {
    DetectorPoint top;
    DetectorPoint bottom;
    std::size_t view = 0;
};

/// Fixed cut-off, or Otsu's level when empty.
struct ThresholdLevel {
    std::optional<double> fixed;
    static ThresholdLevel automatic() { return {}; }
    static ThresholdLevel at(double v) { return {v}; }
};

/// Otsu's between-class-variance maximizer over a 256-bin histogram.
template <typename T>
double otsu_level(const Image<T>& img) {
    auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
    if (lo_it == img.data.end() || !(*hi_it > *lo_it))
        throw DegenerateHistogram("otsu: image is constant");
    const double lo = *lo_it, hi = *hi_it;
    constexpr int bins = 256;
    const double width = (hi - lo) / bins;
    std::array<double, bins> hist{};
    for (T x : img.data)
        hist[std::min(bins - 1, static_cast<int>((x - lo) / width))] += 1.0;
    double total = static_cast<double>(img.size()), sum_all = 0.0;
    for (int k = 0; k < bins; ++k)
        sum_all += k * hist[k];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_k = 0;
    for (int k = 0; k < bins - 1; ++k) {
        w0 += hist[k];
        sum0 += k * hist[k];
        double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0)
            continue;
        double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_k = k;
        }
    }
    return lo + (best_k + 1) * width;
}

/// Foreground = pixels strictly above the level (attenuating matter is bright
/// in line-integral images).
template <typename T>
BinaryMask threshold(const Image<T>& img, ThresholdLevel level) {
    double cut = level.fixed ? *level.fixed : otsu_level(img);
    BinaryMask m(img.rows, img.cols);
    for (std::size_t k = 0; k < img.data.size(); ++k)
        m.bits[k] = static_cast<double>(img.data[k]) > cut ? 1 : 0;
    return m;
}

/// Dilation by a (2 radius + 1)^2 square, done as two separable passes.
inline BinaryMask dilate(const BinaryMask& in, int radius) {
    if (radius < 0)
        throw ConfigError("dilate: radius must be >= 0");
    if (radius == 0)
        return in;
    BinaryMask tmp(in.rows, in.cols), out(in.rows, in.cols);
    for (int r = 0; r < in.rows; ++r)
        for (int c = 0; c < in.cols; ++c)
            if (in(r, c))
                for (int dc = std::max(0, c - radius); dc <= std::min(in.cols - 1, c + radius); ++dc)
                    tmp.set(r, dc);
    for (int r = 0; r < in.rows; ++r)
        for (int c = 0; c < in.cols; ++c)
            if (tmp(r, c))
                for (int dr = std::max(0, r - radius); dr <= std::min(in.rows - 1, r + radius); ++dr)
                    out.set(dr, c);
    return out;
}

/// mask minus every nuisance mask and every exclusion rectangle.
inline BinaryMask remove_features(const BinaryMask& mask, const std::vector<BinaryMask>& nuisance,
                                  const std::vector<PixelRect>& excluded = {}) {
    BinaryMask out = mask;
    for (const auto& n : nuisance) {
        if (n.rows != mask.rows || n.cols != mask.cols)
            throw SchemaMismatch("remove_features: nuisance mask dims differ");
        for (std::size_t k = 0; k < out.bits.size(); ++k)
            if (n.bits[k])
                out.bits[k] = 0;
    }
    for (const auto& rect : excluded)
        for (int r = std::max(0, rect.row_min); r <= std::min(out.rows - 1, rect.row_max); ++r)
            for (int c = std::max(0, rect.col_min); c <= std::min(out.cols - 1, rect.col_max); ++c)
                out.set(r, c, false);
    if (out.count() == 0)
        throw EmptyResult("remove_features: no foreground left");
    return out;
}

enum class EndpointMethod { extremal_pixels, row_midpoints };

namespace detail {
/// Sub-pixel position of a silhouette edge given its last foreground column
/// and the outward column step (-1 left, +1 right).
using EdgeRefiner = std::function<double(int row, int col, int outward)>;

/// Rows walked from the silhouette extreme `start` in direction `dir`: the
/// rounded cap rows, narrower than the full outline, are skipped and the next
/// `band` full-width rows contribute their midpoints.
inline DetectorPoint band_row_midpoints(const BinaryMask& m, int start, int dir, int band, int limit,
                                        const EdgeRefiner& edge = {}) {
    struct RowSpan {
        int row = 0, left = -1, right = -1;
    };
    std::vector<RowSpan> spans;
    for (int k = 0; k < limit; ++k) {
        RowSpan s{start + dir * k};
        for (int c = 0; c < m.cols; ++c)
            if (m(s.row, c)) {
                if (s.left < 0)
                    s.left = c;
                s.right = c;
            }
        spans.push_back(s);
    }
    int widest = -1;
    for (int k = 0; k < std::min(limit, std::max(2 * band, 16)); ++k)
        if (spans[k].left >= 0)
            widest = std::max(widest, spans[k].right - spans[k].left);
    if (widest < 0)
        throw DegenerateMask("axis_endpoints: empty band");
    std::size_t first = 0;
    while (first < spans.size() && (spans[first].left < 0 || spans[first].right - spans[first].left < widest - 1))
        ++first;
    double u = 0.0, v = 0.0;
    int n = 0;
    for (std::size_t k = first; k < spans.size() && n < band; ++k) {
        if (spans[k].left < 0)
            break;
        const RowSpan& sp = spans[k];
        u += edge ? 0.5 * (edge(sp.row, sp.left, -1) + edge(sp.row, sp.right, +1)) : 0.5 * (sp.left + sp.right);
        v += sp.row;
        ++n;
    }
    if (n == 0)
        throw DegenerateMask("axis_endpoints: empty band");
    return {u / n, v / n};
}

/// Midpoint of the leftmost and rightmost foreground pixels among rows
/// [first, last]. Pixels tied on column contribute the mean of their centers.
inline DetectorPoint band_center(const BinaryMask& m, int first, int last) {
    int left = std::numeric_limits<int>::max(), right = -1;
    for (int r = first; r <= last; ++r)
        for (int c = 0; c < m.cols; ++c)
            if (m(r, c)) {
                left = std::min(left, c);
                right = std::max(right, c);
            }
    if (right < 0)
        throw DegenerateMask("axis_endpoints: empty band");
    double lrow = 0.0, rrow = 0.0;
    int nl = 0, nr = 0;
    for (int r = first; r <= last; ++r) {
        if (m(r, left)) {
            lrow += r;
            ++nl;
        }
        if (m(r, right)) {
            rrow += r;
            ++nr;
        }
    }
    return {0.5 * (left + right), 0.5 * (lrow / nl + rrow / nr)};
}
} // namespace detail

/// Projected symmetry-axis ends of a silhouette, one end per band of rows.
/// extremal_pixels: midpoint of the leftmost and rightmost pixels of the whole
/// band. row_midpoints: mean over band rows of each row's own left/right
/// midpoint, counted from the first full-width row below the cap.
inline AxisObservation axis_endpoints(const BinaryMask& m, int band = 1, std::size_t view = 0,
                                      EndpointMethod method = EndpointMethod::extremal_pixels,
                                      const detail::EdgeRefiner& edge = {}) {
    if (band < 1)
        throw ConfigError("axis_endpoints: band must be >= 1");
    int r_min = -1, r_max = -1;
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            if (m(r, c)) {
                if (r_min < 0)
                    r_min = r;
                r_max = r;
                break;
            }
    if (r_min < 0)
        throw DegenerateMask("axis_endpoints: empty mask");
    if (r_max - r_min < 1)
        throw DegenerateMask("axis_endpoints: silhouette spans fewer than two rows");
    int b = std::min(band, (r_max - r_min + 1) / 2);
    AxisObservation obs;
    obs.view = view;
    if (method == EndpointMethod::extremal_pixels) {
        obs.top = detail::band_center(m, r_min, r_min + b - 1);
        obs.bottom = detail::band_center(m, r_max - b + 1, r_max);
    } else {
        int limit = (r_max - r_min + 1) / 2;
        obs.top = detail::band_row_midpoints(m, r_min, +1, b, limit, edge);
        obs.bottom = detail::band_row_midpoints(m, r_max, -1, b, limit, edge);
    }
    if (obs.top.v > obs.bottom.v)
        std::swap(obs.top, obs.bottom);
    return obs;
}

/// Row-midpoint end points with edges placed at the linearly interpolated
/// crossing of `level` between each boundary pixel and its outer neighbor.
template <typename T>
AxisObservation axis_endpoints_subpixel(const BinaryMask& m, const Image<T>& img, double level, int band = 1,
                                        std::size_t view = 0) {
    if (img.rows != m.rows || img.cols != m.cols)
        throw SchemaMismatch("axis_endpoints: image and mask dims differ");
    detail::EdgeRefiner edge = [&](int r, int c, int out) {
        int o = c + out;
        if (o < 0 || o >= img.cols)
            return static_cast<double>(c);
        double in_v = img.at(r, c), out_v = img.at(r, o);
        if (!(in_v > level) || !(out_v <= level) || in_v == out_v)
            return static_cast<double>(c);
        return c + out * (in_v - level) / (in_v - out_v);
    };
    return axis_endpoints(m, band, view, EndpointMethod::row_midpoints, edge);
}

namespace detail {
template <typename T, typename F>
void for_strip(const Image<T>& img, const AxisObservation& axis, double offset, double width, F&& f) {
    if (!(width > 0.0))
        throw ConfigError("strip_profile: width must be positive");
    double du = axis.bottom.u - axis.top.u, dv = axis.bottom.v - axis.top.v;
    double len = std::hypot(du, dv);
    if (!(len > 0.0))
        throw DegenerateMask("strip_profile: zero-length axis");
    double au = du / len, av = dv / len;
    double nu = av, nv = -au;
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            double pu = c - axis.top.u, pv = r - axis.top.v;
            double along = pu * au + pv * av;
            if (along < 0.0 || along > len)
                continue;
            double across = pu * nu + pv * nv;
            if (std::abs(across - offset) > 0.5 * width)
                continue;
            f(across, static_cast<double>(img.at(r, c)));
        }
}
} // namespace detail

/// Mean value over a strip parallel to the projected axis, centered at a
/// signed perpendicular offset (positive towards +u for a downward axis) and
/// limited to the axis' extent.
template <typename T>
double strip_profile(const Image<T>& img, const AxisObservation& axis, double offset, double width) {
    double sum = 0.0;
    std::size_t n = 0;
    detail::for_strip(img, axis, offset, width, [&](double, double v) {
        sum += v;
        ++n;
    });
    if (n == 0)
        throw OutOfFrame("strip_profile: strip does not intersect the frame");
    return sum / static_cast<double>(n);
}

/// Mean of (signed distance from the axis) x value over the same strip.
template <typename T>
double strip_moment(const Image<T>& img, const AxisObservation& axis, double offset, double width) {
    double sum = 0.0;
    std::size_t n = 0;
    detail::for_strip(img, axis, offset, width, [&](double across, double v) {
        sum += across * v;
        ++n;
    });
    if (n == 0)
        throw OutOfFrame("strip_moment: strip does not intersect the frame");
    return sum / static_cast<double>(n);
}

} // namespace cyltomo
