#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "phantom.hpp"

namespace cyltomo {

/// (max - min) / (max + min) of non-negative values.
inline double modulation(std::span<const double> values) {
    if (values.empty())
        throw ConfigError("modulation: no values");
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo < 0.0)
        throw ConfigError("modulation: values must be non-negative");
    if (!(*hi + *lo > 0.0))
        throw AllZero("modulation: all values are zero");
    return (*hi - *lo) / (*hi + *lo);
}

/// Values of one theta ring at the central height. For an even slice count
/// the two middle slices are averaged, which is the interpolated value at h = 0.
template <typename T>
std::vector<double> central_ring(const CylVolume<T>& vol, int ir) {
    const CylGrid& g = vol.grid;
    std::vector<double> ring(g.n_theta);
    int hi = g.n_h / 2, lo = g.n_h % 2 == 0 ? hi - 1 : hi;
    for (int it = 0; it < g.n_theta; ++it)
        ring[it] = 0.5 * (static_cast<double>(vol.at(lo, it, ir)) + static_cast<double>(vol.at(hi, it, ir)));
    return ring;
}

/// theta-averaged radial profile of the central height.
template <typename T>
std::vector<double> central_radial_profile(const CylVolume<T>& vol) {
    const CylGrid& g = vol.grid;
    std::vector<double> prof(g.n_r, 0.0);
    for (int ir = 0; ir < g.n_r; ++ir) {
        auto ring = central_ring(vol, ir);
        for (double v : ring)
            prof[ir] += v;
        prof[ir] /= g.n_theta;
    }
    return prof;
}

struct FrequencyCheck {
    bool ok = false;
    double dominant = 0.0;  // in cycles per full period of the measured direction
    double amplitude = 0.0; // cosine amplitude of the dominant component
};

/// Dominant non-zero frequency of a profile, from its discrete Fourier
/// spectrum. span_fraction is the fraction of the full period (2pi for rings,
/// the radius for radial profiles) that the profile covers; frequencies are
/// reported in cycles per full period. Components with amplitude below
/// min_amplitude count as absent, so expected == 0 asks for a flat profile.
inline FrequencyCheck frequency_check(std::span<const double> profile, double expected, double span_fraction = 1.0,
                                      double min_amplitude = 0.0) {
    const std::size_t n = profile.size();
    FrequencyCheck out;
    if (n < 3)
        return out;
    double mean = 0.0;
    for (double v : profile)
        mean += v;
    mean /= static_cast<double>(n);
    double best = -1.0;
    std::size_t best_k = 1;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            acc += (profile[j] - mean) * std::polar(1.0, -2.0 * pi * static_cast<double>(k * j) / static_cast<double>(n));
        if (std::abs(acc) > best * (1.0 + 1e-12)) {
            best = std::abs(acc);
            best_k = k;
        }
    }
    out.dominant = static_cast<double>(best_k) / span_fraction;
    out.amplitude = (2 * best_k == n ? 1.0 : 2.0) * best / static_cast<double>(n);
    bool significant = out.amplitude >= min_amplitude && out.amplitude > 0.0;
    if (expected == 0.0)
        out.ok = !significant;
    else
        out.ok = significant && std::abs(out.dominant - expected) <= 0.5 / span_fraction;
    return out;
}

struct AzimuthalMtf {
    int n_lines = 0;
    bool aliased = false; // n_lines beyond the ring Nyquist limit
    std::vector<double> modulation; // per radial index
    std::vector<FrequencyCheck> checks;
};

template <typename T>
AzimuthalMtf mtf_azimuthal(const CylVolume<T>& vol, int n_lines) {
    if (n_lines < 1)
        throw ConfigError("mtf_azimuthal: n_lines must be >= 1");
    AzimuthalMtf out;
    out.n_lines = n_lines;
    out.aliased = 2 * n_lines > vol.grid.n_theta;
    for (int ir = 0; ir < vol.grid.n_r; ++ir) {
        auto ring = central_ring(vol, ir);
        out.modulation.push_back(modulation(ring));
        out.checks.push_back(frequency_check(ring, n_lines));
    }
    return out;
}

struct RadialWindow {
    int r_begin = 0, r_end = 0; // voxel index range [begin, end)
    double modulation = 0.0;
    /// theta content of the window's mean ring; a concentric-ring pattern
    /// should show none above a tenth of the window's line amplitude
    FrequencyCheck azimuthal;
};

struct RadialMtf {
    int n_lines = 0;
    double period_voxels = 0.0;
    std::vector<RadialWindow> windows;
    std::vector<double> profile;
};

/// Modulation of the theta-averaged radial profile in consecutive windows,
/// each exactly one line period wide.
template <typename T>
RadialMtf mtf_radial(const CylVolume<T>& vol, int n_lines) {
    if (n_lines < 1)
        throw ConfigError("mtf_radial: n_lines must be >= 1");
    RadialMtf out;
    out.n_lines = n_lines;
    out.period_voxels = static_cast<double>(vol.grid.n_r) / n_lines;
    if (out.period_voxels < 2.0)
        throw PeriodTooSmall("mtf_radial: line period below two voxels");
    out.profile = central_radial_profile(vol);
    for (int k = 0;; ++k) {
        int b = static_cast<int>(std::lround(k * out.period_voxels));
        int e = static_cast<int>(std::lround((k + 1) * out.period_voxels));
        if (e > vol.grid.n_r || b >= e)
            break;
        std::span<const double> win(out.profile.data() + b, static_cast<std::size_t>(e - b));
        auto [lo, hi] = std::minmax_element(win.begin(), win.end());
        std::vector<double> ring(vol.grid.n_theta, 0.0);
        for (int ir = b; ir < e; ++ir) {
            auto one = central_ring(vol, ir);
            for (int it = 0; it < vol.grid.n_theta; ++it)
                ring[it] += one[it] / (e - b);
        }
        out.windows.push_back({b, e, modulation(win), frequency_check(ring, 0.0, 1.0, 0.05 * (*hi - *lo))});
    }
    return out;
}

/// One modulation value per frequency (median over radii or windows) plus
/// the full radius-resolved table.
struct MtfCurve {
    LineDirection direction = LineDirection::azimuthal;
    std::vector<int> frequencies;
    std::vector<double> modulation;
    std::vector<std::vector<double>> by_radius; // [frequency][radius or window]
    std::vector<std::vector<bool>> aliased;     // same layout
};

inline double median(std::vector<double> v) {
    if (v.empty())
        throw ConfigError("median of an empty set");
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0)
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    return m;
}

inline void append_azimuthal(MtfCurve& curve, const AzimuthalMtf& m) {
    curve.frequencies.push_back(m.n_lines);
    curve.by_radius.push_back(m.modulation);
    std::vector<bool> flags;
    for (const auto& c : m.checks)
        flags.push_back(m.aliased || !c.ok);
    curve.aliased.push_back(flags);
    curve.modulation.push_back(median(m.modulation));
}

/// Appends a radial measurement; windows whose rings carry spurious
/// azimuthal structure are flagged.
inline void append_radial(MtfCurve& curve, const RadialMtf& m) {
    curve.frequencies.push_back(m.n_lines);
    std::vector<double> mods;
    std::vector<bool> flags;
    for (const auto& w : m.windows) {
        mods.push_back(w.modulation);
        flags.push_back(!w.azimuthal.ok);
    }
    curve.by_radius.push_back(mods);
    curve.aliased.push_back(flags);
    curve.modulation.push_back(median(mods));
}

/// RMS difference between a reconstruction and a reference function of
/// cylindrical coordinates, evaluated by interpolation at the central height
/// over a polar sampling of n_theta x n_r points with r in [r_min, r_max].
template <typename T, typename F>
double central_rmse(const CylVolume<T>& vol, F&& truth, double r_min, double r_max, int n_theta, int n_r) {
    double sq = 0.0;
    std::size_t n = 0;
    for (int ir = 0; ir < n_r; ++ir) {
        double r = r_min + (ir + 0.5) * (r_max - r_min) / n_r;
        for (int it = 0; it < n_theta; ++it) {
            CylCoord c{r, (it + 0.5) * 2.0 * pi / n_theta, 0.0};
            double d = sample(vol, c) - truth(c);
            sq += d * d;
            ++n;
        }
    }
    return std::sqrt(sq / static_cast<double>(n));
}

} // namespace cyltomo
