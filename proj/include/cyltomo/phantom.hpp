#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace cyltomo {

enum class LineDirection { azimuthal, radial };

/// Cosine line pattern on a cylinder: spokes along theta (azimuthal) or
/// concentric rings along r (radial).
struct LinePhantomSpec {
    LineDirection direction = LineDirection::azimuthal;
    int n_lines = 1;
    std::array<int, 3> shape{32, 1608, 256}; // (h, theta, r)
    double amplitude = 1.0;
    double radius = 32.0;
    double height = 16.0;

    CylGrid grid() const {
        CylGrid g;
        g.n_h = shape[0];
        g.n_theta = shape[1];
        g.n_r = shape[2];
        g.radius = radius;
        g.height = height;
        return g;
    }

    void validate() const {
        if (n_lines < 1)
            throw ConfigError("line phantom: n_lines must be >= 1");
        if (!(amplitude > 0.0))
            throw ConfigError("line phantom: amplitude must be positive");
        grid().validate();
    }
};

inline LinePhantomSpec paper_line_phantom(LineDirection d, int n_lines) {
    LinePhantomSpec s;
    s.direction = d;
    s.n_lines = n_lines;
    return s;
}

/// Quarter-scale preset of the full phantom for quick runs.
inline LinePhantomSpec desk_line_phantom(LineDirection d, int n_lines) {
    LinePhantomSpec s;
    s.direction = d;
    s.n_lines = n_lines;
    s.shape = {16, 402, 64};
    s.radius = 16.0;
    s.height = 8.0;
    return s;
}

/// Frequency sweep 1, 2, 4, ... up to n_r / 2.
inline std::vector<int> line_frequency_sweep(int n_r) {
    std::vector<int> f;
    for (int n = 1; n <= n_r / 2; n *= 2)
        f.push_back(n);
    return f;
}

/// Continuous raised-cosine model; zero outside the cylinder.
inline double line_phantom_value(const LinePhantomSpec& s, const CylCoord& c) {
    if (c.r > s.radius || std::abs(c.h) > 0.5 * s.height)
        return 0.0;
    double phase = s.direction == LineDirection::azimuthal ? s.n_lines * c.theta
                                                           : 2.0 * pi * s.n_lines * c.r / s.radius;
    return s.amplitude * 0.5 * (1.0 + std::cos(phase));
}

inline CylVolume<float> make_line_phantom(const LinePhantomSpec& s) {
    s.validate();
    CylVolume<float> vol(s.grid());
    const CylGrid& g = vol.grid;
    for (int ih = 0; ih < g.n_h; ++ih)
        for (int it = 0; it < g.n_theta; ++it)
            for (int ir = 0; ir < g.n_r; ++ir)
                vol.at(ih, it, ir) = static_cast<float>(line_phantom_value(s, g.center(ih, it, ir)));
    return vol;
}

inline CylVolume<float> make_azimuthal_line_phantom(LinePhantomSpec s) {
    s.direction = LineDirection::azimuthal;
    return make_line_phantom(s);
}

inline CylVolume<float> make_radial_line_phantom(LinePhantomSpec s) {
    s.direction = LineDirection::radial;
    return make_line_phantom(s);
}

/// Annular sector in object cylindrical coordinates. The theta range starts
/// at theta_min and spans theta_span radians (>= 2pi means the full circle).
struct CylRegion {
    double r_min = 0.0, r_max = 0.0;
    double theta_min = 0.0, theta_span = 2.0 * pi;
    double h_min = 0.0, h_max = 0.0;

    bool contains(const CylCoord& c) const {
        if (c.r < r_min || c.r > r_max || c.h < h_min || c.h > h_max)
            return false;
        if (theta_span >= 2.0 * pi)
            return true;
        return normalize_theta(c.theta - theta_min) <= theta_span;
    }

    bool valid() const { return r_min >= 0.0 && r_max >= r_min && h_max >= h_min && theta_span > 0.0; }
};

struct ComponentSpec {
    std::string label;
    CylRegion region;
    double mu = 0.0;
    bool present = true;
};

/// Rasterizes components at voxel centers, later entries overwriting earlier
/// ones. If overlaps is given it receives the number of voxels written twice.
inline CylVolume<float> make_assembly_phantom(const std::vector<ComponentSpec>& components, const CylGrid& grid,
                                              std::size_t* overlaps = nullptr) {
    grid.validate();
    for (const auto& c : components)
        if (!c.region.valid() || c.mu < 0.0)
            throw ConfigError("component '" + c.label + "': invalid region or negative mu");
    CylVolume<float> vol(grid);
    std::vector<unsigned char> written(grid.size(), 0);
    std::size_t overlap = 0;
    for (const auto& comp : components) {
        if (!comp.present)
            continue;
        for (int ih = 0; ih < grid.n_h; ++ih)
            for (int it = 0; it < grid.n_theta; ++it)
                for (int ir = 0; ir < grid.n_r; ++ir) {
                    if (!comp.region.contains(grid.center(ih, it, ir)))
                        continue;
                    std::size_t idx = grid.index(ih, it, ir);
                    overlap += written[idx];
                    written[idx] = 1;
                    vol.mu[idx] = static_cast<float>(comp.mu);
                }
    }
    if (overlaps)
        *overlaps = overlap;
    return vol;
}

struct WeightRegion {
    CylRegion region;
    double weight = 1.0;
};

/// Per-voxel change likelihood in [0, 1]; later regions overwrite earlier ones.
inline CylVolume<float> make_weight_map(const std::vector<WeightRegion>& regions, const CylGrid& grid,
                                        double default_weight = 1.0) {
    grid.validate();
    auto in_unit = [](double w) { return w >= 0.0 && w <= 1.0; };
    if (!in_unit(default_weight))
        throw ConfigError("weight map: default weight must lie in [0, 1]");
    for (const auto& r : regions)
        if (!in_unit(r.weight) || !r.region.valid())
            throw ConfigError("weight map: region weight must lie in [0, 1]");
    CylVolume<float> w(grid, static_cast<float>(default_weight));
    for (int ih = 0; ih < grid.n_h; ++ih)
        for (int it = 0; it < grid.n_theta; ++it)
            for (int ir = 0; ir < grid.n_r; ++ir)
                for (const auto& r : regions)
                    if (r.region.contains(grid.center(ih, it, ir)))
                        w.at(ih, it, ir) = static_cast<float>(r.weight);
    return w;
}

} // namespace cyltomo
