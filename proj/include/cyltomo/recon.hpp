#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <type_traits>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "phantom.hpp"
#include "projector.hpp"

namespace cyltomo {

enum class ViewOrder { acquisition, permuted };

struct SartConfig {
    double relaxation = 1.0;
    int n_iterations = 1; // full passes over all views
    ViewOrder order = ViewOrder::acquisition;
    std::uint64_t seed = 0; // permutation seed for ViewOrder::permuted
    bool nonnegativity = true;
    bool resample_initial = true;
    double skip_fraction = 1e-6; // rays with row sum <= skip_fraction * max are skipped
    RaySamplingConfig sampling;

    void validate() const {
        if (!(relaxation > 0.0) || relaxation > 2.0)
            throw ConfigError("sart: relaxation must lie in (0, 2]");
        if (n_iterations < 1)
            throw ConfigError("sart: n_iterations must be >= 1");
    }
};

struct ReconReport {
    /// Per pass: sqrt of the summed squared residual of every view, each view
    /// measured just before its own update.
    std::vector<double> residuals;
    double wall_seconds = 0.0;
    SartConfig config;
};

/// Visit order of the views for one run.
inline std::vector<std::size_t> view_order(std::size_t n_views, const SartConfig& cfg) {
    std::vector<std::size_t> order(n_views);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.order == ViewOrder::permuted) {
        std::mt19937_64 rng(cfg.seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    return order;
}

/// One SART solver state: the volume being refined, an optional per-voxel
/// weight map, and cached voxel centers for the back-projection.
template <typename Volume>
class Sart {
  public:
    using value_type = typename Volume::value_type;

    Sart(Volume initial, SartConfig cfg, std::span<const float> weights = {})
        : vol_(std::move(initial)), cfg_(cfg), centers_(voxel_world_centers(vol_.grid)), acc_(vol_.grid.size()) {
        cfg_.validate();
        cfg_.sampling = resolve_sampling(cfg_.sampling, vol_.grid);
        if (!weights.empty()) {
            if (weights.size() != vol_.grid.size())
                throw ConfigError("sart: weight map does not match the grid");
            weights_.assign(weights.begin(), weights.end());
        }
    }

    const Volume& volume() const { return vol_; }
    Volume& volume() { return vol_; }
    const SartConfig& config() const { return cfg_; }

    /// Applies the update of view i and returns the squared residual of that
    /// view before the update.
    template <typename P>
    double update_view(const ProjectionSet<P>& ps, std::size_t i) {
        if (ps.kind != ProjectionKind::line_integral)
            throw ConfigError("sart: projections must be line integrals");
        const Image<P>& measured = ps.images.at(i);
        ViewProjection sim = forward_project_view(vol_, ps.geom, i, cfg_.sampling);

        double max_row = *std::max_element(sim.row_sum.data.begin(), sim.row_sum.data.end());
        if (!(max_row > 0.0))
            throw EmptyView("sart: no ray of view " + std::to_string(i) + " crosses the volume");
        const double eps = cfg_.skip_fraction * max_row;

        CorrectionImage corr{Image<double>(measured.rows, measured.cols), {}};
        corr.valid.assign(corr.value.size(), 0);
        double sq = 0.0;
        for (std::size_t k = 0; k < corr.value.size(); ++k) {
            double rs = sim.row_sum.data[k];
            if (rs <= eps)
                continue;
            double diff = static_cast<double>(measured.data[k]) - sim.line_integral.data[k];
            sq += diff * diff;
            corr.value.data[k] = diff / rs;
            corr.valid[k] = 1;
        }

        acc_.reset();
        back_project(corr, ps.geom, i, centers_, acc_);

        const double lambda = cfg_.relaxation;
        for (std::size_t m = 0; m < vol_.mu.size(); ++m) {
            double den = acc_.denominator[m];
            if (den <= 0.0)
                continue;
            double w = weights_.empty() ? 1.0 : static_cast<double>(weights_[m]);
            if (w == 0.0)
                continue;
            double next = static_cast<double>(vol_.mu[m]) + lambda * w * (acc_.numerator[m] / den);
            if (cfg_.nonnegativity && next < 0.0)
                next = 0.0;
            vol_.mu[m] = static_cast<value_type>(next);
        }
        return sq;
    }

    template <typename P>
    ReconReport run(const ProjectionSet<P>& ps) {
        ps.validate();
        auto t0 = std::chrono::steady_clock::now();
        ReconReport report;
        report.config = cfg_;
        auto order = view_order(ps.num_views(), cfg_);
        for (int pass = 0; pass < cfg_.n_iterations; ++pass) {
            double sq = 0.0;
            for (std::size_t i : order)
                sq += update_view(ps, i);
            report.residuals.push_back(std::sqrt(sq));
        }
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return report;
    }

  private:
    Volume vol_;
    SartConfig cfg_;
    std::vector<Vec3> centers_;
    BackprojectionAccumulator acc_;
    std::vector<float> weights_;
};

/// Single-view SART update of vol, returned as a new volume.
template <typename Volume, typename P>
Volume sart_update_view(const Volume& vol, const ProjectionSet<P>& ps, std::size_t i, const SartConfig& cfg,
                        std::span<const float> weights = {}) {
    Sart<Volume> engine(vol, cfg, weights);
    engine.update_view(ps, i);
    return std::move(engine.volume());
}

template <typename Volume>
struct SartResult {
    Volume volume;
    ReconReport report;
};

namespace detail {
template <typename T>
CylVolume<T> prepare_initial(const CylGrid& grid, const CylVolume<T>* init, bool resample) {
    if (!init)
        return CylVolume<T>(grid);
    if (init->grid.same_shape(grid)) {
        CylVolume<T> v = *init;
        v.grid = grid; // templates live in object coordinates; adopt this scan's pose
        return v;
    }
    if (!resample)
        throw ConfigError("sart: initial volume shape differs from the grid");
    return resample_cyl_to_cyl(*init, grid);
}

template <typename T>
CartVolume<T> prepare_initial(const CartGrid& grid, const CartVolume<T>* init, bool) {
    if (!init)
        return CartVolume<T>(grid);
    if (init->grid.n_x != grid.n_x || init->grid.n_y != grid.n_y || init->grid.n_z != grid.n_z)
        throw ConfigError("sart: initial volume shape differs from the grid");
    CartVolume<T> v = *init;
    v.grid = grid;
    return v;
}
} // namespace detail

/// Full reconstruction on grid (whose pose carries the object alignment),
/// starting from an empty volume or from an object-aligned template.
template <typename T = float, typename Grid, typename P>
auto sart_run(const ProjectionSet<P>& ps, const Grid& grid, const SartConfig& cfg,
              const std::conditional_t<std::is_same_v<Grid, CylGrid>, CylVolume<T>, CartVolume<T>>* initial = nullptr,
              std::span<const float> weights = {}) {
    using Volume = std::conditional_t<std::is_same_v<Grid, CylGrid>, CylVolume<T>, CartVolume<T>>;
    grid.validate();
    Sart<Volume> engine(detail::prepare_initial(grid, initial, cfg.resample_initial), cfg, weights);
    ReconReport report = engine.run(ps);
    return SartResult<Volume>{std::move(engine.volume()), std::move(report)};
}

/// Mean attenuation over the voxels whose centers fall in roi.
template <typename T>
double presence_metric(const CylVolume<T>& vol, const CylRegion& roi) {
    const CylGrid& g = vol.grid;
    double sum = 0.0;
    std::size_t n = 0;
    for (int ih = 0; ih < g.n_h; ++ih)
        for (int it = 0; it < g.n_theta; ++it)
            for (int ir = 0; ir < g.n_r; ++ir)
                if (roi.contains(g.center(ih, it, ir))) {
                    sum += vol.at(ih, it, ir);
                    ++n;
                }
    if (n == 0)
        throw EmptyRoi("presence metric: no voxel center inside the region");
    return sum / static_cast<double>(n);
}

/// |mean_a - mean_b| / pooled standard deviation.
inline double standardized_gap(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw ConfigError("standardized gap needs at least two samples per group");
    auto stats = [](std::span<const double> x) {
        double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
        double ss = 0.0;
        for (double v : x)
            ss += (v - m) * (v - m);
        return std::pair{m, ss};
    };
    auto [ma, ssa] = stats(a);
    auto [mb, ssb] = stats(b);
    double pooled = std::sqrt((ssa + ssb) / static_cast<double>(a.size() + b.size() - 2));
    if (!(pooled > 0.0))
        return std::abs(ma - mb) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return std::abs(ma - mb) / pooled;
}

} // namespace cyltomo
