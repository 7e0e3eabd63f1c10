#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include <cyltomo/cyltomo.hpp>

namespace testing_support {

using namespace cyltomo;

/// Fresh, empty scratch directory per test.
inline std::filesystem::path scratch_dir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto p = std::filesystem::temp_directory_path() / "cyltomo_tests" /
             (std::string(info->test_suite_name()) + "." + info->name());
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline Pose random_pose(std::mt19937_64& rng, double max_shift = 10.0) {
    std::uniform_real_distribution<double> ang(-pi, pi), shift(-max_shift, max_shift);
    Pose p;
    p.alpha = ang(rng);
    p.beta = std::abs(ang(rng));
    p.gamma = ang(rng);
    p.t = Vec3(shift(rng), shift(rng), shift(rng));
    return p;
}

/// Small cone-beam layout with a centered principal point.
inline ScanGeometry small_geometry(std::size_t views = 8, int cols = 48, int rows = 32, double pitch = 0.5,
                                   double last_angle = 2.0 * pi * 7.0 / 8.0) {
    ScanGeometry g;
    g.sod = 100.0;
    g.sdd = 200.0;
    g.det_cols = cols;
    g.det_rows = rows;
    g.pixel_pitch = pitch;
    g.center_principal_point();
    g.stage_angles = make_circular_trajectory(views, last_angle);
    return g;
}

inline CylGrid cyl_grid(int n_h, int n_theta, int n_r, double radius, double height, const Pose& pose = {}) {
    CylGrid g;
    g.n_h = n_h;
    g.n_theta = n_theta;
    g.n_r = n_r;
    g.radius = radius;
    g.height = height;
    g.pose = pose;
    return g;
}

} // namespace testing_support
