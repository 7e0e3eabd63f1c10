#include "support.hpp"

using namespace cyltomo;
using namespace testing_support;

namespace {

// elementary rotations written out entry by entry
Mat3 ez(double a) {
    Mat3 m;
    m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return m;
}
Mat3 ex(double a) {
    Mat3 m;
    m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return m;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST(EulerToMatrix, ZeroAnglesGiveIdentity) {
    EXPECT_LT(max_abs(euler_to_matrix({}) - Mat3::Identity()), 1e-15);
}

TEST(EulerToMatrix, ZeroBetaCollapsesToOneZRotation) {
    Pose p;
    p.alpha = 0.4;
    p.gamma = -1.3;
    EXPECT_LT(max_abs(euler_to_matrix(p) - ez(0.4 - 1.3)), 1e-14);
}

TEST(EulerToMatrix, MatchesAngleAxisComposition) {
    Pose p;
    p.alpha = 0.3;
    p.beta = 0.7;
    p.gamma = -1.1;
    Mat3 ref = (Eigen::AngleAxisd(0.3, Vec3::UnitZ()) * Eigen::AngleAxisd(0.7, Vec3::UnitX()) *
                Eigen::AngleAxisd(-1.1, Vec3::UnitZ()))
                   .toRotationMatrix();
    EXPECT_LT(max_abs(euler_to_matrix(p) - ref), 1e-14);
    EXPECT_LT(max_abs(euler_to_matrix(p) - ez(0.3) * ex(0.7) * ez(-1.1)), 1e-14);
}

TEST(EulerToMatrix, OrthonormalForRandomAngles) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 1000; ++k) {
        Mat3 r = euler_to_matrix(random_pose(rng));
        EXPECT_LT(max_abs(r.transpose() * r - Mat3::Identity()), 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    }
}

TEST(Canonical, SameRotationInCanonicalRange) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> wide(-10.0, 10.0);
    for (int k = 0; k < 500; ++k) {
        Pose p;
        p.alpha = wide(rng);
        p.beta = wide(rng);
        p.gamma = wide(rng);
        Pose c = canonical(p);
        EXPECT_GE(c.beta, 0.0);
        EXPECT_LE(c.beta, pi);
        EXPECT_GT(c.alpha, -pi - 1e-15);
        EXPECT_LE(c.alpha, pi);
        EXPECT_GT(c.gamma, -pi - 1e-15);
        EXPECT_LE(c.gamma, pi);
        EXPECT_LT(max_abs(euler_to_matrix(c) - euler_to_matrix(p)), 1e-12);
    }
}

TEST(WrapAngle, RangeIsHalfOpen) {
    EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
    EXPECT_DOUBLE_EQ(wrap_angle(-pi), pi);
    EXPECT_NEAR(wrap_angle(3 * pi / 2), -pi / 2, 1e-15);
}

TEST(AlignPoint, Examples) {
    Vec3 x(1, 2, 3);
    EXPECT_EQ(align_point({}, x), x);
    Pose shift;
    shift.t = Vec3(1, 0, 0);
    EXPECT_EQ(align_point(shift, Vec3::Zero()), Vec3(1, 0, 0));
}

TEST(AlignPoint, InverseRoundTrip) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int k = 0; k < 1000; ++k) {
        Pose p = random_pose(rng);
        Vec3 x(u(rng), u(rng), u(rng));
        EXPECT_LT((inverse_align_point(p, align_point(p, x)) - x).norm(), 1e-12 * (1 + x.norm()));
        Alignment a(p);
        EXPECT_LT((a.to_object(a.to_world(x)) - x).norm(), 1e-12 * (1 + x.norm()));
    }
}

TEST(ProjectPoint, OriginHitsPrincipalPoint) {
    ScanGeometry g = small_geometry(5);
    g.u0 = 10.25;
    g.v0 = 7.5;
    for (std::size_t i = 0; i < g.num_views(); ++i) {
        auto d = project_point(g, i, Vec3::Zero());
        EXPECT_DOUBLE_EQ(d.u, 10.25);
        EXPECT_DOUBLE_EQ(d.v, 7.5);
    }
}

TEST(ProjectPoint, MagnificationAlongX) {
    ScanGeometry g = small_geometry(1);
    double a = 3.0;
    auto d = project_point(g, 0, Vec3(a, 0, 0));
    EXPECT_NEAR(d.u, g.u0 + a * (g.sdd / g.sod) / g.pixel_pitch, 1e-12);
    EXPECT_NEAR(d.v, g.v0, 1e-12);
}

TEST(ProjectPoint, InlineScannerMagnification) {
    ScanGeometry g = inline_scan_geometry();
    EXPECT_DOUBLE_EQ(g.sdd, 791.0);
    EXPECT_DOUBLE_EQ(g.sod, 679.0);
    EXPECT_NEAR(g.magnification(), 791.0 / 679.0, 1e-15);
    auto d = project_point(g, 0, Vec3(1.0, 0, 0));
    EXPECT_NEAR((d.u - g.u0) * g.pixel_pitch, 791.0 / 679.0, 1e-12);
}

TEST(ProjectPoint, InvariantUnderFullStageTurn) {
    ScanGeometry g = small_geometry(7);
    ScanGeometry h = g;
    for (auto& a : h.stage_angles)
        a += 2.0 * pi;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int k = 0; k < 100; ++k) {
        Vec3 x(u(rng), u(rng), u(rng));
        for (std::size_t i = 0; i < g.num_views(); ++i) {
            auto a = project_point(g, i, x), b = project_point(h, i, x);
            EXPECT_NEAR(a.u, b.u, 1e-9);
            EXPECT_NEAR(a.v, b.v, 1e-9);
        }
    }
}

TEST(ProjectPoint, PointInSourcePlaneIsDegenerate) {
    ScanGeometry g = small_geometry(1);
    EXPECT_THROW(project_point(g, 0, Vec3(5, -g.sod, 0)), DegenerateRay);
    EXPECT_THROW(project_point(g, 0, Vec3(0, -2 * g.sod, 0)), DegenerateRay);
    EXPECT_THROW(project_point_jacobian(g, 0, Vec3(0, -g.sod, 1)), DegenerateRay);
}

TEST(ProjectPoint, IsTheInverseOfPixelRay) {
    ScanGeometry g = small_geometry(6);
    for (std::size_t i = 0; i < g.num_views(); ++i) {
        Ray r = pixel_ray(g, i, 3.7, 21.2);
        EXPECT_NEAR(r.direction.norm(), 1.0, 1e-14);
        for (double s : {0.3, 0.5, 0.8}) {
            auto d = project_point(g, i, r.origin + s * r.length * r.direction);
            EXPECT_NEAR(d.u, 3.7, 1e-9);
            EXPECT_NEAR(d.v, 21.2, 1e-9);
        }
        EXPECT_LT((r.origin - source_position(g, i)).norm(), 1e-12);
    }
}

TEST(ProjectPointJacobian, OnAxisLinearization) {
    ScanGeometry g = small_geometry(1);
    Mat23 j = project_point_jacobian(g, 0, Vec3::Zero());
    double m = g.sdd / g.sod / g.pixel_pitch;
    EXPECT_NEAR(j(0, 0), m, 1e-12);
    EXPECT_NEAR(j(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(j(0, 2), 0.0, 1e-12);
    EXPECT_NEAR(j(1, 0), 0.0, 1e-12);
    EXPECT_NEAR(j(1, 1), 0.0, 1e-12);
    EXPECT_NEAR(j(1, 2), m, 1e-12);
}

TEST(ProjectPointJacobian, MatchesCentralDifferences) {
    ScanGeometry g = inline_scan_geometry();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    const double h = 1e-4;
    for (int k = 0; k < 200; ++k) {
        Vec3 x(u(rng), u(rng), u(rng));
        std::size_t i = k % g.num_views();
        Mat23 j = project_point_jacobian(g, i, x);
        for (int c = 0; c < 3; ++c) {
            Vec3 e = Vec3::Zero();
            e(c) = h;
            auto p = project_point(g, i, x + e), m = project_point(g, i, x - e);
            double du = (p.u - m.u) / (2 * h), dv = (p.v - m.v) / (2 * h);
            double scale = j.cwiseAbs().maxCoeff();
            EXPECT_NEAR(j(0, c), du, 1e-5 * scale);
            EXPECT_NEAR(j(1, c), dv, 1e-5 * scale);
        }
    }
}

TEST(ProjectPointJacobian, ChainRuleThroughStageRotation) {
    ScanGeometry g = small_geometry(1);
    ScanGeometry q = g;
    q.stage_angles = {pi / 2};
    Vec3 x(1.5, -2.0, 0.7);
    Vec3 xs = rot_z(pi / 2) * x;
    Mat23 lhs = project_point_jacobian(q, 0, x);
    Mat23 rhs = project_point_jacobian(g, 0, xs) * rot_z(pi / 2);
    EXPECT_LT(max_abs(lhs - rhs), 1e-12);
}

TEST(CircularTrajectory, InclusiveEndpoints) {
    auto a = make_circular_trajectory(21, 200.0 * pi / 180.0);
    ASSERT_EQ(a.size(), 21u);
    for (int k = 0; k < 21; ++k)
        EXPECT_NEAR(a[k], 10.0 * k * pi / 180.0, 1e-14);
    EXPECT_EQ(make_circular_trajectory(1, 3.0), std::vector<double>{0.0});
    auto b = make_circular_trajectory(3, pi);
    EXPECT_NEAR(b[1], pi / 2, 1e-15);
    EXPECT_NEAR(b[2], pi, 1e-15);
}

TEST(ScanGeometry, ValidateRejectsBadLayouts) {
    ScanGeometry g = small_geometry(1);
    EXPECT_NO_THROW(g.validate());
    auto bad = g;
    bad.sdd = bad.sod;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = g;
    bad.pixel_pitch = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = g;
    bad.stage_angles.clear();
    EXPECT_THROW(bad.validate(), ConfigError);
    EXPECT_GT(g.magnification(), 1.0);
}
