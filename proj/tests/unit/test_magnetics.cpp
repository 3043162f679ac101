#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "magbot/errors.hpp"
#include "magbot/magnetics.hpp"

using namespace magbot;

namespace {

constexpr double kReferenceMoment = 5.164e-4;

double deg(double d) { return d * kPi / 180.0; }

}  // namespace

TEST(MagnetSpec, DefaultMomentMatchesReference) {
    const MagnetSpec spec = MagnetSpec::n40_sphere();
    EXPECT_NEAR(spec.volume(), 5.236e-10, 5e-14);
    // 986760 * 5.236e-10; the printed 5.164e-4 differs from this product by 0.05%.
    EXPECT_NEAR(magnetic_moment(spec), kReferenceMoment, kReferenceMoment * 1e-3);
}

TEST(MagnetSpec, ZeroMagnetizationGivesZeroMoment) {
    EXPECT_EQ(magnetic_moment({0.5e-3, 0.0}), 0.0);
}

TEST(MagnetSpec, MomentScalesWithRadiusCubed) {
    const double base = magnetic_moment({0.5e-3, 986760.0});
    const double big = magnetic_moment({1.0e-3, 986760.0});
    EXPECT_NEAR(big, 8.0 * base, 1e-15);
    EXPECT_NEAR(big, 4.131e-3, 4.131e-3 * 1e-3);
}

TEST(MagnetSpec, RejectsInvalidValues) {
    EXPECT_THROW(magnetic_moment({0.0, 986760.0}), InvalidSpecError);
    EXPECT_THROW(magnetic_moment({-1e-3, 986760.0}), InvalidSpecError);
    EXPECT_THROW(magnetic_moment({0.5e-3, -1.0}), InvalidSpecError);
}

TEST(Torque, PerpendicularMomentAndField) {
    const double tau = torque_on_dipole(Eigen::Vector2d(kReferenceMoment, 0.0), Eigen::Vector2d(0.0, 1.5e-3));
    EXPECT_NEAR(tau, 7.746e-7, 1e-10);
}

TEST(Torque, CollinearMomentGivesZero) {
    EXPECT_EQ(torque_on_dipole(Eigen::Vector2d(1e-4, 0.0), Eigen::Vector2d(2e-3, 0.0)), 0.0);
    EXPECT_EQ(torque_on_dipole(Eigen::Vector2d(1e-4, 0.0), Eigen::Vector2d(-2e-3, 0.0)), 0.0);
    EXPECT_TRUE(torque_on_dipole(Eigen::Vector3d(0, 0, 1e-4), Eigen::Vector3d(0, 0, -1e-3)).isZero());
}

TEST(Torque, Bilinear) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector3d m(n(rng), n(rng), n(rng));
        const Eigen::Vector3d b(n(rng), n(rng), n(rng));
        const double a = n(rng);
        const double c = n(rng);
        const Eigen::Vector3d lhs = torque_on_dipole(Eigen::Vector3d(a * m), Eigen::Vector3d(c * b));
        const Eigen::Vector3d rhs = a * c * torque_on_dipole(m, b);
        EXPECT_LT((lhs - rhs).norm(), 1e-12 * (1.0 + rhs.norm()));
    }
}

TEST(GradientForce, ZeroGradientGivesZeroForce) {
    EXPECT_TRUE(force_on_dipole(Eigen::Vector3d(kReferenceMoment, 0, 0), Eigen::Matrix3d::Zero()).isZero());
}

TEST(GradientForce, SingleEntry) {
    Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
    g(0, 0) = 0.1;
    const Eigen::Vector2d f = force_on_dipole(Eigen::Vector2d(kReferenceMoment, 0.0), g);
    EXPECT_NEAR(f.x(), 5.164e-5, 1e-12);
    EXPECT_EQ(f.y(), 0.0);
}

TEST(GradientForce, MatchesFiniteDifferenceOfPotential) {
    // Curl-free linear field plus an offset.
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    g(0, 0) = 0.07 - 0.03 / 2;
    g(1, 1) = -0.07 / 2 + 0.03;
    g(2, 2) = -(0.07 + 0.03) / 2;
    const Eigen::Vector3d b0(1.2e-3, -0.4e-3, 0.0);
    const Eigen::Vector3d m(3e-4, -2e-4, 1e-4);
    auto potential = [&](const Eigen::Vector3d& r) { return -m.dot(b0 + g * r); };
    const Eigen::Vector3d r0(2e-3, -5e-3, 0.0);
    const double h = 1e-6;
    Eigen::Vector3d fd;
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[k] = h;
        fd[k] = -(potential(r0 + e) - potential(r0 - e)) / (2 * h);
    }
    const Eigen::Vector3d f = force_on_dipole(m, g);
    EXPECT_LT((f - fd).norm(), 1e-9 * f.norm());
}

TEST(DipoleField, PerpendicularBisectorMatchesReference) {
    const Dipole src{Eigen::Vector3d::Zero(), Eigen::Vector3d(kReferenceMoment, 0, 0)};
    const double b32 = dipole_field(src, Eigen::Vector3d(0, 3.2e-3, 0)).norm();
    const double b16 = dipole_field(src, Eigen::Vector3d(0, 1.6e-3, 0)).norm();
    EXPECT_NEAR(b32, 1.58e-3, 1.58e-3 * 5e-3);
    EXPECT_NEAR(b16, 12.6e-3, 12.6e-3 * 5e-3);
    EXPECT_NEAR(b16 / b32, 8.0, 1e-12);
}

TEST(DipoleField, ZeroSeparationThrows) {
    const Dipole src{Eigen::Vector3d(1e-3, 0, 0), Eigen::Vector3d(1e-4, 0, 0)};
    EXPECT_THROW(dipole_field(src, src.position), SingularityError);
    EXPECT_THROW(dipole_pair_force(src, src), SingularityError);
    EXPECT_THROW(pair_interaction(1e-4, 1e-4, 0.0, 0.0), SingularityError);
}

TEST(DipoleField, DivergenceAndCurlVanish) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double magnet_radius = 0.5e-3;
    for (int i = 0; i < 200; ++i) {
        const Dipole src{Eigen::Vector3d(u(rng), u(rng), 0) * 5e-3,
                         Eigen::Vector3d(u(rng), u(rng), u(rng)) * kReferenceMoment};
        Eigen::Vector3d dir(u(rng), u(rng), u(rng));
        dir.normalize();
        const double dist = 2 * magnet_radius + (u(rng) + 1.0) * 10e-3;
        const Eigen::Vector3d p = src.position + dist * dir;
        const double h = dist * 1e-4;
        Eigen::Matrix3d jac;
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[k] = h;
            jac.col(k) = (dipole_field(src, p + e) - dipole_field(src, p - e)) / (2 * h);
        }
        const double scale = dipole_field(src, p).norm() / dist;
        const double div = jac.trace();
        const Eigen::Vector3d curl(jac(2, 1) - jac(1, 2), jac(0, 2) - jac(2, 0), jac(1, 0) - jac(0, 1));
        EXPECT_LT(std::abs(div), 1e-6 * scale);
        EXPECT_LT(curl.norm(), 1e-6 * scale);
    }
}

TEST(DipoleField, UniformSphereEqualsPointDipoleOutside) {
    // Brute-force volume-element sum over a uniformly magnetised sphere.
    const MagnetSpec spec = MagnetSpec::n40_sphere();
    const int n = 40;
    const double step = 2 * spec.radius / n;
    const Eigen::Vector3d dir(0.6, 0.8, 0.0);
    const Eigen::Vector3d probe(0.0, 2.0e-3, 0.0);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const Eigen::Vector3d c(-spec.radius + (i + 0.5) * step, -spec.radius + (j + 0.5) * step,
                                        -spec.radius + (k + 0.5) * step);
                if (c.norm() > spec.radius) continue;
                const double dv = step * step * step;
                sum += dipole_field({c, dir * spec.magnetization * dv}, probe);
            }
    const Eigen::Vector3d point = dipole_field({Eigen::Vector3d::Zero(), dir * spec.moment_magnitude()}, probe);
    // Voxelised volume differs from the true sphere by under a percent.
    EXPECT_LT((sum - point).norm(), 1e-2 * point.norm());
}

TEST(PairInteraction, MagicAngleZero) {
    const double theta = std::acos(1.0 / std::sqrt(3.0));
    EXPECT_NEAR(theta, deg(54.7356), 1e-5);
    const auto p = pair_interaction(kReferenceMoment, kReferenceMoment, 3e-3, theta);
    EXPECT_NEAR(p.radial_force, 0.0, 1e-15);
}

TEST(PairInteraction, HeadToTailIsAttractive) {
    const double r = 3.0e-3;
    const auto p = pair_interaction(kReferenceMoment, kReferenceMoment, r, 0.0);
    const double expected = -2.0 * 3.0 * kMu0 * kReferenceMoment * kReferenceMoment / (4.0 * kPi * std::pow(r, 4));
    EXPECT_NEAR(p.radial_force, expected, std::abs(expected) * 1e-12);
    EXPECT_LT(p.radial_force, 0.0);
    const double h = r * 1e-5;
    const double fd = -(pair_interaction(kReferenceMoment, kReferenceMoment, r + h, 0.0).energy -
                        pair_interaction(kReferenceMoment, kReferenceMoment, r - h, 0.0).energy) / (2 * h);
    EXPECT_NEAR(p.radial_force, fd, std::abs(fd) * 1e-6);
}

TEST(PairInteraction, SideBySideHasNoTangentialForce) {
    for (double r : {1e-3, 3e-3, 9e-3}) {
        const auto p = pair_interaction(kReferenceMoment, kReferenceMoment, r, kPi / 2);
        const double scale = pair_interaction(kReferenceMoment, kReferenceMoment, r, 0.0).radial_force;
        EXPECT_NEAR(p.tangential_force, 0.0, 1e-15 * std::abs(scale));
    }
}

TEST(PairInteraction, EnergyGradientConsistency) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ur(1e-3, 10e-3);
    std::uniform_real_distribution<double> ut(0.0, kPi);
    for (int i = 0; i < 100; ++i) {
        const double r = ur(rng);
        const double th = ut(rng);
        const double h = r * 1e-5;
        const auto p = pair_interaction(kReferenceMoment, kReferenceMoment, r, th);
        const double fd = -(pair_interaction(kReferenceMoment, kReferenceMoment, r + h, th).energy -
                            pair_interaction(kReferenceMoment, kReferenceMoment, r - h, th).energy) / (2 * h);
        EXPECT_LE(std::abs(p.radial_force - fd), 1e-6 * std::abs(p.radial_force) + 1e-20);
    }
}

TEST(PairInteraction, MagicAngleBracketing) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> um(1e-6, 1e-2);
    std::uniform_real_distribution<double> ur(1e-4, 1e-1);
    for (int i = 0; i < 200; ++i) {
        const double m1 = um(rng), m2 = um(rng), r = ur(rng);
        EXPECT_LT(pair_interaction(m1, m2, r, deg(54.6)).radial_force, 0.0);
        EXPECT_GT(pair_interaction(m1, m2, r, deg(54.9)).radial_force, 0.0);
    }
}

TEST(PairInteraction, VectorForceAgreesWithRadialDecomposition) {
    // Parallel moments at angle theta to the separation: radial part of the
    // vector force equals F_r.
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ut(0.0, kPi);
    for (int i = 0; i < 50; ++i) {
        const double th = ut(rng);
        const double r = 4e-3;
        const Eigen::Vector3d m(kReferenceMoment * std::cos(th), kReferenceMoment * std::sin(th), 0);
        const Dipole a{Eigen::Vector3d::Zero(), m};
        const Dipole b{Eigen::Vector3d(r, 0, 0), m};
        const Eigen::Vector3d f = dipole_pair_force(a, b);
        const auto p = pair_interaction(kReferenceMoment, kReferenceMoment, r, th);
        EXPECT_NEAR(f.x(), p.radial_force, 1e-12 * (std::abs(p.radial_force) + 1e-6));
        EXPECT_NEAR(std::abs(f.y()), std::abs(p.tangential_force), 1e-9);
    }
}

TEST(PairInteraction, VectorForceIsNegativeEnergyGradient) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const Dipole a{Eigen::Vector3d::Zero(), Eigen::Vector3d(n(rng), n(rng), n(rng)) * 1e-4};
        Dipole b{Eigen::Vector3d(n(rng), n(rng), 0).normalized() * 4e-3, Eigen::Vector3d(n(rng), n(rng), n(rng)) * 1e-4};
        const double h = 1e-8;
        Eigen::Vector3d fd;
        for (int k = 0; k < 3; ++k) {
            Dipole bp = b, bm = b;
            bp.position[k] += h;
            bm.position[k] -= h;
            fd[k] = -(dipole_pair_energy(a, bp) - dipole_pair_energy(a, bm)) / (2 * h);
        }
        const Eigen::Vector3d f = dipole_pair_force(a, b);
        EXPECT_LT((f - fd).norm(), 1e-6 * f.norm());
    }
}

TEST(RequiredField, ReferenceCases) {
    EXPECT_NEAR(required_field(ReconfigurationCase::ChainToGripper), 1.58e-3, 1.58e-3 * 5e-3);
    EXPECT_NEAR(required_field(ReconfigurationCase::ChainToSquare), 1.91e-3, 1.91e-3 * 5e-3);
    EXPECT_NEAR(required_field(ReconfigurationCase::Disassembly), 12.6e-3, 12.6e-3 * 5e-3);
}

TEST(RequiredField, MonotoneAndCubic) {
    double prev = required_field(0.5e-3);
    for (double d = 0.6e-3; d < 20e-3; d += 0.1e-3) {
        const double b = required_field(d);
        EXPECT_LT(b, prev);
        EXPECT_NEAR(required_field(2 * d), b / 8.0, b * 1e-14);
        prev = b;
    }
}

TEST(RequiredField, RejectsNonPositiveSeparation) {
    EXPECT_THROW(required_field(0.0), InvalidConfigurationError);
    EXPECT_THROW(required_field(-1e-3), InvalidConfigurationError);
}
