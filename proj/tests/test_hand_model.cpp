#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "dvq/errors.hpp"
#include "dvq/hand_model.hpp"

using namespace dvq;
using namespace dvq::hand;

namespace {

HandParams random_params(std::mt19937_64& rng, double scale = 0.3) {
    std::uniform_real_distribution<double> u(-scale, scale);
    HandParams p;
    for (int i = 0; i < kShapeDim; ++i) p.shape[i] = u(rng);
    for (int i = 0; i < kPoseDim; ++i) p.pose[i] = u(rng);
    for (int i = 0; i < 3; ++i) {
        p.rotation[i] = u(rng);
        p.translation[i] = 0.1 * u(rng);
    }
    return p;
}

}  // namespace

TEST_CASE("identity parameters reproduce the rest pose exactly") {
    auto tmpl = procedural_template(60);
    HandMesh m = forward_kinematics(HandParams{}, tmpl);
    CHECK((m.vertices - tmpl.vertices0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m.joints - tmpl.joints0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("translation equivariance") {
    auto tmpl = procedural_template(60);
    std::mt19937_64 rng(3);
    HandParams p = random_params(rng);
    HandParams q = p;
    Eigen::Vector3d delta(0.03, -0.02, 0.05);
    q.translation += delta;
    HandMesh a = forward_kinematics(p, tmpl);
    HandMesh b = forward_kinematics(q, tmpl);
    CHECK(((b.vertices - a.vertices).rowwise() - delta.transpose()).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("fk jacobian matches central finite differences") {
    auto tmpl = procedural_template(60);
    std::mt19937_64 rng(17);
    const double h = 1e-5;
    for (int draw = 0; draw < 10; ++draw) {
        HandParams p = random_params(rng);
        FkResult fk = forward_kinematics_with_jacobian(p, tmpl);
        // Gradient of the mean vertex z-coordinate w.r.t. every parameter.
        Eigen::VectorXd analytic = Eigen::VectorXd::Zero(kParamDim);
        const int v = tmpl.vertex_count();
        for (int i = 0; i < v; ++i) analytic += fk.vertex_jacobian.row(3 * i + 2).transpose() / v;
        Eigen::VectorXd base = p.to_vector();
        for (int k = 0; k < kParamDim; ++k) {
            Eigen::VectorXd vp = base, vm = base;
            vp[k] += h;
            vm[k] -= h;
            double fp = forward_kinematics(HandParams::from_vector(vp), tmpl).vertices.col(2).mean();
            double fm = forward_kinematics(HandParams::from_vector(vm), tmpl).vertices.col(2).mean();
            double fd = (fp - fm) / (2.0 * h);
            double denom = std::max(std::abs(fd), 1e-6);
            CHECK(std::abs(analytic[k] - fd) / denom < 1e-4);
        }
    }
}

TEST_CASE("rigid motion preserves pairwise distances") {
    auto tmpl = procedural_template(60);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    HandParams p;
    for (int i = 0; i < 3; ++i) {
        p.rotation[i] = u(rng);
        p.translation[i] = 0.2 * u(rng);
    }
    HandMesh rest = forward_kinematics(HandParams{}, tmpl);
    HandMesh moved = forward_kinematics(p, tmpl);
    for (int i = 0; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j) {
            double d0 = (rest.vertices.row(7 * i) - rest.vertices.row(7 * j)).norm();
            double d1 = (moved.vertices.row(7 * i) - moved.vertices.row(7 * j)).norm();
            CHECK(std::abs(d0 - d1) < 1e-6);
        }
}

TEST_CASE("non-finite parameters are rejected") {
    auto tmpl = procedural_template(60);
    HandParams p;
    p.pose[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward_kinematics(p, tmpl), InvalidParameterError);
}

TEST_CASE("partition properties") {
    for (int v : {12, 60, 778}) {
        auto tmpl = procedural_template(v);
        size_t total = 0;
        for (const auto& part : tmpl.part_partition) total += part.size();
        CHECK(total == static_cast<size_t>(v));
    }
    // 12 vertices, 2 per part.
    auto toy = procedural_template(12);
    for (const auto& part : toy.part_partition) CHECK(part.size() == 2);
}

TEST_CASE("partition is index-stable under posing") {
    auto tmpl = procedural_template(60);
    std::mt19937_64 rng(31);
    HandParams p = random_params(rng);
    HandMesh posed = forward_kinematics(p, tmpl);
    auto parts = partition_vertices(posed, tmpl);
    for (int part = 0; part < kNumParts; ++part) {
        const auto& idx = tmpl.part_partition[static_cast<size_t>(part)];
        for (size_t i = 0; i < idx.size(); ++i)
            CHECK((parts[static_cast<size_t>(part)].row(static_cast<int>(i)) -
                   posed.vertices.row(idx[i]))
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
    }
}

TEST_CASE("partition rejects topology mismatch") {
    auto tmpl = procedural_template(60);
    HandMesh m = forward_kinematics(HandParams{}, tmpl);
    m.vertices.conservativeResize(30, 3);
    CHECK_THROWS_AS(partition_vertices(m, tmpl), TopologyError);
}

TEST_CASE("joint angles") {
    auto tmpl = procedural_template(60);

    SUBCASE("collinear gives pi, right angle gives pi/2") {
        Eigen::MatrixXd joints = tmpl.joints0;
        auto tr = tmpl.angle_triplets[0];
        joints.row(tr[0]) << 0, 0, 0;
        joints.row(tr[1]) << 1, 0, 0;
        joints.row(tr[2]) << 2, 0, 0;
        Eigen::VectorXd a = joint_angles(joints, tmpl);
        CHECK(a[0] == doctest::Approx(M_PI).epsilon(1e-3));
        joints.row(tr[0]) << 0, 1, 0;
        joints.row(tr[1]) << 0, 0, 0;
        joints.row(tr[2]) << 1, 0, 0;
        a = joint_angles(joints, tmpl);
        CHECK(a[0] == doctest::Approx(M_PI / 2).epsilon(1e-9));
    }

    SUBCASE("matches an independent scalar evaluation and stays in [0,pi]") {
        std::mt19937_64 rng(41);
        std::normal_distribution<double> n(0.0, 0.05);
        Eigen::MatrixXd joints(kNumJoints, 3);
        for (int i = 0; i < joints.size(); ++i) joints(i / 3, i % 3) = n(rng);
        Eigen::VectorXd a = joint_angles(joints, tmpl);
        for (int k = 0; k < a.size(); ++k) {
            const auto& tr = tmpl.angle_triplets[static_cast<size_t>(k)];
            Eigen::Vector3d u = (joints.row(tr[0]) - joints.row(tr[1])).transpose();
            Eigen::Vector3d w = (joints.row(tr[2]) - joints.row(tr[1])).transpose();
            double c = u.dot(w) / (u.norm() * w.norm());
            c = std::clamp(c, -1.0 + 1e-7, 1.0 - 1e-7);
            CHECK(a[k] == doctest::Approx(std::acos(c)).epsilon(1e-12));
            CHECK(a[k] >= 0.0);
            CHECK(a[k] <= M_PI);
        }
    }

    SUBCASE("degenerate bone throws") {
        Eigen::MatrixXd joints = tmpl.joints0;
        auto tr = tmpl.angle_triplets[0];
        joints.row(tr[0]) = joints.row(tr[1]);
        CHECK_THROWS_AS(joint_angles(joints, tmpl), DegenerateBoneError);
    }

    SUBCASE("jacobian matches finite differences") {
        std::mt19937_64 rng(43);
        std::normal_distribution<double> n(0.0, 0.05);
        Eigen::MatrixXd joints(kNumJoints, 3);
        for (int i = 0; i < joints.size(); ++i) joints(i / 3, i % 3) = n(rng);
        Eigen::MatrixXd jac;
        Eigen::VectorXd a0 = joint_angles_with_jacobian(joints, tmpl, jac);
        const double h = 1e-6;
        for (int j = 0; j < kNumJoints; ++j)
            for (int c = 0; c < 3; ++c) {
                Eigen::MatrixXd jp = joints, jm = joints;
                jp(j, c) += h;
                jm(j, c) -= h;
                Eigen::VectorXd ap = joint_angles(jp, tmpl);
                Eigen::VectorXd am = joint_angles(jm, tmpl);
                for (int k = 0; k < a0.size(); ++k) {
                    double fd = (ap[k] - am[k]) / (2.0 * h);
                    CHECK(std::abs(jac(k, 3 * j + c) - fd) < 1e-5 * (1.0 + std::abs(fd)));
                }
            }
    }
}

TEST_CASE("center_vertices") {
    Eigen::MatrixXd one(1, 3);
    one << 1, 2, 3;
    auto [c1, m1] = center_vertices(one);
    CHECK(c1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(m1 == Eigen::Vector3d(1, 2, 3));

    Eigen::MatrixXd pair(2, 3);
    pair << 1, 0, 0, -1, 0, 0;
    auto [c2, m2] = center_vertices(pair);
    CHECK((c2 - pair).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m2.norm() == 0.0);

    std::mt19937_64 rng(51);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd cloud(40, 3);
    for (int i = 0; i < cloud.size(); ++i) cloud(i / 3, i % 3) = n(rng);
    auto [cc, mm] = center_vertices(cloud);
    CHECK(cc.colwise().mean().cwiseAbs().maxCoeff() < 1e-7);
    CHECK(((cc.rowwise() + mm.transpose()) - cloud).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("template archive round trip") {
    auto tmpl = procedural_template(60);
    auto path = std::filesystem::temp_directory_path() / "dvq_tmpl_test.bin";
    save_template(tmpl, path.string());
    auto back = load_template(path.string());
    CHECK(back.vertex_count() == tmpl.vertex_count());
    CHECK((back.vertices0.cast<float>() - tmpl.vertices0.cast<float>()).cwiseAbs().maxCoeff() ==
          0.0f);
    CHECK(back.faces == tmpl.faces);
    CHECK(back.part_partition == tmpl.part_partition);
    std::filesystem::remove(path);
}

TEST_CASE("full-size template has 778 vertices and a watertight look") {
    auto tmpl = procedural_template();
    CHECK(tmpl.vertex_count() == 778);
    CHECK(tmpl.face_count() > 0);
    CHECK(tmpl.contact_candidates.size() > 10);
}

TEST_CASE("mano parameter import") {
    auto path = std::filesystem::temp_directory_path() / "dvq_mano_test.bin";
    {
        std::ofstream os(path, std::ios::binary);
        for (int g = 0; g < 2; ++g)
            for (int i = 0; i < kParamDim; ++i) {
                float f = static_cast<float>(g + i * 0.01);
                os.write(reinterpret_cast<const char*>(&f), sizeof(float));
            }
    }
    auto params = import_mano_params(path.string());
    CHECK(params.size() == 2);
    CHECK(params[1].shape[0] == doctest::Approx(1.0));
    CHECK(params[0].translation[0] == doctest::Approx(0.55));
    std::filesystem::remove(path);
}
