#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <random>

#include "dvq/errors.hpp"
#include "dvq/metrics.hpp"

using namespace dvq;
using Eigen::MatrixXd;
using Eigen::Vector3d;

TEST_CASE("quality index reproduces every Table 1 row within 0.01") {
    struct Row {
        double pen, disp, quality;
    };
    // (penetration cm^3, displacement cm, printed quality index) for all
    // published method/dataset rows.
    const Row rows[] = {
        // HO-3D
        {7.23, 2.78, 4.12},
        {9.00, 2.65, 4.56},
        {6.53, 3.72, 4.57},
        {20.05, 4.14, 8.93},
        {5.36, 2.75, 3.54},
        // FPHA
        {7.46, 2.97, 4.32},
        {8.26, 2.75, 4.41},
        {10.43, 3.64, 5.68},
        {29.78, 5.47, 12.79},
        {4.58, 3.35, 3.72},
        // GRAB
        {3.54, 2.02, 2.48},
        {5.05, 1.74, 2.74},
        {10.56, 3.80, 5.83},
        {3.18, 2.13, 2.45},
        // Obman
        {4.32, 1.81, 2.57},
        {5.85, 2.06, 3.20},
        {10.53, 3.81, 5.83},
        {3.93, 2.70, 3.07},
    };
    const auto start = std::chrono::steady_clock::now();
    for (const Row& r : rows) {
        CHECK(std::abs(metrics::quality_index(r.pen, r.disp) - r.quality) <= 0.01);
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 1.0);

    // Convex-combination identity and error handling.
    for (double c : {0.0, 0.7, 3.14, 42.0}) {
        CHECK(metrics::quality_index(c, c) == doctest::Approx(c).epsilon(1e-12));
    }
    CHECK_THROWS_AS(metrics::quality_index(-1.0, 0.0), InvalidInputError);
}

TEST_CASE("contact ratio on constructed fixtures") {
    geom::TriMesh sphere = geom::make_sphere(0.03, 2);
    std::mt19937_64 rng(71);
    MatrixXd cloud = geom::sample_surface(sphere, 500, rng);

    MatrixXd touching(1, 3);
    touching = cloud.row(0);
    MatrixXd far_away(1, 3);
    far_away << 1.0, 1.0, 1.0;
    MatrixXd penetrating(1, 3);
    penetrating << 0.0, 0.0, 0.0;  // sphere center counts via the inside test

    metrics::GraspCase touch{touching, &sphere, &cloud};
    metrics::GraspCase miss{far_away, &sphere, &cloud};
    metrics::GraspCase inside{penetrating, &sphere, &cloud};

    CHECK(metrics::contact_ratio({touch, touch}) == doctest::Approx(100.0));
    CHECK(metrics::contact_ratio({miss, miss}) == doctest::Approx(0.0));
    CHECK(metrics::contact_ratio({touch, miss}) == doctest::Approx(50.0));
    CHECK(metrics::contact_ratio({inside}) == doctest::Approx(100.0));
    CHECK_THROWS_AS(metrics::contact_ratio({}), InvalidInputError);
}

TEST_CASE("penetration volume oracles in cm^3") {
    geom::TriMesh a = geom::make_box(Vector3d(0.005, 0.005, 0.005));  // 1 cm cube
    geom::TriMesh b = geom::translate(a, Vector3d(0.005, 0.0, 0.0));  // 0.5 cm overlap slab
    const double v_ab = metrics::penetration_volume_cm3(a, b);
    const double v_ba = metrics::penetration_volume_cm3(b, a);
    CHECK(std::abs(v_ab - 0.5) < 0.3);  // within ~2 voxel shells of the slab
    CHECK(v_ab == doctest::Approx(v_ba));

    geom::TriMesh c = geom::translate(a, Vector3d(0.5, 0.0, 0.0));
    CHECK(metrics::penetration_volume_cm3(a, c) == 0.0);

    const double self_cm3 = metrics::penetration_volume_cm3(a, a);
    const double own_cm3 = geom::voxel_volume(a, metrics::kVoxelEdgeMeters) * 1e6;
    CHECK(self_cm3 == doctest::Approx(own_cm3));
}

TEST_CASE("simulation displacement: free fall is exactly the kinematic drop") {
    geom::TriMesh no_hand;  // empty: nothing to push against
    no_hand.vertices = MatrixXd(0, 3);
    no_hand.faces = Eigen::MatrixXi(0, 3);
    geom::TriMesh ball = geom::make_sphere(0.02, 2);

    const double d1 = metrics::simulation_displacement(no_hand, ball);
    CHECK(d1 == doctest::Approx(490.0).epsilon(1e-9));  // 0.5 * 9.8 * 1^2 in cm
    const double d2 = metrics::simulation_displacement(no_hand, ball);
    CHECK(d1 == d2);
}

TEST_CASE("simulation displacement: enclosed object barely moves") {
    geom::TriMesh object = geom::make_sphere(0.020, 3);
    geom::TriMesh cage = geom::make_sphere(0.022, 3);  // rigid shell around it
    const double disp = metrics::simulation_displacement(cage, object);
    CHECK(disp < 0.1);  // cm
}

TEST_CASE("diversity: identical grasps have zero entropy") {
    hand::HandTemplate tmpl = hand::procedural_template(24);
    std::vector<hand::HandParams> grasps(40);
    auto d = metrics::diversity(grasps, tmpl, 20, 7);
    CHECK(d.entropy == doctest::Approx(0.0));
    CHECK(d.cluster_size >= 0.0);
    CHECK_THROWS_AS(metrics::diversity({grasps[0]}, tmpl, 20, 7), InvalidInputError);
}

TEST_CASE("diversity: 20 equal well-separated clusters hit the entropy ceiling") {
    hand::HandTemplate tmpl = hand::procedural_template(24);
    std::mt19937_64 rng(72);
    std::normal_distribution<double> jitter(0.0, 0.0005);
    std::vector<hand::HandParams> grasps;
    for (int c = 0; c < 20; ++c) {
        for (int m = 0; m < 5; ++m) {
            hand::HandParams p;
            p.translation << 0.5 * (c % 5), 0.5 * (c / 5), 0.0;
            p.translation += Vector3d(jitter(rng), jitter(rng), jitter(rng));
            grasps.push_back(p);
        }
    }
    auto d = metrics::diversity(grasps, tmpl, 20, 7);
    CHECK(std::abs(d.entropy - std::log(20.0)) < 0.01);  // ln 20 ~ 2.996
    CHECK(d.entropy <= std::log(20.0) + 1e-12);

    // Doubling every grasp leaves the occupancy proportions unchanged.
    std::vector<hand::HandParams> doubled = grasps;
    doubled.insert(doubled.end(), grasps.begin(), grasps.end());
    auto d2 = metrics::diversity(doubled, tmpl, 20, 7);
    CHECK(std::abs(d2.entropy - d.entropy) < 1e-6);
}

TEST_CASE("high quality ratio curve matches hand computation and is monotone") {
    const std::vector<double> pen = {0.0, 1.0, 3.0, 7.0, 12.0};
    const std::vector<double> disp = {1.0, 5.0, 1.0, 1.0, 1.0};
    const double disp_thr = 2.0;
    std::vector<double> sweep;
    for (double t = 0.0; t <= 10.0; t += 1.0) sweep.push_back(t);

    auto curve = metrics::high_quality_ratio(pen, disp, sweep, disp_thr);
    REQUIRE(curve.size() == sweep.size());
    // threshold 0: only the zero-penetration grasp (its disp passes) -> 1/5.
    CHECK(curve[0].second == doctest::Approx(0.2));
    // threshold 3: grasps {0, 2} pass (grasp 1 fails on displacement) -> 2/5.
    CHECK(curve[3].second == doctest::Approx(0.4));
    // threshold 10 (grasp with pen 12 still fails) -> 3/5.
    CHECK(curve[10].second == doctest::Approx(0.6));
    for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].second >= curve[i - 1].second);

    // Infinite threshold: fraction passing the displacement gate alone.
    auto inf = metrics::high_quality_ratio(pen, disp, {1e18}, disp_thr);
    CHECK(inf[0].second == doctest::Approx(0.8));
    CHECK_THROWS_AS(metrics::high_quality_ratio({}, {}, sweep, 1.0), InvalidInputError);
}
