#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "dvq/errors.hpp"
#include "dvq/object_encoding.hpp"

using namespace dvq;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

namespace {

MatrixXd random_cloud(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 0.1);
    MatrixXd m(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = gauss(rng);
    return m;
}

}  // namespace

TEST_CASE("permutation invariance is exact for every encoder") {
    ad::ParamStore store;
    std::mt19937_64 rng(101);
    enc::EncoderBank bank(store, 6, 16, 8, rng);
    MatrixXd cloud = random_cloud(200, rng);

    std::vector<int> perm(200);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd shuffled(200, 3);
    for (int i = 0; i < 200; ++i) shuffled.row(i) = cloud.row(perm[i]);

    for (int id = 0; id < 8; ++id) {
        RowVectorXd a = bank.encode_pointset(cloud, static_cast<enc::EncoderId>(id));
        RowVectorXd b = bank.encode_pointset(shuffled, static_cast<enc::EncoderId>(id));
        CHECK((a - b).norm() == 0.0);
    }
}

TEST_CASE("max pooling makes duplication a no-op") {
    ad::ParamStore store;
    std::mt19937_64 rng(102);
    enc::EncoderBank bank(store, 6, 16, 8, rng);
    MatrixXd cloud = random_cloud(64, rng);
    MatrixXd doubled(128, 3);
    doubled << cloud, cloud;
    RowVectorXd a = bank.encode_pointset(cloud, enc::EncoderId::object_type);
    RowVectorXd b = bank.encode_pointset(doubled, enc::EncoderId::object_type);
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("dropout of half the points perturbs the feature only mildly") {
    ad::ParamStore store;
    std::mt19937_64 rng(103);
    enc::EncoderBank bank(store, 6, 16, 8, rng);
    MatrixXd cloud = random_cloud(3000, rng);
    MatrixXd kept = cloud.topRows(1500);  // rows are i.i.d., so this is a random half
    RowVectorXd a = bank.encode_pointset(cloud, enc::EncoderId::object_pose);
    RowVectorXd b = bank.encode_pointset(kept, enc::EncoderId::object_pose);
    CHECK(a.size() == 8);
    CHECK((a - b).norm() < 0.5 * a.norm() + 1e-9);
}

TEST_CASE("the two object encoders are parameter-disjoint") {
    ad::ParamStore store;
    std::mt19937_64 rng(104);
    enc::EncoderBank bank(store, 6, 16, 8, rng);
    MatrixXd cloud = random_cloud(50, rng);
    RowVectorXd zp_before = bank.encode_pointset(cloud, enc::EncoderId::object_pose);
    RowVectorXd zt_before = bank.encode_pointset(cloud, enc::EncoderId::object_type);

    for (const auto& name : store.names()) {
        if (name.rfind("enc.type.", 0) == 0) store.at(name).value.array() += 0.05;
    }
    RowVectorXd zp_after = bank.encode_pointset(cloud, enc::EncoderId::object_pose);
    RowVectorXd zt_after = bank.encode_pointset(cloud, enc::EncoderId::object_type);
    CHECK((zp_before - zp_after).norm() == 0.0);
    CHECK((zt_before - zt_after).norm() > 0.0);
}

TEST_CASE("encode_hand_parts runs distinct encoders per slot") {
    ad::ParamStore store;
    std::mt19937_64 rng(105);
    enc::EncoderBank bank(store, 6, 16, 8, rng);
    std::vector<MatrixXd> parts;
    for (int i = 0; i < 6; ++i) parts.push_back(random_cloud(30, rng));

    auto feats = bank.encode_hand_parts(parts);
    auto feats2 = bank.encode_hand_parts(parts);
    REQUIRE(feats.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK((feats[i] - feats2[i]).norm() == 0.0);

    // Swap two slots: exactly those two outputs change.
    std::swap(parts[1], parts[4]);
    auto swapped = bank.encode_hand_parts(parts);
    for (int i = 0; i < 6; ++i) {
        const double diff = (feats[i] - swapped[i]).norm();
        if (i == 1 || i == 4) {
            CHECK(diff > 0.0);
        } else {
            CHECK(diff == 0.0);
        }
    }

    // Wrong arity rejected.
    parts.pop_back();
    CHECK_THROWS_AS(bank.encode_hand_parts(parts), InvalidInputError);
}

TEST_CASE("invalid clouds are rejected") {
    ad::ParamStore store;
    std::mt19937_64 rng(106);
    enc::EncoderBank bank(store, 6, 16, 8, rng);
    CHECK_THROWS_AS(bank.encode_pointset(MatrixXd(0, 3), enc::EncoderId::object_type),
                    InvalidInputError);
    MatrixXd bad = MatrixXd::Zero(3, 3);
    bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bank.encode_pointset(bad, enc::EncoderId::object_type), InvalidInputError);
}

TEST_CASE("attach rebuilds a bank over existing weights") {
    ad::ParamStore store;
    std::mt19937_64 rng(107);
    enc::EncoderBank bank(store, 3, 16, 8, rng);
    MatrixXd cloud = random_cloud(40, rng);
    RowVectorXd before = bank.encode_pointset(cloud, enc::EncoderId::part_1);
    enc::EncoderBank re = enc::EncoderBank::attach(store, 3, 16, 8);
    CHECK((before - re.encode_pointset(cloud, enc::EncoderId::part_1)).norm() == 0.0);
}
