#pragma once

#include <Eigen/Core>
#include <array>
#include <random>
#include <vector>

#include "dvq/nn.hpp"

namespace dvq::enc {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

// Shared-MLP point encoder with exact max pooling: output is invariant to
// point permutation and duplication. Input coordinates are in metres and a
// typical object spans a few centimetres, so points are rescaled to O(1)
// before the MLP; without this the first layer is bias-dominated and the
// features of different objects are nearly indistinguishable.
class PointSetEncoder {
public:
    static constexpr double kInputScale = 10.0;  // metres -> decimetres
    PointSetEncoder() = default;
    PointSetEncoder(ad::ParamStore& store, const std::string& prefix, int hidden, int latent,
                    std::mt19937_64& rng)
        : mlp_(store, prefix, {3, hidden, latent}, rng) {}
    static PointSetEncoder attach(ad::ParamStore& store, const std::string& prefix, int hidden,
                                  int latent) {
        PointSetEncoder e;
        e.mlp_ = nn::Mlp::attach(store, prefix, {3, hidden, latent});
        return e;
    }

    ad::Var forward(ad::Tape& tape, ad::Var points) const {  // n x 3 -> 1 x latent
        return ad::maxpool_rows(mlp_.forward(tape, ad::scale(points, kInputScale)));
    }
    RowVectorXd encode(const MatrixXd& points) const;

private:
    nn::Mlp mlp_;
};

enum class EncoderId {
    object_type = 0,
    object_pose = 1,
    part_1 = 2,  // thumb; parts follow in canonical order
};

// The two object encoders plus one encoder per hand part. All encoders are
// parameter-disjoint.
class EncoderBank {
public:
    EncoderBank() = default;
    EncoderBank(ad::ParamStore& store, int part_count, int hidden, int latent,
                std::mt19937_64& rng);
    static EncoderBank attach(ad::ParamStore& store, int part_count, int hidden, int latent);

    RowVectorXd encode_pointset(const MatrixXd& cloud, EncoderId id) const;
    std::vector<RowVectorXd> encode_hand_parts(const std::vector<MatrixXd>& parts) const;

    const PointSetEncoder& type_encoder() const { return type_; }
    const PointSetEncoder& pose_encoder() const { return pose_; }
    const PointSetEncoder& part_encoder(int i) const { return parts_.at(static_cast<size_t>(i)); }
    int part_count() const { return static_cast<int>(parts_.size()); }

private:
    PointSetEncoder type_, pose_;
    std::vector<PointSetEncoder> parts_;
};

}  // namespace dvq::enc
