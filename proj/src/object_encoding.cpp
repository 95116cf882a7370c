#include "dvq/object_encoding.hpp"

#include "dvq/errors.hpp"

namespace dvq::enc {

RowVectorXd PointSetEncoder::encode(const MatrixXd& points) const {
    if (points.rows() == 0 || points.cols() != 3) {
        throw InvalidInputError("point set must be non-empty with 3 columns");
    }
    if (!points.allFinite()) {
        throw InvalidInputError("point set contains non-finite coordinates");
    }
    ad::Tape tape;
    return forward(tape, tape.constant(points)).value();
}

EncoderBank::EncoderBank(ad::ParamStore& store, int part_count, int hidden, int latent,
                         std::mt19937_64& rng) {
    if (part_count < 1) throw InvalidParameterError("part_count must be >= 1");
    type_ = PointSetEncoder(store, "enc.type", hidden, latent, rng);
    pose_ = PointSetEncoder(store, "enc.pose", hidden, latent, rng);
    for (int i = 0; i < part_count; ++i) {
        parts_.emplace_back(store, "enc.part" + std::to_string(i), hidden, latent, rng);
    }
}

EncoderBank EncoderBank::attach(ad::ParamStore& store, int part_count, int hidden, int latent) {
    EncoderBank b;
    b.type_ = PointSetEncoder::attach(store, "enc.type", hidden, latent);
    b.pose_ = PointSetEncoder::attach(store, "enc.pose", hidden, latent);
    for (int i = 0; i < part_count; ++i) {
        b.parts_.push_back(
            PointSetEncoder::attach(store, "enc.part" + std::to_string(i), hidden, latent));
    }
    return b;
}

RowVectorXd EncoderBank::encode_pointset(const MatrixXd& cloud, EncoderId id) const {
    const int idx = static_cast<int>(id);
    if (idx == 0) return type_.encode(cloud);
    if (idx == 1) return pose_.encode(cloud);
    const int part = idx - 2;
    if (part < 0 || part >= part_count()) {
        throw InvalidParameterError("encoder id out of range");
    }
    return parts_[static_cast<size_t>(part)].encode(cloud);
}

std::vector<RowVectorXd> EncoderBank::encode_hand_parts(const std::vector<MatrixXd>& parts) const {
    if (static_cast<int>(parts.size()) != part_count()) {
        throw InvalidInputError("expected " + std::to_string(part_count()) +
                                " hand part clouds, got " + std::to_string(parts.size()));
    }
    std::vector<RowVectorXd> out;
    out.reserve(parts.size());
    for (size_t i = 0; i < parts.size(); ++i) {
        out.push_back(parts_[i].encode(parts[i]));
    }
    return out;
}

}  // namespace dvq::enc
