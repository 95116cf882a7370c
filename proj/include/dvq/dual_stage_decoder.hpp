#pragma once

#include <random>

#include "dvq/hand_model.hpp"
#include "dvq/nn.hpp"

namespace dvq::dec {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// ---- differentiable hand-model graph nodes ----

// Mesh vertices (V x 3) from in-graph posture (1 x 55) and position (1 x 6).
// Backward multiplies by the dense FK Jacobian.
ad::Var fk_vertices_node(ad::Var posture, ad::Var position, const hand::HandTemplate& tmpl);

// Skeletal joint angles theta (1 x K) from posture alone; position is zeroed
// before the FK call (angles are rigid-motion invariant anyway).
ad::Var joint_angles_node(ad::Var posture, const hand::HandTemplate& tmpl);

// Single-head self-attention block over the 55-vector chunked into tokens.
// 55 = token_count * token_dim (default 11 x 5).
class CorrectionAttention {
public:
    CorrectionAttention() = default;
    CorrectionAttention(ad::ParamStore& store, const std::string& prefix, std::mt19937_64& rng,
                        int token_count = 11, int token_dim = 5);
    static CorrectionAttention attach(ad::ParamStore& store, const std::string& prefix,
                                      int token_count = 11, int token_dim = 5);
    ad::Var forward(ad::Tape& tape, ad::Var posture) const;  // 1x55 -> 1x55

private:
    ad::ParamStore* store_ = nullptr;
    std::string prefix_;
    int tokens_ = 11, dim_ = 5;
};

// Stage-1 posture decoder with the gated skeletal correction of Eq. 8, the
// posture re-encoder producing z_h, and the stage-2 position decoder behind
// the stop-gradient barrier of Eq. 9.
class DualStageDecoder {
public:
    struct Config {
        int latent_dim = 64;
        int part_count = 6;
        int hidden = 128;
        int angle_count = 15;  // must equal template.angle_count()
        bool reverse_stages = false;  // Tab. 4 "Dual-Stage(Reverse)" ablation
    };

    DualStageDecoder() = default;
    DualStageDecoder(ad::ParamStore& store, const Config& cfg, std::mt19937_64& rng);
    static DualStageDecoder attach(ad::ParamStore& store, const Config& cfg);

    // Raw M_posture before correction: concat(zq_1..zq_N, z_t) -> 1 x 55.
    ad::Var decode_posture(ad::Tape& tape, const std::vector<ad::Var>& zq_parts,
                           ad::Var z_t) const;
    // Eq. 8: posture + G(theta) (x) T(posture). Differentiable end-to-end.
    ad::Var skeletal_correction(ad::Tape& tape, ad::Var posture,
                                const hand::HandTemplate& tmpl) const;
    // z_h = Enc(M_posture).
    ad::Var encode_posture(ad::Tape& tape, ad::Var posture) const;
    // Eq. 9: Dec[sg(z_h), z_p] -> 1 x 6. The sg is applied inside.
    ad::Var decode_position(ad::Tape& tape, ad::Var z_h, ad::Var z_p) const;

    // Reverse-order ablation path: position from (zq_parts, z_p) first, then
    // posture from (sg(position feature), zq_parts, z_t).
    ad::Var decode_position_first(ad::Tape& tape, const std::vector<ad::Var>& zq_parts,
                                  ad::Var z_p) const;
    ad::Var decode_posture_second(ad::Tape& tape, const std::vector<ad::Var>& zq_parts,
                                  ad::Var z_t, ad::Var position) const;

    // Convenience eval-mode wrappers over plain vectors.
    VectorXd decode_posture_values(const std::vector<RowVectorXd>& zq_parts,
                                   const RowVectorXd& z_t,
                                   const hand::HandTemplate& tmpl) const;
    VectorXd decode_position_values(const VectorXd& posture55, const RowVectorXd& z_p) const;

    const Config& config() const { return cfg_; }
    // Test hook: force G(theta) to a constant by overwriting the gate head.
    void force_gate(ad::ParamStore& store, double constant_logit) const;

private:
    Config cfg_;
    nn::Mlp posture_mlp_;   // (N+1)d -> hidden -> hidden -> 55
    nn::Mlp gate_mlp_;      // K -> 64 -> 55, sigmoid output
    CorrectionAttention attention_;
    nn::Mlp posture_enc_;   // 55 -> hidden -> d
    nn::Mlp position_mlp_;  // 2d -> hidden -> 6
    nn::Mlp rev_position_mlp_;  // (N+1)d -> hidden -> 6 (ablation only)
    nn::Mlp rev_position_enc_;  // 6 -> d (ablation only)
};

}  // namespace dvq::dec
