#include "dvq/dual_stage_decoder.hpp"

#include <cmath>
#include <memory>

#include "dvq/errors.hpp"

namespace dvq::dec {

namespace {

hand::HandParams params_from_rows(const MatrixXd& posture, const MatrixXd& position) {
    if (posture.rows() != 1 || posture.cols() != hand::kPostureDim) {
        throw InvalidInputError("posture node must be 1 x 55");
    }
    if (position.rows() != 1 || position.cols() != hand::kPositionDim) {
        throw InvalidInputError("position node must be 1 x 6");
    }
    return hand::HandParams::from_posture_position(posture.row(0).transpose(),
                                                   position.row(0).transpose());
}

}  // namespace

ad::Var fk_vertices_node(ad::Var posture, ad::Var position, const hand::HandTemplate& tmpl) {
    const hand::HandParams p = params_from_rows(posture.value(), position.value());
    auto fk = std::make_shared<hand::FkResult>(hand::forward_kinematics_with_jacobian(p, tmpl));
    const int pid = posture.id, qid = position.id;
    ad::Mat verts = fk->mesh.vertices;
    return posture.tape->make(std::move(verts), [fk, pid, qid](ad::Tape& t, int self) {
        const ad::Mat& g = t.grad(self);  // V x 3
        const int V = static_cast<int>(g.rows());
        Eigen::VectorXd flat(3 * V);
        for (int v = 0; v < V; ++v)
            for (int c = 0; c < 3; ++c) flat(3 * v + c) = g(v, c);
        Eigen::RowVectorXd gp = flat.transpose() * fk->vertex_jacobian;  // 1 x 61
        t.grad(pid) += gp.leftCols(hand::kPostureDim);
        t.grad(qid) += gp.rightCols(hand::kPositionDim);
    });
}

ad::Var joint_angles_node(ad::Var posture, const hand::HandTemplate& tmpl) {
    const hand::HandParams p =
        params_from_rows(posture.value(), ad::Mat::Zero(1, hand::kPositionDim));
    hand::FkResult fk = hand::forward_kinematics_with_jacobian(p, tmpl, false);
    MatrixXd dtheta_djoints;
    VectorXd theta = hand::joint_angles_with_jacobian(fk.mesh.joints, tmpl, dtheta_djoints);
    // Chain rule through the joints, posture columns only (position is fixed 0).
    auto jac = std::make_shared<MatrixXd>(
        dtheta_djoints * fk.joint_jacobian.leftCols(hand::kPostureDim));  // K x 55
    const int pid = posture.id;
    return posture.tape->make(ad::Mat(theta.transpose()), [jac, pid](ad::Tape& t, int self) {
        t.grad(pid) += t.grad(self) * (*jac);
    });
}

CorrectionAttention::CorrectionAttention(ad::ParamStore& store, const std::string& prefix,
                                         std::mt19937_64& rng, int token_count, int token_dim)
    : store_(&store), prefix_(prefix), tokens_(token_count), dim_(token_dim) {
    for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) {
        store.create(prefix + "." + w, nn::glorot(dim_, dim_, rng));
    }
}

CorrectionAttention CorrectionAttention::attach(ad::ParamStore& store, const std::string& prefix,
                                                int token_count, int token_dim) {
    CorrectionAttention a;
    a.store_ = &store;
    a.prefix_ = prefix;
    a.tokens_ = token_count;
    a.dim_ = token_dim;
    for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) {
        if (!store.contains(prefix + "." + std::string(w))) {
            throw NotReadyError("attention weights missing: " + prefix);
        }
    }
    return a;
}

ad::Var CorrectionAttention::forward(ad::Tape& tape, ad::Var posture) const {
    ad::Var x = ad::reshape_rows(posture, tokens_, dim_);
    ad::Var q = ad::matmul(x, tape.use(store_->at(prefix_ + ".Wq")));
    ad::Var k = ad::matmul(x, tape.use(store_->at(prefix_ + ".Wk")));
    ad::Var v = ad::matmul(x, tape.use(store_->at(prefix_ + ".Wv")));
    ad::Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(double(dim_)));
    ad::Var out = ad::matmul(ad::softmax_rows(scores), v);
    out = ad::matmul(out, tape.use(store_->at(prefix_ + ".Wo")));
    return ad::reshape_rows(out, 1, tokens_ * dim_);
}

DualStageDecoder::DualStageDecoder(ad::ParamStore& store, const Config& cfg,
                                   std::mt19937_64& rng)
    : cfg_(cfg) {
    const int d = cfg.latent_dim;
    const int in = (cfg.part_count + 1) * d;
    posture_mlp_ = nn::Mlp(store, "dec.posture", {in, cfg.hidden, cfg.hidden, hand::kPostureDim},
                           rng);
    gate_mlp_ = nn::Mlp(store, "dec.gate", {cfg.angle_count, 64, hand::kPostureDim}, rng,
                        nn::OutputAct::sigmoid);
    attention_ = CorrectionAttention(store, "dec.attn", rng);
    posture_enc_ = nn::Mlp(store, "dec.zh", {hand::kPostureDim, cfg.hidden, d}, rng);
    position_mlp_ = nn::Mlp(store, "dec.position", {2 * d, cfg.hidden, hand::kPositionDim}, rng);
    if (cfg.reverse_stages) {
        rev_position_mlp_ =
            nn::Mlp(store, "dec.rpos", {in, cfg.hidden, hand::kPositionDim}, rng);
        rev_position_enc_ = nn::Mlp(store, "dec.rposenc", {hand::kPositionDim, d}, rng);
    }
}

DualStageDecoder DualStageDecoder::attach(ad::ParamStore& store, const Config& cfg) {
    DualStageDecoder s;
    s.cfg_ = cfg;
    const int d = cfg.latent_dim;
    const int in = (cfg.part_count + 1) * d;
    s.posture_mlp_ = nn::Mlp::attach(store, "dec.posture",
                                     {in, cfg.hidden, cfg.hidden, hand::kPostureDim});
    s.gate_mlp_ = nn::Mlp::attach(store, "dec.gate", {cfg.angle_count, 64, hand::kPostureDim},
                                  nn::OutputAct::sigmoid);
    s.attention_ = CorrectionAttention::attach(store, "dec.attn");
    s.posture_enc_ = nn::Mlp::attach(store, "dec.zh", {hand::kPostureDim, cfg.hidden, d});
    s.position_mlp_ =
        nn::Mlp::attach(store, "dec.position", {2 * d, cfg.hidden, hand::kPositionDim});
    if (cfg.reverse_stages) {
        s.rev_position_mlp_ =
            nn::Mlp::attach(store, "dec.rpos", {in, cfg.hidden, hand::kPositionDim});
        s.rev_position_enc_ = nn::Mlp::attach(store, "dec.rposenc", {hand::kPositionDim, d});
    }
    return s;
}

ad::Var DualStageDecoder::decode_posture(ad::Tape& tape, const std::vector<ad::Var>& zq_parts,
                                         ad::Var z_t) const {
    if (static_cast<int>(zq_parts.size()) != cfg_.part_count) {
        throw InvalidInputError("decode_posture: expected " + std::to_string(cfg_.part_count) +
                                " part features");
    }
    std::vector<ad::Var> cat = zq_parts;
    cat.push_back(z_t);
    return posture_mlp_.forward(tape, ad::concat_cols(cat));
}

ad::Var DualStageDecoder::skeletal_correction(ad::Tape& tape, ad::Var posture,
                                              const hand::HandTemplate& tmpl) const {
    ad::Var theta = joint_angles_node(posture, tmpl);
    ad::Var gate = gate_mlp_.forward(tape, theta);
    ad::Var delta = attention_.forward(tape, posture);
    return ad::add(posture, ad::mul(gate, delta));
}

ad::Var DualStageDecoder::encode_posture(ad::Tape& tape, ad::Var posture) const {
    return posture_enc_.forward(tape, posture);
}

ad::Var DualStageDecoder::decode_position(ad::Tape& tape, ad::Var z_h, ad::Var z_p) const {
    return position_mlp_.forward(tape, ad::concat_cols({ad::stop_grad(z_h), z_p}));
}

ad::Var DualStageDecoder::decode_position_first(ad::Tape& tape,
                                                const std::vector<ad::Var>& zq_parts,
                                                ad::Var z_p) const {
    if (!cfg_.reverse_stages) throw NotReadyError("reverse-stage path disabled in config");
    std::vector<ad::Var> cat = zq_parts;
    cat.push_back(z_p);
    return rev_position_mlp_.forward(tape, ad::concat_cols(cat));
}

ad::Var DualStageDecoder::decode_posture_second(ad::Tape& tape,
                                                const std::vector<ad::Var>& zq_parts,
                                                ad::Var z_t, ad::Var position) const {
    if (!cfg_.reverse_stages) throw NotReadyError("reverse-stage path disabled in config");
    ad::Var zpos = rev_position_enc_.forward(tape, ad::stop_grad(position));
    std::vector<ad::Var> cat = zq_parts;
    cat.push_back(ad::add(z_t, zpos));  // keep the posture head input width fixed
    return posture_mlp_.forward(tape, ad::concat_cols(cat));
}

VectorXd DualStageDecoder::decode_posture_values(const std::vector<RowVectorXd>& zq_parts,
                                                 const RowVectorXd& z_t,
                                                 const hand::HandTemplate& tmpl) const {
    ad::Tape tape;
    std::vector<ad::Var> parts;
    parts.reserve(zq_parts.size());
    for (const auto& z : zq_parts) parts.push_back(tape.constant(z));
    ad::Var raw = decode_posture(tape, parts, tape.constant(z_t));
    ad::Var corrected = skeletal_correction(tape, raw, tmpl);
    return corrected.value().row(0).transpose();
}

VectorXd DualStageDecoder::decode_position_values(const VectorXd& posture55,
                                                  const RowVectorXd& z_p) const {
    ad::Tape tape;
    ad::Var zh = encode_posture(tape, tape.constant(posture55.transpose()));
    ad::Var pos = decode_position(tape, zh, tape.constant(z_p));
    return pos.value().row(0).transpose();
}

void DualStageDecoder::force_gate(ad::ParamStore& store, double constant_logit) const {
    store.at("dec.gate.W1").value.setZero();
    store.at("dec.gate.b1").value.setConstant(constant_logit);
}

}  // namespace dvq::dec
