#include "dvq/model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "dvq/errors.hpp"
#include "dvq/serialize.hpp"

namespace dvq::model {

using ad::Var;

MatrixXd mask_cloud(const MatrixXd& cloud, double ratio, unsigned seed) {
    if (ratio < 0.0 || ratio >= 1.0) {
        throw InvalidParameterError("mask_cloud: ratio must be in [0, 1)");
    }
    const int n = static_cast<int>(cloud.rows());
    const int keep = std::max(1, static_cast<int>(std::ceil((1.0 - ratio) * n)));
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    MatrixXd out(keep, cloud.cols());
    for (int i = 0; i < keep; ++i) out.row(i) = cloud.row(order[static_cast<size_t>(i)]);
    return out;
}

DvqVae::DvqVae(const ModelConfig& cfg, const hand::HandTemplate& tmpl)
    : cfg_(cfg), tmpl_(tmpl) {
    if (cfg.part_count < 1 || cfg.part_count > hand::kNumParts) {
        throw InvalidParameterError("DvqVae: part_count must be in [1, 6]");
    }
    if (cfg.latent_dim < 1 || cfg.codebook_size < 1) {
        throw InvalidParameterError("DvqVae: latent_dim and codebook_size must be positive");
    }
    std::mt19937_64 rng(cfg.seed);
    encoders_ = enc::EncoderBank(store_, cfg.part_count, cfg.encoder_hidden, cfg.latent_dim, rng);
    dec::DualStageDecoder::Config dcfg;
    dcfg.latent_dim = cfg.latent_dim;
    dcfg.part_count = cfg.part_count;
    dcfg.hidden = cfg.decoder_hidden;
    dcfg.angle_count = tmpl_.angle_count();
    dcfg.reverse_stages = cfg.reverse_stages;
    decoder_ = dec::DualStageDecoder(store_, dcfg, rng);

    book_names_.push_back("cb.obj");
    for (int i = 0; i < cfg.part_count; ++i) book_names_.push_back("cb.h" + std::to_string(i));
    for (const std::string& name : book_names_) {
        store_.create(name, nn::glorot(cfg.codebook_size, cfg.latent_dim, rng));
        usage_.emplace_back(static_cast<size_t>(cfg.codebook_size), 0);
    }
}

int DvqVae::nearest_entry(const std::string& book, const RowVectorXd& z, bool count) {
    // Shares the lookup rule (Euclidean argmin, lowest-index ties) with the
    // standalone quantizer by delegating to it.
    vq::Codebook view(store_.at(book).value);
    const vq::QuantizeResult r = vq::quantize(z, view, false);
    if (count) {
        const auto it = std::find(book_names_.begin(), book_names_.end(), book);
        usage_[static_cast<size_t>(it - book_names_.begin())][static_cast<size_t>(r.index)]++;
    }
    return r.index;
}

std::vector<MatrixXd> DvqVae::group_parts(const MatrixXd& vertices) const {
    hand::HandMesh mesh;
    mesh.vertices = vertices;
    mesh.faces = tmpl_.faces;
    const std::array<MatrixXd, hand::kNumParts> canonical =
        hand::partition_vertices(mesh, tmpl_);
    const int n = cfg_.part_count;
    std::vector<MatrixXd> out;
    for (int i = 0; i + 1 < n; ++i) out.push_back(canonical[static_cast<size_t>(i)]);
    long rows = 0;
    for (int i = n - 1; i < hand::kNumParts; ++i) rows += canonical[static_cast<size_t>(i)].rows();
    MatrixXd tail(rows, 3);
    long at = 0;
    for (int i = n - 1; i < hand::kNumParts; ++i) {
        const MatrixXd& part = canonical[static_cast<size_t>(i)];
        tail.middleRows(at, part.rows()) = part;
        at += part.rows();
    }
    out.push_back(std::move(tail));
    return out;
}

void DvqVae::init_codebooks(const std::vector<data::SyntheticSample>& corpus, unsigned seed) {
    if (corpus.empty()) throw InvalidInputError("init_codebooks: empty corpus");
    std::vector<std::vector<RowVectorXd>> features(book_names_.size());
    for (const data::SyntheticSample& s : corpus) {
        features[0].push_back(
            encoders_.encode_pointset(s.object_cloud, enc::EncoderId::object_type));
        const auto [centered, mean] = hand::center_vertices(s.gt_vertices);
        const std::vector<RowVectorXd> z_parts = encoders_.encode_hand_parts(group_parts(centered));
        for (int i = 0; i < cfg_.part_count; ++i) {
            features[static_cast<size_t>(i + 1)].push_back(z_parts[static_cast<size_t>(i)]);
        }
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 0.01);
    for (size_t b = 0; b < book_names_.size(); ++b) {
        ad::Mat& entries = store_.at(book_names_[b]).value;
        std::uniform_int_distribution<size_t> pick(0, features[b].size() - 1);
        for (int s = 0; s < cfg_.codebook_size; ++s) {
            entries.row(s) = features[b][pick(rng)];
            for (int c = 0; c < cfg_.latent_dim; ++c) entries(s, c) += jitter(rng);
        }
    }
}

void DvqVae::revive_dead_entries(const std::vector<data::SyntheticSample>& corpus, unsigned seed) {
    if (corpus.empty()) throw InvalidInputError("revive_dead_entries: empty corpus");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick_sample(0, corpus.size() - 1);
    const size_t pool = std::min<size_t>(corpus.size(), 64);
    std::vector<std::vector<RowVectorXd>> features(book_names_.size());
    for (size_t k = 0; k < pool; ++k) {
        const data::SyntheticSample& s = corpus[pick_sample(rng)];
        features[0].push_back(
            encoders_.encode_pointset(s.object_cloud, enc::EncoderId::object_type));
        const auto [centered, mean] = hand::center_vertices(s.gt_vertices);
        const std::vector<RowVectorXd> z_parts = encoders_.encode_hand_parts(group_parts(centered));
        for (int i = 0; i < cfg_.part_count; ++i) {
            features[static_cast<size_t>(i + 1)].push_back(z_parts[static_cast<size_t>(i)]);
        }
    }
    std::normal_distribution<double> jitter(0.0, 0.01);
    for (size_t b = 0; b < book_names_.size(); ++b) {
        ad::Mat& entries = store_.at(book_names_[b]).value;
        std::uniform_int_distribution<size_t> pick(0, features[b].size() - 1);
        for (int s = 0; s < cfg_.codebook_size; ++s) {
            if (usage_[b][static_cast<size_t>(s)] != 0) continue;
            entries.row(s) = features[b][pick(rng)];
            for (int c = 0; c < cfg_.latent_dim; ++c) entries(s, c) += jitter(rng);
        }
    }
}

StepLosses DvqVae::training_step(const data::SyntheticSample& sample, bool accumulate_grads) {
    const auto [centered, mean] = hand::center_vertices(sample.gt_vertices);
    const std::vector<MatrixXd> parts = group_parts(centered);

    ad::Tape tape;
    Var z_t = encoders_.type_encoder().forward(tape, tape.constant(sample.object_cloud));
    Var z_p = encoders_.pose_encoder().forward(tape, tape.constant(sample.object_cloud));

    // Quantize the object type feature and every part feature; collect the
    // straight-through values and the Eq. 1/2 commitment terms.
    Var l_hq = tape.constant(ad::Mat::Zero(1, 1));
    auto quantized = [&](Var z, const std::string& book) {
        const RowVectorXd zval = tape.value(z.id).row(0);
        const int idx = nearest_entry(book, zval, true);
        Var entry = ad::gather_row(tape.use(store_.at(book)), idx);
        l_hq = ad::add(l_hq, vq::commitment_loss(z, entry, weights_.beta));
        return ad::straight_through(z, entry);
    };
    Var st_t = quantized(z_t, "cb.obj");
    std::vector<Var> st_parts;
    for (int i = 0; i < cfg_.part_count; ++i) {
        Var x = tape.constant(parts[static_cast<size_t>(i)]);
        Var z = encoders_.part_encoder(i).forward(tape, x);
        st_parts.push_back(quantized(z, book_names_[static_cast<size_t>(i + 1)]));
    }
    Var l_e = ad::scale(l_hq, weights_.lambda_e);

    Var posture, position;
    if (!cfg_.reverse_stages) {
        Var raw = decoder_.decode_posture(tape, st_parts, st_t);
        posture = decoder_.skeletal_correction(tape, raw, tmpl_);
        Var z_h = decoder_.encode_posture(tape, posture);
        position = decoder_.decode_position(tape, z_h, z_p);
    } else {
        position = decoder_.decode_position_first(tape, st_parts, z_p);
        Var raw = decoder_.decode_posture_second(tape, st_parts, st_t, position);
        posture = decoder_.skeletal_correction(tape, raw, tmpl_);
    }

    const ad::Mat gt_posture = sample.gt_params.posture().transpose();
    const ad::Mat gt_position = sample.gt_params.position().transpose();
    Var l_posture = ad::norm(ad::sub(posture, tape.constant(gt_posture)));
    Var l_position = ad::norm(ad::sub(position, tape.constant(gt_position)));
    Var verts = dec::fk_vertices_node(posture, position, tmpl_);
    Var l_v = ad::rownorm_sum(ad::sub(verts, tape.constant(sample.gt_vertices)));
    Var l_r = ad::add(ad::scale(ad::add(l_posture, l_position), weights_.lambda_h),
                      ad::scale(l_v, weights_.lambda_v));

    const MatrixXd pred_vertices = tape.value(verts.id);
    hand::HandMesh pred;
    pred.vertices = pred_vertices;
    pred.faces = tmpl_.faces;
    loss::ContactSets sets = loss::compute_contact_sets(pred, sample.object_cloud,
                                                        sample.object_mesh,
                                                        weights_.tau_contact, tmpl_);
    sets.gt_contact =
        loss::contact_map(sample.gt_vertices, sample.object_cloud, weights_.tau_contact);
    Var l_cp = loss::contact_penetration_node(verts, sets, sample.object_cloud, weights_);

    Var objective = ad::add(ad::add(l_r, l_e), l_cp);

    StepLosses out;
    out.components.l_r = tape.value(l_r.id)(0, 0);
    out.components.l_e = tape.value(l_e.id)(0, 0);
    const loss::ContactLossValues clv =
        loss::contact_losses(sets, pred_vertices, sample.object_cloud);
    out.components.l_c = clv.l_c;
    out.components.l_m = clv.l_m;
    out.components.l_p = loss::penetration_loss(sets, pred_vertices, sample.object_cloud);
    out.l_posture = tape.value(l_posture.id)(0, 0);
    out.l_position = tape.value(l_position.id)(0, 0);
    out.l_v = tape.value(l_v.id)(0, 0);
    out.total = loss::total_loss(out.components, weights_);  // throws on non-finite
    if (accumulate_grads) tape.backward(objective);
    return out;
}

prior::IndexSequence DvqVae::index_sequence(const data::SyntheticSample& sample,
                                            bool count_usage) {
    prior::IndexSequence seq;
    const RowVectorXd z_t =
        encoders_.encode_pointset(sample.object_cloud, enc::EncoderId::object_type);
    seq.l_o = nearest_entry("cb.obj", z_t, count_usage);
    const auto [centered, mean] = hand::center_vertices(sample.gt_vertices);
    const std::vector<RowVectorXd> z_parts =
        encoders_.encode_hand_parts(group_parts(centered));
    for (int i = 0; i < cfg_.part_count; ++i) {
        seq.l_h.push_back(nearest_entry(book_names_[static_cast<size_t>(i + 1)],
                                        z_parts[static_cast<size_t>(i)], count_usage));
    }
    return seq;
}

std::vector<int> DvqVae::vocab() const {
    return std::vector<int>(static_cast<size_t>(cfg_.part_count) + 1, cfg_.codebook_size);
}

GraspOutput DvqVae::generate_grasp(const MatrixXd& object_cloud,
                                   const prior::IndexPrior& prior, unsigned seed,
                                   double temperature) {
    if (!trained_) throw NotReadyError("generate_grasp: model has not been trained");
    if (!prior.fitted()) throw NotReadyError("generate_grasp: prior has not been fitted");
    if (prior.positions() != cfg_.part_count) {
        throw InvalidInputError("generate_grasp: prior position count mismatch");
    }

    GraspOutput out;
    const RowVectorXd z_t =
        encoders_.encode_pointset(object_cloud, enc::EncoderId::object_type);
    out.indices.l_o = nearest_entry("cb.obj", z_t, true);
    std::mt19937_64 rng(seed);
    out.indices.l_h = prior.sample(out.indices.l_o, temperature, rng);
    const RowVectorXd z_p =
        encoders_.encode_pointset(object_cloud, enc::EncoderId::object_pose);

    ad::Tape tape;
    Var zt_v = tape.constant(store_.at("cb.obj").value.row(out.indices.l_o));
    Var zp_v = tape.constant(z_p);
    std::vector<Var> zq;
    for (int i = 0; i < cfg_.part_count; ++i) {
        const ad::Mat& book = store_.at(book_names_[static_cast<size_t>(i + 1)]).value;
        zq.push_back(tape.constant(book.row(out.indices.l_h[static_cast<size_t>(i)])));
    }

    Var posture, position;
    if (!cfg_.reverse_stages) {
        Var raw = decoder_.decode_posture(tape, zq, zt_v);
        posture = decoder_.skeletal_correction(tape, raw, tmpl_);
        Var z_h = decoder_.encode_posture(tape, posture);
        position = decoder_.decode_position(tape, z_h, zp_v);
    } else {
        position = decoder_.decode_position_first(tape, zq, zp_v);
        Var raw = decoder_.decode_posture_second(tape, zq, zt_v, position);
        posture = decoder_.skeletal_correction(tape, raw, tmpl_);
    }
    const VectorXd posture_v = tape.value(posture.id).row(0).transpose();
    const VectorXd position_v = tape.value(position.id).row(0).transpose();
    out.params = hand::HandParams::from_posture_position(posture_v, position_v);
    out.mesh = hand::forward_kinematics(out.params, tmpl_);
    return out;
}

void DvqVae::mark_trained(int epochs_done, long opt_steps) {
    trained_ = true;
    epochs_done_ = epochs_done;
    opt_steps_ = opt_steps;
}

const std::vector<long>& DvqVae::usage(int book) const {
    return usage_.at(static_cast<size_t>(book));
}

void DvqVae::reset_usage() {
    for (auto& u : usage_) std::fill(u.begin(), u.end(), 0);
}

void DvqVae::write_usage_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "book,index,count\n";
    for (size_t b = 0; b < book_names_.size(); ++b)
        for (size_t i = 0; i < usage_[b].size(); ++i)
            os << book_names_[b] << "," << i << "," << usage_[b][i] << "\n";
}

void DvqVae::save_checkpoint(const std::string& path, bool with_opt_state) const {
    io::TensorMap t = io::params_to_tensors(store_, with_opt_state);
    ad::Mat meta(1, 10);
    meta << cfg_.latent_dim, cfg_.codebook_size, cfg_.part_count, cfg_.encoder_hidden,
        cfg_.decoder_hidden, cfg_.reverse_stages ? 1.0 : 0.0, static_cast<double>(cfg_.seed),
        trained_ ? 1.0 : 0.0, static_cast<double>(epochs_done_),
        static_cast<double>(opt_steps_);
    t["meta"] = meta;
    t["tmpl.meta"] = ad::Mat::Constant(1, 1, static_cast<double>(tmpl_.vertices0.rows()));
    for (size_t b = 0; b < usage_.size(); ++b) {
        ad::Mat u(1, static_cast<int>(usage_[b].size()));
        for (size_t i = 0; i < usage_[b].size(); ++i)
            u(0, static_cast<int>(i)) = static_cast<double>(usage_[b][i]);
        t["usage." + std::to_string(b)] = u;
    }
    io::save_tensors(t, path);
}

std::unique_ptr<DvqVae> DvqVae::from_checkpoint(const std::string& path, bool with_opt_state) {
    const io::TensorMap t = io::load_tensors(path);
    if (!t.count("meta") || !t.count("tmpl.meta")) {
        throw DatasetFormatError("checkpoint missing metadata: " + path);
    }
    const ad::Mat& meta = t.at("meta");
    ModelConfig cfg;
    cfg.latent_dim = static_cast<int>(meta(0, 0));
    cfg.codebook_size = static_cast<int>(meta(0, 1));
    cfg.part_count = static_cast<int>(meta(0, 2));
    cfg.encoder_hidden = static_cast<int>(meta(0, 3));
    cfg.decoder_hidden = static_cast<int>(meta(0, 4));
    cfg.reverse_stages = meta(0, 5) != 0.0;
    cfg.seed = static_cast<unsigned>(meta(0, 6));
    const int vcount = static_cast<int>(t.at("tmpl.meta")(0, 0));
    auto model = std::make_unique<DvqVae>(cfg, hand::procedural_template(vcount));
    io::tensors_to_params(t, model->store_, with_opt_state);
    if (meta(0, 7) != 0.0) {
        model->mark_trained(static_cast<int>(meta(0, 8)), static_cast<long>(meta(0, 9)));
    }
    for (size_t b = 0; b < model->usage_.size(); ++b) {
        const auto it = t.find("usage." + std::to_string(b));
        if (it == t.end()) continue;
        for (size_t i = 0; i < model->usage_[b].size(); ++i)
            model->usage_[b][i] = static_cast<long>(it->second(0, static_cast<int>(i)));
    }
    return model;
}

}  // namespace dvq::model
