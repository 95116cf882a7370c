#include "dvq/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "dvq/errors.hpp"

namespace dvq::train {

double scheduled_lr(const TrainConfig& cfg, int epoch) {
    double lr = cfg.base_lr;
    for (int at : cfg.lr_halve_epochs)
        if (epoch >= at) lr *= 0.5;
    return lr;
}

std::vector<EpochStats> train_model(model::DvqVae& model, nn::Adam& adam,
                                    const std::vector<data::SyntheticSample>& corpus,
                                    const TrainConfig& cfg) {
    if (corpus.empty()) throw InvalidInputError("train_model: empty corpus");
    if (cfg.batch_size < 1) throw InvalidParameterError("train_model: batch_size must be >= 1");

    if (cfg.start_epoch == 0) model.init_codebooks(corpus, cfg.seed ^ 0xC0DEB00Cull);

    ad::ParamStore& params = model.params();
    std::vector<EpochStats> stats;
    std::vector<size_t> order(corpus.size());

    for (int epoch = cfg.start_epoch; epoch < cfg.epochs; ++epoch) {
        adam.set_lr(scheduled_lr(cfg, epoch));
        // Quantization usage is tracked per epoch; entries that went a whole
        // epoch without being selected are re-seeded from current encoder
        // features so the codebooks cannot collapse onto a handful of codes.
        if (epoch > 0) {
            model.revive_dead_entries(corpus,
                                      static_cast<unsigned>(cfg.seed) + 7919u * (epoch + 1));
        }
        model.reset_usage();
        // Epoch-keyed stream over the identity order: the permutation is a
        // pure function of (seed, epoch), so a resumed run replays the same
        // visit order as the uninterrupted one.
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ull * (epoch + 1)));
        std::shuffle(order.begin(), order.end(), rng);

        EpochStats e;
        e.epoch = epoch;
        size_t in_batch = 0;
        params.zero_grad();
        for (size_t i = 0; i < order.size(); ++i) {
            const model::StepLosses s = model.training_step(corpus[order[i]], true);
            e.total += s.total;
            e.l_r += s.components.l_r;
            e.l_e += s.components.l_e;
            e.l_m += s.components.l_m;
            e.l_c += s.components.l_c;
            e.l_p += s.components.l_p;
            e.l_v += s.l_v;
            ++in_batch;
            if (in_batch == static_cast<size_t>(cfg.batch_size) || i + 1 == order.size()) {
                for (const std::string& name : params.names()) {
                    params.at(name).grad /= static_cast<double>(in_batch);
                }
                if (cfg.clip_norm > 0.0) {
                    double sq = 0.0;
                    for (const std::string& name : params.names())
                        sq += params.at(name).grad.squaredNorm();
                    const double norm = std::sqrt(sq);
                    if (norm > cfg.clip_norm) {
                        const double scale = cfg.clip_norm / norm;
                        for (const std::string& name : params.names())
                            params.at(name).grad *= scale;
                    }
                }
                adam.step(params);
                params.zero_grad();
                in_batch = 0;
            }
        }
        const double n = static_cast<double>(corpus.size());
        e.total /= n; e.l_r /= n; e.l_e /= n; e.l_m /= n; e.l_c /= n; e.l_p /= n; e.l_v /= n;
        stats.push_back(e);
        if (cfg.verbose) {
            std::fprintf(stderr, "epoch %d: total=%.4f L_v=%.4f L_c=%.4f L_p=%.4f lr=%.2e\n",
                         epoch, e.total, e.l_v, e.l_c, e.l_p, adam.lr());
        }
    }
    model.mark_trained(cfg.epochs, adam.steps());
    if (!cfg.loss_csv.empty()) write_loss_csv(stats, cfg.loss_csv);
    return stats;
}

prior::FitResult fit_prior_phase(model::DvqVae& model,
                                 const std::vector<data::SyntheticSample>& corpus, int epochs,
                                 unsigned seed, double lr) {
    if (!model.trained()) throw NotReadyError("fit_prior_phase: model has not been trained");
    std::vector<prior::IndexSequence> sequences;
    sequences.reserve(corpus.size());
    for (const data::SyntheticSample& s : corpus) {
        sequences.push_back(model.index_sequence(s, true));
    }
    return prior::fit_prior(sequences, model.vocab(), epochs, seed, lr);
}

void write_loss_csv(const std::vector<EpochStats>& stats, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "epoch,total,l_r,l_e,l_m,l_c,l_p,l_v\n";
    for (const EpochStats& e : stats) {
        os << e.epoch << "," << e.total << "," << e.l_r << "," << e.l_e << "," << e.l_m << ","
           << e.l_c << "," << e.l_p << "," << e.l_v << "\n";
    }
}

}  // namespace dvq::train
