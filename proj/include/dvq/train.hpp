#pragma once

#include <string>
#include <vector>

#include "dvq/model.hpp"

namespace dvq::train {

struct TrainConfig {
    int epochs = 200;
    double base_lr = 1e-4;
    std::vector<int> lr_halve_epochs = {60, 120, 160, 180};  // published schedule
    int batch_size = 16;
    double clip_norm = 0.0;  // global gradient-norm clip, 0 disables
    unsigned seed = 0;
    int start_epoch = 0;           // resume point (epochs already done)
    std::string loss_csv;          // per-epoch component CSV, empty = none
    bool verbose = false;
};

struct EpochStats {
    int epoch = 0;
    double total = 0.0;
    double l_r = 0.0;
    double l_e = 0.0;
    double l_m = 0.0;
    double l_c = 0.0;
    double l_p = 0.0;
    double l_v = 0.0;
};

// Effective learning rate at a given epoch under the halving schedule.
double scheduled_lr(const TrainConfig& cfg, int epoch);

// Phase 1: Eq. 18 over the corpus with per-epoch shuffling and mini-batch
// gradient accumulation. The same (seed, epoch) always visits samples in the
// same order, so resumed runs are bit-reproducible. Marks the model trained.
std::vector<EpochStats> train_model(model::DvqVae& model, nn::Adam& adam,
                                    const std::vector<data::SyntheticSample>& corpus,
                                    const TrainConfig& cfg);

// Phase 2: extracts frozen index sequences and fits the autoregressive prior.
prior::FitResult fit_prior_phase(model::DvqVae& model,
                                 const std::vector<data::SyntheticSample>& corpus, int epochs,
                                 unsigned seed, double lr = 3e-4);

void write_loss_csv(const std::vector<EpochStats>& stats, const std::string& path);

}  // namespace dvq::train
