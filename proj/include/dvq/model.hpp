#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dvq/autoregressive_prior.hpp"
#include "dvq/datagen.hpp"
#include "dvq/dual_stage_decoder.hpp"
#include "dvq/losses.hpp"
#include "dvq/object_encoding.hpp"
#include "dvq/quantizer.hpp"

namespace dvq::model {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

struct ModelConfig {
    int latent_dim = 64;      // d, shared by every feature
    int codebook_size = 64;   // S per book
    int part_count = 6;       // N hand parts (1..6); <6 merges the tail parts
    int encoder_hidden = 128;
    int decoder_hidden = 128;
    bool reverse_stages = false;  // position-before-posture ablation
    unsigned seed = 0;
};

// Per-sample loss breakdown from one graph evaluation.
struct StepLosses {
    loss::LossComponents components;  // l_r, l_e, l_m, l_c, l_p
    double l_posture = 0.0;
    double l_position = 0.0;
    double l_v = 0.0;
    double total = 0.0;  // Eq. 18 value including the lambda_m term
};

struct GraspOutput {
    hand::HandParams params;
    hand::HandMesh mesh;
    prior::IndexSequence indices;
};

// Random subset of the cloud keeping ceil((1-ratio)*n) points (>= 1).
MatrixXd mask_cloud(const MatrixXd& cloud, double ratio, unsigned seed);

// The full decomposed VQ-VAE: encoder bank, 1+N codebooks, dual-stage
// decoder, loss assembly, inference pipeline, and checkpointing.
// Parameters hold internal pointers, so the model is pinned in place.
class DvqVae {
public:
    DvqVae(const ModelConfig& cfg, const hand::HandTemplate& tmpl);
    DvqVae(const DvqVae&) = delete;
    DvqVae& operator=(const DvqVae&) = delete;

    const ModelConfig& config() const { return cfg_; }
    const hand::HandTemplate& hand_template() const { return tmpl_; }
    ad::ParamStore& params() { return store_; }
    const loss::LossWeights& weights() const { return weights_; }

    // Canonical part grouping: for part_count < 6 the first N-1 canonical
    // parts stay separate and the remaining ones are merged into the last.
    std::vector<MatrixXd> group_parts(const MatrixXd& vertices) const;

    // Re-seeds every codebook from encoded corpus features (sampled with
    // replacement, small jitter). Freshly initialized codebooks otherwise
    // collapse onto a single entry because only the nearest entry ever
    // receives gradient.
    void init_codebooks(const std::vector<data::SyntheticSample>& corpus, unsigned seed);

    // Re-seeds entries whose usage counter is still zero from freshly encoded
    // corpus features. Called between epochs (after reset_usage at the start
    // of the window) so entries orphaned by encoder drift re-enter the
    // competition instead of staying dead for the rest of training.
    void revive_dead_entries(const std::vector<data::SyntheticSample>& corpus, unsigned seed);

    // Builds the Eq. 18 training graph for one sample; accumulates gradients
    // into the parameter store when `accumulate_grads` is set.
    StepLosses training_step(const data::SyntheticSample& sample, bool accumulate_grads = true);

    // Frozen-model token extraction for the phase-2 prior corpus.
    prior::IndexSequence index_sequence(const data::SyntheticSample& sample,
                                        bool count_usage = false);
    std::vector<int> vocab() const;  // {S_o, S_1..S_N}

    // Inference: encode object, sample hand tokens, decode, FK.
    GraspOutput generate_grasp(const MatrixXd& object_cloud, const prior::IndexPrior& prior,
                               unsigned seed, double temperature = 1.0);

    bool trained() const { return trained_; }
    void mark_trained(int epochs_done, long opt_steps);
    int epochs_done() const { return epochs_done_; }
    long opt_steps() const { return opt_steps_; }

    const std::vector<long>& usage(int book) const;  // book 0 = object
    void reset_usage();
    void write_usage_csv(const std::string& path) const;

    void save_checkpoint(const std::string& path, bool with_opt_state = false) const;
    static std::unique_ptr<DvqVae> from_checkpoint(const std::string& path,
                                                   bool with_opt_state = false);

private:
    ModelConfig cfg_;
    hand::HandTemplate tmpl_;
    loss::LossWeights weights_;
    ad::ParamStore store_;
    enc::EncoderBank encoders_;
    dec::DualStageDecoder decoder_;
    std::vector<std::string> book_names_;      // "cb.obj", "cb.h0"...
    std::vector<std::vector<long>> usage_;     // per book
    bool trained_ = false;
    int epochs_done_ = 0;
    long opt_steps_ = 0;

    int nearest_entry(const std::string& book, const RowVectorXd& z, bool count);
};

}  // namespace dvq::model
