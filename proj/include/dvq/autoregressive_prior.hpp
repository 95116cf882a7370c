#pragma once

#include <random>
#include <string>
#include <vector>

#include "dvq/nn.hpp"

namespace dvq::prior {

// One training/eval sequence: the object token followed by the hand tokens.
struct IndexSequence {
    int l_o = 0;
    std::vector<int> l_h;  // one index per hand codebook
};

// Causal categorical model over (l_o, l_1..l_N): per-book token embeddings
// and one MLP head per hand position, fed the concatenated embeddings of
// everything strictly before it. Position i therefore depends only on
// (l_o, l_1..l_{i-1}).
class IndexPrior {
public:
    IndexPrior() = default;
    // vocab[0] = object book size, vocab[1..N] = hand book sizes.
    IndexPrior(std::vector<int> vocab, int embed_dim, int hidden, unsigned seed);
    // Heads hold pointers into store_, so moves must re-attach them.
    IndexPrior(IndexPrior&& other) noexcept;
    IndexPrior& operator=(IndexPrior&& other) noexcept;
    IndexPrior(const IndexPrior&) = delete;
    IndexPrior& operator=(const IndexPrior&) = delete;

    int positions() const { return static_cast<int>(vocab_.size()) - 1; }
    const std::vector<int>& vocab() const { return vocab_; }
    bool fitted() const { return fitted_; }

    // Per-step categorical distribution for hand position `pos` (0-based)
    // given l_o and the earlier hand tokens (prefix.size() == pos).
    Eigen::VectorXd step_probs(int l_o, const std::vector<int>& prefix, int pos,
                               double temperature = 1.0) const;

    // Mean NLL (nats per sequence) over the corpus for one Adam pass.
    double train_epoch(const std::vector<IndexSequence>& corpus, nn::Adam& adam,
                       std::mt19937_64& rng);

    std::vector<int> sample(int l_o, double temperature, std::mt19937_64& rng) const;
    double sequence_logprob(const IndexSequence& seq) const;

    void save(const std::string& path) const;
    static IndexPrior load(const std::string& path);

private:
    std::vector<int> vocab_;
    int embed_dim_ = 16;
    int hidden_ = 64;
    ad::ParamStore store_;
    std::vector<nn::Mlp> heads_;
    bool fitted_ = false;

    ad::Var step_logits(ad::Tape& tape, int l_o, const std::vector<int>& prefix, int pos) const;
    void check_sequence(int l_o, const std::vector<int>& prefix, int pos) const;
    friend struct PriorAccess;
};

// Fits a prior with the published phase-2 settings (Adam, lr 3e-4) and
// returns per-epoch mean NLL alongside the model.
struct FitResult {
    IndexPrior model;
    std::vector<double> nll_per_epoch;
};
FitResult fit_prior(const std::vector<IndexSequence>& corpus, std::vector<int> vocab, int epochs,
                    unsigned seed, double lr = 3e-4, int embed_dim = 16, int hidden = 64);

}  // namespace dvq::prior
