#include "dvq/autoregressive_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dvq/errors.hpp"
#include "dvq/serialize.hpp"

namespace dvq::prior {

IndexPrior::IndexPrior(std::vector<int> vocab, int embed_dim, int hidden, unsigned seed)
    : vocab_(std::move(vocab)), embed_dim_(embed_dim), hidden_(hidden) {
    if (vocab_.size() < 2) throw InvalidParameterError("prior needs an object book + hand books");
    for (int s : vocab_) {
        if (s < 1) throw InvalidParameterError("codebook sizes must be positive");
    }
    std::mt19937_64 rng(seed);
    for (size_t b = 0; b < vocab_.size(); ++b) {
        store_.create("prior.emb" + std::to_string(b),
                      0.1 * nn::glorot(vocab_[b], embed_dim_, rng));
    }
    for (int pos = 0; pos < positions(); ++pos) {
        heads_.emplace_back(store_, "prior.head" + std::to_string(pos),
                            std::vector<int>{(pos + 1) * embed_dim_, hidden_,
                                             vocab_[static_cast<size_t>(pos) + 1]},
                            rng);
    }
}

IndexPrior::IndexPrior(IndexPrior&& other) noexcept { *this = std::move(other); }

IndexPrior& IndexPrior::operator=(IndexPrior&& other) noexcept {
    vocab_ = std::move(other.vocab_);
    embed_dim_ = other.embed_dim_;
    hidden_ = other.hidden_;
    fitted_ = other.fitted_;
    store_ = std::move(other.store_);
    heads_.clear();
    for (int pos = 0; pos < positions(); ++pos) {
        heads_.push_back(nn::Mlp::attach(store_, "prior.head" + std::to_string(pos),
                                         {(pos + 1) * embed_dim_, hidden_,
                                          vocab_[static_cast<size_t>(pos) + 1]}));
    }
    return *this;
}

void IndexPrior::check_sequence(int l_o, const std::vector<int>& prefix, int pos) const {
    if (pos < 0 || pos >= positions()) throw InvalidInputError("prior position out of range");
    if (l_o < 0 || l_o >= vocab_[0]) throw InvalidInputError("l_o out of range");
    if (static_cast<int>(prefix.size()) < pos) {
        throw InvalidInputError("prior context shorter than the position requires");
    }
    for (int i = 0; i < pos; ++i) {
        if (prefix[static_cast<size_t>(i)] < 0 ||
            prefix[static_cast<size_t>(i)] >= vocab_[static_cast<size_t>(i) + 1]) {
            throw InvalidInputError("hand index out of range in prior context");
        }
    }
}

ad::Var IndexPrior::step_logits(ad::Tape& tape, int l_o, const std::vector<int>& prefix,
                                int pos) const {
    check_sequence(l_o, prefix, pos);
    auto& self = const_cast<IndexPrior&>(*this);
    std::vector<ad::Var> ctx;
    ctx.push_back(ad::gather_row(tape.use(self.store_.at("prior.emb0")), l_o));
    for (int i = 0; i < pos; ++i) {
        ctx.push_back(ad::gather_row(
            tape.use(self.store_.at("prior.emb" + std::to_string(i + 1))),
            prefix[static_cast<size_t>(i)]));
    }
    return heads_[static_cast<size_t>(pos)].forward(tape, ad::concat_cols(ctx));
}

Eigen::VectorXd IndexPrior::step_probs(int l_o, const std::vector<int>& prefix, int pos,
                                       double temperature) const {
    if (temperature <= 0.0) throw InvalidParameterError("temperature must be positive");
    ad::Tape tape;
    Eigen::RowVectorXd logits = step_logits(tape, l_o, prefix, pos).value().row(0);
    Eigen::RowVectorXd scaled = (logits.array() - logits.maxCoeff()) / temperature;
    Eigen::VectorXd p = scaled.array().exp().transpose();
    return p / p.sum();
}

double IndexPrior::train_epoch(const std::vector<IndexSequence>& corpus, nn::Adam& adam,
                               std::mt19937_64& rng) {
    if (corpus.empty()) throw InvalidInputError("prior corpus is empty");
    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    const int batch = 16;
    double total_nll = 0.0;
    int in_batch = 0;
    store_.zero_grad();
    for (size_t n = 0; n < order.size(); ++n) {
        const IndexSequence& seq = corpus[order[n]];
        if (static_cast<int>(seq.l_h.size()) != positions()) {
            throw InvalidInputError("sequence arity does not match the prior");
        }
        ad::Tape tape;
        ad::Var loss = tape.constant(ad::Mat::Zero(1, 1));
        for (int pos = 0; pos < positions(); ++pos) {
            ad::Var logits = step_logits(tape, seq.l_o, seq.l_h, pos);
            loss = ad::add(loss, ad::ce_logits(logits, seq.l_h[static_cast<size_t>(pos)]));
        }
        total_nll += loss.value()(0, 0);
        tape.backward(loss);
        if (++in_batch == batch || n + 1 == order.size()) {
            adam.step(store_);
            store_.zero_grad();
            in_batch = 0;
        }
    }
    fitted_ = true;
    return total_nll / static_cast<double>(corpus.size());
}

std::vector<int> IndexPrior::sample(int l_o, double temperature, std::mt19937_64& rng) const {
    std::vector<int> out;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int pos = 0; pos < positions(); ++pos) {
        Eigen::VectorXd p = step_probs(l_o, out, pos, temperature);
        double u = uni(rng);
        int pick = static_cast<int>(p.size()) - 1;
        double acc = 0.0;
        for (int k = 0; k < p.size(); ++k) {
            acc += p(k);
            if (u <= acc) {
                pick = k;
                break;
            }
        }
        out.push_back(pick);
    }
    return out;
}

double IndexPrior::sequence_logprob(const IndexSequence& seq) const {
    if (static_cast<int>(seq.l_h.size()) != positions()) {
        throw InvalidInputError("sequence arity does not match the prior");
    }
    double lp = 0.0;
    for (int pos = 0; pos < positions(); ++pos) {
        Eigen::VectorXd p = step_probs(seq.l_o, seq.l_h, pos);
        const int k = seq.l_h[static_cast<size_t>(pos)];
        if (k < 0 || k >= p.size()) throw InvalidInputError("hand index out of range");
        lp += std::log(std::max(p(k), 1e-300));
    }
    return lp;
}

void IndexPrior::save(const std::string& path) const {
    io::TensorMap t = io::params_to_tensors(store_);
    ad::Mat meta(1, vocab_.size() + 3);
    meta(0, 0) = static_cast<double>(vocab_.size());
    for (size_t i = 0; i < vocab_.size(); ++i) meta(0, i + 1) = vocab_[i];
    meta(0, vocab_.size() + 1) = embed_dim_;
    meta(0, vocab_.size() + 2) = hidden_;
    t["prior.meta"] = meta;
    t["prior.fitted"] = ad::Mat::Constant(1, 1, fitted_ ? 1.0 : 0.0);
    io::save_tensors(t, path);
}

IndexPrior IndexPrior::load(const std::string& path) {
    io::TensorMap t = io::load_tensors(path);
    auto it = t.find("prior.meta");
    if (it == t.end()) throw DatasetFormatError("prior checkpoint lacks metadata");
    const ad::Mat& meta = it->second;
    const int books = static_cast<int>(meta(0, 0));
    std::vector<int> vocab;
    for (int i = 0; i < books; ++i) vocab.push_back(static_cast<int>(meta(0, i + 1)));
    IndexPrior p(vocab, static_cast<int>(meta(0, books + 1)),
                 static_cast<int>(meta(0, books + 2)), /*seed=*/0);
    p.fitted_ = t.at("prior.fitted")(0, 0) != 0.0;
    t.erase("prior.meta");
    t.erase("prior.fitted");
    io::tensors_to_params(t, p.store_);
    return p;
}

FitResult fit_prior(const std::vector<IndexSequence>& corpus, std::vector<int> vocab, int epochs,
                    unsigned seed, double lr, int embed_dim, int hidden) {
    if (corpus.empty()) throw InvalidInputError("prior corpus is empty");
    FitResult r;
    r.model = IndexPrior(std::move(vocab), embed_dim, hidden, seed);
    nn::Adam adam(lr);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    for (int e = 0; e < epochs; ++e) {
        r.nll_per_epoch.push_back(r.model.train_epoch(corpus, adam, rng));
    }
    return r;
}

}  // namespace dvq::prior
