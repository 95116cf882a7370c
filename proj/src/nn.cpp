#include "dvq/nn.hpp"

#include <cmath>

namespace dvq::nn {

void Adam::step(ParamStore& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& name : params.names()) {
        Param& p = params.at(name);
        p.adam_m = beta1_ * p.adam_m + (1.0 - beta1_) * p.grad;
        p.adam_v = beta2_ * p.adam_v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
        Mat mhat = p.adam_m / bc1;
        Mat vhat = p.adam_v / bc2;
        p.value -= lr_ * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps_).matrix());
    }
}

Mat glorot(int rows, int cols, std::mt19937_64& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-s, s);
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

Mlp::Mlp(ParamStore& store, const std::string& prefix, std::vector<int> dims,
         std::mt19937_64& rng, OutputAct out_act)
    : store_(&store), dims_(std::move(dims)), out_act_(out_act) {
    for (size_t l = 0; l + 1 < dims_.size(); ++l) {
        std::string w = prefix + ".W" + std::to_string(l);
        std::string b = prefix + ".b" + std::to_string(l);
        store.create(w, glorot(dims_[l], dims_[l + 1], rng));
        store.create(b, Mat::Zero(1, dims_[l + 1]));
        names_.push_back(w);
        names_.push_back(b);
    }
}

Mlp Mlp::attach(ParamStore& store, const std::string& prefix, std::vector<int> dims,
                OutputAct out_act) {
    Mlp m;
    m.store_ = &store;
    m.dims_ = std::move(dims);
    m.out_act_ = out_act;
    for (size_t l = 0; l + 1 < m.dims_.size(); ++l) {
        m.names_.push_back(prefix + ".W" + std::to_string(l));
        m.names_.push_back(prefix + ".b" + std::to_string(l));
    }
    return m;
}

Var Mlp::forward(Tape& tape, Var x) const {
    const size_t layers = names_.size() / 2;
    Var h = x;
    for (size_t l = 0; l < layers; ++l) {
        Var w = tape.use(store_->at(names_[2 * l]));
        Var b = tape.use(store_->at(names_[2 * l + 1]));
        h = ad::add_rowvec(ad::matmul(h, w), b);
        if (l + 1 < layers) {
            h = ad::relu(h);
        } else if (out_act_ == OutputAct::sigmoid) {
            h = ad::sigmoid(h);
        } else if (out_act_ == OutputAct::tanh) {
            h = ad::tanh_op(h);
        }
    }
    return h;
}

}  // namespace dvq::nn
