#pragma once

#include <random>
#include <string>
#include <vector>

#include "dvq/autodiff.hpp"

namespace dvq::nn {

using ad::Mat;
using ad::Param;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

// Adam with a fixed step-count based bias correction shared by all params.
class Adam {
public:
    explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    // Bias-correction step counter; persisted so resumed runs continue the
    // schedule exactly.
    long steps() const { return t_; }
    void set_steps(long t) { t_ = t; }

    void step(ParamStore& params);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

// Fully connected stack. Hidden layers use ReLU; the output layer is linear
// unless an activation is requested.
enum class OutputAct { linear, sigmoid, tanh };

class Mlp {
public:
    Mlp() = default;
    // Registers weights under prefix; dims = {in, h1, ..., out}.
    Mlp(ParamStore& store, const std::string& prefix, std::vector<int> dims,
        std::mt19937_64& rng, OutputAct out_act = OutputAct::linear);
    // Re-attaches to weights already present in the store (checkpoint load).
    static Mlp attach(ParamStore& store, const std::string& prefix, std::vector<int> dims,
                      OutputAct out_act = OutputAct::linear);

    Var forward(Tape& tape, Var x) const;  // x: n x in -> n x out
    const std::vector<std::string>& param_names() const { return names_; }
    int out_dim() const { return dims_.back(); }

private:
    ParamStore* store_ = nullptr;
    std::vector<int> dims_;
    std::vector<std::string> names_;  // W0, b0, W1, b1, ...
    OutputAct out_act_ = OutputAct::linear;
};

Mat glorot(int rows, int cols, std::mt19937_64& rng);

}  // namespace dvq::nn
