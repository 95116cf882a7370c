#include "dvq/autodiff.hpp"

#include <cmath>

namespace dvq::ad {

const Mat& Var::value() const { return tape->value(id); }
const Mat& Var::grad() const { return tape->grad(id); }

Param& ParamStore::create(const std::string& name, Mat init) {
    if (params_.count(name)) throw std::invalid_argument("duplicate param: " + name);
    auto p = std::make_unique<Param>(std::move(init));
    Param& ref = *p;
    params_[name] = std::move(p);
    order_.push_back(name);
    return ref;
}

Param& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no such param: " + name);
    return *it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no such param: " + name);
    return *it->second;
}

bool ParamStore::contains(const std::string& name) const { return params_.count(name) > 0; }

void ParamStore::zero_grad() {
    for (auto& name : order_) params_.at(name)->grad.setZero();
}

Var Tape::constant(Mat v) {
    nodes_.push_back({std::move(v), {}, nullptr});
    Node& n = nodes_.back();
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::use(Param& p) {
    Param* pp = &p;
    return make(p.value, [pp](Tape& t, int self) { pp->grad += t.grad(self); });
}

Var Tape::make(Mat v, std::function<void(Tape&, int)> back) {
    Var out = constant(std::move(v));
    nodes_[out.id].back = std::move(back);
    return out;
}

void Tape::backward(Var root) {
    if (root.tape != this) throw std::invalid_argument("backward: foreign var");
    if (nodes_[root.id].value.size() != 1)
        throw std::invalid_argument("backward: root must be scalar");
    nodes_[root.id].grad(0, 0) = 1.0;
    for (int i = root.id; i >= 0; --i) {
        if (nodes_[i].back) nodes_[i].back(*this, i);
    }
}

Var matmul(Var a, Var b) {
    int ai = a.id, bi = b.id;
    return a.tape->make(a.value() * b.value(), [ai, bi](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(ai) += g * t.value(bi).transpose();
        t.grad(bi) += t.value(ai).transpose() * g;
    });
}

Var transpose(Var a) {
    int ai = a.id;
    return a.tape->make(a.value().transpose(),
                        [ai](Tape& t, int self) { t.grad(ai) += t.grad(self).transpose(); });
}

Var add(Var a, Var b) {
    int ai = a.id, bi = b.id;
    return a.tape->make(a.value() + b.value(), [ai, bi](Tape& t, int self) {
        t.grad(ai) += t.grad(self);
        t.grad(bi) += t.grad(self);
    });
}

Var sub(Var a, Var b) {
    int ai = a.id, bi = b.id;
    return a.tape->make(a.value() - b.value(), [ai, bi](Tape& t, int self) {
        t.grad(ai) += t.grad(self);
        t.grad(bi) -= t.grad(self);
    });
}

Var mul(Var a, Var b) {
    int ai = a.id, bi = b.id;
    return a.tape->make(a.value().cwiseProduct(b.value()), [ai, bi](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(ai) += g.cwiseProduct(t.value(bi));
        t.grad(bi) += g.cwiseProduct(t.value(ai));
    });
}

Var scale(Var a, double s) {
    int ai = a.id;
    return a.tape->make(a.value() * s,
                        [ai, s](Tape& t, int self) { t.grad(ai) += t.grad(self) * s; });
}

Var add_rowvec(Var a, Var rowvec) {
    int ai = a.id, bi = rowvec.id;
    Mat v = a.value();
    v.rowwise() += rowvec.value().row(0);
    return a.tape->make(std::move(v), [ai, bi](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(ai) += g;
        t.grad(bi) += g.colwise().sum();
    });
}

Var relu(Var a) {
    int ai = a.id;
    return a.tape->make(a.value().cwiseMax(0.0), [ai](Tape& t, int self) {
        t.grad(ai) += t.grad(self).cwiseProduct(
            (t.value(ai).array() > 0.0).cast<double>().matrix());
    });
}

Var sigmoid(Var a) {
    int ai = a.id;
    Mat v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return a.tape->make(std::move(v), [ai](Tape& t, int self) {
        const Mat& s = t.value(self);
        t.grad(ai) += t.grad(self).cwiseProduct(
            (s.array() * (1.0 - s.array())).matrix());
    });
}

Var tanh_op(Var a) {
    int ai = a.id;
    return a.tape->make(a.value().array().tanh().matrix(), [ai](Tape& t, int self) {
        const Mat& s = t.value(self);
        t.grad(ai) += t.grad(self).cwiseProduct((1.0 - s.array().square()).matrix());
    });
}

Var maxpool_rows(Var a) {
    int ai = a.id;
    const Mat& x = a.value();
    Mat v(1, x.cols());
    std::vector<int> arg(static_cast<size_t>(x.cols()));
    for (int c = 0; c < x.cols(); ++c) {
        int r;
        v(0, c) = x.col(c).maxCoeff(&r);
        arg[static_cast<size_t>(c)] = r;
    }
    return a.tape->make(std::move(v), [ai, arg](Tape& t, int self) {
        const Mat& g = t.grad(self);
        for (int c = 0; c < g.cols(); ++c)
            t.grad(ai)(arg[static_cast<size_t>(c)], c) += g(0, c);
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    int total = 0;
    for (auto& p : parts) total += p.cols();
    Mat v(1, total);
    std::vector<int> ids, offs;
    int off = 0;
    for (auto& p : parts) {
        v.block(0, off, 1, p.cols()) = p.value();
        ids.push_back(p.id);
        offs.push_back(off);
        off += p.cols();
    }
    return parts[0].tape->make(std::move(v), [ids, offs](Tape& t, int self) {
        const Mat& g = t.grad(self);
        for (size_t i = 0; i < ids.size(); ++i) {
            Mat& gi = t.grad(ids[i]);
            gi += g.block(0, offs[i], 1, gi.cols());
        }
    });
}

Var slice_cols(Var a, int start, int len) {
    int ai = a.id;
    return a.tape->make(a.value().block(0, start, a.rows(), len),
                        [ai, start, len](Tape& t, int self) {
                            const Mat& g = t.grad(self);
                            t.grad(ai).block(0, start, g.rows(), len) += g;
                        });
}

Var reshape_rows(Var a, int rows, int cols) {
    int ai = a.id;
    const Mat& x = a.value();
    if (x.size() != rows * cols) throw std::invalid_argument("reshape_rows: size mismatch");
    Mat v(rows, cols);
    int sc = static_cast<int>(x.cols());
    for (int i = 0; i < x.size(); ++i)
        v(i / cols, i % cols) = x(i / sc, i % sc);
    return a.tape->make(std::move(v), [ai, cols, sc](Tape& t, int self) {
        const Mat& g = t.grad(self);
        Mat& ga = t.grad(ai);
        for (int i = 0; i < g.size(); ++i)
            ga(i / sc, i % sc) += g(i / cols, i % cols);
    });
}

Var sum(Var a) {
    int ai = a.id;
    Mat v(1, 1);
    v(0, 0) = a.value().sum();
    return a.tape->make(std::move(v), [ai](Tape& t, int self) {
        t.grad(ai).array() += t.grad(self)(0, 0);
    });
}

Var sumsq(Var a) {
    int ai = a.id;
    Mat v(1, 1);
    v(0, 0) = a.value().squaredNorm();
    return a.tape->make(std::move(v), [ai](Tape& t, int self) {
        t.grad(ai) += 2.0 * t.grad(self)(0, 0) * t.value(ai);
    });
}

Var norm(Var a) {
    int ai = a.id;
    double n = a.value().norm();
    Mat v(1, 1);
    v(0, 0) = n;
    return a.tape->make(std::move(v), [ai, n](Tape& t, int self) {
        if (n > 1e-12) t.grad(ai) += (t.grad(self)(0, 0) / n) * t.value(ai);
    });
}

Var rownorm_sum(Var a) {
    int ai = a.id;
    const Mat& x = a.value();
    Eigen::VectorXd norms = x.rowwise().norm();
    Mat v(1, 1);
    v(0, 0) = norms.sum();
    return a.tape->make(std::move(v), [ai, norms](Tape& t, int self) {
        const double g = t.grad(self)(0, 0);
        const Mat& x = t.value(ai);
        for (int r = 0; r < x.rows(); ++r) {
            if (norms(r) > 1e-12) t.grad(ai).row(r) += (g / norms(r)) * x.row(r);
        }
    });
}

Var softmax_rows(Var a) {
    int ai = a.id;
    Mat v = a.value();
    for (int r = 0; r < v.rows(); ++r) {
        Eigen::ArrayXd row = v.row(r).array();
        row -= row.maxCoeff();
        row = row.exp();
        v.row(r) = (row / row.sum()).matrix();
    }
    return a.tape->make(std::move(v), [ai](Tape& t, int self) {
        const Mat& s = t.value(self);
        const Mat& g = t.grad(self);
        for (int r = 0; r < s.rows(); ++r) {
            double dot = s.row(r).dot(g.row(r));
            t.grad(ai).row(r) += s.row(r).cwiseProduct(g.row(r)) - dot * s.row(r);
        }
    });
}

Var stop_grad(Var a) { return a.tape->constant(a.value()); }

Var gather_row(Var a, int row) {
    int ai = a.id;
    return a.tape->make(a.value().row(row), [ai, row](Tape& t, int self) {
        t.grad(ai).row(row) += t.grad(self);
    });
}

Var straight_through(Var z, Var entry) {
    if (z.value().rows() != entry.value().rows() || z.value().cols() != entry.value().cols())
        throw std::invalid_argument("straight_through: shape mismatch");
    int zi = z.id;
    return z.tape->make(entry.value(), [zi](Tape& t, int self) {
        t.grad(zi) += t.grad(self);
    });
}

Var ce_logits(Var logits, int target) {
    int ai = logits.id;
    Eigen::ArrayXd row = logits.value().row(0).array();
    double mx = row.maxCoeff();
    Eigen::ArrayXd p = (row - mx).exp();
    p /= p.sum();
    Mat v(1, 1);
    v(0, 0) = -std::log(std::max(p(target), 1e-300));
    std::vector<double> probs(p.data(), p.data() + p.size());
    return logits.tape->make(std::move(v), [ai, target, probs](Tape& t, int self) {
        double g = t.grad(self)(0, 0);
        Mat& ga = t.grad(ai);
        for (int c = 0; c < ga.cols(); ++c)
            ga(0, c) += g * (probs[static_cast<size_t>(c)] - (c == target ? 1.0 : 0.0));
    });
}

}  // namespace dvq::ad
