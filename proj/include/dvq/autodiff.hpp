#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvq::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a node owned by a Tape. Cheap to copy.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Mat& value() const;
    const Mat& grad() const;
    int rows() const { return static_cast<int>(value().rows()); }
    int cols() const { return static_cast<int>(value().cols()); }
};

// Trainable tensor with its gradient accumulator and Adam state.
struct Param {
    Mat value;
    Mat grad;
    Mat adam_m;
    Mat adam_v;

    explicit Param(Mat v)
        : value(std::move(v)),
          grad(Mat::Zero(value.rows(), value.cols())),
          adam_m(Mat::Zero(value.rows(), value.cols())),
          adam_v(Mat::Zero(value.rows(), value.cols())) {}
};

// Ordered, named registry of parameters. Serialization and the optimizer
// both walk it in insertion order.
class ParamStore {
public:
    Param& create(const std::string& name, Mat init);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    void zero_grad();
    const std::vector<std::string>& names() const { return order_; }

private:
    std::map<std::string, std::unique_ptr<Param>> params_;
    std::vector<std::string> order_;
};

struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&, int self)> back;  // empty for leaves/constants
};

// Reverse-mode tape over matrix-valued nodes. One tape per training step.
class Tape {
public:
    Var constant(Mat v);
    // Node that routes its gradient into an external parameter.
    Var use(Param& p);
    // back(tape, self_id) reads grad(self_id) and accumulates into inputs.
    Var make(Mat v, std::function<void(Tape&, int)> back);

    Mat& value(int id) { return nodes_[id].value; }
    Mat& grad(int id) { return nodes_[id].grad; }
    const Mat& value(int id) const { return nodes_[id].value; }

    // Seeds d(root)/d(root) = 1 and propagates. root must be 1x1.
    void backward(Var root);

private:
    std::vector<Node> nodes_;
    friend struct Var;
};

// ---- ops ----

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_rowvec(Var a, Var rowvec);  // broadcast a 1xC row over all rows of a
Var relu(Var a);
Var sigmoid(Var a);
Var tanh_op(Var a);
Var maxpool_rows(Var a);           // 1xC column-wise max, grad to argmax rows
Var concat_cols(const std::vector<Var>& parts);  // row vectors side by side
Var slice_cols(Var a, int start, int len);
Var reshape_rows(Var a, int rows, int cols);  // row-major reordering
Var sum(Var a);
Var sumsq(Var a);            // squared Frobenius norm
Var norm(Var a);             // Frobenius norm, safe gradient at 0
Var rownorm_sum(Var a);      // sum of row L2 norms, safe gradient at 0
Var softmax_rows(Var a);
Var stop_grad(Var a);
Var gather_row(Var a, int row);
// Forward value = quantized entry; backward copies the gradient to z.
Var straight_through(Var z, Var entry);
// Cross-entropy of one logit row against an integer target, in nats.
Var ce_logits(Var logits, int target);

}  // namespace dvq::ad
