#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dvq/autodiff.hpp"

namespace dvq::vq {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

// One discrete embedding table with lookup counters.
class Codebook {
public:
    Codebook() = default;
    Codebook(MatrixXd entries) : entries_(std::move(entries)), usage_(entries_.rows(), 0) {}

    int size() const { return static_cast<int>(entries_.rows()); }
    int dim() const { return static_cast<int>(entries_.cols()); }
    const MatrixXd& entries() const { return entries_; }
    MatrixXd& entries() { return entries_; }
    const std::vector<long>& usage() const { return usage_; }
    void reset_usage() { usage_.assign(static_cast<size_t>(size()), 0); }
    void count(int index) { usage_[static_cast<size_t>(index)]++; }

private:
    MatrixXd entries_;  // S x d
    std::vector<long> usage_;
};

struct QuantizeResult {
    RowVectorXd quantized;  // equals entries.row(index) exactly
    int index = -1;
};

// Nearest entry by Euclidean distance; ties broken by lowest index.
QuantizeResult quantize(const RowVectorXd& z, Codebook& book, bool count_usage = true);

// L_h, L_o, L_E with the stop-gradient split evaluated as plain values.
struct CodebookLossValues {
    double l_h = 0.0;
    double l_o = 0.0;
    double l_e = 0.0;
};
CodebookLossValues codebook_losses(const std::vector<RowVectorXd>& z_parts,
                                   const std::vector<RowVectorXd>& zq_parts,
                                   const RowVectorXd& z_t, const RowVectorXd& zq_t,
                                   double beta, double lambda_e);

// In-graph codebook commitment term for one feature:
// ||sg(zq) - z||^2 + beta * ||sg(z) - zq||^2.
// `entry` must be a gather_row over the codebook parameter so the second
// term's gradient lands on the embedding only.
ad::Var commitment_loss(ad::Var z, ad::Var entry, double beta);

// CSV dump (columns book,index,count) for usage-histogram plots.
void write_usage_csv(const std::vector<const Codebook*>& books,
                     const std::vector<std::string>& names, const std::string& path);

}  // namespace dvq::vq
