#include "dvq/quantizer.hpp"

#include <fstream>

#include "dvq/errors.hpp"

namespace dvq::vq {

QuantizeResult quantize(const RowVectorXd& z, Codebook& book, bool count_usage) {
    if (z.size() != book.dim()) throw InvalidInputError("quantize: dimension mismatch");
    int best = 0;
    double best_d2 = std::numeric_limits<double>::max();
    for (int i = 0; i < book.size(); ++i) {
        double d2 = (book.entries().row(i) - z).squaredNorm();
        if (d2 < best_d2) {  // strict: ties keep the lowest index
            best_d2 = d2;
            best = i;
        }
    }
    if (count_usage) book.count(best);
    return {book.entries().row(best), best};
}

CodebookLossValues codebook_losses(const std::vector<RowVectorXd>& z_parts,
                                   const std::vector<RowVectorXd>& zq_parts,
                                   const RowVectorXd& z_t, const RowVectorXd& zq_t,
                                   double beta, double lambda_e) {
    if (z_parts.size() != zq_parts.size())
        throw InvalidInputError("codebook_losses: arity mismatch");
    CodebookLossValues v;
    for (size_t i = 0; i < z_parts.size(); ++i) {
        v.l_h += (zq_parts[i] - z_parts[i]).squaredNorm();
        v.l_h += beta * (z_parts[i] - zq_parts[i]).squaredNorm();
    }
    v.l_o = (zq_t - z_t).squaredNorm() + beta * (z_t - zq_t).squaredNorm();
    v.l_e = lambda_e * (v.l_h + v.l_o);
    return v;
}

ad::Var commitment_loss(ad::Var z, ad::Var entry, double beta) {
    ad::Var align = ad::sumsq(ad::sub(ad::stop_grad(entry), z));
    ad::Var commit = ad::sumsq(ad::sub(ad::stop_grad(z), entry));
    return ad::add(align, ad::scale(commit, beta));
}

void write_usage_csv(const std::vector<const Codebook*>& books,
                     const std::vector<std::string>& names, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "book,index,count\n";
    for (size_t b = 0; b < books.size(); ++b)
        for (int i = 0; i < books[b]->size(); ++i)
            os << names[b] << ',' << i << ',' << books[b]->usage()[static_cast<size_t>(i)] << '\n';
}

}  // namespace dvq::vq
