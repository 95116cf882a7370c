#include "dvq/losses.hpp"

#include <cmath>
#include <memory>

#include "dvq/errors.hpp"

namespace dvq::loss {

std::vector<int> contact_map(const MatrixXd& hand_vertices, const MatrixXd& object_cloud,
                             double tau) {
    if (tau <= 0.0) throw InvalidParameterError("tau_contact must be positive");
    std::vector<int> out;
    const double tau2 = tau * tau;
    for (int i = 0; i < object_cloud.rows(); ++i) {
        const Eigen::RowVector3d p = object_cloud.row(i);
        for (int v = 0; v < hand_vertices.rows(); ++v) {
            if ((hand_vertices.row(v) - p).squaredNorm() <= tau2) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

ContactSets compute_contact_sets(const hand::HandMesh& hand, const MatrixXd& object_cloud,
                                 const geom::TriMesh& object_mesh, double tau,
                                 const hand::HandTemplate& tmpl) {
    if (!geom::is_watertight(object_mesh)) {
        throw InvalidInputError("inside test requires a watertight object mesh");
    }
    ContactSets sets;
    sets.pred_contact = contact_map(hand.vertices, object_cloud, tau);
    sets.candidates = tmpl.contact_candidates;
    for (int v = 0; v < hand.vertices.rows(); ++v) {
        if (geom::point_inside(object_mesh, hand.vertices.row(v).transpose())) {
            sets.penetrating.push_back(v);
        }
    }
    return sets;
}

ReconLossValues reconstruction_loss(const hand::HandParams& gt, const VectorXd& pred_posture,
                                    const VectorXd& pred_position, const MatrixXd& gt_vertices,
                                    const hand::HandTemplate& tmpl, const LossWeights& w) {
    if (pred_posture.size() != hand::kPostureDim || pred_position.size() != hand::kPositionDim) {
        throw InvalidInputError("reconstruction_loss: bad prediction shape");
    }
    ReconLossValues v;
    v.l_posture = (pred_posture - gt.posture()).norm();
    v.l_position = (pred_position - gt.position()).norm();
    const hand::HandParams pred =
        hand::HandParams::from_posture_position(pred_posture, pred_position);
    const hand::HandMesh mesh = hand::forward_kinematics(pred, tmpl);
    if (gt_vertices.rows() != mesh.vertices.rows()) {
        throw InvalidInputError("reconstruction_loss: vertex count mismatch");
    }
    // Eq. 11: summed per-vertex Euclidean distance. The per-vertex sum (not
    // a single Frobenius norm) is what keeps lambda_v * L_v on the same
    // gradient scale as the lambda_c contact term.
    v.l_v = (mesh.vertices - gt_vertices).rowwise().norm().sum();
    v.l_r = w.lambda_h * (v.l_posture + v.l_position) + w.lambda_v * v.l_v;
    return v;
}

ContactLossValues contact_losses(const ContactSets& sets, const MatrixXd& hand_vertices,
                                 const MatrixXd& object_cloud, MatrixXd* grad_vertices) {
    ContactLossValues out;
    if (grad_vertices) grad_vertices->setZero(hand_vertices.rows(), 3);

    // Eq. 13: sum over ground-truth contact points of the distance to the
    // nearest candidate hand vertex.
    if (!sets.candidates.empty()) {
        for (int pm : sets.gt_contact) {
            const Eigen::RowVector3d p = object_cloud.row(pm);
            int best = -1;
            double best_d2 = std::numeric_limits<double>::max();
            for (int c : sets.candidates) {
                const double d2 = (hand_vertices.row(c) - p).squaredNorm();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = c;
                }
            }
            const double d = std::sqrt(best_d2);
            out.l_c += d;
            if (grad_vertices && d > 1e-12) {
                grad_vertices->row(best) += (hand_vertices.row(best) - p) / d;
            }
        }
    }

    // Eq. 14: |P_m intersect P-hat_m| / |P_m|; defined as 0 for empty P_m.
    if (!sets.gt_contact.empty()) {
        size_t hits = 0;
        size_t j = 0;
        for (int pm : sets.gt_contact) {
            while (j < sets.pred_contact.size() && sets.pred_contact[j] < pm) ++j;
            if (j < sets.pred_contact.size() && sets.pred_contact[j] == pm) ++hits;
        }
        out.l_m = static_cast<double>(hits) / static_cast<double>(sets.gt_contact.size());
    }
    return out;
}

double penetration_loss(const ContactSets& sets, const MatrixXd& hand_vertices,
                        const MatrixXd& object_cloud, MatrixXd* grad_vertices) {
    if (grad_vertices) grad_vertices->setZero(hand_vertices.rows(), 3);
    double l_p = 0.0;
    for (int v : sets.penetrating) {
        const Eigen::RowVector3d p = hand_vertices.row(v);
        double best_d2 = std::numeric_limits<double>::max();
        int best = -1;
        for (int i = 0; i < object_cloud.rows(); ++i) {
            const double d2 = (object_cloud.row(i) - p).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        l_p += best_d2;
        if (grad_vertices && best >= 0) {
            grad_vertices->row(v) += 2.0 * (p - object_cloud.row(best));
        }
    }
    return l_p;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
    const struct {
        const char* name;
        double value;
    } items[] = {{"L_R", c.l_r}, {"L_E", c.l_e}, {"L_m", c.l_m}, {"L_c", c.l_c}, {"L_p", c.l_p}};
    for (const auto& it : items) {
        if (!std::isfinite(it.value)) {
            throw InvalidInputError(std::string("total_loss: non-finite component ") + it.name);
        }
    }
    return c.l_r + c.l_e + w.lambda_m * c.l_m + w.lambda_c * c.l_c + w.lambda_p * c.l_p;
}

ad::Var contact_penetration_node(ad::Var hand_vertices, const ContactSets& sets,
                                 const MatrixXd& object_cloud, const LossWeights& w) {
    MatrixXd gc, gp;
    const ContactLossValues cv = contact_losses(sets, hand_vertices.value(), object_cloud, &gc);
    const double lp = penetration_loss(sets, hand_vertices.value(), object_cloud, &gp);
    auto grad = std::make_shared<MatrixXd>(w.lambda_c * gc + w.lambda_p * gp);
    const double value = w.lambda_c * cv.l_c + w.lambda_p * lp;
    const int vid = hand_vertices.id;
    ad::Mat out(1, 1);
    out(0, 0) = value;
    return hand_vertices.tape->make(out, [grad, vid](ad::Tape& t, int self) {
        t.grad(vid) += t.grad(self)(0, 0) * (*grad);
    });
}

}  // namespace dvq::loss
