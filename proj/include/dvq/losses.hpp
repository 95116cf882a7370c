#pragma once

#include <vector>

#include "dvq/autodiff.hpp"
#include "dvq/geometry.hpp"
#include "dvq/hand_model.hpp"

namespace dvq::loss {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Hyperparameters of Eqs. 1-18.
struct LossWeights {
    double lambda_e = 10.0;
    double lambda_m = -50.0;  // negative: L_m is a coverage ratio to maximize
    double lambda_c = 1500.0;
    double lambda_p = 5.0;
    double lambda_h = 0.1;
    double lambda_v = 10.0;
    double beta = 0.25;
    double tau_contact = 0.005;  // meters
};

// Index sets for the contact/penetration terms.
struct ContactSets {
    std::vector<int> gt_contact;    // P_m: object-point indices (ground truth)
    std::vector<int> pred_contact;  // P-hat_m: object-point indices (prediction)
    std::vector<int> candidates;    // P_c: hand-vertex indices
    std::vector<int> penetrating;   // P_in: hand-vertex indices
};

// Object points within tau of any hand vertex (deduplicated, ascending).
std::vector<int> contact_map(const MatrixXd& hand_vertices, const MatrixXd& object_cloud,
                             double tau);

// Fills pred_contact/candidates/penetrating from the predicted hand;
// gt_contact is produced by applying contact_map to the ground-truth hand.
// Throws on a non-watertight object mesh (the inside test needs parity).
ContactSets compute_contact_sets(const hand::HandMesh& hand, const MatrixXd& object_cloud,
                                 const geom::TriMesh& object_mesh, double tau,
                                 const hand::HandTemplate& tmpl);

struct ReconLossValues {
    double l_posture = 0.0;
    double l_position = 0.0;
    double l_v = 0.0;
    double l_r = 0.0;
};
// Eqs. 6, 10, 11, 12 evaluated as plain values (L_v re-runs FK on the
// prediction; vertices compared uncentered).
ReconLossValues reconstruction_loss(const hand::HandParams& gt, const VectorXd& pred_posture,
                                    const VectorXd& pred_position, const MatrixXd& gt_vertices,
                                    const hand::HandTemplate& tmpl, const LossWeights& w);

// Eq. 13 / Eq. 14. grad_vertices (optional) receives dL_c/d(hand vertices).
struct ContactLossValues {
    double l_c = 0.0;
    double l_m = 0.0;
};
ContactLossValues contact_losses(const ContactSets& sets, const MatrixXd& hand_vertices,
                                 const MatrixXd& object_cloud, MatrixXd* grad_vertices = nullptr);

// Eqs. 15-16. grad_vertices (optional) receives dL_p/d(hand vertices).
double penetration_loss(const ContactSets& sets, const MatrixXd& hand_vertices,
                        const MatrixXd& object_cloud, MatrixXd* grad_vertices = nullptr);

// Eq. 17 + Eq. 18. Throws InvalidInputError naming the offending component
// if any input is non-finite.
struct LossComponents {
    double l_r = 0.0;
    double l_e = 0.0;
    double l_m = 0.0;
    double l_c = 0.0;
    double l_p = 0.0;
};
double total_loss(const LossComponents& c, const LossWeights& w);

// In-graph node: lambda_c * L_c + lambda_p * L_p as a function of the hand
// vertices, with the analytic gradient above. Sets are fixed at call time.
ad::Var contact_penetration_node(ad::Var hand_vertices, const ContactSets& sets,
                                 const MatrixXd& object_cloud, const LossWeights& w);

}  // namespace dvq::loss
