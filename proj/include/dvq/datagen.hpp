#pragma once

#include <string>
#include <vector>

#include "dvq/geometry.hpp"
#include "dvq/hand_model.hpp"

namespace dvq::data {

using Eigen::MatrixXd;

// Primitive families for the procedural desk-scale objects.
enum class ObjectFamily { sphere, box, cylinder, composite };

struct ObjectSpec {
    ObjectFamily family = ObjectFamily::sphere;
    double min_scale = 0.03;  // meters (3 cm)
    double max_scale = 0.12;  // meters (12 cm)
    int cloud_points = 3000;  // N_o
};

struct SyntheticSample {
    geom::TriMesh object_mesh;
    MatrixXd object_cloud;  // N_o x 3
    hand::HandParams gt_params;
    MatrixXd gt_vertices;  // V x 3
};

// Watertight mesh + exactly N_o deterministic surface samples.
std::pair<geom::TriMesh, MatrixXd> make_object(const ObjectSpec& spec, unsigned seed);

struct GraspGenConfig {
    int iterations = 100;       // Adam steps on L_c + L_p
    double lr = 0.01;
    int max_attempts = 20;      // rejection budget
    double tau_contact = 0.005;
    double max_penetration_cm3 = 1.0;
    int loss_cloud_points = 600;  // subsample for the optimization loop
    bool verbose = false;         // per-attempt diagnostics on stderr
};

// Oracle grasp: optimizes the contact + penetration stack over HandParams,
// rejection-sampled until the dataset invariants hold.
hand::HandParams make_synthetic_grasp(const geom::TriMesh& object_mesh,
                                      const MatrixXd& object_cloud,
                                      const hand::HandTemplate& tmpl, unsigned seed,
                                      const GraspGenConfig& cfg = GraspGenConfig());

// Full corpus: objects cycled over the four families.
std::vector<SyntheticSample> make_corpus(int num_objects, int grasps_per_object,
                                         const hand::HandTemplate& tmpl, unsigned seed,
                                         int cloud_points = 3000,
                                         const GraspGenConfig& cfg = GraspGenConfig());

// Versioned archive: "DVQD" magic + format version + JSON manifest + packed
// little-endian arrays. Round trips bitwise.
void save_dataset(const std::vector<SyntheticSample>& samples, const std::string& path);
std::vector<SyntheticSample> load_dataset(const std::string& path);

}  // namespace dvq::data
