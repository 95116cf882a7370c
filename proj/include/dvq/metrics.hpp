#pragma once

#include <utility>
#include <vector>

#include "dvq/geometry.hpp"
#include "dvq/hand_model.hpp"

namespace dvq::metrics {

using Eigen::MatrixXd;

// Aggregate row of the evaluation report.
struct MetricsReport {
    double contact_ratio = 0.0;       // percent
    double penetration_volume = 0.0;  // cm^3
    double grasp_disp = 0.0;          // cm
    double entropy = 0.0;             // nats
    double cluster_size = 0.0;        // mean member-to-centroid distance
    double quality_index = 0.0;
    double runtime_s = 0.0;
};

// One evaluated grasp: the posed hand and the object it targets.
struct GraspCase {
    MatrixXd hand_vertices;  // V x 3
    const geom::TriMesh* object_mesh = nullptr;
    const MatrixXd* object_cloud = nullptr;  // n x 3
};

// Fraction (x100) of grasps whose min hand-object distance is <= tau or that
// penetrate the object.
double contact_ratio(const std::vector<GraspCase>& grasps, double tau = 0.005);

// Voxel edge chosen so each voxel holds 0.1 cm^3 (1e-7 m^3).
inline constexpr double kVoxelEdgeMeters = 4.641588833612779e-3;  // cbrt(1e-7 m^3)
double penetration_volume_cm3(const geom::TriMesh& hand, const geom::TriMesh& object);

// Deterministic rigid-body proxy: hand fixed, object under gravity with
// penalty-spring contacts; returns the center-of-mass displacement in cm.
struct SimConfig {
    double gravity = 9.8;          // m/s^2
    double dt = 1.0 / 240.0;       // s
    double duration = 1.0;         // s
    double mass = 0.1;             // kg
    double spring_k = 4000.0;      // N/m
    double damping = 40.0;         // N*s/m, applied along active contacts
    double contact_radius = 0.003; // m
    int contact_samples = 200;
};
double simulation_displacement(const geom::TriMesh& hand, const geom::TriMesh& object,
                               const SimConfig& cfg = SimConfig());

// K-means diversity on flattened joint positions (21 x 3 per grasp).
struct DiversityResult {
    double entropy = 0.0;       // nats, over cluster occupancy
    double cluster_size = 0.0;  // mean member-to-centroid distance
};
DiversityResult diversity(const std::vector<hand::HandParams>& grasps,
                          const hand::HandTemplate& tmpl, int k = 20, unsigned seed = 0,
                          int restarts = 20);

// Eq. 19: Q = a*x + (1-a)*y, lower is better.
double quality_index(double penetration_cm3, double disp_cm, double a = 0.301);

// Fraction of grasps with penetration <= threshold AND displacement <= the
// fixed disp threshold, for each penetration threshold in the sweep.
std::vector<std::pair<double, double>> high_quality_ratio(
    const std::vector<double>& penetration_cm3, const std::vector<double>& disp_cm,
    const std::vector<double>& pen_thresholds, double disp_threshold);

}  // namespace dvq::metrics
