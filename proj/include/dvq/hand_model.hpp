#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace dvq::hand {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::Vector3d;
using Eigen::VectorXd;

inline constexpr int kShapeDim = 10;
inline constexpr int kPoseDim = 45;       // 15 joints x 3 axis-angle
inline constexpr int kPostureDim = 55;    // shape ++ pose
inline constexpr int kPositionDim = 6;    // translation ++ rotation
inline constexpr int kParamDim = 61;
inline constexpr int kNumJoints = 21;     // wrist + 5 x (3 articulated + tip)
inline constexpr int kNumParts = 6;       // thumb..little, palm

// The 61-value grasp parameterization.
struct HandParams {
    VectorXd shape = VectorXd::Zero(kShapeDim);       // blend coefficients
    VectorXd pose = VectorXd::Zero(kPoseDim);         // axis-angle, radians
    Vector3d rotation = Vector3d::Zero();             // global, axis-angle
    Vector3d translation = Vector3d::Zero();          // meters

    VectorXd posture() const;                         // 55: shape ++ pose
    VectorXd position() const;                        // 6: translation ++ rotation
    // Full vector in Jacobian/optimizer order: shape, pose, translation, rotation.
    VectorXd to_vector() const;
    static HandParams from_vector(const VectorXd& v61);
    static HandParams from_posture_position(const VectorXd& posture55,
                                            const VectorXd& position6);
    bool is_finite() const;
};

// Fixed-topology rest hand with skinning data and the 6-way part split.
struct HandTemplate {
    MatrixXd vertices0;                           // V x 3, rest pose
    MatrixXi faces;                               // F x 3
    MatrixXd joints0;                             // 21 x 3
    MatrixXd skinning_weights;                    // V x 21, rows sum to 1
    std::array<MatrixXd, kShapeDim> shape_basis;  // each V x 3
    std::vector<int> kinematic_tree;              // parent per joint, -1 root
    std::array<std::vector<int>, kNumParts> part_partition;  // canonical order
    std::vector<int> posed_joints;                // 15 joints carrying pose params
    std::vector<std::array<int, 3>> angle_triplets;  // (prev, mid, next) per angle
    std::vector<int> contact_candidates;          // default P_c vertex subset

    int vertex_count() const { return static_cast<int>(vertices0.rows()); }
    int face_count() const { return static_cast<int>(faces.rows()); }
    int angle_count() const { return static_cast<int>(angle_triplets.size()); }
    void validate() const;  // throws TopologyError on violated invariants
};

struct HandMesh {
    MatrixXd vertices;  // V x 3
    MatrixXd joints;    // 21 x 3
    MatrixXi faces;     // F x 3
};

// Mesh plus dense Jacobians w.r.t. the 61 parameters
// (column order: shape, pose, translation, rotation).
struct FkResult {
    HandMesh mesh;
    MatrixXd vertex_jacobian;  // 3V x 61, row order (v0.x, v0.y, v0.z, v1.x, ...)
    MatrixXd joint_jacobian;   // 63 x 61
};

// Procedural template builder. V=778 matches the full-size interface;
// smaller values produce toy templates with the same structure.
HandTemplate procedural_template(int vertex_count = 778);

HandMesh forward_kinematics(const HandParams& params, const HandTemplate& tmpl);
// with_vertex_jacobian=false skips the per-vertex dual numbers and returns
// joints + joint_jacobian only (mesh.vertices and vertex_jacobian empty).
FkResult forward_kinematics_with_jacobian(const HandParams& params,
                                          const HandTemplate& tmpl,
                                          bool with_vertex_jacobian = true);

// Per-part vertex arrays in canonical order (thumb, index, middle, ring,
// little, palm). Throws TopologyError on vertex-count mismatch.
std::array<MatrixXd, kNumParts> partition_vertices(const HandMesh& mesh,
                                                   const HandTemplate& tmpl);

// Interior angles along the five finger chains, each in [0, pi].
VectorXd joint_angles(const MatrixXd& joints, const HandTemplate& tmpl);
// Also returns d(theta)/d(joints), K x 3J, joints flattened row-major.
VectorXd joint_angles_with_jacobian(const MatrixXd& joints, const HandTemplate& tmpl,
                                    MatrixXd& jacobian);

// Returns (centered, mean).
std::pair<MatrixXd, Vector3d> center_vertices(const MatrixXd& vertices);

void save_template(const HandTemplate& tmpl, const std::string& path);
HandTemplate load_template(const std::string& path);

// MANO-format parameter import: packed little-endian f32, 61 per grasp,
// order shape(10), pose(45), translation(3), rotation(3).
std::vector<HandParams> import_mano_params(const std::string& path);

}  // namespace dvq::hand
