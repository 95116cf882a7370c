#pragma once

#include <Eigen/Core>
#include <random>
#include <string>

namespace dvq::geom {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::Vector3d;

struct TriMesh {
    MatrixXd vertices;  // n x 3, meters
    MatrixXi faces;     // f x 3
};

// Every undirected edge shared by exactly two faces.
bool is_watertight(const TriMesh& mesh);

// Signed volume via the divergence theorem (absolute value), m^3.
double mesh_volume(const TriMesh& mesh);

// Ray-parity test along +z. Mesh must be watertight for meaningful results.
bool point_inside(const TriMesh& mesh, const Vector3d& p);

// Squared distance and closest point on a triangle.
double point_triangle_dist2(const Vector3d& p, const Vector3d& a, const Vector3d& b,
                            const Vector3d& c, Vector3d* closest = nullptr);

struct ClosestHit {
    double distance = 0.0;
    Vector3d point = Vector3d::Zero();
    Vector3d normal = Vector3d::Zero();  // face normal of the closest triangle
};
ClosestHit closest_on_mesh(const TriMesh& mesh, const Vector3d& p);

// Area-weighted surface samples, deterministic per rng state.
MatrixXd sample_surface(const TriMesh& mesh, int n, std::mt19937_64& rng);

// Occupancy-intersection volume on a shared voxel grid anchored at the
// combined bounding-box minimum. Returns m^3. Throws on non-watertight input.
double voxel_intersection_volume(const TriMesh& a, const TriMesh& b, double voxel_edge);
// Occupancy volume of a single mesh on the same grid convention.
double voxel_volume(const TriMesh& mesh, double voxel_edge);

TriMesh make_sphere(double radius, int subdivisions = 3);
TriMesh make_box(const Vector3d& half_extents);
TriMesh make_cylinder(double radius, double height, int segments = 24);
TriMesh merge(const TriMesh& a, const TriMesh& b);
TriMesh translate(const TriMesh& mesh, const Vector3d& offset);

void save_obj(const TriMesh& mesh, const std::string& path);
TriMesh load_obj(const std::string& path);

}  // namespace dvq::geom
