#include "dvq/hand_model.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dvq/errors.hpp"
#include "dvq/jet.hpp"
#include "dvq/serialize.hpp"

namespace dvq::hand {

namespace {

struct FingerSpec {
    Vector3d base;
    Vector3d dir;      // unit
    double seg_len;
    double radius;
};

std::array<FingerSpec, 5> finger_specs() {
    auto unit = [](double x, double y, double z) { return Vector3d(x, y, z).normalized(); };
    return {FingerSpec{{-0.055, 0.015, 0.0}, unit(-0.6, 0.8, 0.0), 0.030, 0.009},
            FingerSpec{{-0.027, 0.085, 0.0}, unit(0.0, 1.0, 0.0), 0.028, 0.008},
            FingerSpec{{-0.009, 0.088, 0.0}, unit(0.0, 1.0, 0.0), 0.030, 0.008},
            FingerSpec{{0.009, 0.086, 0.0}, unit(0.0, 1.0, 0.0), 0.028, 0.008},
            FingerSpec{{0.027, 0.080, 0.0}, unit(0.0, 1.0, 0.0), 0.024, 0.0075}};
}

void frame(const Vector3d& d, Vector3d& u, Vector3d& w) {
    u = std::abs(d.z()) < 0.9 ? d.cross(Vector3d::UnitZ()).normalized()
                              : d.cross(Vector3d::UnitX()).normalized();
    w = d.cross(u);
}

// Closed tube along a straight axis: `rings` rings of `m` vertices plus two
// cap centers. Appends into the vertex/face lists.
void append_tube(std::vector<Vector3d>& verts, std::vector<std::array<int, 3>>& faces,
                 const Vector3d& a, const Vector3d& b, double rx, double rz, int rings,
                 int m) {
    const int base = static_cast<int>(verts.size());
    Vector3d d = (b - a).normalized();
    Vector3d u, w;
    frame(d, u, w);
    const double len = (b - a).norm();
    for (int s = 0; s < rings; ++s) {
        double t = rings == 1 ? 0.5 * len
                              : len * static_cast<double>(s) / static_cast<double>(rings - 1);
        for (int k = 0; k < m; ++k) {
            double phi = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(m);
            verts.push_back(a + t * d + rx * std::cos(phi) * u + rz * std::sin(phi) * w);
        }
    }
    const int cap_bot = static_cast<int>(verts.size());
    verts.push_back(a - 1e-4 * d);
    const int cap_top = static_cast<int>(verts.size());
    verts.push_back(b + 1e-4 * d);
    auto ring_v = [&](int s, int k) { return base + s * m + (k % m); };
    for (int s = 0; s + 1 < rings; ++s) {
        for (int k = 0; k < m; ++k) {
            faces.push_back({ring_v(s, k), ring_v(s, k + 1), ring_v(s + 1, k)});
            faces.push_back({ring_v(s + 1, k), ring_v(s, k + 1), ring_v(s + 1, k + 1)});
        }
    }
    for (int k = 0; k < m; ++k) {
        faces.push_back({cap_bot, ring_v(0, k + 1), ring_v(0, k)});
        faces.push_back({cap_top, ring_v(rings - 1, k), ring_v(rings - 1, k + 1)});
    }
}

MatrixXd build_shape_basis(int k, const MatrixXd& v0,
                           const std::array<std::vector<int>, kNumParts>& parts) {
    const auto specs = finger_specs();
    MatrixXd b = MatrixXd::Zero(v0.rows(), 3);
    if (k == 0) {
        b = 0.1 * v0;
    } else if (k <= 3) {
        b.col(k - 1) = 0.1 * v0.col(k - 1);
    } else if (k <= 8) {
        const int f = k - 4;
        for (int idx : parts[static_cast<size_t>(f)]) {
            Vector3d rel = v0.row(idx).transpose() - specs[static_cast<size_t>(f)].base;
            double along = rel.dot(specs[static_cast<size_t>(f)].dir);
            b.row(idx) = (0.1 * along * specs[static_cast<size_t>(f)].dir).transpose();
        }
    } else {
        for (int idx : parts[5]) b(idx, 1) = 0.05 * v0(idx, 1);
    }
    return b;
}

}  // namespace

VectorXd HandParams::posture() const {
    VectorXd p(kPostureDim);
    p << shape, pose;
    return p;
}

VectorXd HandParams::position() const {
    VectorXd p(kPositionDim);
    p << translation, rotation;
    return p;
}

VectorXd HandParams::to_vector() const {
    VectorXd v(kParamDim);
    v << shape, pose, translation, rotation;
    return v;
}

HandParams HandParams::from_vector(const VectorXd& v) {
    if (v.size() != kParamDim) throw InvalidParameterError("expected 61 parameters");
    HandParams p;
    p.shape = v.segment(0, kShapeDim);
    p.pose = v.segment(kShapeDim, kPoseDim);
    p.translation = v.segment(kPostureDim, 3);
    p.rotation = v.segment(kPostureDim + 3, 3);
    return p;
}

HandParams HandParams::from_posture_position(const VectorXd& posture55,
                                             const VectorXd& position6) {
    if (posture55.size() != kPostureDim || position6.size() != kPositionDim)
        throw InvalidParameterError("posture/position size mismatch");
    HandParams p;
    p.shape = posture55.segment(0, kShapeDim);
    p.pose = posture55.segment(kShapeDim, kPoseDim);
    p.translation = position6.segment(0, 3);
    p.rotation = position6.segment(3, 3);
    return p;
}

bool HandParams::is_finite() const { return to_vector().allFinite(); }

void HandTemplate::validate() const {
    const int v = vertex_count();
    std::vector<int> seen(static_cast<size_t>(v), 0);
    for (const auto& part : part_partition)
        for (int idx : part) {
            if (idx < 0 || idx >= v) throw TopologyError("partition index out of range");
            if (seen[static_cast<size_t>(idx)]++) throw TopologyError("partition overlap");
        }
    for (int i = 0; i < v; ++i)
        if (!seen[static_cast<size_t>(i)]) throw TopologyError("partition does not cover vertex");
    for (int r = 0; r < skinning_weights.rows(); ++r) {
        if (std::abs(skinning_weights.row(r).sum() - 1.0) > 1e-6)
            throw TopologyError("skinning weights row does not sum to 1");
        if ((skinning_weights.row(r).array() < -1e-12).any())
            throw TopologyError("negative skinning weight");
    }
    for (int f = 0; f < faces.rows(); ++f)
        for (int c = 0; c < 3; ++c)
            if (faces(f, c) < 0 || faces(f, c) >= v) throw TopologyError("face index out of range");
    for (size_t j = 0; j < kinematic_tree.size(); ++j)
        if (kinematic_tree[j] >= static_cast<int>(j))
            throw TopologyError("kinematic tree not topologically ordered");
}

HandTemplate procedural_template(int vertex_count) {
    HandTemplate t;
    const auto specs = finger_specs();

    // Joints: wrist, then per finger three articulated joints and a tip.
    t.joints0.resize(kNumJoints, 3);
    t.joints0.row(0).setZero();
    t.kinematic_tree.assign(kNumJoints, -1);
    for (int f = 0; f < 5; ++f) {
        const auto& s = specs[static_cast<size_t>(f)];
        for (int k = 0; k < 4; ++k) {
            int j = 1 + 4 * f + k;
            t.joints0.row(j) = (s.base + k * s.seg_len * s.dir).transpose();
            t.kinematic_tree[static_cast<size_t>(j)] = k == 0 ? 0 : j - 1;
        }
        for (int k = 0; k < 3; ++k) t.posed_joints.push_back(1 + 4 * f + k);
        t.angle_triplets.push_back({0, 1 + 4 * f, 2 + 4 * f});
        t.angle_triplets.push_back({1 + 4 * f, 2 + 4 * f, 3 + 4 * f});
        t.angle_triplets.push_back({2 + 4 * f, 3 + 4 * f, 4 + 4 * f});
    }

    std::vector<Vector3d> verts;
    std::vector<std::array<int, 3>> faces;
    const int per_finger_budget = vertex_count / 7;

    if (vertex_count >= 62) {
        // Tube construction: each part is a closed surface component.
        const int m = 6;
        const int rings = std::max(1, (per_finger_budget - 2) / m);
        for (int f = 0; f < 5; ++f) {
            const auto& s = specs[static_cast<size_t>(f)];
            int start = static_cast<int>(verts.size());
            append_tube(verts, faces, s.base + 0.002 * s.dir, s.base + 3.0 * s.seg_len * s.dir,
                        s.radius, s.radius, rings, m);
            auto& part = t.part_partition[static_cast<size_t>(f)];
            for (int i = start; i < static_cast<int>(verts.size()); ++i) part.push_back(i);
        }
        const int palm_budget = vertex_count - static_cast<int>(verts.size());
        const int pm = 12;
        const int prings = std::max(2, (palm_budget - 2) / pm);
        int start = static_cast<int>(verts.size());
        append_tube(verts, faces, Vector3d(0.0, 0.008, 0.0), Vector3d(0.0, 0.075, 0.0), 0.042,
                    0.013, prings, pm);
        // Pad out to the requested count with extra surface points (no faces).
        while (static_cast<int>(verts.size()) < vertex_count)
            verts.push_back(Vector3d(0.0, 0.04, 0.013));
        for (int i = start; i < static_cast<int>(verts.size()); ++i)
            t.part_partition[5].push_back(i);
    } else {
        // Point template for partition/FK tests: evenly split, no faces.
        if (vertex_count < kNumParts) throw InvalidParameterError("template too small");
        const int per = vertex_count / kNumParts;
        int extra = vertex_count % kNumParts;
        for (int f = 0; f < 5; ++f) {
            const auto& s = specs[static_cast<size_t>(f)];
            int count = per;
            for (int i = 0; i < count; ++i) {
                t.part_partition[static_cast<size_t>(f)].push_back(
                    static_cast<int>(verts.size()));
                double u = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
                verts.push_back(s.base + u * 3.0 * s.seg_len * s.dir);
            }
        }
        int count = per + extra;
        for (int i = 0; i < count; ++i) {
            t.part_partition[5].push_back(static_cast<int>(verts.size()));
            double u = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
            verts.push_back(Vector3d(0.0, 0.07 * u, 0.0));
        }
    }

    const int v = static_cast<int>(verts.size());
    t.vertices0.resize(v, 3);
    for (int i = 0; i < v; ++i) t.vertices0.row(i) = verts[static_cast<size_t>(i)].transpose();
    t.faces.resize(static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i)
        for (int c = 0; c < 3; ++c) t.faces(static_cast<int>(i), c) = faces[i][static_cast<size_t>(c)];

    // Skinning: finger vertices blend over wrist + own chain by distance,
    // palm rides the wrist rigidly.
    t.skinning_weights = MatrixXd::Zero(v, kNumJoints);
    for (int f = 0; f < 5; ++f) {
        const auto& s = specs[static_cast<size_t>(f)];
        const double sigma = s.seg_len;
        for (int idx : t.part_partition[static_cast<size_t>(f)]) {
            Vector3d p = t.vertices0.row(idx).transpose();
            double total = 0.0;
            std::array<int, 4> joints = {1 + 4 * f, 2 + 4 * f, 3 + 4 * f, 4 + 4 * f};
            for (int j : joints) {
                double d2 = (p - t.joints0.row(j).transpose()).squaredNorm();
                double wj = std::exp(-d2 / (2.0 * sigma * sigma));
                t.skinning_weights(idx, j) = wj;
                total += wj;
            }
            t.skinning_weights.row(idx) /= total;
        }
    }
    for (int idx : t.part_partition[5]) t.skinning_weights(idx, 0) = 1.0;

    for (int k = 0; k < kShapeDim; ++k)
        t.shape_basis[static_cast<size_t>(k)] = build_shape_basis(k, t.vertices0, t.part_partition);

    // Contact candidates: fingertip caps plus the palm-pad side of the palm.
    for (int f = 0; f < 5; ++f) {
        const auto& s = specs[static_cast<size_t>(f)];
        const Vector3d tip = s.base + 3.0 * s.seg_len * s.dir;
        for (int idx : t.part_partition[static_cast<size_t>(f)]) {
            if ((t.vertices0.row(idx).transpose() - tip).norm() < 1.2 * s.seg_len)
                t.contact_candidates.push_back(idx);
        }
    }
    for (int idx : t.part_partition[5])
        if (t.vertices0(idx, 2) > 0.009) t.contact_candidates.push_back(idx);
    if (t.contact_candidates.empty())
        t.contact_candidates.assign({0});

    t.validate();
    return t;
}

namespace {

template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3T = Eigen::Matrix<T, 3, 3>;

template <typename T>
double value_of(const T& x) {
    if constexpr (std::is_same_v<T, double>)
        return x;
    else
        return x.v;
}

// Rodrigues with series fallback near zero; exact identity at zero.
template <typename T>
Mat3T<T> rodrigues(const Vec3T<T>& r) {
    T theta2 = r.dot(r);
    T sinc, k;  // sin(t)/t and (1-cos(t))/t^2
    if (value_of(theta2) < 1e-12) {
        sinc = T(1.0) - theta2 * (1.0 / 6.0);
        k = T(0.5) - theta2 * (1.0 / 24.0);
    } else {
        using std::sqrt;
        using dvq::sqrt;
        T theta = sqrt(theta2);
        using std::sin;
        using std::cos;
        using dvq::sin;
        using dvq::cos;
        sinc = sin(theta) / theta;
        k = (T(1.0) - cos(theta)) / theta2;
    }
    Mat3T<T> K;
    K << T(0.0), -r.z(), r.y(), r.z(), T(0.0), -r.x(), -r.y(), r.x(), T(0.0);
    Mat3T<T> I = Mat3T<T>::Identity();
    return I + sinc * K + k * (K * K);
}

template <typename T>
void fk_core(const Eigen::Matrix<T, Eigen::Dynamic, 1>& p, const HandTemplate& tmpl,
             Eigen::Matrix<T, Eigen::Dynamic, 3>& out_verts,
             Eigen::Matrix<T, Eigen::Dynamic, 3>& out_joints, bool with_vertices = true) {
    const int v = with_vertices ? tmpl.vertex_count() : 0;

    // Shaped rest vertices.
    Eigen::Matrix<T, Eigen::Dynamic, 3> shaped(v, 3);
    for (int i = 0; i < v; ++i)
        for (int c = 0; c < 3; ++c) shaped(i, c) = T(tmpl.vertices0(i, c));
    for (int k = 0; k < kShapeDim; ++k) {
        const MatrixXd& b = tmpl.shape_basis[static_cast<size_t>(k)];
        for (int i = 0; i < v; ++i)
            for (int c = 0; c < 3; ++c) shaped(i, c) += p[k] * T(b(i, c));
    }

    // World transforms down the tree, carried as rotation + displacement from
    // the rest joint so the zero-parameter case stays bitwise exact.
    std::vector<Mat3T<T>> R(kNumJoints, Mat3T<T>::Identity());
    std::vector<Vec3T<T>> disp(kNumJoints);
    std::vector<int> pose_slot(kNumJoints, -1);
    for (size_t i = 0; i < tmpl.posed_joints.size(); ++i)
        pose_slot[static_cast<size_t>(tmpl.posed_joints[i])] = static_cast<int>(i);
    for (int j = 0; j < kNumJoints; ++j) {
        Mat3T<T> local = Mat3T<T>::Identity();
        if (pose_slot[static_cast<size_t>(j)] >= 0) {
            int s = kShapeDim + 3 * pose_slot[static_cast<size_t>(j)];
            Vec3T<T> aa(p[s], p[s + 1], p[s + 2]);
            local = rodrigues(aa);
        }
        int parent = tmpl.kinematic_tree[static_cast<size_t>(j)];
        if (parent < 0) {
            R[static_cast<size_t>(j)] = local;
            disp[static_cast<size_t>(j)] = Vec3T<T>::Zero();
        } else {
            Vec3T<T> offset =
                (tmpl.joints0.row(j) - tmpl.joints0.row(parent)).transpose().template cast<T>();
            R[static_cast<size_t>(j)] = R[static_cast<size_t>(parent)] * local;
            disp[static_cast<size_t>(j)] = R[static_cast<size_t>(parent)] * offset - offset +
                                           disp[static_cast<size_t>(parent)];
        }
    }

    // Global rotation/translation applied last.
    Vec3T<T> gtrans(p[kPostureDim], p[kPostureDim + 1], p[kPostureDim + 2]);
    Vec3T<T> grot(p[kPostureDim + 3], p[kPostureDim + 4], p[kPostureDim + 5]);
    Mat3T<T> Rg = rodrigues(grot);

    out_joints.resize(kNumJoints, 3);
    for (int j = 0; j < kNumJoints; ++j) {
        Vec3T<T> t0 = tmpl.joints0.row(j).transpose().template cast<T>();
        Vec3T<T> q = Rg * (t0 + disp[static_cast<size_t>(j)]) + gtrans;
        for (int c = 0; c < 3; ++c) out_joints(j, c) = q[c];
    }

    // Linear blend skinning over the sparse nonzero weights, written as
    // rest position plus a per-joint displacement.
    out_verts.resize(v, 3);
    for (int i = 0; i < v; ++i) {
        Vec3T<T> x(shaped(i, 0), shaped(i, 1), shaped(i, 2));
        Vec3T<T> acc = x;
        for (int j = 0; j < kNumJoints; ++j) {
            double w = tmpl.skinning_weights(i, j);
            if (w == 0.0) continue;
            Vec3T<T> j0 = tmpl.joints0.row(j).transpose().template cast<T>();
            Vec3T<T> rel = x - j0;
            acc += w * (R[static_cast<size_t>(j)] * rel - rel + disp[static_cast<size_t>(j)]);
        }
        Vec3T<T> q = Rg * acc + gtrans;
        for (int c = 0; c < 3; ++c) out_verts(i, c) = q[c];
    }
}

}  // namespace

HandMesh forward_kinematics(const HandParams& params, const HandTemplate& tmpl) {
    if (!params.is_finite()) throw InvalidParameterError("non-finite hand parameters");
    Eigen::Matrix<double, Eigen::Dynamic, 1> p = params.to_vector();
    Eigen::Matrix<double, Eigen::Dynamic, 3> verts, joints;
    fk_core<double>(p, tmpl, verts, joints);
    HandMesh m;
    m.vertices = verts;
    m.joints = joints;
    m.faces = tmpl.faces;
    return m;
}

FkResult forward_kinematics_with_jacobian(const HandParams& params, const HandTemplate& tmpl,
                                           bool with_vertex_jacobian) {
    if (!params.is_finite()) throw InvalidParameterError("non-finite hand parameters");
    using J = Jet<kParamDim>;
    VectorXd pv = params.to_vector();
    Eigen::Matrix<J, Eigen::Dynamic, 1> p(kParamDim);
    for (int i = 0; i < kParamDim; ++i) p[i] = J::seeded(pv[i], i);
    Eigen::Matrix<J, Eigen::Dynamic, 3> verts, joints;
    fk_core<J>(p, tmpl, verts, joints, with_vertex_jacobian);

    FkResult r;
    const int v = with_vertex_jacobian ? tmpl.vertex_count() : 0;
    r.mesh.vertices.resize(v, 3);
    r.mesh.joints.resize(kNumJoints, 3);
    r.mesh.faces = tmpl.faces;
    r.vertex_jacobian.resize(3 * v, kParamDim);
    r.joint_jacobian.resize(3 * kNumJoints, kParamDim);
    for (int i = 0; i < v; ++i)
        for (int c = 0; c < 3; ++c) {
            r.mesh.vertices(i, c) = verts(i, c).v;
            r.vertex_jacobian.row(3 * i + c) = verts(i, c).d.transpose();
        }
    for (int j = 0; j < kNumJoints; ++j)
        for (int c = 0; c < 3; ++c) {
            r.mesh.joints(j, c) = joints(j, c).v;
            r.joint_jacobian.row(3 * j + c) = joints(j, c).d.transpose();
        }
    return r;
}

std::array<MatrixXd, kNumParts> partition_vertices(const HandMesh& mesh,
                                                   const HandTemplate& tmpl) {
    if (mesh.vertices.rows() != tmpl.vertices0.rows())
        throw TopologyError("mesh vertex count does not match template");
    std::array<MatrixXd, kNumParts> parts;
    for (int p = 0; p < kNumParts; ++p) {
        const auto& idx = tmpl.part_partition[static_cast<size_t>(p)];
        MatrixXd m(static_cast<int>(idx.size()), 3);
        for (size_t i = 0; i < idx.size(); ++i) m.row(static_cast<int>(i)) = mesh.vertices.row(idx[i]);
        parts[static_cast<size_t>(p)] = std::move(m);
    }
    return parts;
}

namespace {
constexpr double kMinBone = 1e-8;
constexpr double kCosClamp = 1.0 - 1e-7;
}  // namespace

VectorXd joint_angles(const MatrixXd& joints, const HandTemplate& tmpl) {
    MatrixXd unused;
    return joint_angles_with_jacobian(joints, tmpl, unused);
}

VectorXd joint_angles_with_jacobian(const MatrixXd& joints, const HandTemplate& tmpl,
                                    MatrixXd& jacobian) {
    const int k = tmpl.angle_count();
    const int nj = static_cast<int>(joints.rows());
    VectorXd angles(k);
    jacobian = MatrixXd::Zero(k, 3 * nj);
    for (int a = 0; a < k; ++a) {
        const auto& tr = tmpl.angle_triplets[static_cast<size_t>(a)];
        Vector3d mid = joints.row(tr[1]).transpose();
        Vector3d u = joints.row(tr[0]).transpose() - mid;
        Vector3d w = joints.row(tr[2]).transpose() - mid;
        double nu = u.norm(), nw = w.norm();
        if (nu < kMinBone || nw < kMinBone) throw DegenerateBoneError("zero-length bone");
        double c = u.dot(w) / (nu * nw);
        double cc = std::clamp(c, -kCosClamp, kCosClamp);
        angles[a] = std::acos(cc);
        double dacos = -1.0 / std::sqrt(1.0 - cc * cc);
        // d c / d u and d c / d w with the clamp treated as identity inside range.
        Vector3d dcdu = w / (nu * nw) - cc * u / (nu * nu);
        Vector3d dcdw = u / (nu * nw) - cc * w / (nw * nw);
        Vector3d gu = dacos * dcdu, gw = dacos * dcdw;
        for (int ccol = 0; ccol < 3; ++ccol) {
            jacobian(a, 3 * tr[0] + ccol) += gu[ccol];
            jacobian(a, 3 * tr[2] + ccol) += gw[ccol];
            jacobian(a, 3 * tr[1] + ccol) -= gu[ccol] + gw[ccol];
        }
    }
    return angles;
}

std::pair<MatrixXd, Vector3d> center_vertices(const MatrixXd& vertices) {
    if (vertices.rows() < 1) throw InvalidInputError("center_vertices: empty input");
    Vector3d mean = vertices.colwise().mean().transpose();
    MatrixXd centered = vertices.rowwise() - mean.transpose();
    return {centered, mean};
}

void save_template(const HandTemplate& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write("DVQH0001", 8);
    io::write_i32(os, t.vertex_count());
    io::write_i32(os, kNumJoints);
    io::write_i32(os, t.face_count());
    auto write_mat = [&](const MatrixXd& m) {
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) io::write_f32(os, static_cast<float>(m(r, c)));
    };
    write_mat(t.vertices0);
    for (int r = 0; r < t.faces.rows(); ++r)
        for (int c = 0; c < 3; ++c) io::write_i32(os, t.faces(r, c));
    write_mat(t.joints0);
    write_mat(t.skinning_weights);
    for (const auto& b : t.shape_basis) write_mat(b);
    for (int p : t.kinematic_tree) io::write_i32(os, p);
    for (const auto& part : t.part_partition) {
        io::write_i32(os, static_cast<int>(part.size()));
        for (int i : part) io::write_i32(os, i);
    }
    io::write_i32(os, static_cast<int>(t.posed_joints.size()));
    for (int j : t.posed_joints) io::write_i32(os, j);
    io::write_i32(os, t.angle_count());
    for (const auto& tr : t.angle_triplets)
        for (int j : tr) io::write_i32(os, j);
    io::write_i32(os, static_cast<int>(t.contact_candidates.size()));
    for (int i : t.contact_candidates) io::write_i32(os, i);
}

HandTemplate load_template(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "DVQH0001")
        throw std::runtime_error("bad template archive: " + path);
    HandTemplate t;
    const int v = io::read_i32(is);
    const int j = io::read_i32(is);
    const int f = io::read_i32(is);
    if (j != kNumJoints) throw TopologyError("unexpected joint count in template");
    auto read_mat = [&](int rows, int cols) {
        MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = static_cast<double>(io::read_f32(is));
        return m;
    };
    t.vertices0 = read_mat(v, 3);
    t.faces.resize(f, 3);
    for (int r = 0; r < f; ++r)
        for (int c = 0; c < 3; ++c) t.faces(r, c) = io::read_i32(is);
    t.joints0 = read_mat(kNumJoints, 3);
    t.skinning_weights = read_mat(v, kNumJoints);
    for (auto& b : t.shape_basis) b = read_mat(v, 3);
    t.kinematic_tree.resize(kNumJoints);
    for (int& p : t.kinematic_tree) p = io::read_i32(is);
    for (auto& part : t.part_partition) {
        int n = io::read_i32(is);
        part.resize(static_cast<size_t>(n));
        for (int& i : part) i = io::read_i32(is);
    }
    int np = io::read_i32(is);
    t.posed_joints.resize(static_cast<size_t>(np));
    for (int& pj : t.posed_joints) pj = io::read_i32(is);
    int na = io::read_i32(is);
    t.angle_triplets.resize(static_cast<size_t>(na));
    for (auto& tr : t.angle_triplets)
        for (int& jj : tr) jj = io::read_i32(is);
    int nc = io::read_i32(is);
    t.contact_candidates.resize(static_cast<size_t>(nc));
    for (int& i : t.contact_candidates) i = io::read_i32(is);
    t.validate();
    return t;
}

std::vector<HandParams> import_mano_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<float> raw;
    float f;
    while (is.read(reinterpret_cast<char*>(&f), sizeof(float))) raw.push_back(f);
    if (raw.empty() || raw.size() % kParamDim != 0)
        throw DatasetFormatError("parameter file length is not a multiple of 61 floats");
    std::vector<HandParams> out;
    for (size_t g = 0; g < raw.size() / kParamDim; ++g) {
        VectorXd v(kParamDim);
        for (int i = 0; i < kParamDim; ++i) v[i] = raw[g * kParamDim + static_cast<size_t>(i)];
        if (!v.allFinite()) throw InvalidParameterError("non-finite imported parameters");
        out.push_back(HandParams::from_vector(v));
    }
    return out;
}

}  // namespace dvq::hand
