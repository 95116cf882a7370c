#include "dvq/datagen.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "dvq/errors.hpp"
#include "dvq/losses.hpp"
#include "dvq/metrics.hpp"
#include "dvq/serialize.hpp"

namespace dvq::data {

using Eigen::Matrix3d;
using Eigen::Vector3d;

std::pair<geom::TriMesh, MatrixXd> make_object(const ObjectSpec& spec, unsigned seed) {
    if (spec.min_scale <= 0.0 || spec.max_scale < spec.min_scale || spec.cloud_points < 1) {
        throw InvalidParameterError("make_object: bad object spec");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double scale = spec.min_scale + (spec.max_scale - spec.min_scale) * uni(rng);

    geom::TriMesh mesh;
    switch (spec.family) {
        case ObjectFamily::sphere:
            mesh = geom::make_sphere(scale / 2.0, 3);
            break;
        case ObjectFamily::box: {
            const Vector3d half(scale / 2.0, scale / 2.0 * (0.5 + 0.5 * uni(rng)),
                                scale / 2.0 * (0.5 + 0.5 * uni(rng)));
            mesh = geom::make_box(half);
            break;
        }
        case ObjectFamily::cylinder:
            mesh = geom::make_cylinder(scale / 3.0, scale, 24);
            break;
        case ObjectFamily::composite: {
            // Two tangent (non-overlapping) closed bodies merged into one mesh.
            const double r = scale / 4.0;
            geom::TriMesh ball = geom::make_sphere(r, 2);
            geom::TriMesh box =
                geom::make_box(Vector3d(r, r, r));
            mesh = geom::merge(ball, geom::translate(box, Vector3d(2.0 * r + 1e-4, 0.0, 0.0)));
            break;
        }
        default:
            throw InvalidParameterError("make_object: unknown family");
    }
    std::mt19937_64 cloud_rng(seed ^ 0xC10DDu);
    MatrixXd cloud = geom::sample_surface(mesh, spec.cloud_points, cloud_rng);
    return {std::move(mesh), std::move(cloud)};
}

namespace {

Matrix3d rotation_from_axes(const Vector3d& palm_normal_target,
                            const Vector3d& finger_dir_target) {
    // Hand frame: fingers along +y, palm pad faces +z.
    Matrix3d r;
    const Vector3d z = palm_normal_target.normalized();
    Vector3d y = finger_dir_target - finger_dir_target.dot(z) * z;
    if (y.norm() < 1e-9) y = z.unitOrthogonal();
    y.normalize();
    const Vector3d x = y.cross(z);
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return r;
}

Vector3d axis_angle_from_matrix(const Matrix3d& r) {
    Eigen::AngleAxisd aa(r);
    return aa.angle() * aa.axis();
}

}  // namespace

hand::HandParams make_synthetic_grasp(const geom::TriMesh& object_mesh,
                                      const MatrixXd& object_cloud,
                                      const hand::HandTemplate& tmpl, unsigned seed,
                                      const GraspGenConfig& cfg) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    // Canonical approach azimuth derived from object geometry so every grasp
    // of the same object shares a direction (jittered per attempt below).
    const Vector3d lo = object_cloud.colwise().minCoeff().transpose();
    const Vector3d hi = object_cloud.colwise().maxCoeff().transpose();
    const double diag = (hi - lo).norm();
    const double base_az = std::fmod(1000.0 * diag, 2.0 * M_PI);

    // Subsampled cloud for the optimization loop.
    const int m = std::min<int>(cfg.loss_cloud_points, static_cast<int>(object_cloud.rows()));
    MatrixXd small_cloud(m, 3);
    const int stride = std::max<int>(1, static_cast<int>(object_cloud.rows()) / m);
    for (int i = 0; i < m; ++i) small_cloud.row(i) = object_cloud.row((i * stride) %
                                                                      object_cloud.rows());

    // Hand vertices probed by the in-loop inside test.
    std::vector<int> probe_vertices = tmpl.contact_candidates;
    for (int v = 0; v < tmpl.vertex_count(); v += 2) probe_vertices.push_back(v);

    const Vector3d palm_ref(0.0, 0.035, 0.012);  // palm-pad point in the rest frame

    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const double az = base_az + 0.15 * uni(rng);
        const double el = 0.2 * uni(rng);
        const Vector3d approach(std::cos(el) * std::cos(az), std::sin(el),
                                std::cos(el) * std::sin(az));

        double support = 0.0;
        for (int i = 0; i < object_cloud.rows(); ++i) {
            support = std::max(support, object_cloud.row(i).dot(approach));
        }

        hand::HandParams params;
        for (int i = 0; i < hand::kShapeDim; ++i) params.shape(i) = 0.05 * uni(rng);
        for (int j = 0; j < 15; ++j) {
            params.pose(3 * j) = 0.25 + 0.1 * uni(rng);  // gentle initial curl
        }
        const Matrix3d rot = rotation_from_axes(-approach, approach.unitOrthogonal());
        params.rotation = axis_angle_from_matrix(rot);
        params.translation =
            approach * (support + 0.008) - rot * palm_ref;

        // Contact targets: cloud points facing the palm.
        const Vector3d palm_world =
            rot * palm_ref + params.translation;
        std::vector<std::pair<double, int>> by_dist;
        for (int i = 0; i < small_cloud.rows(); ++i) {
            by_dist.emplace_back((small_cloud.row(i).transpose() - palm_world).norm(), i);
        }
        std::sort(by_dist.begin(), by_dist.end());
        loss::ContactSets sets;
        for (int i = 0; i < std::min<int>(40, static_cast<int>(by_dist.size())); ++i) {
            sets.gt_contact.push_back(by_dist[static_cast<size_t>(i)].second);
        }
        std::sort(sets.gt_contact.begin(), sets.gt_contact.end());
        sets.candidates = tmpl.contact_candidates;

        // Adam over the 61 parameters on lambda_c' L_c + lambda_p' L_p + reg.
        Eigen::VectorXd theta = params.to_vector();
        const Eigen::VectorXd theta0 = theta;
        Eigen::VectorXd m1 = Eigen::VectorXd::Zero(61), m2 = Eigen::VectorXd::Zero(61);
        // The vertex Jacobian is by far the most expensive piece of each
        // step; it varies slowly under small parameter updates, so it is
        // refreshed every third iteration (Gauss-Newton style) while the
        // forward pass and loss gradients stay exact.
        MatrixXd jac;
        for (int it = 0; it < cfg.iterations; ++it) {
            MatrixXd verts;
            if (it % 3 == 0) {
                const hand::FkResult fk = hand::forward_kinematics_with_jacobian(
                    hand::HandParams::from_vector(theta), tmpl);
                jac = fk.vertex_jacobian;
                verts = fk.mesh.vertices;
            } else {
                verts = hand::forward_kinematics(hand::HandParams::from_vector(theta), tmpl)
                            .vertices;
            }
            sets.penetrating.clear();
            for (int v : probe_vertices) {
                if (geom::point_inside(object_mesh, verts.row(v).transpose())) {
                    sets.penetrating.push_back(v);
                }
            }
            MatrixXd gc, gp;
            loss::contact_losses(sets, verts, small_cloud, &gc);
            loss::penetration_loss(sets, verts, small_cloud, &gp);
            MatrixXd gv = gc + 250.0 * gp;
            Eigen::VectorXd flat(3 * verts.rows());
            for (int v = 0; v < verts.rows(); ++v)
                for (int c = 0; c < 3; ++c) flat(3 * v + c) = gv(v, c);
            Eigen::VectorXd grad = jac.transpose() * flat;
            grad.segment(hand::kShapeDim, hand::kPoseDim) +=
                0.5 * (theta - theta0).segment(hand::kShapeDim, hand::kPoseDim);

            m1 = 0.9 * m1 + 0.1 * grad;
            m2 = 0.999 * m2 + 0.001 * grad.cwiseProduct(grad);
            const double bc1 = 1.0 - std::pow(0.9, it + 1);
            const double bc2 = 1.0 - std::pow(0.999, it + 1);
            theta -= cfg.lr * (m1 / bc1).cwiseQuotient(
                                  ((m2 / bc2).cwiseSqrt().array() + 1e-8).matrix());
        }

        // Dataset invariants: contact within tau, penetration < 1 cm^3.  When the
        // optimizer leaves residual penetration, retreat along the approach axis
        // in small steps before giving up on the attempt.
        hand::HandParams fitted = hand::HandParams::from_vector(theta);
        if (!fitted.is_finite()) continue;
        for (int backoff = 0; backoff <= 4; ++backoff) {
            const hand::HandMesh mesh = hand::forward_kinematics(fitted, tmpl);
            const size_t contacts =
                loss::contact_map(mesh.vertices, object_cloud, cfg.tau_contact).size();
            geom::TriMesh hand_mesh{mesh.vertices, mesh.faces};
            const double pen = metrics::penetration_volume_cm3(hand_mesh, object_mesh);
            if (cfg.verbose) {
                std::fprintf(stderr,
                             "grasp seed %u attempt %d backoff %d: contacts=%zu pen=%.3f cm^3\n",
                             seed, attempt, backoff, contacts, pen);
            }
            if (contacts == 0) break;
            if (pen < cfg.max_penetration_cm3) return fitted;
            fitted.translation += approach * 0.0015;
        }
    }
    throw GenerationFailureError("no valid grasp after " + std::to_string(cfg.max_attempts) +
                                 " attempts (seed " + std::to_string(seed) + ")");
}

std::vector<SyntheticSample> make_corpus(int num_objects, int grasps_per_object,
                                         const hand::HandTemplate& tmpl, unsigned seed,
                                         int cloud_points, const GraspGenConfig& cfg) {
    if (num_objects < 1 || grasps_per_object < 1) {
        throw InvalidParameterError("make_corpus: counts must be positive");
    }
    std::vector<SyntheticSample> out;
    const ObjectFamily families[] = {ObjectFamily::sphere, ObjectFamily::box,
                                     ObjectFamily::cylinder, ObjectFamily::composite};
    for (int o = 0; o < num_objects; ++o) {
        ObjectSpec spec;
        spec.family = families[o % 4];
        spec.cloud_points = cloud_points;
        auto [mesh, cloud] = make_object(spec, seed + static_cast<unsigned>(o));
        for (int gidx = 0; gidx < grasps_per_object; ++gidx) {
            SyntheticSample s;
            s.object_mesh = mesh;
            s.object_cloud = cloud;
            s.gt_params = make_synthetic_grasp(
                mesh, cloud, tmpl, seed + static_cast<unsigned>(o * 1000 + gidx + 1), cfg);
            s.gt_vertices = hand::forward_kinematics(s.gt_params, tmpl).vertices;
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'D', 'V', 'Q', 'D', '0', '0', '0', '1'};
constexpr uint32_t kVersion = 1;

void write_matrix(std::ostream& os, const MatrixXd& m) {
    io::write_u32(os, static_cast<uint32_t>(m.rows()));
    io::write_u32(os, static_cast<uint32_t>(m.cols()));
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) io::write_f64(os, m(r, c));
}

MatrixXd read_matrix(std::istream& is) {
    const uint32_t rows = io::read_u32(is);
    const uint32_t cols = io::read_u32(is);
    MatrixXd m(rows, cols);
    for (uint32_t r = 0; r < rows; ++r)
        for (uint32_t c = 0; c < cols; ++c) m(r, c) = io::read_f64(is);
    if (!is) throw DatasetFormatError("dataset truncated mid-array");
    return m;
}

void write_imatrix(std::ostream& os, const Eigen::MatrixXi& m) {
    io::write_u32(os, static_cast<uint32_t>(m.rows()));
    io::write_u32(os, static_cast<uint32_t>(m.cols()));
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) io::write_i32(os, m(r, c));
}

Eigen::MatrixXi read_imatrix(std::istream& is) {
    const uint32_t rows = io::read_u32(is);
    const uint32_t cols = io::read_u32(is);
    Eigen::MatrixXi m(rows, cols);
    for (uint32_t r = 0; r < rows; ++r)
        for (uint32_t c = 0; c < cols; ++c) m(r, c) = io::read_i32(is);
    if (!is) throw DatasetFormatError("dataset truncated mid-array");
    return m;
}

}  // namespace

void save_dataset(const std::vector<SyntheticSample>& samples, const std::string& path) {
    if (samples.empty()) throw InvalidInputError("save_dataset: empty dataset rejected");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write(kMagic, sizeof(kMagic));
    io::write_u32(os, kVersion);

    nlohmann::json manifest;
    manifest["samples"] = samples.size();
    manifest["cloud_points"] = samples.front().object_cloud.rows();
    manifest["vertex_count"] = samples.front().gt_vertices.rows();
    const std::string mstr = manifest.dump();
    io::write_u32(os, static_cast<uint32_t>(mstr.size()));
    os.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));

    io::write_u32(os, static_cast<uint32_t>(samples.size()));
    for (const SyntheticSample& s : samples) {
        write_matrix(os, s.object_mesh.vertices);
        write_imatrix(os, s.object_mesh.faces);
        write_matrix(os, s.object_cloud);
        write_matrix(os, s.gt_params.to_vector().transpose());
        write_matrix(os, s.gt_vertices);
    }
}

std::vector<SyntheticSample> load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open dataset: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw DatasetFormatError("not a dataset archive: " + path);
    }
    if (std::memcmp(magic, kMagic, 8) != 0) {
        throw DatasetFormatError("dataset format revision mismatch");
    }
    const uint32_t version = io::read_u32(is);
    if (!is || version != kVersion) throw DatasetFormatError("unsupported dataset version");

    const uint32_t mlen = io::read_u32(is);
    std::string mstr(mlen, '\0');
    is.read(mstr.data(), mlen);
    if (!is) throw DatasetFormatError("dataset manifest truncated");
    (void)nlohmann::json::parse(mstr);  // malformed manifest -> parse error

    const uint32_t n = io::read_u32(is);
    if (!is || n == 0) throw DatasetFormatError("dataset has no samples");
    std::vector<SyntheticSample> out;
    out.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        SyntheticSample s;
        try {
            s.object_mesh.vertices = read_matrix(is);
            s.object_mesh.faces = read_imatrix(is);
            s.object_cloud = read_matrix(is);
            const MatrixXd params = read_matrix(is);
            if (params.cols() != hand::kParamDim) {
                throw DatasetFormatError("bad parameter record width");
            }
            s.gt_params = hand::HandParams::from_vector(params.row(0).transpose());
            s.gt_vertices = read_matrix(is);
        } catch (const DatasetFormatError&) {
            throw;
        } catch (const std::exception&) {
            throw DatasetFormatError("dataset truncated mid-sample");
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace dvq::data
