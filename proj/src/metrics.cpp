#include "dvq/metrics.hpp"

#include <cmath>
#include <random>

#include "dvq/errors.hpp"

namespace dvq::metrics {

double contact_ratio(const std::vector<GraspCase>& grasps, double tau) {
    if (grasps.empty()) throw InvalidInputError("contact_ratio: empty grasp list");
    int touching = 0;
    for (const GraspCase& g : grasps) {
        if (!g.object_mesh || !g.object_cloud) {
            throw InvalidInputError("contact_ratio: grasp case lacks an object");
        }
        bool contact = false;
        const double tau2 = tau * tau;
        for (int v = 0; v < g.hand_vertices.rows() && !contact; ++v) {
            for (int i = 0; i < g.object_cloud->rows(); ++i) {
                if ((g.hand_vertices.row(v) - g.object_cloud->row(i)).squaredNorm() <= tau2) {
                    contact = true;
                    break;
                }
            }
        }
        for (int v = 0; v < g.hand_vertices.rows() && !contact; ++v) {
            if (geom::point_inside(*g.object_mesh, g.hand_vertices.row(v).transpose())) {
                contact = true;  // penetrating counts as contact
            }
        }
        if (contact) ++touching;
    }
    return 100.0 * static_cast<double>(touching) / static_cast<double>(grasps.size());
}

double penetration_volume_cm3(const geom::TriMesh& hand, const geom::TriMesh& object) {
    const double m3 = geom::voxel_intersection_volume(hand, object, kVoxelEdgeMeters);
    return m3 * 1e6;
}

double simulation_displacement(const geom::TriMesh& hand, const geom::TriMesh& object,
                               const SimConfig& cfg) {
    // Fixed-seed surface probes on the object act as contact points.
    std::mt19937_64 rng(0xD5C0DE);
    const MatrixXd probes = geom::sample_surface(object, cfg.contact_samples, rng);

    const Eigen::Vector3d g(0.0, -cfg.gravity, 0.0);
    auto accel = [&](const Eigen::Vector3d& x, const Eigen::Vector3d& v) {
        Eigen::Vector3d force = Eigen::Vector3d::Zero();
        int active = 0;
        if (hand.faces.rows() > 0) {
            for (int i = 0; i < probes.rows(); ++i) {
                const Eigen::Vector3d q = probes.row(i).transpose() + x;
                const geom::ClosestHit hit = geom::closest_on_mesh(hand, q);
                Eigen::Vector3d n = hit.normal;
                const Eigen::Vector3d d = q - hit.point;
                if (n.dot(d) < 0.0) n = -n;  // orient away from the hand surface
                const double gap = d.norm();
                if (gap < cfg.contact_radius) {
                    const double compression = cfg.contact_radius - gap;
                    force += cfg.spring_k * compression * n - cfg.damping * v.dot(n) * n;
                    ++active;
                }
            }
        }
        // Normalize by active contacts so stacked springs stay stable.
        if (active > 0) force /= static_cast<double>(active);
        return (g + force / cfg.mass).eval();
    };

    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    Eigen::Vector3d a = accel(x, v);
    const int steps = static_cast<int>(std::llround(cfg.duration / cfg.dt));
    for (int s = 0; s < steps; ++s) {
        x += cfg.dt * v + 0.5 * cfg.dt * cfg.dt * a;
        const Eigen::Vector3d v_half = v + 0.5 * cfg.dt * a;
        const Eigen::Vector3d a_new = accel(x, v_half);
        v += 0.5 * cfg.dt * (a + a_new);
        a = a_new;
    }
    return x.norm() * 100.0;  // meters -> cm
}

namespace {

// Plain Lloyd iterations from a seeded uniform assignment of centroids to
// data points; best of `restarts` runs by within-cluster squared distance.
struct KMeansRun {
    std::vector<int> assign;
    MatrixXd centroids;
    double inertia = std::numeric_limits<double>::max();
};

KMeansRun kmeans(const MatrixXd& feats, int k, unsigned seed, int restarts) {
    const int n = static_cast<int>(feats.rows());
    KMeansRun best;
    std::mt19937_64 rng(seed);
    for (int r = 0; r < restarts; ++r) {
        // k-means++ seeding: D^2-weighted picks separate initial centroids.
        MatrixXd cent(k, feats.cols());
        std::uniform_int_distribution<int> pick(0, n - 1);
        cent.row(0) = feats.row(pick(rng));
        Eigen::VectorXd d2 = (feats.rowwise() - cent.row(0)).rowwise().squaredNorm();
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (int c = 1; c < k; ++c) {
            const double total = d2.sum();
            int chosen = pick(rng);
            if (total > 0.0) {
                double u = uni(rng) * total;
                for (int i = 0; i < n; ++i) {
                    u -= d2(i);
                    if (u <= 0.0) {
                        chosen = i;
                        break;
                    }
                }
            }
            cent.row(c) = feats.row(chosen);
            d2 = d2.cwiseMin((feats.rowwise() - cent.row(c)).rowwise().squaredNorm());
        }
        std::vector<int> assign(static_cast<size_t>(n), 0);
        for (int iter = 0; iter < 100; ++iter) {
            bool changed = false;
            for (int i = 0; i < n; ++i) {
                int bc = 0;
                double bd = std::numeric_limits<double>::max();
                for (int c = 0; c < k; ++c) {
                    const double d = (feats.row(i) - cent.row(c)).squaredNorm();
                    if (d < bd) {
                        bd = d;
                        bc = c;
                    }
                }
                if (assign[static_cast<size_t>(i)] != bc) {
                    assign[static_cast<size_t>(i)] = bc;
                    changed = true;
                }
            }
            MatrixXd sum = MatrixXd::Zero(k, feats.cols());
            std::vector<int> count(static_cast<size_t>(k), 0);
            for (int i = 0; i < n; ++i) {
                sum.row(assign[static_cast<size_t>(i)]) += feats.row(i);
                count[static_cast<size_t>(assign[static_cast<size_t>(i)])]++;
            }
            for (int c = 0; c < k; ++c) {
                if (count[static_cast<size_t>(c)] > 0) {
                    cent.row(c) = sum.row(c) / count[static_cast<size_t>(c)];
                }
            }
            if (!changed && iter > 0) break;
        }
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            inertia += (feats.row(i) - cent.row(assign[static_cast<size_t>(i)])).squaredNorm();
        }
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.assign = assign;
            best.centroids = cent;
        }
    }
    return best;
}

}  // namespace

DiversityResult diversity(const std::vector<hand::HandParams>& grasps,
                          const hand::HandTemplate& tmpl, int k, unsigned seed, int restarts) {
    const int n = static_cast<int>(grasps.size());
    if (n < k) throw InvalidInputError("diversity: need at least k grasps");

    MatrixXd feats(n, 3 * hand::kNumJoints);
    for (int i = 0; i < n; ++i) {
        const hand::HandMesh mesh = hand::forward_kinematics(grasps[static_cast<size_t>(i)], tmpl);
        for (int j = 0; j < hand::kNumJoints; ++j)
            for (int c = 0; c < 3; ++c) feats(i, 3 * j + c) = mesh.joints(j, c);
    }

    const KMeansRun run = kmeans(feats, k, seed, restarts);

    DiversityResult out;
    std::vector<int> count(static_cast<size_t>(k), 0);
    std::vector<double> dist_sum(static_cast<size_t>(k), 0.0);
    for (int i = 0; i < n; ++i) {
        const int c = run.assign[static_cast<size_t>(i)];
        count[static_cast<size_t>(c)]++;
        dist_sum[static_cast<size_t>(c)] +=
            (feats.row(i) - run.centroids.row(c)).norm();
    }
    int nonempty = 0;
    for (int c = 0; c < k; ++c) {
        if (count[static_cast<size_t>(c)] == 0) continue;
        ++nonempty;
        const double p = static_cast<double>(count[static_cast<size_t>(c)]) / n;
        out.entropy -= p * std::log(p);
        out.cluster_size += dist_sum[static_cast<size_t>(c)] / count[static_cast<size_t>(c)];
    }
    if (nonempty > 0) out.cluster_size /= nonempty;
    return out;
}

double quality_index(double penetration_cm3, double disp_cm, double a) {
    if (penetration_cm3 < 0.0 || disp_cm < 0.0) {
        throw InvalidInputError("quality_index: inputs must be nonnegative");
    }
    return a * penetration_cm3 + (1.0 - a) * disp_cm;
}

std::vector<std::pair<double, double>> high_quality_ratio(
    const std::vector<double>& penetration_cm3, const std::vector<double>& disp_cm,
    const std::vector<double>& pen_thresholds, double disp_threshold) {
    if (penetration_cm3.size() != disp_cm.size() || penetration_cm3.empty()) {
        throw InvalidInputError("high_quality_ratio: mismatched or empty metric lists");
    }
    std::vector<std::pair<double, double>> curve;
    for (double thr : pen_thresholds) {
        int pass = 0;
        for (size_t i = 0; i < penetration_cm3.size(); ++i) {
            if (penetration_cm3[i] <= thr && disp_cm[i] <= disp_threshold) ++pass;
        }
        curve.emplace_back(thr, static_cast<double>(pass) /
                                    static_cast<double>(penetration_cm3.size()));
    }
    return curve;
}

}  // namespace dvq::metrics
