#include "dvq/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dvq/errors.hpp"

namespace dvq::geom {

bool is_watertight(const TriMesh& mesh) {
    if (mesh.faces.rows() == 0) return false;
    std::map<std::pair<int, int>, int> edge_count;
    for (int f = 0; f < mesh.faces.rows(); ++f) {
        for (int e = 0; e < 3; ++e) {
            int a = mesh.faces(f, e), b = mesh.faces(f, (e + 1) % 3);
            edge_count[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    for (const auto& [edge, count] : edge_count)
        if (count != 2) return false;
    return true;
}

double mesh_volume(const TriMesh& mesh) {
    double vol = 0.0;
    for (int f = 0; f < mesh.faces.rows(); ++f) {
        Vector3d a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
        Vector3d b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
        Vector3d c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
        vol += a.dot(b.cross(c)) / 6.0;
    }
    return std::abs(vol);
}

namespace {

// Crossing heights of the vertical line through (x, y). The tiny query
// jitter keeps voxel centers off triangle edges.
void line_crossings(const TriMesh& mesh, double x, double y, std::vector<double>& zs) {
    zs.clear();
    const double qx = x + 1.37e-9, qy = y + 2.71e-9;
    for (int f = 0; f < mesh.faces.rows(); ++f) {
        const auto a = mesh.vertices.row(mesh.faces(f, 0));
        const auto b = mesh.vertices.row(mesh.faces(f, 1));
        const auto c = mesh.vertices.row(mesh.faces(f, 2));
        double d = (b(0) - a(0)) * (c(1) - a(1)) - (c(0) - a(0)) * (b(1) - a(1));
        if (d == 0.0) continue;  // degenerate in projection (parallel to ray)
        double u = ((qx - a(0)) * (c(1) - a(1)) - (c(0) - a(0)) * (qy - a(1))) / d;
        double v = ((b(0) - a(0)) * (qy - a(1)) - (qx - a(0)) * (b(1) - a(1))) / d;
        if (u < 0.0 || v < 0.0 || u + v > 1.0) continue;
        zs.push_back(a(2) + u * (b(2) - a(2)) + v * (c(2) - a(2)));
    }
    std::sort(zs.begin(), zs.end());
}

}  // namespace

bool point_inside(const TriMesh& mesh, const Vector3d& p) {
    std::vector<double> zs;
    line_crossings(mesh, p.x(), p.y(), zs);
    int above = 0;
    for (double z : zs)
        if (z > p.z()) ++above;
    return (above % 2) == 1;
}

double point_triangle_dist2(const Vector3d& p, const Vector3d& a, const Vector3d& b,
                            const Vector3d& c, Vector3d* closest) {
    // Ericson, Real-Time Collision Detection, closest point on triangle.
    Vector3d ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    Vector3d q;
    if (d1 <= 0.0 && d2 <= 0.0) {
        q = a;
    } else {
        Vector3d bp = p - b;
        double d3 = ab.dot(bp), d4 = ac.dot(bp);
        if (d3 >= 0.0 && d4 <= d3) {
            q = b;
        } else {
            double vc = d1 * d4 - d3 * d2;
            if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
                q = a + (d1 / (d1 - d3)) * ab;
            } else {
                Vector3d cp = p - c;
                double d5 = ab.dot(cp), d6 = ac.dot(cp);
                if (d6 >= 0.0 && d5 <= d6) {
                    q = c;
                } else {
                    double vb = d5 * d2 - d1 * d6;
                    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
                        q = a + (d2 / (d2 - d6)) * ac;
                    } else {
                        double va = d3 * d6 - d5 * d4;
                        if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
                            q = b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
                        } else {
                            double denom = 1.0 / (va + vb + vc);
                            q = a + ab * (vb * denom) + ac * (vc * denom);
                        }
                    }
                }
            }
        }
    }
    if (closest) *closest = q;
    return (p - q).squaredNorm();
}

ClosestHit closest_on_mesh(const TriMesh& mesh, const Vector3d& p) {
    ClosestHit best;
    double best_d2 = std::numeric_limits<double>::max();
    for (int f = 0; f < mesh.faces.rows(); ++f) {
        Vector3d a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
        Vector3d b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
        Vector3d c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
        Vector3d q;
        double d2 = point_triangle_dist2(p, a, b, c, &q);
        if (d2 < best_d2) {
            best_d2 = d2;
            best.point = q;
            best.normal = (b - a).cross(c - a).normalized();
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

MatrixXd sample_surface(const TriMesh& mesh, int n, std::mt19937_64& rng) {
    if (n < 1 || mesh.faces.rows() == 0) throw InvalidInputError("sample_surface: bad input");
    std::vector<double> cum(static_cast<size_t>(mesh.faces.rows()));
    double total = 0.0;
    for (int f = 0; f < mesh.faces.rows(); ++f) {
        Vector3d a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
        Vector3d b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
        Vector3d c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
        total += 0.5 * (b - a).cross(c - a).norm();
        cum[static_cast<size_t>(f)] = total;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixXd out(n, 3);
    for (int i = 0; i < n; ++i) {
        double r = u(rng) * total;
        int f = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
        f = std::min(f, static_cast<int>(mesh.faces.rows()) - 1);
        double s = u(rng), t = u(rng);
        if (s + t > 1.0) {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        Vector3d a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
        Vector3d b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
        Vector3d c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
        out.row(i) = (a + s * (b - a) + t * (c - a)).transpose();
    }
    return out;
}

namespace {

struct Grid {
    Vector3d origin;
    double edge;
    int nx, ny, nz;
};

// Per-column z-interval rasterization into a dense occupancy bitmap.
std::vector<uint8_t> occupancy(const TriMesh& mesh, const Grid& g) {
    std::vector<uint8_t> occ(static_cast<size_t>(g.nx) * g.ny * g.nz, 0);
    std::vector<double> zs;
    for (int ix = 0; ix < g.nx; ++ix) {
        double x = g.origin.x() + (ix + 0.5) * g.edge;
        for (int iy = 0; iy < g.ny; ++iy) {
            double y = g.origin.y() + (iy + 0.5) * g.edge;
            line_crossings(mesh, x, y, zs);
            if (zs.size() < 2) continue;
            for (size_t k = 0; k + 1 < zs.size(); k += 2) {
                int lo = static_cast<int>(std::ceil((zs[k] - g.origin.z()) / g.edge - 0.5));
                int hi = static_cast<int>(std::floor((zs[k + 1] - g.origin.z()) / g.edge - 0.5));
                lo = std::max(lo, 0);
                hi = std::min(hi, g.nz - 1);
                for (int iz = lo; iz <= hi; ++iz)
                    occ[(static_cast<size_t>(ix) * g.ny + iy) * g.nz + iz] = 1;
            }
        }
    }
    return occ;
}

Grid grid_over(const TriMesh& a, const TriMesh& b, double edge) {
    Vector3d lo = a.vertices.colwise().minCoeff().transpose();
    Vector3d hi = a.vertices.colwise().maxCoeff().transpose();
    if (b.vertices.rows() > 0) {
        lo = lo.cwiseMin(b.vertices.colwise().minCoeff().transpose());
        hi = hi.cwiseMax(b.vertices.colwise().maxCoeff().transpose());
    }
    Grid g;
    g.origin = lo;
    g.edge = edge;
    g.nx = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / edge)));
    g.ny = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / edge)));
    g.nz = std::max(1, static_cast<int>(std::ceil((hi.z() - lo.z()) / edge)));
    return g;
}

}  // namespace

double voxel_intersection_volume(const TriMesh& a, const TriMesh& b, double voxel_edge) {
    if (!is_watertight(a) || !is_watertight(b))
        throw InvalidInputError("voxel_intersection_volume: mesh not watertight");
    // Disjoint bounding boxes cannot intersect.
    Vector3d alo = a.vertices.colwise().minCoeff(), ahi = a.vertices.colwise().maxCoeff();
    Vector3d blo = b.vertices.colwise().minCoeff(), bhi = b.vertices.colwise().maxCoeff();
    if ((alo.array() > bhi.array()).any() || (blo.array() > ahi.array()).any()) return 0.0;
    Grid g = grid_over(a, b, voxel_edge);
    auto oa = occupancy(a, g);
    auto ob = occupancy(b, g);
    long count = 0;
    for (size_t i = 0; i < oa.size(); ++i) count += (oa[i] & ob[i]);
    return static_cast<double>(count) * voxel_edge * voxel_edge * voxel_edge;
}

double voxel_volume(const TriMesh& mesh, double voxel_edge) {
    if (!is_watertight(mesh)) throw InvalidInputError("voxel_volume: mesh not watertight");
    Grid g = grid_over(mesh, mesh, voxel_edge);
    auto o = occupancy(mesh, g);
    long count = 0;
    for (uint8_t b : o) count += b;
    return static_cast<double>(count) * voxel_edge * voxel_edge * voxel_edge;
}

TriMesh make_sphere(double radius, int subdivisions) {
    // Icosphere.
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vector3d> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                               {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                               {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    std::vector<std::array<int, 3>> f = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
        {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
        {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
        {8, 6, 7},  {9, 8, 1}};
    for (auto& p : v) p.normalize();
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vector3d m = (v[static_cast<size_t>(a)] + v[static_cast<size_t>(b)]).normalized();
            v.push_back(m);
            int idx = static_cast<int>(v.size()) - 1;
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> nf;
        for (const auto& tri : f) {
            int a = mid(tri[0], tri[1]), b = mid(tri[1], tri[2]), c = mid(tri[2], tri[0]);
            nf.push_back({tri[0], a, c});
            nf.push_back({tri[1], b, a});
            nf.push_back({tri[2], c, b});
            nf.push_back({a, b, c});
        }
        f = std::move(nf);
    }
    TriMesh m;
    m.vertices.resize(static_cast<int>(v.size()), 3);
    for (size_t i = 0; i < v.size(); ++i)
        m.vertices.row(static_cast<int>(i)) = (radius * v[i]).transpose();
    m.faces.resize(static_cast<int>(f.size()), 3);
    for (size_t i = 0; i < f.size(); ++i)
        for (int c = 0; c < 3; ++c) m.faces(static_cast<int>(i), c) = f[i][static_cast<size_t>(c)];
    return m;
}

TriMesh make_box(const Vector3d& h) {
    TriMesh m;
    m.vertices.resize(8, 3);
    int i = 0;
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int sz : {-1, 1}) m.vertices.row(i++) << sx * h.x(), sy * h.y(), sz * h.z();
    // Outward-oriented triangles; vertex order is (x, y, z) sign-major.
    m.faces.resize(12, 3);
    m.faces << 0, 1, 3, 0, 3, 2,  // -x
        4, 6, 7, 4, 7, 5,          // +x
        0, 4, 5, 0, 5, 1,          // -y
        2, 3, 7, 2, 7, 6,          // +y
        0, 2, 6, 0, 6, 4,          // -z
        1, 5, 7, 1, 7, 3;          // +z
    return m;
}

TriMesh make_cylinder(double radius, double height, int segments) {
    TriMesh m;
    const int n = segments;
    m.vertices.resize(2 * n + 2, 3);
    for (int k = 0; k < n; ++k) {
        double phi = 2.0 * M_PI * k / n;
        m.vertices.row(k) << radius * std::cos(phi), radius * std::sin(phi), -height / 2.0;
        m.vertices.row(n + k) << radius * std::cos(phi), radius * std::sin(phi), height / 2.0;
    }
    m.vertices.row(2 * n) << 0, 0, -height / 2.0;
    m.vertices.row(2 * n + 1) << 0, 0, height / 2.0;
    std::vector<std::array<int, 3>> f;
    for (int k = 0; k < n; ++k) {
        int k1 = (k + 1) % n;
        f.push_back({k, k1, n + k});
        f.push_back({n + k, k1, n + k1});
        f.push_back({2 * n, k1, k});
        f.push_back({2 * n + 1, n + k, n + k1});
    }
    m.faces.resize(static_cast<int>(f.size()), 3);
    for (size_t i = 0; i < f.size(); ++i)
        for (int c = 0; c < 3; ++c) m.faces(static_cast<int>(i), c) = f[i][static_cast<size_t>(c)];
    return m;
}

TriMesh merge(const TriMesh& a, const TriMesh& b) {
    TriMesh m;
    m.vertices.resize(a.vertices.rows() + b.vertices.rows(), 3);
    m.vertices << a.vertices, b.vertices;
    m.faces.resize(a.faces.rows() + b.faces.rows(), 3);
    m.faces << a.faces, (b.faces.array() + static_cast<int>(a.vertices.rows())).matrix();
    return m;
}

TriMesh translate(const TriMesh& mesh, const Vector3d& offset) {
    TriMesh m = mesh;
    m.vertices.rowwise() += offset.transpose();
    return m;
}

void save_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.precision(9);
    for (int i = 0; i < mesh.vertices.rows(); ++i)
        os << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' '
           << mesh.vertices(i, 2) << '\n';
    for (int f = 0; f < mesh.faces.rows(); ++f)
        os << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' '
           << mesh.faces(f, 2) + 1 << '\n';
}

TriMesh load_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<Vector3d> verts;
    std::vector<std::array<int, 3>> faces;
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vector3d p;
            ss >> p.x() >> p.y() >> p.z();
            verts.push_back(p);
        } else if (tag == "f") {
            std::array<int, 3> f{};
            for (int c = 0; c < 3; ++c) {
                std::string tok;
                ss >> tok;
                f[static_cast<size_t>(c)] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            faces.push_back(f);
        }
    }
    TriMesh m;
    m.vertices.resize(static_cast<int>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i)
        m.vertices.row(static_cast<int>(i)) = verts[i].transpose();
    m.faces.resize(static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i)
        for (int c = 0; c < 3; ++c) m.faces(static_cast<int>(i), c) = faces[i][static_cast<size_t>(c)];
    return m;
}

}  // namespace dvq::geom
