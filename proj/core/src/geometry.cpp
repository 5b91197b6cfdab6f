#include "graspkit/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace gk {

namespace {

void check_finite(const Vec3& p, const char* what) {
    if (!p.allFinite()) throw DomainError(std::string(what) + ": non-finite coordinates");
}

}  // namespace

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
    check_finite(translation, "RigidTransform");
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).norm();
    if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw DomainError("RigidTransform: rotation not orthonormal with det +1");
    }
}

RigidTransform RigidTransform::rotate_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-12) throw DomainError("rotate_axis_angle: zero axis");
    const Vec3 u = axis / n;
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 k;
    k << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
    Mat3 r = Mat3::Identity() + s * k + (1 - c) * k * k;
    // Re-orthonormalize so repeated composition stays within tolerance.
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
    return {r, Vec3::Zero()};
}

RigidTransform RigidTransform::inverse() const {
    return {rotation_.transpose(), -(rotation_.transpose() * translation_)};
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
    return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_};
}

double TriangleMesh::face_area(int face) const {
    const auto& f = faces.at(face);
    const Vec3 e1 = vertices[f[1]] - vertices[f[0]];
    const Vec3 e2 = vertices[f[2]] - vertices[f[0]];
    return 0.5 * e1.cross(e2).norm();
}

Vec3 TriangleMesh::face_normal(int face) const {
    const auto& f = faces.at(face);
    const Vec3 e1 = vertices[f[1]] - vertices[f[0]];
    const Vec3 e2 = vertices[f[2]] - vertices[f[0]];
    const Vec3 n = e1.cross(e2);
    const double len = n.norm();
    if (len < 1e-18) throw DataError("face_normal: degenerate face");
    return n / len;
}

double TriangleMesh::surface_area() const {
    double a = 0;
    for (int i = 0; i < static_cast<int>(faces.size()); ++i) a += face_area(i);
    return a;
}

double TriangleMesh::volume() const {
    double v = 0;
    for (const auto& f : faces) {
        v += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]])) / 6.0;
    }
    return v;
}

Vec3 PointCloud::centroid() const {
    if (points.empty()) throw DataError("centroid: empty cloud");
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return c / static_cast<double>(points.size());
}

double PointCloud::max_radius() const {
    const Vec3 c = centroid();
    double r = 0;
    for (const auto& p : points) r = std::max(r, (p - c).norm());
    return r;
}

namespace {

int parse_face_index(const std::string& token, std::size_t n_vertices, int line_no) {
    // `f` entries may be v, v/vt, v/vt/vn, v//vn; only the vertex index matters.
    const std::string head = token.substr(0, token.find('/'));
    int idx = 0;
    try {
        idx = std::stoi(head);
    } catch (const std::exception&) {
        throw DataError("OBJ parse error at line " + std::to_string(line_no) +
                        ": bad face index '" + token + "'");
    }
    if (idx < 1 || static_cast<std::size_t>(idx) > n_vertices) {
        throw DataError("OBJ structural error at line " + std::to_string(line_no) +
                        ": face index " + std::to_string(idx) + " out of range");
    }
    return idx - 1;
}

}  // namespace

TriangleMesh parse_obj(std::istream& in) {
    TriangleMesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) {
                throw DataError("OBJ parse error at line " + std::to_string(line_no) +
                                ": malformed vertex record");
            }
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string token;
            while (ls >> token) idx.push_back(parse_face_index(token, mesh.vertices.size(), line_no));
            if (idx.size() < 3) {
                throw DataError("OBJ parse error at line " + std::to_string(line_no) +
                                ": face with fewer than 3 vertices");
            }
            for (std::size_t i = 1; i + 1 < idx.size(); ++i) {
                mesh.faces.push_back({idx[0], idx[static_cast<int>(i)], idx[i + 1]});
            }
        }
        // vn, vt, g, o, s, usemtl, mtllib: geometry-only subset, skipped.
    }
    // Drop zero-area faces.
    std::vector<std::array<int, 3>> kept;
    kept.reserve(mesh.faces.size());
    for (const auto& f : mesh.faces) {
        const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        if (e1.cross(e2).norm() > 1e-18) kept.push_back(f);
    }
    mesh.faces = std::move(kept);
    return mesh;
}

TriangleMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open OBJ file: " + path);
    return parse_obj(in);
}

void write_obj(const TriangleMesh& mesh, std::ostream& out) {
    out.precision(12);
    for (const auto& v : mesh.vertices) {
        out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const auto& f : mesh.faces) {
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
}

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t m, std::uint64_t seed) {
    if (mesh.faces.empty()) throw DataError("sample_surface: mesh has no faces");
    if (m < 1) throw DomainError("sample_surface: m must be >= 1");

    std::vector<double> cumulative(mesh.faces.size());
    double total = 0;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        total += mesh.face_area(static_cast<int>(i));
        cumulative[i] = total;
    }
    if (total <= 0) throw DataError("sample_surface: zero total surface area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PointCloud cloud;
    cloud.points.reserve(m);
    cloud.normals.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double r = unit(rng) * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
        const int face = static_cast<int>(it - cumulative.begin());
        const auto& f = mesh.faces[std::min<std::size_t>(face, mesh.faces.size() - 1)];
        double u = unit(rng), v = unit(rng);
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Vec3 p = mesh.vertices[f[0]] +
                       u * (mesh.vertices[f[1]] - mesh.vertices[f[0]]) +
                       v * (mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        cloud.points.push_back(p);
        cloud.normals.push_back(mesh.face_normal(std::min<std::size_t>(face, mesh.faces.size() - 1)));
    }
    return cloud;
}

PointCloud transform_points(const RigidTransform& t, const PointCloud& cloud) {
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
    out.normals.reserve(cloud.normals.size());
    for (const auto& n : cloud.normals) out.normals.push_back(t.rotate(n));
    return out;
}

NearestResult nearest_neighbor(const Vec3& query, const PointCloud& cloud) {
    if (cloud.points.empty()) throw DataError("nearest_neighbor: empty cloud");
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const double d2 = (cloud.points[i] - query).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return {best, best_d2};
}

void write_cloud_csv(const PointCloud& cloud, std::ostream& out) {
    const bool n = cloud.has_normals();
    out << (n ? "x,y,z,nx,ny,nz\n" : "x,y,z\n");
    out.precision(9);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const auto& p = cloud.points[i];
        out << p.x() << ',' << p.y() << ',' << p.z();
        if (n) {
            const auto& v = cloud.normals[i];
            out << ',' << v.x() << ',' << v.y() << ',' << v.z();
        }
        out << '\n';
    }
}

PointCloud read_cloud_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("cloud CSV: missing header");
    const bool has_normals = line.find("nx") != std::string::npos;
    PointCloud cloud;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<double> vals;
        std::string cell;
        while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
        const std::size_t want = has_normals ? 6 : 3;
        if (vals.size() != want) {
            throw DataError("cloud CSV: wrong column count at line " + std::to_string(line_no));
        }
        cloud.points.emplace_back(vals[0], vals[1], vals[2]);
        if (has_normals) cloud.normals.emplace_back(vals[3], vals[4], vals[5]);
    }
    if (cloud.points.empty()) throw DataError("cloud CSV: no points");
    return cloud;
}

void save_cloud_csv(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open for write: " + path);
    write_cloud_csv(cloud, out);
}

PointCloud load_cloud_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open: " + path);
    return read_cloud_csv(in);
}

}  // namespace gk
