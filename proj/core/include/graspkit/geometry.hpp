#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "graspkit/errors.hpp"

namespace gk {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Proper rigid motion p -> R*p + t. R is validated orthonormal with
// det = +1 within 1e-9 on construction.
class RigidTransform {
public:
    RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
    RigidTransform(const Mat3& rotation, const Vec3& translation);

    static RigidTransform identity() { return {}; }
    static RigidTransform translate(const Vec3& t) { return {Mat3::Identity(), t}; }
    static RigidTransform rotate_axis_angle(const Vec3& axis, double angle);

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
    Vec3 rotate(const Vec3& v) const { return rotation_ * v; }
    RigidTransform inverse() const;
    RigidTransform operator*(const RigidTransform& rhs) const;

private:
    Mat3 rotation_;
    Vec3 translation_;
};

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    double surface_area() const;
    // Signed volume via the divergence theorem; meaningful for watertight meshes.
    double volume() const;
    Vec3 face_normal(int face) const;
    double face_area(int face) const;
};

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // empty, or one unit normal per point

    std::size_t size() const { return points.size(); }
    bool has_normals() const { return !normals.empty(); }
    Vec3 centroid() const;
    // Largest distance from the centroid; 0 for a single point.
    double max_radius() const;
};

// ASCII OBJ subset: `v` and `f` records, polygon faces fan-triangulated,
// 1-based indices. `vn`/`vt`/materials/groups are ignored. Zero-area faces
// are dropped after load.
TriangleMesh parse_obj(std::istream& in);
TriangleMesh load_obj(const std::string& path);
void write_obj(const TriangleMesh& mesh, std::ostream& out);

// Area-weighted barycentric surface sampling; normals are face normals.
// Deterministic for a fixed seed.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t m, std::uint64_t seed);

PointCloud transform_points(const RigidTransform& t, const PointCloud& cloud);

// Exact nearest neighbor (linear scan); ties resolve to the lowest index.
struct NearestResult {
    std::size_t index;
    double squared_distance;
};
NearestResult nearest_neighbor(const Vec3& query, const PointCloud& cloud);

// CSV with header `x,y,z[,nx,ny,nz]`, 9 significant digits.
void write_cloud_csv(const PointCloud& cloud, std::ostream& out);
PointCloud read_cloud_csv(std::istream& in);
void save_cloud_csv(const PointCloud& cloud, const std::string& path);
PointCloud load_cloud_csv(const std::string& path);

}  // namespace gk
