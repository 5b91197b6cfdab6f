#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "graspkit/geometry.hpp"

using namespace gk;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, bool with_normals = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        c.points.emplace_back(u(rng), u(rng), u(rng));
        if (with_normals) {
            Vec3 v(u(rng), u(rng), u(rng));
            if (v.norm() < 1e-6) v = Vec3::UnitZ();
            c.normals.push_back(v.normalized());
        }
    }
    return c;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("rigid transform basics") {
    const RigidTransform r = RigidTransform::rotate_axis_angle(Vec3::UnitZ(), M_PI / 2);
    CHECK(r.apply(Vec3(1, 0, 0)).isApprox(Vec3(0, 1, 0), 1e-12));

    const RigidTransform t = RigidTransform::translate(Vec3(1, 2, 3));
    const RigidTransform rt = t * r;
    const Vec3 p(0.3, -0.7, 0.2);
    CHECK(rt.apply(p).isApprox(t.apply(r.apply(p)), 1e-12));
    CHECK(rt.inverse().apply(rt.apply(p)).isApprox(p, 1e-12));

    Mat3 bad = Mat3::Identity();
    bad(0, 0) = 2.0;  // not orthonormal
    CHECK_THROWS_AS(RigidTransform(bad, Vec3::Zero()), DomainError);
}

TEST_CASE("rigid transform preserves pairwise distances") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const RigidTransform t =
        RigidTransform::translate(Vec3(0.4, -1.1, 2.0)) *
        RigidTransform::rotate_axis_angle(Vec3(1, 2, 3).normalized(), 1.234);
    for (int i = 0; i < 50; ++i) {
        const Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
        CHECK((t.apply(a) - t.apply(b)).norm() == doctest::Approx((a - b).norm()).epsilon(1e-12));
    }
}

TEST_CASE("obj parse: minimal triangle") {
    std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    const TriangleMesh m = parse_obj(in);
    REQUIRE(m.vertices.size() == 3);
    REQUIRE(m.faces.size() == 1);
    CHECK(m.surface_area() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("obj parse: quad face fan-triangulated") {
    std::istringstream in("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    const TriangleMesh m = parse_obj(in);
    REQUIRE(m.faces.size() == 2);
    CHECK(m.surface_area() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("obj parse: out-of-range index rejected") {
    std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
    CHECK_THROWS_AS(parse_obj(in), DataError);
}

TEST_CASE("obj parse: vn/vt records ignored, f with slashes accepted") {
    std::istringstream in(
        "vn 0 0 1\nvt 0 0\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/1/1 3/1/1\n");
    const TriangleMesh m = parse_obj(in);
    CHECK(m.faces.size() == 1);
}

TEST_CASE("obj write/parse round trip") {
    std::istringstream in("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    const TriangleMesh m = parse_obj(in);
    std::ostringstream out;
    write_obj(m, out);
    std::istringstream back(out.str());
    const TriangleMesh m2 = parse_obj(back);
    REQUIRE(m2.faces.size() == m.faces.size());
    CHECK(m2.surface_area() == doctest::Approx(m.surface_area()).epsilon(1e-9));
}

TEST_CASE("mesh volume of unit tetrahedron") {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    // Outward-oriented faces.
    m.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    CHECK(std::abs(m.volume()) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("surface sampling is area-weighted (binomial bound)") {
    // Two coplanar triangles with areas 0.5 and 1.5, separated in x.
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0),  Vec3(0, 1, 0),
                  Vec3(5, 0, 0), Vec3(8, 0, 0), Vec3(5, 1, 0)};
    m.faces = {{0, 1, 2}, {3, 4, 5}};
    const std::size_t n = 40000;
    const PointCloud c = sample_surface(m, n, 42);
    REQUIRE(c.size() == n);
    std::size_t big = 0;
    for (const Vec3& p : c.points)
        if (p.x() > 2.0) ++big;
    const double p_big = 1.5 / 2.0;
    const double sigma = std::sqrt(n * p_big * (1 - p_big));
    CHECK(std::abs(static_cast<double>(big) - n * p_big) < 3.0 * sigma);
}

TEST_CASE("surface sampling deterministic per seed with face normals") {
    const TriangleMesh m = [] {
        std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
        return parse_obj(in);
    }();
    const PointCloud a = sample_surface(m, 64, 5);
    const PointCloud b = sample_surface(m, 64, 5);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.has_normals());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.points[i] == b.points[i]);
        CHECK(a.normals[i].isApprox(Vec3(0, 0, 1), 1e-12));
    }
}

TEST_CASE("nearest neighbor matches a brute-force oracle") {
    const PointCloud cloud = random_cloud(1000, 11);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int q = 0; q < 100; ++q) {
        const Vec3 query(u(rng), u(rng), u(rng));
        // Independent linear scan, lowest index on ties.
        std::size_t best = 0;
        double best_d2 = (cloud.points[0] - query).squaredNorm();
        for (std::size_t i = 1; i < cloud.size(); ++i) {
            const double d2 = (cloud.points[i] - query).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        const NearestResult r = nearest_neighbor(query, cloud);
        CHECK(r.index == best);
        CHECK(r.squared_distance == doctest::Approx(best_d2).epsilon(1e-12));
    }
}

TEST_CASE("centroid and max radius") {
    PointCloud c;
    c.points = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
    CHECK(c.centroid().isApprox(Vec3(1, 0, 0), 1e-12));
    CHECK(c.max_radius() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cloud csv round trip") {
    const PointCloud c = random_cloud(50, 3, true);
    std::ostringstream out;
    write_cloud_csv(c, out);
    std::istringstream in(out.str());
    const PointCloud back = read_cloud_csv(in);
    REQUIRE(back.size() == c.size());
    REQUIRE(back.has_normals());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(back.points[i].isApprox(c.points[i], 1e-7));
        CHECK(back.normals[i].isApprox(c.normals[i], 1e-6));
    }
}

TEST_CASE("cloud csv rejects malformed input") {
    std::istringstream in("x,y\n1,2\n");
    CHECK_THROWS_AS(read_cloud_csv(in), DataError);
}

}  // TEST_SUITE
