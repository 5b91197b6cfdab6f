#include <cmath>
#include <random>

#include "doctest.h"
#include "graspkit/quality.hpp"
#include "graspkit/pipeline.hpp"

using namespace gk;

namespace {

// Independent cyclic Jacobi-rotation eigensolver for symmetric matrices;
// returns the smallest eigenvalue.
double jacobi_smallest_eigenvalue(Eigen::MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-30) continue;
                const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n);
                j(p, p) = c;
                j(q, q) = c;
                j(p, q) = s;
                j(q, p) = -s;
                a = j.transpose() * a * j;
            }
        }
    }
    return a.diagonal().minCoeff();
}

std::vector<Vec3> random_contacts(int k, std::mt19937_64& rng, double radius = 0.06) {
    std::normal_distribution<double> g;
    std::vector<Vec3> c;
    for (int i = 0; i < k; ++i) {
        Vec3 v(g(rng), g(rng), g(rng));
        c.push_back(radius * v.normalized());
    }
    return c;
}

}  // namespace

TEST_SUITE("quality") {

TEST_CASE("grasp matrix block structure") {
    const auto g0 = grasp_matrix({Vec3::Zero()}, Vec3::Zero());
    REQUIRE(g0.cols() == 3);
    CHECK(g0.topRows(3).isApprox(Mat3::Identity(), 1e-15));
    CHECK(g0.bottomRows(3).isZero(1e-15));

    const auto g1 = grasp_matrix({Vec3(0, 0, 1)}, Vec3::Zero());
    Mat3 skew;
    skew << 0, -1, 0, 1, 0, 0, 0, 0, 0;  // skew((0,0,1))
    CHECK(g1.bottomRows(3).isApprox(skew, 1e-15));
}

TEST_CASE("eigensolver matches a jacobi-rotation oracle") {
    std::mt19937_64 rng(101);
    for (int t = 0; t < 200; ++t) {
        const int k = 2 + static_cast<int>(rng() % 3);
        const auto contacts = random_contacts(k, rng);
        const auto g = grasp_matrix(contacts, Vec3::Zero());
        const Eigen::MatrixXd gg =
            g * g.transpose() - 0.01 * Eigen::MatrixXd::Identity(6, 6);
        double lambda0 = 0;
        gqs_raw(contacts, Vec3::Zero(), 0.01, 1.0, &lambda0);
        CHECK(std::abs(lambda0 - jacobi_smallest_eigenvalue(gg)) < 1e-9);
    }
}

TEST_CASE("single contact at the origin: clamped score vs oracle divergence") {
    double lambda0 = 0;
    const double raw = gqs_raw({Vec3::Zero()}, Vec3::Zero(), 0.01, 1.0, &lambda0);
    // GG' = diag(1,1,1,0,0,0), so the smallest eigenvalue of GG' - 0.01 I is -0.01.
    CHECK(lambda0 == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(raw > 1.0);  // pre-clamp value ~1.005
    CHECK(gqs({Vec3::Zero()}, Vec3::Zero()) == doctest::Approx(1.0));
    // A single frictional point contact is never force closure; the score
    // saturates high anyway. The LP oracle is the ground truth.
}

TEST_CASE("gqs stays clamped to [0,1] and is rotation-invariant") {
    std::mt19937_64 rng(102);
    std::normal_distribution<double> g;
    for (int t = 0; t < 100; ++t) {
        const auto contacts = random_contacts(2 + static_cast<int>(rng() % 3), rng,
                                              0.01 + 0.5 * std::abs(g(rng)));
        const double s = gqs(contacts, Vec3::Zero());
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);

        Vec3 axis(g(rng), g(rng), g(rng));
        if (axis.norm() < 1e-9) axis = Vec3::UnitX();
        const RigidTransform rot = RigidTransform::rotate_axis_angle(axis.normalized(), g(rng));
        std::vector<Vec3> rotated;
        for (const Vec3& c : contacts) rotated.push_back(rot.rotate(c));
        CHECK(std::abs(gqs(rotated, Vec3::Zero()) - s) < 1e-9);
    }
}

TEST_CASE("pre-clamp score is strictly decreasing in the smallest eigenvalue") {
    // Growing the contact radius grows every eigenvalue of GG'; the raw
    // sigmoid-wrapped score must fall monotonically.
    std::vector<Vec3> base = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0)};
    double prev_raw = 2.0, prev_lambda = -1.0;
    for (double r : {0.02, 0.1, 0.5, 1.0, 2.0}) {
        std::vector<Vec3> scaled;
        for (const Vec3& c : base) scaled.push_back(r * c);
        double lambda0 = 0;
        const double raw = gqs_raw(scaled, Vec3::Zero(), 0.01, 1.0, &lambda0);
        CHECK(lambda0 > prev_lambda);
        CHECK(raw < prev_raw);
        prev_lambda = lambda0;
        prev_raw = raw;
    }
}

TEST_CASE("force closure: antipodal true, parallel false, symmetric disk true") {
    FrictionModel fm;  // mu = 0.5, 8 edges
    const Vec3 origin = Vec3::Zero();

    // Antipodal contacts on a unit sphere; inward normals.
    CHECK(force_closure_oracle({Vec3(1, 0, 0), Vec3(-1, 0, 0)},
                               {Vec3(-1, 0, 0), Vec3(1, 0, 0)}, fm, origin));

    // Two contacts on the same face with identical normals: every wrench
    // lies in a half-space, so the normal direction cannot be resisted.
    CHECK_FALSE(force_closure_oracle({Vec3(0.1, 0, 0), Vec3(-0.1, 0, 0)},
                                     {Vec3(0, 0, -1), Vec3(0, 0, -1)}, fm, origin));

    // Three symmetric contacts on a disk edge with inward normals.
    std::vector<Vec3> tri, tri_n;
    for (int i = 0; i < 3; ++i) {
        const double a = 2 * M_PI * i / 3;
        tri.emplace_back(std::cos(a), std::sin(a), 0);
        tri_n.emplace_back(-std::cos(a), -std::sin(a), 0);
    }
    CHECK(force_closure_oracle(tri, tri_n, fm, origin));

    CHECK_THROWS_AS(force_closure_oracle({Vec3(1, 0, 0), Vec3(-1, 0, 0)},
                                         {Vec3::Zero(), Vec3(1, 0, 0)}, fm, origin),
                    DomainError);
}

TEST_CASE("force closure is monotone in the friction coefficient") {
    std::mt19937_64 rng(103);
    int closures = 0;
    for (int t = 0; t < 100; ++t) {
        const auto contacts = random_contacts(3, rng, 0.05);
        std::vector<Vec3> normals;
        for (const Vec3& c : contacts) normals.push_back((-c).normalized());
        bool prev = false;
        for (double mu : {0.1, 0.3, 0.6, 1.0}) {
            FrictionModel fm;
            fm.mu = mu;
            const bool fc = force_closure_oracle(contacts, normals, fm, Vec3::Zero());
            if (prev) CHECK(fc);  // closure persists as the cone widens
            prev = fc;
        }
        if (prev) ++closures;
    }
    CHECK(closures > 0);  // the sweep saw genuine closures, not vacuous passes
}

TEST_CASE("force closure is invariant under joint rigid transforms") {
    std::mt19937_64 rng(104);
    std::normal_distribution<double> g;
    FrictionModel fm;
    for (int t = 0; t < 25; ++t) {
        const auto contacts = random_contacts(3, rng, 0.05);
        std::vector<Vec3> normals;
        for (const Vec3& c : contacts) normals.push_back((-c).normalized());
        const bool before = force_closure_oracle(contacts, normals, fm, Vec3::Zero());

        Vec3 axis(g(rng), g(rng), g(rng));
        if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
        const RigidTransform xf = RigidTransform::translate(Vec3(g(rng), g(rng), g(rng))) *
                                  RigidTransform::rotate_axis_angle(axis.normalized(), g(rng));
        std::vector<Vec3> c2, n2;
        for (std::size_t i = 0; i < contacts.size(); ++i) {
            c2.push_back(xf.apply(contacts[i]));
            n2.push_back(xf.rotate(normals[i]));
        }
        CHECK(force_closure_oracle(c2, n2, fm, xf.apply(Vec3::Zero())) == before);
    }
}

TEST_CASE("lp feasibility basics") {
    // x = b is feasible for identity A with nonnegative b.
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
    CHECK(lp_equality_feasible(a, Eigen::Vector2d(1.0, 2.0)));
    // No nonnegative solution to x = -1.
    CHECK_FALSE(lp_equality_feasible(Eigen::MatrixXd::Identity(1, 1),
                                     -Eigen::VectorXd::Ones(1)));
}

TEST_CASE("reachability accepts posed workspace rows and rejects scale mismatches") {
    const GripperModel m = make_tri3();
    const WorkspaceMatrix ws = sample_workspace(m, 256, 7);

    // Take a workspace row, rigidly move it, and ask for it back.
    const std::int64_t row = 17;
    const RigidTransform pose = RigidTransform::translate(Vec3(0.3, -0.2, 0.5)) *
                                RigidTransform::rotate_axis_angle(Vec3(1, 1, 0).normalized(), 0.8);
    std::vector<Vec3> contacts;
    for (int f = 0; f < m.n_fingers; ++f) contacts.push_back(pose.apply(ws.fingertip(row, f)));
    // Scramble the contact order: the assignment search must recover it.
    std::swap(contacts[0], contacts[2]);

    std::vector<int> assignment;
    double best = 0;
    RigidTransform recovered;
    REQUIRE(reachable_contacts(contacts, ws, 1e-6, &assignment, &best, &recovered));
    CHECK(best < 1e-9);
    CHECK(assignment == std::vector<int>{2, 1, 0});
    for (int f = 0; f < 3; ++f)
        CHECK(recovered.apply(ws.fingertip(row, f)).isApprox(contacts[static_cast<std::size_t>(2 - f)], 1e-6));

    // A meter-scale triangle is far outside any hand-sized workspace.
    const std::vector<Vec3> huge = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0)};
    CHECK_FALSE(reachable_contacts(huge, ws, 0.01));
}

TEST_CASE("ground truth generation: sphere yields sets, scale mismatch yields none") {
    const GripperModel m = make_tri3();
    const WorkspaceMatrix ws = sample_workspace(m, 512, 11);
    const TriangleMesh sphere = make_sphere(0.04);
    const PointCloud cloud = sample_surface(sphere, 256, 12);

    GroundTruthOptions opt;
    opt.n_sets = 4;
    opt.seed = 13;
    const PssnRecord rec = generate_ground_truth(cloud, m, ws, opt);
    CHECK(!rec.contact_sets.empty());
    REQUIRE(rec.stage_truth.size() == 3);
    for (const auto& set : rec.contact_sets) {
        REQUIRE(set.size() == 3);
        // Every kept set passes the oracle with inward normals.
        std::vector<Vec3> c, n;
        for (int idx : set) {
            c.push_back(cloud.points[static_cast<std::size_t>(idx)]);
            n.push_back(-cloud.normals[static_cast<std::size_t>(idx)]);
        }
        CHECK(force_closure_oracle(c, n, opt.friction, cloud.centroid()));
        CHECK(reachable_contacts(c, ws, opt.reach_tolerance));
    }

    // Determinism.
    const PssnRecord rec2 = generate_ground_truth(cloud, m, ws, opt);
    CHECK(rec2.contact_sets == rec.contact_sets);

    // Tiny-stroke jaw against a big object: the reachability filter removes everything.
    const GripperModel jaw = make_jaw2();
    const WorkspaceMatrix jaw_ws = sample_workspace(jaw, 128, 14);
    const PointCloud big = sample_surface(make_sphere(0.5), 256, 15);
    GroundTruthOptions opt2;
    opt2.n_sets = 2;
    opt2.max_draws = 20000;
    const PssnRecord none = generate_ground_truth(big, jaw, jaw_ws, opt2);
    CHECK(none.contact_sets.empty());
}

}  // TEST_SUITE
