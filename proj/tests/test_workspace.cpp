#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "doctest.h"
#include "graspkit/workspace.hpp"

using namespace gk;

namespace {

// Independent O(L^2) per-finger symmetric Chamfer sum.
double chamfer_oracle(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, int n_fingers) {
    double total = 0;
    for (int f = 0; f < n_fingers; ++f) {
        const auto a = s1.middleCols(3 * f, 3);
        const auto b = s2.middleCols(3 * f, 3);
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < b.rows(); ++j)
                best = std::min(best, (a.row(i) - b.row(j)).squaredNorm());
            total += best;
        }
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < a.rows(); ++i)
                best = std::min(best, (a.row(i) - b.row(j)).squaredNorm());
            total += best;
        }
    }
    return total;
}

std::string temp_path(const char* stem) {
    return std::string("/tmp/graspkit_unit_") + stem + "_" + std::to_string(::getpid());
}

}  // namespace

TEST_SUITE("workspace") {

TEST_CASE("sampling is deterministic and audit-consistent") {
    const GripperModel m = make_tri3();
    const WorkspaceMatrix a = sample_workspace(m, 64, 9);
    const WorkspaceMatrix b = sample_workspace(m, 64, 9);
    REQUIRE(a.rows() == 64);
    CHECK(a.samples == b.samples);
    // Every row reproduces the FK of its stored generating configuration.
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        const auto tips = forward_kinematics(m, a.configs[r]);
        for (int f = 0; f < m.n_fingers; ++f) CHECK(a.fingertip(r, f).isApprox(tips[f], 1e-12));
    }
}

TEST_CASE("grid strategy covers the joint box") {
    const GripperModel m = make_jaw2();
    const WorkspaceMatrix ws = sample_workspace(m, 9, 0, SampleStrategy::Grid);
    REQUIRE(ws.rows() == 9);
    // One actuated joint: the grid is the sorted axis subdivision.
    CHECK(ws.configs.front()[0] == doctest::Approx(0.0));
    CHECK(ws.configs.back()[0] == doctest::Approx(0.04));
}

TEST_CASE("coupled chamfer hand value") {
    Eigen::MatrixXd s1(1, 3), s2(1, 3);
    s1 << 0, 0, 0;
    s2 << 1, 0, 0;
    // Single finger, single row: symmetric squared Chamfer = 1 + 1.
    CHECK(coupled_chamfer(s1, s2, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(coupled_chamfer(s1, s1, 1) == doctest::Approx(0.0));
}

TEST_CASE("coupled chamfer is symmetric and row-permutation invariant") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Eigen::MatrixXd s1(16, 9), s2(20, 9);
    for (Eigen::Index i = 0; i < s1.size(); ++i) s1.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < s2.size(); ++i) s2.data()[i] = g(rng);

    CHECK(coupled_chamfer(s1, s2, 3) == doctest::Approx(coupled_chamfer(s2, s1, 3)).epsilon(1e-12));

    Eigen::MatrixXd shuffled = s1;
    std::vector<int> order(16);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < 16; ++i) shuffled.row(i) = s1.row(order[i]);
    CHECK(coupled_chamfer(shuffled, s2, 3) ==
          doctest::Approx(coupled_chamfer(s1, s2, 3)).epsilon(1e-12));
}

TEST_CASE("coupled chamfer matches the double-loop oracle") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
        const int n_fingers = 1 + static_cast<int>(rng() % 3);
        Eigen::MatrixXd s1(4 + rng() % 28, 3 * n_fingers), s2(4 + rng() % 28, 3 * n_fingers);
        for (Eigen::Index i = 0; i < s1.size(); ++i) s1.data()[i] = g(rng);
        for (Eigen::Index i = 0; i < s2.size(); ++i) s2.data()[i] = g(rng);
        const double ours = coupled_chamfer(s1, s2, n_fingers);
        const double oracle = chamfer_oracle(s1, s2, n_fingers);
        CHECK(ours == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("chamfer rejects mismatched shapes") {
    Eigen::MatrixXd s1(2, 3), s2(2, 6);
    s1.setZero();
    s2.setZero();
    CHECK_THROWS_AS(coupled_chamfer(s1, s2, 1), DomainError);
}

TEST_CASE("workspace file round trip is exact") {
    const GripperModel m = make_fivebar3();
    const WorkspaceMatrix ws = sample_workspace(m, 32, 13);
    const std::string path = temp_path("ws") + ".wsm";
    save_workspace(ws, path);
    const WorkspaceMatrix back = load_workspace(path);
    CHECK(back.samples == ws.samples);
    CHECK(back.n_fingers == ws.n_fingers);
    REQUIRE(back.configs.size() == ws.configs.size());
    CHECK(back.configs == ws.configs);
    std::remove(path.c_str());
}

TEST_CASE("workspace loader rejects truncated files") {
    const WorkspaceMatrix ws = sample_workspace(make_jaw2(), 16, 1);
    const std::string path = temp_path("trunc") + ".wsm";
    save_workspace(ws, path);
    // Truncate the payload.
    FILE* f = std::fopen(path.c_str(), "r+");
    REQUIRE(f != nullptr);
    REQUIRE(::ftruncate(::fileno(f), 64) == 0);
    std::fclose(f);
    CHECK_THROWS_AS(load_workspace(path), DataError);
    std::remove(path.c_str());
}

}  // TEST_SUITE
