#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "graspkit/gripper.hpp"

namespace gk {

// L x 3N fingertip workspace sample set. Row m holds the N simultaneous
// fingertip positions of one joint configuration; the generating configs are
// kept alongside for audit.
struct WorkspaceMatrix {
    Eigen::MatrixXd samples;              // L x 3N
    int n_fingers = 0;
    std::vector<std::vector<double>> configs;  // L generating JointConfigs

    std::int64_t rows() const { return samples.rows(); }
    Vec3 fingertip(std::int64_t row, int finger) const {
        return samples.block<1, 3>(row, 3 * finger).transpose();
    }
};

enum class SampleStrategy { UniformJoint, Grid };

// Draws L in-limit configurations (uniform in joint space, or an axis-aligned
// grid), applies FK, one row per configuration. Singular five-bar draws are
// rejected and redrawn. Deterministic per seed.
WorkspaceMatrix sample_workspace(const GripperModel& model, std::int64_t count,
                                 std::uint64_t seed,
                                 SampleStrategy strategy = SampleStrategy::UniformJoint);

// Per-finger column-slice symmetric Chamfer distance, summed over fingers.
// Squared meters.
double coupled_chamfer(const WorkspaceMatrix& s1, const WorkspaceMatrix& s2);
double coupled_chamfer(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, int n_fingers);

// Binary format: magic WSM1, L and N as 64-bit LE counts, L*3N LE doubles
// row-major, then L*A doubles of generating configs.
void save_workspace(const WorkspaceMatrix& ws, const std::string& path);
WorkspaceMatrix load_workspace(const std::string& path);

}  // namespace gk
