#pragma once

#include <Eigen/Core>

#include "graspkit/geometry.hpp"
#include "graspkit/pssn.hpp"
#include "graspkit/workspace.hpp"

namespace gk {

struct FrictionModel {
    double mu = 0.5;  // Coulomb coefficient
    int cone_edges = 8;
};

// 6 x 3k map from stacked contact forces to the net object wrench. Column
// block i is [I3 ; skew((p_i - origin) / torque_scale)].
Eigen::Matrix<double, 6, Eigen::Dynamic> grasp_matrix(const std::vector<Vec3>& contacts,
                                                      const Vec3& origin,
                                                      double torque_scale = 1.0);

// Sigmoid-wrapped smallest eigenvalue of G*G' - eps*I, clamped to [0, 1].
// Implemented exactly as stated; the LP oracle below is the ground truth for
// force closure (see README on the divergence between the two).
double gqs(const std::vector<Vec3>& contacts, const Vec3& origin, double eps = 0.01,
           double torque_scale = 1.0);
// Pre-clamp value and smallest eigenvalue, for reporting.
double gqs_raw(const std::vector<Vec3>& contacts, const Vec3& origin, double eps,
               double torque_scale, double* lambda0);

// LP feasibility check: friction cones are discretized into edge forces and
// the grasp is force closure iff every +/- wrench-basis direction is a
// nonnegative combination of the edge wrenches. `normals` are the inward
// contact-force cone axes (pointing into the object).
bool force_closure_oracle(const std::vector<Vec3>& contacts, const std::vector<Vec3>& normals,
                          const FrictionModel& friction, const Vec3& origin);

// min c'x s.t. Ax = b, x >= 0 feasibility via two-phase simplex with Bland's
// rule; exposed for the oracle's tests.
bool lp_equality_feasible(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

// Canonical grasp approach frame: origin at the contact centroid shifted by
// `approach_distance` along the approach axis, z pointing back at the
// contacts. `outward` hints which side of the contact plane faces free space.
RigidTransform grasp_frame(const std::vector<Vec3>& contacts, const Vec3& outward,
                           double approach_distance, double roll);

struct GroundTruthOptions {
    int n_sets = 8;
    std::uint64_t seed = 0;
    FrictionModel friction;
    double reach_tolerance = 0.010;  // per-finger, meters
    std::int64_t max_draws = 200000;
};

// Rejection-samples contact sets that pass both the force-closure oracle and
// the workspace-reachability filter; contact slots follow the best
// finger-to-contact assignment. May return fewer than n_sets.
PssnRecord generate_ground_truth(const PointCloud& cloud, const GripperModel& gripper,
                                 const WorkspaceMatrix& workspace,
                                 const GroundTruthOptions& options);

// Best-assignment reachability: true when some workspace row, rigidly posed
// by the (6-DOF) arm, places every finger within `tolerance` of a contact —
// decided by least-squares alignment (Kabsch) over all finger permutations,
// with a permutation-invariant pairwise-distance pre-filter on rows. Fills
// `slot_of_contact` with the best assignment and `gripper_pose` with the
// gripper-base-to-world transform of the best row when provided.
bool reachable_contacts(const std::vector<Vec3>& contacts, const WorkspaceMatrix& workspace,
                        double tolerance, std::vector<int>* slot_of_contact = nullptr,
                        double* best_distance = nullptr,
                        RigidTransform* gripper_pose = nullptr,
                        std::int64_t* best_row = nullptr);

}  // namespace gk
