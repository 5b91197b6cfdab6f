#pragma once

#include <optional>
#include <string>
#include <vector>

#include "graspkit/geometry.hpp"

namespace gk {

struct JointSpec {
    enum class Kind { Revolute, Prismatic };
    Kind kind = Kind::Revolute;
    Vec3 axis = Vec3::UnitZ();          // unit vector in the parent frame
    RigidTransform origin;              // fixed transform before the joint motion
    int actuated_index = 0;             // which actuated value drives this joint
    double coupling = 1.0;              // joint value = coupling * actuated value
};

// Planar five-bar linkage in the gripper base xy-plane. Base joints sit at
// (-base/2, 0, 0) and (+base/2, 0, 0); proximal links are driven by two
// actuated angles measured from the +x axis; the distal links meet at the
// apex solved by circle intersection.
struct FiveBarPalm {
    double proximal_a = 0.04;   // base A -> elbow A
    double distal_a = 0.05;     // elbow A -> apex
    double distal_b = 0.05;     // elbow B -> apex
    double proximal_b = 0.04;   // base B -> elbow B
    double base = 0.06;         // distance between the two base joints
    int actuated_a = 0;         // actuated indices for the two base angles
    int actuated_b = 1;
    bool elbow_up = true;       // apex branch selection
    // Finger mounts expressed in each distal-link frame (origin at the elbow,
    // x toward the apex, z out of the palm plane).
    RigidTransform mount_a;
    RigidTransform mount_b;
};

struct FiveBarSolution {
    double apex_x = 0, apex_y = 0;
    double passive_a = 0;  // absolute angle of distal link A (elbow -> apex)
    double passive_b = 0;
    RigidTransform distal_a_frame;
    RigidTransform distal_b_frame;
    bool near_singular = false;
};

struct FingerChain {
    enum class Mount { Base, DistalA, DistalB };
    Mount mount = Mount::Base;
    RigidTransform mount_offset;  // applied after the mount link frame
    std::vector<JointSpec> joints;
    Vec3 fingertip_offset = Vec3::Zero();
};

struct JointLimits {
    double lo = 0, hi = 0;
};

struct GripperModel {
    std::string name;
    int n_fingers = 0;
    std::vector<JointLimits> actuated_limits;  // one entry per actuated joint
    std::vector<FingerChain> fingers;
    std::optional<FiveBarPalm> palm;

    int n_actuated() const { return static_cast<int>(actuated_limits.size()); }
    bool within_limits(const std::vector<double>& q) const;
    std::vector<double> mid_config() const;
};

// Analytic circle-intersection solve. Throws SingularityError when the
// circles do not intersect; sets near_singular on a tangential intersection.
FiveBarSolution solve_five_bar(const FiveBarPalm& palm, double theta_a, double theta_b);

// Fingertip positions in the gripper base frame. Validates joint limits and
// closed-loop solvability; never clamps silently.
std::vector<Vec3> forward_kinematics(const GripperModel& model, const std::vector<double>& q);

// Parametric stand-ins: jaw2 (parallel jaw, A=1, N=2), tri3 (three-finger
// with spread, A=4, N=3), fivebar3 (five-bar palm + coupled fingers,
// A=3, N=3; an arm-roll joint is appended by the IK environment).
GripperModel make_jaw2();
GripperModel make_tri3();
GripperModel make_fivebar3();
std::vector<GripperModel> builtin_grippers();

// Key-value gripper definition file (see README for the format) or one of
// the builtin names.
GripperModel load_gripper(const std::string& path_or_name);
GripperModel parse_gripper(std::istream& in, const std::string& name);

}  // namespace gk
