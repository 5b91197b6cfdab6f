#include "graspkit/gripper.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <istream>
#include <random>
#include <set>
#include <sstream>

namespace gk {

namespace {

constexpr double kClosureTol = 1e-9;
constexpr double kSingularTol = 1e-9;

RigidTransform joint_motion(const JointSpec& joint, double value) {
    if (joint.kind == JointSpec::Kind::Prismatic) {
        return RigidTransform::translate(joint.axis * value);
    }
    return RigidTransform::rotate_axis_angle(joint.axis, value);
}

RigidTransform frame_from_direction(const Vec3& origin, const Vec3& x_dir) {
    const Vec3 x = x_dir.normalized();
    const Vec3 z = Vec3::UnitZ();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return {r, origin};
}

}  // namespace

bool GripperModel::within_limits(const std::vector<double>& q) const {
    if (q.size() != actuated_limits.size()) return false;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] < actuated_limits[i].lo || q[i] > actuated_limits[i].hi) return false;
    }
    return true;
}

std::vector<double> GripperModel::mid_config() const {
    std::vector<double> q(actuated_limits.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        q[i] = 0.5 * (actuated_limits[i].lo + actuated_limits[i].hi);
    }
    return q;
}

FiveBarSolution solve_five_bar(const FiveBarPalm& palm, double theta_a, double theta_b) {
    const Eigen::Vector2d base_a(-palm.base / 2, 0), base_b(palm.base / 2, 0);
    const Eigen::Vector2d elbow_a =
        base_a + palm.proximal_a * Eigen::Vector2d(std::cos(theta_a), std::sin(theta_a));
    const Eigen::Vector2d elbow_b =
        base_b + palm.proximal_b * Eigen::Vector2d(std::cos(theta_b), std::sin(theta_b));

    const Eigen::Vector2d delta = elbow_b - elbow_a;
    const double d = delta.norm();
    const double r1 = palm.distal_a, r2 = palm.distal_b;
    if (d < 1e-12) throw SingularityError("five-bar: coincident elbows");

    const double gap_outer = d - (r1 + r2);
    const double gap_inner = std::abs(r1 - r2) - d;
    if (gap_outer > kSingularTol || gap_inner > kSingularTol) {
        throw SingularityError("five-bar: distal circles do not intersect");
    }

    FiveBarSolution sol;
    // a = distance from elbow A to the chord; h = half-chord height.
    const double a = (d * d + r1 * r1 - r2 * r2) / (2 * d);
    const double h2 = r1 * r1 - a * a;
    double h = 0;
    if (h2 <= kSingularTol * (r1 + r2)) {
        sol.near_singular = true;  // tangential: single solution
    } else {
        h = std::sqrt(std::max(0.0, h2));
    }
    const Eigen::Vector2d u = delta / d;
    const Eigen::Vector2d perp(-u.y(), u.x());
    const Eigen::Vector2d apex =
        elbow_a + a * u + (palm.elbow_up ? h : -h) * perp;

    sol.apex_x = apex.x();
    sol.apex_y = apex.y();
    sol.passive_a = std::atan2(apex.y() - elbow_a.y(), apex.x() - elbow_a.x());
    sol.passive_b = std::atan2(apex.y() - elbow_b.y(), apex.x() - elbow_b.x());

    const double res_a = std::abs((apex - elbow_a).norm() - r1);
    const double res_b = std::abs((apex - elbow_b).norm() - r2);
    if (std::max(res_a, res_b) > kClosureTol) {
        throw NumericError("five-bar: closure residual above tolerance");
    }

    const Vec3 ea(elbow_a.x(), elbow_a.y(), 0);
    const Vec3 eb(elbow_b.x(), elbow_b.y(), 0);
    const Vec3 ap(apex.x(), apex.y(), 0);
    sol.distal_a_frame = frame_from_direction(ea, ap - ea);
    sol.distal_b_frame = frame_from_direction(eb, ap - eb);
    return sol;
}

std::vector<Vec3> forward_kinematics(const GripperModel& model, const std::vector<double>& q) {
    if (static_cast<int>(q.size()) != model.n_actuated()) {
        throw DomainError("forward_kinematics: config dimension mismatch");
    }
    if (!model.within_limits(q)) {
        throw DomainError("forward_kinematics: joint value out of limits");
    }

    std::optional<FiveBarSolution> palm_sol;
    if (model.palm) {
        palm_sol = solve_five_bar(*model.palm, q[model.palm->actuated_a], q[model.palm->actuated_b]);
    }

    std::vector<Vec3> tips;
    tips.reserve(model.fingers.size());
    for (const auto& finger : model.fingers) {
        RigidTransform frame;
        switch (finger.mount) {
            case FingerChain::Mount::Base:
                frame = finger.mount_offset;
                break;
            case FingerChain::Mount::DistalA:
                frame = palm_sol->distal_a_frame * model.palm->mount_a * finger.mount_offset;
                break;
            case FingerChain::Mount::DistalB:
                frame = palm_sol->distal_b_frame * model.palm->mount_b * finger.mount_offset;
                break;
        }
        for (const auto& joint : finger.joints) {
            const double value = joint.coupling * q[joint.actuated_index];
            frame = frame * joint.origin * joint_motion(joint, value);
        }
        tips.push_back(frame.apply(finger.fingertip_offset));
    }
    return tips;
}

namespace {

void validate_model(const GripperModel& model) {
    if (model.n_fingers < 2) throw DataError("gripper: need at least 2 fingers");
    if (model.n_actuated() < 1) throw DataError("gripper: need at least 1 actuated joint");
    if (static_cast<int>(model.fingers.size()) != model.n_fingers) {
        throw DataError("gripper: finger count mismatch");
    }
    std::set<int> referenced;
    for (const auto& finger : model.fingers) {
        for (const auto& joint : finger.joints) {
            if (joint.actuated_index < 0 || joint.actuated_index >= model.n_actuated()) {
                throw DataError("gripper: joint references unknown actuated index");
            }
            if (std::abs(joint.axis.norm() - 1.0) > 1e-9) {
                throw DataError("gripper: joint axis not unit length");
            }
            referenced.insert(joint.actuated_index);
        }
    }
    if (model.palm) {
        const auto& p = *model.palm;
        for (double len : {p.proximal_a, p.distal_a, p.distal_b, p.proximal_b, p.base}) {
            if (len <= 0) throw DataError("gripper: non-positive palm link length");
        }
        if (p.actuated_a < 0 || p.actuated_a >= model.n_actuated() ||
            p.actuated_b < 0 || p.actuated_b >= model.n_actuated()) {
            throw DataError("gripper: palm references unknown actuated index");
        }
        referenced.insert(p.actuated_a);
        referenced.insert(p.actuated_b);
        // Loop closure must be solvable somewhere in the limit box.
        std::mt19937_64 rng(12345);
        int solvable = 0;
        for (int i = 0; i < 200; ++i) {
            std::uniform_real_distribution<double> da(model.actuated_limits[p.actuated_a].lo,
                                                      model.actuated_limits[p.actuated_a].hi);
            std::uniform_real_distribution<double> db(model.actuated_limits[p.actuated_b].lo,
                                                      model.actuated_limits[p.actuated_b].hi);
            try {
                solve_five_bar(p, da(rng), db(rng));
                ++solvable;
            } catch (const SingularityError&) {
            }
        }
        if (solvable == 0) throw DataError("gripper: five-bar palm unsolvable over its limits");
    }
    for (int i = 0; i < model.n_actuated(); ++i) {
        if (model.actuated_limits[i].lo >= model.actuated_limits[i].hi) {
            throw DataError("gripper: joint limit lo >= hi");
        }
        if (!referenced.count(i)) {
            throw DataError("gripper: actuated joint " + std::to_string(i) + " unused");
        }
    }
}

}  // namespace

GripperModel make_jaw2() {
    GripperModel m;
    m.name = "jaw2";
    m.n_fingers = 2;
    m.actuated_limits = {{0.0, 0.04}};
    const double half_gap0 = 0.01;  // closed-jaw separation 0.02 m
    const double tip_height = 0.06;
    for (int side : {+1, -1}) {
        FingerChain f;
        f.mount = FingerChain::Mount::Base;
        JointSpec j;
        j.kind = JointSpec::Kind::Prismatic;
        j.axis = Vec3::UnitX();
        j.actuated_index = 0;
        j.coupling = side;  // jaws move symmetrically apart
        f.joints.push_back(j);
        f.fingertip_offset = Vec3(side * half_gap0, 0, tip_height);
        m.fingers.push_back(f);
    }
    validate_model(m);
    return m;
}

GripperModel make_tri3() {
    GripperModel m;
    m.name = "tri3";
    m.n_fingers = 3;
    // 0: spread, 1-3: per-finger flexion
    m.actuated_limits = {{0.0, 1.4}, {0.1, 1.6}, {0.1, 1.6}, {0.1, 1.6}};
    const double mount_radius = 0.04;
    const double finger_len = 0.09;
    for (int i = 0; i < 3; ++i) {
        FingerChain f;
        f.mount = FingerChain::Mount::Base;
        if (i == 2) {
            f.mount_offset = RigidTransform::rotate_axis_angle(Vec3::UnitZ(), M_PI);
        } else {
            // Spread rotates the two front fingers in opposite directions.
            JointSpec spread;
            spread.kind = JointSpec::Kind::Revolute;
            spread.axis = Vec3::UnitZ();
            spread.actuated_index = 0;
            spread.coupling = (i == 0) ? 1.0 : -1.0;
            f.joints.push_back(spread);
        }
        JointSpec flex;
        flex.kind = JointSpec::Kind::Revolute;
        flex.axis = -Vec3::UnitY();  // bends the fingertip toward the palm center
        flex.origin = RigidTransform::translate(Vec3(mount_radius, 0, 0));
        flex.actuated_index = 1 + i;
        f.joints.push_back(flex);
        f.fingertip_offset = Vec3(0, 0, finger_len);
        m.fingers.push_back(f);
    }
    validate_model(m);
    return m;
}

GripperModel make_fivebar3() {
    GripperModel m;
    m.name = "fivebar3";
    m.n_fingers = 3;
    // 0,1: palm base angles; 2: shared finger flexion motor (1:1:1 coupling)
    m.actuated_limits = {{M_PI / 3, 2 * M_PI / 3}, {M_PI / 3, 2 * M_PI / 3}, {0.0, 1.5}};
    FiveBarPalm palm;
    palm.proximal_a = 0.04;
    palm.distal_a = 0.05;
    palm.distal_b = 0.05;
    palm.proximal_b = 0.04;
    palm.base = 0.06;
    palm.actuated_a = 0;
    palm.actuated_b = 1;
    palm.mount_a = RigidTransform::translate(Vec3(0.03, 0, 0));  // mid distal link
    palm.mount_b = RigidTransform::translate(Vec3(0.03, 0, 0));
    m.palm = palm;

    const double finger_len = 0.1;
    auto coupled_finger = [&](FingerChain::Mount mount, const RigidTransform& offset,
                              const Vec3& flex_axis) {
        FingerChain f;
        f.mount = mount;
        f.mount_offset = offset;
        JointSpec flex;
        flex.kind = JointSpec::Kind::Revolute;
        flex.axis = flex_axis;
        flex.actuated_index = 2;
        flex.coupling = 1.0;
        f.joints.push_back(flex);
        f.fingertip_offset = Vec3(0, 0, finger_len);
        return f;
    };
    m.fingers.push_back(coupled_finger(FingerChain::Mount::DistalA, RigidTransform(), -Vec3::UnitX()));
    m.fingers.push_back(coupled_finger(FingerChain::Mount::DistalB, RigidTransform(), -Vec3::UnitX()));
    m.fingers.push_back(coupled_finger(FingerChain::Mount::Base,
                                       RigidTransform::translate(Vec3(0, -0.05, 0)),
                                       -Vec3::UnitX()));
    validate_model(m);
    return m;
}

std::vector<GripperModel> builtin_grippers() {
    return {make_jaw2(), make_tri3(), make_fivebar3()};
}

namespace {

FingerChain::Mount parse_mount(const std::string& word, int line_no) {
    if (word == "base") return FingerChain::Mount::Base;
    if (word == "distal_a") return FingerChain::Mount::DistalA;
    if (word == "distal_b") return FingerChain::Mount::DistalB;
    throw DataError("gripper file line " + std::to_string(line_no) + ": unknown mount '" + word + "'");
}

}  // namespace

GripperModel parse_gripper(std::istream& in, const std::string& name) {
    GripperModel m;
    m.name = name;
    std::string line;
    int line_no = 0;
    FingerChain* current = nullptr;
    auto fail = [&](const std::string& why) -> void {
        throw DataError("gripper file line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "gripper") {
            ls >> m.name;
        } else if (key == "fingers") {
            if (!(ls >> m.n_fingers)) fail("expected finger count");
        } else if (key == "actuated") {
            int a = 0;
            if (!(ls >> a) || a < 1) fail("expected actuated joint count");
            m.actuated_limits.assign(a, {0.0, 1.0});
        } else if (key == "limit") {
            int i = 0;
            double lo = 0, hi = 0;
            if (!(ls >> i >> lo >> hi)) fail("expected: limit <index> <lo> <hi>");
            if (i < 0 || i >= m.n_actuated()) fail("limit index out of range");
            m.actuated_limits[i] = {lo, hi};
        } else if (key == "palm") {
            FiveBarPalm p;
            if (!(ls >> p.proximal_a >> p.distal_a >> p.distal_b >> p.proximal_b >> p.base >>
                  p.actuated_a >> p.actuated_b)) {
                fail("expected: palm <pa> <da> <db> <pb> <base> <act_a> <act_b>");
            }
            m.palm = p;
        } else if (key == "palm_mount_a" || key == "palm_mount_b") {
            if (!m.palm) fail("palm_mount before palm");
            Vec3 t;
            if (!(ls >> t.x() >> t.y() >> t.z())) fail("expected mount translation");
            (key == "palm_mount_a" ? m.palm->mount_a : m.palm->mount_b) =
                RigidTransform::translate(t);
        } else if (key == "finger") {
            std::string mount;
            Vec3 t;
            if (!(ls >> mount >> t.x() >> t.y() >> t.z())) {
                fail("expected: finger <mount> <tx> <ty> <tz>");
            }
            FingerChain f;
            f.mount = parse_mount(mount, line_no);
            f.mount_offset = RigidTransform::translate(t);
            m.fingers.push_back(f);
            current = &m.fingers.back();
        } else if (key == "joint") {
            if (!current) fail("joint before finger");
            std::string kind;
            JointSpec j;
            Vec3 origin;
            if (!(ls >> kind >> j.axis.x() >> j.axis.y() >> j.axis.z() >> origin.x() >>
                  origin.y() >> origin.z() >> j.actuated_index >> j.coupling)) {
                fail("expected: joint <kind> <axis xyz> <origin xyz> <act> <coupling>");
            }
            if (kind == "revolute") {
                j.kind = JointSpec::Kind::Revolute;
            } else if (kind == "prismatic") {
                j.kind = JointSpec::Kind::Prismatic;
            } else {
                fail("unknown joint kind '" + kind + "'");
            }
            const double n = j.axis.norm();
            if (n < 1e-12) fail("zero joint axis");
            j.axis /= n;
            j.origin = RigidTransform::translate(origin);
            current->joints.push_back(j);
        } else if (key == "tip") {
            if (!current) fail("tip before finger");
            if (!(ls >> current->fingertip_offset.x() >> current->fingertip_offset.y() >>
                  current->fingertip_offset.z())) {
                fail("expected: tip <x> <y> <z>");
            }
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    validate_model(m);
    return m;
}

GripperModel load_gripper(const std::string& path_or_name) {
    if (path_or_name == "jaw2") return make_jaw2();
    if (path_or_name == "tri3") return make_tri3();
    if (path_or_name == "fivebar3") return make_fivebar3();
    std::ifstream in(path_or_name);
    if (!in) throw UsageError("unknown gripper or missing file: " + path_or_name);
    return parse_gripper(in, path_or_name);
}

}  // namespace gk
