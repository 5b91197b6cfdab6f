#include "graspkit/quality.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace gk {

namespace {

Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return s;
}

}  // namespace

Eigen::Matrix<double, 6, Eigen::Dynamic> grasp_matrix(const std::vector<Vec3>& contacts,
                                                      const Vec3& origin, double torque_scale) {
    if (contacts.empty()) throw DomainError("grasp_matrix: need at least one contact");
    if (torque_scale <= 0) throw DomainError("grasp_matrix: torque scale must be positive");
    Eigen::Matrix<double, 6, Eigen::Dynamic> g(6, 3 * contacts.size());
    for (std::size_t i = 0; i < contacts.size(); ++i) {
        g.block<3, 3>(0, 3 * i) = Mat3::Identity();
        g.block<3, 3>(3, 3 * i) = skew((contacts[i] - origin) / torque_scale);
    }
    return g;
}

double gqs_raw(const std::vector<Vec3>& contacts, const Vec3& origin, double eps,
               double torque_scale, double* lambda0_out) {
    const auto g = grasp_matrix(contacts, origin, torque_scale);
    const Eigen::Matrix<double, 6, 6> m =
        g * g.transpose() - eps * Eigen::Matrix<double, 6, 6>::Identity();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> solver(m);
    const double lambda0 = solver.eigenvalues().minCoeff();
    if (lambda0_out) *lambda0_out = lambda0;
    return 2.0 - 2.0 / (1.0 + std::exp(-lambda0));
}

double gqs(const std::vector<Vec3>& contacts, const Vec3& origin, double eps,
           double torque_scale) {
    const double raw = gqs_raw(contacts, origin, eps, torque_scale, nullptr);
    return std::clamp(raw, 0.0, 1.0);
}

bool lp_equality_feasible(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    // Phase-1 simplex: minimize the sum of artificial variables for
    // Ax + s = b (rows flipped so b >= 0), x >= 0, s >= 0. Feasible iff the
    // optimum is ~0. Bland's rule guarantees termination.
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();
    Eigen::MatrixXd tab(m + 1, n + m + 1);
    tab.setZero();
    for (Eigen::Index r = 0; r < m; ++r) {
        const double sign = b(r) < 0 ? -1.0 : 1.0;
        tab.block(r, 0, 1, n) = sign * a.row(r);
        tab(r, n + r) = 1.0;
        tab(r, n + m) = sign * b(r);
    }
    // Objective row: cost 1 on artificials, expressed in the current basis.
    for (Eigen::Index c = 0; c < n; ++c) tab(m, c) = -tab.block(0, c, m, 1).sum();
    tab(m, n + m) = -tab.block(0, n + m, m, 1).sum();

    std::vector<Eigen::Index> basis(m);
    for (Eigen::Index r = 0; r < m; ++r) basis[r] = n + r;

    const double tol = 1e-10;
    const int max_iter = 10000;
    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::Index pivot_col = -1;
        for (Eigen::Index c = 0; c < n + m; ++c) {
            if (tab(m, c) < -tol) {
                pivot_col = c;  // Bland: first improving column
                break;
            }
        }
        if (pivot_col < 0) break;
        Eigen::Index pivot_row = -1;
        double best_ratio = 0;
        for (Eigen::Index r = 0; r < m; ++r) {
            if (tab(r, pivot_col) > tol) {
                const double ratio = tab(r, n + m) / tab(r, pivot_col);
                if (pivot_row < 0 || ratio < best_ratio - tol ||
                    (std::abs(ratio - best_ratio) <= tol && basis[r] < basis[pivot_row])) {
                    pivot_row = r;
                    best_ratio = ratio;
                }
            }
        }
        if (pivot_row < 0) break;  // unbounded improving direction; cannot happen in phase 1
        tab.row(pivot_row) /= tab(pivot_row, pivot_col);
        for (Eigen::Index r = 0; r <= m; ++r) {
            if (r == pivot_row) continue;
            const double factor = tab(r, pivot_col);
            if (factor != 0.0) tab.row(r) -= factor * tab.row(pivot_row);
        }
        basis[pivot_row] = pivot_col;
    }
    return std::abs(tab(m, n + m)) < 1e-8;
}

namespace {

std::vector<Eigen::Matrix<double, 6, 1>> cone_edge_wrenches(const std::vector<Vec3>& contacts,
                                                            const std::vector<Vec3>& normals,
                                                            const FrictionModel& friction,
                                                            const Vec3& origin,
                                                            double torque_scale) {
    std::vector<Eigen::Matrix<double, 6, 1>> wrenches;
    wrenches.reserve(contacts.size() * friction.cone_edges);
    for (std::size_t i = 0; i < contacts.size(); ++i) {
        const double len = normals[i].norm();
        if (len < 1e-9) throw DomainError("force_closure_oracle: degenerate contact normal");
        const Vec3 axis = normals[i] / len;
        Vec3 helper = std::abs(axis.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
        const Vec3 t1 = axis.cross(helper).normalized();
        const Vec3 t2 = axis.cross(t1);
        for (int e = 0; e < friction.cone_edges; ++e) {
            const double phi = 2.0 * M_PI * e / friction.cone_edges;
            const Vec3 f =
                (axis + friction.mu * (std::cos(phi) * t1 + std::sin(phi) * t2)).normalized();
            Eigen::Matrix<double, 6, 1> w;
            w.head<3>() = f;
            w.tail<3>() = ((contacts[i] - origin) / torque_scale).cross(f);
            wrenches.push_back(w);
        }
    }
    return wrenches;
}

}  // namespace

bool force_closure_oracle(const std::vector<Vec3>& contacts, const std::vector<Vec3>& normals,
                          const FrictionModel& friction, const Vec3& origin) {
    if (contacts.size() < 2) throw DomainError("force_closure_oracle: need at least 2 contacts");
    if (contacts.size() != normals.size()) {
        throw DomainError("force_closure_oracle: contact/normal count mismatch");
    }
    if (friction.mu <= 0 || friction.cone_edges < 3) {
        throw DomainError("force_closure_oracle: invalid friction model");
    }
    // Torques are scaled by the contact spread so the LP is well conditioned
    // regardless of object size; force closure is invariant to this scale.
    double spread = 0;
    for (const auto& p : contacts) spread = std::max(spread, (p - origin).norm());
    if (spread < 1e-9) spread = 1.0;

    const auto wrenches = cone_edge_wrenches(contacts, normals, friction, origin, spread);
    Eigen::MatrixXd w(6, static_cast<Eigen::Index>(wrenches.size()));
    for (std::size_t i = 0; i < wrenches.size(); ++i) w.col(static_cast<Eigen::Index>(i)) = wrenches[i];

    // Point-contact wrenches may span a proper subspace of R^6 (two contacts
    // can never produce spin torque about their connecting line), so closure
    // is decided relative to the spanned subspace: the positive span must
    // cover every +/- direction of an orthonormal basis of span(w). A force
    // direction outside the span reduces the basis, never fakes closure.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU);
    const double sigma_max = svd.singularValues()(0);
    if (sigma_max < 1e-12) return false;
    std::vector<Eigen::VectorXd> basis;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()(i) > 1e-9 * sigma_max) basis.push_back(svd.matrixU().col(i));
    }
    // Only torque directions may be excused; every pure force direction must
    // lie inside the span or the grasp cannot resist arbitrary forces.
    Eigen::MatrixXd u(6, static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i) u.col(static_cast<Eigen::Index>(i)) = basis[i];
    for (int d = 0; d < 3; ++d) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(6);
        e(d) = 1.0;
        if ((e - u * (u.transpose() * e)).norm() > 1e-9) return false;
    }
    for (const auto& direction : basis) {
        for (double sign : {1.0, -1.0}) {
            if (!lp_equality_feasible(w, sign * direction)) return false;
        }
    }
    return true;
}

RigidTransform grasp_frame(const std::vector<Vec3>& contacts, const Vec3& outward,
                           double approach_distance, double roll) {
    if (contacts.size() < 2) throw DomainError("grasp_frame: need at least 2 contacts");
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : contacts) centroid += p;
    centroid /= static_cast<double>(contacts.size());

    Vec3 axis;
    if (contacts.size() >= 3) {
        axis = (contacts[1] - contacts[0]).cross(contacts[2] - contacts[0]);
    } else {
        const Vec3 line = (contacts[1] - contacts[0]).normalized();
        axis = outward - outward.dot(line) * line;
    }
    if (axis.norm() < 1e-9) {
        // Collinear contacts or outward parallel to the pair line: any
        // perpendicular works.
        const Vec3 line = (contacts.back() - contacts.front()).normalized();
        axis = std::abs(line.z()) < 0.9 ? line.cross(Vec3::UnitZ()) : line.cross(Vec3::UnitX());
    }
    axis.normalize();
    if (axis.dot(outward) < 0) axis = -axis;  // approach from the free side

    // Frame: origin above the contact plane, z looking back at the contacts.
    const Vec3 z = -axis;
    Vec3 helper = std::abs(z.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    Vec3 x = helper.cross(z).normalized();
    const Vec3 y0 = z.cross(x);
    const Vec3 xr = std::cos(roll) * x + std::sin(roll) * y0;
    const Vec3 yr = z.cross(xr);
    Mat3 r;
    r.col(0) = xr;
    r.col(1) = yr;
    r.col(2) = z;
    return {r, centroid + approach_distance * axis};
}

namespace {

// Proper rigid transform minimizing least-squares distance from `from` to
// `to` (Kabsch); returns the max per-point residual after alignment.
double kabsch_align(const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                    RigidTransform* transform) {
    const int n = static_cast<int>(from.size());
    Vec3 cf = Vec3::Zero(), ct = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
        cf += from[i];
        ct += to[i];
    }
    cf /= n;
    ct /= n;
    Mat3 h = Mat3::Zero();
    for (int i = 0; i < n; ++i) h += (from[i] - cf) * (to[i] - ct).transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
    const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
    const Vec3 t = ct - r * cf;
    double worst = 0;
    for (int i = 0; i < n; ++i) worst = std::max(worst, (r * from[i] + t - to[i]).norm());
    if (transform) *transform = RigidTransform(r, t);
    return worst;
}

// Sorted pairwise distances; rigid-invariant and permutation-invariant.
std::vector<double> pair_signature(const std::vector<Vec3>& points) {
    std::vector<double> sig;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            sig.push_back((points[i] - points[j]).norm());
        }
    }
    std::sort(sig.begin(), sig.end());
    return sig;
}

}  // namespace

bool reachable_contacts(const std::vector<Vec3>& contacts, const WorkspaceMatrix& workspace,
                        double tolerance, std::vector<int>* slot_of_contact,
                        double* best_distance, RigidTransform* gripper_pose,
                        std::int64_t* best_row) {
    const int n = static_cast<int>(contacts.size());
    if (n != workspace.n_fingers) {
        throw DomainError("reachable_contacts: contact count does not match finger count");
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> permutations;
    do {
        permutations.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));

    const std::vector<double> target_sig = pair_signature(contacts);

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_assignment;
    std::int64_t row_at_best = -1;
    RigidTransform pose_at_best;
    std::vector<Vec3> tips(n);
    for (std::int64_t row = 0; row < workspace.rows(); ++row) {
        for (int f = 0; f < n; ++f) tips[f] = workspace.fingertip(row, f);
        // A rigid pose can never fix a pairwise-distance mismatch; skip rows
        // whose signature is already off by more than the achievable bound.
        const std::vector<double> sig = pair_signature(tips);
        double sig_gap = 0;
        for (std::size_t i = 0; i < sig.size(); ++i) {
            sig_gap = std::max(sig_gap, std::abs(sig[i] - target_sig[i]));
        }
        if (sig_gap / 2.0 >= std::min(best, tolerance * 4)) continue;

        for (const auto& p : permutations) {
            std::vector<Vec3> assigned(n);
            for (int i = 0; i < n; ++i) assigned[i] = tips[p[i]];  // finger p[i] -> contact i
            RigidTransform pose;
            const double worst = kabsch_align(assigned, contacts, &pose);
            if (worst < best) {
                best = worst;
                best_assignment = p;
                row_at_best = row;
                pose_at_best = pose;
            }
        }
    }
    if (best_distance) *best_distance = best;
    if (gripper_pose && row_at_best >= 0) *gripper_pose = pose_at_best;
    if (best_row) *best_row = row_at_best;
    if (slot_of_contact && !best_assignment.empty()) *slot_of_contact = best_assignment;
    return best <= tolerance;
}

PssnRecord generate_ground_truth(const PointCloud& cloud, const GripperModel& gripper,
                                 const WorkspaceMatrix& workspace,
                                 const GroundTruthOptions& options) {
    if (!cloud.has_normals()) throw DomainError("generate_ground_truth: cloud needs normals");
    const int n = gripper.n_fingers;
    if (cloud.size() < static_cast<std::size_t>(n)) {
        throw DomainError("generate_ground_truth: cloud smaller than finger count");
    }

    // Cheap pre-filter: a contact set spread wider than the workspace can
    // never be reachable.
    double ws_spread = 0;
    for (std::int64_t r = 0; r < workspace.rows(); ++r) {
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                ws_spread = std::max(
                    ws_spread, (workspace.fingertip(r, i) - workspace.fingertip(r, j)).norm());
            }
        }
    }

    PssnRecord record;
    record.cloud = cloud;
    record.gripper_id = gripper.name;
    record.stage_truth.assign(n, {});

    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(cloud.size()) - 1);
    std::set<std::vector<int>> seen;
    const Vec3 origin = cloud.centroid();

    for (std::int64_t draw = 0;
         draw < options.max_draws && static_cast<int>(record.contact_sets.size()) < options.n_sets;
         ++draw) {
        std::vector<int> idx(n);
        bool distinct = true;
        for (int i = 0; i < n; ++i) {
            idx[i] = pick(rng);
            for (int j = 0; j < i; ++j) distinct &= (idx[i] != idx[j]);
        }
        if (!distinct) continue;
        std::vector<int> sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        if (seen.count(sorted)) continue;

        std::vector<Vec3> contacts(n), inward(n);
        bool spread_ok = true;
        for (int i = 0; i < n; ++i) {
            contacts[i] = cloud.points[idx[i]];
            inward[i] = -cloud.normals[idx[i]];
            for (int j = 0; j < i; ++j) {
                if ((contacts[i] - contacts[j]).norm() > ws_spread + 2 * options.reach_tolerance) {
                    spread_ok = false;
                }
            }
        }
        if (!spread_ok) continue;
        if (!force_closure_oracle(contacts, inward, options.friction, origin)) continue;

        std::vector<int> assignment;
        if (!reachable_contacts(contacts, workspace, options.reach_tolerance, &assignment)) {
            continue;
        }
        seen.insert(sorted);
        // Slot s takes the contact assigned to finger s.
        std::vector<int> slots(n);
        for (int i = 0; i < n; ++i) slots[assignment[i]] = idx[i];
        record.contact_sets.push_back(slots);
        for (int s = 0; s < n; ++s) record.stage_truth[s].push_back(slots[s]);
    }
    return record;
}

}  // namespace gk
