#include "graspkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gk {

TriangleMesh make_box(double sx, double sy, double sz) {
    if (sx <= 0 || sy <= 0 || sz <= 0) throw DomainError("make_box: extents must be positive");
    TriangleMesh mesh;
    const double x = sx / 2, y = sy / 2, z = sz / 2;
    for (int i = 0; i < 8; ++i) {
        mesh.vertices.emplace_back(i & 1 ? x : -x, i & 2 ? y : -y, i & 4 ? z : -z);
    }
    // Two triangles per face, outward winding.
    const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                             {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
    for (const auto& q : quads) {
        mesh.faces.push_back({q[0], q[1], q[2]});
        mesh.faces.push_back({q[0], q[2], q[3]});
    }
    return mesh;
}

TriangleMesh make_cylinder(double radius, double height, int segments) {
    if (radius <= 0 || height <= 0) throw DomainError("make_cylinder: dims must be positive");
    if (segments < 3) throw DomainError("make_cylinder: needs at least 3 segments");
    TriangleMesh mesh;
    const double h = height / 2;
    for (int i = 0; i < segments; ++i) {
        const double a = 2.0 * M_PI * i / segments;
        mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -h);
        mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), h);
    }
    const int bottom_center = static_cast<int>(mesh.vertices.size());
    mesh.vertices.emplace_back(0, 0, -h);
    const int top_center = bottom_center + 1;
    mesh.vertices.emplace_back(0, 0, h);
    for (int i = 0; i < segments; ++i) {
        const int j = (i + 1) % segments;
        const int b0 = 2 * i, t0 = 2 * i + 1, b1 = 2 * j, t1 = 2 * j + 1;
        mesh.faces.push_back({b0, b1, t1});
        mesh.faces.push_back({b0, t1, t0});
        mesh.faces.push_back({bottom_center, b1, b0});
        mesh.faces.push_back({top_center, t0, t1});
    }
    return mesh;
}

TriangleMesh make_sphere(double radius, int subdivisions) {
    if (radius <= 0) throw DomainError("make_sphere: radius must be positive");
    if (subdivisions < 0 || subdivisions > 6) {
        throw DomainError("make_sphere: subdivisions out of range");
    }
    // Icosahedron base.
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                               {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                               {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},   {9, 8, 1}};
    for (auto& v : verts) v.normalize();

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back((verts[a] + verts[b]).normalized());
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    TriangleMesh mesh;
    for (const auto& v : verts) mesh.vertices.push_back(radius * v);
    mesh.faces = std::move(faces);
    return mesh;
}

TriangleMesh make_primitive(const std::string& kind, const std::vector<double>& dims) {
    if (kind == "box") {
        if (dims.size() == 1) return make_box(dims[0], dims[0], dims[0]);
        if (dims.size() == 3) return make_box(dims[0], dims[1], dims[2]);
        throw DomainError("make_primitive: box takes 1 or 3 dims");
    }
    if (kind == "cylinder") {
        if (dims.size() != 2) throw DomainError("make_primitive: cylinder takes radius, height");
        return make_cylinder(dims[0], dims[1]);
    }
    if (kind == "sphere") {
        if (dims.size() != 1) throw DomainError("make_primitive: sphere takes a radius");
        return make_sphere(dims[0]);
    }
    throw DomainError("make_primitive: unknown kind '" + kind + "'");
}

PointCloud hemisphere_cull(const PointCloud& cloud, const Vec3& viewpoint) {
    if (!cloud.has_normals()) throw DomainError("hemisphere_cull: cloud needs normals");
    PointCloud out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.normals[i].dot(viewpoint - cloud.points[i]) > 0) {
            out.points.push_back(cloud.points[i]);
            out.normals.push_back(cloud.normals[i]);
        }
    }
    return out;
}

void PipelineConfig::validate() const {
    if (cloud_points < 8) throw DomainError("config: cloud_points must be at least 8");
    if (workspace_rows < 1) throw DomainError("config: workspace_rows must be positive");
    if (k1 < 1 || k2 < 1 || k3 < 1) throw DomainError("config: k1..k3 must be positive");
    if (k1 > cloud_points || k2 > cloud_points || k3 > cloud_points) {
        throw DomainError("config: k1..k3 may not exceed cloud_points");
    }
    if (contact_tolerance <= 0 || reach_tolerance <= 0 || residual_tolerance <= 0) {
        throw DomainError("config: tolerances must be positive");
    }
    if (friction_mu < 0) throw DomainError("config: friction_mu must be nonnegative");
    if (gqs_eps < 0) throw DomainError("config: gqs_eps must be nonnegative");
    if (approach_distance <= 0) throw DomainError("config: approach_distance must be positive");
    if (encoder_epochs < 1 || pssn_epochs < 1 || ik_epochs < 1) {
        throw DomainError("config: epoch counts must be positive");
    }
    for (double d : object_dims) {
        if (d <= 0) throw DomainError("config: object_dims must be positive");
    }
    if (object_kind == "obj" && object_path.empty()) {
        throw DomainError("config: object_kind=obj requires object_path");
    }
}

namespace {

std::string dims_to_string(const std::vector<double>& dims) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out << ',';
        out << dims[i];
    }
    return out.str();
}

std::vector<double> dims_from_string(const std::string& s) {
    std::vector<double> dims;
    std::istringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ',')) dims.push_back(std::stod(cell));
    return dims;
}

}  // namespace

PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"gripper", [&](const std::string& v) { cfg.gripper = v; }},
        {"object_kind", [&](const std::string& v) { cfg.object_kind = v; }},
        {"object_path", [&](const std::string& v) { cfg.object_path = v; }},
        {"object_dims", [&](const std::string& v) { cfg.object_dims = dims_from_string(v); }},
        {"cloud_points", [&](const std::string& v) { cfg.cloud_points = std::stoll(v); }},
        {"workspace_rows", [&](const std::string& v) { cfg.workspace_rows = std::stoll(v); }},
        {"k1", [&](const std::string& v) { cfg.k1 = std::stoi(v); }},
        {"k2", [&](const std::string& v) { cfg.k2 = std::stoi(v); }},
        {"k3", [&](const std::string& v) { cfg.k3 = std::stoi(v); }},
        {"contact_tolerance", [&](const std::string& v) { cfg.contact_tolerance = std::stod(v); }},
        {"reach_tolerance", [&](const std::string& v) { cfg.reach_tolerance = std::stod(v); }},
        {"residual_tolerance",
         [&](const std::string& v) { cfg.residual_tolerance = std::stod(v); }},
        {"gqs_eps", [&](const std::string& v) { cfg.gqs_eps = std::stod(v); }},
        {"friction_mu", [&](const std::string& v) { cfg.friction_mu = std::stod(v); }},
        {"gqs_threshold", [&](const std::string& v) { cfg.gqs_threshold = std::stod(v); }},
        {"approach_distance",
         [&](const std::string& v) { cfg.approach_distance = std::stod(v); }},
        {"seed", [&](const std::string& v) { cfg.seed = std::stoull(v); }},
        {"encoder_epochs", [&](const std::string& v) { cfg.encoder_epochs = std::stoi(v); }},
        {"pssn_epochs", [&](const std::string& v) { cfg.pssn_epochs = std::stoi(v); }},
        {"ik_epochs", [&](const std::string& v) { cfg.ik_epochs = std::stoi(v); }},
        {"arm_roll", [&](const std::string& v) { cfg.arm_roll = (v == "true" || v == "1"); }},
        {"hemisphere_cull",
         [&](const std::string& v) { cfg.hemisphere_cull = (v == "true" || v == "1"); }},
        {"out_dir", [&](const std::string& v) { cfg.out_dir = v; }},
    };
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw DataError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                            "'");
        }
        try {
            it->second(value);
        } catch (const std::exception&) {
            throw DataError("config line " + std::to_string(line_no) + ": bad value for '" + key +
                            "'");
        }
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config: " + path);
    return parse_config(in);
}

void serialize_config(const PipelineConfig& cfg, std::ostream& out) {
    out.precision(17);
    out << "gripper=" << cfg.gripper << '\n';
    out << "object_kind=" << cfg.object_kind << '\n';
    if (!cfg.object_path.empty()) out << "object_path=" << cfg.object_path << '\n';
    out << "object_dims=" << dims_to_string(cfg.object_dims) << '\n';
    out << "cloud_points=" << cfg.cloud_points << '\n';
    out << "workspace_rows=" << cfg.workspace_rows << '\n';
    out << "k1=" << cfg.k1 << '\n' << "k2=" << cfg.k2 << '\n' << "k3=" << cfg.k3 << '\n';
    out << "contact_tolerance=" << cfg.contact_tolerance << '\n';
    out << "reach_tolerance=" << cfg.reach_tolerance << '\n';
    out << "residual_tolerance=" << cfg.residual_tolerance << '\n';
    out << "gqs_eps=" << cfg.gqs_eps << '\n';
    out << "friction_mu=" << cfg.friction_mu << '\n';
    out << "gqs_threshold=" << cfg.gqs_threshold << '\n';
    out << "approach_distance=" << cfg.approach_distance << '\n';
    out << "seed=" << cfg.seed << '\n';
    out << "encoder_epochs=" << cfg.encoder_epochs << '\n';
    out << "pssn_epochs=" << cfg.pssn_epochs << '\n';
    out << "ik_epochs=" << cfg.ik_epochs << '\n';
    out << "arm_roll=" << (cfg.arm_roll ? "true" : "false") << '\n';
    out << "hemisphere_cull=" << (cfg.hemisphere_cull ? "true" : "false") << '\n';
    out << "out_dir=" << cfg.out_dir << '\n';
}

GraspPlan plan_grasp(const PlannerAssets& assets, const PointCloud& cloud,
                     const PipelineConfig& cfg) {
    GraspPlan plan;
    if (!cloud.has_normals()) throw DomainError("plan_grasp: cloud needs normals");

    const auto sets = select_contacts(assets.pssn, assets.gripper_feature, cloud, cfg.k1, cfg.k2,
                                      cfg.k3);
    if (sets.empty()) {
        plan.failure_reason = "no candidate contact sets";
        return plan;
    }
    const Vec3 origin = cloud.centroid();
    FrictionModel friction;
    friction.mu = cfg.friction_mu;

    for (const auto& set : sets) {
        std::vector<Vec3> inward;
        for (const auto& n : set.normals) inward.push_back(-n);

        if (!force_closure_oracle(set.points, inward, friction, origin)) continue;

        std::vector<int> slots;
        RigidTransform gripper_pose;
        if (!reachable_contacts(set.points, assets.workspace, cfg.reach_tolerance, &slots,
                                nullptr, &gripper_pose)) {
            continue;
        }

        plan.planned = true;
        plan.contacts = set;
        plan.oracle = true;
        plan.gqs_value = gqs(set.points, origin, cfg.gqs_eps);
        plan.contacts.gqs = plan.gqs_value;

        // Targets in the gripper base frame, one per assigned finger slot.
        const std::vector<Vec3> local = to_ee_frame(gripper_pose.inverse(), set.points);
        std::vector<Vec3> targets(set.points.size());
        for (std::size_t i = 0; i < set.points.size(); ++i) {
            targets[static_cast<std::size_t>(slots[i])] = local[i];
        }

        IkEnv env(assets.gripper, cfg.arm_roll, cfg.approach_distance);
        rollout_error(assets.agent, env, targets, &plan.policy_config);

        // Refine with stochastic rollouts: sample the policy a few times and
        // keep whichever visited configuration has the smallest worst-finger
        // error. Seeded from the pipeline config, so planning is deterministic.
        {
            std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
            std::vector<Vec3> cand_tips = forward_kinematics(
                assets.gripper,
                {plan.policy_config.begin(),
                 plan.policy_config.begin() + assets.gripper.n_actuated()});
            if (cfg.arm_roll) {
                const RigidTransform rot = RigidTransform::rotate_axis_angle(
                    Vec3::UnitZ(), plan.policy_config.back());
                for (auto& p : cand_tips) p = rot.apply(p);
            }
            double best_max = 0;
            for (std::size_t f = 0; f < targets.size(); ++f) {
                best_max = std::max(best_max, (cand_tips[f] - targets[f]).norm());
            }
            constexpr int kStochasticRollouts = 16;
            for (int r = 0; r < kStochasticRollouts; ++r) {
                env.reset(targets);
                Vec obs = env.observation();
                Vec prev = Vec::Zero(assets.agent.act_dim());
                for (int t = 0; t < env.max_steps(); ++t) {
                    const Vec action = assets.agent.act(obs, prev, rng, false);
                    const IkEnv::Step step = env.step(action);
                    if (step.max_finger_error < best_max) {
                        // Singular five-bar actions keep the previous fingertips,
                        // so verify the candidate config actually solves before
                        // recording it.
                        try {
                            const std::vector<double> cand = env.denormalize(action);
                            forward_kinematics(assets.gripper,
                                               {cand.begin(),
                                                cand.begin() + assets.gripper.n_actuated()});
                            best_max = step.max_finger_error;
                            plan.policy_config = cand;
                        } catch (const SingularityError&) {
                        }
                    }
                    obs = step.observation;
                    prev = action;
                    if (step.done) break;
                }
            }
        }

        const int a = assets.gripper.n_actuated();
        std::vector<Vec3> tips = forward_kinematics(
            assets.gripper, {plan.policy_config.begin(), plan.policy_config.begin() + a});
        if (cfg.arm_roll) {
            const RigidTransform rot =
                RigidTransform::rotate_axis_angle(Vec3::UnitZ(), plan.policy_config.back());
            for (auto& p : tips) p = rot.apply(p);
        }
        plan.residuals.clear();
        plan.max_residual = 0;
        for (std::size_t f = 0; f < targets.size(); ++f) {
            const double e = (tips[f] - targets[f]).norm();
            plan.residuals.push_back(e);
            plan.max_residual = std::max(plan.max_residual, e);
        }

        const IkOracleResult oracle_ik =
            ik_oracle(assets.gripper, cfg.arm_roll, targets, 16, cfg.seed);
        plan.oracle_config = oracle_ik.config;
        plan.oracle_residual = oracle_ik.residual;

        plan.success = plan.oracle && plan.max_residual < cfg.residual_tolerance;
        return plan;
    }
    plan.failure_reason = "no contact set passed force closure and reachability";
    return plan;
}

TrialReport run_trials(const PlannerAssets& assets,
                       const std::vector<std::pair<std::string, TriangleMesh>>& objects,
                       const PipelineConfig& cfg, int trials_per_object) {
    TrialReport report;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> offset(-0.05, 0.05);

    int successes = 0;
    double gqs_sum = 0;
    for (const auto& [name, mesh] : objects) {
        for (int t = 0; t < trials_per_object; ++t) {
            // Random rotation (uniform axis, uniform angle) + bounded offset.
            Vec3 axis(unit(rng), unit(rng), unit(rng));
            if (axis.norm() < 1e-6) axis = Vec3::UnitZ();
            axis.normalize();
            const RigidTransform pose =
                RigidTransform::rotate_axis_angle(axis, angle(rng)) *
                RigidTransform::translate(Vec3(offset(rng), offset(rng), offset(rng)));

            PointCloud cloud = sample_surface(mesh, static_cast<std::size_t>(cfg.cloud_points),
                                              rng());
            cloud = transform_points(pose, cloud);
            if (cfg.hemisphere_cull) cloud = hemisphere_cull(cloud, Vec3(0, 0, 1.0));

            const GraspPlan plan = plan_grasp(assets, cloud, cfg);
            TrialRow row;
            row.object = name;
            row.trial = t;
            row.gqs_value = plan.gqs_value;
            row.oracle = plan.oracle;
            row.residual_max = plan.max_residual;
            row.success = plan.success;
            if (row.success) ++successes;
            gqs_sum += row.gqs_value;
            report.rows.push_back(std::move(row));
        }
    }
    if (!report.rows.empty()) {
        report.success_rate = 100.0 * successes / static_cast<double>(report.rows.size());
        report.mean_gqs = gqs_sum / static_cast<double>(report.rows.size());
    }
    return report;
}

void write_trial_csv(const TrialReport& report, std::ostream& out) {
    out.precision(12);
    out << "object,trial,gqs,oracle,residual_max_m,success\n";
    for (const auto& row : report.rows) {
        out << row.object << ',' << row.trial << ',' << row.gqs_value << ','
            << (row.oracle ? 1 : 0) << ',' << row.residual_max << ',' << (row.success ? 1 : 0)
            << '\n';
    }
    out << "summary," << report.rows.size() << ',' << report.mean_gqs << ",,,"
        << report.success_rate << '\n';
}

FootprintReport footprint_report(std::int64_t workspace_rows, int n_fingers, int modes,
                                 std::int64_t points_per_mode) {
    FootprintReport report;
    report.workspace_bytes =
        static_cast<double>(workspace_rows) * 3.0 * n_fingers * sizeof(double);
    report.multimode_bytes =
        static_cast<double>(modes) * static_cast<double>(points_per_mode) * 3.0 * sizeof(double);
    if (report.multimode_bytes > 0) {
        report.reduction_percent =
            100.0 * (report.multimode_bytes - report.workspace_bytes) / report.multimode_bytes;
    }
    report.reference_reduction_percent = 100.0 * (4777.0 - 873.0) / 4777.0;
    return report;
}

void save_encoder(const Net& encoder, const Net& decoder, const std::string& path) {
    Checkpoint ckpt;
    ckpt.nets["encoder"] = encoder;
    if (!decoder.empty()) ckpt.nets["decoder"] = decoder;
    ckpt.save(path);
}

void load_encoder(const std::string& path, Net* encoder, Net* decoder) {
    const Checkpoint ckpt = Checkpoint::load(path);
    if (encoder) *encoder = ckpt.nets.at("encoder");
    if (decoder && ckpt.nets.count("decoder")) *decoder = ckpt.nets.at("decoder");
}

void save_pssn(const PssnModel& model, const std::string& path) {
    Checkpoint ckpt;
    ckpt.nets["object_local"] = model.object_net.local_mlp;
    ckpt.nets["object_global"] = model.object_net.global_mlp;
    ckpt.nets["fusion"] = model.fusion;
    for (std::size_t s = 0; s < model.stages.size(); ++s) {
        ckpt.nets["stage" + std::to_string(s)] = model.stages[s];
    }
    ckpt.scalars["n_contacts"] = model.n_contacts;
    ckpt.scalars["group_size"] = model.object_net.group_size;
    ckpt.save(path);
}

PssnModel load_pssn(const std::string& path) {
    const Checkpoint ckpt = Checkpoint::load(path);
    PssnModel model;
    model.n_contacts = static_cast<int>(ckpt.scalars.at("n_contacts"));
    model.object_net.group_size = static_cast<int>(ckpt.scalars.at("group_size"));
    model.object_net.local_mlp = ckpt.nets.at("object_local");
    model.object_net.global_mlp = ckpt.nets.at("object_global");
    model.fusion = ckpt.nets.at("fusion");
    for (int s = 0; s < model.n_contacts; ++s) {
        model.stages.push_back(ckpt.nets.at("stage" + std::to_string(s)));
    }
    return model;
}

}  // namespace gk
