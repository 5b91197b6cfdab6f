// Command-line surface: object generation, workspace sampling, training,
// evaluation, grasp planning, and reports. One subcommand per operation.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "graspkit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gk;

namespace {

PipelineConfig config_or_default(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    return load_config(path);
}

std::ofstream open_out(const std::string& path) {
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) {
        fs::create_directories(dir);
    }
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open for write: " + path);
    return out;
}

Eigen::RowVectorXd feature_for(const Net& encoder, const GripperModel& gripper,
                               std::int64_t rows, std::uint64_t seed) {
    const WorkspaceMatrix ws = sample_workspace(gripper, rows, seed);
    return extract_gripper_feature(encoder, ws);
}

std::vector<std::pair<std::string, TriangleMesh>> trial_objects() {
    return {
        {"box_small", make_box(0.03, 0.03, 0.03)},
        {"box_flat", make_box(0.05, 0.04, 0.02)},
        {"box_tall", make_box(0.025, 0.025, 0.06)},
        {"cylinder_small", make_cylinder(0.015, 0.05)},
        {"cylinder_wide", make_cylinder(0.025, 0.03)},
        {"sphere_small", make_sphere(0.02)},
        {"sphere_mid", make_sphere(0.028)},
        {"sphere_large", make_sphere(0.035)},
    };
}

PlannerAssets load_assets(const PipelineConfig& cfg, const std::string& encoder_path,
                          const std::string& pssn_path, const std::string& ik_path) {
    GripperModel gripper = load_gripper(cfg.gripper);
    WorkspaceMatrix ws = sample_workspace(gripper, cfg.workspace_rows, cfg.seed);
    Net encoder;
    load_encoder(encoder_path, &encoder, nullptr);
    Eigen::RowVectorXd feature = extract_gripper_feature(encoder, ws);
    return PlannerAssets{std::move(gripper), std::move(ws),       std::move(encoder),
                         std::move(feature), load_pssn(pssn_path), SacAgent::load(ik_path)};
}

int run(int argc, char** argv) {
    CLI::App app{"Gripper workspace features, contact selection, grasp quality, and RL-based "
                 "fingertip IK"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "pipeline config file (key=value)");
    app.add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--out", out_path, "output path");

    auto cfg_with_overrides = [&]() {
        PipelineConfig cfg = config_or_default(config_path);
        if (seed_set) cfg.seed = seed;
        return cfg;
    };

    // gen-object
    auto* gen_object = app.add_subcommand("gen-object", "write a primitive mesh as OBJ");
    std::string kind = "sphere";
    std::vector<double> dims;
    gen_object->add_option("--kind", kind, "box | cylinder | sphere");
    gen_object->add_option("--dims", dims, "dimensions in meters");
    gen_object->callback([&] {
        if (out_path.empty()) throw UsageError("gen-object: --out is required");
        if (dims.empty()) dims = {0.05};
        const TriangleMesh mesh = make_primitive(kind, dims);
        auto out = open_out(out_path);
        write_obj(mesh, out);
        std::cout << "wrote " << out_path << " (" << mesh.vertices.size() << " vertices, "
                  << mesh.faces.size() << " faces)\n";
    });

    // sample-workspace
    auto* sample_ws = app.add_subcommand("sample-workspace", "sample a fingertip workspace");
    std::string gripper_name;
    std::int64_t rows = 0;
    std::string strategy = "uniform";
    sample_ws->add_option("--gripper", gripper_name, "builtin name or definition file");
    sample_ws->add_option("--rows", rows, "number of samples L");
    sample_ws->add_option("--strategy", strategy, "uniform | grid");
    sample_ws->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        const GripperModel gripper = load_gripper(gripper_name.empty() ? cfg.gripper : gripper_name);
        const std::int64_t l = rows > 0 ? rows : cfg.workspace_rows;
        if (out_path.empty()) throw UsageError("sample-workspace: --out is required");
        const auto strat = strategy == "grid" ? SampleStrategy::Grid : SampleStrategy::UniformJoint;
        const WorkspaceMatrix ws = sample_workspace(gripper, l, cfg.seed, strat);
        if (const auto dir = fs::path(out_path).parent_path(); !dir.empty()) {
            fs::create_directories(dir);
        }
        save_workspace(ws, out_path);
        std::cout << "wrote " << out_path << " (" << ws.rows() << " x " << 3 * ws.n_fingers
                  << ")\n";
    });

    // train-encoder
    auto* train_enc = app.add_subcommand("train-encoder", "train the workspace autoencoder");
    std::vector<std::string> enc_grippers;
    int epochs = 0;
    std::string curve_path;
    train_enc->add_option("--gripper", enc_grippers, "grippers to train jointly (equal N)");
    train_enc->add_option("--epochs", epochs, "training epochs");
    train_enc->add_option("--curve", curve_path, "loss-curve CSV path");
    train_enc->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        if (out_path.empty()) throw UsageError("train-encoder: --out is required");
        if (enc_grippers.empty()) enc_grippers = {cfg.gripper};
        std::vector<GripperModel> models;
        for (const auto& g : enc_grippers) models.push_back(load_gripper(g));
        AutoencoderOptions opt;
        opt.workspace_rows = cfg.workspace_rows;
        opt.epochs = epochs > 0 ? epochs : cfg.encoder_epochs;
        opt.seed = cfg.seed;
        const AutoencoderResult result = train_autoencoder(models, opt);
        if (const auto dir = fs::path(out_path).parent_path(); !dir.empty()) {
            fs::create_directories(dir);
        }
        save_encoder(result.encoder, result.decoder, out_path);
        if (!curve_path.empty()) {
            auto out = open_out(curve_path);
            out << "epoch,loss\n";
            for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
                out << e + 1 << ',' << result.loss_curve[e] << '\n';
            }
        }
        std::cout << "final loss " << result.loss_curve.back() << ", wrote " << out_path << '\n';
    });

    // gen-dataset
    auto* gen_data = app.add_subcommand("gen-dataset", "build a labeled contact dataset");
    int poses = 4, sets = 8;
    std::string cloud_dir;
    gen_data->add_option("--poses", poses, "poses per primitive");
    gen_data->add_option("--sets", sets, "ground-truth sets per cloud");
    gen_data->add_option("--cloud-dir", cloud_dir, "directory for cloud CSVs");
    gen_data->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        if (out_path.empty()) throw UsageError("gen-dataset: --out is required");
        if (cloud_dir.empty()) cloud_dir = (fs::path(out_path).parent_path() / "clouds").string();
        const GripperModel gripper = load_gripper(cfg.gripper);
        const WorkspaceMatrix ws = sample_workspace(gripper, cfg.workspace_rows, cfg.seed);
        const std::vector<std::pair<std::string, TriangleMesh>> prims = {
            {"box", make_box(0.03, 0.03, 0.03)},
            {"cylinder", make_cylinder(0.02, 0.05)},
            {"sphere", make_sphere(0.025)},
            {"slab", make_box(0.05, 0.04, 0.02)},
        };
        std::mt19937_64 rng(cfg.seed);
        PssnDataset dataset;
        for (const auto& [name, mesh] : prims) {
            for (int p = 0; p < poses; ++p) {
                std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
                std::uniform_real_distribution<double> unit(-1.0, 1.0);
                Vec3 axis(unit(rng), unit(rng), unit(rng));
                if (axis.norm() < 1e-6) axis = Vec3::UnitZ();
                const RigidTransform pose =
                    RigidTransform::rotate_axis_angle(axis.normalized(), angle(rng));
                PointCloud cloud = transform_points(
                    pose, sample_surface(mesh, static_cast<std::size_t>(cfg.cloud_points), rng()));
                GroundTruthOptions gt;
                gt.n_sets = sets;
                gt.seed = rng();
                gt.friction.mu = cfg.friction_mu;
                gt.reach_tolerance = cfg.reach_tolerance;
                PssnRecord rec = generate_ground_truth(cloud, gripper, ws, gt);
                if (rec.contact_sets.empty()) continue;  // unreachable pose, skip
                dataset.records.push_back(std::move(rec));
            }
        }
        if (const auto dir = fs::path(out_path).parent_path(); !dir.empty()) {
            fs::create_directories(dir);
        }
        save_dataset(dataset, out_path, cloud_dir);
        std::cout << "wrote " << dataset.records.size() << " records to " << out_path << '\n';
    });

    // train-pssn
    auto* train_pssn_cmd = app.add_subcommand("train-pssn", "train the contact selector");
    std::string dataset_path, encoder_path;
    train_pssn_cmd->add_option("--dataset", dataset_path, "dataset index file")->required();
    train_pssn_cmd->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    train_pssn_cmd->add_option("--epochs", epochs, "epochs per stage");
    train_pssn_cmd->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        if (out_path.empty()) throw UsageError("train-pssn: --out is required");
        const GripperModel gripper = load_gripper(cfg.gripper);
        Net encoder;
        load_encoder(encoder_path, &encoder, nullptr);
        const PssnDataset dataset = load_dataset(dataset_path);
        std::map<std::string, Eigen::RowVectorXd> features;
        for (const auto& rec : dataset.records) {
            if (!features.count(rec.gripper_id)) {
                features[rec.gripper_id] =
                    feature_for(encoder, load_gripper(rec.gripper_id), cfg.workspace_rows,
                                cfg.seed);
            }
        }
        PssnModel model = make_pssn_model(gripper.n_fingers, cfg.seed);
        PssnTrainOptions opt;
        opt.epochs_per_stage = epochs > 0 ? epochs : cfg.pssn_epochs;
        opt.seed = cfg.seed;
        opt.label_tolerance = cfg.contact_tolerance;
        const PssnTrainResult result = train_pssn(model, features, dataset, opt);
        if (const auto dir = fs::path(out_path).parent_path(); !dir.empty()) {
            fs::create_directories(dir);
        }
        save_pssn(model, out_path);
        for (std::size_t s = 0; s < result.stage_accuracy.size(); ++s) {
            std::cout << "stage " << s + 1 << " final train Top1 "
                      << result.stage_accuracy[s].back() << "%\n";
        }
        std::cout << "wrote " << out_path << '\n';
    });

    // eval-pssn
    auto* eval_pssn_cmd = app.add_subcommand("eval-pssn", "Top1/Top10 contact accuracy");
    std::string model_path;
    eval_pssn_cmd->add_option("--dataset", dataset_path, "dataset index file")->required();
    eval_pssn_cmd->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    eval_pssn_cmd->add_option("--model", model_path, "selector checkpoint")->required();
    eval_pssn_cmd->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        Net encoder;
        load_encoder(encoder_path, &encoder, nullptr);
        const PssnModel model = load_pssn(model_path);
        const PssnDataset dataset = load_dataset(dataset_path);
        std::map<std::string, Eigen::RowVectorXd> features;
        for (const auto& rec : dataset.records) {
            if (!features.count(rec.gripper_id)) {
                features[rec.gripper_id] =
                    feature_for(encoder, load_gripper(rec.gripper_id), cfg.workspace_rows,
                                cfg.seed);
            }
        }
        const TopkReport report = eval_topk(model, features, dataset, cfg.contact_tolerance);
        std::ostringstream csv;
        csv << "stage,top1_percent,top10_percent\n";
        for (std::size_t s = 0; s < report.top1.size(); ++s) {
            csv << s + 1 << ',' << report.top1[s] << ',' << report.top10[s] << '\n';
        }
        std::cout << csv.str();
        if (!out_path.empty()) open_out(out_path) << csv.str();
    });

    // train-ik
    auto* train_ik_cmd = app.add_subcommand("train-ik", "train the fingertip-reaching policy");
    train_ik_cmd->add_option("--gripper", gripper_name, "builtin name or definition file");
    train_ik_cmd->add_option("--epochs", epochs, "training epochs");
    train_ik_cmd->add_option("--curve", curve_path, "error-curve CSV path");
    train_ik_cmd->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        if (out_path.empty()) throw UsageError("train-ik: --out is required");
        const GripperModel gripper = load_gripper(gripper_name.empty() ? cfg.gripper : gripper_name);
        const WorkspaceMatrix ws = sample_workspace(gripper, cfg.workspace_rows, cfg.seed);
        IkEnv env(gripper, cfg.arm_roll, cfg.approach_distance);
        SacTrainOptions opt;
        opt.epochs = epochs > 0 ? epochs : cfg.ik_epochs;
        opt.seed = cfg.seed;
        SacAgent agent(env.obs_dim(), env.action_dim(), opt.config, cfg.seed);
        const SacTrainResult result = sac_train(agent, env, ws, opt);
        if (const auto dir = fs::path(out_path).parent_path(); !dir.empty()) {
            fs::create_directories(dir);
        }
        agent.save(out_path);
        if (!curve_path.empty()) {
            auto out = open_out(curve_path);
            out << "epoch,mean_error_m\n";
            for (std::size_t e = 0; e < result.error_curve.size(); ++e) {
                out << e + 1 << ',' << result.error_curve[e] << '\n';
            }
        }
        std::cout << "final mean error " << result.error_curve.back() << " m, wrote " << out_path
                  << '\n';
    });

    // eval-ik
    auto* eval_ik_cmd = app.add_subcommand("eval-ik", "evaluate the reaching policy");
    std::string ik_path;
    int n_targets = 100;
    eval_ik_cmd->add_option("--checkpoint", ik_path, "policy checkpoint")->required();
    eval_ik_cmd->add_option("--gripper", gripper_name, "builtin name or definition file");
    eval_ik_cmd->add_option("--targets", n_targets, "number of workspace targets");
    eval_ik_cmd->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        const GripperModel gripper = load_gripper(gripper_name.empty() ? cfg.gripper : gripper_name);
        const WorkspaceMatrix ws = sample_workspace(gripper, cfg.workspace_rows, cfg.seed + 1);
        const SacAgent agent = SacAgent::load(ik_path);
        IkEnv env(gripper, cfg.arm_roll, cfg.approach_distance);
        std::mt19937_64 rng(cfg.seed);
        std::uniform_int_distribution<std::int64_t> pick(0, ws.rows() - 1);
        double total = 0;
        for (int i = 0; i < n_targets; ++i) {
            const std::int64_t row = pick(rng);
            std::vector<Vec3> targets;
            for (int f = 0; f < ws.n_fingers; ++f) targets.push_back(ws.fingertip(row, f));
            total += rollout_error(agent, env, targets);
        }
        std::cout << "mean per-finger error " << total / n_targets << " m over " << n_targets
                  << " targets\n";
    });

    // score-gqs
    auto* score_cmd = app.add_subcommand("score-gqs", "score a contact set");
    std::string contacts_path;
    score_cmd->add_option("--contacts", contacts_path, "contact CSV (x,y,z,nx,ny,nz outward)")
        ->required();
    score_cmd->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        const PointCloud contacts = load_cloud_csv(contacts_path);
        if (!contacts.has_normals()) throw DataError("score-gqs: contacts need normals");
        const Vec3 origin = contacts.centroid();
        const double score = gqs(contacts.points, origin, cfg.gqs_eps);
        std::vector<Vec3> inward;
        for (const auto& n : contacts.normals) inward.push_back(-n);
        FrictionModel friction;
        friction.mu = cfg.friction_mu;
        const bool closure = force_closure_oracle(contacts.points, inward, friction, origin);
        std::cout << "gqs " << score << (score >= cfg.gqs_threshold ? " (>= " : " (< ")
                  << cfg.gqs_threshold << " threshold), force closure "
                  << (closure ? "true" : "false") << '\n';
    });

    // plan-grasp
    auto* plan_cmd = app.add_subcommand("plan-grasp", "end-to-end single-object plan");
    std::string pssn_path;
    plan_cmd->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    plan_cmd->add_option("--pssn", pssn_path, "selector checkpoint")->required();
    plan_cmd->add_option("--ik", ik_path, "policy checkpoint")->required();
    plan_cmd->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        const PlannerAssets assets = load_assets(cfg, encoder_path, pssn_path, ik_path);
        TriangleMesh mesh;
        if (cfg.object_kind == "obj") {
            mesh = load_obj(cfg.object_path);
        } else {
            mesh = make_primitive(cfg.object_kind, cfg.object_dims);
        }
        PointCloud cloud =
            sample_surface(mesh, static_cast<std::size_t>(cfg.cloud_points), cfg.seed);
        if (cfg.hemisphere_cull) cloud = hemisphere_cull(cloud, Vec3(0, 0, 1.0));
        const GraspPlan plan = plan_grasp(assets, cloud, cfg);
        if (!plan.planned) {
            std::cout << "planning failure: " << plan.failure_reason << '\n';
            return;
        }
        std::cout << "contacts:";
        for (int idx : plan.contacts.indices) std::cout << ' ' << idx;
        std::cout << "\ngqs " << plan.gqs_value << ", force closure "
                  << (plan.oracle ? "true" : "false") << "\nmax residual " << plan.max_residual
                  << " m (oracle " << plan.oracle_residual << " m)\nsuccess "
                  << (plan.success ? "true" : "false") << '\n';
    });

    // run-trials
    auto* trials_cmd = app.add_subcommand("run-trials", "randomized kinematic grasp trials");
    int trials_per_object = 5;
    trials_cmd->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    trials_cmd->add_option("--pssn", pssn_path, "selector checkpoint")->required();
    trials_cmd->add_option("--ik", ik_path, "policy checkpoint")->required();
    trials_cmd->add_option("--trials", trials_per_object, "trials per object");
    trials_cmd->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        const PlannerAssets assets = load_assets(cfg, encoder_path, pssn_path, ik_path);
        const TrialReport report = run_trials(assets, trial_objects(), cfg, trials_per_object);
        std::ostringstream csv;
        write_trial_csv(report, csv);
        std::cout << csv.str();
        if (!out_path.empty()) open_out(out_path) << csv.str();
    });

    // footprint-report
    auto* footprint_cmd = app.add_subcommand("footprint-report", "representation-size comparison");
    int modes = 32;
    std::int64_t points_per_mode = 2048;
    std::int64_t report_rows = 4096;
    footprint_cmd->add_option("--gripper", gripper_name, "builtin name or definition file");
    footprint_cmd->add_option("--rows", report_rows, "workspace rows L");
    footprint_cmd->add_option("--modes", modes, "operation-mode count");
    footprint_cmd->add_option("--points-per-mode", points_per_mode, "cloud points per mode");
    footprint_cmd->callback([&] {
        const PipelineConfig cfg = cfg_with_overrides();
        const GripperModel gripper = load_gripper(gripper_name.empty() ? cfg.gripper : gripper_name);
        const FootprintReport report =
            footprint_report(report_rows, gripper.n_fingers, modes, points_per_mode);
        std::cout << "workspace bytes " << report.workspace_bytes << "\nmulti-mode bytes "
                  << report.multimode_bytes << "\nreduction " << report.reduction_percent
                  << "%\nreference arithmetic (4777-873)/4777 = "
                  << report.reference_reduction_percent << "%\n";
        if (!out_path.empty()) {
            open_out(out_path) << "workspace_bytes,multimode_bytes,reduction_percent\n"
                               << report.workspace_bytes << ',' << report.multimode_bytes << ','
                               << report.reduction_percent << '\n';
        }
    });

    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough();  // let --config/--seed/--out appear after the subcommand
    }
    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
