#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "graspkit/encoder.hpp"
#include "graspkit/ik.hpp"
#include "graspkit/pssn.hpp"
#include "graspkit/quality.hpp"

namespace gk {

// Watertight triangulated primitives. `dims` per kind:
//   box: x, y, z extents; cylinder: radius, height; sphere: radius.
TriangleMesh make_box(double sx, double sy, double sz);
TriangleMesh make_cylinder(double radius, double height, int segments = 32);
TriangleMesh make_sphere(double radius, int subdivisions = 3);
TriangleMesh make_primitive(const std::string& kind, const std::vector<double>& dims);

// Drop points whose outward normal faces away from the viewpoint; a crude
// single-camera visibility stand-in.
PointCloud hemisphere_cull(const PointCloud& cloud, const Vec3& viewpoint);

// Flat key=value configuration; unknown keys are rejected, parse ->
// serialize -> parse is identity.
struct PipelineConfig {
    std::string gripper = "tri3";
    std::string object_kind = "sphere";      // box | cylinder | sphere | obj
    std::string object_path;                 // OBJ path when object_kind == "obj"
    std::vector<double> object_dims = {0.05};
    std::int64_t cloud_points = 512;         // M
    std::int64_t workspace_rows = 512;       // L
    int k1 = 128, k2 = 64, k3 = 64;
    double contact_tolerance = 0.005;        // labels / Top-k radius, meters
    double reach_tolerance = 0.010;
    double residual_tolerance = 0.005;       // plan success bar, meters
    double gqs_eps = 0.01;
    double friction_mu = 0.5;
    double gqs_threshold = 0.75;
    double approach_distance = 0.15;
    std::uint64_t seed = 0;
    int encoder_epochs = 200;
    int pssn_epochs = 60;
    int ik_epochs = 200;
    bool arm_roll = true;
    bool hemisphere_cull = false;
    std::string out_dir = "out";

    void validate() const;  // throws DomainError on out-of-range fields
};

PipelineConfig parse_config(std::istream& in);
PipelineConfig load_config(const std::string& path);
void serialize_config(const PipelineConfig& cfg, std::ostream& out);

// Trained artifacts a planner run needs.
struct PlannerAssets {
    GripperModel gripper;
    WorkspaceMatrix workspace;
    Net encoder;
    Eigen::RowVectorXd gripper_feature;
    PssnModel pssn;
    SacAgent agent;
};

struct GraspPlan {
    bool planned = false;             // a contact set passed the oracle + reach filter
    std::string failure_reason;
    ContactPointSet contacts;
    double gqs_value = -1;
    bool oracle = false;
    std::vector<double> policy_config;
    std::vector<double> oracle_config;
    double oracle_residual = 0;
    std::vector<double> residuals;    // per finger, meters
    double max_residual = 0;
    bool success = false;             // max_residual < tolerance AND oracle
};

GraspPlan plan_grasp(const PlannerAssets& assets, const PointCloud& cloud,
                     const PipelineConfig& cfg);

struct TrialRow {
    std::string object;
    int trial = 0;
    double gqs_value = -1;
    bool oracle = false;
    double residual_max = 0;
    bool success = false;
};

struct TrialReport {
    std::vector<TrialRow> rows;
    double success_rate = 0;  // percent
    double mean_gqs = 0;
};

// object,trial,gqs,oracle,residual_max_m,success rows + a summary row.
TrialReport run_trials(const PlannerAssets& assets,
                       const std::vector<std::pair<std::string, TriangleMesh>>& objects,
                       const PipelineConfig& cfg, int trials_per_object = 5);
void write_trial_csv(const TrialReport& report, std::ostream& out);

struct FootprintReport {
    double workspace_bytes = 0;
    double multimode_bytes = 0;
    double reduction_percent = 0;
    // Fixed reference arithmetic: (4777 - 873) / 4777 in percent.
    double reference_reduction_percent = 0;
};

FootprintReport footprint_report(std::int64_t workspace_rows, int n_fingers, int modes,
                                 std::int64_t points_per_mode);

// Checkpoint plumbing shared by the CLI and the tests.
void save_encoder(const Net& encoder, const Net& decoder, const std::string& path);
void load_encoder(const std::string& path, Net* encoder, Net* decoder);
void save_pssn(const PssnModel& model, const std::string& path);
PssnModel load_pssn(const std::string& path);

}  // namespace gk
