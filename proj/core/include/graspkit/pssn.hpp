#pragma once

#include <map>
#include <string>
#include <vector>

#include "graspkit/geometry.hpp"
#include "graspkit/nn.hpp"

namespace gk {

// Per-point object feature extractor: single-scale k-NN grouping with a
// shared pointwise MLP and local max-pool, concatenated with a tiled global
// max-pool feature. Output M x 64, permutation-equivariant.
struct ObjectFeatureNet {
    int group_size = 16;
    bool normalize_input = true;
    Net local_mlp;   // 3 -> 32 -> 32 on neighbor offsets
    Net global_mlp;  // 3 -> 32 pointwise, max-pooled over the cloud
};
ObjectFeatureNet make_object_feature_net(std::mt19937_64& rng);

struct ObjectFeatureCache {
    Mat normalized;                       // M x 3 network input
    std::vector<std::vector<int>> groups; // k-NN indices per point
    std::vector<ForwardCache> local;      // per-point local MLP caches
    ForwardCache global;
};

Mat object_features(const ObjectFeatureNet& net, const PointCloud& cloud,
                    ObjectFeatureCache* cache = nullptr);
// Backpropagates dL/dfeatures into parameter gradients of both MLPs.
void object_features_backward(const ObjectFeatureNet& net, const ObjectFeatureCache& cache,
                              const Mat& d_features, std::vector<LayerGrad>* d_local,
                              std::vector<LayerGrad>* d_global);

// Tile the 1 x 256 gripper feature across the M object rows and compress
// through a pointwise 1D-CNN to M x 64.
Mat concat_features_raw(const Eigen::RowVectorXd& gripper_feature, const Mat& object_feature);
Mat concat_features(const Net& fusion, const Eigen::RowVectorXd& gripper_feature,
                    const Mat& object_feature, ForwardCache* cache = nullptr);

struct ContactPointSet {
    std::vector<int> indices;    // distinct indices into the object cloud
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    double rank_score = 0;       // product of stage probabilities
    double gqs = -1;             // set by the quality module
};

// Full staged model: feature nets plus one scorer per contact stage.
struct PssnModel {
    ObjectFeatureNet object_net;
    Net fusion;                  // 320 -> 64 pointwise
    std::vector<Net> stages;     // stage s scorer over (1 + s) fused slices
    int n_contacts = 3;
};
PssnModel make_pssn_model(int n_contacts, std::uint64_t seed);

struct StageSelection {
    std::vector<double> probabilities;  // softmax over all M points
    std::vector<int> ranked;            // indices sorted by descending probability
};

// Ranking / beam-1 combination core, separated from the networks so the
// tie-break and dedup contracts are directly testable.
std::vector<ContactPointSet> combine_stage_selections(
    const std::vector<StageSelection>& stages, const std::vector<int>& keep_counts,
    const PointCloud& cloud, std::size_t max_sets);

StageSelection stage_scores(const Net& scorer, const Mat& stage_input);

std::vector<ContactPointSet> select_contacts(const PssnModel& model,
                                             const Eigen::RowVectorXd& gripper_feature,
                                             const PointCloud& cloud, int k1, int k2, int k3,
                                             std::size_t max_sets = 256);

// One training/evaluation case: an object cloud, the gripper it was labeled
// for, per-stage ground-truth index sets, and the raw contact sets.
struct PssnRecord {
    std::string cloud_ref;  // CSV path when persisted
    PointCloud cloud;
    std::string gripper_id;
    std::vector<std::vector<int>> stage_truth;      // one index list per stage
    std::vector<std::vector<int>> contact_sets;     // the generating sets
};

struct PssnDataset {
    std::vector<PssnRecord> records;
};

// Line-delimited index with per-record cloud CSV references.
void save_dataset(const PssnDataset& dataset, const std::string& index_path,
                  const std::string& cloud_dir);
PssnDataset load_dataset(const std::string& index_path);

struct PssnTrainOptions {
    int epochs_per_stage = 60;
    double lr = 2e-3;
    std::uint64_t seed = 0;
    double label_tolerance = 0.005;  // positives within 5 mm of a truth contact
};

struct PssnTrainResult {
    std::vector<std::vector<double>> stage_accuracy;  // per stage, per epoch Top1
};

// Stages are trained one at a time; earlier-stage parameters (and the shared
// feature nets, owned by stage one) stay bit-identical during later stages.
PssnTrainResult train_pssn(PssnModel& model,
                           const std::map<std::string, Eigen::RowVectorXd>& gripper_features,
                           const PssnDataset& dataset, const PssnTrainOptions& options);

struct TopkReport {
    std::vector<double> top1;   // per stage, percent
    std::vector<double> top10;  // per stage, percent
};

TopkReport eval_topk(const PssnModel& model,
                     const std::map<std::string, Eigen::RowVectorXd>& gripper_features,
                     const PssnDataset& dataset, double tolerance = 0.005);

}  // namespace gk
