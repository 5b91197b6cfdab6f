#include "graspkit/pssn.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

namespace gk {

ObjectFeatureNet make_object_feature_net(std::mt19937_64& rng) {
    ObjectFeatureNet net;
    // Rows are [neighbor offset | own position] so the pooled feature keeps
    // where the point sits in the normalized cloud, not just the local shape;
    // offsets alone are identical everywhere on symmetric surfaces.
    net.local_mlp = Net({Layer::pointwise_conv(6, 32), Layer::relu(),
                         Layer::pointwise_conv(32, 32), Layer::relu(), Layer::maxpool_rows()});
    net.global_mlp = Net({Layer::pointwise_conv(3, 32), Layer::relu(), Layer::maxpool_rows()});
    net.local_mlp.init_params(rng);
    net.global_mlp.init_params(rng);
    return net;
}

namespace {

Mat normalized_input(const PointCloud& cloud, bool normalize) {
    const auto m = static_cast<Eigen::Index>(cloud.size());
    Mat x(m, 3);
    for (Eigen::Index i = 0; i < m; ++i) x.row(i) = cloud.points[i].transpose();
    if (normalize) {
        const Eigen::RowVector3d c = x.colwise().mean();
        x.rowwise() -= c;
        const double r = x.rowwise().norm().maxCoeff();
        if (r > 1e-12) x /= r;
    }
    return x;
}

std::vector<std::vector<int>> knn_groups(const Mat& x, int k) {
    const auto m = x.rows();
    std::vector<std::vector<int>> groups(m);
    std::vector<std::pair<double, int>> dist(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            dist[j] = {(x.row(j) - x.row(i)).squaredNorm(), static_cast<int>(j)};
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        groups[i].reserve(k);
        for (int j = 0; j < k; ++j) groups[i].push_back(dist[j].second);
    }
    return groups;
}

}  // namespace

Mat object_features(const ObjectFeatureNet& net, const PointCloud& cloud,
                    ObjectFeatureCache* cache) {
    const auto m = static_cast<Eigen::Index>(cloud.size());
    if (m < net.group_size) {
        throw DomainError("object_features: cloud smaller than the k-NN group size");
    }
    const Mat x = normalized_input(cloud, net.normalize_input);
    const auto groups = knn_groups(x, net.group_size);

    const int local_width = net.local_mlp.layers().back().kind == LayerKind::MaxPoolRows
        ? net.local_mlp.layers()[net.local_mlp.layers().size() - 3].out
        : 32;
    const int global_width = net.global_mlp.layers()[0].out;

    Mat features(m, local_width + global_width);
    if (cache) {
        cache->normalized = x;
        cache->groups = groups;
        cache->local.resize(m);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        Mat rel(net.group_size, 6);
        for (int j = 0; j < net.group_size; ++j) {
            rel.block(j, 0, 1, 3) = x.row(groups[i][j]) - x.row(i);
            rel.block(j, 3, 1, 3) = x.row(i);
        }
        const Mat pooled = net.local_mlp.forward(rel, cache ? &cache->local[i] : nullptr);
        features.block(i, 0, 1, local_width) = pooled;
    }
    const Mat global = net.global_mlp.forward(x, cache ? &cache->global : nullptr);
    features.rightCols(global_width) = global.replicate(m, 1);
    return features;
}

void object_features_backward(const ObjectFeatureNet& net, const ObjectFeatureCache& cache,
                              const Mat& d_features, std::vector<LayerGrad>* d_local,
                              std::vector<LayerGrad>* d_global) {
    const auto m = d_features.rows();
    const int local_width = static_cast<int>(d_features.cols()) -
                            net.global_mlp.layers()[0].out;
    auto accumulate = [](std::vector<LayerGrad>& into, const std::vector<LayerGrad>& add) {
        if (into.empty()) {
            into = add;
            return;
        }
        for (std::size_t i = 0; i < add.size(); ++i) {
            if (add[i].weight.size() == 0) continue;
            into[i].weight += add[i].weight;
            into[i].bias += add[i].bias;
        }
    };
    d_local->clear();
    d_global->clear();
    for (Eigen::Index i = 0; i < m; ++i) {
        std::vector<LayerGrad> g;
        net.local_mlp.backward(cache.local[i], d_features.block(i, 0, 1, local_width), &g);
        accumulate(*d_local, g);
    }
    const Mat d_pool = d_features.rightCols(d_features.cols() - local_width).colwise().sum();
    net.global_mlp.backward(cache.global, d_pool, d_global);
}

Mat concat_features_raw(const Eigen::RowVectorXd& gripper_feature, const Mat& object_feature) {
    Mat raw(object_feature.rows(), object_feature.cols() + gripper_feature.size());
    raw.leftCols(object_feature.cols()) = object_feature;
    raw.rightCols(gripper_feature.size()) = gripper_feature.replicate(object_feature.rows(), 1);
    return raw;
}

Mat concat_features(const Net& fusion, const Eigen::RowVectorXd& gripper_feature,
                    const Mat& object_feature, ForwardCache* cache) {
    const Mat raw = concat_features_raw(gripper_feature, object_feature);
    if (raw.cols() != fusion.layers().front().in) {
        throw DomainError("concat_features: fused width mismatch");
    }
    return fusion.forward(raw, cache);
}

PssnModel make_pssn_model(int n_contacts, std::uint64_t seed) {
    if (n_contacts < 2 || n_contacts > 3) {
        throw DomainError("make_pssn_model: supports 2 or 3 contacts");
    }
    std::mt19937_64 rng(seed);
    PssnModel model;
    model.n_contacts = n_contacts;
    model.object_net = make_object_feature_net(rng);
    model.fusion = Net({Layer::pointwise_conv(64 + 256, 64), Layer::relu()});
    model.fusion.init_params(rng);
    for (int s = 0; s < n_contacts; ++s) {
        Net scorer({Layer::pointwise_conv(64 * (1 + s), 64), Layer::relu(),
                    Layer::pointwise_conv(64, 1)});
        scorer.init_params(rng);
        model.stages.push_back(std::move(scorer));
    }
    return model;
}

StageSelection stage_scores(const Net& scorer, const Mat& stage_input) {
    const Mat logits = scorer.forward(stage_input);
    const auto m = logits.rows();
    StageSelection sel;
    sel.probabilities.resize(m);
    const double mx = logits.col(0).maxCoeff();
    double sum = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        sel.probabilities[i] = std::exp(logits(i, 0) - mx);
        sum += sel.probabilities[i];
    }
    for (auto& p : sel.probabilities) p /= sum;
    sel.ranked.resize(m);
    std::iota(sel.ranked.begin(), sel.ranked.end(), 0);
    std::stable_sort(sel.ranked.begin(), sel.ranked.end(), [&](int a, int b) {
        return sel.probabilities[a] > sel.probabilities[b];
    });
    return sel;
}

std::vector<ContactPointSet> combine_stage_selections(const std::vector<StageSelection>& stages,
                                                      const std::vector<int>& keep_counts,
                                                      const PointCloud& cloud,
                                                      std::size_t max_sets) {
    const int n_stages = static_cast<int>(stages.size());
    std::vector<std::vector<int>> candidates(n_stages);
    for (int s = 0; s < n_stages; ++s) {
        const int keep = std::min<int>(keep_counts[s], static_cast<int>(stages[s].ranked.size()));
        if (keep_counts[s] > static_cast<int>(stages[s].ranked.size())) {
            throw DomainError("combine_stage_selections: k exceeds the cloud size");
        }
        candidates[s].assign(stages[s].ranked.begin(), stages[s].ranked.begin() + keep);
    }
    auto prob_at = [&](int s, int pos) { return stages[s].probabilities[candidates[s][pos]]; };

    struct Node {
        double score;
        std::vector<int> pos;     // positions into the per-stage candidate lists
        std::vector<int> points;  // the corresponding point indices
    };
    auto worse = [](const Node& a, const Node& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.points > b.points;  // lower point indices first
    };
    std::priority_queue<Node, std::vector<Node>, decltype(worse)> heap(worse);
    std::set<std::vector<int>> pushed;

    auto make_node = [&](std::vector<int> pos) {
        Node node;
        node.score = 1.0;
        node.points.resize(n_stages);
        for (int s = 0; s < n_stages; ++s) {
            node.score *= prob_at(s, pos[s]);
            node.points[s] = candidates[s][pos[s]];
        }
        node.pos = std::move(pos);
        return node;
    };
    std::vector<int> start(n_stages, 0);
    pushed.insert(start);
    heap.push(make_node(start));

    std::vector<ContactPointSet> out;
    while (!heap.empty() && out.size() < max_sets) {
        const Node node = heap.top();
        heap.pop();
        for (int s = 0; s < n_stages; ++s) {
            std::vector<int> next = node.pos;
            if (++next[s] < static_cast<int>(candidates[s].size()) && pushed.insert(next).second) {
                heap.push(make_node(next));
            }
        }
        std::set<int> distinct(node.points.begin(), node.points.end());
        if (static_cast<int>(distinct.size()) != n_stages) continue;  // repeated index
        ContactPointSet set;
        set.indices = node.points;
        set.rank_score = node.score;
        for (int idx : node.points) {
            set.points.push_back(cloud.points[idx]);
            if (cloud.has_normals()) set.normals.push_back(cloud.normals[idx]);
        }
        out.push_back(std::move(set));
    }
    return out;
}

namespace {

Mat stage_input_for(const Mat& fused, const std::vector<int>& conditioned_on) {
    Mat input(fused.rows(), fused.cols() * (1 + conditioned_on.size()));
    input.leftCols(fused.cols()) = fused;
    for (std::size_t c = 0; c < conditioned_on.size(); ++c) {
        input.middleCols(fused.cols() * (c + 1), fused.cols()) =
            fused.row(conditioned_on[c]).replicate(fused.rows(), 1);
    }
    return input;
}

}  // namespace

std::vector<ContactPointSet> select_contacts(const PssnModel& model,
                                             const Eigen::RowVectorXd& gripper_feature,
                                             const PointCloud& cloud, int k1, int k2, int k3,
                                             std::size_t max_sets) {
    const Mat obj = object_features(model.object_net, cloud);
    const Mat fused = concat_features(model.fusion, gripper_feature, obj);

    std::vector<StageSelection> selections;
    std::vector<int> conditioned;
    const std::vector<int> keep = {k1, k2, k3};
    for (std::size_t s = 0; s < model.stages.size(); ++s) {
        StageSelection sel = stage_scores(model.stages[s], stage_input_for(fused, conditioned));
        conditioned.push_back(sel.ranked.front());
        selections.push_back(std::move(sel));
    }
    return combine_stage_selections(
        selections, std::vector<int>(keep.begin(), keep.begin() + model.stages.size()), cloud,
        max_sets);
}

namespace {

std::vector<double> stage_labels(const PointCloud& cloud, const std::vector<int>& truth,
                                 double tolerance) {
    std::vector<double> labels(cloud.size(), 0.0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int t : truth) {
            if ((cloud.points[i] - cloud.points[t]).norm() <= tolerance) {
                labels[i] = 1.0;
                break;
            }
        }
    }
    return labels;
}

bool within_any(const Vec3& p, const PointCloud& cloud, const std::vector<int>& truth,
                double tol) {
    for (int t : truth) {
        if ((p - cloud.points[t]).norm() <= tol) return true;
    }
    return false;
}

}  // namespace

PssnTrainResult train_pssn(PssnModel& model,
                           const std::map<std::string, Eigen::RowVectorXd>& gripper_features,
                           const PssnDataset& dataset, const PssnTrainOptions& options) {
    if (dataset.records.empty()) throw UsageError("train_pssn: empty dataset");
    for (const auto& rec : dataset.records) {
        if (!gripper_features.count(rec.gripper_id)) {
            throw UsageError("train_pssn: no gripper feature for id '" + rec.gripper_id + "'");
        }
        if (static_cast<int>(rec.stage_truth.size()) < static_cast<int>(model.stages.size())) {
            throw DataError("train_pssn: record is missing stage truth lists");
        }
    }

    // Per-record, per-stage binary labels (within tolerance of a truth point).
    std::vector<std::vector<std::vector<double>>> labels(dataset.records.size());
    for (std::size_t r = 0; r < dataset.records.size(); ++r) {
        for (std::size_t s = 0; s < model.stages.size(); ++s) {
            labels[r].push_back(stage_labels(dataset.records[r].cloud,
                                             dataset.records[r].stage_truth[s],
                                             options.label_tolerance));
        }
    }

    PssnTrainResult result;
    result.stage_accuracy.resize(model.stages.size());

    for (std::size_t s = 0; s < model.stages.size(); ++s) {
        const bool train_shared = (s == 0);
        AdamState opt_stage(options.lr), opt_fusion(options.lr), opt_local(options.lr),
            opt_global(options.lr);

        // Later stages run on frozen features; compute them once.
        std::vector<Mat> frozen_fused;
        std::vector<std::vector<int>> frozen_conditioning(dataset.records.size());
        if (!train_shared) {
            for (std::size_t r = 0; r < dataset.records.size(); ++r) {
                const auto& rec = dataset.records[r];
                const Mat obj = object_features(model.object_net, rec.cloud);
                const Mat fused =
                    concat_features(model.fusion, gripper_features.at(rec.gripper_id), obj);
                frozen_fused.push_back(fused);
                std::vector<int> cond;
                for (std::size_t ps = 0; ps < s; ++ps) {
                    StageSelection sel =
                        stage_scores(model.stages[ps], stage_input_for(fused, cond));
                    cond.push_back(sel.ranked.front());
                }
                frozen_conditioning[r] = cond;
            }
        }

        for (int epoch = 0; epoch < options.epochs_per_stage; ++epoch) {
            int top1_hits = 0;
            for (std::size_t r = 0; r < dataset.records.size(); ++r) {
                const auto& rec = dataset.records[r];
                const auto m = static_cast<Eigen::Index>(rec.cloud.size());

                ObjectFeatureCache obj_cache;
                ForwardCache fusion_cache;
                Mat fused;
                std::vector<int> cond;
                if (train_shared) {
                    const Mat obj = object_features(model.object_net, rec.cloud, &obj_cache);
                    fused = concat_features(model.fusion, gripper_features.at(rec.gripper_id),
                                            obj, &fusion_cache);
                } else {
                    fused = frozen_fused[r];
                    cond = frozen_conditioning[r];
                }

                const Mat input = stage_input_for(fused, cond);
                ForwardCache stage_cache;
                const Mat logits = model.stages[s].forward(input, &stage_cache);

                // Selection is a softmax over the cloud, so train the same
                // distribution: cross-entropy against the positive mass,
                // L = -log sum_{i in positives} softmax(logits)_i.
                Mat d_logits(m, 1);
                Eigen::Index best_row = 0;
                logits.col(0).maxCoeff(&best_row);
                if (labels[r][s][static_cast<std::size_t>(best_row)] > 0.5) ++top1_hits;
                const double mx = logits.col(0).maxCoeff();
                double z = 0;
                for (Eigen::Index i = 0; i < m; ++i) z += std::exp(logits(i, 0) - mx);
                double pos_mass = 0;
                for (Eigen::Index i = 0; i < m; ++i) {
                    if (labels[r][s][static_cast<std::size_t>(i)] > 0.5) {
                        pos_mass += std::exp(logits(i, 0) - mx) / z;
                    }
                }
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double p = std::exp(logits(i, 0) - mx) / z;
                    const bool pos = labels[r][s][static_cast<std::size_t>(i)] > 0.5;
                    d_logits(i, 0) =
                        pos_mass > 0 ? p - (pos ? p / pos_mass : 0.0) : 0.0;
                }
                if (!d_logits.allFinite()) {
                    throw NumericError("train_pssn: non-finite loss gradient at epoch " +
                                       std::to_string(epoch));
                }

                std::vector<LayerGrad> stage_grads;
                const Mat d_input = model.stages[s].backward(stage_cache, d_logits, &stage_grads);
                opt_stage.step(model.stages[s], stage_grads);

                if (train_shared) {
                    std::vector<LayerGrad> fusion_grads, local_grads, global_grads;
                    const Mat d_raw =
                        model.fusion.backward(fusion_cache, d_input.leftCols(fused.cols()),
                                              &fusion_grads);
                    object_features_backward(model.object_net, obj_cache, d_raw.leftCols(64),
                                             &local_grads, &global_grads);
                    opt_fusion.step(model.fusion, fusion_grads);
                    opt_local.step(model.object_net.local_mlp, local_grads);
                    opt_global.step(model.object_net.global_mlp, global_grads);
                }
            }
            result.stage_accuracy[s].push_back(100.0 * top1_hits /
                                               static_cast<double>(dataset.records.size()));
        }
    }
    return result;
}

TopkReport eval_topk(const PssnModel& model,
                     const std::map<std::string, Eigen::RowVectorXd>& gripper_features,
                     const PssnDataset& dataset, double tolerance) {
    TopkReport report;
    report.top1.assign(model.stages.size(), 0);
    report.top10.assign(model.stages.size(), 0);
    std::vector<int> counted(model.stages.size(), 0);

    for (const auto& rec : dataset.records) {
        const Mat obj = object_features(model.object_net, rec.cloud);
        const Mat fused = concat_features(model.fusion, gripper_features.at(rec.gripper_id), obj);
        std::vector<int> cond;
        for (std::size_t s = 0; s < model.stages.size(); ++s) {
            const StageSelection sel =
                stage_scores(model.stages[s], stage_input_for(fused, cond));
            cond.push_back(sel.ranked.front());
            if (rec.stage_truth[s].empty()) continue;
            ++counted[s];
            const auto& truth = rec.stage_truth[s];
            if (within_any(rec.cloud.points[sel.ranked[0]], rec.cloud, truth, tolerance)) {
                report.top1[s] += 1;
            }
            const int top_n = std::min<int>(10, static_cast<int>(sel.ranked.size()));
            for (int i = 0; i < top_n; ++i) {
                if (within_any(rec.cloud.points[sel.ranked[i]], rec.cloud, truth, tolerance)) {
                    report.top10[s] += 1;
                    break;
                }
            }
        }
    }
    for (std::size_t s = 0; s < model.stages.size(); ++s) {
        if (counted[s] > 0) {
            report.top1[s] *= 100.0 / counted[s];
            report.top10[s] *= 100.0 / counted[s];
        }
    }
    return report;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    if (v.empty()) return "-";
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        out << v[i];
    }
    return out.str();
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> v;
    if (s == "-") return v;
    std::istringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ',')) v.push_back(std::stoi(cell));
    return v;
}

}  // namespace

void save_dataset(const PssnDataset& dataset, const std::string& index_path,
                  const std::string& cloud_dir) {
    std::filesystem::create_directories(cloud_dir);
    std::ofstream out(index_path);
    if (!out) throw UsageError("cannot open for write: " + index_path);
    for (std::size_t r = 0; r < dataset.records.size(); ++r) {
        const auto& rec = dataset.records[r];
        const std::string cloud_path =
            (std::filesystem::path(cloud_dir) / ("cloud_" + std::to_string(r) + ".csv")).string();
        save_cloud_csv(rec.cloud, cloud_path);
        out << cloud_path << '\t' << rec.gripper_id;
        for (const auto& stage : rec.stage_truth) out << '\t' << join_ints(stage);
        out << '\t';
        if (rec.contact_sets.empty()) {
            out << '-';
        } else {
            for (std::size_t i = 0; i < rec.contact_sets.size(); ++i) {
                if (i) out << ';';
                out << join_ints(rec.contact_sets[i]);
            }
        }
        out << '\n';
    }
}

PssnDataset load_dataset(const std::string& index_path) {
    std::ifstream in(index_path);
    if (!in) throw UsageError("cannot open: " + index_path);
    PssnDataset dataset;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, '\t')) fields.push_back(field);
        if (fields.size() < 4) {
            throw DataError("dataset index line " + std::to_string(line_no) + ": too few fields");
        }
        PssnRecord rec;
        rec.cloud_ref = fields[0];
        rec.cloud = load_cloud_csv(fields[0]);
        rec.gripper_id = fields[1];
        for (std::size_t f = 2; f + 1 < fields.size(); ++f) {
            rec.stage_truth.push_back(split_ints(fields[f]));
            for (int idx : rec.stage_truth.back()) {
                if (idx < 0 || idx >= static_cast<int>(rec.cloud.size())) {
                    throw DataError("dataset index line " + std::to_string(line_no) +
                                    ": truth index out of range");
                }
            }
        }
        if (fields.back() != "-") {
            std::istringstream sets(fields.back());
            std::string one;
            while (std::getline(sets, one, ';')) rec.contact_sets.push_back(split_ints(one));
        }
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

}  // namespace gk
