#pragma once

#include <random>

#include "graspkit/nn.hpp"
#include "graspkit/workspace.hpp"

namespace gk {

// Eq.-style world -> end-effector point mapping; targets are expressed in
// the end-effector frame so the policy is independent of arm orientation.
std::vector<Vec3> to_ee_frame(const RigidTransform& world_to_ee,
                              const std::vector<Vec3>& world_targets);

// Nonpositive: negative squared-sum fingertip position error, m^2.
double fingertip_reward(const std::vector<Vec3>& fingertips, const std::vector<Vec3>& targets);

// Reaching environment: the action is the absolute actuated configuration
// (plus an arm-roll angle when enabled), normalized to [-1, 1]. Observation
// is the normalized joint vector followed by the flattened target
// coordinates in the gripper base (= end-effector) frame.
class IkEnv {
public:
    IkEnv(GripperModel gripper, bool arm_roll, double approach_distance = 0.15);

    int action_dim() const { return n_actions_; }
    int obs_dim() const { return n_actions_ + 3 * gripper_.n_fingers; }
    int n_fingers() const { return gripper_.n_fingers; }
    const GripperModel& gripper() const { return gripper_; }
    double approach_distance() const { return approach_distance_; }
    int max_steps() const { return max_steps_; }

    void reset(const std::vector<Vec3>& targets);
    Vec observation() const;

    struct Step {
        Vec observation;
        double reward = 0;
        bool done = false;
        bool success = false;
        double max_finger_error = 0;
        double mean_finger_error = 0;
    };
    // Denormalize -> clamp to limits -> FK -> reward. Singular closed-loop
    // actions keep the previous valid fingertips with a fixed penalty.
    Step step(const Vec& action);

    std::vector<double> denormalize(const Vec& action) const;
    const std::vector<Vec3>& fingertips() const { return tips_; }
    const std::vector<Vec3>& targets() const { return targets_; }

private:
    GripperModel gripper_;
    bool arm_roll_;
    double approach_distance_;
    int max_steps_ = 100;
    double success_tolerance_ = 1e-3;
    double singular_penalty_ = 0.01;
    int n_actions_;

    std::vector<Vec3> targets_;
    std::vector<double> q_;
    std::vector<Vec3> tips_;
    int step_count_ = 0;
};

struct SacConfig {
    double alpha = 0.8;
    double lr = 0.003;
    double tau = 0.005;
    double gamma = 0.99;
    std::size_t replay_capacity = 100000;
    int batch_size = 128;
    int warmup_steps = 1000;
    // Applied to stored rewards inside the critic targets. Raw rewards are
    // squared-meter sums (~1e-4 near convergence); without scaling the fixed
    // entropy temperature would drown the reward signal entirely.
    double reward_scale = 10000.0;
    int hidden = 128;
};

struct Transition {
    Vec obs, prev_action, action, next_obs;
    double reward = 0;
    bool terminal = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
    void add(Transition t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return data_[i]; }
    std::vector<std::size_t> sample_indices(std::mt19937_64& rng, int batch) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> data_;
};

// Soft actor-critic with a tanh Gaussian policy conditioned on the previous
// action, twin critics with target networks, and a fixed temperature.
class SacAgent {
public:
    SacAgent(int obs_dim, int act_dim, const SacConfig& cfg, std::uint64_t seed);

    Vec act(const Vec& obs, const Vec& prev_action, std::mt19937_64& rng, bool deterministic) const;
    // Sampled action plus its log-probability (diagnostics / tests).
    Vec act_with_logprob(const Vec& obs, const Vec& prev_action, std::mt19937_64& rng,
                         double* log_prob) const;
    void update(const ReplayBuffer& buffer, std::mt19937_64& rng);

    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }
    const SacConfig& config() const { return cfg_; }
    const Net& policy() const { return policy_; }
    Net& policy() { return policy_; }
    const Net& q1() const { return q1_; }
    const Net& q1_target() const { return q1t_; }

    void save(const std::string& path) const;
    static SacAgent load(const std::string& path);

private:
    int obs_dim_, act_dim_;
    SacConfig cfg_;
    Net policy_, q1_, q2_, q1t_, q2t_;
    AdamState opt_policy_, opt_q1_, opt_q2_;

    friend struct SacInternals;
};

struct SacTrainOptions {
    int epochs = 200;
    int targets_per_epoch = 10;
    int episode_steps = 25;  // training-episode budget (evaluation uses max_steps)
    std::uint64_t seed = 0;
    SacConfig config;
};

struct SacTrainResult {
    std::vector<double> error_curve;  // mean final per-finger error per epoch, meters
};

// Targets are drawn from workspace rows, so every episode is reachable.
SacTrainResult sac_train(SacAgent& agent, IkEnv& env, const WorkspaceMatrix& workspace,
                         const SacTrainOptions& options);

// Deterministic (mean-action) rollout; returns the best mean per-finger
// error reached within the step budget.
double rollout_error(const SacAgent& agent, IkEnv& env, const std::vector<Vec3>& targets,
                     std::vector<double>* best_config = nullptr);

struct IkOracleResult {
    std::vector<double> config;
    double residual = 0;  // max per-finger error, meters
};

// Multi-start Nelder-Mead on the joint box; certifies target reachability
// independently of the learned policy.
IkOracleResult ik_oracle(const GripperModel& gripper, bool arm_roll,
                         const std::vector<Vec3>& targets, int restarts = 32,
                         std::uint64_t seed = 0);

}  // namespace gk
