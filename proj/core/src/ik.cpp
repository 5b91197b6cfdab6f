#include "graspkit/ik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gk {

std::vector<Vec3> to_ee_frame(const RigidTransform& world_to_ee,
                              const std::vector<Vec3>& world_targets) {
    std::vector<Vec3> out;
    out.reserve(world_targets.size());
    for (const auto& p : world_targets) out.push_back(world_to_ee.apply(p));
    return out;
}

double fingertip_reward(const std::vector<Vec3>& fingertips, const std::vector<Vec3>& targets) {
    if (fingertips.size() != targets.size()) {
        throw DomainError("fingertip_reward: fingertip/target count mismatch");
    }
    double sum = 0;
    for (std::size_t i = 0; i < fingertips.size(); ++i) {
        sum += (fingertips[i] - targets[i]).squaredNorm();
    }
    return -sum;
}

IkEnv::IkEnv(GripperModel gripper, bool arm_roll, double approach_distance)
    : gripper_(std::move(gripper)),
      arm_roll_(arm_roll),
      approach_distance_(approach_distance),
      n_actions_(gripper_.n_actuated() + (arm_roll ? 1 : 0)) {
    q_.assign(n_actions_, 0.0);
}

void IkEnv::reset(const std::vector<Vec3>& targets) {
    if (static_cast<int>(targets.size()) != gripper_.n_fingers) {
        throw DomainError("IkEnv::reset: one target per finger required");
    }
    targets_ = targets;
    step_count_ = 0;
    const auto mid = gripper_.mid_config();
    q_.assign(mid.begin(), mid.end());
    if (arm_roll_) q_.push_back(0.0);
    tips_ = forward_kinematics(gripper_, mid);
}

std::vector<double> IkEnv::denormalize(const Vec& action) const {
    if (action.size() != n_actions_) throw DomainError("IkEnv: action dimension mismatch");
    std::vector<double> q(n_actions_);
    for (int i = 0; i < gripper_.n_actuated(); ++i) {
        const auto& lim = gripper_.actuated_limits[i];
        const double u = std::clamp(action[i], -1.0, 1.0);
        q[i] = lim.lo + 0.5 * (u + 1.0) * (lim.hi - lim.lo);
    }
    if (arm_roll_) {
        q[n_actions_ - 1] = std::clamp(action[n_actions_ - 1], -1.0, 1.0) * EIGEN_PI;
    }
    return q;
}

Vec IkEnv::observation() const {
    Vec obs(obs_dim());
    for (int i = 0; i < gripper_.n_actuated(); ++i) {
        const auto& lim = gripper_.actuated_limits[i];
        obs[i] = lim.hi > lim.lo ? 2.0 * (q_[i] - lim.lo) / (lim.hi - lim.lo) - 1.0 : 0.0;
    }
    if (arm_roll_) obs[n_actions_ - 1] = q_[n_actions_ - 1] / EIGEN_PI;
    // Desk-scale reaches are ~0.1 m; report targets in decimeters so every
    // observation channel is O(1), matching the normalized joint values.
    for (int f = 0; f < gripper_.n_fingers; ++f) {
        obs.segment<3>(n_actions_ + 3 * f) = 10.0 * targets_[f];
    }
    return obs;
}

IkEnv::Step IkEnv::step(const Vec& action) {
    if (targets_.empty()) throw DomainError("IkEnv::step before reset");
    const std::vector<double> q = denormalize(action);
    const std::vector<double> joints(q.begin(), q.begin() + gripper_.n_actuated());

    Step result;
    bool singular = false;
    std::vector<Vec3> tips;
    try {
        tips = forward_kinematics(gripper_, joints);
    } catch (const SingularityError&) {
        singular = true;
        tips = tips_;  // keep the previous valid pose
    }
    if (!singular && arm_roll_) {
        const RigidTransform roll = RigidTransform::rotate_axis_angle(Vec3::UnitZ(), q.back());
        for (auto& p : tips) p = roll.apply(p);
    }
    tips_ = tips;
    if (!singular) q_ = q;

    result.reward = fingertip_reward(tips_, targets_) - (singular ? singular_penalty_ : 0.0);
    double max_err = 0, sum_err = 0;
    for (int f = 0; f < gripper_.n_fingers; ++f) {
        const double e = (tips_[f] - targets_[f]).norm();
        max_err = std::max(max_err, e);
        sum_err += e;
    }
    result.max_finger_error = max_err;
    result.mean_finger_error = sum_err / gripper_.n_fingers;
    result.success = !singular && max_err < success_tolerance_;
    ++step_count_;
    result.done = result.success || step_count_ >= max_steps_;
    result.observation = observation();
    return result;
}

void ReplayBuffer::add(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::mt19937_64& rng, int batch) const {
    if (data_.empty()) throw DomainError("ReplayBuffer: sampling from an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> out(static_cast<std::size_t>(batch));
    for (auto& i : out) i = pick(rng);
    return out;
}

namespace {

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kTanhEps = 1e-6;

Net make_mlp(int in, int hidden, int out, std::mt19937_64& rng) {
    Net net({Layer::dense(in, hidden), Layer::relu(), Layer::dense(hidden, hidden), Layer::relu(),
             Layer::dense(hidden, out)});
    net.init_params(rng);
    return net;
}

void soft_update(Net& target, const Net& source, double tau) {
    auto& tl = target.layers();
    const auto& sl = source.layers();
    for (std::size_t i = 0; i < tl.size(); ++i) {
        if (!tl[i].has_params()) continue;
        tl[i].weight = (1.0 - tau) * tl[i].weight + tau * sl[i].weight;
        tl[i].bias = (1.0 - tau) * tl[i].bias + tau * sl[i].bias;
    }
}

struct PolicySample {
    Mat action;    // B x A, tanh-squashed
    Mat mean;      // pre-squash mean
    Mat log_std;   // clamped
    Mat eps;       // the sampled noise
    Vec log_prob;  // B
};

// Reparameterized sample from the tanh Gaussian head output [mean | log_std].
PolicySample squash_sample(const Mat& head, std::mt19937_64& rng, bool deterministic) {
    const auto b = head.rows();
    const auto a = head.cols() / 2;
    PolicySample s;
    s.mean = head.leftCols(a);
    s.log_std = head.rightCols(a).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    s.eps = Mat::Zero(b, a);
    if (!deterministic) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (Eigen::Index i = 0; i < b; ++i) {
            for (Eigen::Index j = 0; j < a; ++j) s.eps(i, j) = gauss(rng);
        }
    }
    const Mat pre = s.mean + s.log_std.array().exp().matrix().cwiseProduct(s.eps);
    s.action = pre.array().tanh().matrix();
    s.log_prob = Vec::Zero(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < a; ++j) {
            const double aij = s.action(i, j);
            s.log_prob[i] += -0.5 * s.eps(i, j) * s.eps(i, j) - s.log_std(i, j) -
                             0.5 * std::log(2.0 * EIGEN_PI) -
                             std::log(1.0 - aij * aij + kTanhEps);
        }
    }
    return s;
}

Mat critic_input(const Mat& obs, const Mat& prev_action, const Mat& action) {
    Mat x(obs.rows(), obs.cols() + prev_action.cols() + action.cols());
    x << obs, prev_action, action;
    return x;
}

Mat policy_input(const Mat& obs, const Mat& prev_action) {
    Mat x(obs.rows(), obs.cols() + prev_action.cols());
    x << obs, prev_action;
    return x;
}

}  // namespace

struct SacInternals {
    static Net& q1t(SacAgent& agent) { return agent.q1t_; }
    static Net& q2t(SacAgent& agent) { return agent.q2t_; }
};

SacAgent::SacAgent(int obs_dim, int act_dim, const SacConfig& cfg, std::uint64_t seed)
    : obs_dim_(obs_dim),
      act_dim_(act_dim),
      cfg_(cfg),
      opt_policy_(cfg.lr),
      opt_q1_(cfg.lr),
      opt_q2_(cfg.lr) {
    if (obs_dim < 1 || act_dim < 1) throw DomainError("SacAgent: dimensions must be positive");
    std::mt19937_64 rng(seed);
    policy_ = make_mlp(obs_dim + act_dim, cfg.hidden, 2 * act_dim, rng);
    q1_ = make_mlp(obs_dim + 2 * act_dim, cfg.hidden, 1, rng);
    q2_ = make_mlp(obs_dim + 2 * act_dim, cfg.hidden, 1, rng);
    q1t_ = q1_;
    q2t_ = q2_;
}

Vec SacAgent::act(const Vec& obs, const Vec& prev_action, std::mt19937_64& rng,
                  bool deterministic) const {
    Mat x(1, obs_dim_ + act_dim_);
    x << obs.transpose(), prev_action.transpose();
    const Mat head = policy_.forward(x);
    const PolicySample s = squash_sample(head, rng, deterministic);
    return s.action.row(0).transpose();
}

Vec SacAgent::act_with_logprob(const Vec& obs, const Vec& prev_action, std::mt19937_64& rng,
                               double* log_prob) const {
    Mat x(1, obs_dim_ + act_dim_);
    x << obs.transpose(), prev_action.transpose();
    const Mat head = policy_.forward(x);
    const PolicySample s = squash_sample(head, rng, false);
    if (log_prob) *log_prob = s.log_prob[0];
    return s.action.row(0).transpose();
}

void SacAgent::update(const ReplayBuffer& buffer, std::mt19937_64& rng) {
    const int b = cfg_.batch_size;
    const auto idx = buffer.sample_indices(rng, b);
    Mat obs(b, obs_dim_), prev(b, act_dim_), act(b, act_dim_), next_obs(b, obs_dim_);
    Vec reward(b), not_done(b);
    for (int i = 0; i < b; ++i) {
        const Transition& t = buffer.at(idx[static_cast<std::size_t>(i)]);
        obs.row(i) = t.obs.transpose();
        prev.row(i) = t.prev_action.transpose();
        act.row(i) = t.action.transpose();
        next_obs.row(i) = t.next_obs.transpose();
        reward[i] = t.reward * cfg_.reward_scale;
        not_done[i] = t.terminal ? 0.0 : 1.0;
    }

    // Critic targets from the target networks and a fresh next action.
    const Mat next_head = policy_.forward(policy_input(next_obs, act));
    const PolicySample next_sample = squash_sample(next_head, rng, false);
    const Mat next_in = critic_input(next_obs, act, next_sample.action);
    const Vec q1n = q1t_.forward(next_in).col(0);
    const Vec q2n = q2t_.forward(next_in).col(0);
    const Vec target = reward.array() +
                       cfg_.gamma * not_done.array() *
                           (q1n.cwiseMin(q2n).array() - cfg_.alpha * next_sample.log_prob.array());

    const Mat q_in = critic_input(obs, prev, act);
    for (Net* critic : {&q1_, &q2_}) {
        ForwardCache cache;
        const Vec q = critic->forward(q_in, &cache).col(0);
        Mat d_out = (2.0 / b) * (q - target);
        std::vector<LayerGrad> grads;
        critic->backward(cache, d_out, &grads);
        (critic == &q1_ ? opt_q1_ : opt_q2_).step(*critic, grads);
    }

    // Policy update: minimize alpha * log pi - min(Q1, Q2) over fresh actions.
    ForwardCache pi_cache;
    const Mat head = policy_.forward(policy_input(obs, prev), &pi_cache);
    const PolicySample s = squash_sample(head, rng, false);
    const Mat new_in = critic_input(obs, prev, s.action);
    ForwardCache c1, c2;
    const Vec q1v = q1_.forward(new_in, &c1).col(0);
    const Vec q2v = q2_.forward(new_in, &c2).col(0);

    // dQmin/dinput, routing each sample through its lower critic.
    Mat d1 = Mat::Zero(b, 1), d2 = Mat::Zero(b, 1);
    for (int i = 0; i < b; ++i) (q1v[i] <= q2v[i] ? d1 : d2)(i, 0) = 1.0;
    std::vector<LayerGrad> scratch;
    const Mat dq_din = q1_.backward(c1, d1, &scratch) + q2_.backward(c2, d2, &scratch);
    const Mat dq_da = dq_din.rightCols(act_dim_);

    const Mat sigma = s.log_std.array().exp().matrix();
    Mat d_head(b, 2 * act_dim_);
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < act_dim_; ++j) {
            const double a = s.action(i, j);
            const double dtanh = 1.0 - a * a;
            const double dlogp_du = 2.0 * a * dtanh / (dtanh + kTanhEps);
            const double se = sigma(i, j) * s.eps(i, j);
            const double dq_du = dq_da(i, j) * dtanh;  // dQ/du through the squash
            d_head(i, j) = (cfg_.alpha * dlogp_du - dq_du) / b;
            d_head(i, j + act_dim_) =
                (cfg_.alpha * (dlogp_du * se - 1.0) - dq_du * se) / b;
        }
    }
    if (!d_head.allFinite()) throw NumericError("SacAgent::update: non-finite policy gradient");
    std::vector<LayerGrad> pi_grads;
    policy_.backward(pi_cache, d_head, &pi_grads);
    opt_policy_.step(policy_, pi_grads);

    soft_update(q1t_, q1_, cfg_.tau);
    soft_update(q2t_, q2_, cfg_.tau);
}

void SacAgent::save(const std::string& path) const {
    Checkpoint ckpt;
    ckpt.nets["policy"] = policy_;
    ckpt.nets["q1"] = q1_;
    ckpt.nets["q2"] = q2_;
    ckpt.nets["q1_target"] = q1t_;
    ckpt.nets["q2_target"] = q2t_;
    ckpt.scalars["obs_dim"] = obs_dim_;
    ckpt.scalars["act_dim"] = act_dim_;
    ckpt.scalars["alpha"] = cfg_.alpha;
    ckpt.scalars["lr"] = cfg_.lr;
    ckpt.scalars["tau"] = cfg_.tau;
    ckpt.scalars["gamma"] = cfg_.gamma;
    ckpt.scalars["reward_scale"] = cfg_.reward_scale;
    ckpt.scalars["hidden"] = cfg_.hidden;
    ckpt.save(path);
}

SacAgent SacAgent::load(const std::string& path) {
    const Checkpoint ckpt = Checkpoint::load(path);
    SacConfig cfg;
    cfg.alpha = ckpt.scalars.at("alpha");
    cfg.lr = ckpt.scalars.at("lr");
    cfg.tau = ckpt.scalars.at("tau");
    cfg.gamma = ckpt.scalars.at("gamma");
    cfg.reward_scale = ckpt.scalars.at("reward_scale");
    cfg.hidden = static_cast<int>(ckpt.scalars.at("hidden"));
    SacAgent agent(static_cast<int>(ckpt.scalars.at("obs_dim")),
                   static_cast<int>(ckpt.scalars.at("act_dim")), cfg, 0);
    agent.policy_ = ckpt.nets.at("policy");
    agent.q1_ = ckpt.nets.at("q1");
    agent.q2_ = ckpt.nets.at("q2");
    agent.q1t_ = ckpt.nets.at("q1_target");
    agent.q2t_ = ckpt.nets.at("q2_target");
    return agent;
}

namespace {

std::vector<Vec3> row_targets(const WorkspaceMatrix& workspace, std::int64_t row) {
    std::vector<Vec3> targets;
    for (int f = 0; f < workspace.n_fingers; ++f) targets.push_back(workspace.fingertip(row, f));
    return targets;
}

}  // namespace

SacTrainResult sac_train(SacAgent& agent, IkEnv& env, const WorkspaceMatrix& workspace,
                         const SacTrainOptions& options) {
    if (workspace.n_fingers != env.n_fingers()) {
        throw DomainError("sac_train: workspace/gripper finger count mismatch");
    }
    if (workspace.rows() < 1) throw DomainError("sac_train: empty workspace");
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::int64_t> pick_row(0, workspace.rows() - 1);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);

    ReplayBuffer buffer(options.config.replay_capacity);
    SacTrainResult result;
    long total_steps = 0;

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        double epoch_error = 0;
        for (int episode = 0; episode < options.targets_per_epoch; ++episode) {
            env.reset(row_targets(workspace, pick_row(rng)));
            Vec obs = env.observation();
            Vec prev_action = Vec::Zero(agent.act_dim());
            double final_error = 0;
            for (int t = 0; t < options.episode_steps; ++t) {
                Vec action(agent.act_dim());
                if (total_steps < options.config.warmup_steps) {
                    for (int j = 0; j < agent.act_dim(); ++j) action[j] = uniform(rng);
                } else {
                    action = agent.act_with_logprob(obs, prev_action, rng, nullptr);
                }
                const IkEnv::Step step = env.step(action);
                Transition tr;
                tr.obs = obs;
                tr.prev_action = prev_action;
                tr.action = action;
                tr.next_obs = step.observation;
                tr.reward = step.reward;
                tr.terminal = step.success;
                buffer.add(std::move(tr));

                obs = step.observation;
                prev_action = action;
                final_error = step.mean_finger_error;
                ++total_steps;
                if (total_steps >= options.config.warmup_steps &&
                    buffer.size() >= static_cast<std::size_t>(options.config.batch_size)) {
                    agent.update(buffer, rng);
                }
                if (step.done) break;
            }
            epoch_error += final_error;
        }
        result.error_curve.push_back(epoch_error / options.targets_per_epoch);
    }
    return result;
}

double rollout_error(const SacAgent& agent, IkEnv& env, const std::vector<Vec3>& targets,
                     std::vector<double>* best_config) {
    env.reset(targets);
    Vec obs = env.observation();
    Vec prev_action = Vec::Zero(agent.act_dim());
    std::mt19937_64 rng(0);  // unused on the deterministic path
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < env.max_steps(); ++t) {
        Mat x(1, agent.obs_dim() + agent.act_dim());
        x << obs.transpose(), prev_action.transpose();
        const Mat head = agent.policy().forward(x);
        const Vec action =
            head.leftCols(agent.act_dim()).array().tanh().matrix().row(0).transpose();
        const IkEnv::Step step = env.step(action);
        if (step.mean_finger_error < best) {
            best = step.mean_finger_error;
            if (best_config) *best_config = env.denormalize(action);
        }
        obs = step.observation;
        prev_action = action;
        if (step.done) break;
    }
    (void)rng;
    return best;
}

namespace {

// Objective for the oracle: max per-finger error at a joint configuration,
// with a large penalty on singular closed-loop poses.
double oracle_cost(const GripperModel& gripper, bool arm_roll, const std::vector<Vec3>& targets,
                   const std::vector<double>& x) {
    const int a = gripper.n_actuated();
    std::vector<double> q(x.begin(), x.begin() + a);
    for (int i = 0; i < a; ++i) {
        q[i] = std::clamp(q[i], gripper.actuated_limits[i].lo, gripper.actuated_limits[i].hi);
    }
    std::vector<Vec3> tips;
    try {
        tips = forward_kinematics(gripper, q);
    } catch (const SingularityError&) {
        return 10.0;
    }
    if (arm_roll) {
        const RigidTransform roll = RigidTransform::rotate_axis_angle(Vec3::UnitZ(), x.back());
        for (auto& p : tips) p = roll.apply(p);
    }
    double worst = 0;
    for (std::size_t f = 0; f < tips.size(); ++f) {
        worst = std::max(worst, (tips[f] - targets[static_cast<int>(f)]).norm());
    }
    return worst;
}

}  // namespace

IkOracleResult ik_oracle(const GripperModel& gripper, bool arm_roll,
                         const std::vector<Vec3>& targets, int restarts, std::uint64_t seed) {
    if (static_cast<int>(targets.size()) != gripper.n_fingers) {
        throw DomainError("ik_oracle: one target per finger required");
    }
    const int a = gripper.n_actuated();
    const int dim = a + (arm_roll ? 1 : 0);
    std::mt19937_64 rng(seed);

    auto cost = [&](const std::vector<double>& x) {
        return oracle_cost(gripper, arm_roll, targets, x);
    };
    auto random_point = [&]() {
        std::vector<double> x(dim);
        for (int i = 0; i < a; ++i) {
            std::uniform_real_distribution<double> d(gripper.actuated_limits[i].lo,
                                                     gripper.actuated_limits[i].hi);
            x[i] = d(rng);
        }
        if (arm_roll) {
            std::uniform_real_distribution<double> d(-EIGEN_PI, EIGEN_PI);
            x[dim - 1] = d(rng);
        }
        return x;
    };

    IkOracleResult best;
    best.residual = std::numeric_limits<double>::infinity();

    for (int r = 0; r < restarts; ++r) {
        // Nelder-Mead with standard coefficients on the joint box.
        std::vector<std::vector<double>> simplex;
        simplex.push_back(random_point());
        for (int i = 0; i < dim; ++i) {
            auto v = simplex[0];
            const double span = i < a
                ? gripper.actuated_limits[i].hi - gripper.actuated_limits[i].lo
                : 2.0 * EIGEN_PI;
            v[i] += 0.1 * span;
            simplex.push_back(std::move(v));
        }
        std::vector<double> f(simplex.size());
        for (std::size_t i = 0; i < simplex.size(); ++i) f[i] = cost(simplex[i]);

        for (int iter = 0; iter < 300; ++iter) {
            std::vector<std::size_t> order(simplex.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](auto x, auto y) { return f[x] < f[y]; });
            const std::size_t lo = order.front(), hi = order.back();
            if (f[lo] < 1e-10 || std::abs(f[hi] - f[lo]) < 1e-14) break;

            std::vector<double> centroid(dim, 0.0);
            for (std::size_t i : order) {
                if (i == hi) continue;
                for (int j = 0; j < dim; ++j) centroid[j] += simplex[i][j] / dim;
            }
            auto blend = [&](double coeff) {
                std::vector<double> x(dim);
                for (int j = 0; j < dim; ++j) {
                    x[j] = centroid[j] + coeff * (centroid[j] - simplex[hi][j]);
                }
                return x;
            };
            const auto reflected = blend(1.0);
            const double fr = cost(reflected);
            if (fr < f[lo]) {
                const auto expanded = blend(2.0);
                const double fe = cost(expanded);
                if (fe < fr) {
                    simplex[hi] = expanded;
                    f[hi] = fe;
                } else {
                    simplex[hi] = reflected;
                    f[hi] = fr;
                }
            } else if (fr < f[order[order.size() - 2]]) {
                simplex[hi] = reflected;
                f[hi] = fr;
            } else {
                const auto contracted = blend(-0.5);
                const double fc = cost(contracted);
                if (fc < f[hi]) {
                    simplex[hi] = contracted;
                    f[hi] = fc;
                } else {
                    for (std::size_t i : order) {
                        if (i == lo) continue;
                        for (int j = 0; j < dim; ++j) {
                            simplex[i][j] = 0.5 * (simplex[i][j] + simplex[lo][j]);
                        }
                        f[i] = cost(simplex[i]);
                    }
                }
            }
        }
        const auto it = std::min_element(f.begin(), f.end());
        if (*it < best.residual) {
            best.residual = *it;
            auto x = simplex[static_cast<std::size_t>(it - f.begin())];
            for (int i = 0; i < a; ++i) {
                x[i] = std::clamp(x[i], gripper.actuated_limits[i].lo,
                                  gripper.actuated_limits[i].hi);
            }
            best.config = std::move(x);
        }
    }

    // Coordinate-descent polish: the simplex can stall short of the local
    // minimum on closed-loop cost landscapes, so refine each coordinate with
    // a shrinking three-point line search.
    if (best.residual < std::numeric_limits<double>::infinity()) {
        auto x = best.config;
        for (int sweep = 0; sweep < 60; ++sweep) {
            bool improved = false;
            for (int j = 0; j < dim; ++j) {
                const double span = j < a
                    ? gripper.actuated_limits[j].hi - gripper.actuated_limits[j].lo
                    : 2.0 * EIGEN_PI;
                double h = span * std::pow(0.5, 3 + sweep / 2);
                for (const double dir : {+1.0, -1.0}) {
                    auto y = x;
                    y[j] += dir * h;
                    if (j < a) {
                        y[j] = std::clamp(y[j], gripper.actuated_limits[j].lo,
                                          gripper.actuated_limits[j].hi);
                    }
                    const double fy = cost(y);
                    if (fy < best.residual) {
                        best.residual = fy;
                        x = std::move(y);
                        improved = true;
                    }
                }
            }
            if (!improved && sweep > 8) break;
        }
        for (int i = 0; i < a; ++i) {
            x[i] = std::clamp(x[i], gripper.actuated_limits[i].lo, gripper.actuated_limits[i].hi);
        }
        best.config = std::move(x);
    }
    return best;
}

}  // namespace gk
