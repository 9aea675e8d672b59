#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rldsm/billing.hpp"
#include "rldsm/env.hpp"
#include "rldsm/nn/checkpoint.hpp"
#include "rldsm/nn/qnetwork.hpp"
#include "rldsm/rewards.hpp"
#include "rldsm/rng.hpp"
#include "rldsm/scenario.hpp"

namespace rldsm {

struct ExplorationSchedule {
  double eps_start = 0.9;
  double eps_end = 0.05;
  double eps_decay = 2000.0;  // steps
};

/// eps_end + (eps_start - eps_end) * exp(-steps / eps_decay)
double epsilon_at(const ExplorationSchedule& schedule, std::uint64_t steps_done);

/// States are stored as observations; render() recovers the full image.
struct Transition {
  Observation state;
  Action action = Action::Drop;
  double reward = 0.0;
  Observation next_state;
  bool terminal = false;
};

/// Bounded FIFO. Index 0 is the oldest stored transition.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }
  std::uint64_t pushed() const { return pushed_; }
  const Transition& operator[](std::size_t i) const;

  /// n distinct indices, uniform over the stored transitions.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::vector<Transition> slots_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::uint64_t pushed_ = 0;
};

struct AgentConfig {
  double gamma = 0.99;
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 30000;
  std::uint64_t target_sync_steps = 250;
  /// Environment steps between gradient updates. 1 updates on every step at
  /// about eight times the wall time.
  std::uint64_t train_every = 8;
  std::uint64_t episodes = 5000;
  bool double_dqn = true;
  std::uint64_t seed = 7;
  ExplorationSchedule exploration;
  nn::RmsPropConfig optimizer;
  nn::NetConfig net = nn::deep_profile();
  EnvConfig env;
  /// Write a checkpoint every K episodes (0 = never).
  std::uint64_t checkpoint_every = 0;
  /// Greedy rollout every K episodes; the best-scoring policy is kept for
  /// evaluation (0 = keep the final policy).
  std::uint64_t select_every = 50;
};

/// Throws Error for inconsistent settings.
void validate(const AgentConfig& config);

/// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const float> values);

/// Q-values of the policy network for one observation.
std::vector<float> q_values(nn::QNetwork& net, const Observation& obs, int max_height);

/// Epsilon-greedy. A uniform draw decides exploration whenever epsilon > 0.
Action select_action(nn::QNetwork& net, const Observation& obs, int max_height, double epsilon,
                     Rng& rng);

/// Bootstrapped targets from already computed next-state Q-values (n x A).
/// q_policy_next is only read for double DQN.
std::vector<float> td_targets(std::span<const double> rewards, std::span<const bool> terminal,
                              const nn::Tensor& q_policy_next, const nn::Tensor& q_target_next,
                              double gamma, bool double_dqn);

/// Packs observations into a (N, 2, rows, 24) network batch.
nn::Tensor make_batch(std::span<const Observation* const> observations, int max_height);

class DqnAgent {
 public:
  explicit DqnAgent(const AgentConfig& config);

  const AgentConfig& config() const { return config_; }
  nn::QNetwork& policy() { return policy_; }
  nn::QNetwork& target() { return target_; }
  const nn::QNetwork& policy() const { return policy_; }
  const nn::QNetwork& target() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  Rng& rng() { return rng_; }

  double epsilon() const { return epsilon_at(config_.exploration, steps_done_); }
  Action act(const Observation& obs);

  /// Stores a transition, advances the step counter, and runs the update and
  /// sync that fall due on this step.
  void observe_step(const Transition& t);

  /// One minibatch update; nullopt while the buffer holds fewer than N_b.
  std::optional<double> train_step();
  void sync_target();

  std::uint64_t steps_done() const { return steps_done_; }
  std::uint64_t episodes_done() const { return episodes_done_; }
  std::uint64_t sync_count() const { return sync_count_; }
  std::uint64_t updates() const { return updates_; }
  void finish_episode() { ++episodes_done_; }

  nn::Checkpoint checkpoint() const;

  /// Snapshots the live policy if its greedy return beats every earlier one.
  void offer_candidate(double greedy_return, std::uint64_t episode);
  /// The kept policy, or the live one when nothing was offered.
  const nn::QNetwork& selected_policy() const { return selected_ ? *selected_ : policy_; }
  std::uint64_t selected_episode() const { return selected_episode_; }
  double selected_return() const { return selected_return_; }

 private:
  AgentConfig config_;
  nn::QNetwork policy_;
  nn::QNetwork target_;
  nn::OptimizerState<float> optimizer_;
  ReplayBuffer buffer_;
  Rng rng_;
  std::uint64_t steps_done_ = 0;
  std::uint64_t episodes_done_ = 0;
  std::uint64_t sync_count_ = 0;
  std::uint64_t updates_ = 0;
  std::optional<nn::QNetwork> selected_;
  std::uint64_t selected_episode_ = 0;
  double selected_return_ = 0.0;
};

/// One shiftable-load problem: fixed base load, blocks to place, prices.
struct Problem {
  BlockSet blocks;
  Tariff tariff;
};

Problem make_problem(const ConsumerScenario& consumer, const Tariff& tariff);

struct TrainingLogRow {
  std::uint64_t episode = 0;
  std::uint64_t steps = 0;
  double total_reward = 0.0;
  double peak_kw = 0.0;
  double daily_cost_cents = 0.0;
  double epsilon = 0.0;
};

inline constexpr const char* kTrainingLogHeader =
    "episode,steps,total_reward,peak_kw,daily_cost_cents,epsilon";
std::string format_log_row(const TrainingLogRow& row);

struct TrainHooks {
  std::function<void(const TrainingLogRow&)> on_episode;
  std::function<void(const DqnAgent&)> on_checkpoint;
};

/// Runs config.episodes episodes on shuffled queues and returns the log.
/// Every select_every episodes (and at the end) the greedy policy is scored
/// by its return and offered to the agent as a candidate.
std::vector<TrainingLogRow> train(DqnAgent& agent, const Problem& problem,
                                  const RewardConfig& rewards, const TrainHooks& hooks = {});

struct Evaluation {
  std::vector<Placement> placements;
  double total_reward = 0.0;
  Profile profile{};
  BillReport bill;
  double peak_kw = 0.0;
  bool failed = false;  // overflow during the greedy rollout
};

/// Greedy rollout in file order.
Evaluation evaluate(nn::QNetwork& net, const Problem& problem, const RewardConfig& rewards,
                    const EnvConfig& env = {});

}  // namespace rldsm
