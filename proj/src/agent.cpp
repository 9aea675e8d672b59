#include "rldsm/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

namespace rldsm {

double epsilon_at(const ExplorationSchedule& s, std::uint64_t steps_done) {
  return s.eps_end +
         (s.eps_start - s.eps_end) * std::exp(-static_cast<double>(steps_done) / s.eps_decay);
}

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : slots_(capacity) {
  if (capacity == 0) throw Error("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  slots_[head_] = t;
  head_ = (head_ + 1) % slots_.size();
  size_ = std::min(size_ + 1, slots_.size());
  ++pushed_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay buffer index");
  const std::size_t oldest = (head_ + slots_.size() - size_) % slots_.size();
  return slots_[(oldest + i) % slots_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (n > size_) throw Error("cannot sample more transitions than are stored");
  std::vector<std::size_t> out;
  out.reserve(n);
  if (2 * n > size_) {
    // Dense request: partial Fisher-Yates over all indices.
    std::vector<std::size_t> all(size_);
    for (std::size_t i = 0; i < size_; ++i) all[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(size_ - i));
      std::swap(all[i], all[j]);
      out.push_back(all[i]);
    }
    return out;
  }
  while (out.size() < n) {
    const std::size_t i = static_cast<std::size_t>(rng.below(size_));
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

// ------------------------------------------------------------ components

void validate(const AgentConfig& c) {
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw Error("gamma must lie in [0, 1)");
  if (c.batch_size == 0) throw Error("batch size must be positive");
  if (c.batch_size > c.buffer_capacity) throw Error("batch size exceeds the buffer capacity");
  if (c.target_sync_steps == 0) throw Error("target sync interval must be at least 1 step");
  if (c.train_every == 0) throw Error("train_every must be at least 1");
  const auto& e = c.exploration;
  if (!(e.eps_end >= 0.0 && e.eps_end <= e.eps_start && e.eps_start <= 1.0))
    throw Error("exploration needs 0 <= eps_end <= eps_start <= 1");
  if (!(e.eps_decay > 0.0)) throw Error("eps_decay must be positive");
  if (c.net.in_rows != static_cast<std::size_t>(pooled_rows(c.env.max_height)) ||
      c.net.in_cols != static_cast<std::size_t>(kHoursPerDay) || c.net.in_planes != 2)
    throw Error("network input shape does not match the grid");
  if (c.net.actions != static_cast<std::size_t>(kNumActions))
    throw Error("network must have one output per action");
}

int argmax(std::span<const float> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

nn::Tensor make_batch(std::span<const Observation* const> observations, int max_height) {
  const std::size_t rows = static_cast<std::size_t>(pooled_rows(max_height));
  const std::size_t per = 2 * rows * kHoursPerDay;
  nn::Tensor batch({observations.size(), 2, rows, static_cast<std::size_t>(kHoursPerDay)});
  for (std::size_t i = 0; i < observations.size(); ++i)
    write_network_input(*observations[i], max_height,
                        std::span<float>(batch.data() + i * per, per));
  return batch;
}

std::vector<float> q_values(nn::QNetwork& net, const Observation& obs, int max_height) {
  const Observation* one[] = {&obs};
  const auto q = net.forward(make_batch(one, max_height), nn::Mode::Inference);
  return {q.data(), q.data() + q.size()};
}

Action select_action(nn::QNetwork& net, const Observation& obs, int max_height, double epsilon,
                     Rng& rng) {
  if (epsilon > 0.0 && rng.uniform01() < epsilon)
    return static_cast<Action>(rng.below(kNumActions));
  const auto q = q_values(net, obs, max_height);
  return static_cast<Action>(argmax(q));
}

std::vector<float> td_targets(std::span<const double> rewards, std::span<const bool> terminal,
                              const nn::Tensor& q_policy_next, const nn::Tensor& q_target_next,
                              double gamma, bool double_dqn) {
  const std::size_t n = rewards.size();
  if (terminal.size() != n || q_target_next.rank() != 2 || q_target_next.dim(0) != n)
    throw nn::ShapeError("td_targets: batch sizes differ");
  if (double_dqn && q_policy_next.shape() != q_target_next.shape())
    throw nn::ShapeError("td_targets: policy and target Q shapes differ");
  const std::size_t a = q_target_next.dim(1);
  std::vector<float> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (terminal[i]) {
      y[i] = static_cast<float>(rewards[i]);
      continue;
    }
    const float* qt = q_target_next.data() + i * a;
    double bootstrap;
    if (double_dqn) {
      const int best = argmax(std::span<const float>(q_policy_next.data() + i * a, a));
      bootstrap = qt[best];
    } else {
      bootstrap = *std::max_element(qt, qt + a);
    }
    y[i] = static_cast<float>(rewards[i] + gamma * bootstrap);
  }
  return y;
}

// ----------------------------------------------------------------- agent

DqnAgent::DqnAgent(const AgentConfig& config)
    : config_(config),
      policy_(config.net, config.seed),
      target_(config.net, config.seed),
      buffer_(config.buffer_capacity),
      rng_(config.seed) {
  validate(config_);
  target_.copy_state_from(policy_);
  optimizer_ = nn::make_optimizer_state(policy_.parameters(), config_.optimizer);
}

Action DqnAgent::act(const Observation& obs) {
  return select_action(policy_, obs, config_.env.max_height, epsilon(), rng_);
}

void DqnAgent::observe_step(const Transition& t) {
  buffer_.push(t);
  ++steps_done_;
  if (steps_done_ % config_.train_every == 0) train_step();
  if (steps_done_ % config_.target_sync_steps == 0) sync_target();
}

std::optional<double> DqnAgent::train_step() {
  const std::size_t n = config_.batch_size;
  if (buffer_.size() < n) return std::nullopt;
  const auto idx = buffer_.sample_indices(n, rng_);

  std::vector<const Observation*> states(n), next(n);
  std::vector<double> rewards(n);
  std::unique_ptr<bool[]> terminal(new bool[n]);  // vector<bool> has no span
  std::vector<int> actions(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = buffer_[idx[i]];
    states[i] = &t.state;
    next[i] = &t.next_state;
    rewards[i] = t.reward;
    terminal[i] = t.terminal;
    actions[i] = static_cast<int>(t.action);
  }

  const int h = config_.env.max_height;
  const nn::Tensor next_batch = make_batch(next, h);
  const nn::Tensor q_target = target_.forward(next_batch, nn::Mode::Inference);
  nn::Tensor q_policy;
  if (config_.double_dqn) q_policy = policy_.forward(next_batch, nn::Mode::Inference);
  const auto y = td_targets(rewards, std::span<const bool>(terminal.get(), n), q_policy,
                            q_target, config_.gamma, config_.double_dqn);

  const double loss = nn::loss_and_gradients<float>(policy_, make_batch(states, h), actions, y);
  nn::rmsprop_step(policy_.parameters(), optimizer_);
  ++updates_;
  return loss;
}

void DqnAgent::sync_target() {
  target_.copy_state_from(policy_);
  ++sync_count_;
}

void DqnAgent::offer_candidate(double greedy_return, std::uint64_t episode) {
  if (selected_ && !(greedy_return > selected_return_)) return;
  selected_ = policy_;
  selected_return_ = greedy_return;
  selected_episode_ = episode;
}

nn::Checkpoint DqnAgent::checkpoint() const {
  nn::Checkpoint c;
  c.policy = policy_;
  c.target = target_;
  c.optimizer = optimizer_;
  c.steps_done = steps_done_;
  c.episodes_done = episodes_done_;
  c.rng_state = rng_.state();
  return c;
}

// --------------------------------------------------------------- episodes

Problem make_problem(const ConsumerScenario& consumer, const Tariff& tariff) {
  return {to_blocks(consumer), tariff};
}

std::string format_log_row(const TrainingLogRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%llu,%llu,%.6f,%.1f,%.1f,%.6f",
                static_cast<unsigned long long>(r.episode),
                static_cast<unsigned long long>(r.steps), r.total_reward, r.peak_kw,
                r.daily_cost_cents, r.epsilon);
  return buf;
}

namespace {

void offer(DqnAgent& agent, const Problem& problem, const RewardConfig& rewards) {
  const auto ev = evaluate(agent.policy(), problem, rewards, agent.config().env);
  const double score = ev.failed ? -std::numeric_limits<double>::infinity() : ev.total_reward;
  agent.offer_candidate(score, agent.episodes_done());
}

}  // namespace

std::vector<TrainingLogRow> train(DqnAgent& agent, const Problem& problem,
                                  const RewardConfig& rewards, const TrainHooks& hooks) {
  const auto& cfg = agent.config();
  const HourlyPrices prices = hourly_prices(problem.tariff);
  std::vector<TrainingLogRow> log;
  log.reserve(cfg.episodes);
  for (std::uint64_t e = 0; e < cfg.episodes; ++e) {
    EnvState s = reset(problem.blocks.base_profile, problem.blocks.blocks, QueueOrder::Shuffled,
                       agent.rng().next(), cfg.env);
    TrainingLogRow row;
    row.episode = agent.episodes_done() + 1;
    Observation obs = observe(s);
    while (!s.terminal) {
      const Action a = agent.act(obs);
      StepResult r = step(s, a);
      double reward = 0.0;
      if (r.report) reward = compute_reward(*r.report, rewards, prices).total;
      Observation next_obs = observe(r.next);
      agent.observe_step({obs, a, reward, next_obs, r.terminal});
      row.total_reward += reward;
      ++row.steps;
      s = std::move(r.next);
      obs = next_obs;
    }
    row.peak_kw = cells_to_kw(profile_peak(s.grid.heights));
    row.daily_cost_cents = daily_cost(s.grid.heights, prices).cents();
    row.epsilon = agent.epsilon();
    agent.finish_episode();
    log.push_back(row);
    if (hooks.on_episode) hooks.on_episode(row);
    if (cfg.select_every && agent.episodes_done() % cfg.select_every == 0)
      offer(agent, problem, rewards);
    if (cfg.checkpoint_every && hooks.on_checkpoint &&
        agent.episodes_done() % cfg.checkpoint_every == 0)
      hooks.on_checkpoint(agent);
  }
  if (cfg.select_every && (cfg.episodes == 0 || agent.episodes_done() % cfg.select_every != 0))
    offer(agent, problem, rewards);
  return log;
}

Evaluation evaluate(nn::QNetwork& net, const Problem& problem, const RewardConfig& rewards,
                    const EnvConfig& env) {
  const HourlyPrices prices = hourly_prices(problem.tariff);
  EnvState s = reset(problem.blocks.base_profile, problem.blocks.blocks, QueueOrder::FileOrder, 0,
                     env);
  Evaluation ev;
  while (!s.terminal) {
    const auto q = q_values(net, observe(s), env.max_height);
    StepResult r = step(s, static_cast<Action>(argmax(q)));
    if (r.report) ev.total_reward += compute_reward(*r.report, rewards, prices).total;
    s = std::move(r.next);
  }
  ev.placements = s.placements;
  ev.profile = s.grid.heights;
  ev.bill = bill(ev.profile, problem.tariff);
  ev.peak_kw = cells_to_kw(profile_peak(ev.profile));
  ev.failed = s.overflowed;
  return ev;
}

}  // namespace rldsm
