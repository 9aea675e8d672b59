#include "rldsm/app.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rldsm/nn/checkpoint.hpp"

namespace rldsm::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Usage problems that CLI11 cannot see (unknown ids, missing runs).
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("short write to " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("output directory " + dir.string() + " is not writable");
  const fs::path probe = dir / ".write-test";
  {
    std::ofstream t(probe);
    if (!t) throw Error("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

std::string csv_number(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string profile_csv(const Profile& before, const Profile& after) {
  std::ostringstream os;
  os << "hour,load_kw_before,load_kw_after\n";
  for (int h = 0; h < kHoursPerDay; ++h)
    os << h << ',' << csv_number(cells_to_kw(before[h]), 1) << ','
       << csv_number(cells_to_kw(after[h]), 1) << '\n';
  return os.str();
}

std::string schedule_csv(const Schedule& s) {
  std::ostringstream os;
  write_schedule_csv(os, s);
  return os.str();
}

Schedule schedule_from_evaluation(const Problem& p, const Evaluation& ev) {
  Schedule s = make_schedule(p.blocks.base_profile, p.blocks.blocks, ev.placements, p.tariff);
  return s;
}

OracleObjective oracle_objective_for(const std::string& rl_objective) {
  return rl_objective == "peak-cost" ? OracleObjective::PeakThenCost : OracleObjective::MinPeak;
}

// ------------------------------------------------------------- options

struct CommonOptions {
  std::string scenario = (default_data_dir() / "residential.json").string();
  std::string consumer = "all";
  std::string out;
};

struct TrainOptions {
  std::string objective = "peak";
  std::string spread = "var";
  std::string net = "deep";
  AgentConfig agent;
  unsigned jobs = 1;
  std::uint64_t progress = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool need_out) {
  cmd->add_option("--scenario", o.scenario, "Scenario JSON file")->check(CLI::ExistingFile);
  cmd->add_option("--consumer", o.consumer, "Consumer id, 'all' or 'aggregate'");
  auto* out = cmd->add_option("--out", o.out, "Output directory");
  if (need_out) out->required();
}

void add_train_options(CLI::App* cmd, TrainOptions& t) {
  cmd->add_option("--objective", t.objective, "Reward objective")
      ->check(CLI::IsMember({"peak", "peak-cost"}));
  cmd->add_option("--spread", t.spread, "Spread term")->check(CLI::IsMember({"var", "std"}));
  cmd->add_option("--episodes", t.agent.episodes, "Training episodes");
  cmd->add_option("--seed", t.agent.seed, "Random seed");
  cmd->add_option("--buffer-size", t.agent.buffer_capacity, "Replay capacity")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--net", t.net, "Network depth profile")
      ->check(CLI::IsMember({"deep", "shallow"}));
  cmd->add_option("--batch-size", t.agent.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  cmd->add_option("--gamma", t.agent.gamma, "Discount factor");
  cmd->add_option("--lr", t.agent.optimizer.learning_rate, "RMSProp learning rate");
  cmd->add_option("--eps-start", t.agent.exploration.eps_start, "Initial exploration rate");
  cmd->add_option("--eps-end", t.agent.exploration.eps_end, "Final exploration rate");
  cmd->add_option("--eps-decay", t.agent.exploration.eps_decay, "Exploration decay (steps)");
  cmd->add_option("--sync-steps", t.agent.target_sync_steps, "Target sync interval (steps)");
  cmd->add_option("--train-every", t.agent.train_every, "Steps between updates");
  cmd->add_option("--select-every", t.agent.select_every,
                  "Episodes between greedy policy selection rollouts (0 = off)");
  cmd->add_option("--checkpoint-every", t.agent.checkpoint_every,
                  "Episodes between checkpoints (0 = end only)");
  cmd->add_flag("--vanilla-dqn", [&t](std::int64_t) { t.agent.double_dqn = false; },
                "Max-target DQN instead of double DQN");
  cmd->add_option("--jobs", t.jobs, "Runs trained in parallel")->check(CLI::PositiveNumber);
  cmd->add_option("--progress", t.progress, "Print a log line every N episodes");
}

std::string run_label(const ConsumerScenario& c) { return c.consumer_id; }

// ----------------------------------------------------------------- train

json manifest_for(const CommonOptions& common, const std::string& consumer,
                  const TrainOptions& t, const RewardConfig& rc) {
  const auto& a = t.agent;
  const nn::NetConfig net = nn::net_profile(t.net);
  json m;
  m["kind"] = "train";
  m["scenario"] = fs::absolute(common.scenario).lexically_normal().string();
  m["consumer"] = consumer;
  m["objective"] = t.objective;
  m["spread"] = t.spread;
  m["reward"] = {{"alpha1", rc.alpha1}, {"alpha2", rc.alpha2}, {"alpha3", rc.alpha3},
                 {"alpha4", rc.alpha4}};
  m["agent"] = {{"episodes", a.episodes},
                {"seed", a.seed},
                {"gamma", a.gamma},
                {"batch_size", a.batch_size},
                {"buffer_size", a.buffer_capacity},
                {"target_sync_steps", a.target_sync_steps},
                {"train_every", a.train_every},
                {"double_dqn", a.double_dqn},
                {"eps_start", a.exploration.eps_start},
                {"eps_end", a.exploration.eps_end},
                {"eps_decay", a.exploration.eps_decay},
                {"learning_rate", a.optimizer.learning_rate},
                {"rmsprop_decay", a.optimizer.decay},
                {"rmsprop_eps", a.optimizer.epsilon},
                {"select_every", a.select_every},
                {"checkpoint_every", a.checkpoint_every}};
  m["net"] = {{"profile", t.net},
              {"conv_channels", net.conv_channels},
              {"kernel", net.kernel},
              {"stride", net.stride},
              {"padding", net.padding},
              {"fc_hidden", net.fc_hidden},
              {"input", {net.in_planes, net.in_rows, net.in_cols}}};
  m["env"] = {{"max_height", a.env.max_height}, {"lateral_move_cap", a.env.lateral_move_cap}};
  return m;
}

RewardConfig reward_config(const std::string& objective, const std::string& spread) {
  RewardConfig rc;
  rc.objective = parse_objective(objective);
  rc.spread = parse_spread_kind(spread);
  return rc;
}

json evaluation_json(const Schedule& s, const Evaluation& ev) {
  return {{"peak_kw", s.peak_kw},
          {"daily_cost_cents", s.daily_cost_cents},
          {"monthly_dollars", s.daily_cost_cents * kDaysPerMonth / 100.0},
          {"greedy_return", ev.total_reward},
          {"failed", ev.failed}};
}

void train_one(const CommonOptions& common, const TrainOptions& t, const ConsumerScenario& c,
               const Tariff& tariff, const fs::path& dir, std::ostream& out) {
  ensure_dir(dir);
  const RewardConfig rc = reward_config(t.objective, t.spread);
  AgentConfig cfg = t.agent;
  cfg.net = nn::net_profile(t.net);
  const Problem problem = make_problem(c, tariff);
  DqnAgent agent(cfg);

  std::ofstream log(dir / "training_log.csv", std::ios::binary | std::ios::trunc);
  if (!log) throw Error("cannot write " + (dir / "training_log.csv").string());
  log << kTrainingLogHeader << '\n';
  TrainHooks hooks;
  hooks.on_episode = [&](const TrainingLogRow& row) {
    log << format_log_row(row) << '\n';
    if (t.progress && row.episode % t.progress == 0) {
      std::ostringstream line;
      line << "[" << run_label(c) << "] " << format_log_row(row) << '\n';
      std::cerr << line.str();
    }
  };
  hooks.on_checkpoint = [&](const DqnAgent& a) {
    nn::save_checkpoint(dir / "checkpoint.bin", a.checkpoint());
  };
  const auto t0 = std::chrono::steady_clock::now();
  train(agent, problem, rc, hooks);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log.close();

  nn::save_checkpoint(dir / "checkpoint.bin", agent.checkpoint());
  nn::Checkpoint selected;
  selected.policy = agent.selected_policy();
  selected.steps_done = agent.steps_done();
  selected.episodes_done = agent.selected_episode();
  nn::save_checkpoint(dir / "policy.bin", selected);

  nn::QNetwork policy = agent.selected_policy();
  const Evaluation ev = evaluate(policy, problem, rc, cfg.env);
  const Schedule s = schedule_from_evaluation(problem, ev);
  write_file(dir / "schedule.csv", schedule_csv(s));

  json m = manifest_for(common, c.consumer_id, t, rc);
  m["result"] = evaluation_json(s, ev);
  m["result"]["episodes_done"] = agent.episodes_done();
  m["result"]["steps_done"] = agent.steps_done();
  m["result"]["updates"] = agent.updates();
  m["result"]["target_syncs"] = agent.sync_count();
  m["result"]["selected_episode"] = agent.selected_episode();
  m["wall_seconds"] = seconds;
  write_file(dir / "manifest.json", m.dump(2) + "\n");

  std::ostringstream line;
  line << "trained " << run_label(c) << ": peak " << csv_number(s.peak_kw, 1) << " kW, bill $"
       << format_dollars(s.daily_cost_cents * kDaysPerMonth / 100.0) << "/month"
       << (ev.failed ? " (overflowed)" : "") << " -> " << dir.string() << '\n';
  out << line.str();
}

void cmd_train(const CommonOptions& common, const TrainOptions& t, std::ostream& out) {
  const ScenarioFile file = load_scenario(common.scenario);
  const auto consumers = select_consumers(file, common.consumer);
  const fs::path root = common.out;
  ensure_dir(root);
  std::vector<std::string> errors(consumers.size());
  const long n = static_cast<long>(consumers.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(t.jobs) if (t.jobs > 1)
  for (long i = 0; i < n; ++i) {
    const auto& c = consumers[static_cast<std::size_t>(i)];
    try {
      train_one(common, t, c, file.tariff, root / run_label(c), out);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error(e);
}

// ---------------------------------------------------------------- oracle

void cmd_oracle(const CommonOptions& common, const std::string& objective, std::size_t beam,
                std::size_t limit, std::ostream& out) {
  const ScenarioFile file = load_scenario(common.scenario);
  const auto consumers = select_consumers(file, common.consumer);
  const OracleObjective obj = parse_oracle_objective(objective);
  OracleOptions opts;
  opts.beam_width = beam;
  opts.exhaustive_limit = limit;
  for (const auto& c : consumers) {
    const fs::path dir = fs::path(common.out) / run_label(c);
    ensure_dir(dir);
    const Problem p = make_problem(c, file.tariff);
    const auto t0 = std::chrono::steady_clock::now();
    const Schedule s = solve(p.blocks.base_profile, p.blocks.blocks, obj, p.tariff, opts);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file(dir / "schedule.csv", schedule_csv(s));
    json m;
    m["kind"] = "oracle";
    m["scenario"] = fs::absolute(common.scenario).lexically_normal().string();
    m["consumer"] = c.consumer_id;
    m["objective"] = to_string(obj);
    m["quality"] = to_string(*s.quality);
    m["result"] = {{"peak_kw", s.peak_kw},
                   {"daily_cost_cents", s.daily_cost_cents},
                   {"monthly_dollars", s.daily_cost_cents * kDaysPerMonth / 100.0}};
    m["wall_seconds"] = seconds;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
    out << "oracle " << c.consumer_id << " (" << to_string(obj) << ", " << to_string(*s.quality)
        << "): peak " << csv_number(s.peak_kw, 1) << " kW, bill $"
        << format_dollars(s.daily_cost_cents * kDaysPerMonth / 100.0) << "/month\n";
  }
}

// ------------------------------------------------------- run directories

std::vector<fs::path> expand_runs(const std::vector<std::string>& args) {
  std::vector<fs::path> runs;
  for (const auto& a : args) {
    const fs::path p(a);
    if (fs::exists(p / "manifest.json")) {
      runs.push_back(p);
      continue;
    }
    if (!fs::is_directory(p)) throw UsageError("missing run: " + a + " does not exist");
    std::vector<fs::path> children;
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) children.push_back(e.path());
    if (children.empty()) throw UsageError("missing run: no runs found under " + a);
    std::sort(children.begin(), children.end());
    runs.insert(runs.end(), children.begin(), children.end());
  }
  return runs;
}

void cmd_evaluate(const std::vector<std::string>& run_args, std::ostream& out) {
  for (const auto& dir : expand_runs(run_args)) {
    const RunInfo run = load_run(dir);
    if (run.kind != "train") throw UsageError(dir.string() + " is not a training run");
    auto ckpt = nn::load_checkpoint(dir / "policy.bin");
    const Evaluation ev = evaluate(ckpt.policy, run.problem, run.rewards, run.env);
    const Schedule s = schedule_from_evaluation(run.problem, ev);
    const Verification v = verify(s, run.problem.blocks.base_profile, run.problem.blocks.blocks,
                                  run.problem.tariff, run.env.max_height);
    write_file(dir / "schedule.csv", schedule_csv(s));
    json e = evaluation_json(s, ev);
    e["verified"] = v.ok;
    e["problems"] = v.problems;
    write_file(dir / "evaluation.json", e.dump(2) + "\n");
    out << "evaluated " << run.consumer << ": peak " << csv_number(s.peak_kw, 1) << " kW, bill $"
        << format_dollars(s.daily_cost_cents * kDaysPerMonth / 100.0) << "/month"
        << (v.ok ? "" : " (verification failed)") << '\n';
  }
}

void cmd_export(const std::vector<std::string>& run_args, const std::string& placement_path,
                std::ostream& out) {
  const DefaultPlacement placement = load_placement(placement_path);
  for (const auto& dir : expand_runs(run_args)) {
    const RunInfo run = load_run(dir);
    const Schedule before = before_schedule(run.consumer_scenario, run.problem.tariff, placement);
    const Schedule after = run_schedule(run);
    write_file(dir / "profile.csv", profile_csv(before.resulting_profile, after.resulting_profile));
    out << "wrote " << (dir / "profile.csv").string() << '\n';
  }
}

void cmd_report(const std::vector<std::string>& run_args, const std::string& placement_path,
                const std::string& out_dir, std::ostream& out) {
  std::vector<RunInfo> runs;
  for (const auto& dir : expand_runs(run_args)) runs.push_back(load_run(dir));
  const auto rows = build_report(runs, load_placement(placement_path));
  std::ostringstream csv, text;
  write_report_csv(csv, rows);
  write_report_text(text, rows);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_file(fs::path(out_dir) / "report.csv", csv.str());
    write_file(fs::path(out_dir) / "report.txt", text.str());
  }
  out << text.str();
}

// ---------------------------------------------------------------- ablate

void cmd_ablate(const std::string& axis, const CommonOptions& common, const TrainOptions& base,
                const std::vector<std::size_t>& sizes, const std::string& placement_path,
                std::ostream& out) {
  std::vector<std::pair<std::string, TrainOptions>> variants;
  if (axis == "net-depth") {
    for (const char* depth : {"shallow", "deep"}) {
      TrainOptions t = base;
      t.net = depth;
      variants.emplace_back(depth, t);
    }
  } else {
    for (auto size : sizes) {
      TrainOptions t = base;
      t.agent.buffer_capacity = size;
      variants.emplace_back(std::to_string(size), t);
    }
  }
  const fs::path root = fs::path(common.out) / axis;
  std::vector<std::string> dirs;
  for (const auto& [name, t] : variants) {
    CommonOptions c = common;
    c.out = (root / name).string();
    cmd_train(c, t, out);
    dirs.push_back(c.out);
  }
  const DefaultPlacement placement = load_placement(placement_path);
  std::ostringstream csv;
  csv << "variant,consumer,before_bill,after_bill,savings,before_peak_kw,after_peak_kw,failed\n";
  for (std::size_t i = 0; i < variants.size(); ++i)
    for (const auto& dir : expand_runs({dirs[i]})) {
      const RunInfo run = load_run(dir);
      const Schedule before = before_schedule(run.consumer_scenario, run.problem.tariff, placement);
      auto ckpt = nn::load_checkpoint(dir / "policy.bin");
      const Evaluation ev = evaluate(ckpt.policy, run.problem, run.rewards, run.env);
      const Schedule after = schedule_from_evaluation(run.problem, ev);
      const double b = before.daily_cost_cents * kDaysPerMonth / 100.0;
      const double a = after.daily_cost_cents * kDaysPerMonth / 100.0;
      csv << variants[i].first << ',' << run.consumer << ',' << csv_number(b) << ','
          << csv_number(a) << ',' << csv_number(b - a) << ',' << csv_number(before.peak_kw, 1)
          << ',' << csv_number(after.peak_kw, 1) << ',' << (ev.failed ? 1 : 0) << '\n';
    }
  write_file(root / "ablation.csv", csv.str());
  out << csv.str();
}

void print_error(std::ostream& err, const std::string& type, const std::string& message,
                 const std::string& field = {}) {
  json e = {{"type", type}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  err << json{{"error", e}}.dump() << std::endl;
}

}  // namespace

// ------------------------------------------------------------ public API

std::vector<ConsumerScenario> select_consumers(const ScenarioFile& file,
                                               const std::string& selection) {
  if (file.consumers.empty()) throw UsageError("scenario file has no consumers");
  if (selection == "all") return file.consumers;
  if (selection == "aggregate") {
    ConsumerScenario agg = aggregate(file.consumers);
    if (file.consumers.size() > 1) agg.consumer_id = "aggregate";
    return {agg};
  }
  try {
    return {file.consumer(selection)};
  } catch (const ScenarioError&) {
    throw UsageError("unknown consumer '" + selection + "'");
  }
}

RunInfo load_run(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw UsageError("missing run: " + mpath.string() + " not found");
  json m;
  try {
    m = json::parse(read_file(mpath));
  } catch (const json::exception& e) {
    throw Error("bad manifest " + mpath.string() + ": " + e.what());
  }
  RunInfo r;
  r.dir = dir;
  try {
    r.kind = m.at("kind").get<std::string>();
    r.scenario = m.at("scenario").get<std::string>();
    r.consumer = m.at("consumer").get<std::string>();
    r.objective = m.at("objective").get<std::string>();
    if (r.kind == "train") {
      r.rewards = reward_config(r.objective, m.at("spread").get<std::string>());
      r.rewards.alpha1 = m.at("reward").at("alpha1").get<double>();
      r.rewards.alpha2 = m.at("reward").at("alpha2").get<double>();
      r.rewards.alpha3 = m.at("reward").at("alpha3").get<double>();
      r.rewards.alpha4 = m.at("reward").at("alpha4").get<double>();
      r.env.max_height = m.at("env").at("max_height").get<int>();
      r.env.lateral_move_cap = m.at("env").at("lateral_move_cap").get<int>();
    }
  } catch (const json::exception& e) {
    throw Error("bad manifest " + mpath.string() + ": " + e.what());
  }
  const ScenarioFile file = load_scenario(r.scenario);
  const std::string selection = r.consumer == "aggregate" ? "aggregate" : r.consumer;
  r.consumer_scenario = select_consumers(file, selection).at(0);
  r.problem = make_problem(r.consumer_scenario, file.tariff);
  return r;
}

Schedule run_schedule(const RunInfo& run) {
  const auto& p = run.problem;
  if (run.kind == "train") {
    auto ckpt = nn::load_checkpoint(run.dir / "policy.bin");
    const Evaluation ev = evaluate(ckpt.policy, p, run.rewards, run.env);
    return make_schedule(p.blocks.base_profile, p.blocks.blocks, ev.placements, p.tariff);
  }
  std::ifstream in(run.dir / "schedule.csv");
  if (!in) throw UsageError("missing run: " + (run.dir / "schedule.csv").string() + " not found");
  const Schedule stored = read_schedule_csv(in);
  Schedule s = make_schedule(p.blocks.base_profile, p.blocks.blocks, stored.assignments, p.tariff);
  s.quality = stored.quality;
  return s;
}

Schedule before_schedule(const ConsumerScenario& consumer, const Tariff& tariff,
                         const DefaultPlacement& placement) {
  const BlockSet bs = to_blocks(consumer);
  return make_schedule(bs.base_profile, bs.blocks, placement_for(placement, consumer), tariff);
}

std::vector<ReportRow> build_report(const std::vector<RunInfo>& runs,
                                    const DefaultPlacement& placement) {
  std::vector<ReportRow> rows;
  ReportRow all;
  all.consumer = "All";
  for (const auto& run : runs) {
    if (run.kind != "train") throw UsageError(run.dir.string() + " is not a training run");
    const auto& p = run.problem;
    const Schedule rl = run_schedule(run);

    // The stored schedule must match what the stored policy produces.
    std::ifstream in(run.dir / "schedule.csv");
    if (!in) throw UsageError("missing run: " + (run.dir / "schedule.csv").string() + " not found");
    if (read_schedule_csv(in).assignments != rl.assignments)
      throw Error("schedule.csv in " + run.dir.string() + " does not match policy.bin");

    const auto& blocks = p.blocks.blocks;
    ReportRow row;
    row.consumer = run.consumer;
    row.rl_failed = blocks.size() != rl.assignments.size() ||
                    profile_peak(rl.resulting_profile) > run.env.max_height;
    if (!row.rl_failed) {
      const Verification v =
          verify(rl, p.blocks.base_profile, blocks, p.tariff, run.env.max_height);
      if (!v.ok) throw Error("schedule of " + run.dir.string() + " fails verification");
    }
    const Schedule before = before_schedule(run.consumer_scenario, p.tariff, placement);
    const Schedule oracle =
        solve(p.blocks.base_profile, blocks, oracle_objective_for(run.objective), p.tariff);
    if (!verify(oracle, p.blocks.base_profile, blocks, p.tariff).ok)
      throw Error("oracle schedule fails verification");
    if (!verify(before, p.blocks.base_profile, blocks, p.tariff, std::numeric_limits<int>::max()).ok)
      throw Error("default placement fails verification");

    auto dollars = [](const Schedule& s) { return s.daily_cost_cents * kDaysPerMonth / 100.0; };
    row.before_bill = dollars(before);
    row.oracle_bill = dollars(oracle);
    row.rl_bill = dollars(rl);
    row.before_peak_kw = before.peak_kw;
    row.oracle_peak_kw = oracle.peak_kw;
    row.rl_peak_kw = rl.peak_kw;
    row.oracle_heuristic = oracle.quality == SolverQuality::Heuristic;
    rows.push_back(row);

    all.before_bill += row.before_bill;
    all.oracle_bill += row.oracle_bill;
    all.rl_bill += row.rl_bill;
    all.before_peak_kw += row.before_peak_kw;
    all.oracle_peak_kw += row.oracle_peak_kw;
    all.rl_peak_kw += row.rl_peak_kw;
    all.oracle_heuristic = all.oracle_heuristic || row.oracle_heuristic;
    all.rl_failed = all.rl_failed || row.rl_failed;
  }
  rows.push_back(all);
  return rows;
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "consumer,before_bill,oracle_bill,rl_bill,oracle_savings,rl_savings,before_peak_kw,"
         "oracle_peak_kw,rl_peak_kw,oracle_quality,rl_failed\n";
  for (const auto& r : rows)
    out << r.consumer << ',' << csv_number(r.before_bill) << ',' << csv_number(r.oracle_bill)
        << ',' << csv_number(r.rl_bill) << ',' << csv_number(r.before_bill - r.oracle_bill) << ','
        << csv_number(r.before_bill - r.rl_bill) << ',' << csv_number(r.before_peak_kw, 1) << ','
        << csv_number(r.oracle_peak_kw, 1) << ',' << csv_number(r.rl_peak_kw, 1) << ','
        << (r.oracle_heuristic ? "heuristic" : "exact") << ',' << (r.rl_failed ? 1 : 0) << '\n';
}

void write_report_text(std::ostream& out, const std::vector<ReportRow>& rows) {
  const char* head[] = {"Consumer", "Before $", "Oracle $", "RL $",      "Oracle save",
                        "RL save",  "Before kW", "Oracle kW", "RL kW"};
  std::vector<std::vector<std::string>> cells;
  bool heuristic = false, failed = false;
  for (const auto& r : rows) {
    std::string oracle_mark = r.oracle_heuristic ? "*" : "";
    std::string rl_mark = r.rl_failed ? "!" : "";
    heuristic = heuristic || r.oracle_heuristic;
    failed = failed || r.rl_failed;
    cells.push_back({r.consumer, csv_number(r.before_bill), csv_number(r.oracle_bill) + oracle_mark,
                     csv_number(r.rl_bill) + rl_mark, csv_number(r.before_bill - r.oracle_bill),
                     csv_number(r.before_bill - r.rl_bill), csv_number(r.before_peak_kw, 1),
                     csv_number(r.oracle_peak_kw, 1) + oracle_mark, csv_number(r.rl_peak_kw, 1)});
  }
  std::vector<std::size_t> width(std::size(head));
  for (std::size_t i = 0; i < width.size(); ++i) {
    width[i] = std::string(head[i]).size();
    for (const auto& row : cells) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "  ";
      if (i == 0)
        out << std::left << std::setw(static_cast<int>(width[i])) << row[i];
      else
        out << std::right << std::setw(static_cast<int>(width[i])) << row[i];
    }
    out << '\n';
  };
  line(std::vector<std::string>(std::begin(head), std::end(head)));
  for (const auto& row : cells) line(row);
  out << "Bills in $/month, peaks in kW.";
  if (heuristic) out << " * oracle value is a heuristic bound, not an optimum.";
  if (failed) out << " ! greedy rollout overflowed the grid.";
  out << '\n';
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Residential load scheduling with deep Q-learning"};
  cli.require_subcommand(1);
  cli.set_help_all_flag("--help-all", "Show help for every subcommand");

  CommonOptions common;
  TrainOptions topts;
  std::string placement = (default_data_dir() / "default_placement.json").string();
  std::vector<std::string> runs;
  std::string oracle_objective = "peak";
  std::size_t beam_width = OracleOptions{}.beam_width;
  std::size_t exhaustive_limit = OracleOptions{}.exhaustive_limit;
  std::string axis;
  std::vector<std::size_t> sizes{3000, 10000, 30000, 50000};

  auto* train_cmd = cli.add_subcommand("train", "Train agents and write run directories");
  add_common(train_cmd, common, true);
  add_train_options(train_cmd, topts);

  auto* eval_cmd = cli.add_subcommand("evaluate", "Greedy rollout of trained runs");
  eval_cmd->add_option("runs", runs, "Run directories")->required();

  auto* oracle_cmd = cli.add_subcommand("oracle", "Exact or beam-search baseline schedules");
  add_common(oracle_cmd, common, true);
  oracle_cmd->add_option("--objective", oracle_objective, "peak, cost or peak-cost")
      ->check(CLI::IsMember({"peak", "cost", "peak-cost"}));
  oracle_cmd->add_option("--beam-width", beam_width, "Beam width for large instances");
  oracle_cmd->add_option("--exhaustive-limit", exhaustive_limit,
                         "Largest block count solved exactly");

  auto* report_cmd = cli.add_subcommand("report", "Before / oracle / RL comparison tables");
  report_cmd->add_option("runs", runs, "Run directories")->required();
  report_cmd->add_option("--placement", placement, "Default placement JSON")
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--out", common.out, "Directory for report.csv and report.txt");

  auto* export_cmd = cli.add_subcommand("export-profiles", "Hourly before/after load CSVs");
  export_cmd->add_option("runs", runs, "Run directories")->required();
  export_cmd->add_option("--placement", placement, "Default placement JSON")
      ->check(CLI::ExistingFile);

  auto* ablate_cmd = cli.add_subcommand("ablate", "Network-depth or buffer-size sweeps");
  ablate_cmd->add_option("axis", axis, "net-depth or buffer-size")
      ->required()
      ->check(CLI::IsMember({"net-depth", "buffer-size"}));
  add_common(ablate_cmd, common, true);
  add_train_options(ablate_cmd, topts);
  ablate_cmd->add_option("--sizes", sizes, "Buffer sizes to sweep")->delimiter(',');
  ablate_cmd->add_option("--placement", placement, "Default placement JSON")
      ->check(CLI::ExistingFile);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << cli.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << cli.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "UsageError", e.what());
    return 2;
  }

  try {
    if (*train_cmd) cmd_train(common, topts, out);
    if (*eval_cmd) cmd_evaluate(runs, out);
    if (*oracle_cmd) cmd_oracle(common, oracle_objective, beam_width, exhaustive_limit, out);
    if (*report_cmd) cmd_report(runs, placement, common.out, out);
    if (*export_cmd) cmd_export(runs, placement, out);
    if (*ablate_cmd) cmd_ablate(axis, common, topts, sizes, placement, out);
  } catch (const UsageError& e) {
    print_error(err, "UsageError", e.what());
    return 2;
  } catch (const ScenarioError& e) {
    print_error(err, "ScenarioError", e.what(), e.field());
    return 1;
  } catch (const InfeasibleError& e) {
    print_error(err, "InfeasibleError", e.what());
    return 1;
  } catch (const nn::CheckpointError& e) {
    print_error(err, "CheckpointError", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "Error", e.what());
    return 1;
  }
  return 0;
}

}  // namespace rldsm::app
