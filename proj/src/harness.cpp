#include "cer/harness.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace cer {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string format_value(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

ProbeRequest to_probe_request(const ProbeSpec& spec, const GridConfig& grid) {
  if (spec.cell.x < 0 || spec.cell.x >= grid.size || spec.cell.y < 0 || spec.cell.y >= grid.size)
    throw std::invalid_argument("probe '" + spec.name + "': cell outside grid");
  if (spec.action_a < 0 || spec.action_a >= kNumActions || spec.action_b < 0 ||
      spec.action_b >= kNumActions)
    throw std::invalid_argument("probe '" + spec.name + "': bad action");
  GridState s;
  s.x = spec.cell.x;
  s.y = spec.cell.y;
  s.v1 = spec.v1;
  s.v2 = spec.v2;
  return {spec.name, encode(s, grid), spec.action_a, spec.action_b};
}

std::vector<ProbeSpec> default_probes(const GridConfig& grid) {
  if (grid.waypoints.empty()) return {};
  const Cell w1 = grid.waypoints[0];
  std::vector<ProbeSpec> probes;
  probes.push_back({"below_w1",
                    {w1.x, w1.y - 1},
                    /*v1=*/false,
                    /*v2=*/false,
                    static_cast<int>(Action::kUp),
                    static_cast<int>(Action::kRight)});
  probes.push_back({"right_of_w1",
                    {w1.x + 1, w1.y},
                    /*v1=*/true,
                    /*v2=*/false,
                    static_cast<int>(Action::kRight),
                    static_cast<int>(Action::kDown)});
  return probes;
}

ExperimentConfig default_experiment(int id) {
  ExperimentConfig cfg;
  cfg.id = id;
  cfg.out_dir = "out/exp" + std::to_string(id);

  GridConfig& g = cfg.grid;
  AgentConfig& a = cfg.agent;
  switch (id) {
    case 1:
      g.size = 8;
      g.goal = {7, 7};
      g.waypoints = {{2, 5}};
      g.timeout = 100;
      g.terminal_rewards = {{VisitPattern::kNone, 1.0}, {VisitPattern::kOnlyW1, 10.0}};
      a.epsilon_decay = 0.995;
      a.episodes = 2000;
      break;
    case 2:
      g.size = 8;
      g.goal = {7, 7};
      g.waypoints = {{0, 7}, {7, 0}};
      g.timeout = 160;
      g.terminal_rewards = {{VisitPattern::kNone, 1.0},
                            {VisitPattern::kOnlyW1, 2.0},
                            {VisitPattern::kOnlyW2, 2.0},
                            {VisitPattern::kBoth, 10.0}};
      a.epsilon_decay = 0.995;
      a.episodes = 2000;
      break;
    case 3:
    case 5:
      g.size = 12;
      g.goal = {11, 11};
      g.waypoints = {{3, 8}};
      g.timeout = 240;
      g.terminal_rewards = {{VisitPattern::kNone, 1.0}, {VisitPattern::kOnlyW1, 10.0}};
      a.epsilon_decay = 0.999;
      a.episodes = 6000;
      if (id == 5) cfg.probes = default_probes(g);
      break;
    case 4:
      g.size = 8;
      g.goal = {7, 7};
      g.waypoints = {{0, 7}, {7, 0}};
      g.timeout = 160;
      g.terminal_rewards = {{VisitPattern::kNone, 1.0},
                            {VisitPattern::kOnlyW1, -1.0},
                            {VisitPattern::kOnlyW2, -1.0},
                            {VisitPattern::kBoth, 10.0}};
      a.epsilon_decay = 0.999;
      a.episodes = 6000;
      break;
    default:
      throw std::invalid_argument("experiment id must be 1..5");
  }
  return cfg;
}

namespace {

void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                 const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (key == k) known = true;
    if (!known) throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
  }
}

Cell parse_cell(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument("config: " + where + " must be [x, y]");
  return {j[0].get<int>(), j[1].get<int>()};
}

void apply_grid(GridConfig& g, const json& j) {
  expect_keys(j, {"size", "start", "goal", "waypoints", "step_reward", "timeout",
                  "terminal_rewards"},
              "grid");
  if (j.contains("size")) g.size = j["size"].get<int>();
  if (j.contains("start")) g.start = parse_cell(j["start"], "grid.start");
  if (j.contains("goal")) g.goal = parse_cell(j["goal"], "grid.goal");
  if (j.contains("waypoints")) {
    g.waypoints.clear();
    for (const auto& w : j["waypoints"]) g.waypoints.push_back(parse_cell(w, "grid.waypoints"));
  }
  if (j.contains("step_reward")) g.step_reward = j["step_reward"].get<double>();
  if (j.contains("timeout")) g.timeout = j["timeout"].get<int>();
  if (j.contains("terminal_rewards")) {
    g.terminal_rewards.clear();
    for (const auto& [key, value] : j["terminal_rewards"].items())
      g.terminal_rewards[parse_visit_pattern(key)] = value.get<double>();
  }
}

void apply_agent(AgentConfig& a, const json& j) {
  expect_keys(j,
              {"gamma", "epsilon_initial", "epsilon_decay", "epsilon_floor", "delta_threshold",
               "psi", "kappa", "learning_rate", "episodes", "warmup_episodes", "fit_steps",
               "mem_capacity", "cer_capacity", "contrastive_tol", "undiscounted_terminal"},
              "agent");
  if (j.contains("gamma")) a.gamma = j["gamma"].get<double>();
  if (j.contains("epsilon_initial")) a.epsilon_initial = j["epsilon_initial"].get<double>();
  if (j.contains("epsilon_decay")) a.epsilon_decay = j["epsilon_decay"].get<double>();
  if (j.contains("epsilon_floor")) a.epsilon_floor = j["epsilon_floor"].get<double>();
  if (j.contains("delta_threshold")) a.delta_threshold = j["delta_threshold"].get<double>();
  if (j.contains("psi")) a.psi = j["psi"].get<double>();
  if (j.contains("kappa")) a.kappa = j["kappa"].get<size_t>();
  if (j.contains("learning_rate")) a.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("episodes")) a.episodes = j["episodes"].get<int>();
  if (j.contains("warmup_episodes")) a.warmup_episodes = j["warmup_episodes"].get<int>();
  if (j.contains("fit_steps")) a.fit_steps = j["fit_steps"].get<int>();
  if (j.contains("mem_capacity")) a.mem_capacity = j["mem_capacity"].get<size_t>();
  if (j.contains("cer_capacity")) a.cer_capacity = j["cer_capacity"].get<size_t>();
  if (j.contains("contrastive_tol")) a.contrastive_tol = j["contrastive_tol"].get<double>();
  if (j.contains("undiscounted_terminal"))
    a.undiscounted_terminal = j["undiscounted_terminal"].get<bool>();
}

void apply_per(PerParams& p, const json& j) {
  expect_keys(j, {"alpha", "beta_start", "beta_end", "priority_floor"}, "per");
  if (j.contains("alpha")) p.alpha = j["alpha"].get<double>();
  if (j.contains("beta_start")) p.beta_start = j["beta_start"].get<double>();
  if (j.contains("beta_end")) p.beta_end = j["beta_end"].get<double>();
  if (j.contains("priority_floor")) p.priority_floor = j["priority_floor"].get<double>();
}

std::vector<ProbeSpec> parse_probes(const json& j) {
  std::vector<ProbeSpec> probes;
  for (const auto& pj : j) {
    expect_keys(pj, {"name", "cell", "v1", "v2", "actions"}, "probes");
    ProbeSpec p;
    p.name = pj.at("name").get<std::string>();
    p.cell = parse_cell(pj.at("cell"), "probe cell");
    if (pj.contains("v1")) p.v1 = pj["v1"].get<bool>();
    if (pj.contains("v2")) p.v2 = pj["v2"].get<bool>();
    const auto& actions = pj.at("actions");
    if (!actions.is_array() || actions.size() != 2)
      throw std::invalid_argument("config: probe actions must name two actions");
    p.action_a = static_cast<int>(parse_action(actions[0].get<std::string>()));
    p.action_b = static_cast<int>(parse_action(actions[1].get<std::string>()));
    probes.push_back(std::move(p));
  }
  return probes;
}

}  // namespace

void apply_overrides(ExperimentConfig& config, const json& overrides) {
  expect_keys(overrides,
              {"experiment", "grid", "agent", "per", "algorithms", "seeds", "episodes",
               "out_dir", "jobs", "dump_cer", "probes"},
              "top level");
  if (overrides.contains("experiment") && overrides["experiment"].get<int>() != config.id)
    throw std::invalid_argument("config: experiment id does not match the requested experiment");

  const bool grid_changed = overrides.contains("grid");
  if (grid_changed) apply_grid(config.grid, overrides["grid"]);
  if (overrides.contains("agent")) apply_agent(config.agent, overrides["agent"]);
  if (overrides.contains("per")) apply_per(config.agent.per, overrides["per"]);
  if (overrides.contains("episodes")) config.agent.episodes = overrides["episodes"].get<int>();
  if (overrides.contains("algorithms")) {
    config.algorithms.clear();
    for (const auto& a : overrides["algorithms"])
      config.algorithms.push_back(parse_algorithm(a.get<std::string>()));
  }
  if (overrides.contains("seeds")) {
    config.seeds.clear();
    for (const auto& s : overrides["seeds"]) config.seeds.push_back(s.get<uint64_t>());
  }
  if (overrides.contains("out_dir")) config.out_dir = overrides["out_dir"].get<std::string>();
  if (overrides.contains("jobs")) config.jobs = overrides["jobs"].get<int>();
  if (overrides.contains("dump_cer")) config.dump_cer = overrides["dump_cer"].get<bool>();
  if (overrides.contains("probes")) {
    config.probes = parse_probes(overrides["probes"]);
  } else if (grid_changed && config.id == 5) {
    config.probes = default_probes(config.grid);
  }
}

void validate(const ExperimentConfig& config) {
  if (config.id < 1 || config.id > 5) throw std::invalid_argument("experiment id must be 1..5");
  validate(config.grid);
  validate(config.agent);
  if (config.algorithms.empty()) throw std::invalid_argument("no algorithms selected");
  if (config.seeds.empty()) throw std::invalid_argument("no seeds selected");
  for (const ProbeSpec& p : config.probes) to_probe_request(p, config.grid);
  if (config.jobs < 0) throw std::invalid_argument("jobs must be >= 0");
}

bool ExperimentResults::all_ok() const {
  for (const RunRecord& r : runs)
    if (!r.ok) return false;
  return true;
}

namespace {

std::string run_file_name(Algorithm alg, uint64_t seed) {
  return to_string(alg) + "_seed" + std::to_string(seed) + ".csv";
}

void write_run_csv(const fs::path& path, const RunMetrics& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");

  out << "episode,return,smoothed_return,loss,epsilon,cer_size";
  for (const auto& p : m.probes) {
    out << "," << p.name << "_" << to_string(static_cast<Action>(p.action_a));
    out << "," << p.name << "_" << to_string(static_cast<Action>(p.action_b));
  }
  out << "\n";

  const std::vector<double> smoothed = smooth(m.returns, kSmoothWindow);
  for (size_t i = 0; i < m.episodes(); ++i) {
    out << i << "," << format_value(m.returns[i]) << "," << format_value(smoothed[i]) << ","
        << format_value(m.losses[i]) << "," << format_value(m.epsilons[i]) << ","
        << m.cer_sizes[i];
    for (const auto& p : m.probes)
      out << "," << format_value(p.a[i]) << "," << format_value(p.b[i]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_aggregate_csv(const fs::path& path, const Band& band) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "episode,mean,band\n";
  for (size_t i = 0; i < band.mean.size(); ++i)
    out << i << "," << format_value(band.mean[i]) << "," << format_value(band.band[i]) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ordered_json grid_to_json(const GridConfig& g) {
  ordered_json j;
  j["size"] = g.size;
  j["start"] = {g.start.x, g.start.y};
  j["goal"] = {g.goal.x, g.goal.y};
  auto waypoints = ordered_json::array();
  for (const Cell& w : g.waypoints) waypoints.push_back({w.x, w.y});
  j["waypoints"] = waypoints;
  j["step_reward"] = g.step_reward;
  j["timeout"] = g.timeout;
  ordered_json rewards;
  for (const auto& [pattern, value] : g.terminal_rewards) rewards[to_string(pattern)] = value;
  j["terminal_rewards"] = rewards;
  return j;
}

ordered_json agent_to_json(const AgentConfig& a) {
  ordered_json j;
  j["gamma"] = a.gamma;
  j["epsilon_initial"] = a.epsilon_initial;
  j["epsilon_decay"] = a.epsilon_decay;
  j["epsilon_floor"] = a.epsilon_floor;
  j["delta_threshold"] = a.delta_threshold;
  j["psi"] = a.psi;
  j["kappa"] = a.kappa;
  j["learning_rate"] = a.learning_rate;
  j["episodes"] = a.episodes;
  j["warmup_episodes"] = a.warmup_episodes;
  j["fit_steps"] = a.fit_steps;
  j["mem_capacity"] = a.mem_capacity;
  j["cer_capacity"] = a.cer_capacity;
  j["contrastive_tol"] = a.contrastive_tol;
  j["undiscounted_terminal"] = a.undiscounted_terminal;
  return j;
}

void write_manifest(const fs::path& path, const ExperimentConfig& cfg,
                    const std::vector<RunRecord>& runs) {
  ordered_json j;
  j["schema"] = "cer-lab-manifest-v1";
  j["experiment"] = cfg.id;
  j["grid"] = grid_to_json(cfg.grid);
  j["agent"] = agent_to_json(cfg.agent);
  ordered_json per;
  per["alpha"] = cfg.agent.per.alpha;
  per["beta_start"] = cfg.agent.per.beta_start;
  per["beta_end"] = cfg.agent.per.beta_end;
  per["priority_floor"] = cfg.agent.per.priority_floor;
  j["per"] = per;

  auto algorithms = ordered_json::array();
  for (Algorithm a : cfg.algorithms) algorithms.push_back(to_string(a));
  j["algorithms"] = algorithms;
  j["seeds"] = cfg.seeds;
  j["jobs"] = cfg.jobs;

  ordered_json oracle;
  oracle["optimal_return"] = optimal_return(cfg.grid);
  ordered_json lengths;
  for (const auto& [pattern, steps] : shortest_path_lengths(cfg.grid))
    lengths[to_string(pattern)] = steps;
  oracle["shortest_path_lengths"] = lengths;
  j["oracle"] = oracle;

  auto probes = ordered_json::array();
  for (const ProbeSpec& p : cfg.probes) {
    ordered_json pj;
    pj["name"] = p.name;
    pj["cell"] = {p.cell.x, p.cell.y};
    pj["v1"] = p.v1;
    pj["v2"] = p.v2;
    pj["actions"] = {to_string(static_cast<Action>(p.action_a)),
                     to_string(static_cast<Action>(p.action_b))};
    probes.push_back(pj);
  }
  j["probes"] = probes;

  ordered_json schema;
  schema["run"] = "run-v1: episode,return,smoothed_return,loss,epsilon,cer_size[,probe columns]";
  schema["aggregate"] = "agg-v1: episode,mean,band";
  j["csv_schema"] = schema;
  j["smooth_window"] = kSmoothWindow;
  j["band_scale"] = kBandScale;

  auto run_list = ordered_json::array();
  for (const RunRecord& r : runs) {
    ordered_json rj;
    rj["algorithm"] = to_string(r.algorithm);
    rj["seed"] = r.seed;
    rj["status"] = r.ok ? "ok" : "failed";
    if (r.ok) {
      rj["file"] = r.file;
      rj["wall_seconds"] = r.metrics.wall_seconds;
      rj["final_greedy_return"] = r.metrics.final_greedy_return;
      rj["final_greedy_outcome"] = to_string(r.metrics.final_greedy_outcome);
      rj["final_greedy_visited_w1"] = r.metrics.final_greedy_visited_w1;
      rj["final_greedy_visited_w2"] = r.metrics.final_greedy_visited_w2;
    } else {
      rj["error"] = r.error;
    }
    run_list.push_back(rj);
  }
  j["runs"] = run_list;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& config) {
  validate(config);
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);

  std::vector<ProbeRequest> probe_requests;
  for (const ProbeSpec& p : config.probes)
    probe_requests.push_back(to_probe_request(p, config.grid));

  ExperimentResults results;
  results.config = config;
  for (Algorithm alg : config.algorithms)
    for (uint64_t seed : config.seeds) {
      RunRecord r;
      r.algorithm = alg;
      r.seed = seed;
      r.file = run_file_name(alg, seed);
      results.runs.push_back(std::move(r));
    }

  unsigned jobs = config.jobs > 0 ? static_cast<unsigned>(config.jobs)
                                  : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, results.runs.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < results.runs.size(); i = next.fetch_add(1)) {
      RunRecord& r = results.runs[i];
      try {
        AgentConfig agent = config.agent;
        agent.algorithm = r.algorithm;
        agent.seed = r.seed;
        Trainer trainer(agent, config.grid);
        r.metrics = trainer.run(probe_requests);
        write_run_csv(out_dir / r.file, r.metrics);
        if (config.dump_cer &&
            (r.algorithm == Algorithm::kCer || r.algorithm == Algorithm::kCerNoContrast)) {
          std::ofstream dump(out_dir / (to_string(r.algorithm) + "_seed" +
                                        std::to_string(r.seed) + "_cer.csv"));
          trainer.cer().dump_csv(dump);
        }
        r.ok = true;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  // Aggregate over the seeds that finished, one file per algorithm.
  for (Algorithm alg : config.algorithms) {
    std::vector<std::vector<double>> smoothed;
    for (const RunRecord& r : results.runs)
      if (r.algorithm == alg && r.ok) smoothed.push_back(smooth(r.metrics.returns, kSmoothWindow));
    if (smoothed.empty()) continue;
    write_aggregate_csv(out_dir / ("agg_" + to_string(alg) + ".csv"),
                        band_across_seeds(smoothed, kBandScale));
  }

  write_manifest(out_dir / "manifest.json", config, results.runs);
  return results;
}

int emit_plotdata(const std::string& in_dir, const std::string& out_dir) {
  const fs::path in(in_dir);
  if (!fs::is_directory(in)) throw std::runtime_error("not a directory: " + in_dir);
  const fs::path out(out_dir.empty() ? in_dir : out_dir);
  fs::create_directories(out);

  int written = 0;
  for (const auto& entry : fs::directory_iterator(in)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("agg_", 0) != 0 || entry.path().extension() != ".csv") continue;

    std::ifstream csv(entry.path());
    if (!csv) throw std::runtime_error("cannot read " + entry.path().string());
    const fs::path dat_path = out / (entry.path().stem().string() + ".dat");
    std::ofstream dat(dat_path);
    if (!dat) throw std::runtime_error("cannot open " + dat_path.string() + " for writing");

    std::string line;
    std::getline(csv, line);  // header
    dat << "# " << entry.path().stem().string() << "\n";
    dat << "# episode mean band\n";
    while (std::getline(csv, line)) {
      for (char& c : line)
        if (c == ',') c = ' ';
      dat << line << "\n";
    }
    if (!dat) throw std::runtime_error("write failed: " + dat_path.string());
    ++written;
  }
  return written;
}

}  // namespace cer
