#include "diplomat/config.hpp"

#include <fstream>
#include <set>

namespace diplomat::config {

namespace {

using nlohmann::json;

// Tracks the dotted path for error messages and which keys were consumed.
class Section {
 public:
  Section(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  ~Section() = default;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void get(const std::string& key, T& target) {
    if (!has(key)) return;
    try {
      target = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  json sub(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : json::object();
  }

  // Call last: every key must have been claimed by get()/sub().
  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(path_ + "." + key + ": unknown field");
  }

  const std::string& path() const { return path_; }

 private:
  json j_;  // owned: sections are sliced out of temporaries
  std::string path_;
  std::set<std::string> seen_;
};

void parse_ppo(const json& j, training::PpoConfig& c) {
  Section s(j, "ppo");
  s.get("clip", c.clip);
  s.get("gamma", c.gamma);
  s.get("gae_lambda", c.gae_lambda);
  s.get("epochs", c.epochs);
  s.get("minibatch_size", c.minibatch_size);
  s.get("value_coef", c.value_coef);
  s.get("entropy_coef", c.entropy_coef);
  s.get("entropy_coef_final", c.entropy_coef_final);
  s.get("lr", c.lr);
  s.get("max_grad_norm", c.max_grad_norm);
  s.get("steps_per_iteration", c.steps_per_iteration);
  s.finish();
  try {
    c.validate();
  } catch (const training::TrainError& e) {
    throw ConfigError(std::string("ppo: ") + e.what());
  }
}

void parse_pool(const json& j, training::PoolConfig& c) {
  Section s(j, "pool");
  s.get("capacity", c.capacity);
  s.get("p_hist", c.p_hist);
  s.get("snapshot_every", c.snapshot_every);
  s.finish();
  if (c.capacity < 1) throw ConfigError("pool.capacity: must be positive");
  if (c.p_hist < 0 || c.p_hist > 1) throw ConfigError("pool.p_hist: must be in [0,1]");
}

void parse_net(const json& j, hcn::HcnConfig& c) {
  Section s(j, "net");
  s.get("d", c.d);
  s.get("heads", c.heads);
  s.get("d_msg", c.d_msg);
  s.finish();
  if (c.d < 1 || c.heads < 1 || c.d_msg < 1)
    throw ConfigError("net: d, heads, and d_msg must be positive");
  if (c.d % c.heads != 0) throw ConfigError("net.heads: must divide net.d");
}

void parse_rewards(const json& j, env::EnvConfig& c) {
  Section s(j, "rewards");
  {
    Section w(s.sub("weights"), "rewards.weights");
    w.get("outcome", c.reward_weights.outcome);
    w.get("process", c.reward_weights.process);
    w.get("social", c.reward_weights.social);
    w.get("intrinsic", c.reward_weights.intrinsic);
    w.finish();
  }
  {
    Section k(s.sub("shaping"), "rewards.shaping");
    k.get("time_cost", c.shaping.time_cost);
    k.get("improve_bonus", c.shaping.improve_bonus);
    k.get("illegal_penalty", c.shaping.illegal_penalty);
    k.get("social_scale", c.shaping.social_scale);
    k.get("reveal_eps", c.shaping.reveal_eps);
    k.get("accept_logit_k", c.shaping.accept_logit_k);
    k.get("argue_shift", c.shaping.argue_shift);
    k.get("convergence_time_mult", c.shaping.convergence_time_mult);
    k.finish();
  }
  {
    Section o(s.sub("objective"), "rewards.objective");
    o.get("alpha", c.objective_weights.alpha);
    o.get("beta", c.objective_weights.beta);
    o.get("gamma", c.objective_weights.gamma);
    o.finish();
  }
  s.get("phase_free", c.protocol_opts.phase_free);
  s.get("deal_search_cutoff", c.deal_search_cutoff);
  s.finish();
}

void parse_generator(const json& j, const std::string& path, domain::GeneratorConfig& g) {
  Section s(j, path);
  s.get("agents", g.num_agents);
  s.get("issues", g.num_issues);
  s.get("values", g.num_values);
  s.get("weight_concentration", g.weight_concentration);
  s.get("opposed_prob", g.opposed_prob);
  s.get("reservation_min", g.reservation_min);
  s.get("reservation_max", g.reservation_max);
  if (s.has("budgets")) {
    std::array<int, 5> rounds = g.budgets.rounds;
    s.get("budgets", rounds);
    g.budgets.rounds = rounds;
  }
  s.finish();
  if (g.num_agents < 2 || g.num_agents > 50)
    throw ConfigError(path + ".agents: must be in [2,50]");
  if (g.num_issues < 1) throw ConfigError(path + ".issues: must be positive");
  if (g.num_values.empty()) throw ConfigError(path + ".values: must be non-empty");
  for (int v : g.num_values)
    if (v < 2) throw ConfigError(path + ".values: each grid needs at least 2 points");
}

void parse_stage(const json& j, const std::string& path, training::StageConfig& st) {
  Section s(j, path);
  if (s.has("generator")) parse_generator(s.sub("generator"), path + ".generator", st.generator);
  s.get("randomized", st.randomized);
  s.get("agents_min", st.agents_min);
  s.get("agents_max", st.agents_max);
  s.get("issues_min", st.issues_min);
  s.get("issues_max", st.issues_max);
  s.get("exploiter_fraction", st.exploiter_fraction);
  s.finish();
  if (st.exploiter_fraction < 0 || st.exploiter_fraction > 1)
    throw ConfigError(path + ".exploiter_fraction: must be in [0,1]");
  if (st.randomized && (st.agents_min < 2 || st.agents_max < st.agents_min ||
                        st.issues_min < 1 || st.issues_max < st.issues_min))
    throw ConfigError(path + ": invalid randomization ranges");
}

void parse_curriculum(const json& j, training::CurriculumConfig& c) {
  Section s(j, "curriculum");
  s.get("window", c.window);
  s.get("threshold", c.threshold);
  if (s.has("stages")) {
    const json& stages = s.sub("stages");
    if (!stages.is_array() || stages.empty())
      throw ConfigError("curriculum.stages: expected a non-empty array");
    c.stages.clear();
    for (std::size_t i = 0; i < stages.size(); ++i) {
      training::StageConfig st;
      parse_stage(stages[i], "curriculum.stages[" + std::to_string(i) + "]", st);
      c.stages.push_back(std::move(st));
    }
  }
  s.finish();
  if (c.window < 1) throw ConfigError("curriculum.window: must be positive");
  if (c.threshold < 0 || c.threshold > 1)
    throw ConfigError("curriculum.threshold: must be in [0,1]");
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  Section s(j, "config");
  if (s.has("format")) {
    std::string fmt;
    s.get("format", fmt);
    if (fmt != "diplomat-config/1")
      throw ConfigError("config.format: expected diplomat-config/1, got " + fmt);
  }
  s.get("seed", cfg.train.seed);
  s.get("workers", cfg.train.workers);
  s.get("out", cfg.train.out_dir);
  if (j.contains("ppo")) parse_ppo(s.sub("ppo"), cfg.train.ppo); else s.sub("ppo");
  if (j.contains("pool")) parse_pool(s.sub("pool"), cfg.train.pool); else s.sub("pool");
  if (j.contains("net")) parse_net(s.sub("net"), cfg.train.net); else s.sub("net");
  if (j.contains("rewards")) parse_rewards(s.sub("rewards"), cfg.train.env_cfg);
  else s.sub("rewards");
  if (j.contains("curriculum")) parse_curriculum(s.sub("curriculum"), cfg.train.curriculum);
  else s.sub("curriculum");
  {
    Section t(s.sub("training"), "training");
    t.get("total_steps", cfg.train.total_steps);
    t.get("checkpoint_every", cfg.train.checkpoint_every);
    t.get("stop_consensus", cfg.train.stop_consensus);
    t.get("stop_window", cfg.train.stop_window);
    t.get("keep_best", cfg.train.keep_best);
    t.finish();
  }
  {
    Section e(s.sub("evaluation"), "evaluation");
    e.get("episodes", cfg.eval.episodes);
    e.get("pareto_limit", cfg.eval.pareto_limit);
    e.finish();
  }
  s.finish();

  if (cfg.train.workers < 1) throw ConfigError("workers: must be at least 1");
  if (cfg.train.total_steps < 1) throw ConfigError("training.total_steps: must be positive");
  if (cfg.eval.episodes < 0) throw ConfigError("evaluation.episodes: must be non-negative");

  cfg.eval.seed = cfg.train.seed;
  cfg.eval.workers = cfg.train.workers;
  cfg.eval.env_cfg = cfg.train.env_cfg;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path + ": cannot open");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());  // carries byte offset diagnostics
  }
  return parse_run_config(j);
}

}  // namespace diplomat::config
