#pragma once
// Hierarchical consensus policy network: shared observation encoder, coalition
// gate over per-opponent encodings, multi-head attention, stance head, and the
// action/value heads. Forward passes are pure functions of (params, inputs).

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "diplomat/domain.hpp"
#include "diplomat/env.hpp"
#include "diplomat/numerics.hpp"

namespace diplomat::hcn {

struct HcnConfig {
  int d = 64;      // shared embedding width
  int heads = 4;   // attention heads; must divide d
  int d_msg = 32;  // message embedding width
};

// Ablation switches applied at forward time.
struct AblationFlags {
  bool no_hierarchy = false;  // uniform coalition weights, stance frozen neutral
  bool no_attention = false;  // attention replaced by a uniform opponent mean
};

// All learnable tensors, stored flat in declaration order so the checkpoint,
// gradient lists, and optimizer state share one indexing scheme.
struct HcnParams {
  HcnConfig cfg;
  int num_agents = 0;
  int num_issues = 0;
  std::vector<int> num_values;

  std::vector<num::Tensor> t;
  std::vector<std::string> names;

  // indices into t
  int enc_w1 = -1, enc_b1 = -1, enc_w2 = -1, enc_b2 = -1;
  int we = -1;
  int msg_w = -1, msg_b = -1;
  int lstm_wx = -1, lstm_wh = -1, lstm_b = -1;
  int wc = -1;
  int attn_q = -1, attn_k = -1, attn_v = -1;
  int post_w1 = -1, post_b1 = -1, post_w2 = -1, post_b2 = -1;
  int coal_w = -1, coal_b = -1;
  int stance_w = -1, stance_b = -1;
  int move_w = -1, move_b = -1;
  int stance_move_bias = -1;  // (3, 7)
  std::vector<int> issue_w, issue_b;
  int conc_w = -1, conc_b = -1;
  int value_w = -1, value_b = -1;

  static HcnParams init(const domain::Scenario& sc, HcnConfig cfg, std::uint64_t seed);
  static HcnParams init(int num_agents, int num_issues, std::vector<int> num_values,
                        HcnConfig cfg, std::uint64_t seed);

  int env_feature_len() const;
  int context_len() const;
  std::vector<num::Tensor*> tensor_ptrs();
  bool compatible_with(const domain::Scenario& sc) const;
};

// Writes the flat binary alongside a JSON manifest at path + ".json" recording
// the network and scenario shape. load() refuses mismatched manifests.
void save(const HcnParams& p, const std::string& path);
HcnParams load(const std::string& path);

// Graph-tied forward outputs for one agent's observation.
struct PolicyVars {
  num::Var move_log_probs;               // (7), illegal tags masked to ~-1e9
  std::vector<num::Var> issue_log_probs; // per issue, (V_m)
  num::Var concession_mean;              // scalar, pre-sigmoid
  num::Var concession_log_std;           // scalar, bounded in (-5, 1)
  num::Var stance_probs;                 // (3): firm, neutral, conceding
  num::Var coalition;                    // (N-1) weights summing to 1
  num::Var value;                        // scalar state value
};

// Leaves every parameter tensor into the graph; pv[i] corresponds to p.t[i].
std::vector<num::Var> leaf_params(num::Graph& g, const HcnParams& p);

PolicyVars forward(num::Graph& g, const HcnParams& p, const std::vector<num::Var>& pv,
                   const env::Observation& obs,
                   const std::vector<std::uint8_t>& illegal_mask,
                   const AblationFlags& flags = {});

struct SampledAction {
  env::AgentAction action;
  double concession_raw = 0.0;  // pre-sigmoid gaussian draw
  double log_prob = 0.0;
  double entropy = 0.0;
  double value = 0.0;
};

// Rollout path: runs forward on a no-grad graph and samples every action
// component. deterministic=true takes argmax tags/values and the mean
// concession.
SampledAction sample_action(const HcnParams& p, const env::Observation& obs,
                            const std::vector<std::uint8_t>& illegal_mask,
                            std::mt19937_64& rng, bool deterministic = false,
                            const AblationFlags& flags = {});

struct EvalVars {
  num::Var log_prob;
  num::Var entropy;
  num::Var value;
};

// Update path: rebuilds the same log-prob/entropy expressions as graph nodes
// for a stored action, so values agree with sample_action bit-for-bit under
// unchanged parameters.
EvalVars evaluate_action(num::Graph& g, const HcnParams& p, const std::vector<num::Var>& pv,
                         const env::Observation& obs,
                         const std::vector<std::uint8_t>& illegal_mask,
                         const env::AgentAction& action, double concession_raw,
                         const AblationFlags& flags = {});

}  // namespace diplomat::hcn
