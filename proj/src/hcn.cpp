#include "diplomat/hcn.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace diplomat::hcn {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

constexpr double kMaskFill = -1e9;
constexpr double kHalfLog2Pi = 0.9189385332046727417803297;  // 0.5*ln(2*pi)

// Stance order: firm, neutral, conceding. The conceding stance shifts the
// pre-sigmoid concession mean upward, the firm stance downward.
constexpr double kStanceShift[3] = {-0.2, 0.0, 0.2};

struct ObsSplit {
  int env_len = 0;        // weights | reservation | phase | fraction | standing | own util
  int behavior_off = 0;   // per opponent, 10 entries each
  int belief_off = 0;     // per opponent, B*M entries each
  int n_opp = 0;
  int belief_per_opp = 0;
  int num_issues = 0;
  int own_util_pos = 0;
};

ObsSplit split_of(const HcnParams& p) {
  ObsSplit s;
  s.num_issues = p.num_issues;
  int sum_v = std::accumulate(p.num_values.begin(), p.num_values.end(), 0);
  s.env_len = p.num_issues + 1 + protocol::kNumPhases + 1 + sum_v + 1;
  s.own_util_pos = s.env_len - 1;
  s.n_opp = p.num_agents - 1;
  s.behavior_off = s.env_len;
  s.belief_off = s.env_len + s.n_opp * (protocol::Message::kNumTags + 3);
  s.belief_per_opp = protocol::kRevealBuckets * p.num_issues;
  return s;
}

bool is_deal_tag(protocol::Message::Tag t) {
  return t == protocol::Message::Tag::Propose || t == protocol::Message::Tag::Counteroffer;
}

int add_tensor(HcnParams& p, const std::string& name, Tensor t) {
  p.names.push_back(name);
  p.t.push_back(std::move(t));
  return static_cast<int>(p.t.size()) - 1;
}

// Allocates every tensor as zeros and records the index layout.
HcnParams make_shape(int num_agents, int num_issues, std::vector<int> num_values,
                     HcnConfig cfg) {
  if (cfg.d <= 0 || cfg.heads <= 0 || cfg.d % cfg.heads != 0)
    throw num::ShapeError("hcn config: heads must divide d");
  HcnParams p;
  p.cfg = cfg;
  p.num_agents = num_agents;
  p.num_issues = num_issues;
  p.num_values = std::move(num_values);

  auto d = static_cast<std::size_t>(cfg.d);
  auto dm = static_cast<std::size_t>(cfg.d_msg);
  ObsSplit s = split_of(p);
  auto el = static_cast<std::size_t>(s.env_len);
  auto cl = static_cast<std::size_t>(s.n_opp * s.belief_per_opp);
  std::size_t msg_feat = protocol::Message::kNumTags + 3;

  p.enc_w1 = add_tensor(p, "enc_w1", Tensor::zeros({d, el}));
  p.enc_b1 = add_tensor(p, "enc_b1", Tensor::zeros({d}));
  p.enc_w2 = add_tensor(p, "enc_w2", Tensor::zeros({d, d}));
  p.enc_b2 = add_tensor(p, "enc_b2", Tensor::zeros({d}));
  p.we = add_tensor(p, "we", Tensor::zeros({d, d}));
  p.msg_w = add_tensor(p, "msg_w", Tensor::zeros({dm, msg_feat}));
  p.msg_b = add_tensor(p, "msg_b", Tensor::zeros({dm}));
  p.lstm_wx = add_tensor(p, "lstm_wx", Tensor::zeros({4 * d, dm}));
  p.lstm_wh = add_tensor(p, "lstm_wh", Tensor::zeros({4 * d, d}));
  p.lstm_b = add_tensor(p, "lstm_b", Tensor::zeros({4 * d}));
  p.wc = add_tensor(p, "wc", Tensor::zeros({d, cl}));
  p.attn_q = add_tensor(p, "attn_q", Tensor::zeros({d, d}));
  p.attn_k = add_tensor(p, "attn_k", Tensor::zeros({d, d}));
  p.attn_v = add_tensor(p, "attn_v", Tensor::zeros({d, d}));
  p.post_w1 = add_tensor(p, "post_w1", Tensor::zeros({d, d}));
  p.post_b1 = add_tensor(p, "post_b1", Tensor::zeros({d}));
  p.post_w2 = add_tensor(p, "post_w2", Tensor::zeros({d, d}));
  p.post_b2 = add_tensor(p, "post_b2", Tensor::zeros({d}));
  p.coal_w = add_tensor(p, "coal_w", Tensor::zeros({1, d}));
  p.coal_b = add_tensor(p, "coal_b", Tensor::zeros({1}));
  p.stance_w = add_tensor(p, "stance_w", Tensor::zeros({3, 2 * d}));
  p.stance_b = add_tensor(p, "stance_b", Tensor::zeros({3}));
  p.move_w = add_tensor(p, "move_w",
                        Tensor::zeros({static_cast<std::size_t>(protocol::Message::kNumTags), 2 * d}));
  p.move_b = add_tensor(p, "move_b", Tensor::zeros({static_cast<std::size_t>(protocol::Message::kNumTags)}));
  p.stance_move_bias = add_tensor(p, "stance_move_bias",
                                  Tensor::zeros({3, static_cast<std::size_t>(protocol::Message::kNumTags)}));
  for (int m = 0; m < p.num_issues; ++m) {
    auto vm = static_cast<std::size_t>(p.num_values[m]);
    p.issue_w.push_back(add_tensor(p, "issue_w" + std::to_string(m), Tensor::zeros({vm, 2 * d})));
    p.issue_b.push_back(add_tensor(p, "issue_b" + std::to_string(m), Tensor::zeros({vm})));
  }
  p.conc_w = add_tensor(p, "conc_w", Tensor::zeros({2, 2 * d}));
  p.conc_b = add_tensor(p, "conc_b", Tensor::zeros({2}));
  p.value_w = add_tensor(p, "value_w", Tensor::zeros({1, 2 * d}));
  p.value_b = add_tensor(p, "value_b", Tensor::zeros({1}));
  return p;
}

}  // namespace

HcnParams HcnParams::init(const domain::Scenario& sc, HcnConfig cfg, std::uint64_t seed) {
  std::vector<int> values;
  for (const auto& is : sc.issues) values.push_back(is.num_values);
  return init(static_cast<int>(sc.profiles.size()), static_cast<int>(sc.issues.size()),
              std::move(values), cfg, seed);
}

HcnParams HcnParams::init(int num_agents, int num_issues, std::vector<int> num_values,
                          HcnConfig cfg, std::uint64_t seed) {
  HcnParams p = make_shape(num_agents, num_issues, std::move(num_values), cfg);
  std::mt19937_64 rng(seed);
  for (auto& t : p.t) {
    if (t.rank() < 2) continue;  // biases stay zero
    std::size_t fan_in = t.shape.back();
    t = Tensor::randn(t.shape, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  }
  // Action heads start near zero so the initial policy is close to uniform
  // over legal moves; which equilibrium self-play falls into is then decided
  // by exploration rather than by the initialization draw.
  std::vector<int> heads = {p.move_w, p.stance_move_bias, p.stance_w, p.conc_w};
  heads.insert(heads.end(), p.issue_w.begin(), p.issue_w.end());
  for (int h : heads)
    for (double& v : p.t[h].data) v *= 0.01;
  return p;
}

int HcnParams::env_feature_len() const { return split_of(*this).env_len; }

int HcnParams::context_len() const {
  ObsSplit s = split_of(*this);
  return s.n_opp * s.belief_per_opp;
}

std::vector<Tensor*> HcnParams::tensor_ptrs() {
  std::vector<Tensor*> out;
  out.reserve(t.size());
  for (auto& x : t) out.push_back(&x);
  return out;
}

bool HcnParams::compatible_with(const domain::Scenario& sc) const {
  if (static_cast<int>(sc.profiles.size()) != num_agents) return false;
  if (static_cast<int>(sc.issues.size()) != num_issues) return false;
  for (int m = 0; m < num_issues; ++m)
    if (sc.issues[m].num_values != num_values[m]) return false;
  return true;
}

void save(const HcnParams& p, const std::string& path) {
  num::save_checkpoint(p.t, path);
  nlohmann::ordered_json j;
  j["format"] = "diplomat-policy/1";
  j["d"] = p.cfg.d;
  j["heads"] = p.cfg.heads;
  j["d_msg"] = p.cfg.d_msg;
  j["num_agents"] = p.num_agents;
  j["num_issues"] = p.num_issues;
  j["num_values"] = p.num_values;
  std::ofstream os(path + ".json");
  if (!os) throw num::ShapeError("cannot write manifest: " + path + ".json");
  os << j.dump(2) << "\n";
}

HcnParams load(const std::string& path) {
  std::ifstream is(path + ".json");
  if (!is) throw num::ShapeError("missing manifest: " + path + ".json");
  nlohmann::json j;
  is >> j;
  if (j.value("format", "") != "diplomat-policy/1")
    throw num::ShapeError("unrecognized policy manifest format");
  HcnConfig cfg;
  cfg.d = j.at("d").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.d_msg = j.at("d_msg").get<int>();
  HcnParams p = make_shape(j.at("num_agents").get<int>(), j.at("num_issues").get<int>(),
                           j.at("num_values").get<std::vector<int>>(), cfg);
  std::vector<Tensor> loaded = num::load_checkpoint(path);
  if (loaded.size() != p.t.size()) throw num::ShapeError("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (!loaded[i].same_shape(p.t[i]))
      throw num::ShapeError("checkpoint shape mismatch at " + p.names[i]);
    p.t[i] = std::move(loaded[i]);
  }
  return p;
}

std::vector<Var> leaf_params(Graph& g, const HcnParams& p) {
  std::vector<Var> pv;
  pv.reserve(p.t.size());
  for (const auto& t : p.t) pv.push_back(g.leaf(t));
  return pv;
}

namespace {

// Shared encoder: z = W_e * mlp(env) + LSTM(msg embeddings) + W_c * context.
Var encode(Graph& g, const HcnParams& p, const std::vector<Var>& pv, Var env_feat,
           const std::vector<Var>& msg_seq, Var ctx) {
  Var h1 = g.tanh_op(g.add(g.matmul(pv[p.enc_w1], env_feat), pv[p.enc_b1]));
  Var e = g.tanh_op(g.add(g.matmul(pv[p.enc_w2], h1), pv[p.enc_b2]));
  Var z = g.matmul(pv[p.we], e);

  auto d = static_cast<std::size_t>(p.cfg.d);
  Var h = g.input(Tensor::zeros({d}));
  Var c = g.input(Tensor::zeros({d}));
  num::LstmVars lstm{pv[p.lstm_wx], pv[p.lstm_wh], pv[p.lstm_b]};
  for (Var m : msg_seq) {
    Var emb = g.tanh_op(g.add(g.matmul(pv[p.msg_w], m), pv[p.msg_b]));
    auto [hn, cn] = num::lstm_cell(g, emb, h, c, lstm);
    h = hn;
    c = cn;
  }
  z = g.add(z, h);
  return g.add(z, g.matmul(pv[p.wc], ctx));
}

struct ForwardInputs {
  Var env_feat;
  std::vector<Var> msg_blocks;   // per opponent
  Var ctx;                       // full belief block
  Var env_feat_public;           // private entries zeroed
  std::vector<Var> ctx_single;   // belief about one opponent in the first slot
};

ForwardInputs split_inputs(Graph& g, const HcnParams& p, const env::Observation& obs) {
  ObsSplit s = split_of(p);
  int expected = s.belief_off + s.n_opp * s.belief_per_opp;
  if (static_cast<int>(obs.size()) != expected)
    throw num::ShapeError("observation length " + std::to_string(obs.size()) +
                          " does not match network shape " + std::to_string(expected));
  ForwardInputs in;
  in.env_feat = g.input(Tensor::vec({obs.begin(), obs.begin() + s.env_len}));

  std::vector<double> pub(obs.begin(), obs.begin() + s.env_len);
  for (int m = 0; m <= p.num_issues; ++m) pub[m] = 0.0;  // weights + reservation
  pub[s.own_util_pos] = 0.0;
  in.env_feat_public = g.input(Tensor::vec(std::move(pub)));

  int bw = protocol::Message::kNumTags + 3;
  for (int o = 0; o < s.n_opp; ++o) {
    auto b = obs.begin() + s.behavior_off + o * bw;
    in.msg_blocks.push_back(g.input(Tensor::vec({b, b + bw})));
  }
  in.ctx = g.input(Tensor::vec({obs.begin() + s.belief_off, obs.end()}));
  for (int o = 0; o < s.n_opp; ++o) {
    std::vector<double> one(static_cast<std::size_t>(s.n_opp) * s.belief_per_opp, 0.0);
    auto b = obs.begin() + s.belief_off + o * s.belief_per_opp;
    std::copy(b, b + s.belief_per_opp, one.begin());
    in.ctx_single.push_back(g.input(Tensor::vec(std::move(one))));
  }
  return in;
}

}  // namespace

PolicyVars forward(Graph& g, const HcnParams& p, const std::vector<Var>& pv,
                   const env::Observation& obs,
                   const std::vector<std::uint8_t>& illegal_mask,
                   const AblationFlags& flags) {
  if (static_cast<int>(illegal_mask.size()) != protocol::Message::kNumTags)
    throw num::ShapeError("illegal mask must cover all tags");
  ForwardInputs in = split_inputs(g, p, obs);
  ObsSplit s = split_of(p);

  Var z_self = encode(g, p, pv, in.env_feat, in.msg_blocks, in.ctx);

  // Per-opponent encodings from the public view: each opponent's last message
  // as a one-step sequence and the belief held about them as context.
  std::vector<Var> z_opp;
  for (int o = 0; o < s.n_opp; ++o)
    z_opp.push_back(encode(g, p, pv, in.env_feat_public, {in.msg_blocks[o]}, in.ctx_single[o]));

  // Coalition gate over opponents.
  Var coal_log, coalition;
  if (flags.no_hierarchy) {
    double u = 1.0 / s.n_opp;
    coalition = g.input(Tensor::vec(std::vector<double>(s.n_opp, u)));
    coal_log = g.input(Tensor::vec(std::vector<double>(s.n_opp, std::log(u))));
  } else {
    std::vector<Var> scores;
    for (Var z : z_opp)
      scores.push_back(g.pick(g.add(g.matmul(pv[p.coal_w], z), pv[p.coal_b]), 0));
    Var sv = g.concat(scores);
    coal_log = g.log_softmax(sv);
    coalition = g.exp_op(coal_log);
  }

  // Multi-head attention with the coalition gate as a log-space score bias.
  int heads = p.cfg.heads;
  auto dk = static_cast<std::size_t>(p.cfg.d / heads);
  double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  Var q_full = g.matmul(pv[p.attn_q], z_self);
  std::vector<Var> k_full, v_full;
  for (Var z : z_opp) {
    k_full.push_back(g.matmul(pv[p.attn_k], z));
    v_full.push_back(g.matmul(pv[p.attn_v], z));
  }
  std::vector<Var> head_outs;
  for (int hidx = 0; hidx < heads; ++hidx) {
    std::size_t off = hidx * dk;
    std::vector<Var> vs;
    for (int o = 0; o < s.n_opp; ++o) vs.push_back(g.slice(v_full[o], off, dk));
    Var out;
    if (flags.no_attention) {
      out = vs[0];
      for (int o = 1; o < s.n_opp; ++o) out = g.add(out, vs[o]);
      out = g.scale(out, 1.0 / s.n_opp);
    } else {
      Var q = g.slice(q_full, off, dk);
      std::vector<Var> scores;
      for (int o = 0; o < s.n_opp; ++o) {
        Var dot = g.sum(g.mul(q, g.slice(k_full[o], off, dk)));
        scores.push_back(g.add(g.scale(dot, inv_sqrt_dk), g.pick(coal_log, o)));
      }
      Var w = g.softmax(g.concat(scores), 0);
      out = g.mul(g.broadcast(g.pick(w, 0), dk), vs[0]);
      for (int o = 1; o < s.n_opp; ++o)
        out = g.add(out, g.mul(g.broadcast(g.pick(w, o), dk), vs[o]));
    }
    head_outs.push_back(out);
  }
  Var attended = g.concat(head_outs);
  Var a1 = g.relu(g.add(g.matmul(pv[p.post_w1], attended), pv[p.post_b1]));
  Var a = g.add(g.matmul(pv[p.post_w2], a1), pv[p.post_b2]);

  Var za = g.concat({z_self, a});

  Var stance;
  if (flags.no_hierarchy) {
    stance = g.input(Tensor::vec({0.0, 1.0, 0.0}));
  } else {
    stance = g.softmax(g.add(g.matmul(pv[p.stance_w], za), pv[p.stance_b]), 0);
  }

  Var move_logits = g.add(g.matmul(pv[p.move_w], za), pv[p.move_b]);
  move_logits = g.add(move_logits, g.matmul(stance, pv[p.stance_move_bias]));
  Var masked = g.mask_fill(move_logits, illegal_mask, kMaskFill);

  PolicyVars out;
  out.move_log_probs = g.log_softmax(masked);
  for (int m = 0; m < p.num_issues; ++m)
    out.issue_log_probs.push_back(
        g.log_softmax(g.add(g.matmul(pv[p.issue_w[m]], za), pv[p.issue_b[m]])));

  Var conc = g.add(g.matmul(pv[p.conc_w], za), pv[p.conc_b]);
  Var shift = g.sum(g.mul(stance, g.input(Tensor::vec(
                                      {kStanceShift[0], kStanceShift[1], kStanceShift[2]}))));
  out.concession_mean = g.add(g.pick(conc, 0), shift);
  // tanh keeps the log-std inside (-5, 1)
  out.concession_log_std = g.add_scalar(g.scale(g.tanh_op(g.pick(conc, 1)), 3.0), -2.0);
  out.stance_probs = stance;
  out.coalition = coalition;
  out.value = g.pick(g.add(g.matmul(pv[p.value_w], za), pv[p.value_b]), 0);
  return out;
}

namespace {

// Log-density of a stored action under the forward outputs. The concession is
// a squashed gaussian: x ~ N(mean, std), c = sigmoid(x), with the
// change-of-variables term -log(c(1-c)) folded in as a constant.
Var logprob_expr(Graph& g, const PolicyVars& out, const env::AgentAction& action,
                 double concession_raw) {
  Var lp = g.pick(out.move_log_probs, static_cast<std::size_t>(action.tag));
  if (is_deal_tag(action.tag)) {
    for (std::size_t m = 0; m < out.issue_log_probs.size(); ++m)
      lp = g.add(lp, g.pick(out.issue_log_probs[m],
                            static_cast<std::size_t>(action.deal_choice[m])));
  }
  Var diff = g.sub(g.constant(concession_raw), out.concession_mean);
  Var inv_var = g.exp_op(g.scale(out.concession_log_std, -2.0));
  lp = g.add(lp, g.scale(g.mul(g.mul(diff, diff), inv_var), -0.5));
  lp = g.sub(lp, out.concession_log_std);
  double c = 1.0 / (1.0 + std::exp(-concession_raw));
  double jac = std::log(c) + std::log1p(-c);
  return g.add_scalar(lp, -kHalfLog2Pi - jac);
}

Var entropy_expr(Graph& g, const PolicyVars& out, const env::AgentAction& action) {
  // masked tags contribute exp(-1e9)*logp = 0 exactly
  Var probs = g.exp_op(out.move_log_probs);
  Var ent = g.scale(g.sum(g.mul(probs, out.move_log_probs)), -1.0);
  if (is_deal_tag(action.tag)) {
    for (const Var& lpm : out.issue_log_probs)
      ent = g.add(ent, g.scale(g.sum(g.mul(g.exp_op(lpm), lpm)), -1.0));
  }
  return g.add(ent, g.add_scalar(out.concession_log_std, kHalfLog2Pi + 0.5));
}

int sample_categorical(const Tensor& log_probs, std::mt19937_64& rng, bool deterministic) {
  std::size_t n = log_probs.size();
  if (deterministic) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (log_probs.data[i] > log_probs.data[best]) best = i;
    return static_cast<int>(best);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::exp(log_probs.data[i]);
    if (u <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(n - 1);
}

}  // namespace

SampledAction sample_action(const HcnParams& p, const env::Observation& obs,
                            const std::vector<std::uint8_t>& illegal_mask,
                            std::mt19937_64& rng, bool deterministic,
                            const AblationFlags& flags) {
  Graph g(/*grad_enabled=*/false);
  std::vector<Var> pv = leaf_params(g, p);
  PolicyVars out = forward(g, p, pv, obs, illegal_mask, flags);
  SampledAction res;
  res.action.tag = static_cast<protocol::Message::Tag>(
      sample_categorical(g.value(out.move_log_probs), rng, deterministic));
  if (is_deal_tag(res.action.tag)) {
    for (int m = 0; m < p.num_issues; ++m)
      res.action.deal_choice.push_back(
          sample_categorical(g.value(out.issue_log_probs[m]), rng, deterministic));
  }
  double mean = g.value(out.concession_mean).data[0];
  double std_dev = std::exp(g.value(out.concession_log_std).data[0]);
  if (deterministic) {
    res.concession_raw = mean;
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    res.concession_raw = mean + std_dev * normal(rng);
  }
  res.action.concession = 1.0 / (1.0 + std::exp(-res.concession_raw));
  res.log_prob = g.value(logprob_expr(g, out, res.action, res.concession_raw)).data[0];
  res.entropy = g.value(entropy_expr(g, out, res.action)).data[0];
  res.value = g.value(out.value).data[0];
  return res;
}

EvalVars evaluate_action(Graph& g, const HcnParams& p, const std::vector<Var>& pv,
                         const env::Observation& obs,
                         const std::vector<std::uint8_t>& illegal_mask,
                         const env::AgentAction& action, double concession_raw,
                         const AblationFlags& flags) {
  if (is_deal_tag(action.tag) &&
      static_cast<int>(action.deal_choice.size()) != p.num_issues)
    throw num::ShapeError("stored action deal choice does not match issue count");
  PolicyVars out = forward(g, p, pv, obs, illegal_mask, flags);
  EvalVars ev;
  ev.log_prob = logprob_expr(g, out, action, concession_raw);
  ev.entropy = entropy_expr(g, out, action);
  ev.value = out.value;
  return ev;
}

}  // namespace diplomat::hcn
