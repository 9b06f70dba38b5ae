#include "mhmarl/verify/straight_line.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mhmarl/verify/fixtures.hpp"

namespace mhmarl::verify::plain {

namespace {

std::span<const double> row(const Tensor& t, std::size_t s) { return t.data().subspan(s * t.cols(), t.cols()); }

std::span<const double> block(std::span<const double> joint, std::size_t offset, std::size_t width) {
  return joint.subspan(offset, width);
}

Vec substituted(std::span<const double> joint, std::span<const AgentSpec> specs, std::size_t agent,
                std::span<const double> own) {
  Vec out(joint.begin(), joint.end());
  std::copy(own.begin(), own.end(), out.begin() + static_cast<std::ptrdiff_t>(act_offset(specs, agent)));
  return out;
}

// Column offset of agent j's block inside `owner`'s expected-policy output.
std::size_t expected_offset(std::span<const AgentSpec> specs, std::size_t owner, std::size_t j) {
  std::size_t off = 0;
  for (std::size_t k = 0; k < j; ++k) {
    if (k != owner) off += specs[k].act_dim;
  }
  return off;
}

}  // namespace

Vec mlp(const Mlp& net, std::span<const double> input) {
  const auto params = net.parameters();
  Vec h(input.begin(), input.end());
  const std::size_t layers = params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = params[2 * l]->value;
    const Tensor& b = params[2 * l + 1]->value;
    const std::size_t in = w.shape()[0], out = w.shape()[1];
    if (h.size() != in) throw std::invalid_argument("plain mlp: input width");
    Vec next(out);
    for (std::size_t c = 0; c < out; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < in; ++r) acc += h[r] * w.at(r, c);
      acc += b[c];
      next[c] = l + 1 < layers ? std::max(acc, 0.0) : acc;
    }
    h = std::move(next);
  }
  return h;
}

namespace {

Vec squash(Vec raw, std::span<const double> low, std::span<const double> high) {
  for (std::size_t k = 0; k < raw.size(); ++k) {
    raw[k] = std::tanh(raw[k]) * (0.5 * (high[k] - low[k])) + 0.5 * (high[k] + low[k]);
  }
  return raw;
}

}  // namespace

Vec actor(const ActorNet& net, std::span<const double> obs) {
  return squash(mlp(net.mlp(), obs), net.spec().act_low, net.spec().act_high);
}

double critic(const CriticNet& net, std::span<const double> obs, std::span<const double> actions) {
  Vec input(obs.begin(), obs.end());
  input.insert(input.end(), actions.begin(), actions.end());
  return mlp(net.mlp(), input).at(0);
}

Vec expected(const ExpectedNet& net, std::span<const double> joint_obs) {
  return squash(mlp(net.mlp(), joint_obs), net.low(), net.high());
}

Policy policy_of(const ActorNet& net) {
  return [&net](std::span<const double> o) { return actor(net, o); };
}

Policy policy_of(const ExpectedNet& net) {
  return [&net](std::span<const double> o) { return expected(net, o); };
}

Critic critic_of(const CriticNet& net) {
  return [&net](std::span<const double> o, std::span<const double> a) { return critic(net, o, a); };
}

Vec td_target(const Minibatch& batch, std::span<const AgentSpec> specs, std::size_t agent,
              std::span<const Critic> target_critics, std::span<const Policy> target_actors, double gamma) {
  Vec y(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto next = row(batch.next_obs, s);
    Vec joint;
    for (std::size_t j = 0; j < specs.size(); ++j) {
      const Vec a = target_actors[j](block(next, obs_offset(specs, j), specs[j].obs_dim));
      joint.insert(joint.end(), a.begin(), a.end());
    }
    double boot = target_critics[0](next, joint);
    for (std::size_t k = 1; k < target_critics.size(); ++k) boot = std::min(boot, target_critics[k](next, joint));
    const double r = batch.rewards.at(s, agent);
    y[s] = batch.done[s] != 0.0 ? r : r + gamma * boot;
  }
  return y;
}

double critic_loss(const Critic& q, const Minibatch& batch, std::span<const double> y) {
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const double e = q(row(batch.obs, s), row(batch.actions, s)) - y[s];
    total += e * e;
  }
  return total / static_cast<double>(batch.size());
}

double actor_loss(const Critic& q, const Policy& pi, const Minibatch& batch, std::span<const AgentSpec> specs,
                  std::size_t agent) {
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto obs = row(batch.obs, s);
    const Vec own = pi(block(obs, obs_offset(specs, agent), specs[agent].obs_dim));
    total += q(obs, substituted(row(batch.actions, s), specs, agent, own));
  }
  return -total / static_cast<double>(batch.size());
}

double expected_loss(const Critic& q, const Policy& pi, const Teacher& mu, const Minibatch& batch,
                     std::span<const AgentSpec> specs) {
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto obs = row(batch.obs, s);
    const Vec own = pi(block(obs, obs_offset(specs, mu.owner), specs[mu.owner].obs_dim));
    const Vec others = mu.policy(obs);
    Vec joint;
    for (std::size_t j = 0; j < specs.size(); ++j) {
      if (j == mu.owner) {
        joint.insert(joint.end(), own.begin(), own.end());
      } else {
        const auto off = static_cast<std::ptrdiff_t>(expected_offset(specs, mu.owner, j));
        joint.insert(joint.end(), others.begin() + off, others.begin() + off + static_cast<std::ptrdiff_t>(specs[j].act_dim));
      }
    }
    total += q(obs, joint);
  }
  return -total / static_cast<double>(batch.size());
}

double help_loss(const Critic& q, const Policy& pi, std::span<const Teacher> teachers, const Minibatch& batch,
                 std::span<const AgentSpec> specs, std::size_t agent, double eta, bool selective) {
  const std::size_t n = specs.size();
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto obs = row(batch.obs, s);
    const auto actions = row(batch.actions, s);
    const Vec own = pi(block(obs, obs_offset(specs, agent), specs[agent].obs_dim));
    const double q_own = q(obs, substituted(actions, specs, agent, own));
    double per_sample = 0.0;
    for (const Teacher& t : teachers) {
      const Vec out = t.policy(obs);
      const std::size_t off = expected_offset(specs, t.owner, agent);
      const Vec wanted(out.begin() + static_cast<std::ptrdiff_t>(off),
                       out.begin() + static_cast<std::ptrdiff_t>(off + specs[agent].act_dim));
      double gate = 1.0;
      if (selective) gate = q(obs, substituted(actions, specs, agent, wanted)) + eta - q_own > 0.0 ? 1.0 : 0.0;
      double sq = 0.0;
      for (std::size_t k = 0; k < own.size(); ++k) sq += (own[k] - wanted[k]) * (own[k] - wanted[k]);
      per_sample += std::sqrt(sq) * gate;
    }
    total += per_sample / static_cast<double>(n - 1);
  }
  return total / static_cast<double>(batch.size());
}

double mix_ratio(const Critic& q, const Policy& pi, const Minibatch& batch, std::span<const AgentSpec> specs,
                 std::size_t agent, double beta) {
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto obs = row(batch.obs, s);
    const Vec own = pi(block(obs, obs_offset(specs, agent), specs[agent].obs_dim));
    total += std::fabs(q(obs, substituted(row(batch.actions, s), specs, agent, own)));
  }
  return beta * total / static_cast<double>(batch.size());
}

double mh_actor_loss(double actor_term, double help_term, double alpha, bool include_actor_term) {
  return (include_actor_term ? actor_term : 0.0) + alpha * help_term;
}

}  // namespace mhmarl::verify::plain

namespace mhmarl::verify {

bool OracleReport::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const OracleCase& c) { return c.passed; });
}

namespace {

void record(OracleCase& c, double graph, double reference, const char* what = nullptr) {
  ++c.compared;
  const double diff = std::fabs(graph - reference);
  if (!(diff <= c.max_abs_diff)) {
    c.max_abs_diff = diff;
    if (what != nullptr) c.detail = what;
  }
  if (!(diff <= kOracleTolerance)) {
    c.passed = false;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%s: graph %.17g vs %.17g", what ? what : "value", graph, reference);
    c.detail = buf;
  }
}

std::vector<AgentSpec> random_specs(Rng& rng) {
  std::uniform_int_distribution<std::size_t> agents(2, 4), obs(1, 4), act(1, 3);
  std::uniform_real_distribution<double> low(-2.0, 0.0), width(0.5, 3.0);
  std::vector<AgentSpec> specs(agents(rng));
  for (auto& s : specs) {
    s.obs_dim = obs(rng);
    s.act_dim = act(rng);
    for (std::size_t k = 0; k < s.act_dim; ++k) {
      s.act_low.push_back(low(rng));
      s.act_high.push_back(s.act_low.back() + width(rng));
    }
  }
  return specs;
}

// Random problems: graph losses against the straight-line versions.
void random_problems(std::vector<OracleCase>& cases, std::size_t draws, std::uint64_t seed) {
  constexpr double kEta = 0.05, kBeta = 2.0, kGamma = 0.95;
  auto find = [&](const char* name) -> OracleCase& {
    for (auto& c : cases) {
      if (c.name == name) return c;
    }
    cases.emplace_back().name = name;
    return cases.back();
  };
  for (const char* name : {"td target", "td target, twin critics", "critic loss", "actor loss", "expected-policy loss",
                           "help loss", "help loss, no selectivity", "mix ratio", "mutual-help actor loss",
                           "mutual-help actor loss, no MARL term"}) {
    find(name);
  }

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> batch_size(1, 5);
  for (std::size_t d = 0; d < draws; ++d) {
    const auto specs = random_specs(rng);
    const std::size_t n = specs.size();
    std::vector<ActorNet> actors, target_actors;
    std::vector<CriticNet> critics, target_critics;
    std::vector<ExpectedNet> expected;
    for (std::size_t i = 0; i < n; ++i) {
      actors.emplace_back("a" + std::to_string(i), specs[i], rng);
      target_actors.emplace_back("ta" + std::to_string(i), specs[i], rng);
      critics.emplace_back("c" + std::to_string(i), specs, rng);
      target_critics.emplace_back("tc" + std::to_string(i), specs, rng);
      expected.emplace_back("e" + std::to_string(i), specs, i, rng);
    }
    const Minibatch batch = random_minibatch(specs, batch_size(rng), rng);
    const std::size_t i = d % n;

    std::vector<const ActorNet*> ta_ptrs;
    std::vector<plain::Policy> ta_plain;
    for (const auto& a : target_actors) {
      ta_ptrs.push_back(&a);
      ta_plain.push_back(plain::policy_of(a));
    }
    for (bool twin : {false, true}) {
      std::vector<const QFunction*> tc{&target_critics[i]};
      std::vector<plain::Critic> tc_plain{plain::critic_of(target_critics[i])};
      if (twin) {
        tc.push_back(&target_critics[(i + 1) % n]);
        tc_plain.push_back(plain::critic_of(target_critics[(i + 1) % n]));
      }
      const Tensor y = td_target(batch, i, tc, ta_ptrs, kGamma);
      const plain::Vec y_ref = plain::td_target(batch, specs, i, tc_plain, ta_plain, kGamma);
      OracleCase& c = find(twin ? "td target, twin critics" : "td target");
      for (std::size_t s = 0; s < y_ref.size(); ++s) record(c, y[s], y_ref[s]);
    }

    const plain::Critic q = plain::critic_of(critics[i]);
    const plain::Policy pi = plain::policy_of(actors[i]);
    std::vector<plain::Teacher> teachers_plain;
    std::vector<const ExpectedNet*> teachers;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      teachers.push_back(&expected[j]);
      teachers_plain.push_back({j, plain::policy_of(expected[j])});
    }

    {
      Graph g;
      const Tensor y = td_target(batch, i, std::vector<const QFunction*>{&target_critics[i]}, ta_ptrs, kGamma);
      record(find("critic loss"), g.value(critic_loss(g, critics[i], batch, y)).item(),
             plain::critic_loss(q, batch, y.data()));
    }
    {
      Graph g;
      record(find("expected-policy loss"), g.value(expected_loss(g, expected[i], critics[i], actors[i], batch)).item(),
             plain::expected_loss(q, pi, {i, plain::policy_of(expected[i])}, batch, specs));
    }
    Graph g;
    const PolicyEval eval = evaluate_policy(g, batch, i, actors[i], critics[i]);
    const double l_actor = g.value(actor_loss(g, eval)).item();
    const double l_actor_ref = plain::actor_loss(q, pi, batch, specs, i);
    record(find("actor loss"), l_actor, l_actor_ref);
    const HelpLoss help = help_loss(g, eval, critics[i], teachers, kEta, true);
    const double l_help_ref = plain::help_loss(q, pi, teachers_plain, batch, specs, i, kEta, true);
    record(find("help loss"), g.value(help.loss).item(), l_help_ref);
    const HelpLoss help_all = help_loss(g, eval, critics[i], teachers, kEta, false);
    record(find("help loss, no selectivity"), g.value(help_all.loss).item(),
           plain::help_loss(q, pi, teachers_plain, batch, specs, i, kEta, false));
    const double alpha = mix_ratio_alpha(g, eval, kBeta);
    const double alpha_ref = plain::mix_ratio(q, pi, batch, specs, i, kBeta);
    record(find("mix ratio"), alpha, alpha_ref);
    for (bool marl : {true, false}) {
      Var total = mh_actor_loss(g, actor_loss(g, eval), help.loss, alpha, marl);
      record(find(marl ? "mutual-help actor loss" : "mutual-help actor loss, no MARL term"), g.value(total).item(),
             plain::mh_actor_loss(l_actor_ref, l_help_ref, alpha_ref, marl));
    }
  }
}

// The small examples worked by hand; both paths must land on the stated value.
OracleCase worked_examples() {
  OracleCase c;
  c.name = "worked examples";
  const std::vector<double> a0{0.5, 0.0}, mu{0.1, 0.3};
  const std::vector<AgentSpec> pair{AgentSpec::box(1, 2, -1.0, 1.0), AgentSpec::box(1, 2, -1.0, 1.0)};
  Rng rng(7);

  auto one_sample = [&](std::vector<double> obs, std::vector<double> actions, std::vector<double> rewards, bool done) {
    const std::size_t m = 1;
    Minibatch b{Tensor({m, obs.size()}, obs), Tensor({m, actions.size()}, actions),
                Tensor({m, rewards.size()}, rewards), Tensor({m, obs.size()}, obs), Tensor({m, 1}, done ? 1.0 : 0.0)};
    return b;
  };
  auto plain_linear = [](const LinearCritic& q) -> plain::Critic {
    return [&q](std::span<const double> o, std::span<const double> a) { return q.value(o, a); };
  };

  {
    // r = 1, gamma = 0.95, Q' = 2 -> y = 2.9.
    const LinearCritic q(pair, {0, 0}, {0, 0, 0, 0}, 2.0);
    std::vector<ActorNet> actors{ActorNet("a0", pair[0], rng), ActorNet("a1", pair[1], rng)};
    const Minibatch b = one_sample({0.3, -0.2}, {0.1, 0.2, 0.3, 0.4}, {1.0, 0.0}, false);
    const Tensor y = td_target(b, 0, std::vector<const QFunction*>{&q}, std::vector<const ActorNet*>{&actors[0], &actors[1]},
                               0.95);
    const std::vector<plain::Critic> qp{plain_linear(q)};
    const std::vector<plain::Policy> pp{plain::policy_of(actors[0]), plain::policy_of(actors[1])};
    record(c, y[0], 2.9, "td target 2.9");
    record(c, plain::td_target(b, pair, 0, qp, pp, 0.95)[0], 2.9, "td target 2.9 (straight line)");
  }
  {
    // M = 1, Q = 3, y = 2.5 -> 0.25; M = 2, Q = (1, 2), y = 0 -> 2.5.
    const LinearCritic q(pair, {1, 0}, {0, 0, 0, 0}, 0.0);
    Graph g;
    Minibatch b = one_sample({3.0, 0.0}, {0, 0, 0, 0}, {0, 0}, false);
    record(c, g.value(critic_loss(g, q, b, Tensor({1, 1}, 2.5))).item(), 0.25, "critic loss 0.25");
    Minibatch two{Tensor({2, 2}, {1, 0, 2, 0}), Tensor({2, 4}), Tensor({2, 2}), Tensor({2, 2}), Tensor({2, 1})};
    record(c, g.value(critic_loss(g, q, two, Tensor({2, 1}))).item(), 2.5, "critic loss 2.5");
    record(c, plain::critic_loss(plain_linear(q), two, std::vector<double>{0, 0}), 2.5, "critic loss 2.5 (straight line)");
  }
  for (bool open : {true, false}) {
    // pi_1 = (0.5, 0), mu_2(o, 1) = (0.1, 0.3); Q(own) = 1.0 and
    // Q(expected) = 1.2 (open, loss 0.5) or 0.7 (closed, loss 0).
    ActorNet actor("a0", pair[0], rng);
    make_constant_actor(actor, a0);
    ExpectedNet teacher("e1", pair, 1, rng);
    make_constant_expected(teacher, mu);
    const LinearCritic q(pair, {0, 0}, {0, open ? 2.0 / 3.0 : -1.0, 0, 0}, 1.0);
    const Minibatch b = one_sample({0.4, -0.7}, {-0.2, 0.9, 0.6, -0.1}, {0, 0}, false);
    Graph g;
    const HelpLoss h = help_loss(g, actor, q, std::vector<const ExpectedNet*>{&teacher}, b, 0, 0.05);
    const std::vector<plain::Teacher> tp{{1, plain::policy_of(teacher)}};
    const double expect = open ? 0.5 : 0.0;
    record(c, g.value(h.loss).item(), expect, open ? "help loss 0.5" : "help loss, closed gate");
    record(c, plain::help_loss(plain_linear(q), plain::policy_of(actor), tp, b, pair, 0, 0.05, true), expect,
           open ? "help loss 0.5 (straight line)" : "help loss, closed gate (straight line)");
  }
  {
    // beta = 2, M = 2, Q = (1.5, -0.5) -> alpha = 2.
    ActorNet actor("a0", pair[0], rng);
    const LinearCritic q(pair, {1, 0}, {0, 0, 0, 0}, 0.0);
    Minibatch b{Tensor({2, 2}, {1.5, 0.0, -0.5, 0.0}), Tensor({2, 4}), Tensor({2, 2}), Tensor({2, 2}), Tensor({2, 1})};
    record(c, mix_ratio_alpha(actor, q, b, 0, 2.0), 2.0, "mix ratio 2.0");
    record(c, plain::mix_ratio(plain_linear(q), plain::policy_of(actor), b, pair, 0, 2.0), 2.0,
           "mix ratio 2.0 (straight line)");
  }
  {
    // L_actor = -1, L_help = 0.5, alpha = 2 -> 0.
    Graph g;
    Var total = mh_actor_loss(g, g.constant(Tensor::scalar(-1.0)), g.constant(Tensor::scalar(0.5)), 2.0);
    record(c, g.value(total).item(), 0.0, "mutual-help actor loss 0");
    record(c, mh_actor_loss(-1.0, 0.5, 2.0), 0.0, "mutual-help actor loss 0 (scalar)");
    record(c, plain::mh_actor_loss(-1.0, 0.5, 2.0, true), 0.0, "mutual-help actor loss 0 (straight line)");
  }
  return c;
}

}  // namespace

OracleReport run_loss_oracle(std::size_t draws, std::uint64_t seed) {
  OracleReport report;
  report.cases.reserve(16);
  random_problems(report.cases, draws, seed);
  report.cases.push_back(worked_examples());
  return report;
}

std::string format_report(const OracleReport& report) {
  std::string out;
  char line[320];
  for (const auto& c : report.cases) {
    std::snprintf(line, sizeof(line), "%-4s %-40s compared=%zu max_abs_diff=%.3g%s%s\n", c.passed ? "ok" : "FAIL",
                  c.name.c_str(), c.compared, c.max_abs_diff, c.passed ? "" : "  ", c.passed ? "" : c.detail.c_str());
    out += line;
  }
  return out;
}

}  // namespace mhmarl::verify
