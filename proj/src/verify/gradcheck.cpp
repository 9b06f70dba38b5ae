#include "mhmarl/verify/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>

#include "mhmarl/losses.hpp"
#include "mhmarl/verify/fixtures.hpp"

namespace mhmarl::verify {

bool GradCheckReport::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const GradCheckCase& c) { return c.passed; });
}

void check_gradient(GradCheckCase& out, std::span<Parameter* const> params, const LossBuilder& build,
                    const GradCheckOptions& options) {
  Graph g(options.fault);
  std::vector<bool> signature;
  Var loss = build(g, signature);
  const std::vector<bool> pattern = g.relu_pattern();
  const std::vector<Tensor> analytic = g.backward(loss).for_parameters(params);

  auto evaluate = [&](bool& same_piece) {
    Graph probe;
    std::vector<bool> sig;
    const double v = probe.value(build(probe, sig)).item();
    same_piece = same_piece && sig == signature && probe.relu_pattern() == pattern;
    return v;
  };

  ++out.draws;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = params[p]->value;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double original = value[k];
      bool same_piece = true;
      value[k] = original + options.step;
      const double up = evaluate(same_piece);
      value[k] = original - options.step;
      const double down = evaluate(same_piece);
      value[k] = original;
      if (!same_piece) {
        ++out.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[p][k];
      const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), options.floor});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "worst at %s[%zu]: analytic %.9g, numeric %.9g", params[p]->name.c_str(), k,
                      a, numeric);
        out.detail = buf;
      }
    }
  }
}

namespace {

std::vector<AgentSpec> heterogeneous_specs() {
  std::vector<AgentSpec> specs;
  specs.push_back(AgentSpec::box(3, 2, -1.0, 1.0));
  specs.push_back(AgentSpec::box(4, 1, 0.0, 2.0));
  AgentSpec third = AgentSpec::box(2, 2, -1.0, 1.0);
  third.act_low = {-0.5, -2.0};
  third.act_high = {1.5, 1.0};
  specs.push_back(third);
  return specs;
}

// One random instantiation of everything a loss can touch.
struct World {
  std::vector<AgentSpec> specs;
  std::vector<ActorNet> actors;
  std::vector<ActorNet> target_actors;
  std::vector<CriticNet> critics;
  std::vector<CriticNet> target_critics;
  std::vector<ExpectedNet> expected;
  Minibatch batch;
  Rng rng;

  World(std::uint64_t seed, std::size_t m) : specs(heterogeneous_specs()), rng(seed) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const std::string p = "agent" + std::to_string(i);
      actors.emplace_back(p + ".actor", specs[i], rng);
      target_actors.emplace_back(p + ".target_actor", specs[i], rng);
      critics.emplace_back(p + ".critic", specs, rng);
      target_critics.emplace_back(p + ".target_critic", specs, rng);
      expected.emplace_back(p + ".expected", specs, i, rng);
    }
    batch = random_minibatch(specs, m, rng);
  }

  std::vector<const ExpectedNet*> teachers_of(std::size_t i) const {
    std::vector<const ExpectedNet*> out;
    for (std::size_t j = 0; j < expected.size(); ++j) {
      if (j != i) out.push_back(&expected[j]);
    }
    return out;
  }

  std::vector<const ActorNet*> target_actor_ptrs() const {
    std::vector<const ActorNet*> out;
    for (const auto& a : target_actors) out.push_back(&a);
    return out;
  }
};

Parameter random_parameter(const std::string& name, Shape shape, Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Parameter p{name, Tensor(std::move(shape))};
  for (double& v : p.value.data()) v = unit(rng);
  return p;
}

Tensor random_tensor(Shape shape, Rng& rng) { return random_parameter("", std::move(shape), rng).value; }

void append_gates(std::vector<bool>& signature, const HelpLoss& help) {
  for (double v : help.gates.data()) signature.push_back(v != 0.0);
}

template <typename Net>
std::vector<Parameter*> params_of(Net& net) {
  return net.parameters();
}

void finish(GradCheckCase& c, const GradCheckOptions& options) {
  if (c.exact) {
    c.passed = c.checked > 0 && c.max_rel_error <= c.limit;
    return;
  }
  const std::size_t attempted = c.checked + c.skipped;
  c.passed = c.checked > 0 && c.max_rel_error < options.tolerance && 2 * c.skipped <= attempted;
}

// Exact-zero check: every gradient entry of `params` must be 0.
void expect_zero(GradCheckCase& out, std::span<Parameter* const> params, Graph& g, Var loss) {
  const auto grads = g.backward(loss).for_parameters(params);
  ++out.draws;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t k = 0; k < grads[p].size(); ++k) {
      ++out.checked;
      const double v = std::fabs(grads[p][k]);
      if (v > out.max_rel_error) {
        out.max_rel_error = v;
        out.detail = "nonzero gradient at " + params[p]->name;
      }
    }
  }
}

}  // namespace

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  constexpr double kEta = 0.05;
  constexpr double kBeta = 2.0;
  constexpr double kGamma = 0.95;

  std::vector<GradCheckCase> cases;
  cases.reserve(16);  // references below must stay valid
  auto make_case = [&](std::string name, bool exact = false) -> GradCheckCase& {
    cases.push_back(GradCheckCase{});
    cases.back().name = std::move(name);
    cases.back().exact = exact;
    return cases.back();
  };
  GradCheckCase& actor_net = make_case("actor network");
  GradCheckCase& critic_net = make_case("critic network");
  GradCheckCase& expected_net = make_case("expected-policy network");
  GradCheckCase& critic_l = make_case("critic loss");
  GradCheckCase& target_l = make_case("td target (constant)", true);
  GradCheckCase& actor_l = make_case("actor loss");
  GradCheckCase& expected_l = make_case("expected-policy loss");
  GradCheckCase& expected_hygiene = make_case("expected-policy loss, actor side (constant)", true);
  GradCheckCase& help_l = make_case("help loss");
  GradCheckCase& help_all = make_case("help loss, no selectivity");
  GradCheckCase& mh_l = make_case("mutual-help actor loss");
  GradCheckCase& alpha_c = make_case("mix ratio (constant)", true);
  alpha_c.limit = 1e-9;

  const std::size_t m = options.batch;
  std::size_t gates_seen = 0, gates_open = 0;
  for (std::size_t d = 0; d < options.draws; ++d) {
    World w(options.seed * 1000003ULL + d, m);
    const std::size_t i = d % w.specs.size();
    const std::size_t n = w.specs.size();

    {
      ActorNet& actor = w.actors[i];
      Parameter obs = random_parameter("obs", {m, w.specs[i].obs_dim}, w.rng);
      const Tensor weights = random_tensor({m, w.specs[i].act_dim}, w.rng);
      auto params = params_of(actor);
      params.push_back(&obs);
      check_gradient(actor_net, params, [&](Graph& g, std::vector<bool>&) {
        return g.sum(g.mul(actor.forward(g, g.parameter(obs)), g.constant(weights)));
      }, options);
    }
    {
      CriticNet& critic = w.critics[i];
      Parameter obs = random_parameter("obs", {m, joint_obs_dim(w.specs)}, w.rng);
      Parameter act = random_parameter("actions", {m, joint_act_dim(w.specs)}, w.rng);
      const Tensor weights = random_tensor({m, 1}, w.rng);
      auto params = params_of(critic);
      params.push_back(&obs);
      params.push_back(&act);
      check_gradient(critic_net, params, [&](Graph& g, std::vector<bool>&) {
        return g.sum(g.mul(critic.forward(g, g.parameter(obs), g.parameter(act)), g.constant(weights)));
      }, options);
    }
    {
      ExpectedNet& mu = w.expected[i];
      Parameter obs = random_parameter("obs", {m, joint_obs_dim(w.specs)}, w.rng);
      const Tensor weights = random_tensor({m, mu.output_dim()}, w.rng);
      auto params = params_of(mu);
      params.push_back(&obs);
      check_gradient(expected_net, params, [&](Graph& g, std::vector<bool>&) {
        return g.sum(g.mul(mu.forward(g, g.parameter(obs)), g.constant(weights)));
      }, options);
    }

    // Twin-critic bootstrap on odd draws so both forms are covered.
    std::vector<const QFunction*> targets{&w.target_critics[i]};
    if (d % 2 == 1) targets.push_back(&w.target_critics[(i + 1) % n]);
    const Tensor y = td_target(w.batch, i, targets, w.target_actor_ptrs(), kGamma);
    {
      auto params = params_of(w.critics[i]);
      check_gradient(critic_l, params, [&](Graph& g, std::vector<bool>&) {
        return critic_loss(g, w.critics[i], w.batch, y);
      }, options);

      // The target enters the loss as data: nothing upstream of it (target
      // nets, actors) may receive gradient.
      Graph g(options.fault);
      Var loss = critic_loss(g, w.critics[i], w.batch, y);
      std::vector<Parameter*> upstream;
      for (auto& net : w.target_critics) {
        for (Parameter* p : net.parameters()) upstream.push_back(p);
      }
      for (auto& net : w.target_actors) {
        for (Parameter* p : net.parameters()) upstream.push_back(p);
      }
      for (auto& net : w.actors) {
        for (Parameter* p : net.parameters()) upstream.push_back(p);
      }
      expect_zero(target_l, upstream, g, loss);
    }
    {
      auto params = params_of(w.actors[i]);
      check_gradient(actor_l, params, [&](Graph& g, std::vector<bool>&) {
        return actor_loss(g, w.actors[i], w.critics[i], w.batch, i);
      }, options);
    }
    {
      auto params = params_of(w.expected[i]);
      check_gradient(expected_l, params, [&](Graph& g, std::vector<bool>&) {
        return expected_loss(g, w.expected[i], w.critics[i], w.actors[i], w.batch);
      }, options);

      Graph g(options.fault);
      Var loss = expected_loss(g, w.expected[i], w.critics[i], w.actors[i], w.batch);
      auto actor_params = params_of(w.actors[i]);
      auto critic_params = params_of(w.critics[i]);
      actor_params.insert(actor_params.end(), critic_params.begin(), critic_params.end());
      expect_zero(expected_hygiene, actor_params, g, loss);
    }

    const auto teachers = w.teachers_of(i);
    for (bool selective : {true, false}) {
      auto params = params_of(w.actors[i]);
      check_gradient(selective ? help_l : help_all, params, [&](Graph& g, std::vector<bool>& sig) {
        const HelpLoss h = help_loss(g, w.actors[i], w.critics[i], teachers, w.batch, i, kEta, selective);
        append_gates(sig, h);
        return h.loss;
      }, options);
    }
    {
      Graph g;
      const HelpLoss h = help_loss(g, w.actors[i], w.critics[i], teachers, w.batch, i, kEta);
      for (double v : h.gates.data()) {
        ++gates_seen;
        gates_open += v != 0.0;
      }
    }
    {
      const double alpha = mix_ratio_alpha(w.actors[i], w.critics[i], w.batch, i, kBeta);
      auto params = params_of(w.actors[i]);
      check_gradient(mh_l, params, [&](Graph& g, std::vector<bool>& sig) {
        const PolicyEval eval = evaluate_policy(g, w.batch, i, w.actors[i], w.critics[i]);
        const HelpLoss h = help_loss(g, eval, w.critics[i], teachers, kEta);
        append_gates(sig, h);
        return mh_actor_loss(g, actor_loss(g, eval), h.loss, alpha);
      }, options);

      // alpha scales the help gradient but contributes none of its own:
      // grad(L_actor + alpha L_help) == grad(L_actor) + alpha grad(L_help).
      Graph g(options.fault);
      const PolicyEval eval = evaluate_policy(g, w.batch, i, w.actors[i], w.critics[i]);
      Var base = actor_loss(g, eval);
      const HelpLoss h = help_loss(g, eval, w.critics[i], teachers, kEta);
      const double a = mix_ratio_alpha(g, eval, kBeta);
      Var total = mh_actor_loss(g, base, h.loss, a);
      const auto g_total = g.backward(total).for_parameters(params);
      const auto g_base = g.backward(base).for_parameters(params);
      const auto g_help = g.backward(h.loss).for_parameters(params);
      ++alpha_c.draws;
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t k = 0; k < g_total[p].size(); ++k) {
          const double expect = g_base[p][k] + a * g_help[p][k];
          const double err = std::fabs(g_total[p][k] - expect) / std::max(std::fabs(expect), 1e-6);
          ++alpha_c.checked;
          if (err > alpha_c.max_rel_error) {
            alpha_c.max_rel_error = err;
            alpha_c.detail = "worst at " + params[p]->name;
          }
        }
      }
    }
  }

  help_l.note = "open gates " + std::to_string(gates_open) + "/" + std::to_string(gates_seen);
  for (auto& c : cases) finish(c, options);
  GradCheckReport report;
  report.cases = std::move(cases);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string format_report(const GradCheckReport& report) {
  std::string out;
  char line[256];
  for (const auto& c : report.cases) {
    if (c.exact) {
      std::snprintf(line, sizeof(line), "%-4s %-46s draws=%zu entries=%zu max_err=%.3g%s%s\n", c.passed ? "ok" : "FAIL",
                    c.name.c_str(), c.draws, c.checked, c.max_rel_error, c.detail.empty() ? "" : "  ",
                    c.detail.c_str());
    } else {
      std::snprintf(line, sizeof(line), "%-4s %-46s draws=%zu checked=%zu skipped=%zu max_rel=%.3g%s%s%s%s\n",
                    c.passed ? "ok" : "FAIL", c.name.c_str(), c.draws, c.checked, c.skipped, c.max_rel_error,
                    c.note.empty() ? "" : "  ", c.note.c_str(), c.passed || c.detail.empty() ? "" : "  ",
                    c.passed ? "" : c.detail.c_str());
    }
    out += line;
  }
  std::snprintf(line, sizeof(line), "%s in %.1fs\n", report.passed() ? "gradcheck passed" : "gradcheck FAILED",
                report.seconds);
  out += line;
  return out;
}

}  // namespace mhmarl::verify
