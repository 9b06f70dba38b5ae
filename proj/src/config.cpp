#include "mhmarl/config.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mhmarl/io_util.hpp"

namespace mhmarl {

std::string_view to_string(Backend backend) { return backend == Backend::maddpg ? "maddpg" : "matd3"; }

std::string_view to_string(RewardScheme scheme) {
  return scheme == RewardScheme::local ? "local" : "global_sum";
}

void TrainConfig::validate() const {
  hp.validate();
  if (!mutual_help && !marl_term) {
    throw std::invalid_argument("marl_term = false requires mutual_help = true");
  }
  if (!(noise_sigma_start >= 0.0 && noise_sigma_end >= 0.0)) {
    throw std::invalid_argument("exploration noise must be non-negative");
  }
  if (total_steps == 0) throw std::invalid_argument("total_steps must be positive");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be positive");
  if (eval_episodes == 0) throw std::invalid_argument("eval_episodes must be positive");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (n_agents < 2) throw std::invalid_argument("at least two agents are required");
  if (buffer_capacity < hp.batch_size) throw std::invalid_argument("buffer capacity is smaller than a minibatch");
  if (policy_delay == 0) throw std::invalid_argument("policy_delay must be positive");
  if (!(target_noise >= 0.0 && target_noise_clip >= 0.0)) {
    throw std::invalid_argument("target smoothing noise must be non-negative");
  }
  if (env != "flocking" && env != "coordination") throw std::invalid_argument("unknown environment '" + env + "'");
  if (env == "coordination" && n_agents != 2) throw std::invalid_argument("the coordination game has 2 agents");
  if (algorithm.find_first_of("/\\, \t\n") != std::string::npos) {
    throw std::invalid_argument("algorithm label must not contain separators or whitespace");
  }
}

std::string TrainConfig::algorithm_name() const {
  if (!algorithm.empty()) return algorithm;
  std::string base(to_string(backend));
  if (!mutual_help) return reward_scheme == RewardScheme::global_sum ? base + "-gr" : base;
  std::string name = "mh-" + base;
  if (reward_scheme == RewardScheme::global_sum) name += "-gr";
  if (!selectivity) name += "-no-selectivity";
  if (!marl_term) name += "-no-marl";
  return name;
}

TrainConfig preset(std::string_view algorithm) {
  TrainConfig c;
  const std::string a(algorithm);
  if (a == "maddpg" || a == "no-help") {
    c.mutual_help = false;
  } else if (a == "mh-maddpg") {
  } else if (a == "maddpg-gr") {
    c.mutual_help = false;
    c.reward_scheme = RewardScheme::global_sum;
  } else if (a == "no-selectivity") {
    c.selectivity = false;
  } else if (a == "no-marl") {
    c.marl_term = false;
  } else if (a == "matd3") {
    c.backend = Backend::matd3;
    c.mutual_help = false;
  } else if (a == "mh-matd3") {
    c.backend = Backend::matd3;
  } else if (a == "matd3-gr") {
    c.backend = Backend::matd3;
    c.mutual_help = false;
    c.reward_scheme = RewardScheme::global_sum;
  } else {
    throw std::invalid_argument("unknown algorithm preset '" + a + "'");
  }
  if (a == "no-help" || a == "no-selectivity" || a == "no-marl") c.algorithm = a;
  return c;
}

std::vector<std::string> preset_names() {
  return {"maddpg", "mh-maddpg", "maddpg-gr", "no-help", "no-selectivity", "no-marl", "matd3", "mh-matd3", "matd3-gr"};
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_count(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty()) {
    throw std::invalid_argument("config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                                std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  try {
    return parse_double(v);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("config key '" + std::string(key) + "': expected a number, got '" + std::string(v) +
                                "'");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + std::string(key) + "': expected true/false, got '" + std::string(v) +
                              "'");
}

}  // namespace

void apply_setting(TrainConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  if (key == "backend") {
    if (v == "maddpg") c.backend = Backend::maddpg;
    else if (v == "matd3") c.backend = Backend::matd3;
    else throw std::invalid_argument("config key 'backend': expected maddpg or matd3");
  } else if (key == "mutual_help") {
    c.mutual_help = parse_bool(key, v);
  } else if (key == "selectivity") {
    c.selectivity = parse_bool(key, v);
  } else if (key == "marl_term") {
    c.marl_term = parse_bool(key, v);
  } else if (key == "reward_scheme") {
    if (v == "local") c.reward_scheme = RewardScheme::local;
    else if (v == "global_sum") c.reward_scheme = RewardScheme::global_sum;
    else throw std::invalid_argument("config key 'reward_scheme': expected local or global_sum");
  } else if (key == "gamma") {
    c.hp.gamma = parse_real(key, v);
  } else if (key == "tau") {
    c.hp.tau = parse_real(key, v);
  } else if (key == "eta") {
    c.hp.eta = parse_real(key, v);
  } else if (key == "beta") {
    c.hp.beta = parse_real(key, v);
  } else if (key == "batch_size") {
    c.hp.batch_size = parse_count(key, v);
  } else if (key == "lr_actor") {
    c.hp.lr_actor = parse_real(key, v);
  } else if (key == "lr_critic") {
    c.hp.lr_critic = parse_real(key, v);
  } else if (key == "lr_expected") {
    c.hp.lr_expected = parse_real(key, v);
  } else if (key == "noise_sigma_start") {
    c.noise_sigma_start = parse_real(key, v);
  } else if (key == "noise_sigma_end") {
    c.noise_sigma_end = parse_real(key, v);
  } else if (key == "warmup") {
    c.warmup = parse_count(key, v);
  } else if (key == "total_steps") {
    c.total_steps = parse_count(key, v);
  } else if (key == "eval_every") {
    c.eval_every = parse_count(key, v);
  } else if (key == "eval_episodes") {
    c.eval_episodes = parse_count(key, v);
  } else if (key == "seeds") {
    c.seeds.clear();
    std::string_view rest = v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      c.seeds.push_back(parse_count(key, trim(rest.substr(0, comma))));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  } else if (key == "env") {
    c.env = std::string(v);
  } else if (key == "n_agents") {
    c.n_agents = parse_count(key, v);
  } else if (key == "buffer_capacity") {
    c.buffer_capacity = parse_count(key, v);
  } else if (key == "policy_delay") {
    c.policy_delay = parse_count(key, v);
  } else if (key == "target_noise") {
    c.target_noise = parse_real(key, v);
  } else if (key == "target_noise_clip") {
    c.target_noise_clip = parse_real(key, v);
  } else if (key == "algorithm") {
    c.algorithm = std::string(v);
  } else {
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  }
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::size_t line_no = 0;
  std::set<std::string, std::less<>> seen;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    if (!seen.emplace(key).second) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) +
                                  "'");
    }
    try {
      apply_setting(base, key, line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  return parse_config(read_file(path), std::move(base));
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream out;
  auto b = [](bool x) { return x ? "true" : "false"; };
  out << "backend = " << to_string(c.backend) << '\n'
      << "mutual_help = " << b(c.mutual_help) << '\n'
      << "selectivity = " << b(c.selectivity) << '\n'
      << "marl_term = " << b(c.marl_term) << '\n'
      << "reward_scheme = " << to_string(c.reward_scheme) << '\n'
      << "gamma = " << format_double(c.hp.gamma) << '\n'
      << "tau = " << format_double(c.hp.tau) << '\n'
      << "eta = " << format_double(c.hp.eta) << '\n'
      << "beta = " << format_double(c.hp.beta) << '\n'
      << "batch_size = " << c.hp.batch_size << '\n'
      << "lr_actor = " << format_double(c.hp.lr_actor) << '\n'
      << "lr_critic = " << format_double(c.hp.lr_critic) << '\n'
      << "lr_expected = " << format_double(c.hp.lr_expected) << '\n'
      << "noise_sigma_start = " << format_double(c.noise_sigma_start) << '\n'
      << "noise_sigma_end = " << format_double(c.noise_sigma_end) << '\n'
      << "warmup = " << c.warmup << '\n'
      << "total_steps = " << c.total_steps << '\n'
      << "eval_every = " << c.eval_every << '\n'
      << "eval_episodes = " << c.eval_episodes << '\n'
      << "seeds = ";
  for (std::size_t k = 0; k < c.seeds.size(); ++k) out << (k ? "," : "") << c.seeds[k];
  out << '\n'
      << "env = " << c.env << '\n'
      << "n_agents = " << c.n_agents << '\n'
      << "buffer_capacity = " << c.buffer_capacity << '\n'
      << "policy_delay = " << c.policy_delay << '\n'
      << "target_noise = " << format_double(c.target_noise) << '\n'
      << "target_noise_clip = " << format_double(c.target_noise_clip) << '\n';
  if (!c.algorithm.empty()) out << "algorithm = " << c.algorithm << '\n';
  return out.str();
}

}  // namespace mhmarl
