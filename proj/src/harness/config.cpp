#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "matd3/harness/config.hpp"

namespace matd3::harness {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("config: key '" + key + "' expects true or false, got '" + value + "'");
}

std::vector<std::uint64_t> parse_seeds(const std::string& value) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      seeds.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw ConfigError("config: bad seed '" + tok + "'");
    }
  }
  return seeds;
}

}  // namespace

const std::vector<std::string>& hyperparam_keys() {
  static const std::vector<std::string> keys = {
      "gamma",          "tau",        "policy_delay",      "smoothing_sigma",
      "smoothing_clip", "lr",         "batch_size",        "buffer_capacity",
      "exploration_noise", "episodes", "steps_per_episode", "gumbel_temperature",
      "hidden_units",   "policy_output"};
  return keys;
}

void apply_hyperparam(marl::HyperParams& hp, const std::string& key, const std::string& value) {
  if (key == "gamma") hp.gamma = parse_double(key, value);
  else if (key == "tau") hp.tau = parse_double(key, value);
  else if (key == "policy_delay") hp.policy_delay = static_cast<int>(parse_long(key, value));
  else if (key == "smoothing_sigma") hp.smoothing_sigma = parse_double(key, value);
  else if (key == "smoothing_clip") hp.smoothing_clip = parse_double(key, value);
  else if (key == "lr") hp.lr = parse_double(key, value);
  else if (key == "batch_size") hp.batch_size = static_cast<int>(parse_long(key, value));
  else if (key == "buffer_capacity")
    hp.buffer_capacity = static_cast<std::size_t>(parse_long(key, value));
  else if (key == "exploration_noise") hp.exploration_noise = parse_double(key, value);
  else if (key == "episodes") hp.episodes = static_cast<int>(parse_long(key, value));
  else if (key == "steps_per_episode")
    hp.steps_per_episode = static_cast<int>(parse_long(key, value));
  else if (key == "gumbel_temperature") hp.gumbel_temperature = parse_double(key, value);
  else if (key == "hidden_units") hp.hidden_units = static_cast<int>(parse_long(key, value));
  else if (key == "policy_output") {
    if (value == "sigmoid") hp.sigmoid_policy = true;
    else if (value == "identity") hp.sigmoid_policy = false;
    else
      throw ConfigError("config: policy_output expects sigmoid or identity, got '" + value + "'");
  } else {
    throw ConfigError("config: unknown hyperparameter '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) throw ConfigError("config: seeds must be distinct");
  if (output_dir.empty()) throw ConfigError("config: output_dir must be nonempty");
  if (eval_cadence < 1) throw ConfigError("config: eval_cadence must be >= 1");
  if (probe.pairs_per_eval < 1) throw ConfigError("config: pairs_per_eval must be >= 1");
  if (probe.n_rollouts < 1) throw ConfigError("config: n_rollouts must be >= 1");
  if (probe.rollout_len < 1) throw ConfigError("config: rollout_len must be >= 1");
  try {
    marl::algorithm_from_string(algorithm);
    env::ScenarioRegistry::instance().create(scenario);  // throws if unregistered
    hp.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig config;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "experiment" && section != "hyperparams" && section != "probe")
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown section [" +
                          section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": key outside any section");
    if (section == "experiment") {
      if (key == "scenario") config.scenario = value;
      else if (key == "algorithm") config.algorithm = value;
      else if (key == "seeds") config.seeds = parse_seeds(value);
      else if (key == "output_dir") config.output_dir = value;
      else if (key == "eval_cadence") config.eval_cadence = parse_long(key, value);
      else if (key == "probe_enabled") config.probe_enabled = parse_bool(key, value);
      else
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                          "' in [experiment]");
    } else if (section == "hyperparams") {
      try {
        apply_hyperparam(config.hp, key, value);
      } catch (const ConfigError& e) {
        throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
      }
    } else {  // probe
      if (key == "pairs_per_eval")
        config.probe.pairs_per_eval = static_cast<int>(parse_long(key, value));
      else if (key == "n_rollouts") config.probe.n_rollouts = static_cast<int>(parse_long(key, value));
      else if (key == "rollout_len")
        config.probe.rollout_len = static_cast<int>(parse_long(key, value));
      else
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                          "' in [probe]");
    }
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  return parse_config(is);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "[experiment]\n";
  os << "scenario = " << c.scenario << "\n";
  os << "algorithm = " << c.algorithm << "\n";
  os << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? "," : "") << c.seeds[i];
  os << "\n";
  os << "output_dir = " << c.output_dir << "\n";
  os << "eval_cadence = " << c.eval_cadence << "\n";
  os << "probe_enabled = " << (c.probe_enabled ? "true" : "false") << "\n";
  os << "\n[hyperparams]\n";
  os << "gamma = " << fmt(c.hp.gamma) << "\n";
  os << "tau = " << fmt(c.hp.tau) << "\n";
  os << "policy_delay = " << c.hp.policy_delay << "\n";
  os << "smoothing_sigma = " << fmt(c.hp.smoothing_sigma) << "\n";
  os << "smoothing_clip = " << fmt(c.hp.smoothing_clip) << "\n";
  os << "lr = " << fmt(c.hp.lr) << "\n";
  os << "batch_size = " << c.hp.batch_size << "\n";
  os << "buffer_capacity = " << c.hp.buffer_capacity << "\n";
  os << "exploration_noise = " << fmt(c.hp.exploration_noise) << "\n";
  os << "episodes = " << c.hp.episodes << "\n";
  os << "steps_per_episode = " << c.hp.steps_per_episode << "\n";
  os << "gumbel_temperature = " << fmt(c.hp.gumbel_temperature) << "\n";
  os << "hidden_units = " << c.hp.hidden_units << "\n";
  os << "policy_output = " << (c.hp.sigmoid_policy ? "sigmoid" : "identity") << "\n";
  os << "\n[probe]\n";
  os << "pairs_per_eval = " << c.probe.pairs_per_eval << "\n";
  os << "n_rollouts = " << c.probe.n_rollouts << "\n";
  os << "rollout_len = " << c.probe.rollout_len << "\n";
  return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = serialize_config(config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : text) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string output_header(const ExperimentConfig& config) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  return std::string("# config_hash=") + buf + " build=" + MATD3_BUILD_ID;
}

}  // namespace matd3::harness
