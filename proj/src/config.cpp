#include "mmsc/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mmsc {

AppConfig AppConfig::defaults(PdeType pde) {
  AppConfig c;
  c.episode = EpisodeConfig::defaults(pde);
  return c;
}

void AppConfig::validate() const {
  episode.validate();
  rl.validate();
  if (eval_samples < 1) throw std::invalid_argument("eval.samples must be >= 1");
  for (double t : snapshot_times)
    if (t < 0.0) throw std::invalid_argument("eval.snapshot_times must be nonnegative");
  if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct KeyValue {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<KeyValue> tokenize(const std::string& text) {
  std::vector<KeyValue> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    KeyValue kv;
    kv.section = section;
    kv.key = trim(line.substr(0, eq));
    kv.value = trim(line.substr(eq + 1));
    kv.line = lineno;
    if (kv.key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

[[noreturn]] void fail_key(const KeyValue& kv, const std::string& why) {
  std::string name = kv.section.empty() ? kv.key : kv.section + "." + kv.key;
  throw std::invalid_argument("config line " + std::to_string(kv.line) + ": key '" + name + "' " + why);
}

double parse_double(const KeyValue& kv) {
  try {
    size_t pos = 0;
    double v = std::stod(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    fail_key(kv, "has a malformed number: '" + kv.value + "'");
  }
}

int parse_int(const KeyValue& kv) {
  try {
    size_t pos = 0;
    long v = std::stol(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return static_cast<int>(v);
  } catch (...) {
    fail_key(kv, "has a malformed integer: '" + kv.value + "'");
  }
}

std::uint64_t parse_u64(const KeyValue& kv) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    fail_key(kv, "has a malformed unsigned integer: '" + kv.value + "'");
  }
}

bool parse_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1") return true;
  if (kv.value == "false" || kv.value == "0") return false;
  fail_key(kv, "expects true/false");
}

std::vector<double> parse_double_list(const KeyValue& kv) {
  std::vector<double> out;
  std::istringstream ss(kv.value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      fail_key(kv, "has a malformed list entry: '" + tok + "'");
    }
  }
  if (out.empty()) fail_key(kv, "expects a comma-separated list of numbers");
  return out;
}

void apply_key(AppConfig& c, const KeyValue& kv) {
  const std::string& s = kv.section;
  const std::string& k = kv.key;

  if (s.empty()) {
    if (k == "seed") c.seed = parse_u64(kv);
    else if (k == "out_dir") c.out_dir = kv.value;
    else if (k == "deterministic") c.deterministic = parse_bool(kv);
    else fail_key(kv, "is unknown");
    return;
  }
  if (s == "pde") {
    if (k == "kind") return;  // applied in the pre-pass
    else if (k == "nu") c.episode.nu = parse_double(kv);
    else if (k == "coarse_n") c.episode.coarse_n = parse_int(kv);
    else if (k == "fine_n") c.episode.fine_n = parse_int(kv);
    else if (k == "coarse_dt") c.episode.coarse_dt = parse_double(kv);
    else if (k == "fine_dt") c.episode.fine_dt = parse_double(kv);
    else fail_key(kv, "is unknown");
    return;
  }
  if (s == "env") {
    if (k == "max_steps") c.episode.max_steps = parse_int(kv);
    else if (k == "mae_threshold") c.episode.mae_threshold = parse_double(kv);
    else fail_key(kv, "is unknown");
    return;
  }
  if (s == "rl") {
    if (k == "learning_rate") c.rl.learning_rate = parse_double(kv);
    else if (k == "entropy_coef") c.rl.entropy_coef = parse_double(kv);
    else if (k == "discount") c.rl.discount = parse_double(kv);
    else if (k == "epochs") c.rl.epochs = parse_int(kv);
    else if (k == "transitions_per_epoch") c.rl.transitions_per_epoch = parse_int(kv);
    else if (k == "episodes_per_update") c.rl.episodes_per_update = parse_int(kv);
    else if (k == "batch_size") c.rl.batch_size = parse_int(kv);
    else if (k == "repeat_per_collect") c.rl.repeat_per_collect = parse_int(kv);
    else if (k == "validation_episodes") c.rl.validation_episodes = parse_int(kv);
    else if (k == "clip_ratio") c.rl.clip_ratio = parse_double(kv);
    else if (k == "gae_lambda") c.rl.gae_lambda = parse_double(kv);
    else if (k == "value_coef") c.rl.value_coef = parse_double(kv);
    else if (k == "max_grad_norm") c.rl.max_grad_norm = parse_double(kv);
    else if (k == "return_normalization") c.rl.return_normalization = parse_bool(kv);
    else if (k == "checkpoint_every") c.rl.checkpoint_every = parse_int(kv);
    else fail_key(kv, "is unknown");
    return;
  }
  if (s == "eval") {
    if (k == "samples") c.eval_samples = parse_int(kv);
    else if (k == "snapshot_times") c.snapshot_times = parse_double_list(kv);
    else fail_key(kv, "is unknown");
    return;
  }
  fail_key(kv, "is in an unknown section");
}

}  // namespace

AppConfig parse_config_text(const std::string& text) {
  std::vector<KeyValue> kvs = tokenize(text);

  // The PDE kind picks the per-kind defaults, so resolve it before anything.
  PdeType pde = PdeType::burgers_1d;
  for (const auto& kv : kvs)
    if (kv.section == "pde" && kv.key == "kind") {
      try {
        pde = pde_from_string(kv.value);
      } catch (const std::exception& e) {
        fail_key(kv, std::string("is invalid: ") + e.what());
      }
    }

  AppConfig c = AppConfig::defaults(pde);
  for (const auto& kv : kvs) apply_key(c, kv);

  try {
    c.validate();
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("invalid config: ") + e.what());
  }
  return c;
}

AppConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const AppConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "seed = " << c.seed << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  out << "deterministic = " << (c.deterministic ? "true" : "false") << "\n\n";
  out << "[pde]\n";
  out << "kind = " << to_string(c.episode.pde) << "\n";
  out << "nu = " << c.episode.nu << "\n";
  out << "coarse_n = " << c.episode.coarse_n << "\n";
  out << "fine_n = " << c.episode.fine_n << "\n";
  out << "coarse_dt = " << c.episode.coarse_dt << "\n";
  out << "fine_dt = " << c.episode.fine_dt << "\n\n";
  out << "[env]\n";
  out << "max_steps = " << c.episode.max_steps << "\n";
  out << "mae_threshold = " << c.episode.mae_threshold << "\n\n";
  out << "[rl]\n";
  out << "learning_rate = " << c.rl.learning_rate << "\n";
  out << "entropy_coef = " << c.rl.entropy_coef << "\n";
  out << "discount = " << c.rl.discount << "\n";
  out << "epochs = " << c.rl.epochs << "\n";
  out << "transitions_per_epoch = " << c.rl.transitions_per_epoch << "\n";
  out << "episodes_per_update = " << c.rl.episodes_per_update << "\n";
  out << "batch_size = " << c.rl.batch_size << "\n";
  out << "repeat_per_collect = " << c.rl.repeat_per_collect << "\n";
  out << "validation_episodes = " << c.rl.validation_episodes << "\n";
  out << "clip_ratio = " << c.rl.clip_ratio << "\n";
  out << "gae_lambda = " << c.rl.gae_lambda << "\n";
  out << "value_coef = " << c.rl.value_coef << "\n";
  out << "max_grad_norm = " << c.rl.max_grad_norm << "\n";
  out << "return_normalization = " << (c.rl.return_normalization ? "true" : "false") << "\n";
  out << "checkpoint_every = " << c.rl.checkpoint_every << "\n\n";
  out << "[eval]\n";
  out << "samples = " << c.eval_samples << "\n";
  out << "snapshot_times = ";
  for (size_t i = 0; i < c.snapshot_times.size(); ++i)
    out << (i ? "," : "") << c.snapshot_times[i];
  out << "\n";
  return out.str();
}

void write_manifest(const AppConfig& c, const std::string& subcommand, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format_version"] = 1;
  j["subcommand"] = subcommand;
  j["seed"] = c.seed;
  j["deterministic"] = c.deterministic;
  j["pde"] = {{"kind", to_string(c.episode.pde)},
              {"nu", c.episode.nu},
              {"coarse_n", c.episode.coarse_n},
              {"fine_n", c.episode.fine_n},
              {"coarse_dt", c.episode.coarse_dt},
              {"fine_dt", c.episode.fine_dt}};
  j["env"] = {{"max_steps", c.episode.max_steps}, {"mae_threshold", c.episode.mae_threshold}};
  j["rl"] = {{"learning_rate", c.rl.learning_rate},
             {"entropy_coef", c.rl.entropy_coef},
             {"discount", c.rl.discount},
             {"epochs", c.rl.epochs},
             {"transitions_per_epoch", c.rl.transitions_per_epoch},
             {"episodes_per_update", c.rl.episodes_per_update},
             {"batch_size", c.rl.batch_size},
             {"repeat_per_collect", c.rl.repeat_per_collect},
             {"validation_episodes", c.rl.validation_episodes},
             {"clip_ratio", c.rl.clip_ratio},
             {"gae_lambda", c.rl.gae_lambda},
             {"value_coef", c.rl.value_coef},
             {"max_grad_norm", c.rl.max_grad_norm},
             {"return_normalization", c.rl.return_normalization},
             {"checkpoint_every", c.rl.checkpoint_every}};
  j["eval"] = {{"samples", c.eval_samples}, {"snapshot_times", c.snapshot_times}};

  std::ofstream out(dir + "/run.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << j.dump(2) << "\n";
}

}  // namespace mmsc
