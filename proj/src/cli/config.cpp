#include "mfls/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "mfls/util/error.hpp"
#include "mfls/util/rng.hpp"

namespace mfls::cli {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n"), e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

std::map<std::string, Setter> train_setters() {
  std::map<std::string, Setter> m;
  auto d = [&](const char* k, double levelset::TrainConfig::*f) {
    m[k] = [f, k](RunConfig& c, const std::string& v) { c.train.*f = to_double(std::string("train.") + k, v); };
  };
  auto n = [&](const char* k, std::size_t levelset::TrainConfig::*f) {
    m[k] = [f, k](RunConfig& c, const std::string& v) { c.train.*f = to_count(std::string("train.") + k, v); };
  };
  auto b = [&](const char* k, bool levelset::TrainConfig::*f) {
    m[k] = [f, k](RunConfig& c, const std::string& v) { c.train.*f = to_bool(std::string("train.") + k, v); };
  };
  n("particles", &levelset::TrainConfig::particles);
  n("groups", &levelset::TrainConfig::groups);
  d("z_lo", &levelset::TrainConfig::z_lo);
  d("z_hi", &levelset::TrainConfig::z_hi);
  n("grid_points", &levelset::TrainConfig::grid_points);
  d("epsilon", &levelset::TrainConfig::epsilon);
  n("iterations", &levelset::TrainConfig::iterations);
  d("learning_rate", &levelset::TrainConfig::learning_rate);
  b("common", &levelset::TrainConfig::common);
  n("z_per_iteration", &levelset::TrainConfig::z_per_iteration);
  n("eval_particles", &levelset::TrainConfig::eval_particles);
  n("eval_groups", &levelset::TrainConfig::eval_groups);
  n("eval_replicates", &levelset::TrainConfig::eval_replicates);
  b("use_baseline", &levelset::TrainConfig::use_baseline);
  n("baseline_groups", &levelset::TrainConfig::baseline_groups);
  n("pilot_groups", &levelset::TrainConfig::pilot_groups);
  n("log_every", &levelset::TrainConfig::log_every);
  m["hidden"] = [](RunConfig& c, const std::string& v) {
    c.train.arch.hidden.clear();
    for (double h : to_list("train.hidden", v)) {
      if (h < 1 || h != static_cast<double>(static_cast<std::size_t>(h)))
        throw ConfigError("train.hidden: widths must be positive integers");
      c.train.arch.hidden.push_back(static_cast<std::size_t>(h));
    }
  };
  m["activation"] = [](RunConfig& c, const std::string& v) {
    if (v == "tanh") c.train.arch.activation = nn::Activation::tanh;
    else if (v == "identity") c.train.arch.activation = nn::Activation::identity;
    else throw ConfigError("train.activation: expected tanh or identity");
  };
  return m;
}

std::map<std::string, Setter> problem_setters(const std::string& id) {
  std::map<std::string, Setter> m;
  if (id == "mv-dual" || id == "mv-constrained" || id == "mv-primal") {
    auto d = [&](const char* k, double benchmarks::MeanVarianceParams::*f) {
      m[k] = [f, k](RunConfig& c, const std::string& v) { c.problem.mv.*f = to_double(std::string("problem.") + k, v); };
    };
    d("r", &benchmarks::MeanVarianceParams::r);
    d("sigma", &benchmarks::MeanVarianceParams::sigma);
    d("lambda", &benchmarks::MeanVarianceParams::lambda);
    d("horizon", &benchmarks::MeanVarianceParams::horizon);
    d("x0", &benchmarks::MeanVarianceParams::x0);
    if (id == "mv-constrained") {
      d("theta", &benchmarks::MeanVarianceParams::theta);
      d("delta", &benchmarks::MeanVarianceParams::delta);
    }
    if (id == "mv-primal") d("vartheta", &benchmarks::MeanVarianceParams::vartheta);
    m["steps"] = [](RunConfig& c, const std::string& v) { c.problem.mv_steps = to_count("problem.steps", v); };
  } else if (id == "storage") {
    auto d = [&](const char* k, double benchmarks::StorageParams::*f) {
      m[k] = [f, k](RunConfig& c, const std::string& v) { c.problem.storage.*f = to_double(std::string("problem.") + k, v); };
    };
    auto dm = [&](const char* k, double dynamics::StorageMarketParams::*f) {
      m[k] = [f, k](RunConfig& c, const std::string& v) {
        c.problem.storage.market.*f = to_double(std::string("problem.") + k, v);
      };
    };
    d("horizon", &benchmarks::StorageParams::horizon);
    d("x_max", &benchmarks::StorageParams::x_max);
    d("x0", &benchmarks::StorageParams::x0);
    d("p0", &benchmarks::StorageParams::p0);
    d("a_lo", &benchmarks::StorageParams::a_lo);
    d("a_hi", &benchmarks::StorageParams::a_hi);
    d("price_impact", &benchmarks::StorageParams::theta);
    dm("forward_base", &dynamics::StorageMarketParams::base);
    dm("forward_amplitude_long", &dynamics::StorageMarketParams::amplitude_long);
    dm("forward_period_long", &dynamics::StorageMarketParams::period_long);
    dm("forward_amplitude_short", &dynamics::StorageMarketParams::amplitude_short);
    dm("forward_period_short", &dynamics::StorageMarketParams::period_short);
    dm("sigma_f", &dynamics::StorageMarketParams::sigma_f);
    dm("mean_reversion", &dynamics::StorageMarketParams::mean_reversion);
    dm("iota", &dynamics::StorageMarketParams::iota);
    dm("sigma_p", &dynamics::StorageMarketParams::sigma_p);
    dm("phi", &dynamics::StorageMarketParams::phi);
    dm("p_max", &dynamics::StorageMarketParams::p_max);
    dm("rho", &dynamics::StorageMarketParams::rho);
    m["steps"] = [](RunConfig& c, const std::string& v) { c.problem.storage.steps = to_count("problem.steps", v); };
  } else if (id == "trivial") {
    m["steps"] = [](RunConfig& c, const std::string& v) { c.problem.trivial_steps = to_count("problem.steps", v); };
  }
  return m;
}

std::map<std::string, Setter> simple_setters(const std::string& section) {
  std::map<std::string, Setter> m;
  if (section == "penalty") {
    m["kind"] = [](RunConfig& c, const std::string& v) { c.train.penalty.kind = constraints::penalty_kind_from_string(v); };
    m["weight"] = [](RunConfig& c, const std::string& v) { c.train.penalty.weight = to_double("penalty.weight", v); };
  } else if (section == "evaluate") {
    m["particles"] = [](RunConfig& c, const std::string& v) { c.evaluate.particles = to_count("evaluate.particles", v); };
    m["groups"] = [](RunConfig& c, const std::string& v) { c.evaluate.groups = to_count("evaluate.groups", v); };
    m["keep_particles"] = [](RunConfig& c, const std::string& v) {
      c.evaluate.keep_particles = to_count("evaluate.keep_particles", v);
    };
    m["z0"] = [](RunConfig& c, const std::string& v) { c.evaluate.z0 = to_double("evaluate.z0", v); };
  } else if (section == "curve") {
    m["particles"] = [](RunConfig& c, const std::string& v) { c.curve.particles = to_count("curve.particles", v); };
    m["groups"] = [](RunConfig& c, const std::string& v) { c.curve.groups = to_count("curve.groups", v); };
    m["replicates"] = [](RunConfig& c, const std::string& v) { c.curve.replicates = to_count("curve.replicates", v); };
  } else if (section == "oracle") {
    m["x_nodes"] = [](RunConfig& c, const std::string& v) { c.dp.x_nodes = to_count("oracle.x_nodes", v); };
    m["p_nodes"] = [](RunConfig& c, const std::string& v) { c.dp.p_nodes = to_count("oracle.p_nodes", v); };
    m["e_nodes"] = [](RunConfig& c, const std::string& v) { c.dp.e_nodes = to_count("oracle.e_nodes", v); };
    m["e_width"] = [](RunConfig& c, const std::string& v) { c.dp.e_width = to_double("oracle.e_width", v); };
    m["levels"] = [](RunConfig& c, const std::string& v) { c.dp_levels = to_count("oracle.levels", v); };
  } else if (section == "run") {
    // benchmark and scale are read first
    m["benchmark"] = [](RunConfig&, const std::string&) {};
    m["scale"] = [](RunConfig&, const std::string&) {};
    m["seed"] = [](RunConfig& c, const std::string& v) { c.seed = to_count("run.seed", v); };
    m["out"] = [](RunConfig& c, const std::string& v) { c.out = v; };
    m["threads"] = [](RunConfig& c, const std::string& v) { c.threads = static_cast<int>(to_count("run.threads", v)); };
    m["checkpoint"] = [](RunConfig& c, const std::string& v) { c.checkpoint = v; };
  }
  return m;
}

constraints::ConstraintSpec parse_constraint(const std::string& name, const std::map<std::string, std::string>& kv) {
  const std::string where = "constraint." + name;
  auto get = [&](const char* k) -> std::optional<std::string> {
    auto it = kv.find(k);
    return it == kv.end() ? std::nullopt : std::optional<std::string>(it->second);
  };
  auto need = [&](const char* k) {
    auto v = get(k);
    if (!v) throw ConfigError(where + ": missing key '" + k + "'");
    return to_double(where + "." + k, *v);
  };
  static const std::map<std::string, std::vector<std::string>> allowed = {
      {"probability_of_set", {"lo", "hi", "level"}},
      {"as_distance", {"lo", "hi"}},
      {"tail_conditional", {"theta", "delta"}},
      {"squared_excursion", {"lo", "hi"}},
  };
  const auto kind = get("kind");
  if (!kind) throw ConfigError(where + ": missing key 'kind'");
  const auto it = allowed.find(*kind);
  if (it == allowed.end())
    throw ConfigError(where + ": kind '" + *kind +
                      "' is not available from a config file (use probability_of_set, as_distance, "
                      "tail_conditional or squared_excursion)");
  for (const auto& [k, v] : kv) {
    if (k == "kind" || k == "coordinate" || k == "times" || k == "terminal_only" || k == "kappa") continue;
    if (std::find(it->second.begin(), it->second.end(), k) == it->second.end())
      throw ConfigError(where + ": unknown key '" + k + "'");
  }
  const std::size_t coord = get("coordinate") ? to_count(where + ".coordinate", *get("coordinate")) : 0;
  constraints::ConstraintSpec s;
  if (*kind == "probability_of_set") s = constraints::ConstraintSpec::probability_of_set(need("lo"), need("hi"), need("level"), coord);
  else if (*kind == "as_distance") s = constraints::ConstraintSpec::as_distance(need("lo"), need("hi"), coord);
  else if (*kind == "tail_conditional") s = constraints::ConstraintSpec::tail(need("theta"), need("delta"), coord);
  else s = constraints::ConstraintSpec::excursion(need("lo"), need("hi"), coord);
  if (auto v = get("times")) s = constraints::ConstraintSpec::discrete_times(s, to_list(where + ".times", *v));
  if (auto v = get("terminal_only"); v && to_bool(where + ".terminal_only", *v))
    s = constraints::ConstraintSpec::terminal_only(s);
  if (auto v = get("kappa")) s = constraints::kappa_modify(s, to_double(where + ".kappa", *v));
  s.validate();
  return s;
}

}  // namespace

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig default_config(const std::string& benchmark, benchmarks::Scale scale) {
  RunConfig c;
  c.benchmark = benchmark;
  c.scale = scale;
  c.problem = benchmarks::default_params(benchmark, scale);
  c.train = benchmarks::default_train_config(benchmark, scale);
  if (benchmark == "storage") {
    c.evaluate.particles = 1;
    c.evaluate.groups = 20000;
  }
  if (scale == benchmarks::Scale::paper && benchmark == "storage") {
    c.dp = {101, 41, 61, 4.5};
  }
  std::string canon = "run.benchmark=" + benchmark + "\nrun.scale=" + benchmarks::to_string(scale) + "\n";
  c.explicit_settings = {{"run.benchmark", benchmark}, {"run.scale", benchmarks::to_string(scale)}};
  c.hash = fnv1a64(canon);
  return c;
}

namespace {

// read_ini only knows whole-line comments; drop "; ..." and "# ..." after whitespace.
std::string strip_inline_comments(const std::string& text) {
  std::istringstream in(text);
  std::string out, line;
  while (std::getline(in, line)) {
    for (std::size_t k = 1; k < line.size(); ++k)
      if ((line[k] == ';' || line[k] == '#') && (line[k - 1] == ' ' || line[k - 1] == '\t')) {
        line.erase(k);
        break;
      }
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& ini_text, const Overrides& ov) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(strip_inline_comments(ini_text));
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto run = tree.get_child_optional("run");
  if (!run || !run->get_optional<std::string>("benchmark"))
    throw ConfigError("config: [run] benchmark is required");
  const std::string id = trim(run->get<std::string>("benchmark"));
  std::string scale_text = trim(run->get<std::string>("scale", "desk"));
  if (ov.scale) scale_text = *ov.scale;
  const auto scale = benchmarks::scale_from_string(scale_text);
  RunConfig c = default_config(id, scale);

  std::map<std::string, std::string> settings;
  const auto train = train_setters();
  const auto problem = problem_setters(id);
  for (const auto& [section, node] : tree) {
    if (!node.data().empty() && node.empty())
      throw ConfigError("config: key '" + section + "' outside of a section");
    std::map<std::string, std::string> kv;
    for (const auto& [key, val] : node) {
      if (!val.empty()) throw ConfigError("config: nested key " + section + "." + key);
      kv[key] = trim(val.data());
      settings[section + "." + key] = kv[key];
    }
    if (section.rfind("constraint.", 0) == 0) {
      c.extra_constraints.push_back(parse_constraint(section.substr(11), kv));
      continue;
    }
    const std::map<std::string, Setter>* table = nullptr;
    std::map<std::string, Setter> simple;
    if (section == "train") table = &train;
    else if (section == "problem") table = &problem;
    else if (section == "run" || section == "penalty" || section == "evaluate" || section == "curve" ||
             section == "oracle") {
      simple = simple_setters(section);
      table = &simple;
    } else {
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, val] : kv) {
      const auto it = table->find(key);
      if (it == table->end()) throw ConfigError("config: unknown key " + section + "." + key);
      it->second(c, val);
    }
  }
  settings["run.scale"] = benchmarks::to_string(scale);
  if (ov.seed) {
    c.seed = *ov.seed;
    settings["run.seed"] = std::to_string(*ov.seed);
  }
  if (ov.out) c.out = *ov.out;
  if (ov.threads) c.threads = *ov.threads;
  if (ov.checkpoint) c.checkpoint = *ov.checkpoint;
  c.train.seed = c.seed;
  settings.erase("run.out");
  settings.erase("run.threads");

  std::string canon;
  for (const auto& [k, v] : settings) canon += k + "=" + v + "\n";
  c.explicit_settings = settings;
  c.hash = fnv1a64(canon);
  c.train.validate();
  (void)c.build_problem();
  return c;
}

RunConfig load_config(const std::string& path, const Overrides& ov) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), ov);
}

dynamics::ProblemSpec RunConfig::build_problem() const {
  auto spec = benchmarks::build_problem(problem);
  for (const auto& extra : extra_constraints) {
    if (extra.read_coordinate() >= spec.dims().state)
      throw ConfigError("extra constraint reads a coordinate the state does not have");
    spec.constraints.push_back(extra);
  }
  spec.validate();
  constraints::validate_penalty(spec.constraints, train.penalty);
  return spec;
}

nlohmann::json RunConfig::to_json() const {
  const auto& t = train;
  return {{"benchmark", benchmark},
          {"scale", benchmarks::to_string(scale)},
          {"seed", seed},
          {"explicit", explicit_settings},
          {"train",
           {{"particles", t.particles},
            {"groups", t.groups},
            {"z_lo", t.z_lo},
            {"z_hi", t.z_hi},
            {"grid_points", t.grid_points},
            {"epsilon", t.epsilon},
            {"iterations", t.iterations},
            {"learning_rate", t.learning_rate},
            {"common", t.common},
            {"hidden", t.arch.hidden},
            {"activation", t.arch.activation == nn::Activation::tanh ? "tanh" : "identity"},
            {"z_per_iteration", t.z_per_iteration},
            {"z_noise", "shared across grid points within a batch"},
            {"eval_particles", t.eval_particles_or_default()},
            {"eval_groups", t.eval_groups_or_default()},
            {"eval_replicates", t.eval_replicates},
            {"use_baseline", t.use_baseline},
            {"penalty", constraints::to_string(t.penalty.kind)},
            {"penalty_weight", t.penalty.weight},
            {"z_noise", "grid points drawn in one iteration share the batch noise"}}},
          {"evaluate", {{"particles", evaluate.particles}, {"groups", evaluate.groups}}},
          {"extra_constraints", extra_constraints.size()}};
}

}  // namespace mfls::cli
