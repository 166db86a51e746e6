#include "n2ce/config.hpp"

#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace n2ce {

using Json = nlohmann::ordered_json;

namespace {

std::string describe(const std::vector<ConfigIssue>& issues) {
  std::ostringstream os;
  os << "invalid config (" << issues.size() << " issue" << (issues.size() == 1 ? "" : "s") << ")";
  for (const auto& i : issues) os << "\n  " << (i.location.empty() ? "/" : i.location) << ": " << i.message;
  return os.str();
}

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

// Strict conversions: integers must be written as integers, booleans as
// booleans. Each returns an error message or an empty string.
std::string convert(const Json& j, double& out) {
  if (!j.is_number()) return "expected a number";
  out = j.get<double>();
  return {};
}

std::string convert(const Json& j, Index& out) {
  if (!j.is_number_integer()) return "expected an integer";
  out = j.get<Index>();
  return {};
}

std::string convert(const Json& j, std::uint64_t& out) {
  if (!j.is_number_unsigned()) return "expected a nonnegative integer";
  out = j.get<std::uint64_t>();
  return {};
}

std::string convert(const Json& j, bool& out) {
  if (!j.is_boolean()) return "expected true or false";
  out = j.get<bool>();
  return {};
}

std::string convert(const Json& j, std::string& out) {
  if (!j.is_string()) return "expected a string";
  out = j.get<std::string>();
  return {};
}

std::string convert(const Json& j, NegativeSource& out) {
  std::string s;
  if (auto e = convert(j, s); !e.empty()) return e;
  try {
    out = negative_source_from_string(s);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return {};
}

std::string convert(const Json& j, ObjectiveKind& out) {
  if (!j.is_object()) return "expected an object like {\"estimator\": \"N2CE\", \"M\": 100}";
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "estimator" && key != "M") return "unknown key '" + key + "' in estimator entry";
  }
  if (!j.contains("estimator")) return "estimator entry needs an 'estimator' name";
  std::string name;
  if (auto e = convert(j.at("estimator"), name); !e.empty()) return "estimator: " + e;
  ObjectiveKind kind;
  try {
    kind.tag = objective_tag_from_string(name);
    kind.noise_magnitude = 1.0;
    if (j.contains("M")) {
      if (auto e = convert(j.at("M"), kind.noise_magnitude); !e.empty()) return "M: " + e;
    }
    kind.validate();
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  out = kind;
  return {};
}

template <typename T>
std::string convert(const Json& j, std::vector<T>& out) {
  if (!j.is_array()) return "expected an array";
  std::vector<T> values(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (auto e = convert(j[i], values[i]); !e.empty()) return "element " + std::to_string(i) + ": " + e;
  }
  out = std::move(values);
  return {};
}

Json to_json(double v) { return v; }
Json to_json(Index v) { return v; }
Json to_json(std::uint64_t v) { return v; }
Json to_json(bool v) { return v; }
Json to_json(const std::string& v) { return v; }
Json to_json(NegativeSource v) { return to_string(v); }
Json to_json(const ObjectiveKind& k) {
  Json j;
  j["estimator"] = to_string(k.tag);
  j["M"] = k.noise_magnitude;
  return j;
}
template <typename T>
Json to_json(const std::vector<T>& v) {
  Json j = Json::array();
  for (const auto& x : v) j.push_back(to_json(x));
  return j;
}

template <typename T>
using Check = std::function<std::string(const T&)>;

template <typename T>
Check<T> positive() {
  return [](const T& v) { return v > T(0) ? std::string() : std::string("must be positive"); };
}

template <typename T>
Check<T> at_least(T lo) {
  return [lo](const T& v) {
    std::ostringstream os;
    if (!(v >= lo)) os << "must be >= " << lo;
    return os.str();
  };
}

Check<std::string> one_of(std::vector<std::string> options) {
  return [options](const std::string& v) {
    for (const auto& o : options)
      if (o == v) return std::string();
    std::string msg = "must be one of";
    for (const auto& o : options) msg += " '" + o + "'";
    return msg;
  };
}

template <typename T>
Check<std::vector<T>> non_empty() {
  return [](const std::vector<T>& v) { return v.empty() ? std::string("must not be empty") : std::string(); };
}

Check<std::vector<double>> positive_list() {
  return [](const std::vector<double>& v) {
    if (v.empty()) return std::string("must not be empty");
    for (double x : v)
      if (!(x > 0.0)) return std::string("values must be positive");
    return std::string();
  };
}

Check<double> unit_interval(bool include_zero, bool include_one) {
  return [=](const double& v) {
    const bool lo_ok = include_zero ? v >= 0.0 : v > 0.0;
    const bool hi_ok = include_one ? v <= 1.0 : v < 1.0;
    return lo_ok && hi_ok ? std::string() : std::string("out of range");
  };
}

class Reader {
 public:
  Reader(const Json& j, std::string base, std::vector<ConfigIssue>& issues)
      : j_(j), base_(std::move(base)), issues_(issues) {}

  template <typename T>
  void operator()(const char* key, T& out, Check<T> check = {}) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const std::string where = base_ + "/" + escape_pointer(key);
    T value = out;
    if (auto e = convert(j_.at(key), value); !e.empty()) {
      issues_.push_back({where, e});
      return;
    }
    if (check) {
      if (auto e = check(value); !e.empty()) {
        issues_.push_back({where, e});
        return;
      }
    }
    out = std::move(value);
  }

  void finish() {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!seen_.count(key)) issues_.push_back({base_ + "/" + escape_pointer(key), "unknown key"});
    }
  }

 private:
  const Json& j_;
  std::string base_;
  std::vector<ConfigIssue>& issues_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(Json& j) : j_(j) {}
  template <typename T>
  void operator()(const char* key, T& value, Check<T> = {}) {
    j_[key] = to_json(value);
  }

 private:
  Json& j_;
};

template <typename V>
void visit(TrajectorySection& s, V& v) {
  v("dim", s.dim, Check<Index>([](const Index& d) { return d == 2 || d == 5 ? "" : "must be 2 or 5"; }));
  v("samples_per_iter", s.samples_per_iter, positive<Index>());
  v("step_size", s.step_size, positive<double>());
  v("iterations", s.iterations, positive<Index>());
  v("repeats", s.repeats, positive<Index>());
  v("negatives", s.negatives);
  v("common_random_numbers", s.common_random_numbers);
  v("estimators", s.estimators, non_empty<ObjectiveKind>());
}

template <typename V>
void visit(SweepSection& s, V& v) {
  v("dim", s.dim, Check<Index>([](const Index& d) { return d == 2 || d == 5 ? "" : "must be 2 or 5"; }));
  v("n", s.n, positive<Index>());
  v("repeats", s.repeats, at_least<Index>(2));
  v("common_random_numbers", s.common_random_numbers);
  v("entries", s.entries, non_empty<ObjectiveKind>());
}

template <typename V>
void visit(BiasDecaySection& s, V& v) {
  v("alpha", s.alpha, non_empty<double>());
  v("target", s.target, non_empty<double>());
  v("m_grid", s.m_grid, positive_list());
  v("n", s.n, positive<Index>());
  v("repeats", s.repeats, at_least<Index>(2));
}

template <typename V>
void visit(OptimalMSection& s, V& v) {
  v("ns", s.ns, Check<std::vector<Index>>([](const std::vector<Index>& ns) {
      if (ns.empty()) return std::string("must not be empty");
      for (Index n : ns)
        if (n < 2) return std::string("values must be >= 2");
      return std::string();
    }));
  v("m_grid", s.m_grid, Check<std::vector<double>>([](const std::vector<double>& m) {
      if (m.empty()) return std::string("must not be empty");
      for (double x : m)
        if (!(x >= 1.0)) return std::string("values must be >= 1");
      return std::string();
    }));
  v("repeats", s.repeats, at_least<Index>(2));
}

template <typename V>
void visit(ConvergeSection& s, V& v) {
  v("init_mean", s.init_mean, non_empty<double>());
  v("target_mean", s.target_mean, non_empty<double>());
  v("M", s.noise_magnitude, at_least<double>(100.0));
  v("delta", s.delta, positive<double>());
  v("step", s.step, positive<double>());
  v("samples_per_iter", s.samples_per_iter, positive<Index>());
  v("kappa_samples", s.kappa_samples, at_least<Index>(2));
  v("budget_constant", s.budget_constant, positive<double>());
  v("iteration_cap", s.iteration_cap, positive<Index>());
}

template <typename V>
void visit(DivergenceSection& s, V& v) {
  v("mean1", s.mean1, non_empty<double>());
  v("mean0", s.mean0, non_empty<double>());
  v("m_grid", s.m_grid, positive_list());
  v("n", s.n, at_least<Index>(2));
}

template <typename V>
void visit(GradcheckSection& s, V& v) {
  v("dim", s.dim, positive<Index>());
  v("samples", s.samples, positive<Index>());
  v("m_grid", s.m_grid, Check<std::vector<double>>([](const std::vector<double>& m) {
      if (m.empty()) return std::string("must not be empty");
      for (double x : m)
        if (!(x >= 1.0)) return std::string("values must be >= 1");
      return std::string();
    }));
  v("mlp_hidden_width", s.mlp_hidden_width, positive<Index>());
  v("mlp_resblocks", s.mlp_resblocks, at_least<Index>(0));
  v("mlp_coordinates", s.mlp_coordinates, positive<Index>());
}

template <typename V>
void visit(TelescopingSection& s, V& v) {
  v("target", s.target, one_of({"gaussian", "gmm"}));
  v("target_mean", s.target_mean, non_empty<double>());
  v("schedule", s.schedule, one_of({"K3", "K6", "custom"}));
  v("sigma_squared", s.sigma_squared);
  v("hidden_width", s.hidden_width, positive<Index>());
  v("num_resblocks", s.num_resblocks, at_least<Index>(0));
  v("M", s.noise_magnitude, at_least<double>(1.0));
  v("iterations", s.iterations, at_least<Index>(0));
  v("batch_size", s.batch_size, positive<Index>());
  v("negatives", s.negatives, one_of({"symmetric", "scaled"}));
  v("max_negatives", s.max_negatives, positive<Index>());
  v("coupled", s.coupled);
  v("stage_weighting", s.stage_weighting);
  v("learning_rate", s.learning_rate, positive<double>());
  v("grad_clip", s.grad_clip, positive<double>());
  v("grid_size", s.grid_size, at_least<Index>(2));
  v("grid_half_width", s.grid_half_width, positive<double>());
}

template <typename V>
void visit(SamplerSection& s, V& v) {
  v("target", s.target, one_of({"standard_normal", "gmm"}));
  v("gmm_means", s.gmm_means);
  v("gmm_variance", s.gmm_variance, positive<double>());
  v("dim", s.dim, positive<Index>());
  v("particles", s.particles, positive<Index>());
  v("init_scale", s.init_scale, positive<double>());
  v("svgd_steps", s.svgd_steps, positive<Index>());
  v("svgd_initial_step", s.svgd_initial_step, positive<double>());
  v("bandwidth_floor", s.bandwidth_floor, positive<double>());
  v("langevin_steps", s.langevin_steps, positive<Index>());
  v("langevin_step_size", s.langevin_step_size, positive<double>());
}

template <typename V>
void visit(BboSection& s, V& v) {
  v("seeds", s.seeds, non_empty<std::uint64_t>());
  v("dataset_size", s.dataset_size, positive<Index>());
  v("remove_top_fraction", s.remove_top_fraction, unit_interval(true, false));
  v("prior_quantile", s.prior_quantile, unit_interval(false, true));
  v("prior_jitter", s.prior_jitter, at_least<double>(0.0));
  v("M", s.noise_magnitude, at_least<double>(1.0));
  v("schedule", s.schedule, one_of({"K3", "K6"}));
  v("prior_hidden_width", s.prior_hidden_width, positive<Index>());
  v("prior_resblocks", s.prior_resblocks, at_least<Index>(0));
  v("prior_iterations", s.prior_iterations, at_least<Index>(0));
  v("prior_batch", s.prior_batch, positive<Index>());
  v("stage_weighting", s.stage_weighting);
  v("prior_learning_rate", s.prior_learning_rate, positive<double>());
  v("regressor_hidden_width", s.regressor_hidden_width, positive<Index>());
  v("regressor_resblocks", s.regressor_resblocks, at_least<Index>(0));
  v("regressor_iterations", s.regressor_iterations, at_least<Index>(0));
  v("regressor_learning_rate", s.regressor_learning_rate, positive<double>());
  v("regressor_rmse_gate", s.regressor_rmse_gate, positive<double>());
  v("lambda1", s.lambda1, at_least<double>(0.0));
  v("lambda2", s.lambda2, positive<double>());
  v("sampler", s.sampler, one_of({"svgd", "langevin"}));
  v("svgd_steps", s.svgd_steps, positive<Index>());
  v("svgd_initial_step", s.svgd_initial_step, positive<double>());
  v("langevin_steps", s.langevin_steps, positive<Index>());
  v("langevin_step_size", s.langevin_step_size, positive<double>());
  v("query_budget", s.query_budget, positive<Index>());
}

// Calls fn(name, section) for every section in document order.
template <typename Fn>
void for_each_section(ExperimentConfig& c, Fn&& fn) {
  fn("trajectory", c.trajectory);
  fn("sweep", c.sweep);
  fn("bias_decay", c.bias_decay);
  fn("optimal_m", c.optimal_m);
  fn("converge", c.converge);
  fn("divergence", c.divergence);
  fn("gradcheck", c.gradcheck);
  fn("telescoping", c.telescoping);
  fn("sampler", c.sampler);
  fn("bbo", c.bbo);
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::invalid_argument(describe(issues)), issues_(std::move(issues)) {}

ExperimentConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::vector<ConfigIssue>{{"", std::string("not valid JSON: ") + e.what()}});
  }
  if (!doc.is_object()) throw ConfigError(std::vector<ConfigIssue>{{"", "top level must be an object"}});

  ExperimentConfig config;
  std::vector<ConfigIssue> issues;
  std::set<std::string> known{"seed"};
  if (doc.contains("seed")) {
    if (auto e = convert(doc.at("seed"), config.seed); !e.empty()) issues.push_back({"/seed", e});
  }
  for_each_section(config, [&](const char* name, auto& section) {
    known.insert(name);
    if (!doc.contains(name)) return;
    const Json& j = doc.at(name);
    const std::string base = std::string("/") + name;
    if (!j.is_object()) {
      issues.push_back({base, "expected an object"});
      return;
    }
    Reader reader(j, base, issues);
    visit(section, reader);
    reader.finish();
  });
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!known.count(key)) issues.push_back({"/" + escape_pointer(key), "unknown key"});
  }
  if (config.telescoping.schedule == "custom") {
    try {
      SigmaSchedule::from_squared(config.telescoping.sigma_squared);
    } catch (const std::invalid_argument& e) {
      issues.push_back({"/telescoping/sigma_squared", e.what()});
    }
  }
  if (config.converge.init_mean.size() != config.converge.target_mean.size())
    issues.push_back({"/converge/target_mean", "must have the same length as init_mean"});
  if (config.bias_decay.alpha.size() != config.bias_decay.target.size())
    issues.push_back({"/bias_decay/target", "must have the same length as alpha"});
  if (config.divergence.mean1.size() != config.divergence.mean0.size())
    issues.push_back({"/divergence/mean0", "must have the same length as mean1"});
  for (std::size_t i = 0; i < config.sampler.gmm_means.size(); ++i) {
    if (static_cast<Index>(config.sampler.gmm_means[i].size()) != config.sampler.dim)
      issues.push_back({"/sampler/gmm_means/" + std::to_string(i), "length must equal sampler.dim"});
  }
  if (config.telescoping.target_mean.size() != 2)
    issues.push_back({"/telescoping/target_mean", "must have length 2"});
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return config;
}

std::string serialize_config(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  Json doc;
  doc["seed"] = copy.seed;
  for_each_section(copy, [&](const char* name, auto& section) {
    Json j = Json::object();
    Writer writer(j);
    visit(section, writer);
    doc[name] = std::move(j);
  });
  return doc.dump(2) + "\n";
}

}  // namespace n2ce
