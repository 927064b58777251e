#include "mbpre/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mbpre::runner {

using nlohmann::json;

std::string_view to_string(Command command) {
  switch (command) {
    case Command::survival: return "survival";
    case Command::tau: return "tau";
    case Command::harmonic: return "harmonic";
    case Command::lyapunov: return "lyapunov";
    case Command::conditions: return "conditions";
    case Command::verify: return "verify";
    case Command::laws: return "laws";
  }
  return "unknown";
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : {Command::survival, Command::tau, Command::harmonic, Command::lyapunov,
                    Command::conditions, Command::verify, Command::laws})
    if (to_string(c) == name) return c;
  return std::nullopt;
}

namespace {

std::string join(const std::vector<std::string>& errors) {
  std::string out = "invalid configuration:";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

// Collects errors while reading typed fields out of a JSON tree.
class Reader {
 public:
  std::vector<std::string> errors;

  void error(const std::string& path, const std::string& message) {
    errors.push_back(path + ": " + message);
  }

  bool number(const json& j, const std::string& path, double& out) {
    if (!j.is_number()) {
      error(path, "expected a number");
      return false;
    }
    out = j.get<double>();
    if (!std::isfinite(out)) {
      error(path, "must be finite");
      return false;
    }
    return true;
  }

  template <class Int>
  bool integer(const json& j, const std::string& path, Int& out, long double lo) {
    if (!j.is_number_integer()) {
      error(path, "expected an integer");
      return false;
    }
    if (j.is_number_unsigned()) {
      out = static_cast<Int>(j.get<std::uint64_t>());
    } else {
      const auto v = j.get<std::int64_t>();
      if (static_cast<long double>(v) < lo) {
        error(path, "must be >= " + std::to_string(static_cast<long long>(lo)));
        return false;
      }
      out = static_cast<Int>(v);
    }
    if (static_cast<long double>(out) < lo) {
      error(path, "must be >= " + std::to_string(static_cast<long long>(lo)));
      return false;
    }
    return true;
  }

  bool vector(const json& j, const std::string& path, Vector& out) {
    if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxTypes)) {
      error(path, "expected an array of 1.." + std::to_string(kMaxTypes) + " numbers");
      return false;
    }
    out.resize(static_cast<Eigen::Index>(j.size()));
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i)
      ok &= number(j[i], path + "[" + std::to_string(i) + "]", out[static_cast<Eigen::Index>(i)]);
    return ok;
  }

  bool matrix(const json& j, const std::string& path, Matrix& out) {
    if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxTypes)) {
      error(path, "expected a square array of arrays");
      return false;
    }
    const auto p = static_cast<Eigen::Index>(j.size());
    out.resize(p, p);
    bool ok = true;
    for (Eigen::Index i = 0; i < p; ++i) {
      Vector row;
      const std::string rp = path + "[" + std::to_string(i) + "]";
      if (!vector(j[i], rp, row)) {
        ok = false;
        continue;
      }
      if (row.size() != p) {
        error(rp, "row length differs from the number of rows");
        ok = false;
        continue;
      }
      out.row(i) = row.transpose();
    }
    return ok;
  }

  bool doubles(const json& j, const std::string& path, std::vector<double>& out) {
    if (!j.is_array() || j.empty()) {
      error(path, "expected a nonempty array of numbers");
      return false;
    }
    out.clear();
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      double v = 0.0;
      ok &= number(j[i], path + "[" + std::to_string(i) + "]", v);
      out.push_back(v);
    }
    return ok;
  }

  void unknown_keys(const json& j, const std::string& path, std::initializer_list<const char*> known) {
    std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items())
      if (!allowed.count(key)) error(path.empty() ? key : path + "." + key, "unknown field");
  }

  const json* require(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) {
      error(path.empty() ? key : path + "." + key, "missing required field");
      return nullptr;
    }
    return &j.at(key);
  }
};

// Runs a model constructor, turning its exceptions into a field error.
template <class Fn>
auto guarded(Reader& reader, const std::string& path, Fn fn) -> std::optional<decltype(fn())> {
  try {
    return fn();
  } catch (const std::exception& e) {
    reader.error(path, e.what());
    return std::nullopt;
  }
}

void check_weights(Reader& reader, const std::string& path, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > env::kProbabilityTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "weights sum to " << total << ", expected 1";
    reader.error(path, msg.str());
  }
}

std::optional<env::FractionalLinearParams> read_fl(Reader& reader, const json& j,
                                                   const std::string& path) {
  if (!j.is_object()) {
    reader.error(path, "expected an object");
    return std::nullopt;
  }
  env::FractionalLinearParams params;
  bool ok = true;
  const json* stall = reader.require(j, path, "stall");
  const json* geometric = reader.require(j, path, "geometric");
  const json* mixers = reader.require(j, path, "mixers");
  ok &= stall && reader.vector(*stall, path + ".stall", params.stall);
  ok &= geometric && reader.vector(*geometric, path + ".geometric", params.geometric);
  ok &= mixers && reader.matrix(*mixers, path + ".mixers", params.mixers);
  if (!ok) return std::nullopt;
  if (!guarded(reader, path, [&] { params.validate(); return true; })) return std::nullopt;
  return params;
}

std::optional<env::EnvironmentComponent> read_component(Reader& reader, const json& j,
                                                        const std::string& path) {
  if (j.contains("laws")) {
    const json& laws = j.at("laws");
    const std::string lp = path + ".laws";
    if (!laws.is_array() || laws.empty() || laws.size() > static_cast<std::size_t>(kMaxTypes)) {
      reader.error(lp, "expected one law per type");
      return std::nullopt;
    }
    const int p = static_cast<int>(laws.size());
    std::vector<env::OffspringLaw> out;
    for (int i = 0; i < p; ++i) {
      const std::string ip = lp + "[" + std::to_string(i) + "]";
      if (!laws[i].is_array() || laws[i].empty()) {
        reader.error(ip, "expected a nonempty list of {z, prob} atoms");
        return std::nullopt;
      }
      std::vector<env::OffspringLaw::Atom> atoms;
      for (std::size_t k = 0; k < laws[i].size(); ++k) {
        const json& atom = laws[i][k];
        const std::string ap = ip + "[" + std::to_string(k) + "]";
        if (!atom.is_object() || !atom.contains("z") || !atom.contains("prob") ||
            !atom.at("z").is_array()) {
          reader.error(ap, "expected {\"z\": [...], \"prob\": number}");
          return std::nullopt;
        }
        env::OffspringLaw::Atom a{{}, 0.0};
        for (const auto& c : atom.at("z")) {
          if (!c.is_number_integer()) {
            reader.error(ap + ".z", "expected integers");
            return std::nullopt;
          }
          a.z.push_back(c.get<int>());
        }
        if (!reader.number(atom.at("prob"), ap + ".prob", a.prob)) return std::nullopt;
        atoms.push_back(std::move(a));
      }
      auto law = guarded(reader, ip, [&] { return env::OffspringLaw(p, atoms); });
      if (!law) return std::nullopt;
      out.push_back(std::move(*law));
    }
    return guarded(reader, path, [&] { return env::EnvironmentComponent(out); });
  }
  if (j.contains("fractional_linear")) {
    auto params = read_fl(reader, j.at("fractional_linear"), path + ".fractional_linear");
    if (!params) return std::nullopt;
    return guarded(reader, path, [&] { return env::EnvironmentComponent(*params); });
  }
  if (j.contains("geometric_mean")) {
    Matrix mean;
    if (!reader.matrix(j.at("geometric_mean"), path + ".geometric_mean", mean)) return std::nullopt;
    return guarded(reader, path, [&] {
      return env::EnvironmentComponent(env::geometric_with_mean_matrix(mean));
    });
  }
  reader.error(path, "component needs one of \"laws\", \"fractional_linear\", \"geometric_mean\"");
  return std::nullopt;
}

std::optional<env::EnvironmentModel> read_model(Reader& reader, const json& s) {
  const std::string path = "scenario";
  if (!s.is_object()) {
    reader.error(path, "expected an object");
    return std::nullopt;
  }
  const json* kind_field = reader.require(s, path, "kind");
  if (!kind_field) return std::nullopt;
  if (!kind_field->is_string()) {
    reader.error(path + ".kind", "expected a string");
    return std::nullopt;
  }
  const std::string kind = kind_field->get<std::string>();

  if (kind == "scalar_symmetric") {
    reader.unknown_keys(s, path, {"kind", "delta"});
    const json* d = reader.require(s, path, "delta");
    double delta = 0.0;
    if (!d || !reader.number(*d, path + ".delta", delta)) return std::nullopt;
    return guarded(reader, path + ".delta", [&] { return env::EnvironmentModel::scalar_symmetric(delta); });
  }

  if (kind == "finite_mixture" || kind == "fractional_linear") {
    reader.unknown_keys(s, path, {"kind", "components"});
    const json* comps = reader.require(s, path, "components");
    if (!comps) return std::nullopt;
    const std::string cp = path + ".components";
    if (!comps->is_array() || comps->empty()) {
      reader.error(cp, "expected a nonempty array");
      return std::nullopt;
    }
    std::vector<double> weights;
    bool ok = true;
    std::vector<std::pair<env::EnvironmentComponent, double>> mixture;
    std::vector<std::pair<env::FractionalLinearParams, double>> fl;
    for (std::size_t k = 0; k < comps->size(); ++k) {
      const json& c = (*comps)[k];
      const std::string ip = cp + "[" + std::to_string(k) + "]";
      double w = 0.0;
      const json* wf = c.is_object() ? reader.require(c, ip, "weight") : nullptr;
      if (!c.is_object()) reader.error(ip, "expected an object");
      if (!wf || !reader.number(*wf, ip + ".weight", w)) {
        ok = false;
        continue;
      }
      if (w < 0.0) {
        reader.error(ip + ".weight", "must be nonnegative");
        ok = false;
      }
      weights.push_back(w);
      if (kind == "fractional_linear") {
        auto params = read_fl(reader, c, ip);
        if (!params) ok = false;
        else fl.emplace_back(*params, w);
      } else {
        auto comp = read_component(reader, c, ip);
        if (!comp) ok = false;
        else mixture.emplace_back(std::move(*comp), w);
      }
    }
    check_weights(reader, cp, weights);
    if (!ok || !reader.errors.empty()) return std::nullopt;
    if (kind == "fractional_linear")
      return guarded(reader, cp, [&] { return env::EnvironmentModel::fractional_linear(fl); });
    return guarded(reader, cp, [&] { return env::EnvironmentModel::finite_mixture(mixture); });
  }

  if (kind == "common_left_eigenvector") {
    reader.unknown_keys(s, path, {"kind", "v", "eigenvalues", "shapes"});
    Vector v;
    const json* vf = reader.require(s, path, "v");
    bool ok = vf && reader.vector(*vf, path + ".v", v);
    const json* ef = reader.require(s, path, "eigenvalues");
    std::vector<env::EnvironmentModel::WeightedValue> eig;
    std::vector<double> weights;
    if (ef && (!ef->is_array() || ef->empty())) {
      reader.error(path + ".eigenvalues", "expected a nonempty array of {value, weight}");
      ok = false;
    } else if (ef) {
      for (std::size_t k = 0; k < ef->size(); ++k) {
        const json& e = (*ef)[k];
        const std::string ep = path + ".eigenvalues[" + std::to_string(k) + "]";
        double value = 0.0, weight = 0.0;
        if (!e.is_object() || !e.contains("value") || !e.contains("weight")) {
          reader.error(ep, "expected {\"value\": number, \"weight\": number}");
          ok = false;
          continue;
        }
        ok &= reader.number(e.at("value"), ep + ".value", value);
        ok &= reader.number(e.at("weight"), ep + ".weight", weight);
        eig.push_back({value, weight});
        weights.push_back(weight);
      }
      check_weights(reader, path + ".eigenvalues", weights);
    } else {
      ok = false;
    }
    std::vector<Matrix> shapes;
    if (s.contains("shapes")) {
      const json& sh = s.at("shapes");
      if (!sh.is_array()) {
        reader.error(path + ".shapes", "expected an array of matrices");
        ok = false;
      } else {
        for (std::size_t k = 0; k < sh.size(); ++k) {
          Matrix m;
          if (reader.matrix(sh[k], path + ".shapes[" + std::to_string(k) + "]", m)) shapes.push_back(m);
          else ok = false;
        }
      }
    }
    if (!ok || !reader.errors.empty()) return std::nullopt;
    return guarded(reader, path, [&] {
      return env::EnvironmentModel::common_left_eigenvector(v, eig, shapes);
    });
  }

  reader.error(path + ".kind", "unknown scenario kind '" + kind +
                                   "' (expected scalar_symmetric, finite_mixture, "
                                   "fractional_linear or common_left_eigenvector)");
  return std::nullopt;
}

std::string line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

env::EnvironmentModel build_model(const json& scenario) {
  Reader reader;
  auto model = read_model(reader, scenario);
  if (!model || !reader.errors.empty()) {
    if (reader.errors.empty()) reader.error("scenario", "invalid scenario");
    throw ConfigError(reader.errors);
  }
  return std::move(*model);
}

ExperimentConfig parse_config(std::string_view text, std::optional<Command> command) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError({"syntax error at " + line_and_column(text, e.byte) + ": " + e.what()});
  }
  Reader r;
  if (!root.is_object()) throw ConfigError({"top level: expected an object"});
  r.unknown_keys(root, "",
                 {"command", "scenario", "n_grid", "replicas", "seed", "type_index", "start",
                  "output", "threads", "estimator", "cap", "epsilon_grid", "delta_grid",
                  "lyapunov_n", "lyapunov_replicas", "instances", "telescope_instances",
                  "sigma_replicas"});

  ExperimentConfig cfg;
  std::optional<int> vertex;  // start.x given as {"vertex": i}, resolved once p is known
  if (root.contains("command")) {
    const json* c = &root.at("command");
    if (!c->is_string() || !parse_command(c->get<std::string>()))
      r.error("command", "expected one of survival, tau, harmonic, lyapunov, conditions, verify, laws");
    else
      cfg.command = *parse_command(c->get<std::string>());
  }
  if (command) cfg.command = *command;

  if (root.contains("n_grid")) {
    const json& g = root.at("n_grid");
    if (!g.is_array() || g.empty()) {
      r.error("n_grid", "expected a nonempty array of integers");
    } else {
      cfg.n_grid.clear();
      for (std::size_t k = 0; k < g.size(); ++k) {
        int v = 0;
        if (r.integer(g[k], "n_grid[" + std::to_string(k) + "]", v, 1)) cfg.n_grid.push_back(v);
      }
    }
  }
  if (root.contains("replicas")) r.integer(root.at("replicas"), "replicas", cfg.replicas, 1);
  if (root.contains("seed")) r.integer(root.at("seed"), "seed", cfg.seed, 0);
  if (root.contains("type_index")) r.integer(root.at("type_index"), "type_index", cfg.type_index, 1);
  if (root.contains("threads")) r.integer(root.at("threads"), "threads", cfg.threads, 0);
  if (root.contains("cap")) r.integer(root.at("cap"), "cap", cfg.cap, 1);
  if (root.contains("lyapunov_n")) r.integer(root.at("lyapunov_n"), "lyapunov_n", cfg.lyapunov_n, 1);
  if (root.contains("lyapunov_replicas"))
    r.integer(root.at("lyapunov_replicas"), "lyapunov_replicas", cfg.lyapunov_replicas, 1);
  if (root.contains("instances")) r.integer(root.at("instances"), "instances", cfg.instances, 1);
  if (root.contains("telescope_instances"))
    r.integer(root.at("telescope_instances"), "telescope_instances", cfg.telescope_instances, 1);
  if (root.contains("sigma_replicas"))
    r.integer(root.at("sigma_replicas"), "sigma_replicas", cfg.sigma_replicas, 40);
  if (root.contains("epsilon_grid")) r.doubles(root.at("epsilon_grid"), "epsilon_grid", cfg.epsilon_grid);
  if (root.contains("delta_grid")) r.doubles(root.at("delta_grid"), "delta_grid", cfg.delta_grid);
  if (root.contains("output")) {
    if (root.at("output").is_string()) cfg.output = root.at("output").get<std::string>();
    else r.error("output", "expected a string");
  }
  if (root.contains("estimator")) {
    const json& e = root.at("estimator");
    if (!e.is_string() || (e.get<std::string>() != "gf" && e.get<std::string>() != "particle"))
      r.error("estimator", "expected \"gf\" or \"particle\"");
    else
      cfg.estimator = e.get<std::string>();
  }

  if (root.contains("start")) {
    const json& s = root.at("start");
    if (!s.is_object()) {
      r.error("start", "expected an object");
    } else {
      r.unknown_keys(s, "start", {"x", "a", "a_values"});
      if (s.contains("x")) {
        const json& x = s.at("x");
        if (x.is_string() && x.get<std::string>() == "uniform") {
          cfg.start.x.reset();
        } else if (x.is_object() && x.contains("vertex")) {
          int i = 0;
          if (r.integer(x.at("vertex"), "start.x.vertex", i, 1)) vertex = i;
        } else {
          Vector v;
          if (r.vector(x, "start.x", v)) cfg.start.x = v;
        }
      }
      if (s.contains("a")) r.number(s.at("a"), "start.a", cfg.start.a);
      if (s.contains("a_values")) r.doubles(s.at("a_values"), "start.a_values", cfg.start.a_values);
    }
  }

  const json* scenario = nullptr;
  if (root.contains("scenario")) scenario = &root.at("scenario");
  else if (cfg.command != Command::verify) r.require(root, "", "scenario");
  if (const json* s = scenario) {
    cfg.scenario = *s;
    Reader mr;
    auto model = read_model(mr, *s);
    for (auto& e : mr.errors) r.errors.push_back(std::move(e));
    if (model) cfg.model = std::make_shared<const env::EnvironmentModel>(std::move(*model));
  }

  if (cfg.model && vertex) {
    const int p = cfg.model->types();
    if (*vertex > p)
      r.error("start.x.vertex", "type index out of range (1.." + std::to_string(p) + ")");
    else
      cfg.start.x = Vector(Vector::Unit(p, *vertex - 1));
  }
  if (cfg.start.a_values.empty()) cfg.start.a_values = {cfg.start.a};

  if (!r.errors.empty()) throw ConfigError(r.errors);
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> errors;
  for (std::size_t k = 1; k < n_grid.size(); ++k)
    if (n_grid[k] <= n_grid[k - 1]) {
      errors.push_back("n_grid: must be strictly increasing");
      break;
    }
  if (n_grid.empty()) errors.push_back("n_grid: must be nonempty");
  if (replicas < 1) errors.push_back("replicas: must be >= 1");
  if (!model) {
    if (command != Command::verify) errors.push_back("scenario: no model");
  } else {
    const int p = model->types();
    if (type_index < 1 || type_index > p)
      errors.push_back("type_index: type index out of range (1.." + std::to_string(p) + ")");
    if (start.x) {
      if (start.x->size() != p) {
        errors.push_back("start.x: expected " + std::to_string(p) + " coordinates");
      } else if (start.x->minCoeff() < 0.0 || std::abs(start.x->sum() - 1.0) > 1e-12) {
        errors.push_back("start.x: must be nonnegative with coordinates summing to 1");
      }
    }
  }
  for (double a : start.a_values)
    if (!(a > 0.0)) errors.push_back("start.a_values: every a must be positive");
  if (!(start.a > 0.0)) errors.push_back("start.a: must be positive");
  if (!errors.empty()) throw ConfigError(errors);
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<Command> command) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string() + ": cannot open file"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), command);
}

json ExperimentConfig::echo() const {
  json out;
  out["command"] = std::string(to_string(command));
  out["scenario"] = scenario;
  out["n_grid"] = n_grid;
  out["replicas"] = replicas;
  out["seed"] = seed;
  out["type_index"] = type_index;
  json s;
  s["x"] = start.x ? vector_json(*start.x) : json("uniform");
  s["a"] = start.a;
  s["a_values"] = start.a_values;
  out["start"] = s;
  out["output"] = output;
  out["threads"] = threads;
  out["estimator"] = estimator;
  out["cap"] = cap;
  out["epsilon_grid"] = epsilon_grid;
  out["delta_grid"] = delta_grid;
  out["lyapunov_n"] = lyapunov_n;
  out["lyapunov_replicas"] = lyapunov_replicas;
  out["instances"] = instances;
  out["telescope_instances"] = telescope_instances;
  out["sigma_replicas"] = sigma_replicas;
  return out;
}

}  // namespace mbpre::runner
