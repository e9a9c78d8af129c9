#include "tailrisk/scenario.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <utility>

#include "tailrisk/io.hpp"
#include "tailrisk/numeric.hpp"

namespace tailrisk {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Minimal TOML reader, just enough for scenario files: [table.sub] headers,
// key = value pairs, strings, numbers, booleans, and (possibly nested,
// possibly multi-line) arrays.  Produces the same json tree the JSON path
// does so everything downstream is shared.
// ---------------------------------------------------------------------------

[[noreturn]] void toml_fail(int line, const std::string& what) {
  throw std::runtime_error("toml parse error at line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// strip a trailing comment that is not inside a string
std::string_view strip_comment(std::string_view s) {
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

struct TomlValueParser {
  std::string_view text;
  size_t pos = 0;
  int line;

  void skip_ws() {
    while (pos < text.size() &&
           std::isspace(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
  }

  json parse() {
    skip_ws();
    if (pos >= text.size()) toml_fail(line, "missing value");
    const char c = text[pos];
    if (c == '[') return parse_array();
    if (c == '"') return parse_string();
    return parse_scalar();
  }

  json parse_array() {
    ++pos;  // consume '['
    json arr = json::array();
    skip_ws();
    if (pos < text.size() && text[pos] == ']') {
      ++pos;
      return arr;
    }
    while (true) {
      arr.push_back(parse());
      skip_ws();
      if (pos >= text.size()) toml_fail(line, "unterminated array");
      if (text[pos] == ',') {
        ++pos;
        skip_ws();
        if (pos < text.size() && text[pos] == ']') {  // trailing comma
          ++pos;
          return arr;
        }
        continue;
      }
      if (text[pos] == ']') {
        ++pos;
        return arr;
      }
      toml_fail(line, "expected ',' or ']' in array");
    }
  }

  json parse_string() {
    ++pos;  // consume '"'
    std::string out;
    while (pos < text.size() && text[pos] != '"') {
      char c = text[pos];
      if (c == '\\') {
        ++pos;
        if (pos >= text.size()) toml_fail(line, "dangling escape in string");
        switch (text[pos]) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: toml_fail(line, "unsupported escape in string");
        }
      }
      out.push_back(c);
      ++pos;
    }
    if (pos >= text.size()) toml_fail(line, "unterminated string");
    ++pos;  // closing quote
    return json(out);
  }

  json parse_scalar() {
    const size_t start = pos;
    while (pos < text.size() && text[pos] != ',' && text[pos] != ']' &&
           !std::isspace(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
    const std::string token(text.substr(start, pos - start));
    if (token == "true") return json(true);
    if (token == "false") return json(false);
    const bool looks_float = token.find_first_of(".eE") != std::string::npos ||
                             token == "inf" || token == "-inf" || token == "nan";
    errno = 0;
    char* end = nullptr;
    if (!looks_float) {
      const long long v = std::strtoll(token.c_str(), &end, 10);
      if (end == token.c_str() + token.size() && errno == 0) {
        if (v >= 0) return json(static_cast<std::uint64_t>(v));
        return json(v);
      }
    }
    errno = 0;
    const double d = std::strtod(token.c_str(), &end);
    if (token.empty() || end != token.c_str() + token.size()) {
      toml_fail(line, "cannot parse value '" + token + "'");
    }
    return json(d);
  }
};

json parse_toml(const std::string& text) {
  json root = json::object();
  json* table = &root;
  size_t offset = 0;
  int line_no = 0;
  while (offset <= text.size()) {
    const size_t nl = text.find('\n', offset);
    std::string_view raw(text.data() + offset,
                         (nl == std::string::npos ? text.size() : nl) - offset);
    offset = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    const int first_line = line_no;

    std::string logical(trim(strip_comment(raw)));
    if (logical.empty()) continue;

    if (logical.front() == '[') {  // table header
      if (logical.back() != ']') toml_fail(first_line, "unterminated table header");
      std::string path = logical.substr(1, logical.size() - 2);
      table = &root;
      size_t start = 0;
      while (start <= path.size()) {
        const size_t dot = path.find('.', start);
        const std::string part(trim(path.substr(
            start, (dot == std::string::npos ? path.size() : dot) - start)));
        if (part.empty()) toml_fail(first_line, "empty table name");
        table = &(*table)[part];
        if (table->is_null()) *table = json::object();
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      continue;
    }

    const size_t eq = logical.find('=');
    if (eq == std::string::npos) toml_fail(first_line, "expected key = value");
    const std::string key(trim(std::string_view(logical).substr(0, eq)));
    if (key.empty()) toml_fail(first_line, "empty key");
    std::string value(trim(std::string_view(logical).substr(eq + 1)));

    // pull in continuation lines until array brackets balance
    auto depth_of = [](std::string_view s) {
      int depth = 0;
      bool in_str = false;
      for (size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
          if (c == '\\') ++i;
          else if (c == '"') in_str = false;
        } else if (c == '"') in_str = true;
        else if (c == '[') ++depth;
        else if (c == ']') --depth;
      }
      return depth;
    };
    int depth = depth_of(value);
    while (depth > 0) {
      if (offset > text.size()) toml_fail(first_line, "unterminated array");
      const size_t nl2 = text.find('\n', offset);
      std::string_view cont(text.data() + offset,
                            (nl2 == std::string::npos ? text.size() : nl2) - offset);
      offset = (nl2 == std::string::npos) ? text.size() + 1 : nl2 + 1;
      ++line_no;
      const std::string piece(strip_comment(cont));
      value += ' ';
      value += piece;
      depth += depth_of(piece);
    }

    TomlValueParser vp{value, 0, first_line};
    (*table)[key] = vp.parse();
    vp.skip_ws();
    if (vp.pos != vp.text.size()) toml_fail(first_line, "trailing characters after value");
  }
  return root;
}

// ---------------------------------------------------------------------------
// json -> Scenario, collecting field-addressed problems instead of dying on
// the first one.
// ---------------------------------------------------------------------------

const json* find(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

// Probabilities may be written as floats or as decimal strings.
bool as_double(const json& v, double& out) {
  if (v.is_number()) {
    out = v.get<double>();
    return true;
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size() && errno == 0) {
      out = d;
      return true;
    }
  }
  return false;
}

struct FieldReader {
  std::vector<std::string>& problems;

  void bad(const std::string& path, const std::string& what) {
    problems.push_back(path + ": " + what);
  }

  void read_int(const json& j, const char* key, const std::string& prefix, int& out) {
    const json* v = find(j, key);
    if (!v) return;
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
      bad(prefix + key, "must be an integer");
      return;
    }
    out = v->get<int>();
  }

  void read_double(const json& j, const char* key, const std::string& prefix, double& out) {
    const json* v = find(j, key);
    if (!v) return;
    double d = 0.0;
    if (!as_double(*v, d)) {
      bad(prefix + key, "must be a number (or decimal string)");
      return;
    }
    out = d;
  }

  void read_int_list(const json& j, const char* key, const std::string& prefix,
                     std::vector<int>& out) {
    const json* v = find(j, key);
    if (!v) return;
    if (!v->is_array()) {
      bad(prefix + key, "must be an array of integers");
      return;
    }
    out.clear();
    for (const auto& e : *v) {
      if (!e.is_number_integer() && !e.is_number_unsigned()) {
        bad(prefix + key, "must be an array of integers");
        return;
      }
      out.push_back(e.get<int>());
    }
  }

  void read_matrix(const json& j, const char* key, const std::string& prefix,
                   std::vector<std::vector<double>>& out) {
    const json* v = find(j, key);
    if (!v) return;
    if (!v->is_array()) {
      bad(prefix + key, "must be a matrix (array of rows)");
      return;
    }
    out.clear();
    for (size_t r = 0; r < v->size(); ++r) {
      const json& row = (*v)[r];
      if (!row.is_array()) {
        bad(prefix + key + "[" + std::to_string(r) + "]", "must be an array");
        return;
      }
      std::vector<double> vals;
      for (const auto& e : row) {
        double d = 0.0;
        if (!as_double(e, d)) {
          bad(prefix + key + "[" + std::to_string(r) + "]",
              "entries must be numbers (or decimal strings)");
          return;
        }
        vals.push_back(d);
      }
      out.push_back(std::move(vals));
    }
  }

  void read_cube(const json& j, const char* key, const std::string& prefix,
                 std::vector<std::vector<std::vector<double>>>& out) {
    const json* v = find(j, key);
    if (!v) return;
    if (!v->is_array()) {
      bad(prefix + key, "must be a 3-level array [state][action][next]");
      return;
    }
    out.clear();
    for (size_t i = 0; i < v->size(); ++i) {
      const json& block = (*v)[i];
      std::vector<std::vector<double>> rows;
      if (!block.is_array()) {
        bad(prefix + key + "[" + std::to_string(i) + "]", "must be an array of rows");
        return;
      }
      for (size_t a = 0; a < block.size(); ++a) {
        const json& row = block[a];
        if (!row.is_array()) {
          bad(prefix + key + "[" + std::to_string(i) + "][" + std::to_string(a) + "]",
              "must be an array");
          return;
        }
        std::vector<double> vals;
        for (const auto& e : row) {
          double d = 0.0;
          if (!as_double(e, d)) {
            bad(prefix + key + "[" + std::to_string(i) + "][" + std::to_string(a) + "]",
                "entries must be numbers (or decimal strings)");
            return;
          }
          vals.push_back(d);
        }
        rows.push_back(std::move(vals));
      }
      out.push_back(std::move(rows));
    }
  }
};

Scenario from_json(const json& j, std::vector<std::string>& problems) {
  Scenario s;
  FieldReader rd{problems};

  if (const json* v = find(j, "name")) {
    if (v->is_string()) s.name = v->get<std::string>();
    else rd.bad("name", "must be a string");
  }

  if (const json* v = find(j, "seed")) {
    if (v->is_number_unsigned()) {
      s.seed = v->get<std::uint64_t>();
    } else if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
      s.seed = static_cast<std::uint64_t>(v->get<std::int64_t>());
    } else {
      rd.bad("seed", "must be a non-negative integer");
    }
  }

  const json* env = find(j, "environment");
  if (!env || !env->is_object()) {
    rd.bad("environment", "must be an object");
  } else {
    const std::string p = "environment.";
    rd.read_int(*env, "state_count", p, s.env.state_count);
    rd.read_int(*env, "action_count", p, s.env.action_count);
    rd.read_int(*env, "observation_count", p, s.env.observation_count);
    rd.read_int_list(*env, "nominal", p, s.env.nominal_states);
    rd.read_int_list(*env, "disruption", p, s.env.disruption_states);
    rd.read_cube(*env, "nominal_kernel", p, s.env.nominal_kernel);
    rd.read_cube(*env, "disruption_kernel", p, s.env.disruption_kernel);
    rd.read_double(*env, "epsilon", p, s.env.epsilon);
    rd.read_double(*env, "delta", p, s.env.delta);
    rd.read_int(*env, "entry_state", p, s.env.entry_state);
    rd.read_int(*env, "return_state", p, s.env.return_state);
    rd.read_matrix(*env, "obs_map", p, s.env.obs_map);
    rd.read_matrix(*env, "reward", p, s.env.reward);
    rd.read_double(*env, "tau0", p, s.env.tau0);
    rd.read_double(*env, "delta_tau", p, s.env.delta_tau);
  }

  if (const json* v = find(j, "policies")) {
    if (!v->is_array()) {
      rd.bad("policies", "must be an array of action tables");
    } else {
      for (size_t i = 0; i < v->size(); ++i) {
        const json& row = (*v)[i];
        std::vector<int> table;
        bool ok = row.is_array();
        if (ok) {
          for (const auto& e : row) {
            if (!e.is_number_integer() && !e.is_number_unsigned()) {
              ok = false;
              break;
            }
            table.push_back(e.get<int>());
          }
        }
        if (!ok) {
          rd.bad("policies[" + std::to_string(i) + "]", "must be an array of action indices");
        } else {
          s.policies.push_back(std::move(table));
        }
      }
    }
  }

  if (const json* v = find(j, "learners")) {
    if (!v->is_object()) {
      rd.bad("learners", "must be an object");
    } else {
      const std::string p = "learners.";
      rd.read_double(*v, "eta", p, s.learners.eta);
      rd.read_double(*v, "alpha", p, s.learners.alpha);
      rd.read_double(*v, "gamma", p, s.learners.gamma);
      rd.read_double(*v, "xi", p, s.learners.xi);
      rd.read_double(*v, "r_min", p, s.learners.r_min);
      rd.read_double(*v, "r_max", p, s.learners.r_max);
      rd.read_int(*v, "t0", p, s.learners.t0);
    }
  }

  if (const json* v = find(j, "experiment")) {
    if (!v->is_object()) {
      rd.bad("experiment", "must be an object");
    } else {
      const std::string p = "experiment.";
      rd.read_int(*v, "horizon", p, s.experiment.horizon);
      rd.read_int(*v, "t_star", p, s.experiment.t_star);
      rd.read_int(*v, "training_budget", p, s.experiment.training_budget);
      if (const json* sweep = find(*v, "epsilon_sweep")) {
        if (!sweep->is_array()) {
          rd.bad(p + "epsilon_sweep", "must be an array of probabilities");
        } else {
          s.experiment.epsilon_sweep.clear();
          for (const auto& e : *sweep) {
            double d = 0.0;
            if (!as_double(e, d)) {
              rd.bad(p + "epsilon_sweep", "entries must be numbers (or decimal strings)");
              break;
            }
            s.experiment.epsilon_sweep.push_back(d);
          }
        }
      }
      rd.read_double(*v, "mu_ratio", p, s.experiment.mu_ratio);
      rd.read_int(*v, "window", p, s.experiment.window);
      rd.read_double(*v, "band_fraction", p, s.experiment.band_fraction);
      rd.read_double(*v, "documented_margin", p, s.experiment.documented_margin);
      rd.read_double(*v, "recovery_normalization", p, s.experiment.recovery_normalization);
      rd.read_int(*v, "start_state", p, s.experiment.start_state);
    }
  }

  return s;
}

bool check_prob_row(const std::vector<double>& row, size_t want, std::string* why) {
  if (row.size() != want) {
    *why = "has " + std::to_string(row.size()) + " entries, expected " + std::to_string(want);
    return false;
  }
  CompensatedSum total;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      *why = "contains a negative or non-finite entry";
      return false;
    }
    total.add(p);
  }
  if (std::abs(total.value() - 1.0) > 1e-12) {
    *why = "sums to " + std::to_string(total.value()) + ", expected 1 within 1e-12";
    return false;
  }
  return true;
}

void check_conditional_kernel(const std::vector<std::vector<std::vector<double>>>& kernel,
                              const char* key, size_t members, size_t actions,
                              std::vector<std::string>& problems) {
  const std::string name = std::string("environment.") + key;
  if (kernel.size() != members) {
    problems.push_back(name + ": has " + std::to_string(kernel.size()) +
                       " state blocks, expected " + std::to_string(members));
    return;
  }
  for (size_t i = 0; i < kernel.size(); ++i) {
    if (kernel[i].size() != actions) {
      problems.push_back(name + "[" + std::to_string(i) + "]: has " +
                         std::to_string(kernel[i].size()) + " action rows, expected " +
                         std::to_string(actions));
      continue;
    }
    for (size_t a = 0; a < actions; ++a) {
      std::string why;
      if (!check_prob_row(kernel[i][a], members, &why)) {
        problems.push_back(name + "[" + std::to_string(i) + "][" + std::to_string(a) + "]: " +
                           why);
      }
    }
  }
}

}  // namespace

std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> problems;
  const auto bad = [&problems](const std::string& msg) { problems.push_back(msg); };

  if (!s.seed) bad("seed required");

  const EnvironmentSpec& e = s.env;
  if (e.state_count < 1) bad("environment.state_count: must be positive");
  if (e.action_count < 1) bad("environment.action_count: must be positive");
  if (e.observation_count < 1) bad("environment.observation_count: must be positive");
  if (!problems.empty() && (e.state_count < 1 || e.action_count < 1 || e.observation_count < 1)) {
    return problems;
  }
  if (e.observation_count >= e.state_count) {
    bad("environment.observation_count: must be strictly smaller than state_count "
        "(observations are a lossy projection)");
  }

  std::set<int> seen;
  for (int st : e.nominal_states) {
    if (st < 0 || st >= e.state_count) {
      bad("environment.nominal: state " + std::to_string(st) + " out of range");
    } else if (!seen.insert(st).second) {
      bad("environment.nominal: state " + std::to_string(st) + " listed twice");
    }
  }
  for (int st : e.disruption_states) {
    if (st < 0 || st >= e.state_count) {
      bad("environment.disruption: state " + std::to_string(st) + " out of range");
    } else if (!seen.insert(st).second) {
      bad("environment: state " + std::to_string(st) + " appears in both regions");
    }
  }
  if (static_cast<int>(seen.size()) != e.state_count) {
    bad("environment: nominal and disruption together must cover every state");
  }
  if (e.nominal_states.empty()) bad("environment.nominal: must not be empty");

  const auto n_count = e.nominal_states.size();
  const auto d_count = e.disruption_states.size();
  const auto a_count = static_cast<size_t>(std::max(e.action_count, 0));

  check_conditional_kernel(e.nominal_kernel, "nominal_kernel", n_count, a_count, problems);
  if (d_count > 0 && e.delta < 1.0) {
    check_conditional_kernel(e.disruption_kernel, "disruption_kernel", d_count, a_count,
                             problems);
  }

  if (!(e.epsilon >= 0.0) || e.epsilon >= 1.0) {
    bad("environment.epsilon: must lie in [0, 1)");
  }
  if (e.epsilon > 0.0) {
    if (d_count == 0) {
      bad("environment.epsilon: positive crossing mass needs a non-empty disruption region");
    } else {
      bool member = false;
      for (int st : e.disruption_states) member = member || (st == e.entry_state);
      if (!member) {
        bad("environment.entry_state: must be one of the disruption states");
      }
    }
  }
  if (!(e.delta >= 0.0) || e.delta > 1.0) {
    bad("environment.delta: must lie in [0, 1]");
  }
  if (e.delta > 0.0 && d_count > 0) {
    bool member = false;
    for (int st : e.nominal_states) member = member || (st == e.return_state);
    if (!member) {
      bad("environment.return_state: must be one of the nominal states");
    }
  }

  if (e.obs_map.size() != static_cast<size_t>(e.state_count)) {
    bad("environment.obs_map: must have one row per state");
  } else {
    for (size_t st = 0; st < e.obs_map.size(); ++st) {
      std::string why;
      if (!check_prob_row(e.obs_map[st], static_cast<size_t>(e.observation_count), &why)) {
        bad("environment.obs_map[" + std::to_string(st) + "]: " + why);
      }
    }
  }
  if (e.reward.size() != static_cast<size_t>(e.state_count)) {
    bad("environment.reward: must have one row per state");
  } else {
    for (size_t st = 0; st < e.reward.size(); ++st) {
      if (e.reward[st].size() != a_count) {
        bad("environment.reward[" + std::to_string(st) + "]: must have one entry per action");
        continue;
      }
      for (double r : e.reward[st]) {
        if (!std::isfinite(r)) {
          bad("environment.reward[" + std::to_string(st) + "]: entries must be finite");
          break;
        }
        // keep every reward inside the declared learner range so the
        // reward-to-loss map is total
        if (s.learners.r_min < s.learners.r_max &&
            (r < s.learners.r_min - 1e-12 || r > s.learners.r_max + 1e-12)) {
          bad("environment.reward[" + std::to_string(st) +
              "]: entries must lie within the declared learner range [" +
              std::to_string(s.learners.r_min) + ", " + std::to_string(s.learners.r_max) + "]");
          break;
        }
      }
    }
  }
  if (!std::isfinite(e.tau0)) bad("environment.tau0: must be finite");
  if (!(e.delta_tau > 0.0)) bad("environment.delta_tau: must be positive");

  if (s.policies.empty()) {
    bad("policies: must list at least one policy");
  } else {
    for (size_t i = 0; i < s.policies.size(); ++i) {
      const auto& table = s.policies[i];
      if (table.size() != static_cast<size_t>(e.observation_count)) {
        bad("policies[" + std::to_string(i) + "]: must have one action per observation");
        continue;
      }
      for (int a : table) {
        if (a < 0 || a >= e.action_count) {
          bad("policies[" + std::to_string(i) + "]: action index out of range");
          break;
        }
      }
    }
  }

  const LearnerSpec& l = s.learners;
  if (!(l.eta >= 0.0) || l.eta > 1.0) bad("learners.eta: must lie in [0, 1]");
  if (!(l.alpha >= 0.0) || l.alpha > 1.0) bad("learners.alpha: must lie in [0, 1]");
  if (!(l.gamma >= 0.0) || l.gamma >= 1.0) bad("learners.gamma: must lie in [0, 1)");
  if (!(l.xi >= 0.0) || l.xi > 1.0) bad("learners.xi: must lie in [0, 1]");
  if (!std::isfinite(l.r_min) || !std::isfinite(l.r_max) || !(l.r_min < l.r_max)) {
    bad("learners.r_min/r_max: must be finite with r_min < r_max");
  }
  if (l.t0 < 0) bad("learners.t0: must be non-negative");

  const ExperimentSpec& x = s.experiment;
  if (x.horizon < 1) bad("experiment.horizon: must be positive");
  if (x.window < 1) bad("experiment.window: must be positive");
  if (x.horizon >= 1 && x.window > x.horizon) {
    bad("experiment.window: must not exceed the horizon");
  }
  if (x.t_star < -1 || (x.horizon >= 1 && x.t_star >= x.horizon)) {
    bad("experiment.t_star: must be -1 (disabled) or a step within the horizon");
  }
  if (x.training_budget < 0) bad("experiment.training_budget: must be non-negative");
  for (double eps : x.epsilon_sweep) {
    if (!(eps > 0.0) || !(eps < 1.0)) {
      bad("experiment.epsilon_sweep: entries must lie in (0, 1)");
      break;
    }
  }
  if (!(x.mu_ratio > 0.0) || !(x.mu_ratio < 1.0)) {
    bad("experiment.mu_ratio: must lie in (0, 1)");
  }
  if (!(x.band_fraction >= 0.0) || x.band_fraction > 1.0) {
    bad("experiment.band_fraction: must lie in [0, 1]");
  }
  if (!(x.documented_margin >= 0.0)) bad("experiment.documented_margin: must be non-negative");
  if (!(x.recovery_normalization >= 0.0)) {
    bad("experiment.recovery_normalization: must be non-negative");
  }
  if (x.start_state < 0 || x.start_state >= e.state_count) {
    bad("experiment.start_state: out of range");
  } else if (!e.nominal_states.empty()) {
    bool in_n = false;
    for (int st : e.nominal_states) in_n = in_n || (st == x.start_state);
    if (!in_n) bad("experiment.start_state: must lie in the nominal region");
  }

  return problems;
}

EnvironmentConfig Scenario::environment() const { return environment_with_epsilon(env.epsilon); }

EnvironmentConfig Scenario::environment_with_epsilon(double epsilon) const {
  const EnvironmentSpec& e = env;
  EnvironmentConfig cfg;
  cfg.state_count = e.state_count;
  cfg.action_count = e.action_count;
  cfg.observation_count = e.observation_count;
  cfg.nominal = Event(e.nominal_states);
  cfg.disruption = Event(e.disruption_states);
  cfg.obs_map = e.obs_map;
  cfg.reward = e.reward;
  cfg.clock = ClockMeta{e.tau0, e.delta_tau};

  const auto s_count = static_cast<size_t>(e.state_count);
  const auto a_count = static_cast<size_t>(e.action_count);
  cfg.kernel.assign(s_count, std::vector<std::vector<double>>(
                                 a_count, std::vector<double>(s_count, 0.0)));

  // Nominal rows: scale the conditional row by (1 - epsilon) and hand the
  // exact remainder to the entry state, so the composed row sums to 1 up to
  // one rounding of the authored row.
  for (size_t i = 0; i < e.nominal_states.size(); ++i) {
    const auto s = static_cast<size_t>(e.nominal_states[i]);
    for (size_t a = 0; a < a_count; ++a) {
      auto& row = cfg.kernel[s][a];
      CompensatedSum placed;
      for (size_t j = 0; j < e.nominal_states.size(); ++j) {
        const double mass = (1.0 - epsilon) * e.nominal_kernel[i][a][j];
        row[static_cast<size_t>(e.nominal_states[j])] = mass;
        placed.add(mass);
      }
      if (epsilon > 0.0) {
        row[static_cast<size_t>(e.entry_state)] += 1.0 - placed.value();
      }
    }
  }

  // Disruption rows: same construction with the return mass delta.
  for (size_t i = 0; i < e.disruption_states.size(); ++i) {
    const auto s = static_cast<size_t>(e.disruption_states[i]);
    for (size_t a = 0; a < a_count; ++a) {
      auto& row = cfg.kernel[s][a];
      CompensatedSum placed;
      if (e.delta < 1.0) {
        for (size_t j = 0; j < e.disruption_states.size(); ++j) {
          const double mass = (1.0 - e.delta) * e.disruption_kernel[i][a][j];
          row[static_cast<size_t>(e.disruption_states[j])] = mass;
          placed.add(mass);
        }
      }
      if (e.delta > 0.0) {
        row[static_cast<size_t>(e.return_state)] += 1.0 - placed.value();
      }
    }
  }

  return cfg;
}

PolicyClass Scenario::policy_class() const {
  PolicyClass out;
  out.policies.reserve(policies.size());
  for (const auto& table : policies) out.policies.push_back(Policy{table});
  return out;
}

Scenario parse_scenario(const std::string& text, bool toml,
                        std::optional<std::uint64_t> seed_override) {
  json doc;
  try {
    doc = toml ? parse_toml(text) : json::parse(text);
  } catch (const std::exception& ex) {
    throw ScenarioError(std::string("scenario parse failed: ") + ex.what(),
                        {std::string(ex.what())});
  }

  std::vector<std::string> problems;
  Scenario s = from_json(doc, problems);
  if (seed_override) s.seed = *seed_override;
  s.source_sha256 = sha256_hex(text);

  if (problems.empty()) {
    auto more = validate_scenario(s);
    problems.insert(problems.end(), more.begin(), more.end());
  }
  if (!problems.empty()) {
    std::string what = "invalid scenario";
    if (!s.name.empty()) what += " '" + s.name + "'";
    what += ":";
    for (const auto& p : problems) what += "\n  - " + p;
    throw ScenarioError(std::move(what), std::move(problems));
  }
  return s;
}

Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override) {
  const std::string text = read_file(path);
  const bool toml = std::filesystem::path(path).extension() == ".toml";
  try {
    return parse_scenario(text, toml, seed_override);
  } catch (ScenarioError& ex) {
    throw ScenarioError(path + ": " + ex.what(), ex.problems());
  }
}

}  // namespace tailrisk
