#include "lab/config.hpp"

#include "lab/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace lab::config {

namespace {

struct Value {
  enum class Type { String, Integer, Float, Bool, Array } type = Type::String;
  std::string text;  // string contents, or the raw numeric token
  std::int64_t i = 0;
  double d = 0.0;
  bool b = false;
  bool big = false;  // integer beyond int64, usable as a seed
  std::vector<Value> items;
  int line = 0, col = 0;
};

const char* type_name(Value::Type t) {
  switch (t) {
    case Value::Type::String: return "string";
    case Value::Type::Integer: return "integer";
    case Value::Type::Float: return "float";
    case Value::Type::Bool: return "boolean";
    case Value::Type::Array: return "array";
  }
  return "value";
}

struct Diagnostics {
  std::vector<std::string> parse, validation;

  void parse_error(int line, int col, const std::string& msg) {
    parse.push_back("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
  }
  void invalid(int line, const std::string& msg) {
    validation.push_back((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + msg);
  }
};

struct ParseFailure {};

// Single-line value scanner.
class Scanner {
 public:
  Scanner(std::string_view s, int line, Diagnostics& diag) : s_(s), line_(line), diag_(diag) {}

  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  int col() const { return static_cast<int>(pos_) + 1; }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }

  [[noreturn]] void fail(const std::string& msg) {
    diag_.parse_error(line_, col(), msg);
    throw ParseFailure{};
  }

  Value value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("expected a value");
    Value v;
    v.line = line_;
    v.col = col();
    const char ch = s_[pos_];
    if (ch == '"') {
      v.type = Value::Type::String;
      v.text = string_literal();
    } else if (ch == '[') {
      v.type = Value::Type::Array;
      ++pos_;
      for (;;) {
        skip_ws();
        if (pos_ >= s_.size()) fail("unterminated array");
        if (s_[pos_] == ']') {
          ++pos_;
          break;
        }
        v.items.push_back(value());
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          break;
        }
        fail("expected ',' or ']' in array");
      }
    } else {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' && s_[pos_] != '\t' &&
             s_[pos_] != '#')
        ++pos_;
      const std::string tok(s_.substr(start, pos_ - start));
      pos_ = start;
      if (tok == "true" || tok == "false") {
        v.type = Value::Type::Bool;
        v.b = tok == "true";
      } else {
        number(tok, v);
      }
      pos_ = start + tok.size();
    }
    return v;
  }

 private:
  std::string string_literal() {
    const std::size_t open = pos_;
    ++pos_;
    std::string out;
    while (pos_ < s_.size()) {
      const char ch = s_[pos_++];
      if (ch == '"') return out;
      if (ch == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: --pos_; fail(std::string("unknown escape '\\") + e + "'");
        }
      } else {
        out += ch;
      }
    }
    pos_ = open;
    fail("unterminated string");
  }

  void number(const std::string& tok, Value& v) {
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (*first == '+') ++first;
    v.text = tok;
    if (!is_float) {
      const auto [p, ec] = std::from_chars(first, last, v.i);
      if (ec == std::errc::result_out_of_range) {
        std::uint64_t u = 0;
        const auto [p2, ec2] = std::from_chars(first, last, u);
        if (ec2 == std::errc() && p2 == last) {
          v.type = Value::Type::Integer;
          v.big = true;
          v.d = static_cast<double>(u);
          return;
        }
      }
      if (ec != std::errc() || p != last) fail("invalid value '" + tok + "'");
      v.type = Value::Type::Integer;
      v.d = static_cast<double>(v.i);
      return;
    }
    const auto [p, ec] = std::from_chars(first, last, v.d);
    if (ec != std::errc() || p != last || !std::isfinite(v.d)) fail("invalid number '" + tok + "'");
    v.type = Value::Type::Float;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
  Diagnostics& diag_;
};

struct KeyError {
  std::string msg;
};

double as_double(const Value& v) {
  if (v.type == Value::Type::Float || v.type == Value::Type::Integer) return v.d;
  throw KeyError{std::string("expected a number, got ") + type_name(v.type)};
}

std::int64_t as_int(const Value& v) {
  if (v.type != Value::Type::Integer) throw KeyError{std::string("expected an integer, got ") + type_name(v.type)};
  if (v.big) throw KeyError{"integer out of range"};
  return v.i;
}

std::uint64_t as_uint(const Value& v) {
  if (v.type != Value::Type::Integer) throw KeyError{std::string("expected an integer, got ") + type_name(v.type)};
  const std::string& t = v.text;
  const char* first = t.data() + (!t.empty() && t[0] == '+' ? 1 : 0);
  std::uint64_t u = 0;
  const auto [p, ec] = std::from_chars(first, t.data() + t.size(), u);
  if (ec != std::errc() || p != t.data() + t.size()) throw KeyError{"expected a non-negative integer"};
  return u;
}

std::string as_string(const Value& v) {
  if (v.type != Value::Type::String) throw KeyError{std::string("expected a string, got ") + type_name(v.type)};
  return v.text;
}

bool as_bool(const Value& v) {
  if (v.type != Value::Type::Bool) throw KeyError{std::string("expected a boolean, got ") + type_name(v.type)};
  return v.b;
}

std::vector<double> as_doubles(const Value& v) {
  if (v.type != Value::Type::Array) throw KeyError{"expected an array of numbers"};
  std::vector<double> out;
  for (const Value& x : v.items) out.push_back(as_double(x));
  return out;
}

template <std::size_t N>
std::array<double, N> as_fixed(const Value& v) {
  const std::vector<double> xs = as_doubles(v);
  if (xs.size() != N) throw KeyError{"expected " + std::to_string(N) + " numbers"};
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = xs[i];
  return out;
}

std::vector<std::string> as_strings(const Value& v) {
  if (v.type != Value::Type::Array) throw KeyError{"expected an array of strings"};
  std::vector<std::string> out;
  for (const Value& x : v.items) out.push_back(as_string(x));
  return out;
}

using RunSetter = std::function<void(RunConfig&, const Value&)>;
using EntrySetter = std::function<void(ExperimentEntry&, const Value&)>;

const std::map<std::string, RunSetter>& run_keys() {
  static const std::map<std::string, RunSetter> keys = {
      {"output_dir", [](RunConfig& c, const Value& v) { c.output_dir = as_string(v); }},
      {"jobs", [](RunConfig& c, const Value& v) { c.jobs = as_int(v); }},
      {"seed", [](RunConfig& c, const Value& v) { c.seed = as_uint(v); }},
      {"tolerance", [](RunConfig& c, const Value& v) { c.tolerance = as_double(v); }},
      {"integrator_tol", [](RunConfig& c, const Value& v) { c.integrator_tol = as_double(v); }},
      {"green_tol", [](RunConfig& c, const Value& v) { c.green_tol = as_double(v); }},
      {"dense_dt", [](RunConfig& c, const Value& v) { c.dense_dt = as_double(v); }},
      {"warn_only", [](RunConfig& c, const Value& v) { c.warn_only = as_bool(v); }},
  };
  return keys;
}

const std::map<std::string, EntrySetter>& entry_keys() {
  static const std::map<std::string, EntrySetter> keys = {
      {"kind", [](ExperimentEntry& e, const Value& v) { e.kind = as_string(v); }},
      {"model", [](ExperimentEntry& e, const Value& v) { e.model = as_string(v); }},
      {"grid", [](ExperimentEntry& e, const Value& v) { e.grid = as_string(v); }},
      {"grid_count", [](ExperimentEntry& e, const Value& v) { e.grid_count = as_int(v); }},
      {"grid_center", [](ExperimentEntry& e, const Value& v) { e.grid_center = as_fixed<2>(v); }},
      {"grid_box", [](ExperimentEntry& e, const Value& v) { e.grid_box = as_fixed<4>(v); }},
      {"T", [](ExperimentEntry& e, const Value& v) { e.T = as_double(v); }},
      {"seed", [](ExperimentEntry& e, const Value& v) { e.seed = as_uint(v); }},
      {"tolerance", [](ExperimentEntry& e, const Value& v) { e.tolerance = as_double(v); }},
      {"integrator_tol", [](ExperimentEntry& e, const Value& v) { e.integrator_tol = as_double(v); }},
      {"green_tol", [](ExperimentEntry& e, const Value& v) { e.green_tol = as_double(v); }},
      {"dense_dt", [](ExperimentEntry& e, const Value& v) { e.dense_dt = as_double(v); }},
      {"curvature_grid", [](ExperimentEntry& e, const Value& v) { e.curvature_grid = as_int(v); }},
      {"curvature_box", [](ExperimentEntry& e, const Value& v) { e.curvature_box = as_fixed<4>(v); }},
      {"sweep", [](ExperimentEntry& e, const Value& v) { e.sweep = as_doubles(v); }},
      {"variance_threshold", [](ExperimentEntry& e, const Value& v) { e.variance_threshold = as_double(v); }},
      {"curves", [](ExperimentEntry& e, const Value& v) { e.curves = as_strings(v); }},
      {"steps", [](ExperimentEntry& e, const Value& v) { e.steps = as_doubles(v); }},
      {"companions", [](ExperimentEntry& e, const Value& v) { e.companions = as_int(v); }},
      {"companion_spacing", [](ExperimentEntry& e, const Value& v) { e.companion_spacing = as_double(v); }},
      {"companion_leaf", [](ExperimentEntry& e, const Value& v) { e.companion_leaf = as_string(v); }},
      {"threads", [](ExperimentEntry& e, const Value& v) { e.threads = as_int(v); }},
  };
  return keys;
}

std::string detail(const LabError& e) {
  const std::string w = e.what();
  const std::size_t colon = w.find(": ");
  return colon == std::string::npos ? w : w.substr(colon + 2);
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) return false;
  return true;
}

void check_positive(Diagnostics& d, const std::string& where, const char* key, const std::optional<double>& x) {
  if (x && !(*x > 0.0)) d.invalid(0, where + ": '" + key + "' must be positive");
}

void check_at_least(Diagnostics& d, const std::string& where, const char* key, const std::optional<std::int64_t>& x,
                    std::int64_t lo) {
  if (x && *x < lo) d.invalid(0, where + ": '" + key + "' must be at least " + std::to_string(lo));
}

void validate(const RunConfig& c, Diagnostics& d) {
  check_at_least(d, "[run]", "jobs", c.jobs, 1);
  check_positive(d, "[run]", "tolerance", c.tolerance);
  check_positive(d, "[run]", "integrator_tol", c.integrator_tol);
  check_positive(d, "[run]", "green_tol", c.green_tol);
  check_positive(d, "[run]", "dense_dt", c.dense_dt);
  for (const ExperimentEntry& e : c.experiments) {
    const std::string where = "[experiment." + e.name + "]";
    if (e.kind.empty()) {
      d.invalid(0, where + ": missing required key 'kind'");
    } else {
      try {
        experiments::parse_kind(e.kind);
      } catch (const LabError& err) {
        d.invalid(0, where + ": 'kind': " + detail(err));
      }
    }
    if (e.model) {
      try {
        metric::MetricModel::parse(*e.model);
      } catch (const LabError& err) {
        d.invalid(0, where + ": 'model': " + detail(err));
      }
    }
    if (e.grid && *e.grid != "fan" && *e.grid != "random")
      d.invalid(0, where + ": 'grid' must be \"fan\" or \"random\"");
    check_at_least(d, where, "grid_count", e.grid_count, 1);
    check_at_least(d, where, "curvature_grid", e.curvature_grid, 2);
    check_at_least(d, where, "companions", e.companions, 1);
    check_at_least(d, where, "threads", e.threads, 1);
    check_positive(d, where, "T", e.T);
    check_positive(d, where, "tolerance", e.tolerance);
    check_positive(d, where, "integrator_tol", e.integrator_tol);
    check_positive(d, where, "green_tol", e.green_tol);
    check_positive(d, where, "dense_dt", e.dense_dt);
    check_positive(d, where, "variance_threshold", e.variance_threshold);
    check_positive(d, where, "companion_spacing", e.companion_spacing);
    for (const auto* box : {&e.grid_box, &e.curvature_box})
      if (*box && !((**box)[0] < (**box)[2] && (**box)[1] < (**box)[3]))
        d.invalid(0, where + ": box must be [x_lo, y_lo, x_hi, y_hi] with lo < hi");
    if (e.sweep && e.sweep->empty()) d.invalid(0, where + ": 'sweep' must not be empty");
    if (e.steps) {
      bool ok = e.steps->size() >= 2;
      for (std::size_t i = 0; i < e.steps->size(); ++i) {
        ok = ok && (*e.steps)[i] > 0.0;
        if (i > 0) ok = ok && (*e.steps)[i] < (*e.steps)[i - 1];
      }
      if (!ok) d.invalid(0, where + ": 'steps' must be at least two positive, strictly decreasing values");
    }
    if (e.curves)
      for (const std::string& name : *e.curves)
        if (name != "fiber_rotation" && name != "geodesic_lift" && name != "stable_graph")
          d.invalid(0, where + ": 'curves': unknown curve family '" + name + "'");
    if (e.companion_leaf && *e.companion_leaf != "stable" && *e.companion_leaf != "unstable")
      d.invalid(0, where + ": 'companion_leaf' must be \"stable\" or \"unstable\"");
  }
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) out += (i ? "\n" : "") + lines[i];
  return out;
}

std::string num(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    if (ch == '\t') {
      out += "\\t";
      continue;
    }
    out += ch;
  }
  return out + "\"";
}

template <class Range>
std::string num_array(const Range& xs) {
  std::string out = "[";
  bool first = true;
  for (double x : xs) {
    out += (first ? "" : ", ") + num(x);
    first = false;
  }
  return out + "]";
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  Diagnostics diag;
  enum class Section { None, Run, Experiment } section = Section::None;
  std::set<std::string> seen_keys;
  std::set<std::string> names;
  bool run_seen = false;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;
    Scanner sc(line, line_no, diag);
    try {
      if (sc.at_end_or_comment()) {
        if (end == text.size()) break;
        continue;
      }
      std::size_t p = sc.pos();
      if (line[p] == '[') {
        const std::size_t close = line.find(']', p);
        if (close == std::string_view::npos) sc.fail("unterminated section header");
        std::string_view head = line.substr(p + 1, close - p - 1);
        while (!head.empty() && (head.front() == ' ' || head.front() == '\t')) head.remove_prefix(1);
        while (!head.empty() && (head.back() == ' ' || head.back() == '\t')) head.remove_suffix(1);
        Scanner rest(line, line_no, diag);
        rest.seek(close + 1);
        if (!rest.at_end_or_comment()) diag.parse_error(line_no, rest.col(), "unexpected text after section header");
        seen_keys.clear();
        if (head == "run") {
          if (run_seen) diag.invalid(line_no, "duplicate section [run]");
          run_seen = true;
          section = Section::Run;
        } else if (head.substr(0, 11) == "experiment.") {
          const std::string name(head.substr(11));
          if (!valid_name(name)) {
            diag.invalid(line_no, "invalid experiment name '" + name + "' (letters, digits, '_' and '-')");
          } else if (!names.insert(name).second) {
            diag.invalid(line_no, "duplicate name '" + name + "'");
          }
          cfg.experiments.push_back({});
          cfg.experiments.back().name = name;
          section = Section::Experiment;
        } else {
          diag.invalid(line_no, "unknown section [" + std::string(head) + "]");
          section = Section::None;
        }
        if (end == text.size()) break;
        continue;
      }
      const std::size_t key_start = p;
      while (p < line.size() && (std::isalnum(static_cast<unsigned char>(line[p])) || line[p] == '_')) ++p;
      if (p == key_start) sc.fail("expected a key");
      const std::string key(line.substr(key_start, p - key_start));
      while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) ++p;
      if (p >= line.size() || line[p] != '=') {
        diag.parse_error(line_no, static_cast<int>(p) + 1, "expected '=' after key '" + key + "'");
        throw ParseFailure{};
      }
      Scanner val(line, line_no, diag);
      val.seek(p + 1);
      const Value v = val.value();
      if (!val.at_end_or_comment())
        diag.parse_error(line_no, val.col(), "unexpected text after value");
      if (section == Section::None) {
        diag.invalid(line_no, "key '" + key + "' outside any section");
      } else if (!seen_keys.insert(key).second) {
        diag.invalid(line_no, "duplicate key '" + key + "'");
      } else {
        try {
          if (section == Section::Run) {
            const auto it = run_keys().find(key);
            if (it == run_keys().end())
              diag.invalid(line_no, "unknown key '" + key + "' in [run]");
            else
              it->second(cfg, v);
          } else {
            const auto it = entry_keys().find(key);
            if (it == entry_keys().end())
              diag.invalid(line_no, "unknown key '" + key + "' in [experiment." + cfg.experiments.back().name + "]");
            else
              it->second(cfg.experiments.back(), v);
          }
        } catch (const KeyError& e) {
          diag.invalid(line_no, "key '" + key + "': " + e.msg);
        }
      }
    } catch (const ParseFailure&) {
    }
    if (end == text.size()) break;
  }
  if (diag.parse.empty()) validate(cfg, diag);
  if (!diag.parse.empty()) {
    std::vector<std::string> all = diag.parse;
    all.insert(all.end(), diag.validation.begin(), diag.validation.end());
    throw LabError(ErrorCode::ParseError, join(all));
  }
  if (!diag.validation.empty()) throw LabError(ErrorCode::ValidationError, join(diag.validation));
  return cfg;
}

std::string render(const RunConfig& c) {
  std::ostringstream os;
  os << "[run]\n";
  if (c.output_dir) os << "output_dir = " << quote(*c.output_dir) << '\n';
  if (c.jobs) os << "jobs = " << *c.jobs << '\n';
  if (c.seed) os << "seed = " << *c.seed << '\n';
  if (c.tolerance) os << "tolerance = " << num(*c.tolerance) << '\n';
  if (c.integrator_tol) os << "integrator_tol = " << num(*c.integrator_tol) << '\n';
  if (c.green_tol) os << "green_tol = " << num(*c.green_tol) << '\n';
  if (c.dense_dt) os << "dense_dt = " << num(*c.dense_dt) << '\n';
  if (c.warn_only) os << "warn_only = " << (*c.warn_only ? "true" : "false") << '\n';
  for (const ExperimentEntry& e : c.experiments) {
    os << "\n[experiment." << e.name << "]\n";
    os << "kind = " << quote(e.kind) << '\n';
    if (e.model) os << "model = " << quote(*e.model) << '\n';
    if (e.grid) os << "grid = " << quote(*e.grid) << '\n';
    if (e.grid_count) os << "grid_count = " << *e.grid_count << '\n';
    if (e.grid_center) os << "grid_center = " << num_array(*e.grid_center) << '\n';
    if (e.grid_box) os << "grid_box = " << num_array(*e.grid_box) << '\n';
    if (e.T) os << "T = " << num(*e.T) << '\n';
    if (e.seed) os << "seed = " << *e.seed << '\n';
    if (e.tolerance) os << "tolerance = " << num(*e.tolerance) << '\n';
    if (e.integrator_tol) os << "integrator_tol = " << num(*e.integrator_tol) << '\n';
    if (e.green_tol) os << "green_tol = " << num(*e.green_tol) << '\n';
    if (e.dense_dt) os << "dense_dt = " << num(*e.dense_dt) << '\n';
    if (e.curvature_grid) os << "curvature_grid = " << *e.curvature_grid << '\n';
    if (e.curvature_box) os << "curvature_box = " << num_array(*e.curvature_box) << '\n';
    if (e.sweep) os << "sweep = " << num_array(*e.sweep) << '\n';
    if (e.variance_threshold) os << "variance_threshold = " << num(*e.variance_threshold) << '\n';
    if (e.curves) {
      os << "curves = [";
      for (std::size_t i = 0; i < e.curves->size(); ++i) os << (i ? ", " : "") << quote((*e.curves)[i]);
      os << "]\n";
    }
    if (e.steps) os << "steps = " << num_array(*e.steps) << '\n';
    if (e.companions) os << "companions = " << *e.companions << '\n';
    if (e.companion_spacing) os << "companion_spacing = " << num(*e.companion_spacing) << '\n';
    if (e.companion_leaf) os << "companion_leaf = " << quote(*e.companion_leaf) << '\n';
    if (e.threads) os << "threads = " << *e.threads << '\n';
  }
  return os.str();
}

std::vector<ExperimentSpec> resolve(const RunConfig& c) {
  std::vector<ExperimentSpec> out;
  for (const ExperimentEntry& e : c.experiments) {
    ExperimentSpec s;
    s.name = e.name;
    s.kind = experiments::parse_kind(e.kind);
    if (e.model) s.model = *e.model;
    if (e.grid) s.grid.mode = *e.grid == "random" ? experiments::GridMode::Random : experiments::GridMode::Fan;
    if (e.grid_count) s.grid.count = static_cast<int>(*e.grid_count);
    if (e.grid_center) s.grid.center = metric::Vec2((*e.grid_center)[0], (*e.grid_center)[1]);
    if (e.grid_box) {
      const auto& b = *e.grid_box;
      s.grid.box = metric::SamplingBox{{b[0], b[1]}, {b[2], b[3]}};
    }
    if (e.T) s.T = *e.T;
    s.seed = e.seed.value_or(c.seed.value_or(s.seed));
    s.tolerance = e.tolerance.value_or(c.tolerance.value_or(s.tolerance));
    s.integrator_tol = e.integrator_tol.value_or(c.integrator_tol.value_or(s.integrator_tol));
    s.green_tol = e.green_tol.value_or(c.green_tol.value_or(s.green_tol));
    s.dense_dt = e.dense_dt.value_or(c.dense_dt.value_or(s.dense_dt));
    if (e.curvature_grid) s.curvature_grid = static_cast<int>(*e.curvature_grid);
    if (e.curvature_box) {
      const auto& b = *e.curvature_box;
      s.curvature_box = metric::SamplingBox{{b[0], b[1]}, {b[2], b[3]}};
    }
    if (e.sweep) s.sweep = *e.sweep;
    if (e.variance_threshold) s.variance_threshold = *e.variance_threshold;
    if (e.curves) s.curves = *e.curves;
    if (e.steps) s.steps = *e.steps;
    if (e.companions) s.companions = static_cast<int>(*e.companions);
    if (e.companion_spacing) s.companion_spacing = *e.companion_spacing;
    if (e.companion_leaf) s.companion_leaf = *e.companion_leaf;
    if (e.threads) s.threads = static_cast<int>(*e.threads);
    out.push_back(std::move(s));
  }
  return out;
}

std::string_view paper_suite_text() {
  static const char* text = R"(# Standard suite: one experiment of each kind.
[run]
output_dir = "lab-output"
jobs = 2
seed = 0
tolerance = 1e-3
integrator_tol = 1e-10
green_tol = 1e-8
dense_dt = 0.01

[experiment.inequality]
kind = "inequality"
model = "hyperbolic:c=1"
grid = "fan"
grid_count = 20
T = 50

[experiment.rigidity_probe]
kind = "rigidity_probe"
model = "conformal:c=1,eps=0"
grid_count = 20
T = 50
sweep = [0.0, 0.05, 0.1, 0.2]
variance_threshold = 1e-3

[experiment.exponent_rigidity]
kind = "exponent_rigidity"
model = "hyperbolic:c=1"
grid_count = 20
T = 50

[experiment.distance_derivative]
kind = "distance_derivative"
model = "hyperbolic:c=1"
grid_center = [0.0, 1.0]
curves = ["fiber_rotation", "geodesic_lift", "stable_graph"]
steps = [1e-2, 1e-3, 1e-4]

[experiment.stable_leaf]
kind = "stable_leaf"
model = "hyperbolic:c=1"
grid_center = [0.0, 1.0]
companions = 5
companion_spacing = 0.1
companion_leaf = "stable"
T = 50
)";
  return text;
}

}  // namespace lab::config
