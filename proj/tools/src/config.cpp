#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace nhkpm::cli {

namespace {

// Input iterator that publishes its position, so SAX callbacks can tell where
// in the text the parser is.
struct TrackingIterator {
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p = nullptr;
  const char** cursor = nullptr;

  reference operator*() const { return *p; }
  TrackingIterator& operator++() {
    ++p;
    *cursor = p;
    return *this;
  }
  TrackingIterator operator++(int) {
    TrackingIterator old = *this;
    ++*this;
    return old;
  }
  bool operator==(const TrackingIterator& o) const { return p == o.p; }
  bool operator!=(const TrackingIterator& o) const { return p != o.p; }
};

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Records the line of every object key and array element.
class LineRecorder : public nlohmann::json_sax<json> {
 public:
  LineRecorder(const char* begin, const char* const* cursor, SourceMap& out)
      : begin_(begin), cursor_(cursor), out_(out) {}

  bool null() override { return value(false); }
  bool boolean(bool) override { return value(false); }
  bool number_integer(number_integer_t) override { return value(true); }
  bool number_unsigned(number_unsigned_t) override { return value(true); }
  bool number_float(number_float_t, const string_t&) override { return value(true); }
  bool string(string_t&) override { return value(false); }
  bool binary(binary_t&) override { return value(false); }

  bool start_object(std::size_t) override {
    value(false);
    frames_.push_back({current_, false, 0});
    return true;
  }
  bool key(string_t& k) override {
    current_ = frames_.back().path + "/" + escape_token(k);
    out_.record(current_, line(false));
    return true;
  }
  bool end_object() override {
    frames_.pop_back();
    return true;
  }
  bool start_array(std::size_t) override {
    value(false);
    frames_.push_back({current_, true, 0});
    return true;
  }
  bool end_array() override {
    frames_.pop_back();
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override { return false; }

 private:
  struct Frame {
    std::string path;
    bool array;
    int next;
  };

  // Numbers are terminated by reading one character past them.
  int line(bool lookahead) const {
    const char* end = *cursor_ - (lookahead && *cursor_ > begin_ ? 1 : 0);
    return 1 + static_cast<int>(std::count(begin_, end, '\n'));
  }

  bool value(bool lookahead) {
    if (!frames_.empty() && frames_.back().array) {
      current_ = frames_.back().path + "/" + std::to_string(frames_.back().next++);
      out_.record(current_, line(lookahead));
    }
    return true;
  }

  const char* begin_;
  const char* const* cursor_;
  SourceMap& out_;
  std::vector<Frame> frames_;
  std::string current_;
};

std::string line_prefix(const std::string& origin, int line) {
  return line > 0 ? origin + ":" + std::to_string(line) + ": " : origin + ": ";
}

// Validating reader over one configuration document.
class Reader {
 public:
  Reader(const SourceMap& map, std::string origin, std::string root, std::set<std::string> overridden)
      : map_(map), origin_(std::move(origin)), root_(std::move(root)), overridden_(std::move(overridden)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    for (std::string p = ptr; !p.empty(); p = p.substr(0, p.rfind('/'))) {
      if (overridden_.count(p)) throw ConfigError(origin_ + ": --override " + dotted(p) + ": " + msg);
    }
    throw ConfigError(line_prefix(origin_, map_.line_of(root_ + ptr)) + msg);
  }

  static std::string dotted(const std::string& ptr) {
    std::string out = ptr.substr(1);
    std::replace(out.begin(), out.end(), '/', '.');
    return out;
  }

  void require_object(const json& j, const std::string& ptr) const {
    if (!j.is_object()) fail(ptr, "'" + (ptr.empty() ? std::string("<root>") : dotted(ptr)) + "' must be an object");
  }

  void check_keys(const json& obj, const std::string& ptr, std::initializer_list<const char*> allowed) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; });
      if (!ok) {
        std::string list;
        for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        fail(ptr + "/" + escape_token(it.key()),
             "unknown key '" + it.key() + "'" + (ptr.empty() ? "" : " in '" + dotted(ptr) + "'") +
                 " (allowed: " + list + ")");
      }
    }
  }

  double number(const json& obj, const std::string& ptr, const char* key, double fallback) const {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    const std::string p = ptr + "/" + key;
    if (!v.is_number()) fail(p, "'" + dotted(p) + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(p, "'" + dotted(p) + "' must be finite");
    return d;
  }

  long long integer(const json& obj, const std::string& ptr, const char* key, long long fallback, long long lo,
                    long long hi) const {
    if (!obj.contains(key)) return fallback;
    return integer_value(obj.at(key), ptr + "/" + key, lo, hi);
  }

  long long integer_value(const json& v, const std::string& p, long long lo, long long hi) const {
    if (!v.is_number_integer()) fail(p, "'" + dotted(p) + "' must be an integer");
    const long long x = v.get<long long>();
    if (x < lo || x > hi) {
      fail(p, "'" + dotted(p) + "' must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                  std::to_string(x));
    }
    return x;
  }

  std::string string(const json& obj, const std::string& ptr, const char* key, const std::string& fallback,
                     std::initializer_list<const char*> choices = {}) const {
    if (!obj.contains(key)) return fallback;
    const std::string p = ptr + "/" + key;
    if (!obj.at(key).is_string()) fail(p, "'" + dotted(p) + "' must be a string");
    const std::string s = obj.at(key).get<std::string>();
    if (choices.size() != 0 && std::none_of(choices.begin(), choices.end(), [&](const char* c) { return s == c; })) {
      std::string list;
      for (const char* c : choices) list += (list.empty() ? "" : ", ") + std::string(c);
      fail(p, "'" + dotted(p) + "' must be one of " + list + ", got '" + s + "'");
    }
    return s;
  }

  Axis axis(const json& obj, const std::string& ptr) const {
    require_object(obj, ptr);
    check_keys(obj, ptr, {"lo", "hi", "n"});
    for (const char* k : {"lo", "hi", "n"})
      if (!obj.contains(k)) fail(ptr, "'" + dotted(ptr) + "' needs '" + k + "'");
    Axis a;
    a.lo = number(obj, ptr, "lo", 0.0);
    a.hi = number(obj, ptr, "hi", 0.0);
    a.n = static_cast<int>(integer(obj, ptr, "n", 1, 1, 100000));
    if (a.n == 1 && a.hi != a.lo) fail(ptr, "'" + dotted(ptr) + "' with n = 1 needs lo == hi");
    if (a.n > 1 && !(a.hi > a.lo)) fail(ptr, "'" + dotted(ptr) + "' needs hi > lo");
    return a;
  }

 private:
  const SourceMap& map_;
  std::string origin_;
  std::string root_;
  std::set<std::string> overridden_;
};

RunConfig read(const json& doc, const Reader& r) {
  RunConfig c;
  r.require_object(doc, "");
  r.check_keys(doc, "",
               {"model", "task", "plan", "grid", "energies", "sites", "dos", "krylov", "seed", "threads", "output",
                "bench"});

  const std::string task = r.string(doc, "", "task", "correlator",
                                    {"correlator", "projected", "dos", "hermitian_sf", "validate", "bench"});
  const std::map<std::string, TaskKind> tasks{{"correlator", TaskKind::correlator},
                                              {"projected", TaskKind::projected},
                                              {"dos", TaskKind::dos},
                                              {"hermitian_sf", TaskKind::hermitian_sf},
                                              {"validate", TaskKind::validate},
                                              {"bench", TaskKind::bench}};
  c.task = tasks.at(task);

  if (!doc.contains("model")) r.fail("", "missing 'model' section");
  const json& m = doc.at("model");
  r.require_object(m, "/model");
  const std::string type = r.string(m, "/model", "type", "spin_chain", {"spin_chain", "fermion_chain", "hatano_nelson"});
  if (type == "hatano_nelson") {
    c.model.kind = ModelKind::hatano_nelson;
    r.check_keys(m, "/model", {"type", "L", "t", "gamma", "bc"});
    c.model.L = static_cast<int>(r.integer(m, "/model", "L", 8, 2, 1 << 20));
    c.model.t = r.number(m, "/model", "t", 1.0);
  } else {
    c.model.kind = type == "spin_chain" ? ModelKind::spin_chain : ModelKind::fermion_chain;
    r.check_keys(m, "/model", {"type", "L", "J", "gamma", "Jz", "hz", "bc"});
    c.model.L = static_cast<int>(r.integer(m, "/model", "L", 8, 1, kMaxSites));
    c.model.J = r.number(m, "/model", "J", 1.0);
    c.model.Jz = r.number(m, "/model", "Jz", 0.5);
    c.model.hz = r.number(m, "/model", "hz", 0.0);
  }
  c.model.gamma = r.number(m, "/model", "gamma", 0.0);
  c.model.bc = r.string(m, "/model", "bc", "open", {"open", "periodic"}) == "open" ? Boundary::open : Boundary::periodic;
  if (c.model.kind == ModelKind::fermion_chain && c.model.bc == Boundary::periodic)
    r.fail("/model/bc", "fermion_chain supports open boundaries only");

  const bool spin_task = c.task == TaskKind::correlator || c.task == TaskKind::projected ||
                         c.task == TaskKind::hermitian_sf || c.task == TaskKind::bench;
  if (spin_task && c.model.kind == ModelKind::hatano_nelson)
    r.fail("/task", "task '" + task + "' needs a spin-1/2 model (spin_chain or fermion_chain)");
  if (c.task == TaskKind::hermitian_sf && (c.model.gamma != 0.0 || c.model.hz != 0.0))
    r.fail("/task", "task 'hermitian_sf' needs a Hermitian model (gamma = hz = 0)");

  if (doc.contains("plan")) {
    const json& p = doc.at("plan");
    r.require_object(p, "/plan");
    r.check_keys(p, "/plan", {"N", "delta"});
    c.N = static_cast<int>(r.integer(p, "/plan", "N", c.N, 1, 1000000));
    if (p.contains("delta")) {
      const json& d = p.at("delta");
      if (d.is_string()) {
        if (d.get<std::string>() != "auto") r.fail("/plan/delta", "'plan.delta' must be a positive number or \"auto\"");
      } else {
        const double v = r.number(p, "/plan", "delta", 0.0);
        if (!(v > 0.0)) r.fail("/plan/delta", "'plan.delta' must be positive");
        c.delta = v;
      }
    }
  }

  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    r.require_object(g, "/grid");
    r.check_keys(g, "/grid", {"re", "im"});
    if (g.contains("re")) c.re = r.axis(g.at("re"), "/grid/re");
    if (g.contains("im")) c.im = r.axis(g.at("im"), "/grid/im");
  }
  if (doc.contains("energies")) c.energies = r.axis(doc.at("energies"), "/energies");

  if (doc.contains("sites")) {
    const json& s = doc.at("sites");
    if (!s.is_array() || s.empty()) r.fail("/sites", "'sites' must be a non-empty array of site indices");
    const int max_site = c.model.L;
    std::set<int> seen;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int site = static_cast<int>(r.integer_value(s[i], "/sites/" + std::to_string(i), 1, max_site));
      if (!seen.insert(site).second) r.fail("/sites/" + std::to_string(i), "duplicate site " + std::to_string(site));
      c.sites.push_back(site);
    }
  }

  if (doc.contains("dos")) {
    const json& d = doc.at("dos");
    r.require_object(d, "/dos");
    r.check_keys(d, "/dos", {"mode", "samples"});
    c.dos_mode = r.string(d, "/dos", "mode", c.dos_mode, {"exact_trace", "stochastic"});
    c.dos_samples = static_cast<int>(r.integer(d, "/dos", "samples", c.dos_samples, 1, 1 << 20));
  }

  if (doc.contains("krylov")) {
    const json& k = doc.at("krylov");
    r.require_object(k, "/krylov");
    r.check_keys(k, "/krylov", {"subspace", "tol", "max_restarts"});
    c.krylov_subspace = static_cast<int>(r.integer(k, "/krylov", "subspace", c.krylov_subspace, 6, 100000));
    c.krylov_tol = r.number(k, "/krylov", "tol", c.krylov_tol);
    if (!(c.krylov_tol > 0.0)) r.fail("/krylov/tol", "'krylov.tol' must be positive");
    c.krylov_max_restarts = static_cast<int>(r.integer(k, "/krylov", "max_restarts", c.krylov_max_restarts, 0, 1 << 20));
  }

  if (doc.contains("seed")) {
    const json& s = doc.at("seed");
    if (!s.is_number_unsigned()) r.fail("/seed", "'seed' must be a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.threads = static_cast<int>(r.integer(doc, "", "threads", 0, 0, 4096));
  c.output = r.string(doc, "", "output", c.output);
  if (c.output.empty()) r.fail("/output", "'output' must not be empty");

  if (doc.contains("bench")) {
    const json& b = doc.at("bench");
    r.require_object(b, "/bench");
    r.check_keys(b, "/bench", {"L", "n_per_site", "omega", "site", "repeats"});
    if (b.contains("L")) {
      const json& Ls = b.at("L");
      if (!Ls.is_array() || Ls.empty()) r.fail("/bench/L", "'bench.L' must be a non-empty array");
      c.bench.L.clear();
      for (std::size_t i = 0; i < Ls.size(); ++i)
        c.bench.L.push_back(static_cast<int>(r.integer_value(Ls[i], "/bench/L/" + std::to_string(i), 1, 12)));
    }
    c.bench.n_per_site = static_cast<int>(r.integer(b, "/bench", "n_per_site", c.bench.n_per_site, 1, 100000));
    if (b.contains("omega")) {
      const json& w = b.at("omega");
      r.require_object(w, "/bench/omega");
      r.check_keys(w, "/bench/omega", {"re", "im"});
      c.bench.omega_re = r.number(w, "/bench/omega", "re", 0.0);
      c.bench.omega_im = r.number(w, "/bench/omega", "im", 0.0);
    }
    c.bench.repeats = static_cast<int>(r.integer(b, "/bench", "repeats", c.bench.repeats, 1, 1000));
    const int min_L = *std::min_element(c.bench.L.begin(), c.bench.L.end());
    c.bench.site = static_cast<int>(r.integer(b, "/bench", "site", c.bench.site, 1, min_L));
  }
  return c;
}

json axis_json(const Axis& a) { return json{{"lo", a.lo}, {"hi", a.hi}, {"n", a.n}}; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SourceMap SourceMap::build(const std::string& text) {
  SourceMap map;
  const char* begin = text.data();
  const char* cursor = begin;
  TrackingIterator first{begin, &cursor}, last{begin + text.size(), &cursor};
  LineRecorder rec(begin, &cursor, map);
  json::sax_parse(first, last, &rec);
  map.record("", 1);
  return map;
}

int SourceMap::line_of(const std::string& pointer) const {
  for (std::string p = pointer;; p = p.substr(0, p.rfind('/'))) {
    if (auto it = lines_.find(p); it != lines_.end()) return it->second;
    if (p.empty()) return 0;
  }
}

SpinChainParams ModelConfig::chain_params() const {
  SpinChainParams p;
  p.L = L;
  p.J = J;
  p.gamma = gamma;
  p.Jz = Jz;
  p.hz = hz;
  p.bc = bc;
  return p;
}

Index ModelConfig::dim() const { return kind == ModelKind::hatano_nelson ? Index{L} : Index{1} << L; }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].empty()) throw ConfigError("--override '" + assignment + "': empty key segment");
    if (!node->is_object()) throw ConfigError("--override " + key + ": '" + parts[i - 1] + "' is not an object");
    if (i + 1 == parts.size()) {
      (*node)[parts[i]] = value;
    } else {
      if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
      node = &(*node)[parts[i]];
    }
  }
}

RunConfig parse_config(const std::string& text, const std::string& origin, const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos ? pos - 1 : 0), '\n'));
    std::string what = e.what();
    if (auto k = what.find("syntax error"); k != std::string::npos) what = what.substr(k);
    throw ConfigError(line_prefix(origin, line) + "invalid JSON: " + what);
  }
  const SourceMap map = SourceMap::build(text);
  std::string root;
  json* cfg = &doc;
  if (doc.is_object() && doc.contains("resolved_config")) {
    root = "/resolved_config";
    cfg = &doc["resolved_config"];
  }
  std::set<std::string> overridden;
  for (const auto& o : overrides) {
    apply_override(*cfg, o);
    std::string ptr;
    for (char ch : o.substr(0, o.find('='))) ptr += ch == '.' ? '/' : ch;
    overridden.insert("/" + ptr);
  }
  return read(*cfg, Reader(map, origin, root, overridden));
}

RunConfig parse_config(const std::string& text, const std::string& origin) { return parse_config(text, origin, {}); }

RunConfig load_config(const std::string& path) { return parse_config(read_file(path), path); }

json to_json(const RunConfig& c) {
  json j;
  json m;
  m["type"] = to_string(c.model.kind);
  m["L"] = c.model.L;
  if (c.model.kind == ModelKind::hatano_nelson) {
    m["t"] = c.model.t;
    m["gamma"] = c.model.gamma;
  } else {
    m["J"] = c.model.J;
    m["gamma"] = c.model.gamma;
    m["Jz"] = c.model.Jz;
    m["hz"] = c.model.hz;
  }
  m["bc"] = c.model.bc == Boundary::open ? "open" : "periodic";
  j["model"] = m;
  j["task"] = to_string(c.task);
  j["plan"] = json{{"N", c.N}};
  if (c.delta) j["plan"]["delta"] = *c.delta;
  else j["plan"]["delta"] = "auto";
  if (c.re || c.im) {
    j["grid"] = json::object();
    if (c.re) j["grid"]["re"] = axis_json(*c.re);
    if (c.im) j["grid"]["im"] = axis_json(*c.im);
  }
  if (c.energies) j["energies"] = axis_json(*c.energies);
  if (!c.sites.empty()) j["sites"] = c.sites;
  j["dos"] = json{{"mode", c.dos_mode}, {"samples", c.dos_samples}};
  j["krylov"] = json{{"subspace", c.krylov_subspace}, {"tol", c.krylov_tol}, {"max_restarts", c.krylov_max_restarts}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = c.output;
  j["bench"] = json{{"L", c.bench.L},
                    {"n_per_site", c.bench.n_per_site},
                    {"omega", json{{"re", c.bench.omega_re}, {"im", c.bench.omega_im}}},
                    {"site", c.bench.site},
                    {"repeats", c.bench.repeats}};
  return j;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::spin_chain: return "spin_chain";
    case ModelKind::fermion_chain: return "fermion_chain";
    case ModelKind::hatano_nelson: return "hatano_nelson";
  }
  return "?";
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::correlator: return "correlator";
    case TaskKind::projected: return "projected";
    case TaskKind::dos: return "dos";
    case TaskKind::hermitian_sf: return "hermitian_sf";
    case TaskKind::validate: return "validate";
    case TaskKind::bench: return "bench";
  }
  return "?";
}

}  // namespace nhkpm::cli
