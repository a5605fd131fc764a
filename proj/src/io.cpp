#include "phsem/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "phsem/errors.hpp"

namespace phsem::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = pos + 1;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<long long> to_integer(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

double require_double(std::string_view s, const std::string& what) {
  auto v = to_double(s);
  if (!v || !std::isfinite(*v)) throw InputError(what + ": '" + std::string(s) + "' is not a number");
  return *v;
}

long long require_integer(std::string_view s, const std::string& what) {
  auto v = to_integer(s);
  if (!v) throw InputError(what + ": '" + std::string(s) + "' is not an integer");
  return *v;
}

std::vector<double> parse_list(std::string_view s, const std::string& what) {
  std::vector<double> out;
  for (auto item : split(s, ',')) out.push_back(require_double(item, what));
  return out;
}

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw InputError("failed writing '" + path.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw InputError("cannot move '" + tmp.string() + "' into place: " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

PanelObservationSet parse_panel(const std::string& text, int n) {
  if (n < 1) throw InputError("panel parsing needs n >= 1 transient states");
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "path_id,time,state") {
    throw InputError("line 1: expected header 'path_id,time,state'");
  }
  PanelObservationSet data;
  data.n = n;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1);
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3) throw InputError(where + ": expected 3 fields");
    const std::string id(fields[0]);
    if (id.empty()) throw InputError(where + ": empty path_id");
    const auto t = to_double(fields[1]);
    if (!t || !std::isfinite(*t) || *t < 0.0) {
      throw InputError(where + ": malformed time '" + std::string(fields[1]) + "'");
    }
    const auto state = to_integer(fields[2]);
    if (!state) throw InputError(where + ": malformed state '" + std::string(fields[2]) + "'");
    if (*state < 1 || *state > n + 1) {
      throw InputError(where + ": state " + std::to_string(*state) + " outside 1.." +
                       std::to_string(n + 1));
    }
    auto [it, inserted] = index.try_emplace(id, data.paths.size());
    if (inserted) {
      data.paths.push_back(PanelPath{id, {}, {}});
      if (*t != 0.0) throw InputError(where + ": first observation of '" + id + "' is not at time 0");
    }
    auto& path = data.paths[it->second];
    if (!path.times.empty()) {
      if (!(*t > path.times.back())) {
        throw InputError(where + ": non-increasing times for path '" + id + "'");
      }
      if (path.states.back() == n) {
        throw InputError(where + ": path '" + id + "' continues after absorption");
      }
    }
    path.times.push_back(*t);
    path.states.push_back(static_cast<int>(*state) - 1);
  }
  data.validate();
  return data;
}

PanelObservationSet read_panel(const fs::path& path, int n) {
  try {
    return parse_panel(read_file(path), n);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string format_panel(const PanelObservationSet& data) {
  std::string out = "path_id,time,state\n";
  for (const auto& p : data.paths) {
    for (std::size_t j = 0; j < p.times.size(); ++j) {
      out += fmt::format("{},{},{}\n", p.id, format_double(p.times[j]), p.states[j] + 1);
    }
  }
  return out;
}

void write_panel(const PanelObservationSet& data, const fs::path& path) {
  write_file_atomic(path, format_panel(data));
}

std::vector<double> parse_samples(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "time") throw InputError("line 1: expected header 'time'");
  std::vector<double> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    out.push_back(require_double(line, "line " + std::to_string(i + 1)));
  }
  return out;
}

std::vector<double> read_samples(const fs::path& path) {
  try {
    return parse_samples(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string format_samples(const std::vector<double>& values) {
  std::string out = "time\n";
  for (double v : values) out += format_double(v) + "\n";
  return out;
}

std::string format_generator(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix parse_generator(const std::string& text) {
  std::vector<std::vector<double>> rows;
  for (auto line : lines_of(text)) {
    line = trim(line);
    if (line.empty()) continue;
    rows.push_back(parse_list(line, "generator row " + std::to_string(rows.size() + 1)));
  }
  const auto n = rows.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw InputError("generator CSV is not square");
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("PHSEM_SEED")) {
    auto v = to_integer(env);
    if (!v || *v < 0) throw InputError("PHSEM_SEED must be a nonnegative integer");
    return static_cast<std::uint64_t>(*v);
  }
  return 1;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model", {"n", "family", "beta", "pi", "lambda"}},
      {"estimation",
       {"beta0", "eta", "e_ell", "beta_min", "max_sem_iterations", "max_gd_steps", "seed",
        "homogeneous", "homog_iterations", "homog_tail_average", "bridge_max_attempts"}},
      {"study", {"K", "horizon", "delta", "times_file", "horizons"}},
  };
  return keys;
}

bool parse_bool(std::string_view s, const std::string& what) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InputError(what + ": expected true or false");
}

Matrix parse_matrix_rows(std::string_view s, const std::string& what) {
  std::vector<std::vector<double>> rows;
  for (auto row : split(s, ';')) rows.push_back(parse_list(row, what));
  const auto n = rows.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw InputError(what + ": matrix is not square");
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }

  RunConfig cfg;
  cfg.fit.seed = default_seed();
  for (const auto& [section, body] : tree) {
    auto known = known_keys().find(section);
    if (known == known_keys().end() || !body.data().empty()) {
      throw InputError("config: unknown section or top-level key '" + section + "'");
    }
    for (const auto& [key, value] : body) {
      if (!known->second.count(key)) {
        throw InputError("config: unknown key '" + key + "' in [" + section + "]");
      }
    }
  }
  auto get = [&](const std::string& section, const std::string& key) -> std::optional<std::string> {
    auto node = tree.get_child_optional(section + "." + key);
    if (!node) return std::nullopt;
    return node->data();
  };
  auto name = [](const std::string& section, const std::string& key) {
    return "config [" + section + "] " + key;
  };

  auto& model = cfg.model;
  if (auto v = get("model", "family")) model.family = parse_family_kind(std::string(trim(*v)));
  if (auto v = get("model", "beta")) model.beta = require_double(*v, name("model", "beta"));
  if (auto v = get("model", "lambda")) {
    model.lambda = SubIntensityMatrix::checked(parse_matrix_rows(*v, name("model", "lambda")));
  }
  if (auto v = get("model", "pi")) {
    auto values = parse_list(*v, name("model", "pi"));
    model.pi = InitialDistribution(Eigen::Map<Vector>(values.data(), values.size()));
  }
  if (auto v = get("model", "n")) {
    model.n = static_cast<int>(require_integer(*v, name("model", "n")));
  } else if (model.lambda) {
    model.n = model.lambda->size();
  } else if (model.pi) {
    model.n = model.pi->size();
  }
  if (model.n < 1) throw InputError("config: [model] n is missing or < 1");
  if (model.lambda && model.lambda->size() != model.n) {
    throw InputError("config: [model] lambda size does not match n");
  }
  if (model.pi && model.pi->size() != model.n) {
    throw InputError("config: [model] pi size does not match n");
  }
  if (model.beta && model.family != FamilyKind::Identity) {
    ScalingFamily check(model.family, *model.beta);
  }

  auto& fit = cfg.fit;
  fit.family = model.family;
  auto real = [&](const char* key, double& field) {
    if (auto v = get("estimation", key)) field = require_double(*v, name("estimation", key));
  };
  auto integer = [&](const char* key, auto& field) {
    if (auto v = get("estimation", key)) {
      const auto value = require_integer(*v, name("estimation", key));
      if (value < 0) throw InputError(name("estimation", key) + " must be >= 0");
      field = static_cast<std::remove_reference_t<decltype(field)>>(value);
    }
  };
  real("beta0", fit.beta0);
  real("eta", fit.eta);
  real("e_ell", fit.e_ell);
  real("beta_min", fit.beta_min);
  integer("max_sem_iterations", fit.max_sem_iterations);
  integer("max_gd_steps", fit.max_gd_steps);
  integer("homog_iterations", fit.homog_iterations);
  integer("homog_tail_average", fit.homog_tail_average);
  integer("bridge_max_attempts", fit.bridge_max_attempts);
  if (auto v = get("estimation", "seed")) {
    integer("seed", fit.seed);
    cfg.seed_given = true;
  }
  if (auto v = get("estimation", "homogeneous")) {
    fit.homogeneous_mode = parse_bool(*v, name("estimation", "homogeneous"));
  }
  if (model.family == FamilyKind::Identity) fit.homogeneous_mode = true;
  fit.validate();

  if (tree.get_child_optional("study")) {
    StudySpec study;
    if (auto v = get("study", "K")) {
      const auto k = require_integer(*v, name("study", "K"));
      if (k < 0) throw InputError(name("study", "K") + " must be >= 0");
      study.paths = static_cast<std::size_t>(k);
    }
    if (auto v = get("study", "horizon")) study.horizon = require_double(*v, name("study", "horizon"));
    if (auto v = get("study", "horizons")) study.horizons = parse_list(*v, name("study", "horizons"));
    if (auto v = get("study", "delta")) {
      study.grid.delta = require_double(*v, name("study", "delta"));
      if (!(*study.grid.delta > 0.0)) throw InputError(name("study", "delta") + " must be > 0");
    }
    if (auto v = get("study", "times_file")) {
      fs::path file{std::string(trim(*v))};
      if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
      study.grid.times_file = file.string();
      const std::string text = read_file(file);
      for (auto line : lines_of(text)) {
        line = trim(line);
        if (line.empty() || line == "time") continue;
        for (double t : parse_list(line, "times_file")) study.grid.times.push_back(t);
      }
    }
    if (study.grid.delta && study.grid.times_file) {
      throw InputError("config: [study] takes either delta or times_file, not both");
    }
    if (study.horizon < 0.0) throw InputError("config: [study] horizon must be >= 0");
    cfg.study = std::move(study);
  }
  return cfg;
}

RunConfig read_config(const fs::path& path) {
  try {
    return parse_config(read_file(path), path.parent_path());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<double> observation_grid(const GridSpec& grid, double horizon) {
  std::vector<double> out;
  if (grid.delta) {
    const double slack = 1e-9 * std::max(1.0, horizon);
    for (long long i = 0;; ++i) {
      const double t = static_cast<double>(i) * *grid.delta;
      if (t > horizon + slack) break;
      out.push_back(std::min(t, horizon));
    }
  } else if (!grid.times.empty()) {
    for (double t : grid.times) {
      if (t <= horizon) out.push_back(t);
    }
  } else {
    throw InputError("observation grid needs [study] delta or times_file");
  }
  if (out.empty() || out.front() != 0.0) throw InputError("observation grid must start at 0");
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i] > out[i - 1])) throw InputError("observation grid must be strictly increasing");
  }
  return out;
}

std::string format_report(const FitResult& result, const FitConfig& cfg) {
  const int n = result.lambda_hat.size();
  std::string out = "# phsem fit report\n";
  auto kv = [&](const std::string& key, const std::string& value) {
    out += key + " = " + value + "\n";
  };
  kv("family", family_name(result.family));
  kv("n", std::to_string(n));
  kv("seed", std::to_string(cfg.seed));
  kv("termination", termination_name(result.termination));
  kv("iterations", std::to_string(result.iterations_used));
  if (result.beta_hat) kv("beta_hat", format_double(*result.beta_hat));
  if (result.family != FamilyKind::Identity) {
    kv("beta0", format_double(cfg.beta0));
    kv("eta", format_double(cfg.eta));
    kv("e_ell", format_double(cfg.e_ell));
    kv("beta_min", format_double(cfg.beta_min));
    kv("max_sem_iterations", std::to_string(cfg.max_sem_iterations));
    kv("max_gd_steps", std::to_string(cfg.max_gd_steps));
  } else {
    kv("homog_iterations", std::to_string(cfg.homog_iterations));
    kv("homog_tail_average", std::to_string(cfg.homog_tail_average));
  }
  kv("bridge_max_attempts", std::to_string(cfg.bridge_max_attempts));
  if (!result.message.empty()) kv("message", result.message);
  for (const auto& w : result.warnings) kv("warning", w);

  out += "\n[pi]\nstate,probability\n";
  for (int x = 0; x < n; ++x) out += fmt::format("{},{}\n", x + 1, format_double(result.pi_hat[x]));

  out += "\n[lambda]\n";
  out += format_generator(result.lambda_hat.entries());

  out += "\n[trace]\niteration,beta,gd_updates,absorbed_paths";
  for (int x = 1; x <= n; ++x) {
    for (int y = 1; y <= n; ++y) out += fmt::format(",lambda_{}{}", x, y);
  }
  out += '\n';
  for (const auto& rec : result.trace) {
    out += fmt::format("{},{},{},{}", rec.iteration, rec.beta ? format_double(*rec.beta) : "",
                       rec.gd_updates, rec.absorbed_paths);
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) out += "," + format_double(rec.lambda(x, y));
    }
    out += '\n';
  }
  return out;
}

FitReport parse_report(const std::string& text) {
  std::map<std::string, std::string> header;
  std::map<std::string, std::vector<std::string_view>> blocks;
  std::string section;
  for (auto line : lines_of(text)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = std::string(line.substr(1, line.size() - 2));
      continue;
    }
    if (section.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw InputError("report: malformed header line");
      header[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    } else {
      blocks[section].push_back(line);
    }
  }
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) throw InputError("report: missing '" + key + "'");
    return it->second;
  };

  FitReport report;
  report.family = parse_family_kind(field("family"));
  report.n = static_cast<int>(require_integer(field("n"), "report n"));
  report.seed = static_cast<std::uint64_t>(require_integer(field("seed"), "report seed"));
  report.termination = parse_termination(field("termination"));
  report.iterations = static_cast<int>(require_integer(field("iterations"), "report iterations"));
  if (header.count("beta_hat")) report.beta_hat = require_double(field("beta_hat"), "report beta_hat");

  const auto& pi_rows = blocks["pi"];
  if (pi_rows.size() != static_cast<std::size_t>(report.n) + 1) {
    throw InputError("report: [pi] block has the wrong number of rows");
  }
  Vector pi(report.n);
  for (int x = 0; x < report.n; ++x) {
    const auto cells = split(pi_rows[x + 1], ',');
    if (cells.size() != 2) throw InputError("report: malformed [pi] row");
    pi(x) = require_double(cells[1], "report pi");
  }
  report.pi = InitialDistribution(std::move(pi));

  std::string lambda_text;
  for (auto row : blocks["lambda"]) lambda_text += std::string(row) + "\n";
  Matrix lambda = parse_generator(lambda_text);
  if (lambda.rows() != report.n) throw InputError("report: [lambda] size does not match n");
  report.lambda = SubIntensityMatrix::checked(std::move(lambda));
  return report;
}

FitReport read_report(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "report.txt" : path;
  try {
    return parse_report(read_file(file));
  } catch (const InputError& e) {
    throw InputError(file.string() + ": " + e.what());
  }
}

}  // namespace phsem::io
