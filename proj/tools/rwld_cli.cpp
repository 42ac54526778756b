// rwld command-line front end.
//
// Every run resolves its configuration as flags > --config JSON > defaults
// (RWLD_SEED, when set, overrides the seed from any source), writes its
// outputs into --out and finishes with manifest.json listing the resolved
// configuration, input hashes and output files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "rwld/rwld.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rwld;

namespace {

constexpr int kExitVerify = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream s;
  for (unsigned i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return s.str();
}

// ---------------------------------------------------------------------------
// configuration

/// One subcommand: its defaults (null = required) and the raw flag strings.
struct Command {
  Command(std::string n, json d) : name(std::move(n)), defaults(std::move(d)) {}

  std::string name;
  json defaults;
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> opts;
  std::string config_path;
  CLI::App* app = nullptr;
};

json common_defaults() {
  return json{{"L", 2.5}, {"nx", 64}, {"T", 1.0}, {"nt", 64}, {"seed", 1}, {"out", "."}, {"csv", false}};
}

json solver_defaults() {
  return json{{"sigma", "linear"}, {"sigma-c", 1.0}, {"u0", "bump"}, {"v0", "zero"}};
}

void register_command(CLI::App& root, Command& c, const std::string& help) {
  c.app = root.add_subcommand(c.name, help);
  c.app->add_option("--config", c.config_path, "JSON config file (a manifest.json is accepted)");
  for (auto& [k, v] : c.defaults.items()) {
    const std::string flag = "--" + k;
    if (v.is_boolean()) {
      c.opts[k] = c.app->add_flag(flag)->description("default " + v.dump());
    } else {
      const std::string desc = v.is_null() ? "required" : "default " + v.dump();
      c.opts[k] = c.app->add_option(flag, c.raw[k], desc);
    }
  }
}

json convert(const std::string& key, const json& like, const std::string& s) {
  try {
    std::size_t pos = 0;
    if (like.is_number_unsigned() || like.is_number_integer()) {
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    }
    if (like.is_number() || like.is_null()) {
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    }
  } catch (const std::exception&) {
    throw ConfigError("flag --" + key + ": cannot parse '" + s + "' as a number");
  }
  return s;
}

json resolve(const Command& c) {
  json cfg = c.defaults;
  if (!c.config_path.empty()) {
    std::ifstream is(c.config_path);
    if (!is) throw ConfigError("cannot open config " + c.config_path);
    json f;
    try {
      f = json::parse(is);
    } catch (const json::exception& e) {
      throw ConfigError("config " + c.config_path + ": " + e.what());
    }
    if (f.contains("config") && f.contains("command")) f = f["config"];  // manifest replay
    for (auto& [k, v] : f.items()) {
      if (!cfg.contains(k)) throw ConfigError("config " + c.config_path + ": unknown key '" + k + "'");
      cfg[k] = v;
    }
  }
  for (auto& [k, opt] : c.opts) {
    if (opt->count() == 0) continue;
    cfg[k] = c.defaults[k].is_boolean() ? json(true) : convert(k, c.defaults[k], c.raw.at(k));
  }
  if (const char* env = std::getenv("RWLD_SEED"); env && cfg.contains("seed")) cfg["seed"] = convert("seed", 1, env);
  for (auto& [k, v] : cfg.items())
    if (v.is_null()) throw ConfigError("missing required flag --" + k);
  return cfg;
}

Grid grid_of(const json& c) {
  return Grid(c.at("L").get<double>(), c.at("nx").get<int>(), c.at("T").get<double>(), c.at("nt").get<int>());
}

DiffusionCoefficient sigma_of(const json& c) {
  const std::string s = c.at("sigma");
  const double k = c.at("sigma-c");
  if (s == "linear") return sigma_linear(k);
  if (s == "damped") return sigma_damped(k);
  throw ConfigError("--sigma must be linear or damped, got '" + s + "'");
}

/// Piecewise-linear profile from a two-column "x,value" CSV, zero outside.
std::pair<std::function<double(double)>, double> table_profile(const std::string& path, std::vector<std::string>& inputs) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open table " + path);
  inputs.push_back(path);
  std::vector<std::pair<double, double>> pts;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double x, v;
    char comma;
    if (!(ls >> x >> comma >> v) || comma != ',') throw ConfigError("table " + path + ": bad line '" + line + "'");
    pts.emplace_back(x, v);
  }
  if (pts.size() < 2) throw ConfigError("table " + path + ": need at least two points");
  std::sort(pts.begin(), pts.end());
  double radius = 0.0;
  for (auto& [x, v] : pts)
    if (v != 0.0) radius = std::max(radius, std::abs(x));
  auto f = [pts](double x) {
    if (x <= pts.front().first || x >= pts.back().first) return 0.0;
    auto it = std::upper_bound(pts.begin(), pts.end(), std::pair<double, double>(x, -INFINITY));
    const auto& [x1, v1] = *it;
    const auto& [x0, v0] = *(it - 1);
    return v0 + (v1 - v0) * (x - x0) / (x1 - x0);
  };
  return {f, std::max(radius, std::max(std::abs(pts.front().first), std::abs(pts.back().first)))};
}

std::pair<std::function<double(double)>, double> profile_of(const std::string& s, const std::string& flag,
                                                           std::vector<std::string>& inputs) {
  if (s == "zero") return {[](double) { return 0.0; }, 0.0};
  if (s == "bump") return {bump_data(0.5).u0, 0.5};
  if (s.rfind("table:", 0) == 0) return table_profile(s.substr(6), inputs);
  throw ConfigError("--" + flag + " must be zero, bump or table:FILE, got '" + s + "'");
}

InitialData data_of(const json& c, std::vector<std::string>& inputs) {
  auto [u0, ru] = profile_of(c.at("u0"), "u0", inputs);
  auto [v0, rv] = profile_of(c.at("v0"), "v0", inputs);
  return {u0, v0, 1.0, std::max(ru, rv)};
}

Control control_of(const std::string& s, const Grid& g, const HurstParam& hp, std::vector<std::string>& inputs) {
  if (s == "zero") return Control(g);
  if (s.rfind("bump-energy:", 0) == 0) {
    double e = 0.0;
    try {
      e = std::stod(s.substr(12));
    } catch (const std::exception&) {
      throw ConfigError("--g bump-energy:E needs a number");
    }
    if (!(e >= 0.0)) throw ConfigError("--g bump-energy:E needs E >= 0");
    return Control::with_energy(
        g, hp, [](double x) { return std::abs(x) < 1.0 ? (1.0 - x * x) * (1.0 - x * x) : 0.0; }, e);
  }
  const std::string path = s.rfind("file:", 0) == 0 ? s.substr(5) : s;
  if (!fs::exists(path)) throw ConfigError("--g: expected zero, bump-energy:E or a control file, got '" + s + "'");
  inputs.push_back(path);
  Control c = io::load_control(path);
  require_same_grid(c.grid, g, "--g control file");
  return c;
}

std::vector<double> ladder_of(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("--ladder: bad value '" + tok + "'");
    }
  }
  return out;
}

EventSpec event_of(const json& c, const InitialData& data, const Grid& g) {
  EventSpec e;
  e.x_star = c.at("x-star");
  const json& level = c.at("level");
  if (level.is_number()) {
    e.level = level;
  } else if (level == "auto") {
    e.level = initial_term_I0(data, g).values(g.nt, node_index(g, e.x_star)) + c.at("offset").get<double>();
  } else {
    e.level = convert("level", 0.0, level.get<std::string>()).get<double>();
  }
  return e;
}

// ---------------------------------------------------------------------------
// run context: output bookkeeping and manifest

struct Run {
  std::string command;
  json config;
  fs::path out;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string start = utc_now();
  json results = json::object();

  fs::path file(const std::string& name) {
    if (fs::path(name).has_parent_path()) throw ConfigError("output names must be plain file names: " + name);
    outputs.push_back(name);
    return out / name;
  }

  void write_manifest(const std::string& status, const std::string& error = "") const {
    json m;
    m["tool"] = "rwld_cli";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = config;
    m["seed"] = config.contains("seed") ? config["seed"] : json();
    json in = json::array();
    for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    m["inputs"] = in;
    m["outputs"] = outputs;
    m["start"] = start;
    m["end"] = utc_now();
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    m["results"] = results;
    std::ofstream(out / "manifest.json") << m.dump(2) << '\n';
  }
};

void save_field(Run& run, const std::string& stem, const Field& f) {
  io::save(run.file(stem + ".rwld").string(), f);
  if (run.config.at("csv").get<bool>()) io::save(run.file(stem + ".csv").string(), f, true);
}

// ---------------------------------------------------------------------------
// subcommands

void cmd_noise(Run& run) {
  const json& c = run.config;
  const NoiseSpec spec{HurstParam(c.at("H").get<double>()), grid_of(c), c.at("seed").get<std::uint64_t>(),
                       noise_method_from_string(c.at("method"))};
  const NoiseField w = sample_noise(spec, c.at("replicate").get<std::uint64_t>());
  io::save(run.file("noise.rwld").string(), w);
  if (c.at("csv").get<bool>()) io::save(run.file("noise.csv").string(), w, true);
  std::ofstream(run.file("noise_spec.json")) << io::to_json(spec).dump(2) << '\n';
}

void cmd_solve(Run& run) {
  const json& c = run.config;
  const HurstParam hp(c.at("H").get<double>());
  const Grid g = grid_of(c);
  const InitialData data = data_of(c, run.inputs);
  const DiffusionCoefficient sigma = sigma_of(c);
  NoiseField dW;
  const std::string noise = c.at("noise");
  if (noise.empty()) {
    dW = NoiseSampler(hp, g, noise_method_from_string(c.at("method"))).sample(c.at("seed").get<std::uint64_t>());
  } else {
    run.inputs.push_back(noise);
    dW = io::load_noise(noise);
  }
  const Control g_ctl = control_of(c.at("g"), g, hp, run.inputs);
  const double eps = c.at("eps");
  const SolveResult r = g_ctl.is_zero() ? solve_swe(data, sigma, eps, dW, g, hp)
                                        : solve_controlled(data, sigma, eps, dW, g_ctl, g, hp);
  save_field(run, "field", r.u);
  run.results = {{"scheme", r.scheme}, {"eps", eps}, {"u_T_max", r.u.values.row(g.nt).maxCoeff()}};
}

void cmd_skeleton(Run& run) {
  const json& c = run.config;
  const HurstParam hp(c.at("H").get<double>());
  const Grid g = grid_of(c);
  const InitialData data = data_of(c, run.inputs);
  const Control g_ctl = control_of(c.at("g"), g, hp, run.inputs);
  SkeletonOptions o;
  o.eps_mollify = c.at("eps-mollify");
  o.tol = c.at("tol");
  o.max_iter = c.at("max-iter");
  o.keep_iterates = false;
  auto write_trace = [&](const PicardTrace& tr) {
    std::ofstream os(run.file(c.at("trace-out").get<std::string>()));
    os << "iteration,d,s2\n";
    for (int n = 0; n < tr.iterations(); ++n) os << n << ',' << io::shortest(tr.d[n]) << ',' << io::shortest(tr.s2[n]) << '\n';
  };
  try {
    const auto [u, tr] = solve_skeleton(data, sigma_of(c), g_ctl, hp, g, o);
    save_field(run, "skeleton", u);
    write_trace(tr);
    run.results = {{"iterations", tr.iterations()}, {"energy", g_ctl.energy(hp)}, {"converged", tr.converged}};
  } catch (const PicardError& e) {
    write_trace(e.trace);
    throw;
  }
}

void cmd_rate(Run& run) {
  const json& c = run.config;
  const HurstParam hp(c.at("H").get<double>());
  const Grid g = grid_of(c);
  const InitialData data = data_of(c, run.inputs);
  const EventSpec ev = event_of(c, data, g);
  RateOptions o;
  o.nc_t = c.at("nc-t");
  o.nc_x = c.at("nc-x");
  o.mu0 = c.at("mu0");
  o.stages = c.at("stages");
  o.jobs = c.at("jobs");
  const RateResult r = rate_minimize(ev, data, sigma_of(c), hp, g, o);
  io::save(run.file("g_star.rwld").string(), r.g_star);
  json trace = json::array();
  for (const auto& t : r.trace)
    trace.push_back({{"stage", t.stage}, {"mu", t.mu}, {"iterations", t.iterations}, {"energy", t.energy},
                     {"violation", t.violation}});
  run.results = {{"event", {{"kind", to_string(ev.kind)}, {"x_star", ev.x_star}, {"level", ev.level}}},
                 {"energy", r.feasible ? json(r.energy) : json("inf")},
                 {"feasible", r.feasible},
                 {"g_star_file", "g_star.rwld"},
                 {"constraint_residual", r.constraint_residual},
                 {"event_value", r.event_value},
                 {"trace", trace}};
  std::ofstream(run.file("rate.json")) << run.results.dump(2) << '\n';
}

void cmd_ldp_sweep(Run& run) {
  const json& c = run.config;
  const HurstParam hp(c.at("H").get<double>());
  const Grid g = grid_of(c);
  const InitialData data = data_of(c, run.inputs);
  const DiffusionCoefficient sigma = sigma_of(c);
  const EventSpec ev = event_of(c, data, g);
  const std::vector<double> ladder = ladder_of(c.at("ladder"));
  const TailEstimate t = mc_tail(ev, data, sigma, hp, g, ladder, c.at("n").get<long>(), c.at("seed").get<std::uint64_t>(),
                                 noise_method_from_string(c.at("method")), c.at("jobs").get<int>());
  double energy = NAN;
  if (c.at("with-rate").get<bool>()) {
    RateOptions o;
    o.jobs = c.at("jobs");
    const RateResult r = rate_minimize(ev, data, sigma, hp, g, o);
    energy = r.feasible ? r.energy : INFINITY;
  }
  json rows = json::array();
  std::ofstream csv(run.file("ldp.csv"));
  csv << "eps,n,hits,p_hat,se,r_hat,zero_hits,energy\n";
  for (const auto& r : t.rows) {
    rows.push_back({{"eps", r.eps}, {"n", r.n}, {"hits", r.hits}, {"p_hat", r.p_hat}, {"se", r.se}, {"r_hat", r.r_hat},
                    {"zero_hits", r.zero_hits}});
    csv << io::shortest(r.eps) << ',' << r.n << ',' << r.hits << ',' << io::shortest(r.p_hat) << ','
        << io::shortest(r.se) << ',' << io::shortest(r.r_hat) << ',' << (r.zero_hits ? 1 : 0) << ','
        << io::shortest(energy) << '\n';
  }
  run.results = {{"event", {{"kind", to_string(ev.kind)}, {"x_star", ev.x_star}, {"level", ev.level}}},
                 {"ladder", rows}};
  if (std::isfinite(energy)) run.results["energy"] = energy;
  std::ofstream(run.file("ldp.json")) << run.results.dump(2) << '\n';
  std::ofstream(run.file("ldp_plot.txt"))
      << "Figure: r_hat (column r_hat of ldp.csv) against eps (log axis), one marker per ladder rung, hollow\n"
         "markers where zero_hits = 1 (continuity-corrected). Horizontal line at the energy column when present:\n"
         "the optimiser's upper bound on the rate. Expected shape: r_hat approaching the line as eps decreases.\n";
}

int cmd_verify(Run& run) {
  const json& c = run.config;
  verify::Options o;
  o.quick = c.at("quick");
  o.jobs = c.at("jobs");
  o.seed = c.at("seed");
  std::cout << "id,name,status,measured,tolerance,seconds,detail\n";
  bool ok = true;
  json rows = json::array();
  for (const auto& chk : verify::all_checks()) {
    const verify::CheckRow r = chk(o);
    ok = ok && r.pass;
    const char* status = r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL");
    std::cout << r.id << ',' << r.name << ',' << status << ',' << r.measured << ',' << r.tolerance << ','
              << std::setprecision(3) << r.seconds << std::setprecision(6) << ",\"" << r.detail << "\"\n"
              << std::flush;
    rows.push_back({{"id", r.id}, {"name", r.name}, {"status", status}, {"measured", r.measured},
                    {"tolerance", r.tolerance}, {"seconds", r.seconds}, {"detail", r.detail}});
  }
  run.results = {{"checks", rows}, {"all_pass", ok}};
  return ok ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rwld: rough-noise stochastic wave equation toolkit"};
  app.require_subcommand(1);

  std::vector<Command> cmds;
  cmds.reserve(6);
  auto with = [](json a, const json& b) {
    a.update(b);
    return a;
  };
  const json base = with(common_defaults(), {{"H", nullptr}, {"method", "cholesky"}, {"jobs", default_jobs()}});
  const json solver = with(base, solver_defaults());
  // level "auto" means I0(T, x*) + offset
  const json event = {{"x-star", 0.0}, {"offset", 0.5}, {"level", "auto"}};

  cmds.emplace_back("noise", with(base, {{"replicate", 0}}));
  cmds.emplace_back("solve", with(solver, {{"eps", 0.0}, {"noise", ""}, {"g", "zero"}}));
  cmds.emplace_back("skeleton", with(solver, {{"g", "zero"}, {"eps-mollify", 0.0}, {"tol", 1e-8}, {"max-iter", 60},
                                              {"trace-out", "trace.csv"}}));
  cmds.emplace_back("rate", with(with(solver, event), {{"nc-t", 8}, {"nc-x", 8}, {"mu0", 10.0}, {"stages", 10}}));
  cmds.emplace_back("ldp-sweep", with(with(solver, event), {{"ladder", "0.5,0.2,0.1,0.05"}, {"n", 20000},
                                                            {"with-rate", false}}));
  cmds.emplace_back("verify", json{{"quick", false}, {"jobs", default_jobs()}, {"seed", 20240611}, {"out", ""}});

  const std::map<std::string, std::string> help{
      {"noise", "sample a fractional noise field"},
      {"solve", "solve the stochastic wave equation (controlled when --g is given)"},
      {"skeleton", "solve the skeleton equation by Picard iteration"},
      {"rate", "upper bound on the rate function for a level event"},
      {"ldp-sweep", "Monte Carlo tail estimates along an eps ladder"},
      {"verify", "run the acceptance property suite"}};
  for (auto& c : cmds) register_command(app, c, help.at(c.name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  Command* cmd = nullptr;
  for (auto& c : cmds)
    if (c.app->parsed()) cmd = &c;

  Run run;
  run.command = cmd->name;
  try {
    run.config = resolve(*cmd);
    const std::string out = run.config.at("out");
    if (cmd->name == "verify" && out.empty()) {
      run.out.clear();
    } else {
      run.out = out;
      fs::create_directories(run.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "rwld_cli " << cmd->name << ": " << e.what() << "\n\n" << cmd->app->help();
    return kExitConfig;
  }

  int rc = 0;
  try {
    if (cmd->name == "noise") cmd_noise(run);
    else if (cmd->name == "solve") cmd_solve(run);
    else if (cmd->name == "skeleton") cmd_skeleton(run);
    else if (cmd->name == "rate") cmd_rate(run);
    else if (cmd->name == "ldp-sweep") cmd_ldp_sweep(run);
    else rc = cmd_verify(run);
  } catch (const ConfigError& e) {
    std::cerr << "rwld_cli " << cmd->name << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const io::IoError& e) {
    std::cerr << "rwld_cli " << cmd->name << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "rwld_cli " << cmd->name << ": numeric failure: " << e.what() << '\n';
    if (!run.out.empty()) run.write_manifest("numeric_failure", e.what());
    return kExitNumeric;
  }
  if (!run.out.empty()) run.write_manifest(rc == 0 ? "ok" : "verification_failed");
  return rc;
}
