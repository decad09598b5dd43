#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "szego/szego.hpp"

using json = nlohmann::json;
using namespace szego;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

// Keys each subcommand accepts in its resolved config, with defaults.
const std::map<std::string, json>& schema(const std::string& cmd) {
  static const json params = {{"nu", 1.0},          {"alpha", 0.0},       {"beta", 0.0},
                              {"N", 256},           {"rel_tol", 1e-10},   {"abs_tol", 1e-10}};
  static std::map<std::string, std::map<std::string, json>> all;
  if (all.empty()) {
    auto with_params = [&](std::map<std::string, json> m) {
      for (const auto& [k, v] : params.items()) m.emplace(k, v);
      m.emplace("out", "");
      return m;
    };
    const json none;  // null: optional with no default
    all["simulate"] = with_params({{"t_end", 10.0},
                                   {"dt", 0.1},
                                   {"b", none},
                                   {"c", none},
                                   {"p", none},
                                   {"modes", none},
                                   {"input", none},
                                   {"sobolev_s", json::array({1.0})},
                                   {"tail_guard", 1e-4}});
    all["rank1"] = with_params({{"t_end", 10.0}, {"dt", 0.1}, {"b", 0.0}, {"c", 1.0}, {"p", 0.0}});
    all["reduce"] = with_params({{"t_end", 10.0},
                                 {"dt", 0.1},
                                 {"log", false},
                                 {"chart", "blowup"},
                                 {"b", 0.0},
                                 {"c", 1.0},
                                 {"p", 0.0}});
    all["spectrum"] = with_params({{"input", none}, {"modes", none}, {"b", none}, {"c", none},
                                   {"p", none}, {"shifted", false}, {"n", 0}});
    all["constants"] = with_params({{"momentum", 1.0}, {"s", json::array({1.0, 2.0})}});
    all["classify"] = with_params({{"horizon", 1e4}, {"b", none}, {"c", none}, {"p", none},
                                   {"modes", none}, {"input", none}});
    all["stationary"] = with_params({{"K", 6},
                                     {"seed", 7},
                                     {"max_seeds", 200},
                                     {"min_margin", 1e-3},
                                     {"confirm_growth", false},
                                     {"growth_N", 2048},
                                     {"growth_t_end", 100.0},
                                     {"sigma1", none},
                                     {"sigma2", none},
                                     {"eps", none}});
    all["sweep"] = with_params({{"grid_nu", json::array({1.0})},
                                {"grid_alpha", json::array({0.0})},
                                {"grid_beta", json::array({0.0})},
                                {"grid_M", json::array({1.0})},
                                {"families", json::array({"generic"})},
                                {"horizon", 1e4},
                                {"sigma_T", 8.0},
                                {"eta0", 0.09},
                                {"jobs", 1}});
    all["fit"] = with_params({{"input", none},
                              {"column", "hs_1"},
                              {"kind", "power"},
                              {"t_lo", none},
                              {"t_hi", none}});
  }
  return all.at(cmd);
}

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw CliError(path + ": " + e.what());
  }
}

json resolve(const std::string& cmd, const json& file, const json& flags) {
  const auto& keys = schema(cmd);
  json out = json::object();
  for (const auto& [k, v] : keys) out[k] = v;
  for (const json* src : {&file, &flags}) {
    if (!src->is_object()) throw CliError("config must be a JSON object");
    for (const auto& [k, v] : src->items()) {
      if (!keys.count(k)) throw CliError("unknown config key for " + cmd + ": " + k);
      out[k] = v;
    }
  }
  return out;
}

double num(const json& c, const char* k) {
  if (!c.at(k).is_number()) throw CliError(std::string(k) + " must be a number");
  return c.at(k).get<double>();
}

std::size_t count(const json& c, const char* k, bool zero_ok = false) {
  const auto& v = c.at(k);
  if (!v.is_number_integer() || v.get<long long>() < (zero_ok ? 0 : 1))
    throw CliError(std::string(k) + (zero_ok ? " must be an integer >= 0" : " must be an integer >= 1"));
  return v.get<std::size_t>();
}

cplx complex_of(const json& v, const char* k) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw CliError(std::string(k) + " must be a number or [re, im]");
}

std::vector<double> num_list(const json& c, const char* k) {
  const auto& v = c.at(k);
  if (v.is_number()) return {v.get<double>()};
  std::vector<double> out;
  if (!v.is_array()) throw CliError(std::string(k) + " must be a number list");
  for (const auto& e : v) {
    if (!e.is_number()) throw CliError(std::string(k) + " must be a number list");
    out.push_back(e.get<double>());
  }
  return out;
}

Params params_of(const json& c) {
  Params p;
  p.nu = num(c, "nu");
  p.alpha = num(c, "alpha");
  p.beta = num(c, "beta");
  p.N = count(c, "N");
  p.rel_tol = num(c, "rel_tol");
  p.abs_tol = num(c, "abs_tol");
  p.validate();
  return p;
}

bool has_triple(const json& c) {
  return c.contains("b") && !c["b"].is_null() && c.contains("c") && !c["c"].is_null() &&
         c.contains("p") && !c["p"].is_null();
}

RankOneState triple_of(const json& c) {
  RankOneState s{complex_of(c.at("b"), "b"), complex_of(c.at("c"), "c"), complex_of(c.at("p"), "p")};
  s.validate();
  return s;
}

// Initial data: a rank-one triple, an inline mode list or a JSON file.
ModeVector modes_of(const json& c, std::size_t N) {
  const int given = (has_triple(c) ? 1 : 0) + (c.contains("modes") && !c["modes"].is_null()) +
                    (c.contains("input") && !c["input"].is_null());
  if (given != 1) throw CliError("give exactly one of b/c/p, modes or input");
  if (has_triple(c)) return embed(triple_of(c), N);
  const json j = !c["modes"].is_null() ? c["modes"] : read_json_file(c["input"].get<std::string>());
  ModeVector u = j.get<ModeVector>();
  if (u.size() > N) throw CliError("initial data has more modes than N");
  return u.resized(N);
}

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Output(const json& c) {
    const auto path = c.at("out").get<std::string>();
    if (!path.empty()) {
      file.open(path);
      if (!file) throw CliError("cannot write " + path);
      os = &file;
    }
  }
  std::ostream& operator*() { return *os; }
};

void emit(const json& c, const json& j) {
  Output o(c);
  *o << j.dump(2) << '\n';
}

void run_simulate(const json& c) {
  const Params p = params_of(c);
  EvolveOptions eo;
  eo.sobolev_s = num_list(c, "sobolev_s");
  eo.tail_guard = num(c, "tail_guard");
  const auto tr = evolve(modes_of(c, p.N), p, num(c, "t_end"), num(c, "dt"), eo);
  if (tr.breached()) spdlog::warn("{}", tr.message);
  Output o(c);
  const auto path = c.at("out").get<std::string>();
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
    *o << states_json(tr).dump() << '\n';
  else
    write_csv(tr, *o);
}

void run_rank1(const json& c) {
  const Params p = params_of(c);
  const auto tr = evolve_bcp(triple_of(c), p, num(c, "t_end"), num(c, "dt"));
  if (tr.boundary_stop) spdlog::warn("stopped near |p| = 1 at t={}", tr.times.back());
  Output o(c);
  auto& os = *o;
  os << std::setprecision(17);
  os << "t,b_re,b_im,c_re,c_im,p_re,p_im,mass,momentum,dist,hs_1\n";
  for (std::size_t j = 0; j < tr.times.size(); ++j) {
    const auto& s = tr.states[j];
    os << tr.times[j] << ',' << s.b.real() << ',' << s.b.imag() << ',' << s.c.real() << ','
       << s.c.imag() << ',' << s.p.real() << ',' << s.p.imag() << ',' << s.mass() << ','
       << s.momentum() << ',' << dist_to_CM(s) << ',' << h1_sq(s) << '\n';
  }
}

void run_reduce(const json& c) {
  const Params p = params_of(c);
  const auto chart_name = c.at("chart").get<std::string>();
  if (chart_name != "blowup" && chart_name != "scatter") throw CliError("chart is blowup or scatter");
  const Chart chart = chart_name == "blowup" ? Chart::BlowUp : Chart::Scatter;
  const double t_end = num(c, "t_end"), dt = num(c, "dt");
  const auto ts = c.at("log").get<bool>()
                      ? log_times(0.0, std::min(1.0, t_end), t_end,
                                  static_cast<std::size_t>(std::max(2.0, std::ceil(t_end / dt))))
                      : uniform_times(0.0, t_end, dt);
  OdeOptions oo;
  oo.rel_tol = std::min(p.rel_tol, 1e-11);
  oo.abs_tol = std::min(p.abs_tol, 1e-16);
  const auto tr = evolve_reduced_at(to_reduced(triple_of(c), chart), p, ts, oo);
  Output o(c);
  auto& os = *o;
  os << std::setprecision(17);
  os << "t,eta," << (chart == Chart::BlowUp ? "gamma" : "delta") << ",zeta_re,zeta_im,t_gamma,dist\n";
  for (std::size_t j = 0; j < tr.times.size(); ++j) {
    const auto& r = tr.states[j];
    os << tr.times[j] << ',' << r.eta << ',' << r.second << ',' << r.zeta.real() << ','
       << r.zeta.imag() << ',' << tr.times[j] * r.gamma() << ','
       << std::sqrt(std::max(0.0, r.eta + r.delta())) << '\n';
  }
}

void run_spectrum(const json& c) {
  const Params p = params_of(c);
  // File or inline modes keep their own length; a triple is embedded at N.
  const ModeVector u = has_triple(c) || c["modes"].is_null() == c["input"].is_null()
                           ? modes_of(c, p.N)
                           : (!c["modes"].is_null() ? c["modes"]
                                                    : read_json_file(c["input"].get<std::string>()))
                                 .get<ModeVector>();
  SpectrumOptions so;
  so.n = count(c, "n", true);
  const bool shifted = c.at("shifted").get<bool>();
  json out = spectrum(u, shifted, so);
  out["F"] = F_functional(u, so);
  const auto om = omega_membership(u, 1e-10 * std::max(1.0, mass(u)), so);
  out["mass"] = om.mass;
  out["omega"] = to_string(om.verdict);
  out["shifted"] = shifted;
  emit(c, out);
}

void run_constants(const json& c) {
  const auto k = constants(num(c, "nu"), num(c, "alpha"), num(c, "beta"), num(c, "momentum"),
                           num_list(c, "s"));
  emit(c, k);
}

void run_classify(const json& c) {
  const Params p = params_of(c);
  const double horizon = num(c, "horizon");
  const Classification cl = has_triple(c) ? classify(triple_of(c), p, horizon)
                                          : classify(modes_of(c, p.N), p, horizon);
  emit(c, cl);
}

void run_stationary(const json& c) {
  json out;
  if (!c["sigma1"].is_null() || !c["sigma2"].is_null() || !c["eps"].is_null()) {
    const auto r = stationary_rho_solver(num(c, "sigma1"), num(c, "sigma2"), num(c, "eps"));
    out["rho"] = r;
    const auto [b1, b2] = balance_residuals(r);
    out["rho"]["balance"] = {b1, b2};
  }
  StationaryConstraints sc;
  sc.N = params_of(c).N;
  sc.max_seeds = static_cast<int>(count(c, "max_seeds"));
  sc.min_margin = num(c, "min_margin");
  sc.confirm_growth = c.at("confirm_growth").get<bool>();
  sc.growth_N = count(c, "growth_N");
  sc.growth_t_end = num(c, "growth_t_end");
  out["candidate"] =
      stationary_search(static_cast<int>(count(c, "K")), count(c, "seed", true), sc);
  emit(c, out);
}

void run_sweep(const json& c) {
  SweepGrid g;
  g.nu = num_list(c, "grid_nu");
  g.alpha = num_list(c, "grid_alpha");
  g.beta = num_list(c, "grid_beta");
  g.M = num_list(c, "grid_M");
  g.families.clear();
  for (const auto& f : c.at("families")) g.families.push_back(family_from_string(f.get<std::string>()));
  g.generic_horizon = num(c, "horizon");
  g.sigma_T = num(c, "sigma_T");
  g.generic_eta0 = num(c, "eta0");
  const auto rows = sweep(g, static_cast<unsigned>(count(c, "jobs")));
  Output o(c);
  write_sweep_csv(rows, *o);
}

void run_fit(const json& c) {
  if (c["input"].is_null()) throw CliError("fit needs --input CSV");
  std::ifstream in(c["input"].get<std::string>());
  if (!in) throw CliError("cannot open " + c["input"].get<std::string>());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) head.push_back(f);
  }
  const auto col = c.at("column").get<std::string>();
  const auto it = std::find(head.begin(), head.end(), col);
  if (head.empty() || head[0] != "t" || it == head.end())
    throw CliError("CSV needs a t column and a " + col + " column");
  const auto ci = static_cast<std::size_t>(it - head.begin());
  std::vector<double> t, y;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<std::string> f;
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() <= ci) continue;
    t.push_back(std::stod(f[0]));
    y.push_back(std::stod(f[ci]));
  }
  if (t.empty()) throw CliError("CSV has no rows");
  auto [lo, hi] = default_window(t.back());
  if (!c["t_lo"].is_null()) lo = num(c, "t_lo");
  if (!c["t_hi"].is_null()) hi = num(c, "t_hi");
  const auto kind = c.at("kind").get<std::string>();
  FitResult f;
  if (kind == "power") f = fit_power_law(t, y, lo, hi);
  else if (kind == "exp") f = fit_exp_rate(t, y, lo, hi);
  else throw CliError("kind is power or exp");
  json out = f;
  out["column"] = col;
  out["kind"] = kind;
  emit(c, out);
}

void setup_logging() {
  auto logger = spdlog::stderr_color_st("szego");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* lv = std::getenv("SZEGO_LOG")) spdlog::set_level(spdlog::level::from_str(lv));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Numerical lab for the damped Szego equation"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    json set = json::object();
  };
  std::map<std::string, Flags> flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "Truncated Fourier evolution"},
      {"rank1", "Rank-one (b, c, p) evolution"},
      {"reduce", "Reduced three-variable evolution"},
      {"spectrum", "Hankel spectrum of a mode vector"},
      {"constants", "Closed-form asymptotic constants"},
      {"classify", "Periodic, blow-up or scattering verdict"},
      {"stationary", "Stationary data for beta = 1"},
      {"sweep", "Parameter grid classification"},
      {"fit", "Power-law or exponential fit of a CSV column"}};

  // Typed flags land in the override object only when given.
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    auto& f = flags[name];
    sub->add_option("--config", f.config, "JSON config file");
    const auto& keys = schema(name);
    auto number = [&](const std::string& flag, const std::string& key) {
      if (!keys.count(key)) return;
      sub->add_option_function<double>(flag, [&f, key](double v) { f.set[key] = v; });
    };
    auto integer = [&](const std::string& flag, const std::string& key) {
      if (!keys.count(key)) return;
      sub->add_option_function<long long>(flag, [&f, key](long long v) { f.set[key] = v; });
    };
    auto text = [&](const std::string& flag, const std::string& key) {
      if (!keys.count(key)) return;
      sub->add_option_function<std::string>(flag, [&f, key](const std::string& v) { f.set[key] = v; });
    };
    auto complex = [&](const std::string& flag, const std::string& key) {
      if (!keys.count(key)) return;
      sub->add_option_function<std::vector<double>>(
             flag,
             [&f, key](const std::vector<double>& v) {
               f.set[key] = v.size() == 1 ? json(v[0]) : json(v);
             },
             "value or re,im")
          ->delimiter(',')
          ->expected(1, 2);
    };
    auto list = [&](const std::string& flag, const std::string& key) {
      if (!keys.count(key)) return;
      sub->add_option_function<std::vector<double>>(
             flag, [&f, key](const std::vector<double>& v) { f.set[key] = v; })
          ->delimiter(',');
    };
    number("--nu", "nu");
    number("--alpha", "alpha");
    number("--beta", "beta");
    integer("--N", "N");
    number("--t-end", "t_end");
    number("--dt", "dt");
    text("--out", "out");
    number("--momentum", "momentum");
    complex("--b", "b");
    complex("--c", "c");
    complex("--p", "p");
    text("--input", "input");
    if (keys.count("shifted"))
      sub->add_flag_callback("--shifted", [&f] { f.set["shifted"] = true; });
    if (keys.count("log")) sub->add_flag_callback("--log", [&f] { f.set["log"] = true; });
    if (keys.count("confirm_growth"))
      sub->add_flag_callback("--confirm-growth", [&f] { f.set["confirm_growth"] = true; });
    integer("--jobs", "jobs");
    number("--horizon", "horizon");
    integer("--K", "K");
    integer("--seed", "seed");
    text("--chart", "chart");
    text("--column", "column");
    text("--kind", "kind");
    number("--t-lo", "t_lo");
    number("--t-hi", "t_hi");
    list("--s", "s");
    list("--grid-nu", "grid_nu");
    list("--grid-alpha", "grid_alpha");
    list("--grid-beta", "grid_beta");
    list("--grid-M", "grid_M");
    if (keys.count("families"))
      sub->add_option_function<std::vector<std::string>>(
             "--families", [&f](const std::vector<std::string>& v) { f.set["families"] = v; })
          ->delimiter(',');
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const auto& f = flags[cmd];
    const json file = f.config.empty() ? json::object() : read_json_file(f.config);
    const json cfg = resolve(cmd, file, f.set);
    spdlog::info("{} config {}", cmd, cfg.dump());
    if (cmd == "simulate") run_simulate(cfg);
    else if (cmd == "rank1") run_rank1(cfg);
    else if (cmd == "reduce") run_reduce(cfg);
    else if (cmd == "spectrum") run_spectrum(cfg);
    else if (cmd == "constants") run_constants(cfg);
    else if (cmd == "classify") run_classify(cfg);
    else if (cmd == "stationary") run_stationary(cfg);
    else if (cmd == "sweep") run_sweep(cfg);
    else if (cmd == "fit") run_fit(cfg);
  } catch (const CliError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const json::exception& e) {
    spdlog::error("config: {}", e.what());
    return kExitValidation;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.kind() == ErrorKind::Validation ? kExitValidation : kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  }
  return 0;
}
