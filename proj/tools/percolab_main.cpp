#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "percolab/experiment.hpp"

namespace {

using namespace percolab;

uint64_t env_seed() {
  if (const char* s = std::getenv("PERCOLAB_SEED")) return std::strtoull(s, nullptr, 10);
  return 1;
}

double to_num(const std::string& s, const char* field) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const Error&) {
    throw;
  } catch (...) {
    throw Error(Errc::bad_config, std::string(field) + ": invalid number '" + s + "'");
  }
}

std::vector<double> parse_doubles(const std::string& s, const char* field) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(to_num(tok, field));
  }
  return out;
}

DistributionSpec parse_law(const std::string& s, const char* field) {
  std::vector<Atom> atoms;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw Error(Errc::bad_config,
                  std::string(field) + ": expected value:weight pairs, got '" + tok + "'");
    std::string vs = tok.substr(0, colon);
    double v = (vs == "inf") ? kInf : to_num(vs, field);
    double w = to_num(tok.substr(colon + 1), field);
    atoms.push_back({v, w});
  }
  try {
    return make_law(std::move(atoms));
  } catch (const Error& e) {
    std::string what = e.what();
    if (what.rfind(std::string(field) + ": ", 0) == 0) throw;
    throw Error(Errc::bad_config, std::string(field) + ": " + what);
  }
}

Vtx parse_x(const std::string& s) {
  Vtx v{};
  std::stringstream ss(s);
  std::string tok;
  int k = 0;
  while (std::getline(ss, tok, ',')) {
    if (k >= kMaxDim) throw Error(Errc::bad_config, "x: too many coordinates");
    v[k++] = Coord(to_num(tok, "x"));
  }
  return v;
}

std::vector<Vec2> parse_dirs(const std::string& s) {
  std::vector<Vec2> out;
  std::stringstream ss(s);
  std::string pair;
  while (std::getline(ss, pair, ';')) {
    auto c = pair.find(',');
    if (c == std::string::npos)
      throw Error(Errc::bad_config, "directions: expected x,y pairs joined by ';'");
    out.push_back({to_num(pair.substr(0, c), "directions"), to_num(pair.substr(c + 1), "directions")});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supercritical percolation and first-passage laboratory"};
  app.require_subcommand(0, 1);

  struct Flags {
    std::string config_path;
    std::string out_dir = "out";
    int workers = 1;
    int dimension = 2;
    int64_t radius = 0, margin = -1, n = 20, replicas = 0;
    uint64_t seed = 0;
    std::string law, x, p_grid, k_list, directions;
    std::vector<std::string> laws;
    double m0 = 0, p0 = 0.8, p = 0.85, q = 0.9, beta = 6.0, rho = 2.0, rho_hat = 3.0;
    double stderr_mult = 3.0, regularize_level = 0;
    int N = 8, guard = 20;
  } fl;

  const char* kDescr[6] = {
      "coupled travel times under rising truncation levels",
      "time-constant estimates for a law list against a target law",
      "exact small-cluster Cheeger statistics over a p grid",
      "boundary-distance norms, Wulff shapes, and variational values over a p grid",
      "random path surgeries checked by the independent verifier",
      "good-box fractions and per-condition failure counts",
  };
  std::map<std::string, CLI::App*> subs;
  for (int i = 0; i < 6; ++i) {
    Experiment e = Experiment(i);
    CLI::App* sub = app.add_subcommand(experiment_name(e), kDescr[i]);
    sub->add_option("--config", fl.config_path, "JSON config file; other flags override its fields");
    sub->add_option("--out", fl.out_dir, "output directory (default: out)");
    sub->add_option("--workers", fl.workers, "worker threads (default: 1)");
    sub->add_option("--dimension", fl.dimension, "lattice dimension, 2..4");
    sub->add_option("--radius", fl.radius, "window radius (0 derives it from n and x)");
    sub->add_option("--margin", fl.margin, "window margin (-1 derives it)");
    sub->add_option("--n", fl.n, "estimation scale");
    sub->add_option("--replicas", fl.replicas, "number of replicas");
    sub->add_option("--seed", fl.seed, "base seed (default: PERCOLAB_SEED or 1)");
    sub->add_option("--law", fl.law, "atoms as value:weight[,value:weight...]; value may be inf");
    sub->add_option("--laws", fl.laws, "candidate law (repeatable), same syntax as --law");
    sub->add_option("--x", fl.x, "direction, comma-separated integers");
    sub->add_option("--p-grid", fl.p_grid, "comma-separated p values, strictly increasing");
    sub->add_option("--k-list", fl.k_list, "comma-separated truncation levels");
    sub->add_option("--m0", fl.m0, "regularization level (0 takes the smallest finite atom)");
    sub->add_option("--N", fl.N, "macro box scale");
    sub->add_option("--p0", fl.p0, "dense percolation level");
    sub->add_option("--p", fl.p, "target openness of rebuilt paths");
    sub->add_option("--q", fl.q, "sparse level of the input paths");
    sub->add_option("--beta", fl.beta, "internal-distance slack of good boxes");
    sub->add_option("--rho", fl.rho, "frozen bound on the surgery length ratio");
    sub->add_option("--rho-hat", fl.rho_hat, "frozen bound on the routing length ratio");
    sub->add_option("--directions", fl.directions, "integer x,y pairs joined by ';'");
    sub->add_option("--guard", fl.guard, "exhaustive-enumeration size guard");
    sub->add_option("--stderr-mult", fl.stderr_mult, "trend tolerance in joint standard errors");
    sub->add_option("--regularize-level", fl.regularize_level,
                    "endpoint projection level (0 uses the sweep's own p)");
    subs[experiment_name(e)] = sub;
  }

  CLI::App* rep = app.add_subcommand("replay", "re-run a stored record and compare bit-exactly");
  std::string record_path;
  rep->add_option("record", record_path, "path to a run record JSON")->required();
  rep->add_option("--workers", fl.workers, "worker threads (default: 1)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rep->parsed()) {
      ReplayVerdict v = replay(record_path, fl.workers);
      if (v.match) {
        std::cout << "MATCH\n";
        return 0;
      }
      std::cout << "MISMATCH: " << v.detail << "\n";
      return 1;
    }

    CLI::App* active = nullptr;
    Experiment exp{};
    for (auto& [name, sub] : subs) {
      if (sub->parsed()) {
        active = sub;
        exp = experiment_from_name(name);
      }
    }
    if (!active) {
      std::cout << app.help();
      return 0;
    }

    ExperimentConfig cfg;
    bool config_has_seed = false;
    if (active->count("--config") > 0) {
      std::ifstream in(fl.config_path);
      if (!in) throw Error(Errc::bad_config, "config: cannot open " + fl.config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const std::exception& ex) {
        throw Error(Errc::bad_config, std::string("config: invalid JSON: ") + ex.what());
      }
      cfg = ExperimentConfig::from_json(j);
      config_has_seed = j.contains("seed");
    }
    cfg.experiment = exp;

    auto set = [&](const char* flag) { return active->count(flag) > 0; };
    if (set("--dimension")) cfg.dimension = fl.dimension;
    if (set("--radius")) cfg.radius = Coord(fl.radius);
    if (set("--margin")) cfg.margin = Coord(fl.margin);
    if (set("--n")) cfg.n = fl.n;
    if (set("--replicas")) cfg.replicas = fl.replicas;
    if (set("--law")) cfg.law = parse_law(fl.law, "law");
    if (set("--laws")) {
      cfg.laws.clear();
      for (const std::string& s : fl.laws) cfg.laws.push_back(parse_law(s, "laws"));
    }
    if (set("--x")) cfg.x = parse_x(fl.x);
    if (set("--p-grid")) cfg.p_grid = parse_doubles(fl.p_grid, "p_grid");
    if (set("--k-list")) cfg.k_list = parse_doubles(fl.k_list, "k_list");
    if (set("--m0")) cfg.m0 = fl.m0;
    if (set("--N")) cfg.renorm.N = fl.N;
    if (set("--p0")) cfg.renorm.p0 = fl.p0;
    if (set("--p")) cfg.renorm.p = fl.p;
    if (set("--q")) cfg.renorm.q = fl.q;
    if (set("--beta")) cfg.renorm.beta = fl.beta;
    if (set("--rho")) cfg.renorm.rho = fl.rho;
    if (set("--rho-hat")) cfg.renorm.rho_hat = fl.rho_hat;
    if (set("--directions")) cfg.directions = parse_dirs(fl.directions);
    if (set("--guard")) cfg.guard = fl.guard;
    if (set("--stderr-mult")) cfg.stderr_mult = fl.stderr_mult;
    if (set("--regularize-level")) cfg.regularize_level = fl.regularize_level;
    if (set("--seed"))
      cfg.seed = fl.seed;
    else if (!config_has_seed)
      cfg.seed = env_seed();

    RunRecord rec = run(cfg, fl.workers);
    std::string path = write_record(rec, fl.out_dir);
    for (const std::string& w : rec.warnings) std::cout << "warning: " << w << "\n";
    for (const auto& [key, val] : rec.aggregates.items())
      std::cout << key << " = " << val.dump() << "\n";
    std::cout << "wrote " << path << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << errc_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
