#include "percolab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "percolab/cluster.hpp"
#include "percolab/fpp.hpp"
#include "percolab/rightmost.hpp"
#include "percolab/stats.hpp"

namespace percolab {

const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::truncation: return "truncation";
    case Experiment::mu_continuity: return "mu-continuity";
    case Experiment::cheeger_sweep: return "cheeger-sweep";
    case Experiment::wulff_sweep: return "wulff-sweep";
    case Experiment::surgery_validate: return "surgery-validate";
    case Experiment::box_classify: return "box-classify";
  }
  return "?";
}

Experiment experiment_from_name(const std::string& name) {
  for (int i = 0; i < 6; ++i) {
    Experiment e = Experiment(i);
    if (name == experiment_name(e)) return e;
  }
  throw Error(Errc::bad_config, "experiment: unknown name '" + name + "'");
}

namespace {

std::string fmt(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

nlohmann::json law_to_json(const DistributionSpec& g) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const Atom& a : g.atoms) {
    nlohmann::json v = (a.value == kInf) ? nlohmann::json("inf") : nlohmann::json(a.value);
    atoms.push_back(nlohmann::json::array({v, a.weight}));
  }
  return nlohmann::json{{"atoms", atoms}, {"label", g.label}};
}

DistributionSpec law_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("atoms"))
    throw Error(Errc::bad_config, field + ": expected an object with an 'atoms' array");
  std::vector<Atom> atoms;
  for (const auto& e : j.at("atoms")) {
    if (!e.is_array() || e.size() != 2)
      throw Error(Errc::bad_config, field + ": each atom must be [value, weight]");
    double v = 0;
    if (e[0].is_string()) {
      if (e[0].get<std::string>() != "inf")
        throw Error(Errc::bad_config, field + ": atom value must be a number or \"inf\"");
      v = kInf;
    } else if (e[0].is_number()) {
      v = e[0].get<double>();
    } else {
      throw Error(Errc::bad_config, field + ": atom value must be a number or \"inf\"");
    }
    if (!e[1].is_number()) throw Error(Errc::bad_config, field + ": atom weight must be a number");
    atoms.push_back({v, e[1].get<double>()});
  }
  std::string label = j.contains("label") ? j.at("label").get<std::string>() : std::string();
  if (atoms.empty()) {
    // the unset law serializes as an empty atom list; round-trip it as unset
    DistributionSpec g;
    g.label = std::move(label);
    return g;
  }
  try {
    return make_law(std::move(atoms), label);
  } catch (const Error& err) {
    throw Error(Errc::bad_config, field + ": " + err.what());
  }
}

double smallest_finite_atom(const DistributionSpec& g) {
  for (const Atom& a : g.atoms) {
    if (a.value != kInf) return a.value;
  }
  throw Error(Errc::bad_config, "law: needs at least one finite atom");
}

double resolve_m0(const ExperimentConfig& cfg, const DistributionSpec& g) {
  return cfg.m0 > 0 ? cfg.m0 : smallest_finite_atom(g);
}

std::vector<Vec2> default_directions() {
  return {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dimension < 2 || dimension > kMaxDim)
    throw Error(Errc::bad_config, "dimension: must be in [2, 4]");
  if (replicas < 1) throw Error(Errc::bad_config, "replicas: must be >= 1");
  if (radius < 0) throw Error(Errc::bad_config, "radius: must be >= 0");
  if (margin < -1) throw Error(Errc::bad_config, "margin: must be >= -1 (-1 derives it)");
  if (n < 1) throw Error(Errc::bad_config, "n: must be >= 1");
  if (guard < 1 || guard > 26) throw Error(Errc::bad_config, "guard: must be in [1, 26]");
  if (!(stderr_mult > 0)) throw Error(Errc::bad_config, "stderr_mult: must be > 0");
  if (regularize_level < 0 || regularize_level > 1)
    throw Error(Errc::bad_config, "regularize_level: must be in [0, 1]");
  if (m0 < 0) throw Error(Errc::bad_config, "m0: must be >= 0");
  for (int k = dimension; k < kMaxDim; ++k) {
    if (x[k] != 0) throw Error(Errc::bad_config, "x: coordinates beyond `dimension` must be 0");
  }

  auto need_x = [&] {
    bool zero = true;
    for (int k = 0; k < dimension; ++k) zero = zero && x[k] == 0;
    if (zero) throw Error(Errc::bad_config, "x: direction must be nonzero");
  };
  auto need_grid = [&] {
    if (p_grid.empty()) throw Error(Errc::bad_config, "p_grid: required for this experiment");
    for (double p : p_grid) {
      if (!(p > 0) || p > 1) throw Error(Errc::bad_config, "p_grid: entries must be in (0, 1]");
    }
    for (size_t i = 1; i < p_grid.size(); ++i) {
      if (!(p_grid[i - 1] < p_grid[i]))
        throw Error(Errc::bad_config, "p_grid: must be strictly increasing");
    }
  };
  auto need_renorm_window = [&](Coord min_halfwidth, const char* why) {
    renorm.validate();
    if (radius <= 0) throw Error(Errc::bad_config, std::string("radius: required; ") + why);
    Coord hw = radius + (margin > 0 ? margin : 0);
    if (hw < min_halfwidth)
      throw Error(Errc::bad_config, std::string("radius: too small; ") + why);
  };

  switch (experiment) {
    case Experiment::truncation: {
      if (law.atoms.empty()) throw Error(Errc::bad_config, "law: required for truncation");
      need_x();
      double m = resolve_m0(*this, law);
      if (k_list.empty()) throw Error(Errc::bad_config, "k_list: required for truncation");
      for (size_t i = 1; i < k_list.size(); ++i) {
        if (!(k_list[i - 1] < k_list[i]))
          throw Error(Errc::bad_config, "k_list: must be strictly increasing");
      }
      if (k_list.front() < m)
        throw Error(Errc::bad_config, "k_list: entries must be >= m0");
      if (!(cdf(law, m) > 0))
        throw Error(Errc::bad_config, "m0: the law has no mass at [0, m0]");
      break;
    }
    case Experiment::mu_continuity: {
      if (law.atoms.empty()) throw Error(Errc::bad_config, "law: target law required");
      if (laws.empty()) throw Error(Errc::bad_config, "laws: candidate list required");
      need_x();
      resolve_m0(*this, law);
      for (const DistributionSpec& g : laws) resolve_m0(*this, g);
      break;
    }
    case Experiment::cheeger_sweep: {
      need_grid();
      if (radius < 1) throw Error(Errc::bad_config, "radius: cheeger-sweep needs an explicit radius >= 1");
      break;
    }
    case Experiment::wulff_sweep: {
      if (dimension != 2) throw Error(Errc::bad_config, "dimension: wulff-sweep is planar");
      need_grid();
      for (const Vec2& d : directions) {
        if (d.x == 0 && d.y == 0) throw Error(Errc::bad_config, "directions: zero direction");
        if (d.x != std::floor(d.x) || d.y != std::floor(d.y))
          throw Error(Errc::bad_config, "directions: must have integer coordinates");
      }
      break;
    }
    case Experiment::surgery_validate: {
      if (dimension != 2 && dimension != 3)
        throw Error(Errc::bad_config, "dimension: surgery-validate supports 2 or 3");
      need_renorm_window(Coord(5 * renorm.N + 1), "the macro grid needs radius + margin >= 5N+1");
      break;
    }
    case Experiment::box_classify: {
      need_renorm_window(Coord(3 * renorm.N), "enlarged boxes need radius + margin >= 3N");
      break;
    }
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = experiment_name(experiment);
  j["dimension"] = dimension;
  j["radius"] = radius;
  j["margin"] = margin;
  j["law"] = law_to_json(law);
  nlohmann::json ls = nlohmann::json::array();
  for (const DistributionSpec& g : laws) ls.push_back(law_to_json(g));
  j["laws"] = ls;
  j["p_grid"] = p_grid;
  std::vector<int64_t> xs;
  for (int k = 0; k < dimension; ++k) xs.push_back(x[k]);
  j["x"] = xs;
  j["n"] = n;
  j["k_list"] = k_list;
  j["m0"] = m0;
  j["replicas"] = replicas;
  j["seed"] = seed;
  j["N"] = renorm.N;
  j["p0"] = renorm.p0;
  j["p"] = renorm.p;
  j["q"] = renorm.q;
  j["beta"] = renorm.beta;
  j["rho"] = renorm.rho;
  j["rho_hat"] = renorm.rho_hat;
  nlohmann::json ds = nlohmann::json::array();
  for (const Vec2& d : directions) ds.push_back(nlohmann::json::array({d.x, d.y}));
  j["directions"] = ds;
  j["regularize_level"] = regularize_level;
  j["guard"] = guard;
  j["stderr_mult"] = stderr_mult;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::bad_config, "config: expected a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "experiment") {
        cfg.experiment = experiment_from_name(val.get<std::string>());
      } else if (key == "dimension") {
        cfg.dimension = val.get<int>();
      } else if (key == "radius") {
        cfg.radius = val.get<Coord>();
      } else if (key == "margin") {
        cfg.margin = val.get<Coord>();
      } else if (key == "law") {
        cfg.law = law_from_json(val, "law");
      } else if (key == "laws") {
        cfg.laws.clear();
        for (const auto& e : val) cfg.laws.push_back(law_from_json(e, "laws"));
      } else if (key == "p_grid") {
        cfg.p_grid = val.get<std::vector<double>>();
      } else if (key == "x") {
        auto xs = val.get<std::vector<int64_t>>();
        if (xs.size() > size_t(kMaxDim)) throw Error(Errc::bad_config, "x: too many coordinates");
        cfg.x = Vtx{};
        for (size_t k = 0; k < xs.size(); ++k) cfg.x[int(k)] = Coord(xs[k]);
      } else if (key == "n") {
        cfg.n = val.get<int64_t>();
      } else if (key == "k_list") {
        cfg.k_list = val.get<std::vector<double>>();
      } else if (key == "m0") {
        cfg.m0 = val.get<double>();
      } else if (key == "replicas") {
        cfg.replicas = val.get<int64_t>();
      } else if (key == "seed") {
        cfg.seed = val.get<uint64_t>();
      } else if (key == "N") {
        cfg.renorm.N = val.get<int>();
      } else if (key == "p0") {
        cfg.renorm.p0 = val.get<double>();
      } else if (key == "p") {
        cfg.renorm.p = val.get<double>();
      } else if (key == "q") {
        cfg.renorm.q = val.get<double>();
      } else if (key == "beta") {
        cfg.renorm.beta = val.get<double>();
      } else if (key == "rho") {
        cfg.renorm.rho = val.get<double>();
      } else if (key == "rho_hat") {
        cfg.renorm.rho_hat = val.get<double>();
      } else if (key == "directions") {
        cfg.directions.clear();
        for (const auto& e : val) {
          if (!e.is_array() || e.size() != 2)
            throw Error(Errc::bad_config, "directions: each entry must be [x, y]");
          cfg.directions.push_back({e[0].get<double>(), e[1].get<double>()});
        }
      } else if (key == "regularize_level") {
        cfg.regularize_level = val.get<double>();
      } else if (key == "guard") {
        cfg.guard = val.get<int>();
      } else if (key == "stderr_mult") {
        cfg.stderr_mult = val.get<double>();
      } else {
        throw Error(Errc::bad_config, "config: unknown field '" + key + "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      throw Error(Errc::bad_config, key + ": " + ex.what());
    }
  }
  return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::string s = cfg.to_json().dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j;
  j["config"] = config;
  j["hash"] = hash;
  j["columns"] = columns;
  j["rows"] = rows;
  j["aggregates"] = aggregates;
  j["extras"] = extras;
  j["warnings"] = warnings;
  j["wall_ms"] = wall_ms;
  j["version"] = version;
  j["workers"] = workers;
  return j;
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
  RunRecord r;
  if (!j.is_object() || !j.contains("config") || !j.contains("aggregates") || !j.contains("hash"))
    throw Error(Errc::precondition_failed, "record: missing config, hash, or aggregates");
  r.config = j.at("config");
  r.hash = j.at("hash").get<std::string>();
  if (j.contains("columns")) r.columns = j.at("columns").get<std::vector<std::string>>();
  if (j.contains("rows")) r.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  r.aggregates = j.at("aggregates");
  if (j.contains("extras")) r.extras = j.at("extras");
  if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (j.contains("wall_ms")) r.wall_ms = j.at("wall_ms").get<int64_t>();
  if (j.contains("version")) r.version = j.at("version").get<std::string>();
  if (j.contains("workers")) r.workers = j.at("workers").get<int>();
  return r;
}

namespace {

// Dynamic index dispatch over tasks; slot-indexed outputs keep the reduction
// order independent of the worker count.
void run_pool(int64_t count, int workers, const std::function<void(int64_t)>& fn) {
  if (count <= 0) return;
  if (workers <= 1 || count == 1) {
    for (int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::mutex mu;
  std::exception_ptr first;
  auto body = [&] {
    for (;;) {
      int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!first) first = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> ts;
  int nw = int(std::min<int64_t>(workers, count));
  ts.reserve(size_t(nw));
  for (int w = 0; w < nw; ++w) ts.emplace_back(body);
  for (std::thread& t : ts) t.join();
  if (first) std::rethrow_exception(first);
}

Window make_window(const ExperimentConfig& cfg) {
  Window w;
  w.dim = cfg.dimension;
  if (cfg.radius > 0) {
    w.radius = cfg.radius;
    w.margin = cfg.margin >= 0 ? cfg.margin : 0;
  } else {
    int64_t linf = 0, l1 = 0;
    for (int k = 0; k < cfg.dimension; ++k) {
      linf = std::max<int64_t>(linf, std::abs(int64_t(cfg.x[k])));
      l1 += std::abs(int64_t(cfg.x[k]));
    }
    w.radius = Coord(cfg.n * linf);
    w.margin = cfg.margin >= 0 ? cfg.margin : Coord((cfg.n * l1 + 1) / 2);
  }
  w.validate();
  return w;
}

DistributionSpec finite_majorant_of(const DistributionSpec& law, double k_max) {
  std::vector<Atom> atoms;
  for (const Atom& a : law.atoms) {
    atoms.push_back({a.value == kInf ? k_max : a.value, a.weight});
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.value < b.value; });
  std::vector<Atom> merged;
  for (const Atom& a : atoms) {
    if (!merged.empty() && merged.back().value == a.value)
      merged.back().weight += a.weight;
    else
      merged.push_back(a);
  }
  return make_law(std::move(merged), "majorant");
}

double critical_p(int dim) { return dim == 2 ? 0.5 : (dim == 3 ? 0.2488 : 0.1601); }

void warn_if_subcritical(RunRecord& rec, int dim, double level, const std::string& field) {
  double pc = critical_p(dim);
  if (level <= pc)
    rec.warnings.push_back(field + ": level " + fmt(level) + " is at or below the bond threshold " +
                           fmt(pc) + " for dimension " + fmt(double(dim)));
}

Stat column_stat(const std::vector<std::vector<double>>& rows, size_t col, double scale) {
  std::vector<double> xs;
  xs.reserve(rows.size());
  for (const auto& r : rows) xs.push_back(r[col] * scale);
  return mean_se(xs);
}

// ---------------------------------------------------------------- truncation

void run_truncation(const ExperimentConfig& cfg, int workers, RunRecord& rec) {
  const double m0 = resolve_m0(cfg, cfg.law);
  warn_if_subcritical(rec, cfg.dimension, cdf(cfg.law, m0), "m0");
  std::vector<DistributionSpec> trunc;
  for (double K : cfg.k_list) trunc.push_back(truncate(cfg.law, K));
  const DistributionSpec maj = finite_majorant_of(cfg.law, cfg.k_list.back());
  const Window base_win = make_window(cfg);
  const size_t nk = cfg.k_list.size();

  for (double K : cfg.k_list) rec.columns.push_back("t_k" + fmt(K));
  rec.columns.push_back("t_base");
  rec.columns.push_back("t_majorant");
  rec.columns.push_back("monotone_ok");
  rec.columns.push_back("flagged");

  rec.rows.assign(size_t(cfg.replicas), {});
  run_pool(cfg.replicas, workers, [&](int64_t repl) {
    std::vector<double> kt(nk, kInf);
    double bt = kInf, mt = kInf;
    bool flagged = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
      Window win = base_win;
      if (attempt == 1) win.margin = Coord(win.margin * 2 + 1);
      EdgeField f{win, cfg.seed, uint64_t(repl)};
      TimeView tv_base{&f, &cfg.law};
      ClusterAnalysis an = analyze(tv_base.level_view(m0), win);
      if (an.giant < 0) {
        if (attempt == 0) continue;
        throw Error(Errc::no_giant, "truncation: no giant cluster at level m0");
      }
      Vtx origin{};
      Vtx target{};
      for (int k = 0; k < win.dim; ++k) target[k] = Coord(cfg.n * int64_t(cfg.x[k]));
      Vtx a = regularize(origin, an);
      Vtx b = regularize(target, an);
      bool touch = false;
      for (size_t i = 0; i < nk; ++i) {
        TimeView tv{&f, &trunc[i]};
        TravelResult r = travel_time(tv, a, b, win);
        kt[i] = r.time;
        if (i + 1 == nk && r.hit_boundary) touch = true;
      }
      bt = travel_time(tv_base, a, b, win).time;
      mt = travel_time(TimeView{&f, &maj}, a, b, win).time;
      if (!touch || attempt == 1) {
        flagged = touch;
        break;
      }
    }
    bool mono = true;
    for (size_t i = 1; i < nk; ++i) mono = mono && kt[i - 1] <= kt[i];
    mono = mono && kt.back() <= mt && kt.back() <= bt;
    std::vector<double> row = kt;
    row.push_back(bt);
    row.push_back(mt);
    row.push_back(mono ? 1 : 0);
    row.push_back(flagged ? 1 : 0);
    rec.rows[size_t(repl)] = std::move(row);
  });

  const double inv_n = 1.0 / double(cfg.n);
  for (size_t i = 0; i < nk; ++i) {
    Stat s = column_stat(rec.rows, i, inv_n);
    rec.aggregates["mu_k" + fmt(cfg.k_list[i])] = s.mean;
    rec.aggregates["se_k" + fmt(cfg.k_list[i])] = s.se;
  }
  Stat sb = column_stat(rec.rows, nk, inv_n);
  Stat sm = column_stat(rec.rows, nk + 1, inv_n);
  rec.aggregates["mu_base"] = sb.mean;
  rec.aggregates["se_base"] = sb.se;
  rec.aggregates["mu_majorant"] = sm.mean;
  rec.aggregates["se_majorant"] = sm.se;
  int64_t bad = 0, flagged = 0;
  for (const auto& r : rec.rows) {
    if (r[nk + 2] == 0) ++bad;
    if (r[nk + 3] != 0) ++flagged;
  }
  rec.aggregates["monotone_bad_replicas"] = double(bad);
  rec.aggregates["flagged"] = double(flagged);
  if (nk >= 2) {
    Stat last = column_stat(rec.rows, nk - 1, inv_n);
    Stat prev = column_stat(rec.rows, nk - 2, inv_n);
    rec.aggregates["plateau_gap"] = std::abs(last.mean - prev.mean);
    rec.aggregates["plateau_joint_se"] = joint_se(last.se, prev.se);
  }
  rec.aggregates["replicas"] = double(cfg.replicas);
}

// ------------------------------------------------------------- mu-continuity

void run_mu_continuity(const ExperimentConfig& cfg, int workers, RunRecord& rec) {
  std::vector<const DistributionSpec*> all;
  for (const DistributionSpec& g : cfg.laws) all.push_back(&g);
  all.push_back(&cfg.law);
  const size_t nl = all.size();
  for (size_t i = 0; i + 1 < nl; ++i) rec.columns.push_back("t_law" + fmt(double(i)));
  rec.columns.push_back("t_target");
  rec.columns.push_back("flagged");
  for (size_t i = 0; i < nl; ++i)
    warn_if_subcritical(rec, cfg.dimension, cdf(*all[i], resolve_m0(cfg, *all[i])),
                        i + 1 < nl ? "laws[" + fmt(double(i)) + "]" : "law");
  const Window base_win = make_window(cfg);

  rec.rows.assign(size_t(cfg.replicas), {});
  run_pool(cfg.replicas, workers, [&](int64_t repl) {
    std::vector<double> ts(nl, kInf);
    bool flagged = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
      Window win = base_win;
      if (attempt == 1) win.margin = Coord(win.margin * 2 + 1);
      EdgeField f{win, cfg.seed, uint64_t(repl)};
      bool touch = false;
      for (size_t i = 0; i < nl; ++i) {
        TimeView tv{&f, all[i]};
        double m = resolve_m0(cfg, *all[i]);
        ClusterAnalysis an = analyze(tv.level_view(m), win);
        if (an.giant < 0) {
          if (attempt == 0) {
            touch = true;
            break;
          }
          throw Error(Errc::no_giant, "mu-continuity: no giant cluster at level m0");
        }
        Vtx origin{};
        Vtx target{};
        for (int k = 0; k < win.dim; ++k) target[k] = Coord(cfg.n * int64_t(cfg.x[k]));
        Vtx a = regularize(origin, an);
        Vtx b = regularize(target, an);
        TravelResult r = travel_time(tv, a, b, win);
        ts[i] = r.time;
        if (r.hit_boundary) touch = true;
      }
      if (!touch || attempt == 1) {
        flagged = touch;
        break;
      }
    }
    std::vector<double> row = ts;
    row.push_back(flagged ? 1 : 0);
    rec.rows[size_t(repl)] = std::move(row);
  });

  const double inv_n = 1.0 / double(cfg.n);
  Stat target = column_stat(rec.rows, nl - 1, inv_n);
  double max_gap = 0;
  for (size_t i = 0; i + 1 < nl; ++i) {
    Stat s = column_stat(rec.rows, i, inv_n);
    rec.aggregates["mu_law" + fmt(double(i))] = s.mean;
    rec.aggregates["se_law" + fmt(double(i))] = s.se;
    double js = joint_se(s.se, target.se);
    if (js > 0) max_gap = std::max(max_gap, std::abs(s.mean - target.mean) / js);
  }
  rec.aggregates["mu_target"] = target.mean;
  rec.aggregates["se_target"] = target.se;
  rec.aggregates["max_gap_over_joint_se"] = max_gap;
  int64_t flagged = 0;
  for (const auto& r : rec.rows)
    if (r[nl] != 0) ++flagged;
  rec.aggregates["flagged"] = double(flagged);
  rec.aggregates["replicas"] = double(cfg.replicas);
}

// ------------------------------------------------------------- cheeger-sweep

void run_cheeger_sweep(const ExperimentConfig& cfg, int workers, RunRecord& rec) {
  warn_if_subcritical(rec, cfg.dimension, cfg.p_grid.front(), "p_grid");
  const Window win = make_window(cfg);
  const size_t np = cfg.p_grid.size();
  rec.columns = {"p", "rep", "phi", "best_boundary", "best_size", "cluster_size", "status"};

  const int64_t tasks = int64_t(np) * cfg.replicas;
  rec.rows.assign(size_t(tasks), {});
  run_pool(tasks, workers, [&](int64_t t) {
    const size_t pi = size_t(t / cfg.replicas);
    const int64_t repl = t % cfg.replicas;
    EdgeField f{win, cfg.seed, uint64_t(repl)};
    OpenView view{&f, cfg.p_grid[pi]};
    double phi = 0, bb = 0, bs = 0, cs = 0, status = 0;
    try {
      CheegerResult r = cheeger_exact(view, win, cfg.guard);
      phi = r.value;
      bb = double(r.best_boundary);
      bs = double(r.best_size);
      cs = double(r.cluster_size);
    } catch (const Error& e) {
      status = 1 + double(int(e.code()));
    }
    rec.rows[size_t(t)] = {cfg.p_grid[pi], double(repl), phi, bb, bs, cs, status};
  });

  std::vector<Stat> means(np);
  for (size_t pi = 0; pi < np; ++pi) {
    std::vector<double> phis;
    int64_t skipped = 0;
    for (int64_t repl = 0; repl < cfg.replicas; ++repl) {
      const auto& row = rec.rows[pi * size_t(cfg.replicas) + size_t(repl)];
      if (row[6] == 0)
        phis.push_back(row[2]);
      else
        ++skipped;
    }
    means[pi] = mean_se(phis);
    rec.aggregates["phi_mean_p" + fmt(cfg.p_grid[pi])] = means[pi].mean;
    rec.aggregates["phi_se_p" + fmt(cfg.p_grid[pi])] = means[pi].se;
    rec.aggregates["valid_p" + fmt(cfg.p_grid[pi])] = double(means[pi].n);
    rec.aggregates["skipped_p" + fmt(cfg.p_grid[pi])] = double(skipped);
  }
  for (size_t pi = 1; pi < np; ++pi) {
    double js = joint_se(means[pi].se, means[pi - 1].se);
    double gap = std::abs(means[pi].mean - means[pi - 1].mean);
    rec.aggregates["trend_ok_p" + fmt(cfg.p_grid[pi])] =
        (js > 0 && gap <= cfg.stderr_mult * js) ? 1.0 : 0.0;
  }
  rec.aggregates["replicas"] = double(cfg.replicas);
}

// --------------------------------------------------------------- wulff-sweep

void run_wulff_sweep(const ExperimentConfig& cfg, int workers, RunRecord& rec) {
  warn_if_subcritical(rec, cfg.dimension, cfg.p_grid.front(), "p_grid");
  const std::vector<Vec2> dirs = cfg.directions.empty() ? default_directions() : cfg.directions;
  const size_t nd = dirs.size();
  const size_t np = cfg.p_grid.size();

  int64_t linf = 0, l1 = 0;
  for (const Vec2& d : dirs) {
    int64_t ax = std::llabs(int64_t(d.x)), ay = std::llabs(int64_t(d.y));
    linf = std::max({linf, ax, ay});
    l1 = std::max(l1, ax + ay);
  }
  Window win;
  win.dim = 2;
  win.radius = cfg.radius > 0 ? cfg.radius : Coord(cfg.n * linf);
  win.margin = cfg.margin >= 0 ? cfg.margin : Coord((cfg.n * l1 + 1) / 2);
  win.validate();

  rec.columns = {"p", "rep", "theta", "status"};
  for (size_t j = 0; j < nd; ++j) rec.columns.push_back("b_d" + fmt(double(j)));

  const int64_t tasks = int64_t(np) * cfg.replicas;
  rec.rows.assign(size_t(tasks), {});
  run_pool(tasks, workers, [&](int64_t t) {
    const size_t pi = size_t(t / cfg.replicas);
    const int64_t repl = t % cfg.replicas;
    const double p = cfg.p_grid[pi];
    const double level = cfg.regularize_level > 0 ? cfg.regularize_level : p;
    EdgeField f{win, cfg.seed, uint64_t(repl)};
    OpenView pv{&f, p};
    std::vector<double> row = {p, double(repl), 0, 0};
    row.resize(4 + nd, -1);
    ClusterAnalysis an_p = analyze(pv, win);
    row[2] = an_p.in_giant(Vtx{}) ? 1 : 0;
    const ClusterAnalysis* reg = &an_p;
    ClusterAnalysis an_level;
    if (level != p) {
      an_level = analyze(OpenView{&f, level}, win);
      reg = &an_level;
    }
    if (reg->giant < 0) {
      row[3] = 1 + double(int(Errc::no_giant));
      rec.rows[size_t(t)] = std::move(row);
      return;
    }
    Vtx a = regularize(Vtx{}, *reg);
    for (size_t j = 0; j < nd; ++j) {
      Vtx target{};
      target[0] = Coord(cfg.n * int64_t(dirs[j].x));
      target[1] = Coord(cfg.n * int64_t(dirs[j].y));
      Vtx b = regularize(target, *reg);
      auto bd = b_distance(pv, a, b, win);
      if (bd) row[4 + j] = double(*bd) / double(cfg.n);
    }
    rec.rows[size_t(t)] = std::move(row);
  });

  std::vector<ConvexShape> hats;
  std::vector<double> values;
  rec.extras["shapes"] = nlohmann::json::array();
  for (size_t pi = 0; pi < np; ++pi) {
    const double p = cfg.p_grid[pi];
    int64_t theta_hits = 0;
    int64_t unreachable = 0;
    NormTable table;
    table.directions = dirs;
    for (size_t j = 0; j < nd; ++j) {
      std::vector<double> bs;
      for (int64_t repl = 0; repl < cfg.replicas; ++repl) {
        const auto& row = rec.rows[pi * size_t(cfg.replicas) + size_t(repl)];
        if (j == 0) theta_hits += row[2] != 0;
        if (row[4 + j] >= 0)
          bs.push_back(row[4 + j]);
        else
          ++unreachable;
      }
      Stat s = mean_se(bs);
      table.values.push_back(s.mean);
      table.stderrs.push_back(s.se);
      rec.aggregates["beta_p" + fmt(p) + "_d" + fmt(double(j))] = s.mean;
      rec.aggregates["beta_se_p" + fmt(p) + "_d" + fmt(double(j))] = s.se;
    }
    Stat theta = binomial_rate(theta_hits, cfg.replicas);
    rec.aggregates["theta_p" + fmt(p)] = theta.mean;
    rec.aggregates["theta_se_p" + fmt(p)] = theta.se;
    rec.aggregates["unreachable_p" + fmt(p)] = double(unreachable);
    double value = -1, len = -1;
    ConvexShape hat;
    try {
      WulffPair wp = wulff_shape(table);
      hat = wp.W_hat;
      len = len_beta(wp.W_hat, wp.W);
      if (theta.mean > 0) value = len / (std::sqrt(2.0) * theta.mean);
      nlohmann::json shape;
      shape["p"] = p;
      nlohmann::json wv = nlohmann::json::array(), hv = nlohmann::json::array();
      for (const Vec2& v : wp.W.vertices) wv.push_back(nlohmann::json::array({v.x, v.y}));
      for (const Vec2& v : wp.W_hat.vertices) hv.push_back(nlohmann::json::array({v.x, v.y}));
      shape["W"] = wv;
      shape["W_hat"] = hv;
      rec.extras["shapes"].push_back(shape);
    } catch (const Error& e) {
      rec.warnings.push_back("wulff at p=" + fmt(p) + ": " + e.what());
    }
    rec.aggregates["wulff_len_p" + fmt(p)] = len;
    rec.aggregates["value_p" + fmt(p)] = value;
    hats.push_back(hat);
    values.push_back(value);
  }
  for (size_t pi = 1; pi < np; ++pi) {
    double dh = -1;
    if (!hats[pi].vertices.empty() && !hats[pi - 1].vertices.empty())
      dh = hausdorff(hats[pi], hats[pi - 1]);
    rec.aggregates["dh_p" + fmt(cfg.p_grid[pi - 1]) + "_p" + fmt(cfg.p_grid[pi])] = dh;
  }
  rec.aggregates["replicas"] = double(cfg.replicas);
}

// ---------------------------------------------------------- surgery-validate

std::vector<Vtx> bfs_path(const OpenView& view, const Vtx& a, const Vtx& b, const Window& win) {
  const int64_t total = win.vertex_count();
  std::vector<int64_t> parent(size_t(total), -2);
  std::vector<int64_t> fifo;
  fifo.reserve(size_t(total));
  int64_t sa = win.index_of(a), sb = win.index_of(b);
  parent[size_t(sa)] = -1;
  fifo.push_back(sa);
  for (size_t h = 0; h < fifo.size(); ++h) {
    int64_t cur = fifo[h];
    if (cur == sb) break;
    Vtx v = win.vertex_at(cur);
    for (int k = 0; k < win.dim; ++k) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        Vtx w = v;
        w[k] += Coord(sgn);
        if (!win.contains(w)) continue;
        int64_t wi = win.index_of(w);
        if (parent[size_t(wi)] != -2) continue;
        if (!view.open(edge_between(v, w, win.dim))) continue;
        parent[size_t(wi)] = cur;
        fifo.push_back(wi);
      }
    }
  }
  if (parent[size_t(sb)] == -2) return {};
  std::vector<Vtx> path;
  for (int64_t cur = sb; cur >= 0; cur = parent[size_t(cur)]) path.push_back(win.vertex_at(cur));
  std::reverse(path.begin(), path.end());
  return path;
}

Vtx pick_surgery_endpoint(BoxClassification& cls, const ClusterAnalysis& an, uint64_t seed,
                          uint64_t repl, int sign, const Window& win) {
  const int N = cls.params().N;
  const int dim = win.dim;
  const Coord base = Coord(win.halfwidth() - 4 * N);
  for (uint64_t attempt = 0; attempt < 64; ++attempt) {
    uint64_t h = mix64(mix64(seed ^ (0x9e1ull * uint64_t(sign + 2))) ^ repl);
    h = mix64(h ^ attempt);
    Vtx t{};
    for (int k = 0; k < dim; ++k) {
      t[k] = Coord(sign) * base + Coord(h % uint64_t(2 * N + 1)) - Coord(N);
      h = mix64(h);
    }
    Vtx proj = regularize(t, an);
    Vtx bx = macro_index_of(proj, N, dim);
    if (!cls.classifiable(bx)) continue;
    if (!cls.box(bx).good) continue;
    return proj;
  }
  throw Error(Errc::precondition_failed, "surgery instance: found no good endpoint box");
}

void run_surgery_validate(const ExperimentConfig& cfg, int workers, RunRecord& rec) {
  warn_if_subcritical(rec, cfg.dimension, cfg.renorm.p0, "p0");
  const Window win = make_window(cfg);
  rec.columns = {"closed",   "bad_mass", "animal", "added",  "ratio",
                 "verified", "bound_ok", "status", "in_len", "out_len"};

  std::vector<std::string> fails(size_t(cfg.replicas));
  rec.rows.assign(size_t(cfg.replicas), {});
  run_pool(cfg.replicas, workers, [&](int64_t repl) {
    std::vector<double> row(10, 0);
    try {
      EdgeField f{win, cfg.seed, uint64_t(repl)};
      BoxClassification cls(f, cfg.renorm, win);
      const ClusterAnalysis& an = cls.giant_analysis();
      if (an.giant < 0) throw Error(Errc::no_giant, "surgery: no giant at p0");
      Vtx a = pick_surgery_endpoint(cls, an, cfg.seed, uint64_t(repl), -1, win);
      Vtx b = pick_surgery_endpoint(cls, an, cfg.seed, uint64_t(repl), +1, win);
      std::vector<Vtx> verts = bfs_path(OpenView{&f, cfg.renorm.q}, a, b, win);
      if (verts.empty()) throw Error(Errc::routing_failed, "surgery: endpoints not q-connected");
      LatticePath gamma{std::move(verts)};
      SurgeryReport sr = modify_path(cls, gamma);
      std::string err = verify_surgery(f, cfg.renorm, gamma, sr.output);
      row[0] = double(sr.closed_count);
      row[1] = double(sr.bad_mass);
      row[2] = double(sr.animal_size);
      row[3] = double(sr.added_edges);
      row[4] = sr.bound_ratio;
      row[5] = err.empty() ? 1 : 0;
      row[6] = sr.bound_ratio <= cfg.renorm.rho ? 1 : 0;
      row[8] = double(sr.input.length());
      row[9] = double(sr.output.length());
      if (!err.empty()) fails[size_t(repl)] = err;
    } catch (const Error& e) {
      row[7] = 1 + double(int(e.code()));
      fails[size_t(repl)] = e.what();
    }
    rec.rows[size_t(repl)] = std::move(row);
  });

  int64_t verified = 0, bound_ok = 0, failures = 0;
  double max_ratio = 0, sum_added = 0;
  int64_t max_closed = 0;
  for (const auto& r : rec.rows) {
    if (r[7] != 0) {
      ++failures;
      continue;
    }
    verified += r[5] != 0;
    bound_ok += r[6] != 0;
    max_ratio = std::max(max_ratio, r[4]);
    sum_added += r[3];
    max_closed = std::max<int64_t>(max_closed, int64_t(r[0]));
  }
  rec.aggregates["instances"] = double(cfg.replicas);
  rec.aggregates["verified"] = double(verified);
  rec.aggregates["bound_ok"] = double(bound_ok);
  rec.aggregates["failures"] = double(failures);
  rec.aggregates["max_ratio"] = max_ratio;
  rec.aggregates["max_closed"] = double(max_closed);
  rec.aggregates["mean_added"] =
      cfg.replicas > failures ? sum_added / double(cfg.replicas - failures) : 0.0;
  nlohmann::json errs = nlohmann::json::array();
  for (const std::string& s : fails) {
    if (!s.empty() && errs.size() < 5) errs.push_back(s);
  }
  rec.extras["verify_errors"] = errs;
}

// ---------------------------------------------------------------- box-classify

void run_box_classify(const ExperimentConfig& cfg, int workers, RunRecord& rec) {
  warn_if_subcritical(rec, cfg.dimension, cfg.renorm.p0, "p0");
  const Window win = make_window(cfg);
  rec.columns = {"total", "good", "fail_unique", "fail_cross", "fail_diam", "fail_leftover"};

  rec.rows.assign(size_t(cfg.replicas), {});
  run_pool(cfg.replicas, workers, [&](int64_t repl) {
    EdgeField f{win, cfg.seed, uint64_t(repl)};
    BoxClassification cls(f, cfg.renorm, win);
    cls.classify_all(1);
    const Coord ir = cls.irad();
    int64_t total = 0, good = 0, fu = 0, fc = 0, fd = 0, fl = 0;
    const int64_t gside = 2 * int64_t(ir) + 1;
    int64_t cells = 1;
    for (int k = 0; k < win.dim; ++k) cells *= gside;
    for (int64_t g = 0; g < cells; ++g) {
      Vtx idx{};
      int64_t rem = g;
      for (int k = 0; k < win.dim; ++k) {
        idx[k] = Coord(rem % gside) - ir;
        rem /= gside;
      }
      const BoxInfo& bi = cls.box(idx);
      ++total;
      if (bi.good) {
        ++good;
      } else if (!bi.unique_big) {
        ++fu;
      } else if (!bi.crossings) {
        ++fc;
      } else if (!bi.diameter_ok) {
        ++fd;
      } else {
        ++fl;
      }
    }
    rec.rows[size_t(repl)] = {double(total),  double(good), double(fu),
                              double(fc),     double(fd),   double(fl)};
  });

  std::vector<double> fracs;
  double fu = 0, fc = 0, fd = 0, fl = 0;
  for (const auto& r : rec.rows) {
    fracs.push_back(r[0] > 0 ? r[1] / r[0] : 0.0);
    fu += r[2];
    fc += r[3];
    fd += r[4];
    fl += r[5];
  }
  Stat s = mean_se(fracs);
  rec.aggregates["boxes_per_replica"] = rec.rows.empty() ? 0.0 : rec.rows[0][0];
  rec.aggregates["good_fraction_mean"] = s.mean;
  rec.aggregates["good_fraction_se"] = s.se;
  rec.aggregates["fail_unique"] = fu;
  rec.aggregates["fail_cross"] = fc;
  rec.aggregates["fail_diam"] = fd;
  rec.aggregates["fail_leftover"] = fl;
  rec.aggregates["replicas"] = double(cfg.replicas);
}

}  // namespace

RunRecord run(const ExperimentConfig& cfg, int workers) {
  cfg.validate();
  if (workers < 1 || workers > 256) throw Error(Errc::bad_config, "workers: must be in [1, 256]");
  RunRecord rec;
  rec.config = cfg.to_json();
  rec.hash = config_hash(cfg);
  rec.workers = workers;
  rec.aggregates = nlohmann::json::object();
  rec.extras = nlohmann::json::object();
  auto t0 = std::chrono::steady_clock::now();
  switch (cfg.experiment) {
    case Experiment::truncation: run_truncation(cfg, workers, rec); break;
    case Experiment::mu_continuity: run_mu_continuity(cfg, workers, rec); break;
    case Experiment::cheeger_sweep: run_cheeger_sweep(cfg, workers, rec); break;
    case Experiment::wulff_sweep: run_wulff_sweep(cfg, workers, rec); break;
    case Experiment::surgery_validate: run_surgery_validate(cfg, workers, rec); break;
    case Experiment::box_classify: run_box_classify(cfg, workers, rec); break;
  }
  rec.wall_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

std::string write_record(const RunRecord& rec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::string name = rec.config.at("experiment").get<std::string>() + "-" + rec.hash.substr(0, 8);
  std::string seed = rec.config.at("seed").dump();

  fs::path json_path = fs::path(out_dir) / (name + ".json");
  {
    std::ofstream out(json_path);
    if (!out) throw Error(Errc::precondition_failed, "write_record: cannot open " + json_path.string());
    out << rec.to_json().dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(out_dir) / (name + ".csv"));
    out << "seed,replica,config";
    for (const std::string& c : rec.columns) out << ',' << c;
    out << '\n';
    for (size_t i = 0; i < rec.rows.size(); ++i) {
      out << seed << ',' << i << ',' << rec.hash;
      for (double v : rec.rows[i]) out << ',' << fmt(v);
      out << '\n';
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / (name + "-agg.csv"));
    out << "seed,replica,config,key,value\n";
    for (const auto& [key, val] : rec.aggregates.items()) {
      out << seed << ",agg," << rec.hash << ',' << key << ',' << fmt(val.get<double>()) << '\n';
    }
  }
  return json_path.string();
}

ReplayVerdict replay(const std::string& record_path, int workers) {
  std::ifstream in(record_path);
  if (!in) throw Error(Errc::precondition_failed, "replay: cannot open " + record_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& ex) {
    throw Error(Errc::precondition_failed, std::string("replay: invalid record JSON: ") + ex.what());
  }
  RunRecord stored = RunRecord::from_json(j);
  ExperimentConfig cfg = ExperimentConfig::from_json(stored.config);
  RunRecord fresh = run(cfg, workers);
  if (fresh.hash != stored.hash)
    return {false, "config hash: stored " + stored.hash + ", recomputed " + fresh.hash};
  for (const auto& [key, val] : stored.aggregates.items()) {
    if (!fresh.aggregates.contains(key)) return {false, "aggregate " + key + ": missing on replay"};
    if (fresh.aggregates.at(key).dump() != val.dump())
      return {false, "aggregate " + key + ": stored " + val.dump() + ", recomputed " +
                         fresh.aggregates.at(key).dump()};
  }
  for (const auto& [key, val] : fresh.aggregates.items()) {
    (void)val;
    if (!stored.aggregates.contains(key))
      return {false, "aggregate " + key + ": absent from the stored record"};
  }
  return {true, "MATCH"};
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::bad_config:
    case Errc::precondition_failed:
      return 2;
    case Errc::no_giant:
    case Errc::window_too_small:
      return 3;
    default:
      return 1;
  }
}

}  // namespace percolab
