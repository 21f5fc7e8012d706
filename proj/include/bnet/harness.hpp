#pragma once

// Experiment workbench: dataset generation, reference bounds, eta0 grid
// search, budgeted evaluation, training and CSV reports. A dataset is a
// directory holding manifest.json, instances/, results/ and report/.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "bnet/bundle_network.hpp"
#include "bnet/bundle_solver.hpp"
#include "bnet/instance_io.hpp"
#include "bnet/oracles.hpp"

namespace bnet {

namespace fs = std::filesystem;

/// Initial step sizes tried by the grid search: 10^k for k = 4 .. -1.
inline const std::vector<double> kEtaGrid = {1e4, 1e3, 1e2, 1e1, 1e0, 1e-1};
inline const std::vector<std::size_t> kDefaultBudgets = {10, 25, 50, 100};
inline const std::vector<std::string> kMethods = {"bundle",     "bundle-soft", "bundle-hard",
                                                  "bundle-balancing", "descent", "adam",
                                                  "learned"};
inline constexpr const char* kCsvHeader =
    "dataset,instance,method,eta0,budget,gap_pct,bound,wall_time_s,seed";

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Configuration

struct HarnessConfig {
  // generator
  std::string problem = "mcnd";
  std::string name = "MCND-small";
  std::size_t train_count = 50;
  std::size_t test_count = 20;
  std::uint64_t seed = 1;
  McndGeneratorParams mcnd;
  GapGeneratorParams gap;
  // eta
  EtaConfig eta;
  // solver
  SolverConfig solver;
  std::size_t reference_max_iter = 2000;
  double reference_eps = 1e-8;
  // train
  TrainConfig train;
  NetConfig net;

  void validate() const {
    require(problem == "mcnd" || problem == "gap", "config: generator.problem must be mcnd or gap");
    require(!name.empty() && name.find_first_of(",/\\\n") == std::string::npos,
            "config: generator.name must be non-empty without commas or slashes");
    require(train_count + test_count >= 1, "config: dataset must contain instances");
    require(reference_max_iter >= 1 && reference_eps > 0.0, "config: bad reference settings");
    eta.validate();
    solver.validate();
    train.validate();
    net.validate();
  }
};

namespace harness_detail {

using nlohmann::json;

/// Reads known keys from one config section and rejects anything else.
class Section {
 public:
  Section(const json& root, const char* name) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = &root.at(name);
    require(obj_->is_object(), std::string("config: section '") + name + "' must be an object");
  }
  ~Section() = default;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const std::exception&) {
      throw ContractViolation("config: " + name_ + "." + key + " has the wrong type");
    }
  }

  void finish() const {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it)
      require(seen_.count(it.key()) == 1, "config: unknown key " + name_ + "." + it.key());
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace harness_detail

inline HarnessConfig config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "config: top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    require(it.key() == "generator" || it.key() == "eta" || it.key() == "solver" ||
                it.key() == "train",
            "config: unknown section '" + it.key() + "'");
  HarnessConfig c;
  {
    harness_detail::Section s(j, "generator");
    s.get("problem", c.problem);
    s.get("name", c.name);
    s.get("train", c.train_count);
    s.get("test", c.test_count);
    s.get("seed", c.seed);
    s.get("nodes", c.mcnd.nodes);
    s.get("arcs", c.mcnd.arcs);
    s.get("commodities", c.mcnd.commodities);
    s.get("capacity_min", c.mcnd.capacity_min);
    s.get("capacity_max", c.mcnd.capacity_max);
    s.get("fixed_min", c.mcnd.fixed_min);
    s.get("fixed_max", c.mcnd.fixed_max);
    s.get("routing_min", c.mcnd.routing_min);
    s.get("routing_max", c.mcnd.routing_max);
    s.get("volume_min", c.mcnd.volume_min);
    s.get("volume_max", c.mcnd.volume_max);
    s.get("items", c.gap.items);
    s.get("bins", c.gap.bins);
    s.get("profit_min", c.gap.profit_min);
    s.get("profit_max", c.gap.profit_max);
    s.get("weight_min", c.gap.weight_min);
    s.get("weight_max", c.gap.weight_max);
    s.get("tightness", c.gap.tightness);
    s.finish();
  }
  {
    harness_detail::Section s(j, "eta");
    std::string kind = to_string(c.eta.kind);
    s.get("kind", kind);
    c.eta.kind = eta_kind_from_string(kind);
    s.get("eta0", c.eta.eta0);
    s.get("eta_incr", c.eta.eta_incr);
    s.get("eta_decr", c.eta.eta_decr);
    s.get("eta_min", c.eta.eta_min);
    s.get("eta_max", c.eta.eta_max);
    s.get("m_tilde", c.eta.m_tilde);
    s.get("eta_star", c.eta.eta_star);
    s.get("min_consec_ss", c.eta.min_consec_ss);
    s.get("min_consec_ns", c.eta.min_consec_ns);
    s.finish();
  }
  {
    harness_detail::Section s(j, "solver");
    s.get("m", c.solver.m);
    s.get("eps", c.solver.eps);
    s.get("prune_window", c.solver.prune_window);
    s.get("record_times", c.solver.record_times);
    s.get("reference_max_iter", c.reference_max_iter);
    s.get("reference_eps", c.reference_eps);
    s.finish();
  }
  {
    harness_detail::Section s(j, "train");
    s.get("iterations", c.train.iterations);
    s.get("gamma", c.train.gamma);
    s.get("lr", c.train.lr);
    s.get("clip", c.train.clip);
    s.get("lr_decay", c.train.lr_decay);
    s.get("epochs", c.train.epochs);
    s.get("sample_latents", c.train.sample_latents);
    std::string psi = to_string(c.train.psi);
    s.get("psi", psi);
    c.train.psi = psi_from_string(psi);
    s.get("seed", c.train.seed);
    s.get("latent", c.net.latent);
    s.get("decoder_mult", c.net.decoder_mult);
    s.finish();
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const HarnessConfig& c) {
  return {
      {"generator",
       {{"problem", c.problem}, {"name", c.name}, {"train", c.train_count},
        {"test", c.test_count}, {"seed", c.seed}, {"nodes", c.mcnd.nodes},
        {"arcs", c.mcnd.arcs}, {"commodities", c.mcnd.commodities},
        {"capacity_min", c.mcnd.capacity_min}, {"capacity_max", c.mcnd.capacity_max},
        {"fixed_min", c.mcnd.fixed_min}, {"fixed_max", c.mcnd.fixed_max},
        {"routing_min", c.mcnd.routing_min}, {"routing_max", c.mcnd.routing_max},
        {"volume_min", c.mcnd.volume_min}, {"volume_max", c.mcnd.volume_max},
        {"items", c.gap.items}, {"bins", c.gap.bins}, {"profit_min", c.gap.profit_min},
        {"profit_max", c.gap.profit_max}, {"weight_min", c.gap.weight_min},
        {"weight_max", c.gap.weight_max}, {"tightness", c.gap.tightness}}},
      {"eta",
       {{"kind", to_string(c.eta.kind)}, {"eta0", c.eta.eta0}, {"eta_incr", c.eta.eta_incr},
        {"eta_decr", c.eta.eta_decr}, {"eta_min", c.eta.eta_min}, {"eta_max", c.eta.eta_max},
        {"m_tilde", c.eta.m_tilde}, {"eta_star", c.eta.eta_star},
        {"min_consec_ss", c.eta.min_consec_ss}, {"min_consec_ns", c.eta.min_consec_ns}}},
      {"solver",
       {{"m", c.solver.m}, {"eps", c.solver.eps}, {"prune_window", c.solver.prune_window},
        {"record_times", c.solver.record_times}, {"reference_max_iter", c.reference_max_iter},
        {"reference_eps", c.reference_eps}}},
      {"train",
       {{"iterations", c.train.iterations}, {"gamma", c.train.gamma}, {"lr", c.train.lr},
        {"clip", c.train.clip}, {"lr_decay", c.train.lr_decay}, {"epochs", c.train.epochs},
        {"sample_latents", c.train.sample_latents}, {"psi", to_string(c.train.psi)},
        {"seed", c.train.seed}, {"latent", c.net.latent},
        {"decoder_mult", c.net.decoder_mult}}}};
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

inline HarnessConfig load_config(const fs::path& path) {
  return config_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct ManifestInstance {
  std::string name;  // e.g. "test-007"
  std::string file;  // relative to the dataset directory
  std::string split;
  std::uint64_t seed = 0;
  std::optional<double> reference;  // raw LR at the reference multipliers
};

struct DatasetManifest {
  std::string name;
  std::string problem;
  nlohmann::json generator;
  std::vector<ManifestInstance> instances;

  std::vector<const ManifestInstance*> split(const std::string& which) const {
    std::vector<const ManifestInstance*> out;
    for (const auto& i : instances)
      if (i.split == which) out.push_back(&i);
    return out;
  }
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& i : m.instances) {
    nlohmann::json e = {{"name", i.name}, {"file", i.file}, {"split", i.split}, {"seed", i.seed}};
    e["reference"] = i.reference ? nlohmann::json(*i.reference) : nlohmann::json(nullptr);
    list.push_back(std::move(e));
  }
  return {{"name", m.name}, {"problem", m.problem}, {"generator", m.generator},
          {"instances", list}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.problem = j.at("problem").get<std::string>();
    m.generator = j.at("generator");
    for (const auto& e : j.at("instances")) {
      ManifestInstance i;
      i.name = e.at("name").get<std::string>();
      i.file = e.at("file").get<std::string>();
      i.split = e.at("split").get<std::string>();
      i.seed = e.at("seed").get<std::uint64_t>();
      if (!e.at("reference").is_null()) i.reference = e.at("reference").get<double>();
      m.instances.push_back(std::move(i));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("manifest: ") + e.what());
  }
  return m;
}

inline DatasetManifest load_manifest(const fs::path& dir) {
  return manifest_from_json(read_json_file(dir / "manifest.json"));
}

inline void save_manifest(const fs::path& dir, const DatasetManifest& m) {
  write_text_file(dir / "manifest.json", to_json(m).dump(2) + "\n");
}

/// Records every instance file read, for train/test isolation audits.
class AccessLog {
 public:
  void note(const std::string& name, const std::string& split) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_.emplace_back(name, split);
  }
  std::vector<std::pair<std::string, std::string>> entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline Problem load_instance(const fs::path& dir, const ManifestInstance& inst,
                             AccessLog* log = nullptr) {
  if (log) log->note(inst.name, inst.split);
  return load_problem((dir / inst.file).string());
}

inline DualSense manifest_sense(const DatasetManifest& m) {
  return m.problem == "gap" ? DualSense::Minimize : DualSense::Maximize;
}

/// True when bound `a` is at least as tight as `b` for the dual's sense.
inline bool tighter_or_equal(double a, double b, DualSense sense) {
  return sense == DualSense::Maximize ? a >= b : a <= b;
}

/// 100 * (LR* - B) / LR*, oriented so that looser bounds give positive gaps.
inline double gap_pct(double reference, double bound, DualSense sense = DualSense::Maximize) {
  require(reference != 0.0, "gap_pct: reference bound is zero");
  const double sign = sense == DualSense::Maximize ? 1.0 : -1.0;
  return 100.0 * sign * (reference - bound) / std::abs(reference);
}

// ---------------------------------------------------------------------------
// Parallel loop

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// generate / reference

inline std::uint64_t instance_seed(std::uint64_t base, const std::string& split, std::size_t i) {
  const std::uint64_t tag = split == "train" ? 0x7472u : 0x7465u;
  return net_detail::mix(net_detail::mix(net_detail::mix(base) ^ tag) ^ i);
}

inline Problem generate_instance(const HarnessConfig& c, std::uint64_t seed) {
  if (c.problem == "mcnd") return generate_mcnd(c.mcnd, seed);
  return generate_gap(c.gap, seed);
}

inline DatasetManifest cmd_generate(const HarnessConfig& c, const fs::path& dir) {
  c.validate();
  DatasetManifest m;
  m.name = c.name;
  m.problem = c.problem;
  m.generator = to_json(c)["generator"];
  fs::create_directories(dir / "instances");
  std::set<std::uint64_t> used;
  for (const auto& [split, count] :
       std::vector<std::pair<std::string, std::size_t>>{{"train", c.train_count},
                                                        {"test", c.test_count}})
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t seed = instance_seed(c.seed, split, i);
      while (!used.insert(seed).second) seed = net_detail::mix(seed);  // keep splits disjoint
      char name[32];
      std::snprintf(name, sizeof name, "%s-%03zu", split.c_str(), i);
      ManifestInstance inst{name, "instances/" + std::string(name) + ".json", split, seed, {}};
      save_problem(generate_instance(c, seed), (dir / inst.file).string());
      m.instances.push_back(std::move(inst));
    }
  save_manifest(dir, m);
  return m;
}

/// Best raw bound over soft-strategy bundle runs started from every grid
/// value; merged with any stored reference so it never gets looser.
inline DatasetManifest cmd_reference(const fs::path& dir, const HarnessConfig& c,
                                     std::size_t threads = 1) {
  DatasetManifest m = load_manifest(dir);
  const DualSense sense = manifest_sense(m);
  std::vector<double> best(m.instances.size());
  parallel_for(m.instances.size(), threads, [&](std::size_t k) {
    const Problem p = load_instance(dir, m.instances[k]);
    const OracleHandle o = make_min_oracle(p);
    const Vec pi0(o.dimension(), 0.0);
    std::optional<double> b;
    for (double eta0 : kEtaGrid) {
      SolverConfig s = c.solver;
      s.eta = c.eta;
      s.eta.kind = EtaKind::Soft;
      s.eta.eta0 = eta0;
      s.max_iter = c.reference_max_iter;
      s.eps = c.reference_eps;
      s.record_times = false;
      const Trace t = run_bundle(o, pi0, s);
      if (!std::isfinite(t.best_raw))
        throw std::runtime_error(m.instances[k].name + ": non-finite reference bound");
      if (!b || !tighter_or_equal(*b, t.best_raw, sense)) b = t.best_raw;
    }
    best[k] = *b;
  });
  for (std::size_t k = 0; k < m.instances.size(); ++k) {
    auto& ref = m.instances[k].reference;
    if (!ref || !tighter_or_equal(*ref, best[k], sense)) ref = best[k];
  }
  save_manifest(dir, m);
  return m;
}

// ---------------------------------------------------------------------------
// Running methods

struct ResultRow {
  std::string dataset;
  std::string instance;
  std::string method;
  std::string eta0;  // number, or "learned"
  std::size_t budget = 0;
  double gap_pct = 0.0;
  double bound = 0.0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;

  auto key() const { return std::tie(dataset, method, eta0, budget, instance); }
};

struct MethodSpec {
  std::string name = "bundle";
  double eta0 = 1.0;
  const NetParams* net = nullptr;
  Psi psi = Psi::Softmax;

  std::string eta0_label() const { return name == "learned" ? "learned" : format_number(eta0); }
};

inline void check_method(const std::string& name) {
  require(std::find(kMethods.begin(), kMethods.end(), name) != kMethods.end(),
          "unknown method '" + name + "'");
}

/// Runs a method for exactly `budget` iterations after the initial oracle
/// call.
inline Trace run_method(const MethodSpec& m, const OracleHandle& o, std::size_t budget,
                        const HarnessConfig& c) {
  check_method(m.name);
  require(budget >= 1, "budget must be at least 1");
  const Vec pi0(o.dimension(), 0.0);
  const bool timed = c.solver.record_times;
  Trace t;
  if (m.name == "learned") {
    require(m.net != nullptr, "method 'learned' needs a checkpoint");
    t = evaluate_network(*m.net, o, pi0, budget, m.psi, timed);
  } else if (m.name == "descent") {
    t = run_descent(o, pi0, m.eta0, budget, true, timed);
  } else if (m.name == "adam") {
    t = run_adam(o, pi0, m.eta0, budget, {}, timed);
  } else {
    SolverConfig s = c.solver;
    s.eta = c.eta;
    s.eta.kind = m.name == "bundle" ? EtaKind::Constant
                                    : eta_kind_from_string(m.name.substr(std::string("bundle-").size()));
    s.eta.eta0 = m.eta0;
    s.eta.eta_min = std::min(s.eta.eta_min, m.eta0);
    s.eta.eta_max = std::max(s.eta.eta_max, m.eta0);
    s.max_iter = budget;
    s.stop_on_certificate = false;
    t = run_bundle(o, pi0, s);
  }
  if (t.oracle_calls != budget + 1)
    throw std::logic_error(m.name + ": budget " + std::to_string(budget) + " used " +
                           std::to_string(t.oracle_calls) + " oracle calls");
  return t;
}

/// Mean gap per iteration index over the instances of one evaluation.
struct Series {
  std::string dataset;
  std::string method;
  std::string eta0;
  Vec mean_gap;   // [k] = mean over instances of the gap after k+1 oracle calls
  Vec mean_time;  // [k] = mean wall time at that point
};

struct EvalOutput {
  std::vector<ResultRow> rows;
  std::vector<Series> series;
  std::size_t reference_violations = 0;  // bounds tighter than the reference
};

inline void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ResultRow& a, const ResultRow& b) { return a.key() < b.key(); });
}

/// One run per instance at the largest budget; every smaller budget reads
/// the same trace prefix.
inline EvalOutput evaluate_on_split(const fs::path& dir, const DatasetManifest& m,
                                    const HarnessConfig& c, const MethodSpec& spec,
                                    const std::vector<std::size_t>& budgets,
                                    const std::string& split, std::size_t threads,
                                    std::uint64_t row_seed) {
  require(!budgets.empty(), "no budgets given");
  for (std::size_t b : budgets) require(b >= 1, "budgets must be positive");
  const auto insts = m.split(split);
  require(!insts.empty(), "dataset has no '" + split + "' instances");
  for (const auto* i : insts)
    require(i->reference.has_value(),
            "instance " + i->name + " has no reference bound; run 'reference' first");
  const DualSense sense = manifest_sense(m);
  const std::size_t horizon = *std::max_element(budgets.begin(), budgets.end());

  std::vector<Trace> traces(insts.size());
  parallel_for(insts.size(), threads, [&](std::size_t k) {
    const OracleHandle o = make_min_oracle(load_instance(dir, *insts[k]));
    traces[k] = run_method(spec, o, horizon, c);
  });

  EvalOutput out;
  Series s{m.name, spec.name, spec.eta0_label(), Vec(horizon + 1, 0.0), Vec(horizon + 1, 0.0)};
  const double n = static_cast<double>(insts.size());
  for (std::size_t k = 0; k < insts.size(); ++k) {
    const double ref = *insts[k]->reference;
    const Trace& t = traces[k];
    for (std::size_t i = 0; i <= horizon; ++i) {
      s.mean_gap[i] += gap_pct(ref, t.best_raw_within(i + 1), sense) / n;
      s.mean_time[i] += t.rows[i].wall_time / n;
    }
    for (const auto& row : t.rows)
      if (!tighter_or_equal(ref, row.raw_lr, sense) &&
          std::abs(row.raw_lr - ref) > 1e-6 * std::max(1.0, std::abs(ref)))
        ++out.reference_violations;
    for (std::size_t b : budgets) {
      const double bound = t.best_raw_within(b + 1);
      out.rows.push_back({m.name, insts[k]->name, spec.name, spec.eta0_label(), b,
                          gap_pct(ref, bound, sense), bound, t.rows[b].wall_time, row_seed});
    }
  }
  out.series.push_back(std::move(s));
  sort_rows(out.rows);
  return out;
}

// ---------------------------------------------------------------------------
// CSV files

inline std::string rows_to_csv(std::vector<ResultRow> rows) {
  sort_rows(rows);
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows)
    out += r.dataset + "," + r.instance + "," + r.method + "," + r.eta0 + "," +
           std::to_string(r.budget) + "," + format_number(r.gap_pct) + "," +
           format_number(r.bound) + "," + format_number(r.wall_time_s) + "," +
           std::to_string(r.seed) + "\n";
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<ResultRow> read_rows_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != kCsvHeader)
    throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 9)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 9 fields");
    try {
      rows.push_back({c[0], c[1], c[2], c[3], std::stoul(c[4]), std::stod(c[5]), std::stod(c[6]),
                      std::stod(c[7]), std::stoull(c[8])});
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return rows;
}

inline std::string series_to_csv(const std::vector<Series>& all) {
  std::string out = "dataset,method,eta0,iteration,mean_gap_pct,mean_time_s\n";
  for (const auto& s : all)
    for (std::size_t i = 0; i < s.mean_gap.size(); ++i)
      out += s.dataset + "," + s.method + "," + s.eta0 + "," + std::to_string(i) + "," +
             format_number(s.mean_gap[i]) + "," + format_number(s.mean_time[i]) + "\n";
  return out;
}

inline std::vector<Series> read_series_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(f, line);
  std::vector<Series> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 6) throw std::runtime_error(path.string() + ": expected 6 fields");
    if (out.empty() || out.back().dataset != c[0] || out.back().method != c[1] ||
        out.back().eta0 != c[2])
      out.push_back({c[0], c[1], c[2], {}, {}});
    if (std::stoul(c[3]) != out.back().mean_gap.size())
      throw std::runtime_error(path.string() + ": iterations out of order");
    out.back().mean_gap.push_back(std::stod(c[4]));
    out.back().mean_time.push_back(std::stod(c[5]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// gridsearch / evaluate / train / report

struct BestEta {
  std::string method;
  std::size_t budget = 0;
  double eta0 = 0.0;
  double mean_gap_pct = 0.0;
};

struct GridOutput {
  EvalOutput eval;
  std::vector<BestEta> best;
};

inline std::map<std::pair<std::string, std::size_t>, double> mean_gap_by(
    const std::vector<ResultRow>& rows, const std::string& eta0) {
  std::map<std::pair<std::string, std::size_t>, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows)
    if (r.eta0 == eta0) {
      auto& a = acc[{r.method, r.budget}];
      a.first += r.gap_pct;
      ++a.second;
    }
  std::map<std::pair<std::string, std::size_t>, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / static_cast<double>(v.second);
  return out;
}

inline GridOutput cmd_gridsearch(const fs::path& dir, const HarnessConfig& c,
                                 const std::string& method,
                                 const std::vector<std::size_t>& budgets,
                                 std::size_t threads = 1) {
  check_method(method);
  require(method != "learned", "gridsearch applies to methods with an eta0");
  const DatasetManifest m = load_manifest(dir);
  GridOutput g;
  for (double eta0 : kEtaGrid) {
    auto e = evaluate_on_split(dir, m, c, {method, eta0}, budgets, "test", threads, c.seed);
    g.eval.rows.insert(g.eval.rows.end(), e.rows.begin(), e.rows.end());
    g.eval.series.insert(g.eval.series.end(), e.series.begin(), e.series.end());
    g.eval.reference_violations += e.reference_violations;
  }
  sort_rows(g.eval.rows);
  std::vector<std::size_t> sorted = budgets;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t b : sorted) {
    BestEta best{method, b, 0.0, std::numeric_limits<double>::infinity()};
    for (double eta0 : kEtaGrid) {
      const double v = mean_gap_by(g.eval.rows, format_number(eta0)).at({method, b});
      if (v < best.mean_gap_pct) best = {method, b, eta0, v};
    }
    g.best.push_back(best);
  }
  std::string table = "method,budget,eta0,mean_gap_pct\n";
  for (const auto& b : g.best)
    table += b.method + "," + std::to_string(b.budget) + "," + format_number(b.eta0) + "," +
             format_number(b.mean_gap_pct) + "\n";
  write_text_file(dir / "results" / ("gridsearch-" + method + ".csv"), rows_to_csv(g.eval.rows));
  write_text_file(dir / "results" / ("gridsearch-" + method + ".series.csv"),
                  series_to_csv(g.eval.series));
  write_text_file(dir / "results" / ("best-eta-" + method + ".csv"), table);
  return g;
}

/// Best eta0 per budget from a previous grid search, if one was run.
inline std::map<std::size_t, double> load_best_eta(const fs::path& dir, const std::string& method) {
  std::map<std::size_t, double> out;
  const fs::path p = dir / "results" / ("best-eta-" + method + ".csv");
  if (!fs::exists(p)) return out;
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  while (std::getline(f, line)) {
    const auto c = split_csv_line(line);
    if (c.size() == 4) out[std::stoul(c[1])] = std::stod(c[2]);
  }
  return out;
}

/// Evaluates a method on the test split. Non-learned methods use the grid
/// search's best eta0 per budget when available, else the configured eta0.
inline EvalOutput cmd_evaluate(const fs::path& dir, const HarnessConfig& c,
                               const std::string& method, const std::vector<std::size_t>& budgets,
                               std::size_t threads = 1, const std::string& checkpoint = "") {
  check_method(method);
  const DatasetManifest m = load_manifest(dir);
  EvalOutput out;
  std::string tag = method;
  if (method == "learned") {
    require(!checkpoint.empty(), "method 'learned' needs --checkpoint");
    const NetParams net = load_checkpoint(checkpoint);
    MethodSpec spec{method, 0.0, &net, c.train.psi};
    out = evaluate_on_split(dir, m, c, spec, budgets, "test", threads, c.train.seed);
  } else {
    const auto tuned = load_best_eta(dir, method);
    std::map<double, std::vector<std::size_t>> by_eta;
    for (std::size_t b : budgets)
      by_eta[tuned.count(b) ? tuned.at(b) : c.eta.eta0].push_back(b);
    for (const auto& [eta0, bs] : by_eta) {
      auto e = evaluate_on_split(dir, m, c, {method, eta0}, bs, "test", threads, c.seed);
      out.rows.insert(out.rows.end(), e.rows.begin(), e.rows.end());
      out.series.insert(out.series.end(), e.series.begin(), e.series.end());
      out.reference_violations += e.reference_violations;
    }
    sort_rows(out.rows);
  }
  write_text_file(dir / "results" / ("evaluate-" + tag + ".csv"), rows_to_csv(out.rows));
  write_text_file(dir / "results" / ("evaluate-" + tag + ".series.csv"), series_to_csv(out.series));
  return out;
}

/// Trains on the train split only; writes the checkpoint and a
/// `<checkpoint>.log.csv` with one row per epoch.
inline TrainResult cmd_train(const fs::path& dir, const HarnessConfig& c,
                             const std::string& checkpoint, AccessLog* log = nullptr,
                             const std::function<void(const TrainLogRow&)>& on_epoch = {}) {
  const DatasetManifest m = load_manifest(dir);
  const auto insts = m.split("train");
  require(!insts.empty(), "dataset has no training instances");
  std::vector<OracleHandle> oracles;
  for (const auto* i : insts) oracles.push_back(make_min_oracle(load_instance(dir, *i, log)));
  TrainResult r =
      train(NetParams::init(c.net, c.train.seed), oracles, c.train, c.solver.record_times, on_epoch);
  save_checkpoint(checkpoint, r.params,
                  {{"dataset", m.name}, {"problem", m.problem}, {"config", to_json(c)["train"]}});
  std::string csv = "epoch,mean_loss,wall_time_s\n";
  for (const auto& row : r.log)
    csv += std::to_string(row.epoch) + "," + format_number(row.mean_loss) + "," +
           format_number(row.wall_time_s) + "\n";
  write_text_file(checkpoint + ".log.csv", csv);
  return r;
}

/// Collects every result CSV of the dataset into report/results.csv and
/// writes per-series (iteration, mean gap) and (time, mean gap) files.
inline std::vector<ResultRow> cmd_report(const fs::path& dir) {
  const fs::path results = dir / "results";
  require(fs::exists(results), "no results to report; run gridsearch or evaluate first");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(results)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ResultRow> rows;
  std::vector<Series> series;
  for (const auto& p : files) {
    const std::string name = p.filename().string();
    if (name.starts_with("best-eta-")) continue;
    if (name.ends_with(".series.csv")) {
      auto s = read_series_csv(p);
      series.insert(series.end(), s.begin(), s.end());
    } else if (name.ends_with(".csv")) {
      auto r = read_rows_csv(p);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  require(!rows.empty(), "no result rows to report");
  sort_rows(rows);
  rows.erase(std::unique(rows.begin(), rows.end(),
                         [](const ResultRow& a, const ResultRow& b) { return a.key() == b.key(); }),
             rows.end());
  const fs::path out = dir / "report";
  write_text_file(out / "results.csv", rows_to_csv(rows));
  std::set<std::string> written;
  for (const auto& s : series) {
    const std::string stem = s.dataset + "_" + s.method + "_" + s.eta0;
    if (!written.insert(stem).second) continue;
    std::string iter = "iteration,mean_gap_pct\n", time = "time_s,mean_gap_pct\n";
    for (std::size_t i = 0; i < s.mean_gap.size(); ++i) {
      iter += std::to_string(i) + "," + format_number(s.mean_gap[i]) + "\n";
      time += format_number(s.mean_time[i]) + "," + format_number(s.mean_gap[i]) + "\n";
    }
    write_text_file(out / (stem + "_iter.csv"), iter);
    write_text_file(out / (stem + "_time.csv"), time);
  }
  return rows;
}

}  // namespace bnet
