// Command-line front end for dataset generation, reference bounds, eta0
// grid search, training, evaluation and reports.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "bnet/harness.hpp"

namespace {

std::vector<std::size_t> parse_budgets(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v < 1)
      throw bnet::ContractViolation("--budgets: '" + item + "' is not a positive integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw bnet::ContractViolation("--budgets: empty list");
  return out;
}

void print_rows_summary(const bnet::EvalOutput& e) {
  std::map<std::tuple<std::string, std::string, std::size_t>, std::pair<double, int>> acc;
  for (const auto& r : e.rows) {
    auto& a = acc[{r.method, r.eta0, r.budget}];
    a.first += r.gap_pct;
    ++a.second;
  }
  for (const auto& [k, v] : acc)
    std::printf("%s eta0=%s budget=%zu mean_gap_pct=%s\n", std::get<0>(k).c_str(),
                std::get<1>(k).c_str(), std::get<2>(k),
                bnet::format_number(v.first / v.second).c_str());
  if (e.reference_violations)
    std::printf("warning: %zu bounds beat the stored reference\n", e.reference_violations);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bundle-method experiments on Lagrangian duals"};
  app.require_subcommand(1);

  std::string config_path, dataset, method = "bundle", budgets_text = "10,25,50,100", checkpoint;
  std::optional<std::uint64_t> seed;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "JSON configuration file");
    if (needs_config) c->required();
    sub->add_option("--dataset", dataset, "dataset directory")->required();
    sub->add_option("--seed", seed, "overrides the generator and training seeds");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("generate", "generate train and test instances");
  add_common(gen, true);
  auto* ref = app.add_subcommand("reference", "compute reference bounds");
  add_common(ref, false);
  auto* grid = app.add_subcommand("gridsearch", "sweep eta0 over the grid");
  add_common(grid, false);
  grid->add_option("--method", method, "method name");
  grid->add_option("--budgets", budgets_text, "comma-separated iteration budgets");
  auto* tr = app.add_subcommand("train", "train the bundle network");
  add_common(tr, false);
  tr->add_option("--checkpoint", checkpoint, "output checkpoint path");
  auto* ev = app.add_subcommand("evaluate", "evaluate a method on the test split");
  add_common(ev, false);
  ev->add_option("--method", method, "method name");
  ev->add_option("--budgets", budgets_text, "comma-separated iteration budgets");
  ev->add_option("--checkpoint", checkpoint, "checkpoint for method 'learned'");
  auto* rep = app.add_subcommand("report", "collect results into report/");
  rep->add_option("--dataset", dataset, "dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    bnet::HarnessConfig cfg;
    if (!config_path.empty()) cfg = bnet::load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
    }
    const bnet::fs::path dir = dataset;

    if (gen->parsed()) {
      const auto m = bnet::cmd_generate(cfg, dir);
      std::printf("generated %zu instances in %s\n", m.instances.size(), dir.string().c_str());
    } else if (ref->parsed()) {
      const auto m = bnet::cmd_reference(dir, cfg, threads);
      std::printf("reference bounds for %zu instances\n", m.instances.size());
    } else if (grid->parsed()) {
      const auto g = bnet::cmd_gridsearch(dir, cfg, method, parse_budgets(budgets_text), threads);
      print_rows_summary(g.eval);
      for (const auto& b : g.best)
        std::printf("best %s budget=%zu eta0=%s mean_gap_pct=%s\n", b.method.c_str(), b.budget,
                    bnet::format_number(b.eta0).c_str(),
                    bnet::format_number(b.mean_gap_pct).c_str());
    } else if (tr->parsed()) {
      if (checkpoint.empty()) checkpoint = (dir / "model.ckpt").string();
      bnet::cmd_train(dir, cfg, checkpoint, nullptr, [](const bnet::TrainLogRow& r) {
        std::printf("epoch %zu mean_loss=%s\n", r.epoch, bnet::format_number(r.mean_loss).c_str());
        std::fflush(stdout);
      });
      std::printf("saved %s\n", checkpoint.c_str());
    } else if (ev->parsed()) {
      print_rows_summary(
          bnet::cmd_evaluate(dir, cfg, method, parse_budgets(budgets_text), threads, checkpoint));
    } else if (rep->parsed()) {
      const auto rows = bnet::cmd_report(dir);
      std::printf("wrote %zu rows to %s\n", rows.size(), (dir / "report" / "results.csv").string().c_str());
    }
  } catch (const bnet::TrainingDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
