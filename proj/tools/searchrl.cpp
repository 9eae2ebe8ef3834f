// searchrl: parse, score, simulate, train-toy and report over JSON Lines files.
//
// Exit codes: 0 success, 1 I/O or configuration error, 2 trajectory ids
// missing from the dataset (outputs for the matching ids are still written).

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "searchrl/searchrl.hpp"

namespace {

using namespace searchrl;

constexpr int kOk = 0;
constexpr int kIoError = 1;
constexpr int kMismatch = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> t_iter;
  std::optional<std::size_t> k;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file (RL hyperparameter keys)");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--t-iter", f.t_iter, "training iteration used for the query-reward decay");
  cmd->add_option("--k", f.k, "retriever top-k");
  cmd->add_option("--out", f.out, "output path (stdout when omitted)");
}

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.k) cfg.set_retriever_k(*f.k);
  cfg.validate();
  return cfg;
}

// Output sink: the --out file when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) file_ = std::make_unique<std::ofstream>(open_output(path));
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string pick(const std::string& flag, const std::string& from_config, const char* what) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  throw ConfigError(std::string("missing ") + what + " path");
}

void print_line_errors(const std::vector<LineError>& errors) {
  for (const auto& e : errors) std::cerr << "line " << e.line << ": " << e.message << '\n';
}

int report_missing(const std::vector<std::string>& missing) {
  if (missing.empty()) return kOk;
  std::cerr << missing.size() << " trajectory id(s) not in dataset, skipped:";
  for (const auto& id : missing) std::cerr << ' ' << id;
  std::cerr << '\n';
  return kMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense-reward tooling for think/search/memorize agent trajectories"};
  app.require_subcommand(1);

  CommonFlags common;
  std::string input, dataset, corpus, policy_out, templates_arg;
  long iters = -1;
  std::size_t draws = 1;

  auto* parse = app.add_subcommand("parse", "Parse a trajectory dump and report format violations");
  parse->add_option("input", input, "trajectory dump (JSON Lines {\"id\",\"raw\"})")->required();
  add_common(parse, common);

  auto* score = app.add_subcommand("score", "Score trajectories with the dense reward");
  score->add_option("input", input, "trajectory dump")->required();
  score->add_option("--dataset", dataset, "dataset JSON Lines {\"id\",\"question\",\"golden_answers\"}");
  add_common(score, common);

  auto* simulate = app.add_subcommand("simulate", "Generate scripted trajectories over a corpus");
  simulate->add_option("--dataset", dataset, "dataset JSON Lines");
  simulate->add_option("--corpus", corpus, "corpus JSON Lines {\"id\",\"title\",\"body\"}");
  simulate->add_option("--templates", templates_arg,
                       "comma-separated template indices, or 'all'; default draws from the uniform policy");
  simulate->add_option("--draws", draws, "uniform template draws per example when --templates is not given");
  add_common(simulate, common);

  auto* train = app.add_subcommand("train-toy", "Run the toy GRPO trainer over query templates");
  train->add_option("--dataset", dataset, "dataset JSON Lines");
  train->add_option("--corpus", corpus, "corpus JSON Lines");
  train->add_option("--iters", iters, "training iterations (default: total_training_steps from config)");
  train->add_option("--policy-out", policy_out, "final policy JSON (default: <out>.policy.json)");
  add_common(train, common);

  auto* report = app.add_subcommand("report", "Behavior statistics over a trajectory dump");
  report->add_option("input", input, "trajectory dump")->required();
  report->add_option("--dataset", dataset, "dataset JSON Lines");
  add_common(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kIoError;
  }

  try {
    const RunConfig cfg = resolve_config(common);

    if (*parse) {
      auto in = open_input(input);
      Sink sink(common.out);
      const auto sum = cmd_parse(in, sink.stream(), cfg);
      print_line_errors(sum.errors);
      std::cerr << "parsed " << sum.parsed << ", errors " << sum.errors.size() << '\n';
      for (const auto& [kind, n] : sum.histogram) std::cerr << "  " << kind << ": " << n << '\n';
      return kOk;
    }

    if (*score) {
      const auto ds = load_dataset(pick(dataset, cfg.dataset_path, "dataset"));
      auto in = open_input(input);
      Sink sink(common.out);
      const auto sum = cmd_score(in, ds, sink.stream(), cfg, common.t_iter.value_or(0));
      print_line_errors(sum.errors);
      return report_missing(sum.missing_ids);
    }

    if (*simulate) {
      const auto ds = load_dataset(pick(dataset, cfg.dataset_path, "dataset"));
      const auto index = build_index(load_corpus(pick(corpus, cfg.corpus_path, "corpus")));
      SimulateOptions sim;
      sim.draws = draws;
      if (templates_arg == "all") {
        for (std::size_t t = 0; t < default_templates().size(); ++t) sim.templates.push_back(t);
      } else if (!templates_arg.empty()) {
        std::stringstream ss(templates_arg);
        std::string item;
        while (std::getline(ss, item, ',')) sim.templates.push_back(std::stoul(item));
      }
      Sink sink(common.out);
      cmd_simulate(ds, index, cfg, sim, cfg.seed, sink.stream());
      return kOk;
    }

    if (*train) {
      if (common.out.empty()) throw ConfigError("train-toy requires --out for the learning-curve CSV");
      auto run = cfg;
      if (iters >= 0) run.train.iters = iters;
      const auto ds = load_dataset(pick(dataset, cfg.dataset_path, "dataset"));
      auto index = build_index(load_corpus(pick(corpus, cfg.corpus_path, "corpus")));
      auto csv = open_output(common.out);
      auto pol = open_output(policy_out.empty() ? common.out + ".policy.json" : policy_out);
      const auto curve = cmd_train_toy(ds, std::move(index), run, csv, pol);
      if (!curve.empty())
        std::cerr << "iterations " << curve.size() << ", final mean reward " << curve.back().mean_reward << '\n';
      return kOk;
    }

    if (*report) {
      const auto ds = load_dataset(pick(dataset, cfg.dataset_path, "dataset"));
      auto in = open_input(input);
      const auto res = cmd_report(in, ds, cfg);
      print_line_errors(res.errors);
      Sink sink(common.out);
      sink.stream() << report_json(res.report).dump(2) << '\n';
      return report_missing(res.missing_ids);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}
