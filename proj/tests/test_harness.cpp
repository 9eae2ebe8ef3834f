#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "searchrl/harness.hpp"

using namespace searchrl;
namespace fs = std::filesystem;

namespace {

std::string fixture_path(const std::string& name) { return std::string(SEARCHRL_FIXTURES) + "/" + name; }
std::string data_path(const std::string& name) { return std::string(SEARCHRL_DATA) + "/" + name; }

RunConfig relaxed() {
  RunConfig c;
  c.reward.grammar.strict_order = false;
  return c;
}

std::vector<nlohmann::json> read_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("searchrl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path path_;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEARCHRL_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

}  // namespace

TEST(CmdParse, CaseStudiesHaveNoViolations) {
  std::ifstream in(fixture_path("case_studies.jsonl"));
  std::ostringstream out;
  const auto sum = cmd_parse(in, out, relaxed());
  EXPECT_EQ(sum.parsed, 3u);
  EXPECT_TRUE(sum.errors.empty());
  EXPECT_EQ(sum.violations_per_record, (std::vector<std::size_t>{0, 0, 0}));
  const auto lines = read_lines(out.str());
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0]["id"], "thief");
  EXPECT_EQ(lines[2]["steps"].back()["action"], "answer");
  EXPECT_EQ(lines[2]["steps"].back()["content"], "Two");
}

TEST(CmdParse, EmptyInput) {
  std::istringstream in("");
  std::ostringstream out;
  const auto sum = cmd_parse(in, out, RunConfig{});
  EXPECT_EQ(sum.parsed, 0u);
  EXPECT_TRUE(out.str().empty());
}

TEST(CmdParse, OneMalformedLineAmongTen) {
  std::string text;
  for (int i = 0; i < 10; ++i) {
    if (i == 6)
      text += "{\"id\": \"broken\", \"raw\": \n";
    else
      text += nlohmann::json{{"id", "r" + std::to_string(i)}, {"raw", "<answer>x</answer>"}}.dump() + "\n";
  }
  std::istringstream in(text);
  std::ostringstream out;
  const auto sum = cmd_parse(in, out, RunConfig{});
  EXPECT_EQ(sum.parsed, 9u);
  ASSERT_EQ(sum.errors.size(), 1u);
  EXPECT_EQ(sum.errors[0].line, 7u);
  const auto lines = read_lines(out.str());
  ASSERT_EQ(lines.size(), 10u);
  EXPECT_EQ(lines[6]["line"], 7);
  EXPECT_TRUE(lines[6].contains("error"));
}

TEST(CmdParse, MissingRawFieldIsAnError) {
  std::istringstream in("{\"id\": \"a\"}\n{\"raw\": \"<answer>x</answer>\"}\n");
  std::ostringstream out;
  const auto sum = cmd_parse(in, out, RunConfig{});
  EXPECT_EQ(sum.parsed, 0u);
  EXPECT_EQ(sum.errors.size(), 2u);
}

TEST(CmdScore, CaseStudiesAnswerCorrectly) {
  const auto ds = load_dataset(fixture_path("case_studies_dataset.jsonl"));
  std::ifstream in(fixture_path("case_studies.jsonl"));
  std::ostringstream out;
  const auto cfg = relaxed();
  const auto sum = cmd_score(in, ds, out, cfg, 0);
  EXPECT_EQ(sum.scored, 3u);
  EXPECT_TRUE(sum.missing_ids.empty());
  const auto lines = read_lines(out.str());
  ASSERT_EQ(lines.size(), 4u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& l = lines[i];
    EXPECT_EQ(l["em"], 1) << l["id"];
    EXPECT_EQ(l["r_ans"].get<double>(), 1.0);
    // independent recomputation of the combination from the written fields
    const double total = l["r_ans"].get<double>() + cfg.reward.alpha * l["r_mem"].get<int>() +
                         cfg.reward.gamma * l["mu"].get<double>() * l["r_query"].get<int>() +
                         cfg.reward.gamma * l["r_format"].get<int>();
    EXPECT_NEAR(l["total"].get<double>(), total, 1e-12);
  }
  EXPECT_EQ(lines[3]["aggregate"], true);
  EXPECT_EQ(lines[3]["count"], 3);
  EXPECT_EQ(lines[3]["mean_em"].get<double>(), 1.0);
}

TEST(CmdScore, NoAnswerAndMissingId) {
  const std::vector<QAExample> ds = {QAExample("a", "q?", GoldAnswers({"x"}))};
  std::istringstream in("{\"id\":\"a\",\"raw\":\"<search>something long enough</search>\"}\n"
                        "{\"id\":\"zz\",\"raw\":\"<answer>x</answer>\"}\n");
  std::ostringstream out;
  const auto sum = cmd_score(in, ds, out, RunConfig{}, 0);
  EXPECT_EQ(sum.scored, 1u);
  EXPECT_EQ(sum.missing_ids, std::vector<std::string>{"zz"});
  const auto lines = read_lines(out.str());
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0]["r_ans"].get<double>(), 0.0);
  EXPECT_EQ(lines[1]["missing_ids"][0], "zz");
}

TEST(CmdReport, Examples) {
  const std::vector<QAExample> ds = {QAExample("a", "q?", GoldAnswers({"abc"}))};
  {
    std::istringstream in("{\"id\":\"a\",\"raw\":\"<search>abc</search><search>abc</search><answer>abc</answer>\"}\n");
    const auto rep = cmd_report(in, ds, RunConfig{}).report;
    ASSERT_TRUE(rep.mean_pairwise_similarity);
    EXPECT_EQ(*rep.mean_pairwise_similarity, 1.0);
    EXPECT_EQ(rep.mean_em, 1.0);
    EXPECT_EQ(rep.mean_search_calls, 2.0);
  }
  {
    std::istringstream in("");
    EXPECT_THROW(cmd_report(in, ds, RunConfig{}), IoError);
  }
}

TEST(CmdReport, ThiefSearchCalls) {
  const auto ds = load_dataset(fixture_path("case_studies_dataset.jsonl"));
  std::istringstream in(oracle::read_file(fixture_path("case_studies.jsonl")).substr(0, oracle::read_file(fixture_path("case_studies.jsonl")).find('\n') + 1));
  const auto rep = cmd_report(in, ds, RunConfig{}).report;
  EXPECT_EQ(rep.count, 1u);
  EXPECT_EQ(rep.mean_search_calls, 4.0);
}

TEST(CmdReport, HandComputedStatistics) {
  // t1: queries of length 10 and 20, answer correct, memory covers gold
  // t2: one query of length 12, wrong answer, no memory
  const std::vector<QAExample> ds = {QAExample("t1", "q?", GoldAnswers({"Paris"})),
                                     QAExample("t2", "q?", GoldAnswers({"Rome"}))};
  const std::string q1 = "aaaaaaaaaa", q2 = "aaaaaaaaaabbbbbbbbbb", q3 = "cccccccccccc";
  std::ostringstream dump;
  dump << nlohmann::json{{"id", "t1"},
                         {"raw", "<search>" + q1 + "</search><search>" + q2 +
                                     "</search><memory>capital is Paris</memory><answer>Paris</answer>"}}
              .dump()
       << "\n"
       << nlohmann::json{{"id", "t2"}, {"raw", "<search>" + q3 + "</search><answer>Milan Italy</answer>"}}.dump()
       << "\n";
  std::istringstream in(dump.str());
  const auto rep = cmd_report(in, ds, RunConfig{}).report;
  EXPECT_EQ(rep.count, 2u);
  EXPECT_DOUBLE_EQ(rep.mean_em, 0.5);
  EXPECT_DOUBLE_EQ(rep.mean_f1, 0.5);
  EXPECT_DOUBLE_EQ(rep.mean_search_calls, 1.5);
  EXPECT_DOUBLE_EQ(rep.mean_query_char_len, 14.0);
  // ((10-14)^2 + (20-14)^2 + (12-14)^2) / 3
  EXPECT_DOUBLE_EQ(rep.query_len_variance, 56.0 / 3.0);
  // ratio(q2, q1) = 2*10/30, only t1 has two queries
  ASSERT_TRUE(rep.mean_pairwise_similarity);
  EXPECT_DOUBLE_EQ(*rep.mean_pairwise_similarity, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rep.mean_memory_cem, 0.5);
}

TEST(CmdSimulate, DeterministicAndConformant) {
  const auto ds = load_dataset(data_path("dataset.jsonl"));
  const auto index = build_index(load_corpus(data_path("corpus.jsonl")));
  SimulateOptions sim;
  sim.draws = 3;
  std::ostringstream a, b, c;
  EXPECT_EQ(cmd_simulate(ds, index, RunConfig{}, sim, 7, a), ds.size() * 3);
  cmd_simulate(ds, index, RunConfig{}, sim, 7, b);
  cmd_simulate(ds, index, RunConfig{}, sim, 8, c);
  EXPECT_EQ(a.str(), b.str());
  std::vector<int> ta, tc;
  for (const auto& l : read_lines(a.str())) ta.push_back(l["template"]);
  for (const auto& l : read_lines(c.str())) tc.push_back(l["template"]);
  EXPECT_NE(ta, tc);
  std::istringstream in(a.str());
  std::ostringstream parsed;
  const auto sum = cmd_parse(in, parsed, RunConfig{});
  EXPECT_EQ(sum.parsed, ds.size() * 3);
  for (auto v : sum.violations_per_record) EXPECT_EQ(v, 0u);
}

TEST(CurveCsv, HeaderAndRows) {
  std::ostringstream out;
  write_curve_csv({{0, 0.5, 1.0}, {1, 0.25, 0.75}}, out);
  EXPECT_EQ(out.str(), "iter,mean_reward,policy_entropy\n0,0.5,1\n1,0.25,0.75\n");
}

TEST(RunConfigJson, KeysAndErrors) {
  const auto cfg = load_run_config(data_path("config.json"));
  EXPECT_EQ(cfg.reward.alpha, 0.1);
  EXPECT_EQ(cfg.reward.gamma, 0.01);
  EXPECT_EQ(cfg.reward.t_decay, 150);
  EXPECT_EQ(cfg.reward.grammar.t_max, 5);
  EXPECT_EQ(cfg.grpo.epsilon, 0.2);
  EXPECT_EQ(cfg.grpo.beta, 0.001);
  EXPECT_EQ(cfg.train.group_size, 10u);
  EXPECT_EQ(cfg.rollout.k, 3u);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"alpah", 0.1}}), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"clip_ratio", 1.5}}), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"correctness", "maybe"}}), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::array()), ConfigError);
  const auto c2 = run_config_from_json(nlohmann::json{{"max_search_actions", 3}, {"retriever_topk", 5}});
  EXPECT_EQ(c2.reward.t_max, 3);
  EXPECT_EQ(c2.reward.grammar.t_max, 3);
  EXPECT_EQ(c2.rollout.k, 5u);
}

TEST(Cli, ParseScoreReportExitCodes) {
  TempDir tmp;
  write_file(tmp.file("relaxed.json"), "{\"strict_order\": false}\n");
  EXPECT_EQ(run_cli("parse " + fixture_path("case_studies.jsonl") + " --config " + tmp.file("relaxed.json") +
                    " --out " + tmp.file("parsed.jsonl")),
            0);
  for (const auto& l : read_lines(oracle::read_file(tmp.file("parsed.jsonl")))) EXPECT_TRUE(l["violations"].empty());

  EXPECT_EQ(run_cli("score " + fixture_path("case_studies.jsonl") + " --dataset " +
                    fixture_path("case_studies_dataset.jsonl") + " --config " + tmp.file("relaxed.json") +
                    " --out " + tmp.file("scores.jsonl")),
            0);
  const auto scores = read_lines(oracle::read_file(tmp.file("scores.jsonl")));
  ASSERT_EQ(scores.size(), 4u);
  EXPECT_EQ(scores[3]["mean_em"].get<double>(), 1.0);

  // dataset without the case-study ids
  EXPECT_EQ(run_cli("score " + fixture_path("case_studies.jsonl") + " --dataset " + data_path("dataset.jsonl") +
                    " --out " + tmp.file("s2.jsonl")),
            2);
  EXPECT_EQ(run_cli("report " + fixture_path("case_studies.jsonl") + " --dataset " + data_path("dataset.jsonl") +
                    " --out " + tmp.file("r2.json")),
            1);  // nothing left to report on
  EXPECT_EQ(run_cli("report " + fixture_path("case_studies.jsonl") + " --dataset " +
                    fixture_path("case_studies_dataset.jsonl") + " --out " + tmp.file("r.json")),
            0);
  const auto rep = nlohmann::json::parse(oracle::read_file(tmp.file("r.json")));
  EXPECT_EQ(rep["count"], 3);

  EXPECT_EQ(run_cli("parse " + tmp.file("does_not_exist.jsonl")), 1);
  write_file(tmp.file("bad.json"), "{\"alpha\": \"high\"}");
  EXPECT_EQ(run_cli("parse " + fixture_path("case_studies.jsonl") + " --config " + tmp.file("bad.json")), 1);
  EXPECT_EQ(run_cli("bogus"), 1);
}

TEST(Cli, SimulateAndTrainToy) {
  TempDir tmp;
  const std::string common = " --dataset " + data_path("dataset.jsonl") + " --corpus " + data_path("corpus.jsonl");
  EXPECT_EQ(run_cli("simulate" + common + " --seed 3 --templates all --out " + tmp.file("a.jsonl")), 0);
  EXPECT_EQ(run_cli("simulate" + common + " --seed 3 --templates all --out " + tmp.file("b.jsonl")), 0);
  EXPECT_EQ(oracle::read_file(tmp.file("a.jsonl")), oracle::read_file(tmp.file("b.jsonl")));
  EXPECT_EQ(read_lines(oracle::read_file(tmp.file("a.jsonl"))).size(), 6u * 5u);

  EXPECT_EQ(run_cli("train-toy" + common + " --iters 12 --out " + tmp.file("curve.csv")), 0);
  std::istringstream csv(oracle::read_file(tmp.file("curve.csv")));
  std::string line;
  std::size_t rows = 0;
  std::getline(csv, line);
  EXPECT_EQ(line, "iter,mean_reward,policy_entropy");
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 12u);
  const auto pol = nlohmann::json::parse(oracle::read_file(tmp.file("curve.csv") + ".policy.json"));
  EXPECT_EQ(pol["probs"].size(), 5u);
  EXPECT_EQ(run_cli("train-toy" + common + " --iters 2"), 1);  // --out is required
}
