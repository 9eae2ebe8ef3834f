#pragma once

// JSON Lines ingestion for datasets, corpora and trajectory dumps.

#include <fstream>
#include <functional>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "search_env.hpp"

namespace searchrl {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

// Calls on_record for every non-blank line that parses as a JSON object and
// is accepted by the callback (which may throw std::exception to reject it).
// Bad lines are collected and processing continues.
inline std::vector<LineError> read_jsonl(std::istream& in,
                                         const std::function<void(const nlohmann::json&, std::size_t)>& on_record) {
  std::vector<LineError> errors;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("expected a JSON object");
      on_record(j, n);
    } catch (const std::exception& e) {
      errors.push_back({n, e.what()});
    }
  }
  return errors;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

namespace detail {

inline std::string id_string(const nlohmann::json& j) {
  if (!j.contains("id")) throw std::invalid_argument("missing \"id\"");
  const auto& id = j.at("id");
  if (id.is_string()) return id.get<std::string>();
  if (id.is_number_integer()) return std::to_string(id.get<long long>());
  throw std::invalid_argument("\"id\" must be a string or integer");
}

inline void throw_line_errors(const std::string& what, const std::vector<LineError>& errors) {
  if (errors.empty()) return;
  std::string msg = what + ": " + std::to_string(errors.size()) + " bad line(s)";
  for (const auto& e : errors) msg += "\n  line " + std::to_string(e.line) + ": " + e.message;
  throw IoError(msg);
}

}  // namespace detail

// {"id","question","golden_answers":[...]}; any bad line is fatal.
inline std::vector<QAExample> read_dataset(std::istream& in) {
  std::vector<QAExample> out;
  const auto errors = read_jsonl(in, [&](const nlohmann::json& j, std::size_t) {
    auto golds = j.at("golden_answers").get<std::vector<std::string>>();
    out.emplace_back(detail::id_string(j), j.at("question").get<std::string>(), GoldAnswers(std::move(golds)));
  });
  detail::throw_line_errors("dataset", errors);
  return out;
}

inline std::vector<QAExample> load_dataset(const std::string& path) {
  auto in = open_input(path);
  return read_dataset(in);
}

// {"id","title","body"}; any bad line is fatal.
inline std::vector<Document> read_corpus(std::istream& in) {
  std::vector<Document> out;
  const auto errors = read_jsonl(in, [&](const nlohmann::json& j, std::size_t) {
    out.push_back({detail::id_string(j), j.value("title", std::string()), j.at("body").get<std::string>()});
  });
  detail::throw_line_errors("corpus", errors);
  return out;
}

inline std::vector<Document> load_corpus(const std::string& path) {
  auto in = open_input(path);
  return read_corpus(in);
}

struct TrajectoryRecord {
  std::string id;
  std::string raw;
  std::size_t line = 0;
};

// {"id","raw"}; bad lines are returned alongside the good records.
inline std::vector<TrajectoryRecord> read_trajectories(std::istream& in, std::vector<LineError>& errors) {
  std::vector<TrajectoryRecord> out;
  auto errs = read_jsonl(in, [&](const nlohmann::json& j, std::size_t line) {
    out.push_back({detail::id_string(j), j.at("raw").get<std::string>(), line});
  });
  errors.insert(errors.end(), errs.begin(), errs.end());
  return out;
}

}  // namespace searchrl
