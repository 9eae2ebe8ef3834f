#pragma once

// Desk-scale search environment: an in-memory idf-overlap retriever and
// scripted agents that write grammar-conformant Think-Search-Memorize
// trajectories, driven by a small set of query templates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "grpo.hpp"
#include "text_metrics.hpp"
#include "trajectory.hpp"

namespace searchrl {

struct Document {
  std::string id;
  std::string title;
  std::string body;
};

struct QAExample {
  std::string id;
  std::string question;
  GoldAnswers golds;

  QAExample(std::string id_, std::string question_, GoldAnswers golds_)
      : id(std::move(id_)), question(std::move(question_)), golds(std::move(golds_)) {
    if (trim(question).empty()) throw std::invalid_argument("QAExample '" + id + "': empty question");
  }
};

struct Posting {
  std::size_t doc = 0;  // index into CorpusIndex::docs()
  bool operator==(const Posting&) const = default;
};

// Inverted index over the distinct normalized tokens of title + body.
// Immutable after construction.
class CorpusIndex {
 public:
  CorpusIndex() = default;
  explicit CorpusIndex(std::vector<Document> docs) : docs_(std::move(docs)) {
    std::unordered_set<std::string> ids;
    for (std::size_t d = 0; d < docs_.size(); ++d) {
      if (!ids.insert(docs_[d].id).second) throw std::invalid_argument("build_index: duplicate document id '" + docs_[d].id + "'");
      std::set<std::string> seen;
      for (auto& tok : normalized_tokens(docs_[d].title + " " + docs_[d].body)) {
        if (seen.insert(tok).second) postings_[tok].push_back({d});
      }
    }
  }

  const std::vector<Document>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }

  const std::vector<Posting>& postings(const std::string& token) const {
    static const std::vector<Posting> kEmpty;
    auto it = postings_.find(token);
    return it == postings_.end() ? kEmpty : it->second;
  }
  std::size_t document_frequency(const std::string& token) const { return postings(token).size(); }
  std::size_t vocabulary_size() const { return postings_.size(); }

  double idf(const std::string& token) const {
    const auto df = document_frequency(token);
    if (df == 0) return 0.0;
    return std::log(1.0 + static_cast<double>(docs_.size()) / static_cast<double>(df));
  }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

inline CorpusIndex build_index(std::vector<Document> docs) { return CorpusIndex(std::move(docs)); }

struct RetrievalResult {
  const Document* doc = nullptr;
  double score = 0.0;
  std::size_t rank = 0;
};

// Distinct normalized tokens of a query, in order of first appearance.
inline std::vector<std::string> distinct_query_tokens(std::string_view query) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& t : normalized_tokens(query))
    if (seen.insert(t).second) out.push_back(std::move(t));
  return out;
}

// score(doc) = sum of idf(w) over distinct query tokens w present in doc.
// Results ordered by (score desc, id asc), positive scores only.
inline std::vector<RetrievalResult> retrieve(const CorpusIndex& index, std::string_view query, std::size_t k = 3) {
  if (k < 1) throw std::invalid_argument("retrieve: k must be >= 1");
  std::vector<double> score(index.size(), 0.0);
  std::vector<std::size_t> touched;
  for (const auto& tok : distinct_query_tokens(query)) {
    const double w = index.idf(tok);
    for (const auto& p : index.postings(tok)) {
      if (score[p.doc] == 0.0) touched.push_back(p.doc);
      score[p.doc] += w;
    }
  }
  std::vector<RetrievalResult> out;
  for (auto d : touched)
    if (score[d] > 0.0) out.push_back({&index.docs()[d], score[d], 0});
  const auto by_rank = [](const RetrievalResult& a, const RetrievalResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc->id < b.doc->id;
  };
  if (out.size() > k) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), by_rank);
    out.resize(k);
  } else {
    std::sort(out.begin(), out.end(), by_rank);
  }
  for (std::size_t r = 0; r < out.size(); ++r) out[r].rank = r + 1;
  return out;
}

// --- query templates -------------------------------------------------------

struct QueryTemplate {
  std::string name;
  // (example, 1-based search step, memory so far) -> query text
  std::function<std::string(const QAExample&, int, const std::string&)> render;
};

inline bool is_stopword(std::string_view normalized_token) {
  static const std::unordered_set<std::string_view> kStop = {
      "is",    "are",   "was",  "were", "be",   "been", "of",    "in",   "on",   "at",   "to",   "for",
      "by",    "with",  "from", "and",  "or",   "who",  "what",  "when", "where", "which", "how", "why",
      "did",   "does",  "do",   "that", "this", "it",   "its",   "as",   "has",  "have", "had",  "whom",
      "whose", "many",  "much", "into", "than", "there", "their", "they", "he",   "she",  "his",  "her"};
  return kStop.count(normalized_token) > 0;
}

// Original-case content words of a question (punctuation-only words and
// stopwords dropped).
inline std::vector<std::string> keywords(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& w : split_whitespace(text)) {
    const auto n = normalize(w);
    if (n.empty() || is_stopword(n)) continue;
    std::string cleaned;
    for (char c : w)
      if (!is_ascii_punct(c) || c == '-' || c == '\'') cleaned.push_back(c);
    if (!cleaned.empty()) out.push_back(cleaned);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// The toy policy's action space.
inline std::vector<QueryTemplate> default_templates() {
  std::vector<QueryTemplate> t;
  t.push_back({"verbatim", [](const QAExample& ex, int, const std::string&) { return collapse_whitespace(ex.question); }});
  t.push_back({"keywords", [](const QAExample& ex, int, const std::string&) { return join(keywords(ex.question)); }});
  t.push_back({"sliding", [](const QAExample& ex, int step, const std::string&) {
                 const auto kw = keywords(ex.question);
                 if (kw.empty()) return std::string();
                 std::vector<std::string> w;
                 const std::size_t start = (static_cast<std::size_t>(step - 1) * 2) % kw.size();
                 for (std::size_t i = 0; i < std::min<std::size_t>(3, kw.size()); ++i) w.push_back(kw[(start + i) % kw.size()]);
                 return join(w);
               }});
  t.push_back({"head", [](const QAExample& ex, int, const std::string&) {
                 auto words = split_whitespace(ex.question);
                 words.resize(std::min<std::size_t>(2, words.size()));
                 return join(words);
               }});
  t.push_back({"memory_chain", [](const QAExample& ex, int step, const std::string& memory) {
                 auto kw = keywords(ex.question);
                 if (step <= 1 || memory.empty()) return join(kw);
                 std::vector<std::string> q;
                 for (const auto& w : keywords(memory))
                   if (!w.empty() && w[0] >= 'A' && w[0] <= 'Z') q.push_back(w);
                 if (q.size() > 4) q.erase(q.begin(), q.end() - 4);
                 for (std::size_t i = 0; i < std::min<std::size_t>(3, kw.size()); ++i) q.push_back(kw[i]);
                 return join(q);
               }});
  return t;
}

// --- scripted rollouts -----------------------------------------------------

struct RolloutOptions {
  std::size_t k = 3;
  std::size_t max_doc_chars = 512;   // per-document excerpt budget
  std::size_t memory_sentences = 2;  // sentences kept per search step
};

namespace detail {

// Tag brackets inside environment text would corrupt the trajectory.
inline std::string sanitize(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c == '<' || c == '>') c = ' ';
  return collapse_whitespace(out);
}

inline std::vector<std::string> split_sentences(std::string_view body) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == body.size() || is_ascii_space(body[i + 1]))) {
      // "K. J. Yesudas": a lone capital before the period is an initial
      if (c == '.' && i >= 1 && body[i - 1] >= 'A' && body[i - 1] <= 'Z' && (i == 1 || is_ascii_space(body[i - 2])))
        continue;
      auto s = trim(body.substr(start, i + 1 - start));
      if (!s.empty()) out.emplace_back(s);
      start = i + 1;
    }
  }
  auto tail = trim(body.substr(std::min(start, body.size())));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

inline std::size_t overlap(const std::vector<std::string>& query_tokens, std::string_view sentence) {
  const auto toks = normalized_tokens(sentence);
  const std::set<std::string> s(toks.begin(), toks.end());
  std::size_t n = 0;
  for (const auto& q : query_tokens) n += !is_stopword(q) && s.count(q);
  return n;
}

inline std::string serialize_documents(const std::vector<RetrievalResult>& results, std::size_t max_chars) {
  std::vector<std::string> entries;
  for (const auto& r : results) {
    std::string body = sanitize(r.doc->body);
    if (body.size() > max_chars) body = std::string(trim(body.substr(0, max_chars))) + " ...";
    entries.push_back("Doc " + std::to_string(r.rank) + "(Title \"" + sanitize(r.doc->title) + "\") " + body);
  }
  return join(entries);
}

// Capitalized word runs of the memory not already named in the question,
// scored by the question overlap of their sentence. Falls back to "unknown".
inline std::string fallback_answer(const std::string& memory, const std::string& question) {
  const auto qtoks = distinct_query_tokens(question);
  const auto nq = normalize(question);
  std::string best = "unknown";
  std::size_t best_score = 0;
  bool found = false;
  for (const auto& sent : split_sentences(memory)) {
    const auto score = overlap(qtoks, sent);
    std::vector<std::string> run;
    auto flush = [&] {
      if (!run.empty()) {
        const auto cand = join(run);
        const auto nc = normalize(cand);
        if (!nc.empty() && nq.find(nc) == std::string::npos && (!found || score > best_score)) {
          best = cand;
          best_score = score;
          found = true;
        }
      }
      run.clear();
    };
    const auto words = split_whitespace(sent);
    for (std::size_t i = 0; i < words.size(); ++i) {
      std::string w;
      for (char c : words[i])
        if (!is_ascii_punct(c)) w.push_back(c);
      const bool cap = !w.empty() && w[0] >= 'A' && w[0] <= 'Z';
      if (cap && i > 0) {
        run.push_back(w);
      } else {
        flush();
      }
    }
    flush();
  }
  return best;
}

inline const std::string* covered_gold(const std::string& memory, const GoldAnswers& golds) {
  const auto m = normalize(memory);
  if (m.empty()) return nullptr;
  for (const auto& g : golds)
    if (m.find(normalize(g)) != std::string::npos) return &g;
  return nullptr;
}

}  // namespace detail

// One full trajectory following the strict grammar. Searches repeat until a
// gold answer is covered by the accumulated memory or t_max is reached.
inline std::string scripted_rollout(const QAExample& example, const QueryTemplate& tmpl, const CorpusIndex& index,
                                    const GrammarConfig& grammar, const RolloutOptions& opts, std::uint64_t seed) {
  grammar.validate();
  static const std::array<std::string_view, 3> kOpen = {
      "I need to search for evidence before answering: ", "Let me look up the facts needed for: ",
      "I should gather information to answer: "};
  static const std::array<std::string_view, 3> kAgain = {
      "The memory does not contain the answer yet, so I will search again.",
      "I still lack the key fact and need another search.",
      "More evidence is needed; searching again."};
  const std::size_t variant = static_cast<std::size_t>(seed % 3);

  std::string out;
  auto block = [&](Action a, std::string_view content) {
    out += open_tag(a);
    out += ' ';
    out += content;
    out += ' ';
    out += close_tag(a);
    out += '\n';
  };

  block(Action::Think, std::string(kOpen[variant]) + detail::sanitize(example.question));
  std::string memory;
  const std::string* hit = nullptr;
  for (int step = 1; step <= grammar.t_max; ++step) {
    if (step > 1) block(Action::Think, kAgain[variant]);
    std::string query = detail::sanitize(tmpl.render(example, step, memory));
    if (query.empty()) query = detail::sanitize(example.question);
    block(Action::Search, query);

    const auto results = retrieve(index, query, opts.k);
    block(Action::Documents, detail::serialize_documents(results, opts.max_doc_chars));

    struct Candidate {
      std::size_t score, rank, pos;
      std::string text;
    };
    std::vector<Candidate> cands;
    const auto qtoks = distinct_query_tokens(query);
    for (const auto& r : results) {
      const auto sents = detail::split_sentences(detail::sanitize(r.doc->body));
      for (std::size_t p = 0; p < sents.size(); ++p) {
        const auto sc = detail::overlap(qtoks, sents[p]);
        if (sc > 0) cands.push_back({sc, r.rank, p, sents[p]});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.rank != b.rank) return a.rank < b.rank;
      return a.pos < b.pos;
    });
    std::size_t kept = 0;
    for (const auto& c : cands) {
      if (kept == opts.memory_sentences) break;
      if (memory.find(c.text) != std::string::npos) continue;
      if (!memory.empty()) memory += ' ';
      memory += c.text;
      ++kept;
    }
    block(Action::Memory, memory.empty() ? std::string_view("No relevant information found.") : memory);

    hit = detail::covered_gold(memory, example.golds);
    if (hit) break;
  }
  block(Action::Answer, hit ? detail::sanitize(*hit) : detail::fallback_answer(memory, example.question));
  return out;
}

// Uniform variate in [0,1) from the top 53 bits of a 64-bit draw.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct RolloutGroup {
  std::vector<std::string> raws;
  std::vector<std::size_t> templates;
};

inline RolloutGroup rollout_group(const QAExample& example, const CategoricalPolicy& policy,
                                  const std::vector<QueryTemplate>& templates, std::size_t group_size,
                                  const CorpusIndex& index, const GrammarConfig& grammar, const RolloutOptions& opts,
                                  std::uint64_t seed) {
  if (group_size < 2) throw std::invalid_argument("rollout_group: group size must be >= 2");
  if (policy.size() != templates.size())
    throw std::invalid_argument("rollout_group: policy has " + std::to_string(policy.size()) + " actions but " +
                                std::to_string(templates.size()) + " templates were given");
  std::mt19937_64 rng(seed);
  RolloutGroup g;
  for (std::size_t i = 0; i < group_size; ++i) {
    const auto a = policy.sample(uniform01(rng));
    g.templates.push_back(a);
    g.raws.push_back(scripted_rollout(example, templates[a], index, grammar, opts, derive_seed(seed, i)));
  }
  return g;
}

// Dataset, corpus and template set bundled for the toy trainer.
class SearchEnv {
 public:
  SearchEnv(std::vector<QAExample> dataset, CorpusIndex index, std::vector<QueryTemplate> templates,
            GrammarConfig grammar = {}, RolloutOptions opts = {})
      : dataset_(std::move(dataset)),
        index_(std::move(index)),
        templates_(std::move(templates)),
        grammar_(grammar),
        opts_(opts) {
    if (dataset_.empty()) throw std::invalid_argument("SearchEnv: empty dataset");
    if (templates_.empty()) throw std::invalid_argument("SearchEnv: no query templates");
  }

  const std::vector<QAExample>& dataset() const { return dataset_; }
  const CorpusIndex& index() const { return index_; }
  const std::vector<QueryTemplate>& templates() const { return templates_; }
  const GrammarConfig& grammar() const { return grammar_; }
  const RolloutOptions& options() const { return opts_; }
  std::size_t num_templates() const { return templates_.size(); }

  const QAExample& sample_question(std::mt19937_64& rng) const {
    return dataset_[static_cast<std::size_t>(rng() % dataset_.size())];
  }

  std::string rollout(const QAExample& ex, std::size_t tmpl, std::uint64_t seed) const {
    return scripted_rollout(ex, templates_.at(tmpl), index_, grammar_, opts_, seed);
  }

 private:
  std::vector<QAExample> dataset_;
  CorpusIndex index_;
  std::vector<QueryTemplate> templates_;
  GrammarConfig grammar_;
  RolloutOptions opts_;
};

}  // namespace searchrl
