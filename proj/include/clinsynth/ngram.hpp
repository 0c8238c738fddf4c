#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinsynth/corpus.hpp"
#include "clinsynth/errors.hpp"
#include "clinsynth/tokenizer.hpp"

// Interpolated Kneser-Ney n-gram language model over reference tokens.
// This is the desk-scale evaluator behind the perplexity experiments:
// cheap to train, exactly testable, and sensitive to the same distribution
// shifts a neural decoder would be.
//
// Model definition (mirrored by the brute-force oracle in the test suite):
//   - records are framed as (order-1) <bos> + tokens + <eos>, OOV -> <unk>;
//   - k-gram tables count every window of the framed stream not ending in
//     <bos>;
//   - top level uses raw counts with absolute discount D and backoff weight
//     D * N1+(c.) / c(c.);
//   - lower levels use continuation counts (N1+ of distinct predecessors);
//   - the base case is the continuation unigram N1+(.w) / N1+(..) over the
//     bigram table; an order-1 model is exactly that distribution;
//   - a level whose denominator is zero passes through with weight 1.

namespace clinsynth {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const {
    return std::hash<std::string_view>{}(s);
  }
};
struct StringEq {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const {
    return a == b;
  }
};

struct Vocab {
  static constexpr std::int32_t kUnk = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;

  std::vector<std::string> tokens;  // position = token id
  std::unordered_map<std::string, std::int32_t, StringHash, StringEq> index;
  int min_count = 2;

  std::size_t size() const { return tokens.size(); }
  // Predictable tokens: everything except <bos>.
  std::size_t event_size() const { return tokens.size() - 1; }

  bool contains(std::string_view t) const {
    return index.find(t) != index.end();
  }

  std::int32_t id_of(std::string_view t) const {
    auto it = index.find(t);
    return it == index.end() ? kUnk : it->second;
  }
};

// Tokens with count >= min_count, plus the reserved symbols. Ordering is
// deterministic: reserved first, then by descending count, ties broken
// lexicographically.
inline Vocab build_vocab(const Corpus& corpus, int min_count = 2) {
  if (corpus.records.empty()) {
    throw DataError("build_vocab: corpus '" + corpus.corpus_id +
                    "' has no records");
  }
  if (min_count < 1) throw ConfigError("min_count must be >= 1");

  std::unordered_map<std::string, std::uint64_t, StringHash, StringEq> counts;
  for (const auto& rec : corpus.records) {
    for (std::string_view tok : ref_tokenize(rec.text)) {
      auto it = counts.find(tok);
      if (it == counts.end()) {
        counts.emplace(std::string(tok), 1);
      } else {
        ++it->second;
      }
    }
  }

  std::vector<std::pair<std::string_view, std::uint64_t>> kept;
  for (const auto& [tok, cnt] : counts) {
    if (cnt >= static_cast<std::uint64_t>(min_count)) kept.push_back({tok, cnt});
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.min_count = min_count;
  v.tokens = {"<unk>", "<bos>", "<eos>"};
  v.tokens.reserve(kept.size() + 3);
  for (const auto& [tok, cnt] : kept) v.tokens.emplace_back(tok);
  for (std::size_t i = 0; i < v.tokens.size(); ++i) {
    v.index.emplace(v.tokens[i], static_cast<std::int32_t>(i));
  }
  return v;
}

struct RecordScore {
  double logprob = 0.0;
  std::uint64_t scored = 0;
  std::uint64_t oov = 0;
  std::uint64_t zero_prob = 0;
};

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  // Scores tokens + <eos>; <bos> framing is internal and never scored.
  virtual RecordScore score_record(
      const std::vector<std::string_view>& tokens) const = 0;
  // P(token | context); `context` lists the preceding stream tokens oldest
  // first (left-padded with <bos> / truncated to the model's context size).
  virtual double token_prob(std::span<const std::string> context,
                            std::string_view token) const = 0;
  virtual std::uint64_t event_vocab_size() const = 0;
};

namespace detail {

inline void append_id(std::string& key, std::int32_t id) {
  char buf[4];
  std::memcpy(buf, &id, 4);
  key.append(buf, 4);
}

inline std::string pack_ids(std::span<const std::int32_t> ids) {
  std::string key;
  key.reserve(ids.size() * 4);
  for (std::int32_t id : ids) append_id(key, id);
  return key;
}

}  // namespace detail

class NgramModel : public LanguageModel {
 public:
  struct CtxStat {
    std::uint64_t total = 0;
    std::uint32_t distinct = 0;
  };
  struct LevelTable {
    std::unordered_map<std::string, std::uint64_t, StringHash, StringEq> gram;
    std::unordered_map<std::string, CtxStat, StringHash, StringEq> ctx;
  };

  int order() const { return order_; }
  double discount() const { return discount_; }
  const Vocab& vocab() const { return vocab_; }
  std::uint64_t event_vocab_size() const override {
    return vocab_.event_size();
  }

  // Every context observed at the top level, decoded to token strings.
  // Order 1 has a single empty context. Sorted for determinism.
  std::vector<std::vector<std::string>> observed_contexts() const {
    std::vector<std::vector<std::string>> out;
    if (order_ == 1) {
      out.push_back({});
      return out;
    }
    for (const auto& [key, st] : levels_[static_cast<std::size_t>(order_)].ctx) {
      std::vector<std::string> ctx;
      for (std::size_t i = 0; i + 4 <= key.size(); i += 4) {
        std::int32_t id;
        std::memcpy(&id, key.data() + i, 4);
        ctx.push_back(vocab_.tokens[static_cast<std::size_t>(id)]);
      }
      out.push_back(std::move(ctx));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  double prob_ids(std::span<const std::int32_t> context,
                  std::int32_t w) const {
    double p = unigram_[static_cast<std::size_t>(w)];
    for (int k = 2; k <= order_; ++k) {
      const LevelTable& lt = levels_[static_cast<std::size_t>(k)];
      const std::string ctx_key =
          detail::pack_ids(context.subspan(context.size() - (k - 1)));
      auto it = lt.ctx.find(ctx_key);
      if (it == lt.ctx.end() || it->second.total == 0) continue;
      const double den = static_cast<double>(it->second.total);
      std::string gram_key = ctx_key;
      detail::append_id(gram_key, w);
      auto git = lt.gram.find(gram_key);
      const double num =
          git == lt.gram.end() ? 0.0 : static_cast<double>(git->second);
      const double disc = num > discount_ ? (num - discount_) / den : 0.0;
      const double lambda =
          discount_ * static_cast<double>(it->second.distinct) / den;
      p = disc + lambda * p;
    }
    return p;
  }

  double token_prob(std::span<const std::string> context,
                    std::string_view token) const override {
    std::vector<std::int32_t> ctx(static_cast<std::size_t>(order_ - 1),
                                  Vocab::kBos);
    const std::size_t keep =
        std::min(context.size(), static_cast<std::size_t>(order_ - 1));
    for (std::size_t i = 0; i < keep; ++i) {
      ctx[ctx.size() - keep + i] =
          vocab_.id_of(context[context.size() - keep + i]);
    }
    return prob_ids(ctx, vocab_.id_of(token));
  }

  RecordScore score_record(
      const std::vector<std::string_view>& tokens) const override {
    RecordScore rs;
    std::vector<std::int32_t> ctx(static_cast<std::size_t>(order_ - 1),
                                  Vocab::kBos);
    auto step = [&](std::int32_t id, bool count_oov_miss) {
      const double p = prob_ids(ctx, id);
      if (p > 0.0) {
        rs.logprob += std::log(p);
      } else {
        rs.logprob = -std::numeric_limits<double>::infinity();
        ++rs.zero_prob;
      }
      ++rs.scored;
      if (count_oov_miss) ++rs.oov;
      if (!ctx.empty()) {
        ctx.erase(ctx.begin());
        ctx.push_back(id);
      }
    };
    for (std::string_view tok : tokens) {
      const std::int32_t id = vocab_.id_of(tok);
      step(id, id == Vocab::kUnk && !vocab_.contains(tok));
    }
    step(Vocab::kEos, false);
    return rs;
  }

 private:
  friend NgramModel train_ngram(const Corpus&, int, double, const Vocab&);

  int order_ = 0;
  double discount_ = 0.0;
  Vocab vocab_;
  std::vector<LevelTable> levels_;  // levels_[k] for k = 2..order
  std::vector<double> unigram_;     // continuation unigram by id
};

inline NgramModel train_ngram(const Corpus& corpus, int order, double discount,
                              const Vocab& vocab) {
  if (order < 1) throw ConfigError("ngram order must be >= 1");
  if (!(discount > 0.0 && discount < 1.0)) {
    throw ConfigError("discount must lie in (0,1)");
  }

  NgramModel m;
  m.order_ = order;
  m.discount_ = discount;
  m.vocab_ = vocab;

  const int kmax = order > 2 ? order : 2;
  // raw[k]: k-gram occurrence counts, k = 2..kmax.
  std::vector<
      std::unordered_map<std::string, std::uint64_t, StringHash, StringEq>>
      raw(static_cast<std::size_t>(kmax) + 1);

  std::vector<std::int32_t> stream;
  for (const auto& rec : corpus.records) {
    stream.clear();
    for (int i = 0; i < order - 1; ++i) stream.push_back(Vocab::kBos);
    for (std::string_view tok : ref_tokenize(rec.text)) {
      stream.push_back(vocab.id_of(tok));
    }
    stream.push_back(Vocab::kEos);
    for (int k = 2; k <= kmax; ++k) {
      const std::size_t ks = static_cast<std::size_t>(k);
      if (stream.size() < ks) continue;
      for (std::size_t i = 0; i + ks <= stream.size(); ++i) {
        if (stream[i + ks - 1] == Vocab::kBos) continue;
        std::string key = detail::pack_ids(
            std::span<const std::int32_t>(stream.data() + i, ks));
        ++raw[ks][std::move(key)];
      }
    }
  }

  m.levels_.resize(static_cast<std::size_t>(order) + 1);

  // Mid levels first (they read raw[k+1]), continuation counts: one per
  // distinct predecessor.
  for (int k = order - 1; k >= 2; --k) {
    auto& lt = m.levels_[static_cast<std::size_t>(k)];
    for (const auto& [key, cnt] : raw[static_cast<std::size_t>(k) + 1]) {
      lt.gram[key.substr(4)] += 1;
    }
    for (const auto& [key, cnt] : lt.gram) {
      const std::string ctx = key.substr(0, key.size() - 4);
      auto& st = lt.ctx[ctx];
      st.total += cnt;
      st.distinct += 1;
    }
  }

  // Continuation unigram over the bigram table.
  m.unigram_.assign(vocab.size(), 0.0);
  std::uint64_t den = 0;
  for (const auto& [key, cnt] : raw[2]) {
    std::int32_t last;
    std::memcpy(&last, key.data() + key.size() - 4, 4);
    m.unigram_[static_cast<std::size_t>(last)] += 1.0;
    ++den;
  }
  if (den > 0) {
    for (double& u : m.unigram_) u /= static_cast<double>(den);
  }

  if (order >= 2) {
    // Top level: raw counts.
    auto& top = m.levels_[static_cast<std::size_t>(order)];
    top.gram = std::move(raw[static_cast<std::size_t>(order)]);
    for (const auto& [key, cnt] : top.gram) {
      const std::string ctx = key.substr(0, key.size() - 4);
      auto& st = top.ctx[ctx];
      st.total += cnt;
      st.distinct += 1;
    }
  }
  return m;
}

// Assigns 1/V to every scored token; the PPL of any text over that
// vocabulary is exactly V. Exists so the perplexity definition itself is
// testable.
class UniformModel : public LanguageModel {
 public:
  explicit UniformModel(std::uint64_t vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size_ == 0) throw ConfigError("uniform model needs vocab > 0");
  }

  std::uint64_t event_vocab_size() const override { return vocab_size_; }

  double token_prob(std::span<const std::string>,
                    std::string_view) const override {
    return 1.0 / static_cast<double>(vocab_size_);
  }

  RecordScore score_record(
      const std::vector<std::string_view>& tokens) const override {
    RecordScore rs;
    rs.scored = tokens.size() + 1;  // + <eos>
    rs.logprob = -static_cast<double>(rs.scored) *
                 std::log(static_cast<double>(vocab_size_));
    return rs;
  }

 private:
  std::uint64_t vocab_size_;
};

struct PerplexityResult {
  double perplexity = 0.0;
  std::uint64_t scored_tokens = 0;
  std::uint64_t oov_tokens = 0;
  std::uint64_t zero_prob_tokens = 0;
  double oov_rate = 0.0;
};

inline PerplexityResult perplexity(const LanguageModel& model,
                                   const Corpus& test) {
  if (test.records.empty()) {
    throw DataError("perplexity: test corpus '" + test.corpus_id +
                    "' is empty");
  }
  double logprob = 0.0;
  PerplexityResult res;
  for (const auto& rec : test.records) {
    const RecordScore rs = model.score_record(ref_tokenize(rec.text));
    logprob += rs.logprob;
    res.scored_tokens += rs.scored;
    res.oov_tokens += rs.oov;
    res.zero_prob_tokens += rs.zero_prob;
  }
  if (res.scored_tokens == 0) {
    throw DataError("perplexity: no scorable tokens in '" + test.corpus_id +
                    "'");
  }
  res.oov_rate = static_cast<double>(res.oov_tokens) /
                 static_cast<double>(res.scored_tokens);
  res.perplexity =
      std::exp(-logprob / static_cast<double>(res.scored_tokens));
  return res;
}

}  // namespace clinsynth
