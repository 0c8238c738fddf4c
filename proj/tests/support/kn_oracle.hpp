#pragma once

// Brute-force interpolated Kneser-Ney reference, independent of the library
// implementation. It keeps only raw k-gram occurrence tables (string-token
// keys) and derives every aggregate -- context totals, distinct-successor
// counts, continuation counts -- by scanning those tables. Slow on purpose;
// used to pin down the production model on small corpora.
//
// Definition implemented here (and, separately, by clinsynth::NgramModel):
//   - each record is framed as (order-1) <bos> tokens + tokens + <eos>,
//     with out-of-vocabulary tokens replaced by <unk> first;
//   - k-gram tables (k = 1..max(order,2)) count every k-window of the
//     framed stream whose last token is not <bos>;
//   - top level:   P_n(w|c) = max(c(cw)-D,0)/c(c.) + D*N1+(c.)/c(c.) * P_{n-1}
//   - mid levels:  same shape over continuation counts
//                  N1+(.cw) = |{u : c_{k+1}(u c w) > 0}|
//   - unigram:     P_1(w) = N1+(.w)/N1+(..) over the bigram table;
//   - a level whose denominator is zero passes through to the next level
//     with weight 1.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace kn_oracle {

using Token = std::string;
using Gram = std::vector<Token>;

inline const Token kUnk = "<unk>";
inline const Token kBos = "<bos>";
inline const Token kEos = "<eos>";

class Oracle {
 public:
  Oracle(const std::vector<std::vector<Token>>& records, int order,
         double discount, const std::set<Token>& vocab)
      : order_(order), discount_(discount), vocab_(vocab) {
    vocab_.insert(kUnk);
    vocab_.insert(kEos);
    const int kmax = order_ > 2 ? order_ : 2;
    counts_.resize(static_cast<std::size_t>(kmax) + 1);
    for (const auto& rec : records) {
      std::vector<Token> stream;
      for (int i = 0; i < order_ - 1; ++i) stream.push_back(kBos);
      for (const auto& t : rec) stream.push_back(map_token(t));
      stream.push_back(kEos);
      for (int k = 1; k <= kmax; ++k) {
        for (std::size_t i = 0; i + k <= stream.size(); ++i) {
          if (stream[i + k - 1] == kBos) continue;
          Gram g(stream.begin() + i, stream.begin() + i + k);
          counts_[k][g] += 1;
        }
      }
    }
  }

  // `context` holds the raw preceding tokens, oldest first; any length is
  // accepted (padded with <bos> / truncated on the left to order-1).
  double prob(const std::vector<Token>& context, const Token& token) const {
    Gram ctx;
    for (const auto& t : context) ctx.push_back(map_token(t));
    while (static_cast<int>(ctx.size()) < order_ - 1)
      ctx.insert(ctx.begin(), kBos);
    while (static_cast<int>(ctx.size()) > order_ - 1) ctx.erase(ctx.begin());
    return prob_level(order_, ctx, map_token(token));
  }

  // Event space: every vocab token except <bos>.
  std::vector<Token> event_tokens() const {
    std::vector<Token> out;
    for (const auto& t : vocab_)
      if (t != kBos) out.push_back(t);
    return out;
  }

 private:
  Token map_token(const Token& t) const {
    if (t == kBos || t == kEos) return t;
    return vocab_.count(t) ? t : kUnk;
  }

  static Gram drop_oldest(const Gram& g) {
    return Gram(g.begin() + 1, g.end());
  }

  long long raw_count(int k, const Gram& g) const {
    auto it = counts_[k].find(g);
    return it == counts_[k].end() ? 0 : it->second;
  }

  // Sum of counts over every k-gram extending `ctx` by one token.
  long long context_total(int k, const Gram& ctx) const {
    long long total = 0;
    for (const auto& [g, c] : counts_[k]) {
      if (has_prefix(g, ctx)) total += c;
    }
    return total;
  }

  long long distinct_successors(int k, const Gram& ctx) const {
    long long n = 0;
    for (const auto& [g, c] : counts_[k]) {
      if (has_prefix(g, ctx)) ++n;
    }
    return n;
  }

  // N1+(. g) at level k: distinct predecessors of the length-k gram g in
  // the (k+1)-gram table.
  long long continuation_count(int level_k, const Gram& g) const {
    long long n = 0;
    for (const auto& [big, c] : counts_[level_k + 1]) {
      if (has_suffix(big, g)) ++n;
    }
    return n;
  }

  // N1+(. ctx .) at level k: number of distinct (k+1)-grams whose middle
  // k-1 tokens equal ctx, i.e. sum over w of N1+(. ctx w).
  long long continuation_denominator(int level_k, const Gram& ctx) const {
    long long n = 0;
    for (const auto& [big, c] : counts_[level_k + 1]) {
      if (middle_matches(big, ctx)) ++n;
    }
    return n;
  }

  long long continuation_successors(int level_k, const Gram& ctx) const {
    std::set<Token> succ;
    for (const auto& [big, c] : counts_[level_k + 1]) {
      if (middle_matches(big, ctx)) succ.insert(big.back());
    }
    return static_cast<long long>(succ.size());
  }

  static bool has_prefix(const Gram& g, const Gram& prefix) {
    if (g.size() != prefix.size() + 1) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
      if (g[i] != prefix[i]) return false;
    return true;
  }

  static bool has_suffix(const Gram& g, const Gram& suffix) {
    if (g.size() != suffix.size() + 1) return false;
    for (std::size_t i = 0; i < suffix.size(); ++i)
      if (g[i + 1] != suffix[i]) return false;
    return true;
  }

  static bool middle_matches(const Gram& big, const Gram& ctx) {
    // big has length ctx.size()+2: (u, ctx..., w)
    if (big.size() != ctx.size() + 2) return false;
    for (std::size_t i = 0; i < ctx.size(); ++i)
      if (big[i + 1] != ctx[i]) return false;
    return true;
  }

  double unigram(const Token& w) const {
    if (w == kBos) return 0.0;
    long long den = 0;
    long long num = 0;
    for (const auto& [g, c] : counts_[2]) {
      ++den;
      if (g.back() == w) ++num;
    }
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  }

  double prob_level(int k, const Gram& ctx, const Token& w) const {
    if (k == 1) return unigram(w);
    if (k == order_) {
      const long long den = context_total(k, ctx);
      if (den > 0) {
        const double num = static_cast<double>(raw_count(k, append(ctx, w)));
        const double disc = num - discount_ > 0.0 ? num - discount_ : 0.0;
        const double lambda =
            discount_ * static_cast<double>(distinct_successors(k, ctx)) /
            static_cast<double>(den);
        return disc / static_cast<double>(den) +
               lambda * prob_level(k - 1, drop_oldest(ctx), w);
      }
      return prob_level(k - 1, drop_oldest(ctx), w);
    }
    // Mid level: continuation counts.
    const long long den = continuation_denominator(k, ctx);
    if (den > 0) {
      const double num =
          static_cast<double>(continuation_count(k, append(ctx, w)));
      const double disc = num - discount_ > 0.0 ? num - discount_ : 0.0;
      const double lambda =
          discount_ * static_cast<double>(continuation_successors(k, ctx)) /
          static_cast<double>(den);
      return disc / static_cast<double>(den) +
             lambda * prob_level(k - 1, drop_oldest(ctx), w);
    }
    return prob_level(k - 1, drop_oldest(ctx), w);
  }

  static Gram append(const Gram& ctx, const Token& w) {
    Gram g = ctx;
    g.push_back(w);
    return g;
  }

  int order_;
  double discount_;
  std::set<Token> vocab_;
  std::vector<std::map<Gram, long long>> counts_;
};

}  // namespace kn_oracle
