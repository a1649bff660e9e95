#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialfilter/corpus.hpp"

namespace dialfilter {

// Interpolated trigram language model over sequences of the form
//   [flattened context] BOS [response] EOS
// with MLE trigram/bigram components and an add-one unigram floor. When a
// history was never observed at some order, that order's weight cascades to
// the next lower order, so every conditional distribution sums to 1 and (with
// lambda1 > 0) every token has positive probability.
class NgramLm {
  public:
    NgramLm(double lambda3, double lambda2, double lambda1, std::size_t vocab_size)
        : l3_(lambda3), l2_(lambda2), l1_(lambda1), vocab_size_(vocab_size) {
        if (std::fabs(l3_ + l2_ + l1_ - 1.0) > 1e-9)
            throw std::runtime_error("NgramLm: interpolation weights must sum to 1");
        if (l3_ < 0 || l2_ < 0 || l1_ < 0)
            throw std::runtime_error("NgramLm: interpolation weights must be nonnegative");
        if (vocab_size_ >= (1u << 21))  // ids are packed into 21-bit fields
            throw std::runtime_error("NgramLm: vocabulary too large");
    }

    // Counts use only in-sequence predecessors: the i-th token contributes a
    // bigram when i >= 1 and a trigram when i >= 2.
    void add_sequence(const std::vector<int>& seq) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            int tok = seq[i];
            ++uni_[tok];
            ++uni_total_;
            if (i >= 1) {
                ++bi_[pack2(seq[i - 1], tok)];
                ++bi_total_[seq[i - 1]];
            }
            if (i >= 2) {
                ++tri_[pack3(seq[i - 2], seq[i - 1], tok)];
                ++tri_total_[pack2(seq[i - 2], seq[i - 1])];
            }
        }
    }

    // P(tok | prev2, prev)
    double cond_prob(int tok, int prev2, int prev) const {
        double w3 = 0.0, w2 = 0.0;
        double spill = l3_;
        auto t3 = tri_total_.find(pack2(prev2, prev));
        if (t3 != tri_total_.end()) {
            w3 = l3_;
            spill = 0.0;
        }
        auto t2 = bi_total_.find(prev);
        double spill2 = l2_ + spill;
        if (t2 != bi_total_.end()) {
            w2 = l2_ + spill;
            spill2 = 0.0;
        }
        double w1 = l1_ + spill2;

        double p = 0.0;
        if (w3 > 0.0) {
            auto it = tri_.find(pack3(prev2, prev, tok));
            if (it != tri_.end())
                p += w3 * static_cast<double>(it->second) / static_cast<double>(t3->second);
        }
        if (w2 > 0.0) {
            auto it = bi_.find(pack2(prev, tok));
            if (it != bi_.end())
                p += w2 * static_cast<double>(it->second) / static_cast<double>(t2->second);
        }
        if (w1 > 0.0) p += w1 * unigram_floor(tok);
        return p;
    }

    // add-one smoothed unigram: (count + 1) / (N + V)
    double unigram_floor(int tok) const {
        auto it = uni_.find(tok);
        long c = it == uni_.end() ? 0 : it->second;
        return static_cast<double>(c + 1) /
               static_cast<double>(uni_total_ + static_cast<long>(vocab_size_));
    }

    std::size_t vocab_size() const { return vocab_size_; }
    long total_tokens() const { return uni_total_; }
    double lambda1() const { return l1_; }

  private:
    static std::uint64_t pack2(int a, int b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b);
    }
    static std::uint64_t pack3(int a, int b, int c) {
        // vocab ids fit in 21 bits at desk scale
        return (static_cast<std::uint64_t>(a & 0x1FFFFF) << 42) |
               (static_cast<std::uint64_t>(b & 0x1FFFFF) << 21) |
               static_cast<std::uint64_t>(c & 0x1FFFFF);
    }

    double l3_, l2_, l1_;
    std::size_t vocab_size_;
    std::unordered_map<int, long> uni_;
    long uni_total_ = 0;
    std::unordered_map<std::uint64_t, long> bi_;
    std::unordered_map<int, long> bi_total_;
    std::unordered_map<std::uint64_t, long> tri_;
    std::unordered_map<std::uint64_t, long> tri_total_;
};

inline NgramLm train_ngram_lm(const Corpus& train, const Vocabulary& vocab,
                              double lambda3 = 0.6, double lambda2 = 0.3,
                              double lambda1 = 0.1) {
    if (train.empty()) throw std::runtime_error("train_ngram_lm: empty corpus");
    NgramLm lm(lambda3, lambda2, lambda1, vocab.size());
    for (const auto& s : train.samples) {
        std::vector<int> seq = map_tokens(flatten_context(s), vocab);
        seq.push_back(Vocabulary::kBos);
        for (int id : map_tokens(s.response, vocab)) seq.push_back(id);
        seq.push_back(Vocabulary::kEos);
        lm.add_sequence(seq);
    }
    return lm;
}

// Mean per-token natural-log probability of target given history. A BOS is
// inserted between history and target to mirror the training layout, so
// fluency scoring (empty history) sees the same BOS-prefixed responses the
// counts were collected from.
inline double lm_logprob(const NgramLm& lm, const Vocabulary& vocab, const TokenSeq& target,
                         const TokenSeq& history) {
    if (target.empty()) throw std::runtime_error("lm_logprob: empty target");
    std::vector<int> seq = map_tokens(history, vocab);
    seq.push_back(Vocabulary::kBos);
    std::size_t first_target = seq.size();
    for (int id : map_tokens(target, vocab)) seq.push_back(id);

    double sum = 0.0;
    for (std::size_t i = first_target; i < seq.size(); ++i) {
        int prev = i >= 1 ? seq[i - 1] : Vocabulary::kBos;
        int prev2 = i >= 2 ? seq[i - 2] : Vocabulary::kBos;
        double p = lm.cond_prob(seq[i], prev2, prev);
        if (p <= 0.0)
            throw std::runtime_error("lm_logprob: zero probability (unigram floor disabled?)");
        sum += std::log(p);
    }
    return sum / static_cast<double>(target.size());
}

// C5 / F5: nearest-rank percentile of a log-probability distribution.
struct PercentileBound {
    double value = 0.0;
    std::size_t sample_count = 0;
};

inline PercentileBound percentile_bound(std::vector<double> scores, double pct = 5.0) {
    if (scores.size() < 20)
        throw std::runtime_error("percentile_bound: need at least 20 scores, got " +
                                 std::to_string(scores.size()));
    if (pct <= 0.0 || pct > 100.0) throw std::runtime_error("percentile_bound: pct out of range");
    std::sort(scores.begin(), scores.end());
    std::size_t n = scores.size();
    auto rank = static_cast<std::size_t>(
        std::ceil(pct / 100.0 * static_cast<double>(n) - 1e-9));
    if (rank < 1) rank = 1;
    PercentileBound b;
    b.value = scores[rank - 1];
    b.sample_count = n;
    if (b.value >= -1e-9) throw std::runtime_error("degenerate percentile bound");
    return b;
}

// -(max(B, p) - B) / B, the Coherence/Fluency normalization. 0 at the bound,
// 1 at p = 0, linear in between.
inline double normalized_lm_score(double p, const PercentileBound& bound) {
    if (bound.value >= -1e-9) throw std::runtime_error("normalized_lm_score: invalid bound");
    double clipped = std::max(bound.value, p);
    return -(clipped - bound.value) / bound.value;
}

enum class ScoreKind { lm_conditional, lm_unconditional, nli_contra };

inline const char* score_kind_name(ScoreKind k) {
    switch (k) {
        case ScoreKind::lm_conditional: return "lm_conditional";
        case ScoreKind::lm_unconditional: return "lm_unconditional";
        case ScoreKind::nli_contra: return "nli_contra";
    }
    return "?";
}

// External per-sample scores (e.g. a fine-tuned LM's log-probs or an NLI
// model's contradiction probabilities), keyed by sample id.
struct ScoreTable {
    ScoreKind kind = ScoreKind::lm_conditional;
    std::unordered_map<std::string, double> scores;

    double at(const std::string& id) const {
        auto it = scores.find(id);
        if (it == scores.end())
            throw std::runtime_error(std::string("score table (") + score_kind_name(kind) +
                                     "): no entry for sample \"" + id + "\"");
        return it->second;
    }
};

// TSV: sample_id <TAB> score, no header.
inline ScoreTable load_score_table(const std::string& path, ScoreKind kind) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open score table: " + path);
    ScoreTable table;
    table.kind = kind;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected two TAB-separated columns");
        std::string id = line.substr(0, tab);
        double value;
        try {
            std::size_t pos = 0;
            value = std::stod(line.substr(tab + 1), &pos);
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": non-numeric score");
        }
        if (!std::isfinite(value))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": non-finite score");
        if (kind == ScoreKind::nli_contra && (value < 0.0 || value > 1.0))
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": nli_contra score outside [0,1]");
        if (!table.scores.emplace(id, value).second)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate id \"" + id + "\"");
    }
    return table;
}

}  // namespace dialfilter
