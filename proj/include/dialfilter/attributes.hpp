#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dialfilter/embed.hpp"
#include "dialfilter/seqscore.hpp"

namespace dialfilter {

constexpr int kNumAttributes = 7;
inline constexpr std::array<const char*, kNumAttributes> kAttributeNames = {
    "spec", "rept", "rel", "cont", "coh", "flu", "cons"};

using AttrArray = std::array<double, kNumAttributes>;

// IDF(w) = log(N_r / N_rw) over the responses of the training split.
struct IdfTable {
    std::unordered_map<std::string, double> idf;
    double idf_min = 0.0;
    double idf_max = 0.0;
    long n_responses = 0;

    // unseen words are maximally rare
    double at(const std::string& tok) const {
        auto it = idf.find(tok);
        return it == idf.end() ? idf_max : it->second;
    }
};

inline IdfTable build_idf(const Corpus& train) {
    if (train.empty()) throw std::runtime_error("build_idf: empty corpus");
    std::unordered_map<std::string, long> doc_freq;
    for (const auto& s : train.samples) {
        std::unordered_set<std::string> seen(s.response.begin(), s.response.end());
        for (const auto& tok : seen) ++doc_freq[tok];
    }
    IdfTable t;
    t.n_responses = static_cast<long>(train.size());
    t.idf_min = std::numeric_limits<double>::infinity();
    t.idf_max = -std::numeric_limits<double>::infinity();
    for (const auto& [tok, nrw] : doc_freq) {
        double v = std::log(static_cast<double>(t.n_responses) / static_cast<double>(nrw));
        t.idf[tok] = v;
        t.idf_min = std::min(t.idf_min, v);
        t.idf_max = std::max(t.idf_max, v);
    }
    return t;
}

// Spec(r): mean normalized IDF of the response tokens.
inline double specificity(const TokenSeq& r, const IdfTable& idf) {
    if (r.empty()) throw std::runtime_error("specificity: empty response");
    double range = idf.idf_max - idf.idf_min;
    if (range < 1e-12) throw std::runtime_error("degenerate IDF table");
    double sum = 0.0;
    for (const auto& tok : r) sum += (idf.at(tok) - idf.idf_min) / range;
    return sum / static_cast<double>(r.size());
}

// Rept(r): fraction of tokens already seen earlier in the response.
inline double repetitiveness(const TokenSeq& r) {
    if (r.empty()) throw std::runtime_error("repetitiveness: empty response");
    std::unordered_set<std::string> seen;
    long repeats = 0;
    for (const auto& tok : r) {
        if (!seen.insert(tok).second) ++repeats;
    }
    return static_cast<double>(repeats) / static_cast<double>(r.size());
}

namespace detail {

inline double sif_cosine(const TokenSeq& a, const TokenSeq& b, const EmbeddingTable& table,
                         const UnigramStats& stats, bool* zeroed = nullptr) {
    SentenceVector va = sif_vector(a, table, stats);
    SentenceVector vb = sif_vector(b, table, stats);
    if (zeroed) *zeroed = vec_norm(va.v) < 1e-12 || vec_norm(vb.v) < 1e-12;
    return cosine(va, vb);
}

}  // namespace detail

// Rel(c, r): cosine of the SIF vectors of context and response.
inline double relatedness(const Sample& s, const EmbeddingTable& table,
                          const UnigramStats& stats) {
    return detail::sif_cosine(flatten_context(s), s.response, table, stats);
}

// Cont(r, u): same computation against the subsequent utterance.
inline double continuity(const Sample& s, const EmbeddingTable& table,
                         const UnigramStats& stats) {
    if (!s.next)
        throw std::runtime_error("continuity: sample \"" + s.id + "\" has no next utterance");
    return detail::sif_cosine(s.response, *s.next, table, stats);
}

// Coh(c, r): percentile-normalized conditional log-probability.
inline double coherence(const Sample& s, const NgramLm& lm, const Vocabulary& vocab,
                        const PercentileBound& c5) {
    return normalized_lm_score(lm_logprob(lm, vocab, s.response, flatten_context(s)), c5);
}

// Flu(r): same with empty history.
inline double fluency(const Sample& s, const NgramLm& lm, const Vocabulary& vocab,
                      const PercentileBound& f5) {
    return normalized_lm_score(lm_logprob(lm, vocab, s.response, {}), f5);
}

// Cons(c, r) = 1 - P_R("Contra" | c, r)
inline double consistency(const Sample& s, const ScoreTable& nli) {
    if (nli.kind != ScoreKind::nli_contra)
        throw std::runtime_error("consistency: score table kind is not nli_contra");
    return 1.0 - nli.at(s.id);
}

struct StandardizationStats {
    AttrArray mean{};
    AttrArray stddev{};
    std::array<bool, kNumAttributes> degenerate{};
};

struct AttributeVector {
    std::string id;
    AttrArray phi{};
};

struct PhiTable {
    std::vector<std::string> ids;               // corpus order
    std::vector<AttrArray> raw;
    std::vector<AttrArray> standardized;        // phi, (x - mean) / std per column
    StandardizationStats stats;
    std::vector<std::string> sample_flags;      // "-" when clean
};

// Everything the seven attributes need. When lm_cond / lm_uncond tables are
// present they override the built-in n-gram LM as the P_G backend.
struct AttributeBackends {
    const IdfTable* idf = nullptr;
    const EmbeddingTable* emb = nullptr;
    const UnigramStats* unigrams = nullptr;
    const NgramLm* lm = nullptr;
    const Vocabulary* vocab = nullptr;
    const ScoreTable* lm_cond = nullptr;
    const ScoreTable* lm_uncond = nullptr;
    PercentileBound c5, f5;
    const ScoreTable* nli = nullptr;
    bool pin_consistency = false;  // Cons := 1.0 when no NLI table
    bool neutral_next = false;     // Cont := 0 when next is missing

    double cond_logprob(const Sample& s) const {
        if (lm_cond) return lm_cond->at(s.id);
        return lm_logprob(*lm, *vocab, s.response, flatten_context(s));
    }
    double uncond_logprob(const Sample& s) const {
        if (lm_uncond) return lm_uncond->at(s.id);
        return lm_logprob(*lm, *vocab, s.response, {});
    }
};

// Raw attributes for every sample, then per-attribute z-scoring. Stats are
// computed here when absent (training split) and reused when provided
// (scoring another split with training statistics). Degenerate columns
// (std < 1e-12) standardize to 0 and are flagged.
inline PhiTable compute_phi(const Corpus& corpus, const AttributeBackends& b,
                            const std::optional<StandardizationStats>& given_stats = {}) {
    if (corpus.empty()) throw std::runtime_error("compute_phi: empty corpus");
    if (!b.idf || !b.emb || !b.unigrams)
        throw std::runtime_error("compute_phi: backends not initialized");
    if (!b.lm && !(b.lm_cond && b.lm_uncond))
        throw std::runtime_error("compute_phi: no LM backend");
    if (!b.nli && !b.pin_consistency)
        throw std::runtime_error(
            "compute_phi: no NLI score table; pass one or enable pin_consistency");

    PhiTable table;
    table.ids.reserve(corpus.size());
    table.raw.reserve(corpus.size());
    for (const auto& s : corpus.samples) {
        AttrArray a{};
        std::string flags;
        auto add_flag = [&](const char* f) {
            if (!flags.empty()) flags += ';';
            flags += f;
        };
        try {
            a[0] = specificity(s.response, *b.idf);
            a[1] = repetitiveness(s.response);
            bool zeroed = false;
            a[2] = detail::sif_cosine(flatten_context(s), s.response, *b.emb, *b.unigrams,
                                      &zeroed);
            if (zeroed) add_flag("zero_rel_vec");
            if (s.next) {
                a[3] = detail::sif_cosine(s.response, *s.next, *b.emb, *b.unigrams, &zeroed);
                if (zeroed) add_flag("zero_cont_vec");
            } else if (b.neutral_next) {
                a[3] = 0.0;
                add_flag("neutral_next");
            } else {
                throw std::runtime_error("no next utterance (use neutral_next to fill)");
            }
            a[4] = normalized_lm_score(b.cond_logprob(s), b.c5);
            a[5] = normalized_lm_score(b.uncond_logprob(s), b.f5);
            if (b.nli) {
                a[6] = consistency(s, *b.nli);
            } else {
                a[6] = 1.0;
                add_flag("pinned_cons");
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("compute_phi: sample \"" + s.id + "\": " + e.what());
        }
        table.ids.push_back(s.id);
        table.raw.push_back(a);
        table.sample_flags.push_back(flags.empty() ? "-" : flags);
    }

    if (given_stats) {
        table.stats = *given_stats;
    } else {
        std::size_t n = table.raw.size();
        for (int k = 0; k < kNumAttributes; ++k) {
            double mean = 0.0;
            for (const auto& a : table.raw) mean += a[k];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (const auto& a : table.raw) var += (a[k] - mean) * (a[k] - mean);
            var /= static_cast<double>(n);
            table.stats.mean[k] = mean;
            table.stats.stddev[k] = std::sqrt(var);
            table.stats.degenerate[k] = table.stats.stddev[k] < 1e-12;
        }
    }

    table.standardized.reserve(table.raw.size());
    for (const auto& a : table.raw) {
        AttrArray z{};
        for (int k = 0; k < kNumAttributes; ++k)
            z[k] = table.stats.degenerate[k] ? 0.0 : (a[k] - table.stats.mean[k]) / table.stats.stddev[k];
        table.standardized.push_back(z);
    }
    return table;
}

// Kendall tau-b with tie correction, O(n^2) pair enumeration.
inline double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::runtime_error("kendall_tau: length mismatch");
    std::size_t n = a.size();
    if (n < 2) throw std::runtime_error("kendall_tau: need at least 2 points");
    long long num = 0, ties_a = 0, ties_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double da = a[i] - a[j];
            double db = b[i] - b[j];
            if (da == 0.0) ++ties_a;
            if (db == 0.0) ++ties_b;
            int sa = (da > 0.0) - (da < 0.0);
            int sb = (db > 0.0) - (db < 0.0);
            num += sa * sb;
        }
    }
    long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    if (ties_a == n0 || ties_b == n0) throw std::runtime_error("undefined correlation");
    double denom = std::sqrt(static_cast<double>(n0 - ties_a) * static_cast<double>(n0 - ties_b));
    return static_cast<double>(num) / denom;
}

// TSV report: id, 7 raw columns, 7 standardized columns, flags. Header
// comments record the normalization provenance.
inline void write_attribute_report(const PhiTable& table, const std::string& path,
                                   const std::vector<std::string>& header_notes = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write attribute report: " + path);
    for (const auto& note : header_notes) out << "# " << note << '\n';
    std::string degen;
    for (int k = 0; k < kNumAttributes; ++k)
        if (table.stats.degenerate[k]) {
            if (!degen.empty()) degen += ',';
            degen += kAttributeNames[k];
        }
    out << "# degenerate_attributes: " << (degen.empty() ? "none" : degen) << '\n';
    out << "id";
    for (const auto* name : kAttributeNames) out << '\t' << name << "_raw";
    for (const auto* name : kAttributeNames) out << '\t' << name << "_std";
    out << "\tflags\n";
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        out << table.ids[i];
        for (int k = 0; k < kNumAttributes; ++k) out << '\t' << fmt_g17(table.raw[i][k]);
        for (int k = 0; k < kNumAttributes; ++k) out << '\t' << fmt_g17(table.standardized[i][k]);
        out << '\t' << table.sample_flags[i] << '\n';
    }
}

}  // namespace dialfilter
