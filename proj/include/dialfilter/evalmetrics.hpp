#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialfilter/embed.hpp"
#include "dialfilter/ncm.hpp"

namespace dialfilter {

namespace detail {

inline std::string ngram_key(const TokenSeq& toks, std::size_t start, std::size_t n) {
    std::string key;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) key += '\x1f';
        key += toks[start + i];
    }
    return key;
}

}  // namespace detail

// Corpus-level BLEU-4: clipped n-gram precisions with add-one smoothing for
// n >= 2 (p1 stays raw, so zero unigram overlap gives 0) and the usual
// brevity penalty.
inline double bleu(const std::vector<TokenSeq>& candidates,
                   const std::vector<TokenSeq>& references) {
    if (candidates.size() != references.size())
        throw std::runtime_error("bleu: candidate/reference count mismatch");
    if (candidates.empty()) throw std::runtime_error("bleu: no pairs");

    std::array<long, 4> match{}, total{};
    long cand_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const TokenSeq& c = candidates[i];
        const TokenSeq& r = references[i];
        cand_len += static_cast<long>(c.size());
        ref_len += static_cast<long>(r.size());
        for (std::size_t n = 1; n <= 4; ++n) {
            if (c.size() < n) continue;
            std::unordered_map<std::string, long> ref_counts;
            if (r.size() >= n)
                for (std::size_t k = 0; k + n <= r.size(); ++k)
                    ++ref_counts[detail::ngram_key(r, k, n)];
            std::unordered_map<std::string, long> cand_counts;
            for (std::size_t k = 0; k + n <= c.size(); ++k)
                ++cand_counts[detail::ngram_key(c, k, n)];
            for (const auto& [key, cnt] : cand_counts) {
                total[n - 1] += cnt;
                auto it = ref_counts.find(key);
                if (it != ref_counts.end()) match[n - 1] += std::min(cnt, it->second);
            }
        }
    }
    if (cand_len == 0 || total[0] == 0 || match[0] == 0) return 0.0;

    double log_prec = std::log(static_cast<double>(match[0]) / static_cast<double>(total[0]));
    for (int n = 2; n <= 4; ++n)
        log_prec += std::log(static_cast<double>(match[n - 1] + 1) /
                             static_cast<double>(total[n - 1] + 1));
    log_prec /= 4.0;
    double bp = cand_len >= ref_len
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return bp * std::exp(log_prec);
}

namespace detail {

inline void pooled_ngrams(const std::vector<TokenSeq>& responses, std::size_t n,
                          std::unordered_map<std::string, long>& counts, long& total) {
    for (const auto& r : responses) {
        if (r.size() < n) continue;
        for (std::size_t k = 0; k + n <= r.size(); ++k) {
            ++counts[ngram_key(r, k, n)];
            ++total;
        }
    }
}

inline void check_dist_pre(const std::vector<TokenSeq>& responses, std::size_t n) {
    if (n < 1 || n > 3) throw std::runtime_error("n must be 1, 2 or 3");
    if (responses.empty()) throw std::runtime_error("no responses");
}

}  // namespace detail

// Corpus-level distinct ratio: distinct n-grams / total n-grams over all
// responses pooled together.
inline double dist_n(const std::vector<TokenSeq>& responses, std::size_t n) {
    detail::check_dist_pre(responses, n);
    std::unordered_map<std::string, long> counts;
    long total = 0;
    detail::pooled_ngrams(responses, n, counts, total);
    if (total == 0) throw std::runtime_error("dist_n: no n-grams");
    return static_cast<double>(counts.size()) / static_cast<double>(total);
}

// Per-response distinct ratio, averaged over responses with >= 1 n-gram.
inline double intra_n(const std::vector<TokenSeq>& responses, std::size_t n) {
    detail::check_dist_pre(responses, n);
    double sum = 0.0;
    long scored = 0;
    for (const auto& r : responses) {
        if (r.size() < n) continue;
        std::unordered_map<std::string, long> counts;
        long total = 0;
        for (std::size_t k = 0; k + n <= r.size(); ++k) {
            ++counts[detail::ngram_key(r, k, n)];
            ++total;
        }
        sum += static_cast<double>(counts.size()) / static_cast<double>(total);
        ++scored;
    }
    if (scored == 0) throw std::runtime_error("intra_n: no n-grams");
    return sum / static_cast<double>(scored);
}

// Shannon entropy (natural log) of the pooled empirical n-gram distribution.
inline double ent_n(const std::vector<TokenSeq>& responses, std::size_t n) {
    detail::check_dist_pre(responses, n);
    std::unordered_map<std::string, long> counts;
    long total = 0;
    detail::pooled_ngrams(responses, n, counts, total);
    if (total == 0) throw std::runtime_error("ent_n: no n-grams");
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

namespace detail {

inline std::vector<double> word_vec(const EmbeddingTable& table, const std::string& tok) {
    const auto* v = table.lookup(tok);
    return v ? *v : std::vector<double>(table.dim, 0.0);
}

inline std::vector<double> mean_word_vec(const TokenSeq& toks, const EmbeddingTable& table) {
    std::vector<double> mean(table.dim, 0.0);
    for (const auto& t : toks) {
        const auto* v = table.lookup(t);
        if (!v) continue;
        for (std::size_t d = 0; d < table.dim; ++d) mean[d] += (*v)[d];
    }
    for (double& x : mean) x /= static_cast<double>(toks.size());
    return mean;
}

// per-dimension value of largest magnitude, sign preserved
inline std::vector<double> extrema_vec(const TokenSeq& toks, const EmbeddingTable& table) {
    std::vector<double> ext(table.dim, 0.0);
    for (const auto& t : toks) {
        std::vector<double> v = word_vec(table, t);
        for (std::size_t d = 0; d < table.dim; ++d)
            if (std::fabs(v[d]) > std::fabs(ext[d])) ext[d] = v[d];
    }
    return ext;
}

inline double greedy_direction(const TokenSeq& from, const TokenSeq& to,
                               const EmbeddingTable& table) {
    double sum = 0.0;
    for (const auto& ft : from) {
        std::vector<double> fv = word_vec(table, ft);
        double best = -1.0;
        for (const auto& tt : to) best = std::max(best, cosine(fv, word_vec(table, tt)));
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

}  // namespace detail

inline double emb_average(const TokenSeq& candidate, const TokenSeq& reference,
                          const EmbeddingTable& table) {
    if (candidate.empty() || reference.empty())
        throw std::runtime_error("emb_average: empty utterance");
    return cosine(detail::mean_word_vec(candidate, table),
                  detail::mean_word_vec(reference, table));
}

inline double emb_greedy(const TokenSeq& candidate, const TokenSeq& reference,
                         const EmbeddingTable& table) {
    if (candidate.empty() || reference.empty())
        throw std::runtime_error("emb_greedy: empty utterance");
    return 0.5 * (detail::greedy_direction(candidate, reference, table) +
                  detail::greedy_direction(reference, candidate, table));
}

inline double emb_extrema(const TokenSeq& candidate, const TokenSeq& reference,
                          const EmbeddingTable& table) {
    if (candidate.empty() || reference.empty())
        throw std::runtime_error("emb_extrema: empty utterance");
    return cosine(detail::extrema_vec(candidate, table), detail::extrema_vec(reference, table));
}

// Same computation as the Relatedness attribute, applied to the generated
// response.
inline double coherence_metric(const TokenSeq& context, const TokenSeq& generated,
                               const EmbeddingTable& table, const UnigramStats& stats) {
    if (context.empty() || generated.empty())
        throw std::runtime_error("coherence_metric: empty utterance");
    return cosine(sif_vector(context, table, stats), sif_vector(generated, table, stats));
}

// The 13 values whose sum forms the "-metric" objective.
struct MetricReport {
    double bleu_score = 0.0;
    double dist1 = 0.0, dist2 = 0.0, dist3 = 0.0;
    double intra1 = 0.0, intra2 = 0.0, intra3 = 0.0;
    double ent1 = 0.0, ent2 = 0.0;
    double average = 0.0, greedy = 0.0, extrema = 0.0;
    double coherence = 0.0;
    std::size_t pairs_total = 0;
    std::size_t pairs_scored = 0;  // pairs whose decoded response was non-empty

    double sum13() const {
        return bleu_score + dist1 + dist2 + dist3 + intra1 + intra2 + intra3 + ent1 + ent2 +
               average + greedy + extrema + coherence;
    }

    std::vector<std::pair<std::string, double>> named() const {
        return {{"bleu", bleu_score}, {"dist1", dist1},     {"dist2", dist2},
                {"dist3", dist3},     {"intra1", intra1},   {"intra2", intra2},
                {"intra3", intra3},   {"ent1", ent1},       {"ent2", ent2},
                {"average", average}, {"greedy", greedy},   {"extrema", extrema},
                {"coherence", coherence}};
    }
};

struct Objective {
    enum class Kind { plus_ppl, neg_metric_sum };
    Kind kind = Kind::plus_ppl;
};

inline const char* objective_name(Objective::Kind k) {
    return k == Objective::Kind::plus_ppl ? "+ppl" : "-metric";
}

inline Objective::Kind parse_objective(const std::string& name) {
    if (name == "+ppl" || name == "plus_ppl") return Objective::Kind::plus_ppl;
    if (name == "-metric" || name == "neg_metric_sum") return Objective::Kind::neg_metric_sum;
    throw ConfigError("unknown objective \"" + name + "\" (expected \"+ppl\" or \"-metric\")");
}

// Greedy-decodes one response per validation context and computes all 13
// metrics. Pairs whose decode came out empty are skipped by the per-pair
// metrics and by the diversity pools; BLEU sees them as zero-length
// candidates.
inline MetricReport evaluate_metrics(const ModelParams& model, const Corpus& validation,
                                     const EmbeddingTable& table, const UnigramStats& stats,
                                     std::size_t max_len = 20) {
    if (validation.empty()) throw std::runtime_error("evaluate_metrics: empty validation corpus");

    std::vector<TokenSeq> decoded, references;
    decoded.reserve(validation.size());
    references.reserve(validation.size());
    for (const auto& s : validation.samples) {
        decoded.push_back(greedy_decode(model, s.context, max_len));
        references.push_back(s.response);
    }

    MetricReport rep;
    rep.pairs_total = validation.size();
    rep.bleu_score = bleu(decoded, references);

    std::vector<TokenSeq> non_empty;
    for (const auto& d : decoded)
        if (!d.empty()) non_empty.push_back(d);
    if (non_empty.empty())
        throw std::runtime_error("evaluate_metrics: every decoded response is empty");
    rep.dist1 = dist_n(non_empty, 1);
    rep.dist2 = dist_n(non_empty, 2);
    rep.dist3 = dist_n(non_empty, 3);
    rep.intra1 = intra_n(non_empty, 1);
    rep.intra2 = intra_n(non_empty, 2);
    rep.intra3 = intra_n(non_empty, 3);
    rep.ent1 = ent_n(non_empty, 1);
    rep.ent2 = ent_n(non_empty, 2);

    for (std::size_t i = 0; i < decoded.size(); ++i) {
        if (decoded[i].empty()) continue;
        rep.average += emb_average(decoded[i], references[i], table);
        rep.greedy += emb_greedy(decoded[i], references[i], table);
        rep.extrema += emb_extrema(decoded[i], references[i], table);
        rep.coherence += coherence_metric(flatten_context(validation.samples[i]), decoded[i],
                                          table, stats);
        ++rep.pairs_scored;
    }
    if (rep.pairs_scored > 0) {
        double inv = 1.0 / static_cast<double>(rep.pairs_scored);
        rep.average *= inv;
        rep.greedy *= inv;
        rep.extrema *= inv;
        rep.coherence *= inv;
    }
    return rep;
}

// "+ppl" is validation perplexity; "-metric" is the negated 13-metric sum
// (BayesOpt minimizes, the metrics want to be large).
inline double evaluate_objective(Objective::Kind kind, const ModelParams& model,
                                 const Corpus& validation, const EmbeddingTable& table,
                                 const UnigramStats& stats) {
    if (kind == Objective::Kind::plus_ppl) return perplexity(model, validation);
    return -evaluate_metrics(model, validation, table, stats).sum13();
}

// TSV, one row per metric plus perplexity and the composite J.
inline void write_metric_report(const MetricReport& rep, double ppl, double j,
                                Objective::Kind kind, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metric report: " + path);
    out << "# objective: " << objective_name(kind) << '\n';
    out << "# pairs: " << rep.pairs_total << "\tscored: " << rep.pairs_scored << '\n';
    out << "metric\tvalue\n";
    for (const auto& [name, value] : rep.named()) out << name << '\t' << fmt_f6(value) << '\n';
    out << "metric_sum\t" << fmt_f6(rep.sum13()) << '\n';
    out << "perplexity\t" << fmt_f6(ppl) << '\n';
    out << "J\t" << fmt_f6(j) << '\n';
}

}  // namespace dialfilter
