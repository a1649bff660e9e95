#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialfilter/corpus.hpp"

namespace dialfilter {

// Word-vector table. Out-of-table tokens contribute zero vectors.
struct EmbeddingTable {
    std::unordered_map<std::string, std::vector<double>> vectors;
    std::size_t dim = 0;

    const std::vector<double>* lookup(const std::string& tok) const {
        auto it = vectors.find(tok);
        return it == vectors.end() ? nullptr : &it->second;
    }
};

// Plain text, one token per line: "token f1 ... fd", no header.
inline EmbeddingTable load_embeddings(const std::string& path, std::size_t dim) {
    if (dim < 1) throw ConfigError("load_embeddings: dimension must be >= 1");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open embedding file: " + path);

    EmbeddingTable table;
    table.dim = dim;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        std::vector<double> vec;
        vec.reserve(dim);
        std::string field;
        while (ss >> field) {
            try {
                std::size_t pos = 0;
                double v = std::stod(field, &pos);
                if (pos != field.size()) throw std::invalid_argument(field);
                vec.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": non-numeric value \"" + field + "\"");
            }
        }
        if (vec.size() != dim)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(dim) + " values, got " + std::to_string(vec.size()));
        table.vectors.emplace(tok, std::move(vec));  // duplicate tokens keep the first
    }
    return table;
}

inline void write_embeddings(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embedding file: " + path);
    // deterministic order
    std::vector<std::string> toks;
    toks.reserve(table.vectors.size());
    for (const auto& [tok, _] : table.vectors) toks.push_back(tok);
    std::sort(toks.begin(), toks.end());
    for (const auto& tok : toks) {
        out << tok;
        for (double v : table.vectors.at(tok)) out << ' ' << fmt_g17(v);
        out << '\n';
    }
}

// Unigram MLE probabilities over the training split (context, response and
// next tokens all count).
struct UnigramStats {
    std::unordered_map<std::string, double> prob;
    long total = 0;

    double p(const std::string& tok) const {
        auto it = prob.find(tok);
        return it == prob.end() ? 0.0 : it->second;
    }
};

inline UnigramStats unigram_probs(const Corpus& train) {
    if (train.empty()) throw std::runtime_error("unigram_probs: empty corpus");
    std::unordered_map<std::string, long> counts;
    long total = 0;
    auto add = [&](const TokenSeq& toks) {
        for (const auto& t : toks) {
            ++counts[t];
            ++total;
        }
    };
    for (const auto& s : train.samples) {
        for (const auto& utt : s.context) add(utt);
        add(s.response);
        if (s.next) add(*s.next);
    }
    UnigramStats stats;
    stats.total = total;
    for (const auto& [tok, n] : counts)
        stats.prob[tok] = static_cast<double>(n) / static_cast<double>(total);
    return stats;
}

struct SentenceVector {
    std::vector<double> v;
    std::size_t token_count = 0;
};

// v(s) = (1/|s|) sum_w 0.001/(0.001 + p(w)) e(w)
inline SentenceVector sif_vector(const TokenSeq& tokens, const EmbeddingTable& table,
                                 const UnigramStats& stats) {
    if (tokens.empty()) throw std::runtime_error("sif_vector: empty token sequence");
    SentenceVector sv;
    sv.v.assign(table.dim, 0.0);
    sv.token_count = tokens.size();
    for (const auto& tok : tokens) {
        const auto* e = table.lookup(tok);
        if (!e) continue;
        double w = 0.001 / (0.001 + stats.p(tok));
        for (std::size_t d = 0; d < table.dim; ++d) sv.v[d] += w * (*e)[d];
    }
    double inv = 1.0 / static_cast<double>(tokens.size());
    for (double& x : sv.v) x *= inv;
    return sv;
}

// Zero-norm inputs read as unrelated (0), not as an error.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::runtime_error("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return dot / (na * nb);
}

inline double cosine(const SentenceVector& a, const SentenceVector& b) {
    return cosine(a.v, b.v);
}

inline double vec_norm(const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    return std::sqrt(n);
}

}  // namespace dialfilter
