#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialfilter/corpus.hpp"

namespace dialfilter {

// Conditional response model: mean-pooled context embedding h_c, mean-pooled
// history embedding h_t (BOS + response prefix), and a single linear softmax
// layer over [h_c; h_t]. Small enough for exact manual gradients.
struct ModelParams {
    std::shared_ptr<const Vocabulary> vocab;
    std::size_t dim = 32;
    std::vector<double> emb;    // V x d
    std::vector<double> out_w;  // V x 2d
    std::vector<double> out_b;  // V
    std::uint64_t seed = 0;

    std::size_t vocab_size() const { return vocab->size(); }
};

struct TrainConfig {
    double alpha = 0.1;  // learning rate
    double clip = 1.0;   // NEG gradient-norm clip
    int epochs = 10;
    int patience = 3;    // early stop on validation perplexity; <= 0 disables
    std::uint64_t seed = 0;

    void validate() const {
        if (alpha <= 0.0) throw std::runtime_error("TrainConfig: alpha must be positive");
        if (clip <= 0.0) throw std::runtime_error("TrainConfig: clip must be positive");
        if (epochs < 0) throw std::runtime_error("TrainConfig: epochs must be >= 0");
    }
};

inline ModelParams init_params(std::shared_ptr<const Vocabulary> vocab, std::size_t dim,
                               std::uint64_t seed) {
    if (!vocab) throw std::runtime_error("init_params: null vocabulary");
    if (dim < 1) throw std::runtime_error("init_params: dim must be >= 1");
    ModelParams p;
    p.vocab = std::move(vocab);
    p.dim = dim;
    p.seed = seed;
    std::size_t v = p.vocab->size();
    Rng rng(seed);
    p.emb.resize(v * dim);
    for (double& x : p.emb) x = 0.1 * rng.normal();
    p.out_w.assign(v * 2 * dim, 0.0);
    p.out_b.assign(v, 0.0);
    return p;
}

namespace detail {

struct EncodedSample {
    std::vector<int> context;  // flattened
    std::vector<int> targets;  // response tokens + EOS
};

inline EncodedSample encode(const ModelParams& p, const Sample& s) {
    if (s.response.empty()) throw std::runtime_error("ncm: empty response");
    EncodedSample e;
    e.context = map_tokens(flatten_context(s), *p.vocab);
    if (e.context.empty()) throw std::runtime_error("ncm: empty context");
    e.targets = map_tokens(s.response, *p.vocab);
    e.targets.push_back(Vocabulary::kEos);
    return e;
}

inline std::vector<double> mean_embedding(const ModelParams& p, const std::vector<int>& ids) {
    std::vector<double> h(p.dim, 0.0);
    for (int id : ids)
        for (std::size_t j = 0; j < p.dim; ++j) h[j] += p.emb[id * p.dim + j];
    double inv = 1.0 / static_cast<double>(ids.size());
    for (double& x : h) x *= inv;
    return h;
}

// logits = W [h_c; h_t] + b
inline void logits_at(const ModelParams& p, const std::vector<double>& hc,
                      const std::vector<double>& ht, std::vector<double>& logits) {
    std::size_t v = p.vocab_size(), d = p.dim;
    logits.assign(v, 0.0);
    for (std::size_t i = 0; i < v; ++i) {
        const double* w = &p.out_w[i * 2 * d];
        double sum = p.out_b[i];
        for (std::size_t j = 0; j < d; ++j) sum += w[j] * hc[j];
        for (std::size_t j = 0; j < d; ++j) sum += w[d + j] * ht[j];
        logits[i] = sum;
    }
}

inline double log_sum_exp(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    return mx + std::log(sum);
}

}  // namespace detail

// Per-target-token log-probabilities: log P(r_t | r_<t, c) for each response
// token and the closing EOS.
inline std::vector<double> forward_logprob(const ModelParams& p, const Sample& s) {
    detail::EncodedSample e = detail::encode(p, s);
    std::vector<double> hc = detail::mean_embedding(p, e.context);

    std::vector<double> out;
    out.reserve(e.targets.size());
    std::vector<int> history{Vocabulary::kBos};
    std::vector<double> logits;
    for (std::size_t t = 0; t < e.targets.size(); ++t) {
        std::vector<double> ht = detail::mean_embedding(p, history);
        detail::logits_at(p, hc, ht, logits);
        double lse = detail::log_sum_exp(logits);
        out.push_back(logits[e.targets[t]] - lse);
        if (t + 1 < e.targets.size()) history.push_back(e.targets[t]);
    }
    return out;
}

inline double sample_logprob(const ModelParams& p, const Sample& s) {
    std::vector<double> lp = forward_logprob(p, s);
    double sum = 0.0;
    for (double x : lp) sum += x;
    return sum / static_cast<double>(lp.size());
}

inline double sample_nll(const ModelParams& p, const Sample& s) { return -sample_logprob(p, s); }

struct Gradients {
    std::vector<double> emb;
    std::vector<double> out_w;
    std::vector<double> out_b;

    double norm() const {
        double n = 0.0;
        for (double x : emb) n += x * x;
        for (double x : out_w) n += x * x;
        for (double x : out_b) n += x * x;
        return std::sqrt(n);
    }

    void scale(double f) {
        for (double& x : emb) x *= f;
        for (double& x : out_w) x *= f;
        for (double& x : out_b) x *= f;
    }
};

// Analytic gradient of the mean token log-likelihood with respect to every
// parameter. Softmax cross-entropy through the linear layer, then through
// the two mean-pooled embedding inputs.
inline Gradients grad(const ModelParams& p, const Sample& s) {
    detail::EncodedSample e = detail::encode(p, s);
    std::size_t v = p.vocab_size(), d = p.dim;
    std::vector<double> hc = detail::mean_embedding(p, e.context);

    Gradients g;
    g.emb.assign(v * d, 0.0);
    g.out_w.assign(v * 2 * d, 0.0);
    g.out_b.assign(v, 0.0);

    double inv_steps = 1.0 / static_cast<double>(e.targets.size());
    std::vector<double> dhc(d, 0.0);
    std::vector<int> history{Vocabulary::kBos};
    std::vector<double> logits, probs(v), ht, dht(d);
    for (std::size_t t = 0; t < e.targets.size(); ++t) {
        ht = detail::mean_embedding(p, history);
        detail::logits_at(p, hc, ht, logits);
        double lse = detail::log_sum_exp(logits);
        for (std::size_t i = 0; i < v; ++i) probs[i] = std::exp(logits[i] - lse);

        std::fill(dht.begin(), dht.end(), 0.0);
        for (std::size_t i = 0; i < v; ++i) {
            // d(mean loglik)/d(logit_i) = ([i == y_t] - p_i) / T
            double gi = ((static_cast<int>(i) == e.targets[t]) ? 1.0 : 0.0) - probs[i];
            gi *= inv_steps;
            g.out_b[i] += gi;
            double* gw = &g.out_w[i * 2 * d];
            const double* w = &p.out_w[i * 2 * d];
            for (std::size_t j = 0; j < d; ++j) {
                gw[j] += gi * hc[j];
                gw[d + j] += gi * ht[j];
                dhc[j] += gi * w[j];
                dht[j] += gi * w[d + j];
            }
        }
        // history mean-pool: each occurrence takes 1/|H_t|
        double inv_h = 1.0 / static_cast<double>(history.size());
        for (int id : history)
            for (std::size_t j = 0; j < d; ++j) g.emb[id * d + j] += inv_h * dht[j];

        if (t + 1 < e.targets.size()) history.push_back(e.targets[t]);
    }
    double inv_c = 1.0 / static_cast<double>(e.context.size());
    for (int id : e.context)
        for (std::size_t j = 0; j < d; ++j) g.emb[id * d + j] += inv_c * dhc[j];
    return g;
}

namespace detail {

inline void check_finite(const Gradients& g) {
    if (!std::isfinite(g.norm())) throw std::runtime_error("ncm: non-finite gradient");
}

inline void axpy(std::vector<double>& dst, const std::vector<double>& src, double a) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}

}  // namespace detail

// theta += alpha * grad(log P(y|x))
inline void mle_step(ModelParams& p, const Sample& s, double alpha) {
    Gradients g = grad(p, s);
    detail::check_finite(g);
    detail::axpy(p.emb, g.emb, alpha);
    detail::axpy(p.out_w, g.out_w, alpha);
    detail::axpy(p.out_b, g.out_b, alpha);
}

// theta -= alpha * clip(grad(log P(y|x))), the negative-training step. The
// norm clip keeps a single bad sample from blowing up the model.
inline void neg_step(ModelParams& p, const Sample& s, double alpha, double clip) {
    Gradients g = grad(p, s);
    detail::check_finite(g);
    if (std::isfinite(clip)) {
        if (clip <= 0.0) throw std::runtime_error("neg_step: clip must be positive");
        double n = g.norm();
        if (n > clip) g.scale(clip / n);
    }
    detail::axpy(p.emb, g.emb, -alpha);
    detail::axpy(p.out_w, g.out_w, -alpha);
    detail::axpy(p.out_b, g.out_b, -alpha);
}

// Algorithm: one MLE pass over the newly maintained samples, then one
// clipped NEG pass over the newly removed ones, both in ascending id order.
inline void diff_mle_neg(ModelParams& p, const Corpus& corpus,
                         std::vector<std::string> newly_maintained,
                         std::vector<std::string> newly_removed, const TrainConfig& cfg) {
    cfg.validate();
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < corpus.size(); ++i) by_id[corpus.samples[i].id] = i;
    auto sample_for = [&](const std::string& id) -> const Sample& {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw std::runtime_error("diff_mle_neg: unknown sample id \"" + id + "\"");
        return corpus.samples[it->second];
    };
    std::sort(newly_maintained.begin(), newly_maintained.end());
    std::sort(newly_removed.begin(), newly_removed.end());
    for (const auto& id : newly_maintained) mle_step(p, sample_for(id), cfg.alpha);
    for (const auto& id : newly_removed) neg_step(p, sample_for(id), cfg.alpha, cfg.clip);
}

inline double perplexity(const ModelParams& p, const Corpus& corpus) {
    if (corpus.empty()) throw std::runtime_error("perplexity: empty corpus");
    double nll = 0.0;
    long tokens = 0;
    for (const auto& s : corpus.samples) {
        for (double lp : forward_logprob(p, s)) nll -= lp;
        tokens += static_cast<long>(s.response.size()) + 1;  // + EOS
    }
    return std::exp(nll / static_cast<double>(tokens));
}

struct TrainResult {
    ModelParams params;
    std::vector<double> epoch_nll;  // pooled training NLL after each epoch
};

// Per-sample MLE passes in seeded shuffled order. With a validation corpus
// and positive patience, stops early and returns the best-perplexity
// snapshot; otherwise returns the parameters after the last epoch.
inline TrainResult train_full(ModelParams p, const Corpus& corpus, const TrainConfig& cfg,
                              const Corpus* validation = nullptr) {
    cfg.validate();
    if (corpus.empty()) throw std::runtime_error("train_full: empty corpus");

    TrainResult result;
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    ModelParams best = p;
    double best_ppl = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;
    bool early_stop = validation != nullptr && cfg.patience > 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) mle_step(p, corpus.samples[i], cfg.alpha);

        double nll = std::log(perplexity(p, corpus));
        if (!std::isfinite(nll)) throw std::runtime_error("train_full: diverged (non-finite NLL)");
        result.epoch_nll.push_back(nll);

        if (early_stop) {
            double ppl = perplexity(p, *validation);
            if (ppl < best_ppl) {
                best_ppl = ppl;
                best = p;
                bad_epochs = 0;
            } else if (++bad_epochs >= cfg.patience) {
                result.params = std::move(best);
                return result;
            }
        }
    }
    result.params = early_stop && std::isfinite(best_ppl) ? std::move(best) : std::move(p);
    return result;
}

// Greedy decoding: argmax over emittable tokens (all non-reserved ids in
// ascending order, then EOS) with strict-improvement ties, stopping at EOS
// or max_len.
inline TokenSeq greedy_decode(const ModelParams& p, const std::vector<TokenSeq>& context,
                              std::size_t max_len = 20) {
    std::vector<int> ctx_ids;
    for (const auto& utt : context)
        for (int id : map_tokens(utt, *p.vocab)) ctx_ids.push_back(id);
    if (ctx_ids.empty()) throw std::runtime_error("greedy_decode: empty context");

    std::vector<double> hc = detail::mean_embedding(p, ctx_ids);
    std::vector<int> history{Vocabulary::kBos};
    TokenSeq out;
    std::vector<double> logits;
    std::size_t v = p.vocab_size();
    while (out.size() < max_len) {
        std::vector<double> ht = detail::mean_embedding(p, history);
        detail::logits_at(p, hc, ht, logits);
        int best = -1;
        double best_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 3; i < v; ++i) {
            if (logits[i] > best_logit) {
                best_logit = logits[i];
                best = static_cast<int>(i);
            }
        }
        if (best < 0 || logits[Vocabulary::kEos] > best_logit) break;
        out.push_back(p.vocab->tokens[best]);
        history.push_back(best);
    }
    return out;
}

// Checkpoint: dims, vocabulary hash, seed, then all parameters row-major.
inline void save_model(const ModelParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model checkpoint: " + path);
    out << "dialfilter-ncm 1\n";
    out << p.vocab_size() << ' ' << p.dim << ' ' << p.seed << ' ' << p.vocab->hash() << '\n';
    auto dump = [&](const std::vector<double>& arr, const char* tag) {
        out << tag;
        for (double x : arr) out << ' ' << fmt_g17(x);
        out << '\n';
    };
    dump(p.emb, "emb");
    dump(p.out_w, "out_w");
    dump(p.out_b, "out_b");
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline ModelParams load_model(const std::string& path, std::shared_ptr<const Vocabulary> vocab) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model checkpoint: " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "dialfilter-ncm" || version != 1)
        throw ConfigError("not a model checkpoint: " + path);
    std::size_t v = 0, d = 0;
    std::uint64_t seed = 0, hash = 0;
    in >> v >> d >> seed >> hash;
    if (!in) throw ConfigError("truncated model checkpoint: " + path);
    if (v != vocab->size())
        throw ConfigError("checkpoint vocabulary size mismatch: " + path);
    if (hash != vocab->hash())
        throw ConfigError("checkpoint vocabulary hash mismatch: " + path);

    ModelParams p;
    p.vocab = std::move(vocab);
    p.dim = d;
    p.seed = seed;
    auto read = [&](std::vector<double>& arr, std::size_t n, const char* tag) {
        std::string t;
        in >> t;
        if (t != tag) throw ConfigError("corrupt model checkpoint (" + std::string(tag) + "): " + path);
        arr.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(in >> arr[i])) throw ConfigError("truncated model checkpoint: " + path);
        }
    };
    read(p.emb, v * d, "emb");
    read(p.out_w, v * 2 * d, "out_w");
    read(p.out_b, v, "out_b");
    return p;
}

}  // namespace dialfilter
