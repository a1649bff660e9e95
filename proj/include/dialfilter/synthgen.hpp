#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dialfilter/embed.hpp"

namespace dialfilter {

// Synthetic corpus with known noise labels: clean samples draw context,
// response and next utterance from one topic's word pool; noisy samples are
// perturbed per class. Topic pools are disjoint and topic centroids are
// orthogonal, so Relatedness separates shuffle noise by construction.
struct SynthSpec {
    std::size_t count = 2000;
    std::size_t vocab_size = 240;  // split evenly across topics
    std::size_t topics = 8;
    double rho_shuffle = 0.2;   // responses swapped across topics
    double rho_generic = 0.0;   // responses replaced from a generic pool
    double rho_repeat = 0.0;    // responses with injected token repetition
    std::size_t min_len = 4;
    std::size_t max_len = 9;
    std::size_t embed_dim = 16;
    std::uint64_t seed = 1;

    void validate() const {
        if (count == 0) throw std::runtime_error("SynthSpec: count must be positive");
        if (topics < 2) throw std::runtime_error("SynthSpec: need at least 2 topics");
        if (vocab_size < topics * 4)
            throw std::runtime_error("SynthSpec: vocab too small for the topic count");
        if (rho_shuffle < 0 || rho_generic < 0 || rho_repeat < 0 ||
            rho_shuffle + rho_generic + rho_repeat > 1.0)
            throw std::runtime_error("SynthSpec: noise fractions must be >= 0 and sum to <= 1");
        if (min_len < 1 || max_len < min_len)
            throw std::runtime_error("SynthSpec: bad utterance length range");
        if (embed_dim < topics + 1)
            throw std::runtime_error("SynthSpec: embed_dim must exceed the topic count");
    }
};

enum class NoiseClass { clean, shuffle, generic, repeat };

inline const char* noise_class_name(NoiseClass c) {
    switch (c) {
        case NoiseClass::clean: return "clean";
        case NoiseClass::shuffle: return "shuffle";
        case NoiseClass::generic: return "generic";
        case NoiseClass::repeat: return "repeat";
    }
    return "?";
}

struct SynthResult {
    Corpus corpus;
    std::vector<NoiseClass> labels;  // aligned with corpus.samples
    EmbeddingTable embeddings;       // covers the generated vocabulary
};

namespace detail {

inline const std::vector<std::string> kGenericPool = {"ok",    "yes",  "i",    "see", "well",
                                                      "sure",  "fine", "good", "oh",  "thanks"};

}  // namespace detail

inline SynthResult generate_corpus(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    std::size_t pool_size = spec.vocab_size / spec.topics;
    std::vector<std::vector<std::string>> pools(spec.topics);
    for (std::size_t t = 0; t < spec.topics; ++t)
        for (std::size_t j = 0; j < pool_size; ++j)
            pools[t].push_back("t" + std::to_string(t) + "w" + std::to_string(j));

    // token vector = topic basis direction + noise; generic pool gets the
    // last basis direction
    SynthResult result;
    result.embeddings.dim = spec.embed_dim;
    auto add_vecs = [&](const std::vector<std::string>& pool, std::size_t axis) {
        for (const auto& tok : pool) {
            std::vector<double> v(spec.embed_dim, 0.0);
            v[axis] = 1.0;
            for (auto& x : v) x += 0.25 * rng.normal() / std::sqrt(double(spec.embed_dim));
            result.embeddings.vectors.emplace(tok, std::move(v));
        }
    };
    for (std::size_t t = 0; t < spec.topics; ++t) add_vecs(pools[t], t);
    add_vecs(detail::kGenericPool, spec.topics);

    // exact per-class counts, scattered over positions
    auto n_shuffle = static_cast<std::size_t>(std::llround(spec.rho_shuffle * double(spec.count)));
    auto n_generic = static_cast<std::size_t>(std::llround(spec.rho_generic * double(spec.count)));
    auto n_repeat = static_cast<std::size_t>(std::llround(spec.rho_repeat * double(spec.count)));
    if (n_shuffle + n_generic + n_repeat > spec.count)
        throw std::runtime_error("SynthSpec: noise counts exceed corpus size");
    std::vector<NoiseClass> labels(spec.count, NoiseClass::clean);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n_shuffle; ++i) labels[pos++] = NoiseClass::shuffle;
    for (std::size_t i = 0; i < n_generic; ++i) labels[pos++] = NoiseClass::generic;
    for (std::size_t i = 0; i < n_repeat; ++i) labels[pos++] = NoiseClass::repeat;
    rng.shuffle(labels);

    auto draw_utterance = [&](const std::vector<std::string>& pool, std::size_t lo,
                              std::size_t hi) {
        std::size_t len = lo + rng.index(hi - lo + 1);
        TokenSeq toks;
        toks.reserve(len);
        for (std::size_t i = 0; i < len; ++i) toks.push_back(pool[rng.index(pool.size())]);
        return toks;
    };

    int id_width = 1;
    for (std::size_t v = spec.count; v >= 10; v /= 10) ++id_width;
    for (std::size_t i = 0; i < spec.count; ++i) {
        std::size_t topic = rng.index(spec.topics);
        Sample s;
        std::string num = std::to_string(i);
        s.id = "s" + std::string(id_width - static_cast<int>(num.size()), '0') + num;
        std::size_t n_ctx = 1 + rng.index(2);
        for (std::size_t u = 0; u < n_ctx; ++u)
            s.context.push_back(draw_utterance(pools[topic], spec.min_len, spec.max_len));
        s.next = draw_utterance(pools[topic], spec.min_len, spec.max_len);

        switch (labels[i]) {
            case NoiseClass::clean:
                s.response = draw_utterance(pools[topic], spec.min_len, spec.max_len);
                break;
            case NoiseClass::shuffle: {
                std::size_t other = (topic + 1 + rng.index(spec.topics - 1)) % spec.topics;
                s.response = draw_utterance(pools[other], spec.min_len, spec.max_len);
                break;
            }
            case NoiseClass::generic:
                s.response = draw_utterance(detail::kGenericPool, 2, 4);
                break;
            case NoiseClass::repeat: {
                TokenSeq base = draw_utterance(pools[topic], spec.min_len, spec.max_len);
                for (std::size_t k = 1; k < base.size(); ++k) base[k] = base[0];
                s.response = std::move(base);
                break;
            }
        }
        result.corpus.samples.push_back(std::move(s));
    }
    result.labels = std::move(labels);
    return result;
}

// TSV: id <TAB> noise_class
inline void write_labels(const SynthResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write labels: " + path);
    for (std::size_t i = 0; i < result.corpus.size(); ++i)
        out << result.corpus.samples[i].id << '\t' << noise_class_name(result.labels[i]) << '\n';
}

inline std::vector<NoiseClass> load_labels(const std::string& path, const Corpus& corpus) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open labels: " + path);
    std::unordered_map<std::string, NoiseClass> by_id;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ConfigError("bad label line: " + line);
        std::string id = line.substr(0, tab);
        std::string name = line.substr(tab + 1);
        NoiseClass c;
        if (name == "clean") c = NoiseClass::clean;
        else if (name == "shuffle") c = NoiseClass::shuffle;
        else if (name == "generic") c = NoiseClass::generic;
        else if (name == "repeat") c = NoiseClass::repeat;
        else throw ConfigError("unknown noise class \"" + name + "\"");
        by_id[id] = c;
    }
    std::vector<NoiseClass> labels;
    labels.reserve(corpus.size());
    for (const auto& s : corpus.samples) {
        auto it = by_id.find(s.id);
        if (it == by_id.end()) throw ConfigError("labels missing id \"" + s.id + "\"");
        labels.push_back(it->second);
    }
    return labels;
}

}  // namespace dialfilter
