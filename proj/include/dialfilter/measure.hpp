#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dialfilter/attributes.hpp"

namespace dialfilter {

using WeightVector = AttrArray;

struct ScoredSample {
    std::string id;
    double score = 0.0;
};

enum class PartitionSource { random, weighted };

// Partition of a corpus into maintained (M) and removed (R) id sets.
// Both are kept sorted by id.
struct FilterState {
    std::vector<std::string> maintained;
    std::vector<std::string> removed;
    double ratio = 0.0;  // percent
    PartitionSource source = PartitionSource::weighted;
    WeightVector weights{};  // meaningful when source == weighted
};

struct DiffSets {
    std::vector<std::string> newly_maintained;  // M_t \ M_0
    std::vector<std::string> newly_removed;     // R_t \ R_0
};

// S = w . phi, in corpus order.
inline std::vector<ScoredSample> score_samples(const PhiTable& phi, const WeightVector& w) {
    std::vector<ScoredSample> out;
    out.reserve(phi.ids.size());
    for (std::size_t i = 0; i < phi.ids.size(); ++i) {
        double s = 0.0;
        for (int k = 0; k < kNumAttributes; ++k) s += w[k] * phi.standardized[i][k];
        out.push_back({phi.ids[i], s});
    }
    return out;
}

namespace detail {

// ceil(ratio% of n), guarded against ties in the floating product; a
// positive ratio removes at least one sample
inline std::size_t removal_count(double ratio, std::size_t n) {
    double raw = ratio * static_cast<double>(n) / 100.0;
    auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::clamp<std::size_t>(count, 1, n);
}

inline void finalize(FilterState& fs) {
    std::sort(fs.maintained.begin(), fs.maintained.end());
    std::sort(fs.removed.begin(), fs.removed.end());
}

}  // namespace detail

// Sort descending by S (ties broken by ascending id) and remove the bottom
// ceil(ratio% * N).
inline FilterState rank_and_filter(const std::vector<ScoredSample>& scores, double ratio,
                                   const WeightVector& w = {}) {
    if (ratio <= 0.0 || ratio >= 100.0)
        throw std::runtime_error("rank_and_filter: ratio must be in (0, 100)");
    if (scores.empty()) throw std::runtime_error("rank_and_filter: no scores");

    std::vector<const ScoredSample*> order;
    order.reserve(scores.size());
    for (const auto& s : scores) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const ScoredSample* a, const ScoredSample* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->id < b->id;
    });

    std::size_t n_remove = detail::removal_count(ratio, order.size());
    FilterState fs;
    fs.ratio = ratio;
    fs.source = PartitionSource::weighted;
    fs.weights = w;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < order.size() - n_remove)
            fs.maintained.push_back(order[i]->id);
        else
            fs.removed.push_back(order[i]->id);
    }
    detail::finalize(fs);
    return fs;
}

// The M_0/R_0 bootstrap: a uniformly random removal of the same size.
inline FilterState random_partition(const Corpus& corpus, double ratio, std::uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 100.0)
        throw std::runtime_error("random_partition: ratio must be in (0, 100)");
    if (corpus.empty()) throw std::runtime_error("random_partition: empty corpus");

    std::vector<std::size_t> idx(corpus.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);

    std::size_t n_remove = detail::removal_count(ratio, corpus.size());
    FilterState fs;
    fs.ratio = ratio;
    fs.source = PartitionSource::random;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::string& id = corpus.samples[idx[i]].id;
        if (i < n_remove)
            fs.removed.push_back(id);
        else
            fs.maintained.push_back(id);
    }
    detail::finalize(fs);
    return fs;
}

// M_hat = M_t \ M_0, R_hat = R_t \ R_0. Defined against iteration 0, not the
// previous iteration.
inline DiffSets diff_sets(const FilterState& current, const FilterState& base) {
    auto all_ids = [](const FilterState& fs) {
        std::vector<std::string> ids;
        ids.reserve(fs.maintained.size() + fs.removed.size());
        std::merge(fs.maintained.begin(), fs.maintained.end(), fs.removed.begin(),
                   fs.removed.end(), std::back_inserter(ids));
        return ids;
    };
    if (all_ids(current) != all_ids(base))
        throw std::runtime_error("diff_sets: partitions cover different corpora");
    if (current.removed.size() != base.removed.size())
        throw std::runtime_error("diff_sets: partitions use different filter ratios");

    DiffSets d;
    std::set_difference(current.maintained.begin(), current.maintained.end(),
                        base.maintained.begin(), base.maintained.end(),
                        std::back_inserter(d.newly_maintained));
    std::set_difference(current.removed.begin(), current.removed.end(), base.removed.begin(),
                        base.removed.end(), std::back_inserter(d.newly_removed));
    return d;
}

// Filter report: id, S, kept(0/1), in corpus order.
inline void write_filter_report(const std::vector<ScoredSample>& scores, const FilterState& fs,
                                const std::string& path) {
    std::unordered_set<std::string> removed(fs.removed.begin(), fs.removed.end());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write filter report: " + path);
    out << "id\tS\tkept\n";
    for (const auto& s : scores)
        out << s.id << '\t' << fmt_g17(s.score) << '\t' << (removed.count(s.id) ? 0 : 1) << '\n';
}

// The maintained subset, preserving corpus order.
inline Corpus filtered_corpus(const Corpus& corpus, const FilterState& fs) {
    std::unordered_set<std::string> keep(fs.maintained.begin(), fs.maintained.end());
    Corpus out;
    out.role = corpus.role;
    for (const auto& s : corpus.samples)
        if (keep.count(s.id)) out.samples.push_back(s);
    return out;
}

}  // namespace dialfilter
