#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialfilter/bayesopt.hpp"
#include "dialfilter/evalmetrics.hpp"
#include "dialfilter/measure.hpp"
#include "dialfilter/synthgen.hpp"

namespace dialfilter {

enum class RunMode { full_retrain, diff_mle_neg };

inline const char* run_mode_name(RunMode m) {
    return m == RunMode::full_retrain ? "full_retrain" : "diff_mle_neg";
}

inline RunMode parse_run_mode(const std::string& name) {
    if (name == "full_retrain") return RunMode::full_retrain;
    if (name == "diff_mle_neg") return RunMode::diff_mle_neg;
    throw ConfigError("unknown mode \"" + name + "\" (expected full_retrain or diff_mle_neg)");
}

struct RunConfig {
    std::string train_corpus;
    std::string valid_corpus;
    std::string embeddings;
    std::size_t embedding_dim = 16;
    std::string nli_scores;        // optional score-table paths
    std::string lm_cond_scores;
    std::string lm_uncond_scores;
    bool pin_consistency = false;
    bool neutral_next = false;
    long vocab_min_count = 1;
    double filter_ratio = 20.0;
    Objective::Kind objective = Objective::Kind::plus_ppl;
    RunMode mode = RunMode::diff_mle_neg;
    int iterations = 100;  // k
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    GpConfig gp;
    std::size_t model_dim = 32;
    TrainConfig train;
    double diff_alpha = 0.001;  // step size for the search-time diff passes

    TrainConfig diff_train() const {
        TrainConfig t = train;
        t.alpha = diff_alpha;
        return t;
    }

    void validate() const {
        auto must_exist = [](const std::string& path, const char* what) {
            if (path.empty()) throw ConfigError(std::string(what) + " path is required");
            if (!std::filesystem::exists(path))
                throw ConfigError(std::string(what) + " file does not exist: " + path);
        };
        must_exist(train_corpus, "train_corpus");
        must_exist(valid_corpus, "valid_corpus");
        must_exist(embeddings, "embeddings");
        for (const auto* p : {&nli_scores, &lm_cond_scores, &lm_uncond_scores})
            if (!p->empty() && !std::filesystem::exists(*p))
                throw ConfigError("score table does not exist: " + *p);
        if (filter_ratio <= 0.0 || filter_ratio >= 100.0)
            throw ConfigError("filter_ratio must be in (0, 100)");
        if (iterations < 1) throw ConfigError("iterations must be >= 1");
        if (vocab_min_count < 1) throw ConfigError("vocab_min_count must be >= 1");
        if (model_dim < 1) throw ConfigError("model dim must be >= 1");
        if (diff_alpha <= 0.0) throw ConfigError("diff_alpha must be positive");
        try {
            gp.validate();
            train.validate();
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        if (gp.dim() != static_cast<std::size_t>(kNumAttributes))
            throw ConfigError("gp domain must have exactly 7 coordinates");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["train_corpus"] = train_corpus;
        j["valid_corpus"] = valid_corpus;
        j["embeddings"] = embeddings;
        j["embedding_dim"] = embedding_dim;
        j["nli_scores"] = nli_scores;
        j["lm_cond_scores"] = lm_cond_scores;
        j["lm_uncond_scores"] = lm_uncond_scores;
        j["pin_consistency"] = pin_consistency;
        j["neutral_next"] = neutral_next;
        j["vocab_min_count"] = vocab_min_count;
        j["filter_ratio"] = filter_ratio;
        j["objective"] = objective_name(objective);
        j["mode"] = run_mode_name(mode);
        j["iterations"] = iterations;
        j["seed"] = seed;
        j["out_dir"] = out_dir;
        j["gp"] = {{"signal_variance", gp.signal_variance},
                   {"length_scale", gp.length_scale},
                   {"noise_variance", gp.noise_variance},
                   {"domain_lo", gp.domain.front().lo},
                   {"domain_hi", gp.domain.front().hi},
                   {"candidates", gp.candidates},
                   {"initial_design", gp.initial_design}};
        j["model"] = {{"dim", model_dim}};
        j["train"] = {{"alpha", train.alpha},
                      {"clip", train.clip},
                      {"epochs", train.epochs},
                      {"patience", train.patience},
                      {"diff_alpha", diff_alpha}};
        return j;
    }

    std::uint64_t hash() const { return fnv1a64(to_json().dump()); }
};

namespace detail {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config field \"" + key + "\" has the wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& known,
                           const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown config field \"" + key + "\" in " + where);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return seed ^ (0x9E3779B97F4A7C15ULL * (salt + 1));
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    detail::reject_unknown(
        j,
        {"train_corpus", "valid_corpus", "embeddings", "embedding_dim", "nli_scores",
         "lm_cond_scores", "lm_uncond_scores", "pin_consistency", "neutral_next",
         "vocab_min_count", "filter_ratio", "objective", "mode", "iterations", "seed", "out_dir",
         "gp", "model", "train"},
        "config");
    RunConfig c;
    c.train_corpus = detail::get_field<std::string>(j, "train_corpus", "");
    c.valid_corpus = detail::get_field<std::string>(j, "valid_corpus", "");
    c.embeddings = detail::get_field<std::string>(j, "embeddings", "");
    c.embedding_dim = detail::get_field<std::size_t>(j, "embedding_dim", c.embedding_dim);
    c.nli_scores = detail::get_field<std::string>(j, "nli_scores", "");
    c.lm_cond_scores = detail::get_field<std::string>(j, "lm_cond_scores", "");
    c.lm_uncond_scores = detail::get_field<std::string>(j, "lm_uncond_scores", "");
    c.pin_consistency = detail::get_field<bool>(j, "pin_consistency", false);
    c.neutral_next = detail::get_field<bool>(j, "neutral_next", false);
    c.vocab_min_count = detail::get_field<long>(j, "vocab_min_count", 1);
    c.filter_ratio = detail::get_field<double>(j, "filter_ratio", c.filter_ratio);
    c.objective = parse_objective(detail::get_field<std::string>(j, "objective", "+ppl"));
    c.mode = parse_run_mode(detail::get_field<std::string>(j, "mode", "diff_mle_neg"));
    c.iterations = detail::get_field<int>(j, "iterations", c.iterations);
    c.seed = detail::get_field<std::uint64_t>(j, "seed", c.seed);
    c.out_dir = detail::get_field<std::string>(j, "out_dir", c.out_dir);
    if (j.contains("gp")) {
        const auto& g = j.at("gp");
        detail::reject_unknown(g,
                               {"signal_variance", "length_scale", "noise_variance", "domain_lo",
                                "domain_hi", "candidates", "initial_design"},
                               "gp");
        c.gp.signal_variance = detail::get_field<double>(g, "signal_variance", c.gp.signal_variance);
        c.gp.length_scale = detail::get_field<double>(g, "length_scale", c.gp.length_scale);
        c.gp.noise_variance = detail::get_field<double>(g, "noise_variance", c.gp.noise_variance);
        double lo = detail::get_field<double>(g, "domain_lo", -1.0);
        double hi = detail::get_field<double>(g, "domain_hi", 1.0);
        c.gp.domain.assign(kNumAttributes, Interval{lo, hi});
        c.gp.candidates = detail::get_field<int>(g, "candidates", c.gp.candidates);
        c.gp.initial_design = detail::get_field<int>(g, "initial_design", c.gp.initial_design);
    }
    if (j.contains("model")) {
        detail::reject_unknown(j.at("model"), {"dim"}, "model");
        c.model_dim = detail::get_field<std::size_t>(j.at("model"), "dim", c.model_dim);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown(t, {"alpha", "clip", "epochs", "patience", "diff_alpha"}, "train");
        c.train.alpha = detail::get_field<double>(t, "alpha", c.train.alpha);
        c.train.clip = detail::get_field<double>(t, "clip", c.train.clip);
        c.train.epochs = detail::get_field<int>(t, "epochs", c.train.epochs);
        c.train.patience = detail::get_field<int>(t, "patience", c.train.patience);
        c.diff_alpha = detail::get_field<double>(t, "diff_alpha", c.diff_alpha);
    }
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config JSON (" + path + "): " + e.what());
    }
    return parse_run_config(j);
}

// Everything loaded and precomputed once per run. Attributes do not depend
// on w, so phi is computed here and shared by every optimization iteration.
struct PipelineContext {
    RunConfig config;
    Corpus train;
    Corpus valid;
    std::shared_ptr<const Vocabulary> vocab;
    EmbeddingTable embeddings;
    UnigramStats unigrams;
    IdfTable idf;
    std::optional<NgramLm> lm;
    std::optional<ScoreTable> nli, lm_cond, lm_uncond;
    PercentileBound c5, f5;
    PhiTable phi;  // train split

    AttributeBackends backends() const {
        AttributeBackends b;
        b.idf = &idf;
        b.emb = &embeddings;
        b.unigrams = &unigrams;
        b.lm = lm ? &*lm : nullptr;
        b.vocab = vocab.get();
        b.lm_cond = lm_cond ? &*lm_cond : nullptr;
        b.lm_uncond = lm_uncond ? &*lm_uncond : nullptr;
        b.c5 = c5;
        b.f5 = f5;
        b.nli = nli ? &*nli : nullptr;
        b.pin_consistency = config.pin_consistency;
        b.neutral_next = config.neutral_next;
        return b;
    }

    std::uint64_t model_seed() const { return detail::derive_seed(config.seed, 1); }
    std::uint64_t partition_seed() const { return detail::derive_seed(config.seed, 2); }

    TrainConfig train_config() const {
        TrainConfig t = config.train;
        t.seed = detail::derive_seed(config.seed, 3);
        return t;
    }

    TrainConfig diff_train_config() const {
        TrainConfig t = config.diff_train();
        t.seed = detail::derive_seed(config.seed, 3);
        return t;
    }

    ModelParams fresh_model() const { return init_params(vocab, config.model_dim, model_seed()); }
};

inline PipelineContext prepare(const RunConfig& config) {
    config.validate();
    PipelineContext ctx;
    ctx.config = config;
    ctx.train = load_corpus(config.train_corpus, SplitRole::train);
    ctx.valid = load_corpus(config.valid_corpus, SplitRole::validation);
    if (ctx.train.empty()) throw ConfigError("train corpus is empty: " + config.train_corpus);
    if (ctx.valid.empty()) throw ConfigError("validation corpus is empty: " + config.valid_corpus);

    ctx.vocab = std::make_shared<Vocabulary>(build_vocab(ctx.train, config.vocab_min_count));
    ctx.embeddings = load_embeddings(config.embeddings, config.embedding_dim);
    ctx.unigrams = unigram_probs(ctx.train);
    ctx.idf = build_idf(ctx.train);
    ctx.lm.emplace(train_ngram_lm(ctx.train, *ctx.vocab));
    if (!config.nli_scores.empty()) {
        ctx.nli = load_score_table(config.nli_scores, ScoreKind::nli_contra);
    } else if (config.pin_consistency) {
        std::cerr << "[dialfilter] no NLI score table: Consistency pinned to 1.0 for every "
                     "sample (the column is degenerate and carries no weight)\n";
    } else {
        throw ConfigError("no nli_scores table; set pin_consistency to run without Consistency");
    }
    if (!config.lm_cond_scores.empty())
        ctx.lm_cond = load_score_table(config.lm_cond_scores, ScoreKind::lm_conditional);
    if (!config.lm_uncond_scores.empty())
        ctx.lm_uncond = load_score_table(config.lm_uncond_scores, ScoreKind::lm_unconditional);

    // C5/F5 are nearest-rank percentiles of the training-split distribution
    AttributeBackends b = ctx.backends();
    std::vector<double> cond, uncond;
    cond.reserve(ctx.train.size());
    uncond.reserve(ctx.train.size());
    for (const auto& s : ctx.train.samples) {
        cond.push_back(b.cond_logprob(s));
        uncond.push_back(b.uncond_logprob(s));
    }
    ctx.c5 = percentile_bound(cond);
    ctx.f5 = percentile_bound(uncond);

    ctx.phi = compute_phi(ctx.train, ctx.backends());
    return ctx;
}

// One full "filter-train-evaluate" black-box call: rank by S, drop the
// bottom n%, train a fresh model on the maintained set, score J on the
// validation split. Deterministic given (w, seed).
inline double blackbox_full(const WeightVector& w, const PipelineContext& ctx) {
    auto scores = score_samples(ctx.phi, w);
    FilterState fs = rank_and_filter(scores, ctx.config.filter_ratio, w);
    Corpus maintained = filtered_corpus(ctx.train, fs);
    TrainResult trained = train_full(ctx.fresh_model(), maintained, ctx.train_config(), &ctx.valid);
    return evaluate_objective(ctx.config.objective, trained.params, ctx.valid, ctx.embeddings,
                              ctx.unigrams);
}

// Base state for the accelerated path: the random M0/R0 partition and a
// model trained to convergence on M0. The snapshot is never mutated; every
// iteration copies it.
struct AcceleratedState {
    FilterState base;
    ModelParams base_model;
    double base_j = 0.0;
};

inline AcceleratedState prepare_accelerated(const PipelineContext& ctx) {
    AcceleratedState st;
    st.base = random_partition(ctx.train, ctx.config.filter_ratio, ctx.partition_seed());
    Corpus m0 = filtered_corpus(ctx.train, st.base);
    TrainResult trained = train_full(ctx.fresh_model(), m0, ctx.train_config(), &ctx.valid);
    st.base_model = std::move(trained.params);
    st.base_j = evaluate_objective(ctx.config.objective, st.base_model, ctx.valid, ctx.embeddings,
                                   ctx.unigrams);
    return st;
}

// The Diff-MLE-NEG black box: diff the w-induced partition against the base,
// update a copy of the base snapshot with one MLE pass over newly maintained
// samples and one NEG pass over newly removed ones, then evaluate J.
inline double blackbox_accelerated(const WeightVector& w, const AcceleratedState& state,
                                   const PipelineContext& ctx) {
    auto scores = score_samples(ctx.phi, w);
    FilterState fs = rank_and_filter(scores, ctx.config.filter_ratio, w);
    DiffSets ds = diff_sets(fs, state.base);
    if (ds.newly_maintained.empty() && ds.newly_removed.empty()) return state.base_j;
    ModelParams theta = state.base_model;
    diff_mle_neg(theta, ctx.train, ds.newly_maintained, ds.newly_removed, ctx.diff_train_config());
    return evaluate_objective(ctx.config.objective, theta, ctx.valid, ctx.embeddings,
                              ctx.unigrams);
}

struct RunArtifacts {
    std::string out_dir;
    std::string trace_path;
    std::string best_weights_path;
    std::string filtered_corpus_path;
    std::string model_path;
    std::string metadata_path;
    WeightVector best_w{};
    double best_j = 0.0;
    std::vector<int> failed_iterations;
};

namespace detail {

inline WeightVector to_weights(const std::vector<double>& x) {
    if (x.size() != static_cast<std::size_t>(kNumAttributes))
        throw std::runtime_error("weight vector must have exactly 7 entries");
    WeightVector w{};
    for (int k = 0; k < kNumAttributes; ++k) w[k] = x[k];
    return w;
}

inline std::string iter_report_path(const std::string& dir, int t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "iter_%04d.tsv", t);
    return dir + "/" + buf;
}

}  // namespace detail

// Wires the configured black box into the optimizer, streams the trace, and
// persists the final artifacts: best weights, the corpus re-filtered at the
// best w, and a model retrained from scratch on it (the accelerated J is a
// search surrogate; the shipped model is cleanly trained).
inline RunArtifacts run_optimize(const PipelineContext& ctx) {
    namespace fs = std::filesystem;
    const RunConfig& cfg = ctx.config;
    RunArtifacts art;
    art.out_dir = cfg.out_dir;
    fs::create_directories(cfg.out_dir + "/filters");

    std::optional<AcceleratedState> accel;
    if (cfg.mode == RunMode::diff_mle_neg) accel = prepare_accelerated(ctx);

    art.trace_path = cfg.out_dir + "/trace.csv";
    std::ofstream trace_out(art.trace_path);
    if (!trace_out) throw std::runtime_error("cannot write trace: " + art.trace_path);
    trace_out << "t";
    for (int k = 1; k <= kNumAttributes; ++k) trace_out << ",w" << k;
    trace_out << ",J,bestJ\n";

    int iter = 0;
    double worst = -std::numeric_limits<double>::infinity();
    Blackbox wrapped = [&](const std::vector<double>& x) -> double {
        WeightVector w = detail::to_weights(x);
        auto scores = score_samples(ctx.phi, w);
        FilterState fs_w = rank_and_filter(scores, cfg.filter_ratio, w);
        write_filter_report(scores, fs_w, detail::iter_report_path(cfg.out_dir + "/filters", iter));

        double j;
        try {
            j = cfg.mode == RunMode::diff_mle_neg ? blackbox_accelerated(w, *accel, ctx)
                                                  : blackbox_full(w, ctx);
        } catch (const std::exception& e) {
            // keep the search alive: a failed iteration scores worse than
            // anything seen so far
            double base = std::isfinite(worst) ? worst : 1e9;
            j = base + 1.0 + 0.5 * std::fabs(base);
            art.failed_iterations.push_back(iter);
            std::cerr << "[dialfilter] iteration " << iter << " failed: " << e.what()
                      << " (J=" << j << ")\n";
        }
        worst = std::max(worst, j);
        ++iter;
        return j;
    };

    OptimizeTrace trace = optimize(wrapped, cfg.gp, cfg.iterations, cfg.seed,
                                   [&](const TraceRow& row) {
                                       trace_out << row.t;
                                       for (double v : row.x) trace_out << ',' << fmt_g17(v);
                                       trace_out << ',' << fmt_g17(row.y) << ','
                                                 << fmt_g17(row.best) << '\n';
                                       trace_out.flush();
                                   });
    trace_out.close();

    art.best_w = detail::to_weights(trace.best_x);
    art.best_j = trace.best_y;

    art.best_weights_path = cfg.out_dir + "/best_weights.json";
    {
        nlohmann::ordered_json j;
        j["weights"] = trace.best_x;
        j["J"] = trace.best_y;
        std::ofstream out(art.best_weights_path);
        out << j.dump(2) << '\n';
    }

    // final deliverable: re-filter at the best w and retrain from scratch
    auto scores = score_samples(ctx.phi, art.best_w);
    FilterState best_fs = rank_and_filter(scores, cfg.filter_ratio, art.best_w);
    write_filter_report(scores, best_fs, cfg.out_dir + "/filter_report.tsv");
    Corpus final_corpus = filtered_corpus(ctx.train, best_fs);
    art.filtered_corpus_path = cfg.out_dir + "/filtered.jsonl";
    write_corpus(final_corpus, art.filtered_corpus_path);

    TrainResult final_model =
        train_full(ctx.fresh_model(), final_corpus, ctx.train_config(), &ctx.valid);
    art.model_path = cfg.out_dir + "/model.ckpt";
    save_model(final_model.params, art.model_path);

    art.metadata_path = cfg.out_dir + "/run_meta.json";
    {
        nlohmann::ordered_json meta;
        meta["config"] = cfg.to_json();
        meta["config_hash"] = cfg.hash();
        meta["seeds"] = {{"run", cfg.seed},
                         {"model_init", ctx.model_seed()},
                         {"base_partition", ctx.partition_seed()},
                         {"train_shuffle", ctx.train_config().seed}};
        meta["percentile_split"] = "train";
        meta["standardization"] = "train-split z-score";
        meta["attribute_order"] = kAttributeNames;
        meta["c5"] = ctx.c5.value;
        meta["f5"] = ctx.f5.value;
        meta["best_J"] = art.best_j;
        meta["best_weights"] = trace.best_x;
        meta["failed_iterations"] = art.failed_iterations;
        if (accel) meta["base_J"] = accel->base_j;
        meta["artifacts"] = {{"trace", art.trace_path},
                             {"best_weights", art.best_weights_path},
                             {"filtered_corpus", art.filtered_corpus_path},
                             {"filter_report", cfg.out_dir + "/filter_report.tsv"},
                             {"model", art.model_path}};
        std::ofstream out(art.metadata_path);
        out << meta.dump(2) << '\n';
    }
    return art;
}

struct AblationRow {
    std::string label;
    MetricReport metrics;
    double perplexity = 0.0;
    double j = 0.0;
};

namespace detail {

inline AblationRow ablation_run(const PipelineContext& ctx, const std::string& label,
                                const std::optional<WeightVector>& w) {
    Corpus corpus = ctx.train;
    if (w) {
        FilterState fs = rank_and_filter(score_samples(ctx.phi, *w), ctx.config.filter_ratio, *w);
        corpus = filtered_corpus(ctx.train, fs);
    }
    TrainResult trained = train_full(ctx.fresh_model(), corpus, ctx.train_config(), &ctx.valid);
    AblationRow row;
    row.label = label;
    row.metrics = evaluate_metrics(trained.params, ctx.valid, ctx.embeddings, ctx.unigrams);
    row.perplexity = perplexity(trained.params, ctx.valid);
    row.j = ctx.config.objective == Objective::Kind::plus_ppl ? row.perplexity
                                                              : -row.metrics.sum13();
    return row;
}

}  // namespace detail

// Single-attribute ablation: a one-hot weight vector, one
// filter-train-evaluate pass, one metric report row.
inline AblationRow run_ablate(const PipelineContext& ctx, int attribute_index) {
    if (attribute_index < 0 || attribute_index >= kNumAttributes)
        throw ConfigError("attribute index must be in 0..6");
    WeightVector w{};
    w[attribute_index] = 1.0;
    return detail::ablation_run(ctx, kAttributeNames[attribute_index], w);
}

// The full ablation table: no filtering, each single attribute, and the
// combined measure with the supplied weights.
inline std::vector<AblationRow> run_ablate_suite(const PipelineContext& ctx,
                                                 const WeightVector& s_weights) {
    std::vector<AblationRow> rows;
    rows.push_back(detail::ablation_run(ctx, "none", std::nullopt));
    for (int k = 0; k < kNumAttributes; ++k) rows.push_back(run_ablate(ctx, k));
    rows.push_back(detail::ablation_run(ctx, "S", s_weights));
    return rows;
}

inline void write_ablation_report(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write ablation report: " + path);
    out << "filtered_by";
    for (const auto& [name, _] : MetricReport{}.named()) out << '\t' << name;
    out << "\tperplexity\tJ\n";
    for (const auto& row : rows) {
        out << row.label;
        for (const auto& [_, value] : row.metrics.named()) out << '\t' << fmt_f6(value);
        out << '\t' << fmt_f6(row.perplexity) << '\t' << fmt_f6(row.j) << '\n';
    }
}

struct KendallEntry {
    std::string attr_a;
    std::string attr_b;
    std::optional<double> tau;  // empty when the correlation is undefined
};

// Kendall tau-b for all 21 unordered attribute pairs over the training phi.
inline std::vector<KendallEntry> run_kendall(const PipelineContext& ctx) {
    std::size_t n = ctx.phi.raw.size();
    std::array<std::vector<double>, kNumAttributes> cols;
    for (int k = 0; k < kNumAttributes; ++k) {
        cols[k].reserve(n);
        for (const auto& a : ctx.phi.raw) cols[k].push_back(a[k]);
    }
    std::vector<KendallEntry> entries;
    for (int a = 0; a < kNumAttributes; ++a) {
        for (int b = a + 1; b < kNumAttributes; ++b) {
            KendallEntry e{kAttributeNames[a], kAttributeNames[b], std::nullopt};
            try {
                e.tau = kendall_tau(cols[a], cols[b]);
            } catch (const std::exception&) {
                // degenerate column: report as undefined, never fabricate
            }
            entries.push_back(std::move(e));
        }
    }
    return entries;
}

inline void write_kendall_report(const std::vector<KendallEntry>& entries,
                                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write kendall report: " + path);
    out << "attr_a\tattr_b\ttau\n";
    for (const auto& e : entries) {
        out << e.attr_a << '\t' << e.attr_b << '\t';
        out << (e.tau ? fmt_f6(*e.tau) : std::string("undefined")) << '\n';
    }
}

}  // namespace dialfilter
