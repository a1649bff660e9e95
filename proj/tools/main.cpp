// dialfilter command-line tool: scoring, filtering, training, evaluation and
// weight optimization for dialogue corpora.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dialfilter/dialfilter.hpp"

namespace {

using namespace dialfilter;
namespace fs = std::filesystem;

struct CommonOpts {
    std::string config_path;
    double ratio = -1.0;
    std::string objective;
    std::string mode;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "run configuration (JSON)")->required();
    cmd->add_option("--ratio", opts.ratio, "filter ratio override (percent)");
    cmd->add_option("--objective", opts.objective, "objective override: +ppl | -metric");
    cmd->add_option("--mode", opts.mode, "mode override: full_retrain | diff_mle_neg");
    cmd->add_option("--out", opts.out, "output directory override");
    cmd->add_option("--seed", opts.seed, "seed override")->each([&](const std::string&) {
        opts.seed_set = true;
    });
}

RunConfig config_from(const CommonOpts& opts) {
    RunConfig cfg = load_run_config(opts.config_path);
    if (opts.ratio >= 0.0) cfg.filter_ratio = opts.ratio;
    if (!opts.objective.empty()) cfg.objective = parse_objective(opts.objective);
    if (!opts.mode.empty()) cfg.mode = parse_run_mode(opts.mode);
    if (!opts.out.empty()) cfg.out_dir = opts.out;
    if (opts.seed_set) cfg.seed = opts.seed;
    return cfg;
}

WeightVector parse_weights_arg(const std::string& arg) {
    if (fs::exists(arg)) {
        std::ifstream in(arg);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("cannot parse weights file " + arg + ": " + e.what());
        }
        if (j.is_object() && j.contains("weights")) j = j["weights"];
        if (!j.is_array() || j.size() != static_cast<std::size_t>(kNumAttributes))
            throw ConfigError("weights file must hold an array of 7 numbers: " + arg);
        WeightVector w{};
        for (int k = 0; k < kNumAttributes; ++k) w[k] = j[k].get<double>();
        return w;
    }
    WeightVector w{};
    std::stringstream ss(arg);
    std::string field;
    int k = 0;
    while (std::getline(ss, field, ',')) {
        if (k >= kNumAttributes) throw ConfigError("expected exactly 7 comma-separated weights");
        try {
            w[k++] = std::stod(field);
        } catch (const std::exception&) {
            throw ConfigError("bad weight value \"" + field + "\"");
        }
    }
    if (k != kNumAttributes) throw ConfigError("expected exactly 7 comma-separated weights");
    return w;
}

std::vector<std::string> phi_header_notes(const PipelineContext& ctx) {
    return {"percentile_split: train",
            "c5: " + fmt_g17(ctx.c5.value) + " (n=" + std::to_string(ctx.c5.sample_count) + ")",
            "f5: " + fmt_g17(ctx.f5.value) + " (n=" + std::to_string(ctx.f5.sample_count) + ")"};
}

int cmd_score(const CommonOpts& opts) {
    PipelineContext ctx = prepare(config_from(opts));
    fs::create_directories(ctx.config.out_dir);
    std::string path = ctx.config.out_dir + "/attributes.tsv";
    write_attribute_report(ctx.phi, path, phi_header_notes(ctx));
    std::cout << "attribute report: " << path << " (" << ctx.phi.ids.size() << " samples)\n";
    return 0;
}

int cmd_filter(const CommonOpts& opts, const std::string& weights_arg) {
    PipelineContext ctx = prepare(config_from(opts));
    WeightVector w = parse_weights_arg(weights_arg);
    fs::create_directories(ctx.config.out_dir);
    auto scores = score_samples(ctx.phi, w);
    FilterState fstate = rank_and_filter(scores, ctx.config.filter_ratio, w);
    std::string report = ctx.config.out_dir + "/filter_report.tsv";
    std::string corpus_path = ctx.config.out_dir + "/filtered.jsonl";
    write_filter_report(scores, fstate, report);
    write_corpus(filtered_corpus(ctx.train, fstate), corpus_path);
    std::cout << "kept " << fstate.maintained.size() << " / " << ctx.train.size()
              << " samples (ratio " << ctx.config.filter_ratio << "%)\n"
              << "filter report: " << report << "\nfiltered corpus: " << corpus_path << "\n";
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& corpus_override) {
    RunConfig cfg = config_from(opts);
    if (!corpus_override.empty()) cfg.train_corpus = corpus_override;
    PipelineContext ctx = prepare(cfg);
    fs::create_directories(cfg.out_dir);
    TrainResult result = train_full(ctx.fresh_model(), ctx.train, ctx.train_config(), &ctx.valid);
    std::string path = cfg.out_dir + "/model.ckpt";
    save_model(result.params, path);
    for (std::size_t e = 0; e < result.epoch_nll.size(); ++e)
        std::cout << "epoch " << (e + 1) << " train NLL " << fmt_f6(result.epoch_nll[e]) << "\n";
    std::cout << "validation perplexity " << fmt_f6(perplexity(result.params, ctx.valid))
              << "\nmodel checkpoint: " << path << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& model_path) {
    PipelineContext ctx = prepare(config_from(opts));
    ModelParams model = load_model(model_path, ctx.vocab);
    fs::create_directories(ctx.config.out_dir);
    MetricReport rep = evaluate_metrics(model, ctx.valid, ctx.embeddings, ctx.unigrams);
    double ppl = perplexity(model, ctx.valid);
    double j = ctx.config.objective == Objective::Kind::plus_ppl ? ppl : -rep.sum13();
    std::string path = ctx.config.out_dir + "/metric_report.tsv";
    write_metric_report(rep, ppl, j, ctx.config.objective, path);
    std::cout << "J (" << objective_name(ctx.config.objective) << ") = " << fmt_f6(j)
              << "\nmetric report: " << path << "\n";
    return 0;
}

int cmd_optimize(const CommonOpts& opts) {
    PipelineContext ctx = prepare(config_from(opts));
    RunArtifacts art = run_optimize(ctx);
    std::cout << "best J = " << fmt_f6(art.best_j) << "\nbest w =";
    for (double w : art.best_w) std::cout << ' ' << fmt_f6(w);
    std::cout << "\ntrace: " << art.trace_path << "\nfiltered corpus: "
              << art.filtered_corpus_path << "\nmodel: " << art.model_path
              << "\nmetadata: " << art.metadata_path << "\n";
    if (!art.failed_iterations.empty())
        std::cout << "failed iterations: " << art.failed_iterations.size() << " (see metadata)\n";
    return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& attribute,
               const std::string& weights_arg) {
    PipelineContext ctx = prepare(config_from(opts));
    fs::create_directories(ctx.config.out_dir);
    std::string path = ctx.config.out_dir + "/ablation_report.tsv";

    std::vector<AblationRow> rows;
    if (attribute == "all") {
        WeightVector s_weights;
        s_weights.fill(1.0);
        if (!weights_arg.empty()) s_weights = parse_weights_arg(weights_arg);
        rows = run_ablate_suite(ctx, s_weights);
    } else {
        int index = -1;
        for (int k = 0; k < kNumAttributes; ++k)
            if (attribute == kAttributeNames[k]) index = k;
        if (index < 0) {
            try {
                index = std::stoi(attribute);
            } catch (const std::exception&) {
                throw ConfigError("unknown attribute \"" + attribute + "\"");
            }
        }
        rows.push_back(run_ablate(ctx, index));
    }
    write_ablation_report(rows, path);
    std::cout << "ablation report (" << rows.size() << " rows): " << path << "\n";
    return 0;
}

int cmd_kendall(const CommonOpts& opts) {
    PipelineContext ctx = prepare(config_from(opts));
    fs::create_directories(ctx.config.out_dir);
    auto entries = run_kendall(ctx);
    std::string path = ctx.config.out_dir + "/kendall.tsv";
    write_kendall_report(entries, path);
    std::cout << "kendall report (" << entries.size() << " pairs): " << path << "\n";
    return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& prefix) {
    SynthResult result = generate_corpus(spec);
    fs::path p(prefix);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_corpus(result.corpus, prefix + ".jsonl");
    write_labels(result, prefix + "_labels.tsv");
    write_embeddings(result.embeddings, prefix + "_embeddings.txt");
    std::size_t noisy = 0;
    for (NoiseClass c : result.labels)
        if (c != NoiseClass::clean) ++noisy;
    std::cout << "generated " << result.corpus.size() << " samples (" << noisy << " noisy) -> "
              << prefix << ".jsonl\nlabels: " << prefix << "_labels.tsv\nembeddings: " << prefix
              << "_embeddings.txt\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dialogue data filtering with a learned seven-attribute quality measure"};
    app.require_subcommand(1);

    CommonOpts score_opts, filter_opts, train_opts, eval_opts, optimize_opts, ablate_opts,
        kendall_opts;
    std::string filter_weights, train_corpus, eval_model, ablate_attribute = "all",
                ablate_weights, synth_prefix;
    SynthSpec synth_spec;

    add_common(app.add_subcommand("score", "compute the per-sample attribute report"),
               score_opts);

    auto* filter_cmd =
        app.add_subcommand("filter", "score with fixed weights and drop the bottom n%");
    add_common(filter_cmd, filter_opts);
    filter_cmd->add_option("--weights", filter_weights, "7 comma-separated weights or a JSON file")
        ->required();

    auto* train_cmd = app.add_subcommand("train", "train the response model to convergence");
    add_common(train_cmd, train_opts);
    train_cmd->add_option("--corpus", train_corpus, "train on this corpus instead of the config's");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the validation split");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--model", eval_model, "model checkpoint")->required();

    add_common(app.add_subcommand("optimize", "learn attribute weights by Bayesian optimization"),
               optimize_opts);

    auto* ablate_cmd = app.add_subcommand("ablate", "single-attribute filtering study");
    add_common(ablate_cmd, ablate_opts);
    ablate_cmd->add_option("--attribute", ablate_attribute,
                           "attribute name, index 0..6, or \"all\" (default)");
    ablate_cmd->add_option("--weights", ablate_weights, "weights for the combined-measure row");

    add_common(app.add_subcommand("kendall", "pairwise Kendall tau of the attributes"),
               kendall_opts);

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus with known noise");
    synth_cmd->add_option("--out-prefix", synth_prefix, "output path prefix")->required();
    synth_cmd->add_option("--count", synth_spec.count, "sample count");
    synth_cmd->add_option("--vocab-size", synth_spec.vocab_size, "vocabulary size");
    synth_cmd->add_option("--topics", synth_spec.topics, "topic count");
    synth_cmd->add_option("--rho-shuffle", synth_spec.rho_shuffle, "cross-topic response fraction");
    synth_cmd->add_option("--rho-generic", synth_spec.rho_generic, "generic response fraction");
    synth_cmd->add_option("--rho-repeat", synth_spec.rho_repeat, "repetitive response fraction");
    synth_cmd->add_option("--embed-dim", synth_spec.embed_dim, "embedding dimension");
    synth_cmd->add_option("--seed", synth_spec.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand("score")) return cmd_score(score_opts);
        if (app.got_subcommand("filter")) return cmd_filter(filter_opts, filter_weights);
        if (app.got_subcommand("train")) return cmd_train(train_opts, train_corpus);
        if (app.got_subcommand("eval")) return cmd_eval(eval_opts, eval_model);
        if (app.got_subcommand("optimize")) return cmd_optimize(optimize_opts);
        if (app.got_subcommand("ablate"))
            return cmd_ablate(ablate_opts, ablate_attribute, ablate_weights);
        if (app.got_subcommand("kendall")) return cmd_kendall(kendall_opts);
        if (app.got_subcommand("synth")) return cmd_synth(synth_spec, synth_prefix);
    } catch (const dialfilter::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
