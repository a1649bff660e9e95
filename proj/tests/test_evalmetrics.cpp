#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "dialfilter/evalmetrics.hpp"
#include "dialfilter/synthgen.hpp"
#include "oracles.hpp"

using namespace dialfilter;
using Catch::Approx;

TEST_CASE("bleu identity, zero overlap, and the hand-smoothing case") {
    std::vector<TokenSeq> refs = {tokenize("the cat sat down"), tokenize("hello world again")};
    CHECK(bleu(refs, refs) == Approx(1.0));

    std::vector<TokenSeq> disjoint = {tokenize("x y z w"), tokenize("q r s t")};
    CHECK(bleu(disjoint, refs) == 0.0);  // p1 = 0, unsmoothed

    std::vector<TokenSeq> cand = {tokenize("a b c d")};
    std::vector<TokenSeq> ref = {tokenize("a b c e")};
    // p1=3/4 raw; smoothed p2=(2+1)/(3+1), p3=(1+1)/(2+1), p4=(0+1)/(1+1); BP=1
    double want = std::exp((std::log(3.0 / 4.0) + std::log(3.0 / 4.0) + std::log(2.0 / 3.0) +
                            std::log(1.0 / 2.0)) /
                           4.0);
    CHECK(bleu(cand, ref) == Approx(want).margin(1e-12));
    CHECK(bleu(cand, ref) == Approx(oracle::bleu(cand, ref)).margin(1e-9));

    CHECK_THROWS(bleu(cand, refs));
    CHECK_THROWS(bleu({}, {}));
}

TEST_CASE("bleu matches the oracle transcription on random pairs") {
    Rng rng(19);
    std::vector<TokenSeq> cands, refs;
    for (int i = 0; i < 20; ++i) {
        TokenSeq c, r;
        std::size_t lc = 1 + rng.index(8), lr = 1 + rng.index(8);
        for (std::size_t k = 0; k < lc; ++k) c.push_back("w" + std::to_string(rng.index(6)));
        for (std::size_t k = 0; k < lr; ++k) r.push_back("w" + std::to_string(rng.index(6)));
        cands.push_back(c);
        refs.push_back(r);
    }
    CHECK(bleu(cands, refs) == Approx(oracle::bleu(cands, refs)).margin(1e-9));
}

TEST_CASE("dist_n pools n-grams corpus-wide") {
    std::vector<TokenSeq> two = {tokenize("a b"), tokenize("a b")};
    CHECK(dist_n(two, 1) == Approx(0.5));  // 2 distinct / 4 total

    std::vector<TokenSeq> identical = {{"x"}, {"x"}, {"x"}, {"x"}};
    CHECK(dist_n(identical, 1) == Approx(0.25));  // 1 distinct over N totals

    std::vector<TokenSeq> unique = {tokenize("a b"), tokenize("c d")};
    CHECK(dist_n(unique, 2) == 1.0);

    std::vector<TokenSeq> short_only = {{"x"}, {"y"}};
    CHECK_THROWS_WITH(dist_n(short_only, 2), Catch::Matchers::ContainsSubstring("no n-grams"));
    CHECK_THROWS(dist_n(two, 4));
}

TEST_CASE("intra_n averages per-response ratios") {
    std::vector<TokenSeq> rs = {{"x", "x", "x"}, {"a", "b"}};
    CHECK(intra_n(rs, 1) == Approx((1.0 / 3.0 + 1.0) / 2.0));  // = 2/3

    std::vector<TokenSeq> distinct = {tokenize("a b c"), tokenize("d e")};
    CHECK(intra_n(distinct, 1) == 1.0);

    std::vector<TokenSeq> single = {{"p", "q", "p"}};
    CHECK(intra_n(single, 1) == Approx(2.0 / 3.0));  // mean of one response

    // responses shorter than n are skipped from the average
    std::vector<TokenSeq> mixed = {{"x"}, {"a", "a"}};
    CHECK(intra_n(mixed, 2) == Approx(1.0));  // only "a a" has a bigram
}

TEST_CASE("ent_n is the pooled n-gram entropy in nats") {
    std::vector<TokenSeq> one_type = {{"x", "x"}, {"x"}};
    CHECK(ent_n(one_type, 1) == Approx(0.0));

    std::vector<TokenSeq> two_types = {{"a", "b"}};
    CHECK(ent_n(two_types, 1) == Approx(std::log(2.0)));

    // counts {a:2, b:1, c:1} -> ln4 - (1/2) ln2
    std::vector<TokenSeq> skewed = {{"a", "a", "b", "c"}};
    CHECK(ent_n(skewed, 1) == Approx(std::log(4.0) - 0.5 * std::log(2.0)).margin(1e-12));
}

TEST_CASE("diversity metrics match independent transcriptions on random inputs") {
    Rng rng(27);
    std::vector<TokenSeq> responses;
    for (int i = 0; i < 20; ++i) {
        TokenSeq r;
        std::size_t len = 1 + rng.index(7);
        for (std::size_t k = 0; k < len; ++k) r.push_back("w" + std::to_string(rng.index(5)));
        responses.push_back(r);
    }
    auto key = [](const TokenSeq& r, std::size_t i, std::size_t n) {
        std::string s;
        for (std::size_t k = 0; k < n; ++k) s += r[i + k] + "|";
        return s;
    };
    for (std::size_t n : {1ul, 2ul, 3ul}) {
        std::map<std::string, long> pooled;
        long total = 0;
        double intra_sum = 0;
        long intra_cnt = 0;
        for (const auto& r : responses) {
            if (r.size() < n) continue;
            std::map<std::string, long> local;
            for (std::size_t i = 0; i + n <= r.size(); ++i) {
                ++pooled[key(r, i, n)];
                ++local[key(r, i, n)];
                ++total;
            }
            long local_total = 0;
            for (const auto& [_, c] : local) local_total += c;
            intra_sum += double(local.size()) / double(local_total);
            ++intra_cnt;
        }
        double want_dist = double(pooled.size()) / double(total);
        double want_ent = 0;
        for (const auto& [_, c] : pooled) {
            double p = double(c) / double(total);
            want_ent -= p * std::log(p);
        }
        CHECK(dist_n(responses, n) == Approx(want_dist).margin(1e-9));
        CHECK(intra_n(responses, n) == Approx(intra_sum / double(intra_cnt)).margin(1e-9));
        CHECK(ent_n(responses, n) == Approx(want_ent).margin(1e-9));
    }
}

TEST_CASE("embedding metrics agree with a direct vector-space transcription") {
    Rng rng(33);
    EmbeddingTable t;
    t.dim = 3;
    for (int i = 0; i < 6; ++i)
        t.vectors["w" + std::to_string(i)] = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                                              rng.uniform(-1, 1)};
    auto vec_of = [&](const std::string& tok) {
        auto it = t.vectors.find(tok);
        return it == t.vectors.end() ? std::vector<double>(3, 0.0) : it->second;
    };
    for (int trial = 0; trial < 20; ++trial) {
        TokenSeq cand, ref;
        std::size_t lc = 1 + rng.index(5), lr = 1 + rng.index(5);
        for (std::size_t k = 0; k < lc; ++k) cand.push_back("w" + std::to_string(rng.index(7)));
        for (std::size_t k = 0; k < lr; ++k) ref.push_back("w" + std::to_string(rng.index(7)));

        auto mean_of = [&](const TokenSeq& s) {
            std::vector<double> m(3, 0.0);
            for (const auto& tok : s) {
                auto v = vec_of(tok);
                for (int d = 0; d < 3; ++d) m[d] += v[d];
            }
            for (auto& x : m) x /= double(s.size());
            return m;
        };
        CHECK(emb_average(cand, ref, t) ==
              Approx(oracle::cosine(mean_of(cand), mean_of(ref))).margin(1e-9));

        auto ext_of = [&](const TokenSeq& s) {
            std::vector<double> e(3, 0.0);
            for (const auto& tok : s) {
                auto v = vec_of(tok);
                for (int d = 0; d < 3; ++d)
                    if (std::fabs(v[d]) > std::fabs(e[d])) e[d] = v[d];
            }
            return e;
        };
        CHECK(emb_extrema(cand, ref, t) ==
              Approx(oracle::cosine(ext_of(cand), ext_of(ref))).margin(1e-9));

        auto greedy_dir = [&](const TokenSeq& from, const TokenSeq& to) {
            double sum = 0;
            for (const auto& f : from) {
                double best = -1;
                for (const auto& g : to) best = std::max(best, oracle::cosine(vec_of(f), vec_of(g)));
                sum += best;
            }
            return sum / double(from.size());
        };
        CHECK(emb_greedy(cand, ref, t) ==
              Approx(0.5 * (greedy_dir(cand, ref) + greedy_dir(ref, cand))).margin(1e-9));
    }
}

TEST_CASE("embedding metrics on the worked two-word example") {
    EmbeddingTable t;
    t.dim = 2;
    t.vectors = {{"p", {1.0, 0.0}}, {"q", {0.0, 1.0}}};

    TokenSeq cand = {"p", "q"};
    TokenSeq ref = {"p"};
    CHECK(emb_average(cand, ref, t) == Approx(1.0 / std::sqrt(2.0)));
    CHECK(emb_greedy(cand, ref, t) == Approx(0.75));
    CHECK(emb_extrema(cand, ref, t) == Approx(1.0 / std::sqrt(2.0)));

    CHECK(emb_average(cand, cand, t) == Approx(1.0));
    CHECK(emb_greedy(cand, cand, t) == Approx(1.0));
    CHECK(emb_extrema(cand, cand, t) == Approx(1.0));

    TokenSeq p = {"p"}, q = {"q"};
    CHECK(emb_average(p, q, t) == Approx(0.0));
    CHECK(emb_greedy(p, q, t) == Approx(0.0));
    CHECK(emb_extrema(p, q, t) == Approx(0.0));

    CHECK_THROWS(emb_average({}, ref, t));
}

TEST_CASE("coherence_metric equals the relatedness computation exactly") {
    EmbeddingTable t;
    t.dim = 3;
    t.vectors = {{"a", {1, 2, 0}}, {"b", {0, 1, 1}}, {"c", {2, 0, 1}}};
    UnigramStats stats;
    stats.prob = {{"a", 0.1}, {"b", 0.02}};

    Sample s = oracle::mk_sample("x", {"a b", "c"}, "b c a");
    double rel = relatedness(s, t, stats);
    double coh = coherence_metric(flatten_context(s), s.response, t, stats);
    CHECK(coh == rel);  // shared definition, bit-identical

    TokenSeq oov = {"zzz"};
    CHECK(coherence_metric(flatten_context(s), oov, t, stats) == 0.0);
}

TEST_CASE("evaluate_objective: +ppl of the uniform model is |V|") {
    SynthSpec spec;
    spec.count = 30;
    spec.vocab_size = 24;
    spec.topics = 3;
    spec.seed = 4;
    SynthResult gen = generate_corpus(spec);
    auto vocab = std::make_shared<Vocabulary>(build_vocab(gen.corpus));
    ModelParams uniform = init_params(vocab, 8, 1);
    UnigramStats stats = unigram_probs(gen.corpus);

    double j = evaluate_objective(Objective::Kind::plus_ppl, uniform, gen.corpus,
                                  gen.embeddings, stats);
    CHECK(j == Approx(double(vocab->size())).margin(1e-9));
}

TEST_CASE("evaluate_objective: -metric is the negated 13-metric sum") {
    SynthSpec spec;
    spec.count = 25;
    spec.vocab_size = 24;
    spec.topics = 3;
    spec.seed = 6;
    SynthResult gen = generate_corpus(spec);
    auto vocab = std::make_shared<Vocabulary>(build_vocab(gen.corpus));
    ModelParams uniform = init_params(vocab, 8, 2);
    UnigramStats stats = unigram_probs(gen.corpus);

    MetricReport rep = evaluate_metrics(uniform, gen.corpus, gen.embeddings, stats);
    double j = evaluate_objective(Objective::Kind::neg_metric_sum, uniform, gen.corpus,
                                  gen.embeddings, stats);
    CHECK(j == Approx(-rep.sum13()).margin(1e-12));
    CHECK(rep.pairs_total == 25);
    CHECK(rep.pairs_scored == 25);  // uniform decodes are non-empty

    // deterministic: same inputs, same report
    MetricReport again = evaluate_metrics(uniform, gen.corpus, gen.embeddings, stats);
    CHECK(again.sum13() == rep.sum13());
    CHECK(again.bleu_score == rep.bleu_score);

    // improving one metric while others stay fixed lowers J
    MetricReport better = rep;
    better.dist1 = rep.dist1 + 0.1;
    CHECK(-better.sum13() < -rep.sum13());
}

TEST_CASE("metric ranges hold on a decoded corpus") {
    SynthSpec spec;
    spec.count = 30;
    spec.vocab_size = 32;
    spec.topics = 4;
    spec.seed = 12;
    SynthResult gen = generate_corpus(spec);
    auto vocab = std::make_shared<Vocabulary>(build_vocab(gen.corpus));
    ModelParams model = init_params(vocab, 12, 3);
    Rng rng(8);
    for (auto& x : model.out_w) x = 0.3 * rng.normal();  // arbitrary non-uniform scorer
    UnigramStats stats = unigram_probs(gen.corpus);

    MetricReport rep = evaluate_metrics(model, gen.corpus, gen.embeddings, stats);
    for (double d : {rep.dist1, rep.dist2, rep.dist3, rep.intra1, rep.intra2, rep.intra3}) {
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
    CHECK(rep.ent1 >= 0.0);
    CHECK(rep.ent2 >= 0.0);
    CHECK(rep.bleu_score >= 0.0);
    CHECK(rep.bleu_score <= 1.0);
    for (double e : {rep.average, rep.greedy, rep.extrema, rep.coherence}) {
        CHECK(e >= -1.0);
        CHECK(e <= 1.0);
    }
}
