#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dialfilter/corpus.hpp"
#include "oracles.hpp"

using namespace dialfilter;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("dialfilter_test_" + name)).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

TEST_CASE("tokenize applies the fixed rule") {
    CHECK(tokenize("Hello, world!") == TokenSeq{"hello", ",", "world", "!"});
    CHECK(tokenize("a") == TokenSeq{"a"});
    CHECK(tokenize("  I'm OK.  ") == TokenSeq{"i", "'", "m", "ok", "."});
    CHECK(tokenize("") == TokenSeq{});
    CHECK(tokenize("what?!") == TokenSeq{"what", "?", "!"});
    CHECK(tokenize("a b") == TokenSeq{"a", "b"});  // non-breaking space splits
}

TEST_CASE("tokenize is idempotent on its own space-joined output") {
    Rng rng(42);
    std::vector<std::string> pieces = {"Hello", "don't", "STOP.", "x,y", "??", "café", "a:b"};
    for (int trial = 0; trial < 50; ++trial) {
        std::string text;
        for (int i = 0; i < 6; ++i) text += pieces[rng.index(pieces.size())] + " ";
        TokenSeq once = tokenize(text);
        TokenSeq twice = tokenize(join_tokens(once));
        CHECK(once == twice);
    }
}

TEST_CASE("flatten_context concatenates utterances in order") {
    Sample s = oracle::mk_sample("x", {"a b", "c"}, "r");
    CHECK(flatten_context(s) == TokenSeq{"a", "b", "c"});

    Sample single = oracle::mk_sample("y", {"x"}, "r");
    CHECK(flatten_context(single) == TokenSeq{"x"});

    Sample three = oracle::mk_sample("z", {"p q", "r", "s t u"}, "v");
    CHECK(flatten_context(three).size() == 6);
    CHECK(flatten_context(three) == TokenSeq{"p", "q", "r", "s", "t", "u"});
}

TEST_CASE("load_corpus parses valid JSONL") {
    std::string path = temp_path("load_ok.jsonl");
    write_file(path,
               R"({"id":"a","context":["Hi there"],"response":"hello!","next":"bye"})"
               "\n"
               R"({"id":"b","context":["one","two"],"response":"three","next":null})"
               "\n");
    Corpus c = load_corpus(path, SplitRole::train);
    REQUIRE(c.size() == 2);
    CHECK(c.samples[0].id == "a");
    CHECK(c.samples[0].context.size() == 1);
    CHECK(c.samples[0].response == TokenSeq{"hello", "!"});
    CHECK(c.samples[0].next.has_value());
    CHECK_FALSE(c.samples[1].next.has_value());
    std::remove(path.c_str());
}

TEST_CASE("load_corpus rejects bad records") {
    auto expect_failure = [](const std::string& name, const std::string& content,
                             const std::string& needle) {
        std::string path = temp_path(name);
        write_file(path, content);
        try {
            load_corpus(path, SplitRole::train);
            FAIL("expected a load error for " << name);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
        std::remove(path.c_str());
    };

    expect_failure("malformed.jsonl", "{not json\n", ":1");
    expect_failure("missing_resp.jsonl", R"({"id":"x","context":["c"]})" "\n", "x");
    expect_failure("dup.jsonl",
                   R"({"id":"a","context":["c"],"response":"r"})" "\n"
                   R"({"id":"a","context":["c"],"response":"r"})" "\n",
                   "duplicate id");
    expect_failure("empty_utt.jsonl", R"({"id":"e","context":["  "],"response":"r"})" "\n", "e");
    expect_failure("empty_resp.jsonl", R"({"id":"f","context":["c"],"response":""})" "\n", "f");
    expect_failure("extra.jsonl",
                   R"({"id":"g","context":["c"],"response":"r","score":1})" "\n", "unknown field");
}

TEST_CASE("write/load round trip preserves ids, tokens and order") {
    Corpus c = oracle::mk_corpus({
        oracle::mk_sample("s1", {"hello there", "how are you?"}, "fine thanks!", "great."),
        oracle::mk_sample("s2", {"one"}, "two three"),
        oracle::mk_sample("s3", {"a b c"}, "d", "e f"),
    });
    std::string path = temp_path("roundtrip.jsonl");
    write_corpus(c, path);
    Corpus back = load_corpus(path, SplitRole::train);
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(back.samples[i].id == c.samples[i].id);
        CHECK(back.samples[i].context == c.samples[i].context);
        CHECK(back.samples[i].response == c.samples[i].response);
        CHECK(back.samples[i].next == c.samples[i].next);
    }
    std::remove(path.c_str());
}

TEST_CASE("write/load round trip of an empty corpus") {
    std::string path = temp_path("empty.jsonl");
    write_corpus(Corpus{}, path);
    Corpus back = load_corpus(path, SplitRole::train);
    CHECK(back.empty());
    std::remove(path.c_str());
}

TEST_CASE("build_vocab orders by count then token, reserves 0..2") {
    // counts {a:3, b:3, c:1}
    Corpus c = oracle::mk_corpus({
        oracle::mk_sample("1", {"a b"}, "a b"),
        oracle::mk_sample("2", {"a"}, "b c"),
    });
    Vocabulary v = build_vocab(c, 2);
    CHECK(v.size() == 5);
    CHECK(v.lookup("a") == 3);
    CHECK(v.lookup("b") == 4);
    CHECK(v.lookup("c") == Vocabulary::kUnk);
    CHECK(v.lookup("<bos>") == Vocabulary::kBos);

    Vocabulary all = build_vocab(c, 1);
    CHECK(all.size() == 6);
    CHECK(all.lookup("c") == 5);

    Corpus singles = oracle::mk_corpus({oracle::mk_sample("1", {"x y"}, "z w")});
    Vocabulary only_reserved = build_vocab(singles, 2);
    CHECK(only_reserved.size() == 3);
}

TEST_CASE("loaded corpora never contain empty utterances") {
    std::string path = temp_path("nonempty.jsonl");
    write_file(path, R"({"id":"a","context":["hi!"],"response":"yes."})" "\n");
    Corpus c = load_corpus(path, SplitRole::train);
    for (const auto& s : c.samples) {
        CHECK_FALSE(s.response.empty());
        for (const auto& u : s.context) CHECK_FALSE(u.empty());
    }
    std::remove(path.c_str());
}
