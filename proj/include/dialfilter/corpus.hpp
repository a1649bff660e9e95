#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialfilter/common.hpp"

namespace dialfilter {

using TokenSeq = std::vector<std::string>;

// One context-response pair, optionally followed by the next utterance.
struct Sample {
    std::string id;
    std::vector<TokenSeq> context;  // >= 1 utterance, each >= 1 token
    TokenSeq response;              // >= 1 token
    std::optional<TokenSeq> next;
};

enum class SplitRole { train, validation, test };

struct Corpus {
    std::vector<Sample> samples;
    SplitRole role = SplitRole::train;

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
};

namespace detail {

// Unicode code points treated as whitespace for splitting.
inline bool is_space_cp(char32_t cp) {
    switch (cp) {
        case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
        case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

inline bool is_detached_punct(char32_t cp) {
    return cp == U'.' || cp == U',' || cp == U'!' || cp == U'?' ||
           cp == U';' || cp == U':' || cp == U'\'';
}

// Minimal UTF-8 decoding; invalid bytes pass through as single code units so
// tokenization never fails on odd input.
inline char32_t decode_utf8(const std::string& s, std::size_t& i) {
    unsigned char c = s[i];
    if (c < 0x80) {
        ++i;
        return c;
    }
    int extra;
    if ((c & 0xE0) == 0xC0)
        extra = 1;
    else if ((c & 0xF0) == 0xE0)
        extra = 2;
    else if ((c & 0xF8) == 0xF0)
        extra = 3;
    else {  // stray continuation byte
        ++i;
        return c;
    }
    if (i + extra >= s.size()) {  // truncated sequence
        ++i;
        return c;
    }
    char32_t cp = c & (0x7F >> (extra + 1));
    for (int k = 1; k <= extra; ++k) {
        unsigned char cc = s[i + k];
        if ((cc & 0xC0) != 0x80) {
            ++i;
            return c;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i += extra + 1;
    return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

}  // namespace detail

// Fixed rule: lowercase (ASCII range), split on unicode whitespace, and
// detach each of . , ! ? ; : ' as its own token. Empty input gives an empty
// sequence; emptiness checks belong to callers.
inline TokenSeq tokenize(const std::string& text) {
    TokenSeq out;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = detail::decode_utf8(text, i);
        if (detail::is_space_cp(cp)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else if (detail::is_detached_punct(cp)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
            out.push_back(std::string(1, static_cast<char>(cp)));
        } else {
            if (cp >= U'A' && cp <= U'Z') cp += 32;
            detail::append_utf8(cur, cp);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::string join_tokens(const TokenSeq& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

inline TokenSeq flatten_context(const Sample& s) {
    TokenSeq out;
    for (const auto& utt : s.context) out.insert(out.end(), utt.begin(), utt.end());
    return out;
}

// JSONL loader. One record per line:
//   {"id": ..., "context": [...], "response": ..., "next": ... | null}
// Unknown fields are rejected; ids must be unique; every utterance must
// tokenize to at least one token.
inline Corpus load_corpus(const std::string& path, SplitRole role) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open corpus file: " + path);

    Corpus corpus;
    corpus.role = role;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": malformed JSON record: " + e.what());
        }
        auto fail = [&](const std::string& msg) -> void {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + msg);
        };
        if (!rec.is_object()) fail("record is not an object");
        for (const auto& [key, _] : rec.items()) {
            if (key != "id" && key != "context" && key != "response" && key != "next")
                fail("unknown field \"" + key + "\"");
        }
        if (!rec.contains("id") || !rec["id"].is_string()) fail("missing string \"id\"");
        Sample s;
        s.id = rec["id"].get<std::string>();
        if (s.id.empty()) fail("empty id");
        if (!seen_ids.insert(s.id).second) fail("duplicate id \"" + s.id + "\"");

        if (!rec.contains("context") || !rec["context"].is_array() || rec["context"].empty())
            fail("sample \"" + s.id + "\": missing or empty \"context\" array");
        for (const auto& utt : rec["context"]) {
            if (!utt.is_string()) fail("sample \"" + s.id + "\": context utterance is not a string");
            TokenSeq toks = tokenize(utt.get<std::string>());
            if (toks.empty()) fail("sample \"" + s.id + "\": empty context utterance");
            s.context.push_back(std::move(toks));
        }
        if (!rec.contains("response") || !rec["response"].is_string())
            fail("sample \"" + s.id + "\": missing \"response\"");
        s.response = tokenize(rec["response"].get<std::string>());
        if (s.response.empty()) fail("sample \"" + s.id + "\": empty response");
        if (rec.contains("next") && !rec["next"].is_null()) {
            if (!rec["next"].is_string()) fail("sample \"" + s.id + "\": \"next\" is not a string");
            TokenSeq toks = tokenize(rec["next"].get<std::string>());
            if (toks.empty()) fail("sample \"" + s.id + "\": empty next utterance");
            s.next = std::move(toks);
        }
        corpus.samples.push_back(std::move(s));
    }
    return corpus;
}

// Writes the JSONL form; load(write(c)) reproduces ids, token sequences and
// order as long as tokens are in tokenize-normal form.
inline void write_corpus(const Corpus& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const auto& s : c.samples) {
        nlohmann::ordered_json rec;
        rec["id"] = s.id;
        std::vector<std::string> ctx;
        for (const auto& utt : s.context) ctx.push_back(join_tokens(utt));
        rec["context"] = ctx;
        rec["response"] = join_tokens(s.response);
        if (s.next)
            rec["next"] = join_tokens(*s.next);
        else
            rec["next"] = nullptr;
        out << rec.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

// Token ids. BOS/EOS/UNK are reserved; real tokens are assigned by
// descending count, ties broken lexicographically.
struct Vocabulary {
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;
    static constexpr int kUnk = 2;

    std::vector<std::string> tokens;  // index -> token
    std::vector<long> counts;         // index -> training count (0 for reserved)
    std::unordered_map<std::string, int> index;

    std::size_t size() const { return tokens.size(); }

    int lookup(const std::string& tok) const {
        auto it = index.find(tok);
        return it == index.end() ? kUnk : it->second;
    }

    // stable content hash, used to validate model checkpoints
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& t : tokens) h = fnv1a64(t + "\n", h);
        return h;
    }
};

inline std::vector<int> map_tokens(const TokenSeq& toks, const Vocabulary& vocab) {
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) ids.push_back(vocab.lookup(t));
    return ids;
}

inline Vocabulary build_vocab(const Corpus& c, long min_count = 1) {
    if (c.empty()) throw std::runtime_error("build_vocab: empty corpus");
    if (min_count < 1) throw std::runtime_error("build_vocab: min_count must be >= 1");

    std::unordered_map<std::string, long> counts;
    auto add = [&](const TokenSeq& toks) {
        for (const auto& t : toks) ++counts[t];
    };
    for (const auto& s : c.samples) {
        for (const auto& utt : s.context) add(utt);
        add(s.response);
        if (s.next) add(*s.next);
    }

    std::vector<std::pair<std::string, long>> kept;
    for (const auto& [tok, n] : counts) {
        if (tok == "<bos>" || tok == "<eos>" || tok == "<unk>") continue;
        if (n >= min_count) kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    v.tokens = {"<bos>", "<eos>", "<unk>"};
    v.counts = {0, 0, 0};
    for (std::size_t i = 0; i < v.tokens.size(); ++i) v.index[v.tokens[i]] = static_cast<int>(i);
    for (const auto& [tok, n] : kept) {
        v.index[tok] = static_cast<int>(v.tokens.size());
        v.tokens.push_back(tok);
        v.counts.push_back(n);
    }
    return v;
}

}  // namespace dialfilter
