#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "speakbox/errors.hpp"

namespace speakbox {

using json = nlohmann::ordered_json;

// Cost assigned to a segment with no embeddable token and no exact match.
// Equals the cosine-distance maximum, so it is worse than any real match but
// still finite.
inline constexpr double kUnknownPhraseCost = 2.0;

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Lowercase and split on whitespace.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) tokens.push_back(lowercase(tok));
    return tokens;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

// Lowercase, collapse runs of whitespace to single spaces.
inline std::string normalize_name(std::string_view name) {
    return join_tokens(tokenize(name));
}

struct VocabEntry {
    std::string id;
    std::vector<std::string> name_tokens;
    std::string name;  // normalized, single-spaced
};

// The class vocabulary spoken names are matched against. Immutable after load.
class Vocabulary {
public:
    Vocabulary() = default;

    explicit Vocabulary(std::vector<std::pair<std::string, std::string>> id_name_pairs) {
        for (auto& [id, name] : id_name_pairs) add(id, name);
        if (classes_.empty()) throw ValidationError("vocabulary is empty");
    }

    const std::vector<VocabEntry>& classes() const { return classes_; }
    size_t size() const { return classes_.size(); }
    const VocabEntry& at(size_t i) const { return classes_.at(i); }

    std::optional<size_t> index_of_id(std::string_view id) const {
        auto it = by_id_.find(std::string(id));
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<size_t> index_of_name(std::string_view normalized) const {
        auto it = by_name_.find(std::string(normalized));
        if (it == by_name_.end()) return std::nullopt;
        return it->second;
    }

    bool contains_id(std::string_view id) const { return index_of_id(id).has_value(); }

    // Longest class name in tokens; the default segmentation bound adds one.
    size_t max_name_tokens() const {
        size_t n = 1;
        for (const auto& e : classes_) n = std::max(n, e.name_tokens.size());
        return n;
    }

private:
    void add(std::string id, const std::string& raw_name) {
        VocabEntry e;
        e.id = std::move(id);
        e.name_tokens = tokenize(raw_name);
        e.name = join_tokens(e.name_tokens);
        if (e.id.empty()) throw ValidationError("vocabulary class with empty id");
        if (e.name_tokens.empty()) {
            throw ValidationError("vocabulary class '" + e.id + "' has an empty name");
        }
        if (!by_id_.emplace(e.id, classes_.size()).second) {
            throw ValidationError("duplicate class id '" + e.id + "'");
        }
        if (!by_name_.emplace(e.name, classes_.size()).second) {
            throw ValidationError("duplicate class name '" + e.name + "' after normalization");
        }
        classes_.push_back(std::move(e));
    }

    std::vector<VocabEntry> classes_;
    std::unordered_map<std::string, size_t> by_id_;
    std::unordered_map<std::string, size_t> by_name_;
};

inline Vocabulary vocabulary_from_json(const json& j) {
    if (!j.is_object() || !j.contains("classes") || !j["classes"].is_array()) {
        throw ValidationError("vocabulary JSON must be {\"classes\": [...]}");
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& c : j["classes"]) {
        if (!c.is_object() || !c.contains("id") || !c.contains("name")) {
            throw ValidationError("vocabulary class entries need 'id' and 'name'");
        }
        pairs.emplace_back(c["id"].get<std::string>(), c["name"].get<std::string>());
    }
    return Vocabulary(std::move(pairs));
}

inline Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("vocabulary parse error in " + path + ": " + e.what());
    }
    return vocabulary_from_json(j);
}

// token -> dense vector, all of the same dimension. Immutable after load.
class EmbeddingTable {
public:
    EmbeddingTable() = default;

    EmbeddingTable(size_t dim, std::vector<std::pair<std::string, std::vector<double>>> rows)
        : dim_(dim) {
        for (auto& [tok, vec] : rows) add(tok, std::move(vec));
    }

    size_t dim() const { return dim_; }
    size_t size() const { return entries_.size(); }

    const std::vector<double>* find(std::string_view token) const {
        auto it = entries_.find(std::string(token));
        if (it == entries_.end()) return nullptr;
        return &it->second;
    }

    void add(const std::string& token, std::vector<double> vec) {
        if (dim_ == 0) dim_ = vec.size();
        if (vec.size() != dim_) {
            throw ValidationError("embedding for '" + token + "' has dimension " +
                                  std::to_string(vec.size()) + ", expected " +
                                  std::to_string(dim_));
        }
        bool all_zero = true;
        for (double v : vec) {
            if (!std::isfinite(v)) {
                throw ValidationError("embedding for '" + token + "' has a non-finite value");
            }
            if (v != 0.0) all_zero = false;
        }
        if (all_zero) throw ValidationError("embedding for '" + token + "' is all-zero");
        if (!entries_.emplace(lowercase(token), std::move(vec)).second) {
            throw ValidationError("duplicate embedding token '" + token + "'");
        }
    }

private:
    size_t dim_ = 0;
    std::unordered_map<std::string, std::vector<double>> entries_;
};

// Plain-text format: one line per token, `token v1 v2 ... vd`.
// An optional first line `<count> <dim>` is accepted and skipped.
inline EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embeddings file: " + path);

    EmbeddingTable table;
    std::string line;
    size_t line_no = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        std::vector<double> vec;
        double v;
        while (ls >> v) vec.push_back(v);
        if (!ls.eof()) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": malformed embedding value");
        }
        if (first_data_line) {
            first_data_line = false;
            // Header line: two integers, the first of which parses as a count.
            char* endp = nullptr;
            std::strtod(token.c_str(), &endp);
            const bool token_numeric = endp && *endp == '\0';
            if (token_numeric && vec.size() == 1) continue;
        }
        if (vec.empty()) {
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": embedding line with no values");
        }
        table.add(token, std::move(vec));
    }
    if (table.size() == 0) throw ValidationError("embedding table is empty: " + path);
    return table;
}

// Mean of the vectors of the tokens present in the table; absent tokens are
// skipped so ASR fragments do not invalidate a whole phrase.
inline std::optional<std::vector<double>> embed_phrase_opt(std::span<const std::string> tokens,
                                                           const EmbeddingTable& table) {
    std::vector<double> sum(table.dim(), 0.0);
    size_t n = 0;
    for (const std::string& tok : tokens) {
        if (const std::vector<double>* v = table.find(tok)) {
            for (size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    for (double& x : sum) x /= static_cast<double>(n);
    return sum;
}

inline std::vector<double> embed_phrase(std::span<const std::string> tokens,
                                        const EmbeddingTable& table) {
    if (tokens.empty()) throw ValidationError("cannot embed an empty phrase");
    auto v = embed_phrase_opt(tokens, table);
    if (!v) throw UnknownPhraseError("no token of phrase '" + join_tokens(tokens) +
                                     "' is in the embedding table");
    return *std::move(v);
}

// 1 - cosine similarity, in [0, 2]. Zero-norm inputs (possible when token
// vectors cancel in the mean) get distance 1.
inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 1.0;
    double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(d, 0.0, 2.0);
}

// Embedding dissimilarity between two phrases. Exact normalized string
// equality short-circuits to 0, so in-vocabulary transcriptions always cost 0.
inline double phrase_distance(std::span<const std::string> a, std::span<const std::string> b,
                              const EmbeddingTable& table) {
    if (join_tokens(a) == join_tokens(b)) return 0.0;
    return cosine_distance(embed_phrase(a, table), embed_phrase(b, table));
}

struct NearestClass {
    size_t index = 0;
    double distance = 0;
};

// Precomputes class-name embeddings so repeated nearest-class queries stay
// cheap inside the segmentation DP. Read-only once built.
class ClassMatcher {
public:
    ClassMatcher(const Vocabulary& vocab, const EmbeddingTable& table)
        : vocab_(&vocab), table_(&table) {
        class_vecs_.reserve(vocab.size());
        for (const VocabEntry& e : vocab.classes()) {
            class_vecs_.push_back(embed_phrase_opt(e.name_tokens, table));
        }
    }

    const Vocabulary& vocab() const { return *vocab_; }
    const EmbeddingTable& table() const { return *table_; }

    // Nearest class by phrase distance; ties go to the earlier vocabulary
    // entry. nullopt when nothing is embeddable and no exact match exists.
    std::optional<NearestClass> nearest_opt(std::span<const std::string> tokens) const {
        if (auto idx = vocab_->index_of_name(join_tokens(tokens))) {
            return NearestClass{*idx, 0.0};
        }
        auto q = embed_phrase_opt(tokens, *table_);
        if (!q) return std::nullopt;
        NearestClass best{0, kUnknownPhraseCost};
        bool found = false;
        for (size_t i = 0; i < class_vecs_.size(); ++i) {
            // A class whose own name is not embeddable keeps the maximum cost.
            const double d =
                class_vecs_[i] ? cosine_distance(*q, *class_vecs_[i]) : kUnknownPhraseCost;
            if (!found || d < best.distance) {
                best = NearestClass{i, d};
                found = true;
            }
        }
        return best;
    }

private:
    const Vocabulary* vocab_;
    const EmbeddingTable* table_;
    std::vector<std::optional<std::vector<double>>> class_vecs_;
};

// Map a phrase to the closest vocabulary class.
inline std::pair<std::string, double> nearest_class(std::span<const std::string> tokens,
                                                    const Vocabulary& vocab,
                                                    const EmbeddingTable& table) {
    ClassMatcher matcher(vocab, table);
    auto r = matcher.nearest_opt(tokens);
    if (!r) {
        throw UnknownPhraseError("phrase '" + join_tokens(tokens) +
                                 "' matches no class and has no embeddable token");
    }
    return {vocab.at(r->index).id, r->distance};
}

}  // namespace speakbox
