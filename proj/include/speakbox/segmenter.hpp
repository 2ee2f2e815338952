#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "speakbox/errors.hpp"
#include "speakbox/transcript.hpp"
#include "speakbox/vocab.hpp"

namespace speakbox {

// One piece of a segmentation: words [begin, end) mapped to a class.
struct Segment {
    size_t begin = 0;
    size_t end = 0;
    size_t class_index = 0;
    std::string class_id;
    double cost = 0;
};

// A partition of a word sequence into contiguous class-name segments.
struct Segmentation {
    std::vector<Segment> segments;
    double total_cost = 0;
};

// A class label with the time interval during which it was spoken.
struct TimedClassLabel {
    std::string class_id;
    double start = 0;
    double end = 0;
    size_t source_utterance = 0;
    std::string mapped_from;  // raw token string the class was inferred from

    double duration() const { return end - start; }
};

// Default DP bound: longest class name plus one token, so no vocabulary match
// is ever excluded.
inline size_t default_max_segment_len(const Vocabulary& vocab) {
    return vocab.max_name_tokens() + 1;
}

// Dissimilarity between a word subsequence and its nearest class name.
// Wholly unknown subsequences cost kUnknownPhraseCost and fall back to the
// first vocabulary class (the tie over all-equal distances).
inline NearestClass segment_class(std::span<const std::string> tokens,
                                  const ClassMatcher& matcher) {
    if (auto r = matcher.nearest_opt(tokens)) return *r;
    return NearestClass{0, kUnknownPhraseCost};
}

inline double subsequence_cost(std::span<const std::string> tokens, const Vocabulary& vocab,
                               const EmbeddingTable& table) {
    ClassMatcher matcher(vocab, table);
    return segment_class(tokens, matcher).distance;
}

// Minimal-cost segmentation over all partitions with segments of at most
// max_segment_len tokens. Suffix DP; cost ties prefer fewer segments, then a
// longer leftmost segment.
inline Segmentation segment_tokens(std::span<const std::string> tokens,
                                   const ClassMatcher& matcher, size_t max_segment_len) {
    const size_t n = tokens.size();
    if (n == 0) throw ValidationError("cannot segment an empty word sequence");
    if (max_segment_len == 0) throw ValidationError("max_segment_len must be positive");

    struct State {
        double cost = 0;
        size_t count = 0;  // segments in the optimal suffix
        size_t len = 0;    // first segment length of the optimal suffix
        NearestClass cls;
    };
    std::vector<State> suffix(n + 1);
    for (size_t i = n; i-- > 0;) {
        State best;
        bool have = false;
        const size_t max_len = std::min(max_segment_len, n - i);
        for (size_t len = 1; len <= max_len; ++len) {
            const NearestClass cls = segment_class(tokens.subspan(i, len), matcher);
            const State& rest = suffix[i + len];
            const double cand_cost = cls.distance + rest.cost;
            const size_t cand_count = 1 + rest.count;
            const bool better =
                !have || cand_cost < best.cost ||
                (cand_cost == best.cost &&
                 (cand_count < best.count || (cand_count == best.count && len > best.len)));
            if (better) {
                best = State{cand_cost, cand_count, len, cls};
                have = true;
            }
        }
        suffix[i] = best;
    }

    Segmentation seg;
    seg.total_cost = suffix[0].cost;
    for (size_t i = 0; i < n;) {
        const State& s = suffix[i];
        Segment piece;
        piece.begin = i;
        piece.end = i + s.len;
        piece.class_index = s.cls.index;
        piece.class_id = matcher.vocab().at(s.cls.index).id;
        piece.cost = s.cls.distance;
        seg.segments.push_back(std::move(piece));
        i += s.len;
    }
    return seg;
}

inline Segmentation segment(std::span<const std::string> tokens, const Vocabulary& vocab,
                            const EmbeddingTable& table, size_t max_segment_len) {
    ClassMatcher matcher(vocab, table);
    return segment_tokens(tokens, matcher, max_segment_len);
}

inline std::vector<std::string> word_texts(std::span<const TimedWord> words) {
    std::vector<std::string> tokens;
    tokens.reserve(words.size());
    for (const TimedWord& w : words) tokens.push_back(lowercase(w.text));
    return tokens;
}

inline Segmentation segment(std::span<const TimedWord> words, const Vocabulary& vocab,
                            const EmbeddingTable& table, size_t max_segment_len) {
    return segment(word_texts(words), vocab, table, max_segment_len);
}

struct SelectedTranscription {
    size_t alternative_index = 0;  // into Utterance::alternatives (rank order)
    Segmentation segmentation;
};

// Re-rank an utterance's alternatives by minimal segmentation cost; cost ties
// keep the alternative the recognizer ranked higher.
inline SelectedTranscription select_transcription(const Utterance& u, const ClassMatcher& matcher,
                                                  size_t max_segment_len) {
    SelectedTranscription best;
    bool have = false;
    for (size_t i = 0; i < u.alternatives.size(); ++i) {
        Segmentation seg =
            segment_tokens(word_texts(u.alternatives[i].words), matcher, max_segment_len);
        if (!have || seg.total_cost < best.segmentation.total_cost) {
            best = SelectedTranscription{i, std::move(seg)};
            have = true;
        }
    }
    return best;
}

inline SelectedTranscription select_transcription(const Utterance& u, const Vocabulary& vocab,
                                                  const EmbeddingTable& table) {
    ClassMatcher matcher(vocab, table);
    return select_transcription(u, matcher, default_max_segment_len(vocab));
}

struct SegmenterOptions {
    std::optional<size_t> max_segment_len;    // default derives from the vocabulary
    std::optional<double> reject_above;       // drop segments costing more than this
};

// End to end: pick the best alternative per utterance, map each segment to a
// class, and emit labels timed from first-word start to last-word end.
inline std::vector<TimedClassLabel> labels_from_transcript(const Transcript& t,
                                                           const ClassMatcher& matcher,
                                                           const SegmenterOptions& opts = {}) {
    const size_t max_len =
        opts.max_segment_len.value_or(default_max_segment_len(matcher.vocab()));
    std::vector<TimedClassLabel> labels;
    for (size_t ui = 0; ui < t.utterances.size(); ++ui) {
        const Utterance& u = t.utterances[ui];
        SelectedTranscription sel = select_transcription(u, matcher, max_len);
        const auto& words = u.alternatives[sel.alternative_index].words;
        const std::vector<std::string> raw = word_texts(words);
        for (const Segment& piece : sel.segmentation.segments) {
            if (opts.reject_above && piece.cost > *opts.reject_above) continue;
            TimedClassLabel label;
            label.class_id = piece.class_id;
            label.start = words[piece.begin].start;
            label.end = words[piece.end - 1].end;
            label.source_utterance = ui;
            label.mapped_from = join_tokens(
                std::span<const std::string>(raw).subspan(piece.begin, piece.end - piece.begin));
            labels.push_back(std::move(label));
        }
    }
    std::stable_sort(labels.begin(), labels.end(), [](const auto& a, const auto& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });
    return labels;
}

inline std::vector<TimedClassLabel> labels_from_transcript(const Transcript& t,
                                                           const Vocabulary& vocab,
                                                           const EmbeddingTable& table,
                                                           const SegmenterOptions& opts = {}) {
    ClassMatcher matcher(vocab, table);
    return labels_from_transcript(t, matcher, opts);
}

}  // namespace speakbox
