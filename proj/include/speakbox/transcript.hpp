#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "speakbox/errors.hpp"

namespace speakbox {

// One recognized word with its start/end time in seconds.
struct TimedWord {
    std::string text;
    double start = 0;
    double end = 0;

    bool operator==(const TimedWord&) const = default;
};

// One candidate word sequence for an utterance. rank 1 is the recognizer's
// preferred alternative.
struct TranscriptionAlternative {
    int rank = 1;
    std::vector<TimedWord> words;

    bool operator==(const TranscriptionAlternative&) const = default;
};

// A continuous speech block enclosed by pauses, with its ranked alternatives
// (sorted by rank, ranks are exactly 1..n).
struct Utterance {
    std::vector<TranscriptionAlternative> alternatives;

    const TranscriptionAlternative& preferred() const { return alternatives.front(); }

    bool operator==(const Utterance&) const = default;
};

struct Transcript {
    std::vector<Utterance> utterances;

    bool operator==(const Transcript&) const = default;
};

// Min start / max end over the preferred alternative's words.
inline std::pair<double, double> utterance_span(const Utterance& u) {
    const auto& words = u.preferred().words;
    double start = words.front().start;
    double end = words.front().end;
    for (const TimedWord& w : words) {
        start = std::min(start, w.start);
        end = std::max(end, w.end);
    }
    return {start, end};
}

namespace detail {

inline void validate_alternative(const TranscriptionAlternative& alt, const std::string& where) {
    if (alt.words.empty()) {
        throw ValidationError(where + ": alternative has no words");
    }
    double prev_start = -std::numeric_limits<double>::infinity();
    for (const TimedWord& w : alt.words) {
        if (!std::isfinite(w.start) || !std::isfinite(w.end) || w.start < 0 || w.end < 0) {
            throw ValidationError(where + ": word '" + w.text +
                                  "' has non-finite or negative times");
        }
        if (w.start > w.end) {
            throw ValidationError(where + ": word '" + w.text + "' starts after it ends");
        }
        if (w.start < prev_start) {
            throw ValidationError(where + ": words are not ordered by start time");
        }
        prev_start = w.start;
    }
}

}  // namespace detail

// Sorts alternatives by rank and utterances by start time; everything else is
// validated as-is.
inline Transcript validate_transcript(Transcript t) {
    for (size_t ui = 0; ui < t.utterances.size(); ++ui) {
        Utterance& u = t.utterances[ui];
        const std::string where = "utterance " + std::to_string(ui);
        if (u.alternatives.empty()) {
            throw ValidationError(where + ": utterance has no alternatives");
        }
        std::stable_sort(u.alternatives.begin(), u.alternatives.end(),
                         [](const auto& a, const auto& b) { return a.rank < b.rank; });
        for (size_t i = 0; i < u.alternatives.size(); ++i) {
            if (u.alternatives[i].rank == static_cast<int>(i)) {
                throw ValidationError(where + ": duplicate alternative rank " +
                                      std::to_string(u.alternatives[i].rank));
            }
            if (u.alternatives[i].rank != static_cast<int>(i + 1)) {
                throw ValidationError(where + ": alternative ranks must be 1..n, got " +
                                      std::to_string(u.alternatives[i].rank));
            }
            detail::validate_alternative(u.alternatives[i], where);
        }
    }
    std::stable_sort(t.utterances.begin(), t.utterances.end(),
                     [](const Utterance& a, const Utterance& b) {
                         return utterance_span(a).first < utterance_span(b).first;
                     });
    return t;
}

inline nlohmann::ordered_json transcript_to_json(const Transcript& t) {
    nlohmann::ordered_json j;
    j["utterances"] = nlohmann::ordered_json::array();
    for (const Utterance& u : t.utterances) {
        nlohmann::ordered_json ju;
        ju["alternatives"] = nlohmann::ordered_json::array();
        for (const TranscriptionAlternative& alt : u.alternatives) {
            nlohmann::ordered_json ja;
            ja["rank"] = alt.rank;
            ja["words"] = nlohmann::ordered_json::array();
            for (const TimedWord& w : alt.words) {
                ja["words"].push_back({{"text", w.text}, {"start", w.start}, {"end", w.end}});
            }
            ju["alternatives"].push_back(std::move(ja));
        }
        j["utterances"].push_back(std::move(ju));
    }
    return j;
}

inline Transcript transcript_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object() || !j.contains("utterances") || !j["utterances"].is_array()) {
        throw ValidationError("transcript JSON must be {\"utterances\": [...]}");
    }
    Transcript t;
    for (const auto& ju : j["utterances"]) {
        Utterance u;
        if (!ju.contains("alternatives") || !ju["alternatives"].is_array()) {
            throw ValidationError("transcript utterance without 'alternatives'");
        }
        for (const auto& ja : ju["alternatives"]) {
            TranscriptionAlternative alt;
            alt.rank = ja.value("rank", 1);
            if (!ja.contains("words") || !ja["words"].is_array()) {
                throw ValidationError("transcription alternative without 'words'");
            }
            for (const auto& jw : ja["words"]) {
                TimedWord w;
                w.text = jw.at("text").get<std::string>();
                w.start = jw.at("start").get<double>();
                w.end = jw.at("end").get<double>();
                alt.words.push_back(std::move(w));
            }
            u.alternatives.push_back(std::move(alt));
        }
        t.utterances.push_back(std::move(u));
    }
    return validate_transcript(std::move(t));
}

inline Transcript load_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open transcript file: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("transcript parse error in " + path + ": " + e.what());
    }
    try {
        return transcript_from_json(j);
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("transcript schema error in " + path + ": " + e.what());
    }
}

inline void save_transcript(const std::string& path, const Transcript& t) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write transcript file: " + path);
    out << transcript_to_json(t).dump() << '\n';
}

}  // namespace speakbox
