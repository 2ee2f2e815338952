#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "speakbox/annotations.hpp"
#include "speakbox/errors.hpp"
#include "speakbox/eventlog.hpp"
#include "speakbox/geometry.hpp"
#include "speakbox/rng.hpp"
#include "speakbox/transcript.hpp"
#include "speakbox/vocab.hpp"

namespace speakbox {

// Behavioural knobs of the synthetic annotator. Probabilities are per-event;
// everything is driven by one seed, so equal inputs give identical sessions.
struct SimParams {
    uint64_t seed = 0;

    // Speech usually starts a little before the first click on the object.
    double speech_lead_mean = 0.3;
    double speech_lead_sigma = 0.15;

    // Spoken class-name duration; most names take 0.5 to 2 seconds.
    double utterance_min = 0.5;
    double utterance_max = 2.0;

    // How far speech may run past the last click of its object.
    double speech_past_end = 0.0;

    // Time spent drawing one box / pause between objects.
    double box_draw_min = 1.0;
    double box_draw_max = 3.0;
    double gap_min = 0.5;
    double gap_max = 1.5;

    double pause_merge_prob = 0.0;       // merge adjacent names into one utterance
    double asr_substitution_prob = 0.0;  // per word; creates a wrong rank-1 alternative
    double forget_speech_prob = 0.0;     // object drawn but never named
    double discard_box_prob = 0.0;       // name said but the box thrown away
    double click_jitter = 0.0;           // pixel sigma on the extreme clicks
};

inline void validate_sim_params(const SimParams& p) {
    auto prob = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError(std::string(name) + " must be in [0, 1]");
        }
    };
    prob(p.pause_merge_prob, "pause_merge_prob");
    prob(p.asr_substitution_prob, "asr_substitution_prob");
    prob(p.forget_speech_prob, "forget_speech_prob");
    prob(p.discard_box_prob, "discard_box_prob");
    if (!(p.utterance_min > 0) || p.utterance_max < p.utterance_min) {
        throw ValidationError("utterance duration range must be positive");
    }
    if (!(p.box_draw_min > 0) || p.box_draw_max < p.box_draw_min) {
        throw ValidationError("box draw duration range must be positive");
    }
    if (p.gap_min < 0 || p.gap_max < p.gap_min) {
        throw ValidationError("object gap range must be non-negative");
    }
    if (p.click_jitter < 0) throw ValidationError("click_jitter must be non-negative");
    if (p.speech_lead_sigma < 0) throw ValidationError("speech_lead_sigma must be non-negative");
    if (p.speech_past_end < 0) throw ValidationError("speech_past_end must be non-negative");
}

// What actually happened to each ground-truth object, for closing the loop in
// tests and analytics.
struct TraceObject {
    std::string class_id;
    bool speech_dropped = false;
    bool box_discarded = false;
    std::optional<size_t> utterance_index;  // absent when speech was dropped
};

struct TraceImage {
    std::string image_id;
    std::vector<TraceObject> objects;
};

struct TruthTrace {
    std::vector<TraceImage> images;
};

struct SimOutput {
    SessionLog log;
    std::map<std::string, Transcript> transcripts;  // keyed by image_id
    TruthTrace trace;
};

// Fixed ASR confusion fixture: tokens that sound alike. Tokens without an
// entry map to themselves.
inline const std::map<std::string, std::vector<std::string>>& confusion_table() {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"person", {"ocean"}}, {"dining", {"dying"}},   {"table", {"cable"}},
        {"boat", {"goat"}},    {"goat", {"boat"}},      {"stove", {"oven"}},
        {"oven", {"stove"}},   {"sheep", {"ship"}},     {"cat", {"hat"}},
        {"dog", {"fog"}},      {"car", {"tar"}},        {"bottle", {"battle"}},
        {"light", {"lite"}},   {"bear", {"bare"}},
    };
    return table;
}

inline std::string confusable(const std::string& token, Rng& rng) {
    const auto& table = confusion_table();
    auto it = table.find(token);
    if (it == table.end() || it->second.empty()) return token;
    return it->second[rng.pick(it->second.size())];
}

namespace detail {

struct SpokenGroup {
    size_t object_index = 0;
    std::vector<TimedWord> words;
};

// Extreme clicks at the box edge midpoints, jittered; times span the draw
// interval with the first and last click at its ends.
inline ObjectEvent synth_box_event(const Box& b, double t_first, double t_last, double jitter,
                                   Rng& rng) {
    const double cx = 0.5 * (b.x0 + b.x1);
    const double cy = 0.5 * (b.y0 + b.y1);
    double t_mid1 = rng.uniform(t_first, t_last);
    double t_mid2 = rng.uniform(t_first, t_last);
    if (t_mid1 > t_mid2) std::swap(t_mid1, t_mid2);
    std::vector<Click> clicks = {
        {cx, b.y0, t_first},  // top
        {cx, b.y1, t_mid1},   // bottom
        {b.x0, cy, t_mid2},   // left
        {b.x1, cy, t_last},   // right
    };
    if (jitter > 0) {
        for (Click& c : clicks) {
            c.x = std::max(0.0, c.x + rng.gaussian(0.0, jitter));
            c.y = std::max(0.0, c.y + rng.gaussian(0.0, jitter));
        }
    }
    return make_object_event(EventKind::Box, std::move(clicks));
}

inline std::vector<TimedWord> synth_words(const std::vector<std::string>& tokens, double start,
                                          double end) {
    std::vector<TimedWord> words;
    const double step = (end - start) / static_cast<double>(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        TimedWord w;
        w.text = tokens[i];
        w.start = start + step * static_cast<double>(i);
        w.end = (i + 1 == tokens.size()) ? end : start + step * static_cast<double>(i + 1);
        words.push_back(std::move(w));
    }
    return words;
}

}  // namespace detail

// Simulate one annotation session per ground-truth image: extreme-click box
// events plus a transcript of the spoken class names, with the configured
// noise applied. Per-image RNG streams are derived from (seed, image_id), so
// the output does not depend on processing order.
inline SimOutput simulate(const AnnotationSet& gt, const Vocabulary& vocab,
                          const SimParams& params) {
    validate_sim_params(params);
    SimOutput out;
    for (const AnnotatedImage& gt_img : gt.images) {
        Rng rng(mix_seed(params.seed, fnv1a64(gt_img.image_id)));

        SessionImage session;
        session.image_id = gt_img.image_id;
        TraceImage trace_img;
        trace_img.image_id = gt_img.image_id;

        std::vector<detail::SpokenGroup> groups;
        double t = 0;
        double min_time = 0;
        double max_time = 0;
        double prev_speech_end = -std::numeric_limits<double>::infinity();

        for (size_t oi = 0; oi < gt_img.objects.size(); ++oi) {
            const ObjectAnnotation& obj = gt_img.objects[oi];
            if (!obj.is_box() || !obj.class_id) {
                throw ValidationError("image '" + gt_img.image_id +
                                      "': simulation needs labeled ground-truth boxes");
            }
            auto class_idx = vocab.index_of_id(*obj.class_id);
            if (!class_idx) {
                throw ValidationError("ground-truth class '" + *obj.class_id +
                                      "' is not in the vocabulary");
            }

            const double gap = rng.uniform(params.gap_min, params.gap_max);
            const double draw = rng.uniform(params.box_draw_min, params.box_draw_max);
            const double t_first = t + gap;
            const double t_last = t_first + draw;
            t = t_last;

            ObjectEvent event =
                detail::synth_box_event(obj.box(), t_first, t_last, params.click_jitter, rng);

            TraceObject trace_obj;
            trace_obj.class_id = *obj.class_id;
            trace_obj.speech_dropped = rng.bernoulli(params.forget_speech_prob);
            trace_obj.box_discarded = rng.bernoulli(params.discard_box_prob);

            if (!trace_obj.speech_dropped) {
                const double lead =
                    params.speech_lead_sigma > 0
                        ? rng.gaussian(params.speech_lead_mean, params.speech_lead_sigma)
                        : params.speech_lead_mean;
                const double dur = rng.uniform(params.utterance_min, params.utterance_max);
                // Speech of consecutive objects never overlaps; keeps merged
                // utterances ordered by word start.
                double s_start = std::max(t_first - lead, prev_speech_end + 1e-3);
                double s_end = std::min(s_start + dur, t_last + params.speech_past_end);
                if (s_end <= s_start) s_end = s_start + 0.05;
                prev_speech_end = s_end;
                detail::SpokenGroup group;
                group.object_index = oi;
                group.words =
                    detail::synth_words(vocab.at(*class_idx).name_tokens, s_start, s_end);
                groups.push_back(std::move(group));
                min_time = std::min(min_time, s_start);
                max_time = std::max(max_time, s_end);
            }

            max_time = std::max(max_time, event.end);
            if (!trace_obj.box_discarded) {
                for (const Click& c : event.clicks) {
                    session.mouse_trail.push_back({c.x, c.y, c.t});
                }
                session.objects.push_back(std::move(event));
            }
            trace_img.objects.push_back(std::move(trace_obj));
        }

        std::sort(session.mouse_trail.begin(), session.mouse_trail.end(),
                  [](const auto& a, const auto& b) { return a[2] < b[2]; });

        // Group consecutive spoken names into utterances, then apply ASR noise.
        Transcript transcript;
        std::vector<std::vector<detail::SpokenGroup>> utterance_groups;
        for (detail::SpokenGroup& group : groups) {
            const bool merge = !utterance_groups.empty() &&
                               rng.bernoulli(params.pause_merge_prob);
            if (merge) {
                utterance_groups.back().push_back(std::move(group));
            } else {
                utterance_groups.emplace_back();
                utterance_groups.back().push_back(std::move(group));
            }
        }
        for (const auto& bundle : utterance_groups) {
            std::vector<TimedWord> truth;
            for (const detail::SpokenGroup& group : bundle) {
                truth.insert(truth.end(), group.words.begin(), group.words.end());
            }
            std::vector<TimedWord> heard = truth;
            bool corrupted = false;
            for (TimedWord& w : heard) {
                if (rng.bernoulli(params.asr_substitution_prob)) {
                    std::string replacement = confusable(w.text, rng);
                    if (replacement != w.text) {
                        w.text = std::move(replacement);
                        corrupted = true;
                    }
                }
            }
            Utterance utt;
            if (corrupted) {
                utt.alternatives.push_back({1, std::move(heard)});
                utt.alternatives.push_back({2, std::move(truth)});
            } else {
                utt.alternatives.push_back({1, std::move(truth)});
            }
            const size_t utt_index = transcript.utterances.size();
            for (const detail::SpokenGroup& group : bundle) {
                trace_img.objects[group.object_index].utterance_index = utt_index;
            }
            transcript.utterances.push_back(std::move(utt));
        }

        session.session_start = std::min(0.0, min_time);
        session.session_end = max_time + 0.5;
        out.log.images.push_back(validate_session_image(std::move(session)));
        out.transcripts.emplace(gt_img.image_id, validate_transcript(std::move(transcript)));
        out.trace.images.push_back(std::move(trace_img));
    }
    return out;
}

inline nlohmann::ordered_json trace_to_json(const TruthTrace& trace) {
    nlohmann::ordered_json j;
    j["images"] = nlohmann::ordered_json::array();
    for (const TraceImage& img : trace.images) {
        nlohmann::ordered_json ji;
        ji["image_id"] = img.image_id;
        ji["objects"] = nlohmann::ordered_json::array();
        for (const TraceObject& obj : img.objects) {
            nlohmann::ordered_json jo;
            jo["class"] = obj.class_id;
            jo["speech_dropped"] = obj.speech_dropped;
            jo["box_discarded"] = obj.box_discarded;
            if (obj.utterance_index) jo["utterance"] = *obj.utterance_index;
            ji["objects"].push_back(std::move(jo));
        }
        j["images"].push_back(std::move(ji));
    }
    return j;
}

inline TruthTrace trace_from_json(const nlohmann::ordered_json& j) {
    TruthTrace trace;
    for (const auto& ji : j.at("images")) {
        TraceImage img;
        img.image_id = ji.at("image_id").get<std::string>();
        for (const auto& jo : ji.value("objects", nlohmann::ordered_json::array())) {
            TraceObject obj;
            obj.class_id = jo.at("class").get<std::string>();
            obj.speech_dropped = jo.at("speech_dropped").get<bool>();
            obj.box_discarded = jo.at("box_discarded").get<bool>();
            if (jo.contains("utterance")) obj.utterance_index = jo["utterance"].get<size_t>();
            img.objects.push_back(std::move(obj));
        }
        trace.images.push_back(std::move(img));
    }
    return trace;
}

inline TruthTrace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("trace parse error in " + path + ": " + e.what());
    }
    try {
        return trace_from_json(j);
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("trace schema error in " + path + ": " + e.what());
    }
}

inline void save_trace(const std::string& path, const TruthTrace& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace file: " + path);
    out << trace_to_json(trace).dump() << '\n';
}

}  // namespace speakbox
