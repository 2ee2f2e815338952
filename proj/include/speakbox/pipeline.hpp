#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "speakbox/aligner.hpp"
#include "speakbox/annotations.hpp"
#include "speakbox/eventlog.hpp"
#include "speakbox/log.hpp"
#include "speakbox/metrics.hpp"
#include "speakbox/report.hpp"
#include "speakbox/segmenter.hpp"
#include "speakbox/simulator.hpp"
#include "speakbox/transcript.hpp"
#include "speakbox/vocab.hpp"

namespace speakbox {

struct AlignOptions {
    double gap_penalty = 0.5;
    std::optional<size_t> max_segment_len;
    std::optional<double> reject_above;
    unsigned workers = 0;  // 0 = hardware concurrency
};

// Per-image result of labels -> objects alignment, pipeline-internal.
struct ImageAlignResult {
    std::string image_id;
    std::vector<ObjectAnnotation> annotations;   // one per object event, log order
    std::vector<TimedClassLabel> labels;
    Alignment alignment;
    std::vector<MatchedPair> matched_pairs;
};

// Run segmentation + alignment for one image session. A missing transcript
// leaves every object unlabeled.
inline ImageAlignResult annotate_image(const SessionImage& session,
                                       const Transcript* transcript,
                                       const ClassMatcher& matcher, const AlignOptions& opts) {
    ImageAlignResult result;
    result.image_id = session.image_id;

    if (transcript) {
        SegmenterOptions seg_opts;
        seg_opts.max_segment_len = opts.max_segment_len;
        seg_opts.reject_above = opts.reject_above;
        result.labels = labels_from_transcript(*transcript, matcher, seg_opts);
    }

    AlignmentConfig cfg;
    cfg.gap_penalty = opts.gap_penalty;
    result.alignment = align(result.labels, session.objects, cfg);

    std::vector<std::optional<std::string>> assigned(session.objects.size());
    for (const auto& [li, oi] : result.alignment.pairs) {
        assigned[oi] = result.labels[li].class_id;
        result.matched_pairs.push_back(MatchedPair{result.labels[li].start,
                                                   result.labels[li].end,
                                                   session.objects[oi].start,
                                                   session.objects[oi].end});
    }
    for (size_t oi = 0; oi < session.objects.size(); ++oi) {
        const ObjectEvent& ev = session.objects[oi];
        ObjectAnnotation anno;
        anno.image_id = session.image_id;
        anno.class_id = assigned[oi];
        if (ev.kind == EventKind::Box) {
            anno.location = *ev.box;
        } else {
            anno.location = Point{ev.clicks.front().x, ev.clicks.front().y};
        }
        result.annotations.push_back(std::move(anno));
    }
    return result;
}

namespace detail {

// Runs fn(i) for i in [0, n) on `workers` threads. Results must be written
// into pre-sized slots; the schedule never affects the output.
template <typename Fn>
void parallel_for(size_t n, unsigned workers, Fn&& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<size_t>(workers, n));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

struct AlignRunResult {
    AnnotationSet annotations;
    std::vector<ImageAlignResult> per_image;
    size_t unmatched_labels = 0;
    size_t unmatched_objects = 0;
};

// Full alignment pass over an event log: per image, select + segment the
// transcript, align labels to object events, and collect annotations in the
// log's image order.
inline AlignRunResult run_alignment(const SessionLog& log,
                                    const std::map<std::string, Transcript>& transcripts,
                                    const Vocabulary& vocab, const EmbeddingTable& table,
                                    const AlignOptions& opts = {}) {
    ClassMatcher matcher(vocab, table);
    AlignRunResult out;
    out.per_image.resize(log.images.size());
    detail::parallel_for(log.images.size(), opts.workers, [&](size_t i) {
        const SessionImage& session = log.images[i];
        auto it = transcripts.find(session.image_id);
        const Transcript* transcript = it == transcripts.end() ? nullptr : &it->second;
        if (!transcript) {
            log_warn("image '" + session.image_id +
                     "': no transcript, all objects left unlabeled");
        }
        out.per_image[i] = annotate_image(session, transcript, matcher, opts);
    });
    for (ImageAlignResult& r : out.per_image) {
        AnnotatedImage img;
        img.image_id = r.image_id;
        img.objects = r.annotations;
        out.annotations.images.push_back(std::move(img));
        out.unmatched_labels += r.alignment.unmatched_labels.size();
        out.unmatched_objects += r.alignment.unmatched_objects.size();
        if (!r.alignment.unmatched_labels.empty()) {
            log_info("image '" + r.image_id + "': " +
                     std::to_string(r.alignment.unmatched_labels.size()) +
                     " spoken label(s) had no matching object");
        }
    }
    return out;
}

// Transcripts live one file per image session: <dir>/<image_id>.json.
inline std::map<std::string, Transcript> load_transcript_dir(const std::string& dir,
                                                             const SessionLog& log) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("transcript directory not found: " + dir);
    std::map<std::string, Transcript> transcripts;
    for (const SessionImage& img : log.images) {
        const fs::path path = fs::path(dir) / (img.image_id + ".json");
        if (!fs::exists(path)) continue;
        transcripts.emplace(img.image_id, load_transcript(path.string()));
    }
    return transcripts;
}

// align subcommand: event log + transcripts -> annotation file.
inline AlignRunResult run_align(const std::string& vocab_path, const std::string& embeddings_path,
                                const std::string& transcripts_dir,
                                const std::string& events_path, const std::string& out_path,
                                const AlignOptions& opts = {}) {
    const Vocabulary vocab = load_vocabulary(vocab_path);
    const EmbeddingTable table = load_embeddings(embeddings_path);
    const SessionLog log = load_event_log(events_path);
    const auto transcripts = load_transcript_dir(transcripts_dir, log);
    AlignRunResult result = run_alignment(log, transcripts, vocab, table, opts);
    save_annotations(out_path, result.annotations);
    return result;
}

// Alignment analytics emitted next to the annotations when requested: the
// speech/draw overlap fraction and the normalized speech-timing profile.
inline std::string alignment_analytics_csv(const AlignRunResult& result) {
    std::vector<MatchedPair> pairs;
    for (const ImageAlignResult& r : result.per_image) {
        pairs.insert(pairs.end(), r.matched_pairs.begin(), r.matched_pairs.end());
    }
    std::string csv = "metric,bin_lo,bin_hi,value\n";
    if (auto frac = speech_draw_overlap_fraction(pairs)) {
        csv += "speech_draw_overlap_fraction,,," + format_double(*frac) + "\n";
    }
    csv += "unmatched_labels,,," + std::to_string(result.unmatched_labels) + "\n";
    csv += "unmatched_objects,,," + std::to_string(result.unmatched_objects) + "\n";
    const Histogram h = speech_timing_profile(pairs);
    for (size_t b = 0; b < h.mass.size(); ++b) {
        const double lo = h.lo + h.bin_width() * static_cast<double>(b);
        csv += "speech_timing_profile," + format_double(lo) + "," +
               format_double(lo + h.bin_width()) + "," + format_double(h.mass[b]) + "\n";
    }
    return csv;
}

struct EvalPaths {
    std::string report_json;
    std::string report_csv;
};

inline EvalPaths eval_output_paths(const std::string& out) {
    namespace fs = std::filesystem;
    fs::path base(out);
    if (base.extension() == ".json") base.replace_extension();
    return EvalPaths{base.string() + ".json", base.string() + ".csv"};
}

// eval subcommand: annotations + ground truth -> report JSON + per-image CSV.
inline EvalReport run_eval(const std::string& annotations_path, const std::string& gt_path,
                           EvalMode mode, const std::string& out_path) {
    const AnnotationSet annos = load_annotations(annotations_path);
    const AnnotationSet gt = load_annotations(gt_path);
    const EvalReport report = evaluate(annos, gt, mode);
    const EvalPaths paths = eval_output_paths(out_path);
    {
        std::ofstream out(paths.report_json);
        if (!out) throw IoError("cannot write report: " + paths.report_json);
        out << eval_report_to_json(report).dump(2) << '\n';
    }
    {
        std::ofstream out(paths.report_csv);
        if (!out) throw IoError("cannot write report: " + paths.report_csv);
        out << eval_report_to_csv(report);
    }
    return report;
}

// simulate subcommand: ground truth -> event log + per-image transcripts +
// truth trace.
inline SimOutput run_simulate(const std::string& gt_path, const std::string& vocab_path,
                              const SimParams& params, const std::string& events_out,
                              const std::string& transcripts_dir,
                              const std::string& trace_out) {
    namespace fs = std::filesystem;
    const AnnotationSet gt = load_annotations(gt_path);
    const Vocabulary vocab = load_vocabulary(vocab_path);
    SimOutput sim = simulate(gt, vocab, params);
    fs::create_directories(transcripts_dir);
    save_event_log(events_out, sim.log);
    for (const auto& [image_id, transcript] : sim.transcripts) {
        save_transcript((fs::path(transcripts_dir) / (image_id + ".json")).string(), transcript);
    }
    save_trace(trace_out, sim.trace);
    return sim;
}

// segment subcommand: one JSON line per utterance with the chosen alternative
// and its segments.
inline void run_segment(const std::string& vocab_path, const std::string& embeddings_path,
                        const std::string& transcript_path, std::ostream& out,
                        const std::optional<size_t>& max_segment_len = std::nullopt) {
    const Vocabulary vocab = load_vocabulary(vocab_path);
    const EmbeddingTable table = load_embeddings(embeddings_path);
    const Transcript transcript = load_transcript(transcript_path);
    ClassMatcher matcher(vocab, table);
    const size_t max_len = max_segment_len.value_or(default_max_segment_len(vocab));
    for (size_t ui = 0; ui < transcript.utterances.size(); ++ui) {
        const Utterance& u = transcript.utterances[ui];
        const SelectedTranscription sel = select_transcription(u, matcher, max_len);
        const TranscriptionAlternative& alt = u.alternatives[sel.alternative_index];
        nlohmann::ordered_json j;
        j["utterance"] = ui;
        j["chosen_rank"] = alt.rank;
        j["words"] = join_tokens(word_texts(alt.words));
        j["total_cost"] = sel.segmentation.total_cost;
        j["segments"] = nlohmann::ordered_json::array();
        const std::vector<std::string> raw = word_texts(alt.words);
        for (const Segment& piece : sel.segmentation.segments) {
            nlohmann::ordered_json js;
            js["tokens"] = join_tokens(std::span<const std::string>(raw).subspan(
                piece.begin, piece.end - piece.begin));
            js["class"] = piece.class_id;
            js["cost"] = piece.cost;
            js["start"] = alt.words[piece.begin].start;
            js["end"] = alt.words[piece.end - 1].end;
            j["segments"].push_back(std::move(js));
        }
        out << j.dump() << '\n';
    }
}

}  // namespace speakbox
