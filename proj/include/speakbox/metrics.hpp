#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "speakbox/aligner.hpp"
#include "speakbox/annotations.hpp"
#include "speakbox/eventlog.hpp"
#include "speakbox/geometry.hpp"
#include "speakbox/segmenter.hpp"
#include "speakbox/transcript.hpp"
#include "speakbox/vocab.hpp"

namespace speakbox {

// Harmonic mean of precision and recall; 0 when both are 0.
inline double f1_score(double precision, double recall) {
    if (precision + recall <= 0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

namespace detail {

struct Ratio {
    size_t num = 0;
    size_t den = 0;

    void add(bool hit) {
        ++den;
        num += hit ? 1 : 0;
    }
    Ratio& operator+=(const Ratio& o) {
        num += o.num;
        den += o.den;
        return *this;
    }
    std::optional<double> value() const {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    }
};

struct MeanAcc {
    double sum = 0;
    size_t n = 0;

    void add(double v) {
        sum += v;
        ++n;
    }
    MeanAcc& operator+=(const MeanAcc& o) {
        sum += o.sum;
        n += o.n;
        return *this;
    }
    std::optional<double> value() const {
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    }
};

inline std::unordered_map<std::string, const AnnotatedImage*> by_image(const AnnotationSet& s) {
    std::unordered_map<std::string, const AnnotatedImage*> m;
    for (const AnnotatedImage& img : s.images) m.emplace(img.image_id, &img);
    return m;
}

// Highest-IoU ground-truth box; nullopt when the image has no candidate box.
inline std::optional<std::pair<size_t, double>> best_gt_box(
    const Box& box, const AnnotatedImage& gt,
    const std::optional<std::string>& required_class = std::nullopt) {
    std::optional<std::pair<size_t, double>> best;
    for (size_t i = 0; i < gt.objects.size(); ++i) {
        const ObjectAnnotation& cand = gt.objects[i];
        if (!cand.is_box() || !cand.class_id) continue;
        if (required_class && *cand.class_id != *required_class) continue;
        const double v = iou(box, cand.box());
        if (!best || v > best->second) best = std::make_pair(i, v);
    }
    return best;
}

}  // namespace detail

// Fraction of labeled boxes whose class matches their highest-overlap ground
// truth box. Boxes with no overlapping ground truth at all are ignored.
inline detail::Ratio semantic_accuracy_counts(const AnnotatedImage& annos,
                                              const AnnotatedImage& gt) {
    detail::Ratio r;
    for (const ObjectAnnotation& obj : annos.objects) {
        if (!obj.class_id || !obj.is_box()) continue;
        auto best = detail::best_gt_box(obj.box(), gt);
        if (!best || best->second <= 0.0) continue;
        r.add(*gt.objects[best->first].class_id == *obj.class_id);
    }
    return r;
}

inline std::optional<double> semantic_accuracy(const AnnotationSet& annos,
                                               const AnnotationSet& gt) {
    auto gt_map = detail::by_image(gt);
    detail::Ratio total;
    for (const AnnotatedImage& img : annos.images) {
        auto it = gt_map.find(img.image_id);
        if (it == gt_map.end()) continue;
        total += semantic_accuracy_counts(img, *it->second);
    }
    return total.value();
}

// Mean IoU of labeled boxes against their best ground-truth box. With
// same_class (the primary variant) the best box is searched within the
// annotation's class, and annotations whose class is absent are excluded.
inline detail::MeanAcc mean_iou_acc(const AnnotatedImage& annos, const AnnotatedImage& gt,
                                    bool same_class = true) {
    detail::MeanAcc acc;
    for (const ObjectAnnotation& obj : annos.objects) {
        if (!obj.class_id || !obj.is_box()) continue;
        auto best = detail::best_gt_box(obj.box(), gt,
                                        same_class ? obj.class_id : std::nullopt);
        if (!best) continue;
        acc.add(best->second);
    }
    return acc;
}

inline std::optional<double> mean_iou(const AnnotationSet& annos, const AnnotationSet& gt,
                                      bool same_class = true) {
    auto gt_map = detail::by_image(gt);
    detail::MeanAcc acc;
    for (const AnnotatedImage& img : annos.images) {
        auto it = gt_map.find(img.image_id);
        if (it == gt_map.end()) continue;
        acc += mean_iou_acc(img, *it->second, same_class);
    }
    return acc.value();
}

// Fraction of annotated objects that ended up with no class label.
inline std::optional<double> unlabeled_fraction(const AnnotationSet& annos) {
    detail::Ratio r;
    for (const AnnotatedImage& img : annos.images) {
        for (const ObjectAnnotation& obj : img.objects) r.add(!obj.class_id.has_value());
    }
    return r.value();
}

struct PrfCounts {
    size_t tp = 0;
    size_t fp = 0;
    size_t fn = 0;
};

struct Prf {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

inline PrfCounts image_label_counts(const AnnotatedImage& annos, const AnnotatedImage& gt) {
    std::set<std::string> pred, truth;
    for (const ObjectAnnotation& o : annos.objects) {
        if (o.class_id) pred.insert(*o.class_id);
    }
    for (const ObjectAnnotation& o : gt.objects) {
        if (o.class_id) truth.insert(*o.class_id);
    }
    PrfCounts c;
    for (const std::string& p : pred) {
        if (truth.count(p)) {
            ++c.tp;
        } else {
            ++c.fp;
        }
    }
    for (const std::string& t : truth) {
        if (!pred.count(t)) ++c.fn;
    }
    return c;
}

// Empty predictions give precision 0 by convention.
inline Prf prf_from_counts(const PrfCounts& c) {
    Prf out;
    out.precision =
        (c.tp + c.fp) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    out.recall =
        (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    out.f1 = f1_score(out.precision, out.recall);
    return out;
}

struct LabelPrfResult {
    Prf micro;                      // pooled counts across images
    std::optional<Prf> macro;       // mean of per-image values
};

// Image-level class-set precision/recall/F1 of annotations against ground
// truth. Images present only in gt count as empty predictions.
inline LabelPrfResult label_prf(const AnnotationSet& annos, const AnnotationSet& gt) {
    auto anno_map = detail::by_image(annos);
    PrfCounts pooled;
    detail::MeanAcc p_acc, r_acc, f_acc;
    static const AnnotatedImage empty{};
    for (const AnnotatedImage& gt_img : gt.images) {
        auto it = anno_map.find(gt_img.image_id);
        const AnnotatedImage& pred_img = it == anno_map.end() ? empty : *it->second;
        const PrfCounts c = image_label_counts(pred_img, gt_img);
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.fn += c.fn;
        const Prf prf = prf_from_counts(c);
        p_acc.add(prf.precision);
        if (c.tp + c.fn > 0) r_acc.add(prf.recall);
        if (c.tp + c.fp + c.fn > 0) f_acc.add(prf.f1);
    }
    LabelPrfResult out;
    out.micro = prf_from_counts(pooled);
    if (auto p = p_acc.value()) {
        Prf macro;
        macro.precision = *p;
        macro.recall = r_acc.value().value_or(0.0);
        macro.f1 = f_acc.value().value_or(0.0);
        out.macro = macro;
    }
    return out;
}

// Fraction of labeled clicks lying inside a ground-truth box of their class.
// Clicks whose class is absent from the image are ignored, so semantic errors
// do not leak into the location measure.
inline detail::Ratio location_accuracy_counts(const AnnotatedImage& annos,
                                              const AnnotatedImage& gt) {
    detail::Ratio r;
    for (const ObjectAnnotation& obj : annos.objects) {
        if (!obj.class_id || obj.is_box()) continue;
        bool class_present = false;
        bool inside = false;
        for (const ObjectAnnotation& cand : gt.objects) {
            if (!cand.is_box() || !cand.class_id || *cand.class_id != *obj.class_id) continue;
            class_present = true;
            if (point_in_box(obj.point(), cand.box())) inside = true;
        }
        if (!class_present) continue;
        r.add(inside);
    }
    return r;
}

inline std::optional<double> location_accuracy(const AnnotationSet& annos,
                                               const AnnotationSet& gt) {
    auto gt_map = detail::by_image(gt);
    detail::Ratio total;
    for (const AnnotatedImage& img : annos.images) {
        auto it = gt_map.find(img.image_id);
        if (it == gt_map.end()) continue;
        total += location_accuracy_counts(img, *it->second);
    }
    return total.value();
}

// Fraction of objects whose true class shows up when segmenting any of the
// top-k transcription alternatives of their utterance.
inline std::optional<double> transcription_recall_at_k(
    std::span<const std::pair<std::string, const Utterance*>> items, size_t k,
    const ClassMatcher& matcher) {
    if (k == 0) throw ValidationError("recall@k needs k >= 1");
    const size_t max_len = default_max_segment_len(matcher.vocab());
    detail::Ratio r;
    for (const auto& [gt_class, utterance] : items) {
        if (!utterance) continue;
        bool hit = false;
        const size_t limit = std::min(k, utterance->alternatives.size());
        for (size_t a = 0; a < limit && !hit; ++a) {
            Segmentation seg =
                segment_tokens(word_texts(utterance->alternatives[a].words), matcher, max_len);
            for (const Segment& piece : seg.segments) {
                if (piece.class_id == gt_class) {
                    hit = true;
                    break;
                }
            }
        }
        r.add(hit);
    }
    return r.value();
}

// A matched (label, object) pair as produced by the aligner.
struct MatchedPair {
    double label_start = 0;
    double label_end = 0;
    double object_start = 0;
    double object_end = 0;
};

// Fraction of matched pairs whose intervals overlap at all.
inline std::optional<double> speech_draw_overlap_fraction(std::span<const MatchedPair> pairs) {
    detail::Ratio r;
    for (const MatchedPair& p : pairs) {
        r.add(interval_overlap(p.label_start, p.label_end, p.object_start, p.object_end) > 0);
    }
    return r.value();
}

struct Histogram {
    double lo = 0;
    double hi = 1;
    std::vector<double> mass;  // one bucket per bin, uniform width
    double underflow = 0;
    double overflow = 0;

    double bin_width() const { return (hi - lo) / static_cast<double>(mass.size()); }
    double total() const {
        return underflow + overflow + std::accumulate(mass.begin(), mass.end(), 0.0);
    }
};

// Where speaking happens relative to drawing: each pair's label interval is
// mapped through object [start, end] -> [0, 1] and its speaking-time mass is
// spread over the bins. Pairs with a zero-duration object are skipped.
inline Histogram speech_timing_profile(std::span<const MatchedPair> pairs, double lo = -1.0,
                                       double hi = 2.0, size_t bins = 30) {
    if (!(hi > lo) || bins == 0) throw ValidationError("invalid histogram range");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.mass.assign(bins, 0.0);
    const double width = h.bin_width();
    for (const MatchedPair& p : pairs) {
        const double od = p.object_end - p.object_start;
        if (od <= 0) continue;
        const double u0 = (p.label_start - p.object_start) / od;
        const double u1 = (p.label_end - p.object_start) / od;
        if (u1 <= u0) continue;
        h.underflow += interval_overlap(u0, u1, -std::numeric_limits<double>::max(), lo);
        h.overflow += interval_overlap(u0, u1, hi, std::numeric_limits<double>::max());
        for (size_t b = 0; b < bins; ++b) {
            const double b_lo = lo + width * static_cast<double>(b);
            h.mass[b] += interval_overlap(u0, u1, b_lo, b_lo + width);
        }
    }
    return h;
}

// Spearman rank correlation with average ranks on ties. NaN when either input
// has fewer than two values or no variance.
inline std::vector<double> average_ranks(std::span<const double> xs) {
    const size_t n = xs.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("spearman needs equal-length inputs");
    const size_t n = xs.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> rx = average_ranks(xs);
    const std::vector<double> ry = average_ranks(ys);
    double mean = 0.5 * static_cast<double>(n + 1);
    double cov = 0, vx = 0, vy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx <= 0 || vy <= 0) return std::numeric_limits<double>::quiet_NaN();
    return cov / std::sqrt(vx * vy);
}

// Total Euclidean length of a sampled mouse path.
inline double mouse_path_length(std::span<const std::array<double, 3>> samples) {
    double total = 0;
    for (size_t i = 1; i < samples.size(); ++i) {
        total += std::hypot(samples[i][0] - samples[i - 1][0],
                            samples[i][1] - samples[i - 1][1]);
    }
    return total;
}

struct TimingSummary {
    std::optional<double> time_per_image;   // mean event span per image
    std::optional<double> time_per_object;  // total span / total objects
    Histogram utterance_durations;
    std::optional<double> mean_mouse_path;  // mean trail length per image with a trail
};

// Arithmetic means over a session log plus the spoken-duration histogram of
// the matching transcripts.
inline TimingSummary timing_summary(const SessionLog& log,
                                    const std::map<std::string, Transcript>& transcripts,
                                    double hist_lo = 0.0, double hist_hi = 5.0,
                                    size_t hist_bins = 20) {
    TimingSummary out;
    out.utterance_durations.lo = hist_lo;
    out.utterance_durations.hi = hist_hi;
    out.utterance_durations.mass.assign(hist_bins, 0.0);
    const double width = out.utterance_durations.bin_width();

    detail::MeanAcc span_acc, path_acc;
    size_t total_objects = 0;
    double total_span = 0;
    for (const SessionImage& img : log.images) {
        if (!img.objects.empty()) {
            double lo = img.objects.front().start;
            double hi = img.objects.front().end;
            for (const ObjectEvent& ev : img.objects) {
                lo = std::min(lo, ev.start);
                hi = std::max(hi, ev.end);
            }
            span_acc.add(hi - lo);
            total_span += hi - lo;
            total_objects += img.objects.size();
        }
        if (!img.mouse_trail.empty()) path_acc.add(mouse_path_length(img.mouse_trail));
    }
    out.time_per_image = span_acc.value();
    if (total_objects > 0) {
        out.time_per_object = total_span / static_cast<double>(total_objects);
    }
    out.mean_mouse_path = path_acc.value();

    for (const auto& [image_id, transcript] : transcripts) {
        for (const Utterance& u : transcript.utterances) {
            const auto [start, end] = utterance_span(u);
            const double dur = end - start;
            if (dur < hist_lo) {
                out.utterance_durations.underflow += 1.0;
            } else if (dur >= hist_hi) {
                out.utterance_durations.overflow += 1.0;
            } else {
                const size_t b = std::min(
                    hist_bins - 1, static_cast<size_t>((dur - hist_lo) / width));
                out.utterance_durations.mass[b] += 1.0;
            }
        }
    }
    return out;
}

}  // namespace speakbox
