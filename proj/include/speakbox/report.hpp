#pragma once

#include <array>
#include <charconv>
#include <optional>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "speakbox/errors.hpp"
#include "speakbox/metrics.hpp"

namespace speakbox {

enum class EvalMode { Boxes, Points };

inline EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "boxes") return EvalMode::Boxes;
    if (s == "points") return EvalMode::Points;
    throw ValidationError("unknown eval mode '" + s + "' (expected boxes|points)");
}

struct ImageEvalRow {
    std::string image_id;
    size_t n_objects = 0;
    size_t n_labeled = 0;
    size_t n_gt = 0;
    std::optional<double> semantic_accuracy;
    std::optional<double> mean_iou;
    std::optional<double> unlabeled_fraction;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::optional<double> location_accuracy;
};

// Quality report over a set of annotated images. Undefined ratios stay absent
// instead of showing up as 0.
struct EvalReport {
    EvalMode mode = EvalMode::Boxes;
    std::optional<double> semantic_accuracy;
    std::optional<double> mean_iou;            // same-class pairing (primary)
    std::optional<double> mean_iou_any_class;  // pairing purely by overlap
    std::optional<double> unlabeled_fraction;
    double precision = 0;  // micro-averaged
    double recall = 0;
    double f1 = 0;
    std::optional<Prf> macro;
    std::optional<double> location_accuracy;
    std::vector<ImageEvalRow> per_image;
};

namespace detail {

inline void check_eval_inputs(const AnnotationSet& annos, const AnnotationSet& gt,
                              EvalMode mode) {
    auto gt_map = by_image(gt);
    for (const AnnotatedImage& img : annos.images) {
        if (!gt_map.count(img.image_id)) {
            throw ValidationError("annotated image '" + img.image_id +
                                  "' is missing from the ground truth");
        }
        for (const ObjectAnnotation& obj : img.objects) {
            if (mode == EvalMode::Boxes && !obj.is_box()) {
                throw ValidationError("image '" + img.image_id +
                                      "': point annotation in boxes mode");
            }
            if (mode == EvalMode::Points && obj.is_box()) {
                throw ValidationError("image '" + img.image_id +
                                      "': box annotation in points mode");
            }
        }
    }
    for (const AnnotatedImage& img : gt.images) {
        for (const ObjectAnnotation& obj : img.objects) {
            if (!obj.is_box() || !obj.class_id) {
                throw ValidationError("ground-truth image '" + img.image_id +
                                      "' must contain labeled boxes only");
            }
        }
    }
}

}  // namespace detail

// Evaluate box annotations (or point annotations with mode Points) against
// ground-truth boxes, per image and pooled.
inline EvalReport evaluate(const AnnotationSet& annos, const AnnotationSet& gt, EvalMode mode) {
    detail::check_eval_inputs(annos, gt, mode);
    auto anno_map = detail::by_image(annos);

    EvalReport report;
    report.mode = mode;
    report.semantic_accuracy = mode == EvalMode::Boxes ? semantic_accuracy(annos, gt)
                                                       : std::nullopt;
    if (mode == EvalMode::Boxes) {
        report.mean_iou = mean_iou(annos, gt, /*same_class=*/true);
        report.mean_iou_any_class = mean_iou(annos, gt, /*same_class=*/false);
    }
    report.unlabeled_fraction = unlabeled_fraction(annos);
    const LabelPrfResult prf = label_prf(annos, gt);
    report.precision = prf.micro.precision;
    report.recall = prf.micro.recall;
    report.f1 = prf.micro.f1;
    report.macro = prf.macro;
    if (mode == EvalMode::Points) report.location_accuracy = location_accuracy(annos, gt);

    static const AnnotatedImage empty{};
    for (const AnnotatedImage& gt_img : gt.images) {
        auto it = anno_map.find(gt_img.image_id);
        const AnnotatedImage& pred = it == anno_map.end() ? empty : *it->second;
        ImageEvalRow row;
        row.image_id = gt_img.image_id;
        row.n_objects = pred.objects.size();
        row.n_gt = gt_img.objects.size();
        detail::Ratio unlabeled;
        for (const ObjectAnnotation& obj : pred.objects) {
            unlabeled.add(!obj.class_id.has_value());
            if (obj.class_id) ++row.n_labeled;
        }
        row.unlabeled_fraction = unlabeled.value();
        if (mode == EvalMode::Boxes) {
            row.semantic_accuracy = semantic_accuracy_counts(pred, gt_img).value();
            row.mean_iou = mean_iou_acc(pred, gt_img).value();
        } else {
            row.location_accuracy = location_accuracy_counts(pred, gt_img).value();
        }
        const Prf image_prf = prf_from_counts(image_label_counts(pred, gt_img));
        row.precision = image_prf.precision;
        row.recall = image_prf.recall;
        row.f1 = image_prf.f1;
        report.per_image.push_back(std::move(row));
    }
    return report;
}

// Shortest round-trip decimal form, same as the JSON output uses.
inline std::string format_double(double v) {
    std::array<char, 32> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

inline nlohmann::ordered_json eval_report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["mode"] = r.mode == EvalMode::Boxes ? "boxes" : "points";
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("semantic_accuracy", r.semantic_accuracy);
    put("mean_iou", r.mean_iou);
    put("mean_iou_any_class", r.mean_iou_any_class);
    put("unlabeled_fraction", r.unlabeled_fraction);
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    if (r.macro) {
        j["macro_precision"] = r.macro->precision;
        j["macro_recall"] = r.macro->recall;
        j["macro_f1"] = r.macro->f1;
    }
    put("location_accuracy", r.location_accuracy);
    j["images"] = nlohmann::ordered_json::array();
    for (const ImageEvalRow& row : r.per_image) {
        nlohmann::ordered_json ji;
        ji["image_id"] = row.image_id;
        ji["objects"] = row.n_objects;
        ji["labeled"] = row.n_labeled;
        ji["gt_objects"] = row.n_gt;
        auto put_row = [&](const char* key, const std::optional<double>& v) {
            if (v) ji[key] = *v;
        };
        put_row("semantic_accuracy", row.semantic_accuracy);
        put_row("mean_iou", row.mean_iou);
        put_row("unlabeled_fraction", row.unlabeled_fraction);
        ji["precision"] = row.precision;
        ji["recall"] = row.recall;
        ji["f1"] = row.f1;
        put_row("location_accuracy", row.location_accuracy);
        j["images"].push_back(std::move(ji));
    }
    return j;
}

// Flat per-image CSV; undefined cells stay empty.
inline std::string eval_report_to_csv(const EvalReport& r) {
    std::string csv =
        "image_id,objects,labeled,gt_objects,semantic_accuracy,mean_iou,"
        "unlabeled_fraction,precision,recall,f1,location_accuracy\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const ImageEvalRow& row : r.per_image) {
        csv += row.image_id;
        csv += ',' + std::to_string(row.n_objects);
        csv += ',' + std::to_string(row.n_labeled);
        csv += ',' + std::to_string(row.n_gt);
        csv += ',' + cell(row.semantic_accuracy);
        csv += ',' + cell(row.mean_iou);
        csv += ',' + cell(row.unlabeled_fraction);
        csv += ',' + format_double(row.precision);
        csv += ',' + format_double(row.recall);
        csv += ',' + format_double(row.f1);
        csv += ',' + cell(row.location_accuracy);
        csv += '\n';
    }
    return csv;
}

}  // namespace speakbox
