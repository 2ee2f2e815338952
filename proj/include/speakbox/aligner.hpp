#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "speakbox/errors.hpp"
#include "speakbox/geometry.hpp"
#include "speakbox/segmenter.hpp"

namespace speakbox {

// Labels shorter than this use the midpoint-containment rule instead of the
// overlap ratio, which would divide by ~0.
inline constexpr double kMinLabelDuration = 1e-3;

struct AlignmentConfig {
    double gap_penalty = 0.5;
};

// Matched (label index, object index) pairs plus everything left unmatched.
// Indices refer to the input sequences.
struct Alignment {
    std::vector<std::pair<size_t, size_t>> pairs;
    std::vector<size_t> unmatched_labels;
    std::vector<size_t> unmatched_objects;
    double total_cost = 0;
};

inline double interval_overlap(double a_start, double a_end, double b_start, double b_end) {
    return std::max(0.0, std::min(a_end, b_end) - std::max(a_start, b_start));
}

// Cost of aligning a spoken label with an object location:
// 1 - overlap / label duration, in [0, 1]. Low when the class name was said
// while the object was being annotated.
inline double match_cost(double label_start, double label_end, double obj_start,
                         double obj_end) {
    const double d = label_end - label_start;
    if (d < kMinLabelDuration) {
        const double mid = 0.5 * (label_start + label_end);
        return (obj_start <= mid && mid <= obj_end) ? 0.0 : 1.0;
    }
    return 1.0 - interval_overlap(label_start, label_end, obj_start, obj_end) / d;
}

inline double match_cost(const TimedClassLabel& label, const ObjectEvent& obj) {
    return match_cost(label.start, label.end, obj.start, obj.end);
}

namespace detail {

// Stable order by (start, end, original index).
template <typename T, typename StartFn, typename EndFn>
std::vector<size_t> time_order(std::span<const T> xs, StartFn start, EndFn end) {
    std::vector<size_t> order(xs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (start(xs[a]) != start(xs[b])) return start(xs[a]) < start(xs[b]);
        if (end(xs[a]) != end(xs[b])) return end(xs[a]) < end(xs[b]);
        return a < b;
    });
    return order;
}

}  // namespace detail

// Needleman-Wunsch global alignment of the label sequence against the object
// sequence. Each element is matched at most once; unmatched elements pay the
// gap penalty. Traceback prefers match over label-gap over object-gap, so
// output is deterministic.
inline Alignment align(std::span<const TimedClassLabel> labels,
                       std::span<const ObjectEvent> objects, const AlignmentConfig& cfg = {}) {
    if (!(cfg.gap_penalty > 0)) throw ValidationError("gap penalty must be positive");
    const double g = cfg.gap_penalty;

    const std::vector<size_t> lorder = detail::time_order(
        labels, [](const auto& l) { return l.start; }, [](const auto& l) { return l.end; });
    const std::vector<size_t> oorder = detail::time_order(
        objects, [](const auto& o) { return o.start; }, [](const auto& o) { return o.end; });

    const size_t n = labels.size();
    const size_t m = objects.size();
    auto rho = [&](size_t i, size_t j) {
        return match_cost(labels[lorder[i]], objects[oorder[j]]);
    };

    // D is (n+1) x (m+1), row-major. Borders accumulate incrementally so the
    // traceback's equality tests are exact.
    std::vector<double> d((n + 1) * (m + 1), 0.0);
    auto at = [&](size_t i, size_t j) -> double& { return d[i * (m + 1) + j]; };
    for (size_t i = 1; i <= n; ++i) at(i, 0) = at(i - 1, 0) + g;
    for (size_t j = 1; j <= m; ++j) at(0, j) = at(0, j - 1) + g;
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            const double diag = at(i - 1, j - 1) + rho(i - 1, j - 1);
            const double up = at(i - 1, j) + g;    // label i-1 unmatched
            const double left = at(i, j - 1) + g;  // object j-1 unmatched
            at(i, j) = std::min({diag, up, left});
        }
    }

    Alignment out;
    out.total_cost = at(n, m);

    std::vector<bool> label_used(n, false), object_used(m, false);
    size_t i = n, j = m;
    while (i > 0 && j > 0) {
        if (at(i, j) == at(i - 1, j - 1) + rho(i - 1, j - 1)) {
            out.pairs.emplace_back(lorder[i - 1], oorder[j - 1]);
            label_used[i - 1] = true;
            object_used[j - 1] = true;
            --i;
            --j;
        } else if (at(i, j) == at(i - 1, j) + g) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(out.pairs.begin(), out.pairs.end());

    for (size_t k = 0; k < n; ++k) {
        if (!label_used[k]) out.unmatched_labels.push_back(lorder[k]);
    }
    for (size_t k = 0; k < m; ++k) {
        if (!object_used[k]) out.unmatched_objects.push_back(oorder[k]);
    }
    std::sort(out.unmatched_labels.begin(), out.unmatched_labels.end());
    std::sort(out.unmatched_objects.begin(), out.unmatched_objects.end());
    return out;
}

}  // namespace speakbox
