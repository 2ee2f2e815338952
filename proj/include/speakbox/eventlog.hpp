#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "speakbox/errors.hpp"
#include "speakbox/geometry.hpp"
#include "speakbox/log.hpp"

namespace speakbox {

// One annotation session: the object events of one image, in time order,
// plus an optional mouse trail.
struct SessionImage {
    std::string image_id;
    double session_start = 0;
    double session_end = 0;
    std::vector<ObjectEvent> objects;
    std::vector<std::array<double, 3>> mouse_trail;  // (x, y, t)

    bool operator==(const SessionImage&) const = default;
};

struct SessionLog {
    std::vector<SessionImage> images;

    bool operator==(const SessionLog&) const = default;
};

inline SessionImage validate_session_image(SessionImage img) {
    if (img.image_id.empty()) throw ValidationError("session image without image_id");
    if (!std::isfinite(img.session_start) || !std::isfinite(img.session_end) ||
        img.session_start > img.session_end) {
        throw ValidationError("image '" + img.image_id + "': invalid session interval");
    }
    for (const ObjectEvent& ev : img.objects) {
        if (ev.start < img.session_start || ev.end > img.session_end) {
            throw ValidationError("image '" + img.image_id +
                                  "': object event outside the session interval");
        }
    }
    const bool ordered = std::is_sorted(
        img.objects.begin(), img.objects.end(),
        [](const ObjectEvent& a, const ObjectEvent& b) { return a.start < b.start; });
    if (!ordered) {
        log_warn("image '" + img.image_id + "': object events not ordered by start, sorting");
        std::stable_sort(
            img.objects.begin(), img.objects.end(),
            [](const ObjectEvent& a, const ObjectEvent& b) { return a.start < b.start; });
    }
    return img;
}

inline SessionLog validate_session_log(SessionLog log) {
    std::unordered_set<std::string> seen;
    for (SessionImage& img : log.images) {
        img = validate_session_image(std::move(img));
        if (!seen.insert(img.image_id).second) {
            throw ValidationError("duplicate image_id '" + img.image_id + "' in event log");
        }
    }
    return log;
}

inline nlohmann::ordered_json event_log_to_json(const SessionLog& log) {
    nlohmann::ordered_json j;
    j["images"] = nlohmann::ordered_json::array();
    for (const SessionImage& img : log.images) {
        nlohmann::ordered_json ji;
        ji["image_id"] = img.image_id;
        ji["session_start"] = img.session_start;
        ji["session_end"] = img.session_end;
        ji["objects"] = nlohmann::ordered_json::array();
        for (const ObjectEvent& ev : img.objects) {
            nlohmann::ordered_json je;
            je["kind"] = to_string(ev.kind);
            je["clicks"] = nlohmann::ordered_json::array();
            for (const Click& c : ev.clicks) {
                je["clicks"].push_back({{"x", c.x}, {"y", c.y}, {"t", c.t}});
            }
            ji["objects"].push_back(std::move(je));
        }
        if (!img.mouse_trail.empty()) {
            nlohmann::ordered_json jt = nlohmann::ordered_json::array();
            for (const auto& s : img.mouse_trail) jt.push_back({s[0], s[1], s[2]});
            ji["mouse_trail"] = std::move(jt);
        }
        j["images"].push_back(std::move(ji));
    }
    return j;
}

inline SessionLog event_log_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object() || !j.contains("images") || !j["images"].is_array()) {
        throw ValidationError("event log JSON must be {\"images\": [...]}");
    }
    SessionLog log;
    for (const auto& ji : j["images"]) {
        SessionImage img;
        img.image_id = ji.at("image_id").get<std::string>();
        img.session_start = ji.at("session_start").get<double>();
        img.session_end = ji.at("session_end").get<double>();
        for (const auto& je : ji.value("objects", nlohmann::ordered_json::array())) {
            const std::string kind = je.at("kind").get<std::string>();
            EventKind k;
            if (kind == "box") {
                k = EventKind::Box;
            } else if (kind == "point") {
                k = EventKind::Point;
            } else {
                throw ValidationError("image '" + img.image_id + "': unknown event kind '" +
                                      kind + "'");
            }
            std::vector<Click> clicks;
            for (const auto& jc : je.at("clicks")) {
                clicks.push_back(Click{jc.at("x").get<double>(), jc.at("y").get<double>(),
                                       jc.at("t").get<double>()});
            }
            img.objects.push_back(make_object_event(k, std::move(clicks)));
        }
        if (ji.contains("mouse_trail")) {
            for (const auto& js : ji["mouse_trail"]) {
                if (!js.is_array() || js.size() != 3) {
                    throw ValidationError("image '" + img.image_id +
                                          "': mouse trail samples must be [x, y, t]");
                }
                img.mouse_trail.push_back(
                    {js[0].get<double>(), js[1].get<double>(), js[2].get<double>()});
            }
        }
        log.images.push_back(std::move(img));
    }
    return validate_session_log(std::move(log));
}

inline SessionLog load_event_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open event log: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("event log parse error in " + path + ": " + e.what());
    }
    try {
        return event_log_from_json(j);
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("event log schema error in " + path + ": " + e.what());
    }
}

inline void save_event_log(const std::string& path, const SessionLog& log) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write event log: " + path);
    out << event_log_to_json(log).dump() << '\n';
}

}  // namespace speakbox
