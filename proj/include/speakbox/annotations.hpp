#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "speakbox/errors.hpp"
#include "speakbox/geometry.hpp"

namespace speakbox {

struct AnnotatedImage {
    std::string image_id;
    std::vector<ObjectAnnotation> objects;

    bool operator==(const AnnotatedImage&) const = default;
};

// Contents of an annotation file (pipeline output or ground truth).
struct AnnotationSet {
    std::vector<AnnotatedImage> images;

    bool operator==(const AnnotationSet&) const = default;
};

inline nlohmann::ordered_json annotations_to_json(const AnnotationSet& set) {
    nlohmann::ordered_json j;
    j["images"] = nlohmann::ordered_json::array();
    for (const AnnotatedImage& img : set.images) {
        nlohmann::ordered_json ji;
        ji["image_id"] = img.image_id;
        ji["objects"] = nlohmann::ordered_json::array();
        for (const ObjectAnnotation& obj : img.objects) {
            nlohmann::ordered_json jo;
            if (obj.class_id) jo["class"] = *obj.class_id;
            if (obj.is_box()) {
                const Box& b = obj.box();
                jo["box"] = {b.x0, b.y0, b.x1, b.y1};
            } else {
                const Point& p = obj.point();
                jo["point"] = {p.x, p.y};
            }
            ji["objects"].push_back(std::move(jo));
        }
        j["images"].push_back(std::move(ji));
    }
    return j;
}

inline AnnotationSet annotations_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object() || !j.contains("images") || !j["images"].is_array()) {
        throw ValidationError("annotation JSON must be {\"images\": [...]}");
    }
    AnnotationSet set;
    for (const auto& ji : j["images"]) {
        AnnotatedImage img;
        img.image_id = ji.at("image_id").get<std::string>();
        for (const auto& jo : ji.value("objects", nlohmann::ordered_json::array())) {
            ObjectAnnotation obj;
            obj.image_id = img.image_id;
            if (jo.contains("class")) obj.class_id = jo["class"].get<std::string>();
            const bool has_box = jo.contains("box");
            const bool has_point = jo.contains("point");
            if (has_box == has_point) {
                throw ValidationError("image '" + img.image_id +
                                      "': annotation needs exactly one of 'box' or 'point'");
            }
            if (has_box) {
                const auto& jb = jo["box"];
                if (!jb.is_array() || jb.size() != 4) {
                    throw ValidationError("image '" + img.image_id +
                                          "': 'box' must be [x0, y0, x1, y1]");
                }
                Box b{jb[0].get<double>(), jb[1].get<double>(), jb[2].get<double>(),
                      jb[3].get<double>()};
                if (b.x0 > b.x1 || b.y0 > b.y1) {
                    throw ValidationError("image '" + img.image_id + "': box corners inverted");
                }
                obj.location = b;
            } else {
                const auto& jp = jo["point"];
                if (!jp.is_array() || jp.size() != 2) {
                    throw ValidationError("image '" + img.image_id + "': 'point' must be [x, y]");
                }
                obj.location = Point{jp[0].get<double>(), jp[1].get<double>()};
            }
            img.objects.push_back(std::move(obj));
        }
        set.images.push_back(std::move(img));
    }
    return set;
}

inline AnnotationSet load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotation file: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("annotation parse error in " + path + ": " + e.what());
    }
    try {
        return annotations_from_json(j);
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("annotation schema error in " + path + ": " + e.what());
    }
}

inline void save_annotations(const std::string& path, const AnnotationSet& set) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write annotation file: " + path);
    out << annotations_to_json(set).dump() << '\n';
}

}  // namespace speakbox
