// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lasc/common.hpp"

namespace lasc {

// The closed set of 10 scene labels. Indices are the class indices used
// everywhere downstream (labels, confusion matrices, reports).
inline constexpr std::array<std::string_view, 10> kSceneLabels = {
    "airport",       "bus",           "metro",          "metro_station",
    "park",          "public_square", "shopping_mall",  "street_pedestrian",
    "street_traffic", "tram",
};

inline int scene_index(std::string_view scene) {
    for (size_t i = 0; i < kSceneLabels.size(); ++i)
        if (kSceneLabels[i] == scene) return int(i);
    throw Error("unknown scene label: " + std::string(scene));
}

struct ManifestRecord {
    std::string path;
    std::string scene;
    std::string device;  // free-form to admit new devices
    std::string city;
    std::string technique;  // set only in extended manifests written by augment
};

struct CorpusManifest {
    std::vector<ManifestRecord> records;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::string cur;
    for (char ch : line) {
        if (ch == '\t') {
            cols.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cols.push_back(cur);
    return cols;
}

inline CorpusManifest load_manifest_impl(const std::string& path, bool allow_technique) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open manifest: " + path);

    CorpusManifest m;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("filename", 0) == 0) continue;  // optional header

        auto cols = detail::split_tabs(line);
        const bool ok = cols.size() == 4 || (allow_technique && cols.size() == 5);
        if (!ok)
            throw Error("manifest line " + std::to_string(lineno) + ": expected 4 columns, got " +
                        std::to_string(cols.size()) + " (" + path + ")");
        if (cols[0].empty())
            throw Error("manifest line " + std::to_string(lineno) + ": empty path");
        if (cols[2].empty())
            throw Error("manifest line " + std::to_string(lineno) + ": empty device id");
        scene_index(cols[1]);  // validates the label

        ManifestRecord r;
        r.path = cols[0];
        r.scene = cols[1];
        r.device = cols[2];
        r.city = cols[3];
        if (cols.size() == 5) r.technique = cols[4];
        m.records.push_back(std::move(r));
    }
    return m;
}

}  // namespace detail

// Strict 4-column TSV: path, scene, device, city. An optional header line
// beginning "filename" is skipped.
inline CorpusManifest load_manifest(const std::string& path) {
    return detail::load_manifest_impl(path, false);
}

// Accepts the extended 5-column form written by the augment command, where
// the fifth column tags the source technique.
inline CorpusManifest load_extended_manifest(const std::string& path) {
    return detail::load_manifest_impl(path, true);
}

inline void save_manifest(const CorpusManifest& m, const std::string& path,
                          bool with_technique = false) {
    std::ofstream f(path);
    if (!f) throw Error("cannot create manifest: " + path);
    f << "filename\tscene_label\tsource_label\tcity" << (with_technique ? "\ttechnique" : "")
      << "\n";
    for (const auto& r : m.records) {
        f << r.path << '\t' << r.scene << '\t' << r.device << '\t' << r.city;
        if (with_technique) f << '\t' << (r.technique.empty() ? "none" : r.technique);
        f << "\n";
    }
    if (!f) throw Error("failed writing manifest: " + path);
}

}  // namespace lasc
