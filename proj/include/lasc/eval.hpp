// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lasc/common.hpp"
#include "lasc/manifest.hpp"

namespace lasc {

// Argmax with ties broken toward the lowest class index.
inline int argmax_class(const std::vector<double>& probs) {
    if (probs.empty()) throw Error("argmax_class: empty probability vector");
    return int(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) throw Error("accuracy: length mismatch");
    if (predictions.empty()) throw Error("accuracy: empty input");
    size_t hits = 0;
    for (size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == labels[i];
    return double(hits) / double(predictions.size());
}

// Mean over samples of -ln(clip(p[label])), clip to [1e-15, 1-1e-15].
inline double log_loss(const std::vector<std::vector<double>>& probs,
                       const std::vector<int>& labels) {
    if (probs.size() != labels.size()) throw Error("log_loss: length mismatch");
    if (probs.empty()) throw Error("log_loss: empty input");
    double sum = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] < 0 || size_t(labels[i]) >= probs[i].size())
            throw Error("log_loss: label out of range at sample " + std::to_string(i));
        sum -= std::log(std::clamp(probs[i][size_t(labels[i])], 1e-15, 1.0 - 1e-15));
    }
    return sum / double(probs.size());
}

// Rows are true classes, columns predicted classes.
inline std::vector<std::vector<int>> confusion_matrix(const std::vector<int>& predictions,
                                                      const std::vector<int>& labels,
                                                      size_t class_count = 10) {
    if (predictions.size() != labels.size()) throw Error("confusion_matrix: length mismatch");
    std::vector<std::vector<int>> m(class_count, std::vector<int>(class_count, 0));
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] < 0 || size_t(labels[i]) >= class_count || predictions[i] < 0 ||
            size_t(predictions[i]) >= class_count)
            throw Error("confusion_matrix: class index out of range at sample " +
                        std::to_string(i));
        m[size_t(labels[i])][size_t(predictions[i])] += 1;
    }
    return m;
}

// Unweighted mean; the per-scene averaging rule for the report tables.
inline double macro_average(const std::vector<double>& values) {
    if (values.empty()) throw Error("macro_average: no values");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / double(values.size());
}

struct SceneRow {
    std::string scene;
    bool present = false;
    size_t count = 0;
    double accuracy = 0.0;
    double logloss = 0.0;
};

struct DeviceRow {
    std::string device;
    size_t count = 0;
    double accuracy = 0.0;
    double logloss = 0.0;
};

struct EvalReport {
    double overall_accuracy = 0.0;
    double overall_logloss = 0.0;
    std::vector<std::vector<int>> confusion;
    std::vector<SceneRow> per_scene;
    double macro_accuracy = 0.0;  // over present scenes only
    double macro_logloss = 0.0;
    std::vector<DeviceRow> per_device;
    std::vector<std::string> warnings;
};

// Per-scene accuracy/log-loss rows plus the unweighted average over present
// scenes. Scenes with zero samples are marked absent, excluded from the
// average, and produce a warning. Optional per-device breakdown.
inline EvalReport per_scene_report(const std::vector<std::vector<double>>& probs,
                                   const std::vector<int>& labels,
                                   const std::vector<std::string>& devices = {}) {
    if (probs.size() != labels.size()) throw Error("per_scene_report: length mismatch");
    if (!devices.empty() && devices.size() != probs.size())
        throw Error("per_scene_report: device list length mismatch");
    if (probs.empty()) throw Error("per_scene_report: empty input");

    std::vector<int> preds(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) preds[i] = argmax_class(probs[i]);

    EvalReport rep;
    rep.overall_accuracy = accuracy(preds, labels);
    rep.overall_logloss = log_loss(probs, labels);
    rep.confusion = confusion_matrix(preds, labels, kSceneLabels.size());

    std::vector<double> acc_rows, ll_rows;
    for (size_t s = 0; s < kSceneLabels.size(); ++s) {
        SceneRow row;
        row.scene = std::string(kSceneLabels[s]);
        std::vector<std::vector<double>> sp;
        std::vector<int> sl, spred;
        for (size_t i = 0; i < labels.size(); ++i)
            if (size_t(labels[i]) == s) {
                sp.push_back(probs[i]);
                sl.push_back(labels[i]);
                spred.push_back(preds[i]);
            }
        row.count = sl.size();
        if (!sl.empty()) {
            row.present = true;
            row.accuracy = accuracy(spred, sl);
            row.logloss = log_loss(sp, sl);
            acc_rows.push_back(row.accuracy);
            ll_rows.push_back(row.logloss);
        } else {
            rep.warnings.push_back("scene '" + row.scene +
                                   "' has no samples; excluded from the macro average");
        }
        rep.per_scene.push_back(std::move(row));
    }
    rep.macro_accuracy = macro_average(acc_rows);
    rep.macro_logloss = macro_average(ll_rows);

    if (!devices.empty()) {
        std::map<std::string, std::vector<size_t>> groups;
        for (size_t i = 0; i < devices.size(); ++i) groups[devices[i]].push_back(i);
        for (const auto& [device, idx] : groups) {
            DeviceRow row;
            row.device = device;
            row.count = idx.size();
            std::vector<std::vector<double>> dp;
            std::vector<int> dl, dpred;
            for (size_t i : idx) {
                dp.push_back(probs[i]);
                dl.push_back(labels[i]);
                dpred.push_back(preds[i]);
            }
            row.accuracy = accuracy(dpred, dl);
            row.logloss = log_loss(dp, dl);
            rep.per_device.push_back(std::move(row));
        }
    }
    return rep;
}

// CSV: one row per scene `scene,accuracy,logloss`, absent scenes marked,
// final row `average,...` with the macro averages.
inline void write_eval_csv(const EvalReport& rep, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot create report: " + path);
    f.precision(17);
    f << "scene,accuracy,logloss\n";
    for (const auto& row : rep.per_scene) {
        if (row.present)
            f << row.scene << ',' << row.accuracy << ',' << row.logloss << "\n";
        else
            f << row.scene << ",absent,absent\n";
    }
    f << "average," << rep.macro_accuracy << ',' << rep.macro_logloss << "\n";
}

inline void write_confusion_csv(const EvalReport& rep, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot create confusion report: " + path);
    for (const auto& row : rep.confusion) {
        for (size_t j = 0; j < row.size(); ++j) f << row[j] << (j + 1 < row.size() ? "," : "\n");
    }
}

}  // namespace lasc
