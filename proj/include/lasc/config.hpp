// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lasc/augment.hpp"
#include "lasc/common.hpp"
#include "lasc/features.hpp"
#include "lasc/network.hpp"
#include "lasc/train.hpp"

namespace lasc {

// Plain key=value pipeline configuration. '#' starts a comment, unknown keys
// are rejected, list values are comma-separated.
struct PipelineConfig {
    std::string network = "paper";  // paper | tiny
    TrainConfig train;
    AugmentConfig augment;
    FeatureParams features;
    std::string train_manifest, val_manifest;
    std::string feature_dir, model_dir, report_dir;
    std::string plan;  // augmentation plan file
    double limit_kb = 128.0;

    nn::NetworkConfig network_config() const {
        if (network == "paper") return nn::NetworkConfig::paper();
        if (network == "tiny") return nn::NetworkConfig::tiny();
        throw Error("config: unknown network '" + network + "' (expected paper or tiny)");
    }

    static PipelineConfig load(const std::string& path);
};

namespace detail {

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

inline PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config: " + path);

    PipelineConfig cfg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));

        auto as_double = [&] {
            try {
                return std::stod(value);
            } catch (const std::exception&) {
                throw Error("config line " + std::to_string(lineno) + ": bad number '" + value +
                            "' for " + key);
            }
        };
        auto as_size = [&] {
            const double d = as_double();
            if (d < 0 || d != double(size_t(d)))
                throw Error("config line " + std::to_string(lineno) + ": bad count '" + value +
                            "' for " + key);
            return size_t(d);
        };

        if (key == "network") cfg.network = value;
        else if (key == "batch_size") cfg.train.batch_size = as_size();
        else if (key == "epochs") cfg.train.epochs = as_size();
        else if (key == "lr_max") cfg.train.lr_max = as_double();
        else if (key == "lr_min") cfg.train.lr_min = as_double();
        else if (key == "seeds") {
            cfg.train.seeds.clear();
            for (const auto& s : detail::split_commas(value))
                cfg.train.seeds.push_back(std::stoull(detail::trim(s)));
        } else if (key == "alpha") {
            cfg.augment.alpha = as_double();
            cfg.train.mixup_alpha = cfg.augment.alpha;
        } else if (key == "n_pairs") cfg.augment.n_pairs = as_size();
        else if (key == "pitch_factors") {
            cfg.augment.pitch_factors.clear();
            for (const auto& s : detail::split_commas(value))
                cfg.augment.pitch_factors.push_back(std::stod(detail::trim(s)));
        } else if (key == "audiomix_low") cfg.augment.audiomix_low = as_double();
        else if (key == "audiomix_high") cfg.augment.audiomix_high = as_double();
        else if (key == "reference_devices") {
            cfg.augment.reference_devices.clear();
            for (const auto& s : detail::split_commas(value))
                cfg.augment.reference_devices.push_back(detail::trim(s));
        } else if (key == "window") cfg.features.window = as_size();
        else if (key == "hop") cfg.features.hop = as_size();
        else if (key == "n_mels") cfg.features.n_mels = as_size();
        else if (key == "target_width") cfg.features.target_width = as_size();
        else if (key == "train_manifest") cfg.train_manifest = value;
        else if (key == "val_manifest") cfg.val_manifest = value;
        else if (key == "feature_dir") cfg.feature_dir = value;
        else if (key == "model_dir") cfg.model_dir = value;
        else if (key == "report_dir") cfg.report_dir = value;
        else if (key == "plan") cfg.plan = value;
        else if (key == "limit_kb") cfg.limit_kb = as_double();
        else
            throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return cfg;
}

}  // namespace lasc
