// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lasc/augment.hpp"
#include "lasc/config.hpp"
#include "lasc/eval.hpp"
#include "lasc/features.hpp"
#include "lasc/manifest.hpp"
#include "lasc/model_io.hpp"
#include "lasc/quantize.hpp"
#include "lasc/train.hpp"
#include "lasc/wav.hpp"

namespace lasc {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitPartial = 2;

// Augmentation plan: TSV lines `technique<TAB>param=value,...`.
struct PlanEntry {
    std::string technique;
    std::map<std::string, std::string> params;
};

inline std::vector<PlanEntry> parse_plan(const std::string& path) {
    static const std::set<std::string> known = {"mixup", "speccorr", "pitch", "audiomix", "all"};
    std::ifstream f(path);
    if (!f) throw Error("cannot open augmentation plan: " + path);
    std::vector<PlanEntry> entries;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        PlanEntry e;
        const auto tab = line.find('\t');
        e.technique = line.substr(0, tab);
        if (!known.count(e.technique))
            throw Error("plan line " + std::to_string(lineno) + ": unknown technique '" +
                        e.technique + "'");
        if (tab != std::string::npos) {
            std::istringstream rest(line.substr(tab + 1));
            std::string kv;
            while (std::getline(rest, kv, ',')) {
                if (kv.empty()) continue;
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw Error("plan line " + std::to_string(lineno) + ": expected param=value, got '" +
                                kv + "'");
                e.params[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

inline bool plan_enables_mixup(const std::vector<PlanEntry>& plan) {
    for (const auto& e : plan)
        if (e.technique == "mixup" || e.technique == "all") return true;
    return false;
}

namespace detail {

inline std::string resolve_path(const std::string& base_file, const std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (std::filesystem::path(base_file).parent_path() / fp).string();
}

inline std::string stem_of(const std::string& p) {
    return std::filesystem::path(p).stem().string();
}

// Unique, deterministic output stem per record.
inline std::string unique_stem(std::set<std::string>& used, const std::string& stem) {
    std::string s = stem;
    for (int n = 1; used.count(s); ++n) s = stem + "_" + std::to_string(n);
    used.insert(s);
    return s;
}

inline Tensor load_record_feature(const ManifestRecord& rec, const std::string& manifest_path,
                                  const FeatureParams& fp, const std::string& feature_dir) {
    const std::string path = resolve_path(manifest_path, rec.path);
    if (path.size() >= 5 && path.ends_with(".feat")) return read_feature(path);
    if (!feature_dir.empty()) {
        const auto cached = std::filesystem::path(feature_dir) / (stem_of(path) + ".feat");
        if (std::filesystem::exists(cached)) return read_feature(cached.string());
    }
    return extract_features(read_wav(path), fp);
}

struct LoadedSet {
    Dataset data;
    std::vector<std::string> devices;
};

inline LoadedSet load_dataset(const std::string& manifest_path, const FeatureParams& fp,
                              const std::string& feature_dir) {
    const CorpusManifest m = load_extended_manifest(manifest_path);
    LoadedSet out;
    out.data.reserve(m.records.size());
    for (const auto& rec : m.records) {
        Example ex;
        ex.feature = load_record_feature(rec, manifest_path, fp, feature_dir);
        ex.label = scene_index(rec.scene);
        out.data.push_back(std::move(ex));
        out.devices.push_back(rec.device);
    }
    return out;
}

}  // namespace detail

// features: one FEAT file per clip plus an index TSV (clip path -> feature
// path). Per-file decode failures are logged and reported through the exit
// code; the remaining clips are still produced.
inline int cmd_features(const std::string& manifest_path, const std::string& out_dir,
                        const FeatureParams& fp, bool verbose = false) {
    const CorpusManifest m = load_extended_manifest(manifest_path);
    std::filesystem::create_directories(out_dir);

    std::ofstream index(std::filesystem::path(out_dir) / "index.tsv");
    if (!index) throw Error("cannot create feature index in " + out_dir);

    std::set<std::string> used;
    size_t failures = 0;
    for (const auto& rec : m.records) {
        const std::string clip_path = detail::resolve_path(manifest_path, rec.path);
        try {
            const AudioClip clip = read_wav(clip_path);
            const Tensor feat = extract_features(clip, fp);
            const std::string stem = detail::unique_stem(used, detail::stem_of(rec.path));
            const std::string feat_path =
                (std::filesystem::path(out_dir) / (stem + ".feat")).string();
            write_feature(feat, feat_path);
            index << rec.path << '\t' << feat_path << "\n";
            if (verbose) std::cerr << "features: " << rec.path << " -> " << feat_path << "\n";
        } catch (const Error& e) {
            ++failures;
            std::cerr << "features: FAILED " << rec.path << ": " << e.what() << "\n";
        }
    }
    return failures == 0 ? kExitOk : kExitPartial;
}

namespace detail {

inline double plan_param(const PlanEntry& e, const std::string& key, double fallback) {
    const auto it = e.params.find(key);
    return it == e.params.end() ? fallback : std::stod(it->second);
}

// Deterministic same-scene pairs: indices grouped by scene, shuffled, and
// taken two at a time.
inline std::vector<std::pair<size_t, size_t>> scene_pairs(const CorpusManifest& m,
                                                          std::mt19937_64& rng) {
    std::map<std::string, std::vector<size_t>> by_scene;
    for (size_t i = 0; i < m.records.size(); ++i) by_scene[m.records[i].scene].push_back(i);
    std::vector<std::pair<size_t, size_t>> pairs;
    for (auto& [scene, idx] : by_scene) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t k = 0; k + 1 < idx.size(); k += 2) pairs.emplace_back(idx[k], idx[k + 1]);
    }
    return pairs;
}

}  // namespace detail

// augment: applies each plan row to the corpus and writes an extended
// manifest whose fifth column tags the source technique. Waveform
// techniques (pitch, audiomix) emit WAV clips; spectrum correction and
// offline mix-up emit FEAT files (offline mix-up pairs clips of the same
// scene so every record keeps a hard label).
inline int cmd_augment(const std::string& manifest_path, const std::string& plan_path,
                       const std::string& out_dir, const AugmentConfig& acfg,
                       const FeatureParams& fp, uint64_t seed, bool verbose = false) {
    acfg.validate();
    const CorpusManifest input = load_manifest(manifest_path);
    if (input.records.empty()) throw Error("augment: manifest is empty: " + manifest_path);

    std::vector<PlanEntry> plan = parse_plan(plan_path);
    {
        std::vector<PlanEntry> expanded;
        for (const auto& e : plan) {
            if (e.technique == "all") {
                for (const char* t : {"mixup", "speccorr", "pitch", "audiomix"})
                    expanded.push_back({t, e.params});
            } else {
                expanded.push_back(e);
            }
        }
        plan = std::move(expanded);
    }

    std::filesystem::create_directories(out_dir);
    std::mt19937_64 rng(seed);
    CorpusManifest extended = input;
    size_t failures = 0;

    auto read_clip = [&](size_t i) {
        return read_wav(detail::resolve_path(manifest_path, input.records[i].path));
    };
    auto out_path = [&](const std::string& technique, const std::string& name) {
        const auto dir = std::filesystem::path(out_dir) / technique;
        std::filesystem::create_directories(dir);
        return (dir / name).string();
    };
    auto add_record = [&](std::string path, const ManifestRecord& base,
                          const std::string& technique, std::string device = {}) {
        ManifestRecord r = base;
        r.path = std::move(path);
        r.technique = technique;
        if (!device.empty()) r.device = std::move(device);
        extended.records.push_back(std::move(r));
    };

    for (const auto& entry : plan) {
        if (entry.technique == "pitch") {
            std::vector<double> factors = acfg.pitch_factors;
            if (entry.params.count("factor")) factors = {std::stod(entry.params.at("factor"))};
            if (entry.params.count("factors")) {
                factors.clear();
                std::istringstream is(entry.params.at("factors"));
                std::string tok;
                while (std::getline(is, tok, ';')) factors.push_back(std::stod(tok));
            }
            for (size_t i = 0; i < input.records.size(); ++i) {
                try {
                    const AudioClip clip = read_clip(i);
                    for (double factor : factors) {
                        std::ostringstream name;
                        name << detail::stem_of(input.records[i].path) << "_f" << factor
                             << ".wav";
                        const std::string p = out_path("pitch", name.str());
                        write_wav(pitch_shift(clip, factor), p);
                        add_record(p, input.records[i], "pitch");
                    }
                } catch (const Error& e) {
                    ++failures;
                    std::cerr << "augment(pitch): FAILED " << input.records[i].path << ": "
                              << e.what() << "\n";
                }
            }
        } else if (entry.technique == "audiomix") {
            const double lo = detail::plan_param(entry, "low", acfg.audiomix_low);
            const double hi = detail::plan_param(entry, "high", acfg.audiomix_high);
            for (const auto& [ia, ib] : detail::scene_pairs(input, rng)) {
                try {
                    const AudioClip a = read_clip(ia), b = read_clip(ib);
                    const AudioClip mixed = audio_mix(a, b, input.records[ia].scene,
                                                      input.records[ib].scene, rng, lo, hi);
                    const std::string p =
                        out_path("audiomix", detail::stem_of(input.records[ia].path) + "__" +
                                                 detail::stem_of(input.records[ib].path) + ".wav");
                    write_wav(mixed, p);
                    add_record(p, input.records[ia], "audiomix",
                               input.records[ia].device + "+" + input.records[ib].device);
                } catch (const Error& e) {
                    ++failures;
                    std::cerr << "augment(audiomix): FAILED pair: " << e.what() << "\n";
                }
            }
        } else if (entry.technique == "mixup") {
            const double alpha = detail::plan_param(entry, "alpha", acfg.alpha);
            for (const auto& [ia, ib] : detail::scene_pairs(input, rng)) {
                try {
                    const Tensor fa = extract_features(read_clip(ia), fp);
                    const Tensor fb = extract_features(read_clip(ib), fp);
                    const auto mixed =
                        mixup_batches({fa}, {one_hot(scene_index(input.records[ia].scene))},
                                      {fb}, {one_hot(scene_index(input.records[ib].scene))},
                                      alpha, rng);
                    const std::string p =
                        out_path("mixup", detail::stem_of(input.records[ia].path) + "__" +
                                              detail::stem_of(input.records[ib].path) + ".feat");
                    write_feature(mixed.features[0], p);
                    add_record(p, input.records[ia], "mixup");
                } catch (const Error& e) {
                    ++failures;
                    std::cerr << "augment(mixup): FAILED pair: " << e.what() << "\n";
                }
            }
        } else if (entry.technique == "speccorr") {
            const size_t n_pairs = size_t(detail::plan_param(entry, "n_pairs", double(acfg.n_pairs)));
            std::map<std::string, std::vector<size_t>> by_device;
            for (size_t i = 0; i < input.records.size(); ++i)
                by_device[input.records[i].device].push_back(i);
            if (by_device.empty())
                throw Error("augment(speccorr): no device-grouped data in manifest");
            for (const auto& dev : acfg.reference_devices)
                if (!by_device.count(dev))
                    throw Error("augment(speccorr): reference device '" + dev +
                                "' not present in the corpus");

            // Per-device frequency responses from the first n_pairs clips.
            std::map<std::string, DeviceResponse> responses;
            for (const auto& [device, idx] : by_device) {
                std::vector<Spectrogram> spectra;
                for (size_t i : idx) {
                    if (spectra.size() == n_pairs) break;
                    spectra.push_back(
                        power_spectrum(frame_signal(read_clip(i), fp.window, fp.hop)));
                }
                responses[device] = estimate_device_response(spectra, n_pairs, device);
            }

            std::vector<DeviceResponse> ref_set;
            if (acfg.reference_devices.empty())
                for (const auto& [device, resp] : responses) ref_set.push_back(resp);
            else
                for (const auto& dev : acfg.reference_devices) ref_set.push_back(responses.at(dev));
            const DeviceResponse reference = mean_response(ref_set);

            std::map<std::string, std::vector<double>> coeff;
            for (const auto& [device, resp] : responses)
                coeff[device] = correction_coefficient(reference, resp);

            for (size_t i = 0; i < input.records.size(); ++i) {
                try {
                    const AudioClip clip = read_clip(i);
                    auto spec = power_spectrum(frame_signal(clip, fp.window, fp.hop));
                    spec = apply_spectrum_correction(spec, coeff.at(input.records[i].device));
                    const auto fb = mel_filterbank(fp.n_mels, fp.window, double(clip.sample_rate));
                    const auto lms = log_mel(spec, fb);
                    const auto [d, dd] = deltas(lms);
                    const Tensor feat = assemble_feature(lms, d, dd, fp.target_width);
                    const std::string p =
                        out_path("speccorr", detail::stem_of(input.records[i].path) + ".feat");
                    write_feature(feat, p);
                    add_record(p, input.records[i], "speccorr");
                } catch (const Error& e) {
                    ++failures;
                    std::cerr << "augment(speccorr): FAILED " << input.records[i].path << ": "
                              << e.what() << "\n";
                }
            }
        }
        if (verbose) std::cerr << "augment: finished " << entry.technique << "\n";
    }

    save_manifest(extended, (std::filesystem::path(out_dir) / "manifest.tsv").string(), true);
    return failures == 0 ? kExitOk : kExitPartial;
}

// train: builds datasets from the config's manifests (FEAT files are loaded
// directly, WAV clips are extracted on the fly), runs the multi-seed driver,
// and writes per-seed CSV curves plus checkpoints.
inline int cmd_train(const PipelineConfig& cfg, bool verbose = false) {
    if (cfg.train_manifest.empty() || cfg.val_manifest.empty())
        throw Error("train: config must set train_manifest and val_manifest");

    TrainConfig tc = cfg.train;
    if (!cfg.plan.empty()) tc.mixup = plan_enables_mixup(parse_plan(cfg.plan));

    const auto train_set = detail::load_dataset(cfg.train_manifest, cfg.features, cfg.feature_dir);
    const auto val_set = detail::load_dataset(cfg.val_manifest, cfg.features, cfg.feature_dir);
    const nn::NetworkConfig net_cfg = cfg.network_config();

    const TrainReport report = train_run(tc, train_set.data, val_set.data, net_cfg, cfg.model_dir);

    if (!cfg.report_dir.empty()) {
        std::filesystem::create_directories(cfg.report_dir);
        for (const auto& r : report.per_seed)
            write_train_csv(r, (std::filesystem::path(cfg.report_dir) /
                                ("train_seed_" + std::to_string(r.seed) + ".csv"))
                                   .string());
    }
    for (const auto& r : report.per_seed) {
        std::cout << "seed " << r.seed << ": best_val_accuracy=" << r.best_val_accuracy
                  << " at epoch " << r.best_epoch;
        if (!r.checkpoint_path.empty()) std::cout << " -> " << r.checkpoint_path;
        std::cout << "\n";
    }
    std::cout << "mean_best_accuracy=" << report.mean_best_accuracy << "\n";
    if (verbose)
        for (const auto& r : report.per_seed)
            std::cerr << "train: seed " << r.seed << " final loss "
                      << r.curve.back().train_loss << "\n";
    return kExitOk;
}

// eval: per-scene and per-device report for a saved model over a manifest.
inline int cmd_eval(const std::string& model_path, const std::string& manifest_path,
                    const PipelineConfig& cfg, bool /*verbose*/ = false) {
    nn::ModelParams model = load_model(model_path);
    const auto set = detail::load_dataset(manifest_path, cfg.features, cfg.feature_dir);
    const nn::NetworkConfig net_cfg = cfg.network_config();

    std::vector<std::vector<double>> probs;
    std::vector<int> labels;
    probs.reserve(set.data.size());
    for (const auto& ex : set.data) {
        probs.push_back(nn::network_forward(ex.feature, model, net_cfg, nn::Mode::kInfer));
        labels.push_back(ex.label);
    }
    const EvalReport rep = per_scene_report(probs, labels, set.devices);

    if (!cfg.report_dir.empty()) {
        std::filesystem::create_directories(cfg.report_dir);
        write_eval_csv(rep, (std::filesystem::path(cfg.report_dir) / "eval.csv").string());
        write_confusion_csv(rep,
                            (std::filesystem::path(cfg.report_dir) / "confusion.csv").string());
    }
    for (const auto& w : rep.warnings) std::cerr << "eval: warning: " << w << "\n";
    std::cout << "overall_accuracy=" << rep.overall_accuracy
              << " overall_logloss=" << rep.overall_logloss
              << " macro_accuracy=" << rep.macro_accuracy
              << " macro_logloss=" << rep.macro_logloss << "\n";
    return kExitOk;
}

inline int cmd_quantize(const std::string& model_in, const std::string& model_out,
                        bool /*verbose*/ = false) {
    const nn::ModelParams model = load_model(model_in);
    const nn::ModelParams q = quantize_model(model);
    save_model(q, model_out);
    std::cout << "quantized " << model_in << " -> " << model_out << " ("
              << nn::count_parameters(q, false) << " nonzero params at 16 bits)\n";
    return kExitOk;
}

// audit: prints the machine-readable summary line and a small table;
// nonzero exit when the model is over budget.
inline int cmd_audit(const std::string& model_path, double limit_kb, bool verbose = false) {
    const nn::ModelParams model = load_model(model_path);
    const BudgetReport r = audit_budget(model, limit_kb);
    std::cout << budget_summary_line(r) << "\n";
    std::cout.setf(std::ios::fixed);
    std::cout.precision(1);
    std::cout << "  non-zero parameters : " << r.nonzero_count << "\n"
              << "  bits per parameter  : " << r.bits_per_param << "\n"
              << "  model size          : " << r.size_kb << " KB\n"
              << "  size limit          : " << r.limit_kb << " KB\n"
              << "  verdict             : " << (r.pass ? "PASS" : "FAIL") << "\n";
    if (verbose)
        for (const auto& t : model.tensors) {
            size_t nz = 0;
            for (double v : t.values) nz += v != 0.0;
            std::cout << "  " << t.name << ": " << nz << "/" << t.values.size() << " nonzero\n";
        }
    return r.pass ? kExitOk : kExitValidation;
}

}  // namespace lasc
