// SPDX-License-Identifier: Apache-2.0
//
// Command-line front door for the acoustic scene classification toolkit:
// feature extraction, data augmentation, training, evaluation, 16-bit
// truncation quantization, and the model-size budget audit.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lasc/cli.hpp"
#include "lasc/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"lasc - low-complexity acoustic scene classification toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed = 1;
    bool verbose = false;
    app.add_option("--config", config_path, "key=value pipeline configuration file");
    app.add_option("--seed", seed, "seed for every random choice (default 1)");
    app.add_flag("--verbose", verbose, "chatty progress on stderr");

    std::string manifest, out_dir, plan, model_path, model_out;
    double limit_kb = -1.0;

    auto* c_features = app.add_subcommand("features", "extract FEAT files for a manifest");
    c_features->add_option("--manifest", manifest, "input manifest TSV")->required();
    c_features->add_option("--out", out_dir, "output directory")->required();

    auto* c_augment = app.add_subcommand("augment", "apply an augmentation plan to a corpus");
    c_augment->add_option("--manifest", manifest, "input manifest TSV")->required();
    c_augment->add_option("--plan", plan, "plan TSV (overrides config)");
    c_augment->add_option("--out", out_dir, "output directory")->required();

    auto* c_train = app.add_subcommand("train", "multi-seed training run from the config");

    auto* c_eval = app.add_subcommand("eval", "per-scene report for a saved model");
    c_eval->add_option("--model", model_path, "LASC model file")->required();
    c_eval->add_option("--manifest", manifest, "manifest to evaluate (default: val_manifest)");

    auto* c_quantize = app.add_subcommand("quantize", "truncate a model to 16-bit words");
    c_quantize->add_option("--in", model_path, "input model")->required();
    c_quantize->add_option("--out", model_out, "output model")->required();

    auto* c_audit = app.add_subcommand("audit", "non-zero parameter budget audit");
    c_audit->add_option("--model", model_path, "LASC model file")->required();
    c_audit->add_option("--limit-kb", limit_kb, "size limit in KB (default from config, else 128)");

    CLI11_PARSE(app, argc, argv);

    try {
        lasc::PipelineConfig cfg;
        if (!config_path.empty()) cfg = lasc::PipelineConfig::load(config_path);

        if (c_features->parsed())
            return lasc::cmd_features(manifest, out_dir, cfg.features, verbose);
        if (c_augment->parsed()) {
            const std::string plan_path = plan.empty() ? cfg.plan : plan;
            if (plan_path.empty())
                throw lasc::Error("augment: no plan given (use --plan or the config)");
            return lasc::cmd_augment(manifest, plan_path, out_dir, cfg.augment, cfg.features,
                                     seed, verbose);
        }
        if (c_train->parsed()) return lasc::cmd_train(cfg, verbose);
        if (c_eval->parsed()) {
            const std::string m = manifest.empty() ? cfg.val_manifest : manifest;
            if (m.empty()) throw lasc::Error("eval: no manifest given");
            return lasc::cmd_eval(model_path, m, cfg, verbose);
        }
        if (c_quantize->parsed()) return lasc::cmd_quantize(model_path, model_out, verbose);
        if (c_audit->parsed())
            return lasc::cmd_audit(model_path, limit_kb > 0 ? limit_kb : cfg.limit_kb, verbose);
    } catch (const lasc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return lasc::kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return lasc::kExitValidation;
    }
    return lasc::kExitOk;
}
