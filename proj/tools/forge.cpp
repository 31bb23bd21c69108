// Command-line front end: ingest -> build -> validate plus the scoring
// commands. Exit codes are a stable contract for automation: 0 ok,
// 1 validation failure, 2 input error, 3 empty result.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "forge/parallel.hpp"
#include "forge/pipeline.hpp"

namespace {

int exit_code_for(const forge::Error& e) {
    switch (e.kind()) {
        case forge::ErrorKind::Validation: return 1;
        case forge::ErrorKind::Empty: return 3;
        default: return 2;
    }
}

void print_stage_summary(const forge::RunManifest& manifest) {
    for (const auto& [name, counters] : manifest.stages) {
        std::printf("%s: attempted=%lld emitted=%lld dropped=%lld\n",
                    name.c_str(),
                    static_cast<long long>(counters.attempted),
                    static_cast<long long>(counters.emitted),
                    static_cast<long long>(counters.dropped()));
        for (const auto& [reason, count] : counters.dropped_by_reason) {
            std::printf("  dropped (%s): %lld\n", reason.c_str(),
                        static_cast<long long>(count));
        }
    }
    for (const auto& [name, count] : manifest.task_counts) {
        std::printf("%s: %lld\n", name.c_str(),
                    static_cast<long long>(count));
    }
    for (const auto& warning : manifest.warnings) {
        std::printf("warning: %s\n", warning.c_str());
    }
}

void print_metrics_scaled(const forge::MetricReport& report) {
    // Table presentation: x100, one decimal.
    for (const auto& [name, value] : report.metrics) {
        std::printf("%s %.1f\n", name.c_str(), value * 100.0);
    }
    for (const auto& [name, value] : report.per_category) {
        std::printf("  %s %.1f\n", name.c_str(), value * 100.0);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajectory-interleaved conversation dataset toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    int workers = 0;  // 0 -> all hardware threads
    std::string out_override;
    bool strict = false;
    bool lenient = false;

    app.add_option("--config", config_path, "configuration file (JSON)");
    app.add_option("--seed", seed, "seed for all randomness");
    app.add_option("--workers", workers,
                   "worker threads (0 = hardware default)");
    app.add_option("--out", out_override, "override the output directory");
    app.add_flag("--strict", strict, "strict response parsing");
    app.add_flag("--lenient", lenient, "lenient response parsing (default)");

    auto* cmd_ingest = app.add_subcommand(
        "ingest", "parse configured sources into the canonical store");
    auto* cmd_build = app.add_subcommand(
        "build", "build the conversation corpus from the canonical store");
    auto* cmd_validate =
        app.add_subcommand("validate", "re-check a built corpus");
    std::string validate_path;
    cmd_validate->add_option("corpus", validate_path,
                             "corpus directory (defaults to <out>/corpus)");

    auto* cmd_eval = app.add_subcommand("eval", "score prediction files");
    std::string eval_kind, pred_path, gt_path, report_path;
    cmd_eval->add_option("--kind", eval_kind, "sot | choice | pope")
        ->required();
    cmd_eval->add_option("--pred", pred_path, "prediction / records JSONL")
        ->required();
    cmd_eval->add_option("--gt", gt_path, "ground-truth JSONL");
    cmd_eval->add_option("--report", report_path,
                         "write the full report JSON here");

    CLI11_PARSE(app, argc, argv);

    try {
        forge::ForgeConfig config;
        const bool needs_config =
            cmd_ingest->parsed() || cmd_build->parsed() ||
            (cmd_validate->parsed() && validate_path.empty());
        if (needs_config) {
            if (config_path.empty())
                throw forge::Error(forge::ErrorKind::Config,
                                   "--config is required for this command");
            config = forge::load_config(config_path);
            if (!out_override.empty()) config.output.dir = out_override;
        }

        if (cmd_ingest->parsed()) {
            const forge::RunManifest manifest =
                forge::run_ingest(config, workers);
            print_stage_summary(manifest);
            std::printf("canonical store written to %s/canonical\n",
                        config.output.dir.c_str());
            return 0;
        }

        if (cmd_build->parsed()) {
            const forge::RunManifest manifest =
                forge::run_build(config, seed, workers);
            print_stage_summary(manifest);
            std::printf("corpus written to %s/corpus\n",
                        config.output.dir.c_str());
            return 0;
        }

        if (cmd_validate->parsed()) {
            const std::string corpus = !validate_path.empty()
                                           ? validate_path
                                           : config.output.dir + "/corpus";
            const forge::TemplateCatalog catalog =
                needs_config && !config.builder.template_catalog.empty()
                    ? forge::TemplateCatalog::load_file(
                          config.builder.template_catalog)
                    : forge::TemplateCatalog::defaults();
            const forge::ValidationOutcome outcome =
                forge::run_validate(corpus, catalog);
            for (const auto& issue : outcome.issues) {
                std::printf("record %lld: %s\n",
                            static_cast<long long>(issue.record_index),
                            issue.message.c_str());
            }
            std::printf("%lld records, %zu issues\n",
                        static_cast<long long>(outcome.records),
                        outcome.issues.size());
            return outcome.ok() ? 0 : 1;
        }

        if (cmd_eval->parsed()) {
            const forge::ParseMode mode = strict ? forge::ParseMode::Strict
                                                 : forge::ParseMode::Lenient;
            forge::EvalRun run;
            if (eval_kind == "sot") {
                if (gt_path.empty())
                    throw forge::Error(forge::ErrorKind::Config,
                                       "--gt is required for sot");
                run = forge::run_eval_sot(pred_path, gt_path, mode, workers);
            } else if (eval_kind == "choice") {
                run = forge::run_eval_choice(pred_path, gt_path);
            } else if (eval_kind == "pope") {
                run = forge::run_eval_pope(pred_path, gt_path);
            } else {
                throw forge::Error(forge::ErrorKind::Config,
                                   "unknown eval kind: " + eval_kind);
            }
            print_metrics_scaled(run.report);
            for (const auto& d : run.diagnostics)
                std::printf("note: %s\n", d.c_str());
            if (!report_path.empty()) {
                forge::write_text_file(
                    report_path, forge::eval_report_json(run).dump(2) + "\n");
                std::printf("report written to %s\n", report_path.c_str());
            }
            return 0;
        }
    } catch (const forge::Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", forge::to_string(e.kind()),
                     e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
