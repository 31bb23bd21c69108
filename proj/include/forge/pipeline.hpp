#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "forge/convbuilder.hpp"
#include "forge/core.hpp"
#include "forge/eval.hpp"
#include "forge/ingest.hpp"
#include "forge/ioutil.hpp"
#include "forge/sampler.hpp"

namespace forge {

inline constexpr const char* kToolVersion = "0.1.0";

struct SourceSpec {
    std::string tag;
    std::string format;  // coco | mot | sot | referring | captions
    std::string path;
    std::string seqinfo;    // mot sidecar
    std::string image_dir;  // sot image listing
    int width = 0;          // sot frame dims
    int height = 0;
    std::vector<Task> tasks;  // defaults derive from the format
};

struct TextGenSpec {
    std::string mode = "template";  // template | http
    std::string base_url;
};

struct BuilderSpec {
    double negative_ratio = 0.1;
    std::string template_catalog;  // empty -> built-in catalog
    TextGenSpec textgen;
    std::map<std::string, double> task_weights;  // empty -> uniform
    std::int64_t records = 0;  // 0 -> one per stored sequence
    bool category_prefix = false;
    std::vector<std::string> distractors;
};

struct OutputSpec {
    std::string dir = "out";
    std::int64_t shard_size = 10000;
};

struct EvalSpec {
    std::string sot_gt;
    std::string choice;
    std::string pope;
};

struct ForgeConfig {
    std::vector<SourceSpec> sources;
    SamplerConfig sampler;
    BuilderSpec builder;
    OutputSpec output;
    EvalSpec eval;
    std::string config_digest;
};

ForgeConfig load_config(const std::string& path);
ForgeConfig config_from_json(const Json& doc);

std::vector<Task> default_tasks_for_format(const std::string& format);

// --- manifests -----------------------------------------------------------

struct StageCounters {
    std::int64_t attempted = 0;
    std::int64_t emitted = 0;
    std::map<std::string, std::int64_t> dropped_by_reason;

    std::int64_t dropped() const;
    bool consistent() const { return attempted == emitted + dropped(); }
};

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string config_digest;
    std::map<std::string, std::string> input_digests;
    std::map<std::string, StageCounters> stages;
    std::map<std::string, double> wall_clock_seconds;
    std::vector<std::pair<std::string, std::string>> shards;  // file, digest
    std::map<std::string, std::int64_t> task_counts;
    std::vector<std::string> warnings;

    Json to_json() const;
    void write(const std::string& path) const;
};

// --- canonical store -------------------------------------------------------

Json sequence_to_json(const SourceSequence& seq);
SourceSequence sequence_from_json(const Json& doc);

struct CanonicalStore {
    std::vector<SourceSequence> sequences;
    std::vector<std::vector<Task>> eligible_tasks;  // parallel to sequences
};

RunManifest run_ingest(const ForgeConfig& config, int workers);
CanonicalStore load_store(const ForgeConfig& config);

// --- corpus build ----------------------------------------------------------

struct BuiltRecord {
    std::string line;         // serialized record; empty when skipped
    std::string skip_reason;  // nonempty when skipped
    Task task = Task::Caption;
    bool negative = false;
};

// The data-parallel kernel behind cmd_build; pure per record index, so
// output is byte-identical for every worker count.
std::vector<BuiltRecord> build_records(const CanonicalStore& store,
                                       const ForgeConfig& config,
                                       std::uint64_t seed, int workers,
                                       std::vector<std::string>& warnings);

RunManifest run_build(const ForgeConfig& config, std::uint64_t seed,
                      int workers);

Json record_to_json(const ConversationRecord& record, const std::string& id,
                    const std::string& source_dataset);

// --- corpus validation -------------------------------------------------------

struct ValidationIssue {
    std::int64_t record_index = 0;
    std::string message;
};

struct ValidationOutcome {
    std::int64_t records = 0;
    std::vector<ValidationIssue> issues;
    bool ok() const { return records > 0 && issues.empty(); }
};

ValidationOutcome run_validate(const std::string& corpus_dir,
                               const TemplateCatalog& catalog);

// --- evaluation --------------------------------------------------------------

struct EvalRun {
    std::string kind;
    MetricReport report;
    std::vector<std::string> diagnostics;
    std::map<std::string, std::string> input_digests;
};

std::vector<SotGroundTruth> load_sot_ground_truth(const std::string& path);

EvalRun run_eval_sot(const std::string& pred_path, const std::string& gt_path,
                     ParseMode mode, int workers);
EvalRun run_eval_choice(const std::string& records_path,
                        const std::string& gt_path);
EvalRun run_eval_pope(const std::string& records_path,
                      const std::string& gt_path);

Json eval_report_json(const EvalRun& run);

}  // namespace forge
