#include "forge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "forge/digest.hpp"
#include "forge/parallel.hpp"
#include "forge/textgen.hpp"

namespace forge {

namespace fs = std::filesystem;

namespace {

constexpr Task kTaskOrder[] = {Task::Caption,   Task::Detection,
                               Task::Tracking,  Task::Referring,
                               Task::Reasoning, Task::Fit};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
}

std::string zero_pad(std::int64_t value, int width) {
    std::ostringstream os;
    os.width(width);
    os.fill('0');
    os << value;
    return os.str();
}

}  // namespace

std::vector<Task> default_tasks_for_format(const std::string& format) {
    if (format == "coco") return {Task::Detection};
    if (format == "mot") return {Task::Tracking};
    if (format == "sot") return {Task::Tracking};
    if (format == "referring") return {Task::Referring};
    if (format == "captions") return {Task::Caption};
    throw Error(ErrorKind::Config, "unknown source format: " + format);
}

ForgeConfig load_config(const std::string& path) {
    const std::string text = read_text_file(path);
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::Config, path + ": " + e.what());
    }
    ForgeConfig config = config_from_json(doc);
    config.config_digest = Sha256::of(text);
    return config;
}

ForgeConfig config_from_json(const Json& doc) {
    ForgeConfig config;
    std::set<std::string> tags;
    for (const auto& src : doc.value("sources", Json::array())) {
        SourceSpec spec;
        spec.tag = src.value("tag", "");
        spec.format = src.value("format", "");
        spec.path = src.value("path", "");
        spec.seqinfo = src.value("seqinfo", "");
        spec.image_dir = src.value("image_dir", "");
        spec.width = src.value("width", 0);
        spec.height = src.value("height", 0);
        if (spec.tag.empty() || spec.path.empty())
            throw Error(ErrorKind::Config, "sources need a tag and a path");
        if (!tags.insert(spec.tag).second)
            throw Error(ErrorKind::Config, "duplicate source tag " + spec.tag);
        spec.tasks = default_tasks_for_format(spec.format);
        if (src.contains("tasks")) {
            spec.tasks.clear();
            for (const auto& t : src["tasks"]) {
                const auto task = task_from_string(t.get<std::string>());
                if (!task)
                    throw Error(ErrorKind::Config,
                                "unknown task in source " + spec.tag);
                spec.tasks.push_back(*task);
            }
        }
        config.sources.push_back(std::move(spec));
    }

    if (doc.contains("sampler")) {
        const auto& s = doc["sampler"];
        if (s.contains("frame_counts"))
            config.sampler.frame_counts =
                s["frame_counts"].get<std::vector<int>>();
        if (s.contains("gaps"))
            config.sampler.gaps = s["gaps"].get<std::vector<int>>();
        config.sampler.min_size_divisor =
            s.value("min_size_divisor", config.sampler.min_size_divisor);
        config.sampler.max_categories =
            s.value("max_categories", config.sampler.max_categories);
    }
    std::sort(config.sampler.frame_counts.begin(),
              config.sampler.frame_counts.end());
    std::sort(config.sampler.gaps.begin(), config.sampler.gaps.end());
    config.sampler.validate();

    if (doc.contains("builder")) {
        const auto& b = doc["builder"];
        config.builder.negative_ratio =
            b.value("negative_ratio", config.builder.negative_ratio);
        config.builder.template_catalog = b.value("template_catalog", "");
        config.builder.records = b.value("records", std::int64_t{0});
        config.builder.category_prefix = b.value("category_prefix", false);
        if (b.contains("distractors"))
            config.builder.distractors =
                b["distractors"].get<std::vector<std::string>>();
        if (b.contains("textgen")) {
            config.builder.textgen.mode =
                b["textgen"].value("mode", "template");
            config.builder.textgen.base_url = b["textgen"].value("base_url", "");
        }
        if (b.contains("task_weights")) {
            double sum = 0;
            for (const auto& [name, weight] :
                 b["task_weights"].items()) {
                if (!task_from_string(name))
                    throw Error(ErrorKind::Config,
                                "unknown task in task_weights: " + name);
                const double w = weight.get<double>();
                if (w < 0)
                    throw Error(ErrorKind::Config,
                                "task weights must be nonnegative");
                config.builder.task_weights[name] = w;
                sum += w;
            }
            if (sum <= 0)
                throw Error(ErrorKind::Config,
                            "task weights must sum to a positive value");
        }
        if (config.builder.negative_ratio < 0 ||
            config.builder.negative_ratio > 1)
            throw Error(ErrorKind::Config,
                        "negative_ratio must lie in [0,1]");
    }

    if (doc.contains("output")) {
        config.output.dir = doc["output"].value("dir", config.output.dir);
        config.output.shard_size =
            doc["output"].value("shard_size", config.output.shard_size);
    }
    if (config.output.shard_size < 1)
        throw Error(ErrorKind::Config, "shard_size must be >= 1");
    if (config.output.dir.empty())
        throw Error(ErrorKind::Config, "output dir must be nonempty");

    if (doc.contains("eval")) {
        config.eval.sot_gt = doc["eval"].value("sot_gt", "");
        config.eval.choice = doc["eval"].value("choice", "");
        config.eval.pope = doc["eval"].value("pope", "");
    }
    return config;
}

std::int64_t StageCounters::dropped() const {
    std::int64_t total = 0;
    for (const auto& [reason, count] : dropped_by_reason) total += count;
    return total;
}

Json RunManifest::to_json() const {
    Json doc;
    doc["tool_version"] = tool_version;
    doc["config_digest"] = config_digest;
    doc["input_digests"] = input_digests;
    Json stages_json = Json::object();
    for (const auto& [name, counters] : stages) {
        Json c;
        c["attempted"] = counters.attempted;
        c["emitted"] = counters.emitted;
        c["dropped"] = counters.dropped();
        c["dropped_by_reason"] = counters.dropped_by_reason;
        stages_json[name] = c;
    }
    doc["stages"] = stages_json;
    doc["wall_clock_seconds"] = wall_clock_seconds;
    Json shards_json = Json::array();
    for (const auto& [file, digest] : shards) {
        shards_json.push_back(Json{{"file", file}, {"sha256", digest}});
    }
    doc["shards"] = shards_json;
    doc["task_counts"] = task_counts;
    doc["warnings"] = warnings;
    return doc;
}

void RunManifest::write(const std::string& path) const {
    write_text_file(path, to_json().dump(2) + "\n");
}

Json sequence_to_json(const SourceSequence& seq) {
    Json doc;
    doc["dataset"] = seq.dataset;
    Json frames = Json::array();
    for (const auto& f : seq.frames) {
        frames.push_back(Json{{"index", f.index},
                              {"source_frame_id", f.source_frame_id},
                              {"image_path", f.image_path},
                              {"width", f.width},
                              {"height", f.height}});
    }
    doc["frames"] = frames;
    Json tracklets = Json::array();
    for (const auto& t : seq.tracklets) {
        Json entry;
        entry["id"] = t.id;
        entry["category"] = t.category;
        if (t.appearance) entry["appearance"] = *t.appearance;
        if (t.action) entry["action"] = *t.action;
        Json boxes = Json::object();
        for (const auto& [frame, box] : t.boxes) {
            boxes[std::to_string(frame)] =
                Json::array({box.xmin, box.ymin, box.xmax, box.ymax});
        }
        entry["boxes"] = boxes;
        tracklets.push_back(entry);
    }
    doc["tracklets"] = tracklets;
    if (!seq.captions.empty()) doc["captions"] = seq.captions;
    return doc;
}

SourceSequence sequence_from_json(const Json& doc) {
    SourceSequence seq;
    seq.dataset = doc.value("dataset", "");
    for (const auto& f : doc.value("frames", Json::array())) {
        FrameRef frame;
        frame.index = f.value("index", 0);
        frame.source_frame_id = f.value("source_frame_id", std::int64_t{0});
        frame.image_path = f.value("image_path", "");
        frame.width = f.value("width", 0);
        frame.height = f.value("height", 0);
        seq.frames.push_back(std::move(frame));
    }
    for (const auto& t : doc.value("tracklets", Json::array())) {
        Tracklet tracklet;
        tracklet.id = t.value("id", std::int64_t{0});
        tracklet.category = t.value("category", "");
        if (t.contains("appearance"))
            tracklet.appearance = t["appearance"].get<std::string>();
        if (t.contains("action"))
            tracklet.action = t["action"].get<std::string>();
        for (const auto& [key, value] : t.at("boxes").items()) {
            BoundingBox box{value[0].get<double>(), value[1].get<double>(),
                            value[2].get<double>(), value[3].get<double>()};
            tracklet.boxes[std::stoi(key)] = box;
        }
        seq.tracklets.push_back(std::move(tracklet));
    }
    if (doc.contains("captions"))
        seq.captions = doc["captions"].get<std::vector<std::string>>();
    validate_sequence(seq);
    return seq;
}

namespace {

struct SourceIngest {
    std::string jsonl;
    IngestCounters counters;
    std::string input_digest;
    std::int64_t sequences = 0;
};

SourceIngest ingest_one_source(const SourceSpec& spec) {
    IngestResult result;
    if (spec.format == "coco") {
        result = ingest_coco_detection(spec.path, spec.tag);
    } else if (spec.format == "mot") {
        if (spec.seqinfo.empty())
            throw Error(ErrorKind::Config,
                        "mot source " + spec.tag + " needs a seqinfo path");
        result = ingest_mot_challenge(spec.path, spec.seqinfo, spec.tag);
    } else if (spec.format == "sot") {
        result = ingest_sot_sequence(spec.path, spec.image_dir, spec.width,
                                     spec.height, spec.tag);
    } else if (spec.format == "referring") {
        ReferringIngestResult referring = ingest_referring(spec.path, spec.tag);
        result.counters = referring.counters;
        for (const auto& record : referring.records)
            result.sequences.push_back(to_sequence(record, spec.tag));
    } else if (spec.format == "captions") {
        result = ingest_captions(spec.path, spec.tag);
    } else {
        throw Error(ErrorKind::Config, "unknown source format: " + spec.format);
    }

    if (!result.counters.consistent()) {
        std::ostringstream os;
        os << spec.tag << ": box conservation violated (input="
           << result.counters.input_records
           << " emitted=" << result.counters.emitted << ")";
        throw Error(ErrorKind::Validation, os.str());
    }

    SourceIngest out;
    out.counters = result.counters;
    out.input_digest = Sha256::of_file(spec.path);
    out.sequences = static_cast<std::int64_t>(result.sequences.size());
    std::ostringstream os;
    for (const auto& seq : result.sequences)
        os << sequence_to_json(seq).dump() << '\n';
    out.jsonl = os.str();
    return out;
}

}  // namespace

RunManifest run_ingest(const ForgeConfig& config, int workers) {
    if (config.sources.empty())
        throw Error(ErrorKind::Config, "no sources configured");
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = fs::path(config.output.dir) / "canonical";
    fs::create_directories(dir);

    // File-level parallelism; results land in config order.
    const std::vector<SourceIngest> results =
        parallel_map(config.sources.size(), workers, [&](std::size_t i) {
            return ingest_one_source(config.sources[i]);
        });

    RunManifest manifest;
    manifest.config_digest = config.config_digest;
    for (std::size_t i = 0; i < config.sources.size(); ++i) {
        const SourceSpec& spec = config.sources[i];
        const SourceIngest& result = results[i];
        const fs::path shard = dir / (spec.tag + ".jsonl");
        write_text_file(shard.string(), result.jsonl);
        manifest.shards.emplace_back(shard.string(),
                                     Sha256::of(result.jsonl));
        manifest.input_digests[spec.path] = result.input_digest;
        StageCounters counters;
        counters.attempted = result.counters.input_records;
        counters.emitted = result.counters.emitted;
        if (result.counters.dropped_flag)
            counters.dropped_by_reason["consider_flag_zero"] =
                result.counters.dropped_flag;
        if (result.counters.dropped_degenerate)
            counters.dropped_by_reason["degenerate_box"] =
                result.counters.dropped_degenerate;
        if (result.counters.skipped)
            counters.dropped_by_reason["skipped_with_warning"] =
                result.counters.skipped;
        manifest.stages["ingest/" + spec.tag] = counters;
        manifest.task_counts["sequences/" + spec.tag] = result.sequences;
    }
    manifest.wall_clock_seconds["ingest"] = seconds_since(start);
    manifest.write((dir / "manifest.json").string());
    return manifest;
}

CanonicalStore load_store(const ForgeConfig& config) {
    const fs::path dir = fs::path(config.output.dir) / "canonical";
    CanonicalStore store;
    for (const auto& spec : config.sources) {
        const fs::path shard = dir / (spec.tag + ".jsonl");
        for_each_jsonl_line(
            shard.string(), [&](std::size_t line_no, const std::string& line) {
                Json doc;
                try {
                    doc = Json::parse(line);
                } catch (const Json::parse_error& e) {
                    std::ostringstream os;
                    os << shard.string() << ":" << line_no << ": " << e.what();
                    throw Error(ErrorKind::Parse, os.str());
                }
                store.sequences.push_back(sequence_from_json(doc));
                store.eligible_tasks.push_back(spec.tasks);
            });
    }
    return store;
}

Json record_to_json(const ConversationRecord& record, const std::string& id,
                    const std::string& source_dataset) {
    Json doc;
    doc["id"] = id;
    doc["task"] = to_string(record.task);
    Json images = Json::array();
    Json frames = Json::array();
    for (const auto& f : record.frames) {
        images.push_back(f.image_path);
        frames.push_back(Json{{"index", f.index},
                              {"source_frame_id", f.source_frame_id},
                              {"image_path", f.image_path},
                              {"width", f.width},
                              {"height", f.height}});
    }
    doc["images"] = images;
    doc["conversations"] =
        Json::array({Json{{"from", "human"}, {"value", record.question}},
                     Json{{"from", "assistant"}, {"value", record.answer}}});
    Json meta;
    meta["source_dataset"] = source_dataset;
    meta["is_negative"] = record.is_negative;
    meta["seed_trace"] = record.seed_trace;
    meta["frames"] = frames;
    if (record.observation) {
        const char* kind = "location";
        if (record.observation->kind == ObservationKind::Appearance)
            kind = "appearance";
        else if (record.observation->kind == ObservationKind::Action)
            kind = "action";
        meta["observation"] = Json{{"kind", kind},
                                   {"text", record.observation->text},
                                   {"subject_id", record.observation->subject_id}};
    }
    if (record.future_text) meta["future_text"] = *record.future_text;
    doc["meta"] = meta;
    return doc;
}

namespace {

struct TaskPlan {
    Task task = Task::Caption;
    std::vector<std::size_t> pool;  // indices into the store
    std::int64_t count = 0;         // records to build
    std::int64_t offset = 0;        // first global record index
};

bool sequence_suits_task(const SourceSequence& seq, Task task,
                         const SamplerConfig& sampler) {
    switch (task) {
        case Task::Caption:
            return !seq.captions.empty();
        case Task::Detection:
            return !seq.tracklets.empty();
        case Task::Tracking: {
            if (seq.tracklets.empty()) return false;
            const int min_k = *std::min_element(sampler.frame_counts.begin(),
                                                sampler.frame_counts.end());
            const int min_g = *std::min_element(sampler.gaps.begin(),
                                                sampler.gaps.end());
            return static_cast<int>(seq.frames.size()) >=
                   (min_k - 1) * min_g + 1;
        }
        case Task::Referring:
        case Task::Reasoning:
            for (const auto& t : seq.tracklets)
                if (t.appearance && !t.appearance->empty()) return true;
            return false;
        case Task::Fit:
            if (seq.frames.size() < 2) return false;
            for (const auto& t : seq.tracklets)
                if (t.action && !t.action->empty()) return true;
            return false;
    }
    return false;
}

std::vector<TaskPlan> plan_tasks(const CanonicalStore& store,
                                 const ForgeConfig& config,
                                 std::vector<std::string>& warnings) {
    std::vector<TaskPlan> plans;
    for (Task task : kTaskOrder) {
        TaskPlan plan;
        plan.task = task;
        for (std::size_t i = 0; i < store.sequences.size(); ++i) {
            const auto& eligible = store.eligible_tasks[i];
            if (std::find(eligible.begin(), eligible.end(), task) ==
                eligible.end())
                continue;
            if (sequence_suits_task(store.sequences[i], task, config.sampler))
                plan.pool.push_back(i);
        }
        plans.push_back(std::move(plan));
    }

    std::int64_t total = config.builder.records;
    if (total <= 0) total = static_cast<std::int64_t>(store.sequences.size());

    // Weight share over tasks that are requested and have data.
    std::map<Task, double> weights;
    if (config.builder.task_weights.empty()) {
        for (const auto& plan : plans)
            if (!plan.pool.empty()) weights[plan.task] = 1.0;
    } else {
        for (const auto& [name, weight] : config.builder.task_weights) {
            if (weight <= 0) continue;
            const Task task = *task_from_string(name);
            const auto it =
                std::find_if(plans.begin(), plans.end(),
                             [&](const TaskPlan& p) { return p.task == task; });
            if (it->pool.empty()) {
                warnings.push_back(std::string("task ") + to_string(task) +
                                   " has a positive weight but no eligible "
                                   "sequences; emitting zero records");
                continue;
            }
            weights[task] = weight;
        }
    }
    if (weights.empty())
        throw Error(ErrorKind::Empty,
                    "no task has both a positive weight and eligible data");

    double weight_sum = 0;
    for (const auto& [task, w] : weights) weight_sum += w;

    // Largest-remainder allocation so counts sum exactly to the target.
    std::vector<std::pair<double, TaskPlan*>> remainders;
    std::int64_t assigned = 0;
    for (auto& plan : plans) {
        const auto it = weights.find(plan.task);
        if (it == weights.end()) continue;
        const double ideal = total * it->second / weight_sum;
        plan.count = static_cast<std::int64_t>(ideal);
        assigned += plan.count;
        remainders.emplace_back(ideal - static_cast<double>(plan.count),
                                &plan);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) {
                         return a.first > b.first;
                     });
    for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
        ++remainders[i].second->count;
        ++assigned;
    }

    std::int64_t offset = 0;
    for (auto& plan : plans) {
        plan.offset = offset;
        offset += plan.count;
    }
    return plans;
}

ClipSample whole_sequence_clip(const SourceSequence& seq) {
    ClipSample clip;
    clip.source_dataset = seq.dataset;
    clip.gap = 1;
    clip.frames = seq.frames;
    clip.tracklets = seq.tracklets;
    return clip;
}

BuiltRecord build_one(const CanonicalStore& store, const ForgeConfig& config,
                      const TemplateCatalog& catalog, TextGenClient& client,
                      const BuilderConfig& builder_cfg, const TaskPlan& plan,
                      std::uint64_t index) {
    BuiltRecord out;
    out.task = plan.task;
    Rng seq_rng(builder_cfg.seed, index, RngStream::SequenceChoice);
    const std::size_t seq_index =
        plan.pool[static_cast<std::size_t>(seq_rng.bounded(plan.pool.size()))];
    const SourceSequence& seq = store.sequences[seq_index];
    const TaskTemplate& tmpl = catalog.for_task(plan.task);

    try {
        ConversationRecord record;
        switch (plan.task) {
            case Task::Caption: {
                Rng pick(builder_cfg.seed, index, RngStream::FrameChoice);
                const std::string& caption =
                    seq.captions[static_cast<std::size_t>(
                        pick.bounded(seq.captions.size()))];
                record = build_caption_record(seq.frames.front(), caption,
                                              tmpl, builder_cfg, index);
                break;
            }
            case Task::Detection: {
                int frame_index = 1;
                if (seq.frames.size() > 1) {
                    Rng pick(builder_cfg.seed, index, RngStream::FrameChoice);
                    frame_index = 1 + static_cast<int>(
                                          pick.bounded(seq.frames.size()));
                }
                ClipSample clip = single_frame_clip(seq, frame_index);
                clip = filter_small(clip, config.sampler).clip;
                clip = cap_categories(clip, config.sampler, index).clip;
                if (auto negative =
                        inject_negative(clip, tmpl, builder_cfg, index)) {
                    record = std::move(*negative);
                } else {
                    record = build_fpt_record(clip, tmpl, builder_cfg, index);
                }
                break;
            }
            case Task::Tracking: {
                ClipSample clip = sample_clip(seq, config.sampler, index);
                clip = filter_small(clip, config.sampler).clip;
                if (auto negative =
                        inject_negative(clip, tmpl, builder_cfg, index)) {
                    record = std::move(*negative);
                } else {
                    record = build_fpt_record(clip, tmpl, builder_cfg, index);
                }
                break;
            }
            case Task::Referring:
            case Task::Reasoning: {
                ClipSample clip =
                    static_cast<int>(seq.frames.size()) <=
                            config.sampler.max_frame_count()
                        ? whole_sequence_clip(seq)
                        : sample_clip(seq, config.sampler, index);
                record = build_fpt_record(clip, tmpl, builder_cfg, index);
                break;
            }
            case Task::Fit: {
                ClipSample clip = sample_clip(seq, config.sampler, index);
                clip = filter_small(clip, config.sampler).clip;
                record = build_fit_from_clip(clip, tmpl, builder_cfg, index,
                                             client);
                break;
            }
        }
        out.negative = record.is_negative;
        const std::string id = std::string(to_string(plan.task)) + "-" +
                               zero_pad(static_cast<std::int64_t>(index), 8);
        out.line = record_to_json(record, id, seq.dataset).dump();
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
        out.skip_reason = e.what();
    }
    return out;
}

}  // namespace

std::vector<BuiltRecord> build_records(const CanonicalStore& store,
                                       const ForgeConfig& config,
                                       std::uint64_t seed, int workers,
                                       std::vector<std::string>& warnings) {
    if (store.sequences.empty())
        throw Error(ErrorKind::Empty, "canonical store is empty");
    const std::vector<TaskPlan> plans = plan_tasks(store, config, warnings);

    const TemplateCatalog catalog =
        config.builder.template_catalog.empty()
            ? TemplateCatalog::defaults()
            : TemplateCatalog::load_file(config.builder.template_catalog);
    const auto client = make_textgen_client(config.builder.textgen.mode,
                                            config.builder.textgen.base_url);

    BuilderConfig builder_cfg;
    builder_cfg.seed = seed;
    builder_cfg.negative_ratio = config.builder.negative_ratio;
    builder_cfg.category_prefix = config.builder.category_prefix;
    builder_cfg.distractors = config.builder.distractors;

    std::int64_t total = 0;
    for (const auto& plan : plans) total += plan.count;

    return parallel_map(
        static_cast<std::size_t>(total), workers, [&](std::size_t i) {
            const auto index = static_cast<std::int64_t>(i);
            const TaskPlan* plan = nullptr;
            for (const auto& p : plans) {
                if (index >= p.offset && index < p.offset + p.count) {
                    plan = &p;
                    break;
                }
            }
            return build_one(store, config, catalog, *client, builder_cfg,
                             *plan, i);
        });
}

RunManifest run_build(const ForgeConfig& config, std::uint64_t seed,
                      int workers) {
    const auto start = std::chrono::steady_clock::now();
    const CanonicalStore store = load_store(config);

    RunManifest manifest;
    manifest.config_digest = config.config_digest;
    const std::vector<BuiltRecord> records =
        build_records(store, config, seed, workers, manifest.warnings);

    StageCounters counters;
    std::vector<const std::string*> lines;
    for (const auto& record : records) {
        ++counters.attempted;
        if (!record.skip_reason.empty()) {
            ++counters.dropped_by_reason[record.skip_reason];
            continue;
        }
        ++counters.emitted;
        ++manifest.task_counts[to_string(record.task)];
        if (record.negative) ++manifest.task_counts["negative"];
        lines.push_back(&record.line);
    }
    manifest.stages["build"] = counters;
    if (lines.empty())
        throw Error(ErrorKind::Empty, "empty corpus after filtering");

    const fs::path dir = fs::path(config.output.dir) / "corpus";
    fs::create_directories(dir);
    // Remove stale shards from earlier runs so digests are unambiguous.
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("records-", 0) == 0) fs::remove(entry.path());
    }
    std::int64_t shard_index = 0;
    std::size_t cursor = 0;
    while (cursor < lines.size()) {
        std::ostringstream os;
        const std::size_t end =
            std::min(cursor + static_cast<std::size_t>(config.output.shard_size),
                     lines.size());
        for (; cursor < end; ++cursor) os << *lines[cursor] << '\n';
        const fs::path shard =
            dir / ("records-" + zero_pad(shard_index++, 5) + ".jsonl");
        const std::string content = os.str();
        write_text_file(shard.string(), content);
        manifest.shards.emplace_back(shard.string(), Sha256::of(content));
    }
    manifest.wall_clock_seconds["build"] = seconds_since(start);
    manifest.write((dir / "manifest.json").string());
    return manifest;
}

ValidationOutcome run_validate(const std::string& corpus_dir,
                               const TemplateCatalog& catalog) {
    ValidationOutcome outcome;
    std::vector<std::string> shards;
    if (fs::is_directory(corpus_dir)) {
        for (const auto& entry : fs::directory_iterator(corpus_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("records-", 0) == 0 &&
                name.find(".jsonl") != std::string::npos)
                shards.push_back(entry.path().string());
        }
        std::sort(shards.begin(), shards.end());
    } else if (fs::is_regular_file(corpus_dir)) {
        shards.push_back(corpus_dir);
    } else {
        throw Error(ErrorKind::Io, "corpus not found: " + corpus_dir);
    }

    std::int64_t index = -1;
    const auto issue = [&](const std::string& message) {
        outcome.issues.push_back({index, message});
    };

    for (const auto& shard : shards) {
        for_each_jsonl_line(shard, [&](std::size_t, const std::string& line) {
            ++index;
            ++outcome.records;
            Json doc;
            try {
                doc = Json::parse(line);
            } catch (const Json::parse_error& e) {
                issue(std::string("unparseable json: ") + e.what());
                return;
            }
            const auto task = task_from_string(doc.value("task", ""));
            if (!task) {
                issue("unknown task '" + doc.value("task", "") + "'");
                return;
            }
            const auto& conversations = doc.value("conversations", Json::array());
            if (conversations.size() != 2 ||
                conversations[0].value("from", "") != "human" ||
                conversations[1].value("from", "") != "assistant") {
                issue("conversations must be a human/assistant pair");
                return;
            }
            const std::string question = conversations[0].value("value", "");
            const std::string answer = conversations[1].value("value", "");
            if (question.empty() || answer.empty()) {
                issue("question and answer must be nonempty");
                return;
            }
            if (!doc.contains("meta")) {
                issue("missing meta");
                return;
            }
            const auto& meta = doc["meta"];
            const auto& frames = meta.value("frames", Json::array());
            if (frames.empty() ||
                doc.value("images", Json::array()).size() != frames.size()) {
                issue("images and meta.frames must align and be nonempty");
                return;
            }
            for (std::size_t i = 0; i < frames.size(); ++i) {
                if (frames[i].value("index", 0) != static_cast<int>(i) + 1 ||
                    frames[i].value("width", 0) <= 0 ||
                    frames[i].value("height", 0) <= 0) {
                    issue("frame " + std::to_string(i + 1) +
                          " violates frame invariants");
                    return;
                }
            }

            const bool negative = meta.value("is_negative", false);
            if (negative) {
                if (answer != catalog.for_task(*task).negative_answer)
                    issue("negative record answer differs from the template");
                return;
            }
            switch (*task) {
                case Task::Caption:
                    break;
                case Task::Detection:
                case Task::Tracking:
                case Task::Referring:
                case Task::Reasoning: {
                    const ParsedTrajectories parsed =
                        parse_response(answer, ParseMode::Strict);
                    if (!parsed.ok() || parsed.tracklets.empty())
                        issue("answer does not parse under the strict grammar");
                    break;
                }
                case Task::Fit: {
                    const std::string future = meta.value("future_text", "");
                    if (future.empty()) {
                        issue("fit record lacks future_text");
                        break;
                    }
                    if (answer.size() <= future.size() + 1 ||
                        answer.compare(answer.size() - future.size(),
                                       future.size(), future) != 0) {
                        issue("fit answer must end with the future text");
                        break;
                    }
                    const std::string prefix = answer.substr(
                        0, answer.size() - future.size() - 1);
                    const ParsedTrajectories strict_prefix =
                        parse_response(prefix, ParseMode::Strict);
                    if (!strict_prefix.ok() || strict_prefix.tracklets.empty()) {
                        issue("fit trajectory prefix does not parse strictly");
                        break;
                    }
                    const ParsedTrajectories whole =
                        parse_response(answer, ParseMode::Lenient);
                    if (!whole.ok())
                        issue("fit answer fails lenient parsing");
                    break;
                }
            }
        });
    }
    if (outcome.records == 0) {
        outcome.issues.push_back({-1, "empty corpus"});
    }
    return outcome;
}

std::vector<SotGroundTruth> load_sot_ground_truth(const std::string& path) {
    std::vector<SotGroundTruth> gts;
    for_each_jsonl_line(path, [&](std::size_t line_no, const std::string& line) {
        Json doc;
        try {
            doc = Json::parse(line);
        } catch (const Json::parse_error& e) {
            std::ostringstream os;
            os << path << ":" << line_no << ": " << e.what();
            throw Error(ErrorKind::Parse, os.str());
        }
        SotGroundTruth gt;
        gt.sequence_id = doc.value("sequence_id", "");
        gt.width = doc.value("width", 0);
        gt.height = doc.value("height", 0);
        if (gt.sequence_id.empty() || gt.width <= 0 || gt.height <= 0)
            throw Error(ErrorKind::Parse,
                        path + ": ground truth lines need sequence_id, "
                               "width, height");
        if (!doc.contains("boxes") || !doc["boxes"].is_object())
            throw Error(ErrorKind::Parse,
                        path + ": ground truth lines need a boxes object");
        for (const auto& [key, value] : doc["boxes"].items()) {
            BoundingBox box{value[0].get<double>(), value[1].get<double>(),
                            value[2].get<double>(), value[3].get<double>()};
            if (!box.valid())
                throw Error(ErrorKind::Parse,
                            path + ": invalid ground-truth box in sequence " +
                                gt.sequence_id);
            gt.boxes[std::stoi(key)] = box;
        }
        gts.push_back(std::move(gt));
    });
    if (gts.empty()) throw Error(ErrorKind::Parse, path + ": empty ground truth");
    return gts;
}

EvalRun run_eval_sot(const std::string& pred_path, const std::string& gt_path,
                     ParseMode mode, int workers) {
    EvalRun run;
    run.kind = "sot";
    const auto gts = load_sot_ground_truth(gt_path);
    ScoredResponses scored = score_response_file(pred_path, gts, mode);
    run.report = eval_sot(scored.predictions, gts, workers);
    run.diagnostics = std::move(scored.diagnostics);
    run.input_digests["pred"] = Sha256::of_file(pred_path);
    run.input_digests["gt"] = Sha256::of_file(gt_path);
    return run;
}

namespace {

std::map<char, std::string> parse_options(const Json& doc) {
    std::map<char, std::string> options;
    if (doc.contains("options") && doc["options"].is_object()) {
        for (const auto& [key, value] : doc["options"].items()) {
            if (!key.empty()) options[key[0]] = value.get<std::string>();
        }
    }
    return options;
}

char parse_letter(const Json& doc, const char* field) {
    const std::string value = doc.value(field, "");
    if (value.empty()) return '?';
    return static_cast<char>(
        std::toupper(static_cast<unsigned char>(value[0])));
}

}  // namespace

EvalRun run_eval_choice(const std::string& records_path,
                        const std::string& gt_path) {
    std::map<std::string, std::pair<std::string, char>> gold;  // id -> (cat, letter)
    if (!gt_path.empty()) {
        for_each_jsonl_line(
            gt_path, [&](std::size_t, const std::string& line) {
                const Json doc = Json::parse(line, nullptr, true);
                gold[doc.value("question_id", "")] = {
                    doc.value("category", ""), parse_letter(doc, "gold")};
            });
    }

    std::vector<ChoiceRecord> records;
    std::int64_t unmatched = 0;
    for_each_jsonl_line(
        records_path, [&](std::size_t line_no, const std::string& line) {
            Json doc;
            try {
                doc = Json::parse(line);
            } catch (const Json::parse_error& e) {
                std::ostringstream os;
                os << records_path << ":" << line_no << ": " << e.what();
                throw Error(ErrorKind::Parse, os.str());
            }
            ChoiceRecord record;
            record.question_id = doc.value("question_id", "");
            record.category = doc.value("category", "");
            record.gold = parse_letter(doc, "gold");
            if (!gt_path.empty()) {
                const auto it = gold.find(record.question_id);
                if (it == gold.end())
                    throw Error(ErrorKind::Parse,
                                records_path + ": question " +
                                    record.question_id +
                                    " missing from ground truth");
                if (record.category.empty()) record.category = it->second.first;
                record.gold = it->second.second;
            }
            if (doc.contains("predicted")) {
                record.predicted = parse_letter(doc, "predicted");
            } else if (doc.contains("response")) {
                const auto choice =
                    extract_choice(doc["response"].get<std::string>(),
                                   parse_options(doc));
                if (choice) {
                    record.predicted = *choice;
                } else {
                    record.predicted = '?';
                    ++unmatched;
                }
            } else {
                throw Error(ErrorKind::Parse,
                            records_path +
                                ": records need a predicted or response field");
            }
            if (record.gold == '?')
                throw Error(ErrorKind::Parse,
                            records_path + ": record " + record.question_id +
                                " lacks a gold answer");
            records.push_back(std::move(record));
        });

    EvalRun run;
    run.kind = "choice";
    run.report = eval_choice_benchmark(records);
    if (unmatched > 0) {
        run.report.counts["unmatched_responses"] = unmatched;
        run.diagnostics.push_back(
            std::to_string(unmatched) +
            " responses matched no option and were scored incorrect");
    }
    run.input_digests["pred"] = Sha256::of_file(records_path);
    if (!gt_path.empty()) run.input_digests["gt"] = Sha256::of_file(gt_path);
    return run;
}

EvalRun run_eval_pope(const std::string& records_path,
                      const std::string& gt_path) {
    std::map<std::string, std::pair<PopeSplit, PopeAnswer>> gold;
    if (!gt_path.empty()) {
        for_each_jsonl_line(
            gt_path, [&](std::size_t, const std::string& line) {
                const Json doc = Json::parse(line);
                const auto split =
                    pope_split_from_string(doc.value("split", "random"));
                const auto answer =
                    extract_pope_answer(doc.value("gold", ""));
                if (split && answer)
                    gold[doc.value("question_id", "")] = {*split, *answer};
            });
    }

    std::vector<PopeRecord> records;
    std::int64_t unmatched = 0;
    for_each_jsonl_line(
        records_path, [&](std::size_t line_no, const std::string& line) {
            Json doc;
            try {
                doc = Json::parse(line);
            } catch (const Json::parse_error& e) {
                std::ostringstream os;
                os << records_path << ":" << line_no << ": " << e.what();
                throw Error(ErrorKind::Parse, os.str());
            }
            PopeRecord record;
            record.question_id = doc.value("question_id", "");
            auto split = pope_split_from_string(doc.value("split", ""));
            auto gold_answer = extract_pope_answer(doc.value("gold", ""));
            if (!gt_path.empty()) {
                const auto it = gold.find(record.question_id);
                if (it == gold.end())
                    throw Error(ErrorKind::Parse,
                                records_path + ": question " +
                                    record.question_id +
                                    " missing from ground truth");
                split = it->second.first;
                gold_answer = it->second.second;
            }
            if (!split || !gold_answer)
                throw Error(ErrorKind::Parse,
                            records_path + ": records need split and gold "
                                           "(yes/no) fields");
            record.split = *split;
            record.gold = *gold_answer;

            std::optional<PopeAnswer> predicted;
            if (doc.contains("predicted"))
                predicted =
                    extract_pope_answer(doc["predicted"].get<std::string>());
            else if (doc.contains("response"))
                predicted =
                    extract_pope_answer(doc["response"].get<std::string>());
            if (predicted) {
                record.predicted = *predicted;
            } else {
                // Unmatched responses score as incorrect.
                record.predicted = record.gold == PopeAnswer::Yes
                                       ? PopeAnswer::No
                                       : PopeAnswer::Yes;
                ++unmatched;
            }
            records.push_back(std::move(record));
        });

    EvalRun run;
    run.kind = "pope";
    run.report = eval_pope(records);
    if (unmatched > 0) {
        run.report.counts["unmatched_responses"] = unmatched;
        run.diagnostics.push_back(
            std::to_string(unmatched) +
            " responses contained no yes/no answer and were scored incorrect");
    }
    run.input_digests["pred"] = Sha256::of_file(records_path);
    if (!gt_path.empty()) run.input_digests["gt"] = Sha256::of_file(gt_path);
    return run;
}

Json eval_report_json(const EvalRun& run) {
    Json doc;
    doc["tool_version"] = kToolVersion;
    doc["kind"] = run.kind;
    doc["inputs"] = run.input_digests;
    doc["metrics"] = run.report.metrics;
    doc["per_category"] = run.report.per_category;
    doc["counts"] = run.report.counts;
    doc["diagnostics"] = run.diagnostics;
    return doc;
}

}  // namespace forge
