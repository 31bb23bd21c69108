#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "forge/core.hpp"
#include "forge/rng.hpp"
#include "forge/textgen.hpp"
#include "forge/trajgrammar.hpp"

namespace forge {

struct TaskTemplate {
    Task task = Task::Caption;
    std::vector<std::string> question_patterns;  // {markers},{query},{format_hint}
    std::string format_hint;
    std::string format_hint_video;  // optional multi-frame variant
    std::string negative_answer;

    const std::string& hint_for(bool multi_frame) const {
        return (multi_frame && !format_hint_video.empty()) ? format_hint_video
                                                           : format_hint;
    }
};

class TemplateCatalog {
public:
    static TemplateCatalog defaults();
    static TemplateCatalog load_file(const std::string& path);
    static TemplateCatalog from_json_text(const std::string& text,
                                          const std::string& origin);

    const TaskTemplate& for_task(Task task) const;

private:
    std::map<Task, TaskTemplate> templates_;
};

struct BuilderConfig {
    std::uint64_t seed = 0;
    double negative_ratio = 0.1;
    bool category_prefix = false;  // "query,cat1<Idi>..." style answers
    std::vector<std::string> distractors;

    static std::vector<std::string> default_distractors();
};

// Future observation deduced from per-subject action notes (the Z text
// appended after a trajectory).
struct FutureObservation {
    std::string text;
    std::vector<std::pair<std::int64_t, std::string>> basis;  // (id, action)
};

std::uint64_t record_seed(std::uint64_t seed, std::uint64_t record_index);

// Uniform draw among the observation kinds available on the subject.
// The subject must appear in the clip's first frame.
Observation select_observation(const Tracklet& subject,
                               const FrameRef& first_frame, Rng& rng);

// One FPT record: frame markers + task question, grammar-serialized answer.
ConversationRecord build_fpt_record(const ClipSample& clip,
                                    const TaskTemplate& tmpl,
                                    const BuilderConfig& cfg,
                                    std::uint64_t record_index);

// Seeded negative-sample draw: asks about a distractor category absent
// from the clip. Returns nothing when the draw misses, the ratio is zero,
// or every distractor is present.
std::optional<ConversationRecord> inject_negative(const ClipSample& clip,
                                                  const TaskTemplate& tmpl,
                                                  const BuilderConfig& cfg,
                                                  std::uint64_t record_index);

// Subjects carrying action notes, queried subject first. Both the FIT
// answer and the future-composition prompt use this order.
std::vector<Tracklet> fit_subjects(const ClipSample& clip);

std::string future_prompt(const TrajectoryText& trajectory,
                          const std::vector<std::pair<std::int64_t, std::string>>& basis);

FutureObservation compose_future(
    const TrajectoryText& trajectory,
    const std::vector<std::pair<std::int64_t, std::string>>& basis,
    TextGenClient& client);

// One FIT record: trajectory first, future reasoning appended after it.
ConversationRecord build_fit_record(const ClipSample& clip,
                                    const FutureObservation& future,
                                    const TaskTemplate& tmpl,
                                    const BuilderConfig& cfg,
                                    std::uint64_t record_index);

// Full FIT flow over a clip: derive the basis, compose the future text
// through the client, then build the record.
ConversationRecord build_fit_from_clip(const ClipSample& clip,
                                       const TaskTemplate& tmpl,
                                       const BuilderConfig& cfg,
                                       std::uint64_t record_index,
                                       TextGenClient& client);

ConversationRecord build_caption_record(const FrameRef& image,
                                        const std::string& caption,
                                        const TaskTemplate& tmpl,
                                        const BuilderConfig& cfg,
                                        std::uint64_t record_index);

}  // namespace forge
