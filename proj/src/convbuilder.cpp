#include "forge/convbuilder.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "forge/digest.hpp"
#include "forge/ioutil.hpp"

namespace forge {

namespace {

// Wording lives in data, not code: the same document ships at
// data/templates.json for editing and is compiled in as the default.
constexpr const char* kDefaultCatalog = R"json({
  "tasks": [
    {
      "task": "detection",
      "format_hint": "When submitting your answer, maintain the category:[xmin,ymin,xmax,ymax] structure consistently.",
      "negative_answer": "There are no such objects in the image.",
      "question_patterns": [
        "Please detect all objects of the following categories in the image: {query}. {format_hint}",
        "Find every instance of these categories: {query}. {format_hint}",
        "Locate all objects belonging to the categories {query}. {format_hint}",
        "Identify and localize each object of the categories {query}. {format_hint}",
        "Detect the following categories and give their boxes: {query}. {format_hint}"
      ]
    },
    {
      "task": "tracking",
      "format_hint": "For the trajectories included in the answer, please use the format <Idi>Frame t:[xmin,ymin,xmax,ymax]</Idi>.",
      "negative_answer": "The subject you described does not appear in the given frames.",
      "question_patterns": [
        "Please provide the trajectory of {query} across the given frames. {format_hint}",
        "Track {query} and report its position in every frame where it appears. {format_hint}",
        "What is the movement trajectory of {query}? {format_hint}",
        "Locate {query} in each frame and give the full trajectory. {format_hint}",
        "Follow {query} through the clip and output its trajectory. {format_hint}"
      ]
    },
    {
      "task": "referring",
      "format_hint": "Refer to the supplied image and box coordinates for a short response to the question.",
      "format_hint_video": "Provide the trajectory coordinate of the target according to the sentence describes.",
      "negative_answer": "The described target does not appear in the provided content.",
      "question_patterns": [
        "Please locate {query}. {format_hint}",
        "Find the region corresponding to {query}. {format_hint}",
        "Where is {query}? {format_hint}",
        "Point out {query} with coordinates. {format_hint}",
        "Give the location of {query}. {format_hint}"
      ]
    },
    {
      "task": "reasoning",
      "format_hint": "In response, account for any relevant object locations, denoted by [x0,y0,x1,y1].",
      "negative_answer": "The question refers to content that is not present in the image.",
      "question_patterns": [
        "{query} {format_hint}",
        "Answer the question: {query} {format_hint}",
        "Consider the image and answer: {query} {format_hint}",
        "{query} Ground your answer in the image. {format_hint}",
        "Please reason about the following: {query} {format_hint}"
      ]
    },
    {
      "task": "caption",
      "format_hint": "",
      "negative_answer": "No caption can be produced for this image.",
      "question_patterns": [
        "Describe the image briefly.",
        "Write a short caption for this image.",
        "Summarize the visual content in one sentence.",
        "Provide a concise description of the picture.",
        "What does this image show?"
      ]
    },
    {
      "task": "fit",
      "format_hint": "For the trajectories included in the answer, please use the format <Idi>Frame t:[xmin,ymin,xmax,ymax]</Idi>.",
      "negative_answer": "The subject you described does not appear in the given frames.",
      "question_patterns": [
        "Observe {query}. What is it likely to do next? Give the trajectory first, then your reasoning. {format_hint}",
        "Track {query} and predict what will happen next. {format_hint}",
        "What will {query} probably do next? Provide the trajectory before the prediction. {format_hint}",
        "Given the frames, forecast the upcoming behavior of {query}. Output the trajectory first. {format_hint}",
        "Analyze the motion of {query} and deduce the forthcoming event. {format_hint}"
      ]
    }
  ]
})json";

bool contains_slot(const std::string& pattern, const char* slot) {
    return pattern.find(slot) != std::string::npos;
}

void replace_all(std::string& text, const std::string& slot,
                 const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(slot, pos)) != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos += value.size();
    }
}

std::string fill_question(const TaskTemplate& tmpl, const std::string& markers,
                          const std::string& query, const std::string& hint,
                          Rng& rng) {
    std::string pattern = rng.pick(tmpl.question_patterns);
    replace_all(pattern, "{query}", query);
    replace_all(pattern, "{format_hint}", hint);
    if (contains_slot(pattern, "{markers}")) {
        replace_all(pattern, "{markers}", markers);
        return pattern;
    }
    return markers + " " + pattern;
}

std::string observation_query(const Observation& obs) {
    switch (obs.kind) {
        case ObservationKind::Location:
            return "the subject located at " + obs.text + " in the first frame";
        case ObservationKind::Appearance:
            return "the subject described as " + obs.text;
        case ObservationKind::Action:
            return "the subject " + obs.text + " in the first frame";
    }
    return obs.text;
}

std::vector<std::pair<std::string, NormBox>> detection_objects(
    const ClipSample& clip) {
    std::vector<std::pair<std::string, NormBox>> objects;
    const FrameRef& frame = clip.frames.front();
    for (const auto& t : clip.tracklets) {
        const auto it = t.boxes.find(1);
        if (it == t.boxes.end()) continue;
        objects.emplace_back(
            t.category, normalize_box(it->second, frame.width, frame.height));
    }
    return objects;
}

std::string category_list(const ClipSample& clip) {
    std::vector<std::string> order;
    std::set<std::string> seen;
    for (const auto& t : clip.tracklets) {
        if (seen.insert(t.category).second) order.push_back(t.category);
    }
    std::ostringstream os;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0) os << ", ";
        os << order[i];
    }
    return os.str();
}

}  // namespace

TemplateCatalog TemplateCatalog::defaults() {
    return from_json_text(kDefaultCatalog, "<built-in>");
}

TemplateCatalog TemplateCatalog::load_file(const std::string& path) {
    return from_json_text(read_text_file(path), path);
}

TemplateCatalog TemplateCatalog::from_json_text(const std::string& text,
                                                const std::string& origin) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::Parse, origin + ": " + e.what());
    }
    if (!doc.contains("tasks") || !doc["tasks"].is_array())
        throw Error(ErrorKind::Config, origin + ": expected a tasks array");

    TemplateCatalog catalog;
    for (const auto& entry : doc["tasks"]) {
        TaskTemplate tmpl;
        const std::string task_name = entry.value("task", "");
        const auto task = task_from_string(task_name);
        if (!task)
            throw Error(ErrorKind::Config,
                        origin + ": unknown task '" + task_name + "'");
        tmpl.task = *task;
        tmpl.format_hint = entry.value("format_hint", "");
        tmpl.format_hint_video = entry.value("format_hint_video", "");
        tmpl.negative_answer = entry.value("negative_answer", "");
        for (const auto& p : entry.value("question_patterns", Json::array()))
            tmpl.question_patterns.push_back(p.get<std::string>());

        if (tmpl.question_patterns.empty())
            throw Error(ErrorKind::Config,
                        origin + ": task '" + task_name + "' has no patterns");
        if (tmpl.negative_answer.empty())
            throw Error(ErrorKind::Config, origin + ": task '" + task_name +
                                               "' lacks a negative answer");
        const bool needs_hint =
            tmpl.task == Task::Detection || tmpl.task == Task::Tracking;
        const bool needs_query = tmpl.task != Task::Caption;
        for (const auto& p : tmpl.question_patterns) {
            if (needs_hint && !contains_slot(p, "{format_hint}"))
                throw Error(ErrorKind::Config,
                            origin + ": pattern missing {format_hint}: " + p);
            if (needs_query && !contains_slot(p, "{query}"))
                throw Error(ErrorKind::Config,
                            origin + ": pattern missing {query}: " + p);
        }
        catalog.templates_[tmpl.task] = std::move(tmpl);
    }
    return catalog;
}

const TaskTemplate& TemplateCatalog::for_task(Task task) const {
    const auto it = templates_.find(task);
    if (it == templates_.end())
        throw Error(ErrorKind::Config,
                    std::string("no template for task ") + to_string(task));
    return it->second;
}

std::vector<std::string> BuilderConfig::default_distractors() {
    return {"person",     "dog",        "cat",       "car",       "bicycle",
            "motorcycle", "airplane",   "bus",       "train",     "truck",
            "boat",       "bird",       "horse",     "sheep",     "cow",
            "elephant",   "bear",       "zebra",     "giraffe",   "backpack",
            "umbrella",   "handbag",    "suitcase",  "frisbee",   "skateboard",
            "surfboard",  "chair",      "couch",     "bed",       "laptop"};
}

std::uint64_t record_seed(std::uint64_t seed, std::uint64_t record_index) {
    return splitmix64(splitmix64(seed) ^ record_index);
}

Observation select_observation(const Tracklet& subject,
                               const FrameRef& first_frame, Rng& rng) {
    const auto it = subject.boxes.find(1);
    if (it == subject.boxes.end())
        throw Error(ErrorKind::Infeasible,
                    "subject does not appear in the first frame");
    std::vector<ObservationKind> kinds = {ObservationKind::Location};
    if (subject.appearance && !subject.appearance->empty())
        kinds.push_back(ObservationKind::Appearance);
    if (subject.action && !subject.action->empty())
        kinds.push_back(ObservationKind::Action);

    Observation obs;
    obs.subject_id = subject.id;
    obs.kind = kinds[static_cast<std::size_t>(rng.bounded(kinds.size()))];
    switch (obs.kind) {
        case ObservationKind::Location:
            obs.text = format_norm_box(normalize_box(
                it->second, first_frame.width, first_frame.height));
            break;
        case ObservationKind::Appearance:
            obs.text = *subject.appearance;
            break;
        case ObservationKind::Action:
            obs.text = *subject.action;
            break;
    }
    return obs;
}

ConversationRecord build_fpt_record(const ClipSample& clip,
                                    const TaskTemplate& tmpl,
                                    const BuilderConfig& cfg,
                                    std::uint64_t record_index) {
    if (clip.frames.empty())
        throw Error(ErrorKind::Validation, "clip has no frames");
    if (clip.tracklets.empty())
        throw Error(ErrorKind::Infeasible, "empty clip after filtering");

    ConversationRecord record;
    record.task = tmpl.task;
    record.frames = clip.frames;
    record.seed_trace = record_seed(cfg.seed, record_index);
    const std::string markers = render_frame_markers(clip);
    const bool multi = clip.frames.size() > 1;
    Rng pattern_rng(cfg.seed, record_index, RngStream::PatternChoice);

    switch (tmpl.task) {
        case Task::Detection: {
            if (clip.frames.size() != 1)
                throw Error(ErrorKind::Validation,
                            "detection records take single-frame clips");
            const auto objects = detection_objects(clip);
            if (objects.empty())
                throw Error(ErrorKind::Infeasible, "empty clip after filtering");
            record.answer = serialize_detection(objects);
            record.question =
                fill_question(tmpl, markers, category_list(clip),
                              tmpl.hint_for(false), pattern_rng);
            break;
        }
        case Task::Tracking: {
            if (clip.frames.size() < 2)
                throw Error(ErrorKind::Validation,
                            "tracking records need at least two frames");
            std::vector<const Tracklet*> eligible;
            for (const auto& t : clip.tracklets)
                if (t.boxes.count(1)) eligible.push_back(&t);
            if (eligible.empty())
                throw Error(ErrorKind::Infeasible,
                            "no subject appears in the first frame");
            Rng subject_rng(cfg.seed, record_index, RngStream::SubjectChoice);
            const Tracklet& subject = *eligible[static_cast<std::size_t>(
                subject_rng.bounded(eligible.size()))];
            Rng obs_rng(cfg.seed, record_index, RngStream::ObservationKind);
            const Observation obs =
                select_observation(subject, clip.frames.front(), obs_rng);
            std::optional<std::string> prefix;
            if (cfg.category_prefix) prefix = subject.category;
            record.answer =
                serialize_trajectory(clip, {subject}, prefix).text;
            record.question =
                fill_question(tmpl, markers, observation_query(obs),
                              tmpl.hint_for(true), pattern_rng);
            record.observation = obs;
            break;
        }
        case Task::Referring:
        case Task::Reasoning: {
            const Tracklet& target = clip.tracklets.front();
            if (!target.appearance || target.appearance->empty())
                throw Error(ErrorKind::Infeasible,
                            "referring target lacks an expression");
            if (clip.frames.size() == 1) {
                const auto it = target.boxes.find(1);
                if (it == target.boxes.end())
                    throw Error(ErrorKind::Infeasible,
                                "target absent from the frame");
                const FrameRef& frame = clip.frames.front();
                record.answer = serialize_detection(
                    {{target.category,
                      normalize_box(it->second, frame.width, frame.height)}});
            } else {
                record.answer = serialize_trajectory(clip, {target}).text;
            }
            record.question = fill_question(
                tmpl, markers, *target.appearance, tmpl.hint_for(multi),
                pattern_rng);
            Observation obs;
            obs.kind = ObservationKind::Appearance;
            obs.text = *target.appearance;
            obs.subject_id = target.id;
            record.observation = obs;
            break;
        }
        default:
            throw Error(ErrorKind::Validation,
                        std::string("build_fpt_record does not handle task ") +
                            to_string(tmpl.task));
    }
    return record;
}

std::optional<ConversationRecord> inject_negative(const ClipSample& clip,
                                                  const TaskTemplate& tmpl,
                                                  const BuilderConfig& cfg,
                                                  std::uint64_t record_index) {
    if (cfg.negative_ratio <= 0) return std::nullopt;
    Rng draw_rng(cfg.seed, record_index, RngStream::NegativeDraw);
    if (draw_rng.uniform() >= cfg.negative_ratio) return std::nullopt;

    std::set<std::string> present;
    for (const auto& t : clip.tracklets) present.insert(t.category);
    std::vector<std::string> candidates;
    const std::vector<std::string>& vocabulary =
        cfg.distractors.empty() ? BuilderConfig::default_distractors()
                                : cfg.distractors;
    for (const auto& category : vocabulary)
        if (!present.count(category)) candidates.push_back(category);
    if (candidates.empty()) return std::nullopt;  // vocabulary exhausted

    Rng pick_rng(cfg.seed, record_index, RngStream::DistractorChoice);
    const std::string& distractor = pick_rng.pick(candidates);

    ConversationRecord record;
    record.task = tmpl.task;
    record.frames = clip.frames;
    record.is_negative = true;
    record.answer = tmpl.negative_answer;
    record.seed_trace = record_seed(cfg.seed, record_index);
    const std::string query =
        tmpl.task == Task::Detection
            ? distractor
            : "the " + distractor + " in the first frame";
    Rng pattern_rng(cfg.seed, record_index, RngStream::PatternChoice);
    record.question =
        fill_question(tmpl, render_frame_markers(clip), query,
                      tmpl.hint_for(clip.frames.size() > 1), pattern_rng);
    return record;
}

std::vector<Tracklet> fit_subjects(const ClipSample& clip) {
    std::vector<Tracklet> subjects;
    for (const auto& t : clip.tracklets)
        if (t.action && !t.action->empty()) subjects.push_back(t);
    // Queried subject (first one visible in frame 1) leads, so it becomes
    // <Id1> after serialization renumbering.
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        if (subjects[i].boxes.count(1)) {
            std::rotate(subjects.begin(), subjects.begin() + i,
                        subjects.begin() + i + 1);
            break;
        }
    }
    return subjects;
}

std::string future_prompt(
    const TrajectoryText& trajectory,
    const std::vector<std::pair<std::int64_t, std::string>>& basis) {
    std::ostringstream os;
    os << "You are given subject trajectories extracted from a short video "
          "clip, together with per-subject action notes.\n"
       << "Trajectories:\n"
       << trajectory.text << "\n"
       << "Actions:\n";
    for (const auto& [id, action] : basis) os << id << ": " << action << "\n";
    os << "Using only this information, formulate Q&A pairs about what is "
          "likely to happen next, grounded in the given observations.";
    return os.str();
}

FutureObservation compose_future(
    const TrajectoryText& trajectory,
    const std::vector<std::pair<std::int64_t, std::string>>& basis,
    TextGenClient& client) {
    if (basis.empty())
        throw Error(ErrorKind::Validation, "future basis is empty");
    for (const auto& [id, action] : basis) {
        if (action.empty())
            throw Error(ErrorKind::Validation,
                        "empty action description in future basis");
    }
    const std::string prompt = future_prompt(trajectory, basis);
    std::string completion;
    try {
        completion = client.generate(prompt);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::External) throw;
        throw Error(ErrorKind::External,
                    std::string(e.what()) + " (prompt sha256:" +
                        Sha256::of(prompt).substr(0, 12) + ")");
    }
    if (completion.empty())
        throw Error(ErrorKind::External,
                    "empty completion (prompt sha256:" +
                        Sha256::of(prompt).substr(0, 12) + ")");
    return {completion, basis};
}

ConversationRecord build_fit_record(const ClipSample& clip,
                                    const FutureObservation& future,
                                    const TaskTemplate& tmpl,
                                    const BuilderConfig& cfg,
                                    std::uint64_t record_index) {
    if (clip.frames.size() < 2)
        throw Error(ErrorKind::Validation,
                    "fit records need at least two frames");
    if (future.text.empty())
        throw Error(ErrorKind::Validation, "future text is empty");
    if (future.basis.empty())
        throw Error(ErrorKind::Validation, "future basis is empty");

    const std::vector<Tracklet> subjects = fit_subjects(clip);
    if (subjects.empty() || !subjects.front().boxes.count(1))
        throw Error(ErrorKind::Infeasible,
                    "no queryable subject with an action note");
    const Tracklet& queried = subjects.front();

    Rng obs_rng(cfg.seed, record_index, RngStream::ObservationKind);
    const Observation obs =
        select_observation(queried, clip.frames.front(), obs_rng);

    std::optional<std::string> prefix;
    if (cfg.category_prefix) prefix = queried.category;
    const TrajectoryText traj = serialize_trajectory(clip, subjects, prefix);

    ConversationRecord record;
    record.task = Task::Fit;
    record.frames = clip.frames;
    record.seed_trace = record_seed(cfg.seed, record_index);
    // Trajectory chain-of-thought ordering: trajectory strictly before the
    // reasoning text.
    record.answer = traj.text + " " + future.text;
    record.future_text = future.text;
    record.observation = obs;
    Rng pattern_rng(cfg.seed, record_index, RngStream::PatternChoice);
    record.question =
        fill_question(tmpl, render_frame_markers(clip), observation_query(obs),
                      tmpl.hint_for(true), pattern_rng);
    return record;
}

ConversationRecord build_fit_from_clip(const ClipSample& clip,
                                       const TaskTemplate& tmpl,
                                       const BuilderConfig& cfg,
                                       std::uint64_t record_index,
                                       TextGenClient& client) {
    const std::vector<Tracklet> subjects = fit_subjects(clip);
    if (subjects.empty() || !subjects.front().boxes.count(1))
        throw Error(ErrorKind::Infeasible,
                    "no queryable subject with an action note");
    std::optional<std::string> prefix;
    if (cfg.category_prefix) prefix = subjects.front().category;
    const TrajectoryText traj = serialize_trajectory(clip, subjects, prefix);
    std::vector<std::pair<std::int64_t, std::string>> basis;
    for (std::size_t j = 0; j < traj.source_positions.size(); ++j) {
        basis.emplace_back(static_cast<std::int64_t>(j) + 1,
                           *subjects[traj.source_positions[j]].action);
    }
    const FutureObservation future = compose_future(traj, basis, client);
    return build_fit_record(clip, future, tmpl, cfg, record_index);
}

ConversationRecord build_caption_record(const FrameRef& image,
                                        const std::string& caption,
                                        const TaskTemplate& tmpl,
                                        const BuilderConfig& cfg,
                                        std::uint64_t record_index) {
    if (caption.empty())
        throw Error(ErrorKind::Infeasible, "empty caption");
    ConversationRecord record;
    record.task = Task::Caption;
    FrameRef frame = image;
    frame.index = 1;
    record.frames = {frame};
    record.seed_trace = record_seed(cfg.seed, record_index);
    Rng pattern_rng(cfg.seed, record_index, RngStream::PatternChoice);
    record.question = fill_question(tmpl, "Frame 1:<image>", "", "", pattern_rng);
    record.answer = caption;
    return record;
}

}  // namespace forge
