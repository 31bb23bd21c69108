#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/error.hpp"

namespace forge {

// Axis-aligned box in pixel space, origin top-left.
struct BoundingBox {
    double xmin = 0;
    double ymin = 0;
    double xmax = 0;
    double ymax = 0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }
    double center_x() const { return (xmin + xmax) / 2.0; }
    double center_y() const { return (ymin + ymax) / 2.0; }

    bool valid() const;
    bool degenerate() const { return width() <= 0 || height() <= 0; }
    void require_valid(const char* what = "bounding box") const;

    bool operator==(const BoundingBox&) const = default;
};

// Box on the integer grid [0, 1000], scaled against the owning image.
struct NormBox {
    int xmin = 0;
    int ymin = 0;
    int xmax = 0;
    int ymax = 0;

    bool valid() const {
        return xmin >= 0 && ymin >= 0 && xmax <= 1000 && ymax <= 1000 &&
               xmin <= xmax && ymin <= ymax;
    }
    bool degenerate() const { return xmin == xmax || ymin == ymax; }

    bool operator==(const NormBox&) const = default;
};

struct FrameRef {
    int index = 0;             // 1-based position within the clip
    std::int64_t source_frame_id = 0;
    std::string image_path;
    int width = 0;
    int height = 0;

    bool valid() const { return index >= 1 && width > 0 && height > 0; }

    bool operator==(const FrameRef&) const = default;
};

// One subject's identity, labels, and per-frame boxes across a clip.
struct Tracklet {
    std::int64_t id = 0;
    std::string category;
    std::optional<std::string> appearance;
    std::optional<std::string> action;
    std::map<int, BoundingBox> boxes;  // frame index -> box

    bool valid() const;
    int first_frame() const { return boxes.empty() ? 0 : boxes.begin()->first; }

    bool operator==(const Tracklet&) const = default;
};

struct ClipSample {
    std::vector<FrameRef> frames;
    std::vector<Tracklet> tracklets;
    std::string source_dataset;
    int gap = 0;

    bool valid(int max_frames = 5) const;
    const FrameRef* frame(int index) const;

    bool operator==(const ClipSample&) const = default;
};

enum class ObservationKind { Location, Appearance, Action };

struct Observation {
    ObservationKind kind = ObservationKind::Location;
    std::string text;
    std::int64_t subject_id = 0;
};

enum class Task { Caption, Detection, Tracking, Referring, Reasoning, Fit };

const char* to_string(Task task);
std::optional<Task> task_from_string(const std::string& name);

struct ConversationRecord {
    Task task = Task::Caption;
    std::vector<FrameRef> frames;
    std::string question;
    std::string answer;
    std::optional<Observation> observation;
    std::optional<std::string> future_text;
    bool is_negative = false;
    std::uint64_t seed_trace = 0;
};

struct MetricReport {
    std::map<std::string, double> metrics;
    std::map<std::string, double> per_category;
    std::map<std::string, std::int64_t> counts;
};

// Intersection over union of two valid boxes; 0 when disjoint.
double iou(const BoundingBox& a, const BoundingBox& b);

// Overlap ratio without validity preconditions; degenerate or inverted
// inputs contribute zero area. Used on model predictions, which may be
// garbage, where iou() would throw.
double overlap_ratio(const BoundingBox& a, const BoundingBox& b);

// Map pixel coordinates onto the [0, 1000] grid, rounding half away from
// zero. Coordinates are clamped into the image; a box that does not
// intersect the image at all is an error.
NormBox normalize_box(const BoundingBox& b, int width, int height);

// Inverse affine map. May return a degenerate (zero-area) pixel box.
BoundingBox denormalize_box(const NormBox& nb, int width, int height);

}  // namespace forge
