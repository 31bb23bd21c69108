#include "forge/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace forge {

bool BoundingBox::valid() const {
    return std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) &&
           std::isfinite(ymax) && xmin >= 0 && ymin >= 0 && xmin < xmax &&
           ymin < ymax;
}

void BoundingBox::require_valid(const char* what) const {
    if (!valid()) {
        std::ostringstream os;
        os << "invalid " << what << " [" << xmin << "," << ymin << "," << xmax
           << "," << ymax << "]";
        throw Error(ErrorKind::Validation, os.str());
    }
}

bool Tracklet::valid() const {
    if (id <= 0 || category.empty() || boxes.empty()) return false;
    for (const auto& [frame, box] : boxes) {
        if (frame < 1 || !box.valid()) return false;
    }
    return true;
}

bool ClipSample::valid(int max_frames) const {
    if (frames.empty() || static_cast<int>(frames.size()) > max_frames)
        return false;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].index != static_cast<int>(i) + 1 || !frames[i].valid())
            return false;
    }
    for (const auto& t : tracklets) {
        if (!t.valid()) return false;
        for (const auto& [frame, box] : t.boxes) {
            if (frame < 1 || frame > static_cast<int>(frames.size()))
                return false;
        }
    }
    return true;
}

const FrameRef* ClipSample::frame(int index) const {
    if (index < 1 || index > static_cast<int>(frames.size())) return nullptr;
    return &frames[static_cast<std::size_t>(index) - 1];
}

const char* to_string(Task task) {
    switch (task) {
        case Task::Caption: return "caption";
        case Task::Detection: return "detection";
        case Task::Tracking: return "tracking";
        case Task::Referring: return "referring";
        case Task::Reasoning: return "reasoning";
        case Task::Fit: return "fit";
    }
    return "unknown";
}

std::optional<Task> task_from_string(const std::string& name) {
    if (name == "caption") return Task::Caption;
    if (name == "detection") return Task::Detection;
    if (name == "tracking") return Task::Tracking;
    if (name == "referring") return Task::Referring;
    if (name == "reasoning") return Task::Reasoning;
    if (name == "fit") return Task::Fit;
    return std::nullopt;
}

double overlap_ratio(const BoundingBox& a, const BoundingBox& b) {
    const double iw =
        std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    const double ih =
        std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double area_a = std::max(a.area(), 0.0);
    const double area_b = std::max(b.area(), 0.0);
    const double uni = area_a + area_b - inter;
    if (uni <= 0) return 0.0;
    return inter / uni;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    a.require_valid();
    b.require_valid();
    return overlap_ratio(a, b);
}

namespace {

int norm_coord(double v, double extent) {
    const double clamped = std::clamp(v, 0.0, extent);
    const long long r = std::llround(clamped / extent * 1000.0);
    return static_cast<int>(std::clamp(r, 0LL, 1000LL));
}

}  // namespace

NormBox normalize_box(const BoundingBox& b, int width, int height) {
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::Validation, "image dimensions must be positive");
    if (b.xmax <= 0 || b.ymax <= 0 || b.xmin >= width || b.ymin >= height) {
        std::ostringstream os;
        os << "box [" << b.xmin << "," << b.ymin << "," << b.xmax << ","
           << b.ymax << "] lies outside a " << width << "x" << height
           << " image";
        throw Error(ErrorKind::Validation, os.str());
    }
    NormBox nb;
    nb.xmin = norm_coord(b.xmin, width);
    nb.ymin = norm_coord(b.ymin, height);
    nb.xmax = norm_coord(b.xmax, width);
    nb.ymax = norm_coord(b.ymax, height);
    return nb;
}

BoundingBox denormalize_box(const NormBox& nb, int width, int height) {
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::Validation, "image dimensions must be positive");
    BoundingBox b;
    b.xmin = nb.xmin / 1000.0 * width;
    b.ymin = nb.ymin / 1000.0 * height;
    b.xmax = nb.xmax / 1000.0 * width;
    b.ymax = nb.ymax / 1000.0 * height;
    return b;
}

}  // namespace forge
