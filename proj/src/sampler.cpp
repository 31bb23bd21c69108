#include "forge/sampler.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace forge {

namespace {

int span_of(int k, int g) { return (k - 1) * g + 1; }

}  // namespace

void SamplerConfig::validate() const {
    if (frame_counts.empty() || gaps.empty())
        throw Error(ErrorKind::Config, "frame_counts and gaps must be nonempty");
    for (int k : frame_counts)
        if (k < 1) throw Error(ErrorKind::Config, "frame counts must be >= 1");
    for (int g : gaps)
        if (g < 1) throw Error(ErrorKind::Config, "gaps must be >= 1");
    if (min_size_divisor < 1)
        throw Error(ErrorKind::Config, "min_size_divisor must be >= 1");
    if (max_categories < 1)
        throw Error(ErrorKind::Config, "max_categories must be >= 1");
}

int SamplerConfig::max_frame_count() const {
    return *std::max_element(frame_counts.begin(), frame_counts.end());
}

ClipSample sample_clip(const SourceSequence& seq, const SamplerConfig& cfg,
                       std::uint64_t record_index) {
    cfg.validate();
    const int n = static_cast<int>(seq.frames.size());
    Rng rng(cfg.seed, record_index, RngStream::SampleClip);

    int k = rng.pick(cfg.frame_counts);
    int g = rng.pick(cfg.gaps);
    if (span_of(k, g) > n) {
        // Degrade to the feasible pair with the largest gap, then the most
        // frames.
        int best_k = 0, best_g = 0;
        for (int gc : cfg.gaps) {
            for (int kc : cfg.frame_counts) {
                if (span_of(kc, gc) > n) continue;
                if (gc > best_g || (gc == best_g && kc > best_k)) {
                    best_g = gc;
                    best_k = kc;
                }
            }
        }
        if (best_k == 0) {
            std::ostringstream os;
            os << "sequence of " << n << " frames cannot fit any (k,g) draw";
            throw Error(ErrorKind::Infeasible, os.str());
        }
        k = best_k;
        g = best_g;
    }

    const int span = span_of(k, g);
    const int start =
        1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n - span + 1)));

    ClipSample clip;
    clip.source_dataset = seq.dataset;
    clip.gap = g;
    std::vector<int> source_indices;
    for (int i = 0; i < k; ++i) {
        const int src = start + i * g;
        FrameRef frame = seq.frames[static_cast<std::size_t>(src) - 1];
        frame.index = i + 1;
        clip.frames.push_back(std::move(frame));
        source_indices.push_back(src);
    }
    for (const auto& t : seq.tracklets) {
        Tracklet restricted;
        restricted.id = t.id;
        restricted.category = t.category;
        restricted.appearance = t.appearance;
        restricted.action = t.action;
        for (int i = 0; i < k; ++i) {
            const auto it = t.boxes.find(source_indices[static_cast<std::size_t>(i)]);
            if (it != t.boxes.end()) restricted.boxes[i + 1] = it->second;
        }
        if (!restricted.boxes.empty()) clip.tracklets.push_back(std::move(restricted));
    }
    return clip;
}

FilterOutcome filter_small(const ClipSample& clip, const SamplerConfig& cfg) {
    FilterOutcome out;
    out.clip.frames = clip.frames;
    out.clip.source_dataset = clip.source_dataset;
    out.clip.gap = clip.gap;
    for (const auto& t : clip.tracklets) {
        bool keep = true;
        for (const auto& [frame, box] : t.boxes) {
            const FrameRef* ref = clip.frame(frame);
            if (!ref) continue;
            const double min_w = static_cast<double>(ref->width) / cfg.min_size_divisor;
            const double min_h = static_cast<double>(ref->height) / cfg.min_size_divisor;
            if (box.width() < min_w || box.height() < min_h) {
                keep = false;
                break;
            }
        }
        if (keep) {
            out.clip.tracklets.push_back(t);
        } else {
            ++out.removed_tracklets;
        }
    }
    return out;
}

CapOutcome cap_categories(const ClipSample& clip, const SamplerConfig& cfg,
                          std::uint64_t record_index) {
    CapOutcome out;
    std::vector<std::string> order;  // first-appearance order
    std::set<std::string> seen;
    for (const auto& t : clip.tracklets) {
        if (seen.insert(t.category).second) order.push_back(t.category);
    }
    if (static_cast<int>(order.size()) <= cfg.max_categories) {
        out.clip = clip;
        return out;
    }
    Rng rng(cfg.seed, record_index, RngStream::CapCategories);
    rng.shuffle(order);
    std::set<std::string> kept(order.begin(),
                               order.begin() + cfg.max_categories);
    out.removed_categories = static_cast<int>(order.size()) - cfg.max_categories;
    out.clip.frames = clip.frames;
    out.clip.source_dataset = clip.source_dataset;
    out.clip.gap = clip.gap;
    for (const auto& t : clip.tracklets) {
        if (kept.count(t.category)) {
            out.clip.tracklets.push_back(t);
        } else {
            ++out.removed_tracklets;
        }
    }
    return out;
}

ClipSample single_frame_clip(const SourceSequence& seq, int source_index) {
    if (source_index < 1 || source_index > static_cast<int>(seq.frames.size()))
        throw Error(ErrorKind::Validation, "frame index outside the sequence");
    ClipSample clip;
    clip.source_dataset = seq.dataset;
    clip.gap = 0;
    FrameRef frame = seq.frames[static_cast<std::size_t>(source_index) - 1];
    frame.index = 1;
    clip.frames.push_back(std::move(frame));
    for (const auto& t : seq.tracklets) {
        const auto it = t.boxes.find(source_index);
        if (it == t.boxes.end()) continue;
        Tracklet restricted;
        restricted.id = t.id;
        restricted.category = t.category;
        restricted.appearance = t.appearance;
        restricted.action = t.action;
        restricted.boxes[1] = it->second;
        clip.tracklets.push_back(std::move(restricted));
    }
    return clip;
}

}  // namespace forge
