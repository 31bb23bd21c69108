#pragma once

#include <cstdint>
#include <vector>

#include "forge/core.hpp"
#include "forge/ingest.hpp"
#include "forge/rng.hpp"

namespace forge {

struct SamplerConfig {
    std::vector<int> frame_counts = {3, 4, 5};
    std::vector<int> gaps = {3, 4, 5};
    int min_size_divisor = 32;
    int max_categories = 15;
    std::uint64_t seed = 0;

    void validate() const;
    int max_frame_count() const;
};

struct FilterOutcome {
    ClipSample clip;
    int removed_tracklets = 0;
};

struct CapOutcome {
    ClipSample clip;
    int removed_tracklets = 0;
    int removed_categories = 0;
};

// Draws frame count k and gap g uniformly from the configured sets, then a
// uniform start. Infeasible draws degrade to the feasible pair with the
// largest gap (then largest k); when even the smallest pair does not fit,
// the sequence is infeasible. All randomness derives from
// (cfg.seed, record_index).
ClipSample sample_clip(const SourceSequence& seq, const SamplerConfig& cfg,
                       std::uint64_t record_index);

// Drops every tracklet owning a box narrower or shorter than 1/divisor of
// the image dimension (strictly below the threshold; boxes exactly at it
// survive).
FilterOutcome filter_small(const ClipSample& clip, const SamplerConfig& cfg);

// On detection clips with more distinct categories than the cap, keeps a
// seeded uniform selection of max_categories of them.
CapOutcome cap_categories(const ClipSample& clip, const SamplerConfig& cfg,
                          std::uint64_t record_index);

// A 1-frame clip around the given source frame (1-based); used for
// detection and caption records.
ClipSample single_frame_clip(const SourceSequence& seq, int source_index);

}  // namespace forge
