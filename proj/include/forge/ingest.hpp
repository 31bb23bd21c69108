#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/core.hpp"

namespace forge {

// A full source sequence before clip sampling: contiguous 1..N frames plus
// full-length tracklets. Single images are 1-frame sequences.
struct SourceSequence {
    std::string dataset;
    std::vector<FrameRef> frames;
    std::vector<Tracklet> tracklets;
    std::vector<std::string> captions;  // per-image, for image-text pairs

    bool multi_frame() const { return frames.size() > 1; }
};

// Referring-expression annotation: an expression tied to a box (single
// image) or a trajectory (multi frame).
struct ReferringRecord {
    std::vector<FrameRef> frames;
    std::string expression;
    Tracklet target;  // single box for image records, several for video
};

// Per-file accounting. Parse-time drops are never silent: the conservation
// equation (input = emitted + dropped + skipped) is checked after each file.
struct IngestCounters {
    std::int64_t input_records = 0;
    std::int64_t emitted = 0;
    std::int64_t dropped_flag = 0;        // MOT consider-flag 0 rows
    std::int64_t dropped_degenerate = 0;  // zero-area boxes / absence rows
    std::int64_t skipped = 0;             // records skipped with a warning
    std::int64_t clamped = 0;             // boxes clamped into the image

    bool consistent() const {
        return input_records ==
               emitted + dropped_flag + dropped_degenerate + skipped;
    }
    void add(const IngestCounters& other);
};

struct IngestResult {
    std::vector<SourceSequence> sequences;
    IngestCounters counters;
};

struct ReferringIngestResult {
    std::vector<ReferringRecord> records;
    IngestCounters counters;
};

// COCO-style detection annotations: one 1-frame sequence per image.
IngestResult ingest_coco_detection(const std::string& path,
                                   const std::string& dataset_tag = "");

// MOTChallenge gt.txt (frame,id,x,y,w,h,flag,class,visibility) plus a
// seqinfo sidecar carrying imWidth/imHeight/seqLength.
IngestResult ingest_mot_challenge(const std::string& gt_path,
                                  const std::string& seqinfo_path,
                                  const std::string& dataset_tag = "");

// Single-object tracking groundtruth.txt, one "x,y,w,h" line per frame.
// Zero-area rows mark target absence. Frame dimensions come from the
// source configuration since annotation files do not carry them.
IngestResult ingest_sot_sequence(const std::string& groundtruth_path,
                                 const std::string& image_dir, int width,
                                 int height,
                                 const std::string& dataset_tag = "");

// Neutral referring JSONL: expression, width, height, image_path(s),
// boxes keyed by 1-based frame index ([xmin,ymin,xmax,ymax] corners).
ReferringIngestResult ingest_referring(const std::string& path,
                                       const std::string& dataset_tag = "");

// Caption JSONL for image-text pairs: image_path, width, height, caption.
IngestResult ingest_captions(const std::string& path,
                             const std::string& dataset_tag = "");

SourceSequence to_sequence(const ReferringRecord& record,
                           const std::string& dataset_tag);

// Throws unless the sequence satisfies every core-model invariant.
void validate_sequence(const SourceSequence& seq);

}  // namespace forge
