#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/core.hpp"

namespace forge {

// Text grammar for boxes and trajectories. Serialization is bit-exact:
//
//   norm_box      := "[" int "," int "," int "," int "]"       ints in [0,1000]
//   frame_entry   := "Frame" SP index ":" norm_box             index 1-based
//   id_block      := "<Id" n ">" frame_entry (";" frame_entry)* "</Id" n ">"
//   det_group     := category ":" norm_box ("," norm_box)*
//   det_answer    := det_group (";" det_group)*
//   traj_answer   := [category] id_block (id_block)*
//   frame_marker  := "Frame" SP t ":" "<image>"
//
// Strict parsing is byte-exact against this grammar. Lenient parsing scans
// for id_blocks and det_groups embedded in prose and tolerates single
// spaces after "Frame", ":" and ",".

enum class ParseMode { Strict, Lenient };

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Warning;
    std::size_t begin = 0;  // byte span within the input
    std::size_t end = 0;
    std::string message;
};

struct TrajectoryText {
    std::string text;
    int frame_count = 0;
    std::vector<int> ids;  // renumbered ids, in order of first appearance
    // For each emitted block, the position of its tracklet in the input
    // vector; maps renumbered ids back to callers' subjects.
    std::vector<std::size_t> source_positions;
};

struct ParsedTracklet {
    int id = 0;
    std::optional<std::string> category;
    std::map<int, NormBox> boxes;  // frame index -> box
};

struct ParsedTrajectories {
    std::vector<ParsedTracklet> tracklets;
    std::vector<Diagnostic> diagnostics;

    bool ok() const {
        for (const auto& d : diagnostics)
            if (d.severity == Severity::Error) return false;
        return true;
    }
};

std::string format_norm_box(const NormBox& nb);

// Detection answer. Boxes are grouped by category preserving first
// appearance, sorted by (ymin, xmin) within a category.
std::string serialize_detection(
    const std::vector<std::pair<std::string, NormBox>>& objects);

// Trajectory answer over a clip. Subject ids are renumbered 1..n in order
// of first appearance; each block lists only the frames where the subject
// appears. A leading category renders the "query,cat1<Idi>..." variant.
TrajectoryText serialize_trajectory(
    const ClipSample& clip, const std::vector<Tracklet>& tracklets,
    const std::optional<std::string>& leading_category = std::nullopt);

// Inverse of the serializers, over arbitrary model output.
ParsedTrajectories parse_response(std::string_view text, ParseMode mode);

// Question-side frame indicators: "Frame 1:<image> Frame 2:<image> ...".
std::string render_frame_markers(const ClipSample& clip);

}  // namespace forge
