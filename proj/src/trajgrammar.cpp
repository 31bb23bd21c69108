#include "forge/trajgrammar.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace forge {

namespace {

// Characters that would collide with grammar delimiters if they appeared
// inside a category name.
constexpr std::string_view kBadCategoryChars = ";:,[]<>\n";

bool valid_category_text(std::string_view s) {
    return !s.empty() &&
           s.find_first_of(kBadCategoryChars) == std::string_view::npos;
}

void require_category(std::string_view category) {
    if (!valid_category_text(category)) {
        throw Error(ErrorKind::Validation,
                    "category collides with grammar delimiters or is empty: '" +
                        std::string(category) + "'");
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
}

struct Parser {
    std::string_view text;
    bool lenient = false;
    ParsedTrajectories out;

    void warn(std::size_t begin, std::size_t end, std::string msg) {
        out.diagnostics.push_back(
            {Severity::Warning, begin, end, std::move(msg)});
    }
    void error(std::size_t begin, std::size_t end, std::string msg) {
        out.diagnostics.push_back(
            {Severity::Error, begin, end, std::move(msg)});
    }

    bool at_end(std::size_t pos) const { return pos >= text.size(); }

    bool literal(std::size_t& pos, std::string_view lit) {
        if (text.substr(pos, lit.size()) != lit) return false;
        pos += lit.size();
        return true;
    }

    // Lenient mode tolerates a single space at designated points.
    void soft_space(std::size_t& pos) {
        if (lenient && !at_end(pos) && text[pos] == ' ') ++pos;
    }

    // Unsigned integer, up to 7 digits. Lenient accepts a sign so that
    // out-of-range values can be clamped instead of killing the span.
    bool parse_int(std::size_t& pos, long& value) {
        std::size_t p = pos;
        bool negative = false;
        if (lenient && p < text.size() && text[p] == '-') {
            negative = true;
            ++p;
        }
        std::size_t digits = 0;
        long v = 0;
        while (p < text.size() && text[p] >= '0' && text[p] <= '9') {
            if (++digits > 7) return false;
            v = v * 10 + (text[p] - '0');
            ++p;
        }
        if (digits == 0) return false;
        value = negative ? -v : v;
        pos = p;
        return true;
    }

    // Coordinate in [0, 1000]. Strict rejects out-of-range values; lenient
    // clamps them with a warning.
    bool parse_coord(std::size_t& pos, int& coord) {
        const std::size_t begin = pos;
        long v = 0;
        if (!parse_int(pos, v)) return false;
        if (v < 0 || v > 1000) {
            if (!lenient) return false;
            const long clamped = std::clamp(v, 0L, 1000L);
            std::ostringstream os;
            os << "coordinate " << v << " out of range; clamped to "
               << clamped;
            warn(begin, pos, os.str());
            v = clamped;
        }
        coord = static_cast<int>(v);
        return true;
    }

    bool parse_norm_box(std::size_t& pos, NormBox& box) {
        std::size_t p = pos;
        if (!literal(p, "[")) return false;
        soft_space(p);
        int coords[4];
        for (int i = 0; i < 4; ++i) {
            if (i > 0) {
                if (!literal(p, ",")) return false;
                soft_space(p);
            }
            if (!parse_coord(p, coords[i])) return false;
            soft_space(p);
        }
        if (!literal(p, "]")) return false;
        box = {coords[0], coords[1], coords[2], coords[3]};
        pos = p;
        return true;
    }

    bool parse_frame_entry(std::size_t& pos, int& frame, NormBox& box) {
        std::size_t p = pos;
        if (!literal(p, "Frame")) return false;
        if (lenient) {
            soft_space(p);
        } else if (!literal(p, " ")) {
            return false;
        }
        long idx = 0;
        if (!parse_int(p, idx) || idx < 1) return false;
        if (!literal(p, ":")) return false;
        soft_space(p);
        if (!parse_norm_box(p, box)) return false;
        frame = static_cast<int>(idx);
        pos = p;
        return true;
    }

    // Parses one id_block at pos (which must point at "<Id"). On failure
    // `consumed` still reports how far the trajectory-like span reached, so
    // lenient det scanning does not reinterpret its interior.
    bool parse_id_block(std::size_t& pos, ParsedTracklet& tracklet,
                        std::size_t& consumed, bool& hard_error) {
        std::size_t p = pos;
        consumed = pos;
        hard_error = false;
        if (!literal(p, "<Id")) return false;
        long open_id = 0;
        if (!parse_int(p, open_id) || open_id < 1 || !literal(p, ">")) {
            consumed = p;
            return false;
        }
        tracklet = {};
        tracklet.id = static_cast<int>(open_id);
        bool first = true;
        while (true) {
            std::size_t q = p;
            if (!first) {
                if (!literal(q, ";")) break;
                soft_space(q);
            }
            const std::size_t entry_begin = q;
            int frame = 0;
            NormBox box;
            if (!parse_frame_entry(q, frame, box)) {
                if (first) {
                    consumed = q;
                    return false;
                }
                break;  // separator stays unconsumed
            }
            p = q;
            first = false;
            if (!tracklet.boxes.emplace(frame, box).second) {
                std::ostringstream os;
                os << "duplicate entry for frame " << frame
                   << " in <Id" << open_id << ">; keeping the first";
                warn(entry_begin, p, os.str());
            }
        }
        if (first) {
            consumed = p;
            return false;
        }
        const std::size_t close_begin = p;
        long close_id = 0;
        if (!literal(p, "</Id") || !parse_int(p, close_id) ||
            !literal(p, ">")) {
            consumed = p;
            return false;
        }
        consumed = p;
        if (close_id != open_id) {
            std::ostringstream os;
            os << "mismatched id tokens: <Id" << open_id << "> closed by </Id"
               << close_id << ">";
            error(close_begin, p, os.str());
            hard_error = true;
            return false;
        }
        pos = p;
        return true;
    }

    void add_tracklet(ParsedTracklet&& t, std::size_t begin, std::size_t end) {
        for (auto& existing : out.tracklets) {
            if (existing.id == t.id) {
                std::ostringstream os;
                os << "duplicate id " << t.id
                   << "; merging entries, keeping the first on conflicts";
                warn(begin, end, os.str());
                for (auto& [frame, box] : t.boxes)
                    existing.boxes.emplace(frame, box);
                if (!existing.category && t.category)
                    existing.category = std::move(t.category);
                return;
            }
        }
        out.tracklets.push_back(std::move(t));
    }

    // --- strict top level ---------------------------------------------

    void run_strict() {
        const std::size_t first_block = text.find("<Id");
        if (first_block != std::string_view::npos) {
            run_strict_traj(first_block);
        } else {
            run_strict_det();
        }
    }

    void run_strict_traj(std::size_t first_block) {
        std::optional<std::string> category;
        if (first_block > 0) {
            const std::string_view prefix = text.substr(0, first_block);
            if (!valid_category_text(prefix)) {
                error(0, first_block,
                      "leading category contains grammar delimiters");
                return;
            }
            category = std::string(prefix);
        }
        std::size_t pos = first_block;
        bool first = true;
        while (!at_end(pos)) {
            ParsedTracklet t;
            std::size_t consumed = pos;
            bool hard_error = false;
            const std::size_t begin = pos;
            if (!parse_id_block(pos, t, consumed, hard_error)) {
                if (!hard_error)
                    error(begin, consumed, "malformed id block");
                return;
            }
            if (first) {
                t.category = category;
                first = false;
            }
            add_tracklet(std::move(t), begin, pos);
        }
        if (first) error(0, text.size(), "expected at least one id block");
    }

    void run_strict_det() {
        std::size_t pos = 0;
        int next_id = 1;
        if (at_end(pos)) {
            error(0, 0, "empty answer");
            return;
        }
        while (true) {
            const std::size_t group_begin = pos;
            const std::size_t colon = text.find(':', pos);
            if (colon == std::string_view::npos) {
                error(group_begin, text.size(), "expected 'category:'");
                return;
            }
            const std::string_view category =
                text.substr(group_begin, colon - group_begin);
            if (!valid_category_text(category)) {
                error(group_begin, colon, "invalid category");
                return;
            }
            pos = colon + 1;
            bool first_box = true;
            while (true) {
                NormBox box;
                const std::size_t box_begin = pos;
                if (!parse_norm_box(pos, box)) {
                    error(box_begin, pos, "malformed box");
                    return;
                }
                first_box = false;
                ParsedTracklet t;
                t.id = next_id++;
                t.category = std::string(category);
                t.boxes[1] = box;
                add_tracklet(std::move(t), box_begin, pos);
                if (!at_end(pos) && text[pos] == ',') {
                    ++pos;
                    continue;
                }
                break;
            }
            (void)first_box;
            if (at_end(pos)) return;
            if (text[pos] == ';') {
                ++pos;
                continue;
            }
            error(pos, pos + 1, "unexpected trailing characters");
            return;
        }
    }

    // --- lenient top level ----------------------------------------------

    void run_lenient() {
        // Spans already interpreted as (possibly broken) trajectory blocks;
        // the det scanner must not reread their interiors.
        std::vector<std::pair<std::size_t, std::size_t>> consumed_spans;
        std::size_t pos = 0;
        while (true) {
            const std::size_t block = text.find("<Id", pos);
            if (block == std::string_view::npos) break;
            ParsedTracklet t;
            std::size_t scan = block;
            std::size_t consumed = block;
            bool hard_error = false;
            if (parse_id_block(scan, t, consumed, hard_error)) {
                add_tracklet(std::move(t), block, scan);
                consumed_spans.emplace_back(block, scan);
                pos = scan;
            } else {
                if (!hard_error)
                    warn(block, std::max(consumed, block + 3),
                         "unparseable id block skipped");
                consumed_spans.emplace_back(block,
                                            std::max(consumed, block + 3));
                pos = std::max(consumed, block + 3);
            }
        }
        // Detection groups in the remaining prose.
        std::size_t gap_begin = 0;
        for (const auto& [b, e] : consumed_spans) {
            if (b > gap_begin) scan_det_groups(gap_begin, b);
            gap_begin = std::max(gap_begin, e);
        }
        if (gap_begin < text.size()) scan_det_groups(gap_begin, text.size());
    }

    void scan_det_groups(std::size_t begin, std::size_t end) {
        std::size_t p = begin;
        while (p < end) {
            const std::size_t colon = text.find(':', p);
            if (colon == std::string_view::npos || colon >= end) return;
            std::size_t box_start = colon + 1;
            if (box_start < end && text[box_start] == ' ') ++box_start;
            if (box_start >= end || text[box_start] != '[') {
                p = colon + 1;
                continue;
            }
            // Backtrack the category: longest delimiter-free run before ':'.
            std::size_t cat_begin = colon;
            while (cat_begin > begin &&
                   kBadCategoryChars.find(text[cat_begin - 1]) ==
                       std::string_view::npos)
                --cat_begin;
            const std::string_view category =
                trim(text.substr(cat_begin, colon - cat_begin));
            if (category.empty()) {
                p = colon + 1;
                continue;
            }
            std::size_t q = box_start;
            std::vector<NormBox> boxes;
            while (q < end) {
                NormBox box;
                if (!parse_norm_box(q, box)) break;
                boxes.push_back(box);
                std::size_t r = q;
                if (r < end && text[r] == ',') {
                    ++r;
                    if (r < end && text[r] == ' ') ++r;
                    if (r < end && text[r] == '[') {
                        q = r;
                        continue;
                    }
                }
                break;
            }
            if (boxes.empty()) {
                p = box_start + 1;
                continue;
            }
            int next_id = 0;
            for (const auto& t : out.tracklets) next_id = std::max(next_id, t.id);
            for (const auto& box : boxes) {
                ParsedTracklet t;
                t.id = ++next_id;
                t.category = std::string(category);
                t.boxes[1] = box;
                add_tracklet(std::move(t), cat_begin, q);
            }
            p = q;
        }
    }
};

}  // namespace

std::string format_norm_box(const NormBox& nb) {
    std::ostringstream os;
    os << '[' << nb.xmin << ',' << nb.ymin << ',' << nb.xmax << ',' << nb.ymax
       << ']';
    return os.str();
}

std::string serialize_detection(
    const std::vector<std::pair<std::string, NormBox>>& objects) {
    if (objects.empty())
        throw Error(ErrorKind::Validation, "empty detection answer");
    std::vector<std::string> category_order;
    std::map<std::string, std::vector<NormBox>> by_category;
    for (const auto& [category, box] : objects) {
        require_category(category);
        if (!box.valid())
            throw Error(ErrorKind::Validation,
                        "normalized box out of range: " + format_norm_box(box));
        auto [it, inserted] = by_category.try_emplace(category);
        if (inserted) category_order.push_back(category);
        it->second.push_back(box);
    }
    std::ostringstream os;
    bool first_group = true;
    for (const auto& category : category_order) {
        auto& boxes = by_category[category];
        std::stable_sort(boxes.begin(), boxes.end(),
                         [](const NormBox& a, const NormBox& b) {
                             if (a.ymin != b.ymin) return a.ymin < b.ymin;
                             return a.xmin < b.xmin;
                         });
        if (!first_group) os << ';';
        first_group = false;
        os << category << ':';
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            if (i > 0) os << ',';
            os << format_norm_box(boxes[i]);
        }
    }
    return os.str();
}

TrajectoryText serialize_trajectory(
    const ClipSample& clip, const std::vector<Tracklet>& tracklets,
    const std::optional<std::string>& leading_category) {
    if (tracklets.empty())
        throw Error(ErrorKind::Validation, "no tracklets to serialize");
    if (clip.frames.empty())
        throw Error(ErrorKind::Validation, "clip has no frames");
    if (leading_category) require_category(*leading_category);

    const int frame_count = static_cast<int>(clip.frames.size());
    struct Entry {
        const Tracklet* tracklet;
        int first_frame;
        std::size_t position;
    };
    std::vector<Entry> order;
    order.reserve(tracklets.size());
    for (std::size_t i = 0; i < tracklets.size(); ++i) {
        const Tracklet& t = tracklets[i];
        int first = 0;
        for (const auto& [frame, box] : t.boxes) {
            if (frame >= 1 && frame <= frame_count) {
                first = frame;
                break;
            }
        }
        if (first == 0) {
            std::ostringstream os;
            os << "tracklet " << t.id << " has no boxes on the clip's frames";
            throw Error(ErrorKind::Validation, os.str());
        }
        order.push_back({&t, first, i});
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const Entry& a, const Entry& b) {
                         return a.first_frame < b.first_frame;
                     });

    TrajectoryText result;
    result.frame_count = frame_count;
    std::ostringstream os;
    if (leading_category) os << *leading_category;
    int next_id = 0;
    for (const auto& entry : order) {
        const int id = ++next_id;
        result.ids.push_back(id);
        result.source_positions.push_back(entry.position);
        os << "<Id" << id << '>';
        bool first_entry = true;
        for (const auto& [frame, box] : entry.tracklet->boxes) {
            if (frame < 1 || frame > frame_count) continue;
            const FrameRef* ref = clip.frame(frame);
            if (!first_entry) os << ';';
            first_entry = false;
            os << "Frame " << frame << ':'
               << format_norm_box(normalize_box(box, ref->width, ref->height));
        }
        os << "</Id" << id << '>';
    }
    result.text = os.str();
    return result;
}

ParsedTrajectories parse_response(std::string_view text, ParseMode mode) {
    Parser parser;
    parser.text = text;
    parser.lenient = mode == ParseMode::Lenient;
    if (parser.lenient) {
        parser.run_lenient();
    } else {
        parser.run_strict();
    }
    return std::move(parser.out);
}

std::string render_frame_markers(const ClipSample& clip) {
    if (clip.frames.empty())
        throw Error(ErrorKind::Validation, "clip has no frames");
    std::ostringstream os;
    for (std::size_t i = 0; i < clip.frames.size(); ++i) {
        if (i > 0) os << ' ';
        os << "Frame " << (i + 1) << ":<image>";
    }
    return os.str();
}

}  // namespace forge
