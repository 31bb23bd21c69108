#include "forge/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "forge/ioutil.hpp"

namespace forge {

namespace fs = std::filesystem;

void IngestCounters::add(const IngestCounters& other) {
    input_records += other.input_records;
    emitted += other.emitted;
    dropped_flag += other.dropped_flag;
    dropped_degenerate += other.dropped_degenerate;
    skipped += other.skipped;
    clamped += other.clamped;
}

namespace {

// Clamps a corner box into the image. Returns false when the clamped box
// has no extent left (degenerate).
bool clamp_box(BoundingBox& b, int width, int height, IngestCounters& c) {
    BoundingBox clamped;
    clamped.xmin = std::clamp(b.xmin, 0.0, static_cast<double>(width));
    clamped.ymin = std::clamp(b.ymin, 0.0, static_cast<double>(height));
    clamped.xmax = std::clamp(b.xmax, 0.0, static_cast<double>(width));
    clamped.ymax = std::clamp(b.ymax, 0.0, static_cast<double>(height));
    if (clamped != b) ++c.clamped;
    b = clamped;
    return b.xmin < b.xmax && b.ymin < b.ymax;
}

double parse_double_field(const std::string& field, const std::string& path,
                          std::size_t line_no) {
    double value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        std::ostringstream os;
        os << path << ":" << line_no << ": non-numeric field '" << field
           << "'";
        throw Error(ErrorKind::Parse, os.str());
    }
    return value;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

// MOTChallenge gt class ids -> category names.
std::string mot_category(long cls) {
    switch (cls) {
        case 1:
        case 2:
        case 7:
        case 8: return "person";
        case 3: return "car";
        case 4: return "bicycle";
        case 5: return "motorbike";
        case 6: return "vehicle";
        default: return "object";
    }
}

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

}  // namespace

void validate_sequence(const SourceSequence& seq) {
    const int n = static_cast<int>(seq.frames.size());
    for (int i = 0; i < n; ++i) {
        const FrameRef& f = seq.frames[static_cast<std::size_t>(i)];
        if (f.index != i + 1 || !f.valid()) {
            std::ostringstream os;
            os << "sequence '" << seq.dataset << "': frame " << i + 1
               << " violates frame invariants";
            throw Error(ErrorKind::Validation, os.str());
        }
    }
    std::set<std::int64_t> ids;
    for (const auto& t : seq.tracklets) {
        if (!t.valid() || !ids.insert(t.id).second) {
            std::ostringstream os;
            os << "sequence '" << seq.dataset << "': tracklet " << t.id
               << " violates tracklet invariants";
            throw Error(ErrorKind::Validation, os.str());
        }
        if (t.boxes.begin()->first < 1 || t.boxes.rbegin()->first > n) {
            std::ostringstream os;
            os << "sequence '" << seq.dataset << "': tracklet " << t.id
               << " references frames outside 1.." << n;
            throw Error(ErrorKind::Validation, os.str());
        }
    }
}

IngestResult ingest_coco_detection(const std::string& path,
                                   const std::string& dataset_tag) {
    const std::string text = read_text_file(path);
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::ostringstream os;
        os << path << ": malformed document at byte " << e.byte << ": "
           << e.what();
        throw Error(ErrorKind::Parse, os.str());
    }
    if (!doc.is_object() || !doc.contains("images") ||
        !doc.contains("annotations") || !doc.contains("categories")) {
        throw Error(ErrorKind::Parse,
                    path + ": expected images/annotations/categories arrays");
    }

    std::map<std::int64_t, std::string> categories;
    for (const auto& cat : doc["categories"]) {
        categories[cat.at("id").get<std::int64_t>()] =
            cat.at("name").get<std::string>();
    }

    struct ImageInfo {
        SourceSequence seq;
        bool usable = false;
        std::int64_t next_tracklet_id = 1;
    };
    std::map<std::int64_t, std::size_t> image_index;
    std::vector<ImageInfo> images;

    IngestResult result;
    for (const auto& img : doc["images"]) {
        const std::int64_t id = img.at("id").get<std::int64_t>();
        ImageInfo info;
        const int width = img.value("width", 0);
        const int height = img.value("height", 0);
        info.usable = width > 0 && height > 0;
        FrameRef frame;
        frame.index = 1;
        frame.source_frame_id = id;
        frame.image_path = img.value("file_name", "");
        frame.width = width;
        frame.height = height;
        info.seq.dataset = dataset_tag;
        info.seq.frames.push_back(frame);
        image_index[id] = images.size();
        images.push_back(std::move(info));
    }

    for (const auto& ann : doc["annotations"]) {
        ++result.counters.input_records;
        const std::int64_t image_id = ann.at("image_id").get<std::int64_t>();
        const auto img_it = image_index.find(image_id);
        if (img_it == image_index.end()) {
            std::ostringstream os;
            os << path << ": annotation references unknown image id "
               << image_id;
            throw Error(ErrorKind::Parse, os.str());
        }
        ImageInfo& info = images[img_it->second];
        if (!info.usable) {
            ++result.counters.skipped;  // image lacks dimensions
            continue;
        }
        const std::int64_t category_id =
            ann.at("category_id").get<std::int64_t>();
        const auto cat_it = categories.find(category_id);
        if (cat_it == categories.end()) {
            std::ostringstream os;
            os << path << ": unresolvable category id " << category_id;
            throw Error(ErrorKind::Parse, os.str());
        }
        const auto& bbox = ann.at("bbox");
        if (!bbox.is_array() || bbox.size() != 4) {
            throw Error(ErrorKind::Parse, path + ": bbox must be [x,y,w,h]");
        }
        const double x = bbox[0].get<double>();
        const double y = bbox[1].get<double>();
        const double w = bbox[2].get<double>();
        const double h = bbox[3].get<double>();
        BoundingBox box{x, y, x + w, y + h};
        const FrameRef& frame = info.seq.frames.front();
        if (w <= 0 || h <= 0 ||
            !clamp_box(box, frame.width, frame.height, result.counters)) {
            ++result.counters.dropped_degenerate;
            continue;
        }
        Tracklet t;
        t.id = info.next_tracklet_id++;
        t.category = cat_it->second;
        t.boxes[1] = box;
        info.seq.tracklets.push_back(std::move(t));
        ++result.counters.emitted;
    }

    for (auto& info : images) {
        if (!info.usable) continue;
        validate_sequence(info.seq);
        result.sequences.push_back(std::move(info.seq));
    }
    return result;
}

IngestResult ingest_mot_challenge(const std::string& gt_path,
                                  const std::string& seqinfo_path,
                                  const std::string& dataset_tag) {
    int width = 0, height = 0, length = 0;
    for (const std::string& line : read_lines(seqinfo_path)) {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "imWidth") width = std::atoi(value.c_str());
        else if (key == "imHeight") height = std::atoi(value.c_str());
        else if (key == "seqLength") length = std::atoi(value.c_str());
    }
    if (width <= 0 || height <= 0 || length <= 0) {
        throw Error(ErrorKind::Parse,
                    seqinfo_path +
                        ": seqinfo must define imWidth, imHeight, seqLength");
    }

    SourceSequence seq;
    seq.dataset = dataset_tag;
    seq.frames.reserve(static_cast<std::size_t>(length));
    for (int i = 1; i <= length; ++i) {
        FrameRef frame;
        frame.index = i;
        frame.source_frame_id = i;
        char name[32];
        std::snprintf(name, sizeof(name), "img1/%06d.jpg", i);
        frame.image_path = name;
        frame.width = width;
        frame.height = height;
        seq.frames.push_back(std::move(frame));
    }

    std::map<std::int64_t, Tracklet> by_id;
    std::set<std::pair<long, std::int64_t>> seen;
    IngestResult result;
    std::size_t line_no = 0;
    for (const std::string& line : read_lines(gt_path)) {
        ++line_no;
        if (line.empty()) continue;
        ++result.counters.input_records;
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != 9) {
            std::ostringstream os;
            os << gt_path << ":" << line_no
               << ": expected 9 comma-separated fields, got " << fields.size();
            throw Error(ErrorKind::Parse, os.str());
        }
        const long frame =
            std::lround(parse_double_field(fields[0], gt_path, line_no));
        const long id =
            std::lround(parse_double_field(fields[1], gt_path, line_no));
        const double x = parse_double_field(fields[2], gt_path, line_no);
        const double y = parse_double_field(fields[3], gt_path, line_no);
        const double w = parse_double_field(fields[4], gt_path, line_no);
        const double h = parse_double_field(fields[5], gt_path, line_no);
        const long flag =
            std::lround(parse_double_field(fields[6], gt_path, line_no));
        const long cls =
            std::lround(parse_double_field(fields[7], gt_path, line_no));
        parse_double_field(fields[8], gt_path, line_no);  // visibility

        if (frame < 1 || frame > length) {
            std::ostringstream os;
            os << gt_path << ":" << line_no << ": frame " << frame
               << " outside 1.." << length;
            throw Error(ErrorKind::Parse, os.str());
        }
        if (id < 1) {
            std::ostringstream os;
            os << gt_path << ":" << line_no << ": non-positive id " << id;
            throw Error(ErrorKind::Parse, os.str());
        }
        if (!seen.emplace(frame, id).second) {
            std::ostringstream os;
            os << gt_path << ":" << line_no << ": duplicate (frame,id) pair ("
               << frame << "," << id << ")";
            throw Error(ErrorKind::Parse, os.str());
        }
        if (flag == 0) {
            ++result.counters.dropped_flag;
            continue;
        }
        BoundingBox box{x, y, x + w, y + h};
        if (w <= 0 || h <= 0 ||
            !clamp_box(box, width, height, result.counters)) {
            ++result.counters.dropped_degenerate;
            continue;
        }
        Tracklet& t = by_id[id];
        if (t.id == 0) {
            t.id = id;
            t.category = mot_category(cls);
        }
        t.boxes[static_cast<int>(frame)] = box;
        ++result.counters.emitted;
    }

    for (auto& [id, t] : by_id) {
        if (!t.boxes.empty()) seq.tracklets.push_back(std::move(t));
    }
    validate_sequence(seq);
    result.sequences.push_back(std::move(seq));
    return result;
}

IngestResult ingest_sot_sequence(const std::string& groundtruth_path,
                                 const std::string& image_dir, int width,
                                 int height, const std::string& dataset_tag) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorKind::Config,
                    "SOT sequences need positive frame dimensions (set "
                    "width/height on the source)");
    }
    const std::vector<std::string> lines = read_lines(groundtruth_path);

    std::vector<std::string> image_paths;
    if (!image_dir.empty()) {
        if (!fs::is_directory(image_dir)) {
            throw Error(ErrorKind::Io,
                        "image directory not found: " + image_dir);
        }
        for (const auto& entry : fs::directory_iterator(image_dir)) {
            if (entry.is_regular_file() && has_image_extension(entry.path()))
                image_paths.push_back(entry.path().string());
        }
        std::sort(image_paths.begin(), image_paths.end());
        if (image_paths.size() != lines.size()) {
            std::ostringstream os;
            os << groundtruth_path << ": " << lines.size()
               << " annotation lines but " << image_paths.size()
               << " images in " << image_dir;
            throw Error(ErrorKind::Parse, os.str());
        }
    } else {
        for (std::size_t i = 0; i < lines.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "%08zu.jpg", i + 1);
            image_paths.push_back(name);
        }
    }

    SourceSequence seq;
    seq.dataset = dataset_tag;
    Tracklet target;
    target.id = 1;
    target.category = "target";

    IngestResult result;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        ++result.counters.input_records;
        const std::vector<std::string> fields = split(lines[i], ',');
        if (fields.size() != 4) {
            std::ostringstream os;
            os << groundtruth_path << ":" << line_no
               << ": expected 'x,y,w,h'";
            throw Error(ErrorKind::Parse, os.str());
        }
        const double x =
            parse_double_field(fields[0], groundtruth_path, line_no);
        const double y =
            parse_double_field(fields[1], groundtruth_path, line_no);
        const double w =
            parse_double_field(fields[2], groundtruth_path, line_no);
        const double h =
            parse_double_field(fields[3], groundtruth_path, line_no);
        if (w < 0 || h < 0) {
            std::ostringstream os;
            os << groundtruth_path << ":" << line_no
               << ": negative box extent";
            throw Error(ErrorKind::Parse, os.str());
        }
        FrameRef frame;
        frame.index = static_cast<int>(i) + 1;
        frame.source_frame_id = static_cast<std::int64_t>(i) + 1;
        frame.image_path = image_paths[i];
        frame.width = width;
        frame.height = height;
        seq.frames.push_back(std::move(frame));

        BoundingBox box{x, y, x + w, y + h};
        if (w == 0 || h == 0 ||
            !clamp_box(box, width, height, result.counters)) {
            ++result.counters.dropped_degenerate;  // absence sentinel
            continue;
        }
        target.boxes[static_cast<int>(i) + 1] = box;
        ++result.counters.emitted;
    }
    if (!target.boxes.empty()) seq.tracklets.push_back(std::move(target));
    validate_sequence(seq);
    result.sequences.push_back(std::move(seq));
    return result;
}

ReferringIngestResult ingest_referring(const std::string& path,
                                       const std::string& dataset_tag) {
    ReferringIngestResult result;
    for_each_jsonl_line(path, [&](std::size_t line_no, const std::string& line) {
        ++result.counters.input_records;
        Json obj;
        try {
            obj = Json::parse(line);
        } catch (const Json::parse_error& e) {
            std::ostringstream os;
            os << path << ":" << line_no << ": " << e.what();
            throw Error(ErrorKind::Parse, os.str());
        }
        const std::string expression = obj.value("expression", "");
        if (expression.empty()) {
            ++result.counters.skipped;
            return;
        }
        const int width = obj.value("width", 0);
        const int height = obj.value("height", 0);
        if (width <= 0 || height <= 0) {
            ++result.counters.skipped;
            return;
        }
        if (!obj.contains("boxes") || !obj["boxes"].is_object() ||
            obj["boxes"].empty()) {
            ++result.counters.skipped;  // missing target
            return;
        }

        std::vector<std::string> paths;
        if (obj.contains("image_paths") && obj["image_paths"].is_array()) {
            for (const auto& p : obj["image_paths"])
                paths.push_back(p.get<std::string>());
        } else {
            paths.push_back(obj.value("image_path", ""));
        }
        if (paths.empty()) {
            ++result.counters.skipped;
            return;
        }

        ReferringRecord record;
        record.expression = expression;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            FrameRef frame;
            frame.index = static_cast<int>(i) + 1;
            frame.source_frame_id = static_cast<std::int64_t>(i) + 1;
            frame.image_path = paths[i];
            frame.width = width;
            frame.height = height;
            record.frames.push_back(std::move(frame));
        }
        record.target.id = 1;
        record.target.category = obj.value("category", "target");
        if (obj.contains("action") && obj["action"].is_string())
            record.target.action = obj["action"].get<std::string>();
        record.target.appearance = expression;

        for (const auto& [key, value] : obj["boxes"].items()) {
            int frame_index = 0;
            const auto [ptr, ec] = std::from_chars(
                key.data(), key.data() + key.size(), frame_index);
            if (ec != std::errc() || ptr != key.data() + key.size() ||
                frame_index < 1 ||
                frame_index > static_cast<int>(record.frames.size())) {
                std::ostringstream os;
                os << path << ":" << line_no << ": bad frame key '" << key
                   << "'";
                throw Error(ErrorKind::Parse, os.str());
            }
            if (!value.is_array() || value.size() != 4) {
                std::ostringstream os;
                os << path << ":" << line_no
                   << ": box must be [xmin,ymin,xmax,ymax]";
                throw Error(ErrorKind::Parse, os.str());
            }
            BoundingBox box{value[0].get<double>(), value[1].get<double>(),
                            value[2].get<double>(), value[3].get<double>()};
            if (!clamp_box(box, width, height, result.counters)) {
                continue;  // a degenerate box within a record drops that box
            }
            record.target.boxes[frame_index] = box;
        }
        if (record.target.boxes.empty()) {
            ++result.counters.skipped;
            return;
        }
        ++result.counters.emitted;
        result.records.push_back(std::move(record));
    });
    (void)dataset_tag;
    return result;
}

IngestResult ingest_captions(const std::string& path,
                             const std::string& dataset_tag) {
    IngestResult result;
    for_each_jsonl_line(path, [&](std::size_t line_no, const std::string& line) {
        ++result.counters.input_records;
        Json obj;
        try {
            obj = Json::parse(line);
        } catch (const Json::parse_error& e) {
            std::ostringstream os;
            os << path << ":" << line_no << ": " << e.what();
            throw Error(ErrorKind::Parse, os.str());
        }
        const std::string caption = obj.value("caption", "");
        const int width = obj.value("width", 0);
        const int height = obj.value("height", 0);
        if (caption.empty() || width <= 0 || height <= 0) {
            ++result.counters.skipped;
            return;
        }
        SourceSequence seq;
        seq.dataset = dataset_tag;
        FrameRef frame;
        frame.index = 1;
        frame.source_frame_id = static_cast<std::int64_t>(line_no);
        frame.image_path = obj.value("image_path", "");
        frame.width = width;
        frame.height = height;
        seq.frames.push_back(std::move(frame));
        seq.captions.push_back(caption);
        validate_sequence(seq);
        result.sequences.push_back(std::move(seq));
        ++result.counters.emitted;
    });
    return result;
}

SourceSequence to_sequence(const ReferringRecord& record,
                           const std::string& dataset_tag) {
    SourceSequence seq;
    seq.dataset = dataset_tag;
    seq.frames = record.frames;
    seq.tracklets.push_back(record.target);
    validate_sequence(seq);
    return seq;
}

}  // namespace forge
