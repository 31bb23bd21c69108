#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include "forge/core.hpp"

namespace forge::test {

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const int id = counter++;
        path_ = std::filesystem::temp_directory_path() /
                ("forge_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(id));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }
    std::string write(const std::string& name, const std::string& content) const {
        const std::string p = file(name);
        std::filesystem::create_directories(
            std::filesystem::path(p).parent_path());
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p;
    }

private:
    std::filesystem::path path_;
};

// Square-dimension clip so pixel coordinates map 1:1 onto the normalized
// grid; goldens stay readable.
inline ClipSample make_clip(int frames, int width = 1000, int height = 1000) {
    ClipSample clip;
    clip.source_dataset = "test";
    clip.gap = 1;
    for (int i = 1; i <= frames; ++i) {
        FrameRef frame;
        frame.index = i;
        frame.source_frame_id = i;
        frame.image_path = "img/" + std::to_string(i) + ".jpg";
        frame.width = width;
        frame.height = height;
        clip.frames.push_back(std::move(frame));
    }
    return clip;
}

inline Tracklet make_tracklet(std::int64_t id, const std::string& category,
                              std::map<int, BoundingBox> boxes) {
    Tracklet t;
    t.id = id;
    t.category = category;
    t.boxes = std::move(boxes);
    return t;
}

}  // namespace forge::test
