#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace forge {

// Incremental SHA-256. Self-contained so manifests do not pull in a TLS
// library for one hash.
class Sha256 {
public:
    Sha256();
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::string hex_digest();  // finalizes; object must not be reused

    static std::string of(std::string_view data);
    static std::string of_file(const std::string& path);

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint64_t total_len_ = 0;
    std::uint8_t buffer_[64];
    std::size_t buffer_len_ = 0;
};

}  // namespace forge
