#pragma once

#include <cstdint>
#include <vector>

namespace forge {

// Distinct draw purposes within one record. Mixing the stream id into the
// seed keeps every draw independent of the order in which operations run.
enum class RngStream : std::uint64_t {
    SampleClip = 1,
    CapCategories = 2,
    ObservationKind = 3,
    PatternChoice = 4,
    NegativeDraw = 5,
    DistractorChoice = 6,
    SequenceChoice = 7,
    FrameChoice = 8,
    SubjectChoice = 9,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t record_index,
                              RngStream stream) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ record_index);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return h;
}

// Self-contained generator (splitmix64 chain) so draws are bit-identical
// across platforms and standard-library versions. std distributions are
// implementation-defined and must not be used on determinism-critical paths.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    Rng(std::uint64_t seed, std::uint64_t record_index, RngStream stream)
        : state_(mix_seed(seed, record_index, stream)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound). Rejection sampling removes modulo bias.
    std::uint64_t bounded(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % bound;
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(bounded(items.size()))];
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace forge
