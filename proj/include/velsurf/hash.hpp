#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace velsurf {

/// 64-bit FNV-1a, used for file checksums and dataset fingerprints.
class Fnv1a64 {
public:
    void update(const void* data, std::size_t size) noexcept {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= bytes[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view text) noexcept { update(text.data(), text.size()); }
    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

}  // namespace velsurf
