#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace lwdinv {

/// CRC-32 (IEEE 802.3 polynomial, reflected).
class Crc32 {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        std::uint32_t c = state_;
        for (std::size_t i = 0; i < n; ++i)
            c = table()[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
        state_ = c;
    }

    std::uint32_t value() const { return state_ ^ 0xFFFFFFFFu; }

    static std::uint32_t of(const void* data, std::size_t n) {
        Crc32 c;
        c.update(data, n);
        return c.value();
    }

    static std::string hex(std::uint32_t v) {
        static const char* d = "0123456789abcdef";
        std::string s(8, '0');
        for (int i = 7; i >= 0; --i) {
            s[i] = d[v & 0xFu];
            v >>= 4;
        }
        return s;
    }

private:
    static const std::array<std::uint32_t, 256>& table() {
        static const std::array<std::uint32_t, 256> t = [] {
            std::array<std::uint32_t, 256> a{};
            for (std::uint32_t i = 0; i < 256; ++i) {
                std::uint32_t c = i;
                for (int k = 0; k < 8; ++k)
                    c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
                a[i] = c;
            }
            return a;
        }();
        return t;
    }

    std::uint32_t state_ = 0xFFFFFFFFu;
};

}  // namespace lwdinv
