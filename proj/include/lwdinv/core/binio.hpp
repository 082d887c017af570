#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lwdinv/core/checksum.hpp"
#include "lwdinv/core/errors.hpp"

namespace lwdinv {

static_assert(std::endian::native == std::endian::little,
              "array files are little-endian; big-endian hosts are unsupported");

/// Writes a float32 array as raw little-endian bytes; returns the CRC-32.
inline std::uint32_t write_f32_file(const std::filesystem::path& path,
                                    const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const char* bytes = reinterpret_cast<const char*>(data.data());
    const std::streamsize n = static_cast<std::streamsize>(data.size() * sizeof(float));
    out.write(bytes, n);
    if (!out) throw IoError("short write: " + path.string());
    return Crc32::of(bytes, static_cast<std::size_t>(n));
}

/// Reads a float32 array, checking length and CRC-32.
inline std::vector<float> read_f32_file(const std::filesystem::path& path,
                                        std::size_t expect_count,
                                        std::uint32_t expect_crc) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open: " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expect_count * sizeof(float))
        throw IoError("truncated or oversized file: " + path.string() + " (" +
                      std::to_string(bytes) + " bytes, expected " +
                      std::to_string(expect_count * sizeof(float)) + ")");
    in.seekg(0);
    std::vector<float> data(expect_count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("short read: " + path.string());
    const std::uint32_t crc = Crc32::of(data.data(), bytes);
    if (crc != expect_crc)
        throw ChecksumError("checksum mismatch in " + path.string() + ": stored " +
                            Crc32::hex(expect_crc) + ", computed " + Crc32::hex(crc));
    return data;
}

}  // namespace lwdinv
