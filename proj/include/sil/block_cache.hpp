#ifndef SIL_BLOCK_CACHE_HPP
#define SIL_BLOCK_CACHE_HPP

// On-disk FactorBlock files. Layout, all little-endian:
//
//   offset  size  field
//        0     4  magic "SILB"
//        4     4  version (u32) = 1
//        8     8  n0 (u64)
//       16     8  n1 (u64)
//       24     8  P (f64)
//       32     8  Q (f64)
//       40     N  Omega(n), u8
//     40+N     N  lambda(n), i8
//    40+2N     N  window_omega(n), u8
//    40+3N  ceil(N/8)  window_square_flag, bit i of byte i/8 (LSB first)
//
// with N = n1 - n0.

#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "sil/error.hpp"
#include "sil/numeric.hpp"
#include "sil/sieve.hpp"

namespace sil {

inline constexpr std::uint32_t kBlockFileVersion = 1;
inline constexpr std::size_t kBlockHeaderSize = 40;

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

inline void put_u64(std::vector<char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

inline std::uint64_t get_le(const char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return v;
}

} // namespace detail

inline std::vector<char> encode_block(const FactorBlock& block) {
    const std::size_t n = block.size();
    std::vector<char> out{'S', 'I', 'L', 'B'};
    out.reserve(kBlockHeaderSize + 3 * n + (n + 7) / 8);
    detail::put_u32(out, kBlockFileVersion);
    detail::put_u64(out, block.range.lo);
    detail::put_u64(out, block.range.lo + n);
    detail::put_u64(out, std::bit_cast<std::uint64_t>(block.window.lower));
    detail::put_u64(out, std::bit_cast<std::uint64_t>(block.window.upper));
    for (const auto v : block.big_omega) {
        out.push_back(static_cast<char>(v));
    }
    for (const auto v : block.lambda) {
        out.push_back(static_cast<char>(v));
    }
    for (const auto v : block.window_omega) {
        out.push_back(static_cast<char>(v));
    }
    std::vector<char> bits((n + 7) / 8, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (block.window_square_flag[i]) {
            bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
        }
    }
    out.insert(out.end(), bits.begin(), bits.end());
    return out;
}

inline FactorBlock decode_block(const std::vector<char>& data) {
    if (data.size() < kBlockHeaderSize || std::memcmp(data.data(), "SILB", 4) != 0) {
        throw ValidationError("not a block file (bad magic)");
    }
    const auto version = static_cast<std::uint32_t>(detail::get_le(data.data() + 4, 4));
    if (version != kBlockFileVersion) {
        throw ValidationError("unsupported block file version " + std::to_string(version));
    }
    FactorBlock block;
    const std::uint64_t n0 = detail::get_le(data.data() + 8, 8);
    const std::uint64_t n1 = detail::get_le(data.data() + 16, 8);
    if (n1 < n0) {
        throw ValidationError("block file has n1 < n0");
    }
    block.range = {n0, n1};
    block.window.lower = std::bit_cast<double>(detail::get_le(data.data() + 24, 8));
    block.window.upper = std::bit_cast<double>(detail::get_le(data.data() + 32, 8));
    const std::uint64_t n = n1 - n0;
    if (data.size() != kBlockHeaderSize + 3 * n + (n + 7) / 8) {
        throw ValidationError("block file length does not match its header");
    }
    block.resize(n);
    const char* p = data.data() + kBlockHeaderSize;
    std::memcpy(block.big_omega.data(), p, n);
    std::memcpy(block.lambda.data(), p + n, n);
    std::memcpy(block.window_omega.data(), p + 2 * n, n);
    const char* bits = p + 3 * n;
    for (std::uint64_t i = 0; i < n; ++i) {
        block.window_square_flag[i] = (static_cast<unsigned char>(bits[i / 8]) >> (i % 8)) & 1;
    }
    return block;
}

inline void write_block(const std::filesystem::path& path, const FactorBlock& block) {
    const auto data = encode_block(block);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ValidationError("cannot write block file " + tmp.string());
        }
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) {
            throw ValidationError("cannot write block file " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline FactorBlock read_block(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read block file " + path.string());
    }
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_block(data);
}

/// Directory of block files keyed by (n0, n1, P, Q).
class BlockCache {
public:
    explicit BlockCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (!std::filesystem::is_directory(dir_)) {
            throw ValidationError("cache directory " + dir_.string() + " is not usable");
        }
    }

    [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

    [[nodiscard]] std::filesystem::path path_for(IntegerRange range, const PrimeWindow& window) const {
        return dir_ / ("silb_" + std::to_string(range.lo) + "_" + std::to_string(range.hi) + "_" +
                       format17(window.lower) + "_" + format17(window.upper) + ".bin");
    }

    /// The block for `range`, read from disk when present and consistent, else sieved and stored.
    [[nodiscard]] FactorBlock get(const FactorSieve& sieve, IntegerRange range) const {
        const auto path = path_for(range, sieve.config().window);
        if (std::filesystem::exists(path)) {
            try {
                auto block = read_block(path);
                if (block.range.lo == range.lo && block.range.hi == range.hi &&
                    block.window.lower == sieve.config().window.lower &&
                    block.window.upper == sieve.config().window.upper) {
                    ++hits_;
                    return block;
                }
            } catch (const ValidationError&) {
                // Unreadable or stale; fall through and rebuild.
            }
        }
        auto block = sieve.block(range);
        write_block(path, block);
        ++misses_;
        return block;
    }

    [[nodiscard]] std::uint64_t hits() const noexcept { return hits_; }
    [[nodiscard]] std::uint64_t misses() const noexcept { return misses_; }

private:
    std::filesystem::path dir_;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

} // namespace sil

#endif
