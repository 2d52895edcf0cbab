#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace shadowfit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;

// Base of all engine errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, configs, poses, rigs).
struct validation_error : error {
    using error::error;
};

// Filesystem or encoding failure.
struct io_error : error {
    using error::error;
};

// Numerical failure (non-finite values, unprojectable geometry, diverged solve).
struct numeric_error : error {
    using error::error;
};

enum class Side { Left, Right };

inline std::string to_string(Side s) { return s == Side::Left ? "left" : "right"; }

inline Side side_from_string(std::string_view s) {
    if (s == "left") return Side::Left;
    if (s == "right") return Side::Right;
    throw validation_error("side must be \"left\" or \"right\", got \"" + std::string(s) + "\"");
}

inline Side opposite(Side s) { return s == Side::Left ? Side::Right : Side::Left; }

// FNV-1a, used to fingerprint configurations in reports.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// Runs fn(begin, end) over fixed-size index chunks. The chunk partition depends only
// on n, never on the thread count, so per-chunk results can be combined in chunk
// order to give thread-count-independent output.
inline void parallel_chunks(std::size_t n, std::size_t chunk, int threads,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (chunk == 0) chunk = 1;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    std::size_t nthreads = threads > 0 ? static_cast<std::size_t>(threads) : hw;
    if (nthreads > nchunks) nthreads = nchunks;
    if (nthreads <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c)
            fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t c = t; c < nchunks; c += nthreads)
                fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        });
    }
    for (auto& th : pool) th.join();
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw validation_error(msg);
}

}  // namespace shadowfit
