#pragma once
// Small shared building blocks: 2D vector/matrix math, error types,
// round-trip numeric formatting, and a bounded parallel_for.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace memfep {

struct Vec2 {
    double x{0.0};
    double y{0.0};

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(const Vec2& r) const { return {x + r.x, y + r.y}; }
    constexpr Vec2 operator-(const Vec2& r) const { return {x - r.x, y - r.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    friend constexpr Vec2 operator*(double s, const Vec2& v) { return {v.x * s, v.y * s}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(const Vec2& r) { x += r.x; y += r.y; return *this; }
    Vec2& operator-=(const Vec2& r) { x -= r.x; y -= r.y; return *this; }

    constexpr double dot(const Vec2& r) const { return x * r.x + y * r.y; }
    double norm() const { return std::hypot(x, y); }
    constexpr double squared_norm() const { return x * x + y * y; }
};

// Quarter-turn matrix Q = [[0,-1],[1,0]]: Q v rotates v by +pi/2.
constexpr Vec2 quarter_turn(const Vec2& v) { return {-v.y, v.x}; }

struct Mat2 {
    // Row-major 2x2.
    double a11{0.0}, a12{0.0}, a21{0.0}, a22{0.0};

    constexpr Mat2() = default;
    constexpr Mat2(double m11, double m12, double m21, double m22)
        : a11(m11), a12(m12), a21(m21), a22(m22) {}

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 rotation_generator() { return {0.0, -1.0, 1.0, 0.0}; }  // Q
    static constexpr Mat2 outer(const Vec2& u, const Vec2& v) {
        return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y};
    }

    constexpr Mat2 operator+(const Mat2& r) const {
        return {a11 + r.a11, a12 + r.a12, a21 + r.a21, a22 + r.a22};
    }
    constexpr Mat2 operator-(const Mat2& r) const {
        return {a11 - r.a11, a12 - r.a12, a21 - r.a21, a22 - r.a22};
    }
    constexpr Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }
    friend constexpr Mat2 operator*(double s, const Mat2& m) { return m * s; }

    constexpr Vec2 operator*(const Vec2& v) const {
        return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
    }
    constexpr Mat2 transpose() const { return {a11, a21, a12, a22}; }
    constexpr double trace() const { return a11 + a22; }
    // Frobenius inner product A:B.
    constexpr double ddot(const Mat2& r) const {
        return a11 * r.a11 + a12 * r.a12 + a21 * r.a21 + a22 * r.a22;
    }
};

inline Mat2 rotation_matrix(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c, -s, s, c};
}

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct OverlapError : Error {
    int i, j;
    OverlapError(int i_, int j_)
        : Error("particles " + std::to_string(i_) + " and " + std::to_string(j_) + " overlap"),
          i(i_), j(j_) {}
};

struct EscapesDomainError : Error {
    int i;
    explicit EscapesDomainError(int i_)
        : Error("particle " + std::to_string(i_) + " is not strictly inside the domain"), i(i_) {}
};

struct SingularSystemError : Error {
    explicit SingularSystemError(const std::string& msg) : Error("singular system: " + msg) {}
};

struct OutsideMembraneError : Error {
    explicit OutsideMembraneError(const std::string& msg) : Error("point outside membrane: " + msg) {}
};

struct StuckStateError : Error {
    long step;
    explicit StuckStateError(long step_)
        : Error("sampler stuck at step " + std::to_string(step_) +
                ": feasibility redraw budget exhausted (time step too large for clearance)"),
          step(step_) {}
};

struct DegenerateEstimateError : Error {
    explicit DegenerateEstimateError(const std::string& msg)
        : Error("degenerate estimate: " + msg) {}
};

struct TooFewBlocksError : Error {
    TooFewBlocksError() : Error("block variance needs at least 2 blocks") {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// ---------------------------------------------------------------------------
// Formatting: shortest decimal that round-trips to the same double.

inline std::string format_double(double v) {
    std::array<char, 40> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{}) throw Error("cannot parse number: '" + s + "'");
    return v;
}

// ---------------------------------------------------------------------------
// Parallelism cap. MEMFEP_THREADS limits every internal thread pool.

inline int thread_cap() {
    static const int cap = [] {
        if (const char* env = std::getenv("MEMFEP_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return hc > 0 ? static_cast<int>(hc) : 1;
    }();
    return cap;
}

// Runs fn(i) for i in [0, n). Work items must be independent; each writes its
// own output slot, so results are deterministic regardless of thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace memfep
