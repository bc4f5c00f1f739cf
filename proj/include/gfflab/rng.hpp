#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>

namespace gfflab {

// Counter-based RNG: Philox-4x64 with 10 rounds (constants from the original
// Philox publication). A stream is a 128-bit key; the value at counter i is a
// pure function of (key, i), so any subset of the stream can be evaluated
// lazily in any order and still agree bit for bit with a bulk evaluation.
// Streams for independent purposes are derived by hashing tags into the key.

namespace detail {

inline constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ull;
inline constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ull;
inline constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
inline constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

// SplitMix64 finalizer, used for key derivation (not for output streams).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace detail

struct PhiloxBlock {
    std::uint64_t w[4];
};

inline PhiloxBlock philox4x64(std::uint64_t k0, std::uint64_t k1,
                              std::uint64_t c0, std::uint64_t c1,
                              std::uint64_t c2, std::uint64_t c3) {
    std::uint64_t x0 = c0, x1 = c1, x2 = c2, x3 = c3;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        detail::mulhilo(detail::kPhiloxM0, x0, hi0, lo0);
        detail::mulhilo(detail::kPhiloxM1, x2, hi1, lo1);
        const std::uint64_t y0 = hi1 ^ x1 ^ k0;
        const std::uint64_t y1 = lo1;
        const std::uint64_t y2 = hi0 ^ x3 ^ k1;
        const std::uint64_t y3 = lo0;
        x0 = y0; x1 = y1; x2 = y2; x3 = y3;
        k0 += detail::kWeyl0;
        k1 += detail::kWeyl1;
    }
    return PhiloxBlock{{x0, x1, x2, x3}};
}

class RngStream {
public:
    RngStream() : k0_(0), k1_(0) {}
    RngStream(std::uint64_t k0, std::uint64_t k1) : k0_(k0), k1_(k1) {}

    static RngStream from_master_seed(std::uint64_t seed) {
        return RngStream(detail::mix64(seed), detail::mix64(seed ^ 0xA5A5A5A5A5A5A5A5ull));
    }

    // Child stream for an integer tag (trial index, purpose id, ...).
    RngStream derive(std::uint64_t tag) const {
        const std::uint64_t a = detail::mix64(k0_ ^ detail::mix64(tag));
        const std::uint64_t b = detail::mix64(k1_ + detail::mix64(tag ^ 0x6A09E667F3BCC908ull) + a);
        return RngStream(a, b);
    }

    // Child stream for a string tag (quantity names). FNV-1a, then derive.
    RngStream derive(std::string_view tag) const {
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (char ch : tag) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001B3ull;
        }
        return derive(h);
    }

    std::uint64_t key_lo() const { return k0_; }
    std::uint64_t key_hi() const { return k1_; }

    PhiloxBlock block(std::uint64_t blk) const {
        return philox4x64(k0_, k1_, blk, 0, 0, 0);
    }

    // i-th 64-bit word of the stream.
    std::uint64_t word(std::uint64_t i) const {
        return block(i >> 2).w[i & 3];
    }

    // Uniform in the open interval (0,1): 52 random bits centered in the cell.
    static double to_u01(std::uint64_t w) {
        return (static_cast<double>(w >> 12) + 0.5) * 0x1p-52;
    }

    double u01(std::uint64_t i) const { return to_u01(word(i)); }

    // i-th standard normal. Each Philox block yields four normals from two
    // Box-Muller pairs: (w0,w1) -> z0 = r cos, z1 = r sin, (w2,w3) -> z2, z3.
    // Point lookups recompute the block and select a lane, so lazy access
    // agrees exactly with fill_normals.
    double normal(std::uint64_t i) const {
        const PhiloxBlock b = block(i >> 2);
        double z[4];
        pair_to_normals(b.w[0], b.w[1], z[0], z[1]);
        pair_to_normals(b.w[2], b.w[3], z[2], z[3]);
        return z[i & 3];
    }

    // Fill buf[0..n) with normals at counters base..base+n. base must be a
    // multiple of 4 (block aligned) unless n is a point lookup; the samplers
    // always use base = 0.
    void fill_normals(double* buf, std::uint64_t n, std::uint64_t base = 0) const {
        std::uint64_t i = 0;
        while (i < n && ((base + i) & 3) != 0) {
            buf[i] = normal(base + i);
            ++i;
        }
        while (i + 4 <= n) {
            const PhiloxBlock b = block((base + i) >> 2);
            pair_to_normals(b.w[0], b.w[1], buf[i], buf[i + 1]);
            pair_to_normals(b.w[2], b.w[3], buf[i + 2], buf[i + 3]);
            i += 4;
        }
        while (i < n) {
            buf[i] = normal(base + i);
            ++i;
        }
    }

private:
    static void pair_to_normals(std::uint64_t wu, std::uint64_t wv, double& z0, double& z1) {
        const double u = to_u01(wu);
        const double v = to_u01(wv);
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 6.283185307179586476925286766559 * v;
        z0 = r * std::cos(a);
        z1 = r * std::sin(a);
    }

    std::uint64_t k0_, k1_;
};

// Purpose sub-stream ids under one trial stream.
enum class StreamPurpose : std::uint64_t {
    FieldNoise = 0,
    EdgeUniforms = 1,
    Auxiliary = 2,
};

inline RngStream purpose_stream(const RngStream& trial, StreamPurpose p) {
    return trial.derive(static_cast<std::uint64_t>(p));
}

// Per-trial stream: master seed -> quantity tag -> trial index.
inline RngStream trial_stream(std::uint64_t master_seed, std::string_view quantity,
                              std::uint64_t trial) {
    return RngStream::from_master_seed(master_seed).derive(quantity).derive(trial);
}

// Stateful draw-by-draw generator for algorithms that consume a data-dependent
// number of variates (rejection steps, excursion sampling). Uniform and normal
// draws advance separate derived streams so interleaving never reuses counter
// space.
class SequentialRng {
  public:
    explicit SequentialRng(const RngStream& parent)
        : uni_(parent.derive("seq-uniform")), nrm_(parent.derive("seq-normal")) {}

    double u01() { return uni_.u01(uctr_++); }
    double exponential() { return -std::log(u01()); }
    double normal() { return nrm_.normal(nctr_++); }
    // Gamma(1/2, scale 1) via the chi-square representation z^2/2.
    double gamma_half() {
        const double z = normal();
        return 0.5 * z * z;
    }

  private:
    RngStream uni_, nrm_;
    std::uint64_t uctr_ = 0, nctr_ = 0;
};

} // namespace gfflab
