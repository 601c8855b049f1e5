#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

namespace symkit {

// Thrown for unreadable/unwritable files and path collisions (CLI exit 1).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown for malformed records, bad config keys and consistency violations
// (CLI exit 2).
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Seed used by the deterministic weight initializers when none is given.
constexpr std::uint64_t kDefaultWeightSeed = 7;

// SplitMix64-based generator. The standard distributions are not pinned down
// across library implementations, so every stochastic path in the toolkit
// draws from this instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Integral values print without a decimal point, everything else with up to
// 15 significant digits. Used for ground-truth/prediction box files.
inline std::string format_number(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    std::ostringstream os;
    os << std::setprecision(15) << v;
    return os.str();
}

// Fixed-point formatting for CSV cells.
inline std::string format_fixed(double v, int digits = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace symkit
