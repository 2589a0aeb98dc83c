#include "tailmix/rng.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "tailmix/error.hpp"

namespace tailmix {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
    for (;;) {
        const double u = uniform();
        if (u > 0.0) return u;
    }
}

uint64_t Rng::uniform_below(uint64_t n) {
    if (n == 0) throw ConfigError("uniform_below: n must be positive");
    constexpr uint64_t kMax = std::numeric_limits<uint64_t>::max();
    const uint64_t reject = (kMax % n + 1) % n; // size of the biased top region
    for (;;) {
        const uint64_t x = next_u64();
        if (reject == 0 || x <= kMax - reject) return x % n;
    }
}

double Rng::normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double Rng::beta_symmetric(double alpha) {
    if (!(alpha > 0.0)) throw ConfigError("beta sampler: alpha must be positive");
    if (alpha == 1.0) return uniform();
    if (alpha < 1.0) {
        // Johnk's rejection method, efficient for small shape parameters.
        const double inv = 1.0 / alpha;
        for (;;) {
            const double x = std::pow(uniform_open(), inv);
            const double y = std::pow(uniform_open(), inv);
            const double s = x + y;
            if (s <= 1.0 && s > 0.0) return x / s;
        }
    }
    // Cheng's BB rejection method for both shapes > 1 (here equal).
    const double a = alpha, b = alpha;
    const double sum = a + b;
    const double beta = std::sqrt((sum - 2.0) / (2.0 * a * b - sum));
    const double gamma = a + 1.0 / beta;
    for (;;) {
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double v = beta * std::log(u1 / (1.0 - u1));
        const double w = a * std::exp(v);
        const double z = u1 * u1 * u2;
        const double r = gamma * v - 1.3862943611198906; // ln 4
        const double s = a + r - w;
        if (s + 2.6094379124341003 >= 5.0 * z) return w / (b + w);
        const double t = std::log(z);
        if (s >= t) return w / (b + w);
        if (r + sum * std::log(sum / (b + w)) >= t) return w / (b + w);
    }
}

void Rng::save(std::ostream& os) const { os << engine_; }

void Rng::load(std::istream& is) {
    is >> engine_;
    if (!is) throw LoadError("failed to read rng state");
}

uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 14695981039346656037ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

} // namespace tailmix
