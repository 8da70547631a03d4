#include "unimat/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "unimat/errors.hpp"

namespace unimat {

double rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0,1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw index_error("uniform_int: n must be positive");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = eng_();
    } while (v >= limit);
    return v % n;
}

std::string rng::save_state() const {
    std::ostringstream os;
    os << eng_ << ' ' << (has_spare_ ? 1 : 0);
    // The spare is stored as its bit pattern so the round trip is exact.
    if (has_spare_) os << ' ' << std::bit_cast<std::uint64_t>(spare_);
    return os.str();
}

void rng::load_state(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    int flag = 0;
    is >> flag;
    has_spare_ = flag != 0;
    spare_ = 0.0;
    if (has_spare_) {
        std::uint64_t bits = 0;
        is >> bits;
        spare_ = std::bit_cast<double>(bits);
    }
    if (is.fail()) throw checkpoint_error("corrupt rng state");
}

// splitmix64 finalizer; decorrelates nearby seeds and tags.
static std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t t : tags) h = mix64(h ^ t);
    return h;
}

std::uint64_t hash_tag(const std::string& s) {
    // FNV-1a.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace unimat
