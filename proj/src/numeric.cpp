#include "nikishin/numeric.hpp"

#include <cstdlib>
#include <regex>

namespace nikishin {

namespace {
unsigned g_bits = 0;

unsigned digits10_for_bits(unsigned bits) {
    return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120));
}
}  // namespace

unsigned default_bits() {
    const char* env = std::getenv("NIKISHIN_PRECISION_BITS");
    if (!env || !*env) return 256;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 64 || v > 1 << 20)
        throw config_error(std::string("NIKISHIN_PRECISION_BITS must be an integer >= 64, got '") + env + "'");
    return static_cast<unsigned>(v);
}

unsigned working_bits() {
    if (g_bits == 0) set_working_bits(default_bits());
    return g_bits;
}

namespace {
// Boost's own default is 20 digits; anything built before the first
// precision query would silently keep it.
struct EagerPrecision {
    EagerPrecision() {
        try {
            working_bits();
        } catch (const Error&) {
            set_working_bits(256);
        }
    }
} g_eager;
}  // namespace

void set_working_bits(unsigned bits) {
    if (bits < 64) throw config_error("precision must be at least 64 bits, got " + std::to_string(bits));
    g_bits = bits;
    Real::default_precision(digits10_for_bits(bits));
}

Real lift(const Real& a) {
    Real r = a;
    unsigned d = Real::default_precision();
    if (r.precision() < d) r.precision(d);
    return r;
}

Real pow2(int e) { return boost::multiprecision::ldexp(Real(1), e); }

Real Tolerances::orth() const { return pow2(-static_cast<int>(bits) / 2 + 8); }
Real Tolerances::decomp() const { return pow2(-static_cast<int>(bits) / 2); }
Real Tolerances::root() const { return pow2(-static_cast<int>(bits) / 2); }
Real Tolerances::newton() const { return pow2(-static_cast<int>(bits) + 32); }
Real Tolerances::pivot() const { return pow2(-static_cast<int>(bits) + 24); }
Real Tolerances::quad() const { return pow2(-static_cast<int>(bits) + 16); }

Tolerances Tolerances::current() {
    Tolerances t;
    t.bits = working_bits();
    return t;
}

Real pi() { return boost::math::constants::pi<Real>(); }

Real parse_real(const std::string& s) {
    static const std::regex re(R"(^\s*[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*$)");
    if (!std::regex_match(s, re)) throw config_error("not a decimal number: '" + s + "'");
    working_bits();
    return Real(s);
}

std::string to_string(const Real& x, int digits) {
    if (digits <= 0) digits = static_cast<int>(digits10_for_bits(working_bits())) + 2;
    return x.str(digits, std::ios_base::scientific);
}

Complex& Complex::operator/=(const Complex& o) {
    if (o.im == 0) {
        re /= o.re;
        im /= o.re;
        return *this;
    }
    Real d = o.re * o.re + o.im * o.im;
    Real r = (re * o.re + im * o.im) / d;
    im = (im * o.re - re * o.im) / d;
    re = std::move(r);
    return *this;
}

Real abs(const Complex& z) {
    if (z.im == 0) return boost::multiprecision::abs(z.re);
    if (z.re == 0) return boost::multiprecision::abs(z.im);
    return boost::multiprecision::sqrt(z.re * z.re + z.im * z.im);
}

Real arg(const Complex& z) { return boost::multiprecision::atan2(z.im, z.re); }

Complex sqrt(const Complex& z) {
    using boost::multiprecision::signbit;
    if (z.re == 0 && z.im == 0) return Complex();
    Real r = abs(z);
    if (z.re >= 0) {
        Real t = boost::multiprecision::sqrt((r + z.re) / 2);
        return Complex(t, z.im / (2 * t));
    }
    Real t = boost::multiprecision::sqrt((r - z.re) / 2);
    Real a = boost::multiprecision::abs(z.im) / (2 * t);
    return Complex(a, signbit(z.im) ? Real(-t) : t);
}

Complex powi(Complex z, int n) {
    if (n < 0) return Complex(1) / powi(z, -n);
    Complex r(1);
    while (n) {
        if (n & 1) r *= z;
        n >>= 1;
        if (n) z *= z;
    }
    return r;
}

bool isfinite(const Complex& z) {
    return boost::multiprecision::isfinite(z.re) && boost::multiprecision::isfinite(z.im);
}

std::string to_string(const Complex& z, int digits) {
    return "(" + to_string(z.re, digits) + ", " + to_string(z.im, digits) + ")";
}

}  // namespace nikishin
