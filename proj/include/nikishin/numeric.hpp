#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace nikishin {

using Real = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                           boost::multiprecision::et_off>;

// ---------------------------------------------------------------------------
// Errors. The category maps onto the CLI exit codes.

enum class ErrorKind { Config, Numerical, Proximity, Structural, Assertion };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& s) { return Error(ErrorKind::Config, s); }
inline Error numerical_error(const std::string& s) { return Error(ErrorKind::Numerical, s); }
inline Error proximity_error(const std::string& s) { return Error(ErrorKind::Proximity, s); }
inline Error structural_error(const std::string& s) { return Error(ErrorKind::Structural, s); }

// ---------------------------------------------------------------------------
// Working precision. MPFR's default precision is process wide, so the guard
// is meant for the orchestrating thread only.

/// Starts at NIKISHIN_PRECISION_BITS when set, else 256.
unsigned default_bits();
unsigned working_bits();
void set_working_bits(unsigned bits);

class PrecisionGuard {
public:
    explicit PrecisionGuard(unsigned bits) : saved_(working_bits()) { set_working_bits(bits); }
    ~PrecisionGuard() { set_working_bits(saved_); }
    PrecisionGuard(const PrecisionGuard&) = delete;
    PrecisionGuard& operator=(const PrecisionGuard&) = delete;

private:
    unsigned saved_;
};

/// Tolerances derived from the working precision.
struct Tolerances {
    unsigned bits = 256;
    Real orth() const;        ///< 2^(-bits/2+8)
    Real decomp() const;      ///< 2^(-bits/2)
    Real root() const;        ///< 2^(-bits/2)
    Real newton() const;      ///< 2^(-bits+32)
    Real pivot() const;       ///< 2^(-bits+24)
    Real quad() const;        ///< 2^(-bits+16)
    double check = 1e-15;
    double exp = 1e-18;
    static Tolerances current();
};

Real pow2(int e);
/// Copy raised to at least the working precision. Values stored at a lower
/// precision otherwise cap anything derived from them through integer ops.
Real lift(const Real& a);
Real pi();
Real parse_real(const std::string& s);
std::string to_string(const Real& x, int digits = 0);

// ---------------------------------------------------------------------------
// Minimal complex type over Real. std::complex<T> is unspecified for
// non-builtin T, so this keeps the arithmetic explicit.

struct Complex {
    Real re, im;

    Complex() : re(0), im(0) {}
    Complex(const Real& r) : re(r), im(0) {}  // NOLINT
    Complex(int r) : re(r), im(0) {}          // NOLINT
    Complex(double r) : re(r), im(0) {}       // NOLINT
    Complex(const Real& r, const Real& i) : re(r), im(i) {}
    Complex(double r, double i) : re(r), im(i) {}

    Complex& operator+=(const Complex& o) {
        re += o.re;
        im += o.im;
        return *this;
    }
    Complex& operator-=(const Complex& o) {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    Complex& operator*=(const Complex& o) {
        Real r = re * o.re - im * o.im;
        im = re * o.im + im * o.re;
        re = std::move(r);
        return *this;
    }
    Complex& operator*=(const Real& o) {
        re *= o;
        im *= o;
        return *this;
    }
    Complex& operator/=(const Complex& o);
    Complex& operator/=(const Real& o) {
        re /= o;
        im /= o;
        return *this;
    }
    Complex operator-() const { return Complex(-re, -im); }

    bool is_real() const { return im == 0; }
    std::complex<double> to_std() const {
        return {static_cast<double>(re), static_cast<double>(im)};
    }
    static Complex from_std(const std::complex<double>& z) { return Complex(z.real(), z.imag()); }
};

inline Complex operator+(Complex a, const Complex& b) { return a += b; }
inline Complex operator-(Complex a, const Complex& b) { return a -= b; }
inline Complex operator*(Complex a, const Complex& b) { return a *= b; }
inline Complex operator*(Complex a, const Real& b) { return a *= b; }
inline Complex operator*(const Real& b, Complex a) { return a *= b; }
inline Complex operator/(Complex a, const Complex& b) { return a /= b; }
inline Complex operator/(Complex a, const Real& b) { return a /= b; }
inline bool operator==(const Complex& a, const Complex& b) { return a.re == b.re && a.im == b.im; }
inline bool operator!=(const Complex& a, const Complex& b) { return !(a == b); }

inline Complex conj(const Complex& z) { return Complex(z.re, -z.im); }
inline Real norm(const Complex& z) { return z.re * z.re + z.im * z.im; }
Real abs(const Complex& z);
Real arg(const Complex& z);
Complex sqrt(const Complex& z);
Complex powi(Complex z, int n);
bool isfinite(const Complex& z);
std::string to_string(const Complex& z, int digits = 0);

using CVec = std::vector<Complex>;
using RVec = std::vector<Real>;

inline int sign_of(const Real& x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

}  // namespace nikishin
