#pragma once

#include "nikishin/numeric.hpp"

#include <string>
#include <vector>

namespace nikishin {

struct Interval {
    Real lo, hi;

    Interval() = default;
    Interval(Real a, Real b);
    Real length() const { return hi - lo; }
    Real center() const { return (lift(lo) + hi) / 2; }
    Real half() const { return (lift(hi) - lo) / 2; }
    bool contains(const Real& x) const { return lo <= x && x <= hi; }
    bool intersects(const Interval& o) const { return !(hi < o.lo || o.hi < lo); }
    /// Euclidean distance from z to the segment.
    Real distance(const Complex& z) const;
};

/// Polynomial in the monomial basis or the Chebyshev basis of an interval.
/// Coefficients are stored lowest order first.
class Polynomial {
public:
    enum class Basis { Monomial, Chebyshev };

    Polynomial() : basis_(Basis::Monomial), c_{Complex(0)} {}
    static Polynomial monomial(CVec coeffs);
    static Polynomial chebyshev(const Interval& iv, CVec coeffs);
    static Polynomial constant(const Complex& v) { return monomial({v}); }
    static Polynomial from_roots(const CVec& roots);

    Basis basis() const { return basis_; }
    const Interval& interval() const { return iv_; }
    const CVec& coeffs() const { return c_; }
    CVec& coeffs() { return c_; }

    /// Index of the last nonzero coefficient; -1 for the zero polynomial.
    int degree() const;
    bool is_real() const;

    Complex operator()(const Complex& z) const;
    /// Value and first derivative with respect to x.
    void eval(const Complex& z, Complex& p, Complex& dp) const;
    /// Sum of |c_k| T_k(rho) with rho the ellipse parameter of u (or |c_k||z|^k);
    /// the natural scale for residuals.
    Real abs_scale(const Complex& z) const;

    /// Coefficient of x^degree.
    Complex leading() const;
    Polynomial monic() const;
    Polynomial derivative() const;
    Polynomial to_monomial() const;
    Polynomial to_chebyshev(const Interval& iv) const;
    Polynomial conjugate() const;

    /// Roots with multiplicity, refined at working precision.
    CVec roots() const;

    // Arithmetic. Mixed bases are converted to the left operand's basis.
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial scaled(const Complex& s) const;

    std::string str(int digits = 20) const;

private:
    Basis basis_;
    Interval iv_;
    CVec c_;
};

Polynomial product(const std::vector<Polynomial>& ps);

}  // namespace nikishin
