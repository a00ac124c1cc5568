#pragma once

#include "nikishin/polynomial.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace nikishin {

struct MassPoint {
    Real location;
    Real mass;
};

/// Density of the continuous part in the reference variable u in [-1,1],
/// x = c + h u. The measure is w(u) du, so a Chebyshev weight has total
/// mass pi on every interval.
struct Weight {
    enum class Kind { ChebyshevFirst, ChebyshevSecond, Jacobi, ModulatedJacobi };
    Kind kind = Kind::ChebyshevFirst;
    Real alpha = 0, beta = 0;  ///< (1-u)^alpha (1+u)^beta for Jacobi kinds
    Polynomial modulus;        ///< positive factor q(u), monomial basis in u

    static Weight chebyshev_first();
    static Weight chebyshev_second();
    static Weight legendre();
    static Weight jacobi(Real a, Real b);
    static Weight modulated_jacobi(Real a, Real b, Polynomial q);

    /// Jacobi exponents in effect (Chebyshev kinds are Jacobi(-+1/2)).
    Real exp_a() const;
    Real exp_b() const;
    std::string signature() const;
};

struct Measure {
    Interval interval;
    Weight weight;
    int sign = 1;
    std::vector<MassPoint> atoms;

    Measure() = default;
    Measure(Interval iv, Weight w, int sign = 1, std::vector<MassPoint> atoms = {});

    /// Convex hull of the support (interval plus atoms).
    Interval hull() const;
    /// Distance from z to the support.
    Real support_distance(const Complex& z) const;
    Real delta_clear() const;
    void validate() const;
    std::string signature() const;
};

struct QuadratureRule {
    RVec nodes;
    RVec weights;
    size_t n_continuous = 0;
    unsigned precision_bits = 0;
    Interval interval;
    std::vector<MassPoint> atoms;
    Real delta_clear;

    size_t size() const { return nodes.size(); }
};

/// Fraction of the interval length used as the clearance radius.
double delta_clear_factor();
void set_delta_clear_factor(double f);

/// Monic three-term recurrence in u: p_{k+1} = (u - a_k) p_k - b_k p_{k-1};
/// b_0 holds the total mass of the reference weight.
struct Recurrence {
    RVec a, b;
};
Recurrence jacobi_recurrence(const Real& alpha, const Real& beta, int n);
Recurrence weight_recurrence(const Weight& w, int n);

QuadratureRule build_quadrature(const Measure& m, int n_nodes, unsigned precision_bits);
/// Cached variant at the working precision.
std::shared_ptr<const QuadratureRule> cached_rule(const Measure& m, int n_nodes);

Complex integrate(const QuadratureRule& rule, const std::function<Complex(const Real&)>& f);
Complex cauchy_transform(const QuadratureRule& rule, const Complex& z);
RVec moments(const QuadratureRule& rule, int max_degree);

}  // namespace nikishin
