#include "doctest.h"

#include "nikishin/measure.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <random>

using namespace nikishin;
using boost::math::beta;
using boost::multiprecision::cos;
using boost::multiprecision::pow;
using boost::multiprecision::sqrt;

namespace {

Real rel(const Real& a, const Real& b) {
    Real d = boost::multiprecision::abs(a - b);
    Real s = boost::multiprecision::abs(b);
    return s > 0 ? d / s : d;
}

Measure cheb(double lo, double hi, std::vector<MassPoint> atoms = {}) {
    return Measure(Interval(lo, hi), Weight::chebyshev_first(), 1, std::move(atoms));
}

// Integral of (1+u)^j (1-u)^a (1+u)^b over [-1,1] via the Beta function.
Real shifted_jacobi_moment(const Real& a, const Real& b, int j) {
    return pow(Real(2), a + b + j + 1) * beta(a + 1, b + j + 1);
}

}  // namespace

TEST_CASE("gauss-chebyshev four point rule") {
    auto r = build_quadrature(cheb(-1, 1), 4, 256);
    REQUIRE(r.size() == 4);
    Real tol = pow2(-240);
    for (int j = 1; j <= 4; ++j) {
        Real x = cos((2 * j - 1) * pi() / 8);
        bool found = false;
        for (size_t i = 0; i < 4; ++i)
            if (boost::multiprecision::abs(r.nodes[i] - x) < tol) {
                found = true;
                CHECK(rel(r.weights[i], pi() / 4) < tol);
            }
        CHECK(found);
    }
}

TEST_CASE("legendre two point rule") {
    Measure m(Interval(-1, 1), Weight::legendre());
    auto r = build_quadrature(m, 2, 256);
    Real x = 1 / sqrt(Real(3));
    Real tol = pow2(-240);
    CHECK(boost::multiprecision::abs(r.nodes[0] + x) < tol);
    CHECK(boost::multiprecision::abs(r.nodes[1] - x) < tol);
    CHECK(rel(r.weights[0], Real(1)) < tol);
    CHECK(rel(r.weights[1], Real(1)) < tol);
}

TEST_CASE("chebyshev on [2,3] with a mass point") {
    auto r = build_quadrature(cheb(2, 3, {{Real(5), Real("0.5")}}), 4, 256);
    REQUIRE(r.size() == 5);
    for (int i = 0; i < 4; ++i) CHECK((r.nodes[i] > 2 && r.nodes[i] < 3));
    CHECK(r.nodes[4] == 5);
    CHECK(r.weights[4] == Real("0.5"));
    Complex total = integrate(r, [](const Real&) { return Complex(1); });
    CHECK(rel(total.re, pi() + Real("0.5")) < pow2(-240));
}

TEST_CASE("integrate basic chebyshev integrals") {
    auto r = build_quadrature(cheb(-1, 1), 8, 256);
    Real tol = pow2(-240);
    CHECK(rel(integrate(r, [](const Real&) { return Complex(1); }).re, pi()) < tol);
    CHECK(boost::multiprecision::abs(integrate(r, [](const Real& x) { return Complex(x); }).re) < tol);
    CHECK(rel(integrate(r, [](const Real& x) { return Complex(x * x); }).re, pi() / 2) < tol);
}

TEST_CASE("integrate rejects non-finite values") {
    auto r = build_quadrature(cheb(-1, 1), 4, 128);
    try {
        integrate(r, [](const Real& x) { return Complex(1 / (x - x)); });
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numerical);
        CHECK(std::string(e.what()).find("x=") != std::string::npos);
    }
}

TEST_CASE("cauchy transform examples") {
    auto r = build_quadrature(cheb(-1, 1), 120, 256);
    Complex at2 = cauchy_transform(r, Complex(2));
    CHECK(rel(at2.re, pi() / sqrt(Real(3))) < Real(1e-40));
    CHECK(at2.im == 0);
    Complex ati = cauchy_transform(r, Complex(Real(0), Real(1)));
    CHECK(boost::multiprecision::abs(ati.re) < Real(1e-40));
    CHECK(rel(ati.im, -pi() / sqrt(Real(2))) < Real(1e-40));

    QuadratureRule atom;
    atom.nodes = {Real(0)};
    atom.weights = {Real(1)};
    atom.interval = Interval(-1, 1);
    atom.delta_clear = Real("1e-3");
    CHECK(rel(cauchy_transform(atom, Complex(3)).re, Real(1) / 3) < pow2(-250));

    CHECK_THROWS_AS(cauchy_transform(r, Complex(Real("1.0000001"))), Error);
    try {
        cauchy_transform(r, Complex(Real("0.5"), Real("1e-6")));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Proximity);
    }
}

TEST_CASE("moments examples") {
    auto r = build_quadrature(cheb(-1, 1), 4, 256);
    auto m = moments(r, 2);
    Real tol = pow2(-240);
    CHECK(rel(m[0], pi()) < tol);
    CHECK(boost::multiprecision::abs(m[1]) < tol);
    CHECK(rel(m[2], pi() / 2) < tol);

    auto leg = moments(build_quadrature(Measure(Interval(-1, 1), Weight::legendre()), 2, 256), 1);
    CHECK(rel(leg[0], Real(2)) < tol);
    CHECK(boost::multiprecision::abs(leg[1]) < tol);

    QuadratureRule atom;
    atom.nodes = {Real(5)};
    atom.weights = {Real("0.5")};
    atom.n_continuous = 2;
    auto am = moments(atom, 2);
    CHECK(am[0] == Real("0.5"));
    CHECK(am[1] == Real("2.5"));
    CHECK(am[2] == Real("12.5"));

    CHECK_THROWS_AS(moments(r, 8), Error);
}

TEST_CASE("measure validation") {
    CHECK_THROWS_AS(cheb(-1, 1, {{Real("0.5"), Real(1)}}), Error);
    CHECK_THROWS_AS(cheb(-1, 1, {{Real(2), Real(-1)}}), Error);
    CHECK_THROWS_AS(Interval(1, 1), Error);
    Measure m = cheb(-1, 1, {{Real("1.5"), Real(1)}});
    CHECK(m.hull().hi == Real("1.5"));
}

TEST_CASE("modulated weight with nonpositive modulus is a numerical error") {
    // q(u) = u changes sign on [-1,1]
    Weight w = Weight::modulated_jacobi(0, 0, Polynomial::monomial({Complex(0), Complex(1)}));
    Measure m(Interval(-1, 1), w);
    try {
        build_quadrature(m, 4, 128);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numerical);
        CHECK(std::string(e.what()).find("precision") != std::string::npos);
    }
}

TEST_CASE("property: quadrature exactness against Beta-function moments") {
    std::mt19937 gen(12345);
    std::uniform_real_distribution<double> ex(-0.9, 2.0);
    std::uniform_int_distribution<int> nn(2, 64);
    const unsigned bits = 192;
    PrecisionGuard g(bits);
    for (int trial = 0; trial < 12; ++trial) {
        Real a = Real(ex(gen)), b = Real(ex(gen));
        int n = nn(gen);
        Weight w;
        bool modulated = trial % 3 == 2;
        // q(u) = 2 + u + u^2/2 is positive on [-1,1]
        CVec qc = {Complex(2), Complex(1), Complex(Real(1) / 2)};
        w = modulated ? Weight::modulated_jacobi(a, b, Polynomial::monomial(qc)) : Weight::jacobi(a, b);
        Measure m(Interval(-1, 1), w);
        auto r = build_quadrature(m, n, bits);
        for (int j = 0; j <= 2 * n - 1 - (modulated ? 2 : 0); j += std::max(1, n / 4)) {
            Complex got = integrate(r, [&](const Real& u) { return Complex(pow(1 + u, j)); });
            Real want = shifted_jacobi_moment(a, b, j);
            if (modulated) {
                // 2 + u + u^2/2 = 3/2 + 0*(1+u) + (1+u)^2/2
                want = Real(3) / 2 * shifted_jacobi_moment(a, b, j) +
                       shifted_jacobi_moment(a, b, j + 2) / 2;
            }
            CHECK(rel(got.re, want) <= pow2(-static_cast<int>(bits) + 16));
        }
    }
}

TEST_CASE("property: cauchy transform is real on the real axis; sign coherence") {
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> pos(1.01, 8.0);
    Measure neg(Interval(-1, 1), Weight::chebyshev_second(), -1, {{Real(-3), Real(-2)}});
    auto r = build_quadrature(neg, 16, 256);
    for (int t = 0; t < 20; ++t) {
        Real x = Real(pos(gen)) * (t % 2 ? 1 : -1);
        if (boost::multiprecision::abs(x + 3) < Real("0.01")) continue;
        CHECK(boost::multiprecision::abs(cauchy_transform(r, Complex(x)).im) <= pow2(-240));
    }
    Complex s = integrate(r, [](const Real& x) { return Complex(x * x + 1); });
    CHECK(s.re < 0);
}
