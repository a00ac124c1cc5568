#include "doctest.h"

#include "nikishin/second_type.hpp"

#include <cmath>
#include <random>

using namespace nikishin;
using boost::multiprecision::abs;
using boost::multiprecision::log;
using boost::multiprecision::sqrt;

namespace {

Measure cheb(double lo, double hi, std::vector<MassPoint> atoms = {}) {
    return Measure(Interval(lo, hi), Weight::chebyshev_first(), 1, std::move(atoms));
}

NikishinSystem pair() { return build_system({cheb(-1, 1), cheb(2, 3)}); }
NikishinSystem triple() { return build_system({cheb(-1, 1), cheb(2, 3), cheb(-3, -1.5)}); }

Polynomial lin(const Complex& root) { return Polynomial::monomial({-root, Complex(1)}); }

}  // namespace

TEST_CASE("psi_eval examples") {
    auto one = build_system({cheb(-1, 1)});
    auto q = solve_mop(one, {1});
    auto fam = plain_family(one, {1}, q.Q);
    CHECK(fam(0, Complex(3, 1)) == q.Q(Complex(3, 1)));

    // int x/(z-x) (1-x^2)^(-1/2) dx = pi (z/sqrt(z^2-1) - 1)
    Real want = pi() * (2 / sqrt(Real(3)) - 1);
    CHECK(abs(fam(1, Complex(2)) - Complex(want)) < Real("1e-60"));

    auto q3 = solve_mop(one, {3});
    auto f3 = plain_family(one, {3}, q3.Q);
    Real a = abs(f3(1, Complex(1000))), b = abs(f3(1, Complex(10000)));
    double slope = static_cast<double>((log(b) - log(a)) / log(Real(10)));
    CHECK(slope == doctest::Approx(-4).epsilon(1e-3));

    CHECK_THROWS_AS(fam(1, Complex(Real("0.5"), Real("1e-9"))), Error);
}

TEST_CASE("contour count and real zeros on a known polynomial") {
    auto p = Polynomial::from_roots({Complex(Real("0.5")), Complex(Real("-0.3")), Complex(Real("0.9")),
                                     Complex(Real(0), Real(2)), Complex(Real(0), Real(-2)),
                                     Complex(Real(4))});
    Interval iv(-1, 1);
    auto f = [&](const Complex& z) { return p(z); };
    CHECK(contour_zero_count(f, iv, Real("0.25"), 3) == 3);
    CHECK(contour_zero_count(f, iv, Real(4), 3) == 6);
    RVec z = real_zeros([&](const Real& x) { return p(Complex(x)).re; }, iv, 3);
    REQUIRE(z.size() == 3);
    CHECK(abs(z[0] + Real("0.3")) < Real("1e-60"));
    CHECK(abs(z[2] - Real("0.9")) < Real("1e-60"));
}

TEST_CASE("induced polynomials examples") {
    auto s = pair();
    MultiIndex n{2, 1};
    auto r = solve_induced(s, n);
    const auto& ind = r.induced;
    REQUIRE(ind.zeros[2].size() == 1);
    CHECK(ind.zeros[2][0].re > 2);
    CHECK(ind.zeros[2][0].re < 3);
    CHECK(ind.contour_count[2] == 1);

    // Q_{n,1} = Q_n
    auto roots = mop_zeros(r.mop.Q);
    REQUIRE(ind.zeros[1].size() == roots.size());
    std::vector<Real> a, b;
    for (auto& c : roots) a.push_back(c.re);
    for (auto& c : ind.zeros[1]) b.push_back(c.re);
    std::sort(a.begin(), a.end());
    for (size_t i = 0; i < a.size(); ++i) CHECK(abs(a[i] - b[i]) < Real("1e-50"));

    // positive sigma_1 and a negative linear Q_{n,2} on [-1,1]
    CHECK(ind.eps[1] == -1);
    for (int k = 1; k <= 2; ++k) CHECK(ind.K[k] > 0);
    CHECK(ind.kappa(1) == ind.K[1]);
}

TEST_CASE("h recursion and varying orthogonality") {
    Tolerances tol = Tolerances::current();
    auto one = build_system({cheb(-1, 1)});
    auto r1 = solve_induced(one, {4});
    CHECK(verify_h_recursion(r1.induced, 1, {Complex(5)}) <= tol.check);

    auto s = pair();
    auto r = solve_induced(s, {6, 5});
    CVec zs{Complex(5), Complex(0, 2), Complex(-4, 1), Complex(Real("2.5"), Real("0.5"))};
    for (int k = 1; k <= 2; ++k) {
        CHECK(verify_h_recursion(r.induced, k, zs) <= tol.check);
        CHECK(varying_orthogonality_residual(r.induced, k) <= tol.orth());
    }
    CHECK(h_constant_sign(r.induced, 2));
    CHECK(h_constant_sign(r.induced, 1));
}

TEST_CASE("property: Psi orthogonality and zero counts on random indices") {
    std::mt19937 gen(42);
    std::uniform_int_distribution<int> nn(0, 7);
    auto s = triple();
    int done = 0;
    while (done < 5) {
        MultiIndex n{nn(gen), nn(gen), nn(gen)};
        if (!check_index_class(n) || norm(n) == 0) continue;
        auto r = solve_induced(s, n);
        PrecisionGuard g(r.bits);
        const auto& fam = *r.induced.family;
        for (int k = 1; k <= 3; ++k) {
            CHECK(r.induced.contour_count[k] == r.induced.N(k));
            CHECK(static_cast<int>(r.induced.zeros[k].size()) == r.induced.N(k));
            for (int j = 0; k + j <= 3; ++j)
                CHECK(psi_orthogonality_residual(fam, n, k, j) <= Tolerances::current().orth());
            CHECK(varying_orthogonality_residual(r.induced, k) <= Tolerances::current().orth());
            CHECK(h_constant_sign(r.induced, k));
            CHECK(verify_h_recursion(r.induced, k, {Complex(7, 1)}) <= 1e-15);
        }
        ++done;
    }
}

TEST_CASE("R-family and the lemmarelation identity") {
    auto s = pair();
    auto triv = RationalPerturbation::trivial(2);
    auto q = solve_mop(s, {3, 2});
    auto R = r_family(s, triv, {3, 2}, q.Q);
    auto P = plain_family(s, {3, 2}, q.Q);
    for (int k = 0; k <= 2; ++k) CHECK(abs(R(k, Complex(0, 1)) - P(k, Complex(0, 1))) < Real("1e-60"));

    auto pert = RationalPerturbation::polynomial({Polynomial::constant(Complex(1)), lin(Complex(5))});
    MultiIndex n{3, 2};
    auto qt = solve_perturbed_mop(s, pert, n);
    auto Rf = r_family(s, pert, n, qt.Q);
    auto Tf = tilde_family(s, pert, n, qt.Q);
    CHECK(lemmarelation_residual(Rf, Tf, pert, {Complex(0, 1), Complex(7), Complex(-2, -3)}) <= 1e-15);
    // k = m: no prefactor
    CHECK(abs(Rf(2, Complex(0, 1)) - Tf(2, Complex(0, 1))) <= Real("1e-15") * abs(Rf(2, Complex(0, 1))));
}

TEST_CASE("eq13 decomposition of R_{n,k}") {
    auto s = pair();
    auto triv = RationalPerturbation::trivial(2);
    auto q = solve_mop(s, {1, 0});
    auto R = r_family(s, triv, {1, 0}, q.Q);
    CHECK(verify_eq13(R, 2, {Complex(0, 4)}) <= 1e-15);

    auto pert = RationalPerturbation::polynomial({lin(Complex(Real("-1.5"))), lin(Complex(5))});
    MultiIndex n{4, 3};
    auto qt = solve_perturbed_mop(s, pert, n);
    auto Rf = r_family(s, pert, n, qt.Q);
    CHECK(verify_eq13(Rf, 2, {Complex(10), Complex(1, 3)}) <= 1e-15);
    // Phi_1 = R_{n,1} is the l = 1 term of the same construction
    auto t = triple();
    auto pert3 = RationalPerturbation::polynomial(
        {Polynomial::constant(Complex(1)), lin(Complex(5)), Polynomial::constant(Complex(1))});
    auto q3 = solve_perturbed_mop(t, pert3, {4, 3, 3});
    auto R3 = r_family(t, pert3, {4, 3, 3}, q3.Q);
    CHECK(verify_eq13(R3, 2, {Complex(6, 2)}) <= 1e-15);
    CHECK(verify_eq13(R3, 3, {Complex(6, 2), Complex(0, 5)}) <= 1e-15);
}

TEST_CASE("lemma4 chain conditions") {
    auto s = triple();
    auto pert = RationalPerturbation::polynomial(
        {lin(Complex(Real("1.5"))), Polynomial::from_roots({Complex(5), Complex(5)}), lin(Complex(0, 2))});
    MultiIndex n{6, 5, 3};
    REQUIRE(check_index_class(n, pert.class_degrees()));
    auto qt = solve_perturbed_mop(s, pert, n);
    auto R = r_family(s, pert, n, qt.Q);
    CHECK(lemma4_chain_residual(R, pert) <= 1e-12);
    // a perturbed constant term breaks them
    auto wrong = r_family(s, pert, n, qt.Q + Polynomial::constant(Complex(Real("1e-3"))));
    CHECK(lemma4_chain_residual(wrong, pert) > 1e-6);
}

TEST_CASE("tilde induced family") {
    auto s = pair();
    MultiIndex n{4, 3};
    auto plain = solve_induced(s, n);
    auto triv = solve_tilde_induced(s, RationalPerturbation::trivial(2), n);
    for (int k = 1; k <= 2; ++k) {
        REQUIRE(plain.induced.zeros[k].size() == triv.induced.zeros[k].size());
        for (size_t i = 0; i < plain.induced.zeros[k].size(); ++i)
            CHECK(abs(plain.induced.zeros[k][i] - triv.induced.zeros[k][i]) < Real("1e-40"));
        CHECK(plain.induced.eps[k] == triv.induced.eps[k]);
    }

    auto pert = RationalPerturbation::polynomial({lin(Complex(5)), Polynomial::constant(Complex(1))});
    auto t = solve_tilde_induced(s, pert, n);
    for (int k = 1; k <= 2; ++k) {
        CHECK(static_cast<int>(t.induced.zeros[k].size()) == t.induced.N(k));
        // eps / eps~ = prod_{i<=k} sign(p_i on supp sigma_i) = -1
        CHECK(plain.induced.eps[k] * t.induced.eps[k] == -1);
    }

    auto cplx = RationalPerturbation::polynomial({lin(Complex(5, 1)), Polynomial::constant(Complex(1))});
    CHECK_THROWS_AS(solve_tilde_induced(s, cplx, n), Error);
}

TEST_CASE("normalized h approaches the inverse square root") {
    Interval ab(-1, 1);
    CHECK(abs(inverse_sqrt_limit(ab, Complex(2)) - Complex(1 / sqrt(Real(3)))) < Real("1e-60"));
    CHECK(abs(inverse_sqrt_limit(ab, Complex(-2)) + Complex(1 / sqrt(Real(3)))) < Real("1e-60"));
    // conjugation symmetry
    Complex z(Real("0.3"), Real("0.7"));
    CHECK(abs(inverse_sqrt_limit(ab, conj(z)) - conj(inverse_sqrt_limit(ab, z))) < Real("1e-60"));

    auto s = pair();
    Real prev = 10;
    for (MultiIndex n : {MultiIndex{4, 4}, MultiIndex{8, 8}, MultiIndex{12, 12}}) {
        auto r = solve_induced(s, n);
        PrecisionGuard g(r.bits);
        Complex z(0, 3);
        Real err = abs(normalized_h(r.induced, 1, z) - inverse_sqrt_limit(s.sigma(1).interval, z));
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < Real("1e-3"));
}
