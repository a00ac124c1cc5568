#include "doctest.h"

#include "nikishin/system.hpp"

#include <random>
#include <thread>

using namespace nikishin;
using boost::multiprecision::abs;
using boost::multiprecision::cos;
using boost::multiprecision::sqrt;

namespace {

Measure cheb(double lo, double hi, std::vector<MassPoint> atoms = {}) {
    return Measure(Interval(lo, hi), Weight::chebyshev_first(), 1, std::move(atoms));
}

NikishinSystem two_level() { return build_system({cheb(-1, 1), cheb(2, 3)}); }

// Closed form of the transform of the Chebyshev measure on [2,3] for x < 2.
Real sigma2_hat(const Real& x) {
    Real y = 2 * x - 5;
    return -2 * pi() / sqrt(y * y - 1);
}

// Plain Gauss-Chebyshev sum on [-1,1], independent of the library rules.
Real gauss_chebyshev(int N, const std::function<Real(const Real&)>& f) {
    Real s = 0;
    for (int j = 1; j <= N; ++j) s += f(cos((2 * j - 1) * pi() / (2 * N)));
    return s * pi() / N;
}

}  // namespace

TEST_CASE("build_system hulls and overlap errors") {
    auto s = two_level();
    CHECK(s.m() == 2);
    CHECK(s.hull(1).lo == -1);
    CHECK(s.hull(2).hi == 3);
    CHECK(s.delta(1) == 1);

    auto a = build_system({cheb(-1, 1, {{Real("1.5"), Real(1)}}), cheb(2, 3)});
    CHECK(a.hull(1).hi == Real("1.5"));

    try {
        build_system({cheb(-1, 1), cheb(0.5, 3)});
        FAIL("expected overlap error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("sigma_1 and sigma_2") != std::string::npos);
    }
    CHECK_THROWS_AS(build_system({}), Error);
}

TEST_CASE("property: adding a mass point extends the hull") {
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> loc(1.05, 1.95);
    for (int t = 0; t < 10; ++t) {
        Real x(loc(gen));
        auto s = build_system({cheb(-1, 1, {{x, Real("0.25")}}), cheb(2, 3)});
        CHECK(s.hull(1).hi == x);
        CHECK(s.hull(1).lo == -1);
    }
    // an atom reaching into the next hull is rejected
    CHECK_THROWS_AS(build_system({cheb(-1, 1, {{Real("2.5"), Real(1)}}), cheb(2, 3)}), Error);
}

TEST_CASE("s-measure integrals") {
    auto s = two_level();
    Discretization d(s, {80, 80});
    Real tol = Real("1e-40");
    CHECK(abs(d.integrate_s(1, [](const Real&) { return Complex(1); }).re - pi()) < tol);

    Complex I = d.integrate_s(2, [](const Real&) { return Complex(1); });
    Real oracle = gauss_chebyshev(200, sigma2_hat);
    CHECK(I.re < 0);
    CHECK(abs(I.im) < tol);
    CHECK(abs(I.re - oracle) < tol * abs(oracle));

    Real mu1 = gauss_chebyshev(200, [](const Real& x) { return x * sigma2_hat(x); });
    Real c = mu1 / oracle;
    Complex J = d.integrate_s(2, [&](const Real& x) { return Complex(x - c); });
    CHECK(abs(J) < tol);
}

TEST_CASE("density is real on the first support") {
    auto s = build_system({cheb(-1, 1), cheb(2, 3), cheb(-4, -2)});
    Discretization d(s, {40, 40, 40});
    for (const auto& v : d.density(1, 3)) CHECK(v.im == 0);
    const auto& d12 = d.density(1, 2);
    for (size_t i = 0; i < d12.size(); ++i) {
        Real x = d.level(1).x[i];
        CHECK(abs(d12[i].re - sigma2_hat(x)) < Real("1e-40"));
    }
}

TEST_CASE("concurrent density reads agree") {
    auto s = build_system({cheb(-1, 1), cheb(2, 3), cheb(-4, -2)});
    Discretization d(s, {40, 40, 40});
    std::vector<CVec> got(4);
    {
        std::vector<std::thread> ts;
        for (int i = 0; i < 4; ++i)
            ts.emplace_back([&, i] {
                PrecisionGuard g(d.bits());
                got[i] = d.density(1, 3);
            });
        for (auto& t : ts) t.join();
    }
    for (int i = 1; i < 4; ++i) CHECK(got[i] == got[0]);
}

TEST_CASE("lemma1 examples") {
    auto s = two_level();
    Discretization d(s, {60, 60});
    auto triv = RationalPerturbation::trivial(2);
    auto l = lemma1_decompose(d, triv, 2);
    REQUIRE(l.size() == 2);
    CHECK(l[0].degree() < 0);
    CHECK(l[1](Complex(0)) == Complex(1));

    auto pert = RationalPerturbation::polynomial(
        {Polynomial::constant(Complex(1)), Polynomial::monomial({Complex(-5), Complex(1)})});
    l = lemma1_decompose(d, pert, 2);
    CHECK(l[0].degree() == 0);
    CHECK(abs(l[0].coeffs()[0].re + pi()) < Real("1e-40"));
    CHECK(abs(l[0].coeffs()[0].im) < Real("1e-40"));

    l = lemma1_decompose(d, pert, 1);
    REQUIRE(l.size() == 1);
    CHECK(l[0](Complex(7)) == Complex(1));
}

TEST_CASE("property: lemma1 decomposition identity") {
    std::mt19937 gen(2024);
    std::uniform_real_distribution<double> u(-6, 6);
    std::uniform_int_distribution<int> dg(0, 2);
    auto s = build_system({cheb(-1, 1), cheb(2, 3), cheb(-4, -2)});
    Discretization plain(s, {60, 60, 60});
    for (int trial = 0; trial < 6; ++trial) {
        std::vector<Polynomial> ps;
        for (int k = 0; k < 3; ++k) {
            CVec roots;
            int deg = dg(gen);
            while (static_cast<int>(roots.size()) < deg) {
                Complex r(u(gen), u(gen) / 3);
                bool ok = true;
                for (int j = 1; j <= 3; ++j) ok = ok && s.hull(j).distance(r) > Real("0.2");
                if (ok) roots.push_back(r);
            }
            ps.push_back(Polynomial::from_roots(roots));
        }
        auto pert = RationalPerturbation::polynomial(ps);
        Discretization tilde(s, {60, 60, 60}, &pert);
        for (int k = 1; k <= 3; ++k) {
            auto l = lemma1_decompose(plain, pert, k);
            for (int j = 1; j < k; ++j) CHECK(l[j - 1].degree() <= pert.deg_p(j + 1, k) - 1);
            CHECK(lemma1_residual(plain, tilde, pert, k, l, 6) <= Real("1e-20"));
        }
    }
}

TEST_CASE("perturbation validation") {
    auto s = two_level();
    auto bad = RationalPerturbation::polynomial(
        {Polynomial::monomial({Complex(Real("-0.5")), Complex(1)}), Polynomial::constant(Complex(1))});
    CHECK_THROWS_AS(bad.validate(s), Error);
    auto shared = RationalPerturbation::rational(
        {Polynomial::monomial({Complex(-5), Complex(1)}), Polynomial::constant(Complex(1))},
        {Polynomial::monomial({Complex(-5), Complex(1)}), Polynomial::constant(Complex(1))});
    CHECK_THROWS_AS(shared.validate(s), Error);
    auto good = RationalPerturbation::polynomial(
        {Polynomial::monomial({Complex(-5), Complex(1)}), Polynomial::constant(Complex(1))});
    CHECK_NOTHROW(good.validate(s));
    CHECK(good.real_flag());
    CHECK(good.sign_on_support(s, 1) == -1);
}

TEST_CASE("index class examples") {
    CHECK(check_index_class({3, 3, 3}));
    // n_2 = n_1 + 1 is still admissible; one more breaks the rule
    CHECK(check_index_class({3, 4, 3}));
    CHECK_FALSE(check_index_class({3, 5, 3}));
    CHECK(check_index_class({5, 3}, {0, 2}));
    CHECK_FALSE(check_index_class({4, 4}, {0, 2}));
}

TEST_CASE("property: perturbed class is contained in the plain class") {
    std::mt19937 gen(11);
    std::uniform_int_distribution<int> ni(0, 8), di(0, 3), mi(1, 4);
    for (int t = 0; t < 500; ++t) {
        int m = mi(gen);
        MultiIndex n(m);
        std::vector<int> d(m);
        for (int k = 0; k < m; ++k) {
            n[k] = ni(gen);
            d[k] = di(gen);
        }
        if (check_index_class(n, d)) CHECK(check_index_class(n));
    }
}

TEST_CASE("ladders") {
    auto l = build_ladder({5, 3}, 3, {0, 0});
    REQUIRE(l.size() == 3);
    CHECK(l[1] == MultiIndex{6, 3});
    CHECK(l[2] == MultiIndex{6, 4});

    auto st = build_ladder({10, 10}, 5, {0, 0}, 10);
    CHECK(norm(st.back()) == 60);

    // p_2 of degree 2 blocks the second component until the first grows
    auto p = build_ladder({5, 3}, 4, {0, 2});
    for (const auto& n : p) CHECK(check_index_class(n, {0, 2}));
    for (size_t i = 1; i < p.size(); ++i) CHECK(norm(p[i]) == norm(p[i - 1]) + 1);

    CHECK_THROWS_AS(build_ladder({3, 5}, 2, {0, 0}), Error);
}

TEST_CASE("permuted discretization reorders nodes only") {
    auto s = two_level();
    Discretization d(s, {30, 30});
    auto p = d.permuted(99);
    Complex a = d.integrate_s(2, [](const Real& x) { return Complex(x * x); });
    Complex b = p.integrate_s(2, [](const Real& x) { return Complex(x * x); });
    CHECK(abs(a - b) < Real("1e-60"));
    CHECK(p.level(1).x != d.level(1).x);
}

TEST_CASE("lemma1 residual with moments that vanish by symmetry") {
    // p_1 = x^2 + 1 on [-1, 1]: odd moments are zero up to roundoff
    auto s = build_system({cheb(-1, 1), cheb(2, 3)});
    auto pert = RationalPerturbation::polynomial(
        {Polynomial::monomial({Complex(1), Complex(0), Complex(1)}), Polynomial::constant(Complex(1))});
    auto nodes = default_nodes(s, {6, 6}, 2);
    Discretization plain(s, nodes), tilde(s, nodes, &pert);
    for (int k = 1; k <= 2; ++k)
        CHECK(lemma1_residual(plain, tilde, pert, k, lemma1_decompose(plain, pert, k), 6) <= Real("1e-20"));
}
