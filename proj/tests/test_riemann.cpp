#include "doctest.h"

#include "nikishin/riemann.hpp"

#include <filesystem>
#include <random>

using namespace nikishin;
using boost::multiprecision::abs;
using boost::multiprecision::sqrt;

namespace {

SurfaceSpec surface(std::vector<Interval> s) {
    SurfaceSpec r;
    r.slits = std::move(s);
    return r;
}

std::shared_ptr<const CoveringMap> pair_cover() {
    return cached_covering(surface({Interval(-1, 1), Interval(2, 3)}));
}

std::shared_ptr<const CoveringMap> triple_cover() {
    return cached_covering(surface({Interval(-1, 1), Interval(2, 3), Interval(-3, Real("-1.5"))}));
}

// z - sqrt(z-1) sqrt(z+1): the branch vanishing at infinity, cut on [-1, 1]
Complex joukowski_small(const Complex& z) { return z - sqrt(z - Complex(1)) * sqrt(z + Complex(1)); }

// 5x5 grid in a box, shifted off the real axis so no point sits on a cut
CVec grid(double x0, double x1, double y0, double y1) {
    CVec g;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            g.emplace_back(x0 + (x1 - x0) * i / 4, y0 + (y1 - y0) * (j + 0.5) / 5);
    return g;
}

}  // namespace

TEST_CASE("m = 1 covering is Joukowski") {
    auto c = build_covering(surface({Interval(-1, 1)}));
    CHECK(abs(c.A(1) - Real("0.25")) < Real("1e-70"));
    CHECK(abs(c.B(1)) < Real("1e-70"));
    CHECK(abs(c.crit_lo(1) + Real("0.5")) < Real("1e-70"));
    CHECK(abs(c.crit_hi(1) - Real("0.5")) < Real("1e-70"));
    // with w = v/2 the map is (v + 1/v)/2
    Complex v(Real("0.3"), Real("1.7"));
    Complex want = (v + Complex(1) / v) / Real(2);
    CHECK(abs(c.Z(v / Real(2)) - want) < Real("1e-70"));
    CHECK(c.residual() < Tolerances::current().newton());
}

TEST_CASE("m = 1 on [a, b] is the affine transport") {
    Real a("2.5"), b(7);
    auto c = build_covering(surface({Interval(a, b)}));
    Real q = (b - a) / 4;
    Complex v(Real("-0.8"), Real("0.4"));
    // (a+b)/2 + (b-a)/4 (v + 1/v) with w = (a+b)/2 + q v
    Complex want = Complex((a + b) / 2) + Complex(q) * (v + Complex(1) / v);
    CHECK(abs(c.Z(Complex((a + b) / 2) + Complex(q) * v) - want) < Real("1e-65"));
    CHECK(abs(c.Z(Complex(c.crit_lo(1))) - Complex(a)) < Real("1e-65"));
    CHECK(abs(c.Z(Complex(c.crit_hi(1))) - Complex(b)) < Real("1e-65"));
}

TEST_CASE("m = 1 branch values match the closed form") {
    auto c = cached_covering(surface({Interval(-1, 1)}));
    BranchFunction psi(c, 1);
    CHECK(psi.C1() > 0);
    CHECK(abs(psi(0, Complex(2)) - Complex(2 - sqrt(Real(3)))) < Real("1e-25"));
    CHECK(abs(psi(0, Complex(10)) - Complex(10 - sqrt(Real(99)))) < Real("1e-25"));
    CHECK(abs(psi(1, Complex(2)) - Complex(2 + sqrt(Real(3)))) < Real("1e-25"));

    std::mt19937 gen(7);
    std::uniform_real_distribution<double> u(-4, 4);
    int n = 0;
    while (n < 25) {
        Complex z(u(gen), u(gen));
        if (abs(z.im) < 0.05) continue;
        Complex small = joukowski_small(z);
        // the principal-root product picks the wrong branch in the left half plane
        if (abs(small) > 1) small = Complex(1) / small;
        CHECK(abs(psi(0, z) - small) < Real("1e-25"));
        CHECK(abs(psi(1, z) - Complex(1) / small) < Real("1e-25") * abs(psi(1, z)));
        ++n;
    }
}

TEST_CASE("m = 2 covering residual and round trip") {
    auto c = pair_cover();
    CHECK(c->residual() <= Real("1e-30"));
    auto [num, den] = c->numerator_denominator();
    CHECK(num.size() == 4);  // degree 3
    CHECK(den.size() == 3);
    auto rt = covering_round_trip(*c, 1000, 11);
    CHECK(rt.max_residual <= Tolerances::current().newton() * 1e3);
    CHECK(rt.injective);
    // critical values hit the slit ends
    for (int k = 1; k <= 2; ++k) {
        CHECK(abs(c->Z(Complex(c->crit_lo(k))) - Complex(c->spec().slit(k).lo)) < Real("1e-30"));
        CHECK(abs(c->Z(Complex(c->crit_hi(k))) - Complex(c->spec().slit(k).hi)) < Real("1e-30"));
        CHECK(abs(c->dZ(Complex(c->crit_lo(k)))) < Real("1e-30"));
    }
}

TEST_CASE("m = 3 covering") {
    auto c = triple_cover();
    CHECK(c->residual() <= Real("1e-30"));
    auto rt = covering_round_trip(*c, 200, 3);
    CHECK(rt.max_residual <= Tolerances::current().newton() * 1e3);
    CHECK(rt.injective);
}

TEST_CASE("branch products are constant +-1") {
    for (auto c : {pair_cover(), triple_cover()}) {
        for (int l = 1; l <= c->m(); ++l) {
            BranchFunction psi(c, l);
            for (const auto& g : {grid(-4, 4, 0.2, 3), grid(-5, 5, -3, -0.2), grid(3.5, 8, -1, 1)}) {
                auto p = branch_product(psi, g);
                CHECK(p.spread <= Real("1e-25"));
                CHECK(p.unit_gap <= Real("1e-20"));
                if (l == 1) CHECK(p.value == 1);
            }
        }
    }
}

TEST_CASE("sign convention for psi^(1)") {
    // slit 1 left of slit 2: every leading value positive
    BranchFunction left(pair_cover(), 1);
    for (int k = 0; k <= 2; ++k) CHECK(left.sg(k) == 1);
    // slit 1 right of slit 2: sheets 0 and 1 negative
    BranchFunction right(cached_covering(surface({Interval(2, 3), Interval(-1, 1)})), 1);
    CHECK(right.sg(0) == -1);
    CHECK(right.sg(1) == -1);
    CHECK(right.sg(2) == 1);
    // l >= 2 takes C1 > 0, flip negates
    BranchFunction p2(pair_cover(), 2), f2(pair_cover(), 2, true);
    CHECK(p2.C1() > 0);
    CHECK(f2.C1() == -p2.C1());
    // normalization: prod |lead| = 1
    for (int l = 1; l <= 3; ++l) {
        BranchFunction p(triple_cover(), l);
        Real prod = 1;
        for (int k = 0; k <= 3; ++k) prod *= abs(p.lead(k));
        CHECK(abs(prod - 1) < Real("1e-60"));
    }
}

TEST_CASE("divisor and leading coefficients") {
    auto c = triple_cover();
    for (int l = 1; l <= 3; ++l) {
        BranchFunction psi(c, l);
        Complex z(Real(0), Real("1e12"));
        Complex a = psi(0, z) * z, b = psi(l, z) / z;
        CHECK(abs(a - Complex(psi.C1())) < Real("1e-10") * abs(psi.C1()));
        CHECK(abs(b - Complex(psi.C2())) < Real("1e-10") * abs(psi.C2()));
        for (int k = 1; k <= 3; ++k)
            if (k != l) CHECK(abs(psi(k, z) - Complex(psi.lead(k))) < Real("1e-10"));
    }
}

TEST_CASE("relalg identity") {
    auto c = triple_cover();
    std::vector<BranchFunction> psi;
    for (int l = 1; l <= 3; ++l) psi.emplace_back(c, l);
    CVec zs{Complex(10), Complex(0, 2), Complex(-5, 1), Complex(Real("2.5"), Real("0.3"))};
    for (int l = 2; l <= 3; ++l) CHECK(verify_relalg(psi, l, zs) <= Real("1e-20"));

    auto p = pair_cover();
    std::vector<BranchFunction> psi2{BranchFunction(p, 1), BranchFunction(p, 2)};
    CHECK(verify_relalg(psi2, 2, {Complex(10)}) <= Real("1e-20"));
}

TEST_CASE("realness and conjugation symmetry") {
    auto c = triple_cover();
    RVec xs{Real(-10), Real(-4), Real("1.5"), Real(5), Real(40)};
    for (int l = 1; l <= 3; ++l) {
        BranchFunction psi(c, l);
        for (int k = 0; k <= 3; ++k) {
            for (const auto& x : xs) {
                if (c->on_cut(k, Complex(x))) continue;
                CHECK(abs(psi(k, Complex(x)).im) <= Real("1e-25"));
            }
            for (const auto& z : grid(-4, 4, 0.3, 3)) {
                Complex d = psi(k, conj(z)) - conj(psi(k, z));
                CHECK(abs(d) <= Real("1e-25") * (1 + abs(psi(k, z))));
            }
        }
    }
}

TEST_CASE("boundary values are conjugate across a shared slit") {
    auto c = pair_cover();
    RVec x1{Real("-0.7"), Real("0.1"), Real("0.6")}, x2{Real("2.2"), Real("2.5"), Real("2.9")};
    for (int l = 1; l <= 2; ++l) {
        BranchFunction psi(c, l);
        Real e6 = boundary_conjugation(psi, 0, x1, Real("1e-6"));
        Real e8 = boundary_conjugation(psi, 0, x1, Real("1e-8"));
        CHECK(e6 < Real("1e-4"));
        CHECK(e8 < e6);
        CHECK(boundary_conjugation(psi, 1, x2, Real("1e-6")) < Real("1e-4"));
    }
}

TEST_CASE("Laurent constants against extrapolation") {
    auto c = triple_cover();
    for (int l = 1; l <= 3; ++l) {
        BranchFunction psi(c, l);
        for (int k = 1; k <= 3; ++k) {
            Real want = 1;
            for (int nu = k; nu <= 3; ++nu) want *= abs(psi.lead(nu));
            // |prod_{nu>=k} psi_nu|, divided by |z| when the pole sheet is included
            auto g = [&](const Real& R) {
                Real s = 0;
                for (int sgn : {1, -1}) {
                    Complex z(Real(0), sgn * R), p(1);
                    for (int nu = k; nu <= 3; ++nu) p *= psi(nu, z);
                    if (k <= l) p /= z;
                    s += abs(p);
                }
                return s / 2;
            };
            Real g3 = g(Real(1000)), g4 = g(Real(10000));
            Real extrap = (100 * g4 - g3) / 99;
            CHECK(abs(extrap - want) <= Real("1e-8") * want);
        }
    }
}

TEST_CASE("serialization and cache") {
    auto c = pair_cover();
    auto back = CoveringMap::from_json(c->to_json());
    for (int k = 1; k <= 2; ++k) {
        CHECK(abs(back.A(k) - c->A(k)) < Real("1e-70"));
        CHECK(abs(back.B(k) - c->B(k)) < Real("1e-70"));
        CHECK(abs(back.crit_lo(k) - c->crit_lo(k)) < Real("1e-70"));
    }
    CHECK(back.spec().key() == c->spec().key());

    auto dir = std::filesystem::temp_directory_path() / "nikishin_cover_test";
    std::filesystem::remove_all(dir);
    auto spec = surface({Interval(-2, Real("-0.5")), Interval(1, 4)});
    auto a = cached_covering(spec, dir.string());
    CHECK(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator{}) == 1);
    auto b = cached_covering(spec, dir.string());
    CHECK(a.get() == b.get());
    std::filesystem::remove_all(dir);
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(surface({Interval(-1, 1), Interval(0, 2)}).validate(), Error);
    try {
        build_covering(surface({Interval(-1, 1), Interval(Real("0.5"), 2)}));
        FAIL("overlap accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
    CHECK_THROWS_AS(surface({}).validate(), Error);

    auto c = pair_cover();
    CHECK(c->on_cut(0, Complex(Real("0.3"))));
    CHECK_FALSE(c->on_cut(0, Complex(Real("2.5"))));
    CHECK(c->on_cut(1, Complex(Real("2.5"))));
    try {
        c->preimage(1, Complex(Real("2.5")));
        FAIL("point on a cut accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Proximity);
    }
}

TEST_CASE("property: sheet preimages stay distinct next to the cuts") {
    std::mt19937 gen(2024);
    for (auto c : {pair_cover(), triple_cover()}) {
        std::uniform_real_distribution<double> ux(-3.5, 3.5), ue(6, 10);
        for (int n = 0; n < 40; ++n) {
            Real eps = pow2(-static_cast<int>(ue(gen) * 3.3));
            Complex z(Real(ux(gen)), n % 2 ? eps : -eps);
            CVec w;
            for (int k = 0; k <= c->m(); ++k) w.push_back(c->preimage(k, z));
            for (size_t i = 0; i < w.size(); ++i)
                for (size_t j = i + 1; j < w.size(); ++j) CHECK(abs(w[i] - w[j]) > Real("1e-12"));
        }
    }
}
