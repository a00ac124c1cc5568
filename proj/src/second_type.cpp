#include "nikishin/second_type.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>

namespace nikishin {

const char* to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::Plain: return "plain";
        case FamilyKind::RFamily: return "R-family";
        case FamilyKind::Tilde: return "tilde";
    }
    return "?";
}

namespace {

Complex over(const Complex& z, const Real& x) { return Complex(z.re - x, z.im); }

// T_0..T_R at u.
void cheb_values(const Real& u, int R, RVec& t) {
    t.resize(R + 1);
    t[0] = 1;
    if (R >= 1) t[1] = u;
    for (int r = 2; r <= R; ++r) t[r] = 2 * u * t[r - 1] - t[r - 2];
}

Real gap_between(const Interval& a, const Interval& b) {
    Real g = std::max(b.lo - a.hi, a.lo - b.hi);
    return g > 0 ? g : Real(0);
}

int sum_degrees(const std::vector<int>& v) {
    int s = 0;
    for (int x : v) s += x;
    return s;
}

}  // namespace

SecondTypeFamily::SecondTypeFamily(std::shared_ptr<const Discretization> d, Polynomial base, FamilyKind kind,
                                   std::vector<int> measure_signs)
    : disc_(std::move(d)), base_(std::move(base)), kind_(kind), signs_(std::move(measure_signs)) {
    if (static_cast<int>(signs_.size()) != disc_->m()) throw config_error("one measure sign per level is required");
    const auto& x1 = disc_->level(1).x;
    CVec v(x1.size());
    for (size_t i = 0; i < x1.size(); ++i) v[i] = base_(Complex(x1[i]));
    inner_.push_back(std::move(v));
    for (int k = 2; k <= m(); ++k) {
        const auto& lo = disc_->level(k - 1);
        const auto& up = disc_->level(k);
        const CVec& prev = inner_.back();
        CVec ws(lo.x.size());
        for (size_t s = 0; s < ws.size(); ++s) ws[s] = lo.w[s] * prev[s];
        CVec out(up.x.size());
        for (size_t t = 0; t < out.size(); ++t) {
            Complex acc(0);
            for (size_t s = 0; s < ws.size(); ++s) acc += ws[s] / (up.x[t] - lo.x[s]);
            out[t] = acc;
        }
        inner_.push_back(std::move(out));
    }
}

Complex SecondTypeFamily::eval(int k, const Complex& z, Real* scale) const {
    if (k < 0 || k > m()) throw config_error("second-type level out of range");
    if (k == 0) {
        if (scale) *scale = base_.abs_scale(z);
        return base_(z);
    }
    disc_->check_clear(k, z);
    const auto& L = disc_->level(k);
    const CVec& v = inner(k);
    Complex acc(0);
    Real sc = 0;
    for (size_t s = 0; s < v.size(); ++s) {
        Complex t = L.w[s] * v[s] / over(z, L.x[s]);
        if (scale) sc += abs(t);
        acc += t;
    }
    if (scale) *scale = sc;
    return acc;
}

Complex SecondTypeFamily::operator()(int k, const Complex& z) const { return eval(k, z, nullptr); }

SecondTypeFamily plain_family(const NikishinSystem& sys, const MultiIndex& n, const Polynomial& Qn) {
    auto d = std::make_shared<const Discretization>(sys, default_nodes(sys, n));
    std::vector<int> signs;
    for (int k = 1; k <= sys.m(); ++k) signs.push_back(sys.sigma(k).sign);
    return SecondTypeFamily(d, Qn, FamilyKind::Plain, signs);
}

SecondTypeFamily r_family(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                          const Polynomial& Qt) {
    if (pert.has_denominators()) throw config_error("the R-family is defined for polynomial perturbations");
    pert.validate(sys);
    auto d = std::make_shared<const Discretization>(sys, default_nodes(sys, n, sum_degrees(pert.class_degrees())));
    Polynomial R = Qt;
    for (int k = 1; k <= pert.m(); ++k) R = R * pert.pk(k);
    std::vector<int> signs;
    for (int k = 1; k <= sys.m(); ++k) signs.push_back(sys.sigma(k).sign);
    return SecondTypeFamily(d, R, FamilyKind::RFamily, signs);
}

SecondTypeFamily tilde_family(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                              const Polynomial& Qt) {
    auto d = std::make_shared<const Discretization>(sys, default_nodes(sys, n, sum_degrees(pert.class_degrees())),
                                                    &pert);
    std::vector<int> signs;
    for (int k = 1; k <= sys.m(); ++k)
        signs.push_back(pert.real_flag() ? sys.sigma(k).sign * pert.sign_on_support(sys, k) : 0);
    return SecondTypeFamily(d, Qt, FamilyKind::Tilde, signs);
}

// ---------------------------------------------------------------------------

int contour_zero_count(const std::function<Complex(const Complex&)>& f, const Interval& iv, const Real& r, int hint) {
    const Real x0 = iv.lo - r, x1 = iv.hi + r;
    const Complex corners[4] = {Complex(x0, -r), Complex(x1, -r), Complex(x1, r), Complex(x0, r)};
    const int per_long = 64 + 16 * std::max(hint, 0), per_short = 16 + 2 * std::max(hint, 0);
    double total = 0;

    auto value = [&](const Complex& z) {
        Complex v = f(z);
        if (v.re == 0 && v.im == 0) throw numerical_error("function vanishes on the counting contour");
        return v;
    };
    // arg(f(b)/f(a)) with bisection until each step turns by less than pi/4
    std::function<double(const Complex&, const Complex&, const Complex&, const Complex&, int)> step =
        [&](const Complex& a, const Complex& fa, const Complex& b, const Complex& fb, int depth) -> double {
        double t = static_cast<double>(arg(fb / fa));
        if (std::abs(t) < 0.785) return t;
        if (depth > 40) throw numerical_error("argument tracking did not resolve on the counting contour");
        Complex mid = (a + b) / Real(2);
        Complex fm = value(mid);
        return step(a, fa, mid, fm, depth + 1) + step(mid, fm, b, fb, depth + 1);
    };

    Complex prev = corners[0], fprev = value(prev);
    for (int side = 0; side < 4; ++side) {
        const Complex& a = corners[side];
        const Complex& b = corners[(side + 1) % 4];
        int M = side % 2 == 0 ? per_long : per_short;
        for (int j = 1; j <= M; ++j) {
            Complex z = a + (b - a) * (Real(j) / M);
            Complex fz = value(z);
            total += step(prev, fprev, z, fz, 0);
            prev = std::move(z);
            fprev = std::move(fz);
        }
    }
    double w = total / (2 * M_PI);
    long n = std::lround(w);
    if (std::abs(w - static_cast<double>(n)) > 0.1) throw numerical_error("winding number is not close to an integer");
    return static_cast<int>(n);
}

RVec real_zeros(const std::function<Real(const Real&)>& f, const Interval& iv, int expected) {
    RVec out;
    if (expected <= 0) return out;
    const unsigned bits = working_bits();
    for (int panels = 8 * expected; panels <= 512 * expected; panels *= 2) {
        out.clear();
        RVec xs(panels + 1), fs(panels + 1);
        for (int i = 0; i <= panels; ++i) {
            xs[i] = iv.lo + (iv.hi - iv.lo) * Real(i) / panels;
            fs[i] = f(xs[i]);
        }
        for (int i = 0; i < panels; ++i) {
            if (fs[i] == 0) {
                out.push_back(xs[i]);
                continue;
            }
            if (sign_of(fs[i]) * sign_of(fs[i + 1]) >= 0) continue;
            boost::uintmax_t iters = 400;
            boost::math::tools::eps_tolerance<Real> tol(bits > 24 ? bits - 16 : bits);
            auto br = boost::math::tools::toms748_solve(f, xs[i], xs[i + 1], fs[i], fs[i + 1], tol, iters);
            out.push_back((br.first + br.second) / 2);
        }
        if (fs[panels] == 0) out.push_back(xs[panels]);
        if (static_cast<int>(out.size()) >= expected) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------

int InducedFamily::N(int k) const {
    int s = 0;
    for (int j = k; j <= m(); ++j) s += n.at(j - 1);
    return s;
}

Complex InducedFamily::Q(int k, const Complex& z) const {
    Complex p(1);
    for (const auto& r : zeros.at(k)) p *= z - r;
    return p;
}

Complex InducedFamily::H(int k, const Complex& z) const {
    if (k < 1 || k > m() + 1) throw config_error("H_{n,k} needs 1 <= k <= m+1");
    if (k == 1) return Complex(1);
    return Q(k - 1, z) * (*family)(k - 1, z) / Q(k, z);
}

Complex InducedFamily::h(int k, const Complex& z) const {
    Real K2 = K.at(k - 1) * K.at(k - 1);
    return H(k, z) * K2;
}

namespace {

InducedFamily build_induced(const SecondTypeFamily& fam, const MultiIndex& n) {
    if (fam.kind() == FamilyKind::RFamily) throw config_error("induced polynomials need a plain or tilde family");
    const int m = fam.m();
    if (static_cast<int>(n.size()) != m) throw config_error("multi-index length differs from m");
    const Discretization& d = fam.disc();
    InducedFamily ind;
    ind.family = std::make_shared<const SecondTypeFamily>(fam);
    ind.n = n;
    ind.zeros.assign(m + 2, CVec{});
    ind.contour_count.assign(m + 1, 0);
    ind.eps.assign(m + 1, 0);
    ind.K.assign(m + 1, Real(1));
    const Real root_tol = Tolerances::current().root();

    for (int k = 1; k <= m; ++k) {
        const int Nk = ind.N(k);
        const Interval& iv = d.level(k).hull;
        Real r = iv.hi - iv.lo;
        if (k >= 2) r = std::min(r, gap_between(d.level(k - 1).hull, iv));
        r /= 4;
        auto fz = [&](const Complex& z) { return fam(k - 1, z); };
        int count = contour_zero_count(fz, iv, r, Nk);
        ind.contour_count[k] = count;
        if (count != Nk)
            throw structural_error("Psi_{n," + std::to_string(k - 1) + "} for n=" + to_string(n) + " has " +
                                   std::to_string(count) + " zeros around Delta_" + std::to_string(k) +
                                   ", expected " + std::to_string(Nk) + "; increase precision");
        RVec z = real_zeros([&](const Real& x) { return fam(k - 1, Complex(x)).re; }, iv, Nk);
        if (static_cast<int>(z.size()) != Nk)
            throw structural_error("found " + std::to_string(z.size()) + " real zeros of Psi_{n," +
                                   std::to_string(k - 1) + "} on Delta_" + std::to_string(k) + ", expected " +
                                   std::to_string(Nk) + "; increase precision");
        for (const auto& x : z)
            if (x - iv.lo <= root_tol || iv.hi - x <= root_tol)
                throw structural_error("zero of Psi_{n," + std::to_string(k - 1) + "} on the boundary of Delta_" +
                                       std::to_string(k));
        for (auto& x : z) ind.zeros[k].push_back(Complex(x));
    }

    for (int k = 1; k <= m; ++k) {
        const int ms = fam.measure_sign(k);
        if (ms == 0) throw config_error("the sign of a complex perturbed measure is undefined");
        const auto& L = d.level(k);
        const Interval& iv = L.hull;
        // Psi_{k-1}/Q_k keeps its sign on the component of R \ Delta_{k-1}
        // holding Delta_k; sample it beyond Delta_k on the far side.
        Real len = iv.hi - iv.lo;
        bool right = k == 1 || d.level(k - 1).hull.hi < iv.lo;
        Real xs = right ? Real(iv.hi + len / 2) : Real(iv.lo - len / 2);
        Complex ratio = fam(k - 1, Complex(xs)) / ind.Q(k, Complex(xs));
        int s1 = sign_of(ratio.re);
        int s2 = sign_of(ind.Q(k + 1, Complex(iv.center())).re);
        ind.eps[k] = ms * s1 * s2;
        if (ind.eps[k] == 0) throw numerical_error("sign of the varying measure could not be resolved");

        Complex I(0);
        const CVec& v = fam.inner(k);
        for (size_t s = 0; s < v.size(); ++s) {
            Complex x(L.x[s]);
            I += L.w[s] * ind.Q(k, x) * v[s] / ind.Q(k + 1, x);
        }
        Real val = I.re * ind.eps[k];
        if (!(val > 0) || abs(I.im) > Real(Tolerances::current().check) * abs(I))
            throw structural_error("K_{n," + std::to_string(k) + "}^(-2) is not positive; the sign law failed");
        ind.K[k] = 1 / boost::multiprecision::sqrt(val);
    }
    return ind;
}

template <class Solve, class Family>
InducedSolve escalate_induced(const MopOptions& opt, Solve solve, Family family, const MultiIndex& n) {
    InducedSolve out;
    out.mop = solve(opt);
    const unsigned cap = 2 * (opt.max_bits ? opt.max_bits : 4 * working_bits());
    std::string failure;
    for (unsigned bits = out.mop.bits; bits <= cap; bits *= 2) {
        PrecisionGuard g(bits);
        try {
            if (bits != out.mop.bits) {
                MopOptions o = opt;
                o.max_bits = bits;
                out.mop = solve(o);
            }
            out.induced = build_induced(family(out.mop.Q), n);
            out.bits = bits;
            return out;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Structural && e.kind() != ErrorKind::Numerical) throw;
            failure = e.what();
        }
    }
    throw structural_error(failure);
}

}  // namespace

InducedFamily induced_polynomials(const SecondTypeFamily& fam, const MultiIndex& n) {
    if (fam.kind() != FamilyKind::Plain) throw config_error("induced_polynomials expects the plain family");
    return build_induced(fam, n);
}

InducedFamily tilde_induced(const SecondTypeFamily& tilde, const MultiIndex& n) {
    if (tilde.kind() != FamilyKind::Tilde) throw config_error("tilde_induced expects the tilde family");
    for (int k = 1; k <= tilde.m(); ++k)
        if (tilde.measure_sign(k) == 0)
            throw config_error("induced polynomials of complex perturbations are not supported");
    return build_induced(tilde, n);
}

InducedSolve solve_induced(const NikishinSystem& sys, const MultiIndex& n, const MopOptions& opt) {
    return escalate_induced(
        opt, [&](const MopOptions& o) { return solve_mop(sys, n, o); },
        [&](const Polynomial& Q) { return plain_family(sys, n, Q); }, n);
}

InducedSolve solve_tilde_induced(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                                 const MopOptions& opt) {
    if (!pert.real_flag()) throw config_error("induced polynomials of complex perturbations are not supported");
    return escalate_induced(
        opt, [&](const MopOptions& o) { return solve_perturbed_mop(sys, pert, n, o); },
        [&](const Polynomial& Q) { return tilde_family(sys, pert, n, Q); }, n);
}

// ---------------------------------------------------------------------------

Real verify_h_recursion(const InducedFamily& ind, int k, const CVec& zs) {
    if (k < 1 || k > ind.m()) throw config_error("h recursion needs 1 <= k <= m");
    const SecondTypeFamily& fam = *ind.family;
    const auto& L = fam.disc().level(k);
    const CVec& v = fam.inner(k);
    CVec ws(v.size());
    for (size_t s = 0; s < v.size(); ++s) {
        Complex x(L.x[s]);
        ws[s] = L.w[s] * ind.Q(k, x) * v[s] / ind.Q(k + 1, x);
    }
    Real worst = 0;
    for (const auto& z : zs) {
        Complex lhs = ind.H(k + 1, z);
        Complex rhs(0);
        for (size_t s = 0; s < ws.size(); ++s) rhs += ws[s] / over(z, L.x[s]);
        worst = std::max(worst, abs(lhs - rhs) / abs(lhs));
    }
    return worst;
}

Real psi_orthogonality_residual(const SecondTypeFamily& fam, const MultiIndex& n, int k, int r) {
    if (k < 1 || k + r > fam.m() || r < 0) throw config_error("orthogonality needs 1 <= k <= k+r <= m");
    const int top = n.at(k + r - 1);
    if (top == 0) return Real(0);
    const Discretization& d = fam.disc();
    CVec W = d.nested_weights(k, k + r);
    const auto& L = d.level(k);
    const CVec& v = fam.inner(k);
    CVec s(top, Complex(0));
    RVec a(top, Real(0));
    RVec t;
    for (size_t i = 0; i < v.size(); ++i) {
        cheb_values((L.x[i] - L.hull.center()) / L.hull.half(), top - 1, t);
        Complex wv = W[i] * v[i];
        Real awv = abs(wv);
        for (int nu = 0; nu < top; ++nu) {
            s[nu] += wv * t[nu];
            a[nu] += awv * boost::multiprecision::abs(t[nu]);
        }
    }
    Real worst = 0;
    for (int nu = 0; nu < top; ++nu)
        if (a[nu] > 0) worst = std::max(worst, abs(s[nu]) / a[nu]);
    return worst;
}

Real varying_orthogonality_residual(const InducedFamily& ind, int k) {
    const int Nk = ind.N(k);
    if (Nk == 0) return Real(0);
    const SecondTypeFamily& fam = *ind.family;
    const auto& L = fam.disc().level(k);
    const CVec& v = fam.inner(k);
    CVec s(Nk, Complex(0));
    RVec a(Nk, Real(0));
    RVec t;
    for (size_t i = 0; i < v.size(); ++i) {
        Complex x(L.x[i]);
        cheb_values((L.x[i] - L.hull.center()) / L.hull.half(), Nk - 1, t);
        Complex wv = L.w[i] * v[i] / ind.Q(k + 1, x);
        Real awv = abs(wv);
        for (int nu = 0; nu < Nk; ++nu) {
            s[nu] += wv * t[nu];
            a[nu] += awv * boost::multiprecision::abs(t[nu]);
        }
    }
    Real worst = 0;
    for (int nu = 0; nu < Nk; ++nu)
        if (a[nu] > 0) worst = std::max(worst, abs(s[nu]) / a[nu]);
    return worst;
}

bool h_constant_sign(const InducedFamily& ind, int k) {
    if (k == 1) return true;
    const Interval& iv = ind.family->disc().level(k).hull;
    RVec pts{iv.lo, iv.hi};
    RVec z;
    for (const auto& c : ind.zeros.at(k)) z.push_back(c.re);
    std::sort(z.begin(), z.end());
    if (z.empty()) pts.push_back(iv.center());
    else {
        pts.push_back((iv.lo + z.front()) / 2);
        pts.push_back((z.back() + iv.hi) / 2);
    }
    for (size_t i = 0; i + 1 < z.size(); ++i) pts.push_back((z[i] + z[i + 1]) / 2);
    int sg = 0;
    for (const auto& x : pts) {
        int v = sign_of(ind.H(k, Complex(x)).re);
        if (v == 0 || (sg != 0 && v != sg)) return false;
        sg = v;
    }
    return true;
}

Complex normalized_h(const InducedFamily& ind, int k, const Complex& z) {
    return ind.h(k + 1, z) * Real(ind.eps.at(k));
}

Complex inverse_sqrt_limit(const Interval& ab, const Complex& z) {
    // the product of principal roots has its cut exactly on [a, b]
    Complex s = sqrt(over(z, ab.hi)) * sqrt(over(z, ab.lo));
    return Complex(1) / s;
}

Real lemmarelation_residual(const SecondTypeFamily& R, const SecondTypeFamily& tilde,
                            const RationalPerturbation& pert, const CVec& zs) {
    if (R.kind() != FamilyKind::RFamily || tilde.kind() != FamilyKind::Tilde)
        throw config_error("lemmarelation compares an R-family with a tilde family");
    const int m = R.m();
    Real worst = 0;
    for (int k = 0; k <= m; ++k)
        for (const auto& z : zs) {
            Complex pr(1);
            for (int j = k + 1; j <= m; ++j) pr *= pert.pk(j)(z);
            Complex a = R(k, z), b = pr * tilde(k, z);
            worst = std::max(worst, abs(a - b) / abs(a));
        }
    return worst;
}

Real verify_eq13(const SecondTypeFamily& R, int k, const CVec& zs) {
    const int m = R.m();
    if (k < 2 || k > m) throw config_error("eq13 needs 2 <= k <= m");
    if (R.kind() == FamilyKind::Tilde) throw config_error("eq13 is stated over the unperturbed measures");
    const Discretization& d = R.disc();
    const auto& L1 = d.level(1);
    const CVec& Rn = R.inner(1);
    std::vector<CVec> phiw(k + 1);
    for (int l = 1; l <= k; ++l) {
        CVec W = d.nested_weights(1, l);
        phiw[l].resize(W.size());
        for (size_t i = 0; i < W.size(); ++i) phiw[l][i] = W[i] * Rn[i];
    }
    // theta_{l,k} = <sigma_k, ..., sigma_{l+1}>: upward chain of ones from level l+1
    std::vector<CVec> thw(k);
    for (int l = 1; l < k; ++l) {
        CVec c(d.level(l + 1).x.size(), Complex(1));
        for (int j = l + 1; j < k; ++j) {
            const auto& lo = d.level(j);
            const auto& up = d.level(j + 1);
            CVec nxt(up.x.size());
            for (size_t t = 0; t < nxt.size(); ++t) {
                Complex acc(0);
                for (size_t s = 0; s < lo.x.size(); ++s) acc += lo.w[s] * c[s] / (up.x[t] - lo.x[s]);
                nxt[t] = acc;
            }
            c = std::move(nxt);
        }
        const auto& Lk = d.level(k);
        thw[l].resize(c.size());
        for (size_t s = 0; s < c.size(); ++s) thw[l][s] = Lk.w[s] * c[s];
    }
    Real worst = 0;
    for (const auto& z : zs) {
        for (int l = 1; l <= m; ++l) d.check_clear(l, z);
        auto phi = [&](int l) {
            Complex acc(0);
            for (size_t i = 0; i < phiw[l].size(); ++i) acc += phiw[l][i] / over(z, L1.x[i]);
            return acc;
        };
        Complex rhs = phi(k) * Real(k % 2 == 1 ? 1 : -1);
        const auto& Lk = d.level(k);
        for (int l = 1; l < k; ++l) {
            Complex th(0);
            for (size_t s = 0; s < thw[l].size(); ++s) th += thw[l][s] / over(z, Lk.x[s]);
            rhs += th * phi(l) * Real(l % 2 == 1 ? 1 : -1);
        }
        Complex lhs = R(k, z);
        worst = std::max(worst, abs(lhs - rhs) / abs(lhs));
    }
    return worst;
}

Real lemma4_chain_residual(const SecondTypeFamily& R, const RationalPerturbation& pert, int max_order) {
    if (R.kind() != FamilyKind::RFamily) throw config_error("the chain conditions concern the R-family");
    const Discretization& d = R.disc();
    Real worst = 0;
    for (int k = 2; k <= R.m(); ++k) {
        const auto& L = d.level(k - 1);
        const CVec& v = R.inner(k - 1);
        for (const auto& [zk, tau] : grouped_zeros(pert, k)) {
            for (int i = 0; i < std::min(tau, max_order + 1); ++i) {
                Complex acc(0);
                Real sc = 0;
                for (size_t s = 0; s < v.size(); ++s) {
                    Complex t = L.w[s] * v[s] / powi(over(zk, L.x[s]), i + 1);
                    acc += t;
                    sc += abs(t);
                }
                if (sc > 0) worst = std::max(worst, abs(acc) / sc);
            }
        }
    }
    return worst;
}

}  // namespace nikishin
