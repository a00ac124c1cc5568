#include "nikishin/limits.hpp"

namespace nikishin {

using boost::multiprecision::abs;
using boost::multiprecision::sqrt;

int PerturbationRoots::tail_degree(int k) const {
    int d = 0;
    for (int j = k; j <= m(); ++j) d += degs.at(j - 1);
    return d;
}

Complex PerturbationRoots::tail_value(int k, const Complex& z) const {
    Complex p(1);
    if (k > m()) return p;
    for (const auto& [t, tau] : group(k)) p *= powi(z - t, tau);
    return p;
}

PerturbationRoots PerturbationRoots::from_polynomials(const std::vector<Polynomial>& p) {
    PerturbationRoots r;
    const int m = static_cast<int>(p.size());
    std::vector<CVec> roots(m);
    for (int k = 0; k < m; ++k) {
        r.degs.push_back(p[k].degree());
        if (p[k].degree() > 0) roots[k] = p[k].roots();
    }
    for (int k = 0; k < m; ++k) {
        std::vector<std::pair<Complex, int>> g;
        for (int j = k; j < m; ++j)
            for (const auto& t : roots[j]) {
                bool found = false;
                for (auto& e : g)
                    if (abs(e.first - t) <= Real("1e-20") * (1 + abs(t))) {
                        ++e.second;
                        found = true;
                        break;
                    }
                if (!found) g.emplace_back(t, 1);
            }
        r.groups.push_back(std::move(g));
    }
    return r;
}

PerturbationRoots PerturbationRoots::none(int m) {
    PerturbationRoots r;
    r.degs.assign(m, 0);
    r.groups.assign(m, {});
    return r;
}

int DeltaTable::Delta(int k, int l) const {
    auto d = [&](int i) { return delta.at(i); };
    if (k == 1) return l == 1 ? 1 : -d(1);
    if (l >= k + 1) return -d(k) * d(k - 1);
    if (l == k - 1 || l == k) return d(k - 1);
    return 1;
}

int DeltaTable::ratio_eps(int k, int l) const {
    int p = 1;
    for (int i = 1; i <= k; ++i) p *= Delta(i, l);
    return p;
}

int DeltaTable::Xi(int k, const PerturbationRoots& roots) const {
    int x = 1;
    for (int j = 1; j <= m - 1; ++j) {
        int d = 1;
        for (int i = 1; i <= k - 1; ++i) d *= Delta(i, j);
        if (d < 0 && roots.tail_degree(j + 1) % 2) x = -x;
    }
    return x;
}

DeltaTable delta_table(const std::vector<Interval>& hulls) {
    DeltaTable t;
    t.m = static_cast<int>(hulls.size());
    t.delta.assign(t.m + 1, 1);
    for (int k = 1; k < t.m; ++k) t.delta[k] = hulls[k - 1].hi < hulls[k].lo ? 1 : -1;
    return t;
}

DeltaTable delta_table(const SurfaceSpec& spec) { return delta_table(spec.slits); }

// ---------------------------------------------------------------------------

LimitSuite::LimitSuite(std::shared_ptr<const CoveringMap> cover, std::vector<bool> flips)
    : cover_(std::move(cover)), table_(delta_table(cover_->spec())) {
    flips.resize(m(), false);
    if (flips[0]) throw config_error("psi^(1) has a fixed sign convention");
    for (int l = 1; l <= m(); ++l) psi_.emplace_back(cover_, l, flips[l - 1]);
}

Real LimitSuite::c(int l, int k) const {
    if (k <= 0 || k > m()) return Real(1);
    Real p = 1;
    for (int nu = k; nu <= m(); ++nu) p *= abs(psi(l).lead(nu));
    return p;
}

Real LimitSuite::kappa(int l, int k) const { return c(l, k) / sqrt(c(l, k - 1) * c(l, k + 1)); }

int LimitSuite::delta_F(int k, int l) const {
    int s = 1;
    for (int nu = k; nu <= m(); ++nu) s *= psi(l).sg(nu);
    return s;
}

Complex LimitSuite::f_tilde(int k, int l, const Complex& z) const {
    Complex p(delta_F(k, l));
    for (int nu = k; nu <= m(); ++nu) p *= psi(l)(nu, z);
    return p / c(l, k);
}

Complex LimitSuite::varphi(int j, int s, const Complex& z) const {
    return Complex(Real(psi(j).sg(s))) / (c(j, 1) * psi(j)(s, z));
}

namespace {

// Z(w) - Z(t) = (w - t) D(w, t).
Complex difference_factor(const CoveringMap& cv, const Complex& w, const Complex& t) {
    Complex d(1);
    for (int i = 1; i <= cv.m(); ++i) {
        Complex b(cv.B(i));
        d -= Complex(cv.A(i)) / ((w - b) * (t - b));
    }
    return d;
}

}  // namespace

Complex LimitSuite::varphi_divided(int s, const Complex& z, const Complex& t) const {
    // phi_s = sg(psi_s(inf)) (w - B_1) / (c_1 c)
    const auto& p = psi(1);
    Complex w = cover_->preimage(s, z), u = cover_->preimage(s, t);
    Real sigma = Real(p.sg(s)) / (c(1, 1) * p.c());
    return Complex(sigma) / difference_factor(*cover_, w, u);
}

Complex LimitSuite::script_F(const PerturbationRoots& r, const Complex& z) const {
    Complex f(1);
    for (const auto& [t, tau] : r.group(1)) f *= powi(varphi_divided(0, z, t), tau);
    for (int k = 2; k <= m(); ++k) {
        if (r.group(k).empty()) continue;
        const auto& p = psi(k - 1);
        Complex a = p(0, z);
        for (const auto& [t, tau] : r.group(k)) f *= powi(Complex(1) - a / p(k - 1, t), tau);
    }
    return f;
}

Complex LimitSuite::script_F_rational(const PerturbationRoots& p, const PerturbationRoots& q,
                                      const Complex& z) const {
    return script_F(p, z) / script_F(q, z);
}

Complex LimitSuite::level_product(const PerturbationRoots& r, int s, const Complex& z) const {
    const int dl = delta();
    auto d = [&](int sheet) { return sheet <= 1 ? 1 : dl; };
    Complex X = Complex(Real(d(s))) * varphi(1, s, z);
    Complex prod(1);
    for (int j = 1; j <= m(); ++j) {
        if (r.group(j).empty()) continue;
        Complex den = j >= 2 ? varphi(j - 1, s, z) : Complex(1);
        for (const auto& [t, tau] : r.group(j)) {
            Complex term = j == s + 1 ? Complex(Real(d(s))) * varphi_divided(s, z, t)
                                      : X - Complex(Real(d(j - 1))) * varphi(1, j - 1, t);
            prod *= powi(term / den, tau);
        }
    }
    return prod;
}

Complex LimitSuite::G(const PerturbationRoots& r, int k, const Complex& z) const {
    if (k < 0 || k > m() - 1) throw config_error("G_k needs 0 <= k <= m-1");
    if (k == 0) return script_F(r, z);
    return Complex(Real(table_.Xi(k + 1, r))) * level_product(r, k, z);
}

Complex LimitSuite::G_rational(const PerturbationRoots& p, const PerturbationRoots& q, int k,
                               const Complex& z) const {
    return G(p, k, z) / G(q, k, z);
}

Complex LimitSuite::at_infinity(const std::function<Complex(const Complex&)>& f) {
    // The +-iR average is even in 1/R; Neville extrapolation in x = R^-2 to x = 0.
    // Radii stay moderate so sheet-k preimages keep full relative accuracy.
    const int n = 5;
    RVec x(n);
    CVec g(n);
    for (int j = 0; j < n; ++j) {
        Real R = pow2(16 + j);
        x[j] = 1 / (R * R);
        g[j] = (f(Complex(Real(0), R)) + f(Complex(Real(0), -R))) / Real(2);
    }
    for (int level = 1; level < n; ++level)
        for (int j = n - 1; j >= level; --j)
            g[j] = (Complex(x[j - level]) * g[j] - Complex(x[j]) * g[j - 1]) / (x[j - level] - x[j]);
    return g[n - 1];
}

Complex LimitSuite::G_inf(const PerturbationRoots& r, int k) const {
    return at_infinity([&](const Complex& z) { return G(r, k, z); });
}

Complex LimitSuite::F_k(const PerturbationRoots& r, int k, const Complex& z) const {
    if (k < 1 || k > m()) throw config_error("F_k needs 1 <= k <= m");
    Complex f(1);
    for (int i = 0; i < k; ++i) f *= G(r, i, z) / G_inf(r, i);
    return f;
}

Complex LimitSuite::F_k_rational(const PerturbationRoots& p, const PerturbationRoots& q, int k,
                                 const Complex& z) const {
    return F_k(p, k, z) / F_k(q, k, z);
}

Real LimitSuite::K_ratio_limit(const PerturbationRoots& r, const std::vector<int>& signs, int k) const {
    if (k < 1 || k > m() - 1) throw config_error("K-ratio limit needs 1 <= k <= m-1");
    int s = 1;
    for (int i = 1; i <= k; ++i) s *= signs.at(i - 1);
    return Real(s) / G_inf(r, k).re;
}

Real LimitSuite::K_ratio_limit_rational(const PerturbationRoots& p, const PerturbationRoots& q,
                                        const std::vector<int>& signs, int k) const {
    if (k < 1 || k > m() - 1) throw config_error("K-ratio limit needs 1 <= k <= m-1");
    int s = 1;
    for (int i = 1; i <= k; ++i) s *= signs.at(i - 1);
    return Real(s) * G_inf(q, k).re / G_inf(p, k).re;
}

// ---------------------------------------------------------------------------

namespace {

Real rel_gap(const Complex& a, const Complex& b) {
    Real s = std::max(abs(a), abs(b));
    return s > 0 ? abs(a - b) / s : Real(0);
}

}  // namespace

Real neweq_chain_residual(const LimitSuite& s, int k, const CVec& z, const CVec& t) {
    if (k < 2 || k > s.m()) throw config_error("neweq chain needs 2 <= k <= m");
    const int d = k == 2 ? 1 : s.delta();
    const auto& p = s.psi(k - 1);
    Real worst = 0;
    for (const auto& x : z)
        for (const auto& y : t) {
            Complex lhs = (s.varphi(1, 0, x) - Complex(Real(d)) * s.varphi(1, k - 1, y)) / s.f_tilde(1, k - 1, x);
            Complex rhs = Complex(1) - p(0, x) / p(k - 1, y);
            worst = std::max(worst, rel_gap(lhs, rhs));
        }
    return worst;
}

Real varphi_consistency(const LimitSuite& s, int k, const CVec& z) {
    Real kap = 1;
    for (int i = 1; i < k; ++i) kap *= s.kappa(1, i);
    Real worst = 0;
    for (const auto& x : z) {
        Complex lhs = s.varphi(1, k - 1, x);
        Complex rhs = s.f_tilde(k, 1, x) / (kap * kap * s.f_tilde(k - 1, 1, x));
        worst = std::max(worst, rel_gap(lhs, rhs));
    }
    return worst;
}

Real relation_Fk_residual(const LimitSuite& s, const PerturbationRoots& r, int k, const CVec& z) {
    const int m = s.m();
    if (k < 1 || k > m - 1) throw config_error("relationFk needs 1 <= k <= m-1");
    const int dl = s.delta();
    // p_Lambda(X_i) / (prod_j (phi_i^(j))^{deg(p_{j+1}...p_m)} (p_{i+1}...p_m)) with plain subtraction
    auto step = [&](int i, const Complex& x) {
        Complex X = Complex(Real(i <= 1 ? 1 : dl)) * s.varphi(1, i, x);
        Complex p(1);
        for (int j = 1; j <= m; ++j)
            for (const auto& [t, tau] : r.group(j)) {
                Complex T = Complex(Real(j - 1 <= 1 ? 1 : dl)) * s.varphi(1, j - 1, t);
                p *= powi(X - T, tau);
            }
        Complex den = r.tail_value(i + 1, x);
        for (int j = 1; j <= m - 1; ++j) den *= powi(s.varphi(j, i, x), r.tail_degree(j + 1));
        return p / den;
    };
    std::vector<Complex> norm(k + 1);
    for (int i = 1; i <= k; ++i) norm[i] = LimitSuite::at_infinity([&](const Complex& x) { return step(i, x); });
    Real worst = 0;
    for (const auto& x : z) {
        Complex rec = s.script_F(r, x);
        for (int i = 1; i <= k; ++i) rec *= step(i, x) / norm[i];
        worst = std::max(worst, rel_gap(rec, s.F_k(r, k + 1, x)));
    }
    return worst;
}

}  // namespace nikishin
