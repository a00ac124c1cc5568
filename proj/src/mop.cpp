#include "nikishin/mop.hpp"

#include <algorithm>
#include <map>

namespace nikishin {

namespace {

// T_0..T_R at u.
void cheb_values(const Real& u, int R, RVec& t) {
    t.resize(R + 1);
    t[0] = 1;
    if (R >= 1) t[1] = u;
    for (int r = 2; r <= R; ++r) t[r] = 2 * u * t[r - 1] - t[r - 2];
}

struct Elimination {
    int degree = -1;
    CVec coeffs;  // Chebyshev coefficients, c_degree = 1
    Real condition = 0;
};

// Columns are processed in order; the first column whose reduced part falls
// below the pivot threshold fixes the degree, and its dependency on the
// earlier columns gives the polynomial.
Elimination eliminate(std::vector<CVec> M, int cols) {
    const int rows = static_cast<int>(M.size());
    Real amax = 0;
    for (auto& row : M) {
        Real s = 0;
        for (const auto& v : row) s = std::max(s, abs(v));
        if (s > 0)
            for (auto& v : row) v /= s;
        amax = std::max(amax, s > 0 ? Real(1) : Real(0));
    }
    const Real thresh = Tolerances::current().pivot() * (amax > 0 ? amax : Real(1));
    Elimination out;
    Real pmax = 0, pmin = -1;
    int np = 0;
    for (int j = 0; j < cols; ++j) {
        int best = -1;
        Real bv = 0;
        for (int r = np; r < rows; ++r) {
            Real a = abs(M[r][j]);
            if (a > bv) {
                bv = a;
                best = r;
            }
        }
        if (best < 0 || bv <= thresh) {
            out.degree = j;
            break;
        }
        std::swap(M[np], M[best]);
        const Complex piv = M[np][j];
        for (int r = np + 1; r < rows; ++r) {
            if (M[r][j].re == 0 && M[r][j].im == 0) continue;
            Complex f = M[r][j] / piv;
            for (int c = j; c < cols; ++c) M[r][c] -= f * M[np][c];
        }
        pmax = std::max(pmax, bv);
        pmin = pmin < 0 ? bv : std::min(pmin, bv);
        ++np;
    }
    if (out.degree < 0) throw numerical_error("moment matrix has full column rank; no nontrivial solution");
    const int d = out.degree;
    out.coeffs.assign(d + 1, Complex(0));
    out.coeffs[d] = Complex(1);
    for (int p = d - 1; p >= 0; --p) {
        Complex s = M[p][d];
        for (int q = p + 1; q < d; ++q) s += M[p][q] * out.coeffs[q];
        out.coeffs[p] = -s / M[p][p];
    }
    out.condition = pmin > 0 ? pmax / pmin : Real(1);
    return out;
}

MopResult solve_on(const Discretization& d, const MultiIndex& n) {
    if (static_cast<int>(n.size()) != d.m()) throw config_error("multi-index length differs from m");
    for (int v : n)
        if (v < 0) throw config_error("multi-index entries must be nonnegative");
    const int D = norm(n);
    const Interval& iv = d.level(1).hull;
    MopResult res;
    res.bits = working_bits();
    if (D == 0) {
        res.Q = Polynomial::chebyshev(iv, {Complex(1)});
        res.degree = 0;
        res.condition = 1;
        return res;
    }
    const auto& x = d.level(1).x;
    const int R = 2 * D;
    std::vector<CVec> mu(d.m());
    RVec t;
    for (int k = 1; k <= d.m(); ++k) {
        if (n[k - 1] == 0) continue;
        CVec W = d.nested_weights(1, k);
        CVec& m = mu[k - 1];
        m.assign(R + 1, Complex(0));
        for (size_t i = 0; i < x.size(); ++i) {
            cheb_values((x[i] - iv.center()) / iv.half(), R, t);
            for (int r = 0; r <= R; ++r) m[r] += W[i] * t[r];
        }
    }
    std::vector<CVec> M;
    for (int k = 1; k <= d.m(); ++k)
        for (int nu = 0; nu < n[k - 1]; ++nu) {
            CVec row(D + 1);
            for (int i = 0; i <= D; ++i) row[i] = (mu[k - 1][nu + i] + mu[k - 1][std::abs(nu - i)]) / Real(2);
            M.push_back(std::move(row));
        }
    Elimination e = eliminate(std::move(M), D + 1);
    // T_d(u) has x^d coefficient 2^(d-1)/h^d
    Real scale = e.degree == 0 ? Real(1) : pow(iv.half(), e.degree) / pow2(e.degree - 1);
    for (auto& c : e.coeffs) c *= scale;
    res.Q = Polynomial::chebyshev(iv, std::move(e.coeffs));
    res.degree = e.degree;
    res.condition = e.condition;
    res.residual = orthogonality_residual(d, res.Q, n);
    return res;
}

bool acceptable(const MopResult& r) {
    const Tolerances tol = Tolerances::current();
    return r.residual <= tol.orth() && r.condition <= pow2(static_cast<int>(working_bits()) / 2);
}

template <class Solve>
MopResult escalate(const MopOptions& opt, const std::string& what, Solve solve) {
    const unsigned base = working_bits();
    const unsigned max_bits = opt.max_bits ? opt.max_bits : 4 * base;
    MopResult last;
    std::string failure;
    for (unsigned bits = base; bits <= max_bits; bits *= 2) {
        PrecisionGuard g(bits);
        try {
            last = solve();
        } catch (const Error& e) {
            // a degree drop at low precision is usually spurious
            if (e.kind() != ErrorKind::Numerical) throw;
            failure = e.what();
            continue;
        }
        if (acceptable(last)) return last;
        failure = "residual " + to_string(last.residual, 6) + ", condition " + to_string(last.condition, 6);
    }
    throw numerical_error(what + ": " + failure + " at " + std::to_string(max_bits) + " bits; increase precision");
}

}  // namespace

Real orthogonality_residual(const Discretization& d, const Polynomial& Q, const MultiIndex& n) {
    const auto& x = d.level(1).x;
    const Interval& iv = d.level(1).hull;
    int R = *std::max_element(n.begin(), n.end());
    if (R == 0) return Real(0);
    CVec q(x.size());
    for (size_t i = 0; i < x.size(); ++i) q[i] = Q(Complex(x[i]));
    Real worst = 0;
    RVec t;
    for (int k = 1; k <= d.m(); ++k) {
        if (n[k - 1] == 0) continue;
        CVec W = d.nested_weights(1, k);
        CVec s(n[k - 1], Complex(0));
        RVec a(n[k - 1], Real(0));
        for (size_t i = 0; i < x.size(); ++i) {
            cheb_values((x[i] - iv.center()) / iv.half(), n[k - 1] - 1, t);
            Complex wq = W[i] * q[i];
            Real awq = abs(wq);
            for (int nu = 0; nu < n[k - 1]; ++nu) {
                s[nu] += wq * t[nu];
                a[nu] += awq * boost::multiprecision::abs(t[nu]);
            }
        }
        for (int nu = 0; nu < n[k - 1]; ++nu) worst = std::max(worst, a[nu] > 0 ? abs(s[nu]) / a[nu] : Real(0));
    }
    return worst;
}

MopResult solve_mop(const Discretization& d, const MultiIndex& n) {
    MopResult r = solve_on(d, n);
    if (r.degree != norm(n))
        throw numerical_error("Q_n for n=" + to_string(n) + " dropped to degree " + std::to_string(r.degree) +
                              "; the moment system is numerically singular");
    return r;
}

MopResult solve_mop(const NikishinSystem& sys, const MultiIndex& n, const MopOptions& opt) {
    if (!check_index_class(n)) throw config_error("n=" + to_string(n) + " is outside Z_+^m(*)");
    MopResult r = escalate(opt, "Q_n solve for n=" + to_string(n), [&] {
        Discretization d(sys, default_nodes(sys, n, 0, opt.extra_nodes));
        return solve_mop(d, n);
    });
    if (opt.check_zeros && r.degree > 0) {
        PrecisionGuard g(r.bits);
        ZeroReport z = classify_zeros(mop_zeros(r.Q), sys.hull(1));
        if (z.real_inside != r.degree || !z.simple)
            throw structural_error("Q_n for n=" + to_string(n) + " has " + std::to_string(z.real_inside) + " of " +
                                   std::to_string(r.degree) + " zeros real, simple and inside Delta_1");
    }
    return r;
}

MopResult solve_perturbed_mop(const Discretization& tilde, const MultiIndex& n) { return solve_on(tilde, n); }

MopResult solve_perturbed_mop(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                              const MopOptions& opt) {
    pert.validate(sys);
    int extra = 0;
    for (int v : pert.class_degrees()) extra += v;
    return escalate(opt, "perturbed solve for n=" + to_string(n), [&] {
        Discretization d(sys, default_nodes(sys, n, extra, opt.extra_nodes), &pert);
        return solve_on(d, n);
    });
}

CVec mop_zeros(const Polynomial& Q) {
    if (Q.degree() < 1) throw config_error("zeros need degree >= 1");
    return Q.roots();
}

ZeroReport classify_zeros(const CVec& zeros, const Interval& iv) {
    ZeroReport z;
    z.count = static_cast<int>(zeros.size());
    const Real tol = Tolerances::current().root();
    for (const auto& r : zeros)
        if (boost::multiprecision::abs(r.im) <= tol * (1 + abs(r)) && r.re > iv.lo && r.re < iv.hi) ++z.real_inside;
    z.min_gap = -1;
    for (size_t i = 0; i < zeros.size(); ++i)
        for (size_t j = i + 1; j < zeros.size(); ++j) {
            Real g = abs(zeros[i] - zeros[j]);
            if (z.min_gap < 0 || g < z.min_gap) z.min_gap = g;
        }
    if (z.min_gap >= 0 && z.min_gap <= 10 * tol) z.simple = false;
    return z;
}

Real lemma2_residual(const Discretization& plain, const RationalPerturbation& pert, const Polynomial& Qt,
                     const MultiIndex& n) {
    const int m = plain.m();
    std::vector<Polynomial> ps;
    for (int k = 1; k <= m; ++k) ps.push_back(pert.pk(k));
    Polynomial R = Qt * product(ps);
    MultiIndex reduced(m);
    for (int k = 1; k <= m; ++k) reduced[k - 1] = std::max(0, n[k - 1] - pert.deg_p(k + 1, m));
    return orthogonality_residual(plain, R, reduced);
}

std::vector<MultiIndex> lemma3_indices(const RationalPerturbation& pert, const MultiIndex& n) {
    const int m = static_cast<int>(n.size());
    int N = 0;
    for (int k = 1; k <= m; ++k) N += k * pert.pk(k).degree();
    std::vector<MultiIndex> out;
    for (int j = 0; j <= N; ++j) {
        MultiIndex nj(m);
        for (int k = 1; k <= m; ++k) nj[k - 1] = n[k - 1] - pert.deg_p(k + 1, m) + (k == 1 ? j : 0);
        for (int v : nj)
            if (v < 0) throw config_error("auxiliary index " + to_string(nj) + " has a negative component");
        if (!check_index_class(nj)) throw config_error("auxiliary index " + to_string(nj) + " is outside Z_+^m(*)");
        out.push_back(std::move(nj));
    }
    return out;
}

Lemma3Result lemma3_expansion(const NikishinSystem& sys, const RationalPerturbation& pert, const MultiIndex& n,
                              const Polynomial& Qt, const Discretization& plain) {
    if (pert.has_denominators()) throw config_error("the expansion is defined for polynomial perturbations");
    Lemma3Result out;
    out.indices = lemma3_indices(pert, n);
    out.N = static_cast<int>(out.indices.size()) - 1;
    const Interval& iv = sys.hull(1);
    std::vector<Polynomial> ps;
    for (int k = 1; k <= sys.m(); ++k) ps.push_back(pert.pk(k));
    Polynomial R = Qt.to_chebyshev(iv) * product(ps);
    CVec r = R.coeffs();
    const int n0 = norm(out.indices[0]);
    const int top = n0 + out.N;
    r.resize(std::max<int>(r.size(), top + 1));
    Real rmax = 0;
    for (const auto& c : r) rmax = std::max(rmax, abs(c));
    out.jprime = R.degree() - n0;
    out.lambda.assign(out.N + 1, Complex(0));
    for (int j = out.N; j >= 0; --j) {
        const int deg = n0 + j;
        Polynomial Q = solve_mop(plain, out.indices[j]).Q.to_chebyshev(iv);
        Complex lam = r[deg] / Q.coeffs()[deg];
        // terms above deg R_n are structurally zero
        if (j > out.jprime) lam = Complex(0);
        out.lambda[j] = lam;
        for (int i = 0; i <= deg; ++i) r[i] -= lam * Q.coeffs()[i];
    }
    Real resid = 0;
    for (const auto& c : r) resid = std::max(resid, abs(c));
    out.residual = rmax > 0 ? resid / rmax : resid;
    const Real tol = Real(Tolerances::current().exp);
    bool ok = out.jprime >= 0 && out.jprime <= out.N && abs(out.lambda[out.jprime] - Complex(1)) <= tol;
    const bool full = Qt.degree() == norm(n);
    ok = ok && (full == (abs(out.lambda[out.N] - Complex(1)) <= tol));
    out.structure_ok = ok;
    return out;
}

Real permutation_uniqueness(const Discretization& d, const MultiIndex& n, unsigned seed) {
    MopResult a = solve_on(d, n);
    MopResult b = solve_on(d.permuted(seed), n);
    const CVec &ca = a.Q.coeffs(), &cb = b.Q.coeffs();
    if (ca.size() != cb.size()) return Real(1);
    Real diff = 0, scale = 0;
    for (size_t i = 0; i < ca.size(); ++i) {
        diff = std::max(diff, abs(ca[i] - cb[i]));
        scale = std::max(scale, abs(ca[i]));
    }
    return scale > 0 ? diff / scale : diff;
}

std::vector<std::pair<Complex, int>> grouped_zeros(const RationalPerturbation& pert, int k) {
    std::vector<Polynomial> ps;
    for (int j = k; j <= pert.m(); ++j)
        if (pert.pk(j).degree() > 0) ps.push_back(pert.pk(j));
    std::vector<std::pair<Complex, int>> out;
    for (const auto& p : ps)
        for (const auto& r : p.roots()) {
            bool found = false;
            for (auto& g : out)
                if (abs(g.first - r) <= Real("1e-20") * (1 + abs(r))) {
                    ++g.second;
                    found = true;
                    break;
                }
            if (!found) out.emplace_back(r, 1);
        }
    return out;
}

Real lemma4_omega_residual(const Polynomial& R, const Polynomial& Qn0, const RationalPerturbation& pert,
                           const Interval& hull1, int max_order) {
    auto zs = grouped_zeros(pert, 1);
    const int M = 64;
    Real worst = 0;
    for (const auto& [z, tau] : zs) {
        Real rad = hull1.distance(z) / 2;
        for (const auto& [w, t2] : zs)
            if (abs(w - z) > 0) rad = std::min(rad, abs(w - z) / 2);
        // f^(i)(z) = i!/(2 pi i) \oint f(s)/(s-z)^(i+1) ds, trapezoid on the circle
        for (int i = 0; i < std::min(tau, max_order + 1); ++i) {
            Complex acc(0);
            Real amax = 0;
            for (int j = 0; j < M; ++j) {
                Real th = 2 * pi() * j / M;
                Complex e(boost::multiprecision::cos(th), boost::multiprecision::sin(th));
                Complex f = R(z + e * rad) / Qn0(z + e * rad);
                amax = std::max(amax, abs(f));
                acc += f * powi(conj(e), i);
            }
            // |f^(i)(z)| r^i / i! relative to max |f| on the circle
            Real v = abs(acc) / M / (amax > 0 ? amax : Real(1));
            worst = std::max(worst, v);
        }
    }
    return worst;
}

}  // namespace nikishin
