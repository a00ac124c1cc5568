#include "nikishin/polynomial.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <sstream>

namespace nikishin {

Interval::Interval(Real a, Real b) : lo(std::move(a)), hi(std::move(b)) {
    if (!(lo < hi)) throw config_error("interval requires lo < hi, got [" + to_string(lo, 8) + ", " + to_string(hi, 8) + "]");
}

Real Interval::distance(const Complex& z) const {
    Real dx = 0;
    if (z.re < lo) dx = lo - z.re;
    else if (z.re > hi) dx = z.re - hi;
    if (dx == 0) return boost::multiprecision::abs(z.im);
    return boost::multiprecision::sqrt(dx * dx + z.im * z.im);
}

Polynomial Polynomial::monomial(CVec coeffs) {
    Polynomial p;
    p.basis_ = Basis::Monomial;
    p.c_ = std::move(coeffs);
    if (p.c_.empty()) p.c_.push_back(Complex(0));
    return p;
}

Polynomial Polynomial::chebyshev(const Interval& iv, CVec coeffs) {
    Polynomial p;
    p.basis_ = Basis::Chebyshev;
    p.iv_ = iv;
    p.c_ = std::move(coeffs);
    if (p.c_.empty()) p.c_.push_back(Complex(0));
    return p;
}

Polynomial Polynomial::from_roots(const CVec& roots) {
    CVec c{Complex(1)};
    for (const auto& r : roots) {
        CVec n(c.size() + 1);
        for (size_t i = 0; i < c.size(); ++i) {
            n[i + 1] += c[i];
            n[i] -= c[i] * r;
        }
        c = std::move(n);
    }
    return monomial(std::move(c));
}

int Polynomial::degree() const {
    for (int i = static_cast<int>(c_.size()) - 1; i >= 0; --i)
        if (c_[i].re != 0 || c_[i].im != 0) return i;
    return -1;
}

bool Polynomial::is_real() const {
    for (const auto& c : c_)
        if (c.im != 0) return false;
    return true;
}

namespace {
Complex to_u(const Interval& iv, const Complex& z) { return (z - Complex(iv.center())) / iv.half(); }
}  // namespace

Complex Polynomial::operator()(const Complex& z) const {
    if (basis_ == Basis::Monomial) {
        Complex r(0);
        for (int i = static_cast<int>(c_.size()) - 1; i >= 0; --i) {
            r *= z;
            r += c_[i];
        }
        return r;
    }
    Complex u = to_u(iv_, z), u2 = u * Real(2);
    Complex b1(0), b2(0);
    for (int k = static_cast<int>(c_.size()) - 1; k >= 1; --k) {
        Complex b0 = c_[k] + u2 * b1 - b2;
        b2 = std::move(b1);
        b1 = std::move(b0);
    }
    return c_[0] + u * b1 - b2;
}

void Polynomial::eval(const Complex& z, Complex& p, Complex& dp) const {
    if (basis_ == Basis::Monomial) {
        p = Complex(0);
        dp = Complex(0);
        for (int i = static_cast<int>(c_.size()) - 1; i >= 0; --i) {
            dp *= z;
            dp += p;
            p *= z;
            p += c_[i];
        }
        return;
    }
    Complex u = to_u(iv_, z), u2 = u * Real(2);
    Complex b1(0), b2(0), d1(0), d2(0);
    for (int k = static_cast<int>(c_.size()) - 1; k >= 1; --k) {
        Complex d0 = b1 * Real(2) + u2 * d1 - d2;
        Complex b0 = c_[k] + u2 * b1 - b2;
        b2 = std::move(b1);
        b1 = std::move(b0);
        d2 = std::move(d1);
        d1 = std::move(d0);
    }
    p = c_[0] + u * b1 - b2;
    dp = (b1 + u * d1 - d2) / iv_.half();
}

Real Polynomial::abs_scale(const Complex& z) const {
    Real s = 0;
    if (basis_ == Basis::Monomial) {
        Real az = abs(z), zk = 1;
        for (const auto& c : c_) {
            s += abs(c) * zk;
            zk *= az;
        }
        return s;
    }
    // |T_k(u)| <= T_k(rho) on the Bernstein ellipse through u
    Complex u = to_u(iv_, z);
    Real rho = (abs(u + Complex(1)) + abs(u - Complex(1))) / 2;
    if (rho < 1) rho = 1;
    Real t0 = 1, t1 = rho;
    for (size_t k = 0; k < c_.size(); ++k) {
        if (k == 0) s += abs(c_[0]);
        else if (k == 1) s += abs(c_[1]) * t1;
        else {
            Real t2 = 2 * rho * t1 - t0;
            t0 = std::move(t1);
            t1 = std::move(t2);
            s += abs(c_[k]) * t1;
        }
    }
    return s;
}

Complex Polynomial::leading() const {
    int d = degree();
    if (d < 0) return Complex(0);
    if (basis_ == Basis::Monomial || d == 0) return c_[d];
    // T_d(u) = 2^(d-1) u^d + ..., u = (x - c)/h.
    return c_[d] * pow2(d - 1) / boost::multiprecision::pow(iv_.half(), d);
}

Polynomial Polynomial::monic() const {
    Complex l = leading();
    if (l.re == 0 && l.im == 0) throw numerical_error("cannot normalize the zero polynomial");
    Polynomial p = *this;
    p.c_.resize(degree() + 1);
    for (auto& c : p.c_) c /= l;
    return p;
}

Polynomial Polynomial::derivative() const {
    int d = degree();
    if (d <= 0) {
        Polynomial p = *this;
        p.c_ = {Complex(0)};
        return p;
    }
    if (basis_ == Basis::Monomial) {
        CVec c(d);
        for (int i = 1; i <= d; ++i) c[i - 1] = c_[i] * Real(i);
        return monomial(std::move(c));
    }
    CVec c(d + 1);
    for (int k = d; k >= 1; --k) c[k - 1] = (k + 1 <= d ? c[k + 1] : Complex(0)) + c_[k] * Real(2 * k);
    c[0] /= Real(2);
    c.resize(d);
    for (auto& v : c) v /= iv_.half();
    return chebyshev(iv_, std::move(c));
}

Polynomial Polynomial::to_monomial() const {
    if (basis_ == Basis::Monomial) return *this;
    int d = std::max(degree(), 0);
    // u = a x + b
    Real a = 1 / iv_.half(), b = -iv_.center() / iv_.half();
    CVec tm1{Complex(1)}, t{Complex(b), Complex(a)};
    CVec out(d + 1);
    out[0] += c_[0];
    if (d >= 1)
        for (int i = 0; i < 2; ++i) out[i] += c_[1] * t[i];
    for (int k = 2; k <= d; ++k) {
        CVec tn(k + 1);
        for (size_t i = 0; i < t.size(); ++i) {
            tn[i] += Real(2) * b * t[i];
            tn[i + 1] += Real(2) * a * t[i];
        }
        for (size_t i = 0; i < tm1.size(); ++i) tn[i] -= tm1[i];
        tm1 = std::move(t);
        t = std::move(tn);
        for (int i = 0; i <= k; ++i) out[i] += c_[k] * t[i];
    }
    return monomial(std::move(out));
}

Polynomial Polynomial::to_chebyshev(const Interval& iv) const {
    Polynomial m = to_monomial();
    int d = std::max(m.degree(), 0);
    Real h = iv.half(), c = iv.center();
    // Horner in the Chebyshev basis: r <- x*r + a_i, x = h u + c.
    CVec r{m.c_[d]};
    for (int i = d - 1; i >= 0; --i) {
        CVec n(r.size() + 1);
        for (size_t j = 0; j < r.size(); ++j) {
            n[j] += r[j] * c;
            Complex hr = r[j] * h;
            if (j == 0) n[1] += hr;
            else {
                n[j + 1] += hr / Real(2);
                n[j - 1] += hr / Real(2);
            }
        }
        n[0] += m.c_[i];
        r = std::move(n);
    }
    r.resize(d + 1);
    return chebyshev(iv, std::move(r));
}

Polynomial Polynomial::conjugate() const {
    Polynomial p = *this;
    for (auto& c : p.c_) c = nikishin::conj(c);
    return p;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    Polynomial a = to_monomial(), b = o.to_monomial();
    int da = std::max(a.degree(), 0), db = std::max(b.degree(), 0);
    CVec c(da + db + 1);
    for (int i = 0; i <= da; ++i)
        for (int j = 0; j <= db; ++j) c[i + j] += a.c_[i] * b.c_[j];
    Polynomial r = monomial(std::move(c));
    return basis_ == Basis::Chebyshev ? r.to_chebyshev(iv_) : r;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    Polynomial b = basis_ == Basis::Chebyshev ? o.to_chebyshev(iv_) : o.to_monomial();
    Polynomial r = *this;
    if (r.c_.size() < b.c_.size()) r.c_.resize(b.c_.size());
    for (size_t i = 0; i < b.c_.size(); ++i) r.c_[i] += b.c_[i];
    return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o.scaled(Complex(-1)); }

Polynomial Polynomial::scaled(const Complex& s) const {
    Polynomial r = *this;
    for (auto& c : r.c_) c *= s;
    return r;
}

std::string Polynomial::str(int digits) const {
    std::ostringstream os;
    os << (basis_ == Basis::Monomial ? "monomial" : "chebyshev") << "[";
    for (size_t i = 0; i < c_.size(); ++i) os << (i ? ", " : "") << to_string(c_[i], digits);
    os << "]";
    return os.str();
}

Polynomial product(const std::vector<Polynomial>& ps) {
    Polynomial r = Polynomial::constant(Complex(1));
    for (const auto& p : ps) r = r * p;
    return r;
}

// ---------------------------------------------------------------------------
// Roots

namespace {

using cd = std::complex<double>;

std::vector<cd> double_roots(const Polynomial& p, int d) {
    const CVec& c = p.coeffs();
    Real s = 0;
    for (int i = 0; i <= d; ++i) s = std::max(s, abs(c[i]));
    std::vector<cd> a(d + 1);
    for (int i = 0; i <= d; ++i) a[i] = (c[i] / s).to_std();
    if (d == 1) return {-a[0] / a[1]};
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(d, d);
    if (p.basis() == Polynomial::Basis::Monomial) {
        for (int i = 1; i < d; ++i) M(i, i - 1) = 1.0;
        for (int i = 0; i < d; ++i) M(i, d - 1) = -a[i] / a[d];
    } else {
        M(0, 1) = 1.0;
        for (int k = 1; k < d - 1; ++k) {
            M(k, k - 1) = 0.5;
            M(k, k + 1) = 0.5;
        }
        M(d - 1, d - 2) += 0.5;
        for (int j = 0; j < d; ++j) M(d - 1, j) -= a[j] / (2.0 * a[d]);
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, false);
    if (es.info() != Eigen::Success) throw numerical_error("companion eigenvalue solve failed");
    std::vector<cd> r(d);
    for (int i = 0; i < d; ++i) r[i] = es.eigenvalues()[i];
    if (p.basis() == Polynomial::Basis::Chebyshev) {
        double c0 = static_cast<double>(p.interval().center()), h = static_cast<double>(p.interval().half());
        for (auto& v : r) v = c0 + h * v;
    }
    return r;
}

Complex newton_polish(const Polynomial& p, Complex z) {
    Real tol = pow2(-static_cast<int>(working_bits()) + 8);
    Real last = -1;
    for (int it = 0; it < 200; ++it) {
        Complex v, dv;
        p.eval(z, v, dv);
        if (dv.re == 0 && dv.im == 0) break;
        Complex step = v / dv;
        Real as = abs(step);
        z -= step;
        if (as <= tol * (1 + abs(z))) break;
        if (last >= 0 && it > 20 && as >= last) break;
        last = as;
    }
    return z;
}

// Simultaneous Aberth-Ehrlich iteration at working precision; fallback when
// per-root Newton from double seeds stalls on clustered zeros.
CVec aberth(const Polynomial& p, const std::vector<cd>& seeds) {
    const size_t d = seeds.size();
    CVec z(d);
    for (size_t i = 0; i < d; ++i) {
        cd s = seeds[i];
        for (size_t j = 0; j < i; ++j)
            if (std::abs(s - seeds[j]) < 1e-12) s += cd(1e-9 * (i + 1), 1e-9);
        z[i] = Complex::from_std(s);
    }
    Real tol = pow2(-static_cast<int>(working_bits()) + 8);
    for (int it = 0; it < 1000; ++it) {
        Real worst = 0;
        for (size_t i = 0; i < d; ++i) {
            Complex v, dv;
            p.eval(z[i], v, dv);
            if (v.re == 0 && v.im == 0) continue;
            Complex ratio = v / dv, sum(0);
            for (size_t j = 0; j < d; ++j)
                if (j != i) sum += Complex(1) / (z[i] - z[j]);
            Complex w = ratio / (Complex(1) - ratio * sum);
            z[i] -= w;
            worst = std::max(worst, abs(w) / (1 + abs(z[i])));
        }
        if (worst <= tol) break;
    }
    return z;
}

CVec aberth_checked(const Polynomial& p, const std::vector<cd>& seeds, const Real& tol) {
    CVec z = aberth(p, seeds);
    for (const auto& r : z) {
        Real res = abs(p(r)) / p.abs_scale(r);
        if (!(res <= tol))
            throw numerical_error("root refinement did not converge near " + to_string(r, 12) +
                                  " (relative residual " + to_string(res, 6) + ")");
    }
    std::sort(z.begin(), z.end(), [](const Complex& a, const Complex& b) { return a.re != b.re ? a.re < b.re : a.im < b.im; });
    return z;
}

}  // namespace

CVec Polynomial::roots() const {
    int d = degree();
    if (d <= 0) return {};
    std::vector<cd> approx = double_roots(*this, d);
    std::sort(approx.begin(), approx.end(), [](const cd& a, const cd& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    // group near-coincident approximations; a cluster of size m is refined
    // as a simple root of the (m-1)th derivative
    std::vector<int> group(d, -1);
    int ng = 0;
    for (int i = 0; i < d; ++i) {
        if (group[i] >= 0) continue;
        group[i] = ng;
        for (int j = i + 1; j < d; ++j)
            if (group[j] < 0 && std::abs(approx[i] - approx[j]) < 1e-6 * (1 + std::abs(approx[i]))) group[j] = ng;
        ++ng;
    }
    CVec out, reps;
    Real tol = Tolerances::current().root();
    for (int g = 0; g < ng; ++g) {
        cd mean = 0;
        int m = 0;
        for (int i = 0; i < d; ++i)
            if (group[i] == g) {
                mean += approx[i];
                ++m;
            }
        mean /= double(m);
        Polynomial q = *this;
        for (int k = 1; k < m; ++k) q = q.derivative();
        Complex z = newton_polish(q, Complex::from_std(mean));
        Real res = abs((*this)(z)) / abs_scale(z);
        if (!(res <= tol)) return aberth_checked(*this, approx, tol);
        // two groups polishing onto one root means another root was lost
        for (const auto& r : reps)
            if (abs(r - z) <= tol * (1 + abs(z))) return aberth_checked(*this, approx, tol);
        reps.push_back(z);
        for (int k = 0; k < m; ++k) out.push_back(z);
    }
    return out;
}

}  // namespace nikishin
