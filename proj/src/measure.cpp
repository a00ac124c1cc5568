#include "nikishin/measure.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <map>
#include <mutex>
#include <sstream>

namespace nikishin {

namespace {
double g_delta_clear = 1e-3;
}

double delta_clear_factor() { return g_delta_clear; }
void set_delta_clear_factor(double f) {
    if (!(f > 0)) throw config_error("delta_clear factor must be positive");
    g_delta_clear = f;
}

// ---------------------------------------------------------------------------
// Weights

Weight Weight::chebyshev_first() {
    Weight w;
    w.kind = Kind::ChebyshevFirst;
    return w;
}

Weight Weight::chebyshev_second() {
    Weight w;
    w.kind = Kind::ChebyshevSecond;
    return w;
}

Weight Weight::legendre() { return jacobi(0, 0); }

Weight Weight::jacobi(Real a, Real b) {
    if (!(a > -1 && b > -1)) throw config_error("Jacobi exponents must exceed -1");
    Weight w;
    w.kind = Kind::Jacobi;
    w.alpha = std::move(a);
    w.beta = std::move(b);
    return w;
}

Weight Weight::modulated_jacobi(Real a, Real b, Polynomial q) {
    Weight w = jacobi(std::move(a), std::move(b));
    w.kind = Kind::ModulatedJacobi;
    if (!q.is_real()) throw config_error("weight modulus must have real coefficients");
    if (q.degree() < 0) throw config_error("weight modulus must be nonzero");
    w.modulus = q.to_monomial();
    return w;
}

Real Weight::exp_a() const {
    switch (kind) {
        case Kind::ChebyshevFirst: return Real(-1) / 2;
        case Kind::ChebyshevSecond: return Real(1) / 2;
        default: return alpha;
    }
}

Real Weight::exp_b() const {
    switch (kind) {
        case Kind::ChebyshevFirst: return Real(-1) / 2;
        case Kind::ChebyshevSecond: return Real(1) / 2;
        default: return beta;
    }
}

std::string Weight::signature() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::ChebyshevFirst: os << "cheb1"; break;
        case Kind::ChebyshevSecond: os << "cheb2"; break;
        case Kind::Jacobi: os << "jacobi(" << to_string(alpha, 30) << "," << to_string(beta, 30) << ")"; break;
        case Kind::ModulatedJacobi:
            os << "modjacobi(" << to_string(alpha, 30) << "," << to_string(beta, 30) << "," << modulus.str(30) << ")";
            break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Measures

Measure::Measure(Interval iv, Weight w, int s, std::vector<MassPoint> a)
    : interval(std::move(iv)), weight(std::move(w)), sign(s), atoms(std::move(a)) {
    validate();
}

void Measure::validate() const {
    if (sign != 1 && sign != -1) throw config_error("measure sign must be +1 or -1");
    for (const auto& a : atoms) {
        if (interval.contains(a.location))
            throw config_error("mass point at " + to_string(a.location, 10) + " lies inside the interval");
        if (a.mass == 0) throw config_error("mass point with zero mass");
        if (sign_of(a.mass) != sign) throw config_error("mass point sign differs from the measure sign");
    }
}

Interval Measure::hull() const {
    Interval h = interval;
    for (const auto& a : atoms) {
        if (a.location < h.lo) h.lo = a.location;
        if (a.location > h.hi) h.hi = a.location;
    }
    return h;
}

Real Measure::support_distance(const Complex& z) const {
    Real d = interval.distance(z);
    for (const auto& a : atoms) d = std::min(d, abs(z - Complex(a.location)));
    return d;
}

Real Measure::delta_clear() const { return interval.length() * Real(delta_clear_factor()); }

std::string Measure::signature() const {
    std::ostringstream os;
    os << "[" << to_string(interval.lo, 30) << "," << to_string(interval.hi, 30) << "]" << weight.signature()
       << "s" << sign;
    for (const auto& a : atoms) os << "@" << to_string(a.location, 30) << ":" << to_string(a.mass, 30);
    return os.str();
}

// ---------------------------------------------------------------------------
// Recurrences

Recurrence jacobi_recurrence(const Real& al_in, const Real& be_in, int n) {
    const Real al = lift(al_in), be = lift(be_in);
    Recurrence r;
    r.a.resize(n);
    r.b.resize(n);
    Real s = al + be;
    r.b[0] = boost::multiprecision::pow(Real(2), s + 1) * boost::multiprecision::tgamma(al + 1) *
             boost::multiprecision::tgamma(be + 1) / boost::multiprecision::tgamma(s + 2);
    for (int k = 0; k < n; ++k) {
        if (k == 0) r.a[0] = (be - al) / (s + 2);
        else {
            Real t = 2 * k + s;
            r.a[k] = (be * be - al * al) / (t * (t + 2));
        }
        if (k == 1) r.b[1] = 4 * (1 + al) * (1 + be) / ((2 + s) * (2 + s) * (3 + s));
        else if (k >= 2) {
            Real t = 2 * k + s;
            r.b[k] = 4 * k * (k + al) * (k + be) * (k + s) / (t * t * (t + 1) * (t - 1));
        }
    }
    return r;
}

namespace {

struct Nodes {
    RVec x, w;
};

// Gauss nodes and weights of a monic recurrence: double-precision
// eigenvalues of the Jacobi matrix polished by Newton on p_n, Christoffel
// weights from the orthonormal recurrence.
Nodes gauss_from_recurrence(const Recurrence& r, int n) {
    Eigen::VectorXd diag(n), sub(std::max(n - 1, 1));
    for (int k = 0; k < n; ++k) diag[k] = static_cast<double>(r.a[k]);
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(r.b[k]));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub.head(std::max(n - 1, 0)), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw numerical_error("Jacobi matrix eigenvalue solve failed");

    Nodes out;
    out.x.resize(n);
    out.w.resize(n);
    Real tol = pow2(-static_cast<int>(working_bits()) + 6);
    RVec sb(n);
    for (int k = 1; k < n; ++k) sb[k] = boost::multiprecision::sqrt(r.b[k]);
    Real p0n = 1 / boost::multiprecision::sqrt(r.b[0]);
    for (int j = 0; j < n; ++j) {
        Real x = es.eigenvalues()[j];
        for (int it = 0; it < 60; ++it) {
            Real pm1 = 0, p = 1, dpm1 = 0, dp = 0;
            for (int k = 0; k < n; ++k) {
                Real bk = k == 0 ? Real(0) : r.b[k];
                Real pn = (x - r.a[k]) * p - bk * pm1;
                Real dpn = p + (x - r.a[k]) * dp - bk * dpm1;
                pm1 = std::move(p);
                p = std::move(pn);
                dpm1 = std::move(dp);
                dp = std::move(dpn);
            }
            Real step = p / dp;
            x -= step;
            if (boost::multiprecision::abs(step) <= tol) break;
        }
        out.x[j] = x;
        Real qm1 = 0, q = p0n, sum = q * q;
        for (int k = 0; k + 1 < n; ++k) {
            Real qn = ((x - r.a[k]) * q - (k == 0 ? Real(0) : sb[k]) * qm1) / sb[k + 1];
            qm1 = std::move(q);
            q = std::move(qn);
            sum += q * q;
        }
        out.w[j] = 1 / sum;
    }
    return out;
}

}  // namespace

Recurrence weight_recurrence(const Weight& w, int n) {
    if (w.kind != Weight::Kind::ModulatedJacobi) return jacobi_recurrence(w.exp_a(), w.exp_b(), n);
    int dq = std::max(w.modulus.degree(), 0);
    int M = n + dq / 2 + 2;
    Nodes base = gauss_from_recurrence(jacobi_recurrence(w.alpha, w.beta, M), M);
    RVec v(M);
    for (int j = 0; j < M; ++j) {
        Complex q = w.modulus(Complex(base.x[j]));
        if (!(q.re > 0))
            throw numerical_error("weight modulus is not positive at u=" + to_string(base.x[j], 12) +
                                  "; the recurrence broke down (increase precision or fix the modulus)");
        v[j] = base.w[j] * q.re;
    }
    // discretized Stieltjes procedure
    Recurrence r;
    r.a.resize(n);
    r.b.resize(n);
    RVec pm1(M, Real(0)), p(M, Real(1));
    Real prev = 0;
    for (int k = 0; k < n; ++k) {
        Real nrm = 0, mom = 0;
        for (int j = 0; j < M; ++j) {
            Real t = v[j] * p[j] * p[j];
            nrm += t;
            mom += t * base.x[j];
        }
        if (!(nrm > 0)) throw numerical_error("recurrence breakdown: nonpositive norm; increase precision");
        r.a[k] = mom / nrm;
        r.b[k] = k == 0 ? nrm : nrm / prev;
        prev = nrm;
        for (int j = 0; j < M; ++j) {
            Real pn = (base.x[j] - r.a[k]) * p[j] - (k == 0 ? Real(0) : r.b[k]) * pm1[j];
            pm1[j] = std::move(p[j]);
            p[j] = std::move(pn);
        }
    }
    return r;
}

QuadratureRule build_quadrature(const Measure& m, int n_nodes, unsigned precision_bits) {
    if (n_nodes < 2) throw config_error("quadrature needs at least 2 nodes");
    if (precision_bits < 64) throw config_error("quadrature precision must be at least 64 bits");
    PrecisionGuard guard(precision_bits);
    m.validate();
    Recurrence r = weight_recurrence(m.weight, n_nodes);
    Nodes g = gauss_from_recurrence(r, n_nodes);
    QuadratureRule rule;
    rule.precision_bits = precision_bits;
    rule.interval = m.interval;
    rule.atoms = m.atoms;
    rule.delta_clear = m.delta_clear();
    rule.n_continuous = n_nodes;
    Real c = m.interval.center(), h = m.interval.half();
    for (int j = 0; j < n_nodes; ++j) {
        rule.nodes.push_back(c + h * g.x[j]);
        rule.weights.push_back(m.sign > 0 ? g.w[j] : Real(-g.w[j]));
    }
    for (const auto& a : m.atoms) {
        rule.nodes.push_back(lift(a.location));
        rule.weights.push_back(lift(a.mass));
    }
    return rule;
}

std::shared_ptr<const QuadratureRule> cached_rule(const Measure& m, int n_nodes) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const QuadratureRule>> cache;
    unsigned bits = working_bits();
    std::string key = m.signature() + "#" + std::to_string(n_nodes) + "#" + std::to_string(bits);
    {
        std::lock_guard<std::mutex> lk(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto rule = std::make_shared<const QuadratureRule>(build_quadrature(m, n_nodes, bits));
    std::lock_guard<std::mutex> lk(mu);
    return cache.emplace(key, rule).first->second;
}

Complex integrate(const QuadratureRule& rule, const std::function<Complex(const Real&)>& f) {
    Complex s(0);
    for (size_t j = 0; j < rule.size(); ++j) {
        Complex v = f(rule.nodes[j]);
        if (!isfinite(v)) throw numerical_error("integrand is not finite at node x=" + to_string(rule.nodes[j], 20));
        s += v * rule.weights[j];
    }
    return s;
}

Complex cauchy_transform(const QuadratureRule& rule, const Complex& z) {
    Real d = rule.interval.distance(z);
    for (const auto& a : rule.atoms) d = std::min(d, abs(z - Complex(a.location)));
    if (d < rule.delta_clear)
        throw proximity_error("Cauchy transform requested at " + to_string(z, 12) + ", within " +
                              to_string(rule.delta_clear, 6) + " of the support");
    Complex s(0);
    for (size_t j = 0; j < rule.size(); ++j) s += Complex(rule.weights[j]) / (z - Complex(rule.nodes[j]));
    return s;
}

RVec moments(const QuadratureRule& rule, int max_degree) {
    if (max_degree > 2 * static_cast<int>(rule.n_continuous) - 1)
        throw config_error("moment degree " + std::to_string(max_degree) + " exceeds the exactness bound " +
                           std::to_string(2 * rule.n_continuous - 1));
    RVec out(max_degree + 1, Real(0));
    for (size_t j = 0; j < rule.size(); ++j) {
        Real p = rule.weights[j];
        for (int k = 0; k <= max_degree; ++k) {
            out[k] += p;
            p *= rule.nodes[j];
        }
    }
    return out;
}

}  // namespace nikishin
