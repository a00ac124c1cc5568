#include "nikishin/system.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace nikishin {

int norm(const MultiIndex& n) { return std::accumulate(n.begin(), n.end(), 0); }

std::string to_string(const MultiIndex& n) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < n.size(); ++i) os << (i ? "," : "") << n[i];
    os << ")";
    return os.str();
}

int NikishinSystem::delta(int k) const {
    if (k < 1 || k >= m()) throw config_error("delta_k needs 1 <= k < m");
    return hull(k).hi < hull(k + 1).lo ? 1 : -1;
}

NikishinSystem build_system(std::vector<Measure> measures) {
    if (measures.empty()) throw config_error("a Nikishin system needs at least one measure");
    NikishinSystem s;
    for (auto& m : measures) {
        m.validate();
        s.hulls.push_back(m.hull());
    }
    for (size_t k = 0; k + 1 < measures.size(); ++k)
        if (s.hulls[k].intersects(s.hulls[k + 1]))
            throw config_error("supports of sigma_" + std::to_string(k + 1) + " and sigma_" + std::to_string(k + 2) +
                               " overlap; consecutive hulls must be disjoint");
    s.measures = std::move(measures);
    return s;
}

// ---------------------------------------------------------------------------
// Perturbations

RationalPerturbation RationalPerturbation::trivial(int m) {
    RationalPerturbation r;
    r.p.assign(m, Polynomial::constant(Complex(1)));
    r.q.assign(m, Polynomial::constant(Complex(1)));
    return r;
}

RationalPerturbation RationalPerturbation::polynomial(std::vector<Polynomial> p) {
    RationalPerturbation r = trivial(static_cast<int>(p.size()));
    for (size_t k = 0; k < p.size(); ++k) {
        if (p[k].degree() < 0) throw config_error("perturbation p_" + std::to_string(k + 1) + " is zero");
        r.p[k] = p[k].to_monomial().monic();
    }
    return r;
}

RationalPerturbation RationalPerturbation::rational(std::vector<Polynomial> p, std::vector<Polynomial> q) {
    if (p.size() != q.size()) throw config_error("numerator and denominator counts differ");
    RationalPerturbation r = polynomial(std::move(p));
    for (size_t k = 0; k < q.size(); ++k) {
        if (q[k].degree() < 0) throw config_error("denominator q_" + std::to_string(k + 1) + " is zero");
        r.q[k] = q[k].to_monomial().monic();
    }
    return r;
}

bool RationalPerturbation::real_flag() const {
    for (size_t k = 0; k < p.size(); ++k)
        if (!p[k].is_real() || !q[k].is_real()) return false;
    return true;
}

bool RationalPerturbation::is_trivial() const {
    for (size_t k = 0; k < p.size(); ++k)
        if (p[k].degree() > 0 || q[k].degree() > 0) return false;
    return true;
}

bool RationalPerturbation::has_denominators() const {
    return std::any_of(q.begin(), q.end(), [](const Polynomial& x) { return x.degree() > 0; });
}

int RationalPerturbation::deg_p(int from, int to) const {
    int d = 0;
    for (int k = std::max(from, 1); k <= std::min(to, m()); ++k) d += pk(k).degree();
    return d;
}

std::vector<int> RationalPerturbation::class_degrees() const {
    std::vector<int> d(p.size());
    for (size_t k = 0; k < p.size(); ++k) d[k] = p[k].degree() + q[k].degree();
    return d;
}

void RationalPerturbation::validate(const NikishinSystem& sys) const {
    if (m() != sys.m() || static_cast<int>(q.size()) != sys.m())
        throw config_error("perturbation has " + std::to_string(m()) + " levels, system has " +
                           std::to_string(sys.m()));
    for (int k = 1; k <= m(); ++k) {
        CVec pr = pk(k).degree() > 0 ? pk(k).roots() : CVec{};
        CVec qr = qk(k).degree() > 0 ? qk(k).roots() : CVec{};
        auto check = [&](const CVec& roots, const char* name) {
            for (const auto& r : roots)
                for (int j = 1; j <= sys.m(); ++j)
                    if (sys.hull(j).distance(r) < sys.sigma(j).delta_clear())
                        throw config_error(std::string("root ") + to_string(r, 10) + " of " + name +
                                           std::to_string(k) + " is too close to supp sigma_" + std::to_string(j));
        };
        check(pr, "p_");
        check(qr, "q_");
        for (const auto& a : pr)
            for (const auto& b : qr)
                if (abs(a - b) < Real("1e-10") * (1 + abs(a)))
                    throw config_error("p_" + std::to_string(k) + " and q_" + std::to_string(k) +
                                       " share the root " + to_string(a, 10));
    }
}

Complex RationalPerturbation::factor(int k, const Real& x) const {
    Complex z(x);
    if (qk(k).degree() <= 0) return pk(k)(z) / qk(k).leading();
    return pk(k)(z) / qk(k)(z);
}

int RationalPerturbation::sign_on_support(const NikishinSystem& sys, int k) const {
    if (!pk(k).is_real() || !qk(k).is_real()) throw config_error("sign of a complex perturbation is undefined");
    const Measure& s = sys.sigma(k);
    RVec pts = {s.interval.lo, s.interval.center(), s.interval.hi};
    for (const auto& a : s.atoms) pts.push_back(a.location);
    int sg = 0;
    for (const auto& x : pts) {
        int v = sign_of(factor(k, x).re);
        if (v == 0 || (sg != 0 && v != sg))
            throw structural_error("p_" + std::to_string(k) + "/q_" + std::to_string(k) +
                                   " changes sign on supp sigma_" + std::to_string(k));
        sg = v;
    }
    return sg;
}

// ---------------------------------------------------------------------------
// Index class and ladders

bool check_index_class(const MultiIndex& n, const std::vector<int>& degs) {
    const int m = static_cast<int>(n.size());
    if (static_cast<int>(degs.size()) != m) throw config_error("index and degree vectors differ in length");
    for (int v : n)
        if (v < 0) return false;
    for (int j = 0; j < m; ++j) {
        int d = 0;
        for (int k = j + 1; k < m; ++k) {
            d += degs[k];
            if (n[k] + d > n[j] + 1) return false;
        }
    }
    return true;
}

bool check_index_class(const MultiIndex& n) { return check_index_class(n, std::vector<int>(n.size(), 0)); }

std::vector<MultiIndex> build_ladder(const MultiIndex& base, int count, const std::vector<int>& degs, int stride) {
    if (count < 1) throw config_error("ladder needs at least one rung");
    if (stride < 1) throw config_error("ladder stride must be positive");
    if (!check_index_class(base, degs))
        throw config_error("ladder base " + to_string(base) + " is outside the index class");
    const int m = static_cast<int>(base.size());
    std::vector<MultiIndex> out{base};
    MultiIndex cur = base;
    int ptr = 0;
    while (static_cast<int>(out.size()) < count) {
        for (int s = 0; s < stride; ++s) {
            bool moved = false;
            for (int t = 0; t < m && !moved; ++t) {
                int c = (ptr + t) % m;
                MultiIndex cand = cur;
                ++cand[c];
                if (check_index_class(cand, degs)) {
                    cur = std::move(cand);
                    ptr = (c + 1) % m;
                    moved = true;
                }
            }
            if (!moved) throw structural_error("no admissible increment from " + to_string(cur));
        }
        out.push_back(cur);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Discretization

Discretization::Discretization(const NikishinSystem& sys, const std::vector<int>& nodes,
                               const RationalPerturbation* pert)
    : bits_(working_bits()), perturbed_(pert && !pert->is_trivial()) {
    if (static_cast<int>(nodes.size()) != sys.m()) throw config_error("one node count per level is required");
    if (pert) pert->validate(sys);
    for (int k = 1; k <= sys.m(); ++k) {
        auto rule = cached_rule(sys.sigma(k), nodes[k - 1]);
        Level L;
        L.x = rule->nodes;
        L.w.reserve(rule->size());
        for (size_t i = 0; i < rule->size(); ++i) {
            Complex w(rule->weights[i]);
            if (perturbed_) w *= pert->factor(k, rule->nodes[i]);
            L.w.push_back(w);
        }
        L.interval = sys.sigma(k).interval;
        L.hull = sys.hull(k);
        for (const auto& a : sys.sigma(k).atoms) L.atoms.push_back(lift(a.location));
        L.clear = lift(sys.sigma(k).delta_clear());
        levels_.push_back(std::move(L));
    }
}

const CVec& Discretization::density(int a, int b) const {
    if (a < 1 || b > m() || a > b) throw config_error("density(a,b) needs 1 <= a <= b <= m");
    {
        std::lock_guard<std::mutex> lk(*mu_);
        auto it = densities_.find({a, b});
        if (it != densities_.end()) return it->second;
    }
    CVec out;
    const Level& here = level(a);
    if (a == b) {
        out.assign(here.x.size(), Complex(1));
    } else {
        const CVec& up = density(a + 1, b);
        const Level& nxt = level(a + 1);
        CVec ws(nxt.x.size());
        for (size_t s = 0; s < ws.size(); ++s) ws[s] = nxt.w[s] * up[s];
        out.resize(here.x.size());
        for (size_t t = 0; t < here.x.size(); ++t) {
            Complex acc(0);
            for (size_t s = 0; s < ws.size(); ++s) acc += ws[s] / Complex(here.x[t] - nxt.x[s]);
            out[t] = acc;
        }
    }
    std::lock_guard<std::mutex> lk(*mu_);
    return densities_.emplace(std::make_pair(a, b), std::move(out)).first->second;
}

CVec Discretization::nested_weights(int a, int b) const {
    const CVec& d = density(a, b);
    const Level& L = level(a);
    CVec w(L.x.size());
    for (size_t i = 0; i < w.size(); ++i) w[i] = L.w[i] * d[i];
    return w;
}

Complex Discretization::integrate_nested(int a, int b, const std::function<Complex(const Real&)>& f) const {
    CVec w = nested_weights(a, b);
    const Level& L = level(a);
    Complex s(0);
    for (size_t i = 0; i < w.size(); ++i) {
        Complex v = f(L.x[i]);
        if (!isfinite(v)) throw numerical_error("integrand is not finite at node x=" + to_string(L.x[i], 20));
        s += w[i] * v;
    }
    return s;
}

Complex Discretization::integrate_s(int k, const std::function<Complex(const Real&)>& f) const {
    return integrate_nested(1, k, f);
}

Real Discretization::support_distance(int k, const Complex& z) const {
    const Level& L = level(k);
    Real d = L.interval.distance(z);
    for (const auto& a : L.atoms) d = std::min(d, abs(z - Complex(a)));
    return d;
}

void Discretization::check_clear(int k, const Complex& z) const {
    if (support_distance(k, z) < level(k).clear)
        throw proximity_error("evaluation point " + to_string(z, 12) + " is within " + to_string(level(k).clear, 6) +
                              " of supp sigma_" + std::to_string(k));
}

Discretization Discretization::permuted(unsigned seed) const {
    Discretization d;
    d.bits_ = bits_;
    d.perturbed_ = perturbed_;
    d.levels_ = levels_;
    std::mt19937 gen(seed);
    for (auto& L : d.levels_) {
        std::vector<size_t> idx(L.x.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), gen);
        RVec x(idx.size());
        CVec w(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            x[i] = L.x[idx[i]];
            w[i] = L.w[idx[i]];
        }
        L.x = std::move(x);
        L.w = std::move(w);
    }
    return d;
}

std::vector<int> default_nodes(const NikishinSystem& sys, const MultiIndex& n, int extra_degree, int extra) {
    if (static_cast<int>(n.size()) != sys.m()) throw config_error("multi-index length differs from m");
    std::vector<int> out(sys.m());
    for (int k = 1; k <= sys.m(); ++k) {
        int D = extra_degree;
        if (k == 1)
            D += norm(n);
        else
            for (int j = k; j <= sys.m(); ++j) D += n[j - 1];
        out[k - 1] = std::max(2 * (D + 8), D + extra);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decomposition of the perturbed nested measures

namespace {

// -sum_i a_i sum_{r<i} mu_r x^{i-1-r}, the polynomial part that separates
// the transform of H dtau from H times the transform of tau.
Polynomial star(const Polynomial& H, const CVec& mu) {
    const CVec& a = H.coeffs();
    int d = H.degree();
    if (d <= 0) return Polynomial::constant(Complex(0));
    CVec c(d, Complex(0));
    for (int i = 1; i <= d; ++i)
        for (int r = 0; r < i; ++r) c[i - 1 - r] -= a[i] * mu[r];
    return Polynomial::monomial(std::move(c));
}

CVec nested_moments(const Discretization& d, int a, int b, int max_degree) {
    CVec w = d.nested_weights(a, b);
    const auto& x = d.level(a).x;
    CVec mu(max_degree + 1, Complex(0));
    for (size_t i = 0; i < w.size(); ++i) {
        Complex p = w[i];
        for (int r = 0; r <= max_degree; ++r) {
            mu[r] += p;
            p *= x[i];
        }
    }
    return mu;
}

}  // namespace

std::vector<Polynomial> lemma1_decompose(const Discretization& plain, const RationalPerturbation& pert, int k) {
    if (k < 1 || k > plain.m()) throw config_error("lemma1 level out of range");
    std::vector<Polynomial> l(k, Polynomial::constant(Complex(0)));
    l[k - 1] = Polynomial::constant(Complex(1));
    for (int s = k - 1; s >= 1; --s) {
        Polynomial acc = Polynomial::constant(Complex(0));
        Polynomial pp = Polynomial::constant(Complex(1));
        for (int j = s + 1; j <= k; ++j) {
            pp = pp * pert.pk(j).to_monomial();
            Polynomial H = pp * l[j - 1];
            CVec mu = nested_moments(plain, s + 1, j, std::max(H.degree(), 0));
            acc = acc + star(H, mu);
        }
        l[s - 1] = acc;
    }
    return l;
}

Real lemma1_residual(const Discretization& plain, const Discretization& perturbed, const RationalPerturbation& pert,
                     int k, const std::vector<Polynomial>& l, int max_degree) {
    Real worst = 0;
    for (int nu = 0; nu <= max_degree; ++nu) {
        auto mono = [nu](const Real& x) { return Complex(pow(x, nu)); };
        Complex lhs = perturbed.integrate_s(k, mono);
        Complex rhs(0);
        Real scale = abs(lhs);
        Polynomial pp = Polynomial::constant(Complex(1));
        for (int j = 1; j <= k; ++j) {
            pp = pp * pert.pk(j).to_monomial();
            Polynomial g = pp * l[j - 1];
            Complex t = plain.integrate_s(j, [&](const Real& x) { return g(Complex(x)) * pow(x, nu); });
            rhs += t;
            // moments that vanish by symmetry would otherwise turn roundoff into O(1) relative noise
            Complex mag = plain.integrate_s(j, [&](const Real& x) { return Complex(abs(g(Complex(x))) * pow(abs(x), nu)); });
            scale = std::max({scale, abs(t), abs(mag)});
        }
        Real r = abs(lhs - rhs) / (scale > 0 ? scale : Real(1));
        worst = std::max(worst, r);
    }
    return worst;
}

}  // namespace nikishin
