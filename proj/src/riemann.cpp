#include "nikishin/riemann.hpp"

#include <boost/multiprecision/eigen.hpp>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

namespace nikishin {

using boost::multiprecision::abs;
using boost::multiprecision::pow;
using boost::multiprecision::sqrt;
using cd = std::complex<double>;

void SurfaceSpec::validate() const {
    if (slits.empty()) throw config_error("surface needs at least one slit");
    for (int k = 1; k <= m(); ++k) {
        if (!(slit(k).lo < slit(k).hi)) throw config_error("slit " + std::to_string(k) + " is degenerate");
        if (k > 1 && slit(k).intersects(slit(k - 1)))
            throw config_error("slits " + std::to_string(k - 1) + " and " + std::to_string(k) + " intersect");
    }
}

std::string SurfaceSpec::key() const {
    std::string s;
    for (const auto& iv : slits) s += "[" + to_string(iv.lo, 30) + "," + to_string(iv.hi, 30) + "]";
    return s;
}

SurfaceSpec SurfaceSpec::from_system(const NikishinSystem& sys) {
    SurfaceSpec s;
    for (int k = 1; k <= sys.m(); ++k) s.slits.push_back(sys.sigma(k).interval);
    return s;
}

CoveringMap::CoveringMap(SurfaceSpec spec, RVec A, RVec B, RVec crit_lo, RVec crit_hi, unsigned bits)
    : spec_(std::move(spec)), A_(std::move(A)), B_(std::move(B)), lo_(std::move(crit_lo)), hi_(std::move(crit_hi)),
      bits_(bits) {}

Complex CoveringMap::Z(const Complex& w) const {
    Complex s = w;
    for (int k = 0; k < m(); ++k) s += Complex(lift(A_[k])) / (w - Complex(B_[k]));
    return s;
}

Complex CoveringMap::dZ(const Complex& w) const {
    Complex s(1);
    for (int k = 0; k < m(); ++k) {
        Complex d = w - Complex(B_[k]);
        s -= Complex(lift(A_[k])) / (d * d);
    }
    return s;
}

Real CoveringMap::residual() const {
    Real r = 0;
    for (int k = 1; k <= m(); ++k) {
        r = std::max(r, abs(Z(crit_lo(k)) - Complex(spec_.slit(k).lo)));
        r = std::max(r, abs(Z(crit_hi(k)) - Complex(spec_.slit(k).hi)));
        r = std::max(r, abs(dZ(crit_lo(k))));
        r = std::max(r, abs(dZ(crit_hi(k))));
    }
    return r;
}

std::pair<RVec, RVec> CoveringMap::numerator_denominator() const {
    auto mul = [](const RVec& p, const Real& root) {
        RVec out(p.size() + 1, Real(0));
        for (size_t i = 0; i < p.size(); ++i) {
            out[i + 1] += p[i];
            out[i] -= root * p[i];
        }
        return out;
    };
    RVec D{Real(1)};
    for (const auto& b : B_) D = mul(D, b);
    RVec N(D.size() + 1, Real(0));
    for (size_t i = 0; i < D.size(); ++i) N[i + 1] = D[i];
    for (int k = 0; k < m(); ++k) {
        RVec t{Real(1)};
        for (int j = 0; j < m(); ++j)
            if (j != k) t = mul(t, B_[j]);
        for (size_t i = 0; i < t.size(); ++i) N[i] += A_[k] * t[i];
    }
    return {N, D};
}

bool CoveringMap::on_cut(int k, const Complex& z) const {
    if (z.im != 0) return false;
    if (k >= 1 && spec_.slit(k).contains(z.re)) return true;
    if (k < m() && spec_.slit(k + 1).contains(z.re)) return true;
    return false;
}

namespace {

// All m+1 preimages of z in double: roots of (w - z) D(w) + sum A_k D(w)/(w - B_k).
std::vector<cd> preimages_d(const std::vector<double>& A, const std::vector<double>& B, cd z) {
    const int m = static_cast<int>(A.size());
    auto mul = [](const std::vector<cd>& p, cd root) {
        std::vector<cd> out(p.size() + 1, 0.0);
        for (size_t i = 0; i < p.size(); ++i) {
            out[i + 1] += p[i];
            out[i] -= root * p[i];
        }
        return out;
    };
    std::vector<cd> D{1.0};
    for (double b : B) D = mul(D, b);
    std::vector<cd> P = mul(D, z);
    for (int k = 0; k < m; ++k) {
        std::vector<cd> t{1.0};
        for (int j = 0; j < m; ++j)
            if (j != k) t = mul(t, B[j]);
        for (size_t i = 0; i < t.size(); ++i) P[i] += A[k] * t[i];
    }
    const int d = m + 1;
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 1; i < d; ++i) C(i, i - 1) = 1.0;
    for (int i = 0; i < d; ++i) C(i, d - 1) = -P[i];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
    if (es.info() != Eigen::Success) throw numerical_error("preimage eigenvalue solve failed");
    std::vector<cd> r(d);
    for (int i = 0; i < d; ++i) {
        cd w = es.eigenvalues()(i);
        // two Newton steps sharpen roots that sit close together
        for (int it = 0; it < 2; ++it) {
            cd f = w - z, df = 1.0;
            for (int k = 0; k < m; ++k) {
                cd q = w - B[k];
                f += A[k] / q;
                df -= A[k] / (q * q);
            }
            if (std::abs(df) > 1e-12) w -= f / df;
        }
        r[i] = w;
    }
    return r;
}

cd dZ_d(const std::vector<double>& A, const std::vector<double>& B, cd w) {
    cd s = 1.0;
    for (size_t k = 0; k < A.size(); ++k) s -= A[k] / ((w - B[k]) * (w - B[k]));
    return s;
}

// Index of the nearest entry and the ratio nearest / second nearest.
std::pair<int, double> nearest(const std::vector<cd>& r, cd p) {
    int best = -1;
    double d1 = 1e300, d2 = 1e300;
    for (int i = 0; i < static_cast<int>(r.size()); ++i) {
        double d = std::abs(r[i] - p);
        if (d < d1) {
            d2 = d1;
            d1 = d;
            best = i;
        } else if (d < d2) {
            d2 = d;
        }
    }
    return {best, d2 > 0 ? d1 / d2 : 1.0};
}

}  // namespace

Complex CoveringMap::preimage(int k, const Complex& z) const {
    if (k < 0 || k > m()) throw config_error("sheet index out of range");
    if (on_cut(k, z)) throw proximity_error("z = " + to_string(z, 12) + " lies on a cut of sheet " + std::to_string(k));
    std::vector<double> A, B;
    for (int j = 0; j < m(); ++j) {
        A.push_back(static_cast<double>(A_[j]));
        B.push_back(static_cast<double>(B_[j]));
    }
    const cd zt = z.to_std();
    const double s = zt.imag() >= 0 ? 1.0 : -1.0;
    double R = 1 + std::abs(zt.real());
    for (const auto& iv : spec_.slits)
        R = std::max({R, std::abs(static_cast<double>(iv.lo)), std::abs(static_cast<double>(iv.hi))});
    for (double b : B) R = std::max(R, std::abs(b));

    Complex W;
    if (std::abs(zt) > 1e6 * R) {
        // far field: w = z on sheet 0, w = B_k + A_k / (z - c_k) + O(z^-2) on sheet k
        if (k == 0) {
            W = z;
        } else {
            Real ck = B_[k - 1];
            for (int j = 0; j < m(); ++j)
                if (j != k - 1) ck += A_[j] / (B_[k - 1] - B_[j]);
            W = Complex(lift(B_[k - 1])) + Complex(lift(A_[k - 1])) / (z - Complex(ck));
        }
        return polish(W, z);
    }

    // Sheet labels at the top of the ray: w ~ z on sheet 0, w ~ B_j + A_j / z on sheet j.
    double Y = std::max(8 * R, 2 * std::abs(zt.imag()));
    cd w;
    for (int tries = 0;; ++tries) {
        if (tries > 20) throw numerical_error("cannot label sheets at the ray start");
        cd z0(zt.real(), s * Y);
        auto roots = preimages_d(A, B, z0);
        std::vector<cd> pred{z0};
        for (int j = 0; j < m(); ++j) pred.push_back(B[j] + A[j] / z0);
        auto [idx, ratio] = nearest(roots, pred[k]);
        double sep = 1e300;
        for (size_t i = 0; i < pred.size(); ++i)
            for (size_t j = i + 1; j < pred.size(); ++j) sep = std::min(sep, std::abs(pred[i] - pred[j]));
        if (ratio < 0.25 && std::abs(roots[idx] - pred[k]) < 0.25 * sep) {
            w = roots[idx];
            break;
        }
        Y *= 4;
    }

    // March down the vertical ray to z with a derivative predictor.
    double cur = s * Y;
    const double target = zt.imag();
    double h = std::abs(cur - target) / 4;
    const double hmin = 1e-14 * (1 + std::abs(zt));
    // Branch points sit over the slit ends; keep each step within half the distance to them.
    std::vector<double> ends;
    for (const auto& iv : spec_.slits) {
        ends.push_back(static_cast<double>(iv.lo));
        ends.push_back(static_cast<double>(iv.hi));
    }
    auto reach = [&](double y) {
        double d = 1e300;
        for (double e : ends) d = std::min(d, std::abs(cd(zt.real() - e, y)));
        return d / 2;
    };
    while (cur != target) {
        h = std::min(h, reach(cur));
        double gap = std::abs(cur - target);
        double next = h >= gap || gap - h < hmin ? target : cur - s * h;
        cd znext(zt.real(), next);
        cd dz(0, next - cur);
        cd pred = w + dz / dZ_d(A, B, w);
        auto roots = preimages_d(A, B, znext);
        auto [idx, ratio] = nearest(roots, pred);
        double err = std::abs(roots[idx] - pred);
        if (ratio < 0.3 && err <= 0.3 * std::abs(roots[idx] - w) + 1e-12 * (1 + std::abs(w))) {
            w = roots[idx];
            cur = next;
            h *= 2;
        } else {
            h /= 2;
            if (h < hmin)
                throw proximity_error("branch tracking stalled near z = " + to_string(z, 12) + " on sheet " +
                                      std::to_string(k));
        }
    }

    return polish(Complex::from_std(w), z);
}

Complex CoveringMap::polish(Complex W, const Complex& z) const {
    if (z.im == 0) W.im = 0;
    Tolerances tol = Tolerances::current();
    // Attainable residual grows with |Z'| |W| near a pole cell (huge |z| off sheet 0).
    auto scale = [&](const Complex& w) { return 1 + abs(z) + abs(dZ(w)) * (1 + abs(w)); };
    for (int it = 0; it < 200; ++it) {
        Complex f = Z(W) - z;
        Complex step = f / dZ(W);
        W -= step;
        if (z.im == 0) W.im = 0;
        if (abs(step) <= tol.newton() * (1 + abs(W)) * Real("1e-6")) break;
        if (abs(f) <= tol.newton() * scale(W) * Real("1e-6")) break;
    }
    if (!(abs(Z(W) - z) <= tol.newton() * scale(W)))
        throw proximity_error("preimage polish did not converge at z = " + to_string(z, 12));
    return W;
}

// ---------------------------------------------------------------------------
// Newton solve for the covering data.

namespace {

using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VecR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

struct State {
    RVec A, B, lo, hi;
    int m() const { return static_cast<int>(A.size()); }
};

struct Eval {
    Real z, dz, d2z;
};

Eval eval_real(const State& s, const Real& w) {
    Eval e{w, Real(1), Real(0)};
    for (int k = 0; k < s.m(); ++k) {
        Real q = w - s.B[k];
        Real a1 = s.A[k] / q, a2 = a1 / q, a3 = a2 / q;
        e.z += a1;
        e.dz -= a2;
        e.d2z += 2 * a3;
    }
    return e;
}

VecR residual_vec(const State& s, const std::vector<Interval>& target) {
    const int m = s.m();
    VecR F(4 * m);
    for (int k = 0; k < m; ++k) {
        Eval a = eval_real(s, s.lo[k]), b = eval_real(s, s.hi[k]);
        F(4 * k) = a.z - target[k].lo;
        F(4 * k + 1) = b.z - target[k].hi;
        F(4 * k + 2) = a.dz;
        F(4 * k + 3) = b.dz;
    }
    return F;
}

Real inf_norm(const VecR& v) {
    Real r = 0;
    for (int i = 0; i < v.size(); ++i) r = std::max(r, Real(abs(v(i))));
    return r;
}

// Unknowns: A_0..A_{m-1}, B_0..B_{m-1}, lo_0.., hi_0..
bool newton(State& s, const std::vector<Interval>& target, const Real& tol) {
    const int m = s.m(), n = 4 * m;
    Real r0 = inf_norm(residual_vec(s, target));
    for (int it = 0; it < 60; ++it) {
        VecR F = residual_vec(s, target);
        Real r = inf_norm(F);
        if (r <= tol) return true;
        if (!boost::multiprecision::isfinite(r) || r > 1e3 * (r0 + 1)) return false;
        MatR J = MatR::Zero(n, n);
        for (int k = 0; k < m; ++k) {
            for (int side = 0; side < 2; ++side) {
                const Real& w = side == 0 ? s.lo[k] : s.hi[k];
                int col_w = side == 0 ? 2 * m + k : 3 * m + k;
                int row_z = 4 * k + side, row_d = 4 * k + 2 + side;
                Eval e = eval_real(s, w);
                for (int i = 0; i < m; ++i) {
                    Real q = w - s.B[i];
                    J(row_z, i) = 1 / q;
                    J(row_z, m + i) = s.A[i] / (q * q);
                    J(row_d, i) = -1 / (q * q);
                    J(row_d, m + i) = -2 * s.A[i] / (q * q * q);
                }
                J(row_z, col_w) = e.dz;
                J(row_d, col_w) = e.d2z;
            }
        }
        VecR dx = J.fullPivLu().solve(F);
        for (int i = 0; i < m; ++i) {
            s.A[i] -= dx(i);
            s.B[i] -= dx(m + i);
            s.lo[i] -= dx(2 * m + i);
            s.hi[i] -= dx(3 * m + i);
        }
    }
    return inf_norm(residual_vec(s, target)) <= tol;
}

CoveringMap to_map(const SurfaceSpec& spec, const State& s, unsigned bits) {
    return CoveringMap(spec, s.A, s.B, s.lo, s.hi, bits);
}

SurfaceSpec prefix(const SurfaceSpec& spec, int k) {
    SurfaceSpec p;
    p.slits.assign(spec.slits.begin(), spec.slits.begin() + k);
    return p;
}

}  // namespace

CoveringMap build_covering(const SurfaceSpec& spec) {
    spec.validate();
    const unsigned bits = working_bits();
    const Tolerances tol = Tolerances::current();
    Real scale = 1;
    for (const auto& iv : spec.slits) scale = std::max({scale, Real(abs(iv.lo)), Real(abs(iv.hi))});
    const Real loose = Real("1e-14") * scale;

    // Slit 1: affine Joukowski map.
    State s;
    {
        const Interval& iv = spec.slit(1);
        Real q = iv.length() / 4;
        s.A.push_back(q * q);
        s.B.push_back(iv.center());
        s.lo.push_back(iv.center() - q);
        s.hi.push_back(iv.center() + q);
    }

    for (int j = 2; j <= spec.m(); ++j) {
        const Interval& iv = spec.slit(j);
        Real c = iv.center(), h0 = iv.half() * Real("1e-3");
        CoveringMap cur = to_map(prefix(spec, j - 1), s, bits);
        Complex w0 = cur.preimage(j - 1, Complex(c));
        Real d = cur.dZ(w0).re;
        if (abs(d) < Real("1e-12")) throw structural_error("surface construction failed at slit " + std::to_string(j));
        Real A = sign_of(d) * h0 * h0 / (4 * abs(d));
        Real u = sqrt(A / d);
        s.A.push_back(A);
        s.B.push_back(w0.re);
        Real wa = w0.re - u, wb = w0.re + u;
        State trial = s;
        trial.lo.push_back(wa);
        trial.hi.push_back(wb);
        if (eval_real(trial, wa).z > eval_real(trial, wb).z) std::swap(wa, wb);
        s.lo.push_back(wa);
        s.hi.push_back(wb);

        std::vector<Interval> target(spec.slits.begin(), spec.slits.begin() + j);
        Interval start(c - h0, c + h0);
        target.back() = start;
        if (!newton(s, target, loose))
            throw structural_error("surface construction failed at slit " + std::to_string(j) + " (seed)");

        Real t = 0, dt = Real(1) / 8;
        int halvings = 0;
        while (t < 1) {
            Real tn = std::min(Real(1), t + dt);
            target.back() = Interval(start.lo + tn * (iv.lo - start.lo), start.hi + tn * (iv.hi - start.hi));
            State trial2 = s;
            if (newton(trial2, target, loose)) {
                s = std::move(trial2);
                t = tn;
            } else {
                dt /= 2;
                if (++halvings > 30)
                    throw structural_error("surface construction failed at slit " + std::to_string(j) +
                                           " (continuation)");
            }
        }
    }

    if (!newton(s, spec.slits, tol.newton() * scale))
        throw structural_error("surface construction failed at slit " + std::to_string(spec.m()) + " (polish)");
    return to_map(spec, s, bits);
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::string CoveringMap::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "covering_map";
    j["precision_bits"] = bits_;
    for (const auto& iv : spec_.slits) j["slits"].push_back({to_string(iv.lo), to_string(iv.hi)});
    auto strs = [](const RVec& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& x : v) a.push_back(to_string(x));
        return a;
    };
    j["A"] = strs(A_);
    j["B"] = strs(B_);
    j["crit_lo"] = strs(lo_);
    j["crit_hi"] = strs(hi_);
    auto [N, D] = numerator_denominator();
    j["numerator"] = strs(N);
    j["denominator"] = strs(D);
    j["poles"] = nlohmann::json::array({"inf"});
    for (const auto& b : B_) j["poles"].push_back(to_string(b));
    for (int k = 1; k <= m(); ++k) {
        j["critical_pairs"].push_back({to_string(crit_lo(k)), to_string(spec_.slit(k).lo)});
        j["critical_pairs"].push_back({to_string(crit_hi(k)), to_string(spec_.slit(k).hi)});
    }
    for (int k = 0; k <= m(); ++k)
        j["sheet_cells"].push_back({{"sheet", k},
                                    {"pole", k == 0 ? std::string("inf") : to_string(B(k))},
                                    {"label_rule", "vertical ray from infinity"}});
    return j.dump(2);
}

CoveringMap CoveringMap::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw config_error(std::string("covering cache: ") + e.what());
    }
    if (j.value("schema_version", 0) != 1 || j.value("kind", "") != "covering_map")
        throw config_error("covering cache: unsupported schema");
    auto reals = [&](const char* key) {
        RVec v;
        for (const auto& s : j.at(key)) v.push_back(parse_real(s.get<std::string>()));
        return v;
    };
    SurfaceSpec spec;
    for (const auto& p : j.at("slits"))
        spec.slits.emplace_back(parse_real(p.at(0).get<std::string>()), parse_real(p.at(1).get<std::string>()));
    return CoveringMap(spec, reals("A"), reals("B"), reals("crit_lo"), reals("crit_hi"),
                       j.at("precision_bits").get<unsigned>());
}

std::shared_ptr<const CoveringMap> cached_covering(const SurfaceSpec& spec, const std::string& dir) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const CoveringMap>> cache;
    const unsigned bits = working_bits();
    const std::string key = spec.key() + "#" + std::to_string(bits);
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    std::shared_ptr<const CoveringMap> out;
    std::filesystem::path file;
    if (!dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "%016llx.json", static_cast<unsigned long long>(fnv1a(spec.key())));
        file = std::filesystem::path(dir) / name;
        if (std::filesystem::exists(file)) {
            std::ifstream in(file);
            std::stringstream ss;
            ss << in.rdbuf();
            CoveringMap c = CoveringMap::from_json(ss.str());
            if (c.spec().key() == spec.key() && c.bits() >= bits) {
                // re-polish at the current precision
                State s;
                for (int k = 1; k <= c.m(); ++k) {
                    s.A.push_back(lift(c.A(k)));
                    s.B.push_back(lift(c.B(k)));
                    s.lo.push_back(lift(c.crit_lo(k)));
                    s.hi.push_back(lift(c.crit_hi(k)));
                }
                Real scale = 1;
                for (const auto& iv : spec.slits) scale = std::max({scale, Real(abs(iv.lo)), Real(abs(iv.hi))});
                if (newton(s, spec.slits, Tolerances::current().newton() * scale))
                    out = std::make_shared<const CoveringMap>(to_map(spec, s, bits));
            }
        }
    }
    if (!out) {
        out = std::make_shared<const CoveringMap>(build_covering(spec));
        if (!file.empty()) {
            std::filesystem::create_directories(file.parent_path());
            std::ofstream(file) << out->to_json() << "\n";
        }
    }
    cache[key] = out;
    return out;
}

RoundTrip covering_round_trip(const CoveringMap& cover, int samples, unsigned seed) {
    std::mt19937 gen(seed);
    Real R = 1;
    for (const auto& iv : cover.spec().slits) R = std::max({R, Real(abs(iv.lo)), Real(abs(iv.hi))});
    std::uniform_real_distribution<double> u(-2 * static_cast<double>(R), 2 * static_cast<double>(R));
    RoundTrip out;
    for (int i = 0; i < samples; ++i) {
        Complex z(u(gen), u(gen));
        if (z.im == 0) continue;
        CVec ws;
        for (int k = 0; k <= cover.m(); ++k) {
            Complex w = cover.preimage(k, z);
            out.max_residual = std::max(out.max_residual, abs(cover.Z(w) - z) / (1 + abs(z)));
            for (const auto& v : ws)
                if (abs(v - w) < Real("1e-10")) out.injective = false;
            ws.push_back(w);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

BranchFunction::BranchFunction(std::shared_ptr<const CoveringMap> cover, int l, bool flip)
    : cover_(std::move(cover)), l_(l) {
    const int m = cover_->m();
    if (l < 1 || l > m) throw config_error("branch level out of range");
    Real p = abs(cover_->A(l));
    for (int k = 1; k <= m; ++k)
        if (k != l) p *= abs(cover_->B(k) - cover_->B(l));
    c_ = pow(p, Real(1) / (m + 1));
    bool negative = false;
    if (l == 1 && m >= 2) negative = cover_->spec().slit(1).lo > cover_->spec().slit(2).hi;
    if (negative != flip) c_ = -c_;
}

Real BranchFunction::lead(int k) const {
    if (k == 0) return c_;
    if (k == l_) return c_ / cover_->A(l_);
    return c_ / (cover_->B(k) - cover_->B(l_));
}

namespace {

Real rel_gap(const Complex& a, const Complex& b) {
    Real s = std::max(abs(a), abs(b));
    return s > 0 ? abs(a - b) / s : Real(0);
}

}  // namespace

Real verify_relalg(const std::vector<BranchFunction>& psi, int l, const CVec& z) {
    if (l < 2 || l - 1 > static_cast<int>(psi.size())) throw config_error("relalg needs 2 <= l <= m+1");
    const BranchFunction& p1 = psi.at(0);
    const BranchFunction& pl = psi.at(l - 2);
    const int m = p1.cover().m();
    // 1/psi^(1) at infinity^(l-1): zero at the pole of psi^(1), else 1/lead
    Complex at_inf = l - 1 == 1 ? Complex(0) : Complex(1 / p1.lead(l - 1));
    Real worst = 0;
    for (int k = 0; k <= m; ++k)
        for (const auto& x : z) {
            if (p1.cover().on_cut(k, x)) continue;
            Complex lhs = Complex(1) / p1(k, x) - at_inf;
            Complex rhs = Complex(pl.C1()) / (Complex(p1.C1()) * pl(k, x));
            worst = std::max(worst, rel_gap(lhs, rhs));
        }
    return worst;
}

ProductCheck branch_product(const BranchFunction& psi, const CVec& z) {
    ProductCheck out;
    CVec vals;
    for (const auto& x : z) {
        Complex p(1);
        for (int k = 0; k <= psi.cover().m(); ++k) p *= psi(k, x);
        vals.push_back(p);
    }
    if (vals.empty()) return out;
    Complex mean(0);
    for (const auto& v : vals) mean += v;
    mean /= Real(static_cast<int>(vals.size()));
    for (const auto& v : vals) out.spread = std::max(out.spread, abs(v - vals[0]));
    out.value = mean.re >= 0 ? 1 : -1;
    out.unit_gap = abs(mean - Complex(out.value));
    return out;
}

Real boundary_conjugation(const BranchFunction& psi, int k, const RVec& x, const Real& eps) {
    Real worst = 0;
    for (const auto& t : x) {
        Complex z(t, eps);
        Complex a = psi(k, z), b = psi(k + 1, z);
        // relative: the offset itself contributes eps*|psi'|
        worst = std::max(worst, abs(a - conj(b)) / std::max({abs(a), abs(b), Real(1)}));
    }
    return worst;
}

}  // namespace nikishin
