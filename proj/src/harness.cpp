#include "nikishin/harness.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace nikishin {

using boost::multiprecision::abs;

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Ratio: return "ratio";
        case ExperimentKind::SecondType: return "second_type";
        case ExperimentKind::Induced: return "induced";
        case ExperimentKind::Zeros: return "zeros";
        case ExperimentKind::Identities: return "identities";
    }
    return "?";
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Config parsing. Every failure names its JSON pointer.

namespace {

[[noreturn]] void bad(const std::string& ptr, const std::string& what) { throw config_error(ptr + ": " + what); }

const json& field(const json& j, const std::string& ptr, const char* key) {
    if (!j.is_object()) bad(ptr, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) bad(ptr + "/" + key, "missing");
    return *it;
}

Real real_of(const json& j, const std::string& ptr) {
    if (!j.is_string()) bad(ptr, "expected a decimal string");
    try {
        return parse_real(j.get<std::string>());
    } catch (const Error&) {
        bad(ptr, "'" + j.get<std::string>() + "' is not a decimal number");
    }
}

Complex complex_of(const json& j, const std::string& ptr) {
    if (j.is_array()) {
        if (j.size() != 2) bad(ptr, "expected [re, im]");
        return Complex(real_of(j[0], ptr + "/0"), real_of(j[1], ptr + "/1"));
    }
    return Complex(real_of(j, ptr));
}

int int_of(const json& j, const std::string& ptr) {
    if (!j.is_number_integer()) bad(ptr, "expected an integer");
    return j.get<int>();
}

Weight weight_of(const json& j, const std::string& ptr) {
    std::string kind = "chebyshev_first";
    if (j.is_string()) {
        kind = j.get<std::string>();
    } else if (j.is_object()) {
        kind = field(j, ptr, "kind").get<std::string>();
    } else {
        bad(ptr, "expected a weight name or object");
    }
    auto exponent = [&](const char* key) { return real_of(field(j, ptr, key), ptr + "/" + key); };
    if (kind == "chebyshev_first") return Weight::chebyshev_first();
    if (kind == "chebyshev_second") return Weight::chebyshev_second();
    if (kind == "legendre") return Weight::legendre();
    if (kind == "jacobi") return Weight::jacobi(exponent("alpha"), exponent("beta"));
    if (kind == "modulated_jacobi") {
        const json& mod = field(j, ptr, "modulus");
        if (!mod.is_array() || mod.empty()) bad(ptr + "/modulus", "expected a coefficient list");
        CVec c;
        for (size_t i = 0; i < mod.size(); ++i) c.push_back(complex_of(mod[i], ptr + "/modulus/" + std::to_string(i)));
        return Weight::modulated_jacobi(exponent("alpha"), exponent("beta"), Polynomial::monomial(c));
    }
    bad(ptr + "/kind", "unknown weight '" + kind + "'");
}

Measure measure_of(const json& j, const std::string& ptr) {
    const json& iv = field(j, ptr, "interval");
    if (!iv.is_array() || iv.size() != 2) bad(ptr + "/interval", "expected [lo, hi]");
    Real lo = real_of(iv[0], ptr + "/interval/0"), hi = real_of(iv[1], ptr + "/interval/1");
    if (!(lo < hi)) bad(ptr + "/interval", "needs lo < hi");
    Weight w = j.contains("weight") ? weight_of(j["weight"], ptr + "/weight") : Weight::chebyshev_first();
    int sign = j.contains("sign") ? int_of(j["sign"], ptr + "/sign") : 1;
    if (sign != 1 && sign != -1) bad(ptr + "/sign", "must be 1 or -1");
    std::vector<MassPoint> atoms;
    if (j.contains("atoms")) {
        const json& a = j["atoms"];
        if (!a.is_array()) bad(ptr + "/atoms", "expected a list");
        for (size_t i = 0; i < a.size(); ++i) {
            std::string p = ptr + "/atoms/" + std::to_string(i);
            atoms.push_back({real_of(field(a[i], p, "location"), p + "/location"),
                             real_of(field(a[i], p, "mass"), p + "/mass")});
        }
    }
    try {
        Measure m(Interval(lo, hi), w, sign, atoms);
        m.validate();
        return m;
    } catch (const Error& e) {
        bad(ptr, e.what());
    }
}

std::vector<Polynomial> polys_of(const json& j, const std::string& ptr, int m) {
    if (!j.is_array() || static_cast<int>(j.size()) != m) bad(ptr, "expected " + std::to_string(m) + " coefficient lists");
    std::vector<Polynomial> out;
    for (int k = 0; k < m; ++k) {
        std::string p = ptr + "/" + std::to_string(k);
        if (!j[k].is_array() || j[k].empty()) bad(p, "expected a non-empty coefficient list, lowest order first");
        CVec c;
        for (size_t i = 0; i < j[k].size(); ++i) c.push_back(complex_of(j[k][i], p + "/" + std::to_string(i)));
        Polynomial poly = Polynomial::monomial(c);
        if (poly.leading() != Complex(1)) bad(p, "polynomials must be monic");
        out.push_back(poly);
    }
    return out;
}

ExperimentKind kind_of(const json& j, const std::string& ptr) {
    if (!j.is_string()) bad(ptr, "expected a string");
    std::string s = j.get<std::string>();
    for (auto k : {ExperimentKind::Ratio, ExperimentKind::SecondType, ExperimentKind::Induced, ExperimentKind::Zeros,
                   ExperimentKind::Identities})
        if (s == to_string(k)) return k;
    bad(ptr, "unknown experiment kind '" + s + "'");
}

// Supports a test point must clear, by kind.
std::vector<int> relevant_levels(const ExperimentConfig& c) {
    const int m = c.system.m();
    std::vector<int> lv;
    switch (c.kind) {
        case ExperimentKind::Ratio:
            lv.push_back(1);
            if (c.variant_l)
                for (int k = 2; k <= m; ++k) lv.push_back(k);
            break;
        case ExperimentKind::SecondType:
            for (int k : c.levels) {
                if (k >= 1) lv.push_back(k);
                lv.push_back(k + 1);
            }
            break;
        default:
            for (int k = 1; k <= m; ++k) lv.push_back(k);
    }
    return lv;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig c;
    c.source = doc;
    c.hash = fnv1a_hex(doc.dump());
    if (!doc.is_object()) bad("", "config must be a JSON object");
    int sv = int_of(field(doc, "", "schema_version"), "/schema_version");
    if (sv != kSchemaVersion) bad("/schema_version", "unsupported version " + std::to_string(sv));
    const json& name = field(doc, "", "name");
    if (!name.is_string() || name.get<std::string>().empty()) bad("/name", "expected a non-empty string");
    c.name = name.get<std::string>();
    for (char ch : c.name)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-'))
            bad("/name", "use letters, digits, '_' or '-'");
    c.kind = kind_of(field(doc, "", "kind"), "/kind");
    if (doc.contains("precision_bits")) {
        int b = int_of(doc["precision_bits"], "/precision_bits");
        if (b < 64) bad("/precision_bits", "must be at least 64");
        c.precision_bits = static_cast<unsigned>(b);
    }
    PrecisionGuard guard(c.precision_bits ? c.precision_bits : working_bits());

    const json& ms = field(field(doc, "", "system"), "/system", "measures");
    if (!ms.is_array() || ms.empty()) bad("/system/measures", "expected a non-empty list");
    std::vector<Measure> measures;
    for (size_t i = 0; i < ms.size(); ++i) measures.push_back(measure_of(ms[i], "/system/measures/" + std::to_string(i)));
    try {
        c.system = build_system(measures);
    } catch (const Error& e) {
        bad("/system/measures", e.what());
    }
    const int m = c.system.m();

    c.perturbation = RationalPerturbation::trivial(m);
    if (doc.contains("perturbation")) {
        const json& p = doc["perturbation"];
        auto ps = p.contains("p") ? polys_of(p["p"], "/perturbation/p", m)
                                  : std::vector<Polynomial>(m, Polynomial::constant(Complex(1)));
        if (p.contains("q"))
            c.perturbation = RationalPerturbation::rational(ps, polys_of(p["q"], "/perturbation/q", m));
        else
            c.perturbation = RationalPerturbation::polynomial(ps);
        try {
            c.perturbation.validate(c.system);
        } catch (const Error& e) {
            bad("/perturbation", e.what());
        }
    }

    const json& lad = field(doc, "", "ladder");
    const json& base = field(lad, "/ladder", "base");
    if (!base.is_array() || static_cast<int>(base.size()) != m) bad("/ladder/base", "expected " + std::to_string(m) + " entries");
    MultiIndex b;
    for (size_t i = 0; i < base.size(); ++i) b.push_back(int_of(base[i], "/ladder/base/" + std::to_string(i)));
    int count = lad.contains("count") ? int_of(lad["count"], "/ladder/count") : 1;
    int stride = lad.contains("stride") ? int_of(lad["stride"], "/ladder/stride") : 1;
    try {
        c.ladder = build_ladder(b, count, c.perturbation.class_degrees(), stride);
    } catch (const Error& e) {
        bad("/ladder", e.what());
    }

    if (doc.contains("levels")) {
        const json& lv = doc["levels"];
        if (!lv.is_array()) bad("/levels", "expected a list");
        for (size_t i = 0; i < lv.size(); ++i) {
            int k = int_of(lv[i], "/levels/" + std::to_string(i));
            if (k < 0 || k > m - 1) bad("/levels/" + std::to_string(i), "level must lie in 0..m-1");
            c.levels.push_back(k);
        }
    } else {
        for (int k = 0; k < m; ++k) c.levels.push_back(k);
    }
    if (doc.contains("variant_l")) {
        c.variant_l = int_of(doc["variant_l"], "/variant_l");
        if (c.variant_l < 1 || c.variant_l > m) bad("/variant_l", "must lie in 1..m");
    }

    if (doc.contains("points")) {
        const json& pts = doc["points"];
        if (pts.contains("circle")) {
            const json& ci = pts["circle"];
            Complex center = ci.contains("center") ? complex_of(ci["center"], "/points/circle/center") : Complex(0);
            Real radius = real_of(field(ci, "/points/circle", "radius"), "/points/circle/radius");
            int n = ci.contains("count") ? int_of(ci["count"], "/points/circle/count") : 16;
            if (!(radius > 0) || n < 1) bad("/points/circle", "needs a positive radius and count");
            c.points = circle_points(center, radius, n);
        } else if (pts.contains("list")) {
            const json& l = pts["list"];
            if (!l.is_array() || l.empty()) bad("/points/list", "expected a non-empty list");
            for (size_t i = 0; i < l.size(); ++i) c.points.push_back(complex_of(l[i], "/points/list/" + std::to_string(i)));
        } else {
            bad("/points", "expected 'circle' or 'list'");
        }
    } else if (c.kind == ExperimentKind::Ratio || c.kind == ExperimentKind::SecondType ||
               c.kind == ExperimentKind::Induced) {
        bad("/points", "missing");
    }
    for (size_t i = 0; i < c.points.size(); ++i)
        for (int k : relevant_levels(c)) {
            const Measure& s = c.system.sigma(k);
            if (!(s.support_distance(c.points[i]) > s.delta_clear()))
                bad("/points", "point " + std::to_string(i) + " = " + to_string(c.points[i], 8) +
                                   " is within the clearance of supp sigma_" + std::to_string(k));
        }

    if (c.kind == ExperimentKind::Induced && !c.perturbation.real_flag())
        bad("/perturbation", "the induced experiment needs real coefficients");

    if (doc.contains("tolerances")) {
        const json& t = doc["tolerances"];
        auto opt = [&](const char* key, Real& dst) {
            if (t.contains(key)) dst = real_of(t[key], std::string("/tolerances/") + key);
        };
        opt("final_error", c.tol.final_error);
        opt("k_ratio", c.tol.k_ratio);
        opt("floor", c.tol.floor);
        opt("orth", c.tol.orth);
        opt("attraction_radius", c.tol.attraction_radius);
        opt("support_margin", c.tol.support_margin);
        if (t.contains("attraction_min_norm")) c.tol.attraction_min_norm = int_of(t["attraction_min_norm"], "/tolerances/attraction_min_norm");
    }
    if (doc.contains("output")) {
        if (!doc["output"].is_string()) bad("/output", "expected a path string");
        c.output = doc["output"].get<std::string>();
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error(path + ": malformed JSON: " + e.what());
    }
    return parse_config(doc);
}

CVec circle_points(const Complex& center, const Real& radius, int count) {
    CVec out;
    for (int i = 0; i < count; ++i) {
        Real a = 2 * pi() * (Real(i) + Real("0.5")) / count;
        out.push_back(center + Complex(radius * boost::multiprecision::cos(a), radius * boost::multiprecision::sin(a)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checks and serialization.

Check bound_check(std::string name, const Real& value, const Real& threshold) {
    Check c;
    c.name = std::move(name);
    c.value = value;
    c.threshold = threshold;
    c.pass = value <= threshold;
    return c;
}

Check exact_check(std::string name, long long got, long long want) {
    Check c;
    c.name = std::move(name);
    c.value = Real(got);
    c.threshold = Real(want);
    c.exact = true;
    c.pass = got == want;
    return c;
}

namespace {

// Fewer digits than the precision carries so that print -> parse -> print is stable.
int report_digits(unsigned bits) { return static_cast<int>(std::floor((bits - 1) * 0.30102999566398120)) - 1; }

struct Fmt {
    int digits;
    std::string r(const Real& x) const { return to_string(x, digits); }
    json c(const Complex& z) const { return json::array({r(z.re), r(z.im)}); }
};

json check_json(const Check& c, const Fmt& f) {
    json j{{"name", c.name}, {"pass", c.pass}};
    if (c.exact) {
        j["got"] = static_cast<long long>(c.value);
        j["want"] = static_cast<long long>(c.threshold);
    } else {
        j["value"] = f.r(c.value);
        j["threshold"] = f.r(c.threshold);
    }
    return j;
}

json record_json(const Record& r, const Fmt& f) {
    return json{{"series", r.series},
                {"z", r.at_infinity ? json("inf") : f.c(r.z)},
                {"empirical", f.c(r.empirical)},
                {"limit", f.c(r.limit)},
                {"abs_err", f.r(r.abs_err)},
                {"rel_err", f.r(r.rel_err)}};
}

json rung_json(const Rung& r, const Fmt& f, const std::string& hash) {
    json j{{"n", r.n}, {"norm", norm(r.n)}, {"degree", r.degree}, {"bits", r.bits}, {"config_hash", hash}};
    json recs = json::array(), checks = json::array();
    for (const auto& x : r.records) recs.push_back(record_json(x, f));
    for (const auto& c : r.checks) checks.push_back(check_json(c, f));
    j["records"] = recs;
    j["checks"] = checks;
    j["extra"] = r.extra;
    return j;
}

Complex parse_complex(const json& j) { return Complex(parse_real(j[0].get<std::string>()), parse_real(j[1].get<std::string>())); }

Rung rung_from_json(const json& j) {
    Rung r;
    r.n = j["n"].get<MultiIndex>();
    r.degree = j["degree"];
    r.bits = j["bits"];
    for (const auto& x : j["records"]) {
        Record rec;
        rec.series = x["series"];
        rec.at_infinity = x["z"].is_string();
        if (!rec.at_infinity) rec.z = parse_complex(x["z"]);
        rec.empirical = parse_complex(x["empirical"]);
        rec.limit = parse_complex(x["limit"]);
        rec.abs_err = parse_real(x["abs_err"].get<std::string>());
        rec.rel_err = parse_real(x["rel_err"].get<std::string>());
        r.records.push_back(rec);
    }
    for (const auto& x : j["checks"]) {
        Check c;
        c.name = x["name"];
        c.pass = x["pass"];
        if (x.contains("got")) {
            c.exact = true;
            c.value = Real(x["got"].get<long long>());
            c.threshold = Real(x["want"].get<long long>());
        } else {
            c.value = parse_real(x["value"].get<std::string>());
            c.threshold = parse_real(x["threshold"].get<std::string>());
        }
        r.checks.push_back(c);
    }
    r.extra = j["extra"];
    return r;
}

const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Numerical: return "numerical";
        case ErrorKind::Proximity: return "proximity";
        case ErrorKind::Structural: return "structural";
        case ErrorKind::Assertion: return "assertion";
    }
    return "?";
}

Record make_record(std::string series, const Complex& z, const Complex& emp, const Complex& lim) {
    Record r;
    r.series = std::move(series);
    r.z = z;
    r.empirical = emp;
    r.limit = lim;
    r.abs_err = abs(emp - lim);
    Real l = abs(lim);
    r.rel_err = l > 0 ? r.abs_err / l : r.abs_err;
    return r;
}

Record infinity_record(std::string series, const Real& emp, const Real& lim) {
    Record r = make_record(std::move(series), Complex(0), Complex(emp), Complex(lim));
    r.at_infinity = true;
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiment bodies.

namespace {

struct Context {
    const ExperimentConfig& cfg;
    const RunOptions& opt;
    std::unique_ptr<LimitSuite> suite;
    PerturbationRoots num, den;
    bool rational = false;

    const NikishinSystem& sys() const { return cfg.system; }
    const RationalPerturbation& pert() const { return cfg.perturbation; }
    int m() const { return cfg.system.m(); }

    Complex script_F(const Complex& z) const {
        return rational ? suite->script_F_rational(num, den, z) : suite->script_F(num, z);
    }
    Complex G(int k, const Complex& z) const { return rational ? suite->G_rational(num, den, k, z) : suite->G(num, k, z); }
    Complex F(int k, const Complex& z) const {
        return rational ? suite->F_k_rational(num, den, k, z) : suite->F_k(num, k, z);
    }
    std::vector<int> signs() const {
        std::vector<int> s;
        for (int k = 1; k <= m(); ++k) s.push_back(pert().sign_on_support(sys(), k));
        return s;
    }
    Real K_ratio(int k) const {
        return rational ? suite->K_ratio_limit_rational(num, den, signs(), k) : suite->K_ratio_limit(num, signs(), k);
    }
};

void orth_checks(Rung& r, const Context& c, const MopResult& plain, const MopResult& tilde) {
    r.checks.push_back(bound_check("orthogonality Q_n", plain.residual, c.cfg.tol.orth));
    r.checks.push_back(bound_check("orthogonality Q~_n", tilde.residual, c.cfg.tol.orth));
}

void zero_structure_checks(Rung& r, const Context& c, const MopResult& plain) {
    auto rep = classify_zeros(mop_zeros(plain.Q), c.sys().hull(1));
    r.checks.push_back(exact_check("Q_n real zeros inside Delta_1", rep.real_inside, norm(r.n)));
    r.checks.push_back(exact_check("Q_n zeros simple", rep.simple ? 1 : 0, 1));
}

Real contour_radius(const NikishinSystem& sys, int k) {
    const Interval& iv = sys.hull(k);
    Real r = iv.hi - iv.lo;
    if (k >= 2) {
        const Interval& prev = sys.hull(k - 1);
        Real gap = prev.hi < iv.lo ? Real(iv.lo - prev.hi) : Real(prev.lo - iv.hi);
        r = std::min(r, gap);
    }
    return r / 4;
}

Rung ratio_rung(const Context& c, const MultiIndex& n) {
    Rung r;
    r.n = n;
    auto q = solve_mop(c.sys(), n);
    auto qt = solve_perturbed_mop(c.sys(), c.pert(), n);
    r.degree = qt.degree;
    r.bits = std::max(q.bits, qt.bits);
    PrecisionGuard g(r.bits);
    orth_checks(r, c, q, qt);
    zero_structure_checks(r, c, q);
    for (const auto& z : c.cfg.points) r.records.push_back(make_record("ratio", z, qt.Q(z) / q.Q(z), c.script_F(z)));
    if (int l = c.cfg.variant_l) {
        MultiIndex nl = n;
        ++nl[l - 1];
        if (!check_index_class(nl, c.pert().class_degrees()))
            throw config_error("n^" + std::to_string(l) + " = " + to_string(nl) + " leaves the index class");
        auto qtl = solve_perturbed_mop(c.sys(), c.pert(), nl);
        PrecisionGuard g2(std::max(r.bits, qtl.bits));
        r.checks.push_back(bound_check("orthogonality Q~_{n^l}", qtl.residual, c.cfg.tol.orth));
        for (const auto& z : c.cfg.points)
            r.records.push_back(
                make_record("ratio_nl" + std::to_string(l), z, qtl.Q(z) / qt.Q(z), c.suite->f_tilde(1, l, z)));
    }
    return r;
}

Rung second_type_rung(const Context& c, const MultiIndex& n) {
    Rung r;
    r.n = n;
    auto q = solve_mop(c.sys(), n);
    auto qt = solve_perturbed_mop(c.sys(), c.pert(), n);
    r.degree = qt.degree;
    r.bits = std::max(q.bits, qt.bits);
    PrecisionGuard g(r.bits);
    orth_checks(r, c, q, qt);
    zero_structure_checks(r, c, q);
    auto P = plain_family(c.sys(), n, q.Q);
    auto T = tilde_family(c.sys(), c.pert(), n, qt.Q);
    for (int k : c.cfg.levels)
        for (const auto& z : c.cfg.points)
            r.records.push_back(make_record("psi" + std::to_string(k), z, T(k, z) / P(k, z), c.G(k, z)));
    // zeros of Psi_{n,k} and Psi~_{n,k} around Delta_{k+1}
    for (int k = 0; k < c.m(); ++k) {
        int N = 0;
        for (int j = k + 1; j <= c.m(); ++j) N += n[j - 1];
        Real rad = contour_radius(c.sys(), k + 1);
        const Interval& iv = c.sys().hull(k + 1);
        int cp = contour_zero_count([&](const Complex& z) { return P(k, z); }, iv, rad, N);
        int ct = contour_zero_count([&](const Complex& z) { return T(k, z); }, iv, rad, N);
        r.checks.push_back(exact_check("Psi_{n," + std::to_string(k) + "} zeros around Delta_" + std::to_string(k + 1), cp, N));
        r.checks.push_back(exact_check("Psi~_{n," + std::to_string(k) + "} zeros around Delta_" + std::to_string(k + 1), ct, N));
    }
    return r;
}

Rung induced_rung(const Context& c, const MultiIndex& n) {
    Rung r;
    r.n = n;
    auto q = solve_induced(c.sys(), n);
    auto qt = solve_tilde_induced(c.sys(), c.pert(), n);
    r.degree = qt.mop.degree;
    r.bits = std::max(q.bits, qt.bits);
    PrecisionGuard g(r.bits);
    orth_checks(r, c, q.mop, qt.mop);
    zero_structure_checks(r, c, q.mop);
    for (int k = 1; k <= c.m(); ++k) {
        r.checks.push_back(exact_check("Psi_{n," + std::to_string(k - 1) + "} zeros on Delta_" + std::to_string(k),
                                       q.induced.contour_count[k], q.induced.N(k)));
        r.checks.push_back(exact_check("Psi~_{n," + std::to_string(k - 1) + "} zeros on Delta_" + std::to_string(k),
                                       qt.induced.contour_count[k], qt.induced.N(k)));
    }
    for (int k = 1; k <= c.m(); ++k)
        for (const auto& z : c.cfg.points)
            r.records.push_back(
                make_record("induced_q" + std::to_string(k), z, qt.induced.Q(k, z) / q.induced.Q(k, z), c.F(k, z)));
    for (int k = 1; k < c.m(); ++k) {
        Real emp = qt.induced.K[k] * qt.induced.K[k] / (q.induced.K[k] * q.induced.K[k]);
        r.records.push_back(infinity_record("k_ratio" + std::to_string(k), emp, c.K_ratio(k)));
    }
    // eps_{n,k} / eps~_{n,k} = prod_{i<=k} sign(p_i on supp sigma_i)
    auto s = c.signs();
    int prod = 1;
    for (int k = 1; k <= c.m(); ++k) {
        prod *= s[k - 1];
        r.checks.push_back(exact_check("eqsignos k=" + std::to_string(k), q.induced.eps[k] * qt.induced.eps[k], prod));
    }
    return r;
}

// Roots near each atom and the distance of the rest to the continuous part.
void attraction(Rung& r, const Context& c, const std::string& label, const CVec& roots, const Measure& s) {
    const Real rad = c.cfg.tol.attraction_radius;
    std::vector<bool> used(roots.size(), false);
    json atoms = json::array();
    bool enforce = norm(r.n) >= c.cfg.tol.attraction_min_norm;
    for (const auto& a : s.atoms) {
        int near = 0;
        for (size_t i = 0; i < roots.size(); ++i)
            if (abs(roots[i] - Complex(a.location)) < rad) {
                ++near;
                used[i] = true;
            }
        atoms.push_back({{"atom", to_string(a.location, 20)}, {"roots_within", near}});
        if (enforce) r.checks.push_back(exact_check(label + " roots near atom " + to_string(a.location, 6), near, 1));
    }
    Real far = 0;
    for (size_t i = 0; i < roots.size(); ++i)
        if (!used[i]) far = std::max(far, s.interval.distance(roots[i]));
    if (enforce) r.checks.push_back(bound_check(label + " other roots to the interval", far, c.cfg.tol.support_margin));
    r.extra[label] = {{"count", roots.size()}, {"atoms", atoms}, {"max_distance_rest", to_string(far, 12)}};
}

Rung zeros_rung(const Context& c, const MultiIndex& n) {
    Rung r;
    r.n = n;
    auto qt = solve_perturbed_mop(c.sys(), c.pert(), n);
    auto q = solve_mop(c.sys(), n);
    r.degree = qt.degree;
    r.bits = std::max(q.bits, qt.bits);
    PrecisionGuard g(r.bits);
    orth_checks(r, c, q, qt);
    attraction(r, c, "Q~_n", mop_zeros(qt.Q), c.sys().sigma(1));
    attraction(r, c, "Q_n", mop_zeros(q.Q), c.sys().sigma(1));
    if (c.pert().real_flag() && c.m() >= 2) {
        auto ti = solve_tilde_induced(c.sys(), c.pert(), n);
        auto pi = solve_induced(c.sys(), n);
        PrecisionGuard g2(std::max({r.bits, ti.bits, pi.bits}));
        for (int k = 2; k <= c.m(); ++k) {
            attraction(r, c, "Psi~_{n," + std::to_string(k - 1) + "}", ti.induced.zeros[k], c.sys().sigma(k));
            attraction(r, c, "Psi_{n," + std::to_string(k - 1) + "}", pi.induced.zeros[k], c.sys().sigma(k));
        }
    }
    return r;
}

// 4 x 5 grid spanning the slits, off the real axis.
CVec identity_grid(const NikishinSystem& sys) {
    Real lo = sys.hull(1).lo, hi = sys.hull(1).hi;
    for (int k = 2; k <= sys.m(); ++k) {
        lo = std::min(lo, sys.hull(k).lo);
        hi = std::max(hi, sys.hull(k).hi);
    }
    CVec g;
    for (int i = 0; i < 5; ++i)
        for (Real y : {Real("-1.5"), Real("-0.5"), Real("0.5"), Real("1.5")})
            g.emplace_back(lo - 1 + (hi - lo + 2) * i / 4, y);
    return g;
}

Rung identities_rung(const Context& c, const MultiIndex& n) {
    Rung r;
    r.n = n;
    const auto& sys = c.sys();
    const auto& pert = c.pert();
    const int m = c.m();
    auto pi = solve_induced(sys, n);
    auto qt = solve_perturbed_mop(sys, pert, n);
    r.degree = qt.degree;
    r.bits = std::max(pi.bits, qt.bits);
    PrecisionGuard g(r.bits);
    orth_checks(r, c, pi.mop, qt);
    zero_structure_checks(r, c, pi.mop);
    CVec zs = c.cfg.points.empty() ? identity_grid(sys) : c.cfg.points;
    CVec far;
    for (const auto& z : zs) {
        bool ok = true;
        for (int k = 1; k <= m; ++k) ok = ok && sys.sigma(k).support_distance(z) > sys.sigma(k).delta_clear();
        if (ok) far.push_back(z);
    }
    if (far.empty()) far.push_back(Complex(sys.hull(1).hi + 10, Real(1)));

    for (int k = 1; k <= m; ++k) {
        r.checks.push_back(exact_check("Psi_{n," + std::to_string(k - 1) + "} zeros on Delta_" + std::to_string(k),
                                       pi.induced.contour_count[k], pi.induced.N(k)));
        r.checks.push_back(bound_check("h recursion k=" + std::to_string(k), verify_h_recursion(pi.induced, k, far),
                                       Real(Tolerances::current().check)));
        r.checks.push_back(bound_check("varying orthogonality k=" + std::to_string(k),
                                       varying_orthogonality_residual(pi.induced, k), c.cfg.tol.orth));
    }

    // sign law for n^l
    auto table = delta_table(sys.hulls);
    for (int l = 1; l <= m; ++l) {
        MultiIndex nl = n;
        ++nl[l - 1];
        if (!check_index_class(nl)) continue;
        auto pl = solve_induced(sys, nl);
        for (int k = 1; k <= m; ++k)
            r.checks.push_back(exact_check("ratioepsilons l=" + std::to_string(l) + " k=" + std::to_string(k),
                                           pl.induced.eps[k] * pi.induced.eps[k], table.ratio_eps(k, l)));
    }

    if (pert.is_trivial()) return r;

    if (pert.real_flag()) {
        auto ti = solve_tilde_induced(sys, pert, n);
        int prod = 1;
        for (int k = 1; k <= m; ++k) {
            prod *= pert.sign_on_support(sys, k);
            r.checks.push_back(exact_check("eqsignos k=" + std::to_string(k), pi.induced.eps[k] * ti.induced.eps[k], prod));
        }
    }
    if (pert.has_denominators()) return r;

    // Polynomial perturbations: Lemmas 1 to 4, the R-family decomposition and its relation to Psi~.
    int dsum = pert.deg_p(1, m);
    Discretization plain(sys, default_nodes(sys, n, dsum));
    Discretization tilde(sys, default_nodes(sys, n, dsum), &pert);
    for (int k = 1; k <= m; ++k) {
        auto l = lemma1_decompose(plain, pert, k);
        r.checks.push_back(bound_check("lemma1 k=" + std::to_string(k), lemma1_residual(plain, tilde, pert, k, l, 6),
                                       Real("1e-20")));
    }
    r.checks.push_back(bound_check("lemma2", lemma2_residual(plain, pert, qt.Q, n), Tolerances::current().orth()));
    auto ex = lemma3_expansion(sys, pert, n, qt.Q, plain);
    r.checks.push_back(bound_check("lemma3 residual", ex.residual, Real("1e-18")));
    r.checks.push_back(exact_check("lemma3 lambda structure", ex.structure_ok ? 1 : 0, 1));
    Polynomial R = qt.Q * product(pert.p);
    Polynomial Q0 = solve_mop(plain, ex.indices[0]).Q;
    r.checks.push_back(bound_check("lemma4 omega", lemma4_omega_residual(R, Q0, pert, sys.hull(1)), Real("1e-12")));
    auto Rf = r_family(sys, pert, n, qt.Q);
    auto Tf = tilde_family(sys, pert, n, qt.Q);
    r.checks.push_back(bound_check("lemma4 chain", lemma4_chain_residual(Rf, pert), Real("1e-12")));
    for (int k = 2; k <= m; ++k)
        r.checks.push_back(bound_check("eq13 k=" + std::to_string(k), verify_eq13(Rf, k, far), Real("1e-15")));
    r.checks.push_back(bound_check("R vs Psi~ relation", lemmarelation_residual(Rf, Tf, pert, far), Real("1e-15")));
    return r;
}

std::vector<Check> limit_identities(const Context& c) {
    std::vector<Check> out;
    const auto& L = *c.suite;
    const auto& cov = L.cover();
    const int m = c.m();
    CVec grid = identity_grid(c.sys());
    out.push_back(bound_check("covering residual", cov.residual(), Real("1e-30")));
    auto rt = covering_round_trip(cov, 200, c.opt.seed);
    out.push_back(bound_check("covering round trip", rt.max_residual, Tolerances::current().newton() * 1000));
    out.push_back(exact_check("covering cells injective", rt.injective ? 1 : 0, 1));
    for (int l = 1; l <= m; ++l) {
        auto p = branch_product(L.psi(l), grid);
        out.push_back(bound_check("branch product spread l=" + std::to_string(l), p.spread, Real("1e-25")));
        out.push_back(bound_check("branch product +-1 l=" + std::to_string(l), p.unit_gap, Real("1e-20")));
        if (l == 1) out.push_back(exact_check("branch product value l=1", p.value, 1));
        for (int k = 0; k < m; ++k) {
            const Interval& s = cov.spec().slit(k + 1);
            RVec xs;
            for (int i = 1; i <= 3; ++i) xs.push_back(s.lo + (s.hi - s.lo) * i / 4);
            out.push_back(bound_check("boundary conjugation l=" + std::to_string(l) + " k=" + std::to_string(k),
                                      boundary_conjugation(L.psi(l), k, xs, Real("1e-6")), Real("1e-5")));
        }
    }
    for (int l = 2; l <= m; ++l)
        out.push_back(bound_check("relalg l=" + std::to_string(l), verify_relalg(L.branches(), l, grid), Real("1e-20")));
    for (int k = 2; k <= m; ++k) {
        CVec ts;
        for (const auto& [t, tau] : c.num.group(k)) ts.push_back(t);
        if (ts.empty()) ts.push_back(Complex(c.sys().hull(m).hi + 3));
        CVec off;
        for (const auto& t : ts)
            if (!cov.on_cut(k - 1, t)) off.push_back(t);
        if (!off.empty())
            out.push_back(bound_check("neweq chain k=" + std::to_string(k), neweq_chain_residual(L, k, grid, off), Real("1e-20")));
        out.push_back(bound_check("varphi consistency k=" + std::to_string(k), varphi_consistency(L, k, grid), Real("1e-20")));
    }
    for (int k = 1; k < m; ++k)
        out.push_back(bound_check("relationFk k=" + std::to_string(k), relation_Fk_residual(L, c.num, k, grid), Real("1e-18")));
    auto table = delta_table(c.sys().hulls);
    for (int k = 1; k <= m; ++k)
        for (int l = 1; l <= m; ++l) {
            int d = table.Delta(k, l);
            out.push_back(exact_check("Delta table entry k=" + std::to_string(k) + " l=" + std::to_string(l),
                                      d == 1 || d == -1, 1));
        }
    return out;
}

using RungFn = Rung (*)(const Context&, const MultiIndex&);

RungFn rung_fn(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Ratio: return ratio_rung;
        case ExperimentKind::SecondType: return second_type_rung;
        case ExperimentKind::Induced: return induced_rung;
        case ExperimentKind::Zeros: return zeros_rung;
        case ExperimentKind::Identities: return identities_rung;
    }
    return ratio_rung;
}

// Runs one rung and returns its serialized form; module errors become a failing check.
json guarded_rung(const Context& c, const MultiIndex& n, const Fmt& f, double* seconds) {
    auto t0 = std::chrono::steady_clock::now();
    json j;
    try {
        j = rung_json(rung_fn(c.cfg.kind)(c, n), f, c.cfg.hash);
    } catch (const Error& e) {
        Rung r;
        r.n = n;
        r.bits = working_bits();
        r.checks.push_back(exact_check(std::string("completed without ") + kind_name(e.kind()) + " error", 0, 1));
        r.extra["error"] = {{"kind", kind_name(e.kind())}, {"message", e.what()}};
        j = rung_json(r, f, c.cfg.hash);
    }
    *seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return j;
}

// Process pool: MPFR's default precision is process-wide here, so rungs run in forked children.
std::vector<std::pair<json, double>> run_rungs(const Context& c, const Fmt& f) {
    const auto& ladder = c.cfg.ladder;
    std::vector<std::pair<json, double>> out(ladder.size());
    if (c.opt.threads <= 1 || ladder.size() <= 1) {
        for (size_t i = 0; i < ladder.size(); ++i) out[i].first = guarded_rung(c, ladder[i], f, &out[i].second);
        return out;
    }
    namespace fs = std::filesystem;
    char tmpl[] = "/tmp/nikishin_rungs_XXXXXX";
    if (!mkdtemp(tmpl)) throw numerical_error("cannot create a scratch directory for rung workers");
    fs::path dir(tmpl);
    std::map<pid_t, size_t> running;
    size_t next = 0;
    std::fflush(nullptr);
    auto reap = [&]() {
        int status = 0;
        pid_t pid = waitpid(-1, &status, 0);
        if (pid <= 0) throw numerical_error("lost a rung worker");
        size_t i = running.at(pid);
        running.erase(pid);
        std::ifstream in(dir / (std::to_string(i) + ".json"));
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0 || !in)
            throw numerical_error("rung worker for n=" + to_string(ladder[i]) + " died");
        json j = json::parse(in);
        out[i] = {j["rung"], j["seconds"].get<double>()};
    };
    while (next < ladder.size() || !running.empty()) {
        if (next < ladder.size() && static_cast<int>(running.size()) < c.opt.threads) {
            pid_t pid = fork();
            if (pid < 0) throw numerical_error("fork failed");
            if (pid == 0) {
                int code = 0;
                try {
                    double s = 0;
                    json j = guarded_rung(c, ladder[next], f, &s);
                    std::ofstream o(dir / (std::to_string(next) + ".json"));
                    o << json{{"rung", j}, {"seconds", s}}.dump();
                    o.close();
                    code = o ? 0 : 1;
                } catch (...) {
                    code = 1;
                }
                std::fflush(nullptr);
                _exit(code);
            }
            running[pid] = next++;
        } else {
            reap();
        }
    }
    fs::remove_all(dir);
    return out;
}

}  // namespace

std::string trend_verdict(const std::vector<Real>& e, const Real& floor) {
    if (e.size() < 3) return "insufficient";
    const Real &a = e[e.size() - 3], &b = e[e.size() - 2], &c = e[e.size() - 1];
    if (a <= floor && b <= floor && c <= floor) return "at_floor";
    if (b < a && c < b) return "decreasing";
    return "not_decreasing";
}

Report run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    PrecisionGuard guard(cfg.precision_bits ? cfg.precision_bits : working_bits());
    Report rep;
    rep.config = cfg;
    rep.bits = working_bits();
    rep.seed = opt.seed;
    const Fmt f{report_digits(rep.bits)};

    Context c{cfg, opt, nullptr, PerturbationRoots::numerators(cfg.perturbation),
              PerturbationRoots::denominators(cfg.perturbation), cfg.perturbation.has_denominators()};
    if (cfg.kind != ExperimentKind::Zeros)
        c.suite = std::make_unique<LimitSuite>(cached_covering(SurfaceSpec::from_system(cfg.system), opt.cache_dir));
    if (cfg.kind == ExperimentKind::Identities) rep.checks = limit_identities(c);
    if (cfg.kind == ExperimentKind::Induced && c.m() >= 2)
        for (int k = 1; k < c.m(); ++k)
            rep.checks.push_back(bound_check("relationFk k=" + std::to_string(k),
                                             relation_Fk_residual(*c.suite, c.num, k, cfg.points), Real("1e-18")));

    auto rungs = run_rungs(c, f);
    for (auto& [j, s] : rungs) {
        rep.rungs.push_back(rung_from_json(j));
        rep.rungs.back().seconds = s;
    }

    // summaries, in order of first appearance
    std::vector<std::string> names;
    for (const auto& r : rep.rungs)
        for (const auto& x : r.records)
            if (std::find(names.begin(), names.end(), x.series) == names.end()) names.push_back(x.series);
    bool pass = true;
    for (const auto& name : names) {
        SeriesSummary s;
        s.series = name;
        bool is_k = name.rfind("k_ratio", 0) == 0;
        s.trend_required = !is_k;
        s.threshold = is_k ? cfg.tol.k_ratio : cfg.tol.final_error;
        for (const auto& r : rep.rungs) {
            Real mx = 0;
            bool any = false;
            for (const auto& x : r.records)
                if (x.series == name) {
                    mx = std::max(mx, x.abs_err);
                    any = true;
                }
            s.max_error.push_back(any ? mx : Real(-1));
        }
        s.verdict = trend_verdict(s.max_error, cfg.tol.floor);
        bool complete = std::none_of(s.max_error.begin(), s.max_error.end(), [](const Real& v) { return v < 0; });
        bool final_ok = complete && !s.max_error.empty() && s.max_error.back() <= s.threshold;
        bool trend_ok = !s.trend_required || s.verdict == "decreasing" || s.verdict == "at_floor" ||
                        (s.verdict == "insufficient" && final_ok);
        s.pass = final_ok && trend_ok;
        pass = pass && s.pass;
        rep.series.push_back(std::move(s));
    }
    for (const auto& r : rep.rungs)
        for (const auto& ch : r.checks) pass = pass && ch.pass;
    for (const auto& ch : rep.checks) pass = pass && ch.pass;
    rep.pass = pass;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

namespace {

Report run_as(ExperimentConfig cfg, ExperimentKind kind, const RunOptions& opt) {
    cfg.kind = kind;
    if (kind == ExperimentKind::Induced && !cfg.perturbation.real_flag())
        throw config_error("/perturbation: the induced experiment needs real coefficients");
    if ((kind == ExperimentKind::Ratio || kind == ExperimentKind::SecondType || kind == ExperimentKind::Induced) &&
        cfg.points.empty())
        throw config_error("/points: missing");
    return run_experiment(cfg, opt);
}

}  // namespace

Report run_ratio_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
    return run_as(cfg, ExperimentKind::Ratio, opt);
}
Report run_second_type_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
    return run_as(cfg, ExperimentKind::SecondType, opt);
}
Report run_induced_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
    return run_as(cfg, ExperimentKind::Induced, opt);
}
Report run_zero_attraction_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
    return run_as(cfg, ExperimentKind::Zeros, opt);
}
Report run_identity_suite(const ExperimentConfig& cfg, const RunOptions& opt) {
    return run_as(cfg, ExperimentKind::Identities, opt);
}

json Report::to_json() const {
    const Fmt f{report_digits(bits)};
    json j{{"schema_version", kSchemaVersion},
           {"name", config.name},
           {"kind", to_string(config.kind)},
           {"config_hash", config.hash},
           {"config", config.source},
           {"precision_bits", bits},
           {"seed", seed}};
    json rs = json::array();
    for (const auto& r : rungs) rs.push_back(rung_json(r, f, config.hash));
    j["rungs"] = rs;
    json cs = json::array();
    for (const auto& c : checks) cs.push_back(check_json(c, f));
    j["checks"] = cs;
    json ss = json::array();
    for (const auto& s : series) {
        json e = json::array();
        for (const auto& v : s.max_error) e.push_back(f.r(v));
        ss.push_back({{"series", s.series},
                      {"max_error", e},
                      {"verdict", s.verdict},
                      {"trend_required", s.trend_required},
                      {"threshold", f.r(s.threshold)},
                      {"pass", s.pass}});
    }
    int errors = 0;
    for (const auto& r : rungs) errors += r.extra.contains("error");
    j["summary"] = {{"series", ss}, {"errors", errors}, {"pass", pass}};
    return j;
}

json Report::timing_json() const {
    json per = json::array();
    for (const auto& r : rungs) per.push_back({{"n", r.n}, {"seconds", r.seconds}});
    return json{{"schema_version", kSchemaVersion}, {"name", config.name}, {"wall_time_s", seconds}, {"rungs", per}};
}

std::vector<std::pair<std::string, std::string>> render_csv(const json& report) {
    if (!report.contains("schema_version") || report["schema_version"] != kSchemaVersion)
        throw config_error("report: unsupported or missing schema_version");
    std::vector<std::pair<std::string, std::string>> out;
    std::map<std::string, std::ostringstream> files;
    std::vector<std::string> order;
    for (const auto& r : report.at("rungs")) {
        std::string tuple = "(";
        for (size_t i = 0; i < r["n"].size(); ++i) tuple += (i ? ";" : "") + std::to_string(r["n"][i].get<int>());
        tuple += ")";
        for (const auto& x : r.at("records")) {
            std::string s = x["series"];
            if (!files.count(s)) {
                order.push_back(s);
                files[s] << "abs_n,n_tuple,z,re_empirical,im_empirical,re_limit,im_limit,abs_err,rel_err\n";
            }
            std::string z = x["z"].is_string() ? "inf" : x["z"][0].get<std::string>() + (x["z"][1].get<std::string>()[0] == '-' ? "" : "+") + x["z"][1].get<std::string>() + "i";
            files[s] << r["norm"].get<int>() << "," << tuple << "," << z << "," << x["empirical"][0].get<std::string>()
                     << "," << x["empirical"][1].get<std::string>() << "," << x["limit"][0].get<std::string>() << ","
                     << x["limit"][1].get<std::string>() << "," << x["abs_err"].get<std::string>() << ","
                     << x["rel_err"].get<std::string>() << "\n";
        }
    }
    for (const auto& s : order) out.emplace_back(s, files[s].str());
    return out;
}

std::vector<std::string> write_report(const Report& r, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> paths;
    auto put = [&](const std::string& name, const std::string& text) {
        fs::path p = fs::path(dir) / name;
        std::ofstream o(p);
        o << text;
        if (!o) throw config_error("cannot write " + p.string());
        paths.push_back(p.string());
    };
    json j = r.to_json();
    put(r.config.name + ".json", j.dump(2) + "\n");
    put(r.config.name + ".timing.json", r.timing_json().dump(2) + "\n");
    for (const auto& [s, text] : render_csv(j)) put(r.config.name + "." + s + ".csv", text);
    return paths;
}

}  // namespace nikishin
