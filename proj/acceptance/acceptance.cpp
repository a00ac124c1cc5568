// Acceptance run: one PASS/FAIL line per criterion, exit 0 only if all pass.
// Experiments come from the config catalog; each report is computed once and shared.

#include "nikishin/harness.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>

using namespace nikishin;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Catalog {
    std::string dir, out;
    RunOptions opt;
    std::map<std::string, json> reports;
    std::map<std::string, double> seconds;

    const json& get(const std::string& name) {
        auto it = reports.find(name);
        if (it != reports.end()) return it->second;
        auto t0 = Clock::now();
        auto cfg = load_config((std::filesystem::path(dir) / (name + ".json")).string());
        auto rep = run_experiment(cfg, opt);
        if (!out.empty()) write_report(rep, out);
        seconds[name] = since(t0);
        return reports.emplace(name, rep.to_json()).first->second;
    }
    double cost(const std::vector<std::string>& names) {
        double s = 0;
        for (const auto& n : names) {
            get(n);
            s += seconds[n];
        }
        return s;
    }
};

struct Verdict {
    bool pass = true;
    std::string detail;
};

Real num(const json& s) { return parse_real(s.get<std::string>()); }

std::string sci(const Real& x) { return to_string(x, 3); }

bool starts(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

// Every check matching pred, per rung and global, across the given reports.
struct Tally {
    int count = 0, failed = 0;
    Real worst = 0;
    std::string first_failure;
};

Tally tally(Catalog& cat, const std::vector<std::string>& names, const std::function<bool(const std::string&)>& pred) {
    Tally t;
    auto visit = [&](const json& c, const std::string& where) {
        std::string n = c["name"];
        if (!pred(n)) return;
        ++t.count;
        if (c.contains("value")) t.worst = std::max(t.worst, num(c["value"]));
        if (!c["pass"].get<bool>()) {
            if (!t.failed) t.first_failure = where + ": " + n;
            ++t.failed;
        }
    };
    for (const auto& name : names) {
        const json& r = cat.get(name);
        for (const auto& rung : r["rungs"]) {
            if (rung["extra"].contains("error")) {
                ++t.failed;
                if (t.first_failure.empty()) t.first_failure = name + ": " + rung["extra"]["error"]["message"].get<std::string>();
            }
            for (const auto& c : rung["checks"]) visit(c, name + " n=" + rung["n"].dump());
        }
        for (const auto& c : r["checks"]) visit(c, name);
    }
    return t;
}

Verdict from_tally(const Tally& t, bool show_worst = true) {
    Verdict v;
    v.pass = t.count > 0 && t.failed == 0;
    v.detail = std::to_string(t.count) + " checks, " + std::to_string(t.failed) + " failed";
    if (show_worst && t.count) v.detail += ", worst " + sci(t.worst);
    if (t.failed) v.detail += " (first: " + t.first_failure + ")";
    if (!t.count) v.detail += " (nothing checked)";
    return v;
}

const json& series(const json& rep, const std::string& name) {
    for (const auto& s : rep["summary"]["series"])
        if (s["series"] == name) return s;
    throw structural_error("report " + rep["name"].get<std::string>() + " has no series " + name);
}

// Strictly decreasing over the last three rungs and small enough at the last one.
Verdict trend(const json& rep, const std::string& name, const Real& threshold, bool need_threshold = true) {
    const json& s = series(rep, name);
    std::vector<Real> e;
    for (const auto& x : s["max_error"]) e.push_back(num(x));
    Verdict v;
    bool dec = e.size() >= 3 && e[e.size() - 1] < e[e.size() - 2] && e[e.size() - 2] < e[e.size() - 3];
    v.pass = dec && (!need_threshold || e.back() <= threshold);
    v.detail = name + " max error";
    for (const auto& x : e) v.detail += " " + sci(x);
    v.detail += dec ? " (strictly decreasing)" : " (not strictly decreasing)";
    return v;
}

int span(const json& rep, bool max) {
    int out = max ? 0 : 1 << 30;
    for (const auto& r : rep["rungs"]) out = max ? std::max(out, r["norm"].get<int>()) : std::min(out, r["norm"].get<int>());
    return out;
}

Verdict join(std::initializer_list<Verdict> vs) {
    Verdict out;
    for (const auto& v : vs) {
        out.pass = out.pass && v.pass;
        out.detail += (out.detail.empty() ? "" : "; ") + v.detail;
    }
    return out;
}

Verdict limit(Verdict v, double seconds, double budget) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "; %.1f s of %.0f s", seconds, budget);
    v.detail += buf;
    v.pass = v.pass && seconds <= budget;
    return v;
}

// --- criteria -------------------------------------------------------------

Complex small_joukowski(const Complex& z) {
    Complex s = z - sqrt(z - Complex(1)) * sqrt(z + Complex(1));
    return abs(s) > 1 ? Complex(1) / s : s;
}

Verdict c1_closed_forms(Catalog&) {
    auto t0 = Clock::now();
    PrecisionGuard g(256);
    NikishinSystem sys = build_system({Measure(Interval(-1, 1), Weight::chebyshev_first())});
    LimitSuite L(cached_covering(SurfaceSpec::from_system(sys)));
    std::mt19937 gen(2024);
    std::uniform_real_distribution<double> u(-4, 4);
    Real worst = 0;
    int n = 0;
    auto rel = [](const Complex& a, const Complex& b) { return abs(a - b) / abs(b); };
    while (n < 25) {
        Complex z(u(gen), u(gen));
        if (abs(z.im) < 0.05) continue;
        Complex s = small_joukowski(z);
        Complex phi = Complex(1) / (Complex(2) * s);  // (z + sqrt(z^2 - 1)) / 2
        worst = std::max({worst, rel(L.psi(1)(0, z), s), rel(L.psi(1)(1, z), Complex(1) / s),
                          rel(L.varphi(1, 0, z), phi), rel(L.f_tilde(1, 1, z), phi)});
        ++n;
    }
    Verdict v;
    v.pass = worst <= Real("1e-25");
    v.detail = "25 points, psi_0, psi_1, phi_0, F~_1 worst relative error " + sci(worst);
    return limit(v, since(t0), 5);
}

Verdict c2_orthogonality(Catalog& cat) {
    std::vector<std::string> names{"m2_pair_deg1", "m2_pair_deg2"};
    double s = cat.cost(names);
    auto t = tally(cat, names, [](const std::string& n) { return starts(n, "orthogonality"); });
    Verdict v = from_tally(t);
    int top = std::max(span(cat.get(names[0]), true), span(cat.get(names[1]), true));
    v.detail += ", up to |n| = " + std::to_string(top);
    v.pass = v.pass && top >= 60 && t.worst <= Real("1e-20");
    return limit(v, s, 180);
}

Verdict c3_zero_structure(Catalog& cat) {
    std::vector<std::string> names{"m1_sanity",          "m2_pair_deg1",           "m2_pair_deg2",
                                   "m2_pair_second_type", "m2_pair_induced",        "m2_pair_identities",
                                   "m2_pair_deg2_identities", "m3_smoke",          "m1_identities"};
    auto t = tally(cat, names, [](const std::string& n) {
        return starts(n, "Q_n real zeros") || starts(n, "Q_n zeros simple") ||
               (starts(n, "Psi") && n.find(" zeros ") != std::string::npos);
    });
    return from_tally(t, false);
}

Verdict c4_lemmas(Catalog& cat) {
    std::vector<std::string> names{"m1_identities", "m2_pair_identities", "m2_pair_deg2_identities", "m3_smoke"};
    double s = cat.cost(names);
    auto l1 = tally(cat, names, [](const std::string& n) { return starts(n, "lemma1"); });
    auto l3 = tally(cat, names, [](const std::string& n) { return starts(n, "lemma3"); });
    auto l4 = tally(cat, names, [](const std::string& n) { return starts(n, "lemma4"); });
    Verdict a = from_tally(l1), b = from_tally(l3), c = from_tally(l4);
    a.detail = "decomposition: " + a.detail;
    b.detail = "expansion and structure: " + b.detail;
    c.detail = "root conditions: " + c.detail;
    return limit(join({a, b, c}), s, 120);
}

Verdict c5_branch_identities(Catalog& cat) {
    std::vector<std::string> names{"m1_identities", "m2_pair_identities", "m2_pair_deg2_identities", "m3_smoke"};
    auto prod = tally(cat, names, [](const std::string& n) { return starts(n, "branch product"); });
    auto alg = tally(cat, names, [](const std::string& n) { return starts(n, "relalg") || starts(n, "neweq chain"); });
    auto conj = tally(cat, names, [](const std::string& n) { return starts(n, "boundary conjugation"); });
    Verdict a = from_tally(prod), b = from_tally(alg), c = from_tally(conj);
    a.detail = "products: " + a.detail;
    b.detail = "algebraic relations: " + b.detail;
    c.detail = "boundary conjugation: " + c.detail;
    return join({a, b, c});
}

Verdict ladder_trend(Catalog& cat, const std::string& name, const std::string& s, double budget) {
    double secs = cat.cost({name});
    const json& r = cat.get(name);
    Verdict v = trend(r, s, Real("5e-2"));
    v.detail += ", |n| " + std::to_string(span(r, false)) + " to " + std::to_string(span(r, true));
    v.pass = v.pass && span(r, false) <= 20 && span(r, true) >= 60;
    auto t = tally(cat, {name}, [](const std::string&) { return true; });
    if (t.failed) {
        v.pass = false;
        v.detail += "; failed check " + t.first_failure;
    }
    return limit(v, secs, budget);
}

Verdict c8_induced(Catalog& cat) {
    double secs = cat.cost({"m2_pair_induced"});
    const json& r = cat.get("m2_pair_induced");
    Verdict tr = trend(r, "induced_q2", Real(0), false);
    const json& k = series(r, "k_ratio1");
    Real kerr = num(k["max_error"].back());
    Verdict kr{kerr <= Real("1e-1"), "K~^2/K^2 error at the last rung " + sci(kerr)};
    Verdict rel = from_tally(tally(cat, {"m2_pair_induced"}, [](const std::string& n) { return starts(n, "relationFk"); }));
    rel.detail = "product identity: " + rel.detail;
    return limit(join({tr, kr, rel}), secs, 600);
}

Verdict c9_attraction(Catalog& cat) {
    const json& r = cat.get("m2_mass_points");
    Verdict v;
    int rungs = 0;
    auto t = tally(cat, {"m2_mass_points"}, [](const std::string& n) {
        return n.find("near atom") != std::string::npos || n.find("other roots") != std::string::npos;
    });
    bool first = false, second = false;
    for (const auto& rung : r["rungs"]) {
        if (rung["norm"].get<int>() < 40) continue;
        ++rungs;
        for (const auto& c : rung["checks"]) {
            std::string n = c["name"];
            first = first || starts(n, "Q~_n roots near atom");
            second = second || starts(n, "Psi~_{n,1} roots near atom");
        }
    }
    v = from_tally(t);
    v.detail = std::to_string(rungs) + " rungs with |n| >= 40, " + v.detail;
    v.pass = v.pass && rungs > 0 && first && second;
    if (!first || !second) v.detail += " (missing atom checks)";
    return v;
}

Verdict c10_sign_laws(Catalog& cat) {
    std::vector<std::string> names{"m1_identities", "m2_pair_identities", "m2_pair_deg2_identities", "m3_smoke",
                                   "m2_pair_induced"};
    auto a = tally(cat, names, [](const std::string& n) { return starts(n, "ratioepsilons"); });
    auto b = tally(cat, names, [](const std::string& n) { return starts(n, "eqsignos"); });
    Verdict x = from_tally(a, false), y = from_tally(b, false);
    x.detail = "n^l sign ratios: " + x.detail;
    y.detail = "perturbed signs: " + y.detail;
    std::set<int> ms;
    for (const auto& n : names) ms.insert(static_cast<int>(cat.get(n)["rungs"][0]["n"].size()));
    Verdict cover{ms.count(1) && ms.count(2) && ms.count(3), "m in {1,2,3} covered"};
    return join({x, y, cover});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    Catalog cat;
    cat.dir = NIKISHIN_CONFIG_DIR;
    std::set<int> only;
    app.add_option("--configs", cat.dir, "config catalog directory");
    app.add_option("--out", cat.out, "write every report here");
    app.add_option("--threads", cat.opt.threads, "parallel rung workers")->check(CLI::Range(1, 256));
    app.add_option("--only", only, "run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    struct Criterion {
        int id;
        const char* title;
        std::function<Verdict(Catalog&)> run;
    };
    std::vector<Criterion> all{
        {1, "m = 1 closed forms", c1_closed_forms},
        {2, "orthogonality residuals", c2_orthogonality},
        {3, "zero structure", c3_zero_structure},
        {4, "decomposition, expansion and root-condition lemmas", c4_lemmas},
        {5, "branch identities", c5_branch_identities},
        {6, "ratio convergence on the pair",
         [](Catalog& c) { return ladder_trend(c, "m2_pair_deg1", "ratio", 600); }},
        {7, "second-type convergence on the pair",
         [](Catalog& c) { return ladder_trend(c, "m2_pair_second_type", "psi1", 600); }},
        {8, "induced polynomials and K ratio", c8_induced},
        {9, "attraction to mass points", c9_attraction},
        {10, "sign laws", c10_sign_laws},
    };
    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        Verdict v;
        try {
            v = c.run(cat);
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("[%s] %2d %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.title, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%s\n", failed ? "acceptance: FAILED" : "acceptance: all criteria pass");
    return failed ? 1 : 0;
}
