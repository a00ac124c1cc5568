// Command-line front end: compute, riemann, verify, experiment, report.

#include "nikishin/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace nikishin;

namespace {

enum Exit { kOk = 0, kAssertion = 1, kConfig = 2, kNumerical = 3 };

int exit_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return kConfig;
        case ErrorKind::Numerical:
        case ErrorKind::Proximity: return kNumerical;
        default: return kAssertion;
    }
}

struct Common {
    std::string config, out, index;
    unsigned precision = 0;
    int threads = 1;
    unsigned seed = 0;
    bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool needs_config = true) {
    auto* o = app->add_option("--config", c.config, "JSON config file");
    if (needs_config) o->required()->check(CLI::ExistingFile);
    app->add_option("--precision", c.precision, "working precision in bits (overrides config and environment)")
        ->check(CLI::Range(64u, 1u << 16));
    app->add_option("--out", c.out, "output file or directory");
    app->add_option("--threads", c.threads, "parallel rung workers")->check(CLI::Range(1, 256));
    app->add_option("--seed", c.seed, "seed for sampled checks");
    app->add_flag("--quiet", c.quiet, "print only the verdict");
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream o(path);
    o << text;
    if (!o) throw config_error("cannot write " + path);
}

ExperimentConfig load(const Common& c) {
    auto cfg = load_config(c.config);
    // --precision, then the environment, then the config
    if (c.precision)
        cfg.precision_bits = c.precision;
    else if (const char* env = std::getenv("NIKISHIN_PRECISION_BITS"); env && *env)
        cfg.precision_bits = default_bits();
    return cfg;
}

std::string short_num(const std::string& s) {
    auto x = parse_real(s);
    return to_string(x, 4);
}

// Exit code for a finished run: rung errors keep their category, failed checks are assertions.
int run_status(const json& rep) {
    int worst = kOk;
    for (const auto& r : rep["rungs"])
        if (r["extra"].contains("error")) {
            std::string k = r["extra"]["error"]["kind"];
            int code = k == "config" ? kConfig : (k == "numerical" || k == "proximity") ? kNumerical : kAssertion;
            worst = std::max(worst, code);
        }
    if (worst != kOk) return worst;
    return rep["summary"]["pass"].get<bool>() ? kOk : kAssertion;
}

void print_summary(const json& rep, bool quiet) {
    if (!quiet) {
        for (const auto& r : rep["rungs"]) {
            int failed = 0;
            for (const auto& c : r["checks"]) failed += !c["pass"].get<bool>();
            std::cout << "  n=" << r["n"].dump() << " deg=" << r["degree"] << " bits=" << r["bits"]
                      << " checks=" << r["checks"].size() << " failed=" << failed;
            if (r["extra"].contains("error")) std::cout << " error: " << r["extra"]["error"]["message"].get<std::string>();
            std::cout << "\n";
            for (const auto& c : r["checks"])
                if (!c["pass"].get<bool>()) std::cout << "    FAIL " << c["name"].get<std::string>() << "\n";
        }
        for (const auto& c : rep["checks"])
            std::cout << "  " << (c["pass"].get<bool>() ? "ok   " : "FAIL ") << c["name"].get<std::string>()
                      << (c.contains("value") ? " = " + short_num(c["value"]) + " <= " + short_num(c["threshold"]) : "")
                      << "\n";
        for (const auto& s : rep["summary"]["series"]) {
            std::cout << "  series " << s["series"].get<std::string>() << ":";
            for (const auto& e : s["max_error"]) std::cout << " " << short_num(e);
            std::cout << " [" << s["verdict"].get<std::string>() << "] " << (s["pass"].get<bool>() ? "pass" : "FAIL")
                      << "\n";
        }
    }
    std::cout << rep["name"].get<std::string>() << ": " << (rep["summary"]["pass"].get<bool>() ? "PASS" : "FAIL") << "\n";
}

int cmd_experiment(const Common& c, bool identities_only) {
    auto cfg = load(c);
    std::string dir = !c.out.empty() ? c.out : !cfg.output.empty() ? cfg.output : "reports";
    RunOptions opt;
    opt.threads = c.threads;
    opt.seed = c.seed;
    opt.cache_dir = (std::filesystem::path(dir) / "cache").string();
    auto rep = identities_only ? run_identity_suite(cfg, opt) : run_experiment(cfg, opt);
    auto paths = write_report(rep, dir);
    json j = rep.to_json();
    print_summary(j, c.quiet);
    if (!c.quiet)
        for (const auto& p : paths) std::cout << "  wrote " << p << "\n";
    return run_status(j);
}

// Single solve at one index: coefficients, zeros and residuals.
int cmd_compute(const Common& c) {
    auto cfg = load(c);
    PrecisionGuard g(cfg.precision_bits ? cfg.precision_bits : working_bits());
    MultiIndex n = cfg.ladder.front();
    if (!c.index.empty()) {
        n.clear();
        std::stringstream ss(c.index);
        for (std::string t; std::getline(ss, t, ',');) {
            try {
                n.push_back(std::stoi(t));
            } catch (const std::exception&) {
                throw config_error("--index: '" + t + "' is not an integer");
            }
        }
        if (static_cast<int>(n.size()) != cfg.system.m()) throw config_error("--index needs one entry per measure");
        if (!check_index_class(n, cfg.perturbation.class_degrees()))
            throw config_error("--index " + to_string(n) + " is outside the index class");
    }
    auto q = solve_mop(cfg.system, n);
    auto qt = solve_perturbed_mop(cfg.system, cfg.perturbation, n);
    PrecisionGuard g2(std::max(q.bits, qt.bits));
    auto dump = [&](const MopResult& r) {
        json coeffs = json::array(), zeros = json::array();
        Polynomial mono = r.Q.to_monomial();
        for (const auto& a : mono.coeffs()) coeffs.push_back({to_string(a.re, 40), to_string(a.im, 40)});
        for (const auto& z : mop_zeros(r.Q)) zeros.push_back({to_string(z.re, 40), to_string(z.im, 40)});
        return json{{"degree", r.degree},
                    {"bits", r.bits},
                    {"orthogonality_residual", to_string(r.residual, 6)},
                    {"condition", to_string(r.condition, 6)},
                    {"monomial_coefficients", coeffs},
                    {"zeros", zeros}};
    };
    json j{{"schema_version", kSchemaVersion}, {"n", n}, {"Q", dump(q)}, {"Q_tilde", dump(qt)}};
    emit(j.dump(2) + "\n", c.out);
    return kOk;
}

int cmd_riemann(const Common& c) {
    auto cfg = load(c);
    PrecisionGuard g(cfg.precision_bits ? cfg.precision_bits : working_bits());
    auto spec = SurfaceSpec::from_system(cfg.system);
    auto cov = build_covering(spec);
    Real res = cov.residual();
    auto rt = covering_round_trip(cov, 200, c.seed);
    if (!c.out.empty()) emit(cov.to_json(), c.out);
    if (!c.quiet) {
        for (int k = 1; k <= cov.m(); ++k)
            std::cout << "  A_" << k << " = " << to_string(cov.A(k), 30) << "  B_" << k << " = " << to_string(cov.B(k), 30)
                      << "\n";
        std::cout << "  critical-value residual " << to_string(res, 4) << ", round trip " << to_string(rt.max_residual, 4)
                  << (rt.injective ? "" : " (not injective)") << "\n";
    }
    bool ok = res <= Real("1e-30") && rt.injective;
    std::cout << "riemann: " << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? kOk : kAssertion;
}

int cmd_report(const Common& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open report '" + path + "'");
    json rep;
    try {
        rep = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error(path + ": malformed JSON: " + e.what());
    }
    // Recompute every stored error from the stored values.
    int bad = 0;
    for (const auto& r : rep.at("rungs"))
        for (const auto& x : r.at("records")) {
            Complex e(parse_real(x["empirical"][0]), parse_real(x["empirical"][1]));
            Complex l(parse_real(x["limit"][0]), parse_real(x["limit"][1]));
            Real got = parse_real(x["abs_err"]);
            Real want = abs(e - l);
            if (abs(got - want) > Real("1e-40") * (1 + want)) ++bad;
        }
    std::string dir = !c.out.empty() ? c.out : std::filesystem::path(path).parent_path().string();
    if (dir.empty()) dir = ".";
    std::filesystem::create_directories(dir);
    for (const auto& [slug, text] : render_csv(rep)) {
        auto p = std::filesystem::path(dir) / (rep["name"].get<std::string>() + "." + slug + ".csv");
        emit(text, p.string());
        if (!c.quiet) std::cout << "  wrote " << p.string() << "\n";
    }
    print_summary(rep, c.quiet);
    if (bad) {
        std::cout << "report: " << bad << " records whose abs_err does not match the stored values\n";
        return kAssertion;
    }
    return run_status(rep);
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Perturbed Nikishin systems: multiple orthogonal polynomials and their ratio asymptotics"};
    app.require_subcommand(1);
    Common c;
    std::string report_path;

    auto* compute = app.add_subcommand("compute", "solve Q_n and Q~_n at one index");
    add_common(compute, c);
    compute->add_option("--index", c.index, "comma-separated multi-index (default: first ladder rung)");
    auto* riemann = app.add_subcommand("riemann", "build the covering map of the genus-0 surface");
    add_common(riemann, c);
    auto* verify = app.add_subcommand("verify", "run the identity and lemma checks for a system");
    add_common(verify, c);
    auto* experiment = app.add_subcommand("experiment", "run a configured experiment and write its report");
    add_common(experiment, c);
    auto* report = app.add_subcommand("report", "re-verify a report and regenerate its CSV files");
    add_common(report, c, false);
    report->add_option("report", report_path, "report JSON")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*compute) return cmd_compute(c);
        if (*riemann) return cmd_riemann(c);
        if (*verify) return cmd_experiment(c, true);
        if (*experiment) return cmd_experiment(c, false);
        if (*report) return cmd_report(c, report_path);
    } catch (const Error& e) {
        std::cerr << "error (" << (e.kind() == ErrorKind::Config ? "config" : "run") << "): " << e.what() << "\n";
        return exit_for(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) { return cli_main(argc, argv); }
