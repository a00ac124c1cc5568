#include "doctest.h"
#include "nikishin/harness.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace nikishin;

namespace {

json m1_doc() {
    return json::parse(R"({
      "schema_version": 1, "name": "m1", "kind": "ratio",
      "system": {"measures": [{"interval": ["-1", "1"], "weight": {"kind": "chebyshev_first"}}]},
      "perturbation": {"p": [["-3", "1"]]},
      "ladder": {"base": [4], "count": 4, "stride": 4},
      "points": {"circle": {"center": "0", "radius": "2", "count": 6}}
    })");
}

json pair_doc() {
    return json::parse(R"({
      "schema_version": 1, "name": "pair", "kind": "induced",
      "system": {"measures": [{"interval": ["-1", "1"]}, {"interval": ["2", "3"]}]},
      "perturbation": {"p": [["1"], ["-5", "1"]]},
      "ladder": {"base": [3, 3], "count": 3, "stride": 2},
      "points": {"list": [["0", "4"], "-4", "6"]}
    })");
}

// Message of the config error raised by parsing doc; empty when it parses.
std::string config_failure(const json& doc) {
    try {
        parse_config(doc);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        return e.what();
    }
    return "";
}

bool mentions(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

Complex phi0(const Complex& z) {
    Complex r = z + sqrt(z - Complex(1)) * sqrt(z + Complex(1));
    if (abs(r) < 1) r = Complex(2) * z - r;
    return r / Real(2);
}

Complex cparse(const json& j) { return Complex(parse_real(j[0]), parse_real(j[1])); }

}  // namespace

TEST_CASE("config errors name the offending field") {
    CHECK(config_failure(m1_doc()).empty());
    CHECK(config_failure(pair_doc()).empty());

    auto d = m1_doc();
    d.erase("schema_version");
    CHECK(mentions(config_failure(d), "/schema_version"));
    d = m1_doc();
    d["schema_version"] = 7;
    CHECK(mentions(config_failure(d), "/schema_version"));

    d = m1_doc();
    d["system"]["measures"][0]["interval"][0] = -1.0;  // numbers must be strings
    CHECK(mentions(config_failure(d), "/system/measures/0/interval/0"));
    d = m1_doc();
    d["system"]["measures"][0]["interval"][1] = "one";
    CHECK(mentions(config_failure(d), "/system/measures/0/interval/1"));
    d = m1_doc();
    d["kind"] = "spectral";
    CHECK(mentions(config_failure(d), "/kind"));
    d = m1_doc();
    d["perturbation"]["p"][0] = json::array({"-3", "2"});
    CHECK(mentions(config_failure(d), "/perturbation/p/0"));
    d = m1_doc();
    d["points"] = json::parse(R"({"list": [["0.5", "0"]]})");
    CHECK(mentions(config_failure(d), "/points"));
    d = m1_doc();
    d["system"]["measures"][0]["weight"] = json::parse(R"({"kind": "hermite"})");
    CHECK(mentions(config_failure(d), "/system/measures/0/weight/kind"));
    d = m1_doc();
    d["name"] = "has space";
    CHECK(mentions(config_failure(d), "/name"));

    // perturbation root on the support
    d = m1_doc();
    d["perturbation"]["p"][0] = json::array({"0", "1"});
    CHECK(mentions(config_failure(d), "/perturbation"));

    // overlapping consecutive supports
    d = pair_doc();
    d["system"]["measures"][1]["interval"] = json::array({"0.5", "3"});
    CHECK(mentions(config_failure(d), "/system/measures"));

    // ladder outside the index class
    d = pair_doc();
    d["ladder"]["base"] = json::array({1, 5});
    CHECK(mentions(config_failure(d), "/ladder"));

    // induced needs a real perturbation
    d = pair_doc();
    d["perturbation"]["p"][1] = json::parse(R"([["-5", "1"], "1"])");
    CHECK(mentions(config_failure(d), "/perturbation"));

    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("config contents") {
    auto c = parse_config(pair_doc());
    CHECK(c.system.m() == 2);
    CHECK(c.ladder == std::vector<MultiIndex>{{3, 3}, {4, 4}, {5, 5}});
    CHECK(c.points.size() == 3);
    CHECK(c.points[0] == Complex(0, 4));
    CHECK(c.levels == std::vector<int>{0, 1});
    CHECK(c.hash == parse_config(pair_doc()).hash);
    auto d = pair_doc();
    d["name"] = "other";
    CHECK(c.hash != parse_config(d).hash);
    CHECK(c.tol.final_error == Real("5e-2"));
    d["tolerances"] = json::parse(R"({"final_error": "1e-3"})");
    CHECK(parse_config(d).tol.final_error == Real("1e-3"));
}

TEST_CASE("trend verdicts") {
    Real fl("1e-15");
    CHECK(trend_verdict({Real(1), Real("0.5")}, fl) == "insufficient");
    CHECK(trend_verdict({Real(1), Real("0.5"), Real("0.25")}, fl) == "decreasing");
    CHECK(trend_verdict({Real(9), Real(1), Real("0.5"), Real("0.5")}, fl) == "not_decreasing");
    CHECK(trend_verdict({Real(1), Real("1e-16"), Real("1e-17"), Real("2e-17")}, fl) == "at_floor");
    CHECK(trend_verdict({Real("1e-3"), Real("1e-2"), Real("1e-4")}, fl) == "not_decreasing");
}

TEST_CASE("m = 1 ratio experiment against the closed form") {
    auto rep = run_experiment(parse_config(m1_doc()));
    REQUIRE(rep.rungs.size() == 4);
    CHECK(rep.pass);
    REQUIRE(rep.series.size() == 1);
    const auto& s = rep.series[0];
    CHECK(s.series == "ratio");
    CHECK((s.verdict == "decreasing" || s.verdict == "at_floor"));
    CHECK(s.max_error.back() <= Real("1e-2"));
    for (size_t i = 1; i < s.max_error.size(); ++i) CHECK(s.max_error[i] < s.max_error[i - 1]);
    // limit column against (phi(z) - phi(3)) / (z - 3)
    for (const auto& r : rep.rungs)
        for (const auto& x : r.records) {
            Complex want = (phi0(x.z) - phi0(Complex(3))) / (x.z - Complex(3));
            CHECK(abs(x.limit - want) < Real("1e-60"));
        }
}

TEST_CASE("trivial perturbation ladder") {
    auto d = pair_doc();
    d["perturbation"] = json::parse(R"({"p": [["1"], ["1"]]})");
    d["kind"] = "ratio";
    auto rep = run_experiment(parse_config(d));
    CHECK(rep.pass);
    for (const auto& r : rep.rungs)
        for (const auto& x : r.records) {
            CHECK(x.abs_err <= Real("1e-15"));
            CHECK(x.limit == Complex(1));
        }
}

TEST_CASE("report determinism across worker counts and integrity") {
    auto cfg = parse_config(pair_doc());
    RunOptions one, two;
    two.threads = 2;
    auto a = run_experiment(cfg, one).to_json();
    auto b = run_experiment(cfg, two).to_json();
    CHECK(a.dump() == b.dump());
    CHECK(a["summary"]["pass"].get<bool>());

    // every stored abs_err is reproduced from the stored values
    int n = 0;
    for (const auto& r : a["rungs"])
        for (const auto& x : r["records"]) {
            Real want = abs(cparse(x["empirical"]) - cparse(x["limit"]));
            CHECK(abs(parse_real(x["abs_err"]) - want) <= Real("1e-60") * (1 + want));
            ++n;
        }
    CHECK(n == 3 * (2 * 3 + 1));

    // CSV per series, k-ratio rows at infinity
    auto csv = render_csv(a);
    REQUIRE(csv.size() == 3);
    for (const auto& [slug, text] : csv) {
        CHECK(text.rfind("abs_n,n_tuple,z,re_empirical,im_empirical,re_limit,im_limit,abs_err,rel_err\n", 0) == 0);
        auto lines = std::count(text.begin(), text.end(), '\n');
        if (slug == "k_ratio1") {
            CHECK(lines == 1 + 3);
            CHECK(mentions(text, ",(3;3),inf,"));
        } else {
            CHECK(lines == 1 + 3 * 3);
        }
    }

    auto dir = std::filesystem::temp_directory_path() / "nikishin_harness_test";
    std::filesystem::remove_all(dir);
    auto paths = write_report(run_experiment(cfg, one), dir.string());
    CHECK(paths.size() == 2 + 3);
    std::ifstream in(dir / "pair.json");
    CHECK(json::parse(in).dump() == a.dump());
    std::filesystem::remove_all(dir);
}

TEST_CASE("rung failures become failing checks") {
    // a point that clears the support at parse time but is forced onto it afterwards
    auto cfg = parse_config(m1_doc());
    cfg.points = {Complex(Real("0.5"))};
    auto rep = run_experiment(cfg);
    CHECK_FALSE(rep.pass);
    auto j = rep.to_json();
    CHECK(j["summary"]["errors"].get<int>() == 4);
    CHECK(j["rungs"][0]["extra"]["error"]["kind"] == "proximity");
}

TEST_CASE("property: random circles clear the supports and parse back") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> rad(1.2, 9.0);
    std::uniform_int_distribution<int> cnt(1, 24);
    for (int trial = 0; trial < 25; ++trial) {
        auto d = m1_doc();
        double r = rad(rng);
        int k = cnt(rng);
        d["points"]["circle"]["radius"] = std::to_string(r);
        d["points"]["circle"]["count"] = k;
        auto c = parse_config(d);
        REQUIRE(static_cast<int>(c.points.size()) == k);
        for (const auto& z : c.points) {
            CHECK(abs(abs(z) - parse_real(std::to_string(r))) < Real("1e-60"));
            CHECK(z.im != 0);
        }
        CHECK(parse_config(c.source).hash == c.hash);
    }
}

TEST_CASE("roots clustered at the interval ends") {
    // Chebyshev extrema cluster near the ends; the basis interval is stretched as with an atom at -2.
    const int d = 48;
    CVec want;
    for (int j = 0; j < d; ++j) want.push_back(Complex(cos(pi() * (Real(j) + Real("0.5")) / d)));
    Polynomial p = Polynomial::from_roots(want);
    auto got = p.roots();
    REQUIRE(static_cast<int>(got.size()) == d);
    std::sort(want.begin(), want.end(), [](const Complex& a, const Complex& b) { return a.re < b.re; });
    std::sort(got.begin(), got.end(), [](const Complex& a, const Complex& b) { return a.re < b.re; });
    for (int j = 0; j < d; ++j) CHECK(abs(got[j] - want[j]) < Real("1e-30"));
}

TEST_CASE("m = 1 ladder 10 to 60 on |z| = 5") {
    auto d = m1_doc();
    d["ladder"] = json::parse(R"({"base": [10], "count": 6, "stride": 10})");
    d["points"]["circle"]["radius"] = "5";
    auto rep = run_ratio_experiment(parse_config(d));
    CHECK(rep.pass);
    const auto& s = rep.series.at(0);
    CHECK((s.verdict == "decreasing" || s.verdict == "at_floor"));
    CHECK(s.max_error.back() <= Real("1e-2"));
    CHECK(s.max_error[1] < s.max_error[0]);
}

TEST_CASE("second-type level 0 reproduces the ratio experiment") {
    auto d = pair_doc();
    d["kind"] = "second_type";
    d["levels"] = json::array({0});
    auto cfg = parse_config(d);
    auto st = run_second_type_experiment(cfg);
    auto ra = run_ratio_experiment(cfg);
    REQUIRE(st.rungs.size() == ra.rungs.size());
    for (size_t i = 0; i < st.rungs.size(); ++i) {
        REQUIRE(st.rungs[i].records.size() == ra.rungs[i].records.size());
        for (size_t j = 0; j < st.rungs[i].records.size(); ++j) {
            CHECK(st.rungs[i].records[j].series == "psi0");
            CHECK(abs(st.rungs[i].records[j].empirical - ra.rungs[i].records[j].empirical) < Real("1e-60"));
            CHECK(abs(st.rungs[i].records[j].limit - ra.rungs[i].records[j].limit) < Real("1e-60"));
        }
    }
    CHECK(st.pass);
}

TEST_CASE("induced experiment with a real quadratic perturbation") {
    auto d = pair_doc();
    d["perturbation"] = json::parse(R"({"p": [["1", "0", "1"], ["1"]]})");
    d["ladder"] = json::parse(R"({"base": [4, 4], "count": 3, "stride": 2})");
    auto cfg = parse_config(d);
    CHECK(cfg.perturbation.sign_on_support(cfg.system, 1) == 1);
    auto rep = run_induced_experiment(cfg);
    CHECK(rep.pass);
    // the K-ratio limit is 1 / G_1(inf)
    LimitSuite L(cached_covering(SurfaceSpec::from_system(cfg.system)));
    auto r = PerturbationRoots::numerators(cfg.perturbation);
    Real want = 1 / L.G_inf(r, 1).re;
    for (const auto& rung : rep.rungs)
        for (const auto& x : rung.records)
            if (x.series == "k_ratio1") CHECK(abs(x.limit.re - want) < Real("1e-50"));
    for (const auto& rung : rep.rungs)
        for (const auto& c : rung.checks)
            if (c.name.rfind("eqsignos", 0) == 0) CHECK(c.pass);

    // the trivial perturbation gives unit ratios everywhere
    d["perturbation"] = json::parse(R"({"p": [["1"], ["1"]]})");
    auto triv = run_induced_experiment(parse_config(d));
    for (const auto& rung : triv.rungs)
        for (const auto& x : rung.records) CHECK(abs(x.empirical - Complex(1)) <= Real("1e-15"));
    CHECK(triv.pass);

    d["perturbation"] = json::parse(R"({"p": [["1"], [["-5", "1"], "1"]]})");
    CHECK_THROWS_AS(run_induced_experiment(parse_config(d)), Error);
}

TEST_CASE("zero attraction without atoms and with a root near the support") {
    auto d = pair_doc();
    d["kind"] = "zeros";
    d.erase("points");
    d["ladder"] = json::parse(R"({"base": [8, 8], "count": 2, "stride": 2})");
    d["tolerances"] = json::parse(R"({"attraction_min_norm": 0})");
    auto rep = run_zero_attraction_experiment(parse_config(d));
    CHECK(rep.pass);
    int checked = 0;
    for (const auto& rung : rep.rungs)
        for (const auto& c : rung.checks)
            if (c.name.find("other roots") != std::string::npos) {
                CHECK(c.pass);
                ++checked;
            }
    CHECK(checked > 0);

    // p_1 with a root 0.2 to the right of Delta_1: roots of Q~_n stay on [-1, 1]
    d["perturbation"] = json::parse(R"({"p": [["-1.2", "1"], ["1"]]})");
    auto near = run_zero_attraction_experiment(parse_config(d));
    CHECK(near.pass);
    for (const auto& rung : near.rungs) {
        Real far = parse_real(rung.extra["Q~_n"]["max_distance_rest"].get<std::string>());
        CHECK(far <= Real("0.05"));
    }
}
