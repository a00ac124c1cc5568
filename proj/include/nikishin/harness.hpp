#pragma once

#include "nikishin/limits.hpp"
#include "nikishin/mop.hpp"
#include "nikishin/second_type.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace nikishin {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Acceptance thresholds carried by a config; all optional.
struct Thresholds {
    Real final_error = Real("5e-2");  ///< max error at the last rung, trend series
    Real k_ratio = Real("1e-1");      ///< K~^2/K^2 against its limit at the last rung
    Real floor = Real("1e-15");       ///< errors at or below this count as converged
    Real orth = Real("1e-20");        ///< scaled orthogonality residual of every solve
    Real attraction_radius = Real("0.1");
    Real support_margin = Real("0.05");
    int attraction_min_norm = 40;
};

enum class ExperimentKind { Ratio, SecondType, Induced, Zeros, Identities };
const char* to_string(ExperimentKind k);

struct ExperimentConfig {
    std::string name;
    ExperimentKind kind = ExperimentKind::Ratio;
    unsigned precision_bits = 0;  ///< 0: NIKISHIN_PRECISION_BITS or 256
    NikishinSystem system;
    RationalPerturbation perturbation;
    std::vector<MultiIndex> ladder;
    CVec points;
    std::vector<int> levels;  ///< second-type levels k (default 0..m-1)
    int variant_l = 0;        ///< ratio kind: also compare Q~_{n^l}/Q~_n with F~_1^(l)
    Thresholds tol;
    std::string output;
    json source;       ///< parsed document as given
    std::string hash;  ///< FNV-1a of the canonical dump
};

/// Parses and validates; config errors name the offending field as a JSON pointer.
ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const std::string& path);
std::string fnv1a_hex(const std::string& s);

struct Record {
    std::string series;
    Complex z;
    bool at_infinity = false;
    Complex empirical, limit;
    Real abs_err, rel_err;
};

/// One named pass/fail check. Integer checks compare exactly.
struct Check {
    std::string name;
    Real value;
    Real threshold;
    bool pass = false;
    bool exact = false;
};
Check bound_check(std::string name, const Real& value, const Real& threshold);
Check exact_check(std::string name, long long got, long long want);

struct Rung {
    MultiIndex n;
    int degree = 0;
    unsigned bits = 0;
    std::vector<Record> records;
    std::vector<Check> checks;
    json extra = json::object();
    double seconds = 0;
};

/// Per-series summary over the rungs.
struct SeriesSummary {
    std::string series;
    std::vector<Real> max_error;  ///< per rung
    std::string verdict;          ///< decreasing | at_floor | not_decreasing | insufficient
    bool trend_required = true;
    Real threshold;
    bool pass = false;
};

struct Report {
    ExperimentConfig config;
    unsigned bits = 0;
    unsigned seed = 0;
    std::vector<Rung> rungs;
    std::vector<Check> checks;  ///< rung-independent
    std::vector<SeriesSummary> series;
    bool pass = false;
    double seconds = 0;

    json to_json() const;
    /// Wall times live in a separate document so reports stay byte-identical.
    json timing_json() const;
};

/// Trend verdict from the last three values; shorter sequences are insufficient.
std::string trend_verdict(const std::vector<Real>& errors, const Real& floor);

struct RunOptions {
    int threads = 1;  ///< rung workers (forked processes)
    unsigned seed = 0;
    std::string cache_dir;  ///< covering-map cache; empty disables the file cache
};

Report run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});

/// Entry points per kind: run cfg as that kind regardless of its "kind" field.
Report run_ratio_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});
Report run_second_type_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});
Report run_induced_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});
Report run_zero_attraction_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});
Report run_identity_suite(const ExperimentConfig& cfg, const RunOptions& opt = {});

/// CSV text per series from a report document: (series slug, content).
std::vector<std::pair<std::string, std::string>> render_csv(const json& report);

/// Writes <dir>/<name>.json, <name>.timing.json and one CSV per series; returns the paths.
std::vector<std::string> write_report(const Report& r, const std::string& dir);

/// Sample points: n points on a circle, offset by half a step from the real axis.
CVec circle_points(const Complex& center, const Real& radius, int count);

}  // namespace nikishin
