#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oblab/blowup.hpp"
#include "oblab/error.hpp"
#include "oblab/field.hpp"
#include "oblab/field_io.hpp"
#include "oblab/fixtures.hpp"
#include "oblab/functionals.hpp"
#include "oblab/measures.hpp"
#include "oblab/recursion.hpp"
#include "oblab/solver.hpp"

namespace oblab {

using nlohmann::json;

/// Key-value experiment description:
///
///     # comment
///     kind = classify
///     fixture = perturbed:p=e1,h=im3,eps=0.01
///     grid = 257
///
/// Every value keeps the line it came from, so conversion errors point back
/// into the file.
class ExperimentConfig {
public:
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "kind",      "name",      "fixture",      "field",     "dim",         "grid",     "seed",
            "center",    "variant",   "damping",      "tolerance", "max_outer",   "c_u",      "c_g",
            "exact",     "r_min",     "r_max",        "lambdas",   "subtract",    "p_star",   "almgren",
            "monneau_samples",        "p_samples",    "ns",        "c1s",         "c2s",      "ms",
            "k0s",       "k_max",     "eps",          "M",         "omega",       "expect_member",
        };
        return keys;
    }

    static ExperimentConfig parse(const std::string& text, const std::string& source = "config") {
        ExperimentConfig cfg;
        cfg.source_ = source;
        std::istringstream in(text);
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const auto trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw Error(ErrorKind::format, source + ":" + std::to_string(number) + ": expected 'key = value'");
            const auto key = trim(trimmed.substr(0, eq));
            const auto value = trim(trimmed.substr(eq + 1));
            if (!known_keys().count(key))
                throw Error(ErrorKind::format, source + ":" + std::to_string(number) + ": unknown key '" + key + "'");
            if (cfg.values_.count(key))
                throw Error(ErrorKind::format, source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
            cfg.values_[key] = value;
            cfg.lines_[key] = number;
        }
        if (!cfg.has("kind")) throw Error(ErrorKind::format, source + ": missing required key 'kind'");
        static const std::set<std::string> kinds = {"solve", "profile", "classify", "monotonicity-suite",
                                                    "recursion-suite", "class-P"};
        if (!kinds.count(cfg.text("kind")))
            throw Error(ErrorKind::format, cfg.where("kind") + ": unknown experiment kind '" + cfg.text("kind") + "'");
        cfg.validate();
        return cfg;
    }

    /// Converts every typed field once so that bad values surface with their
    /// line before anything runs.
    void validate() const {
        for (const char* key : {"dim", "grid", "damping", "tolerance", "max_outer", "c_u", "c_g", "r_min",
                                "r_max", "monneau_samples", "p_samples", "k_max", "eps", "M"})
            if (has(key)) number(key);
        for (const char* key : {"lambdas", "ns", "c1s", "c2s", "ms", "k0s"})
            if (has(key)) numbers(key);
        for (const char* key : {"almgren", "expect_member"})
            if (has(key)) flag(key, false);
        if (has("center")) point("center", {});
        seed();
        for (const char* key : {"dim", "grid", "max_outer", "monneau_samples", "p_samples", "k_max"})
            if (has(key)) integer(key);
        const auto k = text("kind");
        if (k != "recursion-suite" && !has("fixture") && !has("field"))
            throw Error(ErrorKind::format, source_ + ": kind '" + k + "' needs 'fixture' or 'field'");
        if (k == "solve" && !has("fixture"))
            throw Error(ErrorKind::format, source_ + ": kind 'solve' takes its boundary data from 'fixture'");
        if (has("fixture") && has("field"))
            throw Error(ErrorKind::format, where("field") + ": give either 'fixture' or 'field', not both");
    }

    static ExperimentConfig load(const fs::path& path) {
        if (!fs::exists(path)) throw Error(ErrorKind::missing_input, "missing config " + path.string());
        auto cfg = parse(read_bytes(path), path.string());
        cfg.base_ = fs::absolute(path).parent_path();
        return cfg;
    }

    static ExperimentConfig from_json(const json& echo, const fs::path& base) {
        ExperimentConfig cfg;
        cfg.source_ = "report config echo";
        cfg.base_ = base;
        for (const auto& [k, v] : echo.items()) {
            if (!known_keys().count(k)) throw Error(ErrorKind::format, "config echo: unknown key '" + k + "'");
            cfg.values_[k] = v.get<std::string>();
        }
        if (!cfg.has("kind")) throw Error(ErrorKind::format, "config echo lacks 'kind'");
        cfg.validate();
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const fs::path& base() const { return base_; }
    void set_base(const fs::path& b) { base_ = b; }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
        const auto it = values_.find(key);
        if (it != values_.end()) return it->second;
        if (fallback) return *fallback;
        throw Error(ErrorKind::format, source_ + ": missing required key '" + key + "'");
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            return to_number(key, text(key));
        }
        return to_number(key, text(key));
    }

    long integer(const std::string& key, std::optional<long> fallback = std::nullopt) const {
        const double v = number(key, fallback ? std::optional<double>(static_cast<double>(*fallback)) : std::nullopt);
        if (v != std::floor(v)) throw Error(ErrorKind::format, where(key) + ": field '" + key + "' must be an integer");
        return static_cast<long>(v);
    }

    std::uint64_t seed() const {
        if (!has("seed")) return 0;
        const auto v = text("seed");
        try {
            std::size_t pos = 0;
            const auto s = std::stoull(v, &pos);
            if (pos == v.size() && v.find('-') == std::string::npos) return s;
        } catch (const std::exception&) {
        }
        throw Error(ErrorKind::format, where("seed") + ": field 'seed' must be an unsigned 64-bit integer");
    }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto v = text(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw Error(ErrorKind::format, where(key) + ": field '" + key + "' must be true or false");
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback = {}) const {
        if (!has(key)) return fallback;
        std::vector<double> out;
        std::stringstream ss(text(key));
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(to_number(key, trim(item)));
        return out;
    }

    Point point(const std::string& key, Point fallback) const {
        if (!has(key)) return fallback;
        const auto v = numbers(key);
        if (v.empty() || v.size() > 3) throw Error(ErrorKind::format, where(key) + ": field '" + key + "' needs 1-3 coordinates");
        Point p{0.0, 0.0, 0.0};
        std::copy(v.begin(), v.end(), p.begin());
        return p;
    }

    json echo() const {
        json j = json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

    std::string where(const std::string& key) const {
        const auto it = lines_.find(key);
        return it == lines_.end() ? source_ : source_ + ":" + std::to_string(it->second);
    }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    double to_number(const std::string& key, const std::string& v) const {
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw Error(ErrorKind::format, where(key) + ": field '" + key + "' is not a number: '" + v + "'");
        }
    }

    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    std::string source_;
    fs::path base_ = fs::current_path();
};

struct Expectation {
    std::string name;  ///< owning module and invariant, e.g. "solver.converged_implies_residual_bound"
    bool passed = false;
    std::string detail;
};

struct Artifact {
    std::string path;  ///< relative to the output directory
    std::string hash;
    std::size_t bytes = 0;
};

struct ExperimentReport {
    json config;
    std::string kind;
    json outputs = json::object();
    std::vector<Artifact> artifacts;
    std::vector<Expectation> expectations;
    std::vector<std::string> errors;
    std::vector<std::string> inputs;  ///< absolute paths of files the run read
    std::string config_base;          ///< directory relative paths in the config resolve against
    double wall_time = 0.0;

    bool passed() const {
        return errors.empty() &&
               std::all_of(expectations.begin(), expectations.end(), [](const auto& e) { return e.passed; });
    }

    json to_json() const {
        json ex = json::array();
        for (const auto& e : expectations) ex.push_back({{"name", e.name}, {"passed", e.passed}, {"detail", e.detail}});
        json art = json::array();
        for (const auto& a : artifacts) art.push_back({{"path", a.path}, {"fnv1a", a.hash}, {"bytes", a.bytes}});
        return {{"kind", kind},          {"config", config},     {"outputs", outputs},
                {"artifacts", art},      {"expectations", ex},   {"errors", errors},
                {"inputs", inputs},      {"config_base", config_base},
                {"wall_time_s", wall_time}, {"passed", passed()}};
    }
};

namespace detail {

class Run {
public:
    Run(const ExperimentConfig& cfg, fs::path out) : cfg_(cfg), out_(std::move(out)) {
        report_.config = cfg.echo();
        report_.config_base = fs::absolute(cfg.base()).lexically_normal().string();
        report_.kind = cfg.text("kind");
        fs::create_directories(out_);
    }

    ExperimentReport& report() { return report_; }
    const ExperimentConfig& cfg() const { return cfg_; }

    void expect(const std::string& name, bool passed, const std::string& detail) {
        report_.expectations.push_back({name, passed, detail});
    }

    /// Runs one independent step; an error is recorded and the run goes on.
    template <class F>
    void step(const std::string& what, F&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            report_.errors.push_back(what + ": " + e.what());
        }
    }

    void artifact(const std::string& name, const std::string& bytes) {
        write_bytes(out_ / name, bytes);
        report_.artifacts.push_back({name, fnv1a_hex(bytes), bytes.size()});
    }

    void field_artifact(const ScalarField& f, const std::string& stem) {
        save_field(f, out_ / (stem + ".json"));
        for (const auto* ext : {".json", ".bin"}) {
            const auto bytes = read_bytes(out_ / (stem + ext));
            report_.artifacts.push_back({stem + ext, fnv1a_hex(bytes), bytes.size()});
        }
    }

    int dim() const { return static_cast<int>(cfg_.integer("dim", 2)); }
    GridSpec grid() const {
        GridSpec g{dim(), static_cast<int>(cfg_.integer("grid", dim() == 2 ? 257 : 65))};
        g.validate();
        return g;
    }

    /// Field from `field` (a dump) or `fixture` (sampled on the grid).
    ScalarField field(std::optional<Fixture>& fixture) {
        if (cfg_.has("field")) {
            const auto path = fs::absolute(cfg_.base() / cfg_.text("field")).lexically_normal();
            report_.inputs.push_back(path.string());
            return load_field(path);
        }
        fixture = make_fixture(cfg_.text("fixture"), dim());
        return sample(grid(), fixture->eval, fixture->name);
    }

private:
    ExperimentConfig cfg_;
    fs::path out_;
    ExperimentReport report_;
};

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

inline Point shifted(const Point& x, const Point& x0) { return {x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]}; }

inline ScalarField deficit(const ScalarField& u, const QuadraticForm& p, const Point& x0) {
    return subtract(u, [&](const Point& x) { return p(shifted(x, x0)); }, "deficit");
}

inline Variant variant_of(const ExperimentConfig& cfg) { return parse_variant(cfg.text("variant", "no_sign")); }

inline Thresholds thresholds_of(const ExperimentConfig& cfg) {
    const Thresholds d;
    return Thresholds{cfg.number("c_u", d.c_u), cfg.number("c_g", d.c_g)};
}

inline void run_solve(Run& run) {
    const auto& cfg = run.cfg();
    SolverConfig sc;
    sc.spec = run.grid();
    const auto boundary = make_fixture(cfg.text("fixture"), run.dim());
    sc.boundary = boundary.eval;
    sc.variant = variant_of(cfg);
    sc.damping = cfg.number("damping", 0.5);
    sc.tolerance = cfg.number("tolerance", 1e-10);
    sc.max_outer = static_cast<int>(cfg.integer("max_outer", 400));
    sc.thresholds = thresholds_of(cfg);
    const auto result = solve(sc);
    const auto& rep = result.report;
    run.report().outputs["solve"] = {{"iterations", rep.iterations},
                                     {"inner_sweeps", rep.inner_sweeps},
                                     {"residual", rep.residual},
                                     {"converged", rep.converged},
                                     {"oscillating", rep.oscillating},
                                     {"coincidence_count", rep.coincidence_count},
                                     {"coincidence_hash", fnv1a_hex(std::to_string(rep.coincidence_hash))},
                                     {"coincidence_history", rep.coincidence_history}};
    run.field_artifact(result.field, "u");

    std::ostringstream hist;
    hist << "iteration,coincidence_vertices\n";
    for (std::size_t k = 0; k < rep.coincidence_history.size(); ++k) hist << k << "," << rep.coincidence_history[k] << "\n";
    run.artifact("coincidence_history.csv", hist.str());

    run.expect("solver.converged", rep.converged, "residual " + fmt(rep.residual));
    run.expect("solver.converged_implies_residual_bound", !rep.converged || rep.residual <= 10.0 * sc.tolerance,
               "residual " + fmt(rep.residual) + " vs 10 tau = " + fmt(10.0 * sc.tolerance));
    const double mapped = residual_map(result.field, sc.variant, sc.thresholds).scale();
    run.expect("solver.report_matches_residual_map", mapped == rep.residual, "map max " + fmt(mapped));
    if (sc.variant == Variant::classical) {
        const auto v = result.field.values();
        const double lo = *std::min_element(v.begin(), v.end());
        run.expect("solver.classical_nonnegative", lo >= -1e-10, "min u = " + fmt(lo));
    }
    if (cfg.has("exact")) {
        const auto exact = make_fixture(cfg.text("exact"), run.dim());
        double err = 0.0;
        for (std::size_t i = 0; i < sc.spec.size(); ++i)
            err = std::max(err, std::abs(result.field[i] - exact(sc.spec.vertex(i))));
        const double h = sc.spec.spacing();
        run.report().outputs["solve"]["max_error"] = err;
        run.expect("solver.error_within_5h2", err <= 5.0 * h * h, "error/h^2 = " + fmt(err / (h * h)));
    }
}

/// Blowup to subtract, by name: none, truth, fit, or a named quadratic.
inline std::optional<QuadraticForm> subtraction(const ExperimentConfig& cfg, const std::string& key,
                                                const std::string& fallback, const ScalarField& u,
                                                const std::optional<Fixture>& fx, const Point& x0) {
    const auto which = cfg.text(key, fallback);
    if (which == "none") return std::nullopt;
    if (which == "truth") {
        if (!fx || !fx->truth.blowup) throw Error(ErrorKind::parameter, cfg.where(key) + ": fixture has no known blowup");
        return *fx->truth.blowup;
    }
    if (which == "fit") {
        const auto fit = fit_blowup(u, x0, default_radii(u, x0));
        if (!fit.accepted) throw Error(ErrorKind::classification, "not singular: " + fit.reason);
        return fit.blowup.p;
    }
    return named_quadratic(which, u.dim());
}

inline void run_profile(Run& run) {
    const auto& cfg = run.cfg();
    std::optional<Fixture> fx;
    const auto u = run.field(fx);
    const Point x0 = cfg.point("center", fx ? fx->truth.singular_point : Point{0.0, 0.0, 0.0});
    const auto p = subtraction(cfg, "subtract", "none", u, fx, x0);
    const auto v = p ? deficit(u, *p, x0) : u;
    const double r_min = cfg.number("r_min", 8.0 * u.h());
    const double r_max = cfg.number("r_max", std::min(0.5, evaluable_radius(u, x0)));
    const auto prof = profile(v, x0, r_min, r_max, cfg.numbers("lambdas"));
    run.artifact("profile.csv", to_csv(prof));
    run.report().outputs["profile"] = {{"lambda_star", prof.lambda_star}, {"confidence", prof.confidence},
                                       {"radii", prof.radii.size()}};
    if (fx && fx->truth.frequency && !fx->truth.degenerate && (p.has_value() || !fx->truth.blowup)) {
        const double err = std::abs(prof.lambda_star - *fx->truth.frequency);
        run.expect("functionals.lambda_star_matches_truth", err <= 0.05,
                   "lambda_* " + fmt(prof.lambda_star) + " vs " + fmt(*fx->truth.frequency));
    }
}

inline void run_classify(Run& run) {
    const auto& cfg = run.cfg();
    std::optional<Fixture> fx;
    const auto u = run.field(fx);
    const Point x0 = cfg.point("center", fx ? fx->truth.singular_point : Point{0.0, 0.0, 0.0});
    const bool truth_blowup = cfg.text("p_star", "fit") == "truth";
    BlowupPolynomial p_star;
    double lambda_star = 0.0;

    if (truth_blowup) {
        if (!fx || !fx->truth.blowup) throw Error(ErrorKind::parameter, cfg.where("p_star") + ": fixture has no known blowup");
        p_star = BlowupPolynomial::from(*fx->truth.blowup);
        const auto prof = profile(deficit(u, p_star.p, x0), x0, 8.0 * u.h(), std::min(0.5, evaluable_radius(u, x0)));
        lambda_star = prof.lambda_star;
        run.report().outputs["blowup"] = {{"source", "truth"}, {"m", p_star.m}, {"lambda_star", lambda_star},
                                          {"confidence", prof.confidence}, {"A", matrix_json(p_star.p.A)}};
    } else {
        ClassifyOptions opt;
        opt.r_max = cfg.number("r_max", 0.5);
        const auto sp = classify(u, x0, opt);
        p_star = sp.blowup;
        lambda_star = sp.lambda_star;
        run.artifact("singular_points.jsonl", to_jsonl({sp}));
        run.report().outputs["blowup"] = to_json(sp);
        run.expect("blowup.trace_normalized", std::abs(sp.blowup.p.A.trace() - 1.0) <= 1e-3,
                   "trace " + fmt(sp.blowup.p.A.trace()));
        if (fx && fx->truth.stratum)
            run.expect("blowup.stratum_matches_truth", sp.m == *fx->truth.stratum,
                       "m = " + std::to_string(sp.m) + " vs " + std::to_string(*fx->truth.stratum));
        if (fx && fx->truth.blowup) {
            const bool truth_plus = fx->truth.blowup->eigenvalues().minCoeff() >= -1e-12;
            run.expect("blowup.sigma_plus_matches_truth", sp.sigma_plus == truth_plus && !sp.sigma_plus_ambiguous,
                       std::string("sigma+ eigen/density = ") + (sp.sigma_plus_eigen ? "1" : "0") + "/" +
                           (sp.sigma_plus_density ? "1" : "0"));
        }
    }
    if (fx && fx->truth.frequency && !fx->truth.degenerate)
        run.expect("blowup.lambda_star_matches_truth", std::abs(lambda_star - *fx->truth.frequency) <= 0.05,
                   "lambda_* " + fmt(lambda_star) + " vs " + fmt(*fx->truth.frequency));

    if (!cfg.flag("almgren", truth_blowup)) {
        run.artifact("classification.json", run.report().outputs.dump(2) + "\n");
        return;
    }
    const auto radii = default_radii(u, x0);
    const auto q = almgren_blowup(u, p_star, x0, {radii.front(), radii.back()}, lambda_star);
    json qj = {{"lambda", q.lambda}, {"polynomial", q.polynomial}, {"residual", q.residual},
               {"harmonic_polynomial", q.harmonic_polynomial}};
    if (q.polynomial) qj["q"] = q.q.to_string();
    else qj["slit"] = {{"amplitude", q.amplitude}, {"cut_angle", q.cut_angle}};
    if (q.structure) {
        const auto& s = *q.structure;
        qj["structure"] = {{"t", s.t},           {"trace_N", s.m > 0 ? s.N.trace() : 0.0},
                           {"n", s.n},           {"m", s.m},
                           {"off_kernel_deviation", s.off_kernel_deviation},
                           {"coupling", s.coupling}, {"trace_gap", s.trace_gap}};
        run.expect("blowup.structure_t_positive", s.t > 0.0, "t = " + fmt(s.t));
        run.expect("blowup.structure_trace_identity", s.trace_gap <= 1e-3, "|tr N - (n-m) t| = " + fmt(s.trace_gap));
        run.expect("blowup.structure_off_kernel_block_scalar", s.off_kernel_deviation <= 1e-3 && s.coupling <= 1e-3,
                   "deviation " + fmt(s.off_kernel_deviation) + ", coupling " + fmt(s.coupling));
        const int samples = static_cast<int>(cfg.integer("monneau_samples", 10000));
        if (samples > 0) {
            const auto seed = cfg.seed();
            const auto mi = monneau_inequality(q.q, p_star.p, samples, seed, false);
            qj["monneau_inequality"] = {{"minimum", mi.minimum}, {"samples", mi.samples}, {"seed", seed}};
            run.expect("blowup.monneau_inequality_nonnegative", mi.minimum >= -1e-6, "min " + fmt(mi.minimum));
        }
    }
    run.report().outputs["almgren_blowup"] = qj;
    run.artifact("classification.json", run.report().outputs.dump(2) + "\n");
}

inline void run_monotonicity(Run& run) {
    const auto& cfg = run.cfg();
    std::optional<Fixture> fx;
    const auto u = run.field(fx);
    const Point x0 = cfg.point("center", fx ? fx->truth.singular_point : Point{0.0, 0.0, 0.0});
    const auto p_star = subtraction(cfg, "p_star", fx && fx->truth.blowup ? "truth" : "fit", u, fx, x0);
    if (!p_star) throw Error(ErrorKind::parameter, cfg.where("p_star") + ": the suite needs a blowup");
    const auto w = deficit(u, *p_star, x0);
    const double r_min = cfg.number("r_min", 8.0 * u.h());
    const double r_max = cfg.number("r_max", std::min(0.5, evaluable_radius(u, x0)));

    double lambda_star = 0.0;
    if (fx && fx->truth.frequency) lambda_star = *fx->truth.frequency;
    else lambda_star = profile(w, x0, r_min, r_max).lambda_star;
    std::vector<double> lambdas = {2.0};
    if (lambda_star != 2.0) lambdas.push_back(lambda_star);
    lambdas.push_back(lambda_star + 0.5);
    for (double l : cfg.numbers("lambdas"))
        if (std::find(lambdas.begin(), lambdas.end(), l) == lambdas.end()) lambdas.push_back(l);

    const auto prof = profile(w, x0, r_min, r_max, lambdas);
    run.artifact("profile.csv", to_csv(prof));
    json verdicts = json::object();
    auto record = [&](const std::string& key, const std::string& invariant, const MonotoneVerdict& v) {
        verdicts[key] = to_json(v);
        run.expect(invariant, v.monotone, key + ": worst drop " + fmt(v.worst_violation) + " vs " + fmt(v.tolerance));
    };
    record("phi", "functionals.phi_nondecreasing", check_monotone(prof, Track::phi));
    for (double l : lambdas) {
        if (l > lambda_star + 1e-12) continue;
        record("weiss_" + fmt(l), "functionals.weiss_nondecreasing", check_monotone(prof, Track::weiss, l));
        record("monneau_" + fmt(l), "functionals.monneau_nondecreasing_below_lambda_star",
               check_monotone(prof, Track::monneau, l));
    }
    const auto& div = *std::find_if(prof.tracks.begin(), prof.tracks.end(),
                                    [&](const LambdaTrack& t) { return t.lambda == lambda_star + 0.5; });
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < prof.radii.size() && prof.radii[k + 1] <= 10.0 * r_min * (1 + 1e-12); ++k)
        min_ratio = std::min(min_ratio, div.monneau[k] / div.monneau[k + 1]);
    verdicts["monneau_divergence_ratio"] = min_ratio;
    run.expect("functionals.monneau_diverges_above_lambda_star", min_ratio >= 1.5,
               "min H(r/2)/H(r) over the last decade = " + fmt(min_ratio));
    run.expect("functionals.phi_at_least_two", prof.lambda_star >= 2.0 - 0.05, "phi(0+) ~ " + fmt(prof.lambda_star));

    const int samples = static_cast<int>(cfg.integer("p_samples", 8));
    std::mt19937_64 rng(cfg.seed());
    std::ostringstream csv;
    csv.precision(17);
    csv << "sample,phi_worst_drop,phi_tolerance,weiss2_worst_drop,weiss2_tolerance,phi_monotone,weiss2_monotone\n";
    bool all_ok = true;
    double worst_ratio = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto p = sample_p_plus(u.dim(), rng);
        const auto ps = profile(deficit(u, p, x0), x0, r_min, r_max, {2.0});
        const auto vp = check_monotone(ps, Track::phi), vw = check_monotone(ps, Track::weiss, 2.0);
        all_ok = all_ok && vp.monotone && vw.monotone;
        worst_ratio = std::max({worst_ratio, vp.worst_violation / std::max(vp.tolerance, 1e-300),
                                vw.worst_violation / std::max(vw.tolerance, 1e-300)});
        csv << s << "," << vp.worst_violation << "," << vp.tolerance << "," << vw.worst_violation << ","
            << vw.tolerance << "," << vp.monotone << "," << vw.monotone << "\n";
    }
    if (samples > 0) {
        run.artifact("p_samples.csv", csv.str());
        run.expect("functionals.monotone_for_sampled_p_plus", all_ok,
                   std::to_string(samples) + " samples, worst drop/tolerance " + fmt(worst_ratio));
    }
    run.artifact("verdicts.json", verdicts.dump(2) + "\n");
    run.report().outputs["monotonicity"] = {{"lambda_star", lambda_star}, {"measured_phi_min_radius", prof.lambda_star},
                                            {"verdicts", verdicts}};
}

inline void run_recursion(Run& run) {
    const auto& cfg = run.cfg();
    auto ints = [&](const std::string& key, std::vector<double> fb) {
        std::vector<long> out;
        for (double v : cfg.numbers(key, fb)) out.push_back(static_cast<long>(v));
        return out;
    };
    std::vector<int> ns;
    for (long v : ints("ns", {2, 3, 4})) ns.push_back(static_cast<int>(v));
    const auto rows = verification_matrix(ns, cfg.numbers("c1s", {0.5, 1, 2}), cfg.numbers("c2s", {0.5, 1, 2}),
                                          cfg.numbers("ms", {0.5, 1}), ints("k0s", {1, 5}),
                                          cfg.integer("k_max", 1000000));
    run.artifact("verification_matrix.csv", to_csv(rows));
    long failing = 0, vacuous = 0, breaks = 0, extended = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        failing += r.holds() ? 0 : 1;
        vacuous += r.checked == 0 ? 1 : 0;
        breaks += r.monotonicity_breaks;
        extended += r.extended_violations;
        for (double s : r.params.slacks) min_slack = std::min(min_slack, s);
    }
    run.report().outputs["recursion"] = {{"rows", rows.size()},          {"failing", failing},
                                         {"vacuous_rows", vacuous},      {"extended_violations", extended},
                                         {"monotonicity_breaks", breaks}, {"min_slack", min_slack}};
    run.expect("recursion.bound_holds_on_grid", failing == 0,
               std::to_string(rows.size()) + " rows, " + std::to_string(vacuous) + " with K0 beyond k_max");
    run.expect("recursion.constants_satisfy_conditions", min_slack >= -1e-9, "min slack " + fmt(min_slack));
    run.expect("recursion.monotone_when_forcing_dominates", breaks == 0, std::to_string(breaks) + " rising steps");
}

inline void run_class_p(Run& run) {
    const auto& cfg = run.cfg();
    std::optional<Fixture> fx;
    const auto u = run.field(fx);
    const Point x0 = cfg.point("center", Point{0.0, 0.0, 0.0});
    const auto rep = check_class_P(u, x0, cfg.number("eps", 0.25), cfg.number("M", 10.0),
                                   Modulus::parse(cfg.text("omega", "const:0.5")), std::nullopt, variant_of(cfg),
                                   thresholds_of(cfg));
    std::ostringstream csv;
    csv.precision(17);
    csv << "r,ratio,omega,ok\n";
    for (const auto& row : rep.profile) csv << row.r << "," << row.ratio << "," << row.omega << "," << row.ok << "\n";
    run.artifact("class_p.csv", csv.str());
    run.report().outputs["class_P"] = {{"member", rep.member}, {"hessian_max", rep.hessian_max},
                                       {"hessian_ok", rep.hessian_ok}, {"boundary_points", rep.boundary_points}};
    if (cfg.has("expect_member"))
        run.expect("measures.class_P_membership", rep.member == cfg.flag("expect_member", true),
                   std::string("member = ") + (rep.member ? "true" : "false"));
}

}  // namespace detail

/// Runs one experiment, writing artifacts and report.json into `out`.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const fs::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Run run(cfg, out);
    const auto kind = cfg.text("kind");
    run.step(kind, [&] {
        if (kind == "solve") detail::run_solve(run);
        else if (kind == "profile") detail::run_profile(run);
        else if (kind == "classify") detail::run_classify(run);
        else if (kind == "monotonicity-suite") detail::run_monotonicity(run);
        else if (kind == "recursion-suite") detail::run_recursion(run);
        else if (kind == "class-P") detail::run_class_p(run);
    });
    auto& rep = run.report();
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_bytes(out / "report.json", rep.to_json().dump(2) + "\n");
    return rep;
}

struct ReplayResult {
    ExperimentReport report;
    std::vector<std::string> missing;  ///< inputs absent on disk; nothing was run when non-empty
    bool identical_artifacts = false;
    bool same_verdicts = false;
};

/// Re-runs the config echoed in a report and compares against it. With the
/// original seed every artifact must hash the same; with another seed only the
/// pass/fail verdicts must agree.
inline ReplayResult replay(const fs::path& report_path, const fs::path& out, std::optional<std::uint64_t> seed = {}) {
    ReplayResult res;
    if (!fs::exists(report_path)) {
        res.missing.push_back(fs::absolute(report_path).string());
        return res;
    }
    json original;
    try {
        original = json::parse(read_bytes(report_path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, report_path.string() + ": " + e.what());
    }
    if (!original.contains("config")) throw Error(ErrorKind::format, report_path.string() + ": no config echo");
    for (const auto& in : original.value("inputs", json::array()))
        if (!fs::exists(in.get<std::string>())) res.missing.push_back(in.get<std::string>());
    if (!res.missing.empty()) return res;

    const fs::path base = original.value("config_base", fs::absolute(report_path).parent_path().string());
    auto cfg = ExperimentConfig::from_json(original["config"], base);
    const bool reseeded = seed && *seed != cfg.seed();
    if (seed) cfg.set("seed", std::to_string(*seed));
    res.report = run_experiment(cfg, out);

    std::map<std::string, std::string> before;
    for (const auto& a : original.value("artifacts", json::array())) before[a["path"]] = a["fnv1a"];
    res.identical_artifacts = before.size() == res.report.artifacts.size();
    for (const auto& a : res.report.artifacts)
        res.identical_artifacts = res.identical_artifacts && before.count(a.path) && before[a.path] == a.hash;

    std::vector<std::pair<std::string, bool>> a, b;
    for (const auto& e : original.value("expectations", json::array())) a.emplace_back(e["name"], e["passed"]);
    for (const auto& e : res.report.expectations) b.emplace_back(e.name, e.passed);
    res.same_verdicts = a == b;

    if (reseeded)
        res.report.expectations.push_back({"cli.replay_same_verdicts", res.same_verdicts, "seed changed"});
    else
        res.report.expectations.push_back({"cli.replay_identical_artifacts", res.identical_artifacts && res.same_verdicts,
                                           std::to_string(res.report.artifacts.size()) + " artifacts compared"});
    write_bytes(out / "report.json", res.report.to_json().dump(2) + "\n");
    return res;
}

}  // namespace oblab
