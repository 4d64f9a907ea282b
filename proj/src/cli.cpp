#include "cs2dspec/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cs2dspec/analysis.hpp"
#include "cs2dspec/io.hpp"

namespace cs2d {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

std::string mode_name(RunMode m) {
    switch (m) {
        case RunMode::Synth: return "synth";
        case RunMode::Transform: return "transform";
        case RunMode::Analyze: return "analyze";
        case RunMode::Compare: return "compare";
    }
    return "?";
}

json grid_json(const TimeGrid& g) {
    return {{"delta_fs", g.delta()}, {"count", g.count()}, {"origin_index", g.origin_index()}};
}

json grid_json(const FrequencyGrid& g) {
    return {{"min", g.min()}, {"max", g.max()}, {"spacing", g.spacing()}, {"count", g.count()}};
}

json bpdn_json(const BpdnConfig& c) {
    return {{"eta", c.eta},
            {"max_outer_iterations", c.max_outer_iterations},
            {"max_inner_iterations", c.max_inner_iterations},
            {"pareto_tolerance", c.pareto_tolerance},
            {"optimality_tolerance", c.optimality_tolerance},
            {"step_min", c.step_min},
            {"step_max", c.step_max},
            {"line_search_window", c.line_search_window},
            {"normalized", c.normalized}};
}

json mode_json(const ExponentialMode& m) {
    return {{"omega_tau", m.omega_tau}, {"omega_t", m.omega_t}, {"amplitude_re", m.amplitude.real()},
            {"amplitude_im", m.amplitude.imag()}, {"gamma_tau", m.gamma_tau}, {"gamma_t", m.gamma_t}};
}

json pass_json(const PassReport& p) {
    return {{"axis", p.axis},
            {"solves", p.records.size()},
            {"converged", p.count(SolveStatus::Converged)},
            {"budget_exhausted", p.count(SolveStatus::BudgetExhausted)},
            {"residual_infeasible", p.count(SolveStatus::ResidualInfeasible)},
            {"seconds", p.seconds}};
}

json base_metadata(const RunConfig& c) {
    return {{"tool", "cs2d"}, {"version", kVersion}, {"mode", mode_name(c.mode)}};
}

std::string meta_path(const std::string& output) { return output + ".meta.json"; }

// "w_tau,w_t[,re,im[,gamma_tau,gamma_t]]"
ExponentialMode parse_mode(const std::string& text) {
    std::vector<double> v;
    std::string_view rest = text;
    while (true) {
        const auto comma = rest.find(',');
        const auto field = rest.substr(0, comma);
        double x = 0.0;
        auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
        if (ec != std::errc{} || p != field.data() + field.size())
            throw std::invalid_argument("bad --mode value '" + text + "'");
        v.push_back(x);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    if (v.size() != 2 && v.size() != 4 && v.size() != 6)
        throw std::invalid_argument("--mode takes 2, 4 or 6 comma-separated numbers, got '" + text + "'");
    ExponentialMode m;
    m.omega_tau = v[0];
    m.omega_t = v[1];
    if (v.size() >= 4) m.amplitude = {v[2], v[3]};
    if (v.size() == 6) {
        m.gamma_tau = v[4];
        m.gamma_t = v[5];
    }
    m.validate();
    return m;
}

std::size_t workers_from_env(std::size_t fallback) {
    const char* env = std::getenv(kWorkersEnv);
    if (env == nullptr || *env == '\0') return fallback;
    std::size_t n = 0;
    const std::string_view s(env);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw std::invalid_argument(std::string(kWorkersEnv) + " must be a nonnegative integer, got '" + s.data() + "'");
    return n;
}

void run_synth(const RunConfig& c) {
    std::vector<ExponentialMode> modes;
    SignalLabel label = SignalLabel::Sum;
    if (c.preset == "custom") {
        modes = c.modes;
    } else {
        const RbKind kind = rb_kind_from_string(c.preset);
        modes = rb_preset(kind, c.frame_frequency, c.damping);
        label = kind == RbKind::Sum ? SignalLabel::Sum : SignalLabel::Diff;
    }
    const SignalGrid2D s = synthesize(modes, TimeGrid(c.delta_tau, c.n_tau), TimeGrid(c.delta_t, c.n_t),
                                      c.population_time, {c.sigma, c.seed}, label);
    write_signal_grid(s, std::filesystem::path(c.output));

    json meta = base_metadata(c);
    meta["output"] = c.output;
    meta["preset"] = c.preset;
    meta["frame_frequency"] = c.frame_frequency;
    meta["damping"] = c.damping;
    meta["tau_grid"] = grid_json(s.tau_grid);
    meta["t_grid"] = grid_json(s.t_grid);
    meta["population_time_fs"] = c.population_time;
    meta["noise"] = {{"sigma", c.sigma}, {"seed", c.seed}};
    meta["label"] = to_string(label);
    meta["modes"] = json::array();
    for (const auto& m : modes) meta["modes"].push_back(mode_json(m));
    meta["phase_convention"] = "exp(-(i w + gamma) tau) exp(-(i w + gamma) t)";
    write_json(meta, meta_path(c.output));
}

void run_transform(const RunConfig& c) {
    const SignalGrid2D s = read_signal_grid(std::filesystem::path(c.input));
    json meta = base_metadata(c);
    meta["input"] = c.input;
    meta["output"] = c.output;
    meta["kind"] = c.kind == TransformKind::FT ? "ft" : "cs";
    meta["n_omega_tau"] = c.n_omega_tau;
    meta["n_omega_t"] = c.n_omega_t;
    meta["tau_grid"] = grid_json(s.tau_grid);
    meta["t_grid"] = grid_json(s.t_grid);
    meta["population_time_fs"] = s.population_time;

    std::optional<Spectrum2D> spec;
    if (c.kind == TransformKind::FT) {
        spec = ft2d(s, c.n_omega_tau, c.n_omega_t, c.order);
    } else {
        const std::size_t workers = workers_from_env(c.workers);
        auto [result, report] = cs2d::cs2d(s, c.n_omega_tau, c.n_omega_t, c.bpdn, {workers, c.order});
        spec = std::move(result);
        meta["bpdn"] = bpdn_json(c.bpdn);
        meta["workers_requested"] = workers;
        meta["workers_used"] = report.workers;
        meta["passes"] = {pass_json(report.first), pass_json(report.second)};
        meta["solve_count"] = report.solve_count();
        if (!c.report.empty()) {
            std::ofstream out(c.report);
            if (!out) throw IoError("cannot open '" + c.report + "' for writing");
            write_solve_report(report, out);
            meta["report"] = c.report;
        }
    }
    meta["axis_order"] = to_string(c.order);
    meta["omega_tau_grid"] = grid_json(spec->omega_tau_grid);
    meta["omega_t_grid"] = grid_json(spec->omega_t_grid);
    write_spectrum(*spec, std::filesystem::path(c.output));
    write_json(meta, meta_path(c.output));
}

void write_text(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    body(out);
    if (!out.flush()) throw IoError("write to '" + path + "' failed");
}

void run_analyze(const RunConfig& c) {
    const Spectrum2D spec = read_spectrum(std::filesystem::path(c.input));
    const auto peaks = find_peaks(spec, c.threshold);
    write_text(c.output, [&](std::ostream& out) { write_peak_table(peaks, c.report_frame, out); });
    json meta = base_metadata(c);
    meta["input"] = c.input;
    meta["output"] = c.output;
    meta["threshold_fraction"] = c.threshold;
    meta["width_metric"] = "axis-aligned half maximum of |S|, linear interpolation";
    meta["peaks"] = peaks.size();
    if (c.report_frame) meta["frame_frequency"] = *c.report_frame;
    write_json(meta, meta_path(c.output));
}

void run_compare(const RunConfig& c) {
    const Spectrum2D ft = read_spectrum(std::filesystem::path(c.ft_input));
    const Spectrum2D cs = read_spectrum(std::filesystem::path(c.cs_input));
    const double radius = c.matching_bins * std::max(ft.omega_tau_grid.spacing(), ft.omega_t_grid.spacing());
    const auto cmp = compare_resolution(ft, cs, radius, c.threshold);
    write_text(c.output, [&](std::ostream& out) { write_comparison_table(cmp, out); });
    json meta = base_metadata(c);
    meta["ft_input"] = c.ft_input;
    meta["cs_input"] = c.cs_input;
    meta["output"] = c.output;
    meta["threshold_fraction"] = c.threshold;
    meta["matching_radius_bins"] = c.matching_bins;
    meta["matching_radius"] = radius;
    meta["width_metric"] = "axis-aligned half maximum of |S|, linear interpolation";
    meta["matched"] = cmp.matched.size();
    meta["unmatched_ft"] = cmp.unmatched_ft.size();
    meta["unmatched_cs"] = cmp.unmatched_cs.size();
    if (!cmp.matched.empty()) {
        double lo_tau = cmp.matched.front().ratio_tau, lo_t = cmp.matched.front().ratio_t;
        for (const auto& m : cmp.matched) {
            lo_tau = std::min(lo_tau, m.ratio_tau);
            lo_t = std::min(lo_t, m.ratio_t);
        }
        meta["min_ratio_tau"] = lo_tau;
        meta["min_ratio_t"] = lo_t;
    }
    write_json(meta, meta_path(c.output));
}

std::string one_line(std::string s) {
    for (auto& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

}  // namespace

void RunConfig::validate() const {
    if (output.empty()) throw std::invalid_argument("an output path is required");
    switch (mode) {
        case RunMode::Synth:
            if (preset == "custom" && modes.empty()) throw std::invalid_argument("custom preset needs at least one --mode");
            if (preset != "custom") rb_kind_from_string(preset);
            break;
        case RunMode::Transform:
        case RunMode::Analyze:
            if (input.empty()) throw std::invalid_argument("an input path is required");
            break;
        case RunMode::Compare:
            if (ft_input.empty() || cs_input.empty()) throw std::invalid_argument("both --ft and --cs are required");
            break;
    }
    if (n_omega_tau < 2 || n_omega_t < 2) throw std::invalid_argument("n_omega must be at least 2");
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
    if (!(matching_bins >= 0.0)) throw std::invalid_argument("matching radius must be nonnegative");
    bpdn.validate();
}

void run(const RunConfig& config) {
    config.validate();
    switch (config.mode) {
        case RunMode::Synth: run_synth(config); break;
        case RunMode::Transform: run_transform(config); break;
        case RunMode::Analyze: run_analyze(config); break;
        case RunMode::Compare: run_compare(config); break;
    }
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Two-dimensional spectra from sparsely sampled time-domain data", "cs2d"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    RunConfig c;
    std::vector<std::string> mode_specs;
    std::string kind = "cs", order = "t-first";
    std::optional<std::size_t> n_omega;
    double frame_for_report = 0.0;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic SIG2D signal");
    synth->add_option("-o,--output", c.output, "Output SIG2D path")->required();
    synth->add_option("--preset", c.preset, "rb-sum, rb-diff or custom")->capture_default_str();
    synth->add_option("--mode", mode_specs, "Custom mode: w_tau,w_t[,re,im[,gamma_tau,gamma_t]] (repeatable)");
    synth->add_option("--frame", c.frame_frequency, "Rotating-frame frequency (rad/fs)")->capture_default_str();
    synth->add_option("--damping", c.damping, "Preset damping rate (1/fs)")->capture_default_str();
    synth->add_option("--n-tau", c.n_tau)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--n-t", c.n_t)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--delta-tau", c.delta_tau, "fs")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--delta-t", c.delta_t, "fs")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--population-time", c.population_time, "fs")->capture_default_str();
    synth->add_option("--sigma", c.sigma, "Complex noise standard deviation")->capture_default_str();
    synth->add_option("--seed", c.seed)->capture_default_str();

    auto* transform = app.add_subcommand("transform", "FT or CS transform of a SIG2D file to SPEC2D");
    transform->add_option("-i,--input", c.input, "Input SIG2D path")->required();
    transform->add_option("-o,--output", c.output, "Output SPEC2D path")->required();
    transform->add_option("--kind", kind, "ft or cs")->check(CLI::IsMember({"ft", "cs"}))->capture_default_str();
    transform->add_option("--n-omega", n_omega, "Frequency points on both axes");
    transform->add_option("--n-omega-tau", c.n_omega_tau)->capture_default_str();
    transform->add_option("--n-omega-t", c.n_omega_t)->capture_default_str();
    transform->add_option("--eta", c.bpdn.eta, "Residual bound")->capture_default_str();
    transform->add_option("--max-outer", c.bpdn.max_outer_iterations)->capture_default_str();
    transform->add_option("--max-inner", c.bpdn.max_inner_iterations, "Total SPG iterations per solve")
        ->capture_default_str();
    transform->add_option("--pareto-tol", c.bpdn.pareto_tolerance)->capture_default_str();
    transform->add_option("--opt-tol", c.bpdn.optimality_tolerance)->capture_default_str();
    transform->add_option("--workers", c.workers, "0 = all processors")->capture_default_str();
    transform->add_option("--axis-order", order, "t-first or tau-first")
        ->check(CLI::IsMember({"t-first", "tau-first"}))
        ->capture_default_str();
    transform->add_option("--report", c.report, "Per-solve status table (cs only)");

    auto* analyze = app.add_subcommand("analyze", "Peak table of a SPEC2D file");
    analyze->add_option("-i,--input", c.input, "Input SPEC2D path")->required();
    analyze->add_option("-o,--output", c.output, "Output TSV path")->required();
    analyze->add_option("--threshold", c.threshold, "Relative peak threshold")->capture_default_str();
    auto* frame_opt = analyze->add_option("--frame", frame_for_report, "Add lab-frame columns (offset + frame)");

    auto* compare = app.add_subcommand("compare", "FT vs CS peak widths");
    compare->add_option("--ft", c.ft_input, "FT SPEC2D path")->required();
    compare->add_option("--cs", c.cs_input, "CS SPEC2D path")->required();
    compare->add_option("-o,--output", c.output, "Output TSV path")->required();
    compare->add_option("--threshold", c.threshold, "Relative peak threshold")->capture_default_str();
    compare->add_option("--radius-bins", c.matching_bins, "Matching radius in bins")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth->parsed()) {
            c.mode = RunMode::Synth;
            for (const auto& m : mode_specs) c.modes.push_back(parse_mode(m));
            if (!mode_specs.empty() && c.preset == "rb-sum" && synth->count("--preset") == 0) c.preset = "custom";
        } else if (transform->parsed()) {
            c.mode = RunMode::Transform;
            c.kind = kind == "ft" ? TransformKind::FT : TransformKind::CS;
            c.order = axis_order_from_string(order);
            if (n_omega) c.n_omega_tau = c.n_omega_t = *n_omega;
        } else if (analyze->parsed()) {
            c.mode = RunMode::Analyze;
            if (frame_opt->count() > 0) c.report_frame = frame_for_report;
        } else {
            c.mode = RunMode::Compare;
        }
        run(c);
    } catch (const std::exception& e) {
        std::cerr << "cs2d: error: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}

}  // namespace cs2d
