#include "cs2dspec/io.hpp"

#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>

namespace cs2d {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    body(out);
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Header "# key=value" lines followed by "i j re im" records.
class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(source_, line_no_, msg); }

    // Reads header lines until the first data line, which is kept pending.
    void read_header() {
        while (next_line()) {
            const auto s = trim(line_);
            if (s.empty()) continue;
            if (s.front() != '#') {
                pending_ = true;
                return;
            }
            const auto body = trim(s.substr(1));
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) continue;  // plain comment
            const std::string key(trim(body.substr(0, eq)));
            if (header_.count(key)) fail("duplicate header key '" + key + "'");
            header_[key] = {std::string(trim(body.substr(eq + 1))), line_no_};
        }
    }

    std::string text(const std::string& key) const {
        auto it = header_.find(key);
        if (it == header_.end()) throw ParseError(source_, line_no_, "missing header key '" + key + "'");
        return it->second.first;
    }

    bool has(const std::string& key) const { return header_.count(key) > 0; }

    double real(const std::string& key) const {
        const auto v = text(key);
        double x = 0.0;
        if (!parse(v, x) || !std::isfinite(x))
            throw ParseError(source_, header_.at(key).second, "bad value for '" + key + "': '" + v + "'");
        return x;
    }

    long integer(const std::string& key, long min) const {
        const auto v = text(key);
        long x = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc{} || p != v.data() + v.size() || x < min)
            throw ParseError(source_, header_.at(key).second, "bad value for '" + key + "': '" + v + "'");
        return x;
    }

    // Fills `m` from records that must appear in row-major order.
    void read_values(ComplexMatrix& m, const char* row_name) {
        const std::size_t rows = m.rows(), cols = m.cols();
        std::size_t r = 0, c = 0;
        while (pending_ || next_line()) {
            pending_ = false;
            const auto s = trim(line_);
            if (s.empty() || s.front() == '#') continue;
            std::size_t i = 0, j = 0;
            double re = 0.0, im = 0.0;
            parse_record(s, i, j, re, im);
            if (r == rows) fail("more data lines than declared (" + std::to_string(rows * cols) + ")");
            if (i != r || j != c) {
                if (i == r + 1 && j == 0 && c > 0)
                    fail(std::string(row_name) + " " + std::to_string(r) + " has " + std::to_string(c) +
                         " values, expected " + std::to_string(cols));
                fail("expected indices " + std::to_string(r) + " " + std::to_string(c) + ", found " +
                     std::to_string(i) + " " + std::to_string(j));
            }
            if (!std::isfinite(re) || !std::isfinite(im)) fail("non-finite value");
            m(r, c) = {re, im};
            if (++c == cols) {
                c = 0;
                ++r;
            }
        }
        if (r != rows) {
            if (c > 0)
                fail(std::string(row_name) + " " + std::to_string(r) + " has " + std::to_string(c) + " values, expected " +
                     std::to_string(cols));
            fail("expected " + std::to_string(rows) + " " + row_name + "s of data, found " + std::to_string(r));
        }
    }

private:
    static bool parse(std::string_view v, double& x) {
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        return ec == std::errc{} && p == v.data() + v.size();
    }

    void parse_record(std::string_view s, std::size_t& i, std::size_t& j, double& re, double& im) {
        std::string_view fields[4];
        std::size_t n = 0;
        while (!s.empty()) {
            const auto end = s.find_first_of(" \t");
            if (n == 4) fail("expected 4 fields per data line");
            fields[n++] = s.substr(0, end);
            if (end == std::string_view::npos) break;
            s = trim(s.substr(end));
        }
        if (n != 4) fail("expected 4 fields per data line");
        for (int k = 0; k < 2; ++k) {
            auto& dst = k == 0 ? i : j;
            auto [p, ec] = std::from_chars(fields[k].data(), fields[k].data() + fields[k].size(), dst);
            if (ec != std::errc{} || p != fields[k].data() + fields[k].size()) fail("bad index '" + std::string(fields[k]) + "'");
        }
        if (!parse(fields[2], re) || !parse(fields[3], im)) fail("bad number in data line");
    }

    bool next_line() {
        if (!std::getline(in_, line_)) return false;
        ++line_no_;
        return true;
    }

    std::istream& in_;
    std::string source_;
    std::string line_;
    std::size_t line_no_ = 0;
    bool pending_ = false;
    std::map<std::string, std::pair<std::string, std::size_t>> header_;
};

void write_values(const ComplexMatrix& m, std::ostream& out) {
    std::string buf;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            buf.clear();
            buf += std::to_string(r);
            buf += ' ';
            buf += std::to_string(c);
            buf += ' ';
            buf += format_double(m(r, c).real());
            buf += ' ';
            buf += format_double(m(r, c).imag());
            buf += '\n';
            out << buf;
        }
    }
}

FrequencyGrid read_freq_axis(const Reader& rd, const std::string& prefix) {
    const double min = rd.real(prefix + "_min");
    const double max = rd.real(prefix + "_max");
    const long count = rd.integer(prefix + "_count", 2);
    try {
        FrequencyGrid grid(min, max, static_cast<std::size_t>(count));
        if (rd.has(prefix + "_spacing") && rd.real(prefix + "_spacing") != grid.spacing())
            rd.fail(prefix + "_spacing does not match (max - min) / (count - 1)");
        return grid;
    } catch (const std::invalid_argument& e) {
        rd.fail(e.what());
    }
}

void write_freq_axis(const FrequencyGrid& g, const std::string& prefix, std::ostream& out) {
    out << "# " << prefix << "_min=" << format_double(g.min()) << '\n'
        << "# " << prefix << "_max=" << format_double(g.max()) << '\n'
        << "# " << prefix << "_spacing=" << format_double(g.spacing()) << '\n'
        << "# " << prefix << "_count=" << g.count() << '\n';
}

const char* flag(bool b) { return b ? "1" : "0"; }

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

std::string format_double(double x) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

SignalGrid2D read_signal_grid(std::istream& in, const std::string& source) {
    Reader rd(in, source);
    rd.read_header();
    if (rd.has("format") && rd.text("format") != "SIG2D") rd.fail("not a SIG2D file");
    const double dtau = rd.real("delta_tau_fs");
    const double dt = rd.real("delta_t_fs");
    const double T = rd.real("population_time_fs");
    const long n_tau = rd.integer("n_tau", 1);
    const long n_t = rd.integer("n_t", 1);
    SignalLabel label;
    try {
        label = signal_label_from_string(rd.text("label"));
    } catch (const std::invalid_argument& e) {
        rd.fail(e.what());
    }
    const long tau0 = rd.has("tau_origin_index") ? rd.integer("tau_origin_index", LONG_MIN) : 0;
    const long t0 = rd.has("t_origin_index") ? rd.integer("t_origin_index", LONG_MIN) : 0;
    try {
        SignalGrid2D s{TimeGrid(dtau, static_cast<std::size_t>(n_tau), tau0), TimeGrid(dt, static_cast<std::size_t>(n_t), t0),
                       T, ComplexMatrix(static_cast<std::size_t>(n_tau), static_cast<std::size_t>(n_t)), label};
        rd.read_values(s.values, "row");
        return s;
    } catch (const std::invalid_argument& e) {
        rd.fail(e.what());
    }
}

SignalGrid2D read_signal_grid(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_signal_grid(in, path.string());
}

void write_signal_grid(const SignalGrid2D& s, std::ostream& out) {
    s.validate();
    out << "# format=SIG2D\n"
        << "# delta_tau_fs=" << format_double(s.tau_grid.delta()) << '\n'
        << "# delta_t_fs=" << format_double(s.t_grid.delta()) << '\n'
        << "# population_time_fs=" << format_double(s.population_time) << '\n'
        << "# n_tau=" << s.tau_grid.count() << '\n'
        << "# n_t=" << s.t_grid.count() << '\n'
        << "# label=" << to_string(s.label) << '\n';
    if (s.tau_grid.origin_index() != 0) out << "# tau_origin_index=" << s.tau_grid.origin_index() << '\n';
    if (s.t_grid.origin_index() != 0) out << "# t_origin_index=" << s.t_grid.origin_index() << '\n';
    write_values(s.values, out);
}

void write_signal_grid(const SignalGrid2D& signal, const std::filesystem::path& path) {
    write_file(path, [&](std::ostream& out) { write_signal_grid(signal, out); });
}

Spectrum2D read_spectrum(std::istream& in, const std::string& source) {
    Reader rd(in, source);
    rd.read_header();
    if (rd.has("format") && rd.text("format") != "SPEC2D") rd.fail("not a SPEC2D file");
    const FrequencyGrid w_tau = read_freq_axis(rd, "omega_tau");
    const FrequencyGrid w_t = read_freq_axis(rd, "omega_t");
    const double T = rd.real("population_time_fs");
    Provenance prov;
    try {
        prov = provenance_from_string(rd.text("provenance"));
    } catch (const std::invalid_argument& e) {
        rd.fail(e.what());
    }
    Spectrum2D s{w_tau, w_t, T, ComplexMatrix(w_tau.count(), w_t.count()), prov};
    rd.read_values(s.values, "omega_tau row");
    return s;
}

Spectrum2D read_spectrum(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_spectrum(in, path.string());
}

void write_spectrum(const Spectrum2D& s, std::ostream& out) {
    s.validate();
    out << "# format=SPEC2D\n";
    write_freq_axis(s.omega_tau_grid, "omega_tau", out);
    write_freq_axis(s.omega_t_grid, "omega_t", out);
    out << "# population_time_fs=" << format_double(s.population_time) << '\n'
        << "# provenance=" << to_string(s.provenance) << '\n';
    write_values(s.values, out);
}

void write_spectrum(const Spectrum2D& spectrum, const std::filesystem::path& path) {
    write_file(path, [&](std::ostream& out) { write_spectrum(spectrum, out); });
}

void write_peak_table(const std::vector<Peak>& peaks, std::optional<double> frame, std::ostream& out) {
    out << "rank\tomega_tau_index\tomega_t_index\tomega_tau\tomega_t";
    if (frame) out << "\tomega_tau_lab\tomega_t_lab";
    out << "\tmagnitude\tfwhm_tau\tfwhm_t\tsingle_bin_tau\tsingle_bin_t\ttruncated_tau\ttruncated_t\n";
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        const Peak& p = peaks[i];
        out << i + 1 << '\t' << p.row << '\t' << p.col << '\t' << format_double(p.omega_tau) << '\t'
            << format_double(p.omega_t);
        if (frame) out << '\t' << format_double(p.omega_tau + *frame) << '\t' << format_double(p.omega_t + *frame);
        out << '\t' << format_double(p.magnitude) << '\t' << format_double(p.fwhm_tau) << '\t'
            << format_double(p.fwhm_t) << '\t' << flag(p.single_bin_tau) << '\t' << flag(p.single_bin_t) << '\t'
            << flag(p.truncated_tau) << '\t' << flag(p.truncated_t) << '\n';
    }
}

void write_comparison_table(const ResolutionComparison& cmp, std::ostream& out) {
    out << "kind\tft_omega_tau\tft_omega_t\tft_magnitude\tft_fwhm_tau\tft_fwhm_t\t"
           "cs_omega_tau\tcs_omega_t\tcs_magnitude\tcs_fwhm_tau\tcs_fwhm_t\tratio_tau\tratio_t\n";
    auto peak_cols = [&](const Peak& p) {
        out << format_double(p.omega_tau) << '\t' << format_double(p.omega_t) << '\t' << format_double(p.magnitude)
            << '\t' << format_double(p.fwhm_tau) << '\t' << format_double(p.fwhm_t);
    };
    const char* blank = "\t\t\t\t";
    for (const auto& m : cmp.matched) {
        out << "matched\t";
        peak_cols(m.ft);
        out << '\t';
        peak_cols(m.cs);
        out << '\t' << format_double(m.ratio_tau) << '\t' << format_double(m.ratio_t) << '\n';
    }
    for (const auto& p : cmp.unmatched_ft) {
        out << "ft_only\t";
        peak_cols(p);
        out << '\t' << blank << "\t\t\n";
    }
    for (const auto& p : cmp.unmatched_cs) {
        out << "cs_only\t" << blank << '\t';
        peak_cols(p);
        out << "\t\t\n";
    }
}

void write_solve_report(const PipelineReport& report, std::ostream& out) {
    out << "pass\taxis\tindex\tstatus\touter_iterations\tinner_iterations\tresidual_norm\ttrivial\n";
    int pass = 1;
    for (const PassReport* p : {&report.first, &report.second}) {
        for (const auto& r : p->records) {
            out << pass << '\t' << p->axis << '\t' << r.index << '\t' << to_string(r.status) << '\t'
                << r.outer_iterations << '\t' << r.inner_iterations << '\t' << format_double(r.residual_norm) << '\t'
                << flag(r.trivial) << '\n';
        }
        ++pass;
    }
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
    write_file(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

nlohmann::json read_json(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

}  // namespace cs2d
