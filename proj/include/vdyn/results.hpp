#pragma once

// Result serialization: CSV tables (t,<signals> rows), gnuplot scripts for
// the standard figure classes, and atomic output via a staging directory
// that is renamed into place only after every file is written.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vdyn/caseio.hpp"
#include "vdyn/monotone.hpp"

namespace vdyn {

namespace detail {

inline std::string csv_num(double v) { return case_fmt(v); }

}  // namespace detail

/// One output file staged for atomic emission.
struct ResultFile {
    std::string name;     // relative file name inside the output directory
    std::string content;
};

struct ResultBundle {
    std::vector<ResultFile> files;

    void add(std::string name, std::string content) {
        files.push_back({std::move(name), std::move(content)});
    }
};

/// Writes every file into <dir>.staging-<pid> and renames onto <dir>;
/// an existing directory is replaced only after the staging succeeds.
inline void write_results(const ResultBundle& bundle, const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path target(dir);
    const fs::path staging =
        target.parent_path() /
        (target.filename().string() + ".staging-" + std::to_string(::getpid()));
    std::error_code ec;
    fs::remove_all(staging, ec);
    fs::create_directories(staging);
    for (const auto& f : bundle.files) {
        const fs::path p = staging / f.name;
        fs::create_directories(p.parent_path(), ec);
        std::ofstream out(p, std::ios::binary);
        if (!out) throw VdynError("cannot write " + p.string());
        out << f.content;
        if (!out.flush()) throw VdynError("short write to " + p.string());
    }
    fs::path backup = target;
    backup += ".old";
    fs::remove_all(backup, ec);
    if (fs::exists(target)) fs::rename(target, backup);
    fs::rename(staging, target);
    fs::remove_all(backup, ec);
}

// ---------------------------------------------------------------------------
// CSV builders
// ---------------------------------------------------------------------------

inline std::string timeseries_csv(const std::vector<double>& times,
                                  const std::vector<std::string>& headers,
                                  const MatR& columns) {
    std::string out = "t";
    for (const auto& h : headers) out += "," + h;
    out += "\n";
    for (int k = 0; k < columns.rows(); ++k) {
        out += detail::csv_num(times[k]);
        for (int c = 0; c < columns.cols(); ++c)
            out += "," + detail::csv_num(columns(k, c));
        out += "\n";
    }
    return out;
}

/// Default recorded signals for a run: every bus magnitude plus every
/// device's internal voltage state.
inline std::vector<std::string> default_signals(const BuiltCase& bc) {
    std::vector<std::string> sigs;
    for (int i = 0; i < bc.sys.n_bus(); ++i)
        sigs.push_back("vmag:" + std::to_string(bc.external_ids[i]));
    const auto labels = bc.sys.state_labels();
    for (int d = 0; d < bc.sys.n_dev(); ++d) {
        const int bus = bc.sys.device_bus(d);
        const std::string tag = (bc.sys.is_gfm(d) ? "gfm" : "sg") +
                                std::to_string(bc.external_ids[bus]);
        sigs.push_back("state:" + tag + ":e");
    }
    return sigs;
}

inline std::string run_csv(const BuiltCase& bc, const TimeSeries& ts,
                           std::vector<std::string> signals) {
    if (signals.empty()) signals = default_signals(bc);
    MatR cols(ts.n_samples(), signals.size());
    for (std::size_t c = 0; c < signals.size(); ++c)
        cols.col(c) = signal_series(bc.sys, ts, internal_signal_name(bc, signals[c]));
    return timeseries_csv(ts.times, signals, cols);
}

inline std::string matrix_csv(const MatR& m, const std::vector<std::string>& row_labels,
                              const std::vector<std::string>& col_labels) {
    std::string out = "row";
    for (const auto& h : col_labels) out += "," + h;
    out += "\n";
    for (int i = 0; i < m.rows(); ++i) {
        out += row_labels[i];
        for (int j = 0; j < m.cols(); ++j) out += "," + detail::csv_num(m(i, j));
        out += "\n";
    }
    return out;
}

inline std::string sign_matrix_csv(const SignMatrix& sm,
                                   const std::vector<std::string>& labels) {
    std::string out = "row";
    for (const auto& h : labels) out += "," + h;
    out += "\n";
    for (int i = 0; i < sm.signs.rows(); ++i) {
        out += labels[i];
        for (int j = 0; j < sm.signs.cols(); ++j)
            out += std::string(",") +
                   (sm.signs(i, j) > 0 ? "+" : sm.signs(i, j) < 0 ? "-" : "0");
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// gnuplot scripts
// ---------------------------------------------------------------------------

/// Line plot of every column of a t,<signals> CSV against time.
inline std::string gnuplot_timeseries(const std::string& csv_name,
                                      const std::vector<std::string>& headers,
                                      const std::string& title,
                                      const std::string& ylabel) {
    std::string out;
    out += "set datafile separator ','\n";
    out += "set key outside right\n";
    out += "set xlabel 'time [s]'\n";
    out += "set ylabel '" + ylabel + "'\n";
    out += "set title '" + title + "'\n";
    out += "set grid\n";
    out += "set terminal pngcairo size 1200,700\n";
    out += "set output '" + title + ".png'\n";
    out += "plot \\\n";
    for (std::size_t c = 0; c < headers.size(); ++c) {
        out += "  '" + csv_name + "' using 1:" + std::to_string(c + 2) +
               " with lines title '" + headers[c] + "'";
        out += (c + 1 < headers.size()) ? ", \\\n" : "\n";
    }
    return out;
}

/// Heat map of a matrix CSV (sign patterns, Jacobian blocks).
inline std::string gnuplot_matrix(const std::string& csv_name,
                                  const std::string& title) {
    std::string out;
    out += "set datafile separator ','\n";
    out += "set title '" + title + "'\n";
    out += "set terminal pngcairo size 900,800\n";
    out += "set output '" + title + ".png'\n";
    out += "set palette defined (-1 'blue', 0 'white', 1 'red')\n";
    out += "set view map\n";
    out += "splot '" + csv_name + "' matrix columnheaders rowheaders with image "
           "notitle\n";
    return out;
}

/// Family of curves over the homotopy parameter.
inline std::string gnuplot_upsilon(const std::string& csv_name,
                                   int n_buses, const std::string& title) {
    std::string out;
    out += "set datafile separator ','\n";
    out += "set xlabel 'sigma'\n";
    out += "set ylabel 'scan derivative'\n";
    out += "set title '" + title + "'\n";
    out += "set grid\n";
    out += "set terminal pngcairo size 1200,700\n";
    out += "set output '" + title + ".png'\n";
    out += "plot \\\n";
    for (int c = 0; c < n_buses; ++c) {
        out += "  '" + csv_name + "' using 1:" + std::to_string(c + 2) +
               " with lines notitle";
        out += (c + 1 < n_buses) ? ", \\\n" : "\n";
    }
    return out;
}

}  // namespace vdyn
