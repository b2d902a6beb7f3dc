#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fedsim/harness/experiment.hpp"

namespace fedsim::harness {

struct PlotPoint {
    double x = 0.0;
    double mean = 0.0;
    double std = 0.0;
};

struct PlotSeries {
    std::string name;
    std::vector<PlotPoint> points;
};

/// Line chart with +-1 std error bars.
void write_line_plot_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<PlotSeries>& series);

/// Aggregated rows behind one plot: `algorithm,x,metric,mean,std,n`.
struct SummaryRow {
    std::string algorithm;
    double x = 0.0;
    std::string metric;
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};

/// Groups rows by (algorithm, axis value, metric) over seeds. `axis` is
/// "sigma_cf", "tau" or "K". Rows without a value on the axis are skipped.
std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows, const std::string& axis);

/// For every axis with more than one distinct value, writes
/// `<metric>_vs_<axis>.svg` and `<metric>_vs_<axis>.csv` into `dir`. Returns
/// the written SVG paths.
std::vector<std::filesystem::path> write_sweep_plots(const std::filesystem::path& dir,
                                                     const std::vector<ReportRow>& rows);

}  // namespace fedsim::harness
