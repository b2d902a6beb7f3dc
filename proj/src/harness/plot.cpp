#include "fedsim/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include "fedsim/error.hpp"

namespace fedsim::harness {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

std::optional<double> axis_value(const ReportRow& r, const std::string& axis) {
    if (axis == "sigma_cf") return r.sigma_cf;
    if (axis == "K") return static_cast<double>(r.k);
    if (axis == "tau") return r.tau;
    throw InputError("unknown plot axis '" + axis + "'");
}

}  // namespace

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<PlotSeries>& series) {
    const double w = 640, h = 420, left = 70, right = 150, top = 40, bottom = 60;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (const auto& p : s.points) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.mean - p.std);
            y1 = std::max(y1, p.mean + p.std);
        }
    if (!std::isfinite(x0)) throw InputError("nothing to plot");
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y1 = y0 + 1.0;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
    auto py = [&](double y) { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); };

    std::ofstream out(path);
    if (!out) throw InputError("cannot write plot " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
        << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
        << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
        out << "<text x=\"" << px(xv) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << num(xv)
            << "</text>\n";
        out << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv)
            << "</text>\n";
    }
    out << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 18 << "\" text-anchor=\"middle\">"
        << escape(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << (top + h - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << (top + h - bottom) / 2 << ")\">" << escape(y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % std::size(kPalette)];
        const auto& pts = series[i].points;
        std::string poly;
        for (const auto& p : pts) poly += num(px(p.x)) + "," + num(py(p.mean)) + " ";
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << poly << "\"/>\n";
        for (const auto& p : pts) {
            out << "<line x1=\"" << px(p.x) << "\" y1=\"" << py(p.mean - p.std) << "\" x2=\"" << px(p.x)
                << "\" y2=\"" << py(p.mean + p.std) << "\" stroke=\"" << color << "\"/>\n";
            out << "<circle cx=\"" << px(p.x) << "\" cy=\"" << py(p.mean) << "\" r=\"3\" fill=\"" << color
                << "\"/>\n";
        }
        const double ly = top + 18.0 * static_cast<double>(i);
        out << "<line x1=\"" << w - right + 12 << "\" y1=\"" << ly << "\" x2=\"" << w - right + 32 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << w - right + 38 << "\" y=\"" << ly + 4 << "\">" << escape(series[i].name)
            << "</text>\n";
    }
    out << "</svg>\n";
}

std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows, const std::string& axis) {
    std::map<std::tuple<std::string, double, std::string>, std::vector<double>> groups;
    for (const auto& r : rows) {
        auto x = axis_value(r, axis);
        if (!x) continue;
        groups[{r.algorithm, *x, r.metric}].push_back(r.value);
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, values] : groups) {
        SummaryRow s;
        std::tie(s.algorithm, s.x, s.metric) = key;
        s.n = values.size();
        for (double v : values) s.mean += v;
        s.mean /= static_cast<double>(s.n);
        if (s.n > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - s.mean) * (v - s.mean);
            s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
        }
        out.push_back(s);
    }
    return out;
}

std::vector<std::filesystem::path> write_sweep_plots(const std::filesystem::path& dir,
                                                     const std::vector<ReportRow>& rows) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const std::string axis : {"sigma_cf", "tau", "K"}) {
        std::set<double> xs;
        for (const auto& r : rows)
            if (auto x = axis_value(r, axis)) xs.insert(*x);
        if (xs.size() < 2) continue;
        const auto summary = summarize(rows, axis);
        std::set<std::string> metrics;
        for (const auto& s : summary) metrics.insert(s.metric);
        for (const auto& metric : metrics) {
            if (metric.rfind("link_", 0) == 0) continue;
            std::map<std::string, PlotSeries> by_algo;
            const auto stem = metric + "_vs_" + axis;
            std::ofstream csv(dir / (stem + ".csv"));
            csv << "algorithm," << axis << ",metric,mean,std,n\n";
            for (const auto& s : summary) {
                if (s.metric != metric) continue;
                auto& series = by_algo[s.algorithm];
                series.name = s.algorithm;
                series.points.push_back({s.x, s.mean, s.std});
                csv << s.algorithm << "," << format_double(s.x) << "," << s.metric << "," << format_double(s.mean)
                    << "," << format_double(s.std) << "," << s.n << "\n";
            }
            std::vector<PlotSeries> series;
            for (auto& [name, s] : by_algo) series.push_back(std::move(s));
            const auto svg = dir / (stem + ".svg");
            write_line_plot_svg(svg, metric + " vs " + axis, axis, metric, series);
            written.push_back(svg);
        }
    }
    return written;
}

}  // namespace fedsim::harness
