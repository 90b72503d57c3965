#include "rlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "rlab/eval.hpp"
#include "rlab/json_io.hpp"

namespace rlab {

namespace {

constexpr double kPanelW = 420.0;
constexpr double kPanelH = 180.0;
constexpr double kMarginL = 60.0;
constexpr double kMarginB = 30.0;
constexpr double kMarginT = 24.0;

std::string num(double x) { return format_double(x, 6); }

struct Series {
    std::vector<double> x, y_median, y_lo, y_hi;
};

std::string render_panel(const std::string& title, const Series& s, double y_offset) {
    if (s.x.empty()) return "";
    double xmin = s.x.front(), xmax = s.x.back();
    if (xmax == xmin) xmax = xmin + 1.0;
    double ymin = s.y_lo.front(), ymax = s.y_hi.front();
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        ymin = std::min(ymin, s.y_lo[i]);
        ymax = std::max(ymax, s.y_hi[i]);
    }
    if (ymax == ymin) {
        ymax += 1.0;
        ymin -= 1.0;
    }
    const double plot_w = kPanelW - kMarginL - 10.0;
    const double plot_h = kPanelH - kMarginT - kMarginB;
    auto sx = [&](double v) { return kMarginL + (v - xmin) / (xmax - xmin) * plot_w; };
    auto sy = [&](double v) {
        return y_offset + kMarginT + plot_h - (v - ymin) / (ymax - ymin) * plot_h;
    };

    std::string out;
    out += "<g>\n";
    out += "<text x=\"" + num(kMarginL) + "\" y=\"" + num(y_offset + 14.0) +
           "\" font-size=\"12\" font-family=\"sans-serif\">" + title + "</text>\n";
    // std-dev band
    std::string band = "<polygon fill=\"#a0c0e8\" fill-opacity=\"0.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
        band += num(sx(s.x[i])) + "," + num(sy(s.y_hi[i])) + " ";
    for (std::size_t i = s.x.size(); i-- > 0;)
        band += num(sx(s.x[i])) + "," + num(sy(s.y_lo[i])) + " ";
    band += "\"/>\n";
    out += band;
    // median polyline
    std::string line = "<polyline fill=\"none\" stroke=\"#204080\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
        line += num(sx(s.x[i])) + "," + num(sy(s.y_median[i])) + " ";
    line += "\"/>\n";
    out += line;
    // axes
    out += "<line x1=\"" + num(kMarginL) + "\" y1=\"" + num(y_offset + kMarginT) +
           "\" x2=\"" + num(kMarginL) + "\" y2=\"" + num(y_offset + kMarginT + plot_h) +
           "\" stroke=\"#333\"/>\n";
    out += "<line x1=\"" + num(kMarginL) + "\" y1=\"" + num(y_offset + kMarginT + plot_h) +
           "\" x2=\"" + num(kMarginL + plot_w) + "\" y2=\"" +
           num(y_offset + kMarginT + plot_h) + "\" stroke=\"#333\"/>\n";
    // axis labels (min/max)
    out += "<text x=\"" + num(kMarginL - 6.0) + "\" y=\"" + num(sy(ymax) + 4.0) +
           "\" font-size=\"9\" text-anchor=\"end\" font-family=\"sans-serif\">" + num(ymax) +
           "</text>\n";
    out += "<text x=\"" + num(kMarginL - 6.0) + "\" y=\"" + num(sy(ymin) + 4.0) +
           "\" font-size=\"9\" text-anchor=\"end\" font-family=\"sans-serif\">" + num(ymin) +
           "</text>\n";
    out += "<text x=\"" + num(sx(xmin)) + "\" y=\"" +
           num(y_offset + kPanelH - 8.0) +
           "\" font-size=\"9\" font-family=\"sans-serif\">" + num(xmin) + "</text>\n";
    out += "<text x=\"" + num(sx(xmax)) + "\" y=\"" + num(y_offset + kPanelH - 8.0) +
           "\" font-size=\"9\" text-anchor=\"end\" font-family=\"sans-serif\">" + num(xmax) +
           "</text>\n";
    out += "</g>\n";
    return out;
}

} // namespace

std::string render_report_svg(const ExperimentReport& rep) {
    // per-fold medians by (metric, budget) feed the band
    std::set<std::string> names;
    for (const auto& r : rep.records)
        if (r.fold >= 0) names.insert(r.name);

    std::string body;
    double y_offset = 0.0;
    for (const auto& name : names) {
        std::map<double, std::vector<double>> by_budget;
        for (const auto& r : rep.records)
            if (r.fold >= 0 && r.name == name) by_budget[r.budget].push_back(r.median);
        if (by_budget.empty()) continue;
        Series s;
        for (const auto& [budget, medians] : by_budget) {
            s.x.push_back(budget);
            const double med = median_of(medians);
            const double sd = stddev_of(medians);
            s.y_median.push_back(med);
            s.y_lo.push_back(med - sd);
            s.y_hi.push_back(med + sd);
        }
        body += render_panel(name + " (median, +-1 sd over folds)", s, y_offset);
        y_offset += kPanelH;
    }
    if (y_offset == 0.0) y_offset = kPanelH;

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kPanelW) +
                      "\" height=\"" + num(y_offset) + "\" viewBox=\"0 0 " + num(kPanelW) +
                      " " + num(y_offset) + "\">\n";
    out += body;
    out += "</svg>\n";
    return out;
}

std::string render_histogram_pair_svg(const std::string& title,
                                      const std::string& label_a,
                                      const std::vector<double>& values_a,
                                      const std::string& label_b,
                                      const std::vector<double>& values_b) {
    // integer-binned side-by-side bars
    double lo = 0.0, hi = 1.0;
    if (!values_a.empty() || !values_b.empty()) {
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        for (double v : values_a) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (double v : values_b) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const int bin_lo = static_cast<int>(std::floor(lo));
    const int bin_hi = static_cast<int>(std::ceil(hi));
    const int bins = bin_hi - bin_lo + 1;
    std::vector<double> count_a(bins, 0.0), count_b(bins, 0.0);
    for (double v : values_a) count_a[static_cast<int>(std::lround(v)) - bin_lo] += 1.0;
    for (double v : values_b) count_b[static_cast<int>(std::lround(v)) - bin_lo] += 1.0;
    double cmax = 1.0;
    for (int i = 0; i < bins; ++i) cmax = std::max({cmax, count_a[i], count_b[i]});

    const double width = 420.0, height = 220.0;
    const double plot_w = width - 70.0, plot_h = height - 70.0;
    const double bar_w = plot_w / (2.0 * bins + 1.0);
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                      "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " +
                      num(height) + "\">\n";
    out += "<text x=\"52\" y=\"16\" font-size=\"12\" font-family=\"sans-serif\">" + title +
           "</text>\n";
    for (int i = 0; i < bins; ++i) {
        const double xa = 52.0 + (2 * i) * bar_w + bar_w * 0.25;
        const double xb = xa + bar_w;
        const double ha = count_a[i] / cmax * plot_h;
        const double hb = count_b[i] / cmax * plot_h;
        out += "<rect x=\"" + num(xa) + "\" y=\"" + num(24.0 + plot_h - ha) + "\" width=\"" +
               num(bar_w * 0.9) + "\" height=\"" + num(ha) +
               "\" fill=\"#4F81BD\"/>\n";
        out += "<rect x=\"" + num(xb) + "\" y=\"" + num(24.0 + plot_h - hb) + "\" width=\"" +
               num(bar_w * 0.9) + "\" height=\"" + num(hb) +
               "\" fill=\"#C0504D\"/>\n";
        out += "<text x=\"" + num(xa + bar_w * 0.5) + "\" y=\"" + num(24.0 + plot_h + 14.0) +
               "\" font-size=\"9\" font-family=\"sans-serif\">" + std::to_string(bin_lo + i) +
               "</text>\n";
    }
    out += "<rect x=\"52\" y=\"" + num(height - 26.0) +
           "\" width=\"10\" height=\"10\" fill=\"#4F81BD\"/>\n";
    out += "<text x=\"66\" y=\"" + num(height - 17.0) +
           "\" font-size=\"10\" font-family=\"sans-serif\">" + label_a + "</text>\n";
    out += "<rect x=\"170\" y=\"" + num(height - 26.0) +
           "\" width=\"10\" height=\"10\" fill=\"#C0504D\"/>\n";
    out += "<text x=\"184\" y=\"" + num(height - 17.0) +
           "\" font-size=\"10\" font-family=\"sans-serif\">" + label_b + "</text>\n";
    out += "</svg>\n";
    return out;
}

} // namespace rlab
