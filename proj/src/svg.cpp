#include "oisub/svg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace oisub {

namespace {

constexpr int kW = 640, kH = 420;
constexpr int kLeft = 60, kRight = 140, kTop = 40, kBottom = 50;
constexpr int kPlotW = kW - kLeft - kRight, kPlotH = kH - kTop - kBottom;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

struct Range {
    double lo = 0.0, hi = 1.0;
    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (hi - lo < 1e-12) {
            lo -= 1.0;
            hi += 1.0;
        } else {
            const double m = 0.05 * (hi - lo);
            lo -= m;
            hi += m;
        }
    }
    double frac(double v) const { return (v - lo) / (hi - lo); }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
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

void open_svg(std::ostringstream& os, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
       << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH
       << "\">\n<rect width=\"" << kW << "\" height=\"" << kH
       << "\" fill=\"white\"/>\n<text x=\"" << kW / 2 << "\" y=\"22\" "
       << "text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << escape(title) << "</text>\n";
}

void axes(std::ostringstream& os, const std::string& xlabel,
          const std::string& ylabel, const Range& xr, const Range& yr) {
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW
       << "\" height=\"" << kPlotH
       << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = i / 4.0;
        const double px = kLeft + fx * kPlotW;
        const double py = kTop + kPlotH - fx * kPlotH;
        os << "<text x=\"" << fmt(px) << "\" y=\"" << kTop + kPlotH + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
              "font-size=\"11\">"
           << fmt(xr.lo + fx * (xr.hi - xr.lo)) << "</text>\n";
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(py + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
           << fmt(yr.lo + fx * (yr.hi - yr.lo)) << "</text>\n";
    }
    os << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kH - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << escape(xlabel) << "</text>\n";
    os << "<text x=\"16\" y=\"" << kTop + kPlotH / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
          "transform=\"rotate(-90 16 "
       << kTop + kPlotH / 2 << ")\">" << escape(ylabel) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<std::string>& labels) {
    for (size_t i = 0; i < labels.size(); ++i) {
        const int y = kTop + 14 + static_cast<int>(i) * 18;
        os << "<rect x=\"" << kW - kRight + 12 << "\" y=\"" << y - 9
           << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[i % kPaletteSize]
           << "\"/>\n<text x=\"" << kW - kRight + 30 << "\" y=\"" << y + 2
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(labels[i])
           << "</text>\n";
    }
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("svg: cannot open '" + path + "' for writing");
    f << body;
}

void xy_ranges(const std::vector<Series>& series, Range& xr, Range& yr) {
    if (series.empty()) throw InputError("svg: no series");
    bool seen = false;
    for (const Series& s : series) {
        if (s.x.size() != s.y.size())
            throw InputError("svg: series x/y length mismatch");
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!seen) {
                xr.lo = xr.hi = s.x[i];
                yr.lo = yr.hi = s.y[i];
                seen = true;
            }
            xr.include(s.x[i]);
            yr.include(s.y[i]);
        }
    }
    if (!seen) throw InputError("svg: all series empty");
    xr.pad();
    yr.pad();
}

double px(const Range& r, double v) { return kLeft + r.frac(v) * kPlotW; }
double py(const Range& r, double v) { return kTop + kPlotH - r.frac(v) * kPlotH; }

}  // namespace

void write_line_svg(const std::string& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<Series>& series) {
    Range xr, yr;
    xy_ranges(series, xr, yr);
    std::ostringstream os;
    open_svg(os, title);
    axes(os, xlabel, ylabel, xr, yr);
    for (size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        os << "<polyline fill=\"none\" stroke=\"" << kPalette[si % kPaletteSize]
           << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i)
            os << fmt(px(xr, s.x[i])) << ',' << fmt(py(yr, s.y[i])) << ' ';
        os << "\"/>\n";
    }
    std::vector<std::string> labels;
    for (const Series& s : series) labels.push_back(s.label);
    legend(os, labels);
    os << "</svg>\n";
    write_file(path, os.str());
}

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series) {
    Range xr, yr;
    xy_ranges(series, xr, yr);
    std::ostringstream os;
    open_svg(os, title);
    axes(os, xlabel, ylabel, xr, yr);
    for (size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        for (size_t i = 0; i < s.x.size(); ++i)
            os << "<circle cx=\"" << fmt(px(xr, s.x[i])) << "\" cy=\""
               << fmt(py(yr, s.y[i])) << "\" r=\"2.2\" fill=\""
               << kPalette[si % kPaletteSize] << "\" fill-opacity=\"0.7\"/>\n";
    }
    std::vector<std::string> labels;
    for (const Series& s : series) labels.push_back(s.label);
    legend(os, labels);
    os << "</svg>\n";
    write_file(path, os.str());
}

void write_stacked_bar_svg(const std::string& path, const std::string& title,
                           const std::vector<std::string>& bar_labels,
                           const std::vector<std::string>& segment_labels,
                           const Matrix& proportions) {
    if (proportions.rows != bar_labels.size() ||
        proportions.cols != segment_labels.size())
        throw InputError("svg: stacked bar label/shape mismatch");
    if (proportions.rows == 0) throw InputError("svg: no bars");
    std::ostringstream os;
    open_svg(os, title);
    const double bw = static_cast<double>(kPlotW) / proportions.rows;
    for (size_t b = 0; b < proportions.rows; ++b) {
        double acc = 0.0;
        for (size_t s = 0; s < proportions.cols; ++s) {
            const double h = proportions.at(b, s) * kPlotH;
            const double y = kTop + kPlotH - (acc + proportions.at(b, s)) * kPlotH;
            os << "<rect x=\"" << fmt(kLeft + b * bw + 0.12 * bw) << "\" y=\""
               << fmt(y) << "\" width=\"" << fmt(0.76 * bw) << "\" height=\""
               << fmt(h) << "\" fill=\"" << kPalette[s % kPaletteSize] << "\"/>\n";
            acc += proportions.at(b, s);
        }
        os << "<text x=\"" << fmt(kLeft + (b + 0.5) * bw) << "\" y=\""
           << kTop + kPlotH + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
              "font-size=\"11\">"
           << escape(bar_labels[b]) << "</text>\n";
    }
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW
       << "\" height=\"" << kPlotH
       << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    legend(os, segment_labels);
    os << "</svg>\n";
    write_file(path, os.str());
}

void write_heatmap_svg(const std::string& path, const std::string& title,
                       const Matrix& values) {
    if (values.rows == 0 || values.cols == 0)
        throw InputError("svg: empty heatmap");
    Range r;
    r.lo = r.hi = values.data[0];
    for (double v : values.data) r.include(v);
    if (r.hi - r.lo < 1e-300) r.hi = r.lo + 1.0;
    std::ostringstream os;
    open_svg(os, title);
    const double cw = static_cast<double>(kPlotW) / values.cols;
    const double ch = static_cast<double>(kPlotH) / values.rows;
    for (size_t i = 0; i < values.rows; ++i)
        for (size_t j = 0; j < values.cols; ++j) {
            const int shade =
                static_cast<int>(255.0 * (1.0 - r.frac(values.at(i, j))));
            os << "<rect x=\"" << fmt(kLeft + j * cw) << "\" y=\""
               << fmt(kTop + i * ch) << "\" width=\"" << fmt(cw) << "\" height=\""
               << fmt(ch) << "\" fill=\"rgb(" << shade << ',' << shade
               << ",255)\"/>\n";
        }
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW
       << "\" height=\"" << kPlotH
       << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n</svg>\n";
    write_file(path, os.str());
}

}  // namespace oisub
