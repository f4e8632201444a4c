#include "melai/plot.hpp"

#include "melai/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace melai::plot {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

void header(std::ostream& os, const std::string& title)
{
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n";
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v)
    {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void settle()
    {
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

void axes(std::ostream& os, const Range& xr, const Range& yr, const std::string& xlabel, const std::string& ylabel)
{
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom;
    const double y1 = kTop;
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double fx = x0 + (x1 - x0) * i / 4.0;
        double fy = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << fx << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">"
           << std::setprecision(4) << xr.lo + (xr.hi - xr.lo) * i / 4.0 << "</text>\n";
        os << "<text x=\"" << x0 - 6 << "\" y=\"" << fy + 4 << "\" text-anchor=\"end\">" << std::setprecision(4)
           << yr.lo + (yr.hi - yr.lo) * i / 4.0 << "</text>\n";
    }
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
       << escape(xlabel) << "</text>\n";
    os << "<text transform=\"translate(16," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(ylabel) << "</text>\n";
}

void legend(std::ostream& os, std::size_t i, const std::string& name)
{
    double y = kTop + 10 + 20.0 * static_cast<double>(i);
    double x = kWidth - kRight + 15;
    os << "<rect x=\"" << x << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
       << kColours[i % std::size(kColours)] << "\"/>\n";
    os << "<text x=\"" << x + 18 << "\" y=\"" << y + 1 << "\">" << escape(name) << "</text>\n";
}

} // namespace

Series quartile_series(const std::string& name, const std::vector<double>& x,
                       const std::vector<std::vector<double>>& samples)
{
    Series s;
    s.name = name;
    for (std::size_t i = 0; i < x.size() && i < samples.size(); ++i) {
        if (samples[i].empty())
            continue;
        s.x.push_back(x[i]);
        s.median.push_back(stats::median(samples[i]));
        s.lower.push_back(stats::quantile(samples[i], 0.25));
        s.upper.push_back(stats::quantile(samples[i], 0.75));
    }
    return s;
}

void write_line_chart(std::ostream& os, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series)
{
    std::ostringstream out;
    Range xr;
    Range yr;
    for (const auto& s : series) {
        for (double v : s.x)
            xr.add(v);
        for (const auto* vals : {&s.median, &s.lower, &s.upper})
            for (double v : *vals)
                yr.add(v);
    }
    xr.settle();
    yr.settle();
    auto px = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight); };
    auto py = [&](double v) {
        return kHeight - kBottom - (v - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
    };

    header(out, title);
    axes(out, xr, yr, xlabel, ylabel);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* colour = kColours[i % std::size(kColours)];
        bool band = false;
        for (std::size_t k = 0; k < s.x.size(); ++k)
            band = band || s.lower[k] != s.upper[k];
        if (band) {
            out << "<polygon fill=\"" << colour << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t k = 0; k < s.x.size(); ++k)
                out << px(s.x[k]) << ',' << py(s.upper[k]) << ' ';
            for (std::size_t k = s.x.size(); k-- > 0;)
                out << px(s.x[k]) << ',' << py(s.lower[k]) << ' ';
            out << "\"/>\n";
        }
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < s.x.size(); ++k)
            if (std::isfinite(s.median[k]))
                out << px(s.x[k]) << ',' << py(s.median[k]) << ' ';
        out << "\"/>\n";
        legend(out, i, s.name);
    }
    out << "</svg>\n";
    os << out.str();
}

void write_bar_chart(std::ostream& os, const std::string& title, const std::vector<std::string>& categories,
                     const std::vector<Bars>& bars)
{
    std::ostringstream out;
    Range yr;
    yr.add(0.0);
    for (const auto& b : bars)
        for (double v : b.values)
            yr.add(v);
    yr.settle();
    Range xr;
    xr.add(0.0);
    xr.add(static_cast<double>(categories.size()));
    xr.settle();

    header(out, title);
    const double plot_w = kWidth - kLeft - kRight;
    const double group_w = categories.empty() ? plot_w : plot_w / static_cast<double>(categories.size());
    const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(1, bars.size()));
    auto py = [&](double v) {
        return kHeight - kBottom - (v - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom);
    };
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight
        << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double v = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
            << std::setprecision(4) << v << "</text>\n";
    }
    for (std::size_t c = 0; c < categories.size(); ++c) {
        double gx = kLeft + group_w * static_cast<double>(c);
        for (std::size_t b = 0; b < bars.size(); ++b) {
            double v = c < bars[b].values.size() ? bars[b].values[c] : 0.0;
            double x = gx + group_w * 0.1 + bar_w * static_cast<double>(b);
            out << "<rect x=\"" << x << "\" y=\"" << py(v) << "\" width=\"" << bar_w << "\" height=\""
                << py(yr.lo) - py(v) << "\" fill=\"" << kColours[b % std::size(kColours)] << "\"/>\n";
        }
        out << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << kHeight - kBottom + 16
            << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
    }
    for (std::size_t b = 0; b < bars.size(); ++b)
        legend(out, b, bars[b].name);
    out << "</svg>\n";
    os << out.str();
}

} // namespace melai::plot
