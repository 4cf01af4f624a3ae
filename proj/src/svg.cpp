#include "stabilitylab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace stabilitylab {

namespace {

const char* kPalette[] = {"#1f6fb4", "#d1495b", "#2e8b57", "#8c5fa8",
                          "#c97b1e", "#4d4d4d", "#0fa3a3", "#a0522d"};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Tick positions: decades for log axes, a simple nice-step ladder otherwise.
std::vector<double> make_ticks(double lo, double hi, bool log_axis) {
    std::vector<double> ticks;
    if (log_axis) {
        int e0 = static_cast<int>(std::floor(std::log10(lo)));
        int e1 = static_cast<int>(std::ceil(std::log10(hi)));
        for (int e = e0; e <= e1; ++e) {
            double v = std::pow(10.0, e);
            if (v >= lo / 1.0001 && v <= hi * 1.0001) ticks.push_back(v);
        }
        if (ticks.size() < 2) ticks = {lo, hi};
        return ticks;
    }
    double span = hi - lo;
    if (span <= 0.0) return {lo};
    double raw = span / 5.0;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
        if (raw <= mult * mag) {
            step = mult * mag;
            break;
        }
    }
    double first = std::ceil(lo / step) * step;
    for (double v = first; v <= hi + 0.5 * step; v += step) ticks.push_back(v);
    return ticks;
}

} // namespace

void emit_svg_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec,
                   const std::filesystem::path& path) {
    const double ml = 72, mr = 24, mt = 40, mb = 52;
    const double pw = spec.width - ml - mr;
    const double ph = spec.height - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            double x = s.x[i], y = s.y[i];
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (spec.logx && x <= 0.0) continue;
            if (spec.logy && y <= 0.0) continue;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (!(xmin <= xmax)) { xmin = spec.logx ? 0.1 : 0.0; xmax = 1.0; }
    if (!(ymin <= ymax)) { ymin = spec.logy ? 0.1 : 0.0; ymax = 1.0; }
    if (xmin == xmax) { xmin -= spec.logx ? 0.0 : 0.5; xmax += spec.logx ? xmax * 0.1 : 0.5; }
    if (ymin == ymax) { ymin -= spec.logy ? 0.0 : 0.5; ymax += spec.logy ? ymax * 0.1 : 0.5; }
    if (spec.logx && xmin == xmax) xmin = xmax / 10.0;
    if (spec.logy && ymin == ymax) ymin = ymax / 10.0;

    auto sx = [&](double x) {
        double t = spec.logx ? (std::log10(x) - std::log10(xmin)) / (std::log10(xmax) - std::log10(xmin))
                             : (x - xmin) / (xmax - xmin);
        return ml + t * pw;
    };
    auto sy = [&](double y) {
        double t = spec.logy ? (std::log10(y) - std::log10(ymin)) / (std::log10(ymax) - std::log10(ymin))
                             : (y - ymin) / (ymax - ymin);
        return mt + (1.0 - t) * ph;
    };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_svg_plot: cannot open " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
        << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << spec.title << "</text>\n";

    for (double tx : make_ticks(xmin, xmax, spec.logx)) {
        double px = sx(tx);
        out << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(px)
            << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(mt + ph + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(tx)
            << "</text>\n";
    }
    for (double ty : make_ticks(ymin, ymax, spec.logy)) {
        double py = sy(ty);
        out << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(ml + pw)
            << "\" y2=\"" << fmt(py) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(py + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(ty)
            << "</text>\n";
    }
    out << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw)
        << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    out << "<text x=\"" << spec.width / 2 << "\" y=\"" << spec.height - 10
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << spec.xlabel
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " << mt + ph / 2
        << ")\">" << spec.ylabel << "</text>\n";

    int color_idx = 0;
    double legend_y = mt + 14;
    for (const auto& s : series) {
        const char* color = kPalette[color_idx % 8];
        ++color_idx;
        if (s.scatter) {
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                double x = s.x[i], y = s.y[i];
                if (!std::isfinite(x) || !std::isfinite(y)) continue;
                if ((spec.logx && x <= 0.0) || (spec.logy && y <= 0.0)) continue;
                out << "<circle cx=\"" << fmt(sx(x)) << "\" cy=\"" << fmt(sy(y))
                    << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            }
        } else {
            out << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" d=\"";
            bool pen_down = false;
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                double x = s.x[i], y = s.y[i];
                bool ok = std::isfinite(x) && std::isfinite(y) && !(spec.logx && x <= 0.0) &&
                          !(spec.logy && y <= 0.0);
                if (!ok) {
                    pen_down = false;
                    continue;
                }
                out << (pen_down ? "L" : "M") << fmt(sx(x)) << " " << fmt(sy(y));
                pen_down = true;
            }
            out << "\"/>\n";
        }
        if (!s.label.empty()) {
            out << "<rect x=\"" << fmt(ml + pw - 150) << "\" y=\"" << fmt(legend_y - 9)
                << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n";
            out << "<text x=\"" << fmt(ml + pw - 133) << "\" y=\"" << fmt(legend_y - 3)
                << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
            legend_y += 16;
        }
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("emit_svg_plot: write failed for " + path.string());
}

} // namespace stabilitylab
