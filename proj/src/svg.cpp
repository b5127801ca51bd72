#include <algorithm>
#include <cmath>
#include <sstream>

#include "msaddle/experiment.hpp"

namespace msaddle {

namespace {

const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string tick_label(int exponent) { return "1e" + std::to_string(exponent); }

}  // namespace

// Self-contained log-log panel: axes with decade ticks, one polyline per
// curve, legend in the top-right corner.  Points with non-positive
// coordinates are dropped (log scale).
std::string render_loglog_svg(const std::string& title, const std::vector<SvgCurve>& curves,
                              const std::string& x_label, const std::string& y_label) {
    const double width = 640, height = 480;
    const double left = 70, right = 20, top = 40, bottom = 50;

    double x_min = std::numeric_limits<double>::infinity(), x_max = 0;
    double y_min = std::numeric_limits<double>::infinity(), y_max = 0;
    for (const auto& curve : curves) {
        for (const auto& [x, y] : curve.points) {
            if (x <= 0 || y <= 0) continue;
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (!(x_min < x_max)) {
        x_min = 1;
        x_max = 10;
    }
    if (!(y_min < y_max)) {
        y_min = y_min < std::numeric_limits<double>::infinity() ? y_min * 0.5 : 0.1;
        y_max = y_min * 100;
    }

    const double lx0 = std::log10(x_min), lx1 = std::log10(x_max);
    const double ly0 = std::log10(y_min), ly1 = std::log10(y_max);
    auto sx = [&](double x) {
        return left + (std::log10(x) - lx0) / (lx1 - lx0) * (width - left - right);
    };
    auto sy = [&](double y) {
        return height - bottom - (std::log10(y) - ly0) / (ly1 - ly0) * (height - top - bottom);
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
        << "font-family=\"sans-serif\">" << title << "</text>\n";

    // frame
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - left - right
        << "\" height=\"" << height - top - bottom
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";

    // decade ticks
    for (int e = static_cast<int>(std::ceil(lx0)); e <= static_cast<int>(std::floor(lx1)); ++e) {
        const double px = sx(std::pow(10.0, e));
        out << "<line x1=\"" << px << "\" y1=\"" << height - bottom << "\" x2=\"" << px
            << "\" y2=\"" << height - bottom + 5 << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << px << "\" y1=\"" << top << "\" x2=\"" << px << "\" y2=\""
            << height - bottom << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
        out << "<text x=\"" << px << "\" y=\"" << height - bottom + 18
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
            << tick_label(e) << "</text>\n";
    }
    for (int e = static_cast<int>(std::ceil(ly0)); e <= static_cast<int>(std::floor(ly1)); ++e) {
        const double py = sy(std::pow(10.0, e));
        out << "<line x1=\"" << left - 5 << "\" y1=\"" << py << "\" x2=\"" << left << "\" y2=\""
            << py << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << left << "\" y1=\"" << py << "\" x2=\"" << width - right
            << "\" y2=\"" << py << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
        out << "<text x=\"" << left - 8 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
            << tick_label(e) << "</text>\n";
    }

    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << height / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 16 " << height / 2 << ")\">" << y_label << "</text>\n";

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : curves[i].points) {
            if (x <= 0 || y <= 0) continue;
            out << sx(x) << "," << sy(y) << " ";
        }
        out << "\"/>\n";
        const double ly = top + 16 + 16 * static_cast<double>(i);
        out << "<line x1=\"" << width - right - 130 << "\" y1=\"" << ly << "\" x2=\""
            << width - right - 110 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << width - right - 105 << "\" y=\"" << ly + 4
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << curves[i].label
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace msaddle
