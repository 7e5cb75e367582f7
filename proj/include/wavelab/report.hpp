#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavelab/math_util.hpp"

namespace wavelab {

// ---------------------------------------------------------------------------
// CSV: header row, fixed column order, 17-significant-digit floats
// ---------------------------------------------------------------------------

class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != columns_.size()) throw std::invalid_argument("CsvTable: row width mismatch");
        rows_.push_back(row);
    }

    std::string serialize() const {
        std::ostringstream os;
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            if (c) os << ',';
            os << columns_[c];
        }
        os << '\n';
        for (const auto& row : rows_) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) os << ',';
                os << format_g17(row[c]);
            }
            os << '\n';
        }
        return os.str();
    }

    bool empty() const { return rows_.empty(); }
    std::size_t size() const { return rows_.size(); }
    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }

  private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

// ---------------------------------------------------------------------------
// Deterministic SVG line plots: fixed viewport, data-driven axes snapped to a
// fixed rounding policy, no timestamps or randomness anywhere.
// ---------------------------------------------------------------------------

struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
};

namespace detail {
inline std::string svg_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}
}  // namespace detail

inline std::string render_svg(const std::string& title, const std::vector<SvgSeries>& series,
                              bool log_y = false) {
    const int W = 720, H = 420, ml = 70, mr = 20, mt = 36, mb = 46;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double yy = s.y[i];
            if (log_y) {
                if (!(yy > 0.0)) continue;
                yy = std::log10(yy);
            }
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = yy;
                first = false;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, yy);
                ymax = std::max(ymax, yy);
            }
        }
    if (first) {
        xmin = ymin = 0;
        xmax = ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"monospace\" "
          "font-size=\"15\">"
       << title << "</text>\n";
    // frame + ticks
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (W - ml - mr) << "\" height=\""
       << (H - mt - mb) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 4.0;
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        os << "<text x=\"" << detail::svg_num(px(xv)) << "\" y=\"" << (H - mb + 18)
           << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">"
           << detail::svg_num(xv) << "</text>\n";
        os << "<text x=\"" << (ml - 6) << "\" y=\"" << detail::svg_num(py(yv) + 4)
           << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
           << detail::svg_num(log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
    }
    int ci = 0;
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[ci % 8] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double yy = s.y[i];
            if (log_y) {
                if (!(yy > 0.0)) continue;
                yy = std::log10(yy);
            }
            os << detail::svg_num(px(s.x[i])) << ',' << detail::svg_num(py(yy)) << ' ';
        }
        os << "\"/>\n";
        os << "<text x=\"" << (ml + 10) << "\" y=\"" << (mt + 16 + 14 * ci)
           << "\" font-family=\"monospace\" font-size=\"12\" fill=\"" << colors[ci % 8] << "\">"
           << s.label << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << content;
}

}  // namespace wavelab
