#pragma once

#include <nodeflow/core.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace nodeflow {

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

/// In-memory CSV table with a fixed header. Cells are text, integers or
/// doubles; doubles use format_double. Output ends every row with '\n'.
class CsvTable {
public:
    using Cell = std::variant<std::string, long, double, bool>;

    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<Cell> row)
    {
        if (row.size() != header_.size()) {
            throw InvalidArgument("CsvTable: row has " + std::to_string(row.size()) + " cells, header has " +
                                  std::to_string(header_.size()));
        }
        rows_.push_back(std::move(row));
    }

    std::size_t row_count() const { return rows_.size(); }
    const std::vector<std::string>& header() const { return header_; }

    std::string str() const
    {
        std::string out;
        append_line(out, header_);
        for (const auto& row : rows_) {
            std::vector<std::string> cells;
            cells.reserve(row.size());
            for (const auto& c : row) {
                cells.push_back(render(c));
            }
            append_line(out, cells);
        }
        return out;
    }

private:
    static std::string render(const Cell& c)
    {
        if (const auto* s = std::get_if<std::string>(&c)) {
            return *s;
        }
        if (const auto* l = std::get_if<long>(&c)) {
            return std::to_string(*l);
        }
        if (const auto* b = std::get_if<bool>(&c)) {
            return *b ? "true" : "false";
        }
        return format_double(std::get<double>(c));
    }

    static std::string quote(const std::string& s)
    {
        if (s.find_first_of(",\"\n\r") == std::string::npos) {
            return s;
        }
        std::string q = "\"";
        for (const char ch : s) {
            if (ch == '"') {
                q += '"';
            }
            q += ch;
        }
        return q + "\"";
    }

    static void append_line(std::string& out, const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) {
                out += ',';
            }
            out += quote(cells[i]);
        }
        out += '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<Cell>> rows_;
};

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
};

namespace detail {

inline std::string xml_escape(const std::string& s)
{
    std::string out;
    for (const char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

inline std::string fixed(double v, int digits = 2)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    return {buf, res.ptr};
}

inline std::string tick_label(double v, bool log_axis)
{
    char buf[64];
    const double shown = log_axis ? std::pow(10.0, v) : v;
    const auto res = std::to_chars(buf, buf + sizeof buf, shown, std::chars_format::general, 3);
    return {buf, res.ptr};
}

} // namespace detail

/// Line chart as a standalone SVG document: axes, five ticks per axis, one
/// polyline per series and a legend. Log axes drop non-positive values.
inline std::string render_svg(const ChartSpec& chart)
{
    constexpr double width = 640.0, height = 420.0;
    constexpr double left = 70.0, right = 170.0, top = 40.0, bottom = 60.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    const auto tx = [&](double v) { return chart.log_x ? std::log10(v) : v; };
    const auto ty = [&](double v) { return chart.log_y ? std::log10(v) : v; };
    const auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!chart.log_x || x > 0) && (!chart.log_y || y > 0);
    };

    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    for (const auto& s : chart.series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!usable(s.x[i], s.y[i])) {
                continue;
            }
            x_lo = std::min(x_lo, tx(s.x[i]));
            x_hi = std::max(x_hi, tx(s.x[i]));
            y_lo = std::min(y_lo, ty(s.y[i]));
            y_hi = std::max(y_hi, ty(s.y[i]));
        }
    }
    if (!(x_lo <= x_hi)) {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if (x_lo == x_hi) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if (y_lo == y_hi) {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    const auto px = [&](double v) { return left + (v - x_lo) / (x_hi - x_lo) * plot_w; };
    const auto py = [&](double v) { return top + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h; };
    using detail::fixed;

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width, 0) + "\" height=\"" +
                      fixed(height, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fixed(width / 2.0) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
           detail::xml_escape(chart.title) + "</text>\n";
    svg += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(plot_w) + "\" height=\"" +
           fixed(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
        const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
        svg += "<line x1=\"" + fixed(px(xv)) + "\" y1=\"" + fixed(top + plot_h) + "\" x2=\"" + fixed(px(xv)) +
               "\" y2=\"" + fixed(top + plot_h + 5) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + fixed(px(xv)) + "\" y=\"" + fixed(top + plot_h + 18) + "\" text-anchor=\"middle\">" +
               detail::tick_label(xv, chart.log_x) + "</text>\n";
        svg += "<line x1=\"" + fixed(left - 5) + "\" y1=\"" + fixed(py(yv)) + "\" x2=\"" + fixed(left) + "\" y2=\"" +
               fixed(py(yv)) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + fixed(left - 8) + "\" y=\"" + fixed(py(yv) + 4) + "\" text-anchor=\"end\">" +
               detail::tick_label(yv, chart.log_y) + "</text>\n";
    }
    svg += "<text x=\"" + fixed(left + plot_w / 2.0) + "\" y=\"" + fixed(height - 15) + "\" text-anchor=\"middle\">" +
           detail::xml_escape(chart.x_label) + (chart.log_x ? " (log)" : "") + "</text>\n";
    svg += "<text transform=\"translate(18," + fixed(top + plot_h / 2.0) +
           ") rotate(-90)\" text-anchor=\"middle\">" + detail::xml_escape(chart.y_label) +
           (chart.log_y ? " (log)" : "") + "</text>\n";

    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const char* color = colors[k % std::size(colors)];
        std::string points;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!usable(s.x[i], s.y[i])) {
                continue;
            }
            if (!points.empty()) {
                points += ' ';
            }
            points += fixed(px(tx(s.x[i]))) + "," + fixed(py(ty(s.y[i])));
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + points +
               "\"/>\n";
        const double ly = top + 10.0 + 18.0 * static_cast<double>(k);
        svg += "<line x1=\"" + fixed(width - right + 15) + "\" y1=\"" + fixed(ly) + "\" x2=\"" +
               fixed(width - right + 40) + "\" y2=\"" + fixed(ly) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + fixed(width - right + 46) + "\" y=\"" + fixed(ly + 4) + "\">" +
               detail::xml_escape(s.name) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace nodeflow
