#include "icee/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <system_error>

#include "icee/checkpoint.hpp"

namespace icee::report {

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

double parse_double(const std::string& field) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || end != field.data() + field.size()) throw InvalidInput("bad number '" + field + "' in CSV");
    return v;
}

// Strategies in order of first appearance.
std::vector<std::string> strategy_order(std::span<const eval::CurvePoint> curves) {
    std::vector<std::string> names;
    for (const auto& c : curves)
        if (std::find(names.begin(), names.end(), c.strategy) == names.end()) names.push_back(c.strategy);
    return names;
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw InvalidInput("format_double failed");
    return {buf.data(), end};
}

void write_results_csv(std::ostream& os, std::span<const eval::CurvePoint> curves) {
    os << "strategy,p,mean_acc,std_acc,runs\n";
    for (const auto& c : curves)
        os << c.strategy << ',' << format_double(c.p) << ',' << format_double(c.mean_acc) << ','
           << format_double(c.std_acc) << ',' << c.runs << '\n';
}

std::vector<eval::CurvePoint> read_results_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "strategy,p,mean_acc,std_acc,runs")
        throw InvalidInput("results CSV has an unexpected header");
    std::vector<eval::CurvePoint> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 5) throw InvalidInput("results CSV row has " + std::to_string(fields.size()) + " fields");
        eval::CurvePoint c;
        c.strategy = fields[0];
        c.p = parse_double(fields[1]);
        c.mean_acc = parse_double(fields[2]);
        c.std_acc = parse_double(fields[3]);
        c.runs = static_cast<std::size_t>(parse_double(fields[4]));
        out.push_back(std::move(c));
    }
    return out;
}

std::string render_svg(std::span<const eval::CurvePoint> curves, const std::string& title) {
    if (curves.empty()) throw InvalidInput("render_svg: no curves");
    constexpr double width = 640, height = 420, left = 70, right = 160, top = 40, bottom = 60;
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    double p_lo = curves.front().p, p_hi = curves.front().p;
    for (const auto& c : curves) {
        p_lo = std::min(p_lo, c.p);
        p_hi = std::max(p_hi, c.p);
    }
    if (p_hi == p_lo) {
        p_lo -= 0.05;
        p_hi += 0.05;
    }
    auto x_of = [&](double p) { return left + (p - p_lo) / (p_hi - p_lo) * plot_w; };
    auto y_of = [&](double acc) { return top + (1.0 - std::clamp(acc, 0.0, 1.0)) * plot_h; };
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty()) os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\">" << title << "</text>\n";

    // Axes, ticks and grid.
    os << "<g stroke=\"black\" fill=\"none\">\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
       << top + plot_h << "\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h << "\"/>\n";
    os << "</g>\n";
    for (int k = 0; k <= 5; ++k) {
        const double acc = k / 5.0, y = y_of(acc);
        os << "<line x1=\"" << left << "\" y1=\"" << fmt(y) << "\" x2=\"" << left + plot_w << "\" y2=\"" << fmt(y)
           << "\" stroke=\"#dddddd\"/>\n";
        os << "<text x=\"" << left - 8 << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">" << fmt(acc)
           << "</text>\n";
    }
    std::vector<double> ps;
    for (const auto& c : curves)
        if (std::find(ps.begin(), ps.end(), c.p) == ps.end()) ps.push_back(c.p);
    std::sort(ps.begin(), ps.end());
    for (double p : ps)
        os << "<text x=\"" << fmt(x_of(p)) << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
           << fmt(100.0 * p) << "</text>\n";
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">p (%)</text>\n";
    os << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << top + plot_h / 2 << ")\">accuracy</text>\n";

    const auto names = strategy_order(curves);
    for (std::size_t s = 0; s < names.size(); ++s) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& c : curves)
            if (c.strategy == names[s]) pts.emplace_back(c.p, c.mean_acc);
        std::sort(pts.begin(), pts.end());
        const char* color = kPalette[s % kPalette.size()];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i)
            os << (i ? " " : "") << fmt(x_of(pts[i].first)) << ',' << fmt(y_of(pts[i].second));
        os << "\"/>\n";
        const double ly = top + 10 + 18.0 * static_cast<double>(s);
        os << "<line x1=\"" << left + plot_w + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + plot_w + 35
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + plot_w + 40 << "\" y=\"" << ly + 4 << "\">" << names[s] << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_report(std::span<const eval::CurvePoint> curves, const std::filesystem::path& dir,
                 const std::string& title) {
    if (curves.empty()) throw InvalidInput("emit_report: no curves");
    std::ostringstream csv;
    write_results_csv(csv, curves);
    write_text_file(dir / "results.csv", csv.str());
    write_text_file(dir / "curves.svg", render_svg(curves, title));
}

}  // namespace icee::report
