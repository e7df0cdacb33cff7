#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "icee/eval.hpp"

namespace icee::report {

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// strategy,p,mean_acc,std_acc,runs
void write_results_csv(std::ostream& os, std::span<const eval::CurvePoint> curves);
std::vector<eval::CurvePoint> read_results_csv(std::istream& is);

// One polyline per strategy, x = p in percent, y = mean accuracy.
std::string render_svg(std::span<const eval::CurvePoint> curves, const std::string& title = {});

// Writes <dir>/results.csv and <dir>/curves.svg.
void emit_report(std::span<const eval::CurvePoint> curves, const std::filesystem::path& dir,
                 const std::string& title = {});

}  // namespace icee::report
