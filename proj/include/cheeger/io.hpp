#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cheeger/geometry.hpp"
#include "cheeger/perturb.hpp"
#include "cheeger/solver.hpp"

namespace cheeger::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// PGM (P5, 16-bit big-endian) + JSON sidecar
// ---------------------------------------------------------------------------

/// Writes values scaled by `scale` into [0, 65535]; 2D writes one image,
/// 3D writes slices stacked vertically.
void write_pgm16(const std::filesystem::path& path, const GridSpec& spec,
                 const Eigen::ArrayXd& values, Real scale = 1.0);

Eigen::ArrayXd read_pgm16(const std::filesystem::path& path, const GridSpec& spec,
                          Real scale = 1.0);

/// domain -> path.pgm + path.json (grid spec + analytic tag).
void export_domain(const std::filesystem::path& path_without_ext,
                   const GridDomain& domain);

GridDomain import_domain(const std::filesystem::path& path_without_ext);

// ---------------------------------------------------------------------------
// JSON conversions
// ---------------------------------------------------------------------------

json to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const json& j);

json to_json(const Analytic& a);
Analytic analytic_from_json(const json& j);

/// Shape from a config object {"type": "ball", ...}. Throws ConfigError.
Shape shape_from_json(const json& j, int dim);
json to_json(const Shape& s);

SolverOptions solver_options_from_json(const json& j);
json to_json(const SolverOptions& o);

json to_json(const SlopeReport& r);
json to_json(const Residuals& r);

/// Eigenvalue result summary (lambda, residuals, bounds, iterations).
json result_summary(const EigenResult& res, const GridDomain& domain,
                    const SolverOptions& opts);

/// Version string and per-module source hashes embedded in every report.
json version_info();

// ---------------------------------------------------------------------------
// CSV / SVG
// ---------------------------------------------------------------------------

/// RFC-4180 style, '.' decimal separator, fixed column order.
void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepRow>& rows);

/// Minimal SVG 1.1 scatter/line plot of (x, y) with log-log option.
void write_svg_plot(const std::filesystem::path& path,
                    const std::vector<std::pair<Real, Real>>& points,
                    const std::string& x_label, const std::string& y_label,
                    const std::string& title);

std::string format_double(Real v);

} // namespace cheeger::io
