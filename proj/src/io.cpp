#include "cheeger/io.hpp"

#include <cstdio>
#include <fstream>

#include "cheeger/version.hpp"

namespace cheeger::io {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw ConfigError(what);
}

Eigen::Array3d array3_from(const json& j, const std::string& key, int dim,
                           Eigen::Array3d fallback, bool required = false) {
    if (!j.contains(key)) {
        require(!required, "config: missing field '" + key + "'");
        return fallback;
    }
    const json& a = j.at(key);
    require(a.is_array() && static_cast<int>(a.size()) >= dim,
            "config: '" + key + "' must be an array of " + std::to_string(dim) +
                " numbers");
    Eigen::Array3d out{0, 0, 0};
    for (int i = 0; i < static_cast<int>(a.size()) && i < 3; ++i) {
        require(a[i].is_number(), "config: '" + key + "' must contain numbers");
        out[i] = a[i].get<Real>();
    }
    return out;
}

json array3_to(const Eigen::Array3d& v, int dim) {
    json a = json::array();
    for (int i = 0; i < dim; ++i) a.push_back(v[i]);
    return a;
}

} // namespace

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

void write_pgm16(const std::filesystem::path& path, const GridSpec& spec,
                 const Eigen::ArrayXd& values, Real scale) {
    const int nx = spec.cells[0];
    const int rows = spec.cells[1] * spec.cells[2];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LabError("write_pgm16: cannot open " + path.string());
    out << "P5\n" << nx << " " << rows << "\n65535\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(nx) * 2);
    const Real s = scale > 0 ? 65535.0 / scale : 0.0;
    for (int r = 0; r < rows; ++r) {
        for (int i = 0; i < nx; ++i) {
            const Real v = values[static_cast<std::int64_t>(r) * nx + i] * s;
            const auto q = static_cast<unsigned>(std::clamp(std::lround(v), 0l, 65535l));
            row[2 * i] = static_cast<unsigned char>(q >> 8); // big-endian
            row[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
        }
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

Eigen::ArrayXd read_pgm16(const std::filesystem::path& path, const GridSpec& spec,
                          Real scale) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LabError("read_pgm16: cannot open " + path.string());
    std::string magic;
    in >> magic;
    require(magic == "P5", "read_pgm16: not a P5 file");
    auto next_int = [&]() {
        int v;
        while (true) {
            in >> std::ws;
            if (in.peek() == '#') {
                std::string line;
                std::getline(in, line);
                continue;
            }
            in >> v;
            break;
        }
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    require(w == spec.cells[0] && h == spec.cells[1] * spec.cells[2],
            "read_pgm16: size does not match the grid spec");
    require(maxval == 65535, "read_pgm16: expected 16-bit data");
    in.get(); // single whitespace after the header
    Eigen::ArrayXd values(spec.cell_count());
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 2);
    in.read(reinterpret_cast<char*>(buf.data()), buf.size());
    require(static_cast<std::size_t>(in.gcount()) == buf.size(),
            "read_pgm16: truncated file");
    for (std::int64_t i = 0; i < spec.cell_count(); ++i) {
        const unsigned q = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
        values[i] = q / 65535.0 * scale;
    }
    return values;
}

void export_domain(const std::filesystem::path& base, const GridDomain& domain) {
    write_pgm16(base.string() + ".pgm", domain.spec, domain.occupancy, 1.0);
    json sidecar;
    sidecar["format"] = "pgm16";
    sidecar["scale"] = 1.0;
    sidecar["grid"] = to_json(domain.spec);
    sidecar["analytic"] = to_json(domain.analytic);
    std::ofstream out(base.string() + ".json");
    out << sidecar.dump(2) << "\n";
}

GridDomain import_domain(const std::filesystem::path& base) {
    std::ifstream in(base.string() + ".json");
    if (!in) throw LabError("import_domain: missing sidecar " + base.string() + ".json");
    json sidecar = json::parse(in);
    GridDomain d;
    d.spec = grid_spec_from_json(sidecar.at("grid"));
    d.analytic = analytic_from_json(sidecar.at("analytic"));
    const Real scale = sidecar.value("scale", 1.0);
    d.occupancy = read_pgm16(base.string() + ".pgm", d.spec, scale);
    return d;
}

// ---------------------------------------------------------------------------
// JSON conversions
// ---------------------------------------------------------------------------

json to_json(const GridSpec& spec) {
    json j;
    j["dim"] = spec.dim;
    j["cells"] = {spec.cells[0], spec.cells[1], spec.cells[2]};
    j["origin"] = {spec.origin[0], spec.origin[1], spec.origin[2]};
    j["spacing"] = spec.spacing;
    return j;
}

GridSpec grid_spec_from_json(const json& j) {
    GridSpec spec;
    spec.dim = j.at("dim").get<int>();
    const auto& c = j.at("cells");
    require(c.is_array() && c.size() == 3, "grid spec: cells must have 3 entries");
    for (int i = 0; i < 3; ++i) spec.cells[i] = c[i].get<int>();
    const auto& o = j.at("origin");
    require(o.is_array() && o.size() == 3, "grid spec: origin must have 3 entries");
    for (int i = 0; i < 3; ++i) spec.origin[i] = o[i].get<Real>();
    spec.spacing = j.at("spacing").get<Real>();
    spec.validate();
    return spec;
}

json to_json(const Analytic& a) {
    json j;
    j["kind"] = to_string(a.kind);
    if (a.volume) j["volume"] = *a.volume;
    if (a.perimeter) j["perimeter"] = *a.perimeter;
    switch (a.kind) {
        case Analytic::Kind::Ball:
            j["center"] = {a.center[0], a.center[1], a.center[2]};
            j["radius"] = a.radius;
            break;
        case Analytic::Kind::Annulus:
            j["center"] = {a.center[0], a.center[1], a.center[2]};
            j["radius"] = a.radius;
            j["inner"] = a.inner;
            break;
        case Analytic::Kind::Rectangle:
            j["lo"] = {a.lo[0], a.lo[1], a.lo[2]};
            j["hi"] = {a.hi[0], a.hi[1], a.hi[2]};
            break;
        default:
            break;
    }
    return j;
}

Analytic analytic_from_json(const json& j) {
    Analytic a;
    const std::string kind = j.value("kind", "generic");
    if (kind == "empty") a.kind = Analytic::Kind::Empty;
    else if (kind == "ball") a.kind = Analytic::Kind::Ball;
    else if (kind == "annulus") a.kind = Analytic::Kind::Annulus;
    else if (kind == "rectangle") a.kind = Analytic::Kind::Rectangle;
    else if (kind == "ovoid") a.kind = Analytic::Kind::Ovoid;
    else a.kind = Analytic::Kind::Generic;
    if (j.contains("volume")) a.volume = j.at("volume").get<Real>();
    if (j.contains("perimeter")) a.perimeter = j.at("perimeter").get<Real>();
    if (j.contains("center"))
        for (int i = 0; i < 3; ++i) a.center[i] = j.at("center")[i].get<Real>();
    a.radius = j.value("radius", 0.0);
    a.inner = j.value("inner", 0.0);
    if (j.contains("lo"))
        for (int i = 0; i < 3; ++i) a.lo[i] = j.at("lo")[i].get<Real>();
    if (j.contains("hi"))
        for (int i = 0; i < 3; ++i) a.hi[i] = j.at("hi")[i].get<Real>();
    return a;
}

Shape shape_from_json(const json& j, int dim) {
    require(j.is_object() && j.contains("type"), "shape: missing 'type'");
    const std::string type = j.at("type").get<std::string>();
    if (type == "empty") return EmptyShape{};
    if (type == "ball" || type == "disk") {
        Ball b;
        b.center = array3_from(j, "center", dim, {0, 0, 0});
        require(j.contains("radius"), "shape: ball needs 'radius'");
        b.radius = j.at("radius").get<Real>();
        require(b.radius > 0, "shape: ball radius must be positive");
        return b;
    }
    if (type == "annulus") {
        Annulus a;
        a.center = array3_from(j, "center", dim, {0, 0, 0});
        a.outer = j.value("radius", j.value("outer", 0.0));
        a.inner = j.value("inner", 0.0);
        require(a.outer > 0 && a.inner >= 0 && a.inner < a.outer,
                "shape: annulus needs 0 <= inner < outer");
        return a;
    }
    if (type == "rectangle") {
        Rectangle r;
        r.lo = array3_from(j, "lo", dim, {0, 0, 0}, true);
        r.hi = array3_from(j, "hi", dim, {0, 0, 0}, true);
        for (int a = 0; a < dim; ++a)
            require(r.hi[a] > r.lo[a], "shape: rectangle needs hi > lo");
        return r;
    }
    if (type == "square") {
        require(j.contains("side"), "shape: square needs 'side'");
        const Real side = j.at("side").get<Real>();
        require(side > 0, "shape: square side must be positive");
        const Eigen::Array3d c = array3_from(j, "center", dim, {0, 0, 0});
        Rectangle r;
        r.lo = c - side / 2;
        r.hi = c + side / 2;
        if (dim == 2) r.lo[2] = r.hi[2] = 0.0;
        return r;
    }
    if (type == "ovoid") {
        Ovoid o;
        o.center = array3_from(j, "center", dim, {0, 0, 0});
        o.size = j.value("size", 1.0);
        require(o.size > 0, "shape: ovoid size must be positive");
        return o;
    }
    if (type == "ball_union") {
        require(j.contains("balls") && j.at("balls").is_array(),
                "shape: ball_union needs a 'balls' array");
        BallUnion u;
        for (const json& bj : j.at("balls")) {
            Ball b;
            b.center = array3_from(bj, "center", dim, {0, 0, 0}, true);
            b.radius = bj.at("radius").get<Real>();
            require(b.radius > 0, "shape: ball radius must be positive");
            u.balls.push_back(b);
        }
        return u;
    }
    throw ConfigError("shape: unknown type '" + type + "'");
}

json to_json(const Shape& s) {
    json j;
    std::visit(
        [&](const auto& sh) {
            using T = std::decay_t<decltype(sh)>;
            if constexpr (std::is_same_v<T, EmptyShape>) {
                j["type"] = "empty";
            } else if constexpr (std::is_same_v<T, Ball>) {
                j["type"] = "ball";
                j["center"] = array3_to(sh.center, 3);
                j["radius"] = sh.radius;
            } else if constexpr (std::is_same_v<T, Annulus>) {
                j["type"] = "annulus";
                j["center"] = array3_to(sh.center, 3);
                j["radius"] = sh.outer;
                j["inner"] = sh.inner;
            } else if constexpr (std::is_same_v<T, Rectangle>) {
                j["type"] = "rectangle";
                j["lo"] = array3_to(sh.lo, 3);
                j["hi"] = array3_to(sh.hi, 3);
            } else if constexpr (std::is_same_v<T, Ovoid>) {
                j["type"] = "ovoid";
                j["center"] = array3_to(sh.center, 3);
                j["size"] = sh.size;
            } else if constexpr (std::is_same_v<T, BallUnion>) {
                j["type"] = "ball_union";
                json balls = json::array();
                for (const Ball& b : sh.balls) {
                    json bj;
                    bj["center"] = array3_to(b.center, 3);
                    bj["radius"] = b.radius;
                    balls.push_back(bj);
                }
                j["balls"] = balls;
            }
        },
        s);
    return j;
}

SolverOptions solver_options_from_json(const json& j) {
    SolverOptions o;
    if (j.is_null()) return o;
    o.tol_outer = j.value("tol_outer", o.tol_outer);
    o.tol_inner = j.value("tol_inner", o.tol_inner);
    o.max_inner = j.value("max_inner", o.max_inner);
    o.max_outer = j.value("max_outer", o.max_outer);
    o.threshold_count = j.value("thresholds", o.threshold_count);
    o.certificate_tol = j.value("certificate_tol", o.certificate_tol);
    o.bounds_tol = j.value("bounds_tol", o.bounds_tol);
    o.seed = j.value("seed", o.seed);
    o.warm_start = j.value("warm_start", o.warm_start);
    require(o.tol_outer > 0 && o.tol_inner > 0, "solver: tolerances must be positive");
    require(o.max_inner > 0 && o.max_outer > 0, "solver: iteration caps must be positive");
    require(o.threshold_count >= 1, "solver: need at least one threshold");
    return o;
}

json to_json(const SolverOptions& o) {
    json j;
    j["tol_outer"] = o.tol_outer;
    j["tol_inner"] = o.tol_inner;
    j["max_inner"] = o.max_inner;
    j["max_outer"] = o.max_outer;
    j["thresholds"] = o.threshold_count;
    j["certificate_tol"] = o.certificate_tol;
    j["bounds_tol"] = o.bounds_tol;
    j["seed"] = o.seed;
    j["warm_start"] = o.warm_start;
    return j;
}

json to_json(const Residuals& r) {
    json j;
    j["duality_gap"] = r.duality_gap;
    j["div_residual"] = r.div_residual;
    j["alignment"] = r.alignment;
    j["ratio_mismatch"] = r.ratio_mismatch;
    return j;
}

json to_json(const SlopeReport& r) {
    json j;
    j["driver"] = r.driver;
    j["theorem_tag"] = r.theorem_tag;
    j["noise_floor"] = r.noise_floor;
    j["insufficient_signal"] = r.insufficient_signal;
    if (!r.notes.empty()) j["notes"] = r.notes;
    j["predicted_coefficient"] = r.predicted_coefficient;
    if (!r.insufficient_signal) {
        j["coefficient"] = r.fit.coefficient;
        j["coefficient_se"] = r.fit.coefficient_se;
        j["exponent"] = r.fit.exponent;
        j["exponent_se"] = r.fit.exponent_se;
        j["samples_used"] = r.fit.n_used;
        j["rms_residual_rel"] = r.fit.rms_residual_rel;
        j["exponent_within_pred"] = r.fit.exponent_within_pred;
    }
    json samples = json::array();
    for (const auto& [x, y] : r.samples) samples.push_back({x, y});
    j["samples"] = samples;
    return j;
}

json result_summary(const EigenResult& res, const GridDomain& domain,
                    const SolverOptions& opts) {
    json j;
    j["lambda"] = res.lambda;
    j["lower_bound"] = res.lower_bound;
    j["upper_bound"] = res.upper_bound;
    j["residuals"] = to_json(res.residuals);
    j["eigenset"] = {{"volume", res.eigenset_volume}, {"ratio", res.eigenset_ratio}};
    j["iterations"] = {{"outer", res.outer_iterations}, {"inner", res.inner_iterations}};
    j["lambda_history"] = res.lambda_history;
    std::string why;
    j["invariants_ok"] = validate_result(res, domain, opts, &why);
    if (!why.empty()) j["invariant_failures"] = why;
    const Measure m = measure(domain);
    j["domain"] = {{"volume", m.volume},
                   {"perimeter", m.perimeter},
                   {"analytic", to_json(domain.analytic)}};
    j["version"] = version_info();
    return j;
}

json version_info() {
    json j;
    j["cheeger_lab"] = version();
    json mods;
    for (const auto& [name, hash] : module_hashes()) mods[name] = hash;
    j["modules"] = mods;
    return j;
}

// ---------------------------------------------------------------------------
// CSV / SVG
// ---------------------------------------------------------------------------

std::string format_double(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw LabError("write_sweep_csv: cannot open " + path.string());
    out << "delta,driver,lambda,lambda_minus_base,eigenset_l1_distance,tv_mass\r\n";
    for (const SweepRow& r : rows) {
        out << format_double(r.delta) << ',' << format_double(r.driver) << ','
            << format_double(r.lambda) << ',' << format_double(r.lambda_minus_base)
            << ',' << format_double(r.eigenset_l1_distance) << ','
            << format_double(r.tv_mass) << "\r\n";
    }
}

void write_svg_plot(const std::filesystem::path& path,
                    const std::vector<std::pair<Real, Real>>& points,
                    const std::string& x_label, const std::string& y_label,
                    const std::string& title) {
    const int W = 640, H = 480, ML = 70, MR = 20, MT = 40, MB = 50;
    Real x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!points.empty()) {
        x0 = x1 = points[0].first;
        y0 = y1 = points[0].second;
        for (const auto& [x, y] : points) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (x1 - x0 < 1e-300) x1 = x0 + 1;
    if (y1 - y0 < 1e-300) y1 = y0 + 1;
    const Real padx = 0.05 * (x1 - x0), pady = 0.05 * (y1 - y0);
    x0 -= padx; x1 += padx; y0 -= pady; y1 += pady;
    auto sx = [&](Real x) { return ML + (x - x0) / (x1 - x0) * (W - ML - MR); };
    auto sy = [&](Real y) { return H - MB - (y - y0) / (y1 - y0) * (H - MT - MB); };

    std::ofstream out(path);
    if (!out) throw LabError("write_svg_plot: cannot open " + path.string());
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W
        << "\" height=\"" << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
    // axes
    out << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR
        << "\" y2=\"" << H - MB << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\""
        << H - MB << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const Real xv = x0 + (x1 - x0) * t / 4.0;
        const Real yv = y0 + (y1 - y0) * t / 4.0;
        char bx[32], by[32];
        std::snprintf(bx, sizeof bx, "%.3g", xv);
        std::snprintf(by, sizeof by, "%.3g", yv);
        out << "<text x=\"" << sx(xv) << "\" y=\"" << H - MB + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << bx << "</text>\n";
        out << "<text x=\"" << ML - 8 << "\" y=\"" << sy(yv) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << by << "</text>\n";
    }
    out << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << (MT + H - MB) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 16 " << (MT + H - MB) / 2 << ")\">" << y_label
        << "</text>\n";
    if (points.size() > 1) {
        out << "<polyline fill=\"none\" stroke=\"#2060c0\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : points) out << sx(x) << ',' << sy(y) << ' ';
        out << "\"/>\n";
    }
    for (const auto& [x, y] : points)
        out << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y)
            << "\" r=\"3.5\" fill=\"#c03020\"/>\n";
    out << "</svg>\n";
}

} // namespace cheeger::io
