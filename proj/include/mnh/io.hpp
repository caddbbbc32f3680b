#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "config.hpp"
#include "errors.hpp"

namespace mnh {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------------------------
// Resolved configuration echo

inline json complex_json(cd z) { return json::array({z.real(), z.imag()}); }

/// Full configuration with defaults filled in; parse_config accepts the result unchanged.
inline json config_json(const RunConfig& rc) {
    const auto& m = rc.model;
    json model{{"variant", std::string(to_string(m.variant))},
               {"j", json::array({complex_json(m.j.jx), complex_json(m.j.jy), complex_json(m.j.jz)})}};
    switch (m.variant) {
        case Variant::KModel: model["k_coupling"] = complex_json(m.k_coupling); break;
        case Variant::GammaModel: model["gamma"] = complex_json(m.gamma); break;
        case Variant::MagModel:
            model["d"] = m.d;
            model["b_field"] = json::array({m.b_field.x(), m.b_field.y(), m.b_field.z()});
            model["dmi"] = rc.dmi == DmiMode::c3 ? "c3" : "no_z";
            break;
        case Variant::PureYL: break;
    }
    model["energy_scale"] = m.energy_scale == EnergyScale::half ? "half" : "raw";

    const auto& g = rc.grid;
    json grid{{"k_grid", g.k_grid}, {"k_random", g.k_random}, {"w", g.w}, {"kx_samples", g.kx_samples},
              {"ky_samples", g.ky_samples}, {"boundary_y", g.periodic_y ? "periodic" : "open"}};
    if (!g.k_points.empty()) {
        json pts = json::array();
        for (const auto& k : g.k_points) pts.push_back(json::array({k.x(), k.y()}));
        grid["k_points"] = pts;
    }
    if (!g.kx_values.empty()) grid["kx_values"] = g.kx_values;
    if (g.flavour) grid["flavour"] = *g.flavour;

    const auto& t = rc.tolerance;
    json tol{{"residual", t.residual},           {"gap_rel", t.gap_rel},     {"overlap", t.overlap},
             {"cloud", t.cloud},                 {"edge_fraction", t.edge_fraction},
             {"edge_mass", t.edge_mass},         {"half_mass", t.half_mass},
             {"nhse_presence", t.nhse_presence}, {"flip_deadband", t.flip_deadband}};

    json formats = json::array();
    for (auto f : rc.output.formats) formats.push_back(std::string(to_string(f)));
    json out{{"command", std::string(to_string(rc.command))}};
    if (rc.preset) out["preset"] = *rc.preset;
    out["model"] = model;
    out["grid"] = grid;
    out["tolerance"] = tol;
    out["output"] = {{"dir", rc.output.dir}, {"prefix", rc.resolved_prefix()}, {"formats", formats}};
    out["seed"] = rc.seed;
    out["threads"] = rc.threads;
    return out;
}

// ---------------------------------------------------------------------------------------------
// Tables

using Cell = std::variant<double, long long, std::string>;

/// Column-named rows; every exporter writes the same rows in the same order.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw ArgumentError("table '" + name + "': row width mismatch");
        rows.push_back(std::move(row));
    }
};

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string csv_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

inline json cell_json(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<long long>(&c)) return *i;
    return std::get<std::string>(c);
}

inline json table_json(const Table& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json row = json::array();
        for (const auto& c : r) row.push_back(cell_json(c));
        rows.push_back(std::move(row));
    }
    return {{"name", t.name}, {"columns", t.columns}, {"rows", std::move(rows)}};
}

inline Table table_from_json(const json& j) {
    Table t;
    t.name = j.at("name").get<std::string>();
    t.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
        std::vector<Cell> row;
        for (const auto& c : r) {
            if (c.is_number_float()) row.emplace_back(c.get<double>());
            else if (c.is_number_integer()) row.emplace_back(c.get<long long>());
            else if (c.is_string()) row.emplace_back(c.get<std::string>());
            else throw ArgumentError("table '" + t.name + "': unsupported cell");
        }
        t.add(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------------------------------------
// Scatter plots

struct SvgSeries {
    std::string label;
    std::string colour;
    std::vector<std::array<double, 2>> points;
    double radius = 1.2;
};

struct SvgPlot {
    std::string name;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<SvgSeries> series;  // drawn in order, later on top
};

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

inline std::string render_svg(const SvgPlot& p) {
    const double width = 640, height = 480, left = 70, right = 150, top = 40, bottom = 60;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : p.series)
        for (const auto& q : s.points) {
            x0 = std::min(x0, q[0]);
            x1 = std::max(x1, q[0]);
            y0 = std::min(y0, q[1]);
            y1 = std::max(y1, q[1]);
        }
    if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double pw = width - left - right, ph = height - top - bottom;
    auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };
    char buf[256];
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n", left,
                  top, pw, ph);
    out += buf;
    for (int t = 0; t <= 4; ++t) {
        const double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%.3g</text>\n", sx(xv),
                      top + ph + 16, xv);
        out += buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.3g</text>\n", left - 6,
                      sy(yv) + 4, yv);
        out += buf;
    }
    out += "<text x=\"" + format_double(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\">" + svg_escape(p.title) + "</text>\n";
    out += "<text x=\"" + format_double(left + pw / 2) + "\" y=\"" + format_double(height - 16) +
           "\" text-anchor=\"middle\">" + svg_escape(p.x_label) + "</text>\n";
    out += "<text transform=\"translate(18," + format_double(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
           svg_escape(p.y_label) + "</text>\n";
    for (std::size_t s = 0; s < p.series.size(); ++s) {
        const auto& ser = p.series[s];
        out += "<g fill=\"" + ser.colour + "\">\n";
        for (const auto& q : ser.points) {
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%g\"/>\n", sx(q[0]), sy(q[1]), ser.radius);
            out += buf;
        }
        out += "</g>\n";
        const double ly = top + 14 + 18 * static_cast<double>(s);
        std::snprintf(buf, sizeof buf, "<circle cx=\"%g\" cy=\"%g\" r=\"4\" fill=\"%s\"/>\n", width - right + 14, ly - 4,
                      ser.colour.c_str());
        out += buf;
        out += "<text x=\"" + format_double(width - right + 24) + "\" y=\"" + format_double(ly) + "\">" +
               svg_escape(ser.label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

// ---------------------------------------------------------------------------------------------
// Run output

struct RunOutput {
    json metadata;           // config echo, provenance, versions
    json summary = json::object();
    std::vector<Table> tables;
    std::vector<SvgPlot> plots;
};

inline constexpr const char* software_version = "1.0.0";

inline json base_metadata(const RunConfig& rc) {
    return {{"software", "majorana-nh"}, {"version", software_version}, {"config", config_json(rc)}};
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    out.close();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string table_stem(const std::string& prefix, const Table& t, std::size_t count) {
    return count == 1 ? prefix : prefix + "_" + t.name;
}

}  // namespace detail

/// Writes <prefix>.meta.json plus one file per table and format. Returns the written paths.
inline std::vector<std::filesystem::path> write_output(const RunOutput& ro, const std::string& dir,
                                                       const std::string& prefix, const std::vector<Format>& formats) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
    std::vector<fs::path> written;
    auto emit = [&](const fs::path& p, const std::string& text) {
        detail::write_file(p, text);
        written.push_back(p);
    };

    json meta = ro.metadata;
    meta["summary"] = ro.summary;
    json files = json::array();
    for (auto f : formats) {
        if (f == Format::json) files.push_back(prefix + ".json");
        for (const auto& t : ro.tables) {
            const auto stem = detail::table_stem(prefix, t, ro.tables.size());
            if (f == Format::csv) files.push_back(stem + ".csv");
            if (f == Format::ndjson) files.push_back(stem + ".ndjson");
        }
        if (f == Format::svg)
            for (const auto& p : ro.plots) files.push_back(prefix + "_" + p.name + ".svg");
    }
    meta["files"] = files;
    emit(fs::path(dir) / (prefix + ".meta.json"), meta.dump(2) + "\n");

    for (auto f : formats) {
        switch (f) {
            case Format::csv:
                for (const auto& t : ro.tables) {
                    std::string text;
                    for (std::size_t c = 0; c < t.columns.size(); ++c) text += (c ? "," : "") + t.columns[c];
                    text += "\n";
                    for (const auto& r : t.rows) {
                        for (std::size_t c = 0; c < r.size(); ++c) text += (c ? "," : "") + csv_cell(r[c]);
                        text += "\n";
                    }
                    emit(fs::path(dir) / (detail::table_stem(prefix, t, ro.tables.size()) + ".csv"), text);
                }
                break;
            case Format::ndjson:
                for (const auto& t : ro.tables) {
                    std::string text;
                    for (const auto& r : t.rows) {
                        json obj = json::object();
                        for (std::size_t c = 0; c < r.size(); ++c) obj[t.columns[c]] = cell_json(r[c]);
                        text += obj.dump() + "\n";
                    }
                    emit(fs::path(dir) / (detail::table_stem(prefix, t, ro.tables.size()) + ".ndjson"), text);
                }
                break;
            case Format::json: {
                json doc = meta;
                json tables = json::array();
                for (const auto& t : ro.tables) tables.push_back(table_json(t));
                doc["tables"] = tables;
                emit(fs::path(dir) / (prefix + ".json"), doc.dump() + "\n");
                break;
            }
            case Format::svg:
                for (const auto& p : ro.plots) emit(fs::path(dir) / (prefix + "_" + p.name + ".svg"), render_svg(p));
                break;
        }
    }
    return written;
}

/// Reads the tables back from a <prefix>.json document.
inline std::vector<Table> read_json_tables(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed json in '" + path + "': " + e.what());
    }
    std::vector<Table> out;
    for (const auto& t : doc.at("tables")) out.push_back(table_from_json(t));
    return out;
}

}  // namespace mnh
