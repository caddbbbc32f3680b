#pragma once

#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "ep_analysis.hpp"
#include "io.hpp"
#include "matching.hpp"
#include "presets.hpp"
#include "ribbon.hpp"

namespace mnh {

namespace detail {

inline const char* class_colour(LocClass c) {
    switch (c) {
        case LocClass::edge_bottom: return "#d62728";
        case LocClass::edge_top: return "#9467bd";
        case LocClass::bulk_localized_bottom: return "#ff7f0e";
        case LocClass::bulk_localized_top: return "#1f77b4";
        case LocClass::extended: return "#2ca02c";
    }
    return "black";
}

inline LocalizationThresholds thresholds(const ToleranceConfig& t) {
    LocalizationThresholds th;
    th.edge_fraction = t.edge_fraction;
    th.mass = t.edge_mass;
    th.cloud_tol = t.cloud;
    th.half_mass = t.half_mass;
    return th;
}

inline std::vector<double> kx_grid_of(const GridConfig& g) {
    return g.kx_values.empty() ? symmetric_kx_grid(g.kx_samples) : g.kx_values;
}

inline json nhse_json(const NhseSummary& s) {
    return {{"nhse", s.nhse},
            {"bulk_localized_fraction", s.bulk_localized_fraction},
            {"max_kx_fraction", s.max_kx_fraction},
            {"flips", s.flips},
            {"edge_states", s.edge_states},
            {"max_edge_per_kx", s.max_edge_per_kx}};
}

inline Table fractions_table(const NhseSummary& s) {
    Table t{"fractions", {"k_x", "bulk_states", "bottom", "top", "extended", "imbalance"}, {}};
    for (const auto& f : s.per_kx)
        t.add({f.kx, static_cast<long long>(f.bulk_states), f.bottom, f.top, f.extended, f.imbalance});
    return t;
}

inline Table ribbon_table(const SweepResult& sw, double scale) {
    Table t{"spectrum", {"k_x", "state_index", "re_E", "im_E", "abs_E", "mean_row", "ipr", "class"}, {}};
    for (std::size_t q = 0; q < sw.kx_grid.size(); ++q)
        for (const auto& r : sw.records[q]) {
            const cd e = scale * r.eigenvalue;
            t.add({sw.kx_grid[q], static_cast<long long>(r.state_index), e.real(), e.imag(), std::abs(e), r.mean_row,
                   r.ipr, std::string(to_string(r.cls))});
        }
    return t;
}

inline Table pbc_table(const SweepResult& sw, double scale) {
    Table t{"pbc", {"k_x", "sample_index", "re_E", "im_E", "abs_E"}, {}};
    if (!sw.pbc_reference) return t;
    for (const auto& c : *sw.pbc_reference)
        for (std::size_t q = 0; q < c.samples.size(); ++q) {
            const cd e = scale * c.samples[q];
            t.add({c.kx, static_cast<long long>(q), e.real(), e.imag(), std::abs(e)});
        }
    return t;
}

inline SvgPlot ribbon_plot(const SweepResult& sw, double scale, const std::string& title) {
    SvgPlot p{"abs_e", title, "k_x", "|E|", {}};
    if (sw.pbc_reference) {
        SvgSeries pbc{"PBC", "#c8c8c8", {}, 0.8};
        for (const auto& c : *sw.pbc_reference)
            for (const auto& e : c.samples) pbc.points.push_back({c.kx, scale * std::abs(e)});
        p.series.push_back(std::move(pbc));
    }
    for (auto cls : {LocClass::extended, LocClass::bulk_localized_bottom, LocClass::bulk_localized_top,
                     LocClass::edge_bottom, LocClass::edge_top}) {
        SvgSeries s{std::string(to_string(cls)), class_colour(cls), {}, 1.2};
        for (std::size_t q = 0; q < sw.kx_grid.size(); ++q)
            for (const auto& r : sw.records[q])
                if (r.cls == cls) s.points.push_back({sw.kx_grid[q], scale * std::abs(r.eigenvalue)});
        if (!s.points.empty()) p.series.push_back(std::move(s));
    }
    return p;
}

inline SweepResult run_sweep(const RunConfig& rc, const ModelConfig& model, int w, const std::vector<double>& kx) {
    SweepOptions opt;
    opt.boundary_y = rc.grid.periodic_y ? BoundaryY::periodic : BoundaryY::open;
    opt.with_cloud = !rc.grid.periodic_y;
    opt.ky_samples = rc.grid.ky_samples;
    opt.thresholds = thresholds(rc.tolerance);
    opt.tol = rc.residual_tol();
    opt.threads = rc.threads;
    return sweep(model, w, kx, opt);
}

inline NhseOptions nhse_options(const ToleranceConfig& t) { return {t.nhse_presence, t.flip_deadband}; }

inline double max_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

// ---------------------------------------------------------------------------------------------

inline RunOutput bloch_spectrum_run(const RunConfig& rc) {
    const auto& m = rc.model;
    const double scale = reported_energy_factor(m.energy_scale);
    std::vector<Vec2> ks = rc.grid.k_points;
    if (ks.empty()) {
        const int n = rc.grid.k_grid;
        const double h = 2.0 * pi / n;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) ks.push_back(k_from_bond_phase(-pi + h * (a + 0.5), -pi + h * (b + 0.5)));
    }
    std::mt19937_64 gen(rc.seed);
    std::uniform_real_distribution<double> u(-pi, pi);
    for (int q = 0; q < rc.grid.k_random; ++q) {
        const double t1 = u(gen);
        ks.push_back(k_from_bond_phase(t1, u(gen)));
    }

    std::vector<Spectrum> spectra(ks.size());
    parallel_for(ks.size(), rc.threads, [&](std::size_t q) {
        spectra[q] = eig(MatX(bloch_hamiltonian(m, ks[q]).entries), false, rc.residual_tol());
    });
    Table t{"spectrum", {"k_x", "k_y", "state_index", "re_E", "im_E", "abs_E"}, {}};
    double max_res = 0.0, max_im = 0.0, cf_dev = 0.0;
    for (std::size_t q = 0; q < ks.size(); ++q) {
        const auto& s = spectra[q];
        max_res = std::max(max_res, s.max_residual);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const cd e = scale * s.eigenvalues[i];
            max_im = std::max(max_im, std::abs(s.eigenvalues[i].imag()));
            t.add({ks[q].x(), ks[q].y(), static_cast<long long>(i), e.real(), e.imag(), std::abs(e)});
        }
        if (const auto cf = closed_form_spectrum(m, ks[q]))
            cf_dev = std::max(cf_dev, multiset_distance(s.eigenvalues, std::vector<cd>(cf->begin(), cf->end())));
    }
    RunOutput ro;
    ro.metadata = base_metadata(rc);
    ro.summary = {{"k_points", ks.size()}, {"max_residual", max_res}, {"max_abs_imag", max_im}};
    if (closed_form_spectrum(m, Vec2::Zero())) ro.summary["closed_form_max_deviation"] = cf_dev;
    ro.tables.push_back(std::move(t));
    return ro;
}

inline RunOutput ep_find_run(const RunConfig& rc) {
    const auto& m = rc.model;
    EPTolerances tol{rc.tolerance.gap_rel, rc.tolerance.overlap};
    Table t{"eps", {"method", "flavour", "k_x", "k_y", "theta1", "theta2", "gap", "overlap", "residual", "confirmed"}, {}};
    auto add = [&](const EPRecord& r) {
        t.add({std::string(r.method == EPMethod::closed_form ? "closed_form" : "scan"),
               static_cast<long long>(r.flavour.value_or(0)), r.k.x(), r.k.y(), r.phase.theta1, r.phase.theta2, r.gap,
               r.overlap, r.residual, static_cast<long long>(r.confirmed)});
    };
    RunOutput ro;
    ro.metadata = base_metadata(rc);
    json reasons = json::array();
    int n_closed = 0;
    if (m.block_diagonal()) {
        const auto js = flavour_couplings(m);
        for (int eta = 1; eta <= 3; ++eta) {
            const auto cf = ep_closed_form(js[eta - 1], eta, tol);
            reasons.push_back(cf.reason);
            for (const auto& r : cf.records) {
                add(r);
                ++n_closed;
            }
        }
    }
    ScanOptions opt;
    opt.grid_n = rc.grid.k_grid;
    opt.tol = tol;
    opt.threads = rc.threads;
    const auto scan = ep_scan(m, opt);
    for (const auto& r : scan) add(r);
    ro.summary = {{"closed_form", n_closed}, {"scan", scan.size()}};
    if (m.block_diagonal()) ro.summary["closed_form_reasons"] = reasons;
    ro.tables.push_back(std::move(t));
    return ro;
}

inline RunOutput arc_trace_run(const RunConfig& rc) {
    const auto arcs = fermi_arc_trace(rc.model, rc.grid.flavour, rc.grid.k_grid, rc.threads);
    Table t{"arcs", {"arc", "flavour", "point_index", "k_x", "k_y"}, {}};
    SvgPlot p{"arcs", "Fermi arcs", "k_x", "k_y", {}};
    const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"};
    SvgSeries eps{"EP", "black", {}, 3.0};
    json ends = json::array();
    for (std::size_t a = 0; a < arcs.size(); ++a) {
        const auto& arc = arcs[a];
        const int fl = arc.flavour.value_or(0);
        SvgSeries s{"flavour " + std::to_string(fl), colours[fl % 4], {}, 1.0};
        for (std::size_t q = 0; q < arc.points.size(); ++q) {
            t.add({static_cast<long long>(a), static_cast<long long>(fl), static_cast<long long>(q), arc.points[q].x(),
                   arc.points[q].y()});
            s.points.push_back({arc.points[q].x(), arc.points[q].y()});
        }
        json e = json::array();
        for (const auto& ep : arc.endpoint_eps) {
            if (ep) {
                e.push_back(json::array({ep->k.x(), ep->k.y()}));
                eps.points.push_back({ep->k.x(), ep->k.y()});
            } else {
                e.push_back(nullptr);
            }
        }
        ends.push_back(e);
        p.series.push_back(std::move(s));
    }
    p.series.push_back(std::move(eps));
    RunOutput ro;
    ro.metadata = base_metadata(rc);
    ro.summary = {{"arcs", arcs.size()}, {"endpoints", ends}};
    ro.tables.push_back(std::move(t));
    ro.plots.push_back(std::move(p));
    return ro;
}

inline RunOutput skin_check_run(const RunConfig& rc) {
    const auto& m = rc.model;
    RunOutput ro;
    ro.metadata = base_metadata(rc);
    if (m.block_diagonal()) {
        Table t{"criterion", {"flavour", "re_jx", "im_jx", "re_jy", "im_jy", "re_jz", "im_jz", "criterion", "asymmetry"}, {}};
        bool any = false;
        const auto js = flavour_couplings(m);
        for (int eta = 1; eta <= 3; ++eta) {
            const auto& j = js[eta - 1];
            const bool c = skin_criterion_any(j);
            any = any || c;
            t.add({static_cast<long long>(eta), j.jx.real(), j.jx.imag(), j.jy.real(), j.jy.imag(), j.jz.real(),
                   j.jz.imag(), static_cast<long long>(c), skin_asymmetry(j)});
        }
        ro.summary = {{"method", "criterion"}, {"nhse", any}};
        ro.tables.push_back(std::move(t));
        return ro;
    }
    // Mixed-flavour variants have no closed criterion: decide from a ribbon sweep.
    const auto sw = run_sweep(rc, m, rc.grid.w, kx_grid_of(rc.grid));
    const auto s = nhse_summary(sw, nhse_options(rc.tolerance));
    ro.summary = nhse_json(s);
    ro.summary["method"] = "ribbon";
    ro.summary["max_residual"] = max_of(sw.max_residual);
    ro.tables.push_back(fractions_table(s));
    return ro;
}

inline RunOutput ribbon_sweep_run(const RunConfig& rc) {
    const auto& m = rc.model;
    const double scale = reported_energy_factor(m.energy_scale);
    const auto sw = run_sweep(rc, m, rc.grid.w, kx_grid_of(rc.grid));
    RunOutput ro;
    ro.metadata = base_metadata(rc);
    double max_im = 0.0;
    for (const auto& ks : sw.records)
        for (const auto& r : ks) max_im = std::max(max_im, std::abs(r.eigenvalue.imag()));
    ro.summary = {{"max_residual", max_of(sw.max_residual)}, {"max_abs_imag", max_im}};
    ro.tables.push_back(ribbon_table(sw, scale));
    if (!rc.grid.periodic_y) {
        const auto s = nhse_summary(sw, nhse_options(rc.tolerance));
        ro.summary["nhse"] = nhse_json(s);
        ro.tables.push_back(pbc_table(sw, scale));
        ro.tables.push_back(fractions_table(s));
    }
    ro.plots.push_back(ribbon_plot(sw, scale, std::string(to_string(m.variant)) + " ribbon, w = " + std::to_string(rc.grid.w)));
    return ro;
}

/// Per-state records plus site weights at each k_x (right eigenvectors).
inline void add_profiles(RunOutput& ro, const RunConfig& rc, const ModelConfig& m, int w,
                         const std::vector<double>& kx_values, double scale) {
    Table states{"states", {"k_x", "state_index", "re_E", "im_E", "abs_E", "mean_row", "ipr", "class"}, {}};
    Table weights{"weights", {"k_x", "state_index", "site", "weight", "log01_weight"}, {}};
    for (double kx : kx_values) {
        const RibbonSpec spec{m, w, rc.grid.periodic_y ? BoundaryY::periodic : BoundaryY::open, kx};
        const auto s = ribbon_spectrum(spec, false, rc.residual_tol());
        std::optional<PbcCloud> cloud;
        if (!rc.grid.periodic_y) cloud = pbc_cloud(m, kx, rc.grid.ky_samples);
        const auto recs = localization_profile(s, w, thresholds(rc.tolerance), cloud ? &*cloud : nullptr);
        for (const auto& r : recs) {
            const cd e = scale * r.eigenvalue;
            states.add({kx, static_cast<long long>(r.state_index), e.real(), e.imag(), std::abs(e), r.mean_row, r.ipr,
                        std::string(to_string(r.cls))});
            const auto wt = site_weights(s.right_vectors.col(r.state_index));
            const auto lg = log01(wt);
            for (std::size_t l = 0; l < wt.size(); ++l)
                weights.add({kx, static_cast<long long>(r.state_index), static_cast<long long>(l + 1), wt[l], lg[l]});
        }
    }
    ro.tables.push_back(std::move(states));
    ro.tables.push_back(std::move(weights));
}

inline RunOutput localization_run(const RunConfig& rc) {
    RunOutput ro;
    ro.metadata = base_metadata(rc);
    const auto kx = rc.grid.kx_values.empty() ? std::vector<double>{2 * pi / 3} : rc.grid.kx_values;
    add_profiles(ro, rc, rc.model, rc.grid.w, kx, reported_energy_factor(rc.model.energy_scale));
    ro.summary = {{"kx_values", kx}, {"states_per_kx", 6 * rc.grid.w}};
    return ro;
}

inline bool flips_match(const std::vector<double>& found, const std::vector<double>& expected, double tol) {
    if (found.size() != expected.size()) return false;
    for (double e : expected) {
        bool hit = false;
        for (double f : found) hit = hit || std::abs(wrap_angle(f - e)) <= tol;
        if (!hit) return false;
    }
    return true;
}

}  // namespace detail

/// Applies grid / tolerance / output / seed / threads keys from a YAML text on top of a preset.
inline void apply_preset_overrides(const std::string& text, RunConfig& rc) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(std::string("config: syntax error: ") + e.what());
    }
    if (!root || root.IsNull()) return;
    const YAML::Node& n = root;
    if (n["model"]) detail::config_fail(n["model"], "presets fix the model; 'model' cannot be overridden");
    detail::check_keys(n, "", {"command", "preset", "grid", "tolerance", "output", "seed", "threads"});
    if (n["grid"]) detail::parse_grid(n["grid"], rc.grid);
    if (n["tolerance"]) detail::parse_tolerance(n["tolerance"], rc.tolerance);
    if (n["output"]) detail::parse_output(n["output"], rc.output);
    if (n["seed"]) rc.seed = detail::scalar<std::uint64_t>(n["seed"], "seed");
    if (n["threads"]) rc.threads = detail::scalar<unsigned>(n["threads"], "threads");
    // OBC/PBC comparisons need an even number of rows between the two boundary rows.
    if (rc.grid.w % 2 != 0) detail::config_fail(n["grid"]["w"], "preset runs need an even w");
}

/// Dimer rows of the spectrum sweep behind a profile figure's qualitative report.
inline constexpr int report_rows = 52;

inline RunOutput reproduce_run(const FigurePreset& p) {
    const RunConfig& rc = p.config;
    const ModelConfig& m = rc.model;
    const double scale = reported_energy_factor(m.energy_scale);
    RunOutput ro;
    ro.metadata = base_metadata(rc);
    json prov = json::array();
    for (const auto& n : p.provenance)
        prov.push_back({{"parameter", n.parameter}, {"provenance", n.provenance}, {"note", n.note}});
    json expect = {{"source", p.expect.source}, {"flips", p.expect.flips}};
    expect["nhse"] = p.expect.nhse ? json(*p.expect.nhse) : json(nullptr);
    ro.metadata["preset"] = {{"id", p.id},
                             {"kind", p.kind == PresetKind::spectrum ? "spectrum" : "profile"},
                             {"provenance", prov},
                             {"expectation", expect}};
    if (p.kind == PresetKind::profile) ro.metadata["preset"]["profile_kx"] = p.profile_kx;

    const auto kx = detail::kx_grid_of(rc.grid);
    const int sweep_w = p.kind == PresetKind::spectrum ? rc.grid.w : report_rows;
    const auto sw = detail::run_sweep(rc, m, sweep_w, kx);
    const auto s = nhse_summary(sw, detail::nhse_options(rc.tolerance));

    json report = detail::nhse_json(s);
    report["sweep_rows"] = sweep_w;
    report["max_residual"] = detail::max_of(sw.max_residual);
    // Bulk states (not classed edge) whose |E| lies outside the periodic cloud.
    int stray = 0;
    double worst = 0.0;
    if (sw.pbc_reference)
        for (std::size_t q = 0; q < kx.size(); ++q)
            for (const auto& r : sw.records[q]) {
                const double d = (*sw.pbc_reference)[q].distance(std::abs(r.eigenvalue));
                if (!is_edge(r.cls)) {
                    worst = std::max(worst, d);
                    if (d > rc.tolerance.cloud) ++stray;
                }
            }
    report["non_edge_outside_cloud"] = stray;
    report["max_non_edge_cloud_distance"] = worst;
    json checks = json::object();
    if (p.expect.nhse) checks["nhse"] = s.nhse == *p.expect.nhse;
    if (!p.expect.flips.empty()) {
        const double grid_step = 2.0 * pi / static_cast<double>(kx.size());
        checks["flips"] = detail::flips_match(s.flips, p.expect.flips, 2.0 * grid_step);
    }
    report["checks"] = checks;
    ro.summary = report;

    if (p.kind == PresetKind::spectrum) {
        ro.tables.push_back(detail::ribbon_table(sw, scale));
        ro.tables.push_back(detail::pbc_table(sw, scale));
        ro.tables.push_back(detail::fractions_table(s));
        ro.plots.push_back(detail::ribbon_plot(sw, scale, p.id));
        if (p.edge_snapshot_kx) {
            Table t{"edge_modes", {"k_x", "state_index", "re_E", "im_E", "site", "log01_weight"}, {}};
            for (const auto& st : edge_mode_weights(m, rc.grid.w, *p.edge_snapshot_kx, WeightNormalization::log01)) {
                const cd e = scale * st.eigenvalue;
                for (std::size_t l = 0; l < st.weights.size(); ++l)
                    t.add({*p.edge_snapshot_kx, static_cast<long long>(st.state_index), e.real(), e.imag(),
                           static_cast<long long>(l + 1), st.weights[l]});
            }
            ro.tables.push_back(std::move(t));
        }
    } else {
        detail::add_profiles(ro, rc, m, rc.grid.w, p.profile_kx, scale);
        ro.tables.push_back(detail::fractions_table(s));
        SvgPlot plot{"profiles", p.id + " right-eigenvector weights", "site", "|psi_R|^2", {}};
        const auto& wt = ro.tables[ro.tables.size() - 2];
        const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"};
        for (std::size_t q = 0; q < p.profile_kx.size(); ++q) {
            SvgSeries ser{"k_x = " + format_double(p.profile_kx[q]).substr(0, 7), colours[q % 4], {}, 1.0};
            for (const auto& row : wt.rows)
                if (std::get<double>(row[0]) == p.profile_kx[q])
                    ser.points.push_back({static_cast<double>(std::get<long long>(row[2])), std::get<double>(row[3])});
            plot.series.push_back(std::move(ser));
        }
        ro.plots.push_back(std::move(plot));
    }
    return ro;
}

/// Dispatches one configured run; reproduce takes the preset id from rc.preset.
inline RunOutput run(const RunConfig& rc) {
    switch (rc.command) {
        case Command::bloch_spectrum: return detail::bloch_spectrum_run(rc);
        case Command::ep_find: return detail::ep_find_run(rc);
        case Command::arc_trace: return detail::arc_trace_run(rc);
        case Command::skin_check: return detail::skin_check_run(rc);
        case Command::ribbon_sweep: return detail::ribbon_sweep_run(rc);
        case Command::localization: return detail::localization_run(rc);
        case Command::reproduce: {
            if (!rc.preset) throw ConfigError("reproduce: no preset given");
            // The echoed config of a preset run is complete, so it replaces the preset defaults.
            FigurePreset p = figure_preset(*rc.preset);
            p.config = rc;
            return reproduce_run(p);
        }
    }
    throw ConfigError("unknown command");
}

}  // namespace mnh
