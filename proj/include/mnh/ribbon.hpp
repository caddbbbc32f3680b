#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "spectrum.hpp"

namespace mnh {

enum class BoundaryY { open, periodic };

/// Zigzag strip: w dimer rows stacked along y, periodic along x with momentum kx.
/// Row r holds (A_r, B_r) joined by an x- and a y-link; the z-link joins A_{r+1} to B_r.
struct RibbonSpec {
    ModelConfig model{};
    int w = 52;
    BoundaryY boundary_y = BoundaryY::open;
    double kx = 0.0;
};

/// Matrix index of (row r in [0, w), sublattice s in {0 = A, 1 = B}, flavour mu).
inline Eigen::Index ribbon_index(int row, int sublattice, int flavour) {
    return static_cast<Eigen::Index>((2 * row + sublattice) * 3 + flavour);
}

/// Site number along y (1-based, 1..2w) of a matrix index.
inline int ribbon_site(Eigen::Index index) { return static_cast<int>(index / 3) + 1; }

struct RibbonBlocks {
    Mat3 intra;   // H(A_r, B_r)
    Mat3 inter;   // H(A_{r+1}, B_r)
    Mat3 onsite;  // H(s_r, s_r)
};

/// Flavour blocks of the strip Hamiltonian at kx: the x-link carries e^{+i kx/2}, the y-link e^{-i kx/2}.
inline RibbonBlocks ribbon_blocks(const FlavourBondTable& tab, double kx) {
    const cd i{0.0, 1.0};
    const cd ex = std::polar(1.0, kx / 2.0), ey = std::polar(1.0, -kx / 2.0);
    return {convention_factor * i * (tab.t[0] * ex + tab.t[1] * ey), convention_factor * i * tab.t[2],
            convention_factor * i * tab.onsite};
}

namespace detail {

inline void check_ribbon(const RibbonSpec& spec) {
    if (spec.w < 2) throw ArgumentError("ribbon: w must be at least 2");
    if (!std::isfinite(spec.kx)) throw ArgumentError("ribbon: kx must be finite");
    spec.model.validate();
}

}  // namespace detail

inline MatX build_ribbon(const RibbonSpec& spec) {
    detail::check_ribbon(spec);
    const int w = spec.w;
    const auto tab = flavour_bond_table(spec.model);
    const auto fwd = ribbon_blocks(tab, spec.kx);
    const auto bwd = ribbon_blocks(tab, -spec.kx);
    const Mat3 intra_ba = -bwd.intra.transpose();  // H(B_r, A_r)
    const Mat3 inter_ba = -bwd.inter.transpose();  // H(B_r, A_{r+1})

    MatX h = MatX::Zero(6 * w, 6 * w);
    auto put = [&](int r1, int s1, int r2, int s2, const Mat3& blk) {
        h.block<3, 3>(ribbon_index(r1, s1, 0), ribbon_index(r2, s2, 0)) += blk;
    };
    for (int r = 0; r < w; ++r) {
        put(r, 0, r, 0, fwd.onsite);
        put(r, 1, r, 1, fwd.onsite);
        put(r, 0, r, 1, fwd.intra);
        put(r, 1, r, 0, intra_ba);
        const bool wrap = r + 1 == w;
        if (wrap && spec.boundary_y == BoundaryY::open) continue;
        const int up = wrap ? 0 : r + 1;
        put(up, 0, r, 1, fwd.inter);
        put(r, 1, up, 0, inter_ba);
    }
    return h;
}

namespace detail {

/// Block-diagonal models split into three tridiagonal chains ordered A_0, B_0, A_1, B_1, ...
inline std::optional<Spectrum> ribbon_spectrum_chains(const RibbonSpec& spec, double tol) {
    const int w = spec.w, n = 2 * w;
    const auto tab = flavour_bond_table(spec.model);
    const auto fwd = ribbon_blocks(tab, spec.kx);
    const auto bwd = ribbon_blocks(tab, -spec.kx);

    std::array<Spectrum, 3> chains;
    for (int mu = 0; mu < 3; ++mu) {
        std::vector<cd> lower(n - 1), diag(n, fwd.onsite(mu, mu)), upper(n - 1);
        for (int c = 0; c + 1 < n; ++c) {
            if (c % 2 == 0) {
                upper[c] = fwd.intra(mu, mu);
                lower[c] = -bwd.intra(mu, mu);
            } else {
                upper[c] = -bwd.inter(mu, mu);
                lower[c] = fwd.inter(mu, mu);
            }
        }
        auto s = eig_tridiagonal(lower, diag, upper, tol);
        if (!s) {
            MatX t = MatX::Zero(n, n);
            for (int c = 0; c < n; ++c) {
                t(c, c) = diag[c];
                if (c + 1 < n) {
                    t(c + 1, c) = lower[c];
                    t(c, c + 1) = upper[c];
                }
            }
            try {
                s = eig(t, false, tol);
            } catch (const ConvergenceError&) {
                return std::nullopt;
            }
        }
        chains[mu] = std::move(*s);
    }

    std::vector<std::array<int, 2>> order;  // (flavour, column)
    for (int mu = 0; mu < 3; ++mu)
        for (int c = 0; c < n; ++c) order.push_back({mu, c});
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return eigen_order(chains[a[0]].eigenvalues[a[1]], chains[b[0]].eigenvalues[b[1]]);
    });

    Spectrum out;
    out.tolerance = tol;
    out.eigenvalues.resize(3 * n);
    out.right_vectors = MatX::Zero(3 * n, 3 * n);
    out.residuals.resize(3 * n);
    out.defective.resize(3 * n);
    for (std::size_t q = 0; q < order.size(); ++q) {
        const auto [mu, c] = order[q];
        const auto& ch = chains[mu];
        out.eigenvalues[q] = ch.eigenvalues[c];
        for (int site = 0; site < n; ++site)
            out.right_vectors(site * 3 + mu, static_cast<Eigen::Index>(q)) = ch.right_vectors(site, c);
        // Chain residuals are relative to max(1, ||chain||) <= max(1, ||H||), so they bound the full ones.
        out.residuals[q] = ch.residuals[c];
        out.defective[q] = ch.defective[c];
        out.max_residual = std::max(out.max_residual, out.residuals[q]);
    }
    return out;
}

}  // namespace detail

/// Spectrum of the strip at spec.kx; eigenvalues sorted by real then imaginary part.
inline Spectrum ribbon_spectrum(const RibbonSpec& spec, bool want_left = false,
                                std::optional<double> tol = std::nullopt) {
    detail::check_ribbon(spec);
    const double target = tol.value_or(default_tolerance(6 * spec.w));
    if (!want_left && spec.model.block_diagonal() && spec.boundary_y == BoundaryY::open) {
        if (auto s = detail::ribbon_spectrum_chains(spec, target)) return std::move(*s);
    }
    return eig(build_ribbon(spec), want_left, target);
}

// ---------------------------------------------------------------------------------------------
// Periodic reference

/// |E| ranges of the Bloch bands at fixed kx over all ky, one interval per band order statistic.
struct PbcCloud {
    double kx = 0.0;
    std::vector<std::array<double, 2>> intervals;
    std::vector<cd> samples;  // Bloch eigenvalues on the ky grid, for plotting

    [[nodiscard]] double distance(double abs_e) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& iv : intervals) {
            if (abs_e >= iv[0] && abs_e <= iv[1]) return 0.0;
            d = std::min(d, abs_e < iv[0] ? iv[0] - abs_e : abs_e - iv[1]);
        }
        return d;
    }
    [[nodiscard]] double min_abs() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& iv : intervals) m = std::min(m, iv[0]);
        return m;
    }
};

inline std::vector<cd> bloch_eigenvalues(const ModelConfig& model, const FlavourBondTable& tab, const Vec2& k) {
    if (auto cf = closed_form_spectrum(model, k)) {
        std::vector<cd> v(cf->begin(), cf->end());
        std::sort(v.begin(), v.end(), detail::eigen_order);
        return v;
    }
    return eigenvalues_only(bloch_hamiltonian(tab, k).entries);
}

inline PbcCloud pbc_cloud(const ModelConfig& model, double kx, int ky_samples = 256) {
    model.validate();
    if (ky_samples < 8) throw ArgumentError("pbc_cloud: ky_samples must be at least 8");
    const auto tab = flavour_bond_table(model);
    auto sorted_abs = [&](double ky) {
        const auto ev = bloch_eigenvalues(model, tab, Vec2{kx, ky});
        std::array<double, 6> a{};
        for (int q = 0; q < 6; ++q) a[q] = std::abs(ev[q]);
        std::sort(a.begin(), a.end());
        return a;
    };
    const double step = ky_period / ky_samples;
    std::vector<std::array<double, 6>> grid(ky_samples);
    PbcCloud cloud;
    cloud.kx = kx;
    for (int q = 0; q < ky_samples; ++q) {
        const double ky = step * q;
        const auto ev = bloch_eigenvalues(model, tab, Vec2{kx, ky});
        cloud.samples.insert(cloud.samples.end(), ev.begin(), ev.end());
        std::array<double, 6> a{};
        for (int b = 0; b < 6; ++b) a[b] = std::abs(ev[b]);
        std::sort(a.begin(), a.end());
        grid[q] = a;
    }
    // Golden-section refinement of each band's extremum around its best grid point.
    auto refine = [&](int band, int q0, bool maximise) {
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = step * (q0 - 1), b = step * (q0 + 1);
        auto val = [&](double ky) { return maximise ? -sorted_abs(ky)[band] : sorted_abs(ky)[band]; };
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = val(c), fd = val(d);
        for (int it = 0; it < 60 && b - a > 1e-13; ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = val(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = val(d);
            }
        }
        const double best = std::min({fc, fd, val(step * q0)});
        return maximise ? -best : best;
    };
    for (int band = 0; band < 6; ++band) {
        int qmin = 0, qmax = 0;
        for (int q = 1; q < ky_samples; ++q) {
            if (grid[q][band] < grid[qmin][band]) qmin = q;
            if (grid[q][band] > grid[qmax][band]) qmax = q;
        }
        cloud.intervals.push_back({refine(band, qmin, false), refine(band, qmax, true)});
    }
    return cloud;
}

// ---------------------------------------------------------------------------------------------
// Localization

enum class LocClass { edge_bottom, edge_top, bulk_localized_bottom, bulk_localized_top, extended };

inline std::string_view to_string(LocClass c) {
    switch (c) {
        case LocClass::edge_bottom: return "edge_bottom";
        case LocClass::edge_top: return "edge_top";
        case LocClass::bulk_localized_bottom: return "bulk_localized_bottom";
        case LocClass::bulk_localized_top: return "bulk_localized_top";
        case LocClass::extended: return "extended";
    }
    return "?";
}

inline bool is_edge(LocClass c) { return c == LocClass::edge_bottom || c == LocClass::edge_top; }
inline bool is_bulk_localized(LocClass c) {
    return c == LocClass::bulk_localized_bottom || c == LocClass::bulk_localized_top;
}

struct LocalizationThresholds {
    double edge_fraction = 0.1;  // outer share of the 2w sites counted on each side
    double mass = 0.6;           // mass needed within those outer sites
    double cloud_tol = 1e-2;     // |E| distance beyond which a state is outside the periodic cloud
    // In-cloud states with at least this share of their weight in one half of the ribbon also count
    // as bulk-localized: skin modes decaying over ~w/4 rows miss the outer-window test.
    double half_mass = 0.75;
    // Outside the periodic cloud a state cannot belong to the bulk continuum; by default it is an
    // edge state whatever its decay length. Set to also demand the mass test there.
    bool edge_requires_mass = false;
};

struct LocalizationRecord {
    int state_index = 0;
    cd eigenvalue{0.0};
    double mean_row = 0.0;     // in [1, 2w]
    double ipr = 0.0;          // sum of squared site weights
    double bottom_mass = 0.0;  // weight on the outer sites at row 1
    double top_mass = 0.0;     // weight on the outer sites at row 2w
    double imbalance = 0.0;    // weight on the lower half minus the upper half
    LocClass cls = LocClass::extended;
};

/// Site weights sum_flavour |psi|^2 of one right eigenvector, normalised to 1.
inline std::vector<double> site_weights(const VecX& v) {
    const auto sites = v.size() / 3;
    std::vector<double> wgt(static_cast<std::size_t>(sites), 0.0);
    double total = 0.0;
    for (Eigen::Index q = 0; q < v.size(); ++q) {
        wgt[q / 3] += std::norm(v[q]);
        total += std::norm(v[q]);
    }
    if (total > 0.0)
        for (auto& x : wgt) x /= total;
    return wgt;
}

inline int edge_sites(int w, double edge_fraction) {
    return std::max(1, static_cast<int>(std::lround(edge_fraction * 2 * w)));
}

inline LocalizationRecord localize_state(const VecX& v, cd lambda, int index, int w,
                                         const LocalizationThresholds& th, const PbcCloud* cloud) {
    const auto wgt = site_weights(v);
    const int sites = 2 * w;
    const int n_edge = edge_sites(w, th.edge_fraction);
    LocalizationRecord r;
    r.state_index = index;
    r.eigenvalue = lambda;
    for (int l = 0; l < sites; ++l) {
        r.mean_row += (l + 1) * wgt[l];
        r.ipr += wgt[l] * wgt[l];
        if (l < n_edge) r.bottom_mass += wgt[l];
        if (l >= sites - n_edge) r.top_mass += wgt[l];
        if (2 * l + 1 < sites) r.imbalance += wgt[l];
        else if (2 * l + 1 > sites) r.imbalance -= wgt[l];
    }
    const bool bottom = r.bottom_mass >= r.top_mass;
    const bool massive = r.bottom_mass + r.top_mass >= th.mass;
    const bool outside = cloud == nullptr || cloud->distance(std::abs(lambda)) > th.cloud_tol;
    if (outside && (massive || (cloud != nullptr && !th.edge_requires_mass)))
        r.cls = bottom ? LocClass::edge_bottom : LocClass::edge_top;
    else if (massive && !outside)
        r.cls = bottom ? LocClass::bulk_localized_bottom : LocClass::bulk_localized_top;
    else if (!outside && std::abs(r.imbalance) >= 2.0 * th.half_mass - 1.0)
        r.cls = r.imbalance > 0.0 ? LocClass::bulk_localized_bottom : LocClass::bulk_localized_top;
    else
        r.cls = LocClass::extended;
    return r;
}

inline std::vector<LocalizationRecord> localization_profile(const Spectrum& s, int w,
                                                            const LocalizationThresholds& th = {},
                                                            const PbcCloud* cloud = nullptr) {
    if (w < 1 || s.right_vectors.rows() != 6 * w || s.right_vectors.cols() != 6 * w)
        throw ArgumentError("localization_profile: spectrum dimension does not match 6w");
    std::vector<LocalizationRecord> out;
    out.reserve(s.size());
    for (std::size_t q = 0; q < s.size(); ++q)
        out.push_back(localize_state(s.right_vectors.col(static_cast<Eigen::Index>(q)), s.eigenvalues[q],
                                     static_cast<int>(q), w, th, cloud));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Sweeps

struct SweepOptions {
    BoundaryY boundary_y = BoundaryY::open;
    bool with_cloud = true;
    int ky_samples = 256;
    LocalizationThresholds thresholds{};
    std::optional<double> tol{};
    unsigned threads = 1;
};

struct SweepResult {
    ModelConfig model{};
    int w = 0;
    std::vector<double> kx_grid;
    std::vector<std::vector<LocalizationRecord>> records;  // [k][state]
    std::vector<double> max_residual;                      // per k
    std::optional<std::vector<PbcCloud>> pbc_reference;
};

/// kx = -pi + 2 pi (j + 1/2) / n: symmetric about 0 and never exactly on 0 or pi.
inline std::vector<double> symmetric_kx_grid(int n) {
    if (n < 1) throw ArgumentError("symmetric_kx_grid: n must be positive");
    std::vector<double> g(n);
    for (int j = 0; j < n; ++j) g[j] = -pi + 2.0 * pi * (j + 0.5) / n;
    return g;
}

inline SweepResult sweep(const ModelConfig& model, int w, const std::vector<double>& kx_grid,
                         const SweepOptions& opt = {}) {
    if (kx_grid.empty()) throw ArgumentError("sweep: kx_grid is empty");
    model.validate();
    SweepResult res;
    res.model = model;
    res.w = w;
    res.kx_grid = kx_grid;
    res.records.resize(kx_grid.size());
    res.max_residual.resize(kx_grid.size());
    std::vector<PbcCloud> clouds(opt.with_cloud ? kx_grid.size() : 0);
    parallel_for(kx_grid.size(), opt.threads, [&](std::size_t q) {
        const double kx = kx_grid[q];
        RibbonSpec spec{model, w, opt.boundary_y, kx};
        Spectrum s;
        try {
            s = ribbon_spectrum(spec, false, opt.tol);
        } catch (const ConvergenceError& e) {
            std::ostringstream msg;
            msg.precision(17);
            msg << e.what() << " at k_x=" << kx;
            throw ConvergenceError(msg.str(), e.best_effort());
        }
        const PbcCloud* cp = nullptr;
        if (opt.with_cloud) {
            clouds[q] = pbc_cloud(model, kx, opt.ky_samples);
            cp = &clouds[q];
        }
        res.records[q] = localization_profile(s, w, opt.thresholds, cp);
        res.max_residual[q] = s.max_residual;
    });
    if (opt.with_cloud) res.pbc_reference = std::move(clouds);
    return res;
}

// ---------------------------------------------------------------------------------------------
// Edge-mode snapshots

enum class WeightNormalization { linear, log01 };

struct StateWeights {
    int state_index = 0;
    cd eigenvalue{0.0};
    std::vector<double> weights;  // per site, 2w entries
};

/// Affine log rescaling of a weight profile to [0, 1].
inline std::vector<double> log01(const std::vector<double>& weights) {
    if (weights.empty()) throw ArgumentError("log01: empty profile");
    std::vector<double> lg(weights.size());
    for (std::size_t l = 0; l < lg.size(); ++l) lg[l] = std::log(std::max(weights[l], 1e-300));
    const double lo = *std::min_element(lg.begin(), lg.end());
    const double span = *std::max_element(lg.begin(), lg.end()) - lo;
    for (auto& x : lg) x = span > 0.0 ? (x - lo) / span : 0.0;
    return lg;
}

/// Site weights of the n_states eigenstates closest to E = 0 at kx.
inline std::vector<StateWeights> edge_mode_weights(const ModelConfig& model, int w, double kx,
                                                   WeightNormalization norm, int n_states = 6) {
    if (n_states < 1) throw ArgumentError("edge_mode_weights: empty state selection");
    const Spectrum s = ribbon_spectrum(RibbonSpec{model, w, BoundaryY::open, kx});
    std::vector<int> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return std::abs(s.eigenvalues[a]) < std::abs(s.eigenvalues[b]); });
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(n_states)));
    std::sort(idx.begin(), idx.end());
    std::vector<StateWeights> out;
    for (int q : idx) {
        StateWeights sw{q, s.eigenvalues[q], site_weights(s.right_vectors.col(q))};
        if (norm == WeightNormalization::log01) sw.weights = log01(sw.weights);
        out.push_back(std::move(sw));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Skin-effect summary

struct KxFractions {
    double kx = 0.0;
    int bulk_states = 0;  // states not classed edge
    double bottom = 0.0;  // fraction of bulk states localized at the bottom
    double top = 0.0;
    double extended = 0.0;
    double imbalance = 0.0;  // mean (lower-half - upper-half) mass over bulk states
};

struct NhseSummary {
    std::vector<KxFractions> per_kx;
    double bulk_localized_fraction = 0.0;  // over all bulk states of the sweep
    double max_kx_fraction = 0.0;          // largest per-kx bulk-localized fraction
    bool nhse = false;
    std::vector<double> flips;   // kx where the bulk localization changes boundary
    int edge_states = 0;         // total edge-classified states
    int max_edge_per_kx = 0;
};

struct NhseOptions {
    double presence = 0.05;  // bulk-localized fraction defining NHSE
    double deadband = 0.1;   // |imbalance| needed on both sides of a flip
};

inline NhseSummary nhse_summary(const SweepResult& sw, const NhseOptions& opt = {}) {
    NhseSummary out;
    long bulk_total = 0, localized_total = 0;
    for (std::size_t q = 0; q < sw.kx_grid.size(); ++q) {
        KxFractions f;
        f.kx = sw.kx_grid[q];
        int bottom = 0, top = 0, ext = 0, edge = 0;
        for (const auto& r : sw.records[q]) {
            if (is_edge(r.cls)) {
                ++edge;
                continue;
            }
            ++f.bulk_states;
            f.imbalance += r.imbalance;
            if (r.cls == LocClass::bulk_localized_bottom) ++bottom;
            else if (r.cls == LocClass::bulk_localized_top) ++top;
            else ++ext;
        }
        if (f.bulk_states > 0) {
            f.bottom = static_cast<double>(bottom) / f.bulk_states;
            f.top = static_cast<double>(top) / f.bulk_states;
            f.extended = static_cast<double>(ext) / f.bulk_states;
            f.imbalance /= f.bulk_states;
        }
        bulk_total += f.bulk_states;
        localized_total += bottom + top;
        out.edge_states += edge;
        out.max_edge_per_kx = std::max(out.max_edge_per_kx, edge);
        out.max_kx_fraction = std::max(out.max_kx_fraction, f.bottom + f.top);
        out.per_kx.push_back(f);
    }
    out.bulk_localized_fraction = bulk_total > 0 ? static_cast<double>(localized_total) / bulk_total : 0.0;
    out.nhse = out.bulk_localized_fraction > opt.presence;

    // Flips: consecutive decided points (|imbalance| > deadband) of opposite sign, periodic in kx.
    std::vector<std::size_t> decided;
    std::vector<std::size_t> order(out.per_kx.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.per_kx[a].kx < out.per_kx[b].kx; });
    for (auto q : order)
        if (std::abs(out.per_kx[q].imbalance) > opt.deadband) decided.push_back(q);
    const std::size_t nd = decided.size();
    const std::size_t n = order.size();
    std::vector<std::size_t> pos(out.per_kx.size());
    for (std::size_t p = 0; p < n; ++p) pos[order[p]] = p;
    for (std::size_t d = 0; d < nd && nd > 1; ++d) {
        const auto a = decided[d], b = decided[(d + 1) % nd];
        if ((out.per_kx[a].imbalance > 0) == (out.per_kx[b].imbalance > 0)) continue;
        // First raw sign change walking from a towards b.
        std::size_t p = pos[a];
        while (true) {
            const std::size_t pn = (p + 1) % n;
            const double shift = pn == 0 ? 2.0 * pi : 0.0;
            const auto& x = out.per_kx[order[p]];
            const auto& y = out.per_kx[order[pn]];
            if ((x.imbalance > 0) != (y.imbalance > 0) || order[pn] == b) {
                const double t = x.imbalance / (x.imbalance - y.imbalance);
                out.flips.push_back(wrap_angle(x.kx + t * (y.kx + shift - x.kx)));
                break;
            }
            p = pn;
        }
    }
    std::sort(out.flips.begin(), out.flips.end());
    return out;
}

}  // namespace mnh
