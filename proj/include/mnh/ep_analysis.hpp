#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "spectrum.hpp"

namespace mnh {

enum class EPMethod { closed_form, scan };

struct EPRecord {
    Vec2 k = Vec2::Zero();    // reduced to the fundamental cell
    BondPhase phase{};        // same point in bond-phase coordinates
    EPMethod method = EPMethod::scan;
    std::optional<int> flavour;  // 1..3 for block-diagonal models
    double gap = 0.0;            // smallest pair distance at k (of the reported pair)
    double overlap = 0.0;        // |<v_a, v_b>| of that pair, in [0, 1]
    double residual = 0.0;       // |A_eta(+-k)| (closed form) or min singular value (scan)
    bool confirmed = false;      // gap < gap_tol and overlap > 1 - overlap_tol
};

struct EPTolerances {
    double gap_rel = 1e-6;      // gap_tol = gap_rel * ||H||_F
    double overlap_tol = 1e-4;  // confirmed when overlap > 1 - overlap_tol
};

// ---------------------------------------------------------------------------------------------
// Pair diagnostics from the Schur form

/// Gap and eigenvector overlap of one eigenvalue pair.
struct PairDiagnostic {
    int a = 0, b = 1;
    double gap = 0.0;
    double overlap = 0.0;
    double objective = 2.0;  // gap / ||H||_F + (1 - overlap)
};

namespace detail {

/// Swap diagonal entries p, p+1 of an upper-triangular T by a unitary rotation.
inline void schur_swap(MatX& t, Eigen::Index p) {
    const cd a = t(p, p), b = t(p, p + 1), c = t(p + 1, p + 1);
    const cd x1 = b, x2 = c - a;
    const double r = std::hypot(std::abs(x1), std::abs(x2));
    if (r == 0.0) return;
    const cd g11 = x1 / r, g21 = x2 / r, g12 = -std::conj(x2) / r, g22 = std::conj(x1) / r;
    const auto n = t.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        const cd u = t(i, p), v = t(i, p + 1);
        t(i, p) = u * g11 + v * g21;
        t(i, p + 1) = u * g12 + v * g22;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        const cd u = t(p, j), v = t(p + 1, j);
        t(p, j) = std::conj(g11) * u + std::conj(g21) * v;
        t(p + 1, j) = std::conj(g12) * u + std::conj(g22) * v;
    }
    t(p + 1, p) = 0.0;
}

/// Overlap of the eigenvectors belonging to Schur positions a < b. Moves both to the leading 2x2
/// block, which is invariant, so the overlap is read off [[l1, t], [0, l2]].
inline double schur_pair_overlap(MatX t, Eigen::Index a, Eigen::Index b, double floor) {
    for (Eigen::Index p = a; p > 0; --p) schur_swap(t, p - 1);
    for (Eigen::Index p = b; p > 1; --p) schur_swap(t, p - 1);
    const double off = std::abs(t(0, 1));
    const double gap = std::abs(t(1, 1) - t(0, 0));
    if (off <= floor) return 0.0;
    return off / std::hypot(off, gap);
}

}  // namespace detail

/// Pair minimising gap/||H|| + (1 - overlap). Semisimple degeneracies give overlap 0, coalescing
/// pairs give overlap -> 1.
inline PairDiagnostic most_defective_pair(const MatX& h) {
    const auto n = h.rows();
    const double scale = std::max(h.norm(), 1e-300);
    Eigen::ComplexSchur<MatX> schur(h);
    const MatX& t = schur.matrixT();
    PairDiagnostic best;
    const double floor = 1e-9 * scale;
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double gap = std::abs(t(a, a) - t(b, b));
            if (gap / scale >= best.objective) continue;
            const double ov = detail::schur_pair_overlap(t, a, b, floor);
            const double obj = gap / scale + (1.0 - ov);
            if (obj < best.objective) best = {static_cast<int>(a), static_cast<int>(b), gap, ov, obj};
        }
    return best;
}

/// Smallest eigenvalue distance, ignoring nothing.
inline double min_pair_gap(const std::vector<cd>& ev) {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < ev.size(); ++a)
        for (std::size_t b = a + 1; b < ev.size(); ++b) g = std::min(g, std::abs(ev[a] - ev[b]));
    return g;
}

/// Squared difference of the closest eigenvalue pair; analytic in k near a second-order EP.
inline cd closest_pair_discriminant(const std::vector<cd>& ev) {
    double g = std::numeric_limits<double>::infinity();
    cd d{0.0};
    for (std::size_t a = 0; a < ev.size(); ++a)
        for (std::size_t b = a + 1; b < ev.size(); ++b) {
            const double x = std::abs(ev[a] - ev[b]);
            if (x < g) {
                g = x;
                d = (ev[a] - ev[b]) * (ev[a] - ev[b]);
            }
        }
    return d;
}

// ---------------------------------------------------------------------------------------------
// Closed-form EPs of one decoupled flavour

struct ClosedFormEPs {
    std::vector<EPRecord> records;
    std::string reason;  // set when records is empty
};

namespace detail {

inline EPRecord make_record(const Vec2& k, EPMethod method, std::optional<int> flavour) {
    EPRecord r;
    r.k = reduce_to_cell(k);
    r.phase = bond_phase_from_k(r.k);
    r.method = method;
    r.flavour = flavour;
    return r;
}

inline void fill_block_diagnostics(EPRecord& r, const Coupling3& j, const EPTolerances& tol) {
    const Eigen::Matrix2cd blk = flavour_block(j, r.k);
    const auto d = most_defective_pair(MatX(blk));
    r.gap = d.gap;
    r.overlap = d.overlap;
    r.confirmed = d.gap < tol.gap_rel * std::max(blk.norm(), 1e-300) && d.overlap > 1.0 - tol.overlap_tol;
}

}  // namespace detail

/// Zeros of A(k) and of A(-k) for one coupling triple, solved in bond-phase space:
/// cos(theta1 + phi_x) = (|Jy|^2 - |Jx|^2 - |Jz|^2) / (2|Jx||Jz|), likewise for theta2, with
/// |Jx| sin(theta1 + phi_x) = -|Jy| sin(theta2 + phi_y) selecting the sign pairing.
inline ClosedFormEPs ep_closed_form(const Coupling3& j, std::optional<int> flavour = std::nullopt,
                                    const EPTolerances& tol = {}) {
    const auto [a, b, c] = j.moduli();
    if (a == 0.0 || b == 0.0 || c == 0.0) throw ArgumentError("ep_closed_form: coupling modulus is zero");
    ClosedFormEPs out;
    if (!triangle_test({a, b, c})) {
        out.reason = "triangle inequality violated";
        return out;
    }
    const double phi_x = std::arg(j.jx) - std::arg(j.jz);
    const double phi_y = std::arg(j.jy) - std::arg(j.jz);
    const double alpha0 = std::acos(std::clamp((b * b - a * a - c * c) / (2.0 * a * c), -1.0, 1.0));
    const double beta0 = std::acos(std::clamp((a * a - b * b - c * c) / (2.0 * b * c), -1.0, 1.0));
    const double scale = a + b + c;

    std::vector<Vec2> zeros;  // zeros of A(k)
    for (double sa : {1.0, -1.0})
        for (double sb : {-1.0, 1.0}) {
            const double al = sa * alpha0, be = sb * beta0;
            if (std::abs(a * std::sin(al) + b * std::sin(be)) > 1e-9 * scale) continue;
            const Vec2 k = k_from_bond_phase(al - phi_x, be - phi_y);
            if (std::abs(f_function(j, k)) > 1e-10 * scale) continue;
            bool dup = false;
            for (const auto& z : zeros) dup = dup || cell_distance(z, k) < 1e-9;
            if (!dup) zeros.push_back(k);
        }

    auto push = [&](const Vec2& k, double resid) {
        for (const auto& r : out.records)
            if (cell_distance(r.k, k) < 1e-9) return;
        EPRecord r = detail::make_record(k, EPMethod::closed_form, flavour);
        r.residual = resid;
        detail::fill_block_diagnostics(r, j, tol);
        out.records.push_back(r);
    };
    for (const auto& z : zeros) push(z, std::abs(f_function(j, z)));      // A(k) = 0
    for (const auto& z : zeros) push(Vec2(-z), std::abs(f_function(j, z)));  // A(-k) = 0
    if (out.records.empty()) out.reason = "no zero found";
    return out;
}

/// Closed-form EPs of every flavour of a block-diagonal model.
inline std::vector<EPRecord> ep_closed_form(const ModelConfig& model, const EPTolerances& tol = {}) {
    model.validate();
    const auto js = flavour_couplings(model);
    std::vector<EPRecord> all;
    for (int eta = 0; eta < 3; ++eta) {
        auto r = ep_closed_form(js[eta], eta + 1, tol);
        all.insert(all.end(), r.records.begin(), r.records.end());
    }
    return all;
}

// ---------------------------------------------------------------------------------------------
// Scan-based EP search

struct ScanOptions {
    int grid_n = 128;
    EPTolerances tol{};
    bool include_degeneracies = false;  // also report refined gap minima that are not EPs
    unsigned threads = 1;
};

namespace detail {

/// Matrix whose EPs are searched: a 2x2 flavour block or the full Bloch matrix.
struct ScanTarget {
    std::function<MatX(const Vec2&)> matrix;
    std::optional<int> flavour;
};

inline std::vector<ScanTarget> scan_targets(const ModelConfig& model) {
    std::vector<ScanTarget> out;
    if (model.block_diagonal()) {
        const auto js = flavour_couplings(model);
        for (int eta = 0; eta < 3; ++eta) {
            const Coupling3 j = js[eta];
            out.push_back({[j](const Vec2& k) { return MatX(flavour_block(j, k)); }, eta + 1});
        }
    } else {
        const auto tab = flavour_bond_table(model);
        out.push_back({[tab](const Vec2& k) { return MatX(bloch_hamiltonian(tab, k).entries); }, std::nullopt});
    }
    return out;
}

/// Nelder-Mead in two dimensions.
inline std::array<double, 2> nelder_mead(const std::function<double(double, double)>& f, double x0, double y0,
                                         double step, int max_iter, double xtol) {
    std::array<std::array<double, 2>, 3> p{{{x0, y0}, {x0 + step, y0}, {x0, y0 + step}}};
    std::array<double, 3> v{f(p[0][0], p[0][1]), f(p[1][0], p[1][1]), f(p[2][0], p[2][1])};
    for (int it = 0; it < max_iter; ++it) {
        std::array<int, 3> o{0, 1, 2};
        std::sort(o.begin(), o.end(), [&](int a, int b) { return v[a] < v[b]; });
        const auto best = p[o[0]], mid = p[o[1]], worst = p[o[2]];
        const double size = std::max(std::hypot(mid[0] - best[0], mid[1] - best[1]),
                                     std::hypot(worst[0] - best[0], worst[1] - best[1]));
        if (size < xtol) break;
        const std::array<double, 2> cen{(best[0] + mid[0]) / 2, (best[1] + mid[1]) / 2};
        auto at = [&](double s) {
            return std::array<double, 2>{cen[0] + s * (worst[0] - cen[0]), cen[1] + s * (worst[1] - cen[1])};
        };
        const auto xr = at(-1.0);
        const double fr = f(xr[0], xr[1]);
        if (fr < v[o[0]]) {
            const auto xe = at(-2.0);
            const double fe = f(xe[0], xe[1]);
            if (fe < fr) {
                p[o[2]] = xe;
                v[o[2]] = fe;
            } else {
                p[o[2]] = xr;
                v[o[2]] = fr;
            }
        } else if (fr < v[o[1]]) {
            p[o[2]] = xr;
            v[o[2]] = fr;
        } else {
            const auto xc = fr < v[o[2]] ? at(-0.5) : at(0.5);
            const double fc = f(xc[0], xc[1]);
            if (fc < std::min(fr, v[o[2]])) {
                p[o[2]] = xc;
                v[o[2]] = fc;
            } else {
                for (int q : {o[1], o[2]}) {
                    p[q] = {best[0] + 0.5 * (p[q][0] - best[0]), best[1] + 0.5 * (p[q][1] - best[1])};
                    v[q] = f(p[q][0], p[q][1]);
                }
            }
        }
    }
    const int b = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
    return p[b];
}

/// Newton iteration on the closest-pair discriminant D(theta) = (lambda_a - lambda_b)^2 = 0.
inline std::array<double, 2> newton_discriminant(const std::function<cd(double, double)>& disc, double x,
                                                 double y) {
    cd d = disc(x, y);
    for (int it = 0; it < 30 && std::abs(d) > 0.0; ++it) {
        const double h = 1e-7;
        const cd dx = (disc(x + h, y) - disc(x - h, y)) / (2 * h);
        const cd dy = (disc(x, y + h) - disc(x, y - h)) / (2 * h);
        const double det = dx.real() * dy.imag() - dy.real() * dx.imag();
        if (det == 0.0 || !std::isfinite(det)) break;
        const double sx = -(dy.imag() * d.real() - dy.real() * d.imag()) / det;
        const double sy = -(-dx.imag() * d.real() + dx.real() * d.imag()) / det;
        double lam = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 12; ++ls, lam *= 0.5) {
            const cd dn = disc(x + lam * sx, y + lam * sy);
            if (std::abs(dn) < std::abs(d)) {
                x += lam * sx;
                y += lam * sy;
                d = dn;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    return {x, y};
}

}  // namespace detail

/// Scan the fundamental cell on an n x n bond-phase grid, refine local minima of
/// gap/||H|| + (1 - overlap) and return the confirmed EPs (plus unconfirmed degeneracies on request).
inline std::vector<EPRecord> ep_scan(const ModelConfig& model, const ScanOptions& opt = {}) {
    model.validate();
    if (opt.grid_n < 32) throw ArgumentError("ep_scan: grid_n must be at least 32");
    const int n = opt.grid_n;
    const double h = 2.0 * pi / n;
    auto theta = [&](int i) { return -pi + h * (i + 0.5); };
    auto k_of = [](double t1, double t2) { return k_from_bond_phase(t1, t2); };

    std::vector<EPRecord> out;
    for (const auto& target : detail::scan_targets(model)) {
        auto objective = [&](double t1, double t2) {
            return most_defective_pair(target.matrix(k_of(t1, t2))).objective;
        };
        // Coarse grids of both objectives. The gap field uses one k-independent scale: a per-k
        // norm would cancel exactly for 2x2 blocks.
        std::vector<double> obj(static_cast<std::size_t>(n) * n), gap(obj.size()), norms(obj.size());
        parallel_for(static_cast<std::size_t>(n) * n, opt.threads, [&](std::size_t idx) {
            const int i = static_cast<int>(idx / n), jj = static_cast<int>(idx % n);
            const MatX m = target.matrix(k_of(theta(i), theta(jj)));
            obj[idx] = most_defective_pair(m).objective;
            gap[idx] = min_pair_gap(eigenvalues_only(m));
            norms[idx] = m.norm();
        });
        const double gscale = std::max(*std::max_element(norms.begin(), norms.end()), 1e-300);
        for (auto& g : gap) g /= gscale;
        auto gap_only = [&](double t1, double t2) {
            return min_pair_gap(eigenvalues_only(target.matrix(k_of(t1, t2)))) / gscale;
        };
        auto disc = [&](double t1, double t2) {
            return closest_pair_discriminant(eigenvalues_only(target.matrix(k_of(t1, t2))));
        };

        auto local_minima = [&](const std::vector<double>& field, double below) {
            std::vector<std::pair<int, int>> cand;
            for (int i = 0; i < n; ++i)
                for (int jj = 0; jj < n; ++jj) {
                    const double v = field[i * n + jj];
                    if (!(v < below)) continue;
                    bool is_min = true;
                    for (int di = -1; di <= 1 && is_min; ++di)
                        for (int dj = -1; dj <= 1 && is_min; ++dj) {
                            if (di == 0 && dj == 0) continue;
                            const int ii = (i + di + n) % n, jn = (jj + dj + n) % n;
                            const double w = field[ii * n + jn];
                            // Ties resolved by index so flat regions yield one candidate.
                            if (w < v || (w == v && ii * n + jn < i * n + jj)) is_min = false;
                        }
                    if (is_min) cand.emplace_back(i, jj);
                }
            return cand;
        };

        auto finish = [&](double t1, double t2) {
            const Vec2 k = k_of(t1, t2);
            const MatX m = target.matrix(k);
            const auto d = most_defective_pair(m);
            EPRecord r = detail::make_record(k, EPMethod::scan, target.flavour);
            r.gap = d.gap;
            r.overlap = d.overlap;
            r.residual = min_singular_value(m);
            r.confirmed = d.gap < opt.tol.gap_rel * std::max(m.norm(), 1e-300) && d.overlap > 1.0 - opt.tol.overlap_tol;
            return std::pair{r, d.objective};
        };

        std::vector<std::pair<EPRecord, double>> found;
        for (auto [i, jj] : local_minima(obj, 1.0 - 1e-3)) {
            auto p = detail::nelder_mead(objective, theta(i), theta(jj), h, 400, 1e-12);
            p = detail::newton_discriminant(disc, p[0], p[1]);
            auto rec = finish(p[0], p[1]);
            if (rec.first.confirmed) found.push_back(rec);
        }
        // Gap minima seed Newton directly: nearby zeros can share one basin of the overlap term.
        const auto gap_minima = local_minima(gap, 0.5);
        for (auto [i, jj] : gap_minima) {
            const auto p = detail::newton_discriminant(disc, theta(i), theta(jj));
            auto rec = finish(p[0], p[1]);
            if (rec.first.confirmed) found.push_back(rec);
        }
        if (opt.include_degeneracies) {
            for (auto [i, jj] : gap_minima) {
                auto p = detail::nelder_mead(gap_only, theta(i), theta(jj), h, 600, 1e-13);
                auto rec = finish(p[0], p[1]);
                if (rec.first.gap < opt.tol.gap_rel * 1e2 * std::max(target.matrix(rec.first.k).norm(), 1e-300))
                    found.push_back(rec);
            }
        }
        // Deduplicate within one grid step in bond-phase space, keeping the better objective.
        std::vector<std::pair<EPRecord, double>> kept;
        for (const auto& rec : found) {
            bool merged = false;
            for (auto& q : kept) {
                const double d1 = std::abs(wrap_angle(q.first.phase.theta1 - rec.first.phase.theta1));
                const double d2 = std::abs(wrap_angle(q.first.phase.theta2 - rec.first.phase.theta2));
                if (std::max(d1, d2) < h) {
                    if (rec.second < q.second) q = rec;
                    merged = true;
                    break;
                }
            }
            if (!merged) kept.push_back(rec);
        }
        for (auto& q : kept) out.push_back(q.first);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Fermi arcs

struct ArcPolyline {
    std::vector<Vec2> points;
    std::optional<int> flavour;
    std::array<std::optional<EPRecord>, 2> endpoint_eps{};
    double grid_step = 0.0;  // k-space diameter of one grid cell
};

namespace detail {

/// Zero contour of a periodic field sampled at theta = -pi + h*i, i = 0..n (closed grid).
/// Returns polylines as sequences of bond-phase points.
inline std::vector<std::vector<std::array<double, 2>>> marching_squares(
    const std::vector<double>& f, int n, double h) {
    const int m = n + 1;
    auto val = [&](int i, int j) { return f[i * m + j]; };
    auto pos = [&](int i) { return -pi + h * i; };
    // Edge ids: horizontal (i,j)-(i+1,j) -> 2*(i*m+j); vertical (i,j)-(i,j+1) -> 2*(i*m+j)+1.
    std::map<long, std::array<double, 2>> point;
    auto crossing = [&](int i0, int j0, int i1, int j1, long id) {
        if (point.count(id)) return;
        const double a = val(i0, j0), b = val(i1, j1);
        const double t = a / (a - b);
        point[id] = {pos(i0) + t * (pos(i1) - pos(i0)), pos(j0) + t * (pos(j1) - pos(j0))};
    };
    auto sgn = [](double x) { return x >= 0.0; };
    std::vector<std::pair<long, long>> segs;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const bool s00 = sgn(val(i, j)), s10 = sgn(val(i + 1, j)), s11 = sgn(val(i + 1, j + 1)),
                       s01 = sgn(val(i, j + 1));
            std::vector<long> ids;
            const long bottom = 2L * (i * m + j), top = 2L * (i * m + j + 1);
            const long left = 2L * (i * m + j) + 1, right = 2L * ((i + 1) * m + j) + 1;
            // Order around the cell: bottom, right, top, left.
            if (s00 != s10) {
                crossing(i, j, i + 1, j, bottom);
                ids.push_back(bottom);
            }
            if (s10 != s11) {
                crossing(i + 1, j, i + 1, j + 1, right);
                ids.push_back(right);
            }
            if (s01 != s11) {
                crossing(i, j + 1, i + 1, j + 1, top);
                ids.push_back(top);
            }
            if (s00 != s01) {
                crossing(i, j, i, j + 1, left);
                ids.push_back(left);
            }
            if (ids.size() == 2) {
                segs.emplace_back(ids[0], ids[1]);
            } else if (ids.size() == 4) {
                const double centre = 0.25 * (val(i, j) + val(i + 1, j) + val(i + 1, j + 1) + val(i, j + 1));
                if (sgn(centre) == s00) {
                    segs.emplace_back(ids[0], ids[1]);
                    segs.emplace_back(ids[2], ids[3]);
                } else {
                    segs.emplace_back(ids[0], ids[3]);
                    segs.emplace_back(ids[1], ids[2]);
                }
            }
        }
    std::map<long, std::vector<std::size_t>> by_edge;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        by_edge[segs[s].first].push_back(s);
        by_edge[segs[s].second].push_back(s);
    }
    std::vector<char> used(segs.size(), 0);
    std::vector<std::vector<std::array<double, 2>>> lines;
    auto other = [&](std::size_t s, long e) { return segs[s].first == e ? segs[s].second : segs[s].first; };
    for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
        if (used[s0]) continue;
        used[s0] = 1;
        std::vector<long> chain{segs[s0].first, segs[s0].second};
        for (int dir = 0; dir < 2; ++dir) {
            while (true) {
                const long e = chain.back();
                std::optional<std::size_t> nxt;
                for (auto s : by_edge[e])
                    if (!used[s]) nxt = s;
                if (!nxt) break;
                used[*nxt] = 1;
                chain.push_back(other(*nxt, e));
            }
            std::reverse(chain.begin(), chain.end());
        }
        std::vector<std::array<double, 2>> pts;
        for (long e : chain) pts.push_back(point[e]);
        lines.push_back(std::move(pts));
    }
    return lines;
}

}  // namespace detail

/// Arcs of purely imaginary eigenvalue pairs. Block-diagonal models: Im[A(k)A(-k)] = 0 with
/// Re[A(k)A(-k)] <= 0 per flavour. Coupled models: zero set of prod_i Re(lambda_i), keeping the
/// pieces that reach a confirmed EP.
inline std::vector<ArcPolyline> fermi_arc_trace(const ModelConfig& model, std::optional<int> flavour, int grid_n,
                                                unsigned threads = 1) {
    model.validate();
    if (grid_n < 8) throw ArgumentError("fermi_arc_trace: grid_n too small");
    const int n = grid_n, m = n + 1;
    const double h = 2.0 * pi / n;
    const double kstep = 2.0 * h;  // max k-space extent of a bond-phase cell
    auto theta = [&](int i) { return -pi + h * i; };
    std::vector<ArcPolyline> out;

    auto nearest_ep = [&](const Vec2& k, const std::vector<EPRecord>& eps) -> std::optional<EPRecord> {
        std::optional<EPRecord> best;
        double bd = 2.0 * kstep;
        for (const auto& e : eps) {
            const double d = cell_distance(k, e.k);
            if (d < bd) {
                bd = d;
                best = e;
            }
        }
        return best;
    };

    if (model.block_diagonal()) {
        const auto js = flavour_couplings(model);
        for (int eta = 1; eta <= 3; ++eta) {
            if (flavour && *flavour != eta) continue;
            const Coupling3 j = js[eta - 1];
            auto prod = [&](double t1, double t2) {
                const Vec2 k = k_from_bond_phase(t1, t2);
                return f_function(j, k) * f_function(j, Vec2(-k));
            };
            const auto [a, b, c] = j.moduli();
            if (a == 0.0 || b == 0.0 || c == 0.0) continue;
            const auto eps = ep_closed_form(j, eta).records;
            if (eps.empty()) continue;

            std::vector<cd> p(static_cast<std::size_t>(m) * m);
            parallel_for(p.size(), threads, [&](std::size_t idx) {
                p[idx] = prod(theta(static_cast<int>(idx / m)), theta(static_cast<int>(idx % m)));
            });
            double pmax = 0.0, imax = 0.0;
            for (const auto& z : p) {
                pmax = std::max(pmax, std::abs(z));
                imax = std::max(imax, std::abs(z.imag()));
            }
            if (imax <= 1e-12 * pmax) {
                // Hermitian flavour: A(-k) = conj A(k), the locus collapses onto the Dirac points.
                for (const auto& e : eps) {
                    ArcPolyline pl;
                    pl.points = {e.k};
                    pl.flavour = eta;
                    pl.endpoint_eps = {e, e};
                    pl.grid_step = kstep;
                    out.push_back(pl);
                }
                continue;
            }
            std::vector<double> im(p.size());
            for (std::size_t q = 0; q < p.size(); ++q) im[q] = p[q].imag();
            for (const auto& line : detail::marching_squares(im, n, h)) {
                // Split into runs with Re <= 0, cutting at interpolated Re = 0 crossings.
                std::vector<std::vector<std::array<double, 2>>> runs;
                std::vector<std::array<double, 2>> cur;
                double prev_re = 0.0;
                for (std::size_t q = 0; q < line.size(); ++q) {
                    const double re = prod(line[q][0], line[q][1]).real();
                    if (q > 0 && ((re <= 0.0) != (prev_re <= 0.0))) {
                        const double t = prev_re / (prev_re - re);
                        const std::array<double, 2> x{line[q - 1][0] + t * (line[q][0] - line[q - 1][0]),
                                                      line[q - 1][1] + t * (line[q][1] - line[q - 1][1])};
                        cur.push_back(x);
                        if (re > 0.0) {
                            runs.push_back(cur);
                            cur.clear();
                        }
                    }
                    if (re <= 0.0) cur.push_back(line[q]);
                    prev_re = re;
                }
                if (!cur.empty()) runs.push_back(cur);
                for (const auto& r : runs) {
                    if (r.size() < 2) continue;
                    ArcPolyline pl;
                    for (const auto& x : r) pl.points.push_back(k_from_bond_phase(x[0], x[1]));
                    pl.flavour = eta;
                    pl.grid_step = kstep;
                    pl.endpoint_eps = {nearest_ep(pl.points.front(), eps), nearest_ep(pl.points.back(), eps)};
                    out.push_back(std::move(pl));
                }
            }
        }
        return out;
    }

    ScanOptions so;
    so.grid_n = std::max(grid_n, 32);
    so.threads = threads;
    const auto eps = ep_scan(model, so);
    if (eps.empty()) return out;
    const auto tab = flavour_bond_table(model);
    std::vector<double> field(static_cast<std::size_t>(m) * m);
    parallel_for(field.size(), threads, [&](std::size_t idx) {
        const Vec2 k = k_from_bond_phase(theta(static_cast<int>(idx / m)), theta(static_cast<int>(idx % m)));
        const auto ev = eigenvalues_only(bloch_hamiltonian(tab, k).entries);
        double prod = 1.0;
        for (const auto& e : ev) prod *= e.real();
        field[idx] = prod;
    });
    for (const auto& line : detail::marching_squares(field, n, h)) {
        ArcPolyline pl;
        for (const auto& x : line) pl.points.push_back(k_from_bond_phase(x[0], x[1]));
        pl.grid_step = kstep;
        bool touches = false;
        for (const auto& pnt : pl.points) touches = touches || nearest_ep(pnt, eps).has_value();
        if (!touches) continue;
        pl.endpoint_eps = {nearest_ep(pl.points.front(), eps), nearest_ep(pl.points.back(), eps)};
        out.push_back(std::move(pl));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Skin-effect criterion

/// |J_x e^{i kx} + J_y| != |J_x e^{-i kx} + J_y| (lattice constant 1), beyond 1e-12.
inline bool skin_criterion(const Coupling3& j, double kx) {
    const cd e = std::polar(1.0, kx);
    return std::abs(std::abs(j.jx * e + j.jy) - std::abs(j.jx * std::conj(e) + j.jy)) > 1e-12;
}

inline bool skin_criterion_any(const Coupling3& j, int samples = 1024) {
    for (int q = 0; q < samples; ++q)
        if (skin_criterion(j, 2.0 * pi * q / samples)) return true;
    return false;
}

/// Largest |log(|J_x e^{ik}+J_y| / |J_x e^{-ik}+J_y|)| over a k grid: per-row decay rate of skin modes.
inline double skin_asymmetry(const Coupling3& j, int samples = 1024) {
    double best = 0.0;
    for (int q = 0; q < samples; ++q) {
        const cd e = std::polar(1.0, 2.0 * pi * (q + 0.5) / samples);
        const double p = std::abs(j.jx * e + j.jy), m = std::abs(j.jx * std::conj(e) + j.jy);
        if (p > 0.0 && m > 0.0) best = std::max(best, std::abs(std::log(p / m)));
    }
    return best;
}

// ---------------------------------------------------------------------------------------------
// Cross-flavour degeneracies

enum class DegeneracyKind { nonsingular_crossing, paired_second_order_EPs };

struct DegeneracyReport {
    Vec2 k = Vec2::Zero();
    DegeneracyKind kind = DegeneracyKind::nonsingular_crossing;
    std::vector<int> flavours;  // 1..3, the flavours sharing the degenerate eigenvalue
    cd energy{0.0};
};

/// Classify a cross-flavour eigenvalue degeneracy of a block-diagonal model. Eigenvectors of
/// different flavours live in orthogonal subspaces, so an EP needs the within-flavour pair
/// eps^+ = eps^- to coalesce as well.
inline DegeneracyReport classify_degeneracy(const ModelConfig& model, const Vec2& k, double tol = 1e-8) {
    model.validate();
    if (!model.block_diagonal()) throw ArgumentError("classify_degeneracy: model mixes flavours");
    const auto js = flavour_couplings(model);
    // Compare squared energies eps^2 = 4 A(k) A(-k): analytic in k, so an EP does not turn a
    // rounding-level residual into a square-root-sized splitting.
    std::array<cd, 3> sq{};
    double scale = 1.0;
    for (int eta = 0; eta < 3; ++eta) {
        sq[eta] = convention_factor * convention_factor * f_function(js[eta], k) * f_function(js[eta], Vec2(-k));
        scale = std::max(scale, std::abs(sq[eta]));
    }
    const double t = tol * scale;

    DegeneracyReport rep;
    rep.k = k;
    std::optional<cd> level;
    for (int a = 0; a < 3 && !level; ++a)
        for (int b = a + 1; b < 3 && !level; ++b)
            if (std::abs(sq[a] - sq[b]) < t) level = sq[a];
    if (!level) throw ArgumentError("classify_degeneracy: no cross-flavour degeneracy at k");
    rep.energy = principal_root(*level);
    for (int eta = 0; eta < 3; ++eta)
        if (std::abs(sq[eta] - *level) < t) rep.flavours.push_back(eta + 1);

    bool all_coalesce = true;
    for (int eta : rep.flavours) {
        const bool pair_merged = std::abs(sq[eta - 1]) < t;
        // Right eigenvectors (+-A(k), A(-k)) coincide only if exactly one of A(k), A(-k) vanishes.
        const cd ak = f_function(js[eta - 1], k), amk = f_function(js[eta - 1], Vec2(-k));
        const double fs = std::max(1.0, std::abs(ak) + std::abs(amk));
        const bool defective = (std::abs(ak) < tol * fs) != (std::abs(amk) < tol * fs);
        all_coalesce = all_coalesce && pair_merged && defective;
    }
    rep.kind = all_coalesce ? DegeneracyKind::paired_second_order_EPs : DegeneracyKind::nonsingular_crossing;
    return rep;
}

}  // namespace mnh
