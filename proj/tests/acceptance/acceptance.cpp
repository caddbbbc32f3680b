#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "../support.hpp"
#include "mnh/ep_analysis.hpp"
#include "mnh/ribbon.hpp"

using namespace mnh;
using testing_support::Rng;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Clock {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Test-side oracles, written from the lattice definitions rather than the library helpers.

cd oracle_f(const Coupling3& j, const Vec2& k) {
    const double t1 = 0.5 * k.x() + 0.5 * std::sqrt(3.0) * k.y();
    const double t2 = -0.5 * k.x() + 0.5 * std::sqrt(3.0) * k.y();
    return j.jx * std::exp(cd(0.0, t1)) + j.jy * std::exp(cd(0.0, t2)) + j.jz;
}

std::vector<cd> oracle_k_family(const Coupling3& j, cd kc, const Vec2& k) {
    const std::array<Coupling3, 3> js{Coupling3{j.jx + kc, j.jy, j.jz}, Coupling3{j.jx, j.jy + kc, j.jz},
                                      Coupling3{j.jx, j.jy, j.jz + kc}};
    std::vector<cd> out;
    for (const auto& je : js) {
        const cd s = 2.0 * std::sqrt(oracle_f(je, k) * oracle_f(je, Vec2(-k)));
        out.push_back(s);
        out.push_back(-s);
    }
    return out;
}

double residual_of(const MatX& h, const Spectrum& s) {
    double r = 0.0;
    const double scale = std::max(1.0, h.norm());
    for (std::size_t c = 0; c < s.size(); ++c) {
        const VecX v = s.right_vectors.col(static_cast<Eigen::Index>(c));
        r = std::max(r, (h * v - s.eigenvalues[c] * v).norm() / (scale * v.norm()));
    }
    return r;
}

std::vector<ModelConfig> variants(Rng& rng, bool real) {
    auto c = [&] { return real ? cd(rng.uniform(-0.6, 0.6)) : rng.complex(0.6); };
    const Coupling3 j = real ? rng.real_coupling() : rng.coupling();
    return {ModelConfig::pure(j), ModelConfig::k_model(j, c()), ModelConfig::gamma_model(j, c()),
            ModelConfig::mag_model(j, rng.uniform(-0.8, 0.8),
                                   Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)))};
}

double max_abs_imag(const std::vector<cd>& v) {
    double m = 0.0;
    for (const auto& z : v) m = std::max(m, std::abs(z.imag()));
    return m;
}

const cd e3 = std::polar(1.0, pi / 3), e6 = std::polar(1.0, pi / 6);

// ---------------------------------------------------------------------------------------------

Outcome closed_form_k_family() {
    constexpr double tol = 1e-10, limit = 5.0;
    Clock clk;
    Rng rng(101);
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
        const Coupling3 j = rng.coupling();
        const cd kc = rng.polar(0.1, 1.0);
        const auto m = ModelConfig::k_model(j, kc);
        for (int q = 0; q < 20; ++q) {
            const Vec2 k = rng.k();
            const auto ev = eig(MatX(bloch_hamiltonian(m, k).entries)).eigenvalues;
            worst = std::max(worst, testing_support::multiset_gap(ev, oracle_k_family(j, kc, k)));
        }
    }
    const double t = clk.seconds();
    return {worst <= tol && t < limit,
            fmt("50 sets x 20 k: max |E - 2sqrt(A(k)A(-k))| = %.3g (tol %.0e), %.2f s (limit %.0f s)", worst, tol, t,
                limit)};
}

Outcome field_bands() {
    constexpr double tol = 1e-10;
    Rng rng(102);
    const auto m = ModelConfig::mag_model({1.0, 1.0, 1.0}, 0.0, Vec3(0, 0, 0.7));
    double worst = 0.0;
    for (int q = 0; q < 100; ++q) {
        const Vec2 k = rng.k();
        const double f = std::abs(oracle_f({1.0, 1.0, 1.0}, k));
        const std::vector<cd> want{2 * f, -2 * f, 2 * (0.7 + f), 2 * (0.7 - f), -2 * (0.7 + f), -2 * (0.7 - f)};
        const auto ev = eig(MatX(bloch_hamiltonian(m, k).entries)).eigenvalues;
        worst = std::max(worst, testing_support::multiset_gap(ev, want));
    }
    const auto ev0 = eig(MatX(bloch_hamiltonian(m, Vec2::Zero()).entries)).eigenvalues;
    const double d0 = testing_support::multiset_gap(ev0, {6.0, -6.0, 7.4, -4.6, -7.4, 4.6});
    return {worst <= tol && d0 <= tol,
            fmt("100 k: max dev %.3g; k=0 multiset {+-6, +-7.4, +-4.6} dev %.3g (tol %.0e)", worst, d0, tol)};
}

Outcome antisymmetry() {
    constexpr double tol = 1e-14;
    Rng rng(103);
    double worst = 0.0;
    int checked = 0;
    for (int s = 0; s < 5; ++s)
        for (const auto& m : variants(rng, false))
            for (int q = 0; q < 100; ++q) {
                const Vec2 k = rng.k();
                const Mat6 a = bloch_hamiltonian(m, k).entries;
                const Mat6 b = bloch_hamiltonian(m, Vec2(-k)).entries;
                worst = std::max(worst, (a + b.transpose()).cwiseAbs().maxCoeff());
                ++checked;
            }
    return {worst <= tol, fmt("%d matrices over 4 variants: max |H(k) + H(-k)^T| = %.3g (tol %.0e)", checked, worst, tol)};
}

Outcome ep_certification() {
    constexpr double f_tol = 1e-10, overlap_tol = 1e-4, limit = 60.0;
    const double k_tol = 2 * pi / 256;
    Clock clk;
    const Coupling3 j{2.0, 1.0, 2.5 * e3};
    const auto cf = ep_closed_form(j).records;
    double worst_f = 0.0;
    for (const auto& r : cf)
        worst_f = std::max(worst_f, std::min(std::abs(oracle_f(j, r.k)), std::abs(oracle_f(j, Vec2(-r.k)))));

    ScanOptions so;
    so.grid_n = 256;
    const auto scan = ep_scan(ModelConfig::pure(j), so);
    double worst_k = 0.0, worst_overlap = 1.0, worst_spurious = 0.0;
    int confirmed = 0;
    for (const auto& r : cf) {
        double d = 1e300;
        for (const auto& s : scan) d = std::min(d, cell_distance(r.k, s.k));
        worst_k = std::max(worst_k, d);
    }
    for (const auto& s : scan) {
        if (!s.confirmed) continue;
        ++confirmed;
        worst_overlap = std::min(worst_overlap, s.overlap);
        double d = 1e300;
        for (const auto& r : cf) d = std::min(d, cell_distance(r.k, s.k));
        worst_spurious = std::max(worst_spurious, d);
    }
    const double t = clk.seconds();
    const bool pass = cf.size() == 4 && worst_f < f_tol && worst_k <= k_tol && confirmed > 0 &&
                      worst_overlap > 1 - overlap_tol && worst_spurious <= k_tol && t < limit;
    return {pass, fmt("%zu closed-form EPs, max |f(+-k)| = %.3g (tol %.0e); scan 256^2: %d confirmed, max distance "
                      "%.3g and farthest scan point %.3g (tol 2pi/256 = %.4f), min overlap 1 - %.3g (tol %.0e); %.1f s "
                      "(limit %.0f s)",
                      cf.size(), worst_f, f_tol, confirmed, worst_k, worst_spurious, k_tol, 1 - worst_overlap,
                      overlap_tol, t, limit)};
}

Outcome torus_oracle() {
    constexpr double tol = 1e-8;
    constexpr int w = 24;
    Rng rng(105);
    double worst = 0.0;
    int runs = 0;
    for (int s = 0; s < 2; ++s)
        for (const auto& m : variants(rng, false))
            for (int q = 0; q < 3; ++q) {
                const double kx = rng.uniform(-pi, pi);
                const auto ev = ribbon_spectrum({m, w, BoundaryY::periodic, kx}).eigenvalues;
                std::vector<cd> bloch;
                for (int n = 0; n < w; ++n) {
                    const auto b = testing_support::reference_eigenvalues(
                        MatX(bloch_hamiltonian(m, Vec2(kx, 4.0 * pi * n / (std::sqrt(3.0) * w))).entries));
                    bloch.insert(bloch.end(), b.begin(), b.end());
                }
                worst = std::max(worst, testing_support::multiset_gap(ev, bloch));
                ++runs;
            }
    return {worst <= tol, fmt("w=%d, %d strips over 4 variants: max multiset distance %.3g (tol %.0e)", w, runs, worst, tol)};
}

Outcome hermitian_ribbon() {
    constexpr double cloud_tol = 1e-2, limit = 180.0;
    constexpr int w = 52, nkx = 200;
    Clock clk;
    const auto sw = sweep(ModelConfig::pure({1.0, 1.0, 1.0}), w, symmetric_kx_grid(nkx));
    int outside = 0, edge = 0, misplaced = 0, odd_counts = 0, not_in_gap = 0;
    for (std::size_t q = 0; q < sw.kx_grid.size(); ++q) {
        const auto& cloud = (*sw.pbc_reference)[q];
        // Flat zero band of a zigzag edge exists where |1 + e^{i kx}| < 1.
        const bool band = std::abs(1.0 + std::exp(cd(0.0, sw.kx_grid[q]))) < 1.0;
        int here = 0;
        for (const auto& r : sw.records[q]) {
            const double e = std::abs(r.eigenvalue);
            if (is_edge(r.cls)) {
                ++here;
                if (e >= cloud.min_abs()) ++not_in_gap;
            } else if (cloud.distance(e) > cloud_tol) {
                ++outside;
            }
        }
        edge += here;
        if (here > 0 && !band) ++misplaced;
        if (here % 6 != 0) ++odd_counts;
    }
    const double t = clk.seconds();
    const bool pass = outside == 0 && misplaced == 0 && odd_counts == 0 && not_in_gap == 0 && edge > 0 && t < limit;
    return {pass, fmt("w=%d, %d kx: %d non-edge states off the PBC cloud (tol %.0e); %d edge states, %d outside the "
                      "zero-band window, %d above the bulk gap, %d kx with a count not a multiple of 6; %.1f s (limit "
                      "%.0f s)",
                      w, nkx, outside, cloud_tol, edge, misplaced, not_in_gap, odd_counts, t, limit)};
}

Outcome nhse_matrix() {
    constexpr int w = 52, nkx = 64;
    const double step = 2 * pi / nkx;
    Clock clk;
    const auto kx = symmetric_kx_grid(nkx);
    auto run = [&](const ModelConfig& m) { return nhse_summary(sweep(m, w, kx)); };

    const auto k = run(ModelConfig::k_model({2.0, 1.0, 2.5 * e3}, 0.4));
    const auto g = run(ModelConfig::gamma_model({2.0, 1.0, 2.5 * e3}, 0.4));
    const auto mb = run(ModelConfig::mag_model({1.0, 1.0, e3}, 0.5, Vec3(0, 0, 0.7)));
    const auto mc = run(ModelConfig::mag_model({e3, e6, 1.0}, 0.5, Vec3(0, 0, 0.7)));

    // Coexistence: at the most localized k_x of the Gamma ribbon some bulk states stay extended.
    double g_ext = 0.0, g_best = -1.0;
    for (const auto& f : g.per_kx)
        if (f.bottom + f.top > g_best) {
            g_best = f.bottom + f.top;
            g_ext = f.extended;
        }
    auto near = [&](double target) {
        double d = 1e300;
        for (double f : mc.flips) d = std::min(d, std::abs(wrap_angle(f - target)));
        return d;
    };
    const double d0 = near(0.0), dpi = near(pi);
    const bool ok_k = !k.nhse, ok_g = g.nhse && g_ext > 0.0, ok_mb = !mb.nhse;
    const bool ok_mc = mc.nhse && mc.flips.size() == 2 && d0 <= step && dpi <= step;
    std::ostringstream flips;
    for (double f : mc.flips) flips << " " << fmt("%.4f", f);
    return {ok_k && ok_g && ok_mb && ok_mc,
            fmt("w=%d, %d kx, presence > 5%%: K %s (%.3f) | Gamma %s (%.3f, extended share %.2f at the peak k_x) | "
                "Mag(1,1,e^{i pi/3}) %s (%.3f) | Mag(e^{i pi/3},e^{i pi/6},1) %s (%.3f), flips [%s ] off 0 by %.3g and "
                "pi by %.3g (tol %.4f); %.0f s",
                w, nkx, ok_k ? "ok" : "WRONG", k.bulk_localized_fraction, ok_g ? "ok" : "WRONG",
                g.bulk_localized_fraction, g_ext, ok_mb ? "ok" : "WRONG", mb.bulk_localized_fraction,
                ok_mc ? "ok" : "WRONG", mc.bulk_localized_fraction, flips.str().c_str(), d0, dpi, step, clk.seconds())};
}

/// Largest per-row decay rate |log(|J_x e^{ik} + J_y| / |J_x e^{-ik} + J_y|)| over the swept k_x.
double swept_asymmetry(const Coupling3& j, const std::vector<double>& kx) {
    double best = 0.0;
    for (double k : kx) {
        const cd e = std::exp(cd(0.0, k));
        best = std::max(best, std::abs(std::log(std::abs(j.jx * e + j.jy) / std::abs(j.jx * std::conj(e) + j.jy))));
    }
    return best;
}

Outcome skin_theorem() {
    constexpr int samples = 10000, w = 24, nkx = 8;
    constexpr double required = 0.99, marginal_decay = 4.0, marginal_fraction = 0.1;
    Clock clk;
    Rng rng(108);
    SweepOptions opt;
    opt.ky_samples = 64;
    const auto kx = symmetric_kx_grid(nkx);
    int agree = 0, non_marginal = 0, positives = 0;
    for (int s = 0; s < samples; ++s) {
        // Half generic draws; half with J_x, J_y and K sharing one phase, where the criterion is false.
        Coupling3 j;
        cd kc;
        if (s % 2 == 0) {
            j = rng.coupling(0.5, 2.0);
            kc = rng.polar(0.1, 1.0);
        } else {
            const cd u = std::polar(1.0, rng.uniform(-pi, pi));
            j = {rng.uniform(0.5, 2.0) * u, rng.uniform(0.5, 2.0) * u, rng.polar(0.5, 2.0)};
            kc = rng.uniform(0.1, 1.0) * u;
        }
        const auto m = ModelConfig::k_model(j, kc);
        bool crit = false;
        double asym = 0.0, seen = 0.0;
        for (const auto& je : flavour_couplings(m)) {
            crit = crit || skin_criterion_any(je);
            asym = std::max(asym, skin_asymmetry(je));
            seen = std::max(seen, swept_asymmetry(je, kx));
        }
        positives += crit;
        const auto sum = nhse_summary(sweep(m, w, kx, opt));
        if (sum.nhse == crit) {
            ++agree;
            continue;
        }
        // Marginal: the decay across the strip at the swept k_x is too weak to register, or the
        // false positive is barely above the presence threshold.
        const bool marginal = crit ? seen * w < marginal_decay : sum.bulk_localized_fraction < marginal_fraction;
        non_marginal += !marginal;
        const auto wide = nhse_summary(sweep(m, 52, symmetric_kx_grid(64), opt));
        std::cout << fmt("  disagreement #%d: criterion %d, skin asymmetry %.4f (swept k_x %.4f, x w = %.2f), "
                         "bulk-localized fraction %.4f, %s; at w=52 with 64 k_x: nhse %d (fraction %.4f)\n",
                         s, crit, asym, seen, seen * w, sum.bulk_localized_fraction,
                         marginal ? "marginal" : "NOT marginal", wide.nhse, wide.bulk_localized_fraction);
    }
    const double rate = static_cast<double>(agree) / samples;
    return {rate >= required && non_marginal == 0,
            fmt("%d K-model sets (%d with the criterion true), w=%d, %d kx: agreement %.4f (required %.2f), %d "
                "non-marginal disagreements; %.0f s",
                samples, positives, w, nkx, rate, required, non_marginal, clk.seconds())};
}

std::string spectrum_bytes(const Spectrum& s) {
    std::string b(reinterpret_cast<const char*>(s.eigenvalues.data()), s.eigenvalues.size() * sizeof(cd));
    b.append(reinterpret_cast<const char*>(s.right_vectors.data()),
             static_cast<std::size_t>(s.right_vectors.size()) * sizeof(cd));
    return b;
}

std::string sweep_bytes(const SweepResult& sw) {
    std::string b;
    for (const auto& ks : sw.records)
        for (const auto& r : ks) {
            b.append(reinterpret_cast<const char*>(&r.eigenvalue), sizeof r.eigenvalue);
            b.append(reinterpret_cast<const char*>(&r.mean_row), sizeof r.mean_row);
            b.append(reinterpret_cast<const char*>(&r.imbalance), sizeof r.imbalance);
            b.push_back(static_cast<char>(r.cls));
        }
    return b;
}

Outcome solver_contract() {
    constexpr double small_tol = 1e-10, large_tol = 1e-8;
    Rng rng(109);
    double small = 0.0, large = 0.0;
    for (int s = 0; s < 5; ++s)
        for (const auto& m : variants(rng, false))
            for (int q = 0; q < 20; ++q) {
                const MatX h = bloch_hamiltonian(m, rng.k()).entries;
                small = std::max(small, residual_of(h, eig(h)));
            }
    const std::vector<ModelConfig> strips{
        ModelConfig::pure({1.0, 1.0, 1.0}), ModelConfig::k_model({2.0, 1.0, 2.5 * e3}, 0.4),
        ModelConfig::gamma_model({2.0, 1.0, 2.5 * e3}, 0.4), ModelConfig::mag_model({1.0, 1.0, e3}, 0.5, Vec3(0, 0, 0.7)),
        ModelConfig::mag_model({e3, e6, 1.0}, 0.5, Vec3(0, 0, 0.7))};
    for (const auto& m : strips)
        for (double kx : symmetric_kx_grid(6)) {
            const RibbonSpec spec{m, 52, BoundaryY::open, kx};
            large = std::max(large, residual_of(build_ribbon(spec), ribbon_spectrum(spec)));
        }

    const MatX h = build_ribbon({strips[2], 52, BoundaryY::open, 0.7});
    const bool eig_same = spectrum_bytes(eig(h, true)) == spectrum_bytes(eig(h, true));
    const auto kx = symmetric_kx_grid(8);
    const bool sweep_same = sweep_bytes(sweep(strips[4], 52, kx)) == sweep_bytes(sweep(strips[4], 52, kx)) &&
                            sweep_bytes(sweep(strips[1], 52, kx)) == sweep_bytes(sweep(strips[1], 52, kx));
    return {small <= small_tol && large <= large_tol && eig_same && sweep_same,
            fmt("max residual n=6: %.3g (tol %.0e), n=312: %.3g (tol %.0e); repeated eig bytes %s, repeated sweep "
                "bytes %s",
                small, small_tol, large, large_tol, eig_same ? "identical" : "DIFFER", sweep_same ? "identical" : "DIFFER")};
}

Outcome hermitian_reality() {
    constexpr double tol = 1e-9;
    Rng rng(110);
    std::map<std::string, double> worst;
    for (int s = 0; s < 3; ++s)
        for (const auto& m : variants(rng, true)) {
            double& x = worst[std::string(to_string(m.variant))];
            for (int q = 0; q < 50; ++q) x = std::max(x, max_abs_imag(eig(MatX(bloch_hamiltonian(m, rng.k()).entries)).eigenvalues));
            for (const auto& ks : sweep(m, 52, symmetric_kx_grid(16)).records)
                for (const auto& r : ks) x = std::max(x, std::abs(r.eigenvalue.imag()));
            x = std::max(x, max_abs_imag(ribbon_spectrum({m, 24, BoundaryY::periodic, rng.uniform(-pi, pi)}).eigenvalues));
        }
    double all = 0.0;
    std::string parts;
    for (const auto& [name, x] : worst) {
        all = std::max(all, x);
        parts += fmt(" %s %.2g", name.c_str(), x);
    }
    return {all < tol, fmt("real couplings, Bloch + open w=52 + periodic w=24: max |Im E|%s (tol %.0e)", parts.c_str(), tol)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> picks;
    app.add_option("--criterion", picks, "Criterion numbers (default: all)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"K-family closed form", closed_form_k_family},
        {"field-only band formula", field_bands},
        {"Majorana antisymmetry", antisymmetry},
        {"EP certification", ep_certification},
        {"torus oracle", torus_oracle},
        {"Hermitian ribbon vs PBC cloud", hermitian_ribbon},
        {"NHSE presence matrix", nhse_matrix},
        {"skin-criterion agreement", skin_theorem},
        {"eigensolver contract", solver_contract},
        {"Hermitian-limit reality", hermitian_reality},
    };
    if (picks.empty())
        for (int c = 1; c <= 10; ++c) picks.push_back(c);

    int failed = 0;
    for (int c : picks) {
        const auto& [name, body] = criteria[c - 1];
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c << " (" << name << "): " << o.detail << std::endl;
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
