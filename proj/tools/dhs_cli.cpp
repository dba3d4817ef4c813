// dhs_cli: batch front end for the dhs library.

#include "dhs/dhs.hpp"
#include "dhs/io.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <iostream>
#include <thread>

namespace {

using namespace dhs;

enum ExitCode { ok_exit = 0, usage_exit = 1, validation_exit = 2, numerical_exit = 3 };

struct Config {
    std::string command;
    std::string input;
    std::string z;
    std::string z_grid;
    std::optional<long> k0;
    std::optional<long> ell;
    std::optional<long> ell_minus;
    long ell_max = 400;
    long ell_step = 10;
    std::string alpha = "dirichlet";
    std::string beta = "dirichlet";
    double tol = 1e-10;
    std::string eps_schedule = "1e-2,1e-3,1e-4,1e-5,1e-6";
    std::string format = "csv";
    std::string output = "-";
    std::uint64_t seed = 20240917;
    bool no_timestamp = false;
    std::string range;
    int bins = 100;
    std::string variant = "whole";
    std::string window;
    bool half_line = false;
    int threads = 0;
};

struct Job {
    Config cfg;
    std::optional<HamiltonianSystem> sys;
    Table table;
    int exit = ok_exit;

    const HamiltonianSystem& s() const { return *sys; }
    Site k0() const { return cfg.k0.value_or(s().k_min()); }
    Site ell() const { return cfg.ell.value_or(s().k_max()); }
    BoundaryData alpha() const { return parse_boundary(cfg.alpha, s().m()); }
    BoundaryData beta() const { return parse_boundary(cfg.beta, s().m()); }
};

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<cplx> z_points(const Config& c) {
    if (!c.z_grid.empty()) return parse_z_grid(c.z_grid);
    if (!c.z.empty()) return {parse_z(c.z)};
    throw InputError("--z or --z-grid is required");
}

cplx single_z(const Config& c) {
    if (c.z.empty()) throw InputError("--z is required");
    const cplx z = parse_z(c.z);
    if (z.imag() == 0.0) throw InputError("Im z must be nonzero");
    return z;
}

std::pair<double, double> parse_pair(const std::string& s, const char* what) {
    const auto v = parse_list(s);
    if (v.size() != 2 || !(v[1] > v[0])) throw InputError(std::string(what) + " must be lo,hi with lo < hi");
    return {v[0], v[1]};
}

// Runs f(i) for i in [0, n) on a small pool; results are stored by index by the caller.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
    unsigned t = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
    t = std::min<unsigned>(t, static_cast<unsigned>(std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) f(i);
    };
    if (t <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

Cell num(double x) { return Cell(x); }
Cell integer(long long x) { return Cell(x); }
Cell text(std::string s) { return Cell(std::move(s)); }
Cell flag(bool b) { return Cell(b); }

// ------------------------------ commands -------------------------------------

void cmd_validate(Job& job) {
    const auto& s = job.s();
    Table& t = job.table;
    t.columns = {"check", "k", "kind", "value", "z_re", "z_im"};
    const Interval w = s.window();
    bool ok = true;
    const auto pw = validate_pointwise(s, w);
    for (const auto& v : pw.violations) {
        t.add_row({text("pointwise"), integer(v.k), text(v.kind), num(v.value), num(0.0), num(0.0)});
        ok = false;
    }
    std::vector<cplx> zs;
    if (!job.cfg.z.empty() || !job.cfg.z_grid.empty())
        zs = z_points(job.cfg);
    else
        zs.assign(default_z_sample().begin(), default_z_sample().end());
    for (cplx z : zs) {
        const auto wp = check_wellposed(s, z, w);
        for (const auto& v : wp.violations) {
            t.add_row({text("wellposed"), integer(v.k), text(v.kind), num(v.value), num(z.real()), num(z.imag())});
            ok = false;
        }
    }
    if (pw.ok()) {
        for (cplx z : zs) {
            const auto d = check_definiteness(s, z, w);
            t.add_row({text("definiteness"), integer(w.lo), text(d.definite ? "definite" : "not_definite"),
                       num(d.min_eig), num(z.real()), num(z.imag())});
            if (!d.definite) ok = false;
        }
    }
    t.add_meta("ok", flag(ok));
    t.add_meta("window_lo", integer(w.lo));
    t.add_meta("window_hi", integer(w.hi));
    std::cerr << "validate: " << (ok ? "ok" : "FAILED") << " (" << pw.violations.size() << " pointwise violations)\n";
    if (!ok) job.exit = validation_exit;
}

void cmd_eig(Job& job) {
    const auto& s = job.s();
    const Site k0 = job.k0(), ell = job.ell();
    const BoundaryData a = job.alpha(), b = job.beta();
    double lo = 0, hi = 0;
    std::vector<double> oracle;
    const bool dir = is_dirichlet(a) && is_dirichlet(b) && s.jacobi().has_value();
    if (dir) oracle = jacobi_bvp_oracle(s, std::min(k0, ell), std::max(k0, ell), a, b);
    if (!job.cfg.range.empty()) {
        std::tie(lo, hi) = parse_pair(job.cfg.range, "--range");
    } else if (dir && !oracle.empty()) {
        lo = oracle.front() - 0.5;
        hi = oracle.back() + 0.5;
    } else {
        throw InputError("eig: --range is required unless the system is Jacobi with Dirichlet data");
    }
    const auto ev = eig_via_detPhi_detailed(s, std::min(k0, ell), std::max(k0, ell), a, b, lo, hi);
    Table& t = job.table;
    t.columns = {"index", "lambda", "multiplicity", "sigma_min", "oracle", "abs_diff"};
    std::size_t j = 0;
    double worst = 0.0;
    for (const auto& e : ev)
        for (int r = 0; r < e.multiplicity; ++r, ++j) {
            const double o = j < oracle.size() ? oracle[j] : std::nan("");
            const double d = std::abs(e.lambda - o);
            if (j < oracle.size()) worst = std::max(worst, d);
            t.add_row({integer(static_cast<long long>(j)), num(e.lambda), integer(e.multiplicity), num(e.sigma_min),
                       num(o), num(j < oracle.size() ? d : std::nan(""))});
        }
    t.add_meta("k0", integer(k0));
    t.add_meta("ell", integer(ell));
    t.add_meta("range_lo", num(lo));
    t.add_meta("range_hi", num(hi));
    t.add_meta("count", integer(static_cast<long long>(j)));
    if (dir) {
        t.add_meta("oracle_count", integer(static_cast<long long>(oracle.size())));
        t.add_meta("max_abs_diff", num(worst));
    }
    std::cerr << "eig: " << j << " eigenvalues in [" << lo << ", " << hi << "]";
    if (dir) std::cerr << ", oracle count " << oracle.size() << ", max |diff| " << worst;
    std::cerr << "\n";
}

void cmd_mfun(Job& job) {
    const auto& s = job.s();
    const Site k0 = job.k0(), ell = job.ell();
    const BoundaryData a = job.alpha(), b = job.beta();
    const auto zs = z_points(job.cfg);
    for (cplx z : zs)
        if (z.imag() == 0.0) throw InputError("mfun: grid points need Im z != 0");
    const int m = s.m();
    Table& t = job.table;
    t.columns = {"index", "z_re", "z_im"};
    for (const auto& c : matrix_columns("M", m, m)) t.columns.push_back(c);
    for (const char* c : {"sigma_min", "rcond", "herglotz_min_eig", "herglotz_ok", "status"}) t.columns.push_back(c);
    std::vector<std::vector<Cell>> rows(zs.size());
    std::vector<int> failed(zs.size(), 0);
    parallel_for(zs.size(), job.cfg.threads, [&](std::size_t i) {
        const cplx z = zs[i];
        std::vector<Cell> r{integer(static_cast<long long>(i)), num(z.real()), num(z.imag())};
        try {
            const MFunction f = m_regular(s, make_context(z, k0, ell, a), b);
            const double h = min_herm_eig(double(f.ctx.sigma) * im_part(f.M));
            append_matrix(r, f.M);
            r.insert(r.end(), {num(f.sigma_min_betaPhi), num(f.rcond_betaPhi), num(h), flag(h > 0.0), text("ok")});
        } catch (const EigenvalueHit& e) {
            append_matrix(r, Mat::Constant(m, m, cplx(std::nan(""), std::nan(""))));
            r.insert(r.end(), {num(e.sigma_min), num(0.0), num(std::nan("")), flag(false), text("eigenvalue_hit")});
            failed[i] = 1;
        } catch (const NumericalError& e) {
            append_matrix(r, Mat::Constant(m, m, cplx(std::nan(""), std::nan(""))));
            r.insert(r.end(), {num(std::nan("")), num(0.0), num(std::nan("")), flag(false), text("numerical_error")});
            failed[i] = 1;
        }
        rows[i] = std::move(r);
    });
    std::size_t nfail = 0, nviol = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        nfail += static_cast<std::size_t>(failed[i]);
        if (!failed[i] && !std::get<bool>(rows[i][rows[i].size() - 2])) ++nviol;
        t.add_row(std::move(rows[i]));
    }
    t.add_meta("k0", integer(k0));
    t.add_meta("ell", integer(ell));
    t.add_meta("points", integer(static_cast<long long>(zs.size())));
    t.add_meta("failed", integer(static_cast<long long>(nfail)));
    t.add_meta("herglotz_violations", integer(static_cast<long long>(nviol)));
    std::cerr << "mfun: " << zs.size() << " points, " << nfail << " failed, " << nviol << " Herglotz violations\n";
    if (nfail) job.exit = numerical_exit;
}

std::vector<Site> ell_schedule(const Job& job) {
    const Site k0 = job.k0();
    if (job.cfg.ell) return {*job.cfg.ell};
    std::vector<Site> out;
    const Site step = std::max<Site>(1, job.cfg.ell_step);
    for (Site d = step; d <= job.cfg.ell_max; d += step) out.push_back(k0 + d);
    return out;
}

void cmd_disk(Job& job) {
    const auto& s = job.s();
    const cplx z = single_z(job.cfg);
    const Site k0 = job.k0();
    const BoundaryData a = job.alpha(), b = job.beta();
    const auto ells = ell_schedule(job);
    const int m = s.m();
    Table& t = job.table;
    t.columns = {"ell"};
    for (const auto& c : matrix_columns("M", m, m)) t.columns.push_back(c);
    for (const char* c : {"E_max_eig", "E_min_eig", "verdict", "diameter"}) t.columns.push_back(c);
    std::vector<std::vector<Cell>> rows(ells.size());
    std::vector<int> failed(ells.size(), 0);
    parallel_for(ells.size(), job.cfg.threads, [&](std::size_t i) {
        const DiskContext ctx = make_context(z, k0, ells[i], a);
        std::vector<Cell> r{integer(ells[i])};
        try {
            const FundamentalMatrix f = fundamental_for(s, ctx);
            const Mat hat = f.hat(ctx.ell);
            const Mat M = m_from_hat(s, hat, ctx.ell, b, z);
            const Mat E = e_at_site(s, hat * vstack(identity(m), M), ctx.ell, ctx.sigma);
            const double scale = std::max(1.0, op_norm(hat * vstack(identity(m), M)));
            append_matrix(r, M);
            r.insert(r.end(), {num(max_herm_eig(E)), num(min_herm_eig(E)),
                               text(to_string(disk_membership(E, job.cfg.tol * scale * scale))),
                               num(diameter_from_hat(s, hat, ctx.ell, z, 8))});
        } catch (const NumericalError&) {
            append_matrix(r, Mat::Constant(m, m, cplx(std::nan(""), std::nan(""))));
            r.insert(r.end(), {num(std::nan("")), num(std::nan("")), text("numerical_error"), num(std::nan(""))});
            failed[i] = 1;
        }
        rows[i] = std::move(r);
    });
    for (auto& r : rows) t.add_row(std::move(r));
    t.add_meta("z_re", num(z.real()));
    t.add_meta("z_im", num(z.imag()));
    t.add_meta("k0", integer(k0));
    std::cerr << "disk: " << ells.size() << " radii\n";
    if (std::count(failed.begin(), failed.end(), 1)) job.exit = numerical_exit;
}

void cmd_limit(Job& job) {
    const auto& s = job.s();
    const cplx z = single_z(job.cfg);
    const Site k0 = job.k0();
    const BoundaryData a = job.alpha();
    LimitOptions opt;
    opt.ell_max = job.cfg.ell_max;
    opt.ell_step = job.cfg.ell_step;
    opt.beta = job.beta();
    const int m = s.m();
    Table& t = job.table;
    t.columns = {"direction", "classification", "converged", "ell_final", "cauchy_gap", "diameter", "herglotz_ok"};
    for (const auto& c : matrix_columns("M", m, m)) t.columns.push_back(c);
    for (int dir : {+1, -1}) {
        const HalfLineLimit L = limit_m(s, z, k0, a, dir, opt);
        std::vector<Cell> r{integer(dir), text(to_string(L.classification)), flag(L.converged),
                            integer(L.ell_sequence.empty() ? k0 : L.ell_sequence.back()), num(L.cauchy_gap),
                            num(L.diameter_estimate), flag(L.herglotz_ok)};
        append_matrix(r, L.M_pm);
        t.add_row(std::move(r));
        std::cerr << "limit " << (dir > 0 ? "+" : "-") << ": " << to_string(L.classification)
                  << (L.converged ? "" : " (not converged)") << "\n";
    }
    t.add_meta("z_re", num(z.real()));
    t.add_meta("z_im", num(z.imag()));
    t.add_meta("k0", integer(k0));
}

KernelVariant variant_from(const std::string& s) {
    if (s == "whole") return KernelVariant::whole;
    if (s == "plus") return KernelVariant::half_plus;
    if (s == "minus") return KernelVariant::half_minus;
    throw InputError("--variant must be whole, plus or minus");
}

GreensKernel kernel_for(const Job& job, cplx z) {
    const auto& s = job.s();
    const Site k0 = job.k0();
    const BoundaryData a = job.alpha(), b = job.beta();
    const KernelVariant v = variant_from(job.cfg.variant);
    const Site ell_p = job.cfg.ell.value_or(k0 + job.cfg.ell_max);
    const Site ell_m = job.cfg.ell_minus.value_or(k0 - (ell_p - k0));
    Interval w{k0 - 10, k0 + 10};
    if (!job.cfg.window.empty()) {
        const auto [lo, hi] = parse_pair(job.cfg.window, "--window");
        w = {static_cast<Site>(lo), static_cast<Site>(hi)};
    }
    switch (v) {
        case KernelVariant::whole:
            return build_whole_kernel_from_endpoints(s, z, k0, a, ell_p, b, ell_m, b, w);
        case KernelVariant::half_plus:
            w.lo = std::max(w.lo, k0);
            return build_half_kernel_plus_from_endpoint(s, z, k0, a, ell_p, b, w);
        case KernelVariant::half_minus:
            w.hi = std::min(w.hi, k0);
            return build_half_kernel_minus_from_endpoint(s, z, k0, a, ell_m, b, w);
    }
    throw InputError("unknown kernel variant");
}

void cmd_green(Job& job) {
    const cplx z = single_z(job.cfg);
    const GreensKernel K = kernel_for(job, z);
    const int m = job.s().m();
    const Interval w = K.window;
    const DeltaReport d = delta_check(K, {w.lo + 1, w.hi - 1}, {w.lo + 1, w.hi - 1});
    Table& t = job.table;
    t.columns = {"k", "l"};
    for (const auto& c : matrix_columns("K", 2 * m, 2 * m)) t.columns.push_back(c);
    for (Site k = w.lo; k <= w.hi; ++k)
        for (Site l = w.lo; l <= w.hi; ++l) {
            std::vector<Cell> r{integer(k), integer(l)};
            append_matrix(r, K(k, l));
            t.add_row(std::move(r));
        }
    t.add_meta("variant", text(to_string(K.variant)));
    t.add_meta("z_re", num(z.real()));
    t.add_meta("z_im", num(z.imag()));
    t.add_meta("k0", integer(K.k0));
    t.add_meta("delta_residual", num(d.max_residual));
    t.add_meta("omega_constancy", num(omega_constancy(K)));
    std::cerr << "green: " << to_string(K.variant) << " kernel on [" << w.lo << ", " << w.hi
              << "], delta residual " << d.max_residual << "\n";
    if (!(d.max_residual <= job.cfg.tol)) job.exit = numerical_exit;
}

void cmd_solve(Job& job) {
    const cplx z = single_z(job.cfg);
    const GreensKernel K = kernel_for(job, z);
    const auto& s = job.s();
    const int m = s.m();
    const Interval src = K.source_range();
    std::mt19937_64 rng(job.cfg.seed);
    std::vector<Mat> f;
    for (Site l = src.lo; l <= src.hi; ++l) f.push_back(detail::random_complex(2 * m, 1, rng));
    const NonhomogeneousSolve sol = solve_nonhomogeneous(K, f);
    Table& t = job.table;
    t.columns = {"k"};
    for (const auto& c : matrix_columns("y", 2 * m, 1)) t.columns.push_back(c);
    t.columns.push_back("flux");
    std::vector<double> mags;
    const int side = K.variant == KernelVariant::half_minus ? -1 : +1;
    for (Site k = sol.range.lo; k <= sol.range.hi; ++k) {
        std::vector<Cell> r{integer(k)};
        append_matrix(r, sol.at(k));
        double flux = std::nan("");
        if (k + 1 <= sol.range.hi && (side > 0 ? k >= K.k0 : k <= K.k0)) {
            const Trajectory Y(m, K.z, k, {vstack(sol.at(k).topRows(m), sol.at(k + 1).bottomRows(m))},
                               sol.at(k).bottomRows(m));
            flux = op_norm(boundary_flux_of(K, Y, k, side));
            mags.push_back(flux);
        }
        r.push_back(num(flux));
        t.add_row(std::move(r));
    }
    if (side < 0) std::reverse(mags.begin(), mags.end());
    const FluxTrend ft = flux_trend(mags);
    t.add_meta("variant", text(to_string(K.variant)));
    t.add_meta("z_re", num(z.real()));
    t.add_meta("z_im", num(z.imag()));
    t.add_meta("seed", integer(static_cast<long long>(job.cfg.seed)));
    t.add_meta("max_residual", num(sol.max_residual));
    if (K.variant != KernelVariant::whole)
        t.add_meta("boundary_residual", num(boundary_residual(K, sol, job.alpha()).norm()));
    t.add_meta("energy_y", num(sol.energy_y));
    t.add_meta("l2_bound", num(sol.l2_bound));
    t.add_meta("l2_ok", flag(sol.l2_ok));
    t.add_meta("flux_log_slope", num(ft.log_slope));
    std::cerr << "solve: residual " << sol.max_residual << ", l2 " << sol.energy_y << " <= " << sol.l2_bound << "\n";
    if (!(sol.max_residual <= job.cfg.tol)) job.exit = numerical_exit;
}

void cmd_measure(Job& job) {
    const auto& s = job.s();
    const Site k0 = job.k0();
    const BoundaryData a = job.alpha(), b = job.beta();
    if (job.cfg.range.empty()) throw InputError("measure: --range is required");
    const auto [lo, hi] = parse_pair(job.cfg.range, "--range");
    const auto eps = parse_list(job.cfg.eps_schedule);
    const Site ell = job.ell();
    const bool half = job.cfg.half_line;
    LimitOptions lopt;
    lopt.ell_max = job.cfg.ell_max;
    lopt.ell_step = job.cfg.ell_step;
    lopt.beta = b;
    const int sign = half ? 1 : sigma_of(ell, k0, cplx(0, 1));
    auto m_eval = [&](cplx z) -> Mat {
        if (half) return limit_m(s, z, k0, a, +1, lopt).M_pm;
        return m_value(s, z, k0, ell, a, b);
    };
    MeasureOptions mo;
    mo.sign = sign;
    const SpectralMeasure mu = spectral_measure(m_eval, lo, hi, job.cfg.bins, eps, mo);
    const int m = s.m();
    Table& t = job.table;
    t.columns = {"bin", "lo", "hi"};
    for (const auto& c : matrix_columns("Omega", m, m)) t.columns.push_back(c);
    t.columns.push_back("trace");
    t.columns.push_back("first_moment");
    for (std::size_t i = 0; i < mu.increments.size(); ++i) {
        std::vector<Cell> r{integer(static_cast<long long>(i)), num(mu.grid[i] + mu.delta),
                            num(mu.grid[i + 1] + mu.delta)};
        append_matrix(r, mu.increments[i]);
        r.push_back(num(mu.increments[i].trace().real()));
        r.push_back(num(mu.first_moments[i]));
        t.add_row(std::move(r));
    }
    t.add_meta("source", text(half ? "half_line" : "regular"));
    t.add_meta("delta", num(mu.delta));
    t.add_meta("eps_final", num(eps.back()));
    t.add_meta("max_change", num(mu.max_change));
    t.add_meta("converged", flag(mu.converged));
    t.add_meta("clipped", integer(static_cast<long long>(mu.clipped)));
    t.add_meta("total_trace", num(mu.total_trace()));
    std::cerr << "measure: total trace " << mu.total_trace() << (mu.converged ? "" : " (not converged)") << "\n";
}

int run(Job& job) {
    const std::map<std::string, void (*)(Job&)> commands{
        {"validate", cmd_validate}, {"eig", cmd_eig},     {"mfun", cmd_mfun},   {"disk", cmd_disk},
        {"limit", cmd_limit},       {"green", cmd_green}, {"solve", cmd_solve}, {"measure", cmd_measure}};
    const auto it = commands.find(job.cfg.command);
    if (it == commands.end()) throw InputError("unknown command: " + job.cfg.command);
    if (job.cfg.format != "csv" && job.cfg.format != "json") throw InputError("--format must be csv or json");
    job.sys.emplace(load_system(job.cfg.input));
    it->second(job);
    const std::string ts = job.cfg.no_timestamp ? "" : timestamp();
    auto write = [&](std::ostream& os) {
        if (job.cfg.format == "csv")
            write_csv(os, job.table, ts);
        else
            write_json(os, job.table, ts);
    };
    if (job.cfg.output == "-") {
        write(std::cout);
    } else {
        std::ofstream out(job.cfg.output);
        if (!out) throw InputError("cannot write " + job.cfg.output);
        write(out);
    }
    return job.exit;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dhs_cli: Weyl-Titchmarsh computations for discrete Hamiltonian systems"};
    Config cfg;
    std::string positional;
    app.add_option("command_pos", positional, "validate|eig|mfun|disk|limit|green|solve|measure");
    app.add_option("--command", cfg.command, "command (alternative to the positional form)");
    app.add_option("--input", cfg.input, "coefficient file (JSON)")->required();
    app.add_option("--z", cfg.z, "spectral parameter re,im");
    app.add_option("--z-grid", cfg.z_grid, "grid re0,re1,nre,im0,im1,nim");
    app.add_option("--k0", cfg.k0, "base site (default: first site of the window)");
    app.add_option("--ell", cfg.ell, "far site (default: last site of the window)");
    app.add_option("--ell-minus", cfg.ell_minus, "left far site for whole-line kernels");
    app.add_option("--ell-max", cfg.ell_max, "distance limit for schedules and half-line limits");
    app.add_option("--ell-step", cfg.ell_step, "step of the ell schedule");
    app.add_option("--alpha", cfg.alpha, "boundary data at k0: dirichlet, neumann or JSON m x 2m");
    app.add_option("--beta", cfg.beta, "boundary data at ell: dirichlet, neumann or JSON m x 2m");
    app.add_option("--tol", cfg.tol, "acceptance tolerance for certificates");
    app.add_option("--eps-schedule", cfg.eps_schedule, "decreasing epsilons for the measure");
    app.add_option("--format", cfg.format, "csv or json");
    app.add_option("--output", cfg.output, "output file, - for stdout");
    app.add_option("--seed", cfg.seed, "seed for the beta family and random right-hand sides");
    app.add_flag("--no-timestamp", cfg.no_timestamp, "omit the timestamp header line");
    app.add_option("--range", cfg.range, "real interval lo,hi (eig, measure)");
    app.add_option("--bins", cfg.bins, "number of measure bins");
    app.add_option("--variant", cfg.variant, "kernel variant: whole, plus, minus");
    app.add_option("--window", cfg.window, "kernel window lo,hi");
    app.add_flag("--half-line", cfg.half_line, "measure of the half-line M_+ instead of the regular M");
    app.add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok_exit : usage_exit;
    }
    if (cfg.command.empty()) cfg.command = positional;
    if (cfg.command.empty()) {
        std::cerr << "error: a command is required\n";
        return usage_exit;
    }
    Job job{cfg, std::nullopt, {}, ok_exit};
    try {
        return run(job);
    } catch (const SteppingError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return numerical_exit;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return numerical_exit;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return usage_exit;
    } catch (const DomainError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return usage_exit;
    }
}
