#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ustm/decoder.hpp"
#include "ustm/optimizer.hpp"
#include "ustm/perfindex.hpp"
#include "ustm/simulator.hpp"

namespace {

// "a:b:step" in dB, half-open [a, b); a bare "a" is the single point a.
std::vector<double> parse_snr_range(const std::string &range) {
    const auto c1 = range.find(':');
    if (c1 == std::string::npos)
        return {std::stod(range)};
    const auto c2 = range.find(':', c1 + 1);
    if (c2 == std::string::npos)
        throw ustm::InvalidParams("snr range must be a:b:step or a single value");
    const double a = std::stod(range.substr(0, c1));
    const double b = std::stod(range.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(range.substr(c2 + 1));
    if (step <= 0.0 || b < a)
        throw ustm::InvalidParams("snr range needs step > 0 and b >= a");
    std::vector<double> v;
    for (double x = a; x < b - 1e-12; x += step)
        v.push_back(x);
    if (v.empty())
        v.push_back(a);
    return v;
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

int cmd_design(int m, int n, int l, int blocks_exp, double rho1_db, double rho2_db,
               const std::string &calibrate_path, int restarts, int max_iters, double step,
               double tol, uint64_t seed, bool joint, const std::string &out,
               const std::string &trace_path) {
    ustm::DesignConfig cfg;
    cfg.M = m;
    cfg.N = n;
    cfg.L = l;
    cfg.b = blocks_exp;
    cfg.restarts = restarts;
    cfg.max_iters = max_iters;
    cfg.step = step;
    cfg.tol = tol;
    cfg.seed = seed;
    cfg.joint = joint;
    if (!calibrate_path.empty()) {
        const ustm::Constellation ref = ustm::load(calibrate_path);
        cfg.window = ustm::calibrate_snr(ref, n);
        std::fprintf(stderr, "calibrated window: %.3f dB .. %.3f dB\n",
                     10.0 * std::log10(cfg.window.rho1), 10.0 * std::log10(cfg.window.rho2));
    } else {
        cfg.window = {db_to_linear(rho1_db), db_to_linear(rho2_db)};
    }

    const ustm::DesignResult res = ustm::design(cfg);
    ustm::save(res.code, out);
    if (!trace_path.empty()) {
        std::ofstream tf(trace_path);
        if (!tf)
            throw ustm::Error("cannot open " + trace_path);
        res.trace.write_csv(tf);
    }
    std::printf("zeta %.12g\n", res.zeta_value);
    std::printf("R %.12g\n", ustm::spectral_efficiency(res.code));
    std::printf("diversity_product %.12g\n", ustm::diversity_product(res.code));
    return 0;
}

int cmd_simulate(const std::string &code_path, int n, const std::string &snr_spec,
                 long long frames, uint64_t seed, const std::string &decoder,
                 const std::string &out) {
    const ustm::Constellation c = ustm::load(code_path);
    ustm::SimConfig cfg;
    cfg.n_rx = n;
    cfg.snr_db = parse_snr_range(snr_spec);
    cfg.frames = frames;
    cfg.seed = seed;
    cfg.decoder = decoder == "ml" ? ustm::DecoderKind::Ml : ustm::DecoderKind::Sphere;
    const ustm::SimResult res = ustm::run_monte_carlo(c, cfg);
    ustm::write_sim_csv(res, out);
    std::fprintf(stderr, "simulated %zu SNR points x %lld frames in %.2fs\n",
                 cfg.snr_db.size(), frames, res.wall_seconds);
    return 0;
}

int cmd_bound(const std::string &code_path, int n, const std::string &snr_spec,
              const std::string &out) {
    const ustm::Constellation c = ustm::load(code_path);
    const std::vector<double> snrs = parse_snr_range(snr_spec);
    std::ofstream f(out);
    if (!f)
        throw ustm::Error("cannot open " + out);
    f << "snr_db,log10_pbit_union,log10_pbit_asymptotic\n";
    char line[160];
    for (double db : snrs) {
        const double rho = db_to_linear(db);
        const double u = ustm::union_bound_log10(c, rho, n);
        std::string asym = "NA";
        try {
            std::snprintf(line, sizeof(line), "%.17g",
                          ustm::asymptotic_bound_log10(c, rho, n));
            asym = line;
        } catch (const ustm::ZeroDeterminant &) {
        }
        std::snprintf(line, sizeof(line), "%.10g,%.17g,", db, u);
        f << line << asym << "\n";
    }
    return 0;
}

int cmd_inspect(const std::string &code_path) {
    const ustm::Constellation c = ustm::load(code_path);
    std::printf("M %d\n", c.M);
    std::printf("L %d\n", c.L);
    std::printf("b %d\n", c.b);
    std::printf("size %lld\n", c.size());
    std::printf("R %.12g\n", ustm::spectral_efficiency(c));
    std::printf("diversity_product %.12g\n", ustm::diversity_product(c));
    double resid = 0.0;
    for (int q = 0; q < c.blocks(); ++q) {
        const ustm::CMatrix eye = ustm::CMatrix::identity(c.M);
        resid = std::max(resid, ustm::frobenius_distance(c.A[q].adjoint() * c.A[q], eye));
        resid = std::max(resid, ustm::frobenius_distance(c.B[q].adjoint() * c.B[q], eye));
    }
    std::printf("max_unitarity_residual %.3g\n", resid);
    return 0;
}

int cmd_decode(const std::string &code_path, int n, double snr_db, long long frames,
               uint64_t seed, const std::string &out) {
    // Per-frame decisions of the sphere decoder next to the exact ML rule,
    // for eyeballing where the Euclidean approximation disagrees.
    const ustm::Constellation c = ustm::load(code_path);
    const double rho = db_to_linear(snr_db);
    std::ofstream f(out);
    if (!f)
        throw ustm::Error("cannot open " + out);
    f << "frame,tx_q,tx_l,sphere_q,sphere_l,sphere_cost,ml_q,ml_l,ml_cost,agree\n";
    long long agree = 0;
    for (long long t = 0; t < frames; ++t) {
        ustm::Rng rng(seed, static_cast<uint64_t>(t));
        const long long prev_idx = static_cast<long long>(rng.below(c.size()));
        const long long msg = static_cast<long long>(rng.below(c.size()));
        const ustm::CMatrix h = ustm::sample_cn01_matrix(rng, c.M, n);
        const ustm::CMatrix w0 = ustm::sample_cn01_matrix(rng, c.M, n);
        const ustm::CMatrix w1 = ustm::sample_cn01_matrix(rng, c.M, n);
        const ustm::CMatrix s_prev = ustm::signal_matrix(c, static_cast<int>(prev_idx / c.L),
                                                         static_cast<int>(prev_idx % c.L));
        const ustm::CMatrix v = ustm::signal_matrix(c, static_cast<int>(msg / c.L),
                                                    static_cast<int>(msg % c.L));
        const double amp = std::sqrt(rho);
        const ustm::CMatrix x_prev = (s_prev * h) * amp + w0;
        const ustm::CMatrix x_now = ((v * s_prev) * h) * amp + w1;
        const ustm::DecodeResult sd = ustm::parallel_decode(x_now, x_prev, c);
        const ustm::DecodeResult ml = ustm::ml_bruteforce(x_now, x_prev, c);
        const bool same = sd.q_hat == ml.q_hat && sd.l_hat == ml.l_hat;
        agree += same;
        char line[256];
        std::snprintf(line, sizeof(line), "%lld,%d,%d,%d,%d,%.17g,%d,%d,%.17g,%d\n", t,
                      static_cast<int>(msg / c.L), static_cast<int>(msg % c.L), sd.q_hat,
                      sd.l_hat, sd.cost, ml.q_hat, ml.l_hat, ml.cost, same ? 1 : 0);
        f << line;
    }
    std::printf("agreement %.6g\n", static_cast<double>(agree) / frames);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Differential unitary space-time codes: design, bounds, decoding, simulation"};
    app.require_subcommand(1);

    // design
    auto *design = app.add_subcommand("design", "Search a constellation minimizing the "
                                                "trapezoid index");
    int d_m = 2, d_n = 1, d_l = 16, d_b = 0, d_restarts = 20, d_iters = 150;
    double d_rho1 = 15.0, d_rho2 = 25.0, d_step = 0.5, d_tol = 1e-5;
    uint64_t d_seed = 0;
    bool d_joint = false;
    std::string d_cal, d_out = "code.json", d_trace;
    design->add_option("--M", d_m, "transmit antennas")->check(CLI::Range(1, 16));
    design->add_option("--N", d_n, "receive antennas")->check(CLI::Range(1, 16));
    design->add_option("--L", d_l, "diagonal cycle length (power of 2)");
    design->add_option("--blocks", d_b, "block exponent b (2^b blocks)")->check(CLI::Range(0, 8));
    design->add_option("--rho1-db", d_rho1, "lower SNR of the design window, dB");
    design->add_option("--rho2-db", d_rho2, "upper SNR of the design window, dB");
    design->add_option("--calibrate", d_cal,
                       "reference code; window solved from its union bound at 1e-3 / 1e-5");
    design->add_option("--restarts", d_restarts, "stage (a) random initializations");
    design->add_option("--max-iters", d_iters, "iterations per descent");
    design->add_option("--step", d_step, "initial line-search step");
    design->add_option("--tol", d_tol, "gradient-norm stop");
    design->add_option("--seed", d_seed, "RNG seed");
    design->add_flag("--joint", d_joint, "enable the joint stage over A, B, Lambda");
    design->add_option("--out", d_out, "output constellation JSON");
    design->add_option("--trace", d_trace, "optional descent trace CSV");

    // simulate
    auto *simulate = app.add_subcommand("simulate", "Monte Carlo BER/BLER over Rayleigh fading");
    std::string s_code, s_snr = "10:30:5", s_decoder = "sphere", s_out = "sim.csv";
    int s_n = 1;
    long long s_frames = 10000;
    uint64_t s_seed = 0;
    simulate->add_option("--code", s_code, "constellation JSON")->required();
    simulate->add_option("--N", s_n, "receive antennas")->check(CLI::Range(1, 16));
    simulate->add_option("--snr-db", s_snr, "SNR sweep a:b:step (dB, half-open) or one value");
    simulate->add_option("--frames", s_frames, "trials per SNR point");
    simulate->add_option("--seed", s_seed, "RNG seed");
    simulate->add_option("--decoder", s_decoder, "sphere | ml")
        ->check(CLI::IsMember({"sphere", "ml"}));
    simulate->add_option("--out", s_out, "output CSV");

    // bound
    auto *bound = app.add_subcommand("bound", "Union-bound curve (and asymptote when defined)");
    std::string b_code, b_snr = "0:40:2", b_out = "bound.csv";
    int b_n = 1;
    bound->add_option("--code", b_code, "constellation JSON")->required();
    bound->add_option("--N", b_n, "receive antennas")->check(CLI::Range(1, 16));
    bound->add_option("--snr-db", b_snr, "SNR sweep a:b:step (dB, half-open) or one value");
    bound->add_option("--out", b_out, "output CSV");

    // inspect
    auto *inspect = app.add_subcommand("inspect", "Print code shape, rate, diversity product");
    std::string i_code;
    inspect->add_option("--code", i_code, "constellation JSON")->required();

    // decode
    auto *decode = app.add_subcommand("decode", "Per-frame sphere vs ML decisions");
    std::string x_code, x_out = "decisions.csv";
    int x_n = 1;
    double x_snr = 20.0;
    long long x_frames = 100;
    uint64_t x_seed = 0;
    decode->add_option("--code", x_code, "constellation JSON")->required();
    decode->add_option("--N", x_n, "receive antennas")->check(CLI::Range(1, 16));
    decode->add_option("--snr-db", x_snr, "SNR point, dB");
    decode->add_option("--frames", x_frames, "frames to decode");
    decode->add_option("--seed", x_seed, "RNG seed");
    decode->add_option("--out", x_out, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(design))
            return cmd_design(d_m, d_n, d_l, d_b, d_rho1, d_rho2, d_cal, d_restarts, d_iters,
                              d_step, d_tol, d_seed, d_joint, d_out, d_trace);
        if (app.got_subcommand(simulate))
            return cmd_simulate(s_code, s_n, s_snr, s_frames, s_seed, s_decoder, s_out);
        if (app.got_subcommand(bound))
            return cmd_bound(b_code, b_n, b_snr, b_out);
        if (app.got_subcommand(inspect))
            return cmd_inspect(i_code);
        if (app.got_subcommand(decode))
            return cmd_decode(x_code, x_n, x_snr, x_frames, x_seed, x_out);
    } catch (const ustm::InvalidParams &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ustm::Error &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
