#include "ustm/simulator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ustm/perfindex.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ustm {

TrialOutcome run_trial(const Constellation &c, double rho, int n_rx, Rng &rng,
                       DecoderKind decoder) {
    const int M = c.M;
    const long long size = c.size();
    const long long prev_idx = static_cast<long long>(rng.below(static_cast<uint64_t>(size)));
    const long long msg = static_cast<long long>(rng.below(static_cast<uint64_t>(size)));
    const CMatrix h = sample_cn01_matrix(rng, M, n_rx);
    const CMatrix w_prev = sample_cn01_matrix(rng, M, n_rx);
    const CMatrix w_now = sample_cn01_matrix(rng, M, n_rx);

    const int L = c.L;
    const CMatrix s_prev = signal_matrix(c, static_cast<int>(prev_idx / L),
                                         static_cast<int>(prev_idx % L));
    const CMatrix v = signal_matrix(c, static_cast<int>(msg / L), static_cast<int>(msg % L));
    const double amp = std::sqrt(rho);
    const CMatrix x_prev = (s_prev * h) * amp + w_prev;
    const CMatrix x_now = ((v * s_prev) * h) * amp + w_now;

    const DecodeResult d = decoder == DecoderKind::Sphere ? parallel_decode(x_now, x_prev, c)
                                                          : ml_bruteforce(x_now, x_prev, c);
    TrialOutcome out;
    out.tx = msg;
    out.rx = static_cast<long long>(d.q_hat) * L + d.l_hat;
    out.bit_errors = hamming_distance(out.tx, out.rx);
    return out;
}

namespace {

SnrPointResult finish_point(double snr_db, long long frames, long long block_errors,
                            long long bit_errors, int bits) {
    SnrPointResult pt;
    pt.snr_db = snr_db;
    pt.frames = frames;
    pt.block_errors = block_errors;
    pt.bit_errors = bit_errors;
    pt.bler = static_cast<double>(block_errors) / frames;
    pt.ber = static_cast<double>(bit_errors) / (static_cast<double>(frames) * bits);
    return pt;
}

uint64_t trial_stream(size_t snr_index, long long trial) {
    return (static_cast<uint64_t>(snr_index) << 48) | static_cast<uint64_t>(trial);
}

} // namespace

SimResult run_monte_carlo(const Constellation &c, const SimConfig &cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    SimResult res;
    const int bits = c.log2_size();
    for (size_t s = 0; s < cfg.snr_db.size(); ++s) {
        const double rho = std::pow(10.0, cfg.snr_db[s] / 10.0);
        long long block_errors = 0, bit_errors = 0;
        const long long frames = cfg.frames;
        // Integer tallies commute, so the reduction is exact at any thread
        // count; per-trial streams make the draws order-independent.
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : block_errors, bit_errors)
        for (long long t = 0; t < frames; ++t) {
            Rng rng(cfg.seed, trial_stream(s, t));
            const TrialOutcome o = run_trial(c, rho, cfg.n_rx, rng, cfg.decoder);
            block_errors += (o.rx != o.tx);
            bit_errors += o.bit_errors;
        }
        res.points.push_back(finish_point(cfg.snr_db[s], frames, block_errors, bit_errors, bits));
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

SimResult run_monte_carlo_serial(const Constellation &c, const SimConfig &cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    SimResult res;
    const int bits = c.log2_size();
    for (size_t s = 0; s < cfg.snr_db.size(); ++s) {
        const double rho = std::pow(10.0, cfg.snr_db[s] / 10.0);
        long long block_errors = 0, bit_errors = 0;
        for (long long t = 0; t < cfg.frames; ++t) {
            Rng rng(cfg.seed, trial_stream(s, t));
            const TrialOutcome o = run_trial(c, rho, cfg.n_rx, rng, cfg.decoder);
            block_errors += (o.rx != o.tx);
            bit_errors += o.bit_errors;
        }
        res.points.push_back(finish_point(cfg.snr_db[s], cfg.frames, block_errors, bit_errors,
                                          bits));
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

void write_sim_csv(const SimResult &r, const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw Error("write_sim_csv: cannot open " + path);
    out << "snr_db,frames,block_errors,bit_errors,bler,ber\n";
    char line[256];
    for (const auto &p : r.points) {
        std::snprintf(line, sizeof(line), "%.10g,%lld,%lld,%lld,%.17g,%.17g\n", p.snr_db,
                      p.frames, p.block_errors, p.bit_errors, p.bler, p.ber);
        out << line;
    }
}

} // namespace ustm
