#pragma once

#include <string>
#include <vector>

#include "ustm/constellation.hpp"
#include "ustm/decoder.hpp"

namespace ustm {

enum class DecoderKind { Sphere, Ml };

struct SimConfig {
    int n_rx = 1;
    std::vector<double> snr_db; ///< rho = 10^(dB/10)
    long long frames = 1000;    ///< two-frame differential trials per point
    uint64_t seed = 0;
    DecoderKind decoder = DecoderKind::Sphere;
};

struct SnrPointResult {
    double snr_db = 0.0;
    long long frames = 0;
    long long block_errors = 0;
    long long bit_errors = 0;
    double bler = 0.0;
    double ber = 0.0;
};

struct SimResult {
    std::vector<SnrPointResult> points;
    double wall_seconds = 0.0;
};

struct TrialOutcome {
    long long tx = 0; ///< transmitted label (block bits then diagonal bits)
    long long rx = 0;
    int bit_errors = 0;
};

/// One two-frame differential trial over the Rayleigh block-fading model:
/// the channel is shared by the consecutive frames, noise is fresh per
/// frame, and the differential history is collapsed into one uniformly drawn
/// previous signal matrix. Draw order from rng is fixed: previous index,
/// message, H, W_prev, W_now.
TrialOutcome run_trial(const Constellation &c, double rho, int n_rx, Rng &rng,
                       DecoderKind decoder = DecoderKind::Sphere);

/// Monte Carlo aggregation. Trial t of SNR point s uses the Rng stream
/// (s << 48) | t, so results are identical regardless of execution order or
/// thread count. OpenMP-parallel over trials.
SimResult run_monte_carlo(const Constellation &c, const SimConfig &cfg);

/// Plain loop over the same per-trial streams; reference for the parallel
/// runner (results must match it exactly).
SimResult run_monte_carlo_serial(const Constellation &c, const SimConfig &cfg);

/// CSV emission: snr_db,frames,block_errors,bit_errors,bler,ber.
void write_sim_csv(const SimResult &r, const std::string &path);

} // namespace ustm
