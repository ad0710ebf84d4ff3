// Timing comparison of the OpenMP kernels against their serial references:
// the union-bound pair sum and the Monte Carlo trial loop.

#include <chrono>
#include <cstdio>

#include "ustm/optimizer.hpp"
#include "ustm/perfindex.hpp"
#include "ustm/simulator.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

double now() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

ustm::Constellation demo_code(int L, int b) {
    ustm::Rng rng(7, 0);
    const int M = 2;
    std::vector<std::vector<double>> lambda(1 << b, {1.0, 21.37});
    std::vector<ustm::CMatrix> A(1 << b, ustm::CMatrix::identity(M));
    std::vector<ustm::CMatrix> B(1 << b, ustm::CMatrix::identity(M));
    for (int q = 1; q < (1 << b); ++q)
        B[q] = ustm::build_unitary(ustm::random_unitary_params(M, rng));
    return ustm::make_constellation(M, L, b, lambda, A, B);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif
    {
        // ~2M label pairs: enough work for the split to matter.
        const ustm::Constellation c = demo_code(256, 3);
        const double t0 = now();
        const ustm::UnionBound serial = ustm::union_bound_direct_serial(c, 100.0, 2);
        const double t1 = now();
        const ustm::UnionBound parallel = ustm::union_bound_direct(c, 100.0, 2);
        const double t2 = now();
        std::printf("union_bound_direct   serial %.3fs  parallel %.3fs  speedup %.2fx  "
                    "(log10 %.12g vs %.12g)\n",
                    t1 - t0, t2 - t1, (t1 - t0) / (t2 - t1), serial.log10_pbit,
                    parallel.log10_pbit);
    }
    {
        const ustm::Constellation c = demo_code(64, 2);
        ustm::SimConfig cfg;
        cfg.n_rx = 2;
        cfg.snr_db = {18.0};
        cfg.frames = 20000;
        cfg.seed = 11;
        const double t0 = now();
        const ustm::SimResult serial = ustm::run_monte_carlo_serial(c, cfg);
        const double t1 = now();
        const ustm::SimResult parallel = ustm::run_monte_carlo(c, cfg);
        const double t2 = now();
        std::printf("run_monte_carlo      serial %.3fs  parallel %.3fs  speedup %.2fx  "
                    "(ber %.6g vs %.6g)\n",
                    t1 - t0, t2 - t1, (t1 - t0) / (t2 - t1), serial.points[0].ber,
                    parallel.points[0].ber);
    }
    {
        ustm::DesignConfig cfg;
        cfg.M = 2;
        cfg.L = 16;
        cfg.b = 0;
        cfg.window = {31.6227766016838, 316.227766016838};
        cfg.restarts = 8;
        cfg.max_iters = 40;
        cfg.seed = 3;
        const double t0 = now();
        const ustm::DesignResult r = ustm::design(cfg);
        const double t1 = now();
        std::printf("design (8 restarts)  %.3fs  zeta %.6g\n", t1 - t0, r.zeta_value);
    }
    return 0;
}
