#pragma once

// Data-generating processes for Markov switching AR(1) models and a Monte Carlo
// harness for size and power of the bootstrap likelihood-ratio test.

#include "regimes/estimation.hpp"
#include "regimes/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace regimes {

inline constexpr int kBurnIn = 200;

/// Regime path X_1..X_n (0-based labels) of a chain with transition matrix P,
/// X_0 drawn from x0_dist. P is only required to be row-stochastic.
std::vector<int> simulate_chain(const Matrix& P, std::size_t n, const Vector& x0_dist, std::uint64_t seed);

/// Series of total length n. With y0 given, element 0 is y0 and X_0 ~ params.xi
/// (bootstrap mode). Otherwise the first element follows a burn-in of kBurnIn steps
/// started from the stationary regime distribution, which needs |beta| < 1.
std::vector<double> simulate_series(const Parameters& params, std::size_t n, std::optional<double> y0,
                                    std::uint64_t seed);

struct McDesign {
    std::string name = "design";
    Parameters dgp;
    ModelSpec test_spec;    ///< family, eps and sigma factor of the fitted models
    int null_regimes = 1;   ///< M0 of the test H0: M = M0 against M0 + 1
    std::size_t n = 200;    ///< scored observations; each series has n + 1 values
    int reps = 500;
    int B = 99;
    std::vector<double> levels{0.10, 0.05, 0.01};
    std::uint64_t seed = kDefaultSeed;
    FitConfig fit;          ///< fit settings for every replication and bootstrap draw
    unsigned threads = 1;   ///< workers over replications
    std::string scale_note;

    void check() const;
};

struct McReport {
    McDesign design;
    std::map<double, double> rejection_pct;  ///< level -> percent of p-values below level
    std::vector<double> lr;                  ///< per replication, NaN when it failed
    std::vector<double> p_value;
    std::vector<int> bootstrap_failures;     ///< excluded bootstrap draws per replication
    int failed_reps = 0;
    double wall_seconds = 0.0;
};

McReport run_size_power(const McDesign& design);

}  // namespace regimes
