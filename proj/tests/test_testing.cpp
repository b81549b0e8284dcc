#include <doctest.h>

#include <regimes/simulate.hpp>
#include <regimes/testing.hpp>

#include <cmath>
#include <limits>

using namespace regimes;

namespace {

struct TableRow {
    int m;
    double loglik, aic, bic, lr;
};

// Selection table for quarterly per-capita GDP growth (220 observations).
constexpr TableRow kCommon[] = {
    {1, -331.70, 669.39, 679.58, 20.86},
    {2, -321.27, 656.54, 680.29, 27.77},
    {3, -307.39, 640.77, 684.89, 15.23},
    {4, -299.77, 641.54, 712.81, NAN},
};
constexpr TableRow kSwitching[] = {
    {1, -331.70, 669.39, 679.58, 47.25},
    {2, -308.07, 632.15, 659.29, 22.14},
    {3, -297.01, 624.01, 674.91, 4.87},
    {4, -294.57, 637.14, 718.59, NAN},
};

Parameters separated_two_regime() {
    Parameters p = Parameters::make(2, VarianceFamily::common);
    p.mu << -2.0, 2.0;
    p.beta = 0.3;
    p.sigma2[0] = 1.0;
    p.transition << 0.9, 0.1, 0.1, 0.9;
    return p;
}

}  // namespace

TEST_CASE("selection table arithmetic") {
    for (auto family : {VarianceFamily::common, VarianceFamily::switching}) {
        const auto& table = family == VarianceFamily::common ? kCommon : kSwitching;
        const ModelSpec spec{.family = family};
        for (int r = 0; r < 4; ++r) {
            const auto ic = information_criteria(table[r].loglik, table[r].m, spec, 220);
            CHECK(std::abs(ic.aic - table[r].aic) <= 0.03);
            CHECK(std::abs(ic.bic - table[r].bic) <= 0.03);
            if (r < 3) CHECK(std::abs(2.0 * (table[r + 1].loglik - table[r].loglik) - table[r].lr) <= 0.03);
        }
    }
    const ModelSpec common{};
    CHECK(information_criteria(-331.70, 1, common, 220).k == 3);
    CHECK(information_criteria(-321.27, 2, common, 220).k == 7);
    CHECK(information_criteria(-297.01, 3, ModelSpec{.family = VarianceFamily::switching}, 220).k == 15);
    const auto zero = information_criteria(0.0, 0, 10);
    CHECK(zero.aic == 0.0);
    CHECK(zero.bic == 0.0);
    CHECK_THROWS_AS(information_criteria(0.0, 1, 1), InvalidParameter);
}

TEST_CASE("bootstrap p-value and critical values") {
    const std::vector<double> stats{0.5, 3.0, 1.0, 2.0, 4.0};
    CHECK(bootstrap_p_value(10.0, stats) == 0.0);
    CHECK(bootstrap_p_value(-std::numeric_limits<double>::infinity(), stats) == 1.0);
    CHECK(bootstrap_p_value(2.0, stats) == doctest::Approx(0.4));
    CHECK(bootstrap_p_value(1.0, {}) == 1.0);

    std::vector<double> grid(100);
    for (int i = 0; i < 100; ++i) grid[i] = 99 - i;  // values 0..99, unsorted
    CHECK(bootstrap_critical_value(grid, 0.05) == 94.0);
    CHECK(bootstrap_critical_value(grid, 0.10) == 89.0);
    CHECK(bootstrap_critical_value(grid, 0.01) == 98.0);
    CHECK(bootstrap_critical_value(stats, 0.5) == 2.0);
    CHECK(std::isnan(bootstrap_critical_value({}, 0.05)));
}

TEST_CASE("likelihood ratio statistic") {
    const auto y = simulate_series(separated_two_regime(), 301, std::nullopt, 5);
    const auto r = lrt_statistic(y, 1, ModelSpec{});
    CHECK(r.lr == doctest::Approx(2.0 * (r.alt_fit.loglik - r.null_fit.loglik)));
    CHECK(r.lr > 20.0);
    CHECK(r.null_fit.spec.regimes == 1);
    CHECK(r.alt_fit.spec.regimes == 2);
    const auto again = lrt_statistic(y, r.null_fit, ModelSpec{});
    CHECK(again.lr == r.lr);
    CHECK_THROWS_AS(lrt_statistic(y, 0, ModelSpec{}), InvalidParameter);
}

TEST_CASE("bootstrap test") {
    Parameters h0 = Parameters::make(1, VarianceFamily::common);
    h0.beta = 0.5;
    const auto y = simulate_series(h0, 151, std::nullopt, 42);
    FitConfig cfg;
    cfg.n_starts = 6;
    cfg.seed = 99;
    const auto a = bootstrap_test(y, 1, ModelSpec{}, 12, cfg);
    CHECK(a.B == 12);
    CHECK(a.effective_B() + a.failed_replicates == 12);
    CHECK(a.lr >= 0.0);
    const double scaled = a.p_value * a.effective_B();
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-12);
    for (double s : a.boot_stats) CHECK(s >= 0.0);
    CHECK(a.critical_values.size() == 3);

    cfg.threads = 3;
    const auto b = bootstrap_test(y, 1, ModelSpec{}, 12, cfg);
    CHECK(a.boot_stats == b.boot_stats);
    CHECK(a.p_value == b.p_value);
    CHECK_THROWS_AS(bootstrap_test(y, 1, ModelSpec{}, 0, cfg), InvalidParameter);
}

TEST_CASE("selection stops at m_max when every test rejects") {
    const auto y = simulate_series(separated_two_regime(), 301, std::nullopt, 8);
    FitConfig cfg;
    cfg.n_starts = 8;
    const auto rep = select_regimes(y, 2, ModelSpec{}, 9, 0.05, cfg);
    REQUIRE(rep.rows.size() == 2);
    REQUIRE(rep.rows[0].p_value);
    CHECK(*rep.rows[0].p_value == 0.0);
    CHECK(rep.selected_lrt == 2);
    CHECK(rep.selected_bic == 2);
    CHECK(rep.selected_aic == 2);
    CHECK_FALSE(rep.rows[1].lr);
    CHECK(rep.n_obs == y.size());
    const auto text = render_selection_table(rep);
    CHECK(text.find("log-like.") != std::string::npos);
    CHECK(text.find("p-val.") != std::string::npos);
    CHECK(text.find("selected: LRT 2") != std::string::npos);
    CHECK_THROWS_AS(select_regimes(y, 1, ModelSpec{}, 9, 0.05, cfg), InvalidParameter);
}
