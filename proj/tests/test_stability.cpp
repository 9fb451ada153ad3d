#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nsch/stability.hpp"

using namespace nsch;

namespace {

// cheap, coarse sweep point: eps = 0.08, h = 2 eps -> 6x6 grid
StabilityCase coarse_case() {
    StabilityCase cs;
    cs.sigma = 1e2;
    cs.gamma = 1e-5;
    cs.eps = 0.08;
    cs.h = 0.16;
    return cs;
}

}  // namespace

TEST_CASE("the fitted law prediction reproduces its closed form") {
    StabilityCase cs = coarse_case();
    const double want = 7.0 * cs.eps * std::pow(cs.sigma, -1.0 / 3.0) *
                        std::pow(cs.gamma, 1.0 / 3.0) * std::pow(cs.rho, 2.0 / 3.0);
    CHECK(cfl_law_prediction(cs) == doctest::Approx(want).epsilon(1e-14));
    CHECK(case_grid(cs).nx == 6);
}

TEST_CASE("perturbed interface seeding is deterministic and bounded") {
    GridSpec g = GridSpec::unit(16);
    FieldSet a = make_perturbed_interface(g, 0.04, 123);
    FieldSet b = make_perturbed_interface(g, 0.04, 123);
    FieldSet c = make_perturbed_interface(g, 0.04, 124);
    CHECK(max_abs_diff(a.c, b.c) == 0.0);
    CHECK(max_abs_diff(a.c, c.c) > 0.0);
    CHECK(a.u.max_abs() == 0.0);
    CHECK(a.c.max_abs() <= 1.0 + 1e-3);
    // the noise rides on the flat tanh profile
    double dev = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double base = std::tanh((g.yc(j) - 0.5) / (std::sqrt(2.0) * 0.04));
            dev = std::max(dev, std::abs(a.c(i, j) - base));
        }
    CHECK(dev <= 1e-3);
    CHECK(dev > 0.0);
}

TEST_CASE("probes converge below the stability limit and fail above it") {
    StabilityCase cs = coarse_case();
    const double pred = cfl_law_prediction(cs);
    ProbeOutcome ok = probe_single_step(cs, pred / 100.0);
    CHECK(ok.converged);
    CHECK(ok.iterations >= 1);
    ProbeOutcome bad = probe_single_step(cs, 1e4 * pred);
    CHECK_FALSE(bad.converged);
}

TEST_CASE("max time step search brackets the first failure") {
    StabilityCase cs = coarse_case();
    StabilityRecord r = find_max_timestep(cs);
    CHECK(r.error.empty());
    CHECK_FALSE(r.capped);
    CHECK(r.tau_max > 0.0);
    REQUIRE(r.probes.size() >= 2);
    const ProbeOutcome& last_ok = r.probes[r.probes.size() - 2];
    const ProbeOutcome& first_bad = r.probes.back();
    CHECK(last_ok.converged);
    CHECK_FALSE(first_bad.converged);
    CHECK(r.tau_max == doctest::Approx(last_ok.tau));
    CHECK(first_bad.tau == doctest::Approx(1.1 * last_ok.tau).epsilon(1e-9));
    // the measured limit is near the fitted law (within a factor 4)
    const double pred = cfl_law_prediction(cs);
    CHECK(r.tau_max > pred / 4.0);
    CHECK(r.tau_max < pred * 4.0);
}

TEST_CASE("the cap flag reports a search stopped early") {
    StabilityCase cs = coarse_case();
    const double pred = cfl_law_prediction(cs);
    StabilityRecord r = find_max_timestep(cs, pred / 100.0, pred / 50.0);
    CHECK(r.capped);
    CHECK(r.tau_max <= pred / 50.0 * 1.1);
}

TEST_CASE("sweeps write reproducible CSV files") {
    std::vector<StabilityCase> cases(2, coarse_case());
    cases[1].sigma = 1e3;
    SweepOptions opt;
    opt.csv_path = "sweep_repro.tmp.csv";
    auto rec1 = run_sweep(cases, opt);
    std::stringstream f1;
    f1 << std::ifstream(opt.csv_path).rdbuf();
    auto rec2 = run_sweep(cases, opt);
    std::stringstream f2;
    f2 << std::ifstream(opt.csv_path).rdbuf();
    std::remove(opt.csv_path.c_str());

    REQUIRE(rec1.size() == 2);
    CHECK(rec1[0].tau_max == rec2[0].tau_max);
    CHECK(rec1[1].tau_max == rec2[1].tau_max);
    CHECK(f1.str() == f2.str());
    CHECK(f1.str().rfind(sweep_csv_header(), 0) == 0);
    CHECK(rec1[1].tau_max < rec1[0].tau_max);  // stiffer surface tension, smaller step
}

TEST_CASE("exponent fitting recovers a synthetic power law exactly") {
    std::vector<StabilityRecord> recs;
    int id = 0;
    for (double sigma : {1e2, 1e3})
        for (double gamma : {1e-5, 1e-6})
            for (double eps : {0.08, 0.04})
                for (double rho : {0.1, 1.0})
                    for (double hr : {2.0, 1.0}) {
                        StabilityRecord r;
                        r.cs = coarse_case();
                        r.cs.sigma = sigma;
                        r.cs.gamma = gamma;
                        r.cs.eps = eps;
                        r.cs.rho = rho;
                        r.cs.h = hr * eps;
                        r.h_actual = r.cs.h;
                        r.tau_max = 7.0 * eps * std::pow(sigma, -1.0 / 3.0) *
                                    std::pow(gamma, 1.0 / 3.0) * std::pow(rho, 2.0 / 3.0);
                        (void)id++;
                        recs.push_back(r);
                    }
    FitResult fit = fit_exponents(recs);
    CHECK(fit.n_cases == int(recs.size()));
    CHECK(fit.alpha[0] == doctest::Approx(7.0).epsilon(1e-8));
    CHECK(fit.alpha[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
    CHECK(fit.alpha[2] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fit.alpha[3] == doctest::Approx(-1.0 / 3.0).epsilon(1e-8));
    CHECK(fit.alpha[4] == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    CHECK(fit.alpha[5] == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
    CHECK(fit.residual_rms < 1e-10);
    for (bool d : fit.determined) CHECK(d);
}

TEST_CASE("constant sweep columns are flagged undetermined") {
    std::vector<StabilityRecord> recs;
    for (double sigma : {1e2, 3e2, 1e3, 3e3})
        for (double gamma : {1e-5, 1e-6}) {
            StabilityRecord r;
            r.cs = coarse_case();
            r.cs.sigma = sigma;
            r.cs.gamma = gamma;
            r.h_actual = r.cs.h;
            r.tau_max = std::pow(sigma, -0.5) * gamma;
            recs.push_back(r);
        }
    FitResult fit = fit_exponents(recs);
    CHECK(fit.alpha[3] == doctest::Approx(-0.5).epsilon(1e-8));
    CHECK(fit.alpha[4] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_FALSE(fit.determined[1]);  // h never varied
    CHECK_FALSE(fit.determined[2]);  // eps never varied
    CHECK_FALSE(fit.determined[5]);  // rho never varied
    CHECK(std::isnan(fit.alpha[2]));

    recs.resize(3);
    CHECK_THROWS_AS(fit_exponents(recs), RankDeficient);
}

TEST_CASE("stabilizer gain statistics") {
    std::vector<StabilityRecord> base(3), stab(3);
    for (int k = 0; k < 3; ++k) {
        base[k].cs = coarse_case();
        stab[k].cs = base[k].cs;
        base[k].tau_max = 1.0;
    }
    stab[0].tau_max = 2.0;
    stab[1].tau_max = 4.0;
    stab[2].tau_max = 8.0;
    GainStats gs = stabilizer_gain(base, stab);
    CHECK(gs.n == 3);
    CHECK(gs.min == doctest::Approx(2.0));
    CHECK(gs.max == doctest::Approx(8.0));
    CHECK(gs.geomean == doctest::Approx(4.0));

    base[1].error = "solver_breakdown";  // errored pairs are skipped
    GainStats gs2 = stabilizer_gain(base, stab);
    CHECK(gs2.n == 2);
    CHECK(gs2.geomean == doctest::Approx(4.0));
}
