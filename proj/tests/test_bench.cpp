#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "nsch/bench.hpp"

using namespace nsch;

TEST_CASE("roc table reproduces the reference benchmark rates") {
    const std::vector<double> taus{0.1, 0.04, 0.02, 0.01, 0.005};

    SUBCASE("first-order scheme positions") {
        const std::vector<double> pos{0.51280317, 0.51064693, 0.50989193, 0.50950797, 0.50931372};
        auto roc = roc_table(pos, taus, 0.50911799);
        const std::vector<double> want{0.96, 0.98, 0.99, 0.99};
        REQUIRE(roc.size() == want.size());
        for (size_t k = 0; k < want.size(); ++k) CHECK(std::abs(roc[k] - want[k]) < 0.01);
    }
    SUBCASE("second-order scheme positions") {
        const std::vector<double> pos{0.50904344, 0.50910657, 0.50911533, 0.50911762};
        auto roc = roc_table(pos, {0.1, 0.04, 0.02, 0.01}, 0.50911799);
        const std::vector<double> want{2.05, 2.10, 2.84};
        REQUIRE(roc.size() == want.size());
        for (size_t k = 0; k < want.size(); ++k)
            CHECK(std::abs(roc[k] - want[k]) < 0.01);
    }
    SUBCASE("taus must decrease strictly") {
        CHECK_THROWS_AS(roc_table({1.0, 2.0}, {0.1, 0.1}, 0.0), std::invalid_argument);
    }
}

TEST_CASE("bubble configuration builds a centered light bubble in a heavy fluid") {
    BubbleConfig bc;
    GridSpec g = bc.grid();
    CHECK(g.nx == 25);
    CHECK(g.ny == 50);
    FieldSet f = bc.initial_state();
    CHECK(f.c.max_abs() <= 1.0);
    // c = -1 (light phase) inside the bubble, +1 outside
    CHECK(f.c(12, 12) < -0.9);
    CHECK(f.c(12, 45) > 0.9);
    CHECK(centroid_x(f.c, g) == doctest::Approx(bc.cx).epsilon(1e-3));
    CHECK(centroid_y(f.c, g) == doctest::Approx(bc.cy).epsilon(1e-3));
    PhysicalParams p = bc.physical();
    CHECK(p.rho1 == doctest::Approx(1000.0));
    auto force = p.body_force(1.0);
    CHECK(force[1] == doctest::Approx(-0.98 * 1000.0));
}

TEST_CASE("taylor configuration matches its channel analytics") {
    TaylorConfig tc;
    CHECK(tc.poiseuille_dp() == doctest::Approx(12.0 * tc.nu * 10.0 * tc.u_target));
    GridSpec g = tc.grid();
    CHECK(g.h == doctest::Approx(1.0 / tc.ny));
    FieldSet f = tc.initial_state();
    // capsule interior near the channel axis, ambient liquid near the walls
    CHECK(f.c(tc.nx / 2, tc.ny / 2) < -0.9);
    CHECK(f.c(tc.nx / 2, 0) > 0.9);
    CHECK(f.c(2, tc.ny / 2) > 0.9);
    // Poiseuille profile: u(y) = 6 u_target y (1-y)
    CHECK(f.u(tc.nx / 2, tc.ny / 2) == doctest::Approx(6.0 * tc.u_target * 0.25).epsilon(0.01));
}

TEST_CASE("vtk snapshots round-trip their point data") {
    GridSpec g = GridSpec::unit(6);
    FieldSet f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            f.c(i, j) = std::sin(1.0 + i + 2 * j);
            f.p(i, j) = i * 0.25 - j;
        }
    for (double& v : f.u.a) v = 0.125;
    const std::string path = "snapshot.tmp.vtk";
    write_vtk(f, g, path);

    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line.find("# vtk DataFile") == 0);

    auto data = read_vtk_point_data(path);
    REQUIRE(data.count("c") == 1);
    REQUIRE(data.count("p") == 1);
    REQUIRE(data.count("mu") == 1);
    REQUIRE(data.count("u") == 1);
    CHECK(data["c"].size() == size_t((g.nx + 1) * (g.ny + 1)));
    CHECK(data["u"].size() == size_t(3 * (g.nx + 1) * (g.ny + 1)));
    // an interior node value is the average of its four adjacent cells
    const int node = 2 + 2 * (g.nx + 1);
    const double want = 0.25 * (f.c(1, 1) + f.c(2, 1) + f.c(1, 2) + f.c(2, 2));
    CHECK(data["c"][node] == doctest::Approx(want).epsilon(1e-12));
    std::remove(path.c_str());
}

TEST_CASE("diagnostics csv carries the full schema") {
    Trajectory tr;
    StepRow row;
    row.t = 0.5;
    row.tau = 0.01;
    row.iterations = 3;
    row.mass = 1.25;
    tr.rows.push_back(row);
    const std::string path = "diag.tmp.csv";
    write_diagnostics_csv(tr, path);
    std::ifstream is(path);
    std::string header, data;
    std::getline(is, header);
    std::getline(is, data);
    CHECK(header == "t,tau,iterations,centroid_x,centroid_y,ub_x,ub_y,dc_max,mass");
    CHECK(data.find("0.5,0.01,3") == 0);
    std::remove(path.c_str());
}

TEST_CASE("key-value config parses sections and round-trips") {
    const std::string text =
        "# comment\n"
        "[physical]\n"
        "eps = 0.04\n"
        "sigma = 24.5  # inline\n"
        "\n"
        "[run]\n"
        "max_steps = 200\n";
    KeyValueConfig cfg = KeyValueConfig::parse_string(text);
    CHECK(cfg.has("physical.eps"));
    CHECK(cfg.get_double("physical.eps", 0.0) == doctest::Approx(0.04));
    CHECK(cfg.get_double("physical.sigma", 0.0) == doctest::Approx(24.5));
    CHECK(cfg.get_int("run.max_steps", 0) == 200);
    CHECK(cfg.get_int("run.missing", 7) == 7);

    cfg.set("run.seed", "123");
    const std::string path = "cfg.tmp.cfg";
    cfg.write_file(path);
    KeyValueConfig back = KeyValueConfig::parse_file(path);
    CHECK(back.get("run.seed") == "123");
    CHECK(back.to_string() == cfg.to_string());
    std::remove(path.c_str());
}

TEST_CASE("spinodal decomposition decays the ginzburg-landau energy") {
    FieldSet out;
    auto e1 = run_spinodal(16, 0.06, 1.0, 1e-4, 10, 77, &out);
    auto e2 = run_spinodal(16, 0.06, 1.0, 1e-4, 10, 77);
    REQUIRE(e1.size() == 10);
    for (size_t k = 1; k < e1.size(); ++k) CHECK(e1[k] <= e1[k - 1] + 1e-12);
    CHECK(e1 == e2);  // deterministic
    CHECK(out.c.finite());
    CHECK(out.c.max_abs() > 0.0);
    auto e3 = run_spinodal(16, 0.06, 1.0, 1e-4, 10, 78);
    CHECK(e3 != e1);
}

TEST_CASE("a short rising-bubble run lifts the bubble and conserves mass") {
    BubbleConfig bc;
    bc.t_end = 0.04;
    bc.scheme.tau = 0.02;
    bc.scheme.theta = 1.0;
    BenchmarkResult res = run_rising_bubble(bc);
    CHECK(res.converged);
    REQUIRE(res.traj.rows.size() >= 2);
    CHECK(res.mass_drift < 1e-8 * bc.grid().area());
    CHECK(res.final_centroid_y > bc.cy);  // buoyancy wins immediately
    CHECK(res.traj.rows.back().ub_y > 0.0);
}
