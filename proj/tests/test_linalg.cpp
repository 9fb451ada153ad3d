#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "nsch/linalg.hpp"
#include "nsch/stability.hpp"

using namespace nsch;

namespace {

FieldSet interface_state(const GridSpec& g, const BoundaryConditionSet& bc,
                         const PhysicalParams& p, std::uint64_t seed = 0) {
    FieldSet f = make_perturbed_interface(g, p.eps, seed == 0 ? 42 : seed);
    f.mu = StencilOps(g, bc).chemical_potential(f.c, p);
    return f;
}

}  // namespace

TEST_CASE("layout indices tile the block vectors without gaps") {
    GridSpec g = GridSpec::make(5, 4, 0.0, 1.25, 0.0, 1.0);
    Layout lay(g);
    CHECK(lay.n_ns() == lay.Nu + lay.Nv + lay.Np);
    std::vector<int> seen(lay.n_ns(), 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) ++seen[lay.iu(i, j)];
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) ++seen[lay.iv(i, j)];
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) ++seen[lay.ip(i, j)];
    for (int v : seen) CHECK(v == 1);
    CHECK(lay.imu(0, 0) == lay.Np);
}

TEST_CASE("direct solve is residual-checked") {
    SpMat A(3, 3);
    std::vector<Triplet> t{{0, 0, 4.0}, {1, 1, 2.0}, {2, 2, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}};
    A.setFromTriplets(t.begin(), t.end());
    Vec b(3);
    b << 1.0, 2.0, 3.0;
    Vec x = solve_direct(A, b);
    CHECK((A * x - b).norm() < 1e-12);

    SpMat S(2, 2);
    std::vector<Triplet> ts{{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}};
    S.setFromTriplets(ts.begin(), ts.end());
    Vec bs(2);
    bs << 1.0, 0.0;
    CHECK_THROWS_AS(solve_direct(S, bs), SolverFailure);
}

TEST_CASE("defect-corrected solve lands on the same solution") {
    SpMat A(4, 4);
    std::vector<Triplet> t;
    for (int i = 0; i < 4; ++i) t.push_back({i, i, 3.0 + i});
    t.push_back({0, 2, 0.5});
    t.push_back({2, 0, 0.5});
    A.setFromTriplets(t.begin(), t.end());
    Vec b = Vec::Ones(4), x0 = Vec::Zero(4);
    Vec x = solve_defect_corrected(A, b, x0);
    CHECK((A * x - b).norm() < 1e-12);
    Vec half = solve_defect_corrected(A, b, x0, 0.5);
    CHECK((A * half - 0.5 * b).norm() < 1e-12);
}

TEST_CASE("quiescent closed box stays quiescent through the NS block") {
    GridSpec g = GridSpec::unit(8);
    BoundaryConditionSet bc = BoundaryConditionSet::box();
    PhysicalParams p = PhysicalParams::make(1.0, 1.0, 0.1, 0.1, 1.0, 0.08, 1e-5);
    SchemeConfig cfg;
    cfg.tau = 1e-3;
    SystemAssembler as(g, bc, p, cfg);
    FieldSet f(g);  // c = 0 everywhere, u = 0: no force, no motion
    NsSystem ns = as.assemble_ns_block(f, f);
    Vec x = solve_direct(ns.A, ns.b);
    const Layout& lay = as.layout();
    for (int k = 0; k < lay.Nu + lay.Nv; ++k) CHECK(std::abs(x[k]) < 1e-12);
}

TEST_CASE("hydrostatic balance: gravity is carried entirely by the pressure") {
    GridSpec g = GridSpec::unit(8);
    BoundaryConditionSet bc = BoundaryConditionSet::box();
    PhysicalParams p = PhysicalParams::make(1.0, 1.0, 0.1, 0.1, 1.0, 0.08, 1e-5);
    p.body_force = gravity_force(1.0, 1.0, 9.81);
    SchemeConfig cfg;
    cfg.tau = 1e-3;
    SystemAssembler as(g, bc, p, cfg);
    FieldSet f(g);
    NsSystem ns = as.assemble_ns_block(f, f);
    Vec x = solve_direct(ns.A, ns.b);
    const Layout& lay = as.layout();
    for (int k = 0; k < lay.Nu + lay.Nv; ++k) CHECK(std::abs(x[k]) < 1e-10);
    // the hydrostatic pressure gradient is uniform and points down
    const double dpdy = (x[lay.ip(3, 4)] - x[lay.ip(3, 3)]) / g.h;
    CHECK(dpdy < 0.0);
    for (int j = 0; j + 1 < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            CHECK((x[lay.ip(i, j + 1)] - x[lay.ip(i, j)]) / g.h == doctest::Approx(dpdy));
}

TEST_CASE("coupled system contains the uncoupled blocks") {
    GridSpec g = GridSpec::unit(8);
    BoundaryConditionSet bc = BoundaryConditionSet::box();
    PhysicalParams p = PhysicalParams::make(1.0, 0.5, 0.1, 0.05, 100.0, 0.08, 1e-5);
    SchemeConfig cfg;
    cfg.coupling = CouplingMode::Implicit;
    cfg.tau = 1e-4;
    SystemAssembler as(g, bc, p, cfg);
    FieldSet f = interface_state(g, bc, p);
    BlockSystem sys = as.assemble_coupled(f, f);

    // the NS diagonal block equals the Gauss-Seidel NS matrix
    NsSystem ns = as.assemble_ns_block(f, f);
    CHECK(SpMat(sys.A_NS - ns.A).norm() < 1e-12);

    // with a zero new velocity and no frame, the GS CH matrix has no
    // advection and must equal the coupled CH diagonal block
    FieldSet rest(g);
    ChSystem ch = as.assemble_ch_block(f, f, rest.u, rest.v);
    CHECK(SpMat(sys.A_CH - ch.A).norm() < 1e-12);

    CHECK(sys.M_c.nonZeros() > 0);
    CHECK(sys.N_c.nonZeros() > 0);
    CHECK(sys.full().rows() == as.layout().n_ns() + as.layout().n_ch());
    CHECK((sys.full_rhs().size()) == sys.b1.size() + sys.b2.size());
}

TEST_CASE("fgmres with the block preconditioner matches the direct solve") {
    GridSpec g = GridSpec::unit(8);
    BoundaryConditionSet bc = BoundaryConditionSet::box();
    PhysicalParams p = PhysicalParams::make(1.0, 0.5, 0.1, 0.05, 100.0, 0.08, 1e-5);
    SchemeConfig cfg;
    cfg.coupling = CouplingMode::Implicit;
    cfg.tau = 1e-4;
    SystemAssembler as(g, bc, p, cfg);
    FieldSet f = interface_state(g, bc, p);
    BlockSystem sys = as.assemble_coupled(f, f);
    Vec ref = solve_direct(sys.full(), sys.full_rhs());

    for (double alpha : {0.01, 0.1, 1.0}) {
        CAPTURE(alpha);
        PreconditionerConfig pc;
        pc.alpha = alpha;
        FgmresResult r = solve_fgmres(sys, pc);
        CHECK(r.converged);
        CHECK((r.x - ref).norm() / ref.norm() < 1e-7);
    }

    SUBCASE("incomplete inner factorizations still converge") {
        PreconditionerConfig pc;
        pc.inner_ns = InnerPrecond::IncompleteFactorization;
        pc.inner_ch = InnerPrecond::IncompleteFactorization;
        FgmresResult r = solve_fgmres(sys, pc);
        CHECK(r.converged);
        CHECK((r.x - ref).norm() / ref.norm() < 1e-7);
    }
}

TEST_CASE("matrix market export round-trips through a text parse") {
    SpMat A(3, 2);
    std::vector<Triplet> t{{0, 0, 1.5}, {2, 1, -2.25}};
    A.setFromTriplets(t.begin(), t.end());
    const std::string path = "mm_roundtrip.tmp.mtx";
    write_matrix_market(A, path);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header.find("MatrixMarket") != std::string::npos);
    int rows = 0, cols = 0, nnz = 0;
    is >> rows >> cols >> nnz;
    CHECK(rows == 3);
    CHECK(cols == 2);
    CHECK(nnz == 2);
    int i = 0, j = 0;
    double v = 0.0;
    is >> i >> j >> v;
    CHECK(i == 1);  // 1-based
    CHECK(v == doctest::Approx(1.5));
    std::remove(path.c_str());
}
