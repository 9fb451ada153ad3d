#pragma once

#include <Eigen/Sparse>
#include <string>

#include "nsch/operators.hpp"

namespace nsch {

using Vec = Eigen::VectorXd;

/// Unknown ordering: NS block = [all u; all v; all p], CH block = [all c; all mu].
struct Layout {
    GridSpec g;
    int Nu = 0, Nv = 0, Np = 0;

    explicit Layout(const GridSpec& grid) : g(grid) {
        Nu = (g.nx + 1) * g.ny;
        Nv = g.nx * (g.ny + 1);
        Np = g.nx * g.ny;
    }
    int n_ns() const { return Nu + Nv + Np; }
    int n_ch() const { return 2 * Np; }
    int iu(int i, int j) const { return j * (g.nx + 1) + i; }
    int iv(int i, int j) const { return Nu + j * g.nx + i; }
    int ip(int i, int j) const { return Nu + Nv + j * g.nx + i; }
    // CH-local indices
    int ic(int i, int j) const { return j * g.nx + i; }
    int imu(int i, int j) const { return Np + j * g.nx + i; }
};

struct NsSystem {
    SpMat A;
    Vec b;
};
struct ChSystem {
    SpMat A;
    Vec b;
};

/// 2x2 sparse block system [[A_NS, M_c],[N_c, A_CH]] [x;y] = [b1;b2].
/// M_c and N_c are empty (zero) unless the coupling mode is Implicit.
struct BlockSystem {
    SpMat A_NS, A_CH;
    SpMat M_c;  // n_ns x n_ch, CH unknowns -> NS equations
    SpMat N_c;  // n_ch x n_ns, NS unknowns -> CH equations
    Vec b1, b2;

    SpMat full() const;
    Vec full_rhs() const;
};

/// Assembles the linearized NS / CH / coupled systems for one fix-point
/// iteration: state_k is the current sub-iterate, state_n the previous time
/// level. All linearizations follow the retained-terms convention
/// (convection u_k.grad u_{k+1}, W' expanded to first order, constant M).
class SystemAssembler {
  public:
    SystemAssembler(const GridSpec& g, const BoundaryConditionSet& bc, const PhysicalParams& p,
                    const SchemeConfig& cfg);

    /// Saddle-point system in (u,v,p). With coupling==Implicit the surface
    /// tension force theta*mu_{k+1} grad c_k is left for the coupling block;
    /// otherwise theta*mu_k grad c_k is placed on the rhs. S1/S2 contributions
    /// are merged when the mode asks for them.
    NsSystem assemble_ns_block(const FieldSet& state_k, const FieldSet& state_n) const;

    /// 2x2 system in (c,mu). In Gauss-Seidel modes c_{k+1} is implicitly
    /// advected by (u_new - frame); with coupling==Implicit the advection is
    /// left for the coupling block.
    ChSystem assemble_ch_block(const FieldSet& state_k, const FieldSet& state_n,
                               const Array2D& u_new, const Array2D& v_new) const;

    BlockSystem assemble_coupled(const FieldSet& state_k, const FieldSet& state_n) const;

    const StencilOps& ops() const { return ops_; }
    const Layout& layout() const { return lay_; }

  private:
    GridSpec g_;
    BoundaryConditionSet bc_;
    PhysicalParams p_;
    SchemeConfig cfg_;
    StencilOps ops_;
    Layout lay_;
};

/// Sparse LU with partial pivoting; residual-checked.
Vec solve_direct(const SpMat& A, const Vec& b);

/// Defect-corrected solve: x = x_prev + w * solve(A, b - A x_prev), with
/// optional step-halving (up to 4 times) if the residual would increase.
Vec solve_defect_corrected(const SpMat& A, const Vec& b, const Vec& x_prev,
                           double omega_ls = 1.0, bool backtracking = false);

enum class InnerPrecond { ExactSubSolve, IncompleteFactorization };

struct PreconditionerConfig {
    double alpha = 0.1;
    InnerPrecond inner_ns = InnerPrecond::ExactSubSolve;
    InnerPrecond inner_ch = InnerPrecond::ExactSubSolve;
    int gmres_restart = 60;
    double gmres_tol = 1e-10;
    int gmres_maxit = 400;
};

struct FgmresResult {
    Vec x;
    int iterations = 0;
    bool converged = false;
    double rel_residual = 0.0;
};

/// Flexible GMRES on the full block system with the right preconditioner
/// P = [[P_NS, M_c],[0, (1/alpha) P_CH]] applied in its factored two-stage
/// form: z2 = alpha P_CH^-1 w2, z1 = P_NS^-1 (w1 - M_c z2).
FgmresResult solve_fgmres(const BlockSystem& sys, const PreconditionerConfig& pc);

/// Coordinate-format matrix-market export (1-based indices).
void write_matrix_market(const SpMat& A, const std::string& path);

}  // namespace nsch
