#pragma once

#include <Eigen/Sparse>
#include <utility>

#include "nsch/bc.hpp"
#include "nsch/grid.hpp"
#include "nsch/material.hpp"
#include "nsch/params.hpp"

namespace nsch {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Pair of face fields (x-faces, y-faces), e.g. a force on the velocity points.
struct FaceField {
    Array2D x;  // (nx+1) x ny
    Array2D y;  // nx x (ny+1)
    explicit FaceField(const GridSpec& g) : x(g.nx + 1, g.ny), y(g.nx, g.ny + 1) {}
};

/// Stabilizer contribution in velocity-block indexing (u faces first, then v
/// faces). The momentum system becomes (A + mat) u_{k+1} = b + rhs with
/// rhs = mat * u_prev, so the assembled term is omega*S and vanishes at the
/// fix point. `mat` is symmetric positive semi-definite; -mat is the weighted
/// (surface) Laplacian the stabilizer represents.
struct StabTerm {
    SpMat mat;
    Eigen::VectorXd rhs;
};

/// Discrete spatial operators on a MAC grid with the given boundary
/// conditions. Second-order centered stencils throughout; scalars get
/// homogeneous Neumann ghosts (periodic wrapping on periodic sides).
class StencilOps {
  public:
    StencilOps(const GridSpec& g, const BoundaryConditionSet& bc);

    const GridSpec& grid() const { return g_; }
    const BoundaryConditionSet& bc() const { return bc_; }

    // ghost-folded accessors
    double cat(const Array2D& c, int i, int j) const;   // cell scalar
    double uat(const Array2D& u, int i, int j) const;   // x-face value
    double vat(const Array2D& v, int i, int j) const;   // y-face value

    /// mu = sigma_tilde/eps W'(c) - sigma_tilde*eps Lap_h c.
    Array2D chemical_potential(const Array2D& c, const PhysicalParams& p) const;

    /// Five-point Laplacian with the scalar ghost rules.
    Array2D laplace(const Array2D& c) const;

    /// g(u,c,mu) = -rho(c) (u-uf).grad u + div(nu(c) D(u)) + F(c) + mu grad c,
    /// evaluated at the velocity faces. Rows on Dirichlet boundary faces are 0.
    FaceField ns_rhs_g(const Array2D& u, const Array2D& v, const Array2D& c, const Array2D& mu,
                       const PhysicalParams& p, double frame_u = 0.0, double frame_v = 0.0) const;

    /// f(u,c,mu) = -(u-uf).grad c + div(M grad mu), conservative flux form.
    Array2D ch_rhs_f(const Array2D& u, const Array2D& v, const Array2D& c, const Array2D& mu,
                     const PhysicalParams& p, double frame_u = 0.0, double frame_v = 0.0) const;

    /// mu grad c interpolated to the velocity faces.
    FaceField surface_tension_force(const Array2D& mu, const Array2D& c) const;

    /// Cell-wise divergence of a face velocity field.
    Array2D divergence(const Array2D& u, const Array2D& v) const;

    /// Pressure gradient at the velocity faces (zero on Dirichlet faces).
    FaceField grad_p(const Array2D& p) const;

    /// grad c evaluated at an x-face / y-face (ghost-folded).
    std::array<double, 2> grad_c_at_uface(const Array2D& c, int i, int j) const;
    std::array<double, 2> grad_c_at_vface(const Array2D& c, int i, int j) const;

    /// S1 = tau theta^2 sigma_tilde eps div((grad(u_{k+1}-u_k).grad c) grad c),
    /// scaled by omega. Assembled as a symmetric anisotropic diffusion operator
    /// with tensor grad c x grad c (one-point-quadrature bilinear elements).
    StabTerm assemble_S1(const Array2D& u_prev, const Array2D& v_prev, const Array2D& c_prev,
                         const PhysicalParams& p, double theta, double tau, double omega) const;

    /// S2 = -sigma theta^2 tau div(|grad c| P grad(u_{k+1}-u_k)) with the
    /// surface projection P = I - grad c x grad c / (|grad c|^2 + delta^2),
    /// delta = 1e-8/eps; scaled by omega.
    StabTerm assemble_S2(const Array2D& u_prev, const Array2D& v_prev, const Array2D& c_prev,
                         const PhysicalParams& p, double theta, double tau, double omega) const;

    int n_u() const { return (g_.nx + 1) * g_.ny; }
    int n_v() const { return g_.nx * (g_.ny + 1); }
    int iu(int i, int j) const { return j * (g_.nx + 1) + i; }
    int iv(int i, int j) const { return n_u() + j * g_.nx + i; }

    Eigen::VectorXd pack_velocity(const Array2D& u, const Array2D& v) const;
    void unpack_velocity(const Eigen::VectorXd& x, Array2D& u, Array2D& v) const;

    /// True if the x-face (i,j) carries a Dirichlet (wall) condition.
    bool u_dirichlet(int i, int j) const;
    bool v_dirichlet(int i, int j) const;

  private:
    GridSpec g_;
    BoundaryConditionSet bc_;

    StabTerm assemble_anisotropic(const Array2D& u_prev, const Array2D& v_prev,
                                  const Array2D& c_prev, double scale, bool projection,
                                  double delta2) const;
};

}  // namespace nsch
