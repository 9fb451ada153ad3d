#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace nsch {

struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularMatrix : SolverFailure {
    using SolverFailure::SolverFailure;
};
struct MaxIterations : SolverFailure {
    using SolverFailure::SolverFailure;
};
struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateWeight : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RankDeficient : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ProbeNeverConverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Material and model parameters. sigma_tilde is derived from sigma at
/// construction; body_force maps the local phase value to a force density.
struct PhysicalParams {
    double rho1 = 1.0, rho2 = 1.0;  // densities of phase c=+1 / c=-1
    double nu1 = 1.0, nu2 = 1.0;    // dynamic viscosities
    double sigma = 0.0;             // physical surface tension
    double sigma_tilde = 0.0;       // sigma * 3/(2*sqrt(2))
    double eps = 0.1;               // interface width
    double mobility = 0.0;          // constant CH mobility
    std::function<std::array<double, 2>(double)> body_force;  // F(c), may be empty

    static PhysicalParams make(double rho1, double rho2, double nu1, double nu2, double sigma,
                               double eps, double mobility) {
        PhysicalParams p;
        p.rho1 = rho1;
        p.rho2 = rho2;
        p.nu1 = nu1;
        p.nu2 = nu2;
        p.sigma = sigma;
        p.sigma_tilde = sigma * 3.0 / (2.0 * std::sqrt(2.0));
        p.eps = eps;
        p.mobility = mobility;
        p.validate();
        return p;
    }

    void validate() const {
        if (!(eps > 0.0)) throw std::invalid_argument("PhysicalParams: eps must be > 0");
        if (!(mobility >= 0.0)) throw std::invalid_argument("PhysicalParams: mobility must be >= 0");
        if (!(rho1 > 0.0 && rho2 > 0.0))
            throw std::invalid_argument("PhysicalParams: densities must be > 0");
        if (!(nu1 > 0.0 && nu2 > 0.0))
            throw std::invalid_argument("PhysicalParams: viscosities must be > 0");
        const double want = sigma * 3.0 / (2.0 * std::sqrt(2.0));
        if (std::abs(sigma_tilde - want) > 1e-14 * std::max(1.0, std::abs(want)))
            throw std::invalid_argument("PhysicalParams: sigma_tilde != sigma*3/(2*sqrt(2))");
    }
};

/// Constant gravity body force F(c) = (0, -rho(c) g) for linear density blending.
std::function<std::array<double, 2>(double)> gravity_force(double rho1, double rho2, double g);

enum class CouplingMode { Explicit, S1, S2, Implicit };

inline const char* to_string(CouplingMode m) {
    switch (m) {
        case CouplingMode::Explicit: return "explicit";
        case CouplingMode::S1: return "s1";
        case CouplingMode::S2: return "s2";
        case CouplingMode::Implicit: return "implicit";
    }
    return "?";
}

/// Time-stepping and fix-point iteration configuration.
struct SchemeConfig {
    double theta = 0.5;
    CouplingMode coupling = CouplingMode::Explicit;
    double omega = 0.2;       // stabilizer weight for S1/S2
    double tol = 1e-10;       // fix-point tolerance on ||c_{k+1}-c_k||_inf
    int max_iter = 100;       // fix-point iteration cap
    bool defect_correction = false;
    double tau = 1e-3;        // current time step

    // moving-frame velocity subtracted from all convective terms
    double frame_u = 0.0, frame_v = 0.0;
};

}  // namespace nsch
