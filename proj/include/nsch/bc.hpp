#pragma once

#include <stdexcept>

namespace nsch {

/// Velocity condition on one domain side. Scalars (c, mu) always get
/// homogeneous Neumann ghosts, or periodic wrapping on periodic sides.
/// Open sides prescribe a pressure value (inflow/outflow).
enum class VelBc { NoSlip, FreeSlip, Periodic, Open };

struct SideBc {
    VelBc type = VelBc::NoSlip;
    double pressure = 0.0;  // used by VelBc::Open only
};

struct BoundaryConditionSet {
    SideBc left, right, bottom, top;

    bool periodic_x() const { return left.type == VelBc::Periodic; }
    bool periodic_y() const { return bottom.type == VelBc::Periodic; }
    bool has_open() const {
        return left.type == VelBc::Open || right.type == VelBc::Open ||
               bottom.type == VelBc::Open || top.type == VelBc::Open;
    }

    void validate() const {
        if ((left.type == VelBc::Periodic) != (right.type == VelBc::Periodic) ||
            (bottom.type == VelBc::Periodic) != (top.type == VelBc::Periodic))
            throw std::invalid_argument("BoundaryConditionSet: periodic sides must be paired");
    }

    static BoundaryConditionSet all_periodic() {
        BoundaryConditionSet b;
        b.left.type = b.right.type = b.bottom.type = b.top.type = VelBc::Periodic;
        return b;
    }
    /// Closed box: free-slip left/right, no-slip bottom/top (bubble / stability setups).
    static BoundaryConditionSet box() {
        BoundaryConditionSet b;
        b.left.type = b.right.type = VelBc::FreeSlip;
        b.bottom.type = b.top.type = VelBc::NoSlip;
        return b;
    }
    /// Pressure-driven channel: open left/right, no-slip walls.
    static BoundaryConditionSet channel(double p_in, double p_out) {
        BoundaryConditionSet b;
        b.left = {VelBc::Open, p_in};
        b.right = {VelBc::Open, p_out};
        b.bottom.type = b.top.type = VelBc::NoSlip;
        return b;
    }
};

}  // namespace nsch
