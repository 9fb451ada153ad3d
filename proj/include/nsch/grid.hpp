#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsch {

/// Uniform structured grid of square cells covering [x_min,x_max]x[y_min,y_max].
struct GridSpec {
    int nx = 0, ny = 0;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    double h = 0.0;

    static GridSpec make(int nx, int ny, double x_min, double x_max, double y_min,
                         double y_max) {
        GridSpec g;
        g.nx = nx;
        g.ny = ny;
        g.x_min = x_min;
        g.x_max = x_max;
        g.y_min = y_min;
        g.y_max = y_max;
        g.h = (x_max - x_min) / nx;
        g.validate();
        return g;
    }

    /// Unit square [0,1]^2 with nx = ny cells.
    static GridSpec unit(int n) { return make(n, n, 0.0, 1.0, 0.0, 1.0); }

    void validate() const {
        if (nx < 4 || ny < 4) throw std::invalid_argument("GridSpec: nx, ny must be >= 4");
        const double hx = (x_max - x_min) / nx;
        const double hy = (y_max - y_min) / ny;
        if (std::abs(hx - hy) > 1e-12 * std::abs(hx))
            throw std::invalid_argument("GridSpec: cells must be square (hx != hy)");
        if (std::abs(h - hx) > 1e-12 * std::abs(hx))
            throw std::invalid_argument("GridSpec: h inconsistent with extents");
    }

    double xc(int i) const { return x_min + (i + 0.5) * h; }  // cell center
    double yc(int j) const { return y_min + (j + 0.5) * h; }
    double xf(int i) const { return x_min + i * h; }          // x-face position
    double yf(int j) const { return y_min + j * h; }          // y-face position
    double area() const { return (x_max - x_min) * (y_max - y_min); }
};

/// Dense row-major 2D array of doubles.
struct Array2D {
    int nx = 0, ny = 0;
    std::vector<double> a;

    Array2D() = default;
    Array2D(int nx_, int ny_, double fill = 0.0) : nx(nx_), ny(ny_), a(size_t(nx_) * ny_, fill) {}

    double& operator()(int i, int j) { return a[size_t(j) * nx + i]; }
    double operator()(int i, int j) const { return a[size_t(j) * nx + i]; }
    size_t size() const { return a.size(); }
    void fill(double v) { std::fill(a.begin(), a.end(), v); }

    double max_abs() const {
        double m = 0.0;
        for (double v : a) m = std::max(m, std::abs(v));
        return m;
    }
    bool finite() const {
        for (double v : a)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline double max_abs_diff(const Array2D& a, const Array2D& b) {
    double m = 0.0;
    for (size_t k = 0; k < a.a.size(); ++k) m = std::max(m, std::abs(a.a[k] - b.a[k]));
    return m;
}

/// Discrete state on a MAC-staggered grid: u on vertical (x-) faces,
/// v on horizontal (y-) faces, p/c/mu at cell centers.
struct FieldSet {
    Array2D u;   // (nx+1) x ny
    Array2D v;   // nx x (ny+1)
    Array2D p;   // nx x ny
    Array2D c;   // nx x ny
    Array2D mu;  // nx x ny

    FieldSet() = default;
    explicit FieldSet(const GridSpec& g)
        : u(g.nx + 1, g.ny), v(g.nx, g.ny + 1), p(g.nx, g.ny), c(g.nx, g.ny), mu(g.nx, g.ny) {}

    bool finite() const {
        return u.finite() && v.finite() && p.finite() && c.finite() && mu.finite();
    }
};

}  // namespace nsch
