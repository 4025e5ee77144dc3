#pragma once

#include "mdc/potential.hpp"

namespace mdc {

/// Density on a rectangular chart grid (flat torus) or a latitude-longitude
/// cap grid (round sphere), with per-node volume weights.
struct GridDensity {
    ManifoldPtr manifold;
    std::vector<int> shape;          // nodes per axis (row-major flattening)
    std::vector<VectorXd> nodes;     // chart coordinates
    VectorXd weights;                // volume weight per node
    VectorXd values;                 // density w.r.t. volume, >= 0

    int size() const { return static_cast<int>(nodes.size()); }
    double mass() const { return values.dot(weights); }
    void normalize();
    int index(const std::vector<int>& multi) const;
};

/// Uniform grid on a 1D/2D flat torus, nodes at i * L / n.
GridDensity make_torus_grid(const ManifoldPtr& torus, int nodes_per_axis);

/// Latitude-longitude grid on the lat-long sphere chart, capped away from
/// the poles: theta in [theta_lo, theta_hi] (n_theta rows), phi uniform.
GridDensity make_spherell_grid(const ManifoldPtr& sphere, int n_theta, int n_phi,
                               double theta_lo, double theta_hi);

/// Evaluate f (density w.r.t. volume) on the nodes and normalize to mass 1.
void fill_density(GridDensity& grid, const std::function<double(const VectorXd&)>& f);

std::string grid_to_csv(const GridDensity& grid);

// ---- exact transport on point clouds ---------------------------------------

/// Half squared distance matrix via the catalog closed-form distance.
MatrixXd pairwise_cost(const Manifold& m, const std::vector<VectorXd>& xs,
                       const std::vector<VectorXd>& ys);

struct AssignmentResult {
    double w2 = 0.0;                 // root mean squared displacement
    double total_cost = 0.0;         // sum of matched half-squared distances
    std::vector<int> assignment;     // source index -> target index
};

/// Optimal assignment between equal-size clouds (shortest augmenting path
/// with dual potentials). Size capped at 512.
AssignmentResult exact_w2(const Manifold& m, const std::vector<VectorXd>& xs,
                          const std::vector<VectorXd>& ys);

// ---- entropic transport on grids --------------------------------------------

struct KantorovichPotentials {
    VectorXd psi;                // source-side potential
    VectorXd phi;                // target-side potential
    double epsilon = 0.0;
    double marginal_violation = 0.0;  // L1 defect of the column marginal
    int iterations = 0;
};

struct SinkhornOptions {
    double epsilon = -1.0;           // absolute; < 0 means use annealing below
    double eps_start_scale = 0.5;    // x mean cost
    double eps_final_scale = 0.005;  // x mean cost
    int max_iter = 4000;             // per annealing stage
    double marginal_tol = 1e-6;      // L1
};

/// Log-domain Sinkhorn between two grid densities on the same manifold.
/// Torus grids use an exact separable log-sum-exp kernel; sphere grids use
/// the dense kernel. Annealed and warm-started by default; a fixed epsilon
/// runs a single stage. Throws ConvergenceError when the marginal tolerance
/// is not reached.
KantorovichPotentials sinkhorn_potentials(const GridDensity& source, const GridDensity& target,
                                          const SinkhornOptions& opts = {});

/// Mean transport cost under the product of the two grid measures; the
/// annealing schedule is expressed in units of this.
double mean_pairwise_cost(const GridDensity& source, const GridDensity& target);

/// Entropy sum pi log pi of the entropic plan (dense; small grids only).
double plan_entropy(const GridDensity& source, const GridDensity& target,
                    const KantorovichPotentials& pots);

// ---- potential extraction -----------------------------------------------------

/// theta = -psi on the source grid, wrapped as a Potential with finite
/// difference partials (periodic wrap on tori, clamped stencils at the cap
/// edges of sphere grids) and multilinear interpolation off the nodes.
class GridPotential final : public Potential {
public:
    GridPotential(GridDensity geometry, VectorXd theta_values, std::string spec);

    double value(const VectorXd& p) const override;
    VectorXd partials(const VectorXd& p) const override;
    MatrixXd partials2(const VectorXd& p) const override;
    const std::string& spec() const override { return spec_; }

    const VectorXd& theta() const { return theta_; }
    VectorXd gradient_at_node(int idx) const;
    MatrixXd hessian_at_node(int idx) const;
    const GridDensity& geometry() const { return grid_; }
    std::string to_csv() const;

private:
    double interpolate_field(const VectorXd& p, const VectorXd& field) const;

    GridDensity grid_;
    VectorXd theta_;
    std::vector<VectorXd> grad_;   // per axis, node-indexed
    std::vector<MatrixXd> hess_;   // node-indexed dense hessians
    std::string spec_;
};

struct ThetaExtraction {
    std::shared_ptr<GridPotential> theta;
    double barycenter_error = 0.0;  // pushforward-vs-target mean displacement
};

ThetaExtraction theta_from_potentials(const GridDensity& source, const GridDensity& target,
                                      const KantorovichPotentials& pots);

} // namespace mdc
