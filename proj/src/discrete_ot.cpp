#include "mdc/discrete_ot.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace mdc {

namespace {

constexpr double kNegInf = -1e300;

bool is_torus(const Manifold& m) { return m.name().rfind("torus", 0) == 0; }
bool is_spherell(const Manifold& m) { return m.name().rfind("spherell", 0) == 0; }

VectorXd torus_sides(const Manifold& m) {
    // parse from the id: torus:n:L1,...,Ln
    const std::string& id = m.name();
    const auto second = id.find(':', 6);
    const std::string ls = id.substr(second + 1);
    std::vector<double> sides;
    std::string cur;
    for (char c : ls + ",") {
        if (c == ',') {
            sides.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    VectorXd out(sides.size());
    for (std::size_t i = 0; i < sides.size(); ++i) out[i] = sides[i];
    return out;
}

double sphere_radius(const Manifold& m) { return std::stod(m.name().substr(9)); }

} // namespace

void GridDensity::normalize() {
    const double m = mass();
    if (!(m > 0.0)) throw std::invalid_argument("grid density has no mass");
    values /= m;
}

int GridDensity::index(const std::vector<int>& multi) const {
    int idx = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) idx = idx * shape[a] + multi[a];
    return idx;
}

GridDensity make_torus_grid(const ManifoldPtr& torus, int nodes_per_axis) {
    if (!is_torus(*torus)) throw ConfigError("make_torus_grid wants a torus manifold");
    const int d = torus->dim();
    if (d > 2) throw ConfigError("torus grids support 1 or 2 axes");
    const VectorXd sides = torus_sides(*torus);

    GridDensity g;
    g.manifold = torus;
    g.shape.assign(static_cast<std::size_t>(d), nodes_per_axis);
    const int total = static_cast<int>(std::pow(nodes_per_axis, d));
    g.nodes.resize(total);
    g.weights.resize(total);
    g.values = VectorXd::Zero(total);
    double w = 1.0;
    for (int a = 0; a < d; ++a) w *= sides[a] / nodes_per_axis;
    for (int idx = 0; idx < total; ++idx) {
        VectorXd p(d);
        int rem = idx;
        for (int a = d - 1; a >= 0; --a) {
            p[a] = (rem % nodes_per_axis) * sides[a] / nodes_per_axis;
            rem /= nodes_per_axis;
        }
        g.nodes[idx] = p;
        g.weights[idx] = w;
    }
    return g;
}

GridDensity make_spherell_grid(const ManifoldPtr& sphere, int n_theta, int n_phi,
                               double theta_lo, double theta_hi) {
    if (!is_spherell(*sphere)) throw ConfigError("make_spherell_grid wants a spherell manifold");
    if (theta_lo <= 0.02 || theta_hi >= M_PI - 0.02 || theta_lo >= theta_hi)
        throw ConfigError("sphere grids must stay strictly inside the polar cutoffs");
    const double r = sphere_radius(*sphere);

    GridDensity g;
    g.manifold = sphere;
    g.shape = {n_theta, n_phi};
    g.nodes.resize(static_cast<std::size_t>(n_theta) * n_phi);
    g.weights.resize(n_theta * n_phi);
    g.values = VectorXd::Zero(n_theta * n_phi);
    const double dth = (theta_hi - theta_lo) / (n_theta - 1);
    const double dph = 2.0 * M_PI / n_phi;
    for (int i = 0; i < n_theta; ++i) {
        const double th = theta_lo + i * dth;
        const double row_w = (i == 0 || i == n_theta - 1) ? 0.5 : 1.0;
        for (int j = 0; j < n_phi; ++j) {
            const int idx = i * n_phi + j;
            VectorXd p(2);
            p << th, j * dph;
            g.nodes[idx] = p;
            g.weights[idx] = r * r * std::sin(th) * dth * dph * row_w;
        }
    }
    return g;
}

void fill_density(GridDensity& grid, const std::function<double(const VectorXd&)>& f) {
    for (int i = 0; i < grid.size(); ++i) grid.values[i] = std::max(0.0, f(grid.nodes[i]));
    grid.normalize();
}

std::string grid_to_csv(const GridDensity& grid) {
    std::ostringstream os;
    os.precision(17);
    const int d = static_cast<int>(grid.shape.size());
    for (int a = 0; a < d; ++a) os << "x" << a << ",";
    os << "weight,value\n";
    for (int i = 0; i < grid.size(); ++i) {
        for (int a = 0; a < d; ++a) os << grid.nodes[i][a] << ",";
        os << grid.weights[i] << "," << grid.values[i] << "\n";
    }
    return os.str();
}

// ---- exact transport ----------------------------------------------------------

MatrixXd pairwise_cost(const Manifold& m, const std::vector<VectorXd>& xs,
                       const std::vector<VectorXd>& ys) {
    if (!m.has_closed_distance())
        throw std::invalid_argument(m.name() + ": no closed-form distance for cost assembly");
    MatrixXd c(xs.size(), ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) {
            const double d = m.distance_closed(xs[i], ys[j]);
            c(i, j) = 0.5 * d * d;
        }
    return c;
}

namespace {

/// Shortest augmenting path assignment with dual potentials; returns the
/// column matched to each row.
std::vector<int> solve_assignment(const MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
    return row_to_col;
}

} // namespace

AssignmentResult exact_w2(const Manifold& m, const std::vector<VectorXd>& xs,
                          const std::vector<VectorXd>& ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("exact_w2: clouds must have equal size");
    if (xs.empty()) throw std::invalid_argument("exact_w2: empty clouds");
    if (xs.size() > 512) throw std::invalid_argument("exact_w2: cloud size capped at 512");
    const MatrixXd cost = pairwise_cost(m, xs, ys);
    AssignmentResult res;
    res.assignment = solve_assignment(cost);
    for (std::size_t i = 0; i < xs.size(); ++i)
        res.total_cost += cost(static_cast<int>(i), res.assignment[i]);
    res.w2 = std::sqrt(2.0 * res.total_cost / static_cast<double>(xs.size()));
    return res;
}

// ---- entropic transport --------------------------------------------------------

namespace {

struct AxisCosts {
    std::vector<MatrixXd> c;  // per axis: c[a](i,j) = half squared wrap distance
};

AxisCosts torus_axis_costs(const GridDensity& src, const GridDensity& tgt) {
    const VectorXd sides = torus_sides(*src.manifold);
    AxisCosts out;
    const int d = static_cast<int>(src.shape.size());
    out.c.resize(d);
    for (int a = 0; a < d; ++a) {
        const int n = src.shape[a];
        const int m = tgt.shape[a];
        const double hs = sides[a] / n;
        const double ht = sides[a] / m;
        out.c[a].resize(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                double diff = std::fmod(std::abs(i * hs - j * ht), sides[a]);
                diff = std::min(diff, sides[a] - diff);
                out.c[a](i, j) = 0.5 * diff * diff;
            }
    }
    return out;
}

/// out(i, m) = LSE_k ( w(k, m) - c(i, k) ), with c already divided by eps.
MatrixXd lse_axis(const MatrixXd& c_over_eps, const MatrixXd& w) {
    const int n = static_cast<int>(c_over_eps.rows());
    const int kdim = static_cast<int>(c_over_eps.cols());
    const int mdim = static_cast<int>(w.cols());
    MatrixXd out(n, mdim);
    for (int m = 0; m < mdim; ++m) {
        for (int i = 0; i < n; ++i) {
            double mx = kNegInf;
            for (int k = 0; k < kdim; ++k) mx = std::max(mx, w(k, m) - c_over_eps(i, k));
            if (mx <= 0.5 * kNegInf) {
                out(i, m) = kNegInf;
                continue;
            }
            double s = 0.0;
            for (int k = 0; k < kdim; ++k) s += std::exp(w(k, m) - c_over_eps(i, k) - mx);
            out(i, m) = mx + std::log(s);
        }
    }
    return out;
}

/// Exact LSE against a separable cost: out_i = LSE_j ( w_j - C(i,j)/eps )
/// with C(i,j) = c0(i0,j0) + c1(i1,j1); 1D grids use the single axis.
VectorXd lse_separable(const AxisCosts& costs, double eps, const std::vector<int>& shape_in,
                       const std::vector<int>& shape_out, const VectorXd& w, bool transpose) {
    auto axis_cost = [&](int a) {
        return transpose ? MatrixXd(costs.c[a].transpose() / eps) : MatrixXd(costs.c[a] / eps);
    };
    if (shape_in.size() == 1) {
        const MatrixXd wmat = Eigen::Map<const MatrixXd>(w.data(), shape_in[0], 1);
        const MatrixXd out = lse_axis(axis_cost(0), wmat);
        return Eigen::Map<const VectorXd>(out.data(), shape_out[0]);
    }
    const int j1 = shape_in[1];
    const int i0 = shape_out[0], i1 = shape_out[1];
    MatrixXd wmat(shape_in[0], j1);
    for (int a = 0; a < shape_in[0]; ++a)
        for (int b = 0; b < j1; ++b) wmat(a, b) = w[a * j1 + b];
    // axis-0 stage: M(i0, j1) = LSE_{j0}(W(j0,j1) - c0(i0,j0))
    const MatrixXd m1 = lse_axis(axis_cost(0), wmat);
    // axis-1 stage over the transpose: out_t(i1, i0) = LSE_{j1}(M^T(j1,i0) - c1(i1,j1))
    const MatrixXd out_t = lse_axis(axis_cost(1), m1.transpose());
    VectorXd out(i0 * i1);
    for (int a = 0; a < i0; ++a)
        for (int b = 0; b < i1; ++b) out[a * i1 + b] = out_t(b, a);
    return out;
}

struct SinkhornKernel {
    bool separable = false;
    AxisCosts axis;
    MatrixXd dense;  // cost matrix, source rows x target cols
    std::vector<int> shape_src, shape_tgt;

    VectorXd lse_to_source(double eps, const VectorXd& w_target) const {
        if (separable) return lse_separable(axis, eps, shape_tgt, shape_src, w_target, false);
        const int n = static_cast<int>(dense.rows());
        VectorXd out(n);
        for (int i = 0; i < n; ++i) {
            double mx = kNegInf;
            for (int j = 0; j < dense.cols(); ++j)
                mx = std::max(mx, w_target[j] - dense(i, j) / eps);
            if (mx <= 0.5 * kNegInf) {
                out[i] = kNegInf;
                continue;
            }
            double s = 0.0;
            for (int j = 0; j < dense.cols(); ++j)
                s += std::exp(w_target[j] - dense(i, j) / eps - mx);
            out[i] = mx + std::log(s);
        }
        return out;
    }
    VectorXd lse_to_target(double eps, const VectorXd& w_source) const {
        if (separable) return lse_separable(axis, eps, shape_src, shape_tgt, w_source, true);
        const int m = static_cast<int>(dense.cols());
        VectorXd out(m);
        for (int j = 0; j < m; ++j) {
            double mx = kNegInf;
            for (int i = 0; i < dense.rows(); ++i)
                mx = std::max(mx, w_source[i] - dense(i, j) / eps);
            if (mx <= 0.5 * kNegInf) {
                out[j] = kNegInf;
                continue;
            }
            double s = 0.0;
            for (int i = 0; i < dense.rows(); ++i)
                s += std::exp(w_source[i] - dense(i, j) / eps - mx);
            out[j] = mx + std::log(s);
        }
        return out;
    }
};

SinkhornKernel build_kernel(const GridDensity& src, const GridDensity& tgt) {
    if (src.manifold->name() != tgt.manifold->name())
        throw std::invalid_argument("sinkhorn: source and target live on different manifolds");
    SinkhornKernel k;
    k.shape_src = src.shape;
    k.shape_tgt = tgt.shape;
    if (is_torus(*src.manifold)) {
        k.separable = true;
        k.axis = torus_axis_costs(src, tgt);
    } else {
        k.dense = pairwise_cost(*src.manifold, src.nodes, tgt.nodes);
    }
    return k;
}

VectorXd log_masses(const GridDensity& g) {
    VectorXd lm(g.size());
    const double total = g.mass();
    for (int i = 0; i < g.size(); ++i) {
        const double a = g.values[i] * g.weights[i] / total;
        lm[i] = a > 0.0 ? std::log(a) : kNegInf;
    }
    return lm;
}

VectorXd masses(const GridDensity& g) {
    VectorXd m = g.values.cwiseProduct(g.weights);
    return m / m.sum();
}

/// axis marginal of a mass vector over a row-major grid
VectorXd axis_marginal(const VectorXd& mass, const std::vector<int>& shape, int axis) {
    VectorXd out = VectorXd::Zero(shape[axis]);
    const int d = static_cast<int>(shape.size());
    for (int i = 0; i < mass.size(); ++i) {
        int rem = i, coord = 0;
        for (int ax = d - 1; ax >= 0; --ax) {
            const int c = rem % shape[ax];
            rem /= shape[ax];
            if (ax == axis) coord = c;
        }
        out[coord] += mass[i];
    }
    return out;
}

} // namespace

double mean_pairwise_cost(const GridDensity& source, const GridDensity& target) {
    const VectorXd a = masses(source), b = masses(target);
    if (is_torus(*source.manifold)) {
        const AxisCosts axis = torus_axis_costs(source, target);
        double total = 0.0;
        for (std::size_t ax = 0; ax < source.shape.size(); ++ax) {
            const VectorXd ma = axis_marginal(a, source.shape, static_cast<int>(ax));
            const VectorXd mb = axis_marginal(b, target.shape, static_cast<int>(ax));
            total += ma.dot(axis.c[ax] * mb);
        }
        return total;
    }
    const MatrixXd c = pairwise_cost(*source.manifold, source.nodes, target.nodes);
    return a.dot(c * b);
}

KantorovichPotentials sinkhorn_potentials(const GridDensity& source, const GridDensity& target,
                                          const SinkhornOptions& opts) {
    const SinkhornKernel kernel = build_kernel(source, target);
    const VectorXd la = log_masses(source), lb = log_masses(target);
    const int ns = source.size(), nt = target.size();

    std::vector<double> stages;
    if (opts.epsilon > 0.0) {
        stages.push_back(opts.epsilon);
    } else {
        const double mc = mean_pairwise_cost(source, target);
        const double eps_final = opts.eps_final_scale * mc;
        for (double e = opts.eps_start_scale * mc; e > eps_final * 1.0001; e *= 0.5)
            stages.push_back(e);
        stages.push_back(eps_final);
    }

    VectorXd f = VectorXd::Zero(ns), g = VectorXd::Zero(nt);
    KantorovichPotentials out;
    int total_iters = 0;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const double eps = stages[s];
        const bool last = s + 1 == stages.size();
        const double tol = last ? opts.marginal_tol : 10.0 * opts.marginal_tol;
        double viol = std::numeric_limits<double>::infinity();
        for (int it = 0; it < opts.max_iter; ++it) {
            VectorXd wt(nt);
            for (int j = 0; j < nt; ++j)
                wt[j] = lb[j] <= 0.5 * kNegInf ? kNegInf : g[j] / eps + lb[j];
            const VectorXd lse_s = kernel.lse_to_source(eps, wt);
            for (int i = 0; i < ns; ++i)
                if (la[i] > 0.5 * kNegInf) f[i] = -eps * lse_s[i];

            // after the f-update rows match exactly; the defect of the stale
            // g against its refreshed value measures the column violation
            VectorXd ws(ns);
            for (int i = 0; i < ns; ++i)
                ws[i] = la[i] <= 0.5 * kNegInf ? kNegInf : f[i] / eps + la[i];
            const VectorXd lse_t = kernel.lse_to_target(eps, ws);
            viol = 0.0;
            for (int j = 0; j < nt; ++j) {
                if (lb[j] <= 0.5 * kNegInf) continue;
                const double gj_new = -eps * lse_t[j];
                viol += std::exp(lb[j]) * std::abs(std::exp((g[j] - gj_new) / eps) - 1.0);
                g[j] = gj_new;
            }
            ++total_iters;
            if (viol <= tol) break;
        }
        if (last && viol > tol)
            throw ConvergenceError("sinkhorn did not reach the marginal tolerance (violation " +
                                   std::to_string(viol) + ")");
        out.epsilon = eps;
        out.marginal_violation = viol;
    }
    out.psi = f;
    out.phi = g;
    out.iterations = total_iters;
    return out;
}

double plan_entropy(const GridDensity& source, const GridDensity& target,
                    const KantorovichPotentials& pots) {
    const VectorXd la = log_masses(source), lb = log_masses(target);
    const MatrixXd c = pairwise_cost(*source.manifold, source.nodes, target.nodes);
    double h = 0.0;
    for (int i = 0; i < source.size(); ++i) {
        if (la[i] <= 0.5 * kNegInf) continue;
        for (int j = 0; j < target.size(); ++j) {
            if (lb[j] <= 0.5 * kNegInf) continue;
            const double lp =
                (pots.psi[i] + pots.phi[j] - c(i, j)) / pots.epsilon + la[i] + lb[j];
            if (lp > -700.0) h += std::exp(lp) * lp;
        }
    }
    return h;
}

// ---- grid potential ---------------------------------------------------------------

namespace {

int wrap_index(int i, int n) {
    int r = i % n;
    if (r < 0) r += n;
    return r;
}

} // namespace

GridPotential::GridPotential(GridDensity geometry, VectorXd theta_values, std::string spec)
    : grid_(std::move(geometry)), theta_(std::move(theta_values)), spec_(std::move(spec)) {
    const int d = static_cast<int>(grid_.shape.size());
    const bool torus = is_torus(*grid_.manifold);
    std::vector<double> h(d);
    if (torus) {
        const VectorXd sides = torus_sides(*grid_.manifold);
        for (int a = 0; a < d; ++a) h[a] = sides[a] / grid_.shape[a];
    } else {
        h[0] = grid_.nodes[grid_.shape[1]][0] - grid_.nodes[0][0];
        h[1] = grid_.nodes[1][1] - grid_.nodes[0][1];
    }

    auto node_at = [&](std::vector<int> multi) {
        for (int a = 0; a < d; ++a) {
            const bool periodic = torus || a == 1;
            if (periodic)
                multi[a] = wrap_index(multi[a], grid_.shape[a]);
            else
                multi[a] = std::clamp(multi[a], 0, grid_.shape[a] - 1);
        }
        return grid_.index(multi);
    };

    grad_.assign(d, VectorXd::Zero(grid_.size()));
    hess_.assign(grid_.size(), MatrixXd::Zero(d, d));
    std::vector<int> multi(d, 0);
    for (int idx = 0; idx < grid_.size(); ++idx) {
        int rem = idx;
        for (int a = d - 1; a >= 0; --a) {
            multi[a] = rem % grid_.shape[a];
            rem /= grid_.shape[a];
        }
        for (int a = 0; a < d; ++a) {
            std::vector<int> up = multi, dn = multi;
            up[a] += 1;
            dn[a] -= 1;
            const int iu = node_at(up), id = node_at(dn);
            const double span = (iu == idx || id == idx) ? 1.0 : 2.0;  // clamped edge
            grad_[a][idx] = (theta_[iu] - theta_[id]) / (span * h[a]);
            hess_[idx](a, a) = (theta_[iu] - 2.0 * theta_[idx] + theta_[id]) / (h[a] * h[a]);
        }
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) {
                std::vector<int> pp = multi, pm = multi, mp = multi, mm = multi;
                pp[a] += 1; pp[b] += 1;
                pm[a] += 1; pm[b] -= 1;
                mp[a] -= 1; mp[b] += 1;
                mm[a] -= 1; mm[b] -= 1;
                const double cross = (theta_[node_at(pp)] - theta_[node_at(pm)] -
                                      theta_[node_at(mp)] + theta_[node_at(mm)]) /
                                     (4.0 * h[a] * h[b]);
                hess_[idx](a, b) = cross;
                hess_[idx](b, a) = cross;
            }
    }
}

double GridPotential::interpolate_field(const VectorXd& p, const VectorXd& field) const {
    const int d = static_cast<int>(grid_.shape.size());
    const bool torus = is_torus(*grid_.manifold);
    std::vector<int> base(d);
    std::vector<double> frac(d);
    if (torus) {
        const VectorXd sides = torus_sides(*grid_.manifold);
        for (int a = 0; a < d; ++a) {
            const double h = sides[a] / grid_.shape[a];
            double u = std::fmod(p[a], sides[a]);
            if (u < 0) u += sides[a];
            u /= h;
            base[a] = std::min(static_cast<int>(std::floor(u)), grid_.shape[a] - 1);
            frac[a] = u - base[a];
        }
    } else {
        const double th0 = grid_.nodes[0][0];
        const double dth = grid_.nodes[grid_.shape[1]][0] - th0;
        const double dph = grid_.nodes[1][1] - grid_.nodes[0][1];
        double u0 = (p[0] - th0) / dth;
        u0 = std::clamp(u0, 0.0, grid_.shape[0] - 1.000001);
        base[0] = static_cast<int>(std::floor(u0));
        frac[0] = u0 - base[0];
        double u1 = std::fmod(p[1], 2.0 * M_PI);
        if (u1 < 0) u1 += 2.0 * M_PI;
        u1 /= dph;
        base[1] = std::min(static_cast<int>(std::floor(u1)), grid_.shape[1] - 1);
        frac[1] = u1 - base[1];
    }
    double out = 0.0;
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::vector<int> multi(d);
        for (int a = 0; a < d; ++a) {
            const int bit = (c >> a) & 1;
            w *= bit ? frac[a] : 1.0 - frac[a];
            int ia = base[a] + bit;
            const bool periodic = torus || a == 1;
            ia = periodic ? wrap_index(ia, grid_.shape[a]) : std::min(ia, grid_.shape[a] - 1);
            multi[a] = ia;
        }
        out += w * field[grid_.index(multi)];
    }
    return out;
}

double GridPotential::value(const VectorXd& p) const { return interpolate_field(p, theta_); }

VectorXd GridPotential::partials(const VectorXd& p) const {
    const int d = static_cast<int>(grid_.shape.size());
    VectorXd g(d);
    for (int a = 0; a < d; ++a) g[a] = interpolate_field(p, grad_[a]);
    return g;
}

MatrixXd GridPotential::partials2(const VectorXd& p) const {
    const int d = static_cast<int>(grid_.shape.size());
    MatrixXd h(d, d);
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            VectorXd field(grid_.size());
            for (int i = 0; i < grid_.size(); ++i) field[i] = hess_[i](a, b);
            h(a, b) = interpolate_field(p, field);
            h(b, a) = h(a, b);
        }
    return h;
}

VectorXd GridPotential::gradient_at_node(int idx) const {
    const int d = static_cast<int>(grid_.shape.size());
    VectorXd g(d);
    for (int a = 0; a < d; ++a) g[a] = grad_[a][idx];
    return g;
}

MatrixXd GridPotential::hessian_at_node(int idx) const { return hess_[idx]; }

std::string GridPotential::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    const int d = static_cast<int>(grid_.shape.size());
    for (int a = 0; a < d; ++a) os << "x" << a << ",";
    os << "theta\n";
    for (int i = 0; i < grid_.size(); ++i) {
        for (int a = 0; a < d; ++a) os << grid_.nodes[i][a] << ",";
        os << theta_[i] << "\n";
    }
    return os.str();
}

// ---- theta extraction ----------------------------------------------------------------

namespace {

/// Embedding used for barycenter comparison: each torus axis on its circle,
/// the sphere chart into R^3.
VectorXd embed_for_mean(const Manifold& m, const VectorXd& p) {
    if (is_torus(m)) {
        const VectorXd sides = torus_sides(m);
        VectorXd out(2 * p.size());
        for (int a = 0; a < p.size(); ++a) {
            const double ang = 2.0 * M_PI * p[a] / sides[a];
            out[2 * a] = sides[a] / (2.0 * M_PI) * std::cos(ang);
            out[2 * a + 1] = sides[a] / (2.0 * M_PI) * std::sin(ang);
        }
        return out;
    }
    const double r = sphere_radius(m);
    VectorXd out(3);
    out << r * std::sin(p[0]) * std::cos(p[1]), r * std::sin(p[0]) * std::sin(p[1]),
        r * std::cos(p[0]);
    return out;
}

} // namespace

ThetaExtraction theta_from_potentials(const GridDensity& source, const GridDensity& target,
                                      const KantorovichPotentials& pots) {
    ThetaExtraction out;
    VectorXd theta = -pots.psi;
    // pin the irrelevant additive constant for reproducibility
    const VectorXd a = masses(source);
    theta.array() -= a.dot(theta);
    out.theta = std::make_shared<GridPotential>(source, theta,
                                                "grid-theta:" + source.manifold->name());

    const Manifold& m = *source.manifold;
    VectorXd push = VectorXd::Zero(embed_for_mean(m, source.nodes[0]).size());
    VectorXd tgt = VectorXd::Zero(push.size());
    for (int i = 0; i < source.size(); ++i) {
        if (a[i] <= 0.0) continue;
        const VectorXd v =
            m.metric(source.nodes[i]).ldlt().solve(out.theta->gradient_at_node(i));
        const VectorXd y = m.geodesic_closed(source.nodes[i], v, 1.0).point;
        push += a[i] * embed_for_mean(m, y);
    }
    const VectorXd b = masses(target);
    for (int j = 0; j < target.size(); ++j)
        tgt += b[j] * embed_for_mean(m, target.nodes[j]);
    out.barycenter_error = (push - tgt).norm();
    return out;
}

} // namespace mdc
