#include "heavyhail/bellman.hpp"

#include "heavyhail/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <utility>

namespace heavyhail {

namespace {

constexpr int kDampingSteps = 4;

// One backward step of the theta-method from (y1, v1) to y0 < y1. The implicit
// equation is quadratic in v0; the root continuous with v1 is taken.
double backward_step(const BellmanProblem& p, double beta, double y0, double y1, double v1, double theta) {
  const double dy = y1 - y0;
  const double k = p.sigma2 / (2.0 * theta * dy);
  const double A = p.alpha_hat / 4.0;
  const double B = p.eta * y0 - p.a + k;
  const double explicit_part = (1.0 - theta) * dy * p.slope(y1, v1, beta);
  const double C = beta - p.h * y0 + k * (explicit_part - v1);
  const double disc = B * B - 4.0 * A * C;
  if (!(disc >= 0.0) || !(B > 0.0)) {
    std::ostringstream os;
    os << "bellman: tail step has no admissible root at y=" << y0;
    throw NumericalError(os.str());
  }
  return -2.0 * C / (B + std::sqrt(disc));
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

}  // namespace

BellmanProblem BellmanProblem::from(const EwfParams& p) {
  return BellmanProblem{p.a(), p.sigma2(), p.eta, p.h(), p.r(), p.alpha_hat()};
}

double BellmanProblem::drift(double y, double v, double beta) const {
  return beta + 0.25 * alpha_hat * v * v + (eta * y - a) * v - h * y;
}

double BellmanProblem::escape_tol() const { return 1e-9 * std::max(r, limit()); }

ValueFunction::ValueFunction(double beta_star, std::vector<double> grid, std::vector<double> values, double limit,
                             double alpha_hat)
    : beta_star_(beta_star), grid_(std::move(grid)), values_(std::move(values)), limit_(limit), alpha_hat_(alpha_hat) {
  if (grid_.size() < 2 || grid_.size() != values_.size() || grid_.front() != 0.0) {
    throw NumericalError("value function: grid must start at 0 with at least two points");
  }
}

double ValueFunction::operator()(double y) const {
  if (y <= 0.0) return values_.front();
  if (y >= grid_.back()) return limit_;
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), y);
  const auto k = static_cast<std::size_t>(it - grid_.begin());
  const double y0 = grid_[k - 1];
  const double y1 = grid_[k];
  const double w = (y - y0) / (y1 - y0);
  return values_[k - 1] + w * (values_[k] - values_[k - 1]);
}

double forward_window(const BellmanProblem& p) {
  return 10.0 * std::max({1.0, p.sigma2 * (p.r + p.limit()) / p.h, p.a / p.eta});
}

IvpTrajectory integrate_ivp(double beta, const BellmanProblem& p, double y_max, double step) {
  if (!(step > 0.0) || !(y_max > 0.0)) throw DomainError("integrate_ivp: step and y_max must be positive");
  const double tol = p.escape_tol();
  const double lower = -p.r - tol;
  const double upper = p.limit() + tol;
  const auto steps = static_cast<std::size_t>(std::ceil(y_max / step));

  IvpTrajectory out;
  out.beta = beta;
  out.step = step;
  out.grid.reserve(std::min<std::size_t>(steps + 1, 1u << 20));
  out.v.reserve(out.grid.capacity());
  double v = -p.r;
  out.grid.push_back(0.0);
  out.v.push_back(v);
  for (std::size_t k = 0; k < steps; ++k) {
    const double y = static_cast<double>(k) * step;
    const double k1 = p.slope(y, v, beta);
    const double k2 = p.slope(y + 0.5 * step, v + 0.5 * step * k1, beta);
    const double k3 = p.slope(y + 0.5 * step, v + 0.5 * step * k2, beta);
    const double k4 = p.slope(y + step, v + step * k3, beta);
    const double next = v + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.grid.push_back(static_cast<double>(k + 1) * step);
    out.v.push_back(next);
    if (!std::isfinite(next)) {
      out.classification = v >= 0.0 ? Escape::Above : Escape::Below;
      return out;
    }
    if (next < lower) {
      out.classification = Escape::Below;
      return out;
    }
    if (next > upper) {
      out.classification = Escape::Above;
      return out;
    }
    v = next;
  }
  out.classification = Escape::Converged;
  return out;
}

BetaBracket beta_bracket(const BellmanProblem& p, const BellmanOptions& opts) {
  BetaBracket b;
  b.case2 = !(p.a > -p.alpha_hat * p.r / 4.0);
  if (b.case2) {
    const double floor2 = -p.a * p.r - p.alpha_hat * p.r * p.r / 4.0;
    b.lo = floor2 + 1e-12 * std::abs(floor2);
  }
  const double sigma = std::sqrt(p.sigma2);
  b.hi_formula = p.sigma2 * p.h / (2.0 * p.eta) + 2.0 * sigma * (p.r + p.limit()) * std::sqrt(p.eta / std::numbers::pi) *
                                                      std::exp(-p.sigma2 * p.a * p.a / (4.0 * p.eta));
  b.hi = std::max(b.hi_formula, b.lo);
  const double y_max = opts.y_max > 0.0 ? opts.y_max : forward_window(p);
  const double step = opts.step > 0.0 ? opts.step : y_max / 2e5;
  while (integrate_ivp(b.hi, p, y_max, step).classification != Escape::Above) {
    if (++b.doublings > 64) throw NumericalError("bellman: no upper bracket found for beta");
    b.hi = b.hi > 0.0 ? 2.0 * b.hi : 1.0;
  }
  return b;
}

ValueFunction solve_bellman(const BellmanProblem& p, const BellmanOptions& opts) {
  if (!(p.h > 0.0)) throw ModelError("bellman: h > 0 required");
  if (!(p.sigma2 > 0.0) || !(p.eta > 0.0) || !(p.alpha_hat > 0.0) || !(p.r >= 0.0)) {
    throw ModelError("bellman: sigma2 > 0, eta > 0, alpha_hat > 0 and r >= 0 required");
  }
  const double L = p.limit();
  SolveDiagnostics diag;
  diag.y_forward = opts.y_max > 0.0 ? opts.y_max : forward_window(p);
  diag.step = opts.step > 0.0 ? opts.step : diag.y_forward / 2e5;

  // Shooting on beta.
  const BetaBracket bracket = beta_bracket(p, opts);
  double lo = bracket.lo;
  double hi = bracket.hi;
  IvpTrajectory traj_lo = integrate_ivp(lo, p, diag.y_forward, diag.step);
  if (traj_lo.classification != Escape::Below) {
    throw NumericalError("bellman: lower bracket beta=" + fmt(lo) + " does not escape below -r");
  }
  IvpTrajectory traj_hi = integrate_ivp(hi, p, diag.y_forward, diag.step);
  int iter = 0;
  while (iter < opts.max_iter) {
    const double mid = lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi) || hi - lo <= opts.tol_beta) break;
    ++iter;
    IvpTrajectory t = integrate_ivp(mid, p, diag.y_forward, diag.step);
    if (t.classification == Escape::Below) {
      lo = mid;
      traj_lo = std::move(t);
    } else {
      hi = mid;
      traj_hi = std::move(t);
    }
  }
  if (iter >= opts.max_iter && hi - lo > opts.tol_beta) {
    throw NumericalError("bellman: bisection did not converge within " + std::to_string(opts.max_iter) + " iterations");
  }
  if (!(hi > 0.0)) throw NumericalError("bellman: beta* > 0 violated");
  diag.iterations = iter;
  diag.beta_lo = lo;
  diag.beta_hi = hi;
  const double beta = hi;

  // The true solution lies between the two bracketing trajectories; keep the
  // stretch where they agree.
  const double match_tol = opts.match_tol * L;
  const std::size_t common = std::min(traj_lo.v.size(), traj_hi.v.size());
  std::size_t m = 0;
  while (m + 1 < common) {
    const double a = traj_lo.v[m + 1];
    const double b = traj_hi.v[m + 1];
    if (std::abs(b - a) > match_tol || a < -p.r || b > L) break;
    ++m;
  }
  diag.y_match = traj_hi.grid[m];

  // Beyond the match point the forward problem is unstable; sweep backward from a
  // far point where v is pinned by its asymptote h/eta - K/(eta y).
  const double K = beta + p.alpha_hat * L * L / 4.0 - p.a * L;
  double y_far = 2.0 * diag.y_forward;
  if (K > 0.0) y_far = std::max(y_far, K / (p.eta * opts.tail_tol * L));
  // Start a little further out and drop the start-up layer above y_far.
  std::vector<std::pair<double, double>> tail;
  double y = 1.05 * y_far;
  double v = K > 0.0 ? L - K / (p.eta * y) : L;
  int steps_taken = 0;
  while (y > diag.y_match) {
    double dy = std::max(diag.step, opts.tail_ratio * (y - diag.y_match));
    double y_next = y - dy;
    if (y_next < diag.y_match + 0.5 * diag.step) y_next = diag.y_match;
    const double theta = steps_taken < kDampingSteps ? 1.0 : 0.5;
    v = backward_step(p, beta, y_next, y, v, theta);
    y = y_next;
    if (y <= y_far) tail.emplace_back(y, v);
    ++steps_taken;
  }

  std::vector<double> grid;
  std::vector<double> values;
  grid.reserve(m + tail.size());
  values.reserve(m + tail.size());
  for (std::size_t k = 0; k <= m; ++k) {
    grid.push_back(traj_hi.grid[k]);
    values.push_back(0.5 * (traj_lo.v[k] + traj_hi.v[k]));
  }
  values.front() = -p.r;
  diag.splice_gap = std::abs(tail.back().second - values.back());
  for (auto it = tail.rbegin() + 1; it != tail.rend(); ++it) {
    grid.push_back(it->first);
    values.push_back(it->second);
  }
  if (diag.splice_gap > 1e-4 * L) {
    throw NumericalError("bellman: forward and tail solutions disagree by " + fmt(diag.splice_gap));
  }

  double running = -p.r;
  for (double& value : values) {
    const double fixed = std::max(running, std::clamp(value, -p.r, L));
    diag.correction = std::max(diag.correction, std::abs(fixed - value));
    value = fixed;
    running = fixed;
  }
  if (diag.correction > 1e-4 * L) {
    throw NumericalError("bellman: monotone correction " + fmt(diag.correction) + " exceeds 1e-4 h/eta");
  }

  ValueFunction vf(beta, std::move(grid), std::move(values), L, p.alpha_hat);
  vf.diagnostics = diag;
  return vf;
}

double theta_star(const ValueFunction& vf, double w) {
  if (w < 0.0) throw DomainError("theta_star: workload must be nonnegative");
  return 0.5 * vf.alpha_hat() * vf(w);
}

namespace {

// Three-point derivatives on a nonuniform grid at interior node k.
struct Derivs {
  double d1;
  double d2;
};

Derivs central(const std::vector<double>& x, const std::vector<double>& f, std::size_t k) {
  const double h1 = x[k] - x[k - 1];
  const double h2 = x[k + 1] - x[k];
  const double d1 = (-h2 / (h1 * (h1 + h2))) * f[k - 1] + ((h2 - h1) / (h1 * h2)) * f[k] +
                    (h1 / (h2 * (h1 + h2))) * f[k + 1];
  const double d2 = 2.0 * (h1 * f[k + 1] - (h1 + h2) * f[k] + h2 * f[k - 1]) / (h1 * h2 * (h1 + h2));
  return {d1, d2};
}

}  // namespace

double bellman_residual(const ValueFunction& vf, const BellmanProblem& p) {
  const auto& x = vf.grid();
  const auto& v = vf.values();
  const double beta = vf.beta_star();
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < x.size(); ++k) {
    const double dv = central(x, v, k).d1;
    const double lhs = 0.5 * p.sigma2 * dv;
    const double rhs = p.drift(x[k], v[k], beta);
    const double scale = std::abs(lhs) + beta + 0.25 * p.alpha_hat * v[k] * v[k] + std::abs(p.eta * x[k] * v[k]) +
                         p.h * x[k] + std::abs(p.a * v[k]);
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

LinearOdeCheck verify_via_linear_ode(const ValueFunction& vf, const BellmanProblem& p, double y_check) {
  const auto& x = vf.grid();
  const auto& v = vf.values();
  const double beta = vf.beta_star();
  const double q2 = p.alpha_hat / (2.0 * p.sigma2);

  // Work with g = log y = -q2 int v; y itself underflows on long grids.
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t k = 1; k < x.size(); ++k) g[k] = g[k - 1] - q2 * 0.5 * (v[k] + v[k - 1]) * (x[k] - x[k - 1]);

  LinearOdeCheck out;
  out.y0 = std::exp(g[0]);
  // Second-order one-sided difference for y'(0).
  {
    const double h1 = x[1] - x[0];
    const double h2 = x[2] - x[1];
    const double y1 = std::exp(g[1]);
    const double y2 = std::exp(g[2]);
    out.dy0 = (-(2.0 * h1 + h2) / (h1 * (h1 + h2))) * out.y0 + ((h1 + h2) / (h1 * h2)) * y1 -
              (h1 / (h2 * (h1 + h2))) * y2;
  }
  out.dy0_expected = p.r * q2;

  const double limit = y_check > 0.0 ? y_check : x.back();
  for (std::size_t k = 1; k + 1 < x.size() && x[k] <= limit; ++k) {
    const Derivs d = central(x, g, k);
    const double q1 = (2.0 / p.sigma2) * (p.eta * x[k] - p.a);
    const double q0 = (2.0 / p.sigma2) * (beta - p.h * x[k]);
    // y''/y - q1 y'/y + q2 q0 with y'/y = g', y''/y = g'' + g'^2.
    const double res = d.d2 + d.d1 * d.d1 - q1 * d.d1 + q2 * q0;
    out.max_residual = std::max(out.max_residual, std::abs(res));
  }
  return out;
}

}  // namespace heavyhail
