#include "longtail/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace longtail {

namespace {

constexpr double kBig = std::numeric_limits<double>::infinity();

struct Counted {
  const Objective& f;
  int evals = 0;
  double operator()(const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : kBig;
  }
};

double step_for(double x, double h) { return h * std::max(1.0, std::abs(x)); }

}  // namespace

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double s = step_for(x[i], h);
    y[i] = x[i] + s;
    const double fp = f(y);
    y[i] = x[i] - s;
    const double fm = f(y);
    y[i] = x[i];
    g[i] = (fp - fm) / (2.0 * s);
  }
  return g;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double h) {
  const Eigen::Index d = x.size();
  Eigen::MatrixXd H(d, d);
  Eigen::VectorXd y = x;
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double si = step_for(x[i], h);
    y[i] = x[i] + si;
    const double fp = f(y);
    y[i] = x[i] - si;
    const double fm = f(y);
    y[i] = x[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (si * si);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double sj = step_for(x[j], h);
      double acc = 0.0;
      for (int a : {1, -1}) {
        for (int b : {1, -1}) {
          y[i] = x[i] + a * si;
          y[j] = x[j] + b * sj;
          acc += a * b * f(y);
        }
      }
      y[i] = x[i];
      y[j] = x[j];
      H(i, j) = H(j, i) = acc / (4.0 * si * sj);
    }
  }
  return H;
}

OptimizeResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                           const OptimizeOptions& opts) {
  Counted fc{f};
  const Eigen::Index d = x0.size();
  std::vector<Eigen::VectorXd> pts(d + 1, x0);
  std::vector<double> vals(d + 1);
  for (Eigen::Index i = 0; i < d; ++i) pts[i + 1][i] += opts.initial_step * std::max(1.0, std::abs(x0[i]));
  for (Eigen::Index i = 0; i <= d; ++i) vals[i] = fc(pts[i]);

  std::vector<Eigen::Index> order(d + 1);
  bool converged = false;
  while (fc.evals < opts.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const double best = vals[order.front()];
    const double worst = vals[order.back()];
    double diameter = 0.0;
    for (Eigen::Index i = 1; i <= d; ++i) {
      diameter = std::max(diameter, (pts[order[i]] - pts[order[0]]).lpNorm<Eigen::Infinity>());
    }
    if (std::isfinite(worst) && worst - best <= opts.rel_tol * (std::abs(best) + 1e-10) &&
        diameter <= opts.param_tol) {
      converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) centroid += pts[order[i]];
    centroid /= static_cast<double>(d);
    const Eigen::Index w = order.back();
    const Eigen::VectorXd xr = centroid + (centroid - pts[w]);
    const double fr = fc(xr);
    if (fr < best) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[w]);
      const double fe = fc(xe);
      if (fe < fr) {
        pts[w] = xe;
        vals[w] = fe;
      } else {
        pts[w] = xr;
        vals[w] = fr;
      }
      continue;
    }
    if (fr < vals[order[d - 1]]) {
      pts[w] = xr;
      vals[w] = fr;
      continue;
    }
    const bool outside = fr < worst;
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[w] - centroid));
    const double fcv = fc(xc);
    if (fcv < (outside ? fr : worst)) {
      pts[w] = xc;
      vals[w] = fcv;
      continue;
    }
    const Eigen::VectorXd xb = pts[order[0]];
    for (Eigen::Index i = 1; i <= d; ++i) {
      pts[order[i]] = xb + 0.5 * (pts[order[i]] - xb);
      vals[order[i]] = fc(pts[order[i]]);
    }
  }
  const auto best = std::min_element(vals.begin(), vals.end()) - vals.begin();
  OptimizeResult r;
  r.x = pts[best];
  r.value = vals[best];
  r.evaluations = fc.evals;
  r.converged = converged;
  return r;
}

OptimizeResult bfgs(const Objective& f, const Eigen::VectorXd& x0, const OptimizeOptions& opts) {
  Counted fc{f};
  const Eigen::Index d = x0.size();
  auto grad = [&](const Eigen::VectorXd& x) {
    return numeric_gradient([&](const Eigen::VectorXd& y) { return fc(y); }, x);
  };
  Eigen::VectorXd x = x0;
  double fx = fc(x);
  Eigen::VectorXd g = grad(x);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(d, d);
  bool converged = false;
  int stalls = 0;
  while (fc.evals < opts.max_evals) {
    if (!std::isfinite(fx) || !g.allFinite()) break;
    const double gtol = 1e-7 * std::max(1.0, std::abs(fx));
    if (g.lpNorm<Eigen::Infinity>() <= gtol) {
      converged = true;
      break;
    }
    Eigen::VectorXd p = -Hinv * g;
    if (p.dot(g) >= 0.0) {
      Hinv.setIdentity();
      p = -g;
    }
    double t = 1.0;
    double ft = kBig;
    Eigen::VectorXd xt;
    const double slope = p.dot(g);
    for (int k = 0; k < 40; ++k) {
      xt = x + t * p;
      ft = fc(xt);
      if (ft <= fx + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    if (!(ft <= fx)) break;
    const Eigen::VectorXd s = xt - x;
    const double change = fx - ft;
    x = xt;
    const Eigen::VectorXd g_new = grad(x);
    const Eigen::VectorXd yv = g_new - g;
    fx = ft;
    g = g_new;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) +
             rho * s * s.transpose();
    }
    if (change <= opts.rel_tol * (std::abs(fx) + 1e-10) &&
        s.lpNorm<Eigen::Infinity>() <= opts.param_tol) {
      if (++stalls >= 2) {
        converged = true;
        break;
      }
    } else {
      stalls = 0;
    }
  }
  OptimizeResult r;
  r.x = x;
  r.value = fx;
  r.gradient_norm = g.lpNorm<Eigen::Infinity>();
  r.evaluations = fc.evals;
  r.converged = converged;
  return r;
}

OptimizeResult minimize(const Objective& f, const Eigen::VectorXd& x0, const OptimizeOptions& opts) {
  // The simplex only needs to reach the basin; BFGS and the Newton polish
  // supply the precision.
  OptimizeOptions coarse = opts;
  coarse.rel_tol = std::max(opts.rel_tol, 1e-7);
  coarse.param_tol = std::max(opts.param_tol, 1e-4);
  OptimizeResult nm = nelder_mead(f, x0, coarse);
  OptimizeOptions rest = opts;
  rest.max_evals = std::max(200, opts.max_evals - nm.evaluations);
  OptimizeResult qn = bfgs(f, nm.x, rest);
  qn.evaluations += nm.evaluations;
  if (!(qn.value <= nm.value)) {
    nm.evaluations = qn.evaluations;
    nm.gradient_norm = qn.gradient_norm;
    return nm;
  }
  // A converged simplex with a stalled line search is still a local optimum.
  qn.converged = qn.converged || (nm.converged && qn.gradient_norm <= 1e-4 * std::max(1.0, std::abs(qn.value)));

  // Newton polish: the objective is flat to rounding near the optimum, so a
  // step from the curvature pins the arguments down well below param_tol.
  if (qn.x.size() <= 6 && std::isfinite(qn.value)) {
    Counted fc{f};
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXd g = numeric_gradient([&](const Eigen::VectorXd& y) { return fc(y); }, qn.x);
      const Eigen::MatrixXd H = numeric_hessian([&](const Eigen::VectorXd& y) { return fc(y); }, qn.x);
      if (!g.allFinite() || !H.allFinite()) break;
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() != Eigen::Success) break;
      const Eigen::VectorXd step = llt.solve(g);
      if (step.lpNorm<Eigen::Infinity>() > 0.1) break;
      const Eigen::VectorXd xn = qn.x - step;
      const double fn = fc(xn);
      if (!(fn <= qn.value + 1e-13 * std::abs(qn.value))) break;
      qn.x = xn;
      qn.value = fn;
      qn.gradient_norm = g.lpNorm<Eigen::Infinity>();
      if (step.lpNorm<Eigen::Infinity>() < 1e-12) break;
    }
    qn.evaluations += fc.evals;
  }
  return qn;
}

}  // namespace longtail
