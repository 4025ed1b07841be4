#include "mgpin/ode.hpp"

#include <array>
#include <cmath>

#include "mgpin/error.hpp"

namespace mgpin::ode {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

// NDF coefficients of Klopfenstein/Shampine; order 5 falls back to plain BDF.
constexpr std::array<double, 6> kKappa = {0.0, -0.1850, -1.0 / 9.0, -0.0823, -0.0415, 0.0};

struct Coefficients {
  std::array<double, 6> gamma{};
  std::array<double, 6> alpha{};
  std::array<double, 7> error_const{};
  Coefficients() {
    for (int k = 1; k < 6; ++k) gamma[k] = gamma[k - 1] + 1.0 / k;
    for (int k = 0; k < 6; ++k) alpha[k] = (1.0 - kKappa[k]) * gamma[k];
    for (int k = 0; k < 6; ++k) error_const[k] = kKappa[k] * gamma[k] + 1.0 / (k + 1);
    error_const[6] = 1.0 / 7.0;
  }
};

const Coefficients& coeffs() {
  static const Coefficients c;
  return c;
}

// Matrix mapping backward differences on a grid of spacing h to spacing
// factor*h.
Eigen::MatrixXd compute_r(int order, double factor) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(order + 1, order + 1);
  m.row(0).setOnes();
  for (int i = 1; i <= order; ++i)
    for (int j = 1; j <= order; ++j) m(i, j) = (i - 1 - factor * j) / i;
  for (int i = 1; i <= order; ++i) m.row(i) = m.row(i).cwiseProduct(m.row(i - 1));
  return m;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

template <bool Parallel>
Eigen::MatrixXd forward_jacobian(const Rhs& rhs, double t, const Eigen::VectorXd& y, const Eigen::VectorXd& f0) {
  const long n = y.size();
  Eigen::MatrixXd jac(n, n);
  const double sq = std::sqrt(kEps);
  if constexpr (Parallel) {
#pragma omp parallel
    {
      Eigen::VectorXd yp = y;
      Eigen::VectorXd fp(n);
#pragma omp for schedule(static)
      for (long j = 0; j < n; ++j) {
        const double h = sq * std::max(1.0, std::abs(y(j)));
        yp(j) = y(j) + h;
        rhs(t, yp, fp);
        jac.col(j) = (fp - f0) / (yp(j) - y(j));
        yp(j) = y(j);
      }
    }
  } else {
    Eigen::VectorXd yp = y;
    Eigen::VectorXd fp(n);
    for (long j = 0; j < n; ++j) {
      const double h = sq * std::max(1.0, std::abs(y(j)));
      yp(j) = y(j) + h;
      rhs(t, yp, fp);
      jac.col(j) = (fp - f0) / (yp(j) - y(j));
      yp(j) = y(j);
    }
  }
  return jac;
}

}  // namespace

Eigen::MatrixXd fd_jacobian(const Rhs& rhs, double t, const Eigen::VectorXd& y, const Eigen::VectorXd& f0) {
  return forward_jacobian<true>(rhs, t, y, f0);
}

Eigen::MatrixXd fd_jacobian_serial(const Rhs& rhs, double t, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& f0) {
  return forward_jacobian<false>(rhs, t, y, f0);
}

Eigen::MatrixXd central_jacobian(const Rhs& rhs, double t, const Eigen::VectorXd& y, double h) {
  const long n = y.size();
  Eigen::MatrixXd jac(n, n);
#pragma omp parallel
  {
    Eigen::VectorXd yp = y;
    Eigen::VectorXd fp(n), fm(n);
#pragma omp for schedule(static)
    for (long j = 0; j < n; ++j) {
      const double step = h * std::max(1.0, std::abs(y(j)));
      yp(j) = y(j) + step;
      rhs(t, yp, fp);
      yp(j) = y(j) - step;
      rhs(t, yp, fm);
      jac.col(j) = (fp - fm) / (2.0 * step);
      yp(j) = y(j);
    }
  }
  return jac;
}

Bdf::Bdf(Rhs rhs, double t0, Eigen::VectorXd y0, double t_bound, Options options)
    : rhs_(std::move(rhs)), t_(t0), t_old_(t0), t_bound_(t_bound), opt_(options), n_(static_cast<int>(y0.size())) {
  if (!(opt_.rel_tol > 0.0) || !(opt_.abs_tol > 0.0)) throw InvalidArgument("ODE tolerances must be > 0");
  if (!(t_bound >= t0)) throw InvalidArgument("ODE t_bound must not precede t0");
  if (!all_finite(y0)) throw NumericFailure("ODE initial state is not finite");
  opt_.rel_tol = std::max(opt_.rel_tol, 100.0 * kEps);
  newton_tol_ = std::max(10.0 * kEps / opt_.rel_tol, std::min(0.03, std::sqrt(opt_.rel_tol)));

  Eigen::VectorXd f0(n_);
  evaluate(t0, y0, f0);
  if (!all_finite(f0)) throw NumericFailure("ODE right-hand side is not finite at t0");
  h_abs_ = opt_.first_step > 0.0 ? opt_.first_step : select_initial_step(y0, f0);
  h_abs_ = std::min(h_abs_, opt_.max_step);
  if (t_bound > t0) h_abs_ = std::min(h_abs_, t_bound - t0);

  D_ = Eigen::MatrixXd::Zero(n_, kMaxOrder + 3);
  D_.col(0) = y0;
  D_.col(1) = f0 * h_abs_;
  dense_D_ = D_.leftCols(1);
  dense_order_ = 0;
  J_ = Eigen::MatrixXd::Zero(n_, n_);
  refresh_jacobian(t0, y0);
}

void Bdf::evaluate(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
  dy.resize(n_);
  rhs_(t, y, dy);
  ++stats_.rhs_evals;
}

void Bdf::refresh_jacobian(double t, const Eigen::VectorXd& y) {
  Eigen::VectorXd f0(n_);
  evaluate(t, y, f0);
  J_ = fd_jacobian(rhs_, t, y, f0);
  stats_.rhs_evals += n_;
  ++stats_.jacobian_evals;
  jac_current_ = true;
  lu_valid_ = false;
}

void Bdf::factorize(double c) {
  lu_.compute(Eigen::MatrixXd::Identity(n_, n_) - c * J_);
  ++stats_.lu_decompositions;
  lu_valid_ = true;
}

double Bdf::scaled_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& scale) const {
  return n_ == 0 ? 0.0 : v.cwiseQuotient(scale).cwiseAbs().maxCoeff();
}

double Bdf::select_initial_step(const Eigen::VectorXd& y0, const Eigen::VectorXd& f0) {
  if (n_ == 0) return std::max(1e-6, t_bound_ - t_);
  const Eigen::VectorXd scale = (opt_.abs_tol + opt_.rel_tol * y0.array().abs()).matrix();
  const double d0 = scaled_norm(y0, scale);
  const double d1 = scaled_norm(f0, scale);
  const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  Eigen::VectorXd f1(n_);
  evaluate(t_ + h0, y0 + h0 * f0, f1);
  const double d2 = scaled_norm(f1 - f0, scale) / h0;
  const double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::sqrt(0.01 / std::max(d1, d2));
  return std::min(100.0 * h0, h1);
}

void Bdf::change_differences(double factor) {
  const Eigen::MatrixXd r = compute_r(order_, factor);
  const Eigen::MatrixXd u = compute_r(order_, 1.0);
  const Eigen::MatrixXd ru = r * u;
  D_.leftCols(order_ + 1) = (D_.leftCols(order_ + 1) * ru).eval();
}

void Bdf::step() {
  if (finished()) return;
  if (stats_.steps >= opt_.max_steps) throw NumericFailure("ODE: maximum number of steps exceeded");
  const auto& co = coeffs();
  const double t = t_;
  const double min_step = 10.0 * std::abs(std::nextafter(t, HUGE_VAL) - t);

  if (h_abs_ > opt_.max_step) {
    change_differences(opt_.max_step / h_abs_);
    h_abs_ = opt_.max_step;
    equal_steps_ = 0;
    lu_valid_ = false;
  } else if (h_abs_ < min_step) {
    change_differences(min_step / h_abs_);
    h_abs_ = min_step;
    equal_steps_ = 0;
    lu_valid_ = false;
  }

  Eigen::VectorXd y_new(n_), d(n_), f(n_), dy(n_), y_predict(n_), scale(n_), psi(n_);
  double t_new = t;
  int n_iter = 0;
  double error_norm = 0.0;
  Eigen::VectorXd error(n_);

  while (true) {
    if (h_abs_ < min_step) {
      throw NumericFailure("ODE step size underflow at t = " + std::to_string(t) +
                           " (|y| = " + std::to_string(D_.col(0).norm()) + ")");
    }
    t_new = t + h_abs_;
    if (t_new > t_bound_) {
      t_new = t_bound_;
      change_differences((t_new - t) / h_abs_);
      equal_steps_ = 0;
      lu_valid_ = false;
    }
    const double h = t_new - t;
    h_abs_ = h;

    y_predict = D_.leftCols(order_ + 1).rowwise().sum();
    scale = (opt_.abs_tol + opt_.rel_tol * y_predict.array().abs()).matrix();
    psi.setZero();
    for (int j = 1; j <= order_; ++j) psi += D_.col(j) * co.gamma[j];
    psi /= co.alpha[order_];
    const double c = h / co.alpha[order_];

    bool converged = false;
    while (!converged) {
      if (!lu_valid_) factorize(c);
      // Simplified Newton iteration on the corrector.
      d.setZero();
      y_new = y_predict;
      double dy_norm_old = -1.0;
      converged = false;
      int k = 0;
      for (; k < kNewtonMaxIter; ++k) {
        evaluate(t_new, y_new, f);
        if (!all_finite(f)) break;
        dy = lu_.solve(c * f - psi - d);
        const double dy_norm = scaled_norm(dy, scale);
        double rate = -1.0;
        if (dy_norm_old >= 0.0) rate = dy_norm / dy_norm_old;
        if (rate >= 0.0 &&
            (rate >= 1.0 || std::pow(rate, kNewtonMaxIter - k) / (1.0 - rate) * dy_norm > newton_tol_))
          break;
        y_new += dy;
        d += dy;
        if (dy_norm == 0.0 || (rate >= 0.0 && rate / (1.0 - rate) * dy_norm < newton_tol_)) {
          converged = true;
          break;
        }
        dy_norm_old = dy_norm;
      }
      n_iter = k + 1;
      if (!converged) {
        if (jac_current_) break;
        refresh_jacobian(t_new, y_predict);
      }
    }

    if (!converged) {
      h_abs_ *= 0.5;
      change_differences(0.5);
      equal_steps_ = 0;
      lu_valid_ = false;
      ++stats_.rejected;
      continue;
    }

    const double safety = 0.9 * (2 * kNewtonMaxIter + 1) / (2 * kNewtonMaxIter + n_iter);
    scale = (opt_.abs_tol + opt_.rel_tol * y_new.array().abs()).matrix();
    error = co.error_const[order_] * d;
    error_norm = scaled_norm(error, scale);
    if (error_norm > 1.0) {
      const double factor = std::max(kMinFactor, safety * std::pow(error_norm, -1.0 / (order_ + 1)));
      h_abs_ *= factor;
      change_differences(factor);
      equal_steps_ = 0;
      ++stats_.rejected;
      continue;
    }

    ++equal_steps_;
    ++stats_.steps;
    stats_.accumulated_error += error.cwiseAbs().maxCoeff();
    t_old_ = t;
    t_ = t_new;
    jac_current_ = false;

    D_.col(order_ + 2) = d - D_.col(order_ + 1);
    D_.col(order_ + 1) = d;
    for (int i = order_; i >= 0; --i) D_.col(i) += D_.col(i + 1);
    if (!all_finite(D_.col(0))) throw NumericFailure("ODE state became non-finite at t = " + std::to_string(t_));

    dense_D_ = D_.leftCols(order_ + 1);
    dense_order_ = order_;
    dense_h_ = h;

    if (equal_steps_ < order_ + 1) return;

    const double err_m = order_ > 1 ? scaled_norm(co.error_const[order_ - 1] * D_.col(order_), scale) : HUGE_VAL;
    const double err_p =
        order_ < kMaxOrder ? scaled_norm(co.error_const[order_ + 1] * D_.col(order_ + 2), scale) : HUGE_VAL;
    const std::array<double, 3> norms = {err_m, error_norm, err_p};
    std::array<double, 3> factors{};
    for (int i = 0; i < 3; ++i) factors[i] = std::pow(norms[i], -1.0 / (order_ + i));
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (factors[i] > factors[best]) best = i;
    order_ += best - 1;
    const double factor = std::min(kMaxFactor, safety * factors[best]);
    h_abs_ *= factor;
    change_differences(factor);
    equal_steps_ = 0;
    lu_valid_ = false;
    return;
  }
}

Eigen::VectorXd Bdf::dense(double t) const {
  Eigen::VectorXd y = dense_D_.col(0);
  if (dense_order_ == 0) return y;
  double p = 1.0;
  for (int j = 1; j <= dense_order_; ++j) {
    const double shift = t_ - dense_h_ * (j - 1);
    p *= (t - shift) / (dense_h_ * j);
    y += dense_D_.col(j) * p;
  }
  return y;
}

}  // namespace mgpin::ode
