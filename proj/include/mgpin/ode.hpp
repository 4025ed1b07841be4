#pragma once

#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace mgpin::ode {

/// dy/dt = f(t, y), written into `dy` (pre-sized to y.size()).
using Rhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

/// Forward-difference Jacobian, one column per right-hand-side evaluation.
/// Columns are computed in parallel; `rhs` must be reentrant.
Eigen::MatrixXd fd_jacobian(const Rhs& rhs, double t, const Eigen::VectorXd& y, const Eigen::VectorXd& f0);

/// Single-threaded reference for fd_jacobian; identical output.
Eigen::MatrixXd fd_jacobian_serial(const Rhs& rhs, double t, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& f0);

/// Central-difference Jacobian with relative step `h` (perturbation
/// h * max(1, |y_j|)).
Eigen::MatrixXd central_jacobian(const Rhs& rhs, double t, const Eigen::VectorXd& y, double h);

struct Options {
  double rel_tol = 1e-6;
  double abs_tol = 1e-8;
  double max_step = std::numeric_limits<double>::infinity();
  double first_step = 0.0;  // 0 selects automatically
  long max_steps = 5'000'000;
};

struct Stats {
  long steps = 0;
  long rejected = 0;
  long rhs_evals = 0;
  long jacobian_evals = 0;
  long lu_decompositions = 0;
  /// Sum over accepted steps of the max-norm of the local error estimate.
  double accumulated_error = 0.0;
};

/// Variable-order (1-5), quasi-constant step size backward differentiation
/// formula integrator in backward-difference form, with Newton iterations on
/// (I - c J). The local error per step is held to rel_tol*|y| + abs_tol in the
/// max norm. Dense output is available inside the last step.
class Bdf {
 public:
  Bdf(Rhs rhs, double t0, Eigen::VectorXd y0, double t_bound, Options options);

  /// Advances one step. Throws NumericFailure on non-finite state or step
  /// size underflow.
  void step();
  bool finished() const { return t_ >= t_bound_; }

  double t() const { return t_; }
  double t_old() const { return t_old_; }
  Eigen::VectorXd y() const { return D_.col(0); }
  /// Interpolated state for t_old() <= t <= t().
  Eigen::VectorXd dense(double t) const;
  int order() const { return order_; }
  double step_size() const { return h_abs_; }
  const Stats& stats() const { return stats_; }

 private:
  static constexpr int kMaxOrder = 5;
  static constexpr int kNewtonMaxIter = 4;

  void change_differences(double factor);
  double select_initial_step(const Eigen::VectorXd& y0, const Eigen::VectorXd& f0);
  double scaled_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& scale) const;
  void evaluate(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy);
  void refresh_jacobian(double t, const Eigen::VectorXd& y);
  void factorize(double c);

  Rhs rhs_;
  double t_;
  double t_old_;
  double t_bound_;
  Options opt_;
  int n_;
  // Column j holds the j-th backward difference; kMaxOrder + 3 columns.
  Eigen::MatrixXd D_;
  Eigen::MatrixXd dense_D_;
  int dense_order_ = 1;
  double dense_h_ = 0.0;
  int order_ = 1;
  int equal_steps_ = 0;
  double h_abs_ = 0.0;
  double newton_tol_;
  Eigen::MatrixXd J_;
  bool jac_current_ = false;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool lu_valid_ = false;
  Stats stats_;
};

}  // namespace mgpin::ode
