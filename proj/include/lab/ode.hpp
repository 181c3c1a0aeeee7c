#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <span>

namespace lab::ode {

using State = Eigen::VectorXd;

// dy/dt = f(t, y). May throw LabError(PointOutsideChart); the stepper then
// shrinks the step and reports ChartExit if it cannot make progress.
using Rhs = std::function<void(double t, const State& y, State& dydt)>;

// Fills the per-component absolute scale used by the mixed error test
// |err_i| <= atol_i + rtol * max(|y_old_i|, |y_new_i|).
using AbsScale = std::function<void(const State& y, State& atol)>;

struct Options {
  double rtol = 1e-10;
  double atol = 1e-10;
  AbsScale abs_scale;  // overrides atol when set
  double h_init = 0.0;  // 0 picks an initial step automatically
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 2'000'000;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

// Embedded Runge-Kutta 5(4) of Dormand and Prince with PI step-size control
// and the standard fourth-order continuous extension.
class DormandPrince45 {
 public:
  DormandPrince45(Rhs rhs, Options options);

  // Starts a new integration; `direction` is +1 for forward, -1 for backward.
  void reset(double t0, const State& y0, double direction);

  // Takes one accepted step that does not pass t_stop.
  void step(double t_stop);

  double t() const { return t_; }
  double t_prev() const { return t_prev_; }
  const State& y() const { return y_; }
  const Stats& stats() const { return stats_; }
  double last_step() const { return t_ - t_prev_; }

  // Dense output on [t_prev, t] of the last accepted step.
  State dense(double t) const;

  // Replaces the current state (after a projection); derivative is recomputed
  // and the dense interpolant of the last step is left untouched.
  void replace_state(const State& y);

 private:
  double error_norm(const State& y_old, const State& y_new, const State& err) const;
  double initial_step();
  void eval(double t, const State& y, State& dy);

  Rhs rhs_;
  Options opt_;
  Stats stats_;
  double t_ = 0.0;
  double t_prev_ = 0.0;
  double dir_ = 1.0;
  double h_ = 0.0;
  double facold_ = 1e-4;
  bool last_rejected_ = false;
  State y_, f_;
  State k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, err_, atol_;
  // continuous extension coefficients of the last accepted step
  State r1_, r2_, r3_, r4_, r5_;
};

// Integrates from t0 to t_end, emitting the solution at each requested output
// time (which must lie in [t0, t_end] in integration order) and calling
// `on_accept` after every accepted step. `on_accept` may replace the state
// through the stepper.
struct DriveHooks {
  std::function<void(double t, const State& y)> on_output;
  std::function<void(DormandPrince45& stepper)> on_accept;
  // Shorten steps so every output time is a step end (no interpolation).
  bool land_on_outputs = false;
};

Stats drive(DormandPrince45& stepper, double t0, const State& y0, double t_end,
            std::span<const double> output_times, const DriveHooks& hooks);

}  // namespace lab::ode
