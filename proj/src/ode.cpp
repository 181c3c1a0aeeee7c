#include "lab/ode.hpp"

#include "lab/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lab::ode {

namespace {

constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// PI controller constants (Hairer & Wanner's DOPRI5 defaults)
constexpr double kBeta = 0.04;
constexpr double kExpo1 = 0.2 - kBeta * 0.75;
constexpr double kSafe = 0.9;
constexpr double kFacc1 = 1.0 / 0.2;
constexpr double kFacc2 = 1.0 / 10.0;

bool is_chart_error(const LabError& e) {
  return e.code() == ErrorCode::PointOutsideChart || e.code() == ErrorCode::DerivativeUnavailable;
}

}  // namespace

DormandPrince45::DormandPrince45(Rhs rhs, Options options)
    : rhs_(std::move(rhs)), opt_(std::move(options)) {}

void DormandPrince45::eval(double t, const State& y, State& dy) {
  ++stats_.rhs_evals;
  rhs_(t, y, dy);
}

double DormandPrince45::error_norm(const State& y_old, const State& y_new,
                                   const State& err) const {
  const Eigen::Index n = y_old.size();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc =
        atol_[i] + opt_.rtol * std::max(std::abs(y_old[i]), std::abs(y_new[i]));
    const double r = err[i] / sc;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

void DormandPrince45::reset(double t0, const State& y0, double direction) {
  t_ = t_prev_ = t0;
  dir_ = direction >= 0 ? 1.0 : -1.0;
  y_ = y0;
  const Eigen::Index n = y0.size();
  f_.resize(n);
  for (State* s : {&k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &err_, &atol_, &r1_, &r2_,
                   &r3_, &r4_, &r5_})
    s->setZero(n);
  eval(t_, y_, f_);
  facold_ = 1e-4;
  last_rejected_ = false;
  h_ = opt_.h_init > 0 ? dir_ * opt_.h_init : initial_step();
  r1_ = y_;
}

void DormandPrince45::replace_state(const State& y) {
  y_ = y;
  eval(t_, y_, f_);
}

double DormandPrince45::initial_step() {
  if (opt_.abs_scale)
    opt_.abs_scale(y_, atol_);
  else
    atol_.setConstant(opt_.atol);
  const Eigen::Index n = y_.size();
  double dnf = 0.0, dny = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sk = atol_[i] + opt_.rtol * std::abs(y_[i]);
    dnf += (f_[i] / sk) * (f_[i] / sk);
    dny += (y_[i] / sk) * (y_[i] / sk);
  }
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
  h = std::min(h, opt_.h_max);
  ytmp_ = y_ + dir_ * h * f_;
  try {
    eval(t_ + dir_ * h, ytmp_, k2_);
  } catch (const LabError& e) {
    if (!is_chart_error(e)) throw;
    return dir_ * h * 1e-3;
  }
  double der2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sk = atol_[i] + opt_.rtol * std::abs(y_[i]);
    const double d = (k2_[i] - f_[i]) / sk;
    der2 += d * d;
  }
  der2 = std::sqrt(der2 / static_cast<double>(n)) / h;
  const double der12 = std::max(der2, std::sqrt(dnf / static_cast<double>(n)));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  h = std::min({100.0 * h, h1, opt_.h_max});
  return dir_ * h;
}

void DormandPrince45::step(double t_stop) {
  const double remaining = t_stop - t_;
  if (remaining * dir_ <= 0.0) return;
  bool chart_trouble = false;
  for (;;) {
    if (stats_.accepted + stats_.rejected >= opt_.max_steps)
      throw LabError(ErrorCode::StepSizeUnderflow,
                     "step budget exhausted at t=" + std::to_string(t_));
    double h = h_;
    if (std::abs(h) > opt_.h_max) h = dir_ * opt_.h_max;
    const double h_planned = h;
    bool last = false;
    if (std::abs(h) >= std::abs(t_stop - t_) * (1.0 - 1e-12)) {
      h = t_stop - t_;
      last = true;
    }
    const double h_floor = 1e-14 * std::max(1.0, std::abs(t_));
    if (std::abs(h) < h_floor && !last)
      throw LabError(chart_trouble ? ErrorCode::ChartExit : ErrorCode::StepSizeUnderflow,
                     "step size underflow at t=" + std::to_string(t_));

    bool chart_fail = false;
    try {
      ytmp_ = y_ + h * a21 * f_;
      eval(t_ + c2 * h, ytmp_, k2_);
      ytmp_ = y_ + h * (a31 * f_ + a32 * k2_);
      eval(t_ + c3 * h, ytmp_, k3_);
      ytmp_ = y_ + h * (a41 * f_ + a42 * k2_ + a43 * k3_);
      eval(t_ + c4 * h, ytmp_, k4_);
      ytmp_ = y_ + h * (a51 * f_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
      eval(t_ + c5 * h, ytmp_, k5_);
      ytmp_ = y_ + h * (a61 * f_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
      eval(t_ + h, ytmp_, k6_);
      ynew_ = y_ + h * (a71 * f_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
      eval(t_ + h, ynew_, k7_);
    } catch (const LabError& e) {
      if (!is_chart_error(e)) throw;
      chart_fail = true;
    }
    if (chart_fail || !ynew_.allFinite()) {
      chart_trouble = chart_trouble || chart_fail;
      ++stats_.rejected;
      h_ = 0.25 * h;
      last_rejected_ = true;
      continue;
    }
    err_ = h * (e1 * f_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    if (opt_.abs_scale)
      opt_.abs_scale(y_, atol_);
    else
      atol_.setConstant(opt_.atol);
    const double err = error_norm(y_, ynew_, err_);
    const double fac11 = std::pow(std::max(err, 1e-300), kExpo1);
    if (err <= 1.0) {
      double fac = fac11 / std::pow(facold_, kBeta);
      fac = std::max(kFacc2, std::min(kFacc1, fac / kSafe));
      double hnew = h / fac;
      if (last_rejected_) hnew = dir_ * std::min(std::abs(hnew), std::abs(h));
      // a step shortened to hit t_stop says nothing about the next one
      if (last && !last_rejected_ && std::abs(hnew) < std::abs(h_planned)) hnew = h_planned;
      facold_ = std::max(err, 1e-4);
      // continuous extension
      r1_ = y_;
      r2_ = ynew_ - y_;
      r3_ = h * f_ - r2_;
      r4_ = r2_ - h * k7_ - r3_;
      r5_ = h * (d1 * f_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
      t_prev_ = t_;
      t_ = last ? t_stop : t_ + h;
      y_ = ynew_;
      f_ = k7_;
      h_ = hnew;
      last_rejected_ = false;
      ++stats_.accepted;
      return;
    }
    ++stats_.rejected;
    h_ = h / std::min(kFacc1, fac11 / kSafe);
    last_rejected_ = true;
  }
}

State DormandPrince45::dense(double t) const {
  const double h = t_ - t_prev_;
  if (h == 0.0) return r1_;
  const double s = (t - t_prev_) / h;
  const double s1 = 1.0 - s;
  return r1_ + s * (r2_ + s1 * (r3_ + s * (r4_ + s1 * r5_)));
}

Stats drive(DormandPrince45& stepper, double t0, const State& y0, double t_end,
            std::span<const double> output_times, const DriveHooks& hooks) {
  const double dir = t_end >= t0 ? 1.0 : -1.0;
  stepper.reset(t0, y0, dir);
  std::size_t next = 0;
  auto emit_until = [&](double t_hi, bool inclusive) {
    while (next < output_times.size()) {
      const double to = output_times[next];
      const bool inside = inclusive ? (to - t_hi) * dir <= 0.0 : (to - t_hi) * dir < 0.0;
      if (!inside) break;
      if (hooks.on_output) {
        if (to == stepper.t())
          hooks.on_output(to, stepper.y());
        else
          hooks.on_output(to, stepper.dense(to));
      }
      ++next;
    }
  };
  // outputs at t0 itself
  while (next < output_times.size() && output_times[next] == t0) {
    if (hooks.on_output) hooks.on_output(t0, y0);
    ++next;
  }
  while ((t_end - stepper.t()) * dir > 0.0) {
    double t_stop = t_end;
    if (hooks.land_on_outputs && next < output_times.size() && (output_times[next] - t_end) * dir < 0.0)
      t_stop = output_times[next];
    stepper.step(t_stop);
    // Dense samples strictly inside the step come from the unprojected interpolant.
    emit_until(stepper.t(), false);
    if (hooks.on_accept) hooks.on_accept(stepper);
    emit_until(stepper.t(), true);
  }
  return stepper.stats();
}

}  // namespace lab::ode
