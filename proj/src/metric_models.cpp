#include "lab/metric_models.hpp"

#include "lab/error.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <variant>

namespace lab::metric {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  std::string s = buf;
  for (char& ch : s)
    if (ch == '.') ch = 'p';
    else if (ch == '-') ch = 'm';
    else if (ch == '+') ch = 'P';
  return s;
}

struct Hyperbolic {
  double c;
};
struct Conformal {
  double c;
  BumpSpec bump;
  double eps;
};
struct Warped {
  WarpProfile profile;
};
struct Custom {
  std::string name;
  double c;
};

using Kind = std::variant<Hyperbolic, Conformal, Warped, Custom>;

// Log-conformal factor sigma with g = exp(2 sigma) I, its gradient and Laplacian.
struct ConformalFactor {
  double sigma;
  Vec2 grad;
  double laplacian;
};

ConformalFactor conformal_factor(double c, const BumpSpec* bump, double eps, const Vec2& p) {
  const double y = p.y();
  ConformalFactor cf{-std::log(c * y), Vec2(0.0, -1.0 / y), 1.0 / (y * y)};
  if (bump != nullptr && eps != 0.0) {
    const BumpValue b = evaluate_bump(*bump, p);
    cf.sigma += eps * b.psi;
    cf.grad += eps * b.grad;
    cf.laplacian += eps * b.laplacian;
  }
  return cf;
}

Christoffel conformal_christoffel(const Vec2& ds) {
  // Gamma^k_ij = delta_ik s_j + delta_jk s_i - delta_ij s_k
  Christoffel g;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        g.gamma[k](i, j) = (i == k ? ds[j] : 0.0) + (j == k ? ds[i] : 0.0) - (i == j ? ds[k] : 0.0);
  return g;
}

Mat2 custom_metric(const Custom& m, const Vec2& p) {
  if (m.name == "euclidean") return Mat2::Identity();
  if (m.name == "poincare_disk") {
    const double w = 1.0 - p.squaredNorm();
    return (4.0 / (m.c * m.c * w * w)) * Mat2::Identity();
  }
  // halfplane_fd
  return (1.0 / (m.c * m.c * p.y() * p.y())) * Mat2::Identity();
}

bool custom_in_domain(const Custom& m, const Vec2& p) {
  if (!p.allFinite()) return false;
  if (m.name == "euclidean") return true;
  if (m.name == "poincare_disk") return p.squaredNorm() < 1.0;
  return p.y() > 0.0;
}

}  // namespace

struct MetricModel::Impl {
  Kind kind;
};

// ---------------------------------------------------------------------------
// warp profiles

double WarpProfile::f(double r) const {
  if (name == "cosh") return std::cosh(a * r);
  if (name == "cosh_mix") return std::cosh(r) + b * std::cosh(2.0 * r);
  if (name == "sinh") return std::sinh(a * r) / a;
  if (name == "sin") return std::sin(r);
  return 1.0;
}

double WarpProfile::df(double r) const {
  if (name == "cosh") return a * std::sinh(a * r);
  if (name == "cosh_mix") return std::sinh(r) + 2.0 * b * std::sinh(2.0 * r);
  if (name == "sinh") return std::cosh(a * r);
  if (name == "sin") return std::cos(r);
  return 0.0;
}

double WarpProfile::d2f(double r) const {
  if (name == "cosh") return a * a * std::cosh(a * r);
  if (name == "cosh_mix") return std::cosh(r) + 4.0 * b * std::cosh(2.0 * r);
  if (name == "sinh") return a * std::sinh(a * r);
  if (name == "sin") return -std::sin(r);
  return 0.0;
}

double WarpProfile::r_min() const {
  if (name == "sinh" || name == "sin") return 0.0;
  return -std::numeric_limits<double>::infinity();
}

double WarpProfile::r_max() const {
  if (name == "sin") return std::numbers::pi;
  return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// bump

BumpValue evaluate_bump(const BumpSpec& bump, const ChartPoint& p) {
  const Vec2 d = p - bump.center;
  const double r2 = bump.radius * bump.radius;
  const double s = d.squaredNorm() / r2;
  BumpValue out;
  if (s >= 1.0) return out;
  const double q = 1.0 / (1.0 - s);
  out.psi = bump.amplitude * std::exp(1.0 - q);
  const double psi_s = -out.psi * q * q;
  const double psi_ss = out.psi * (q * q * q * q - 2.0 * q * q * q);
  out.grad = psi_s * (2.0 / r2) * d;
  // |grad s|^2 = 4 s / R^2, lap s = 4 / R^2 in two dimensions
  out.laplacian = psi_ss * 4.0 * s / r2 + psi_s * 4.0 / r2;
  return out;
}

// ---------------------------------------------------------------------------
// construction

MetricModel MetricModel::hyperbolic(double c) {
  if (!(c > 0.0)) throw LabError(ErrorCode::InvalidArgument, "hyperbolic model needs c > 0");
  return MetricModel(std::make_shared<Impl>(Impl{Hyperbolic{c}}));
}

MetricModel MetricModel::conformal_perturbed(double c, BumpSpec bump, double epsilon) {
  if (!(c > 0.0)) throw LabError(ErrorCode::InvalidArgument, "conformal model needs c > 0");
  if (!(bump.radius > 0.0))
    throw LabError(ErrorCode::InvalidArgument, "bump radius must be positive");
  if (bump.center.y() - bump.radius <= 0.0)
    throw LabError(ErrorCode::InvalidArgument, "bump support must stay inside y > 0");
  return MetricModel(std::make_shared<Impl>(Impl{Conformal{c, bump, epsilon}}));
}

MetricModel MetricModel::warped_product(WarpProfile profile) {
  static const char* known[] = {"cosh", "cosh_mix", "sinh", "sin", "const"};
  bool ok = false;
  for (const char* k : known) ok = ok || profile.name == k;
  if (!ok) throw LabError(ErrorCode::InvalidArgument, "unknown warp profile '" + profile.name + "'");
  if ((profile.name == "cosh" || profile.name == "sinh") && !(profile.a > 0.0))
    throw LabError(ErrorCode::InvalidArgument, "warp profile needs a > 0");
  if (profile.name == "cosh_mix" && !(profile.b >= 0.0))
    throw LabError(ErrorCode::InvalidArgument, "cosh_mix needs b >= 0 so that f > 0");
  return MetricModel(std::make_shared<Impl>(Impl{Warped{std::move(profile)}}));
}

MetricModel MetricModel::custom_chart(const std::string& name, double c) {
  if (name != "euclidean" && name != "poincare_disk" && name != "halfplane_fd")
    throw LabError(ErrorCode::InvalidArgument, "unknown custom chart '" + name + "'");
  if (!(c > 0.0)) throw LabError(ErrorCode::InvalidArgument, "custom chart needs c > 0");
  return MetricModel(std::make_shared<Impl>(Impl{Custom{name, c}}));
}

MetricModel MetricModel::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string kind(spec.substr(0, colon));
  std::map<std::string, std::string> kv;
  if (colon != std::string_view::npos) {
    std::string rest(spec.substr(colon + 1));
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw LabError(ErrorCode::ValidationError, "model parameter '" + item + "' lacks '='");
      const std::string key = item.substr(0, eq);
      if (kv.count(key))
        throw LabError(ErrorCode::ValidationError, "model parameter '" + key + "' repeated");
      kv[key] = item.substr(eq + 1);
    }
  }
  auto take_num = [&](const std::string& key, double def) {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
      throw LabError(ErrorCode::ValidationError,
                     "model parameter '" + key + "' is not a number: " + it->second);
    kv.erase(it);
    return v;
  };
  auto take_str = [&](const std::string& key, const std::string& def) {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto finish = [&](MetricModel m) {
    if (!kv.empty())
      throw LabError(ErrorCode::ValidationError,
                     "unknown model parameter '" + kv.begin()->first + "' for kind '" + kind + "'");
    return m;
  };

  if (kind == "hyperbolic") return finish(hyperbolic(take_num("c", 1.0)));
  if (kind == "conformal") {
    const double c = take_num("c", 1.0);
    const double eps = take_num("eps", 0.0);
    BumpSpec b;
    b.center.x() = take_num("cx", b.center.x());
    b.center.y() = take_num("cy", b.center.y());
    b.radius = take_num("radius", b.radius);
    b.amplitude = take_num("amp", b.amplitude);
    return finish(conformal_perturbed(c, b, eps));
  }
  if (kind == "warped") {
    WarpProfile p;
    p.name = take_str("profile", "cosh");
    p.a = take_num("a", 1.0);
    p.b = take_num("b", 0.25);
    return finish(warped_product(p));
  }
  if (kind == "custom") {
    const std::string name = take_str("name", "euclidean");
    return finish(custom_chart(name, take_num("c", 1.0)));
  }
  throw LabError(ErrorCode::ValidationError, "unknown model kind '" + kind + "'");
}

std::string MetricModel::spec_string() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hyperbolic>) {
          return "hyperbolic:c=" + fmt_double(m.c);
        } else if constexpr (std::is_same_v<T, Conformal>) {
          return "conformal:c=" + fmt_double(m.c) + ",eps=" + fmt_double(m.eps) +
                 ",cx=" + fmt_double(m.bump.center.x()) + ",cy=" + fmt_double(m.bump.center.y()) +
                 ",radius=" + fmt_double(m.bump.radius) + ",amp=" + fmt_double(m.bump.amplitude);
        } else if constexpr (std::is_same_v<T, Warped>) {
          std::string s = "warped:profile=" + m.profile.name;
          if (m.profile.name == "cosh" || m.profile.name == "sinh")
            s += ",a=" + fmt_double(m.profile.a);
          if (m.profile.name == "cosh_mix") s += ",b=" + fmt_double(m.profile.b);
          return s;
        } else {
          return "custom:name=" + m.name + ",c=" + fmt_double(m.c);
        }
      },
      impl_->kind);
}

std::string MetricModel::tag() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hyperbolic>) {
          return "hyperbolic-c" + fmt_short(m.c);
        } else if constexpr (std::is_same_v<T, Conformal>) {
          return "conformal-c" + fmt_short(m.c) + "-eps" + fmt_short(m.eps);
        } else if constexpr (std::is_same_v<T, Warped>) {
          std::string s = "warped-" + m.profile.name;
          if (m.profile.name == "cosh" || m.profile.name == "sinh") s += "-a" + fmt_short(m.profile.a);
          if (m.profile.name == "cosh_mix") s += "-b" + fmt_short(m.profile.b);
          return s;
        } else {
          return "custom-" + m.name;
        }
      },
      impl_->kind);
}

ModelKind MetricModel::kind() const {
  switch (impl_->kind.index()) {
    case 0: return ModelKind::Hyperbolic;
    case 1: return ModelKind::ConformalPerturbed;
    case 2: return ModelKind::WarpedProduct;
    default: return ModelKind::CustomChart;
  }
}

double MetricModel::base_c() const {
  if (auto* h = std::get_if<Hyperbolic>(&impl_->kind)) return h->c;
  if (auto* h = std::get_if<Conformal>(&impl_->kind)) return h->c;
  return 0.0;
}

double MetricModel::epsilon() const {
  if (auto* h = std::get_if<Conformal>(&impl_->kind)) return h->eps;
  return 0.0;
}

const BumpSpec* MetricModel::bump() const {
  if (auto* h = std::get_if<Conformal>(&impl_->kind)) return &h->bump;
  return nullptr;
}

const WarpProfile* MetricModel::profile() const {
  if (auto* w = std::get_if<Warped>(&impl_->kind)) return &w->profile;
  return nullptr;
}

bool MetricModel::constant_curvature() const {
  return std::visit(
      [](const auto& m) -> bool {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hyperbolic>) return true;
        else if constexpr (std::is_same_v<T, Conformal>) return m.eps == 0.0 || m.bump.amplitude == 0.0;
        else if constexpr (std::is_same_v<T, Warped>) return m.profile.name != "cosh_mix";
        else return true;
      },
      impl_->kind);
}

// ---------------------------------------------------------------------------
// domain

bool MetricModel::in_domain(const ChartPoint& p) const {
  if (!p.allFinite()) return false;
  return std::visit(
      [&](const auto& m) -> bool {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hyperbolic> || std::is_same_v<T, Conformal>) {
          return p.y() > 0.0;
        } else if constexpr (std::is_same_v<T, Warped>) {
          return p.x() > m.profile.r_min() && p.x() < m.profile.r_max();
        } else {
          return custom_in_domain(m, p);
        }
      },
      impl_->kind);
}

std::string MetricModel::domain_description() const {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hyperbolic> || std::is_same_v<T, Conformal>) {
          return "upper half-plane y > 0";
        } else if constexpr (std::is_same_v<T, Warped>) {
          return "strip " + fmt_double(m.profile.r_min()) + " < r < " + fmt_double(m.profile.r_max());
        } else {
          if (m.name == "euclidean") return "whole plane";
          if (m.name == "poincare_disk") return "open unit disk";
          return "upper half-plane y > 0";
        }
      },
      impl_->kind);
}

void MetricModel::require_in_domain(const ChartPoint& p) const {
  if (!in_domain(p)) {
    std::ostringstream os;
    os << "point (" << p.x() << ", " << p.y() << ") outside chart domain (" << domain_description()
       << ")";
    throw LabError(ErrorCode::PointOutsideChart, os.str());
  }
}

// ---------------------------------------------------------------------------
// finite differences for custom charts

namespace {

// Step along coordinate l, capped by the chart length of one Riemannian unit
// so stencils stay inside charts whose metric blows up at the boundary.
template <class MetricFn>
double fd_step(const MetricFn& g, const Vec2& p, int l, double power) {
  const double unit = 1.0 / std::sqrt(g(p)(l, l));
  return std::pow(std::numeric_limits<double>::epsilon(), power) * std::min(std::max(1.0, std::abs(p[l])), unit);
}

struct MetricDerivatives {
  std::array<Mat2, 2> d;  // d[l] = d g / d x^l
};

template <class MetricFn, class DomainFn>
MetricDerivatives fd_metric_derivatives(const MetricFn& g, const DomainFn& inside, const Vec2& p) {
  MetricDerivatives out;
  for (int l = 0; l < 2; ++l) {
    const double h = fd_step(g, p, l, 0.2);
    Vec2 e = Vec2::Zero();
    e[l] = h;
    for (int k : {-2, -1, 1, 2})
      if (!inside(Vec2(p + k * e)))
        throw LabError(ErrorCode::DerivativeUnavailable, "finite-difference stencil leaves the chart");
    out.d[l] = (-g(Vec2(p + 2 * e)) + 8.0 * g(Vec2(p + e)) - 8.0 * g(Vec2(p - e)) +
                g(Vec2(p - 2 * e))) /
               (12.0 * h);
  }
  return out;
}

// Brioschi formula for K of E du^2 + 2F du dv + G dv^2 with fourth-order
// central differences.
template <class MetricFn, class DomainFn>
double fd_brioschi(const MetricFn& g, const DomainFn& inside, const Vec2& p) {
  const MetricDerivatives d1 = fd_metric_derivatives(g, inside, p);
  const Mat2 g0 = g(p);
  const double E = g0(0, 0), F = g0(0, 1), G = g0(1, 1);
  const double Eu = d1.d[0](0, 0), Ev = d1.d[1](0, 0);
  const double Fu = d1.d[0](0, 1), Fv = d1.d[1](0, 1);
  const double Gu = d1.d[0](1, 1), Gv = d1.d[1](1, 1);

  auto second = [&](int l, int entry_i, int entry_j) {
    const double h = fd_step(g, p, l, 1.0 / 6.0);
    Vec2 e = Vec2::Zero();
    e[l] = h;
    for (int k : {-2, -1, 1, 2})
      if (!inside(Vec2(p + k * e)))
        throw LabError(ErrorCode::DerivativeUnavailable, "finite-difference stencil leaves the chart");
    auto at = [&](int k) { return g(Vec2(p + k * e))(entry_i, entry_j); };
    return (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h);
  };
  const double Evv = second(1, 0, 0);
  const double Guu = second(0, 1, 1);
  // mixed derivative: differentiate dF/dv along u
  const double hu = fd_step(g, p, 0, 0.2);
  auto Fv_at = [&](double du) {
    const Vec2 q(p.x() + du, p.y());
    if (!inside(q))
      throw LabError(ErrorCode::DerivativeUnavailable, "finite-difference stencil leaves the chart");
    return fd_metric_derivatives(g, inside, q).d[1](0, 1);
  };
  const double Fuv =
      (-Fv_at(2 * hu) + 8.0 * Fv_at(hu) - 8.0 * Fv_at(-hu) + Fv_at(-2 * hu)) / (12.0 * hu);

  Eigen::Matrix3d A;
  A << -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,
       Fv - 0.5 * Gu, E, F,
       0.5 * Gv, F, G;
  Eigen::Matrix3d B;
  B << 0.0, 0.5 * Ev, 0.5 * Gu,
       0.5 * Ev, E, F,
       0.5 * Gu, F, G;
  const double W = E * G - F * F;
  return (A.determinant() - B.determinant()) / (W * W);
}

}  // namespace

// ---------------------------------------------------------------------------
// oracles

Mat2 MetricModel::metric_tensor(const ChartPoint& p) const {
  require_in_domain(p);
  return std::visit(
      [&](const auto& m) -> Mat2 {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hyperbolic>) {
          const double s = 1.0 / (m.c * m.c * p.y() * p.y());
          return s * Mat2::Identity();
        } else if constexpr (std::is_same_v<T, Conformal>) {
          const double sigma = conformal_factor(m.c, &m.bump, m.eps, p).sigma;
          return std::exp(2.0 * sigma) * Mat2::Identity();
        } else if constexpr (std::is_same_v<T, Warped>) {
          const double f = m.profile.f(p.x());
          Mat2 g = Mat2::Zero();
          g(0, 0) = 1.0;
          g(1, 1) = f * f;
          return g;
        } else {
          return custom_metric(m, p);
        }
      },
      impl_->kind);
}

Christoffel MetricModel::christoffel(const ChartPoint& p) const {
  require_in_domain(p);
  return std::visit(
      [&](const auto& m) -> Christoffel {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hyperbolic>) {
          return conformal_christoffel(conformal_factor(m.c, nullptr, 0.0, p).grad);
        } else if constexpr (std::is_same_v<T, Conformal>) {
          return conformal_christoffel(conformal_factor(m.c, &m.bump, m.eps, p).grad);
        } else if constexpr (std::is_same_v<T, Warped>) {
          const double r = p.x();
          const double f = m.profile.f(r), df = m.profile.df(r);
          Christoffel g;
          g.gamma[0](1, 1) = -f * df;
          g.gamma[1](0, 1) = g.gamma[1](1, 0) = df / f;
          return g;
        } else {
          auto gfun = [&m](const Vec2& q) { return custom_metric(m, q); };
          auto inside = [&m](const Vec2& q) { return custom_in_domain(m, q); };
          const MetricDerivatives d = fd_metric_derivatives(gfun, inside, p);
          const Mat2 ginv = custom_metric(m, p).inverse();
          Christoffel g;
          for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
              for (int j = 0; j < 2; ++j) {
                double s = 0.0;
                for (int l = 0; l < 2; ++l)
                  s += ginv(k, l) * (d.d[i](l, j) + d.d[j](l, i) - d.d[l](i, j));
                g.gamma[k](i, j) = 0.5 * s;
              }
          return g;
        }
      },
      impl_->kind);
}

double MetricModel::gaussian_curvature(const ChartPoint& p) const {
  require_in_domain(p);
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hyperbolic>) {
          return -m.c * m.c;
        } else if constexpr (std::is_same_v<T, Conformal>) {
          // -e^{-2 sigma} Lap sigma, arranged to be exactly -c^2 off the bump
          const BumpValue b = evaluate_bump(m.bump, p);
          const double y2 = p.y() * p.y();
          return -m.c * m.c * std::exp(-2.0 * m.eps * b.psi) * (1.0 + m.eps * y2 * b.laplacian);
        } else if constexpr (std::is_same_v<T, Warped>) {
          return -m.profile.d2f(p.x()) / m.profile.f(p.x());
        } else {
          if (m.name == "euclidean") return 0.0;
          auto gfun = [&m](const Vec2& q) { return custom_metric(m, q); };
          auto inside = [&m](const Vec2& q) { return custom_in_domain(m, q); };
          return fd_brioschi(gfun, inside, p);
        }
      },
      impl_->kind);
}

Vec2 MetricModel::unit_lengths(const ChartPoint& p) const {
  const Mat2 g = metric_tensor(p);
  return {1.0 / std::sqrt(g(0, 0)), 1.0 / std::sqrt(g(1, 1))};
}

CurvatureBounds curvature_bounds(const MetricModel& model, const SamplingBox& box, int grid) {
  if (grid < 2) throw LabError(ErrorCode::InvalidArgument, "curvature grid needs >= 2 points per axis");
  CurvatureBounds b;
  b.grid = grid;
  b.domain = box;
  b.inf_K = std::numeric_limits<double>::infinity();
  b.sup_K = -std::numeric_limits<double>::infinity();
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double u = box.lo.x() + (box.hi.x() - box.lo.x()) * i / (grid - 1);
    for (int j = 0; j < grid; ++j) {
      const double v = box.lo.y() + (box.hi.y() - box.lo.y()) * j / (grid - 1);
      const double K = model.gaussian_curvature(Vec2(u, v));
      b.inf_K = std::min(b.inf_K, K);
      b.sup_K = std::max(b.sup_K, K);
      ++b.sample_count;
      const double delta = K - mean;
      mean += delta / static_cast<double>(b.sample_count);
      m2 += delta * (K - mean);
    }
  }
  b.mean_K = mean;
  b.variance_K = m2 / static_cast<double>(b.sample_count);
  b.c = b.inf_K < 0.0 ? std::sqrt(-b.inf_K) : 0.0;
  b.not_negatively_curved = b.sup_K >= 0.0;
  return b;
}

}  // namespace lab::metric
