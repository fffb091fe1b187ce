#include "tilted/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tilted/errors.hpp"
#include "tilted/rng.hpp"

namespace tilted::theory {

namespace {

constexpr double kPi = std::numbers::pi;

void check_square_args(int n, double alpha) {
  if (n < 3) throw UsageError("square template: n must be >= 3");
  if (!(alpha > 0.0) || alpha > 1.0 / std::numbers::sqrt2 + 1e-12) {
    throw UsageError("square template: alpha must lie in (0, 1/sqrt(2)], got " + std::to_string(alpha));
  }
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi); }

}  // namespace

Eigen::MatrixXd make_square(int n, double alpha) { return rotated_square(n, alpha, 0.0); }

Eigen::MatrixXd rotated_square(int n, double alpha, double nu) {
  check_square_args(n, alpha);
  const double c = 0.5 * (n - 1);
  const double radius = alpha * c + 1e-9;
  const double cs = std::cos(nu), sn = std::sin(nu);
  Eigen::MatrixXd X(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double a = i - c, b = j - c;
      // R_{-nu} (a, b)
      const double s = nu == 0.0 ? a : cs * a + sn * b;
      const double t = nu == 0.0 ? b : -sn * a + cs * b;
      X(i, j) = (std::abs(s) <= radius && std::abs(t) <= radius) ? 1.0 : 0.0;
    }
  return X;
}

Eigen::MatrixXd resample_rotate(const Eigen::MatrixXd& image, double nu) {
  const int n = static_cast<int>(image.rows());
  if (image.cols() != n) throw StructuralError("resample_rotate: image must be square");
  if (nu == 0.0) return image;
  const double c = 0.5 * (n - 1);
  const double cs = std::cos(nu), sn = std::sin(nu);
  Eigen::MatrixXd out(n, n);
  auto at = [&](int i, int j) { return (i < 0 || j < 0 || i >= n || j >= n) ? 0.0 : image(i, j); };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double a = i - c, b = j - c;
      const double x = cs * a + sn * b + c;
      const double y = -sn * a + cs * b + c;
      // snap round-off so exact lattice rotations stay exact
      const double xr = std::abs(x - std::round(x)) < 1e-9 ? std::round(x) : x;
      const double yr = std::abs(y - std::round(y)) < 1e-9 ? std::round(y) : y;
      const int i0 = static_cast<int>(std::floor(xr)), j0 = static_cast<int>(std::floor(yr));
      const double wx = xr - i0, wy = yr - j0;
      out(i, j) = (1 - wx) * ((1 - wy) * at(i0, j0) + wy * at(i0, j0 + 1)) +
                  wx * ((1 - wy) * at(i0 + 1, j0) + wy * at(i0 + 1, j0 + 1));
    }
  return out;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& X) {
  if (!X.allFinite()) throw NumericError("svd: non-finite input");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X);
  if (svd.info() != Eigen::Success) throw NumericError("svd: decomposition failed");
  return svd.singularValues();
}

double rank_error_from_spectrum(const Eigen::VectorXd& sigma, int n, int F) {
  if (F < 0) throw UsageError("rank error: F must be >= 0");
  double tail = 0.0;
  for (Eigen::Index i = sigma.size() - 1; i >= F; --i) tail += sigma(i) * sigma(i);
  return tail / (static_cast<double>(n) * n);
}

double svd_rank_error(const Eigen::MatrixXd& X, int F) {
  return rank_error_from_spectrum(singular_values(X), static_cast<int>(X.rows()), F);
}

double psnr_from_mse(double mse) { return mse <= 0.0 ? 99.0 : std::min(99.0, 10.0 * std::log10(1.0 / mse)); }

int minimal_rank_for_psnr(const Eigen::VectorXd& sigma, int n, double psnr_db) {
  const double target = std::pow(10.0, -psnr_db / 10.0);
  for (int F = 0; F <= sigma.size(); ++F) {
    if (rank_error_from_spectrum(sigma, n, F) <= target) return F;
  }
  return static_cast<int>(sigma.size());
}

double diamond_eigenvalue(double alpha, int k) {
  if (k < 1) throw UsageError("diamond eigenvalue: k must be >= 1");
  const double sign = (k % 2 == 1) ? 1.0 : -1.0;
  return sign * 4.0 * std::numbers::sqrt2 * alpha / (kPi * (2 * k - 1));
}

DiamondSpectrum diamond_spectrum(double alpha, int K, int n) {
  if (K < 1) throw UsageError("diamond spectrum: K must be >= 1");
  check_square_args(n, alpha);
  DiamondSpectrum out;
  out.alpha = alpha;
  out.n = n;
  const double half = std::numbers::sqrt2 * alpha;
  for (int k = 1; k <= K; ++k) {
    out.eigenvalues.push_back(diamond_eigenvalue(alpha, k));
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) {
      const double s = grid_node(i, n);
      g(i) = std::abs(s) <= half ? std::cos(kPi * (2 * k - 1) * s / (2.0 * half)) / std::sqrt(half) : 0.0;
    }
    out.eigenfunctions.push_back(std::move(g));
  }
  return out;
}

double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g, double h) { return h * f.dot(g); }
double l2_norm(const Eigen::VectorXd& f, double h) { return std::sqrt(h * f.squaredNorm()); }

Eigen::MatrixXd symmetrized_operator(const Eigen::MatrixXd& X) {
  const double h = grid_step(static_cast<int>(X.rows()));
  return (X + X.transpose()) * h;
}

PowerResult power_stage(const Eigen::MatrixXd& S, const Eigen::VectorXd& u0, int steps, bool keep_iterates) {
  if (steps < 1) throw UsageError("power_stage: steps must be >= 1");
  if (S.rows() != S.cols() || S.rows() != u0.size()) throw StructuralError("power_stage: shape mismatch");
  const double h = grid_step(static_cast<int>(u0.size()));
  PowerResult r;
  r.u = u0 / l2_norm(u0, h);
  if (keep_iterates) r.iterates.push_back(r.u);
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd next = S * r.u;
    const double norm = l2_norm(next, h);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("power_stage: iterate vanished");
    r.u = next / norm;
    if (keep_iterates) r.iterates.push_back(r.u);
  }
  r.rayleigh = 0.5 * inner(r.u, S * r.u, h);
  if (!(r.rayleigh > 0.0)) {
    throw NumericError("power_stage: non-positive Rayleigh quotient " + std::to_string(r.rayleigh) +
                       " (output factor would be complex)");
  }
  r.output = std::sqrt(r.rayleigh) * r.u;
  return r;
}

Eigen::VectorXd gaussian_smooth(const Eigen::VectorXd& f, double sigma, double h) {
  if (!(sigma > 0.0)) throw UsageError("gaussian_smooth: sigma must be positive");
  const int radius = static_cast<int>(std::floor(5.0 * sigma / h));
  std::vector<double> w(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double x = k * h / sigma;
    w[k + radius] = std::exp(-0.5 * x * x);
    total += w[k + radius];
  }
  for (double& v : w) v /= total;
  const int n = static_cast<int>(f.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      const int j = i - k;
      if (j >= 0 && j < n) acc += w[k + radius] * f(j);
    }
    out(i) = acc;
  }
  return out;
}

AlignmentGradient::AlignmentGradient(int n, double alpha, double sigma, const Eigen::VectorXd& u, double nu_true)
    : n_(n), alpha_(alpha), sigma_(sigma), nu_true_(nu_true), h_(grid_step(n)) {
  if (!(sigma > 0.0)) throw UsageError("alignment gradient: sigma must be positive");
  if (u.size() != n) throw StructuralError("alignment gradient: factor length must equal n");
  // Rotated sample points reach radius sqrt(2); pad the 1D grid past that
  // plus the smoothing support.
  pad_ = static_cast<int>(std::ceil((std::numbers::sqrt2 - 1.0 + 6.0 * sigma) / h_)) + 2;
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(n + 2 * pad_);
  padded.segment(pad_, n) = u;
  const Eigen::VectorXd smooth = gaussian_smooth(padded, sigma, h_);
  u_smooth_.assign(smooth.data(), smooth.data() + smooth.size());

  auto hfun = [&](double s) { return normal_cdf((alpha - s) / sigma) - normal_cdf((-alpha - s) / sigma); };
  auto dhfun = [&](double s) { return (normal_pdf((alpha + s) / sigma) - normal_pdf((alpha - s) / sigma)) / sigma; };
  std::vector<BandPoint> all;
  double cmax = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = grid_node(i, n);
    const double hs = hfun(s), dhs = dhfun(s);
    for (int j = 0; j < n; ++j) {
      const double t = grid_node(j, n);
      const double c = -t * dhs * hfun(t) + s * hs * dhfun(t);
      cmax = std::max(cmax, std::abs(c));
      if (c != 0.0) all.push_back({s, t, c});
    }
  }
  const double cutoff = 1e-13 * cmax;
  for (const auto& p : all)
    if (std::abs(p.c) > cutoff) band_.push_back(p);
}

double AlignmentGradient::smoothed_u(double s) const {
  const double x = (s + 1.0) / h_ + pad_;
  const int i0 = static_cast<int>(std::floor(x));
  if (i0 < 0 || i0 + 1 >= static_cast<int>(u_smooth_.size())) return 0.0;
  const double w = x - i0;
  return u_smooth_[i0] + w * (u_smooth_[i0 + 1] - u_smooth_[i0]);
}

double AlignmentGradient::operator()(double nu) const {
  const double d = nu_true_ - nu;
  const double cs = std::cos(d), sn = std::sin(d);
  double acc = 0.0;
  for (const auto& p : band_) {
    const double a = cs * p.s - sn * p.t;
    const double b = sn * p.s + cs * p.t;
    acc += p.c * smoothed_u(a) * smoothed_u(b);
  }
  return -acc * h_ * h_;
}

double AlignmentGradient::cross_loss(double nu) const {
  const double d = nu_true_ - nu;
  const double cs = std::cos(d), sn = std::sin(d);
  auto hfun = [&](double s) {
    return normal_cdf((alpha_ - s) / sigma_) - normal_cdf((-alpha_ - s) / sigma_);
  };
  std::vector<double> hv(n_);
  for (int i = 0; i < n_; ++i) hv[i] = hfun(grid_node(i, n_));
  double acc = 0.0;
  for (int i = 0; i < n_; ++i) {
    const double s = grid_node(i, n_);
    for (int j = 0; j < n_; ++j) {
      const double t = grid_node(j, n_);
      const double H = hv[i] * hv[j];
      if (H == 0.0) continue;
      acc += H * smoothed_u(cs * s - sn * t) * smoothed_u(sn * s + cs * t);
    }
  }
  return -acc * h_ * h_;
}

double alignment_gradient(double nu, const Eigen::VectorXd& u, double sigma, int n, double alpha, double nu_true) {
  return AlignmentGradient(n, alpha, sigma, u, nu_true)(nu);
}

double folded_angle_error(double nu, double nu_true) {
  const double r = std::fmod(std::abs(nu - nu_true), kPi / 2);
  return std::min(r, kPi / 2 - r);
}

Eigen::MatrixXd observe(const AlternatingConfig& cfg, double nu) {
  if (cfg.observation == Observation::Direct) return rotated_square(cfg.n, cfg.alpha, nu);
  return resample_rotate(make_square(cfg.n, cfg.alpha), nu);
}

Eigen::VectorXd square_factor(int n, double alpha) {
  const Eigen::MatrixXd X = make_square(n, alpha);
  const int c = n / 2;
  return X.col(c);
}

std::vector<double> align_descent(const AlignmentGradient& grad, double nu0, double beta, int steps) {
  std::vector<double> trace;
  trace.reserve(steps + 1);
  trace.push_back(nu0);
  double nu = nu0;
  for (int k = 0; k < steps; ++k) {
    const double next = nu - beta * grad(nu);
    if (!std::isfinite(next)) throw NumericError("alignment descent diverged at step " + std::to_string(k));
    trace.push_back(next);
    // An exact fixed point or 2-cycle repeats forever; fill the rest.
    if (next == nu) {
      trace.resize(steps + 1, next);
      return trace;
    }
    if (trace.size() >= 3 && next == trace[trace.size() - 3]) {
      const double a = trace[trace.size() - 2];
      while (static_cast<int>(trace.size()) < steps + 1) trace.push_back(trace[trace.size() - 2] == a ? next : a);
      return trace;
    }
    nu = next;
  }
  return trace;
}

bool non_escape(const std::vector<double>& trace, double nu_true, double radius) {
  bool entered = false;
  for (double nu : trace) {
    const bool inside = folded_angle_error(nu, nu_true) <= radius;
    if (entered && !inside) return false;
    entered = entered || inside;
  }
  return true;
}

RateMeasurement rough_stage_rate(int n, double alpha, int steps) {
  if (steps < 1) throw UsageError("rough_stage_rate: steps must be >= 1");
  const Eigen::MatrixXd S = symmetrized_operator(rotated_square(n, alpha, kPi / 4));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  if (eig.info() != Eigen::Success) throw NumericError("rough_stage_rate: eigensolver failed");
  // leading eigenvalue by magnitude
  const Eigen::VectorXd mu = eig.eigenvalues();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(mu(a)) > std::abs(mu(b)); });
  const double h = grid_step(n);
  Eigen::VectorXd v1 = eig.eigenvectors().col(order[0]);
  v1 /= l2_norm(v1, h);
  const PowerResult p = power_stage(S, Eigen::VectorXd::Ones(n), steps, true);
  RateMeasurement r;
  r.gap_ratio = std::abs(mu(order[1]) / mu(order[0]));
  for (const auto& u : p.iterates) {
    const double sign = inner(u, v1, h) >= 0 ? 1.0 : -1.0;
    r.errors.push_back(l2_norm(u - sign * v1, h));
  }
  for (int k = 0; k < steps; ++k) {
    r.ratios.push_back(r.errors[k + 1] / r.errors[k]);
    r.max_ratio = std::max(r.max_ratio, r.ratios.back());
  }
  r.mean_rate = std::pow(r.errors[steps] / r.errors[0], 1.0 / steps);
  return r;
}

std::vector<double> diamond_rank_errors(int n, double alpha, int max_rank) {
  const Eigen::VectorXd s = singular_values(rotated_square(n, alpha, kPi / 4));
  std::vector<double> out;
  for (int F = 1; F <= max_rank; ++F) out.push_back(rank_error_from_spectrum(s, n, F));
  return out;
}

namespace {

Eigen::VectorXd rough_factor(const AlternatingConfig& cfg) {
  if (!(cfg.sigma2 > 0.0) || !(cfg.beta > 0.0)) throw UsageError("alternating: sigma2 and beta must be positive");
  if (cfg.t_rough < 1 || cfg.t_u < 1 || cfg.t_nu < 0) throw UsageError("alternating: bad iteration counts");
  const Eigen::VectorXd u0 = Eigen::VectorXd::Ones(cfg.n);
  return power_stage(symmetrized_operator(observe(cfg, cfg.nu_true)), u0, cfg.t_rough).output;
}

}  // namespace

AlternatingSolver::AlternatingSolver(const AlternatingConfig& cfg)
    : cfg_(cfg),
      u_rough_(rough_factor(cfg)),
      gradient_(cfg.n, cfg.alpha, std::sqrt(cfg.sigma2), u_rough_, cfg.nu_true) {}

AlternatingResult AlternatingSolver::run(std::uint64_t seed) const {
  Rng rng(derive_seed(seed, 0x6e7530));
  return run_from(rng.uniform(0.0, 2.0 * kPi));
}

AlternatingResult AlternatingSolver::run_from(double nu0) const {
  AlternatingResult r;
  r.nu0 = nu0;
  r.u_rough = u_rough_;
  r.state.sigma = std::sqrt(cfg_.sigma2);
  r.state.beta = cfg_.beta;
  r.state.rough_iterations = cfg_.t_rough;
  r.state.stage = Stage::Align;
  r.nu_trace = align_descent(gradient_, nu0, cfg_.beta, cfg_.t_nu);
  r.nu_hat = r.nu_trace.back();
  r.state.align_iterations = cfg_.t_nu;
  r.state.stage = Stage::Refine;
  // X o tau_{nu_hat} is the square rotated by nu_true - nu_hat
  const Eigen::MatrixXd target = observe(cfg_, cfg_.nu_true - r.nu_hat);
  r.u_hat = power_stage(symmetrized_operator(target), u_rough_, cfg_.t_u).output;
  r.state.refine_iterations = cfg_.t_u;
  r.state.stage = Stage::Done;
  r.state.nu = r.nu_hat;
  r.state.u = r.u_hat;
  const double h = grid_step(cfg_.n);
  r.angle_error = folded_angle_error(r.nu_hat, cfg_.nu_true);
  r.factor_error = l2_norm(r.u_hat - square_factor(cfg_.n, cfg_.alpha), h);
  return r;
}

}  // namespace tilted::theory
