#pragma once

// Model-problem numerics: square templates and their rotations, rank-F error
// floors, the diamond spectrum, power iterations, the smoothed alignment
// gradient, and the three-stage alternating alignment/factorization scheme.
//
// Images are n x n matrices indexed [i][j] with normalized coordinates
// (s, t) = (-1 + 2i/(n-1), -1 + 2j/(n-1)). Continuum inner products are
// Riemann sums: h = 2/(n-1) in 1D and h^2 in 2D.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace tilted::theory {

inline double grid_node(int i, int n) { return -1.0 + 2.0 * i / (n - 1); }
inline double grid_step(int n) { return 2.0 / (n - 1); }

// Axis-aligned square: 1 where max(|i - c|, |j - c|) <= alpha * c, c = (n-1)/2.
// Requires n >= 3 and 0 < alpha <= 1/sqrt(2).
Eigen::MatrixXd make_square(int n, double alpha);

// Direct sampling of the square rotated counterclockwise by nu:
// X_ij = square(R_{-nu} (s_i, t_j)).
Eigen::MatrixXd rotated_square(int n, double alpha, double nu);

// Counterclockwise rotation of the content by nu about the image center with
// a bilinear kernel; samples outside the image read 0.
Eigen::MatrixXd resample_rotate(const Eigen::MatrixXd& image, double nu);

// Singular values in decreasing order (throws NumericError on failure).
Eigen::VectorXd singular_values(const Eigen::MatrixXd& X);

// (1/n^2) sum_{i > F} sigma_i^2 from a precomputed spectrum of an n x n matrix.
double rank_error_from_spectrum(const Eigen::VectorXd& sigma, int n, int F);
double svd_rank_error(const Eigen::MatrixXd& X, int F);

// Smallest F whose best rank-F approximation reaches the target PSNR.
int minimal_rank_for_psnr(const Eigen::VectorXd& sigma, int n, double psnr_db);

// Analytic eigenvalue lambda_k, k >= 1.
double diamond_eigenvalue(double alpha, int k);

struct DiamondSpectrum {
  double alpha = 0.0;
  int n = 0;
  std::vector<double> eigenvalues;           // lambda_1 .. lambda_K
  std::vector<Eigen::VectorXd> eigenfunctions;  // g_k sampled at grid nodes
};

DiamondSpectrum diamond_spectrum(double alpha, int K, int n);

// <f, g> and ||f|| with the 1D quadrature weight h.
double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g, double h);
double l2_norm(const Eigen::VectorXd& f, double h);

// (T_X + T_X^*) as a matrix acting on node values: (X + X^T) h.
Eigen::MatrixXd symmetrized_operator(const Eigen::MatrixXd& X);

struct PowerResult {
  Eigen::VectorXd u;        // unit-norm iterate u_k
  Eigen::VectorXd output;   // sqrt(0.5 <u, S u>) u
  double rayleigh = 0.0;    // 0.5 <u, S u>
  std::vector<Eigen::VectorXd> iterates;  // u_0 .. u_k when requested
};

// Power iterations u <- S u / ||S u||. Throws NumericError when the output
// would be complex (rayleigh <= 0) or an iterate vanishes.
PowerResult power_stage(const Eigen::MatrixXd& S, const Eigen::VectorXd& u0, int steps,
                        bool keep_iterates = false);

// 1D discrete Gaussian smoothing, truncated at 5 sigma, renormalized.
Eigen::VectorXd gaussian_smooth(const Eigen::VectorXd& f, double sigma, double h);

// Gradient of the smoothed alignment loss with respect to nu for a fixed
// factor u:
//   -<(phi * u u^T) o tau_{nu_true - nu}, C>,
//   C(y) = <grad (phi * X_sq)(y), R_{pi/2} y>,
// with phi * X_sq evaluated in closed form. Only grid points where C is
// non-negligible (a band around the square's edges) are stored.
class AlignmentGradient {
 public:
  AlignmentGradient(int n, double alpha, double sigma, const Eigen::VectorXd& u, double nu_true);

  double operator()(double nu) const;
  // nu-dependent part of the loss, -<phi * X_sq o tau_{nu - nu_true}, phi * u u^T>.
  double cross_loss(double nu) const;
  std::size_t band_size() const { return band_.size(); }

 private:
  double smoothed_u(double s) const;

  struct BandPoint {
    double s, t, c;
  };
  int n_;
  double alpha_, sigma_, nu_true_, h_;
  int pad_;
  std::vector<double> u_smooth_;  // on the padded grid
  std::vector<BandPoint> band_;
};

double alignment_gradient(double nu, const Eigen::VectorXd& u, double sigma, int n, double alpha,
                          double nu_true);

// Distance to the nearest symmetry copy of nu_true (period pi/2), in [0, pi/4].
double folded_angle_error(double nu, double nu_true);

enum class Observation { Direct, Bilinear };
enum class Stage { Rough, Align, Refine, Done };

struct AlternatingConfig {
  int n = 512;
  double alpha = 0.70710678118654752440;
  double nu_true = 0.78539816339744830962;
  double sigma2 = 1e-4;
  double beta = 0.05;
  int t_rough = 40;
  int t_nu = 2000;
  int t_u = 16;
  double epsilon = 1.0 / 768.0;
  Observation observation = Observation::Direct;
};

struct AlternatingAlignState {
  double nu = 0.0;
  Eigen::VectorXd u;
  double sigma = 0.01;
  double beta = 0.05;
  Stage stage = Stage::Rough;
  int rough_iterations = 0;
  int align_iterations = 0;
  int refine_iterations = 0;
};

struct AlternatingResult {
  double nu0 = 0.0;
  double nu_hat = 0.0;
  Eigen::VectorXd u_rough;
  Eigen::VectorXd u_hat;
  std::vector<double> nu_trace;  // nu_0 .. nu_{T_nu}
  double angle_error = 0.0;      // folded
  double factor_error = 0.0;     // ||u_hat - u_sq|| on the grid
  AlternatingAlignState state;
};

// Observation of the square rotated by nu under the configured model.
Eigen::MatrixXd observe(const AlternatingConfig& cfg, double nu);
// u_sq = 1_{|s| <= alpha} on the grid.
Eigen::VectorXd square_factor(int n, double alpha);

// Stage one is independent of the seed; the solver runs it once and reuses
// the rough factor and its alignment gradient for every seed.
class AlternatingSolver {
 public:
  explicit AlternatingSolver(const AlternatingConfig& cfg);

  const Eigen::VectorXd& u_rough() const { return u_rough_; }
  const AlignmentGradient& gradient() const { return gradient_; }

  // nu_0 ~ U[0, 2 pi) from the seed.
  AlternatingResult run(std::uint64_t seed) const;
  AlternatingResult run_from(double nu0) const;

 private:
  AlternatingConfig cfg_;
  Eigen::VectorXd u_rough_;
  AlignmentGradient gradient_;
};

// Stage-two descent only: nu_{k+1} = nu_k - beta grad(nu_k), k < steps.
std::vector<double> align_descent(const AlignmentGradient& grad, double nu0, double beta, int steps);

// True when the trace never leaves the 3 eps neighborhood (folded) after
// first entering it.
bool non_escape(const std::vector<double>& trace, double nu_true, double radius);

double psnr_from_mse(double mse);

// Power iterations from the flat start on the symmetrized diamond operator,
// measured against its dense leading eigenvector.
struct RateMeasurement {
  std::vector<double> errors;  // ||u_k - v_1||, k = 0 .. steps
  std::vector<double> ratios;  // errors[k+1] / errors[k]
  double mean_rate = 0.0;      // (errors[steps] / errors[0])^(1/steps)
  double max_ratio = 0.0;
  double gap_ratio = 0.0;      // |mu_2 / mu_1| of the dense operator
};
RateMeasurement rough_stage_rate(int n, double alpha, int steps);

// mse(F) = rank_error_from_spectrum for F = 1 .. max_rank on the diamond.
std::vector<double> diamond_rank_errors(int n, double alpha, int max_rank);

}  // namespace tilted::theory
