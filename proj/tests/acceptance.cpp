// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures. Arguments select criteria (default: all).
//
//   acceptance [1..9 ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tilted/bench.hpp"
#include "tilted/field.hpp"
#include "tilted/geometry.hpp"
#include "tilted/grids.hpp"
#include "tilted/rng.hpp"
#include "tilted/theory.hpp"

using namespace tilted;
namespace fs = std::filesystem;

namespace {

const double kAlpha = 1.0 / std::numbers::sqrt2;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 ---------------------------------------------------------------------------

Outcome diamond_spectrum_match() {
  const int n = 1024;
  const Eigen::VectorXd s = theory::singular_values(theory::rotated_square(n, kAlpha, std::numbers::pi / 4));
  double worst = 0;
  for (int k = 1; k <= 8; ++k) {
    // independent closed form: 4 sqrt2 alpha / (pi (2k-1))
    const double lam = 4 * std::numbers::sqrt2 * kAlpha / (std::numbers::pi * (2 * k - 1));
    worst = std::max(worst, std::abs(s(k - 1) * 2.0 / n - lam) / lam);
  }
  return {worst <= 0.05, fmt("max relative error %.4f over k=1..8 (bound 0.05)", worst)};
}

// 2 ---------------------------------------------------------------------------

Outcome lowrank_floor() {
  const std::vector<int> sizes{128, 256, 512};
  const std::vector<double> targets{30, 40, 50};
  bool ok = true;
  std::string detail;
  std::vector<std::vector<int>> ranks(targets.size());
  for (int n : sizes) {
    const Eigen::MatrixXd X = theory::rotated_square(n, kAlpha, std::numbers::pi / 4);
    const Eigen::VectorXd s = theory::singular_values(X);
    double lo = INFINITY;
    for (int F = 1; F <= 32; ++F) {
      // tail energy of the spectrum, mean over pixels
      double tail = 0;
      for (int i = F; i < s.size(); ++i) tail += s(i) * s(i);
      lo = std::min(lo, tail / (static_cast<double>(n) * n) * (1 + F));
    }
    ok = ok && lo > 0 && std::isfinite(lo);
    detail += fmt("n=%d min mse(1+F)=%.3g; ", n, lo);
    for (std::size_t t = 0; t < targets.size(); ++t) ranks[t].push_back(theory::minimal_rank_for_psnr(s, n, targets[t]));
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    detail += fmt("%gdB ranks %d/%d/%d; ", targets[t], ranks[t][0], ranks[t][1], ranks[t][2]);
    ok = ok && std::is_sorted(ranks[t].begin(), ranks[t].end());
  }
  return {ok, detail};
}

// 3 ---------------------------------------------------------------------------

Outcome alignment_convergence() {
  theory::AlternatingConfig cfg;
  cfg.n = 512;
  cfg.alpha = kAlpha;
  cfg.sigma2 = 1e-4;
  cfg.beta = 0.05;
  cfg.t_rough = 40;
  cfg.t_nu = 2000;
  cfg.t_u = 16;
  const theory::AlternatingSolver solver(cfg);
  int ok = 0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    const auto res = solver.run(derive_seed(0, static_cast<std::uint64_t>(r)));
    ok += res.angle_error <= 0.01 && res.factor_error <= 0.2;
  }
  const double frac = static_cast<double>(ok) / runs;
  const double bound = 4.0 / 7.0 - 0.07;
  return {frac >= bound, fmt("%d/%d succeeded (%.3f, bound %.3f)", ok, runs, frac, bound)};
}

// 4 ---------------------------------------------------------------------------

Outcome rough_rate() {
  const auto m = theory::rough_stage_rate(512, kAlpha, 10);
  return {m.mean_rate <= 0.40, fmt("geometric-mean contraction %.4f, worst step %.4f, gap ratio %.4f (bound 0.40)",
                                   m.mean_rate, m.max_ratio, m.gap_ratio)};
}

// 5 ---------------------------------------------------------------------------

// |analytic - fd| / max(|fd|, 1e-3): relative where the derivative is not tiny.
double rel(double a, double fd) { return std::abs(a - fd) / std::max(std::abs(fd), 1e-3); }

HybridField random_field(DecompositionKind kind, std::uint64_t seed) {
  Rng rng(seed);
  FieldConfig cfg;
  cfg.encoding.frequencies = 2;
  cfg.hidden = {8, 8};
  cfg.grid_init_scale = 1.0;
  cfg.lowpass.ramp_steps = 0;
  const int res = 4 + static_cast<int>(rng.below(4));
  return HybridField::create(DecompositionSpec::make(kind, 4, res, {1.0}, 2), cfg, rng.next());
}

double loss_of(const HybridField& f, const std::vector<double>& p, const std::vector<double>& t) {
  std::vector<double> y(t.size());
  field_forward_batch(f, p, 0, y, 1);
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - t[i]) * (y[i] - t[i]);
  return s / static_cast<double>(y.size());
}

Outcome gradient_integrity() {
  const double h = 1e-6;
  const int instances = 100;
  // grid, S1, S3, mlp, fourier, tv, l21
  std::vector<double> worst(7, 0.0);
  const char* names[] = {"grid", "tau-S1", "tau-S3", "mlp", "fourier", "tv", "l21"};
  for (int inst = 0; inst < instances; ++inst) {
    Rng rng(derive_seed(5, inst));
    for (int dim : {2, 3}) {
      const auto kind = dim == 2 ? DecompositionKind::CP2D
                                 : (inst % 2 ? DecompositionKind::KPlanes : DecompositionKind::VectorMatrix);
      HybridField f = random_field(kind, rng.next());
      const int batch = 4;
      std::vector<double> p(batch * dim), t(batch);
      for (auto& x : p) x = rng.uniform(-0.9, 0.9);
      for (auto& x : t) x = rng.normal();
      const auto g = field_backward(f, p, t, 0);
      auto central = [&](const std::function<void(HybridField&, double)>& nudge) {
        HybridField a = f, b = f;
        nudge(a, h);
        nudge(b, -h);
        return (loss_of(a, p, t) - loss_of(b, p, t)) / (2 * h);
      };
      if (dim == 2) {
        const std::size_t i = rng.below(f.volume.parameter_count());
        worst[0] = std::max(worst[0], rel(g.grid[i], central([&](HybridField& x, double d) { x.volume.parameters()[i] += d; })));
        const std::size_t j = rng.below(f.decoder.parameter_count());
        worst[3] = std::max(worst[3], rel(g.decoder[j], central([&](HybridField& x, double d) { x.decoder.parameters()[j] += d; })));
        const int tr = static_cast<int>(rng.below(f.volume.transforms().size()));
        worst[1] = std::max(worst[1], rel(g.transform[tr], central([&](HybridField& x, double d) {
                                        auto& r = x.volume.transforms().planar_rotations()[tr];
                                        r = exp_map(r, d);
                                      })));
      } else {
        const int tr = static_cast<int>(rng.below(f.volume.transforms().size()));
        const int e = static_cast<int>(rng.below(3));
        worst[2] = std::max(worst[2], rel(g.transform[tr * 3 + e], central([&](HybridField& x, double d) {
                                        Vec3 xi{0, 0, 0};
                                        xi[e] = d;
                                        auto& q = x.volume.transforms().spatial_rotations()[tr];
                                        q = exp_map(q, xi);
                                      })));
        // regularizers on the 3D volume
        std::vector<double> gtv(f.volume.parameter_count()), gl(f.volume.parameter_count());
        tv_regularizer(f.volume, gtv);
        l21_regularizer(f.volume, gl);
        const std::size_t k = rng.below(gtv.size());
        FactoredVolume a = f.volume, b = f.volume;
        a.parameters()[k] += h;
        b.parameters()[k] -= h;
        worst[5] = std::max(worst[5], rel(gtv[k], (tv_regularizer(a) - tv_regularizer(b)) / (2 * h)));
        worst[6] = std::max(worst[6], rel(gl[k], (l21_regularizer(a) - l21_regularizer(b)) / (2 * h)));
      }
    }
    // Fourier encoding with a random cotangent and partial band weights
    FourierEncoding enc{3, true};
    std::vector<double> z{rng.normal(), rng.normal()};
    std::vector<double> w{1.0, rng.uniform(), rng.uniform()};
    std::vector<double> cot(enc.output_dim(2));
    for (auto& c : cot) c = rng.normal();
    const auto an = fourier_encode_vjp(z, w, enc, cot);
    const int c = static_cast<int>(rng.below(2));
    auto zp = z, zm = z;
    zp[c] += h;
    zm[c] -= h;
    const auto ep = fourier_encode(zp, w, enc), em = fourier_encode(zm, w, enc);
    double fd = 0;
    for (std::size_t i = 0; i < cot.size(); ++i) fd += cot[i] * (ep[i] - em[i]) / (2 * h);
    worst[4] = std::max(worst[4], rel(an[c], fd));
  }
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < worst.size(); ++i) {
    ok = ok && worst[i] <= 1e-4;
    detail += fmt("%s %.1e; ", names[i], worst[i]);
  }
  return {ok, detail + "(bound 1e-4, 100 instances each)"};
}

// 6 ---------------------------------------------------------------------------

Outcome rotation_invariance() {
  RotationSweepConfig cfg;  // brick 128^2, 19 angles, seeds 0..4, TILTED-8
  const ExperimentReport rep = rotation_sweep(cfg);
  const auto sa = rep.values("psnr_std", "axis-aligned", "all");
  const auto st = rep.values("psnr_std", "tilted", "all");
  const auto ma = rep.values("psnr_mean", "axis-aligned", "all");
  const auto mt = rep.values("psnr_mean", "tilted", "all");
  std::vector<double> ratio;
  for (std::size_t i = 0; i < sa.size(); ++i) ratio.push_back(st[i] / sa[i]);
  const double r = median(ratio);
  const bool ok = r <= 0.6 && mean(mt) >= mean(ma);
  return {ok, fmt("median std ratio %.3f (bound 0.6); mean PSNR tilted %.2f vs axis-aligned %.2f dB", r, mean(mt),
                  mean(ma))};
}

// 7 ---------------------------------------------------------------------------

Outcome sdf_direction() {
  const SdfFitConfig cfg;
  std::string detail;
  bool ok = true;
  for (auto kind : {DecompositionKind::KPlanes, DecompositionKind::VectorMatrix}) {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const AnalyticSdf box = make_shape({}, seed);
      const double t = fit_sdf(box, kind, true, cfg, seed).iou;
      const double a = fit_sdf(box, kind, false, cfg, seed).iou;
      wins += t >= a;
    }
    ok = ok && wins * 3 >= 2 * 6;
    detail += fmt("%s tilted>=axis %d/6; ", to_string(kind).c_str(), wins);
  }
  ShapeSpec plain;
  plain.kind = "box";
  const double base = fit_sdf(make_shape(plain, 0), DecompositionKind::KPlanes, false, cfg, 0).iou;
  ok = ok && base >= 0.98;
  return {ok, detail + fmt("axis-aligned box baseline IoU %.4f (bound 0.98)", base)};
}

// 8 ---------------------------------------------------------------------------

bool same_bits(const TransformSet& a, const TransformSet& b) {
  const auto& x = a.planar_rotations();
  const auto& y = b.planar_rotations();
  return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(UnitRotation2)) == 0;
}

Outcome two_phase_contract() {
  const ImageModelConfig model;
  const Image img = load_rotated("brick", 30.0, 128);
  int hits = 0;
  bool bitwise = true;
  std::string angles;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ImageFitResult r = fit_image(img, Variant::Tilted, model, seed);
    bitwise = bitwise && same_bits(r.initial_transforms, r.bottleneck_transforms);
    hits += std::abs(r.phase1_angle_deg - 30.0) <= 5.0;
    angles += fmt("%.1f ", r.phase1_angle_deg);
  }
  return {bitwise && hits >= 4,
          fmt("tau_init bitwise %s; phase-1 angles %s-> %d/5 within 5 deg of 30", bitwise ? "yes" : "no",
              angles.c_str(), hits)};
}

// 9 ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "tilted_acceptance_determinism";
  fs::remove_all(root);
  const std::string model =
      " --size 32 --channels 24 --resolution 32 --transforms 4 --steps 40 --bottleneck-steps 20";
  const std::vector<std::pair<std::string, std::string>> runs{
      {"theory-spectrum", "--n 256"},
      {"theory-lowrank", "--sizes 64,128 --max-rank 8"},
      {"theory-align", "--n 128 --runs 4"},
      {"fit-image2d", model + " --angle 30"},
      {"fit-sdf", "--points 20000 --resolution 16 --eval-resolution 24 --steps 60 --seeds 0,1"},
      {"sweep-rotation", model + " --angles 0,30,60 --seeds 0,1"},
      {"sweep-resolution", model + " --resolutions 16,32"},
  };
  int compared = 0;
  std::string bad;
  for (const auto& [cmd, args] : runs) {
    for (int rep : {0, 1}) {
      const fs::path out = root / cmd / std::to_string(rep);
      const std::string line = std::string(TILTED_CLI) + " --threads 1 --seed 7 --out " + out.string() + " " + cmd +
                               " " + args + " 2>/dev/null";
      if (std::system(line.c_str()) != 0) bad += cmd + "(exit) ";
    }
    for (const auto& e : fs::directory_iterator(root / cmd / "0")) {
      if (e.path().extension() != ".csv") continue;
      ++compared;
      const fs::path other = root / cmd / "1" / e.path().filename();
      if (slurp(e.path()) != slurp(other)) bad += cmd + "/" + e.path().filename().string() + " ";
    }
  }
  return {bad.empty() && compared >= 10,
          fmt("%d CSV files compared across 7 subcommands; mismatches: %s", compared, bad.empty() ? "none" : bad.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"diamond spectrum match", diamond_spectrum_match},
      {"low-rank floor and rank monotonicity", lowrank_floor},
      {"alternating alignment convergence", alignment_convergence},
      {"rough-stage contraction rate", rough_rate},
      {"gradient integrity", gradient_integrity},
      {"rotation-sweep invariance", rotation_invariance},
      {"SDF direction of effect", sdf_direction},
      {"two-phase contract", two_phase_contract},
      {"determinism", determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << " [" << fmt("%.1f s", secs) << "]" << std::endl;
  }
  return failures;
}
