#include "mlvamp/baselines.hpp"

#include "mlvamp/error.hpp"
#include "mlvamp/random.hpp"

#include <cmath>

namespace mlvamp {

HamiltonianContext::HamiltonianContext(const NetworkSpec& net, Vector y)
    : net_(&net), y_(std::move(y)) {
  net.validate();
  const int L = net.num_stages();
  if (!net.is_linear(L) || net.linear(L).deterministic()) {
    throw ConfigError("Hamiltonian: the last stage must be a linear measurement with finite noise");
  }
  for (int l = 1; l < L; ++l) {
    const bool deterministic =
        net.is_linear(l) ? net.linear(l).deterministic() : net.nonlinear(l).noise_var == 0.0;
    if (!deterministic) throw ConfigError("Hamiltonian: hidden stages must be noiseless");
    if (!net.is_linear(l)) (void)affine_pieces(net.nonlinear(l).activation);
  }
  if (y_.size() != net.output_dim()) throw DimensionError("Hamiltonian: y has the wrong length");
  if (!y_.allFinite()) throw NumericalError("Hamiltonian: y is not finite");
  nu_ = net.linear(L).nu;
}

std::vector<Vector> HamiltonianContext::forward(const Vector& z0) const {
  if (z0.size() != input_dim()) throw DimensionError("Hamiltonian: z0 has the wrong length");
  if (!z0.allFinite()) throw NumericalError("Hamiltonian: z0 is not finite");
  const int L = net_->num_stages();
  std::vector<Vector> z;
  z.reserve(L);
  z.push_back(z0);
  for (int l = 1; l < L; ++l) {
    if (net_->is_linear(l)) {
      const LinearStage& st = net_->linear(l);
      z.push_back(st.apply(z.back()) + st.b);
    } else {
      const Activation a = net_->nonlinear(l).activation;
      z.push_back(z.back().unaryExpr([a](double x) { return apply_activation(a, x); }));
    }
  }
  return z;
}

double hamiltonian_and_grad(const HamiltonianContext& ctx, const Vector& z0, Vector& grad) {
  const NetworkSpec& net = ctx.net();
  const int L = net.num_stages();
  const std::vector<Vector> z = ctx.forward(z0);
  const LinearStage& meas = net.linear(L);
  const Vector e = ctx.y() - meas.apply(z.back()) - meas.b;
  const double h = 0.5 * ctx.nu() * e.squaredNorm() + 0.5 * z0.squaredNorm();

  Vector g = -ctx.nu() * meas.apply_transpose(e);
  for (int l = L - 1; l >= 1; --l) {
    if (net.is_linear(l)) {
      g = net.linear(l).apply_transpose(g);
    } else if (net.nonlinear(l).activation == Activation::relu) {
      const Vector& pre = z[l - 1];
      for (Index n = 0; n < g.size(); ++n) {
        if (!(pre(n) > 0.0)) g(n) = 0.0;
      }
    }
  }
  grad = g + z0;
  return h;
}

double hamiltonian(const HamiltonianContext& ctx, const Vector& z0) {
  const int L = ctx.net().num_stages();
  const std::vector<Vector> z = ctx.forward(z0);
  const LinearStage& meas = ctx.net().linear(L);
  const Vector e = ctx.y() - meas.apply(z.back()) - meas.b;
  return 0.5 * ctx.nu() * e.squaredNorm() + 0.5 * z0.squaredNorm();
}

Vector grad_hamiltonian(const HamiltonianContext& ctx, const Vector& z0) {
  Vector g;
  hamiltonian_and_grad(ctx, z0, g);
  return g;
}

namespace {

void check_divergence(double h, double limit, const std::vector<double>& trace, const char* who) {
  if (!std::isfinite(h) || h > limit) {
    throw DivergenceError(std::string(who) + " diverged (H = " + std::to_string(h) + ")", trace);
  }
}

Vector prior_draw(Index n, std::uint64_t seed, const char* tag) {
  Rng rng(derive_seed(seed, tag));
  return gaussian_vector(rng, n);
}

}  // namespace

MapResult map_estimate(const HamiltonianContext& ctx, const Vector& z_init, const MapOptions& opt) {
  if (opt.steps < 0) throw ConfigError("map_estimate: steps must be >= 0");
  if (!(opt.step_size > 0.0)) throw ConfigError("map_estimate: step_size must be positive");
  MapResult res;
  res.z0 = z_init;
  Vector g;
  double h = hamiltonian_and_grad(ctx, res.z0, g);
  res.loss_trace.push_back(h);
  check_divergence(h, opt.divergence_limit, res.loss_trace, "MAP");

  const Index n = z_init.size();
  Vector m = Vector::Zero(n);
  Vector v = Vector::Zero(n);
  double b1t = 1.0, b2t = 1.0;
  for (int t = 0; t < opt.steps; ++t) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseAbs2();
    b1t *= opt.beta1;
    b2t *= opt.beta2;
    const Vector step =
        ((m / (1.0 - b1t)).array() / ((v / (1.0 - b2t)).array().sqrt() + opt.epsilon)).matrix();

    double scale = opt.step_size;
    Vector z_new = res.z0 - scale * step;
    Vector g_new;
    double h_new = hamiltonian_and_grad(ctx, z_new, g_new);
    if (opt.safeguard) {
      int halvings = 0;
      while (!(h_new <= h) && halvings < 50) {
        scale *= 0.5;
        ++halvings;
        z_new = res.z0 - scale * step;
        h_new = hamiltonian_and_grad(ctx, z_new, g_new);
      }
      if (!(h_new <= h)) {
        z_new = res.z0;
        h_new = h;
        g_new = g;
      }
    }
    res.z0 = std::move(z_new);
    h = h_new;
    g = std::move(g_new);
    res.loss_trace.push_back(h);
    check_divergence(h, opt.divergence_limit, res.loss_trace, "MAP");
  }
  return res;
}

MapResult map_estimate(const HamiltonianContext& ctx, std::uint64_t seed, const MapOptions& opt) {
  return map_estimate(ctx, prior_draw(ctx.input_dim(), seed, "map-init"), opt);
}

SgldResult sgld_run(const HamiltonianContext& ctx, const Vector& z_init, std::uint64_t seed,
                    const SgldOptions& opt) {
  if (!(opt.lambda > 0.0)) throw ConfigError("sgld_run: lambda must be positive");
  if (opt.steps < 1 || opt.burn_in < 0 || opt.burn_in >= opt.steps) {
    throw ConfigError("sgld_run: need 0 <= burn_in < steps");
  }
  Rng rng(derive_seed(seed, "sgld-noise"));
  std::normal_distribution<double> normal;
  const double noise_sd = std::sqrt(2.0 * opt.lambda);
  const int layers = ctx.net().num_stages();

  SgldResult res;
  res.loss_trace.reserve(opt.steps);
  res.layer_means.assign(layers, Vector());
  Vector z = z_init;
  Vector g;
  hamiltonian_and_grad(ctx, z, g);
  Vector sum_sq = Vector::Zero(z.size());
  int kept = 0;
  for (int t = 0; t < opt.steps; ++t) {
    z -= opt.lambda * g;
    if (opt.inject_noise) {
      for (Index n = 0; n < z.size(); ++n) z(n) += noise_sd * normal(rng);
    }
    const double h = hamiltonian_and_grad(ctx, z, g);
    res.loss_trace.push_back(h);
    check_divergence(h, opt.divergence_limit, res.loss_trace, "SGLD");
    if (opt.keep_samples) res.samples.push_back(z);
    if (t >= opt.burn_in) {
      const std::vector<Vector> layer = ctx.forward(z);
      for (int l = 0; l < layers; ++l) {
        if (kept == 0) {
          res.layer_means[l] = layer[l];
        } else {
          res.layer_means[l] += layer[l];
        }
      }
      sum_sq += z.cwiseAbs2();
      ++kept;
    }
  }
  for (Vector& m : res.layer_means) m /= static_cast<double>(kept);
  res.z0_var = (sum_sq / static_cast<double>(kept) - res.layer_means[0].cwiseAbs2()).cwiseMax(0.0);
  return res;
}

SgldResult sgld_run(const HamiltonianContext& ctx, std::uint64_t seed, const SgldOptions& opt) {
  return sgld_run(ctx, prior_draw(ctx.input_dim(), seed, "sgld-init"), seed, opt);
}

}  // namespace mlvamp
