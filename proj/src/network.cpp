#include "mlvamp/network.hpp"

#include "mlvamp/error.hpp"
#include "mlvamp/random.hpp"
#include "mlvamp/special.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mlvamp {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
    case Activation::sigmoid_probit_reserved:
      return "sigmoid-probit-reserved";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  if (name == "sigmoid-probit-reserved") return Activation::sigmoid_probit_reserved;
  throw ConfigError("unknown activation '" + name + "'");
}

Vector LinearStage::padded_s(Index n) const {
  Vector out = Vector::Zero(n);
  const Index r = std::min(n, rank());
  out.head(r) = s.head(r);
  return out;
}

Matrix LinearStage::dense() const {
  const Index r = rank();
  return v_out.leftCols(r) * s.asDiagonal() * v_in.topRows(r);
}

Vector LinearStage::apply(const Vector& z) const {
  const Index r = rank();
  Vector u = Vector::Zero(n_out());
  u.head(r) = s.cwiseProduct(v_in.topRows(r) * z);
  return v_out * u;
}

Vector LinearStage::apply_transpose(const Vector& d) const {
  const Index r = rank();
  const Vector u = s.cwiseProduct(v_out.leftCols(r).transpose() * d);
  return v_in.topRows(r).transpose() * u;
}

void NetworkSpec::validate() const {
  if (stages.empty()) throw ConfigError("network has no stages");
  if (dims.size() != stages.size() + 1) {
    throw ConfigError("network dims must list N_0..N_L (one more entry than stages)");
  }
  for (Index d : dims) {
    if (d <= 0) throw ConfigError("network dimensions must be positive");
  }
  for (int l = 1; l <= num_stages(); ++l) {
    const bool want_linear = (l % 2) == 1;
    if (is_linear(l) != want_linear) {
      std::ostringstream msg;
      msg << "stage " << l << " must be " << (want_linear ? "linear" : "nonlinear")
          << " (stages alternate, starting with a linear stage)";
      throw ConfigError(msg.str());
    }
    const Index n_in = dims[l - 1];
    const Index n_out = dims[l];
    if (want_linear) {
      const LinearStage& st = linear(l);
      if (st.v_out.rows() != n_out || st.v_out.cols() != n_out || st.v_in.rows() != n_in ||
          st.v_in.cols() != n_in) {
        throw ConfigError("linear stage " + std::to_string(l) + " factor shapes disagree with dims");
      }
      if (st.rank() > std::min(n_in, n_out)) {
        throw ConfigError("linear stage " + std::to_string(l) + " has too many singular values");
      }
      if (st.b.size() != n_out || st.b_bar.size() != n_out) {
        throw ConfigError("linear stage " + std::to_string(l) + " bias has wrong length");
      }
      if (!(st.s.array() >= 0.0).all() || !st.s.allFinite()) {
        throw ConfigError("linear stage " + std::to_string(l) + " has invalid singular values");
      }
      if (!(st.nu > 0.0)) {
        throw ConfigError("linear stage " + std::to_string(l) + " noise precision must be positive");
      }
    } else {
      const NonlinearStage& st = nonlinear(l);
      if (n_in != n_out) {
        throw ConfigError("nonlinear stage " + std::to_string(l) + " must preserve dimension");
      }
      if (!(st.noise_var >= 0.0) || !std::isfinite(st.noise_var)) {
        throw ConfigError("nonlinear stage " + std::to_string(l) + " noise variance invalid");
      }
    }
  }
}

LinearStage svd_decompose_stage(const Matrix& w, const Vector& b, double nu) {
  if (!w.allFinite()) throw NumericalError("svd_decompose_stage: weight matrix has non-finite entries");
  if (!b.allFinite()) throw NumericalError("svd_decompose_stage: bias has non-finite entries");
  if (b.size() != w.rows()) throw DimensionError("svd_decompose_stage: bias length != rows of W");
  if (!(nu > 0.0)) throw ConfigError("svd_decompose_stage: noise precision must be positive");

  Eigen::BDCSVD<Matrix> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double tol =
      static_cast<double>(std::max(w.rows(), w.cols())) * std::numeric_limits<double>::epsilon() * smax;
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;

  LinearStage st;
  st.v_out = svd.matrixU();
  st.v_in = svd.matrixV().transpose();
  st.s = sv.head(rank);
  st.b = b;
  st.b_bar = st.v_out.transpose() * b;
  st.nu = nu;
  return st;
}

double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::identity:
      return x;
    case Activation::sigmoid_probit_reserved:
      break;
  }
  throw ConfigError("activation " + to_string(a) + " cannot be evaluated");
}

const std::vector<AffinePiece>& affine_pieces(Activation a) {
  static const std::vector<AffinePiece> relu{{-kInf, 0.0, 0.0, 0.0}, {0.0, kInf, 1.0, 0.0}};
  static const std::vector<AffinePiece> identity{{-kInf, kInf, 1.0, 0.0}};
  switch (a) {
    case Activation::relu:
      return relu;
    case Activation::identity:
      return identity;
    case Activation::sigmoid_probit_reserved:
      break;
  }
  throw ConfigError("activation " + to_string(a) + " has no denoiser");
}

namespace {

// E[max(0, X)^2] for X ~ N(mu, sd^2).
double relu_second_moment(double mu, double sd) {
  const double t = mu / sd;
  return (mu * mu + sd * sd) * special::norm_cdf(t) + mu * sd * special::norm_pdf(t);
}

// Pushes z through stages [first, last] (1-based, inclusive), drawing stage noise from rng.
Vector propagate(const std::vector<Stage>& stages, int first, int last, Vector z, Rng& rng,
                 std::vector<Vector>* layers) {
  for (int l = first; l <= last; ++l) {
    const Stage& stage = stages[l - 1];
    if (const auto* lin = std::get_if<LinearStage>(&stage)) {
      Vector out = lin->apply(z) + lin->b;
      if (!lin->deterministic()) out += gaussian_vector(rng, lin->n_out(), 1.0 / std::sqrt(lin->nu));
      z = std::move(out);
    } else {
      const auto& nl = std::get<NonlinearStage>(stage);
      for (Index i = 0; i < z.size(); ++i) z(i) = apply_activation(nl.activation, z(i));
      if (nl.noise_var > 0.0) z += gaussian_vector(rng, z.size(), std::sqrt(nl.noise_var));
    }
    if (layers) layers->push_back(z);
  }
  return z;
}

void check_config(const SyntheticConfig& c) {
  if (c.dims.empty()) throw ConfigError("synthetic network: dims must be nonempty");
  for (Index d : c.dims) {
    if (d <= 0) throw ConfigError("synthetic network: dims must be positive");
  }
  if (!(c.rho > 0.0 && c.rho < 1.0)) throw ConfigError("synthetic network: rho must lie in (0, 1)");
  if (!(c.kappa >= 1.0) || !std::isfinite(c.kappa)) {
    throw ConfigError("synthetic network: kappa must be >= 1");
  }
  if (c.n_meas <= 0) throw ConfigError("synthetic network: n_meas must be positive");
  if (!(c.bias_std >= 0.0)) throw ConfigError("synthetic network: bias_std must be >= 0");
  if (c.pilot_trajectories < 1) throw ConfigError("synthetic network: pilot_trajectories must be >= 1");
  if (!std::isfinite(c.snr_db)) throw ConfigError("synthetic network: snr_db must be finite");
}

}  // namespace

NetworkSpec build_synthetic_network(const SyntheticConfig& config) {
  check_config(config);
  NetworkSpec net;
  net.generator = GeneratorInfo{"synthetic-relu-v1", config};
  net.dims.push_back(config.dims.front());

  double second_moment = 1.0;  // E z^2 of the current layer's components
  const double z_rho = special::norm_quantile(config.rho);
  for (std::size_t i = 0; i + 1 < config.dims.size(); ++i) {
    const Index n_in = config.dims[i];
    const Index n_out = config.dims[i + 1];
    Rng rng(derive_seed(config.seed, "hidden", i));
    const Matrix w = gaussian_matrix(rng, n_out, n_in, 1.0 / std::sqrt(static_cast<double>(n_in)));
    // Pre-activation spread around the bias mean, from W ~ N(0, 1/n_in) and the input moment.
    const double sd_pre = std::sqrt(second_moment + config.bias_std * config.bias_std);
    const double bias_mean = z_rho * sd_pre;
    const Vector b =
        Vector::Constant(n_out, bias_mean) + gaussian_vector(rng, n_out, config.bias_std);
    net.stages.emplace_back(svd_decompose_stage(w, b, kInf));
    net.dims.push_back(n_out);
    net.stages.emplace_back(NonlinearStage{Activation::relu, 0.0});
    net.dims.push_back(n_out);
    second_moment = relu_second_moment(bias_mean, sd_pre);
  }

  const Index n_in = config.dims.back();
  const Index m = config.n_meas;
  const Index rank = std::min(m, n_in);
  Rng rng(derive_seed(config.seed, "measurement"));
  LinearStage meas;
  meas.v_out = haar_orthogonal(rng, m);
  meas.v_in = haar_orthogonal(rng, n_in).transpose();
  meas.s.resize(rank);
  for (Index n = 0; n < rank; ++n) {
    const double frac = rank > 1 ? static_cast<double>(n) / static_cast<double>(rank - 1) : 0.0;
    meas.s(n) = std::pow(config.kappa, -frac);
  }
  meas.s /= std::sqrt(meas.s.squaredNorm() / static_cast<double>(rank));
  meas.b = Vector::Zero(m);
  meas.b_bar = Vector::Zero(m);
  if (m > n_in) {
    net.flags.push_back("n_meas exceeds the measurement input dimension; rank limited to " +
                        std::to_string(n_in));
  }

  // Noise calibration from the average measured energy of pilot trajectories.
  const int hidden_stages = net.num_stages();
  double energy = 0.0;
  for (int t = 0; t < config.pilot_trajectories; ++t) {
    Rng pilot(derive_seed(config.seed, "pilot", static_cast<std::uint64_t>(t)));
    Vector z = gaussian_vector(pilot, config.dims.front());
    z = propagate(net.stages, 1, hidden_stages, std::move(z), pilot, nullptr);
    energy += meas.apply(z).squaredNorm();
  }
  energy /= config.pilot_trajectories;
  const double noise_var = energy * std::pow(10.0, -config.snr_db / 10.0) / static_cast<double>(m);
  meas.nu = 1.0 / noise_var;

  net.stages.emplace_back(std::move(meas));
  net.dims.push_back(m);
  net.validate();
  return net;
}

NetworkSpec build_gaussian_chain(const GaussianChainConfig& config) {
  if (config.dims.empty() || config.n_meas <= 0) throw ConfigError("gaussian chain: empty dims");
  for (Index d : config.dims) {
    if (d <= 0) throw ConfigError("gaussian chain: dims must be positive");
  }
  if (!(config.nu_hidden > 0.0) || !(config.nu_meas > 0.0) || !std::isfinite(config.nu_meas)) {
    throw ConfigError("gaussian chain: noise precisions must be positive (measurement finite)");
  }
  if (!(config.identity_noise_var >= 0.0) || !(config.bias_std >= 0.0)) {
    throw ConfigError("gaussian chain: variances must be >= 0");
  }
  NetworkSpec net;
  net.dims.push_back(config.dims.front());
  auto add_linear = [&](Index n_in, Index n_out, double nu, std::uint64_t index) {
    Rng rng(derive_seed(config.seed, "chain", index));
    const Matrix w = gaussian_matrix(rng, n_out, n_in, 1.0 / std::sqrt(static_cast<double>(n_in)));
    const Vector b = gaussian_vector(rng, n_out, config.bias_std);
    net.stages.emplace_back(svd_decompose_stage(w, b, nu));
    net.dims.push_back(n_out);
  };
  for (std::size_t i = 0; i + 1 < config.dims.size(); ++i) {
    add_linear(config.dims[i], config.dims[i + 1], config.nu_hidden, i);
    net.stages.emplace_back(NonlinearStage{Activation::identity, config.identity_noise_var});
    net.dims.push_back(config.dims[i + 1]);
  }
  add_linear(config.dims.back(), config.n_meas, config.nu_meas, config.dims.size());
  net.validate();
  return net;
}

Trajectory sample_trajectory(const NetworkSpec& net, std::uint64_t seed) {
  net.validate();
  Rng rng(derive_seed(seed, "trajectory"));
  Trajectory traj;
  traj.z.push_back(gaussian_vector(rng, net.input_dim()));
  propagate(net.stages, 1, net.num_stages(), traj.z.front(), rng, &traj.z);
  fill_transformed_truth(net, traj);
  return traj;
}

void fill_transformed_truth(const NetworkSpec& net, Trajectory& traj) {
  const int L = net.num_stages();
  if (static_cast<int>(traj.z.size()) != L + 1) {
    throw DimensionError("trajectory must hold one vector per layer 0..L");
  }
  traj.p0.assign(L + 1, Vector());
  traj.q0.assign(L + 1, Vector());
  for (int l = 0; l <= L; ++l) {
    const Vector& z = traj.z[l];
    if (z.size() != net.dims[l]) throw DimensionError("trajectory layer has wrong dimension");
    if (l >= 1 && net.is_linear(l)) {
      traj.q0[l] = net.linear(l).v_out.transpose() * z;
      traj.p0[l] = z;
    } else {
      traj.q0[l] = z;
      traj.p0[l] = (l + 1 <= L && net.is_linear(l + 1)) ? Vector(net.linear(l + 1).v_in * z) : z;
    }
  }
}

std::vector<double> empirical_layer_moments(const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.q0.size());
  for (const Vector& q : traj.q0) {
    out.push_back(q.size() > 0 ? q.squaredNorm() / static_cast<double>(q.size()) : 0.0);
  }
  return out;
}

double max_orthogonality_error(const NetworkSpec& net) {
  double worst = 0.0;
  for (const Stage& stage : net.stages) {
    if (const auto* lin = std::get_if<LinearStage>(&stage)) {
      for (const Matrix* v : {&lin->v_out, &lin->v_in}) {
        const Matrix e = v->transpose() * *v - Matrix::Identity(v->cols(), v->cols());
        worst = std::max(worst, e.cwiseAbs().maxCoeff());
      }
    }
  }
  return worst;
}

std::vector<double> positive_preactivation_fraction(const NetworkSpec& net,
                                                    const Trajectory& traj) {
  std::vector<double> out;
  for (int l = 1; l <= net.num_stages(); ++l) {
    if (net.is_linear(l) || net.nonlinear(l).activation != Activation::relu) continue;
    const Vector& pre = traj.z[l - 1];
    out.push_back(static_cast<double>((pre.array() > 0.0).count()) / static_cast<double>(pre.size()));
  }
  return out;
}

}  // namespace mlvamp
