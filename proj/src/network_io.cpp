#include "mlvamp/network_io.hpp"

#include "mlvamp/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace mlvamp {

namespace {

constexpr const char* kFormat = "mlvamp-network";
constexpr int kVersion = 1;
constexpr const char* kSyntheticProcedure = "synthetic-relu-v1";
constexpr double kReloadTol = 1e-9;
constexpr double kOrthoTol = 1e-8;

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <class T>
void maybe(const Json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": matrix must be a nonempty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ConfigError(where + ": ragged matrix");
    }
    for (Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

bool close(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= kReloadTol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

bool close(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    if (!close(a(i), b(i))) return false;
  }
  return true;
}

double orthogonality_error(const Matrix& v) {
  return (v.transpose() * v - Matrix::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
}

Json stage_summary(const Stage& stage) {
  Json j;
  if (const auto* lin = std::get_if<LinearStage>(&stage)) {
    j["kind"] = "linear";
    j["s"] = vector_to_json(lin->s);
    j["b_bar"] = vector_to_json(lin->b_bar);
    j["nu"] = precision_to_json(lin->nu);
  } else {
    const auto& nl = std::get<NonlinearStage>(stage);
    j["kind"] = "nonlinear";
    j["activation"] = to_string(nl.activation);
    j["noise_var"] = nl.noise_var;
  }
  return j;
}

NonlinearStage nonlinear_from_json(const Json& j, const std::string& where) {
  check_keys(j, {"kind", "activation", "noise_var"}, where);
  NonlinearStage st;
  st.activation = activation_from_string(get<std::string>(j, "activation", where));
  st.noise_var = get<double>(j, "noise_var", where);
  return st;
}

LinearStage explicit_linear_from_json(const Json& j, const std::string& where) {
  check_keys(j, {"kind", "v_out", "v_in", "s", "b", "b_bar", "nu", "w"}, where);
  const double nu = precision_from_json(get<Json>(j, "nu", where));
  if (j.contains("w")) {
    const Matrix w = matrix_from_json(j.at("w"), where + ".w");
    const Vector b = j.contains("b") ? vector_from_json(j.at("b")) : Vector::Zero(w.rows());
    return svd_decompose_stage(w, b, nu);
  }
  LinearStage st;
  st.v_out = matrix_from_json(get<Json>(j, "v_out", where), where + ".v_out");
  st.v_in = matrix_from_json(get<Json>(j, "v_in", where), where + ".v_in");
  st.s = vector_from_json(get<Json>(j, "s", where));
  st.b = vector_from_json(get<Json>(j, "b", where));
  st.nu = nu;
  if (st.v_out.rows() != st.v_out.cols() || st.v_in.rows() != st.v_in.cols()) {
    throw ConfigError(where + ": orthogonal factors must be square");
  }
  if (st.b.size() != st.v_out.rows()) throw ConfigError(where + ": bias length != output dimension");
  if (orthogonality_error(st.v_out) > kOrthoTol || orthogonality_error(st.v_in) > kOrthoTol) {
    throw ConfigError(where + ": stored factors are not orthogonal");
  }
  st.b_bar = st.v_out.transpose() * st.b;
  return st;
}

NetworkSpec seeded_from_json(const Json& doc) {
  const std::string procedure = get<std::string>(doc, "procedure", "network");
  if (procedure != kSyntheticProcedure) {
    throw ConfigError("network: unknown generation procedure '" + procedure + "'");
  }
  const SyntheticConfig cfg = synthetic_config_from_json(get<Json>(doc, "config", "network"));
  NetworkSpec net = build_synthetic_network(cfg);

  const auto dims = get<std::vector<Index>>(doc, "dims", "network");
  if (dims != net.dims) throw ConfigError("network: stored dims do not match the generator output");
  const Json& stages = get<Json>(doc, "stages", "network");
  if (!stages.is_array() || static_cast<int>(stages.size()) != net.num_stages()) {
    throw ConfigError("network: stored stage count does not match the generator output");
  }
  for (int l = 1; l <= net.num_stages(); ++l) {
    const Json& sj = stages[static_cast<std::size_t>(l - 1)];
    const std::string where = "network stage " + std::to_string(l);
    const std::string kind = get<std::string>(sj, "kind", where);
    bool ok = true;
    if (net.is_linear(l)) {
      const LinearStage& st = net.linear(l);
      ok = kind == "linear" && close(vector_from_json(get<Json>(sj, "s", where)), st.s) &&
           close(vector_from_json(get<Json>(sj, "b_bar", where)), st.b_bar) &&
           close(precision_from_json(get<Json>(sj, "nu", where)), st.nu);
    } else {
      const NonlinearStage st = nonlinear_from_json(sj, where);
      ok = kind == "nonlinear" && st.activation == net.nonlinear(l).activation &&
           close(st.noise_var, net.nonlinear(l).noise_var);
    }
    if (!ok) {
      throw ConfigError(where + ": stored values differ from the regenerated network "
                        "(different generator version or platform)");
    }
  }
  return net;
}

}  // namespace

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("expected an array of numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json precision_to_json(double x) {
  if (x == kInf) return "inf";
  return x;
}

double precision_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInf;
    throw ConfigError("precision must be a number or \"inf\"");
  }
  if (!j.is_number()) throw ConfigError("precision must be a number or \"inf\"");
  return j.get<double>();
}

Json synthetic_config_to_json(const SyntheticConfig& c) {
  return Json{{"dims", c.dims},
              {"rho", c.rho},
              {"kappa", c.kappa},
              {"snr_db", c.snr_db},
              {"n_meas", c.n_meas},
              {"seed", c.seed},
              {"bias_std", c.bias_std},
              {"pilot_trajectories", c.pilot_trajectories}};
}

SyntheticConfig synthetic_config_from_json(const Json& j, SyntheticConfig c) {
  const std::string where = "synthetic network config";
  check_keys(j, {"dims", "rho", "kappa", "snr_db", "n_meas", "seed", "bias_std", "pilot_trajectories"},
             where);
  maybe(j, "dims", c.dims, where);
  maybe(j, "rho", c.rho, where);
  maybe(j, "kappa", c.kappa, where);
  maybe(j, "snr_db", c.snr_db, where);
  maybe(j, "n_meas", c.n_meas, where);
  maybe(j, "seed", c.seed, where);
  maybe(j, "bias_std", c.bias_std, where);
  maybe(j, "pilot_trajectories", c.pilot_trajectories, where);
  return c;
}

Json gaussian_chain_config_to_json(const GaussianChainConfig& c) {
  return Json{{"dims", c.dims},
              {"n_meas", c.n_meas},
              {"nu_hidden", precision_to_json(c.nu_hidden)},
              {"identity_noise_var", c.identity_noise_var},
              {"nu_meas", c.nu_meas},
              {"bias_std", c.bias_std},
              {"seed", c.seed}};
}

GaussianChainConfig gaussian_chain_config_from_json(const Json& j, GaussianChainConfig c) {
  const std::string where = "gaussian chain config";
  check_keys(j, {"dims", "n_meas", "nu_hidden", "identity_noise_var", "nu_meas", "bias_std", "seed"},
             where);
  maybe(j, "dims", c.dims, where);
  maybe(j, "n_meas", c.n_meas, where);
  if (j.contains("nu_hidden")) c.nu_hidden = precision_from_json(j.at("nu_hidden"));
  maybe(j, "identity_noise_var", c.identity_noise_var, where);
  maybe(j, "nu_meas", c.nu_meas, where);
  maybe(j, "bias_std", c.bias_std, where);
  maybe(j, "seed", c.seed, where);
  return c;
}

Json network_to_json(const NetworkSpec& net, bool explicit_matrices) {
  net.validate();
  Json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["dims"] = net.dims;
  if (!net.flags.empty()) doc["flags"] = net.flags;
  Json stages = Json::array();
  if (!explicit_matrices) {
    if (!net.generator || net.generator->procedure != kSyntheticProcedure) {
      throw ConfigError("network has no known generator; write it with explicit matrices");
    }
    doc["mode"] = "seeded";
    doc["procedure"] = net.generator->procedure;
    doc["config"] = synthetic_config_to_json(net.generator->config);
    for (const Stage& st : net.stages) stages.push_back(stage_summary(st));
  } else {
    doc["mode"] = "explicit";
    for (const Stage& st : net.stages) {
      Json j = stage_summary(st);
      if (const auto* lin = std::get_if<LinearStage>(&st)) {
        j["v_out"] = matrix_to_json(lin->v_out);
        j["v_in"] = matrix_to_json(lin->v_in);
        j["b"] = vector_to_json(lin->b);
      }
      stages.push_back(std::move(j));
    }
  }
  doc["stages"] = std::move(stages);
  return doc;
}

NetworkSpec network_from_json(const Json& doc) {
  check_keys(doc, {"format", "version", "dims", "flags", "mode", "procedure", "config", "stages"},
             "network");
  if (doc.contains("format") && doc.at("format") != kFormat) {
    throw ConfigError("network: not an mlvamp network document");
  }
  if (doc.contains("version") && doc.at("version") != kVersion) {
    throw ConfigError("network: unsupported document version");
  }
  const std::string mode = doc.value("mode", std::string("explicit"));
  if (mode == "seeded") return seeded_from_json(doc);
  if (mode != "explicit") throw ConfigError("network: mode must be 'seeded' or 'explicit'");

  NetworkSpec net;
  net.dims = get<std::vector<Index>>(doc, "dims", "network");
  if (doc.contains("flags")) net.flags = doc.at("flags").get<std::vector<std::string>>();
  const Json& stages = get<Json>(doc, "stages", "network");
  if (!stages.is_array()) throw ConfigError("network: 'stages' must be an array");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string where = "network stage " + std::to_string(i + 1);
    const std::string kind = get<std::string>(stages[i], "kind", where);
    if (kind == "linear") {
      net.stages.emplace_back(explicit_linear_from_json(stages[i], where));
    } else if (kind == "nonlinear") {
      net.stages.emplace_back(nonlinear_from_json(stages[i], where));
    } else {
      throw ConfigError(where + ": kind must be 'linear' or 'nonlinear'");
    }
  }
  net.validate();
  return net;
}

Json trajectory_to_json(const Trajectory& traj) {
  Json z = Json::array();
  for (const Vector& v : traj.z) z.push_back(vector_to_json(v));
  Json doc;
  doc["z"] = std::move(z);
  if (!traj.z.empty()) doc["y"] = vector_to_json(traj.z.back());
  return doc;
}

Trajectory trajectory_from_json(const Json& doc) {
  check_keys(doc, {"z", "y", "seed"}, "trajectory");
  Trajectory traj;
  if (doc.contains("z")) {
    for (const Json& v : doc.at("z")) traj.z.push_back(vector_from_json(v));
    if (traj.z.empty()) throw ConfigError("trajectory: 'z' is empty");
  } else if (doc.contains("y")) {
    traj.z.push_back(vector_from_json(doc.at("y")));
  } else {
    throw ConfigError("trajectory: needs 'z' or 'y'");
  }
  return traj;
}

std::string dump_json(const Json& doc) { return doc.dump(2) + "\n"; }

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

}  // namespace mlvamp
