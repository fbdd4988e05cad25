#include "mlvamp/error.hpp"
#include "mlvamp/network_io.hpp"
#include "mlvamp/random.hpp"

#include <gtest/gtest.h>

using namespace mlvamp;

namespace {

NetworkSpec small_net() {
  SyntheticConfig c;
  c.dims = {6, 12, 15};
  c.n_meas = 9;
  c.seed = 21;
  return build_synthetic_network(c);
}

void expect_same(const NetworkSpec& a, const NetworkSpec& b, double tol) {
  ASSERT_EQ(a.dims, b.dims);
  ASSERT_EQ(a.num_stages(), b.num_stages());
  for (int l = 1; l <= a.num_stages(); ++l) {
    ASSERT_EQ(a.is_linear(l), b.is_linear(l));
    if (a.is_linear(l)) {
      EXPECT_LE((a.linear(l).dense() - b.linear(l).dense()).cwiseAbs().maxCoeff(), tol);
      EXPECT_LE((a.linear(l).b - b.linear(l).b).cwiseAbs().maxCoeff(), tol);
      EXPECT_EQ(a.linear(l).nu, b.linear(l).nu);
    } else {
      EXPECT_EQ(a.nonlinear(l).activation, b.nonlinear(l).activation);
      EXPECT_EQ(a.nonlinear(l).noise_var, b.nonlinear(l).noise_var);
    }
  }
}

}  // namespace

TEST(NetworkIo, SeededDocumentRebuildsTheSameNetwork) {
  const NetworkSpec net = small_net();
  const Json doc = network_to_json(net);
  EXPECT_EQ(doc.at("mode"), "seeded");
  EXPECT_FALSE(doc.at("stages")[0].contains("v_out"));
  EXPECT_EQ(doc.at("stages")[0].at("nu"), "inf");
  const NetworkSpec back = network_from_json(parse_json(dump_json(doc)));
  expect_same(net, back, 0.0);
}

TEST(NetworkIo, ExplicitDocumentRoundTripsExactly) {
  const NetworkSpec net = small_net();
  const NetworkSpec back = network_from_json(parse_json(dump_json(network_to_json(net, true))));
  expect_same(net, back, 0.0);
  EXPECT_FALSE(back.generator.has_value());
}

TEST(NetworkIo, TamperedSeededDocumentIsRejected) {
  Json doc = network_to_json(small_net());
  doc["stages"][4]["s"][0] = doc["stages"][4]["s"][0].get<double>() * 1.01;
  EXPECT_THROW(network_from_json(doc), ConfigError);
  Json doc2 = network_to_json(small_net());
  doc2["stages"][4]["nu"] = 1.0;
  EXPECT_THROW(network_from_json(doc2), ConfigError);
}

TEST(NetworkIo, NonOrthogonalFactorsAreRejected) {
  Json doc = network_to_json(small_net(), true);
  doc["stages"][0]["v_out"][0][0] = doc["stages"][0]["v_out"][0][0].get<double>() + 0.1;
  EXPECT_THROW(network_from_json(doc), ConfigError);
}

TEST(NetworkIo, DenseWeightsAreFactoredOnLoad) {
  Rng rng(4);
  const Matrix w1 = gaussian_matrix(rng, 5, 3);
  const Matrix w3 = gaussian_matrix(rng, 2, 5);
  Json doc = {{"mode", "explicit"},
              {"dims", {3, 5, 5, 2}},
              {"stages",
               {{{"kind", "linear"}, {"w", Json::array()}, {"b", {0.1, 0.2, 0.3, 0.4, 0.5}}, {"nu", "inf"}},
                {{"kind", "nonlinear"}, {"activation", "relu"}, {"noise_var", 0.0}},
                {{"kind", "linear"}, {"w", Json::array()}, {"nu", 100.0}}}}};
  for (Index i = 0; i < 5; ++i) doc["stages"][0]["w"].push_back(vector_to_json(w1.row(i).transpose()));
  for (Index i = 0; i < 2; ++i) doc["stages"][2]["w"].push_back(vector_to_json(w3.row(i).transpose()));
  const NetworkSpec net = network_from_json(doc);
  EXPECT_LT((net.linear(1).dense() - w1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((net.linear(3).dense() - w3).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_DOUBLE_EQ(net.linear(3).nu, 100.0);
}

TEST(NetworkIo, ChainWithoutGeneratorNeedsExplicitMode) {
  const NetworkSpec chain = build_gaussian_chain(GaussianChainConfig{});
  EXPECT_THROW(network_to_json(chain), ConfigError);
  expect_same(chain, network_from_json(network_to_json(chain, true)), 0.0);
}

TEST(NetworkIo, UnknownKeysAndBadValuesAreConfigErrors) {
  Json doc = network_to_json(small_net());
  doc["colour"] = "blue";
  EXPECT_THROW(network_from_json(doc), ConfigError);
  EXPECT_THROW(parse_json("{not json"), ConfigError);
  EXPECT_THROW(synthetic_config_from_json(Json{{"rho", "high"}}), ConfigError);
  EXPECT_THROW(synthetic_config_from_json(Json{{"depth", 3}}), ConfigError);
  EXPECT_THROW(precision_from_json(Json("infinite")), ConfigError);
}

TEST(NetworkIo, ConfigsRoundTrip) {
  SyntheticConfig c;
  c.dims = {3, 4};
  c.rho = 0.3;
  c.seed = 0xFFFFFFFFFFFFFFFFull;
  const SyntheticConfig back = synthetic_config_from_json(synthetic_config_to_json(c));
  EXPECT_EQ(back.dims, c.dims);
  EXPECT_EQ(back.rho, c.rho);
  EXPECT_EQ(back.seed, c.seed);
  GaussianChainConfig g;
  g.nu_hidden = kInf;
  EXPECT_EQ(gaussian_chain_config_from_json(gaussian_chain_config_to_json(g)).nu_hidden, kInf);
}

TEST(NetworkIo, TrajectoryRoundTripAndObservationOnly) {
  const NetworkSpec net = small_net();
  const Trajectory tr = sample_trajectory(net, 8);
  const Trajectory back = trajectory_from_json(parse_json(dump_json(trajectory_to_json(tr))));
  ASSERT_EQ(back.z.size(), tr.z.size());
  for (std::size_t l = 0; l < tr.z.size(); ++l) EXPECT_EQ(back.z[l], tr.z[l]);
  const Trajectory y_only = trajectory_from_json(Json{{"y", vector_to_json(tr.output())}});
  ASSERT_EQ(y_only.z.size(), 1u);
  EXPECT_EQ(y_only.output(), tr.output());
}
