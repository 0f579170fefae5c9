#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace coreset;

namespace {

PipelineConfig config(CoresetMethod method, double coreset_budget, bool prune = false, double prune_budget = 0.005) {
  PipelineConfig cfg;
  cfg.method = method;
  cfg.coreset_budget = coreset_budget;
  cfg.prune = prune;
  cfg.prune_budget = prune_budget;
  return cfg;
}

Network rank_one_mlp(std::size_t in, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Network net = testutil::mlp(in, hidden, classes, seed);
  for (const char* id : {"fc1", "fc2"}) {
    const Matrix& w = net.dense_weights(id);
    const Matrix u = testutil::random_matrix<Matrix>(w.rows(), 1, rng), v = testutil::random_matrix<Matrix>(1, w.cols(), rng);
    net.params[id] = matmul(u, v);
  }
  return net;
}

std::size_t recount(const Network& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers)
    if (l.parametric()) n += param_count(net.params.at(l.id));
  return n;
}

}  // namespace

TEST(PruneStage, DisabledIsIdentity) {
  const Network net = testutil::small_cnn(5, 6, 3, 80);
  const EvalSet eval = testutil::self_labelled(net, 40, 81);
  const PruneStageResult r = run_prune_stage(net, config(CoresetMethod::K, 0.005), eval);
  EXPECT_EQ(r.net.params, net.params);
  EXPECT_EQ(r.net.layers, net.layers);
  ASSERT_EQ(r.masks.size(), 3u);
  for (const auto& m : r.masks) EXPECT_EQ(m, PruneMask::keep_all(m.layer_id, net.layer(m.layer_id).filters));
  EXPECT_FALSE(r.budget_unmet);
}

TEST(PruneStage, AcceptAnythingLeavesOneFilterPerPrunableLayer) {
  const Network net = testutil::small_cnn(5, 6, 3, 82);
  const EvalSet eval = testutil::self_labelled(net, 40, 83);
  const PruneStageResult r = run_prune_stage(net, config(CoresetMethod::K, 0.005, true, 1.0), eval);
  EXPECT_EQ(r.net.layer("conv1").filters, 1u);
  EXPECT_EQ(r.net.layer("conv2").filters, 1u);
  EXPECT_EQ(r.net.layer("fc").filters, 3u);
  EXPECT_EQ(r.net.layer("fc").in_features, 9u);
}

TEST(PruneStage, OrderIsDescendingSize) {
  const Network net = load_network(testutil::fixture("lenet_digits.json"));
  const auto order = prune_order(net);
  for (std::size_t i = 1; i < order.size(); ++i)
    EXPECT_GE(net.layer(order[i - 1]).dense_param_count(), net.layer(order[i]).dense_param_count());
}

TEST(PruneStage, FixtureStaysWithinBudget) {
  const Network net = load_network(testutil::fixture("lenet_digits.json"));
  const EvalSet eval = load_evalset(testutil::fixture("digits_eval.json"));
  const PruneStageResult r = run_prune_stage(net, config(CoresetMethod::K, 0.005, true), eval);
  EXPECT_FALSE(r.budget_unmet);
  EXPECT_GE(r.accuracy_pruned, r.accuracy_original - 0.005 - 1e-12);
  EXPECT_EQ(r.accuracy_pruned, accuracy(r.net, eval));
  EXPECT_LT(r.net.dense_param_count(), net.dense_param_count());
}

TEST(CoresetStage, AcceptAnythingGivesRankOne) {
  const Network net = testutil::mlp(20, 30, 5, 84);
  const EvalSet eval = testutil::self_labelled(net, 40, 85);
  for (auto method : {CoresetMethod::K, CoresetMethod::S, CoresetMethod::A}) {
    const CoresetStageResult r = run_coreset_stage(net, config(method, 1.0), eval);
    ASSERT_EQ(r.layers.size(), 2u);
    for (const auto& l : r.layers) EXPECT_EQ(l.rank, 1u) << l.id << " method " << to_char(method);
  }
}

TEST(CoresetStage, DuplicatedFiltersCompressLosslessly) {
  Network net = testutil::mlp(10, 8, 3, 86);
  Matrix w = net.dense_weights("fc1");
  for (std::size_t f = 4; f < 8; ++f)
    for (std::size_t c = 0; c < w.cols(); ++c) w(f, c) = w(f - 4, c);
  net.params["fc1"] = w;
  const EvalSet eval = testutil::self_labelled(net, 60, 87);
  const CoresetStageResult r = run_coreset_stage(net, config(CoresetMethod::K, 0.0), eval);
  EXPECT_GE(r.layers[0].rank, 1u);
  EXPECT_LE(r.layers[0].rank, 4u);
  EXPECT_EQ(r.accuracy_final, r.accuracy_reference);
  CoresetRequest req;
  req.rank = 4;
  EXPECT_LE(testutil::max_abs_diff(densify(build_coreset("fc1", w, req)).data(), w.data()), 1e-4);
}

TEST(CoresetStage, SingleFilterAndIncompressibleLayersStayDense) {
  // fc1 is 2 x 2, where rank 1 already costs 4 parameters; fc2 has a single filter.
  const Network net = testutil::mlp(1, 2, 1, 88);
  const EvalSet eval = testutil::self_labelled(net, 20, 89);
  const CoresetStageResult r = run_coreset_stage(net, config(CoresetMethod::K, 1.0), eval);
  for (const auto& l : r.layers) {
    EXPECT_EQ(l.rank, 0u) << l.id;
    EXPECT_FALSE(l.note.empty());
    EXPECT_TRUE(std::holds_alternative<Matrix>(r.net.params.at(l.id)));
  }
}

TEST(CoresetStage, SingleLambdaSharesOneValue) {
  const Network net = testutil::small_cnn(6, 8, 3, 90);
  const EvalSet eval = testutil::self_labelled(net, 50, 91);
  PipelineConfig cfg = config(CoresetMethod::S, 0.02);
  cfg.single_lambda = true;
  const CoresetStageResult r = run_coreset_stage(net, cfg, eval);
  std::set<double> lambdas;
  for (const auto& l : r.layers)
    if (l.rank) lambdas.insert(l.lambda);
  EXPECT_LE(lambdas.size(), 1u);
}

TEST(Compress, HandComputedRatio) {
  const Network net = rank_one_mlp(12, 9, 4, 92);
  const EvalSet eval = testutil::self_labelled(net, 30, 93);
  const CompressedContainer c = compress(net, config(CoresetMethod::K, 1.0), eval);
  const std::size_t dense = 9 * 13 + 4 * 10;
  const std::size_t compressed = (13 + 9) + (10 + 4);
  EXPECT_EQ(c.report.total_dense_params, dense);
  EXPECT_EQ(c.report.total_compressed_params, compressed);
  EXPECT_DOUBLE_EQ(c.report.compression_ratio(), static_cast<double>(dense) / compressed);
  EXPECT_EQ(c.report.total_bytes, 4 * compressed);
}

TEST(Compress, DeterministicContainerBytes) {
  const Network net = testutil::small_cnn(8, 12, 4, 94);
  const EvalSet eval = testutil::self_labelled(net, 100, 95);
  PipelineConfig cfg = config(CoresetMethod::S, 0.01, true, 0.01);
  cfg.subset_fraction = 0.5;
  cfg.seed = 17;
  cfg.quantize_bits = 6;
  cfg.quantize_slack = 0.5;
  const auto dir = testutil::scratch_dir("pipeline_determinism");
  const CompressedContainer a = compress(net, cfg, eval);
  EXPECT_FALSE(a.quantized.empty());
  save_compressed(a, dir / "a.json");
  save_compressed(compress(net, cfg, eval), dir / "b.json");
  auto ma = nlohmann::json::parse(io::read_file(dir / "a.json")), mb = nlohmann::json::parse(io::read_file(dir / "b.json"));
  ma.erase("blob");
  mb.erase("blob");
  EXPECT_EQ(ma.dump(), mb.dump());
  EXPECT_EQ(io::read_file(dir / "a.bin"), io::read_file(dir / "b.bin"));
}

TEST(Compress, ReportInvariantsAndTelescoping) {
  const Network net = testutil::small_cnn(6, 8, 4, 96);
  const EvalSet eval = testutil::self_labelled(net, 80, 97);
  for (auto method : {CoresetMethod::K, CoresetMethod::S, CoresetMethod::A}) {
    PipelineConfig cfg = config(method, 0.0125, true, 0.0125);
    cfg.quantize_bits = 8;
    cfg.quantize_slack = 0.0125;
    const CompressedContainer c = compress(net, cfg, eval);
    const auto& r = c.report;
    const double final_acc = *r.accuracy_quantized;
    EXPECT_LE(std::abs(final_acc - r.accuracy_original), 0.0375 + 1e-12);
    EXPECT_GE(r.accuracy_pruned, r.accuracy_original - 0.0125 - 1e-12);
    EXPECT_GE(r.accuracy_coreset, r.accuracy_pruned - 0.0125 - 1e-12);
    EXPECT_GE(r.compression_ratio(), 1.0);
    EXPECT_EQ(r.total_compressed_params, recount(c.net));

    const auto dir = testutil::scratch_dir("pipeline_report");
    save_compressed(c, dir / "c.json");
    const CompressedContainer back = load_compressed(dir / "c.json");
    EXPECT_EQ(recount(back.net), r.total_compressed_params);
    EXPECT_EQ(std::filesystem::file_size(dir / "c.bin"), r.total_bytes);
    EXPECT_NEAR(accuracy(densify(back.net), eval), accuracy(back.net, eval), 1e-6);
    EXPECT_EQ(accuracy(back.net, eval), final_acc);
  }
}

TEST(Compress, RejectsBadInput) {
  const Network net = testutil::mlp(4, 5, 3, 98);
  const EvalSet eval = testutil::self_labelled(net, 10, 99);
  PipelineConfig cfg;
  cfg.lambda_grid = {};
  EXPECT_THROW(compress(net, cfg, eval), Error);
  cfg = PipelineConfig{};
  cfg.coreset_budget = -0.1;
  EXPECT_THROW(compress(net, cfg, eval), Error);
  cfg = PipelineConfig{};
  cfg.subset_fraction = 0.0;
  EXPECT_THROW(compress(net, cfg, eval), Error);
  cfg = PipelineConfig{};
  cfg.quantize_bits = 12;
  EXPECT_THROW(compress(net, cfg, eval), Error);
  EvalSet wrong = eval;
  wrong.input_shape = {5};
  for (auto& x : wrong.inputs) x = Tensor({5});
  ErrorKind kind{};
  try {
    compress(net, PipelineConfig{}, wrong);
  } catch (const Error& e) {
    kind = e.kind();
  }
  EXPECT_EQ(kind, ErrorKind::Shape);
}
