#include <gtest/gtest.h>

#include <random>

#include "footfall/nn/cnn.hpp"
#include "footfall/nn/convlstm.hpp"
#include "footfall/nn/logistic.hpp"
#include "footfall/nn/weights_io.hpp"
#include "footfall/training.hpp"
#include "model_oracles.hpp"
#include "test_util.hpp"

using namespace footfall;
using footfall::testing::check_gradients;
using footfall::testing::random_labels;
using footfall::testing::random_vector;

namespace {

double convlstm_loss(const nn::ConvLstm& model, const std::vector<double>& x, std::size_t steps,
                     const std::vector<std::uint8_t>& seq, std::uint8_t glob, bool training, std::uint64_t mask_seed,
                     nn::ConvLstmWorkspace& ws, nn::ParamSet* grads) {
  std::mt19937_64 rng(mask_seed);
  model.forward(x, steps, ws, training, &rng);
  const double pw_seq = 3.0, pw_glob = 1.5;
  double loss = bce_with_logits(ws.seq_logits, seq, pw_seq);
  const std::uint8_t g[1] = {glob};
  const double gl[1] = {ws.glob_logit};
  loss += bce_with_logits(gl, g, pw_glob);
  if (grads) {
    std::vector<double> d(steps);
    for (std::size_t t = 0; t < steps; ++t) d[t] = bce_grad(ws.seq_logits[t], seq[t], pw_seq) / steps;
    model.backward(ws, d, bce_grad(ws.glob_logit, glob, pw_glob), *grads);
  }
  return loss;
}

}  // namespace

TEST(ConvLstm, ParameterLayout) {
  nn::ConvLstm m(4);
  EXPECT_EQ(m.params().at("conv1_w").shape, (std::vector<std::size_t>{16, 5, 3}));
  EXPECT_EQ(m.params().at("conv2_w").shape, (std::vector<std::size_t>{5, 16, 3}));
  EXPECT_EQ(m.params().at("lstm.l0.fwd.w_ih").shape, (std::vector<std::size_t>{16, 5}));
  EXPECT_EQ(m.params().at("lstm.l1.bwd.w_ih").shape, (std::vector<std::size_t>{16, 8}));
  EXPECT_EQ(m.params().at("lstm.l1.bwd.w_hh").shape, (std::vector<std::size_t>{16, 4}));
  EXPECT_EQ(m.params().at("seq_head_w").shape, (std::vector<std::size_t>{1, 8}));
  EXPECT_EQ(m.params().at("glob_head_b").shape, (std::vector<std::size_t>{1}));
}

TEST(ConvLstm, MatchesScalarReference) {
  for (std::size_t hidden : {3u, 8u}) {
    nn::ConvLstm m(hidden);
    nn::init_params(m.params(), 11 + hidden);
    // Non-zero biases so that every term of the reference is exercised.
    for (auto& e : m.params())
      for (auto& v : e.tensor.data)
        if (v == 0.0) v = 0.05;
    const std::size_t steps = 17;
    const auto x = random_vector(steps * 5, 3, -2, 2);
    nn::ConvLstmWorkspace ws;
    m.forward(x, steps, ws, false);
    const auto ref = footfall::testing::ref_convlstm(m.params(), x, steps);
    for (std::size_t t = 0; t < steps; ++t) EXPECT_NEAR(ws.seq_logits[t], ref.seq_logits[t], 1e-12);
    EXPECT_NEAR(ws.glob_logit, ref.glob_logit, 1e-12);
  }
}

TEST(ConvLstm, GradientsMatchFiniteDifferences) {
  const std::size_t steps = 20;
  nn::ConvLstm m(4);
  nn::init_params(m.params(), 7);
  const auto x = random_vector(steps * 5, 1, -2, 2);
  const auto seq = random_labels(steps, 2);
  nn::ConvLstmWorkspace ws;
  for (bool training : {false, true}) {
    nn::ParamSet grads = m.params().zeros_like();
    convlstm_loss(m, x, steps, seq, 1, training, 99, ws, &grads);
    const auto r = check_gradients(m.params(), grads,
                                   [&] { return convlstm_loss(m, x, steps, seq, 1, training, 99, ws, nullptr); });
    EXPECT_LT(r.max_rel, 1e-4) << (training ? "train " : "eval ") << r.worst;
    EXPECT_EQ(r.checked, m.params().parameter_count());
  }
}

TEST(ConvLstm, TimeReversalSymmetry) {
  // Swapping the forward and backward direction weights and reversing the
  // input reverses the sequence output (up to swapping the halves feeding
  // the head, which we mirror too).
  const std::size_t steps = 13, h = 5;
  nn::ConvLstm a(h), b(h);
  nn::init_params(a.params(), 21);
  b.params() = a.params();
  for (int l = 0; l < 2; ++l)
    for (const char* t : {"w_ih", "w_hh", "b_ih", "b_hh"}) {
      const std::string f = "lstm.l" + std::to_string(l) + ".fwd." + t;
      const std::string r = "lstm.l" + std::to_string(l) + ".bwd." + t;
      b.params().at(f) = a.params().at(r);
      b.params().at(r) = a.params().at(f);
    }
  // Layer-1 input weights see [fwd | bwd] halves; swap the column blocks.
  for (int dir = 0; dir < 2; ++dir) {
    auto& w = b.params().at(std::string("lstm.l1.") + (dir ? "bwd" : "fwd") + ".w_ih");
    for (std::size_t r = 0; r < 4 * h; ++r)
      for (std::size_t k = 0; k < h; ++k) std::swap(w.data[r * 2 * h + k], w.data[r * 2 * h + h + k]);
  }
  auto& sw = b.params().at("seq_head_w");
  for (std::size_t k = 0; k < h; ++k) std::swap(sw.data[k], sw.data[h + k]);
  // Conv kernels must be mirrored in time as well.
  for (const char* name : {"conv1_w", "conv2_w"}) {
    auto& w = b.params().at(name);
    for (std::size_t i = 0; i < w.data.size(); i += 3) std::swap(w.data[i], w.data[i + 2]);
  }
  const auto x = random_vector(steps * 5, 4, -2, 2);
  std::vector<double> xr(x.size());
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t c = 0; c < 5; ++c) xr[(steps - 1 - t) * 5 + c] = x[t * 5 + c];
  nn::ConvLstmWorkspace wa, wb;
  a.forward(x, steps, wa, false);
  b.forward(xr, steps, wb, false);
  for (std::size_t t = 0; t < steps; ++t) EXPECT_NEAR(wa.seq_logits[t], wb.seq_logits[steps - 1 - t], 1e-12);
}

TEST(ConvLstm, DropoutOnlyInTraining) {
  const std::size_t steps = 30;
  nn::ConvLstm m(6);
  nn::init_params(m.params(), 5);
  const auto x = random_vector(steps * 5, 6);
  nn::ConvLstmWorkspace ws;
  m.forward(x, steps, ws, false);
  const auto eval1 = ws.seq_logits;
  m.forward(x, steps, ws, false);
  EXPECT_EQ(eval1, ws.seq_logits);
  std::mt19937_64 rng(1);
  m.forward(x, steps, ws, true, &rng);
  EXPECT_NE(eval1, ws.seq_logits);
}

TEST(ConvLstm, DropoutPreservesExpectedLayerInput) {
  const std::size_t steps = 50;
  nn::ConvLstm m(8);
  nn::init_params(m.params(), 8);
  const auto x = random_vector(steps * 5, 9);
  nn::ConvLstmWorkspace ws;
  m.forward(x, steps, ws, false);
  const auto clean = ws.in1;
  std::vector<double> sum(clean.size(), 0.0);
  std::mt19937_64 rng(2);
  const int trials = 4000;
  std::size_t zeros = 0;
  for (int i = 0; i < trials; ++i) {
    m.forward(x, steps, ws, true, &rng);
    for (std::size_t k = 0; k < sum.size(); ++k) {
      sum[k] += ws.in1[k];
      zeros += ws.dropout_mask[k] == 0.0;
    }
  }
  const double drop_rate = static_cast<double>(zeros) / (static_cast<double>(trials) * sum.size());
  EXPECT_NEAR(drop_rate, 0.3, 0.005);
  double num = 0, den = 0;
  for (std::size_t k = 0; k < sum.size(); ++k) {
    num += std::abs(sum[k] / trials - clean[k]);
    den += std::abs(clean[k]);
  }
  EXPECT_LT(num / den, 0.02);
}

TEST(ConvLstm, RejectsBadInput) {
  nn::ConvLstm m(4);
  nn::ConvLstmWorkspace ws;
  std::vector<double> x(10 * 5, 0.0);
  EXPECT_THROW(m.forward(std::span<const double>(x).first(49), 10, ws, false), ShapeError);
  x[7] = std::nan("");
  EXPECT_THROW(m.forward(x, 10, ws, false), NonFiniteError);
  std::vector<double> d(10);
  nn::ParamSet g = m.params().zeros_like();
  nn::ConvLstmWorkspace fresh;
  EXPECT_THROW(m.backward(fresh, d, 0.0, g), StateError);
  x[7] = 0;
  EXPECT_THROW(m.forward(x, 10, ws, true, nullptr), StateError);
  EXPECT_THROW(nn::ConvLstm(0), ValidationError);
}

TEST(ConvLstm, WorkspaceIsReusedWithoutReallocation) {
  nn::ConvLstm m(4);
  nn::init_params(m.params(), 1);
  nn::ConvLstmWorkspace ws;
  const auto x = random_vector(40 * 5, 1);
  m.forward(x, 40, ws, false);
  const double* p = ws.out1.data();
  const double* q = ws.dirs[1][1].gates.data();
  for (int i = 0; i < 3; ++i) m.forward(x, 40, ws, false);
  EXPECT_EQ(p, ws.out1.data());
  EXPECT_EQ(q, ws.dirs[1][1].gates.data());
}

TEST(ConvLstm, WeightsJsonRoundTrip) {
  nn::ConvLstm m(6);
  nn::init_params(m.params(), 3);
  const auto j = nn::weights_to_json(m.params());
  const nn::ConvLstm back = nn::convlstm_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.hidden(), 6u);
  EXPECT_TRUE(back.params() == m.params());

  auto bad = j;
  bad.erase("conv2_b");
  nn::ConvLstm other(6);
  EXPECT_THROW(nn::weights_from_json(bad, other.params()), FormatError);
  bad = j;
  bad["conv2_b"]["shape"] = std::vector<int>{6};
  EXPECT_THROW(nn::weights_from_json(bad, other.params()), FormatError);
}

TEST(Init, UniformInFanInBound) {
  nn::ConvLstm m(32);
  nn::init_params(m.params(), 42);
  for (const auto& e : m.params()) {
    if (e.fan_in == 0) {
      for (double v : e.tensor.data) EXPECT_EQ(v, 0.0) << e.name;
      continue;
    }
    const double k = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
    double lo = 1e9, hi = -1e9;
    for (double v : e.tensor.data) {
      EXPECT_GE(v, -k);
      EXPECT_LT(v, k);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (e.tensor.size() > 200) {
      EXPECT_LT(lo, -0.9 * k) << e.name;
      EXPECT_GT(hi, 0.9 * k) << e.name;
    }
  }
  nn::ConvLstm again(32);
  nn::init_params(again.params(), 42);
  EXPECT_TRUE(again.params() == m.params());
}

// ---------------------------------------------------------------------------

namespace {

double cnn_loss(const nn::Cnn& m, const std::vector<double>& x, std::size_t b, std::size_t len,
                const std::vector<std::uint8_t>& y, nn::CnnWorkspace& ws, nn::ParamSet* grads) {
  m.forward(x, b, len, ws, true);
  const double loss = bce_with_logits(ws.logits, y, 2.0);
  if (grads) {
    std::vector<double> d(b);
    for (std::size_t n = 0; n < b; ++n) d[n] = bce_grad(ws.logits[n], y[n], 2.0) / static_cast<double>(b);
    m.backward(ws, d, *grads);
  }
  return loss;
}

std::vector<std::size_t> cnn_activation_pattern(const nn::CnnWorkspace& ws) {
  std::vector<std::size_t> p;
  for (double v : ws.a1) p.push_back(v > 0.0);
  for (double v : ws.a2) p.push_back(v > 0.0);
  for (double v : ws.u) p.push_back(v > 0.0);
  p.insert(p.end(), ws.p1_idx.begin(), ws.p1_idx.end());
  p.insert(p.end(), ws.p2_idx.begin(), ws.p2_idx.end());
  return p;
}

}  // namespace

TEST(Cnn, GradientsMatchFiniteDifferencesInTrainingMode) {
  const std::size_t b = 3, len = 32;
  nn::Cnn m;
  nn::init_params(m.params(), 17);
  const auto x = random_vector(b * len * 4, 5, -2, 2);
  const std::vector<std::uint8_t> y{1, 0, 1};
  nn::CnnWorkspace ws;
  nn::ParamSet grads = m.params().zeros_like();
  cnn_loss(m, x, b, len, y, ws, &grads);
  const auto r = check_gradients(
      m.params(), grads, [&] { return cnn_loss(m, x, b, len, y, ws, nullptr); }, 1e-4, 13,
      [&] { return cnn_activation_pattern(ws); });
  EXPECT_LT(r.max_rel, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 2000u);
  EXPECT_LT(r.kinks, r.checked / 50);
}

TEST(Cnn, InferenceMatchesScalarReference) {
  nn::Cnn m;
  nn::init_params(m.params(), 4);
  // Non-trivial running statistics and affine parameters.
  auto& p = m.params();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (const char* bn : {"block1.bn", "block2.bn"}) {
    for (auto& v : p.at(std::string(bn) + ".running_var").data) v = u(rng);
    for (auto& v : p.at(std::string(bn) + ".running_mean").data) v = u(rng) - 1.0;
    for (auto& v : p.at(std::string(bn) + ".weight").data) v = u(rng);
    for (auto& v : p.at(std::string(bn) + ".bias").data) v = u(rng) - 1.0;
  }
  for (std::size_t len : {50u, 37u, 200u}) {
    const std::size_t b = 2;
    const auto x = random_vector(b * len * 4, len);
    nn::CnnWorkspace ws;
    m.forward(x, b, len, ws, false);
    for (std::size_t n = 0; n < b; ++n) {
      const std::vector<double> one(x.begin() + n * len * 4, x.begin() + (n + 1) * len * 4);
      EXPECT_NEAR(ws.logits[n], footfall::testing::ref_cnn(p, one, len), 1e-10) << len;
    }
  }
}

TEST(Cnn, RunningStatisticsFollowMomentum) {
  nn::Cnn m;
  nn::init_params(m.params(), 2);
  const std::size_t b = 4, len = 16;
  const auto x = random_vector(b * len * 4, 8);
  nn::CnnWorkspace ws;
  m.forward(x, b, len, ws, true);
  const auto mean = ws.bn1.mean;
  const auto var = ws.bn1.var;
  m.commit_running_stats(ws);
  const double count = static_cast<double>(b * len);
  for (std::size_t c = 0; c < nn::Cnn::kC1; ++c) {
    EXPECT_NEAR(m.params().at("block1.bn.running_mean").data[c], 0.1 * mean[c], 1e-15);
    EXPECT_NEAR(m.params().at("block1.bn.running_var").data[c], 0.9 + 0.1 * var[c] * count / (count - 1), 1e-12);
  }
  EXPECT_FALSE(m.params().trainable(m.params().index_of("block1.bn.running_var")));
}

TEST(Cnn, RejectsShortWindows) {
  nn::Cnn m;
  nn::CnnWorkspace ws;
  std::vector<double> x(3 * 4, 0.0);
  EXPECT_THROW(m.forward(x, 1, 3, ws, false), ShapeError);
  std::vector<double> d(1);
  nn::ParamSet g = m.params().zeros_like();
  EXPECT_THROW(m.backward(ws, d, g), StateError);
}

// ---------------------------------------------------------------------------

TEST(Logistic, GradientsMatchFiniteDifferences) {
  nn::Logistic m;
  nn::init_params(m.params(), 3);
  const std::size_t b = 4;
  const auto x = random_vector(b * 200, 2);
  const std::vector<std::uint8_t> y{0, 1, 1, 0};
  nn::LogisticWorkspace ws;
  auto loss = [&](nn::ParamSet* grads) {
    m.forward(x, b, 50, ws, true);
    const double l = bce_with_logits(ws.logits, y, 1.0);
    if (grads) {
      std::vector<double> d(b);
      for (std::size_t n = 0; n < b; ++n) d[n] = bce_grad(ws.logits[n], y[n], 1.0) / static_cast<double>(b);
      m.backward(ws, d, *grads);
    }
    return l;
  };
  nn::ParamSet grads = m.params().zeros_like();
  loss(&grads);
  const auto r = check_gradients(m.params(), grads, [&] { return loss(nullptr); });
  EXPECT_LT(r.max_rel, 1e-4) << r.worst;
  EXPECT_EQ(r.checked, 201u);
}

TEST(Logistic, RequiresFiftyByFour) {
  nn::Logistic m;
  std::vector<double> x(199);
  EXPECT_THROW(m.forward_one(x), ShapeError);
  nn::LogisticWorkspace ws;
  std::vector<double> y(60 * 4);
  EXPECT_THROW(m.forward(y, 1, 60, ws, false), ShapeError);
  std::vector<double> ok(200, 1.0);
  m.params().at("w").data.assign(200, 0.5);
  m.params().at("b").data[0] = -3;
  EXPECT_DOUBLE_EQ(m.forward_one(ok), 97.0);
}
