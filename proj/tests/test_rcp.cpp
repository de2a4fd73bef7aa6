#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "driftlab/numkern.hpp"
#include "driftlab/rcp.hpp"

using namespace driftlab;
using namespace driftlab::rcp;

namespace {
Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (double& v : t.vec()) v = rng.gaussian();
  return t;
}

PretrainSetup small_setup(std::uint64_t seed, std::size_t window, std::uint64_t steps) {
  PretrainSetup s;
  s.source = stream::make_orthogonal_source(4, 12, 0.25, 1, 3.0, Rng(seed).child("source"));
  s.schedule = stream::DriftSchedule{};
  s.aug = stream::AugConfig{0.1, 0.9, 1.1, 0.1};
  s.encoder = model::MlpSpec{{12, 16, 6}};
  s.head = model::HeadSpec{6, 8};
  s.window = WindowConfig{window, 0.2, false, true};
  s.optim.total_steps = std::max<std::uint64_t>(steps, 1);
  s.optim.warmup_steps = steps / 10;
  s.steps = steps;
  s.seed = seed;
  s.config_hash = "test";
  return s;
}
}  // namespace

TEST_CASE("intervene W=1 is the identity") {
  WindowConfig cfg{1, 0.2, false, true};
  Rng rng(1);
  Tensor q = random_matrix(1, 4, rng), k = random_matrix(1, 4, rng), v = random_matrix(1, 4, rng);
  InterventionTensors it = intervene(q, k, v, cfg);
  CHECK(it.A.at(0, 0) == 1.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(it.C[i] == v[i]);
}

TEST_CASE("constant logits give uniform weights and column means") {
  WindowConfig cfg{3, 0.2, false, true};
  Tensor q({3, 2});  // zero queries: every logit 0
  Rng rng(2);
  Tensor k = random_matrix(3, 2, rng);
  Tensor v = Tensor::matrix(3, 2, {1, 10, 2, 20, 3, 30});
  InterventionTensors it = intervene(q, k, v, cfg);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(it.A.at(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(it.C.at(i, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(it.C.at(i, 1) == doctest::Approx(20.0).epsilon(1e-12));
  }
}

TEST_CASE("intervene hand oracle W=2 e=1") {
  WindowConfig cfg{2, 0.2, false, true};
  Tensor q = Tensor::matrix(2, 1, {0.0, std::log(3.0)});
  Tensor k = Tensor::matrix(2, 1, {1.0, 0.0});
  Tensor v = Tensor::matrix(2, 1, {1.0, 2.0});
  InterventionTensors it = intervene(q, k, v, cfg);
  CHECK(it.A.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(it.A.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(it.A.at(1, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(it.A.at(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(it.C.at(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(it.C.at(1, 0) == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("attention rows are stochastic on random instances") {
  WindowConfig cfg{6, 0.2, false, true};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(30 + seed);
    InterventionTensors it = intervene(random_matrix(6, 3, rng), random_matrix(6, 3, rng),
                                       random_matrix(6, 3, rng), cfg);
    for (std::size_t r = 0; r < 6; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 6; ++c) s += it.A.at(r, c);
      CHECK(std::abs(s - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("qk_scale divides the logits by sqrt(e)") {
  Rng rng(3);
  Tensor q = random_matrix(4, 9, rng), k = random_matrix(4, 9, rng), v = random_matrix(4, 9, rng);
  WindowConfig off{4, 0.2, false, true};
  WindowConfig on{4, 0.2, true, true};
  Tensor qs = scale(q, 1.0 / 3.0);  // sqrt(9) = 3
  InterventionTensors a = intervene(qs, k, v, off);
  InterventionTensors b = intervene(q, k, v, on);
  for (std::size_t i = 0; i < a.A.size(); ++i)
    CHECK(a.A[i] == doctest::Approx(b.A[i]).epsilon(1e-12));
}

TEST_CASE("info_nce closed forms") {
  for (std::size_t W : {2ul, 8ul, 64ul}) {
    Tensor c({W, 3});
    for (std::size_t i = 0; i < W; ++i) c.at(i, 0) = 1.0;
    CHECK(std::abs(info_nce_value(c, c, 0.2) - std::log((double)W)) <= 1e-10);
  }
  Tensor eye = Tensor::identity(2);
  CHECK(std::abs(info_nce_value(eye, eye, 0.2) - std::log(1.0 + std::exp(-5.0))) <= 1e-9);
}

TEST_CASE("info_nce bounds and temperature contract") {
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t W = 2 + rng.next_below(7);
    Tensor c1 = random_matrix(W, 4, rng);
    Tensor c2 = random_matrix(W, 4, rng);
    double loss = info_nce_value(c1, c2, 0.2);
    CHECK(loss >= 0.0);
    CHECK(loss <= std::log((double)W) + 2.0 / 0.2);
  }
  CHECK_THROWS_AS(info_nce_value(Tensor::identity(2), Tensor::identity(2), 0.0), ContractError);
}

TEST_CASE("loss is invariant under consistent window permutation") {
  Rng rng(5);
  const std::size_t W = 6, e = 4;
  Tensor c1 = random_matrix(W, e, rng);
  Tensor c2 = random_matrix(W, e, rng);
  double base = info_nce_value(c1, c2, 0.2);
  std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  Tensor p1({W, e}), p2({W, e});
  for (std::size_t i = 0; i < W; ++i)
    for (std::size_t j = 0; j < e; ++j) {
      p1.at(i, j) = c1.at(perm[i], j);
      p2.at(i, j) = c2.at(perm[i], j);
    }
  CHECK(std::abs(info_nce_value(p1, p2, 0.2) - base) <= 1e-10);
}

TEST_CASE("adding a row constant to the logits leaves A unchanged") {
  Rng rng(6);
  const std::size_t W = 4, e = 3;
  Tensor q = random_matrix(W, e, rng);
  Tensor k = random_matrix(W, e, rng);
  Tensor v = random_matrix(W, e, rng);
  WindowConfig cfg{W, 0.2, false, true};
  InterventionTensors base = intervene(q, k, v, cfg);
  // Shift row 1's logits by adding a multiple of a vector orthogonal to
  // nothing: easiest consistent shift is via softmax directly, so instead
  // verify with an explicitly shifted logit matrix.
  Tensor logits = matmul_nt(q, k);
  for (std::size_t c = 0; c < W; ++c) logits.at(1, c) += 42.0;
  Tensor a2 = softmax_rows(logits);
  for (std::size_t c = 0; c < W; ++c)
    CHECK(std::abs(a2.at(1, c) - base.A.at(1, c)) <= 1e-12);
}

TEST_CASE("teacher keys carry no gradient") {
  Rng rng(7);
  WindowConfig win{3, 0.2, false, true};
  model::ParamPair pair = model::init_params(model::MlpSpec{{5, 4}}, model::HeadSpec{4, 4},
                                             rng.child("init"));
  Tensor va = random_matrix(3, 5, rng), vb = random_matrix(3, 5, rng);

  Tape tape;
  auto enc_p = model::stage_params(tape, pair.student_enc);
  auto head_p = model::stage_params(tape, pair.student_head);
  FormedViews f = form_views(tape, pair, enc_p, head_p, va, vb);
  auto [c1, c2] = symmetric_intervention(tape, f, win);
  NodeId loss = info_nce(tape, c1, c2, win.temperature);
  double base = tape.scalar_value(loss);
  tape.backward(loss);
  // Keys are tape constants: no gradient storage at all.
  CHECK(tape.grad(f.k1).size() == 0);
  CHECK(tape.grad(f.k2).size() == 0);

  // Perturbing the teacher changes the loss value, so K is genuinely used.
  model::ParamPair nudged = pair;
  for (auto& w : nudged.teacher_enc.weights)
    for (double& x : w.vec()) x *= 1.1;
  Tape tape2;
  auto enc2 = model::stage_params(tape2, nudged.student_enc);
  auto head2 = model::stage_params(tape2, nudged.student_head);
  FormedViews f2 = form_views(tape2, nudged, enc2, head2, va, vb);
  auto [d1, d2] = symmetric_intervention(tape2, f2, win);
  double nudged_loss = tape2.scalar_value(info_nce(tape2, d1, d2, win.temperature));
  CHECK(nudged_loss != base);
}

TEST_CASE("train_step with lr=0 moves only the teacher") {
  PretrainSetup s = small_setup(50, 8, 10);
  s.optim.base_lr = 0.0;
  model::ParamPair pair = model::init_params(s.encoder, s.head, Rng(50).child("init"));
  TrainState state{pair, AdamW(s.optim), "test"};
  stream::StreamBatch batch = stream::sample_batch(s.source, s.schedule, 0, 8, Rng(51));
  train_step(state, batch, s.aug, s.window, Rng(52));
  for (std::size_t i = 0; i < pair.student_enc.weights.size(); ++i)
    for (std::size_t j = 0; j < pair.student_enc.weights[i].size(); ++j)
      CHECK(state.pair.student_enc.weights[i][j] == pair.student_enc.weights[i][j]);
}

TEST_CASE("train_step is bitwise reproducible") {
  auto one = [] {
    PretrainSetup s = small_setup(60, 8, 10);
    model::ParamPair pair = model::init_params(s.encoder, s.head, Rng(60).child("init"));
    TrainState state{pair, AdamW(s.optim), "test"};
    stream::StreamBatch batch = stream::sample_batch(s.source, s.schedule, 0, 8, Rng(61));
    return train_step(state, batch, s.aug, s.window, Rng(62));
  };
  CHECK(one() == one());
}

TEST_CASE("train_step rejects a batch that is not window sized") {
  PretrainSetup s = small_setup(70, 8, 10);
  model::ParamPair pair = model::init_params(s.encoder, s.head, Rng(70));
  TrainState state{pair, AdamW(s.optim), "test"};
  stream::StreamBatch batch = stream::sample_batch(s.source, s.schedule, 0, 5, Rng(71));
  CHECK_THROWS_AS(train_step(state, batch, s.aug, s.window, Rng(72)), ContractError);
}

TEST_CASE("pretrain steps=0 returns init params and an empty trace") {
  PretrainSetup s = small_setup(80, 8, 0);
  s.optim.total_steps = 1;
  PretrainResult r = pretrain(s);
  CHECK(r.trace.empty());
  model::ParamPair fresh = model::init_params(s.encoder, s.head, Rng(80).child("init"));
  for (std::size_t i = 0; i < fresh.student_enc.weights.size(); ++i)
    for (std::size_t j = 0; j < fresh.student_enc.weights[i].size(); ++j)
      CHECK(r.pair.student_enc.weights[i][j] == fresh.student_enc.weights[i][j]);
}

TEST_CASE("pretrain replays bitwise for a fixed seed") {
  PretrainResult a = pretrain(small_setup(90, 8, 25));
  PretrainResult b = pretrain(small_setup(90, 8, 25));
  REQUIRE(a.trace.size() == 25);
  for (std::size_t t = 0; t < 25; ++t) CHECK(a.trace[t].loss == b.trace[t].loss);
  for (std::size_t i = 0; i < a.pair.student_enc.weights.size(); ++i)
    for (std::size_t j = 0; j < a.pair.student_enc.weights[i].size(); ++j)
      CHECK(a.pair.student_enc.weights[i][j] == b.pair.student_enc.weights[i][j]);
}

TEST_CASE("a short run actually learns") {
  // 200 steps, stationary 4-class mixture: median final loss over 5 seeds
  // comes in well under the uniform-similarity plateau ln W.
  std::vector<double> finals;
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    PretrainSetup s = small_setup(seed, 16, 200);
    // pretrain scales base_lr by W/256; compensate so the effective rate
    // stays trainable at this toy window.
    s.optim.base_lr = 5e-3;
    PretrainResult r = pretrain(s);
    finals.push_back(r.trace.back().loss);
  }
  std::sort(finals.begin(), finals.end());
  CHECK(finals[2] < std::log(16.0) * 0.9);
}

TEST_CASE("lr schedule warms up linearly then decays to zero") {
  OptimConfig cfg;
  cfg.base_lr = 1.0;
  cfg.warmup_steps = 10;
  cfg.total_steps = 100;
  cfg.validate();
  CHECK(cfg.lr_at(4) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(cfg.lr_at(9) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cfg.lr_at(99) < 0.01);
  for (std::uint64_t t = 0; t + 1 < 10; ++t) CHECK(cfg.lr_at(t) < cfg.lr_at(t + 1));
  for (std::uint64_t t = 0; t < 100; ++t) CHECK(cfg.lr_at(t) >= 0.0);
}
