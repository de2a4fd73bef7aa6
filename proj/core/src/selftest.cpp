#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "driftlab/graph.hpp"
#include "driftlab/model.hpp"
#include "driftlab/numkern.hpp"
#include "driftlab/rcp.hpp"
#include "driftlab/rng.hpp"
#include "driftlab/runner.hpp"
#include "driftlab/stream.hpp"

namespace driftlab::cli {

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double spread = 1.0) {
  Tensor t({r, c});
  for (double& v : t.vec()) v = spread * rng.gaussian();
  return t;
}

// Each kernel is checked as a scalar composite on a fresh tape; the central
// difference replays the same composite at the value level.
double check_kernel(const std::string& which, const Tensor& x0, const Tensor& other,
                    bool flip_grad) {
  auto build = [&](Tape& tape, NodeId x) -> NodeId {
    NodeId o = tape.constant(other);
    if (which == "matmul") return tape.sum_squares(tape.matmul(x, o));
    if (which == "matmul_nt") return tape.sum_squares(tape.matmul_nt(x, o));
    if (which == "add_rowvec") return tape.sum_squares(tape.add_rowvec(o, x));
    if (which == "relu") return tape.sum_squares(tape.relu(x));
    if (which == "softmax") return tape.sum_squares(tape.softmax_rows(x));
    return tape.sum(tape.l2_normalize_rows(x));
  };
  Tape tape;
  NodeId x = tape.input(x0);
  NodeId loss = build(tape, x);
  tape.backward(loss);
  Tensor analytic = tape.grad(x);
  if (flip_grad)
    for (double& v : analytic.vec()) v = -v;
  auto f = [&](const Tensor& xt) {
    Tape t2;
    return t2.scalar_value(build(t2, t2.constant(xt)));
  };
  return grad_check(f, x0, analytic, 1e-5);
}

double loss_value_plain(const model::ParamPair& pair, const Tensor& va, const Tensor& vb,
                        const rcp::WindowConfig& win) {
  const model::MlpSpec head_mlp = pair.head_spec.as_mlp();
  Tensor v1 = model::forward_mlp_plain(pair.enc_spec, pair.student_enc, va);
  Tensor q1 = model::forward_mlp_plain(head_mlp, pair.student_head, v1);
  Tensor v2 = model::forward_mlp_plain(pair.enc_spec, pair.student_enc, vb);
  Tensor q2 = model::forward_mlp_plain(head_mlp, pair.student_head, v2);
  Tensor k1 = model::forward_teacher(pair, va);
  Tensor k2 = model::forward_teacher(pair, vb);
  Tensor c1 = rcp::intervene(q1, k2, v1, win).C;
  Tensor c2 = rcp::intervene(q2, k1, v2, win).C;
  return rcp::info_nce_value(c1, c2, win.temperature);
}

// Independent pairwise AUROC oracle, quadratic on purpose.
double auroc_brute(const std::vector<double>& id, const std::vector<double>& ood) {
  double s = 0.0;
  for (double a : id)
    for (double b : ood) s += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return s / ((double)id.size() * (double)ood.size());
}

double fpr_brute(const std::vector<double>& id, const std::vector<double>& ood, double target) {
  // Largest threshold drawn from the ID scores that keeps recall >= target.
  double best = -1e300;
  bool found = false;
  for (double th : id) {
    std::size_t kept = 0;
    for (double a : id)
      if (a >= th) ++kept;
    if ((double)kept >= std::ceil(target * (double)id.size()) && (!found || th > best)) {
      best = th;
      found = true;
    }
  }
  std::size_t above = 0;
  for (double b : ood)
    if (b >= best) ++above;
  return (double)above / (double)ood.size();
}

struct Battery {
  std::ostream& os;
  int failures = 0;
  void report(const std::string& name, bool ok, const std::string& detail = "") {
    os << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!ok && !detail.empty()) os << "  (" << detail << ")";
    os << "\n";
    if (!ok) ++failures;
  }
};

}  // namespace

int run_selftest(std::ostream& os, const std::string& inject_fault) {
  Battery b{os};

  {
    const char* kernels[] = {"matmul", "matmul_nt", "add_rowvec", "relu", "softmax", "l2norm"};
    for (const char* which : kernels) {
      double worst = 0.0;
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng = Rng(900 + seed).child(which);
        const std::size_t m = 2 + rng.next_below(5);
        const std::size_t k = 2 + rng.next_below(5);
        const std::size_t n = 2 + rng.next_below(5);
        Tensor x, other;
        const std::string w = which;
        if (w == "matmul") {
          x = random_matrix(m, k, rng);
          other = random_matrix(k, n, rng);
        } else if (w == "matmul_nt") {
          x = random_matrix(m, k, rng);
          other = random_matrix(n, k, rng);
        } else if (w == "add_rowvec") {
          x = random_matrix(1, n, rng);
          other = random_matrix(m, n, rng);
        } else {
          x = random_matrix(m, n, rng);
          other = Tensor({1, 1});
          if (w == "relu")  // keep clear of the kink
            for (double& v : x.vec())
              if (std::abs(v) < 0.05) v = v < 0 ? -0.1 : 0.1;
        }
        const bool flip = inject_fault == "softmax_grad" && w == "softmax";
        worst = std::max(worst, check_kernel(w, x, other, flip));
      }
      b.report(std::string("grad/") + which, worst < 1e-6,
               "worst rel err " + std::to_string(worst));
    }
  }

  {
    Rng rng(41);
    rcp::WindowConfig win{4, 0.2, false, true};
    model::MlpSpec enc{{5, 6, 3}};
    model::HeadSpec head{3, 4};
    model::ParamPair pair = model::init_params(enc, head, rng.child("init"));
    // Nudge the teacher off the student so K genuinely differs from Q.
    for (auto& wt : pair.teacher_enc.weights)
      for (double& v : wt.vec()) v *= 0.9;
    Tensor va = random_matrix(4, 5, rng);
    Tensor vb = random_matrix(4, 5, rng);

    Tape tape;
    model::MlpTapeParams enc_p = model::stage_params(tape, pair.student_enc);
    model::MlpTapeParams head_p = model::stage_params(tape, pair.student_head);
    rcp::FormedViews f = rcp::form_views(tape, pair, enc_p, head_p, va, vb);
    auto [c1, c2] = rcp::symmetric_intervention(tape, f, win);
    tape.backward(rcp::info_nce(tape, c1, c2, win.temperature));

    double worst = 0.0;
    for (std::size_t layer = 0; layer < pair.student_enc.weights.size(); ++layer) {
      auto value_at = [&](const Tensor& w) {
        model::ParamPair p2 = pair;
        p2.student_enc.weights[layer] = w;
        return loss_value_plain(p2, va, vb, win);
      };
      worst = std::max(worst, grad_check(value_at, pair.student_enc.weights[layer],
                                         tape.grad(enc_p.weights[layer]), 1e-5));
    }
    b.report("grad/full_loss", worst < 1e-4, "worst rel err " + std::to_string(worst));
  }

  {
    bool ok = true;
    rcp::WindowConfig win{1, 0.2, false, true};
    for (std::uint64_t seed = 0; seed < 100 && ok; ++seed) {
      Rng rng(7000 + seed);
      const std::size_t e = 1 + rng.next_below(8);
      Tensor q = random_matrix(1, e, rng, 3.0);
      Tensor k = random_matrix(1, e, rng, 3.0);
      Tensor v = random_matrix(1, e, rng, 3.0);
      Tensor c = rcp::intervene(q, k, v, win).C;
      for (std::size_t i = 0; i < e; ++i)
        if (c[i] != v[i]) ok = false;
    }
    b.report("intervention/window1_identity", ok);
  }

  {
    const double lambda = 0.999;
    model::MlpSpec enc{{1, 1}};
    model::HeadSpec head{1, 1};
    model::ParamPair pair = model::init_params(enc, head, Rng(3));
    pair.teacher_enc.weights[0][0] = 1.0;
    for (auto& w : pair.student_enc.weights)
      for (double& v : w.vec()) v = 0.0;
    for (auto& bias : pair.student_enc.biases)
      for (double& v : bias.vec()) v = 0.0;
    for (int t = 0; t < 1000; ++t) model::ema_update(pair, lambda);
    const double expect = std::pow(lambda, 1000.0);
    const double got = pair.teacher_enc.weights[0][0];
    b.report("ema/closed_form_decay", std::abs(got - expect) / expect < 1e-6);
  }

  {
    bool ok = true;
    for (std::size_t W : {2ul, 8ul, 64ul}) {
      Tensor c({W, 3});
      for (std::size_t i = 0; i < W; ++i) c.at(i, 0) = 1.0;  // identical unit rows
      if (std::abs(rcp::info_nce_value(c, c, 0.2) - std::log((double)W)) > 1e-10) ok = false;
    }
    Tensor eye = Tensor::identity(2);
    const double expect = std::log(1.0 + std::exp(-5.0));
    if (std::abs(rcp::info_nce_value(eye, eye, 0.2) - expect) > 1e-9) ok = false;
    b.report("loss/closed_forms", ok);
  }

  {
    double worst_auroc = 0.0, worst_fpr = 0.0;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      Rng rng(500 + seed);
      const std::size_t n1 = 5 + rng.next_below(36);
      const std::size_t n0 = 5 + rng.next_below(36);
      std::vector<double> id(n1), ood(n0);
      // Quantize so ties actually occur.
      for (double& v : id) v = (double)rng.next_below(12) / 4.0;
      for (double& v : ood) v = (double)rng.next_below(12) / 4.0 - 0.5;
      worst_auroc = std::max(worst_auroc, std::abs(eval::auroc(id, ood) - auroc_brute(id, ood)));
      worst_fpr = std::max(worst_fpr,
                           std::abs(eval::fpr_at_tpr(id, ood, 0.95) - fpr_brute(id, ood, 0.95)));
    }
    b.report("metrics/auroc_oracle", worst_auroc < 1e-12);
    b.report("metrics/fpr_oracle", worst_fpr < 1e-12);
  }

  {
    Rng rng(11);
    stream::SourceModel src = stream::make_orthogonal_source(6, 16, 0.25, 2, 3.0, rng);
    bool ok = true;

    stream::DriftSchedule tailed;
    tailed.kind = stream::DriftKind::kTailed;
    tailed.imbalance_ratio = 50.0;
    tailed.ramp_steps = 100;
    Tensor p0 = stream::class_probs(tailed, 6, 0);
    Tensor pmid = stream::class_probs(tailed, 6, 50);
    Tensor pend = stream::class_probs(tailed, 6, 100);
    for (std::size_t c = 0; c < 6; ++c)
      if (std::abs(p0.at(0, c) - 1.0 / 6.0) > 1e-12) ok = false;
    for (std::size_t c = 1; c < 6; ++c)
      if (pend.at(0, c) >= pend.at(0, c - 1)) ok = false;
    if (std::abs(pmid.at(0, 0) - p0.at(0, 0)) < 1e-6) ok = false;  // moving during the ramp
    if (std::abs(pend.at(0, 0) / pend.at(0, 5) - 50.0) > 1e-9) ok = false;

    stream::DriftSchedule sudden;
    sudden.kind = stream::DriftKind::kSudden;
    sudden.switch_step = 10;
    sudden.post_transform.kind = stream::TransformKind::kNegate;
    Tensor pre = stream::active_means(src, sudden, 9);
    Tensor post = stream::active_means(src, sudden, 10);
    for (std::size_t i = 0; i < pre.size() && ok; ++i)
      if (post[i] != -pre[i]) ok = false;

    stream::DriftSchedule stat;
    Tensor s0 = stream::active_means(src, stat, 0);
    Tensor s9 = stream::active_means(src, stat, 999);
    for (std::size_t i = 0; i < s0.size() && ok; ++i)
      if (s0[i] != s9[i]) ok = false;

    b.report("stream/drift_witnesses", ok);
  }

  os << (b.failures == 0 ? "selftest: all properties hold\n"
                         : "selftest: " + std::to_string(b.failures) + " failure(s)\n");
  return b.failures;
}

}  // namespace driftlab::cli
