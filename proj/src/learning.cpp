#include "gridcrf/learning.hpp"

#include "gridcrf/simplex.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gridcrf {

namespace {

constexpr double kLossClamp = 1e-12;

GradientSet zero_gradients(const CrfInstance& inst) {
  GradientSet g;
  g.unary_weight = 0.0;
  g.spatial = SpatialKernelBank::zeros(inst.spatial.labels, inst.spatial.radius);
  if (inst.bilateral)
    g.bilateral = BilateralKernelBank::zeros(inst.bilateral->labels,
                                             inst.bilateral->radius);
  g.scores = Matrix::Zero(inst.unary.scores.rows(), inst.unary.scores.cols());
  return g;
}

// dLoss/dq~ from dLoss/dq through the per-row projection Jacobian
// transpose: r_mu = s_mu g_mu - dthr_mu * sum_lam s_lam g_lam.
Matrix projection_backward(const Matrix& grad_out, const Matrix& pre_projection,
                           double alpha) {
  const int labels = static_cast<int>(grad_out.cols());
  Matrix r(grad_out.rows(), labels);
  std::vector<double> row(labels);
  for (Eigen::Index i = 0; i < grad_out.rows(); ++i) {
    for (int l = 0; l < labels; ++l) row[l] = pre_projection(i, l);
    const ProjectionResult proj = project_row_leaky(row, alpha);
    const double dthr = 1.0 / (labels - proj.clamped);
    double weighted = 0.0;
    for (int l = 0; l < labels; ++l)
      weighted += (proj.support[l] ? 1.0 : alpha) * grad_out(i, l);
    for (int l = 0; l < labels; ++l) {
      const double scale = proj.support[l] ? 1.0 : alpha;
      const double thr_term = row[l] > proj.threshold ? dthr * weighted : 0.0;
      r(i, l) = scale * grad_out(i, l) - thr_term;
    }
  }
  return r;
}

}  // namespace

ParameterSet init_params(int labels, int spatial_radius, int bilateral_radius,
                         double bilateral_strength) {
  ParameterSet params;
  params.unary_weight = 0.5;
  params.spatial = SpatialKernelBank::zeros(labels, spatial_radius);
  if (bilateral_radius >= 0) {
    params.bilateral = BilateralKernelBank::zeros(labels, bilateral_radius);
    for (const auto& d : BilateralKernelBank::offsets(bilateral_radius)) {
      double norm2 = 0.0;
      for (int k = 0; k < 5; ++k) norm2 += double(d[k]) * d[k];
      const double value = bilateral_strength * std::exp(-0.5 * norm2);
      for (int lam = 0; lam < labels; ++lam)
        for (int mu = 0; mu < labels; ++mu)
          if (lam != mu) params.bilateral->tap(lam, mu, d) = value;
    }
  }
  return params;
}

CrfInstance apply_parameters(const CrfInstance& inst, const ParameterSet& params) {
  if (params.spatial.labels != inst.labels ||
      params.spatial.radius != inst.spatial.radius)
    throw std::invalid_argument("apply_parameters: spatial bank shape mismatch");
  if (params.bilateral.has_value() != inst.bilateral.has_value())
    throw std::invalid_argument("apply_parameters: bilateral presence mismatch");
  CrfInstance out = inst;
  out.spatial = params.spatial;
  if (params.bilateral) {
    if (params.bilateral->labels != inst.labels ||
        params.bilateral->radius != inst.bilateral->radius)
      throw std::invalid_argument("apply_parameters: bilateral bank shape mismatch");
    out.bilateral = params.bilateral;
  }
  out.unary = make_unary(inst.unary.scores, params.unary_weight, inst.unary.floor);
  return out;
}

ParameterSet extract_parameters(const CrfInstance& inst) {
  ParameterSet params;
  params.unary_weight = inst.unary.weight;
  params.spatial = inst.spatial;
  params.bilateral = inst.bilateral;
  return params;
}

Matrix backward_step(const Matrix& grad_out, const InferenceTrace& trace,
                     int step, const CrfInstance& inst,
                     const InferenceConfig& config, GradientSet& accum,
                     const FeatureLattice* lattice) {
  if (step < 0 || step >= static_cast<int>(trace.pre_projection.size()))
    throw std::invalid_argument("backward_step: no stored state for step " +
                                std::to_string(step));
  const Matrix& q_t = trace.states[step];
  const Matrix& pre = trace.pre_projection[step];
  const GridGeometry& g = inst.geometry;
  const int n = g.pixels();
  const int labels = inst.labels;
  const double gamma = config.step_size;

  const Matrix r = projection_backward(grad_out, pre, config.leak);

  // Unary paths: psi enters the step as -gamma * psi.
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < labels; ++l) {
      accum.unary_weight +=
          gamma * r(i, l) * std::log(inst.unary.scores(i, l) + inst.unary.floor);
      accum.scores(i, l) += -gamma * r(i, l);
    }

  // Spatial taps: the filter-weight rule, a correlation of r against q^t.
  const int radius = inst.spatial.radius;
  for (int i = 0; i < n; ++i) {
    const int px = g.pixel_x(i), py = g.pixel_y(i);
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!g.contains(px + dx, py + dy)) continue;
        const int j = g.index(px + dx, py + dy);
        for (int lam = 0; lam < labels; ++lam) {
          const double w = -2.0 * gamma * r(i, lam);
          for (int mu = 0; mu < labels; ++mu)
            accum.spatial.tap(lam, mu, dx, dy) += w * q_t(j, mu);
        }
      }
  }

  FeatureLattice local;
  if (inst.bilateral && !lattice) {
    local = FeatureLattice(*inst.features, inst.bilateral->radius);
    lattice = &local;
  }
  if (inst.bilateral) {
    for (int i = 0; i < n; ++i) {
      const auto& ci = lattice->cell_of(i);
      for (int j : lattice->neighbours(i)) {
        const auto& cj = lattice->cell_of(j);
        const std::array<int, 5> d{ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2],
                                   ci[3] - cj[3], ci[4] - cj[4]};
        for (int lam = 0; lam < labels; ++lam) {
          const double w = -2.0 * gamma * r(i, lam);
          for (int mu = 0; mu < labels; ++mu)
            accum.bilateral->tap(lam, mu, d) += w * q_t(j, mu);
        }
      }
    }
  }

  // dLoss/dq^t through (I - gamma * H)^T.
  Matrix grad_in = r;
  grad_in -=
      2.0 * gamma * spatial_response(r, g, inst.spatial.transposed());
  if (inst.bilateral)
    grad_in -= 2.0 * gamma * bilateral_response(r, *inst.features,
                                                inst.bilateral->transposed(),
                                                *lattice);
  return grad_in;
}

GradientSet backward_unroll(const InferenceTrace& trace,
                            const Matrix& grad_loss_at_final,
                            const CrfInstance& inst,
                            const InferenceConfig& config) {
  GradientSet accum = zero_gradients(inst);

  FeatureLattice lattice;
  const FeatureLattice* lattice_ptr = nullptr;
  if (inst.bilateral) {
    lattice = FeatureLattice(*inst.features, inst.bilateral->radius);
    lattice_ptr = &lattice;
  }

  Matrix grad = grad_loss_at_final;
  for (int t = static_cast<int>(trace.pre_projection.size()) - 1; t >= 0; --t)
    grad = backward_step(grad, trace, t, inst, config, accum, lattice_ptr);

  // accum.scores so far holds dLoss/dpsi; fold in dpsi/dz and add the
  // initialization path q^0 = z.
  for (Eigen::Index i = 0; i < accum.scores.rows(); ++i)
    for (Eigen::Index l = 0; l < accum.scores.cols(); ++l) {
      const double dpsi_dz =
          -inst.unary.weight / (inst.unary.scores(i, l) + inst.unary.floor);
      accum.scores(i, l) = accum.scores(i, l) * dpsi_dz + grad(i, l);
    }
  return accum;
}

double loss_nll(const RelaxedState& q, const DiscreteLabeling& truth,
                Matrix* grad) {
  const int n = q.pixels();
  if (static_cast<int>(truth.size()) != n)
    throw std::invalid_argument("loss_nll: truth length mismatch");
  if (grad) *grad = Matrix::Zero(q.q.rows(), q.q.cols());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = q.q(i, truth[i]);
    if (p > kLossClamp) {
      loss -= std::log(p);
      if (grad) (*grad)(i, truth[i]) = -1.0 / (n * p);
    } else {
      loss -= std::log(kLossClamp);
    }
  }
  return loss / n;
}

Velocity Velocity::zeros_like(const ParameterSet& params) {
  Velocity v;
  v.spatial = SpatialKernelBank::zeros(params.spatial.labels, params.spatial.radius);
  if (params.bilateral)
    v.bilateral = BilateralKernelBank::zeros(params.bilateral->labels,
                                             params.bilateral->radius);
  return v;
}

void sgd_update(ParameterSet& params, const GradientSet& grads,
                Velocity& velocity, const TrainConfig& config) {
  const double lr = config.learning_rate;
  const double m = config.momentum;
  const double wd = config.weight_decay;

  velocity.unary_weight =
      m * velocity.unary_weight - lr * (grads.unary_weight + wd * params.unary_weight);
  params.unary_weight += velocity.unary_weight;

  for (size_t i = 0; i < params.spatial.taps.size(); ++i) {
    velocity.spatial.taps[i] = m * velocity.spatial.taps[i] -
                               lr * (grads.spatial.taps[i] + wd * params.spatial.taps[i]);
    params.spatial.taps[i] += velocity.spatial.taps[i];
  }
  if (params.bilateral) {
    for (size_t i = 0; i < params.bilateral->taps.size(); ++i) {
      velocity.bilateral->taps[i] =
          m * velocity.bilateral->taps[i] -
          lr * (grads.bilateral->taps[i] + wd * params.bilateral->taps[i]);
      params.bilateral->taps[i] += velocity.bilateral->taps[i];
    }
  }

  params.spatial.symmetrize();
  params.spatial.pin_self_taps();
  if (params.bilateral) params.bilateral->symmetrize();
}

namespace {

// Forward pass used by the gradient audit and the trainer. Takes q^0 to
// be the score field literally (the backward formulas assume exactly
// that), records pre-projection states, and tracks how close any
// projection came to a clamp threshold.
struct UnrolledForward {
  InferenceTrace trace;
  double loss = 0.0;
  Matrix grad_loss;
  double min_margin = std::numeric_limits<double>::infinity();
};

UnrolledForward unrolled_forward(const CrfInstance& inst,
                                 const DiscreteLabeling& truth, int iterations,
                                 double step_size, double leak) {
  const int labels = inst.labels;
  FeatureLattice lattice;
  const FeatureLattice* lattice_ptr = nullptr;
  if (inst.bilateral) {
    lattice = FeatureLattice(*inst.features, inst.bilateral->radius);
    lattice_ptr = &lattice;
  }

  UnrolledForward fwd;
  fwd.trace.method = "pgd";
  fwd.trace.mode = leak == 0.0 ? SimplexMode::kStrict : SimplexMode::kLeaky;
  Matrix q = inst.unary.scores;
  fwd.trace.states.push_back(q);

  std::vector<double> row(labels);
  for (int t = 0; t < iterations; ++t) {
    Matrix pre = q - step_size * energy_gradient(inst, q, lattice_ptr);
    for (Eigen::Index i = 0; i < pre.rows(); ++i) {
      for (int l = 0; l < labels; ++l) row[l] = pre(i, l);
      const ProjectionResult proj = project_row_leaky(row, leak);
      for (int l = 0; l < labels; ++l) {
        fwd.min_margin =
            std::min(fwd.min_margin, std::abs(row[l] - proj.threshold));
        q(i, l) = proj.q[l];
      }
    }
    fwd.trace.pre_projection.push_back(std::move(pre));
    fwd.trace.states.push_back(q);
  }

  RelaxedState final_state{q, fwd.trace.mode};
  fwd.loss = loss_nll(final_state, truth, &fwd.grad_loss);
  for (int i = 0; i < static_cast<int>(truth.size()); ++i)
    fwd.min_margin =
        std::min(fwd.min_margin, std::abs(q(i, truth[i]) - kLossClamp));
  return fwd;
}

// Rebuilds psi = -w log(z + eps) without the [0,1] domain check, so
// finite-difference probes may step a score just past the boundary.
CrfInstance with_scores(const CrfInstance& inst, const Matrix& scores) {
  CrfInstance out = inst;
  out.unary.scores = scores;
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    for (Eigen::Index l = 0; l < scores.cols(); ++l)
      out.unary.psi(i, l) =
          -out.unary.weight * std::log(scores(i, l) + out.unary.floor);
  return out;
}

CrfInstance with_weight(const CrfInstance& inst, double weight) {
  CrfInstance out = inst;
  out.unary.weight = weight;
  for (Eigen::Index i = 0; i < out.unary.scores.rows(); ++i)
    for (Eigen::Index l = 0; l < out.unary.scores.cols(); ++l)
      out.unary.psi(i, l) =
          -weight * std::log(out.unary.scores(i, l) + out.unary.floor);
  return out;
}

double group_error(const std::vector<double>& analytic,
                   const std::vector<double>& fd) {
  double scale = 1e-6;
  for (double v : analytic) scale = std::max(scale, std::abs(v));
  for (double v : fd) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, std::abs(analytic[i] - fd[i]));
  return worst / scale;
}

}  // namespace

double GradCheckReport::max_error() const {
  return std::max(std::max(unary_weight_error, spatial_error),
                  std::max(bilateral_error, scores_error));
}

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  out << "w_u " << unary_weight_error << "  w_s " << spatial_error << "  w_b "
      << bilateral_error << "  z " << scores_error
      << (kink_free ? "" : "  [kink]");
  return out.str();
}

GradCheckReport grad_check(const CrfInstance& inst, const DiscreteLabeling& truth,
                           int iterations, double leak, double step_size,
                           double kink_margin) {
  constexpr double h = 1e-5;
  GradCheckReport report;

  const UnrolledForward base =
      unrolled_forward(inst, truth, iterations, step_size, leak);
  report.kink_free = base.min_margin > kink_margin;

  InferenceConfig config;
  config.iterations = iterations;
  config.step_size = step_size;
  config.leak = leak;
  const GradientSet analytic =
      backward_unroll(base.trace, base.grad_loss, inst, config);

  auto loss_at = [&](const CrfInstance& variant) {
    return unrolled_forward(variant, truth, iterations, step_size, leak).loss;
  };

  {
    const double plus = loss_at(with_weight(inst, inst.unary.weight + h));
    const double minus = loss_at(with_weight(inst, inst.unary.weight - h));
    report.unary_weight_error = group_error({analytic.unary_weight},
                                            {(plus - minus) / (2 * h)});
  }

  {
    std::vector<double> a, fd;
    CrfInstance variant = inst;
    for (size_t i = 0; i < inst.spatial.taps.size(); ++i) {
      a.push_back(analytic.spatial.taps[i]);
      variant.spatial.taps[i] = inst.spatial.taps[i] + h;
      const double plus = loss_at(variant);
      variant.spatial.taps[i] = inst.spatial.taps[i] - h;
      const double minus = loss_at(variant);
      variant.spatial.taps[i] = inst.spatial.taps[i];
      fd.push_back((plus - minus) / (2 * h));
    }
    report.spatial_error = group_error(a, fd);
  }

  if (inst.bilateral) {
    std::vector<double> a, fd;
    CrfInstance variant = inst;
    for (size_t i = 0; i < inst.bilateral->taps.size(); ++i) {
      a.push_back(analytic.bilateral->taps[i]);
      variant.bilateral->taps[i] = inst.bilateral->taps[i] + h;
      const double plus = loss_at(variant);
      variant.bilateral->taps[i] = inst.bilateral->taps[i] - h;
      const double minus = loss_at(variant);
      variant.bilateral->taps[i] = inst.bilateral->taps[i];
      fd.push_back((plus - minus) / (2 * h));
    }
    report.bilateral_error = group_error(a, fd);
  }

  {
    std::vector<double> a, fd;
    Matrix scores = inst.unary.scores;
    for (Eigen::Index i = 0; i < scores.rows(); ++i)
      for (Eigen::Index l = 0; l < scores.cols(); ++l) {
        a.push_back(analytic.scores(i, l));
        const double base_value = scores(i, l);
        scores(i, l) = base_value + h;
        const double plus = loss_at(with_scores(inst, scores));
        scores(i, l) = base_value - h;
        const double minus = loss_at(with_scores(inst, scores));
        scores(i, l) = base_value;
        fd.push_back((plus - minus) / (2 * h));
      }
    report.scores_error = group_error(a, fd);
  }

  return report;
}

TrainResult train(const std::vector<TrainSample>& data, const ParameterSet& start,
                  const TrainConfig& config) {
  if (data.empty()) throw std::invalid_argument("train: no samples");
  TrainResult result;
  result.params = start;
  Velocity velocity = Velocity::zeros_like(start);

  InferenceConfig inference = config.inference;
  inference.leak = config.leak;

  const int batch = std::max(1, config.batch_size);
  size_t cursor = 0;
  const int steps_per_epoch =
      (static_cast<int>(data.size()) + batch - 1) / batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int step = 0; step < steps_per_epoch; ++step) {
      GradientSet total;
      double batch_loss = 0.0;
      for (int b = 0; b < batch; ++b) {
        const TrainSample& sample = data[cursor % data.size()];
        ++cursor;
        const CrfInstance inst = apply_parameters(sample.instance, result.params);
        const UnrolledForward fwd = unrolled_forward(
            inst, sample.truth, inference.iterations, inference.step_size,
            inference.leak);
        batch_loss += fwd.loss;
        GradientSet grads =
            backward_unroll(fwd.trace, fwd.grad_loss, inst, inference);
        if (b == 0) {
          total = std::move(grads);
        } else {
          total.unary_weight += grads.unary_weight;
          for (size_t i = 0; i < total.spatial.taps.size(); ++i)
            total.spatial.taps[i] += grads.spatial.taps[i];
          if (total.bilateral)
            for (size_t i = 0; i < total.bilateral->taps.size(); ++i)
              total.bilateral->taps[i] += grads.bilateral->taps[i];
        }
      }
      if (batch > 1) {
        total.unary_weight /= batch;
        for (double& t : total.spatial.taps) t /= batch;
        if (total.bilateral)
          for (double& t : total.bilateral->taps) t /= batch;
      }
      result.losses.push_back(batch_loss / batch);
      sgd_update(result.params, total, velocity, config);
    }
  }
  return result;
}

}  // namespace gridcrf
