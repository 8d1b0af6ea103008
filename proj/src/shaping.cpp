#include "cpo/shaping.hpp"

#include "cpo/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpo {

void ShapingConfig::validate() const {
  if (!enabled) return;
  if (horizon_T < 1) throw std::invalid_argument("shaping horizon must be at least 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("shaping coefficient must be nonnegative");
  if (fit_steps < 0 || !(step > 0.0)) throw std::invalid_argument("bad predictor fit settings");
}

Vec label_batch(const TrajectoryBatch& batch, const Vec& unsafe, int horizon_T) {
  if (unsafe.size() != batch.size()) throw std::invalid_argument("unsafe indicator length mismatch");
  Vec labels = Vec::Zero(batch.size());
  const std::vector<int> offsets = batch.episode_offsets();
  for (int e = 0; e < batch.n_episodes(); ++e) {
    const int begin = offsets[e];
    const int end = begin + batch.lengths[e];
    // Walk backwards tracking the nearest later unsafe step.
    int next_unsafe = -1;
    for (int i = end - 1; i >= begin; --i) {
      if (next_unsafe >= 0 && next_unsafe - i <= horizon_T) labels(i) = 1.0;
      if (unsafe(i) > 0.0) next_unsafe = i;
    }
  }
  return labels;
}

namespace {

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

FailurePredictor::FailurePredictor(int obs_dim, const std::vector<int>& hidden, Rng& rng)
    : net_(obs_dim, hidden, 1), params_(net_.initial_params(rng)) {}

Vec FailurePredictor::predict(const Mat& observations) const {
  const Mat z = net_.forward(params_, observations);
  Vec p(z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) p(i) = sigmoid(z(0, i));
  return p;
}

double FailurePredictor::predict_one(const Vec& observation) const {
  return predict(Mat(observation))(0);
}

double FailurePredictor::loss(const Mat& observations, const Vec& labels) const {
  const Mat z = net_.forward(params_, observations);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.cols(); ++i)
    total += labels(i) * softplus(-z(0, i)) + (1.0 - labels(i)) * softplus(z(0, i));
  return total / std::max<Eigen::Index>(1, z.cols());
}

std::vector<double> fit_predictor(FailurePredictor& predictor, const Mat& observations, const Vec& labels,
                                  int steps, double step_size) {
  if (labels.size() != observations.cols()) throw std::invalid_argument("labels misaligned with observations");
  std::vector<double> losses;
  if (steps <= 0 || labels.size() == 0) return losses;
  const Mlp& net = predictor.network();
  const double n = static_cast<double>(labels.size());
  LossGrad objective = [&](const Vec& p, Vec* grad) {
    Mlp::Cache cache;
    const Mat z = net.forward(p, observations, &cache);
    Mat dz(1, z.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
      total += labels(i) * softplus(-z(0, i)) + (1.0 - labels(i)) * softplus(z(0, i));
      dz(0, i) = (sigmoid(z(0, i)) - labels(i)) / n;
    }
    if (grad) *grad = net.backward(p, cache, dz);
    return total / n;
  };
  AdamSettings settings;
  settings.step = step_size;
  predictor.set_params(adam_monotone(objective, predictor.params(), steps, settings, &losses));
  return losses;
}

double shaped_cost(double cost, const FailurePredictor& predictor, const Vec& state, double alpha) {
  if (alpha == 0.0) return cost;
  return cost + alpha * predictor.predict_one(state);
}

Vec shaped_costs(const Vec& costs, const FailurePredictor& predictor, const Mat& observations, double alpha) {
  if (alpha == 0.0) return costs;
  return costs + alpha * predictor.predict(observations);
}

}  // namespace cpo
