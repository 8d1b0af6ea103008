#include "cpo/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace cpo {

Mlp::Mlp(int input_dim, std::vector<int> hidden, int output_dim)
    : input_dim_(input_dim), output_dim_(output_dim), hidden_(std::move(hidden)) {
  if (input_dim <= 0 || output_dim <= 0) throw std::invalid_argument("network dimensions must be positive");
  for (int h : hidden_)
    if (h <= 0) throw std::invalid_argument("hidden layer sizes must be positive");
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    offsets_.push_back(off);
    off += static_cast<Eigen::Index>(layer_out(l)) * (layer_in(l) + 1);
  }
  offsets_.push_back(off);
}

int Mlp::layer_in(std::size_t l) const { return l == 0 ? input_dim_ : hidden_[l - 1]; }
int Mlp::layer_out(std::size_t l) const { return l == hidden_.size() ? output_dim_ : hidden_[l]; }
Eigen::Index Mlp::param_count() const { return offsets_.empty() ? 0 : offsets_.back(); }

Mat Mlp::forward(const Eigen::Ref<const Vec>& params, const Mat& x, Cache* cache) const {
  if (x.rows() != input_dim_) throw std::invalid_argument("network input has wrong dimension");
  if (params.size() != param_count()) throw std::invalid_argument("parameter vector has wrong size");
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  Mat a = x;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    const int in = layer_in(l), out = layer_out(l);
    Eigen::Map<const Mat> W(params.data() + offsets_[l], out, in);
    Eigen::Map<const Vec> b(params.data() + offsets_[l] + out * in, out);
    Mat z = W * a;
    z.colwise() += b;
    if (l + 1 < n_layers()) {
      a = z.array().tanh().matrix();
      if (cache) cache->activations.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Vec Mlp::backward(const Eigen::Ref<const Vec>& params, const Cache& cache, const Mat& dout) const {
  Vec grad = Vec::Zero(param_count());
  Mat delta = dout;
  for (std::size_t l = n_layers(); l-- > 0;) {
    const int in = layer_in(l), out = layer_out(l);
    const Mat& a_prev = cache.activations[l];
    Eigen::Map<Mat> gW(grad.data() + offsets_[l], out, in);
    Eigen::Map<Vec> gb(grad.data() + offsets_[l] + out * in, out);
    gW.noalias() = delta * a_prev.transpose();
    gb = delta.rowwise().sum();
    if (l > 0) {
      Eigen::Map<const Mat> W(params.data() + offsets_[l], out, in);
      Mat back = W.transpose() * delta;
      delta = back.cwiseProduct((1.0 - a_prev.array().square()).matrix());
    }
  }
  return grad;
}

Mat Mlp::jvp(const Eigen::Ref<const Vec>& params, const Cache& cache,
             const Eigen::Ref<const Vec>& dparams) const {
  const Eigen::Index n = cache.activations[0].cols();
  Mat tangent = Mat::Zero(input_dim_, n);
  for (std::size_t l = 0; l < n_layers(); ++l) {
    const int in = layer_in(l), out = layer_out(l);
    Eigen::Map<const Mat> W(params.data() + offsets_[l], out, in);
    Eigen::Map<const Mat> dW(dparams.data() + offsets_[l], out, in);
    Eigen::Map<const Vec> db(dparams.data() + offsets_[l] + out * in, out);
    Mat dz = dW * cache.activations[l];
    if (l > 0) dz.noalias() += W * tangent;
    dz.colwise() += db;
    if (l + 1 < n_layers()) {
      const Mat& a = cache.activations[l + 1];
      tangent = dz.cwiseProduct((1.0 - a.array().square()).matrix());
    } else {
      tangent = std::move(dz);
    }
  }
  return tangent;
}

Vec Mlp::initial_params(Rng& rng) const {
  Vec p = Vec::Zero(param_count());
  for (std::size_t l = 0; l < n_layers(); ++l) {
    const int in = layer_in(l), out = layer_out(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(out) * in; ++i) p(offsets_[l] + i) = u(rng);
  }
  return p;
}

}  // namespace cpo
