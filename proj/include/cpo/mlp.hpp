#pragma once

// Fully connected tanh network over column-major batches (one sample per
// column) with hand-written reverse- and forward-mode derivatives. The
// parameter vector is flat: for each layer, W (out x in, column-major)
// followed by b.

#include "cpo/types.hpp"

#include <vector>

namespace cpo {

class Mlp {
 public:
  struct Cache {
    std::vector<Mat> activations;  // [0] = input, [l] = tanh output of hidden layer l
  };

  Mlp() = default;
  Mlp(int input_dim, std::vector<int> hidden, int output_dim);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  Eigen::Index param_count() const;

  Mat forward(const Eigen::Ref<const Vec>& params, const Mat& x, Cache* cache = nullptr) const;

  /// Gradient of sum_{ij} dout(i,j) * out(i,j) with respect to params.
  Vec backward(const Eigen::Ref<const Vec>& params, const Cache& cache, const Mat& dout) const;

  /// Directional derivative of the outputs along dparams (inputs held fixed).
  Mat jvp(const Eigen::Ref<const Vec>& params, const Cache& cache,
          const Eigen::Ref<const Vec>& dparams) const;

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  Vec initial_params(Rng& rng) const;

 private:
  int layer_in(std::size_t l) const;
  int layer_out(std::size_t l) const;
  std::size_t n_layers() const { return hidden_.size() + 1; }

  int input_dim_ = 0;
  int output_dim_ = 0;
  std::vector<int> hidden_;
  std::vector<Eigen::Index> offsets_;  // start of each layer's W
};

}  // namespace cpo
