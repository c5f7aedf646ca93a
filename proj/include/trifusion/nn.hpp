#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trifusion/core_types.hpp"

namespace trifusion::nn {

using Mat = Eigen::MatrixXd;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense tensor, row-major over the shape vector (e.g. NCHW).
struct Tensor {
  std::vector<int> shape;
  ArrX data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data = ArrX::Zero(numel(shape));
  }
  static Eigen::Index numel(const std::vector<int>& s) {
    Eigen::Index n = 1;
    for (int d : s) n *= d;
    return n;
  }
  Eigen::Index size() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
};

/// Trainable parameter with accumulated gradient.
struct Param {
  std::string name;
  ArrX value;
  ArrX grad;

  void init(const std::string& n, Eigen::Index size) {
    name = n;
    value = ArrX::Zero(size);
    grad = ArrX::Zero(size);
  }
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  /// Non-trainable state (e.g. batch-norm running statistics).
  virtual void collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) {}
  /// Multiply-accumulate count x2 for the shapes seen by the last forward.
  virtual std::int64_t flops() const { return 0; }
  virtual void init_weights(std::mt19937_64& rng) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad,
         bool bias = true);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

  int in_c_, out_c_, kernel_, stride_, pad_;
  bool has_bias_;
  Param weight_;  // [out_c, in_c*k*k]
  Param bias_;    // [out_c]

 private:
  Mat col_;  // cached im2col matrix [in_c*k*k, N*OH*OW]
  std::vector<int> in_shape_, out_shape_;
};

/// Depthwise 3x3 convolution, stride 1, pad 1.
class DepthwiseConv3x3 : public Layer {
 public:
  DepthwiseConv3x3(std::string name, int channels, bool bias = true);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

  int channels_;
  bool has_bias_;
  Param weight_;  // [C*9]
  Param bias_;    // [C]

 private:
  Tensor input_;
  std::vector<int> out_shape_;
};

/// Batch normalization over all axes except the channel axis (axis 1).
/// Works for [N,C,H,W] and [N,C,L].
class BatchNorm : public Layer {
 public:
  BatchNorm(std::string name, int channels, Scalar momentum = 0.1, Scalar eps = 1e-5);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) override;
  void init_weights(std::mt19937_64& rng) override;

  std::string name_;
  int channels_;
  Scalar momentum_, eps_;
  Param gamma_, beta_;
  ArrX running_mean_, running_var_;

 private:
  Tensor xhat_;
  ArrX inv_std_;
  std::vector<int> shape_;
  Eigen::Index group_;  // elements per (n, c) slice
  bool train_mode_ = false;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor out_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor out_;
};

class Dropout : public Layer {
 public:
  explicit Dropout(Scalar rate) : rate_(rate) {}
  void set_rng(std::mt19937_64* rng) { rng_ = rng; }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

  Scalar rate_;

 private:
  std::mt19937_64* rng_ = nullptr;
  ArrX mask_;
  bool active_ = false;
};

/// [N,C,H,W] -> [N,C]
class GlobalAvgPool2d : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> in_shape_;
};

/// [N,C,L] -> [N,C]
class GlobalAvgPool1d : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> in_shape_;
};

class Linear : public Layer {
 public:
  Linear(std::string name, int in_f, int out_f);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

  int in_f_, out_f_;
  Param weight_;  // [out_f, in_f]
  Param bias_;    // [out_f]

 private:
  Tensor input_;
  int last_n_ = 0;
};

class Conv1d : public Layer {
 public:
  Conv1d(std::string name, int in_c, int out_c, int kernel, int stride, int pad,
         bool bias = true);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

  int in_c_, out_c_, kernel_, stride_, pad_;
  bool has_bias_;
  Param weight_;  // [out_c, in_c*k]
  Param bias_;

 private:
  Mat col_;
  std::vector<int> in_shape_, out_shape_;
};

/// Bidirectional LSTM over [N,C,L]; output is the concatenation of the two
/// directions' final hidden states, [N, 2*hidden].
class BiLstm : public Layer {
 public:
  BiLstm(std::string name, int input_size, int hidden);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

  int input_size_, hidden_;
  // Per direction: W_ih [4H, C], W_hh [4H, H], bias [4H]; gate order i,f,g,o.
  Param w_ih_[2], w_hh_[2], bias_[2];

 private:
  struct DirCache {
    std::vector<Mat> gates;  // activated gates per step, [4H, N]
    std::vector<Mat> c;      // cell states per step
    std::vector<Mat> h;      // hidden states per step
  };
  DirCache cache_[2];
  Tensor input_;
  int steps_ = 0, batch_ = 0;
};

/// Layers applied in order.
class Sequential : public Layer {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;
  size_t size() const { return layers_.size(); }
  Layer* at(size_t i) { return layers_[i].get(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Residual bottleneck: 1x1 reduce -> 3x3 (optional stride) -> 1x1 expand,
/// BN after each conv, identity or projected skip, ReLU after the add.
class Bottleneck : public Layer {
 public:
  Bottleneck(std::string name, int in_c, int out_c, int mid_c, int stride);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

 private:
  Sequential main_;
  std::unique_ptr<Sequential> proj_;  // null -> identity skip
  Tensor sum_;                        // pre-ReLU sum, for the backward mask
};

std::int64_t count_params(Layer& layer);

/// SGD with momentum and decoupled-from-nothing classic weight decay
/// (decay added to the gradient, as in standard SGD implementations).
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Param*> params, Scalar momentum, Scalar weight_decay);
  void step(Scalar lr);
  void zero_grad();

 private:
  std::vector<Param*> params_;
  std::vector<ArrX> velocity_;
  Scalar momentum_, weight_decay_;
};

}  // namespace trifusion::nn
