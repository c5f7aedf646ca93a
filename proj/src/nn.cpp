#include "trifusion/nn.hpp"

#include <cmath>

namespace trifusion::nn {

namespace {

int conv_out(int size, int kernel, int stride, int pad) {
  return (size + 2 * pad - kernel) / stride + 1;
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

void he_normal(ArrX& w, Eigen::Index fan_in, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> dist(0.0, std::sqrt(2.0 / static_cast<Scalar>(fan_in)));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = dist(rng);
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad,
               bool bias)
    : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), pad_(pad),
      has_bias_(bias) {
  weight_.init(name + ".weight", static_cast<Eigen::Index>(out_c) * in_c * kernel * kernel);
  if (bias) bias_.init(name + ".bias", out_c);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  check(x.shape.size() == 4 && x.dim(1) == in_c_, "Conv2d: bad input shape");
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int OH = conv_out(H, kernel_, stride_, pad_);
  const int OW = conv_out(W, kernel_, stride_, pad_);
  const int K = in_c_ * kernel_ * kernel_;
  in_shape_ = x.shape;
  out_shape_ = {N, out_c_, OH, OW};

  col_.resize(K, static_cast<Eigen::Index>(N) * OH * OW);
  for (int n = 0; n < N; ++n) {
    const Scalar* xp = x.data.data() + static_cast<Eigen::Index>(n) * in_c_ * H * W;
    for (int oy = 0; oy < OH; ++oy) {
      for (int ox = 0; ox < OW; ++ox) {
        const Eigen::Index m = (static_cast<Eigen::Index>(n) * OH + oy) * OW + ox;
        Scalar* cp = col_.data() + m * K;
        for (int c = 0; c < in_c_; ++c) {
          for (int ky = 0; ky < kernel_; ++ky) {
            const int y = oy * stride_ - pad_ + ky;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int xx = ox * stride_ - pad_ + kx;
              cp[(c * kernel_ + ky) * kernel_ + kx] =
                  (y >= 0 && y < H && xx >= 0 && xx < W)
                      ? xp[(static_cast<Eigen::Index>(c) * H + y) * W + xx]
                      : 0.0;
            }
          }
        }
      }
    }
  }
  Eigen::Map<const Mat> wmat(weight_.value.data(), K, out_c_);
  Mat out_mat = wmat.transpose() * col_;  // [out_c, N*OH*OW]
  if (has_bias_) out_mat.colwise() += Eigen::Map<const VecX>(bias_.value.data(), out_c_);

  Tensor out(out_shape_);
  const Eigen::Index plane = static_cast<Eigen::Index>(OH) * OW;
  for (int n = 0; n < N; ++n) {
    Eigen::Map<Mat> dst(out.data.data() + static_cast<Eigen::Index>(n) * out_c_ * plane,
                        plane, out_c_);
    dst = out_mat.middleCols(static_cast<Eigen::Index>(n) * plane, plane).transpose();
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const int N = out_shape_[0], OH = out_shape_[2], OW = out_shape_[3];
  const int H = in_shape_[2], W = in_shape_[3];
  const int K = in_c_ * kernel_ * kernel_;
  const Eigen::Index plane = static_cast<Eigen::Index>(OH) * OW;

  Mat gmat(out_c_, static_cast<Eigen::Index>(N) * plane);
  for (int n = 0; n < N; ++n) {
    Eigen::Map<const Mat> src(
        grad_out.data.data() + static_cast<Eigen::Index>(n) * out_c_ * plane, plane, out_c_);
    gmat.middleCols(static_cast<Eigen::Index>(n) * plane, plane) = src.transpose();
  }
  Eigen::Map<Mat> gw(weight_.grad.data(), K, out_c_);
  gw.noalias() += col_ * gmat.transpose();
  if (has_bias_)
    Eigen::Map<VecX>(bias_.grad.data(), out_c_) += gmat.rowwise().sum();

  Eigen::Map<const Mat> wmat(weight_.value.data(), K, out_c_);
  Mat gcol = wmat * gmat;  // [K, N*OH*OW]

  Tensor gin(in_shape_);
  for (int n = 0; n < N; ++n) {
    Scalar* gp = gin.data.data() + static_cast<Eigen::Index>(n) * in_c_ * H * W;
    for (int oy = 0; oy < OH; ++oy) {
      for (int ox = 0; ox < OW; ++ox) {
        const Eigen::Index m = (static_cast<Eigen::Index>(n) * OH + oy) * OW + ox;
        const Scalar* cp = gcol.data() + m * K;
        for (int c = 0; c < in_c_; ++c) {
          for (int ky = 0; ky < kernel_; ++ky) {
            const int y = oy * stride_ - pad_ + ky;
            if (y < 0 || y >= H) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int xx = ox * stride_ - pad_ + kx;
              if (xx < 0 || xx >= W) continue;
              gp[(static_cast<Eigen::Index>(c) * H + y) * W + xx] +=
                  cp[(c * kernel_ + ky) * kernel_ + kx];
            }
          }
        }
      }
    }
  }
  return gin;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

std::int64_t Conv2d::flops() const {
  if (out_shape_.empty()) return 0;
  const std::int64_t K = static_cast<std::int64_t>(in_c_) * kernel_ * kernel_;
  return 2 * K * out_c_ * out_shape_[2] * out_shape_[3];
}

void Conv2d::init_weights(std::mt19937_64& rng) {
  he_normal(weight_.value, static_cast<Eigen::Index>(in_c_) * kernel_ * kernel_, rng);
  if (has_bias_) bias_.value.setZero();
}

// ------------------------------------------------------ DepthwiseConv3x3

DepthwiseConv3x3::DepthwiseConv3x3(std::string name, int channels, bool bias)
    : channels_(channels), has_bias_(bias) {
  weight_.init(name + ".weight", static_cast<Eigen::Index>(channels) * 9);
  if (bias) bias_.init(name + ".bias", channels);
}

Tensor DepthwiseConv3x3::forward(const Tensor& x, bool) {
  check(x.shape.size() == 4 && x.dim(1) == channels_, "DepthwiseConv3x3: bad input shape");
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  input_ = x;
  out_shape_ = {N, channels_, H, W};
  Tensor out(out_shape_);
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < channels_; ++c) {
      const Scalar* xp =
          x.data.data() + (static_cast<Eigen::Index>(n) * channels_ + c) * H * W;
      Scalar* op =
          out.data.data() + (static_cast<Eigen::Index>(n) * channels_ + c) * H * W;
      const Scalar* wp = weight_.value.data() + static_cast<Eigen::Index>(c) * 9;
      const Scalar b = has_bias_ ? bias_.value[c] : 0.0;
      for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) {
          Scalar acc = b;
          for (int ky = -1; ky <= 1; ++ky) {
            const int yy = y + ky;
            if (yy < 0 || yy >= H) continue;
            for (int kx = -1; kx <= 1; ++kx) {
              const int xc = xx + kx;
              if (xc < 0 || xc >= W) continue;
              acc += wp[(ky + 1) * 3 + (kx + 1)] * xp[yy * W + xc];
            }
          }
          op[y * W + xx] = acc;
        }
      }
    }
  }
  return out;
}

Tensor DepthwiseConv3x3::backward(const Tensor& grad_out) {
  const int N = out_shape_[0], H = out_shape_[2], W = out_shape_[3];
  Tensor gin(input_.shape);
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < channels_; ++c) {
      const Eigen::Index off = (static_cast<Eigen::Index>(n) * channels_ + c) * H * W;
      const Scalar* xp = input_.data.data() + off;
      const Scalar* gp = grad_out.data.data() + off;
      Scalar* gip = gin.data.data() + off;
      const Scalar* wp = weight_.value.data() + static_cast<Eigen::Index>(c) * 9;
      Scalar* gwp = weight_.grad.data() + static_cast<Eigen::Index>(c) * 9;
      Scalar gb = 0.0;
      for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) {
          const Scalar g = gp[y * W + xx];
          gb += g;
          for (int ky = -1; ky <= 1; ++ky) {
            const int yy = y + ky;
            if (yy < 0 || yy >= H) continue;
            for (int kx = -1; kx <= 1; ++kx) {
              const int xc = xx + kx;
              if (xc < 0 || xc >= W) continue;
              gwp[(ky + 1) * 3 + (kx + 1)] += g * xp[yy * W + xc];
              gip[yy * W + xc] += g * wp[(ky + 1) * 3 + (kx + 1)];
            }
          }
        }
      }
      if (has_bias_) bias_.grad[c] += gb;
    }
  }
  return gin;
}

void DepthwiseConv3x3::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

std::int64_t DepthwiseConv3x3::flops() const {
  if (out_shape_.empty()) return 0;
  return 2LL * 9 * channels_ * out_shape_[2] * out_shape_[3];
}

void DepthwiseConv3x3::init_weights(std::mt19937_64& rng) {
  he_normal(weight_.value, 9, rng);
  if (has_bias_) bias_.value.setZero();
}

// -------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::string name, int channels, Scalar momentum, Scalar eps)
    : name_(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps) {
  gamma_.init(name_ + ".gamma", channels);
  gamma_.value.setOnes();
  beta_.init(name_ + ".beta", channels);
  running_mean_ = ArrX::Zero(channels);
  running_var_ = ArrX::Ones(channels);
}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
  check(x.shape.size() >= 2 && x.dim(1) == channels_, "BatchNorm: bad input shape");
  shape_ = x.shape;
  const int N = x.dim(0);
  group_ = x.size() / (static_cast<Eigen::Index>(N) * channels_);
  const Scalar m = static_cast<Scalar>(N) * group_;
  train_mode_ = train;

  Tensor out(x.shape);
  xhat_ = Tensor(x.shape);
  inv_std_ = ArrX::Zero(channels_);
  for (int c = 0; c < channels_; ++c) {
    Scalar mean, var;
    if (train) {
      Scalar sum = 0.0, sumsq = 0.0;
      for (int n = 0; n < N; ++n) {
        const Scalar* p =
            x.data.data() + (static_cast<Eigen::Index>(n) * channels_ + c) * group_;
        for (Eigen::Index i = 0; i < group_; ++i) {
          sum += p[i];
          sumsq += p[i] * p[i];
        }
      }
      mean = sum / m;
      var = std::max<Scalar>(sumsq / m - mean * mean, 0.0);
      running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * var;
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const Scalar inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    const Scalar g = gamma_.value[c], b = beta_.value[c];
    for (int n = 0; n < N; ++n) {
      const Eigen::Index off = (static_cast<Eigen::Index>(n) * channels_ + c) * group_;
      const Scalar* p = x.data.data() + off;
      Scalar* xh = xhat_.data.data() + off;
      Scalar* o = out.data.data() + off;
      for (Eigen::Index i = 0; i < group_; ++i) {
        xh[i] = (p[i] - mean) * inv;
        o[i] = g * xh[i] + b;
      }
    }
  }
  return out;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
  const int N = shape_[0];
  const Scalar m = static_cast<Scalar>(N) * group_;
  Tensor gin(shape_);
  for (int c = 0; c < channels_; ++c) {
    Scalar sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const Eigen::Index off = (static_cast<Eigen::Index>(n) * channels_ + c) * group_;
      const Scalar* dy = grad_out.data.data() + off;
      const Scalar* xh = xhat_.data.data() + off;
      for (Eigen::Index i = 0; i < group_; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xh[i];
      }
    }
    gamma_.grad[c] += sum_dy_xhat;
    beta_.grad[c] += sum_dy;
    const Scalar g = gamma_.value[c], inv = inv_std_[c];
    for (int n = 0; n < N; ++n) {
      const Eigen::Index off = (static_cast<Eigen::Index>(n) * channels_ + c) * group_;
      const Scalar* dy = grad_out.data.data() + off;
      const Scalar* xh = xhat_.data.data() + off;
      Scalar* gi = gin.data.data() + off;
      if (train_mode_) {
        for (Eigen::Index i = 0; i < group_; ++i)
          gi[i] = g * inv / m * (m * dy[i] - sum_dy - xh[i] * sum_dy_xhat);
      } else {
        for (Eigen::Index i = 0; i < group_; ++i) gi[i] = g * inv * dy[i];
      }
    }
  }
  return gin;
}

void BatchNorm::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm::collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) {
  out.emplace_back(name_ + ".running_mean", &running_mean_);
  out.emplace_back(name_ + ".running_var", &running_var_);
}

void BatchNorm::init_weights(std::mt19937_64&) {
  gamma_.value.setOnes();
  beta_.value.setZero();
  running_mean_.setZero();
  running_var_.setOnes();
}

// ---------------------------------------------------------- ReLU, Sigmoid

Tensor ReLU::forward(const Tensor& x, bool) {
  out_ = Tensor(x.shape);
  out_.data = x.data.max(0.0);
  return out_;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor gin(out_.shape);
  gin.data = (out_.data > 0.0).select(grad_out.data, 0.0);
  return gin;
}

Tensor Sigmoid::forward(const Tensor& x, bool) {
  out_ = Tensor(x.shape);
  out_.data = 1.0 / (1.0 + (-x.data).exp());
  return out_;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
  Tensor gin(out_.shape);
  gin.data = grad_out.data * out_.data * (1.0 - out_.data);
  return gin;
}

// ---------------------------------------------------------------- Dropout

Tensor Dropout::forward(const Tensor& x, bool train) {
  active_ = train && rate_ > 0.0;
  if (!active_) return x;
  check(rng_ != nullptr, "Dropout: rng not set");
  mask_ = ArrX::Zero(x.size());
  std::uniform_real_distribution<Scalar> u(0.0, 1.0);
  const Scalar keep = 1.0 - rate_;
  for (Eigen::Index i = 0; i < mask_.size(); ++i)
    mask_[i] = u(*rng_) < keep ? 1.0 / keep : 0.0;
  Tensor out(x.shape);
  out.data = x.data * mask_;
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (!active_) return grad_out;
  Tensor gin(grad_out.shape);
  gin.data = grad_out.data * mask_;
  return gin;
}

// -------------------------------------------------------- GlobalAvgPool2d

Tensor GlobalAvgPool2d::forward(const Tensor& x, bool) {
  check(x.shape.size() == 4, "GlobalAvgPool2d: expects NCHW");
  in_shape_ = x.shape;
  const int N = x.dim(0), C = x.dim(1);
  const Eigen::Index plane = static_cast<Eigen::Index>(x.dim(2)) * x.dim(3);
  Tensor out({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      out.data[static_cast<Eigen::Index>(n) * C + c] =
          x.data.segment((static_cast<Eigen::Index>(n) * C + c) * plane, plane).mean();
  return out;
}

Tensor GlobalAvgPool2d::backward(const Tensor& grad_out) {
  const int N = in_shape_[0], C = in_shape_[1];
  const Eigen::Index plane = static_cast<Eigen::Index>(in_shape_[2]) * in_shape_[3];
  Tensor gin(in_shape_);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      gin.data.segment((static_cast<Eigen::Index>(n) * C + c) * plane, plane) =
          grad_out.data[static_cast<Eigen::Index>(n) * C + c] / static_cast<Scalar>(plane);
  return gin;
}

// ---------------------------------------------------------GlobalAvgPool1d

Tensor GlobalAvgPool1d::forward(const Tensor& x, bool) {
  check(x.shape.size() == 3, "GlobalAvgPool1d: expects NCL");
  in_shape_ = x.shape;
  const int N = x.dim(0), C = x.dim(1), L = x.dim(2);
  Tensor out({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      out.data[static_cast<Eigen::Index>(n) * C + c] =
          x.data.segment((static_cast<Eigen::Index>(n) * C + c) * L, L).mean();
  return out;
}

Tensor GlobalAvgPool1d::backward(const Tensor& grad_out) {
  const int N = in_shape_[0], C = in_shape_[1], L = in_shape_[2];
  Tensor gin(in_shape_);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      gin.data.segment((static_cast<Eigen::Index>(n) * C + c) * L, L) =
          grad_out.data[static_cast<Eigen::Index>(n) * C + c] / static_cast<Scalar>(L);
  return gin;
}

// ----------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in_f, int out_f) : in_f_(in_f), out_f_(out_f) {
  weight_.init(name + ".weight", static_cast<Eigen::Index>(out_f) * in_f);
  bias_.init(name + ".bias", out_f);
}

Tensor Linear::forward(const Tensor& x, bool) {
  check(x.shape.size() == 2 && x.dim(1) == in_f_, "Linear: bad input shape");
  input_ = x;
  last_n_ = x.dim(0);
  Eigen::Map<const Mat> xm(x.data.data(), in_f_, last_n_);  // column per sample
  Eigen::Map<const Mat> wm(weight_.value.data(), in_f_, out_f_);
  Tensor out({last_n_, out_f_});
  Eigen::Map<Mat> om(out.data.data(), out_f_, last_n_);
  om.noalias() = wm.transpose() * xm;
  om.colwise() += Eigen::Map<const VecX>(bias_.value.data(), out_f_);
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  Eigen::Map<const Mat> gm(grad_out.data.data(), out_f_, last_n_);
  Eigen::Map<const Mat> xm(input_.data.data(), in_f_, last_n_);
  Eigen::Map<Mat> gw(weight_.grad.data(), in_f_, out_f_);
  gw.noalias() += xm * gm.transpose();
  Eigen::Map<VecX>(bias_.grad.data(), out_f_) += gm.rowwise().sum();
  Tensor gin({last_n_, in_f_});
  Eigen::Map<Mat> gim(gin.data.data(), in_f_, last_n_);
  Eigen::Map<const Mat> wm(weight_.value.data(), in_f_, out_f_);
  gim.noalias() = wm * gm;
  return gin;
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::int64_t Linear::flops() const { return 2LL * in_f_ * out_f_; }

void Linear::init_weights(std::mt19937_64& rng) {
  he_normal(weight_.value, in_f_, rng);
  bias_.value.setZero();
}

// ----------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::string name, int in_c, int out_c, int kernel, int stride, int pad,
               bool bias)
    : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), pad_(pad),
      has_bias_(bias) {
  weight_.init(name + ".weight", static_cast<Eigen::Index>(out_c) * in_c * kernel);
  if (bias) bias_.init(name + ".bias", out_c);
}

Tensor Conv1d::forward(const Tensor& x, bool) {
  check(x.shape.size() == 3 && x.dim(1) == in_c_, "Conv1d: bad input shape");
  const int N = x.dim(0), L = x.dim(2);
  const int OL = conv_out(L, kernel_, stride_, pad_);
  const int K = in_c_ * kernel_;
  in_shape_ = x.shape;
  out_shape_ = {N, out_c_, OL};

  col_.resize(K, static_cast<Eigen::Index>(N) * OL);
  for (int n = 0; n < N; ++n) {
    const Scalar* xp = x.data.data() + static_cast<Eigen::Index>(n) * in_c_ * L;
    for (int ol = 0; ol < OL; ++ol) {
      Scalar* cp = col_.data() + (static_cast<Eigen::Index>(n) * OL + ol) * K;
      for (int c = 0; c < in_c_; ++c) {
        for (int k = 0; k < kernel_; ++k) {
          const int t = ol * stride_ - pad_ + k;
          cp[c * kernel_ + k] = (t >= 0 && t < L) ? xp[static_cast<Eigen::Index>(c) * L + t] : 0.0;
        }
      }
    }
  }
  Eigen::Map<const Mat> wmat(weight_.value.data(), K, out_c_);
  Mat out_mat = wmat.transpose() * col_;
  if (has_bias_) out_mat.colwise() += Eigen::Map<const VecX>(bias_.value.data(), out_c_);
  Tensor out(out_shape_);
  for (int n = 0; n < N; ++n) {
    Eigen::Map<Mat> dst(out.data.data() + static_cast<Eigen::Index>(n) * out_c_ * OL, OL,
                        out_c_);
    dst = out_mat.middleCols(static_cast<Eigen::Index>(n) * OL, OL).transpose();
  }
  return out;
}

Tensor Conv1d::backward(const Tensor& grad_out) {
  const int N = out_shape_[0], OL = out_shape_[2];
  const int L = in_shape_[2];
  const int K = in_c_ * kernel_;
  Mat gmat(out_c_, static_cast<Eigen::Index>(N) * OL);
  for (int n = 0; n < N; ++n) {
    Eigen::Map<const Mat> src(grad_out.data.data() + static_cast<Eigen::Index>(n) * out_c_ * OL,
                              OL, out_c_);
    gmat.middleCols(static_cast<Eigen::Index>(n) * OL, OL) = src.transpose();
  }
  Eigen::Map<Mat> gw(weight_.grad.data(), K, out_c_);
  gw.noalias() += col_ * gmat.transpose();
  if (has_bias_) Eigen::Map<VecX>(bias_.grad.data(), out_c_) += gmat.rowwise().sum();

  Eigen::Map<const Mat> wmat(weight_.value.data(), K, out_c_);
  Mat gcol = wmat * gmat;
  Tensor gin(in_shape_);
  for (int n = 0; n < N; ++n) {
    Scalar* gp = gin.data.data() + static_cast<Eigen::Index>(n) * in_c_ * L;
    for (int ol = 0; ol < OL; ++ol) {
      const Scalar* cp = gcol.data() + (static_cast<Eigen::Index>(n) * OL + ol) * K;
      for (int c = 0; c < in_c_; ++c) {
        for (int k = 0; k < kernel_; ++k) {
          const int t = ol * stride_ - pad_ + k;
          if (t >= 0 && t < L) gp[static_cast<Eigen::Index>(c) * L + t] += cp[c * kernel_ + k];
        }
      }
    }
  }
  return gin;
}

void Conv1d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

std::int64_t Conv1d::flops() const {
  if (out_shape_.empty()) return 0;
  return 2LL * in_c_ * kernel_ * out_c_ * out_shape_[2];
}

void Conv1d::init_weights(std::mt19937_64& rng) {
  he_normal(weight_.value, static_cast<Eigen::Index>(in_c_) * kernel_, rng);
  if (has_bias_) bias_.value.setZero();
}

// ----------------------------------------------------------------- BiLstm

BiLstm::BiLstm(std::string name, int input_size, int hidden)
    : input_size_(input_size), hidden_(hidden) {
  for (int d = 0; d < 2; ++d) {
    const std::string suffix = d == 0 ? ".fwd" : ".bwd";
    w_ih_[d].init(name + suffix + ".w_ih", static_cast<Eigen::Index>(4) * hidden * input_size);
    w_hh_[d].init(name + suffix + ".w_hh", static_cast<Eigen::Index>(4) * hidden * hidden);
    bias_[d].init(name + suffix + ".bias", static_cast<Eigen::Index>(4) * hidden);
  }
}

Tensor BiLstm::forward(const Tensor& x, bool) {
  check(x.shape.size() == 3 && x.dim(1) == input_size_, "BiLstm: bad input shape");
  input_ = x;
  batch_ = x.dim(0);
  steps_ = x.dim(2);
  const int H = hidden_, N = batch_, C = input_size_, L = steps_;

  Tensor out({N, 2 * H});
  for (int d = 0; d < 2; ++d) {
    Eigen::Map<const Mat> Wih(w_ih_[d].value.data(), C, 4 * H);
    Eigen::Map<const Mat> Whh(w_hh_[d].value.data(), H, 4 * H);
    Eigen::Map<const VecX> b(bias_[d].value.data(), 4 * H);
    auto& cache = cache_[d];
    cache.gates.assign(L, Mat());
    cache.c.assign(L, Mat());
    cache.h.assign(L, Mat());
    Mat h_prev = Mat::Zero(H, N), c_prev = Mat::Zero(H, N);
    for (int step = 0; step < L; ++step) {
      const int t = d == 0 ? step : L - 1 - step;
      Mat xt(C, N);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          xt(c, n) = x.data[(static_cast<Eigen::Index>(n) * C + c) * L + t];
      Mat pre = Wih.transpose() * xt + Whh.transpose() * h_prev;
      pre.colwise() += b;
      Mat gates(4 * H, N);
      gates.topRows(H) = (1.0 + (-pre.topRows(H).array()).exp()).inverse();        // i
      gates.middleRows(H, H) = (1.0 + (-pre.middleRows(H, H).array()).exp()).inverse();  // f
      gates.middleRows(2 * H, H) = pre.middleRows(2 * H, H).array().tanh();        // g
      gates.bottomRows(H) = (1.0 + (-pre.bottomRows(H).array()).exp()).inverse();  // o
      Mat c_t = gates.middleRows(H, H).cwiseProduct(c_prev) +
                gates.topRows(H).cwiseProduct(gates.middleRows(2 * H, H));
      Mat h_t = gates.bottomRows(H).cwiseProduct(c_t.array().tanh().matrix());
      cache.gates[step] = gates;
      cache.c[step] = c_t;
      cache.h[step] = h_t;
      h_prev = h_t;
      c_prev = c_t;
    }
    for (int n = 0; n < N; ++n)
      for (int hh = 0; hh < H; ++hh)
        out.data[static_cast<Eigen::Index>(n) * 2 * H + d * H + hh] = h_prev(hh, n);
  }
  return out;
}

Tensor BiLstm::backward(const Tensor& grad_out) {
  const int H = hidden_, N = batch_, C = input_size_, L = steps_;
  Tensor gin(input_.shape);
  for (int d = 0; d < 2; ++d) {
    Eigen::Map<const Mat> Wih(w_ih_[d].value.data(), C, 4 * H);
    Eigen::Map<const Mat> Whh(w_hh_[d].value.data(), H, 4 * H);
    Eigen::Map<Mat> gWih(w_ih_[d].grad.data(), C, 4 * H);
    Eigen::Map<Mat> gWhh(w_hh_[d].grad.data(), H, 4 * H);
    Eigen::Map<VecX> gb(bias_[d].grad.data(), 4 * H);
    const auto& cache = cache_[d];

    Mat dh(H, N), dc = Mat::Zero(H, N);
    for (int n = 0; n < N; ++n)
      for (int hh = 0; hh < H; ++hh)
        dh(hh, n) = grad_out.data[static_cast<Eigen::Index>(n) * 2 * H + d * H + hh];

    for (int step = L - 1; step >= 0; --step) {
      const int t = d == 0 ? step : L - 1 - step;
      const Mat& gates = cache.gates[step];
      const Mat& c_t = cache.c[step];
      const Mat c_prev = step > 0 ? cache.c[step - 1] : Mat::Zero(H, N);
      const Mat h_prev = step > 0 ? cache.h[step - 1] : Mat::Zero(H, N);

      const auto i = gates.topRows(H).array();
      const auto f = gates.middleRows(H, H).array();
      const auto g = gates.middleRows(2 * H, H).array();
      const auto o = gates.bottomRows(H).array();
      const Mat tc = c_t.array().tanh().matrix();

      Mat d_o = dh.cwiseProduct(tc);
      dc.array() += dh.array() * o * (1.0 - tc.array().square());
      Mat di = dc.cwiseProduct(Mat(g.matrix()));
      Mat df = dc.cwiseProduct(c_prev);
      Mat dg = dc.cwiseProduct(Mat(i.matrix()));

      Mat dpre(4 * H, N);
      dpre.topRows(H).array() = di.array() * i * (1.0 - i);
      dpre.middleRows(H, H).array() = df.array() * f * (1.0 - f);
      dpre.middleRows(2 * H, H).array() = dg.array() * (1.0 - g.square());
      dpre.bottomRows(H).array() = d_o.array() * o * (1.0 - o);

      Mat xt(C, N);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          xt(c, n) = input_.data[(static_cast<Eigen::Index>(n) * C + c) * L + t];

      gWih.noalias() += xt * dpre.transpose();
      gWhh.noalias() += h_prev * dpre.transpose();
      gb += dpre.rowwise().sum();

      Mat dxt = Wih * dpre;
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          gin.data[(static_cast<Eigen::Index>(n) * C + c) * L + t] += dxt(c, n);

      dh.noalias() = Whh * dpre;
      dc = dc.cwiseProduct(Mat(f.matrix()));
    }
  }
  return gin;
}

void BiLstm::collect_params(std::vector<Param*>& out) {
  for (int d = 0; d < 2; ++d) {
    out.push_back(&w_ih_[d]);
    out.push_back(&w_hh_[d]);
    out.push_back(&bias_[d]);
  }
}

std::int64_t BiLstm::flops() const {
  if (steps_ == 0) return 0;
  return 2LL * 2 * steps_ * 4 * hidden_ * (input_size_ + hidden_);
}

void BiLstm::init_weights(std::mt19937_64& rng) {
  const Scalar k = 1.0 / std::sqrt(static_cast<Scalar>(hidden_));
  std::uniform_real_distribution<Scalar> u(-k, k);
  for (int d = 0; d < 2; ++d) {
    for (Eigen::Index i = 0; i < w_ih_[d].value.size(); ++i) w_ih_[d].value[i] = u(rng);
    for (Eigen::Index i = 0; i < w_hh_[d].value.size(); ++i) w_hh_[d].value[i] = u(rng);
    bias_[d].value.setZero();
    // Forget-gate bias 1 helps gradient flow early in training.
    bias_[d].value.segment(hidden_, hidden_).setOnes();
  }
}

// ------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, train);
  return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor cur = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect_params(std::vector<Param*>& out) {
  for (auto& l : layers_) l->collect_params(out);
}

void Sequential::collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) {
  for (auto& l : layers_) l->collect_buffers(out);
}

std::int64_t Sequential::flops() const {
  std::int64_t total = 0;
  for (const auto& l : layers_) total += l->flops();
  return total;
}

void Sequential::init_weights(std::mt19937_64& rng) {
  for (auto& l : layers_) l->init_weights(rng);
}

// ------------------------------------------------------------- Bottleneck

Bottleneck::Bottleneck(std::string name, int in_c, int out_c, int mid_c, int stride) {
  main_.add(std::make_unique<Conv2d>(name + ".reduce", in_c, mid_c, 1, 1, 0, false));
  main_.add(std::make_unique<BatchNorm>(name + ".bn1", mid_c));
  main_.add(std::make_unique<ReLU>());
  main_.add(std::make_unique<Conv2d>(name + ".conv3", mid_c, mid_c, 3, stride, 1, false));
  main_.add(std::make_unique<BatchNorm>(name + ".bn2", mid_c));
  main_.add(std::make_unique<ReLU>());
  main_.add(std::make_unique<Conv2d>(name + ".expand", mid_c, out_c, 1, 1, 0, false));
  main_.add(std::make_unique<BatchNorm>(name + ".bn3", out_c));
  if (stride != 1 || in_c != out_c) {
    proj_ = std::make_unique<Sequential>();
    proj_->add(std::make_unique<Conv2d>(name + ".proj", in_c, out_c, 1, stride, 0, false));
    proj_->add(std::make_unique<BatchNorm>(name + ".bn_proj", out_c));
  }
}

Tensor Bottleneck::forward(const Tensor& x, bool train) {
  Tensor y = main_.forward(x, train);
  Tensor skip = proj_ ? proj_->forward(x, train) : x;
  sum_ = Tensor(y.shape);
  sum_.data = y.data + skip.data;
  Tensor out(y.shape);
  out.data = sum_.data.max(0.0);
  return out;
}

Tensor Bottleneck::backward(const Tensor& grad_out) {
  Tensor dsum(grad_out.shape);
  dsum.data = (sum_.data > 0.0).select(grad_out.data, 0.0);
  Tensor dmain = main_.backward(dsum);
  if (proj_) {
    Tensor dskip = proj_->backward(dsum);
    dmain.data += dskip.data;
  } else {
    dmain.data += dsum.data;
  }
  return dmain;
}

void Bottleneck::collect_params(std::vector<Param*>& out) {
  main_.collect_params(out);
  if (proj_) proj_->collect_params(out);
}

void Bottleneck::collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) {
  main_.collect_buffers(out);
  if (proj_) proj_->collect_buffers(out);
}

std::int64_t Bottleneck::flops() const {
  return main_.flops() + (proj_ ? proj_->flops() : 0);
}

void Bottleneck::init_weights(std::mt19937_64& rng) {
  main_.init_weights(rng);
  if (proj_) proj_->init_weights(rng);
}

// ----------------------------------------------------------------- misc

std::int64_t count_params(Layer& layer) {
  std::vector<Param*> params;
  layer.collect_params(params);
  std::int64_t total = 0;
  for (const Param* p : params) total += p->value.size();
  return total;
}

SgdOptimizer::SgdOptimizer(std::vector<Param*> params, Scalar momentum, Scalar weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.reserve(params_.size());
  for (const Param* p : params_) velocity_.push_back(ArrX::Zero(p->value.size()));
}

void SgdOptimizer::step(Scalar lr) {
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    ArrX g = p.grad + weight_decay_ * p.value;
    velocity_[i] = momentum_ * velocity_[i] + g;
    p.value -= lr * velocity_[i];
  }
}

void SgdOptimizer::zero_grad() {
  for (Param* p : params_) p->grad.setZero();
}

}  // namespace trifusion::nn
