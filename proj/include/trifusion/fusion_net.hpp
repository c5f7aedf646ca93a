#pragma once

#include <memory>
#include <string>
#include <vector>

#include "trifusion/nn.hpp"

namespace trifusion {

/// Backbone layout: stem conv, ghost stages, 1x1 expansion, pooled embedding.
struct OafemConfig {
  int input_size = 224;
  int input_channels = 4;
  int stem_channels = 16;
  struct Stage {
    int out_channels = 0;
    int n_cheap = 0;  // extra main blocks and cheap depthwise ops per stage
  };
  std::vector<Stage> stages{{24, 1}, {48, 3}, {96, 3}, {192, 5}};
  int conv5_channels = 512;
  int embed_width = 1536;
  int oaf_width = 256;
};

struct PfemConfig {
  int sensors = 9;
  int window = 64;
  std::vector<int> conv_channels{32, 64, 64, 64};
  std::vector<int> conv_strides{2, 2, 1, 1};
  int kernel = 3;
  int hidden = 64;         // per direction; feature width = 2*hidden
  bool use_bilstm = true;  // false: extra 1D convolutions + pooling instead
  int feature_width() const { return 2 * hidden; }
};

struct HeadConfig {
  std::vector<int> widths{256, 128};
  Scalar dropout = 0.2;
};

struct ModelConfig {
  bool use_oafem = true;
  bool use_pfem = true;
  bool late_fusion = false;  // decision-level fusion of two per-branch heads
  bool learned_pressure_subst = false;
  OafemConfig oafem;
  PfemConfig pfem;
  HeadConfig head;
};

/// Table II layout at 224x224x4 input.
ModelConfig full_model_config();
/// Desk-scale layout at 32x32x4 input.
ModelConfig toy_model_config();

/// One stage of the backbone: a downsampling bottleneck, n further
/// bottlenecks on the main path, n cheap depthwise ops off the first
/// block's output, channel concatenation of the two paths.
class GhostStage : public nn::Layer {
 public:
  GhostStage(std::string name, int in_c, int out_c, int n_cheap);
  nn::Tensor forward(const nn::Tensor& x, bool train) override;
  nn::Tensor backward(const nn::Tensor& grad_out) override;
  void collect_params(std::vector<nn::Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

 private:
  int half_;
  nn::Bottleneck first_;
  nn::Sequential rest_;
  nn::Sequential cheap_;
  std::vector<int> first_out_shape_;
};

class Oafem : public nn::Layer {
 public:
  explicit Oafem(const OafemConfig& cfg);
  nn::Tensor forward(const nn::Tensor& x, bool train) override;
  nn::Tensor backward(const nn::Tensor& grad_out) override;
  void collect_params(std::vector<nn::Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

  /// Output shapes ([N,C,H,W]) recorded by the last forward: stem, each
  /// stage, the 1x1 expansion, and the pooled embedding.
  const std::vector<std::vector<int>>& recorded_shapes() const { return shapes_; }

 private:
  OafemConfig cfg_;
  nn::Sequential stem_;
  std::vector<std::unique_ptr<GhostStage>> stages_;
  nn::Sequential conv5_;
  nn::GlobalAvgPool2d pool_;
  nn::Sequential embed_;
  std::vector<std::vector<int>> shapes_;
};

class Pfem : public nn::Layer {
 public:
  explicit Pfem(const PfemConfig& cfg);
  nn::Tensor forward(const nn::Tensor& x, bool train) override;
  nn::Tensor backward(const nn::Tensor& grad_out) override;
  void collect_params(std::vector<nn::Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) override;
  std::int64_t flops() const override;
  void init_weights(std::mt19937_64& rng) override;

 private:
  PfemConfig cfg_;
  nn::Sequential body_;
};

/// One minibatch of network inputs.
struct Batch {
  nn::Tensor rgba;               // [N,4,S,S] (empty when optical unused)
  nn::Tensor pressure;           // [N,Q,T] (zero-filled rows for absent)
  std::vector<char> pressure_present;  // per sample
  int size = 0;
};

/// The tri-modal network (or an ablation/baseline variant of it).
class FusionNet {
 public:
  FusionNet(const ModelConfig& cfg, std::uint64_t init_seed);
  // Dropout layers keep a pointer to the member RNG.
  FusionNet(const FusionNet&) = delete;
  FusionNet& operator=(const FusionNet&) = delete;

  /// Outputs [N,3], each in [0,1].
  nn::Tensor forward(const Batch& batch, bool train);
  void backward(const nn::Tensor& grad_out);

  std::vector<nn::Param*> params();
  std::vector<std::pair<std::string, ArrX*>> buffers();
  std::int64_t param_count();
  /// Per-sample FLOPs at the configured input shapes; convention: 2x the
  /// multiply-accumulates of convolution/linear/recurrent products.
  std::int64_t flop_count();

  const ModelConfig& config() const { return cfg_; }
  Oafem* oafem() { return oafem_.get(); }

  void save_checkpoint(const std::string& path) const;
  static std::unique_ptr<FusionNet> load_checkpoint(const std::string& path);

 private:
  Batch dummy_batch() const;

  ModelConfig cfg_;
  std::unique_ptr<Oafem> oafem_;
  std::unique_ptr<Pfem> pfem_;
  nn::Param pressure_subst_;  // used for absent-pressure rows when learned
  nn::Sequential head_;       // fused head (unused when late_fusion)
  nn::Sequential head_a_, head_b_;  // per-branch heads for late fusion
  nn::Param mix_logit_;             // late-fusion combination, sigmoid-bounded
  std::mt19937_64 dropout_rng_;

  // forward caches
  int batch_size_ = 0;
  std::vector<char> present_;
  nn::Tensor oaf_, pf_;
  nn::Tensor out_a_, out_b_;  // late fusion branch outputs
};

}  // namespace trifusion
