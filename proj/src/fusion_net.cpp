#include "trifusion/fusion_net.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace trifusion {

using nn::Tensor;
using nlohmann::json;

ModelConfig full_model_config() {
  ModelConfig cfg;  // defaults above are the full Table-II-scale layout
  return cfg;
}

ModelConfig toy_model_config() {
  ModelConfig cfg;
  cfg.oafem.input_size = 32;
  cfg.oafem.stem_channels = 8;
  cfg.oafem.stages = {{12, 1}, {24, 2}, {48, 2}};
  cfg.oafem.conv5_channels = 96;
  cfg.oafem.embed_width = 128;
  cfg.oafem.oaf_width = 64;
  cfg.pfem.conv_channels = {16, 32, 32, 32};
  cfg.pfem.hidden = 16;
  cfg.head.widths = {64, 32};
  return cfg;
}

// --------------------------------------------------------------- GhostStage

GhostStage::GhostStage(std::string name, int in_c, int out_c, int n_cheap)
    : half_(out_c / 2),
      first_(name + ".block0", in_c, out_c / 2, std::max(1, out_c / 4), 2) {
  if (out_c % 2 != 0) throw nn::ShapeError("GhostStage output channels must be even");
  for (int i = 0; i < n_cheap; ++i) {
    rest_.add(std::make_unique<nn::Bottleneck>(name + ".block" + std::to_string(i + 1),
                                               half_, half_, std::max(1, half_ / 2), 1));
    cheap_.add(std::make_unique<nn::DepthwiseConv3x3>(
        name + ".cheap" + std::to_string(i), half_, false));
    cheap_.add(std::make_unique<nn::BatchNorm>(name + ".cheap_bn" + std::to_string(i), half_));
    cheap_.add(std::make_unique<nn::ReLU>());
  }
}

Tensor GhostStage::forward(const Tensor& x, bool train) {
  Tensor f = first_.forward(x, train);
  first_out_shape_ = f.shape;
  Tensor m = rest_.forward(f, train);
  Tensor ch = cheap_.forward(f, train);
  const int N = f.dim(0), H = f.dim(2), W = f.dim(3);
  const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
  Tensor out({N, 2 * half_, H, W});
  for (int n = 0; n < N; ++n) {
    out.data.segment(static_cast<Eigen::Index>(n) * 2 * half_ * plane, half_ * plane) =
        m.data.segment(static_cast<Eigen::Index>(n) * half_ * plane, half_ * plane);
    out.data.segment(static_cast<Eigen::Index>(n) * 2 * half_ * plane + half_ * plane,
                     half_ * plane) =
        ch.data.segment(static_cast<Eigen::Index>(n) * half_ * plane, half_ * plane);
  }
  return out;
}

Tensor GhostStage::backward(const Tensor& grad_out) {
  const int N = first_out_shape_[0], H = first_out_shape_[2], W = first_out_shape_[3];
  const Eigen::Index plane = static_cast<Eigen::Index>(H) * W;
  Tensor dm({N, half_, H, W}), dch({N, half_, H, W});
  for (int n = 0; n < N; ++n) {
    dm.data.segment(static_cast<Eigen::Index>(n) * half_ * plane, half_ * plane) =
        grad_out.data.segment(static_cast<Eigen::Index>(n) * 2 * half_ * plane,
                              half_ * plane);
    dch.data.segment(static_cast<Eigen::Index>(n) * half_ * plane, half_ * plane) =
        grad_out.data.segment(
            static_cast<Eigen::Index>(n) * 2 * half_ * plane + half_ * plane, half_ * plane);
  }
  Tensor df = rest_.backward(dm);
  Tensor dcheap = cheap_.backward(dch);
  df.data += dcheap.data;
  return first_.backward(df);
}

void GhostStage::collect_params(std::vector<nn::Param*>& out) {
  first_.collect_params(out);
  rest_.collect_params(out);
  cheap_.collect_params(out);
}

void GhostStage::collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) {
  first_.collect_buffers(out);
  rest_.collect_buffers(out);
  cheap_.collect_buffers(out);
}

std::int64_t GhostStage::flops() const {
  return first_.flops() + rest_.flops() + cheap_.flops();
}

void GhostStage::init_weights(std::mt19937_64& rng) {
  first_.init_weights(rng);
  rest_.init_weights(rng);
  cheap_.init_weights(rng);
}

// -------------------------------------------------------------------- Oafem

Oafem::Oafem(const OafemConfig& cfg) : cfg_(cfg) {
  stem_.add(std::make_unique<nn::Conv2d>("oafem.stem", cfg.input_channels,
                                         cfg.stem_channels, 3, 2, 1, false));
  stem_.add(std::make_unique<nn::BatchNorm>("oafem.stem_bn", cfg.stem_channels));
  stem_.add(std::make_unique<nn::ReLU>());
  int in_c = cfg.stem_channels;
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    stages_.push_back(std::make_unique<GhostStage>("oafem.stage" + std::to_string(i + 1),
                                                   in_c, cfg.stages[i].out_channels,
                                                   cfg.stages[i].n_cheap));
    in_c = cfg.stages[i].out_channels;
  }
  conv5_.add(std::make_unique<nn::Conv2d>("oafem.conv5", in_c, cfg.conv5_channels, 1, 1, 0,
                                          false));
  conv5_.add(std::make_unique<nn::BatchNorm>("oafem.conv5_bn", cfg.conv5_channels));
  conv5_.add(std::make_unique<nn::ReLU>());
  embed_.add(std::make_unique<nn::Linear>("oafem.embed1", cfg.conv5_channels,
                                          cfg.embed_width));
  embed_.add(std::make_unique<nn::ReLU>());
  embed_.add(std::make_unique<nn::Linear>("oafem.embed2", cfg.embed_width, cfg.oaf_width));
  embed_.add(std::make_unique<nn::ReLU>());
}

Tensor Oafem::forward(const Tensor& x, bool train) {
  shapes_.clear();
  Tensor cur = stem_.forward(x, train);
  shapes_.push_back(cur.shape);
  for (auto& st : stages_) {
    cur = st->forward(cur, train);
    shapes_.push_back(cur.shape);
  }
  cur = conv5_.forward(cur, train);
  shapes_.push_back(cur.shape);
  cur = pool_.forward(cur, train);
  cur = embed_.forward(cur, train);
  shapes_.push_back(cur.shape);
  return cur;
}

Tensor Oafem::backward(const Tensor& grad_out) {
  Tensor cur = embed_.backward(grad_out);
  cur = pool_.backward(cur);
  cur = conv5_.backward(cur);
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) cur = (*it)->backward(cur);
  return stem_.backward(cur);
}

void Oafem::collect_params(std::vector<nn::Param*>& out) {
  stem_.collect_params(out);
  for (auto& st : stages_) st->collect_params(out);
  conv5_.collect_params(out);
  embed_.collect_params(out);
}

void Oafem::collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) {
  stem_.collect_buffers(out);
  for (auto& st : stages_) st->collect_buffers(out);
  conv5_.collect_buffers(out);
  embed_.collect_buffers(out);
}

std::int64_t Oafem::flops() const {
  std::int64_t total = stem_.flops() + conv5_.flops() + embed_.flops();
  for (const auto& st : stages_) total += st->flops();
  return total;
}

void Oafem::init_weights(std::mt19937_64& rng) {
  stem_.init_weights(rng);
  for (auto& st : stages_) st->init_weights(rng);
  conv5_.init_weights(rng);
  embed_.init_weights(rng);
}

// --------------------------------------------------------------------- Pfem

Pfem::Pfem(const PfemConfig& cfg) : cfg_(cfg) {
  int in_c = cfg.sensors;
  for (size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    body_.add(std::make_unique<nn::Conv1d>("pfem.conv" + std::to_string(i + 1), in_c,
                                           cfg.conv_channels[i], cfg.kernel,
                                           cfg.conv_strides[i], cfg.kernel / 2, false));
    body_.add(std::make_unique<nn::BatchNorm>("pfem.bn" + std::to_string(i + 1),
                                              cfg.conv_channels[i]));
    body_.add(std::make_unique<nn::ReLU>());
    in_c = cfg.conv_channels[i];
  }
  if (cfg.use_bilstm) {
    body_.add(std::make_unique<nn::BiLstm>("pfem.bilstm", in_c, cfg.hidden));
  } else {
    // Recurrence replaced by further temporal convolutions of matched width.
    body_.add(std::make_unique<nn::Conv1d>("pfem.conv5", in_c, in_c, cfg.kernel, 1,
                                           cfg.kernel / 2, false));
    body_.add(std::make_unique<nn::BatchNorm>("pfem.bn5", in_c));
    body_.add(std::make_unique<nn::ReLU>());
    body_.add(std::make_unique<nn::Conv1d>("pfem.conv6", in_c, cfg.feature_width(),
                                           cfg.kernel, 1, cfg.kernel / 2, false));
    body_.add(std::make_unique<nn::BatchNorm>("pfem.bn6", cfg.feature_width()));
    body_.add(std::make_unique<nn::ReLU>());
    body_.add(std::make_unique<nn::GlobalAvgPool1d>());
  }
}

Tensor Pfem::forward(const Tensor& x, bool train) { return body_.forward(x, train); }
Tensor Pfem::backward(const Tensor& grad_out) { return body_.backward(grad_out); }
void Pfem::collect_params(std::vector<nn::Param*>& out) { body_.collect_params(out); }
void Pfem::collect_buffers(std::vector<std::pair<std::string, ArrX*>>& out) {
  body_.collect_buffers(out);
}
std::int64_t Pfem::flops() const { return body_.flops(); }
void Pfem::init_weights(std::mt19937_64& rng) { body_.init_weights(rng); }

// ---------------------------------------------------------------- FusionNet

namespace {

void build_head(nn::Sequential& head, const std::string& name, int in_width,
                const HeadConfig& cfg, std::vector<nn::Dropout*>& dropouts) {
  int cur = in_width;
  int idx = 0;
  for (int w : cfg.widths) {
    head.add(std::make_unique<nn::Linear>(name + ".fc" + std::to_string(idx++), cur, w));
    head.add(std::make_unique<nn::ReLU>());
    cur = w;
  }
  if (cfg.dropout > 0.0) {
    auto d = std::make_unique<nn::Dropout>(cfg.dropout);
    dropouts.push_back(d.get());
    head.add(std::move(d));
  }
  head.add(std::make_unique<nn::Linear>(name + ".out", cur, 3));
  head.add(std::make_unique<nn::Sigmoid>());
}

}  // namespace

FusionNet::FusionNet(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg), dropout_rng_(init_seed ^ 0x9e3779b97f4a7c15ull) {
  if (!cfg.use_oafem && !cfg.use_pfem)
    throw nn::ShapeError("model must use at least one branch");
  std::vector<nn::Dropout*> dropouts;
  if (cfg.use_oafem) oafem_ = std::make_unique<Oafem>(cfg.oafem);
  if (cfg.use_pfem) {
    pfem_ = std::make_unique<Pfem>(cfg.pfem);
    pressure_subst_.init("pressure_subst", cfg.pfem.feature_width());
  }
  if (cfg.late_fusion) {
    if (!cfg.use_oafem || !cfg.use_pfem)
      throw nn::ShapeError("late fusion requires both branches");
    build_head(head_a_, "head_a", cfg.oafem.oaf_width, cfg.head, dropouts);
    build_head(head_b_, "head_b", cfg.pfem.feature_width(), cfg.head, dropouts);
    mix_logit_.init("mix_logit", 3);
  } else {
    int in_w = (cfg.use_oafem ? cfg.oafem.oaf_width : 0) +
               (cfg.use_pfem ? cfg.pfem.feature_width() : 0);
    build_head(head_, "head", in_w, cfg.head, dropouts);
  }
  for (nn::Dropout* d : dropouts) d->set_rng(&dropout_rng_);

  std::mt19937_64 rng(init_seed);
  if (oafem_) oafem_->init_weights(rng);
  if (pfem_) pfem_->init_weights(rng);
  head_.init_weights(rng);
  head_a_.init_weights(rng);
  head_b_.init_weights(rng);
}

Tensor FusionNet::forward(const Batch& batch, bool train) {
  batch_size_ = batch.size;
  present_ = batch.pressure_present;
  const int N = batch.size;

  if (cfg_.use_oafem) oaf_ = oafem_->forward(batch.rgba, train);
  if (cfg_.use_pfem) {
    pf_ = pfem_->forward(batch.pressure, train);
    const int Pw = cfg_.pfem.feature_width();
    for (int n = 0; n < N; ++n) {
      if (n < static_cast<int>(present_.size()) && !present_[n]) {
        for (int k = 0; k < Pw; ++k)
          pf_.data[static_cast<Eigen::Index>(n) * Pw + k] =
              cfg_.learned_pressure_subst ? pressure_subst_.value[k] : 0.0;
      }
    }
  }

  if (cfg_.late_fusion) {
    out_a_ = head_a_.forward(oaf_, train);
    out_b_ = head_b_.forward(pf_, train);
    Tensor out({N, 3});
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < 3; ++k) {
        const Scalar w = 1.0 / (1.0 + std::exp(-mix_logit_.value[k]));
        out.data[static_cast<Eigen::Index>(n) * 3 + k] =
            w * out_a_.data[static_cast<Eigen::Index>(n) * 3 + k] +
            (1.0 - w) * out_b_.data[static_cast<Eigen::Index>(n) * 3 + k];
      }
    }
    return out;
  }

  if (cfg_.use_oafem && cfg_.use_pfem) {
    const int A = cfg_.oafem.oaf_width, Pw = cfg_.pfem.feature_width();
    Tensor fused({N, A + Pw});
    for (int n = 0; n < N; ++n) {
      fused.data.segment(static_cast<Eigen::Index>(n) * (A + Pw), A) =
          oaf_.data.segment(static_cast<Eigen::Index>(n) * A, A);
      fused.data.segment(static_cast<Eigen::Index>(n) * (A + Pw) + A, Pw) =
          pf_.data.segment(static_cast<Eigen::Index>(n) * Pw, Pw);
    }
    return head_.forward(fused, train);
  }
  return head_.forward(cfg_.use_oafem ? oaf_ : pf_, train);
}

void FusionNet::backward(const Tensor& grad_out) {
  const int N = batch_size_;

  auto backward_pf = [&](Tensor dpf) {
    const int Pw = cfg_.pfem.feature_width();
    for (int n = 0; n < N; ++n) {
      if (n < static_cast<int>(present_.size()) && !present_[n]) {
        if (cfg_.learned_pressure_subst)
          for (int k = 0; k < Pw; ++k)
            pressure_subst_.grad[k] += dpf.data[static_cast<Eigen::Index>(n) * Pw + k];
        dpf.data.segment(static_cast<Eigen::Index>(n) * Pw, Pw).setZero();
      }
    }
    pfem_->backward(dpf);
  };

  if (cfg_.late_fusion) {
    Tensor da({N, 3}), db({N, 3});
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < 3; ++k) {
        const Scalar w = 1.0 / (1.0 + std::exp(-mix_logit_.value[k]));
        const Scalar g = grad_out.data[static_cast<Eigen::Index>(n) * 3 + k];
        da.data[static_cast<Eigen::Index>(n) * 3 + k] = g * w;
        db.data[static_cast<Eigen::Index>(n) * 3 + k] = g * (1.0 - w);
        mix_logit_.grad[k] += g *
                              (out_a_.data[static_cast<Eigen::Index>(n) * 3 + k] -
                               out_b_.data[static_cast<Eigen::Index>(n) * 3 + k]) *
                              w * (1.0 - w);
      }
    }
    Tensor doaf = head_a_.backward(da);
    Tensor dpf = head_b_.backward(db);
    oafem_->backward(doaf);
    backward_pf(std::move(dpf));
    return;
  }

  if (cfg_.use_oafem && cfg_.use_pfem) {
    Tensor dfused = head_.backward(grad_out);
    const int A = cfg_.oafem.oaf_width, Pw = cfg_.pfem.feature_width();
    Tensor doaf({N, A}), dpf({N, Pw});
    for (int n = 0; n < N; ++n) {
      doaf.data.segment(static_cast<Eigen::Index>(n) * A, A) =
          dfused.data.segment(static_cast<Eigen::Index>(n) * (A + Pw), A);
      dpf.data.segment(static_cast<Eigen::Index>(n) * Pw, Pw) =
          dfused.data.segment(static_cast<Eigen::Index>(n) * (A + Pw) + A, Pw);
    }
    oafem_->backward(doaf);
    backward_pf(std::move(dpf));
    return;
  }

  Tensor din = head_.backward(grad_out);
  if (cfg_.use_oafem)
    oafem_->backward(din);
  else
    backward_pf(std::move(din));
}

std::vector<nn::Param*> FusionNet::params() {
  std::vector<nn::Param*> out;
  if (oafem_) oafem_->collect_params(out);
  if (pfem_) pfem_->collect_params(out);
  head_.collect_params(out);
  head_a_.collect_params(out);
  head_b_.collect_params(out);
  if (cfg_.late_fusion) out.push_back(&mix_logit_);
  if (cfg_.use_pfem && cfg_.learned_pressure_subst) out.push_back(&pressure_subst_);
  return out;
}

std::vector<std::pair<std::string, ArrX*>> FusionNet::buffers() {
  std::vector<std::pair<std::string, ArrX*>> out;
  if (oafem_) oafem_->collect_buffers(out);
  if (pfem_) pfem_->collect_buffers(out);
  head_.collect_buffers(out);
  head_a_.collect_buffers(out);
  head_b_.collect_buffers(out);
  return out;
}

std::int64_t FusionNet::param_count() {
  std::int64_t total = 0;
  for (const nn::Param* p : params()) total += p->value.size();
  return total;
}

Batch FusionNet::dummy_batch() const {
  Batch b;
  b.size = 1;
  if (cfg_.use_oafem)
    b.rgba = Tensor({1, cfg_.oafem.input_channels, cfg_.oafem.input_size,
                     cfg_.oafem.input_size});
  if (cfg_.use_pfem) b.pressure = Tensor({1, cfg_.pfem.sensors, cfg_.pfem.window});
  b.pressure_present = {1};
  return b;
}

std::int64_t FusionNet::flop_count() {
  forward(dummy_batch(), false);
  std::int64_t total = head_.flops() + head_a_.flops() + head_b_.flops();
  if (oafem_) total += oafem_->flops();
  if (pfem_) total += pfem_->flops();
  return total;
}

// ------------------------------------------------------------- checkpointing

void to_json(json& j, const OafemConfig& c) {
  j = json{{"input_size", c.input_size},
           {"input_channels", c.input_channels},
           {"stem_channels", c.stem_channels},
           {"conv5_channels", c.conv5_channels},
           {"embed_width", c.embed_width},
           {"oaf_width", c.oaf_width}};
  j["stages"] = json::array();
  for (const auto& s : c.stages)
    j["stages"].push_back({{"out_channels", s.out_channels}, {"n_cheap", s.n_cheap}});
}

void from_json(const json& j, OafemConfig& c) {
  j.at("input_size").get_to(c.input_size);
  j.at("input_channels").get_to(c.input_channels);
  j.at("stem_channels").get_to(c.stem_channels);
  j.at("conv5_channels").get_to(c.conv5_channels);
  j.at("embed_width").get_to(c.embed_width);
  j.at("oaf_width").get_to(c.oaf_width);
  c.stages.clear();
  for (const auto& s : j.at("stages"))
    c.stages.push_back({s.at("out_channels").get<int>(), s.at("n_cheap").get<int>()});
}

void to_json(json& j, const PfemConfig& c) {
  j = json{{"sensors", c.sensors},         {"window", c.window},
           {"conv_channels", c.conv_channels}, {"conv_strides", c.conv_strides},
           {"kernel", c.kernel},           {"hidden", c.hidden},
           {"use_bilstm", c.use_bilstm}};
}

void from_json(const json& j, PfemConfig& c) {
  j.at("sensors").get_to(c.sensors);
  j.at("window").get_to(c.window);
  j.at("conv_channels").get_to(c.conv_channels);
  j.at("conv_strides").get_to(c.conv_strides);
  j.at("kernel").get_to(c.kernel);
  j.at("hidden").get_to(c.hidden);
  j.at("use_bilstm").get_to(c.use_bilstm);
}

void to_json(json& j, const HeadConfig& c) {
  j = json{{"widths", c.widths}, {"dropout", c.dropout}};
}

void from_json(const json& j, HeadConfig& c) {
  j.at("widths").get_to(c.widths);
  j.at("dropout").get_to(c.dropout);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"use_oafem", c.use_oafem},
           {"use_pfem", c.use_pfem},
           {"late_fusion", c.late_fusion},
           {"learned_pressure_subst", c.learned_pressure_subst},
           {"oafem", c.oafem},
           {"pfem", c.pfem},
           {"head", c.head}};
}

void from_json(const json& j, ModelConfig& c) {
  j.at("use_oafem").get_to(c.use_oafem);
  j.at("use_pfem").get_to(c.use_pfem);
  j.at("late_fusion").get_to(c.late_fusion);
  j.at("learned_pressure_subst").get_to(c.learned_pressure_subst);
  j.at("oafem").get_to(c.oafem);
  j.at("pfem").get_to(c.pfem);
  j.at("head").get_to(c.head);
}

void FusionNet::save_checkpoint(const std::string& path) const {
  json j;
  j["format_version"] = 1;
  j["config"] = cfg_;
  json tensors = json::object();
  auto* self = const_cast<FusionNet*>(this);
  for (const nn::Param* p : self->params())
    tensors[p->name] = std::vector<Scalar>(p->value.data(), p->value.data() + p->value.size());
  for (const auto& [name, buf] : self->buffers())
    tensors[name] = std::vector<Scalar>(buf->data(), buf->data() + buf->size());
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

std::unique_ptr<FusionNet> FusionNet::load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j;
  in >> j;
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version");
  ModelConfig cfg = j.at("config").get<ModelConfig>();
  auto net = std::make_unique<FusionNet>(cfg, 0);
  const auto& tensors = j.at("tensors");
  auto restore = [&](const std::string& name, ArrX& dst) {
    const auto& arr = tensors.at(name);
    if (static_cast<Eigen::Index>(arr.size()) != dst.size())
      throw std::runtime_error("checkpoint tensor size mismatch: " + name);
    for (Eigen::Index i = 0; i < dst.size(); ++i) dst[i] = arr[i].get<Scalar>();
  };
  for (nn::Param* p : net->params()) restore(p->name, p->value);
  for (auto& [name, buf] : net->buffers()) restore(name, *buf);
  return net;
}

}  // namespace trifusion
