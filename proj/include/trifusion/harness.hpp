#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trifusion/acoustic_fusion.hpp"
#include "trifusion/dataio.hpp"
#include "trifusion/fusion_net.hpp"
#include "trifusion/objectives_metrics.hpp"
#include "trifusion/rig_geometry.hpp"

namespace trifusion {

struct HarnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training aborted on a non-finite loss.
struct DivergenceError : HarnessError {
  using HarnessError::HarnessError;
};

/// One training/evaluation run, serializable to JSON.
struct RunConfig {
  std::string dataset;
  std::string out_dir;
  // trimodal | dual | optical | pressure | baseline1 | baseline2
  std::string variant = "trimodal";
  std::string profile = "toy";  // toy | full model template
  int train_per_case = 100;
  int test_per_case = 30;
  int batch_size = 32;
  int max_epochs = 25;
  Scalar lr = 0.1;
  int lr_decay_every = 30;
  Scalar momentum = 0.9;
  Scalar weight_decay = 1e-4;
  Scalar val_fraction = 0.1;
  LossWeights loss;
  ExpansionFactors gamma;
  Scalar pressure_limit = 100.0;
  bool learned_pressure_subst = false;
  std::uint64_t seed = 0;

  bool use_optical() const { return variant != "pressure"; }
  bool use_acoustic() const { return use_optical() && variant != "optical"; }
  bool use_pressure() const {
    return variant == "trimodal" || variant == "pressure" || variant == "baseline1" ||
           variant == "baseline2";
  }
};

/// Fields present in the file replace the corresponding fields of base
/// (config files take precedence over command-line flags).
RunConfig load_run_config(const std::string& path, RunConfig base = {});
void save_run_config(const RunConfig& cfg, const std::string& path);

/// Names accepted in RunConfig::variant.
const std::vector<std::string>& known_variants();

/// Model layout for a run: profile template plus variant toggles, with input
/// shapes taken from the dataset.
ModelConfig model_for(const RunConfig& cfg, int image_size, int sensors, int window);

/// Step schedule lr * 0.1^(epoch / decay_every).
Scalar lr_at(int epoch, Scalar base_lr, int decay_every);

/// Per-frame network inputs, built once and cached: attention-fused RGBA,
/// pressure window, normalized label.
class FramePrep {
 public:
  FramePrep(const Dataset& ds, const RigModel& rig, const RunConfig& cfg);

  Batch make_batch(const std::vector<std::pair<int, int>>& refs) const;
  std::vector<NormalizedState> labels(const std::vector<std::pair<int, int>>& refs) const;
  const CaseTriplet& triplet(int case_idx) const;
  const std::string& case_id(int case_idx) const;
  int image_size() const { return image_size_; }
  int sensors() const { return sensors_; }
  int window() const { return window_; }

 private:
  struct PerFrame {
    ArrX rgba;      // 4*S*S (empty when optical unused)
    ArrX pressure;  // Q*T
    char present = 0;
    NormalizedState label;
  };
  const PerFrame& at(const std::pair<int, int>& ref) const;

  std::vector<std::vector<PerFrame>> frames_;  // [case][frame]
  std::vector<CaseTriplet> triplets_;
  std::vector<std::string> ids_;
  int image_size_ = 0, sensors_ = 0, window_ = 0;
  bool optical_ = true;
};

struct TrainResult {
  std::string checkpoint_path;
  int best_epoch = -1;
  Scalar best_val_loss = 0.0;
  std::vector<Scalar> train_loss;  // per epoch
  std::vector<Scalar> val_loss;
  Scalar seconds = 0.0;
  std::int64_t param_count = 0;
};

/// Full training loop: split, SGD with the step schedule, validation-best
/// checkpointing into cfg.out_dir. Throws DivergenceError on non-finite loss.
TrainResult train_model(const RunConfig& cfg);

struct SampleRecord {
  std::string case_id;
  int frame = 0;
  NormalizedState truth, pred;
};

struct EvalResult {
  EvalReport overall, close, far;
  std::vector<SampleRecord> samples;
};

EvalResult evaluate_model(const RunConfig& cfg, const std::string& checkpoint_path);

/// Deterministic JSON record; identical runs produce byte-identical files.
void write_eval_record(const EvalResult& res, const RunConfig& cfg, const std::string& path);
EvalResult read_eval_record(const std::string& path);

std::string format_eval_report(const EvalReport& r);

struct SuiteRow {
  std::string variant;
  EvalResult eval;
  std::int64_t params = 0;
  Scalar train_seconds = 0.0;
  std::string error;  // nonempty when the entry failed; suite continues
};

/// Trains and evaluates each variant under base.out_dir/<variant>/; reuses a
/// variant's record.json when it already exists.
std::vector<SuiteRow> run_suite(const RunConfig& base, const std::vector<std::string>& variants);

std::string format_suite_table(const std::vector<SuiteRow>& rows);

}  // namespace trifusion
