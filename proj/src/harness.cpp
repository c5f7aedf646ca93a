#include "trifusion/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trifusion/pressure_pipeline.hpp"
#include "trifusion/simulator.hpp"

namespace trifusion {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> v{"trimodal", "dual",      "optical",
                                          "pressure", "baseline1", "baseline2"};
  return v;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw HarnessError("cannot open run config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw HarnessError("malformed run config: " + std::string(e.what()));
  }
  RunConfig c = std::move(base);
  c.dataset = j.value("dataset", c.dataset);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.variant = j.value("variant", c.variant);
  c.profile = j.value("profile", c.profile);
  c.train_per_case = j.value("train_per_case", c.train_per_case);
  c.test_per_case = j.value("test_per_case", c.test_per_case);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.lr = j.value("lr", c.lr);
  c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.loss.lambda_x = j.value("lambda_x", c.loss.lambda_x);
  c.loss.lambda_y = j.value("lambda_y", c.loss.lambda_y);
  c.loss.lambda_d = j.value("lambda_d", c.loss.lambda_d);
  c.loss.beta = j.value("beta", c.loss.beta);
  c.gamma.gamma_u = j.value("gamma_u", c.gamma.gamma_u);
  c.gamma.gamma_v = j.value("gamma_v", c.gamma.gamma_v);
  c.pressure_limit = j.value("pressure_limit", c.pressure_limit);
  c.learned_pressure_subst = j.value("learned_pressure_subst", c.learned_pressure_subst);
  c.seed = j.value("seed", c.seed);
  if (std::find(known_variants().begin(), known_variants().end(), c.variant) ==
      known_variants().end())
    throw HarnessError("unknown variant: " + c.variant);
  return c;
}

void save_run_config(const RunConfig& c, const std::string& path) {
  json j;
  j["dataset"] = c.dataset;
  j["out_dir"] = c.out_dir;
  j["variant"] = c.variant;
  j["profile"] = c.profile;
  j["train_per_case"] = c.train_per_case;
  j["test_per_case"] = c.test_per_case;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["lr"] = c.lr;
  j["lr_decay_every"] = c.lr_decay_every;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["val_fraction"] = c.val_fraction;
  j["lambda_x"] = c.loss.lambda_x;
  j["lambda_y"] = c.loss.lambda_y;
  j["lambda_d"] = c.loss.lambda_d;
  j["beta"] = c.loss.beta;
  j["gamma_u"] = c.gamma.gamma_u;
  j["gamma_v"] = c.gamma.gamma_v;
  j["pressure_limit"] = c.pressure_limit;
  j["learned_pressure_subst"] = c.learned_pressure_subst;
  j["seed"] = c.seed;
  std::ofstream out(path);
  if (!out) throw HarnessError("cannot write run config: " + path);
  out << j.dump(2) << "\n";
}

ModelConfig model_for(const RunConfig& cfg, int image_size, int sensors, int window) {
  const auto& names = known_variants();
  if (std::find(names.begin(), names.end(), cfg.variant) == names.end())
    throw HarnessError("unknown variant: " + cfg.variant);
  ModelConfig m = cfg.profile == "full" ? full_model_config() : toy_model_config();
  m.oafem.input_size = image_size;
  m.pfem.sensors = sensors;
  m.pfem.window = window;
  m.use_oafem = cfg.use_optical();
  m.use_pfem = cfg.use_pressure();
  m.late_fusion = cfg.variant == "baseline2";
  m.learned_pressure_subst = cfg.learned_pressure_subst;
  if (cfg.variant == "baseline1") m.pfem.use_bilstm = false;
  return m;
}

Scalar lr_at(int epoch, Scalar base_lr, int decay_every) {
  if (decay_every <= 0) return base_lr;
  return base_lr * std::pow(0.1, epoch / decay_every);
}

FramePrep::FramePrep(const Dataset& ds, const RigModel& rig, const RunConfig& cfg) {
  image_size_ = ds.manifest().image_size;
  sensors_ = rig.num_pressure();
  window_ = rig.pressure_window;
  optical_ = cfg.use_optical();
  const int T = window_;
  const Scalar stride_s = 0.5;
  const std::uint64_t base_seed = fnv1a(std::to_string(cfg.seed));

  for (const CaseData& cd : ds.cases()) {
    triplets_.push_back(cd.info.triplet);
    ids_.push_back(cd.info.id);

    // Per-sensor range statistics over the whole case series.
    std::vector<std::optional<AcousticStats>> stats;
    for (int s = 0; s < rig.num_acoustic(); ++s) {
      std::vector<Scalar> raw;
      raw.reserve(cd.acoustic_series.size());
      for (const VecX& sample : cd.acoustic_series) raw.push_back(sample[s]);
      const AcousticSensorModel& sm = rig.acoustic[static_cast<size_t>(s)];
      stats.push_back(filter_and_stats(raw, sm.min_range, sm.max_range, s));
    }

    const VecX baseline = still_water_baseline(cd.pressure);
    const Eigen::MatrixXd relative = relative_pressure(cd.pressure, baseline);
    const int L = static_cast<int>(cd.pressure.raw.cols());
    const int step = static_cast<int>(std::lround(stride_s * cd.pressure.sample_rate));
    const int span = (T - 1) * step;
    const int max_offset = L - 1 - cd.pressure.still_len - span;
    if (max_offset < 0)
      throw HarnessError("pressure series too short for window in case " + cd.info.id);
    const bool present = pressure_gate(cd.info, cfg.pressure_limit);

    std::vector<PerFrame> frames;
    frames.reserve(cd.images.size());
    for (size_t fidx = 0; fidx < cd.images.size(); ++fidx) {
      PerFrame pf;
      pf.label = normalize_state({cd.info.triplet.p_x, cd.info.triplet.p_y, cd.info.triplet.d});
      pf.present = present ? 1 : 0;

      const int offset = static_cast<int>(fidx) % (max_offset + 1);
      const Scalar start_s = (cd.pressure.still_len + offset) / cd.pressure.sample_rate;
      const PressureWindow win =
          extract_window(relative, cd.pressure.sample_rate, start_s, T, stride_s);
      pf.pressure = ArrX::Zero(static_cast<Eigen::Index>(sensors_) * T);
      for (int q = 0; q < sensors_; ++q)
        for (int t = 0; t < T; ++t)
          pf.pressure[static_cast<Eigen::Index>(q) * T + t] = win.values(q, t);

      if (optical_) {
        const int S = image_size_;
        if (cfg.use_acoustic()) {
          std::mt19937_64 rng(fnv1a(cd.info.id + "#" + std::to_string(fidx), base_seed));
          SensorFrame frame;
          frame.image = cd.images[fidx];
          frame.acoustic = VecX::Constant(rig.num_acoustic(), kNoEcho);
          for (int s = 0; s < rig.num_acoustic(); ++s)
            if (stats[static_cast<size_t>(s)])
              frame.acoustic[s] = sample_range(*stats[static_cast<size_t>(s)],
                                               rig.acoustic[static_cast<size_t>(s)], rng);
          frame.case_triplet = cd.info.triplet;
          pf.rgba = build_attention(frame, rig, cfg.gamma).data;
        } else {
          ArrX rgba = ArrX::Zero(static_cast<Eigen::Index>(4) * S * S);
          rgba.head(static_cast<Eigen::Index>(3) * S * S) = cd.images[fidx].data;
          pf.rgba = std::move(rgba);
        }
      }
      frames.push_back(std::move(pf));
    }
    frames_.push_back(std::move(frames));
  }
}

const FramePrep::PerFrame& FramePrep::at(const std::pair<int, int>& ref) const {
  return frames_[static_cast<size_t>(ref.first)][static_cast<size_t>(ref.second)];
}

Batch FramePrep::make_batch(const std::vector<std::pair<int, int>>& refs) const {
  Batch b;
  b.size = static_cast<int>(refs.size());
  const int N = b.size;
  const int S = image_size_, Q = sensors_, T = window_;
  if (optical_) b.rgba = nn::Tensor({N, 4, S, S});
  b.pressure = nn::Tensor({N, Q, T});
  b.pressure_present.resize(static_cast<size_t>(N));
  for (int i = 0; i < N; ++i) {
    const PerFrame& pf = at(refs[static_cast<size_t>(i)]);
    if (optical_)
      b.rgba.data.segment(static_cast<Eigen::Index>(i) * 4 * S * S,
                          static_cast<Eigen::Index>(4) * S * S) = pf.rgba;
    b.pressure.data.segment(static_cast<Eigen::Index>(i) * Q * T,
                            static_cast<Eigen::Index>(Q) * T) = pf.pressure;
    b.pressure_present[static_cast<size_t>(i)] = pf.present;
  }
  return b;
}

std::vector<NormalizedState> FramePrep::labels(
    const std::vector<std::pair<int, int>>& refs) const {
  std::vector<NormalizedState> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(at(r).label);
  return out;
}

const CaseTriplet& FramePrep::triplet(int case_idx) const {
  return triplets_[static_cast<size_t>(case_idx)];
}

const std::string& FramePrep::case_id(int case_idx) const {
  return ids_[static_cast<size_t>(case_idx)];
}

namespace {

std::vector<NormalizedState> to_states(const nn::Tensor& out) {
  std::vector<NormalizedState> states(static_cast<size_t>(out.dim(0)));
  for (int i = 0; i < out.dim(0); ++i)
    states[static_cast<size_t>(i)] = {out.data[i * 3 + 0], out.data[i * 3 + 1],
                                      out.data[i * 3 + 2]};
  return states;
}

/// Mean weighted smooth-L1 over the batch and its gradient wrt the output.
Scalar loss_and_grad(const nn::Tensor& out, const std::vector<NormalizedState>& truth,
                     const LossWeights& w, nn::Tensor& grad) {
  const int N = out.dim(0);
  grad = nn::Tensor({N, 3});
  const Scalar lambdas[3] = {w.lambda_x, w.lambda_y, w.lambda_d};
  Scalar loss = 0.0;
  for (int i = 0; i < N; ++i) {
    const NormalizedState& t = truth[static_cast<size_t>(i)];
    const Scalar tv[3] = {t.p_xn, t.p_yn, t.d_n};
    for (int j = 0; j < 3; ++j) {
      const Scalar e = out.data[i * 3 + j] - tv[j];
      loss += lambdas[j] * smooth_l1(std::abs(e), w.beta) / N;
      grad.data[i * 3 + j] = lambdas[j] * smooth_l1_grad(e, w.beta) / N;
    }
  }
  return loss;
}

Scalar eval_loss(FusionNet& net, const FramePrep& prep,
                 const std::vector<std::pair<int, int>>& refs, int batch_size,
                 const LossWeights& w) {
  Scalar total = 0.0;
  for (size_t start = 0; start < refs.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(refs.size(), start + static_cast<size_t>(batch_size));
    const std::vector<std::pair<int, int>> slice(refs.begin() + static_cast<long>(start),
                                                 refs.begin() + static_cast<long>(end));
    const nn::Tensor out = net.forward(prep.make_batch(slice), false);
    total += total_loss(to_states(out), prep.labels(slice), w) * static_cast<Scalar>(slice.size());
  }
  return total / static_cast<Scalar>(refs.size());
}

// The pressure-only variant can only learn where the modality exists, so its
// training split is restricted to pressure-available cases. Evaluation still
// covers the full grid: degradation outside the wake's reach is exactly what
// the ablation is meant to expose.
void restrict_pressure_training(const Dataset& ds, const RunConfig& cfg, SplitIndex& split) {
  if (cfg.variant != "pressure") return;
  std::erase_if(split.train, [&](const std::pair<int, int>& r) {
    return !pressure_gate(ds.cases()[static_cast<size_t>(r.first)].info, cfg.pressure_limit);
  });
}

}  // namespace

TrainResult train_model(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out_dir);

  const Dataset ds = Dataset::load(cfg.dataset);
  const RigModel rig = default_rig();
  const FramePrep prep(ds, rig, cfg);
  SplitIndex split = split_frames(ds, cfg.train_per_case, cfg.test_per_case, cfg.seed);
  restrict_pressure_training(ds, cfg, split);

  FusionNet net(model_for(cfg, prep.image_size(), prep.sensors(), prep.window()), cfg.seed);
  nn::SgdOptimizer opt(net.params(), cfg.momentum, cfg.weight_decay);

  std::mt19937_64 rng(fnv1a("train:" + std::to_string(cfg.seed)));
  std::shuffle(split.train.begin(), split.train.end(), rng);
  const size_t n_val =
      cfg.val_fraction > 0.0
          ? std::max<size_t>(1, static_cast<size_t>(std::lround(cfg.val_fraction *
                                                                static_cast<Scalar>(split.train.size()))))
          : 0;
  std::vector<std::pair<int, int>> val_refs(split.train.begin(),
                                            split.train.begin() + static_cast<long>(n_val));
  std::vector<std::pair<int, int>> train_refs(split.train.begin() + static_cast<long>(n_val),
                                              split.train.end());
  if (train_refs.empty()) throw HarnessError("empty training split");

  TrainResult result;
  result.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.json").string();
  result.param_count = net.param_count();
  result.best_val_loss = std::numeric_limits<Scalar>::infinity();

  std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl");

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const Scalar lr = lr_at(epoch, cfg.lr, cfg.lr_decay_every);
    std::shuffle(train_refs.begin(), train_refs.end(), rng);

    Scalar epoch_loss = 0.0;
    for (size_t start = 0; start < train_refs.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(train_refs.size(), start + static_cast<size_t>(cfg.batch_size));
      const std::vector<std::pair<int, int>> slice(train_refs.begin() + static_cast<long>(start),
                                                   train_refs.begin() + static_cast<long>(end));
      const nn::Tensor out = net.forward(prep.make_batch(slice), true);
      nn::Tensor grad;
      const Scalar loss = loss_and_grad(out, prep.labels(slice), cfg.loss, grad);
      if (!std::isfinite(loss))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<Scalar>(slice.size());
      opt.zero_grad();
      net.backward(grad);
      opt.step(lr);
    }
    epoch_loss /= static_cast<Scalar>(train_refs.size());
    result.train_loss.push_back(epoch_loss);

    const Scalar vloss = n_val > 0 ? eval_loss(net, prep, val_refs, cfg.batch_size, cfg.loss)
                                   : epoch_loss;
    result.val_loss.push_back(vloss);
    if (!std::isfinite(vloss))
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));

    if (vloss < result.best_val_loss) {
      result.best_val_loss = vloss;
      result.best_epoch = epoch;
      net.save_checkpoint(result.checkpoint_path);
    }

    if (log) {
      json line;
      line["epoch"] = epoch;
      line["lr"] = lr;
      line["train_loss"] = epoch_loss;
      line["val_loss"] = vloss;
      log << line.dump() << "\n";
    }
  }

  result.seconds =
      std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - t0).count();
  save_run_config(cfg, (fs::path(cfg.out_dir) / "run_config.json").string());
  return result;
}

EvalResult evaluate_model(const RunConfig& cfg, const std::string& checkpoint_path) {
  const Dataset ds = Dataset::load(cfg.dataset);
  const RigModel rig = default_rig();
  const FramePrep prep(ds, rig, cfg);
  SplitIndex split = split_frames(ds, cfg.train_per_case, cfg.test_per_case, cfg.seed);
  std::sort(split.test.begin(), split.test.end());

  std::unique_ptr<FusionNet> net = FusionNet::load_checkpoint(checkpoint_path);

  EvalResult res;
  std::vector<NormalizedState> preds, truths;
  std::vector<NormalizedState> preds_close, truths_close, preds_far, truths_far;

  for (size_t start = 0; start < split.test.size(); start += static_cast<size_t>(cfg.batch_size)) {
    const size_t end = std::min(split.test.size(), start + static_cast<size_t>(cfg.batch_size));
    const std::vector<std::pair<int, int>> slice(split.test.begin() + static_cast<long>(start),
                                                 split.test.begin() + static_cast<long>(end));
    const nn::Tensor out = net->forward(prep.make_batch(slice), false);
    const std::vector<NormalizedState> batch_preds = to_states(out);
    const std::vector<NormalizedState> batch_truths = prep.labels(slice);
    for (size_t i = 0; i < slice.size(); ++i) {
      const auto& [ci, fi] = slice[i];
      SampleRecord rec;
      rec.case_id = prep.case_id(ci);
      rec.frame = fi;
      rec.truth = batch_truths[i];
      rec.pred = batch_preds[i];
      res.samples.push_back(std::move(rec));

      preds.push_back(batch_preds[i]);
      truths.push_back(batch_truths[i]);
      if (prep.triplet(ci).p_y <= cfg.pressure_limit) {
        preds_close.push_back(batch_preds[i]);
        truths_close.push_back(batch_truths[i]);
      } else {
        preds_far.push_back(batch_preds[i]);
        truths_far.push_back(batch_truths[i]);
      }
    }
  }

  res.overall = eval_report(preds, truths);
  if (!preds_close.empty()) res.close = eval_report(preds_close, truths_close);
  if (!preds_far.empty()) res.far = eval_report(preds_far, truths_far);
  return res;
}

namespace {

json report_to_json(const EvalReport& r) {
  json j;
  j["rmse"] = r.rmse;
  j["sd"] = r.sd;
  j["mean_error"] = r.mean_error;
  j["confusion"] = r.confusion;
  json dirs = json::array();
  for (const DirectionSummary& d : r.direction) {
    json jd;
    jd["mean"] = d.mean;
    jd["lower"] = d.lower_extremum;
    jd["upper"] = d.upper_extremum;
    jd["count"] = d.count;
    dirs.push_back(jd);
  }
  j["direction"] = dirs;
  j["sample_count"] = r.sample_count;
  j["outliers_dropped"] = r.outliers_dropped;
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  j.at("rmse").get_to(r.rmse);
  j.at("sd").get_to(r.sd);
  j.at("mean_error").get_to(r.mean_error);
  j.at("confusion").get_to(r.confusion);
  for (size_t i = 0; i < 3; ++i) {
    const json& jd = j.at("direction").at(i);
    r.direction[i].mean = jd.at("mean").get<Scalar>();
    r.direction[i].lower_extremum = jd.at("lower").get<Scalar>();
    r.direction[i].upper_extremum = jd.at("upper").get<Scalar>();
    r.direction[i].count = jd.at("count").get<int>();
  }
  r.sample_count = j.at("sample_count").get<int>();
  r.outliers_dropped = j.at("outliers_dropped").get<int>();
  return r;
}

}  // namespace

void write_eval_record(const EvalResult& res, const RunConfig& cfg, const std::string& path) {
  json j;
  j["variant"] = cfg.variant;
  j["seed"] = cfg.seed;
  j["dataset"] = cfg.dataset;
  j["reports"]["overall"] = report_to_json(res.overall);
  j["reports"]["close"] = report_to_json(res.close);
  j["reports"]["far"] = report_to_json(res.far);
  json samples = json::array();
  for (const SampleRecord& s : res.samples) {
    json js;
    js["case"] = s.case_id;
    js["frame"] = s.frame;
    js["truth"] = {s.truth.p_xn, s.truth.p_yn, s.truth.d_n};
    js["pred"] = {s.pred.p_xn, s.pred.p_yn, s.pred.d_n};
    samples.push_back(js);
  }
  j["samples"] = samples;
  std::ofstream out(path);
  if (!out) throw HarnessError("cannot write eval record: " + path);
  out << j.dump(2) << "\n";
}

EvalResult read_eval_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw HarnessError("cannot open eval record: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw HarnessError("malformed eval record: " + std::string(e.what()));
  }
  EvalResult res;
  res.overall = report_from_json(j.at("reports").at("overall"));
  res.close = report_from_json(j.at("reports").at("close"));
  res.far = report_from_json(j.at("reports").at("far"));
  for (const json& js : j.at("samples")) {
    SampleRecord s;
    s.case_id = js.at("case").get<std::string>();
    s.frame = js.at("frame").get<int>();
    s.truth = {js.at("truth").at(0).get<Scalar>(), js.at("truth").at(1).get<Scalar>(),
               js.at("truth").at(2).get<Scalar>()};
    s.pred = {js.at("pred").at(0).get<Scalar>(), js.at("pred").at(1).get<Scalar>(),
              js.at("pred").at(2).get<Scalar>()};
    res.samples.push_back(std::move(s));
  }
  return res;
}

std::string format_eval_report(const EvalReport& r) {
  std::ostringstream os;
  char buf[160];
  const char* names[3] = {"p_x", "p_y", "d  "};
  const Scalar scale_cm[3] = {200.0, 400.0, 0.0};
  os << "samples: " << r.sample_count << " (outliers dropped: " << r.outliers_dropped << ")\n";
  for (int j = 0; j < 3; ++j) {
    if (scale_cm[j] > 0)
      std::snprintf(buf, sizeof buf,
                    "%s  RMSE %.4f (%.2f cm)  SD %.4f (%.2f cm)  bias %+.4f\n", names[j],
                    r.rmse[static_cast<size_t>(j)], r.rmse[static_cast<size_t>(j)] * scale_cm[j],
                    r.sd[static_cast<size_t>(j)], r.sd[static_cast<size_t>(j)] * scale_cm[j],
                    r.mean_error[static_cast<size_t>(j)]);
    else
      std::snprintf(buf, sizeof buf, "%s  RMSE %.4f  SD %.4f  bias %+.4f\n", names[j],
                    r.rmse[static_cast<size_t>(j)], r.sd[static_cast<size_t>(j)],
                    r.mean_error[static_cast<size_t>(j)]);
    os << buf;
  }
  os << "confusion (rows truth L,S,R / cols pred):\n";
  for (int t = 0; t < 3; ++t) {
    std::snprintf(buf, sizeof buf, "  %c  %6d %6d %6d\n", "LSR"[t],
                  r.confusion[static_cast<size_t>(t)][0], r.confusion[static_cast<size_t>(t)][1],
                  r.confusion[static_cast<size_t>(t)][2]);
    os << buf;
  }
  const std::array<Scalar, 3> prec = per_class_precision(r);
  const std::array<Scalar, 3> rec = per_class_recall(r);
  std::snprintf(buf, sizeof buf,
                "precision L/S/R: %.4f %.4f %.4f\nrecall    L/S/R: %.4f %.4f %.4f\n", prec[0],
                prec[1], prec[2], rec[0], rec[1], rec[2]);
  os << buf;
  for (int t = 0; t < 3; ++t) {
    const DirectionSummary& d = r.direction[static_cast<size_t>(t)];
    std::snprintf(buf, sizeof buf, "d_hat | truth %c: mean %.4f  range [%.4f, %.4f]  n=%d\n",
                  "LSR"[t], d.mean, d.lower_extremum, d.upper_extremum, d.count);
    os << buf;
  }
  return os.str();
}

std::vector<SuiteRow> run_suite(const RunConfig& base, const std::vector<std::string>& variants) {
  std::vector<SuiteRow> rows;
  for (const std::string& v : variants) {
    RunConfig cfg = base;
    cfg.variant = v;
    cfg.out_dir = (fs::path(base.out_dir) / v).string();
    const std::string record_path = (fs::path(cfg.out_dir) / "record.json").string();

    SuiteRow row;
    row.variant = v;
    try {
      if (fs::exists(record_path)) {
        row.eval = read_eval_record(record_path);
      } else {
        const TrainResult tr = train_model(cfg);
        row.params = tr.param_count;
        row.train_seconds = tr.seconds;
        row.eval = evaluate_model(cfg, tr.checkpoint_path);
        write_eval_record(row.eval, cfg, record_path);
        std::ofstream rep(fs::path(cfg.out_dir) / "report.txt");
        rep << "variant: " << v << "\n\noverall\n"
            << format_eval_report(row.eval.overall) << "\nclose\n"
            << format_eval_report(row.eval.close) << "\nfar\n"
            << format_eval_report(row.eval.far);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_suite_table(const std::vector<SuiteRow>& rows) {
  std::ostringstream os;
  char buf[200];
  os << "variant     RMSEx(cm)  RMSEy(cm)  dir-acc   close-x   close-y    far-x     far-y\n";
  for (const SuiteRow& r : rows) {
    if (!r.error.empty()) {
      std::snprintf(buf, sizeof buf, "%-11s FAILED: %s\n", r.variant.c_str(), r.error.c_str());
      os << buf;
      continue;
    }
    const EvalReport& o = r.eval.overall;
    int correct = 0, total = 0;
    for (size_t t = 0; t < 3; ++t)
      for (size_t p = 0; p < 3; ++p) {
        total += o.confusion[t][p];
        if (t == p) correct += o.confusion[t][p];
      }
    const Scalar acc = total > 0 ? static_cast<Scalar>(correct) / total : 0.0;
    std::snprintf(buf, sizeof buf, "%-11s %9.2f  %9.2f  %7.4f  %8.2f  %8.2f  %8.2f  %8.2f\n",
                  r.variant.c_str(), o.rmse[0] * 200.0, o.rmse[1] * 400.0, acc,
                  r.eval.close.rmse[0] * 200.0, r.eval.close.rmse[1] * 400.0,
                  r.eval.far.rmse[0] * 200.0, r.eval.far.rmse[1] * 400.0);
    os << buf;
  }
  return os.str();
}

}  // namespace trifusion
