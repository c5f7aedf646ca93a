#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI/CLI.hpp>

#include "trifusion/dataio.hpp"
#include "trifusion/fusion_net.hpp"
#include "trifusion/harness.hpp"
#include "trifusion/plots.hpp"
#include "trifusion/rig_geometry.hpp"
#include "trifusion/simulator.hpp"

namespace fs = std::filesystem;
using namespace trifusion;

namespace {

constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kDiverged = 3;

/// Relative output paths land under $TRIFUSION_OUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("TRIFUSION_OUT_ROOT");
  if (!root || !*root || path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

SceneConfig scene_by_name(const std::string& name) {
  if (name == "toy") return toy_scene();
  if (name == "lab") return default_scene();
  if (name == "field") return field_scene();
  return load_scene(name);  // treat as a config file path
}

void add_run_options(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "run config JSON (its fields override flags)");
  cmd->add_option("--dataset", cfg.dataset, "dataset root directory");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--variant", cfg.variant, "trimodal|dual|optical|pressure|baseline1|baseline2");
  cmd->add_option("--profile", cfg.profile, "model profile: toy|full");
  cmd->add_option("--train-per-case", cfg.train_per_case);
  cmd->add_option("--test-per-case", cfg.test_per_case);
  cmd->add_option("--batch-size", cfg.batch_size);
  cmd->add_option("--epochs", cfg.max_epochs);
  cmd->add_option("--lr", cfg.lr);
  cmd->add_option("--lr-decay-every", cfg.lr_decay_every);
  cmd->add_option("--seed", cfg.seed);
  cmd->add_option("--pressure-limit", cfg.pressure_limit);
}

RunConfig finish_run_config(CLI::App* cmd, RunConfig cfg, const std::string& config_path) {
  (void)cmd;
  // config files take precedence over flags
  if (!config_path.empty()) cfg = load_run_config(config_path, cfg);
  cfg.dataset = resolve_out(cfg.dataset);
  cfg.out_dir = resolve_out(cfg.out_dir);
  if (cfg.dataset.empty()) throw CLI::ValidationError("--dataset (or config) is required");
  if (cfg.out_dir.empty()) throw CLI::ValidationError("--out (or config) is required");
  const auto& kv = known_variants();
  if (std::find(kv.begin(), kv.end(), cfg.variant) == kv.end())
    throw CLI::ValidationError("unknown variant: " + cfg.variant);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tri-modal leader localization pipeline"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_scene = "toy", sim_out;
  int sim_frames = 130;
  std::uint64_t sim_seed = 0;
  sim->add_option("--scene", sim_scene, "toy|lab|field or a scene JSON path");
  sim->add_option("--out", sim_out, "dataset output directory")->required();
  sim->add_option("--frames", sim_frames, "frames per case");
  sim->add_option("--seed", sim_seed);

  // fuse
  auto* fuse = app.add_subcommand("fuse", "render attention-fusion overlay panels");
  std::string fuse_dataset, fuse_out = "fusion_panels.png";
  int fuse_panels = 4;
  fuse->add_option("--dataset", fuse_dataset)->required();
  fuse->add_option("--out", fuse_out, "output PNG");
  fuse->add_option("--panels", fuse_panels);

  // train
  auto* train = app.add_subcommand("train", "train one model variant");
  RunConfig train_cfg;
  std::string train_config_path;
  add_run_options(train, train_cfg, train_config_path);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  RunConfig eval_cfg;
  std::string eval_config_path, eval_checkpoint;
  add_run_options(eval, eval_cfg, eval_config_path);
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON (default <out>/checkpoint.json)");
  eval->description(
      "evaluate a checkpoint on the test split (reads <out>/run_config.json when present)");

  // suite
  auto* suite = app.add_subcommand("suite", "train + evaluate several variants");
  RunConfig suite_cfg;
  std::string suite_config_path;
  std::vector<std::string> suite_variants = known_variants();
  add_run_options(suite, suite_cfg, suite_config_path);
  suite->add_option("--variants", suite_variants, "subset of variants to run");

  // plot
  auto* plot = app.add_subcommand("plot", "render diagnostic plots from an eval record");
  std::string plot_record, plot_out = ".", plot_dataset;
  plot->add_option("--record", plot_record, "record.json from eval/suite")->required();
  plot->add_option("--out", plot_out, "output directory");
  plot->add_option("--dataset", plot_dataset, "dataset for fusion overlay panels (optional)");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "describe a dataset, checkpoint, or record");
  std::string ins_dataset, ins_checkpoint, ins_record;
  inspect->add_option("--dataset", ins_dataset);
  inspect->add_option("--checkpoint", ins_checkpoint);
  inspect->add_option("--record", ins_record);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  try {
    if (sim->parsed()) {
      SceneConfig scene = scene_by_name(sim_scene);
      if (sim->count("--seed")) scene.seed = sim_seed;
      const std::string out = resolve_out(sim_out);
      generate_dataset(scene, default_rig(), sim_frames, out);
      std::cout << "dataset written to " << out << "\n";
    } else if (fuse->parsed()) {
      const Dataset ds = Dataset::load(resolve_out(fuse_dataset));
      plot_fusion_panels(ds, default_rig(), {}, fuse_panels, resolve_out(fuse_out));
      std::cout << "panels written to " << resolve_out(fuse_out) << "\n";
    } else if (train->parsed()) {
      const RunConfig cfg = finish_run_config(train, train_cfg, train_config_path);
      const TrainResult r = train_model(cfg);
      std::cout << "best epoch " << r.best_epoch << ", val loss " << r.best_val_loss << ", "
                << r.param_count << " params, " << r.seconds << " s\n"
                << "checkpoint: " << r.checkpoint_path << "\n";
    } else if (eval->parsed()) {
      // default to the run's stored config so the variant and split settings
      // always match the checkpoint being evaluated
      const std::string run_dir = resolve_out(eval_cfg.out_dir);
      std::string config_path = eval_config_path;
      if (config_path.empty() && !run_dir.empty() &&
          fs::exists(fs::path(run_dir) / "run_config.json"))
        config_path = (fs::path(run_dir) / "run_config.json").string();
      RunConfig cfg = finish_run_config(eval, eval_cfg, config_path);
      if (eval->count("--dataset")) cfg.dataset = resolve_out(eval_cfg.dataset);
      if (!run_dir.empty()) cfg.out_dir = run_dir;
      const std::string ckpt = eval_checkpoint.empty()
                                   ? (fs::path(cfg.out_dir) / "checkpoint.json").string()
                                   : resolve_out(eval_checkpoint);
      const EvalResult res = evaluate_model(cfg, ckpt);
      fs::create_directories(cfg.out_dir);
      write_eval_record(res, cfg, (fs::path(cfg.out_dir) / "record.json").string());
      std::ofstream rep(fs::path(cfg.out_dir) / "report.txt");
      rep << format_eval_report(res.overall);
      std::cout << format_eval_report(res.overall);
    } else if (suite->parsed()) {
      const RunConfig cfg = finish_run_config(suite, suite_cfg, suite_config_path);
      const std::vector<SuiteRow> rows = run_suite(cfg, suite_variants);
      const std::string table = format_suite_table(rows);
      std::ofstream out(fs::path(cfg.out_dir) / "suite.txt");
      out << table;
      std::cout << table;
    } else if (plot->parsed()) {
      const EvalResult res = read_eval_record(resolve_out(plot_record));
      const fs::path out_dir = resolve_out(plot_out);
      fs::create_directories(out_dir);
      plot_scatter(res, (out_dir / "scatter.png").string());
      plot_violin(res, (out_dir / "violin.png").string());
      plot_confusion(res.overall, (out_dir / "confusion.png").string());
      if (!plot_dataset.empty()) {
        const Dataset ds = Dataset::load(resolve_out(plot_dataset));
        plot_fusion_panels(ds, default_rig(), {}, 4, (out_dir / "fusion_panels.png").string());
      }
      std::cout << "plots written to " << out_dir.string() << "\n";
    } else if (inspect->parsed()) {
      if (ins_dataset.empty() && ins_checkpoint.empty() && ins_record.empty())
        throw CLI::ValidationError("inspect needs --dataset, --checkpoint, or --record");
      if (!ins_dataset.empty()) {
        const Dataset ds = Dataset::load(resolve_out(ins_dataset));
        const DatasetManifest& m = ds.manifest();
        std::cout << "dataset " << ds.root() << ": " << m.cases.size() << " cases, "
                  << m.frames_per_case << " frames/case, image " << m.image_size << "x"
                  << m.image_size << ", seed " << m.seed << "\n";
        int with_pressure = 0;
        for (const ManifestCase& c : m.cases) with_pressure += c.pressure_available ? 1 : 0;
        std::cout << "pressure available for " << with_pressure << "/" << m.cases.size()
                  << " cases (limit " << m.pressure_limit << " cm)\n";
      }
      if (!ins_checkpoint.empty()) {
        auto net = FusionNet::load_checkpoint(resolve_out(ins_checkpoint));
        std::cout << "checkpoint: " << net->param_count() << " params, " << net->flop_count()
                  << " FLOPs/sample\n";
      }
      if (!ins_record.empty()) {
        const EvalResult res = read_eval_record(resolve_out(ins_record));
        std::cout << format_eval_report(res.overall);
      }
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
