#include "invmih/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "invmih/dataset.hpp"
#include "invmih/eval.hpp"
#include "invmih/image_io.hpp"
#include "invmih/metrics.hpp"
#include "invmih/plot.hpp"
#include "invmih/session.hpp"

namespace invmih::cli {

namespace fs = std::filesystem;

namespace {

// Advisory lock on an output directory; creation fails if the file exists.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".invmih.lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) return;
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd, pid.data(), pid.size()) < 0) {
      // The lock is the file's existence; the pid is informational.
    }
    ::close(fd);
    held_ = true;
  }
  ~DirLock() {
    if (held_) {
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

  bool held() const { return held_; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  bool held_ = false;
};

int checkpoint_exit(const CheckpointError& e) { return e.code() == CheckpointErrc::kLayout ? kUsage : kData; }

std::string db(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string ssim_or_na(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape().h < 11 || a.shape().w < 11) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << ssim(a, b);
  return os.str();
}

bool compatible(const ModelConfig& mc, int64_t w, int64_t h) {
  return h % (2 * mc.rows) == 0 && w % (2 * mc.cols) == 0;
}

std::string geometry_hint(const ModelConfig& mc) {
  return "height must be a multiple of " + std::to_string(2 * mc.rows) + " and width a multiple of " +
         std::to_string(2 * mc.cols);
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  Checkpoint resume;
  const bool resuming = !args.resume.empty();
  try {
    if (resuming) {
      resume = load_checkpoint(args.resume);
      cfg = checkpoint_config(resume);
      if (!args.config.empty()) err << "warning: resuming; " << args.config << " is ignored in favor of the checkpoint's config\n";
      if (!args.overrides.empty()) throw ConfigError(0, "overrides cannot be combined with resuming");
      if (args.seed && *args.seed != cfg.train.seed) throw ConfigError(0, "--seed differs from the checkpoint's seed");
    } else {
      if (!args.config.empty()) cfg = load_run_config(args.config);
      for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError(0, "override '" + kv + "' is not key=value");
        auto trim = [](std::string s) {
          s.erase(0, s.find_first_not_of(" \t"));
          s.erase(s.find_last_not_of(" \t") + 1);
          return s;
        };
        apply_run_config_value(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
      }
      if (args.seed) cfg.train.seed = *args.seed;
    }
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckpointError& e) {
    err << "checkpoint error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return kData;
  }

  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  if (ec) {
    err << "cannot create " << args.out_dir << ": " << ec.message() << "\n";
    return kData;
  }
  DirLock lock(args.out_dir);
  if (!lock.held()) {
    err << "output directory is in use (lock file " << lock.path() << "); remove it if no other run is active\n";
    return kBusy;
  }

  const std::string rendered = render_run_config(cfg);
  out << "effective config:\n" << rendered << std::flush;
  std::ofstream(args.out_dir / "config.txt") << rendered;

  std::unique_ptr<ImageDataset> data;
  try {
    data = std::make_unique<ImageDataset>(args.dataset, cfg.train.patch_size);
    for (const auto& w : data->warnings()) err << "warning: " << w << "\n";
    const size_t need = static_cast<size_t>(cfg.model.num_secrets()) + 1;
    if (data->size() < need) {
      throw DataError(std::to_string(data->size()) + " usable images, need at least " + std::to_string(need));
    }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }

  const fs::path ckpt_path = args.out_dir / "checkpoint.ckpt";
  try {
    InvMIHNet<float> net = resuming ? model_from_checkpoint<float>(resume) : InvMIHNet<float>(cfg.model);
    std::ofstream metrics(args.out_dir / "metrics.jsonl", resuming ? std::ios::app : std::ios::trunc);
    if (!resuming) save_checkpoint(ckpt_path, make_checkpoint(cfg, net));

    const std::vector<Stage> stages = cfg.stages();
    size_t first = 0;
    if (resuming && !resume.stage.empty()) {
      const Stage s = stage_from_string(resume.stage);
      const auto it = std::find(stages.begin(), stages.end(), s);
      if (it == stages.end()) {
        err << "config error: checkpoint stage " << resume.stage << " is not part of this run\n";
        return kUsage;
      }
      first = static_cast<size_t>(it - stages.begin());
    }
    for (size_t si = first; si < stages.size(); ++si) {
      Trainer<float> trainer(net, cfg.train_config(stages[si]), *data);
      if (resuming && si == first && !resume.stage.empty()) resume_trainer(trainer, resume);
      out << "stage " << to_string(stages[si]) << ": iterations " << trainer.iteration() << ".."
          << trainer.config().iterations << "\n";
      try {
        trainer.run(
            [&](const IterationRecord& r) {
              metrics << to_json_line(r) << "\n";
              metrics.flush();
              if (args.log_every > 0 &&
                  (r.iteration % args.log_every == 0 || r.iteration + 1 == trainer.config().iterations)) {
                out << to_string(r.stage) << " it " << r.iteration << " total " << r.loss.total << " psnr "
                    << db(r.psnr_cover_stego) << "\n";
              }
            },
            [&](Trainer<float>& t) { save_checkpoint(ckpt_path, make_checkpoint(cfg, t)); });
      } catch (const NumericError& e) {
        err << "numeric failure in stage " << to_string(stages[si]) << " at iteration " << trainer.iteration()
            << ": " << e.what() << "\nlast good checkpoint: " << ckpt_path << "\n";
        return kNumeric;
      }
      save_checkpoint(ckpt_path, make_checkpoint(cfg, trainer));
    }
  } catch (const CheckpointError& e) {
    err << "checkpoint error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return checkpoint_exit(e);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }
  out << "checkpoint: " << ckpt_path.string() << "\n";
  return kOk;
}

int cmd_conceal(const fs::path& checkpoint, const fs::path& cover_path, const std::vector<fs::path>& secret_paths,
                const fs::path& stego_out, uint64_t /*seed: concealment draws no latents*/, std::ostream& out,
                std::ostream& err) {
  try {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    const ModelConfig stored = checkpoint_config(ckpt).model;
    if (secret_paths.size() != static_cast<size_t>(stored.num_secrets())) {
      err << "expected " << stored.num_secrets() << " secret images for the checkpoint's " << stored.rows << "x"
          << stored.cols << " layout, got " << secret_paths.size() << "\n";
      return kUsage;
    }
    const InvMIHNet<float> net = model_from_checkpoint<float>(ckpt, static_cast<int>(secret_paths.size()));
    const ModelConfig& mc = net.config();

    const Image8 cover_img = read_png(cover_path);
    if (!compatible(mc, cover_img.width, cover_img.height)) {
      err << "cover is " << cover_img.width << "x" << cover_img.height << "; " << geometry_hint(mc) << "\n";
      return kUsage;
    }
    std::vector<Tensor<float>> secrets;
    for (const auto& p : secret_paths) {
      const Image8 s = read_png(p);
      if (s.width != cover_img.width || s.height != cover_img.height) {
        err << p << " is " << s.width << "x" << s.height << "; secrets must match the cover size "
            << cover_img.width << "x" << cover_img.height << "\n";
        return kUsage;
      }
      secrets.push_back(image_to_tensor<float>(s));
    }
    const Tensor<float> cover = image_to_tensor<float>(cover_img);
    const Concealed<float> c = net.conceal(cover, secrets);
    write_png(stego_out, tensor_to_image(c.stego));
    out << "stego: " << stego_out.string() << " (" << cover_img.width << "x" << cover_img.height << ", N="
        << mc.num_secrets() << ", tiles " << cover_img.width / mc.cols << "x" << cover_img.height / mc.rows
        << ")\ncover/stego PSNR " << db(psnr(cover, c.stego)) << " dB, SSIM " << ssim_or_na(cover, c.stego) << "\n";
  } catch (const CheckpointError& e) {
    err << "checkpoint error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return checkpoint_exit(e);
  } catch (const ImageError& e) {
    err << "image error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}

int cmd_reveal(const fs::path& checkpoint, const fs::path& stego_path, const fs::path& out_dir, uint64_t seed,
               const std::vector<fs::path>& references, std::ostream& out, std::ostream& err) {
  try {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    const InvMIHNet<float> net = model_from_checkpoint<float>(ckpt);
    const ModelConfig& mc = net.config();
    const Image8 stego_img = read_png(stego_path);
    if (!compatible(mc, stego_img.width, stego_img.height)) {
      err << "stego is " << stego_img.width << "x" << stego_img.height << "; " << geometry_hint(mc) << "\n";
      return kUsage;
    }
    if (!references.empty() && references.size() != static_cast<size_t>(mc.num_secrets())) {
      err << "expected " << mc.num_secrets() << " reference secrets, got " << references.size() << "\n";
      return kUsage;
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
      err << "cannot create " << out_dir << ": " << ec.message() << "\n";
      return kData;
    }
    DirLock lock(out_dir);
    if (!lock.held()) {
      err << "output directory is in use (lock file " << lock.path() << ")\n";
      return kBusy;
    }
    const Revealed<float> r = net.reveal(image_to_tensor<float>(stego_img), seed);
    double psnr_sum = 0.0;
    for (size_t k = 0; k < r.secrets.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "recovered_%02zu.png", k);
      const Image8 rec = tensor_to_image(r.secrets[k]);
      write_png(out_dir / name, rec);
      out << (out_dir / name).string();
      if (!references.empty()) {
        const Tensor<float> ref = image_to_tensor<float>(read_png(references[k]));
        if (ref.shape() != r.secrets[k].shape()) {
          err << references[k] << " does not match the recovered size\n";
          return kUsage;
        }
        const Tensor<float> got = image_to_tensor<float>(rec);
        const double p = psnr(ref, got);
        psnr_sum += p;
        out << "  PSNR " << db(p) << " dB, SSIM " << ssim_or_na(ref, got);
      }
      out << "\n";
    }
    if (!references.empty()) {
      out << "mean secret/recovery PSNR " << db(psnr_sum / static_cast<double>(r.secrets.size())) << " dB\n";
    }
  } catch (const CheckpointError& e) {
    err << "checkpoint error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return checkpoint_exit(e);
  } catch (const ImageError& e) {
    err << "image error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& dataset, const fs::path& report_out, uint64_t seed,
                 int64_t max_sets, std::ostream& out, std::ostream& err) {
  try {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    const InvMIHNet<float> net = model_from_checkpoint<float>(ckpt);
    EvalOptions opts;
    opts.max_sets = max_sets;
    const EvalReport report = evaluate(net, dataset, seed, opts);
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";
    std::ofstream f(report_out);
    if (!f) {
      err << "cannot write " << report_out << "\n";
      return kData;
    }
    f << report_to_json(report).dump(2) << "\n";
    out << render_report_table(report);
  } catch (const CheckpointError& e) {
    err << "checkpoint error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return checkpoint_exit(e);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}

int cmd_plot(const std::vector<fs::path>& reports, const fs::path& figure_out, std::ostream& out,
             std::ostream& err) {
  if (reports.empty()) {
    err << "plot needs at least one report\n";
    return kUsage;
  }
  std::vector<SweepPoint> points;
  for (const auto& p : reports) {
    try {
      std::ifstream in(p);
      if (!in) throw std::runtime_error("cannot open file");
      points.push_back({report_from_json(nlohmann::json::parse(in)), p.string()});
    } catch (const std::exception& e) {
      err << "unreadable report " << p << ": " << e.what() << "\n";
      return kUsage;
    }
  }
  std::vector<std::string> warnings;
  const auto merged = merge_by_secret_count(points, warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  fs::path table = figure_out;
  table.replace_extension(".tsv");
  std::ofstream fig(figure_out), tab(table);
  if (!fig || !tab) {
    err << "cannot write " << figure_out << " or " << table << "\n";
    return kData;
  }
  fig << render_sweep_svg(merged);
  const std::string text = render_sweep_table(merged);
  tab << text;
  out << text << "figure: " << figure_out.string() << "\ntable: " << table.string() << "\n";
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Invertible multi-image hiding: train, conceal, reveal, evaluate, plot"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  std::string config, checkpoint, out_path, data;
  uint64_t seed = 0;
  std::optional<uint64_t> train_seed;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", config, "Run configuration (key = value)")->envname("INVMIH_CONFIG");
    sub->add_option("--checkpoint", checkpoint, "Checkpoint file")->envname("INVMIH_CHECKPOINT");
    sub->add_option("--out", out_path, "Output path")->envname("INVMIH_OUT")->required();
  };

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "Run the configured training stages");
  add_common(train, true);
  train->add_option("--data", data, "Training image directory")->envname("INVMIH_DATA")->required();
  train->add_option("--seed", train_seed, "Training seed (overrides the config)")->envname("INVMIH_SEED");
  train->add_option("--set", targs.overrides, "Config override key=value (repeatable)");
  train->add_option("--log-every", targs.log_every, "Progress line interval (0 = silent)");

  std::string cover;
  std::vector<std::string> secrets, references;
  auto* conceal = app.add_subcommand("conceal", "Hide N secret images in a cover image");
  add_common(conceal, false);
  conceal->add_option("--cover", cover, "Cover PNG")->required();
  conceal->add_option("secrets", secrets, "Secret PNGs in row-major tile order")->required();
  conceal->add_option("--seed", seed, "Seed")->envname("INVMIH_SEED");

  std::string stego;
  auto* reveal = app.add_subcommand("reveal", "Recover the secret images from a stego image");
  add_common(reveal, false);
  reveal->add_option("--stego", stego, "Stego PNG")->required();
  reveal->add_option("--seed", seed, "Latent seed")->envname("INVMIH_SEED");
  reveal->add_option("--reference", references, "Original secrets, for reporting recovery fidelity");

  int64_t max_sets = 0;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on an image directory");
  add_common(evaluate_cmd, false);
  evaluate_cmd->add_option("--data", data, "Test image directory")->envname("INVMIH_DATA")->required();
  evaluate_cmd->add_option("--seed", seed, "Tuple shuffle and latent seed")->envname("INVMIH_SEED");
  evaluate_cmd->add_option("--max-sets", max_sets, "Evaluate at most this many image sets (0 = all)");

  std::vector<std::string> report_files;
  auto* plot = app.add_subcommand("plot", "Plot PSNR/SSIM against the number of secrets");
  plot->add_option("--out", out_path, "Figure path (.svg); the table goes next to it as .tsv")
      ->envname("INVMIH_OUT")
      ->required();
  plot->add_option("reports", report_files, "Evaluation report files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  auto need_checkpoint = [&]() {
    if (checkpoint.empty()) err << "--checkpoint is required\n";
    return !checkpoint.empty();
  };
  const auto as_paths = [](const std::vector<std::string>& v) { return std::vector<fs::path>(v.begin(), v.end()); };

  if (train->parsed()) {
    targs.config = config;
    targs.dataset = data;
    targs.out_dir = out_path;
    targs.seed = train_seed;
    targs.resume = checkpoint;
    return cmd_train(targs, out, err);
  }
  if (conceal->parsed()) {
    if (!need_checkpoint()) return kUsage;
    return cmd_conceal(checkpoint, cover, as_paths(secrets), out_path, seed, out, err);
  }
  if (reveal->parsed()) {
    if (!need_checkpoint()) return kUsage;
    return cmd_reveal(checkpoint, stego, out_path, seed, as_paths(references), out, err);
  }
  if (evaluate_cmd->parsed()) {
    if (!need_checkpoint()) return kUsage;
    return cmd_evaluate(checkpoint, data, out_path, seed, max_sets, out, err);
  }
  return cmd_plot(as_paths(report_files), out_path, out, err);
}

}  // namespace invmih::cli
