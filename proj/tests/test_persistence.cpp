#include <png.h>

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "invmih/checkpoint.hpp"
#include "invmih/cli.hpp"
#include "invmih/config.hpp"
#include "invmih/eval.hpp"
#include "invmih/session.hpp"
#include "support/synthetic.hpp"

using namespace invmih;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig tiny_run(int secrets = 4) {
  RunConfig cfg;
  const auto [rows, cols] = grid_for_count(secrets);
  cfg.model.rows = rows;
  cfg.model.cols = cols;
  cfg.model.iir_blocks = 1;
  cfg.model.iih_blocks = 1;
  cfg.model.subnet.n_layers = 2;
  cfg.model.subnet.growth_channels = 4;
  cfg.model.init_seed = 8;
  cfg.stage = "joint";
  cfg.joint_iterations = 2;
  cfg.train.batch_size = 1;
  cfg.train.patch_size = 16;
  cfg.train.histogram_bins = 16;
  cfg.train.seed = 3;
  cfg.train.deterministic = true;
  return cfg;
}

const char* const kTinyOverrides[] = {"stage=joint",        "joint_iterations=2", "iir_blocks=1",
                                      "iih_blocks=1",       "subnet_layers=2",    "growth_channels=4",
                                      "batch_size=1",       "patch_size=16",      "histogram_bins=16",
                                      "deterministic=true", "checkpoint_interval=1"};

cli::TrainArgs tiny_args(const fs::path& data, const fs::path& out) {
  cli::TrainArgs a;
  a.dataset = data;
  a.out_dir = out;
  a.seed = 5;
  a.log_every = 0;
  for (const char* kv : kTinyOverrides) a.overrides.emplace_back(kv);
  return a;
}

void write_rgba(const fs::path& p) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = 4;
  img.height = 4;
  img.format = PNG_FORMAT_RGBA;
  std::vector<uint8_t> px(4 * 4 * 4, 200);
  REQUIRE(png_image_write_to_file(&img, p.c_str(), 0, px.data(), 0, nullptr) != 0);
}

}  // namespace

TEST_CASE("PNG round trip is bit-exact; alpha and garbage are rejected") {
  testing::ScratchDir dir("png");
  const Image8 a = testing::synthetic_image(37, 21, 4);
  write_png(dir / "a.png", a);
  const Image8 b = read_png(dir / "a.png");
  CHECK(b.width == 37);
  CHECK(b.height == 21);
  CHECK(b.rgb == a.rgb);
  CHECK(tensor_to_image(image_to_tensor<float>(a)).rgb == a.rgb);

  write_rgba(dir / "rgba.png");
  CHECK_THROWS_AS(read_png(dir / "rgba.png"), ImageError);
  std::ofstream(dir / "bad.png") << "nope";
  CHECK_THROWS_AS(read_png(dir / "bad.png"), ImageError);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), ImageError);
}

TEST_CASE("checkpoint round trip restores parameters, config, iteration and stream state") {
  testing::ScratchDir dir("ckpt");
  const RunConfig cfg = tiny_run();
  InvMIHNet<float> net(cfg.model);
  perturb_parameters(net.parameters(), 1, 0.05);
  Checkpoint ck = make_checkpoint(cfg, net);
  ck.iteration = 17;
  ck.stage = "joint";
  std::mt19937_64 rng(99);
  rng.discard(5);
  std::ostringstream state;
  state << rng;
  ck.rng_state = state.str();
  save_checkpoint(dir / "c.ckpt", ck);

  const Checkpoint back = load_checkpoint(dir / "c.ckpt");
  CHECK(back.config == ck.config);
  CHECK(back.iteration == 17);
  CHECK(back.stage == "joint");
  CHECK(back.rng_state == ck.rng_state);
  CHECK(render_run_config(checkpoint_config(back)) == render_run_config(cfg));
  const InvMIHNet<float> restored = model_from_checkpoint<float>(back);
  const auto p0 = net.parameters();
  const auto p1 = restored.parameters();
  REQUIRE(p0.size() == p1.size());
  for (size_t i = 0; i < p0.size(); ++i) CHECK(max_abs_diff(p0[i].var.value(), p1[i].var.value()) == 0.0);
}

TEST_CASE("checkpoint errors carry distinct codes") {
  testing::ScratchDir dir("ckpt_err");
  const RunConfig cfg = tiny_run();
  const InvMIHNet<float> net(cfg.model);
  save_checkpoint(dir / "c.ckpt", make_checkpoint(cfg, net));
  const std::string bytes = slurp(dir / "c.ckpt");

  const auto code_of = [](const fs::path& p) {
    try {
      load_checkpoint(p);
    } catch (const CheckpointError& e) {
      return e.code();
    }
    return CheckpointErrc{};
  };
  std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK(code_of(dir / "trunc.ckpt") == CheckpointErrc::kChecksum);

  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  std::ofstream(dir / "flip.ckpt", std::ios::binary) << flipped;
  CHECK(code_of(dir / "flip.ckpt") == CheckpointErrc::kChecksum);

  std::string version = bytes;
  version[8] = 7;
  std::ofstream(dir / "ver.ckpt", std::ios::binary) << version;
  CHECK(code_of(dir / "ver.ckpt") == CheckpointErrc::kVersion);

  std::ofstream(dir / "junk.ckpt", std::ios::binary) << "definitely not a checkpoint";
  CHECK(code_of(dir / "junk.ckpt") == CheckpointErrc::kFormat);
  CHECK(code_of(dir / "absent.ckpt") == CheckpointErrc::kIo);

  const Checkpoint ck = load_checkpoint(dir / "c.ckpt");
  CHECK_THROWS_WITH_AS(model_from_checkpoint<float>(ck, 16), doctest::Contains("layout"), CheckpointError);
  try {
    model_from_checkpoint<float>(ck, 16);
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointErrc::kLayout);
  }

  // A block whose shape disagrees with the model.
  Checkpoint bad = ck;
  bad.blocks.front().shape.back() += 1;
  bad.blocks.front().data.resize(bad.blocks.front().data.size() + 1);
  try {
    model_from_checkpoint<float>(bad);
    FAIL("expected a shape error");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointErrc::kShape);
  }
  Checkpoint missing = ck;
  missing.blocks.pop_back();
  try {
    model_from_checkpoint<float>(missing);
    FAIL("expected a missing-block error");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointErrc::kMissing);
  }
}

TEST_CASE("run config: render/parse round trip, defaults, errors with line numbers") {
  RunConfig cfg = tiny_run(6);
  cfg.train.base_lr = 1.2345678901234567e-4;
  cfg.train.loss_weights.lambda2 = 3.5;
  cfg.train.latent_mode = LatentMode::kZeros;
  const RunConfig back = parse_run_config(render_run_config(cfg));
  CHECK(render_run_config(back) == render_run_config(cfg));
  CHECK(back.train.base_lr == cfg.train.base_lr);
  CHECK(back.model == cfg.model);

  const RunConfig defaults = parse_run_config("# nothing but a comment\n\n");
  CHECK(defaults.model.rows == 2);
  CHECK(defaults.train.patch_size == 144);
  CHECK(defaults.iir_warmup_iterations == 30000);
  CHECK(defaults.train.loss_weights.lambda3 == 5.0);

  try {
    parse_run_config("seed = 1\n# ok\nbogus_key = 3\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config("batch_size = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("this line has no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("patch_size = 18\n").validate(), ConfigError);

  const RunConfig nine = parse_run_config("num_secrets = 9\n");
  CHECK(nine.model.rows == 3);
  CHECK(nine.model.cols == 3);
  CHECK_THROWS_AS(parse_run_config("num_secrets = 8\ngrid_rows = 3\ngrid_cols = 3\n"), ConfigError);
  CHECK(run_config_keys().size() > 20);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted loss curve") {
  testing::ScratchDir dir("resume");
  testing::write_synthetic_dataset(dir / "data", 8, 24, 9);
  const ImageDataset data(dir / "data");
  RunConfig cfg = tiny_run();
  cfg.joint_iterations = 5;

  std::vector<double> full;
  {
    InvMIHNet<float> net(cfg.model);
    Trainer<float> t(net, cfg.train_config(Stage::kJoint), data);
    t.run([&](const IterationRecord& r) { full.push_back(r.loss.total); });
  }

  std::vector<double> pieced;
  {
    InvMIHNet<float> net(cfg.model);
    Trainer<float> t(net, cfg.train_config(Stage::kJoint), data);
    for (int i = 0; i < 2; ++i) pieced.push_back(t.step().loss.total);
    save_checkpoint(dir / "mid.ckpt", make_checkpoint(cfg, t));
  }
  {
    const Checkpoint ck = load_checkpoint(dir / "mid.ckpt");
    CHECK(ck.iteration == 2);
    InvMIHNet<float> net = model_from_checkpoint<float>(ck);
    Trainer<float> t(net, checkpoint_config(ck).train_config(Stage::kJoint), data);
    resume_trainer(t, ck);
    t.run([&](const IterationRecord& r) { pieced.push_back(r.loss.total); });
  }
  CHECK(full.size() == 5);
  CHECK(pieced == full);
}

TEST_CASE("CLI: train, conceal, reveal, evaluate, plot") {
  testing::ScratchDir dir("cli");
  testing::write_synthetic_dataset(dir / "data", 10, 32, 2);
  std::ostringstream out, err;

  // Malformed config names the line.
  std::ofstream(dir / "bad.cfg") << "seed = 1\nnot_a_key = 2\n";
  cli::TrainArgs bad = tiny_args(dir / "data", dir / "bad_run");
  bad.config = dir / "bad.cfg";
  CHECK(cli::cmd_train(bad, out, err) == cli::kUsage);
  CHECK(err.str().find("line 2") != std::string::npos);

  CHECK(cli::cmd_train(tiny_args(dir / "empty", dir / "run0"), out, err) == cli::kData);

  REQUIRE(cli::cmd_train(tiny_args(dir / "data", dir / "run"), out, err) == cli::kOk);
  CHECK(fs::exists(dir / "run" / "checkpoint.ckpt"));
  CHECK(fs::exists(dir / "run" / "config.txt"));
  CHECK(slurp(dir / "run" / "metrics.jsonl").find("\"total\"") != std::string::npos);
  CHECK(out.str().find("effective config") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "run" / ".invmih.lock"));

  // A held lock fails fast.
  std::ofstream(dir / "run" / ".invmih.lock") << "1";
  CHECK(cli::cmd_train(tiny_args(dir / "data", dir / "run"), out, err) == cli::kBusy);
  fs::remove(dir / "run" / ".invmih.lock");

  // Resuming a finished run is a no-op that keeps the checkpoint valid.
  cli::TrainArgs again;
  again.dataset = dir / "data";
  again.out_dir = dir / "run";
  again.resume = dir / "run" / "checkpoint.ckpt";
  again.log_every = 0;
  CHECK(cli::cmd_train(again, out, err) == cli::kOk);

  const fs::path ckpt = dir / "run" / "checkpoint.ckpt";
  const fs::path d = dir / "data";
  std::vector<fs::path> secrets{d / "img_001.png", d / "img_002.png", d / "img_003.png", d / "img_004.png"};
  CHECK(cli::cmd_conceal(ckpt, d / "img_000.png", secrets, dir / "stego.png", 0, out, err) == cli::kOk);
  CHECK(read_png(dir / "stego.png").width == 32);

  err.str("");
  CHECK(cli::cmd_conceal(ckpt, d / "img_000.png", {secrets.begin(), secrets.begin() + 3}, dir / "s3.png", 0, out,
                         err) == cli::kUsage);
  CHECK(err.str().find("expected 4 secret images") != std::string::npos);
  std::ofstream(dir / "broken.png") << "x";
  CHECK(cli::cmd_conceal(ckpt, dir / "broken.png", secrets, dir / "s4.png", 0, out, err) == cli::kData);
  write_png(dir / "odd.png", testing::synthetic_image(30, 30, 1));
  CHECK(cli::cmd_reveal(ckpt, dir / "odd.png", dir / "rx", 1, {}, out, err) == cli::kUsage);

  CHECK(cli::cmd_reveal(ckpt, dir / "stego.png", dir / "r1", 4, secrets, out, err) == cli::kOk);
  CHECK(cli::cmd_reveal(ckpt, dir / "stego.png", dir / "r2", 4, {}, out, err) == cli::kOk);
  for (const char* name : {"recovered_00.png", "recovered_01.png", "recovered_02.png", "recovered_03.png"}) {
    CAPTURE(name);
    CHECK(slurp(dir / "r1" / name) == slurp(dir / "r2" / name));
    CHECK(read_png(dir / "r1" / name).width == 32);
  }
  CHECK(out.str().find("mean secret/recovery PSNR") != std::string::npos);

  CHECK(cli::cmd_evaluate(ckpt, d, dir / "rep1.json", 7, 0, out, err) == cli::kOk);
  CHECK(cli::cmd_evaluate(ckpt, d, dir / "rep2.json", 7, 0, out, err) == cli::kOk);
  CHECK(slurp(dir / "rep1.json") == slurp(dir / "rep2.json"));
  fs::create_directories(dir / "nothing");
  CHECK(cli::cmd_evaluate(ckpt, dir / "nothing", dir / "rep3.json", 7, 0, out, err) == cli::kData);

  err.str("");
  CHECK(cli::cmd_plot({dir / "rep1.json"}, dir / "one.svg", out, err) == cli::kOk);
  CHECK(cli::cmd_plot({dir / "rep1.json", dir / "rep2.json"}, dir / "two.svg", out, err) == cli::kOk);
  CHECK(err.str().find("warning") != std::string::npos);
  CHECK(slurp(dir / "two.svg").find("<svg") != std::string::npos);
  CHECK(fs::exists(dir / "two.tsv"));
  CHECK(cli::cmd_plot({dir / "missing.json"}, dir / "m.svg", out, err) == cli::kUsage);
}

TEST_CASE("CLI argument parsing and environment fallbacks") {
  std::ostringstream out, err;
  const char* none[] = {"invmih"};
  CHECK(cli::run(1, none, out, err) == cli::kUsage);
  const char* missing[] = {"invmih", "reveal", "--stego", "x.png"};
  CHECK(cli::run(4, missing, out, err) == cli::kUsage);
  const char* help[] = {"invmih", "--help"};
  CHECK(cli::run(2, help, out, err) == cli::kOk);
  CHECK(out.str().find("conceal") != std::string::npos);

  testing::ScratchDir dir("env");
  setenv("INVMIH_OUT", (dir / "fig.svg").c_str(), 1);
  const char* plot[] = {"invmih", "plot", "no_such_report.json"};
  CHECK(cli::run(3, plot, out, err) == cli::kUsage);
  CHECK(err.str().find("no_such_report") != std::string::npos);
  unsetenv("INVMIH_OUT");
}
