#include <numeric>

#include "doctest.h"
#include "invmih/iir.hpp"
#include "invmih/latent.hpp"

using namespace invmih;

namespace {

SubnetConfig small_cfg() {
  SubnetConfig c;
  c.n_layers = 2;
  c.growth_channels = 8;
  return c;
}

template <typename T>
void perturb(const IIRModel<T>& model, uint64_t seed) {
  perturb_parameters(model.parameters(), seed, 0.01);
}

std::vector<Var<float>> random_secrets(int count, Shape s, uint64_t seed) {
  std::vector<Var<float>> out;
  for (int k = 0; k < count; ++k) out.emplace_back(rand_uniform<float>(s, seed + static_cast<uint64_t>(k)));
  return out;
}

}  // namespace

TEST_CASE("zero-initialized IIR is D on the way down and D^-1 on the way up") {
  IIRModel<float> model(2, 2, 3, 8, SubnetConfig{}, 1);
  const Var<float> x(rand_uniform<float>(Shape{1, 3, 32, 32}, 2));
  const auto out = model.downscale(x);
  const SubbandPair<float> d = decompose_D(x.value(), MosaicLayout::for_image(2, 2, 32, 32));
  CHECK(max_abs_diff(out.tile.value(), d.low) == 0.0);
  CHECK(max_abs_diff(out.r_high.value(), d.high) == 0.0);

  // z = 0: a detail-free upscale.
  const Var<float> z(Tensor<float>(model.latent_shape(out.tile.shape())));
  const Var<float> up = model.upscale(out.tile, z);
  SubbandPair<float> lowonly{d.low, Tensor<float>(d.high.shape())};
  CHECK(max_abs_diff(up.value(), compose_Dinv(lowonly, MosaicLayout::for_image(2, 2, 32, 32))) == 0.0);
}

TEST_CASE("IIR shapes for a 256x256 secret at 2x2") {
  IIRModel<float> model(2, 2, 3, 1, small_cfg(), 1);
  const auto out = model.downscale(Var<float>(rand_uniform<float>(Shape{1, 3, 256, 256}, 1)));
  CHECK(out.tile.shape() == Shape{1, 3, 128, 128});
  CHECK(out.r_high.shape() == Shape{1, 9, 128, 128});
  CHECK(model.upscale(out.tile, out.r_high).shape() == Shape{1, 3, 256, 256});
}

TEST_CASE("IIR upscale with the true residual recovers the secret on every layout") {
  for (int m = 1; m <= 4; ++m) {
    for (int n = 1; n <= 4; ++n) {
      CAPTURE(m);
      CAPTURE(n);
      IIRModel<float> model(m, n, 3, 8, small_cfg(), static_cast<uint64_t>(m * 10 + n));
      perturb(model, 99);
      const Var<float> x(rand_uniform<float>(Shape{2, 3, 4 * m, 4 * n}, 3));
      const auto out = model.downscale(x);
      CHECK(out.tile.shape() == Shape{2, 3, 4, 4});
      const Var<float> back = model.upscale(out.tile, out.r_high);
      CHECK(max_abs_diff(back.value(), x.value()) < 1e-4);
    }
  }
}

TEST_CASE("IIR round trip for 1, 8 and 16 blocks") {
  for (int blocks : {1, 8, 16}) {
    CAPTURE(blocks);
    IIRModel<float> model(3, 3, 3, blocks, small_cfg(), 5);
    perturb(model, 6);
    const Var<float> x(rand_uniform<float>(Shape{1, 3, 24, 24}, 4));
    const auto out = model.downscale(x);
    CHECK(max_abs_diff(model.upscale(out.tile, out.r_high).value(), x.value()) < 1e-4);
  }
}

TEST_CASE("a 1x1 grid has no high branch and no parameters") {
  IIRModel<float> model(1, 1, 3, 8, SubnetConfig{}, 1);
  CHECK(model.num_params() == 0);
  const Var<float> x(rand_uniform<float>(Shape{1, 3, 8, 8}, 1));
  const auto out = model.downscale(x);
  CHECK(max_abs_diff(out.tile.value(), x.value()) == 0.0);
  CHECK_FALSE(out.r_high);
}

TEST_CASE("latent sampling: seeded, zeros mode, standard normal moments") {
  const Shape s{1, 9, 16, 16};
  CHECK(max_abs_diff(sample_latent<float>(s, 5), sample_latent<float>(s, 5)) == 0.0);
  CHECK(max_abs_diff(sample_latent<float>(s, 5), sample_latent<float>(s, 6)) > 0.0);
  CHECK(max_abs(sample_latent<float>(s, 5, LatentMode::kZeros)) == 0.0);

  const Tensor<double> big = sample_latent<double>(Shape{1, 1, 1000, 1000}, 11);
  const double mean = std::accumulate(big.values().begin(), big.values().end(), 0.0) / 1e6;
  double var = 0.0;
  for (double v : big.values()) var += (v - mean) * (v - mean);
  var /= 1e6;
  CHECK(mean > -0.005);
  CHECK(mean < 0.005);
  CHECK(var > 0.99);
  CHECK(var < 1.01);
}

TEST_CASE("downscale_all builds the mosaic at cover size") {
  SUBCASE("N=4") {
    IIRModel<float> model(2, 2, 3, 1, small_cfg(), 1);
    const auto secrets = random_secrets(4, Shape{1, 3, 256, 256}, 1);
    const auto mo = model.downscale_all(secrets);
    CHECK(mo.msi.shape() == Shape{1, 3, 256, 256});
    CHECK(mo.r_list.size() == 4);
    CHECK(mo.r_list[0].shape() == Shape{1, 9, 128, 128});
  }
  SUBCASE("N=16") {
    IIRModel<float> model(4, 4, 3, 1, small_cfg(), 1);
    const auto secrets = random_secrets(16, Shape{1, 3, 256, 256}, 1);
    const auto mo = model.downscale_all(secrets);
    CHECK(mo.msi.shape() == Shape{1, 3, 256, 256});
    CHECK(mo.r_list[15].shape() == Shape{1, 45, 64, 64});
  }
}

TEST_CASE("downscale_all then upscale_all with true residuals recovers every secret") {
  for (auto [m, n] : {std::pair{2, 2}, {2, 3}, {3, 3}}) {
    IIRModel<float> model(m, n, 3, 4, small_cfg(), 7);
    perturb(model, 8);
    const auto secrets = random_secrets(m * n, Shape{2, 3, 12 * m, 12 * n}, 20);
    const auto mo = model.downscale_all(secrets);
    const auto back = model.upscale_all(mo.msi, mo.r_list);
    REQUIRE(back.size() == secrets.size());
    for (size_t k = 0; k < back.size(); ++k) CHECK(max_abs_diff(back[k].value(), secrets[k].value()) < 1e-4);
    // Sampled residuals: same tile count and shape, deterministic in the seed.
    const auto s1 = model.upscale_all(mo.msi, 3);
    const auto s2 = model.upscale_all(mo.msi, 3);
    CHECK(s1.size() == secrets.size());
    CHECK(s1[0].shape() == secrets[0].shape());
    CHECK(max_abs_diff(s1.back().value(), s2.back().value()) == 0.0);
  }
}

TEST_CASE("shared weights: permuting secrets permutes tiles identically") {
  IIRModel<float> model(2, 2, 3, 2, small_cfg(), 7);
  perturb(model, 8);
  const auto secrets = random_secrets(4, Shape{1, 3, 16, 16}, 30);
  const std::vector<Var<float>> permuted = {secrets[2], secrets[0], secrets[3], secrets[1]};
  const MosaicLayout layout = MosaicLayout::for_image(2, 2, 16, 16);
  const auto a = unsplice_mosaic(model.downscale_all(secrets).msi.value(), layout);
  const auto b = unsplice_mosaic(model.downscale_all(permuted).msi.value(), layout);
  CHECK(max_abs_diff(b[0], a[2]) == 0.0);
  CHECK(max_abs_diff(b[1], a[0]) == 0.0);
  CHECK(max_abs_diff(b[2], a[3]) == 0.0);
  CHECK(max_abs_diff(b[3], a[1]) == 0.0);
}

TEST_CASE("IIR rejects count and shape mismatches") {
  IIRModel<float> model(2, 2, 3, 1, small_cfg(), 1);
  CHECK_THROWS_AS(model.downscale_all(random_secrets(3, Shape{1, 3, 16, 16}, 1)), ShapeError);
  auto mixed = random_secrets(4, Shape{1, 3, 16, 16}, 1);
  mixed[1] = Var<float>(Tensor<float>(Shape{1, 3, 16, 20}));
  CHECK_THROWS_AS(model.downscale_all(mixed), ShapeError);
  CHECK_THROWS_AS(model.downscale(Var<float>(Tensor<float>(Shape{1, 3, 15, 16}))), ShapeError);
  const Var<float> tile(Tensor<float>(Shape{1, 3, 8, 8}));
  CHECK_THROWS_AS(model.upscale(tile, Var<float>(Tensor<float>(Shape{1, 6, 8, 8}))), ShapeError);
  CHECK_THROWS_AS(model.upscale_all(Var<float>(Tensor<float>(Shape{1, 3, 15, 16})), 1), ShapeError);
}
