#include "doctest.h"
#include "invmih/eval.hpp"
#include "invmih/pipeline.hpp"

using namespace invmih;

namespace {

ModelConfig small_model(int rows, int cols) {
  ModelConfig c;
  c.rows = rows;
  c.cols = cols;
  c.iir_blocks = 2;
  c.iih_blocks = 2;
  c.subnet.n_layers = 2;
  c.subnet.growth_channels = 8;
  c.init_seed = 3;
  return c;
}

std::vector<Tensor<float>> secrets_for(int count, int64_t size) {
  std::vector<Tensor<float>> out;
  for (int k = 0; k < count; ++k)
    out.push_back(quantize(rand_uniform<float>(Shape{1, 3, size, size}, 100 + static_cast<uint64_t>(k))));
  return out;
}

}  // namespace

TEST_CASE("end-to-end conceal/reveal shapes for N in {4, 6, 8, 9, 16}") {
  for (int n : {4, 6, 8, 9, 16}) {
    CAPTURE(n);
    const auto [rows, cols] = grid_for_count(n);
    InvMIHNet<float> net(small_model(rows, cols));
    perturb_parameters(net.parameters(), 7, 0.01);
    const int64_t size = 48;
    const Tensor<float> cover = quantize(rand_uniform<float>(Shape{1, 3, size, size}, 1));
    const auto secrets = secrets_for(n, size);
    const auto c = net.conceal(cover, secrets);
    CHECK(c.stego.shape() == cover.shape());
    CHECK(c.msi.shape() == cover.shape());
    CHECK(max_abs_diff(c.stego, quantize(c.stego)) == 0.0);
    const auto r = net.reveal(c.stego, 9);
    REQUIRE(r.secrets.size() == static_cast<size_t>(n));
    for (const auto& s : r.secrets) CHECK(s.shape() == cover.shape());
    CHECK(r.cover.shape() == cover.shape());
    // Same seed, same output.
    CHECK(max_abs_diff(net.reveal(c.stego, 9).secrets.back(), r.secrets.back()) == 0.0);
  }
}

TEST_CASE("zero-initialized pipeline keeps the cover and reveals nothing") {
  InvMIHNet<float> net(small_model(2, 2));
  const Tensor<float> cover = quantize(rand_uniform<float>(Shape{1, 3, 32, 32}, 1));
  const auto c = net.conceal(cover, secrets_for(4, 32));
  CHECK(max_abs_diff(c.stego, cover) == 0.0);
  const auto r = net.reveal(c.stego, 1, LatentMode::kZeros);
  CHECK(max_abs(r.msi) == 0.0);
  for (const auto& s : r.secrets) CHECK(max_abs(s) == 0.0);
  CHECK(max_abs_diff(r.cover, cover) == 0.0);
}

TEST_CASE("conceal rejects wrong counts and geometry") {
  InvMIHNet<float> net(small_model(2, 2));
  const Tensor<float> cover = quantize(rand_uniform<float>(Shape{1, 3, 32, 32}, 1));
  CHECK_THROWS_AS(net.conceal(cover, secrets_for(3, 32)), ShapeError);
  CHECK_THROWS_AS(net.conceal(cover, secrets_for(4, 24)), ShapeError);
  const Tensor<float> odd = quantize(rand_uniform<float>(Shape{1, 3, 31, 31}, 1));
  CHECK_THROWS_AS(net.conceal(odd, secrets_for(4, 31)), ShapeError);
}

TEST_CASE("parameter counts") {
  ModelConfig def;
  CHECK(InvMIHNet<float>(def).num_params() == 5718192);
  CHECK(count_params(InvMIHNet<float>(def)) == 5718192);

  ModelConfig none = def;
  none.iir_blocks = 0;
  none.iih_blocks = 0;
  CHECK(InvMIHNet<float>(none).num_params() == 0);

  // Only IIR depends on N: its branch widths are C and (mn - 1) C.
  const auto iih_only = [](int rows, int cols) {
    ModelConfig c;
    c.rows = rows;
    c.cols = cols;
    c.iir_blocks = 0;
    return InvMIHNet<float>(c).num_params();
  };
  CHECK(iih_only(2, 2) == iih_only(4, 4));
  CHECK(iih_only(2, 3) == iih_only(3, 3));
}

TEST_CASE("bicubic rescaler has no IIR parameters and still round-trips shapes") {
  ModelConfig c = small_model(2, 2);
  c.rescaler = Rescaler::kBicubic;
  InvMIHNet<float> net(c);
  CHECK(net.iir().num_params() == 0);
  const Tensor<float> cover = quantize(rand_uniform<float>(Shape{1, 3, 32, 32}, 1));
  const auto con = net.conceal(cover, secrets_for(4, 32));
  const auto r = net.reveal(con.stego, 1);
  CHECK(r.secrets.size() == 4);
  CHECK(r.secrets[0].shape() == cover.shape());
}
