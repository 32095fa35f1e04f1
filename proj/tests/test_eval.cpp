#include <cmath>

#include "doctest.h"
#include "invmih/dataset.hpp"
#include "invmih/eval.hpp"
#include "invmih/metrics.hpp"
#include "support/synthetic.hpp"

using namespace invmih;

namespace {

Tensor<double> filled(Shape s, double v) {
  Tensor<double> t(s);
  for (auto& x : t.values()) x = v;
  return t;
}

// Windowed SSIM by direct summation over every valid 11x11 window.
double naive_ssim(const Tensor<double>& a, const Tensor<double>& b) {
  double g[11], gsum = 0.0;
  for (int i = 0; i < 11; ++i) {
    g[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
    gsum += g[i];
  }
  const double c1 = 1e-4, c2 = 9e-4;
  const Shape s = a.shape();
  double total = 0.0;
  int64_t count = 0;
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      for (int64_t y = 0; y + 11 <= s.h; ++y) {
        for (int64_t x = 0; x + 11 <= s.w; ++x) {
          double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
          for (int i = 0; i < 11; ++i) {
            for (int j = 0; j < 11; ++j) {
              const double w = g[i] * g[j] / (gsum * gsum);
              const double va = a.at(n, c, y + i, x + j), vb = b.at(n, c, y + i, x + j);
              ma += w * va;
              mb += w * vb;
              saa += w * va * va;
              sbb += w * vb * vb;
              sab += w * va * vb;
            }
          }
          const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
          total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
          ++count;
        }
      }
    }
  }
  return total / static_cast<double>(count);
}

ModelConfig small_model() {
  ModelConfig c;
  c.iir_blocks = 1;
  c.iih_blocks = 1;
  c.subnet.n_layers = 2;
  c.subnet.growth_channels = 4;
  c.init_seed = 2;
  return c;
}

}  // namespace

TEST_CASE("PSNR oracles") {
  const Shape s{1, 3, 16, 16};
  const Tensor<double> x = rand_uniform<double>(s, 1);
  CHECK(std::isinf(psnr(x, x)));
  CHECK(psnr(x, x) > 0);
  CHECK(std::abs(psnr(filled(s, 0.5), filled(s, 0.5 + 1.0 / 255.0)) - 48.1308) < 1e-3);
  CHECK(std::abs(psnr(filled(s, 0.25), filled(s, 0.75)) - 6.0206) < 1e-3);

  double previous = std::numeric_limits<double>::infinity();
  for (double e : {0.001, 0.01, 0.1, 0.3}) {
    const double p = psnr(filled(s, 0.2), filled(s, 0.2 + e));
    CHECK(p < previous);
    previous = p;
  }
  CHECK_THROWS_AS(psnr(x, filled(Shape{1, 3, 16, 8}, 0.0)), ShapeError);
}

TEST_CASE("SSIM oracles") {
  const Shape s{1, 3, 24, 24};
  const Tensor<double> x = rand_uniform<double>(s, 1);
  const Tensor<double> y = rand_uniform<double>(s, 2);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(ssim(filled(s, 0.0), filled(s, 1.0)) - 1e-4 / (1 + 1e-4)) < 1e-7);
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
  CHECK(ssim(x, y) == doctest::Approx(naive_ssim(x, y)).epsilon(1e-9));
  CHECK(ssim(x, y) < 0.5);
  CHECK_THROWS_AS(ssim(filled(Shape{1, 3, 8, 8}, 0.0), filled(Shape{1, 3, 8, 8}, 0.0)), ShapeError);
}

TEST_CASE("SSIM under a common shift") {
  const Shape s{1, 1, 20, 20};
  const Tensor<double> a = rand_uniform<double>(s, 3);
  Tensor<double> b = a;
  for (auto& v : b.values()) v = 0.5 * v + 0.1;
  Tensor<double> as = a, bs = b;
  for (auto& v : as.values()) v += 0.2;
  for (auto& v : bs.values()) v += 0.2;
  CHECK(ssim(as, as) == doctest::Approx(ssim(a, a)).epsilon(1e-12));
  CHECK(std::abs(ssim_contrast_structure(as, bs) - ssim_contrast_structure(a, b)) < 1e-6);
}

TEST_CASE("mean/std with infinite entries") {
  auto [m, sd] = mean_std({1.0, 3.0});
  CHECK(m == 2.0);
  CHECK(sd == doctest::Approx(1.0));
  const double inf = std::numeric_limits<double>::infinity();
  std::tie(m, sd) = mean_std({inf, inf});
  CHECK(std::isinf(m));
  CHECK(sd == 0.0);
  std::tie(m, sd) = mean_std({inf, 4.0});
  CHECK(std::isinf(m));
  CHECK(std::isinf(sd));
}

TEST_CASE("evaluate: zero-init model, determinism, no mutation, JSON round trip") {
  testing::ScratchDir dir("eval");
  testing::write_synthetic_dataset(dir.path(), 11, 40, 5);
  InvMIHNet<float> net(small_model());
  const EvalReport zero = evaluate(net, dir.path(), 1);
  CHECK(zero.image_sets == 2);
  CHECK(zero.num_secrets == 4);
  CHECK(zero.width == 40);
  CHECK(std::isinf(zero.cover_psnr_mean));
  CHECK(zero.cover_ssim_mean == doctest::Approx(1.0));
  CHECK(zero.num_params == count_params(net));

  perturb_parameters(net.parameters(), 3, 0.01);
  std::vector<Tensor<float>> before;
  for (const auto& p : net.parameters()) before.push_back(p.var.value());
  const EvalReport a = evaluate(net, dir.path(), 9);
  const EvalReport b = evaluate(net, dir.path(), 9);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  CHECK(std::isfinite(a.cover_psnr_mean));
  for (size_t i = 0; i < before.size(); ++i) CHECK(max_abs_diff(net.parameters()[i].var.value(), before[i]) == 0.0);

  const EvalReport back = report_from_json(report_to_json(zero));
  CHECK(report_to_json(back).dump() == report_to_json(zero).dump());
  CHECK(render_report_table(a).find("PSNR") != std::string::npos);

  EvalOptions one;
  one.max_sets = 1;
  CHECK(evaluate(net, dir.path(), 9, one).image_sets == 1);
}

TEST_CASE("evaluate: crops mismatched sizes with warnings, rejects tiny datasets") {
  testing::ScratchDir dir("eval_crop");
  testing::write_synthetic_dataset(dir.path(), 4, 40, 6);
  write_png(dir / "odd.png", testing::synthetic_image(45, 42, 1));
  InvMIHNet<float> net(small_model());
  const EvalReport r = evaluate(net, dir.path(), 1);
  CHECK(r.image_sets == 1);
  CHECK(r.width == 40);
  CHECK(r.height == 40);
  CHECK_FALSE(r.warnings.empty());

  testing::ScratchDir few("eval_few");
  testing::write_synthetic_dataset(few.path(), 3, 40, 6);
  CHECK_THROWS_AS(evaluate(net, few.path(), 1), DataError);
}

TEST_CASE("count_params") {
  CHECK(count_params(InvMIHNet<float>(ModelConfig{})) == 5718192);
  CHECK(count_params(InvMIHNet<float>(small_model())) == InvMIHNet<float>(small_model()).num_params());
}
