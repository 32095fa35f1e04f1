#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "invmih/bicubic.hpp"
#include "invmih/checkpoint.hpp"
#include "invmih/cli.hpp"
#include "invmih/config.hpp"
#include "invmih/eval.hpp"
#include "invmih/metrics.hpp"
#include "invmih/session.hpp"
#include "invmih/training.hpp"

namespace py = pybind11;
using namespace invmih;

namespace {

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

template <typename T>
Tensor<T> to_tensor(const Array<T>& a) {
  if (a.ndim() != 3 && a.ndim() != 4) throw py::value_error("expected a (C, H, W) or (N, C, H, W) array");
  const bool batched = a.ndim() == 4;
  const Shape s{batched ? a.shape(0) : 1, a.shape(batched ? 1 : 0), a.shape(batched ? 2 : 1),
                a.shape(batched ? 3 : 2)};
  Tensor<T> t(s);
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t) {
  const Shape s = t.shape();
  py::array_t<T> out({s.n, s.c, s.h, s.w});
  std::copy(t.data(), t.data() + t.numel(), out.mutable_data());
  return out;
}

template <typename T>
py::list to_list(const std::vector<Tensor<T>>& v) {
  py::list out;
  for (const auto& t : v) out.append(to_array(t));
  return out;
}

MosaicLayout layout_for(int m, int n, const Shape& s) { return MosaicLayout::for_image(m, n, s.h, s.w); }

// A model plus the configuration it was built from, so it can be saved.
struct PyModel {
  RunConfig config;
  std::shared_ptr<InvMIHNet<float>> net;
};

PyModel make_model(int num_secrets, int iir_blocks, int iih_blocks, int subnet_layers, int growth_channels,
                   uint64_t init_seed, const std::string& rescaler) {
  RunConfig cfg;
  const auto [rows, cols] = grid_for_count(num_secrets);
  cfg.model.rows = rows;
  cfg.model.cols = cols;
  cfg.model.iir_blocks = iir_blocks;
  cfg.model.iih_blocks = iih_blocks;
  cfg.model.subnet.n_layers = subnet_layers;
  cfg.model.subnet.growth_channels = growth_channels;
  cfg.model.init_seed = init_seed;
  cfg.model.rescaler = rescaler_from_string(rescaler);
  return {cfg, std::make_shared<InvMIHNet<float>>(cfg.model)};
}

py::object json_to_py(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Invertible multi-image hiding: transforms, metrics, models and the command-line entry point.";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);
  py::register_exception<ImageError>(m, "ImageError", PyExc_IOError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);

  m.def("grid_for_count", &grid_for_count, py::arg("count"), "Mosaic grid (rows, cols) for N secrets.");
  m.def(
      "mixing_matrix", [](int rows, int cols) { return mixing_matrix(rows, cols); }, py::arg("rows"), py::arg("cols"),
      "Orthonormal (mn x mn) mixing matrix of the generalized decomposition.");
  m.def(
      "haar_dwt", [](const Array<double>& x) { return to_array(haar_dwt(to_tensor(x))); }, py::arg("x"));
  m.def(
      "haar_idwt", [](const Array<double>& y) { return to_array(haar_idwt(to_tensor(y))); }, py::arg("y"));
  m.def(
      "decompose_d",
      [](const Array<double>& x, int rows, int cols) {
        const Tensor<double> t = to_tensor(x);
        const auto sub = decompose_D(t, layout_for(rows, cols, t.shape()));
        return py::make_tuple(to_array(sub.low), to_array(sub.high));
      },
      py::arg("x"), py::arg("rows"), py::arg("cols"), "Split an image into (low, high) subbands of an m x n grid.");
  m.def(
      "compose_dinv",
      [](const Array<double>& low, const Array<double>& high, int rows, int cols) {
        SubbandPair<double> sub{to_tensor(low), to_tensor(high)};
        const Shape s = sub.low.shape();
        return to_array(compose_Dinv(sub, MosaicLayout{rows, cols, s.h, s.w}));
      },
      py::arg("low"), py::arg("high"), py::arg("rows"), py::arg("cols"));
  m.def(
      "splice_mosaic",
      [](const std::vector<Array<double>>& tiles, int rows, int cols) {
        std::vector<Tensor<double>> ts;
        for (const auto& t : tiles) ts.push_back(to_tensor(t));
        if (ts.empty()) throw py::value_error("no tiles");
        const Shape s = ts.front().shape();
        return to_array(splice_mosaic<double>(ts, MosaicLayout{rows, cols, s.h, s.w}));
      },
      py::arg("tiles"), py::arg("rows"), py::arg("cols"));
  m.def(
      "unsplice_mosaic",
      [](const Array<double>& msi, int rows, int cols) {
        const Tensor<double> t = to_tensor(msi);
        return to_list(unsplice_mosaic(t, layout_for(rows, cols, t.shape())));
      },
      py::arg("msi"), py::arg("rows"), py::arg("cols"));
  m.def(
      "quantize", [](const Array<double>& x) { return to_array(quantize(to_tensor(x))); }, py::arg("x"),
      "Clip to [0, 1] and round to the 1/255 grid.");

  m.def(
      "psnr", [](const Array<double>& a, const Array<double>& b) { return psnr(to_tensor(a), to_tensor(b)); },
      py::arg("a"), py::arg("b"), "PSNR in dB for images in [0, 1]; inf for identical images.");
  m.def(
      "ssim", [](const Array<double>& a, const Array<double>& b) { return ssim(to_tensor(a), to_tensor(b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "soft_histogram", [](const Array<double>& x, int bins) { return soft_histogram(to_tensor(x), bins); },
      py::arg("x"), py::arg("bins") = 64, "Per-channel hat-kernel histograms.");
  m.def(
      "js_divergence",
      [](const std::vector<double>& p, const std::vector<double>& q) { return js_divergence(p, q); }, py::arg("p"),
      py::arg("q"));
  m.def(
      "lr_at",
      [](int64_t iteration, double base_lr, int64_t halving_period) {
        TrainConfig cfg;
        cfg.base_lr = base_lr;
        cfg.lr_halving_period = halving_period;
        return lr_at(iteration, cfg);
      },
      py::arg("iteration"), py::arg("base_lr") = 2e-4, py::arg("halving_period") = 10000);

  m.def(
      "read_png",
      [](const std::filesystem::path& p) {
        const Image8 img = read_png(p);
        py::array_t<uint8_t> out({img.height, img.width, int64_t{3}});
        std::copy(img.rgb.begin(), img.rgb.end(), out.mutable_data());
        return out;
      },
      py::arg("path"), "8-bit RGB PNG as an (H, W, 3) uint8 array.");
  m.def(
      "write_png",
      [](const std::filesystem::path& p, const Array<uint8_t>& a) {
        if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an (H, W, 3) uint8 array");
        Image8 img;
        img.height = a.shape(0);
        img.width = a.shape(1);
        img.rgb.assign(a.data(), a.data() + a.size());
        write_png(p, img);
      },
      py::arg("path"), py::arg("image"));

  py::class_<PyModel>(m, "Model", "Concealment/revealment network (float32).")
      .def(py::init(&make_model), py::arg("num_secrets") = 4, py::arg("iir_blocks") = 8, py::arg("iih_blocks") = 16,
           py::arg("subnet_layers") = 5, py::arg("growth_channels") = 32, py::arg("init_seed") = 0,
           py::arg("rescaler") = "invertible")
      .def_static(
          "load",
          [](const std::filesystem::path& p) {
            const Checkpoint ck = load_checkpoint(p);
            return PyModel{checkpoint_config(ck), std::make_shared<InvMIHNet<float>>(model_from_checkpoint<float>(ck))};
          },
          py::arg("path"))
      .def(
          "save", [](const PyModel& self, const std::filesystem::path& p) {
            save_checkpoint(p, make_checkpoint(self.config, *self.net));
          },
          py::arg("path"))
      .def_property_readonly("num_secrets", [](const PyModel& self) { return self.net->config().num_secrets(); })
      .def_property_readonly("grid", [](const PyModel& self) {
        return py::make_tuple(self.net->config().rows, self.net->config().cols);
      })
      .def_property_readonly("num_params", [](const PyModel& self) { return self.net->num_params(); })
      .def(
          "perturb",
          [](PyModel& self, uint64_t seed, double stddev) { perturb_parameters(self.net->parameters(), seed, stddev); },
          py::arg("seed"), py::arg("stddev") = 0.01, "Add Gaussian noise to every parameter.")
      .def(
          "conceal",
          [](const PyModel& self, const Array<float>& cover, const std::vector<Array<float>>& secrets) {
            std::vector<Tensor<float>> ts;
            for (const auto& s : secrets) ts.push_back(to_tensor(s));
            Concealed<float> c;
            {
              py::gil_scoped_release release;
              c = self.net->conceal(to_tensor(cover), ts);
            }
            py::dict out;
            out["stego"] = to_array(c.stego);
            out["stego_pre_quant"] = to_array(c.stego_pre_quant);
            out["msi"] = to_array(c.msi);
            return out;
          },
          py::arg("cover"), py::arg("secrets"))
      .def(
          "reveal",
          [](const PyModel& self, const Array<float>& stego, uint64_t seed, bool zero_latent) {
            const Tensor<float> t = to_tensor(stego);
            Revealed<float> r;
            {
              py::gil_scoped_release release;
              r = self.net->reveal(t, seed, zero_latent ? LatentMode::kZeros : LatentMode::kNormal);
            }
            py::dict out;
            out["secrets"] = to_list(r.secrets);
            out["msi"] = to_array(r.msi);
            out["cover"] = to_array(r.cover);
            return out;
          },
          py::arg("stego"), py::arg("seed") = 0, py::arg("zero_latent") = false);

  m.def(
      "evaluate",
      [](const PyModel& model, const std::filesystem::path& dataset, uint64_t seed, int64_t max_sets) {
        EvalOptions opts;
        opts.max_sets = max_sets;
        EvalReport r;
        {
          py::gil_scoped_release release;
          r = evaluate(*model.net, dataset, seed, opts);
        }
        return json_to_py(report_to_json(r).dump());
      },
      py::arg("model"), py::arg("dataset"), py::arg("seed") = 0, py::arg("max_sets") = 0,
      "Evaluate on an image directory; returns the report as a dict.");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"invmih"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a command-line invocation; returns (exit_code, stdout, stderr).");

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
