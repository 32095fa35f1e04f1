#include "invmih/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "invmih/dataset.hpp"
#include "invmih/image_io.hpp"
#include "invmih/metrics.hpp"

namespace invmih {

namespace {

nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

double parse_number(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kPsnrInfinity;
    if (s == "-inf") return -kPsnrInfinity;
    throw std::invalid_argument("report: unexpected string value '" + s + "'");
  }
  if (j.is_null()) return std::nan("");
  return j.get<double>();
}

Image8 center_crop(const Image8& img, int64_t w, int64_t h) {
  if (img.width == w && img.height == h) return img;
  return crop(img, (img.width - w) / 2, (img.height - h) / 2, w, h);
}

}  // namespace

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const auto n_inf = std::count_if(v.begin(), v.end(), [](double x) { return std::isinf(x); });
  if (n_inf > 0) {
    return {kPsnrInfinity, n_inf == static_cast<long>(v.size()) ? 0.0 : kPsnrInfinity};
  }
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

template <typename T>
EvalReport evaluate(const InvMIHNet<T>& net, const std::filesystem::path& dataset_dir, uint64_t seed,
                    const EvalOptions& options) {
  const ModelConfig& mc = net.config();
  const int n_sec = mc.num_secrets();
  const int64_t step_h = 2 * mc.rows;
  const int64_t step_w = 2 * mc.cols;
  // Smallest usable side still fits the SSIM window on every tile.
  ImageDataset data(dataset_dir, std::max<int64_t>(11, std::max(step_h, step_w)));
  const size_t group = static_cast<size_t>(n_sec) + 1;
  if (data.size() < group) {
    throw DataError("evaluate: " + std::to_string(data.size()) + " usable images in " + dataset_dir.string() +
                    ", need at least " + std::to_string(group));
  }

  EvalReport report;
  report.dataset = dataset_dir.filename().string();
  if (report.dataset.empty()) report.dataset = dataset_dir.parent_path().filename().string();
  report.num_secrets = n_sec;
  report.rows = mc.rows;
  report.cols = mc.cols;
  report.num_params = count_params(net);
  report.warnings = data.warnings();

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  int64_t sets = static_cast<int64_t>(data.size() / group);
  if (options.max_sets > 0) sets = std::min(sets, options.max_sets);

  std::vector<double> cover_psnr, cover_ssim, secret_psnr, secret_ssim;
  double elapsed = 0.0;
  for (int64_t s = 0; s < sets; ++s) {
    std::vector<Image8> imgs;
    int64_t w = std::numeric_limits<int64_t>::max();
    int64_t h = w;
    for (size_t k = 0; k < group; ++k) {
      imgs.push_back(data.image(order[static_cast<size_t>(s) * group + k]));
      w = std::min(w, imgs.back().width);
      h = std::min(h, imgs.back().height);
    }
    const int64_t cw = w / step_w * step_w;
    const int64_t ch = h / step_h * step_h;
    if (cw < 11 || ch < 11) {
      report.warnings.push_back("set " + std::to_string(s) + ": skipped, common size " + std::to_string(w) + "x" +
                                std::to_string(h) + " too small");
      continue;
    }
    for (size_t k = 0; k < group; ++k) {
      if (imgs[k].width != cw || imgs[k].height != ch) {
        report.warnings.push_back(data.path(order[static_cast<size_t>(s) * group + k]).filename().string() +
                                  ": center-cropped " + std::to_string(imgs[k].width) + "x" +
                                  std::to_string(imgs[k].height) + " -> " + std::to_string(cw) + "x" +
                                  std::to_string(ch));
        imgs[k] = center_crop(imgs[k], cw, ch);
      }
    }
    report.width = cw;
    report.height = ch;

    const Tensor<T> cover = image_to_tensor<T>(imgs[0]);
    std::vector<Tensor<T>> secrets;
    for (size_t k = 1; k < group; ++k) secrets.push_back(image_to_tensor<T>(imgs[k]));

    const auto t0 = std::chrono::steady_clock::now();
    const Concealed<T> hidden = net.conceal(cover, secrets);
    const Revealed<T> shown = net.reveal(hidden.stego, derive_seed(seed, static_cast<uint64_t>(s)), options.latent_mode);
    elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    cover_psnr.push_back(psnr(cover, hidden.stego));
    cover_ssim.push_back(ssim(cover, hidden.stego));
    for (size_t k = 0; k < secrets.size(); ++k) {
      // Recovered secrets are compared as the 8-bit images a user would receive.
      const Tensor<T> rec = quantize(shown.secrets[k]);
      secret_psnr.push_back(psnr(secrets[k], rec));
      secret_ssim.push_back(ssim(secrets[k], rec));
    }
    ++report.image_sets;
  }
  if (report.image_sets == 0) throw DataError("evaluate: no usable image sets in " + dataset_dir.string());

  std::tie(report.cover_psnr_mean, report.cover_psnr_std) = mean_std(cover_psnr);
  std::tie(report.cover_ssim_mean, report.cover_ssim_std) = mean_std(cover_ssim);
  std::tie(report.secret_psnr_mean, report.secret_psnr_std) = mean_std(secret_psnr);
  std::tie(report.secret_ssim_mean, report.secret_ssim_std) = mean_std(secret_ssim);
  report.seconds_per_set = elapsed / static_cast<double>(report.image_sets);
  return report;
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["num_secrets"] = r.num_secrets;
  j["grid"] = {r.rows, r.cols};
  j["image_sets"] = r.image_sets;
  j["image_size"] = {r.width, r.height};
  j["num_params"] = r.num_params;
  j["cover_stego"] = {{"psnr_mean", number_or_inf(r.cover_psnr_mean)},
                      {"psnr_std", number_or_inf(r.cover_psnr_std)},
                      {"ssim_mean", number_or_inf(r.cover_ssim_mean)},
                      {"ssim_std", number_or_inf(r.cover_ssim_std)}};
  j["secret_recovery"] = {{"psnr_mean", number_or_inf(r.secret_psnr_mean)},
                          {"psnr_std", number_or_inf(r.secret_psnr_std)},
                          {"ssim_mean", number_or_inf(r.secret_ssim_mean)},
                          {"ssim_std", number_or_inf(r.secret_ssim_std)}};
  j["warnings"] = r.warnings;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.num_secrets = j.at("num_secrets").get<int>();
  r.rows = j.at("grid").at(0).get<int>();
  r.cols = j.at("grid").at(1).get<int>();
  r.image_sets = j.at("image_sets").get<int64_t>();
  r.width = j.at("image_size").at(0).get<int64_t>();
  r.height = j.at("image_size").at(1).get<int64_t>();
  r.num_params = j.at("num_params").get<int64_t>();
  const auto& cs = j.at("cover_stego");
  r.cover_psnr_mean = parse_number(cs.at("psnr_mean"));
  r.cover_psnr_std = parse_number(cs.at("psnr_std"));
  r.cover_ssim_mean = parse_number(cs.at("ssim_mean"));
  r.cover_ssim_std = parse_number(cs.at("ssim_std"));
  const auto& sr = j.at("secret_recovery");
  r.secret_psnr_mean = parse_number(sr.at("psnr_mean"));
  r.secret_psnr_std = parse_number(sr.at("psnr_std"));
  r.secret_ssim_mean = parse_number(sr.at("ssim_mean"));
  r.secret_ssim_std = parse_number(sr.at("ssim_std"));
  if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

std::string render_report_table(const EvalReport& r) {
  std::ostringstream os;
  auto cell = [](double mean, double sd, int prec) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(prec);
    if (std::isinf(mean)) {
      c << "inf";
    } else {
      c << mean << " +- " << sd;
    }
    return c.str();
  };
  os << "dataset " << r.dataset << ", N=" << r.num_secrets << " (" << r.rows << "x" << r.cols << "), "
     << r.image_sets << " sets of " << r.width << "x" << r.height << ", " << r.num_params << " params, "
     << std::fixed << std::setprecision(3) << r.seconds_per_set << " s/set\n";
  os << std::left << std::setw(18) << "" << std::setw(22) << "PSNR (dB)" << "SSIM\n";
  os << std::setw(18) << "cover/stego" << std::setw(22) << cell(r.cover_psnr_mean, r.cover_psnr_std, 2)
     << cell(r.cover_ssim_mean, r.cover_ssim_std, 4) << "\n";
  os << std::setw(18) << "secret/recovery" << std::setw(22) << cell(r.secret_psnr_mean, r.secret_psnr_std, 2)
     << cell(r.secret_ssim_mean, r.secret_ssim_std, 4) << "\n";
  return os.str();
}

template EvalReport evaluate<float>(const InvMIHNet<float>&, const std::filesystem::path&, uint64_t,
                                    const EvalOptions&);
template EvalReport evaluate<double>(const InvMIHNet<double>&, const std::filesystem::path&, uint64_t,
                                     const EvalOptions&);

}  // namespace invmih
