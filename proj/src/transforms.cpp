#include "invmih/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace invmih {

MosaicLayout MosaicLayout::for_image(int m, int n, int64_t h, int64_t w) {
  require(m >= 1 && n >= 1, "mosaic grid must be at least 1x1");
  require(h % m == 0 && w % n == 0, "image " + std::to_string(h) + "x" + std::to_string(w) +
                                        " not divisible by grid " + std::to_string(m) + "x" +
                                        std::to_string(n));
  return MosaicLayout{m, n, h / m, w / n};
}

std::pair<int, int> grid_for_count(int count) {
  require(count >= 1, "secret count must be positive");
  int rows = 1;
  for (int r = 1; r * r <= count; ++r) {
    if (count % r == 0) rows = r;
  }
  return {rows, count / rows};
}

Eigen::MatrixXd mixing_matrix(int m, int n) {
  require(m >= 1 && n >= 1, "mixing_matrix: grid must be at least 1x1");
  const int size = m * n;
  if (m == 2 && n == 2) {
    Eigen::MatrixXd haar(4, 4);
    haar << 1, 1, 1, 1,
            1, -1, 1, -1,
            1, 1, -1, -1,
            1, -1, -1, 1;
    return haar * 0.5;
  }
  Eigen::MatrixXd basis(size, size);
  basis.row(0).setConstant(1.0 / std::sqrt(static_cast<double>(size)));
  int rows = 1;
  for (int j = 0; j < size && rows < size; ++j) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Unit(size, j);
    // Two passes of classical Gram-Schmidt keep the completion orthonormal to ~1e-16.
    for (int pass = 0; pass < 2; ++pass) {
      for (int r = 0; r < rows; ++r) v -= basis.row(r).dot(v) * basis.row(r);
    }
    const double norm = v.norm();
    if (norm > 1e-8) basis.row(rows++) = v / norm;
  }
  return basis;
}

template <typename T>
Tensor<T> polyphase_mix(const Tensor<T>& x, int m, int n) {
  const Shape s = x.shape();
  require(s.h % m == 0 && s.w % n == 0, "decomposition: image " + s.str() + " not divisible by grid " +
                                            std::to_string(m) + "x" + std::to_string(n));
  const int bands = m * n;
  const Eigen::MatrixXd mix = mixing_matrix(m, n);
  std::vector<T> coeff(mix.size());
  for (int k = 0; k < bands; ++k) {
    for (int p = 0; p < bands; ++p) coeff[k * bands + p] = static_cast<T>(mix(k, p));
  }
  const int64_t oh = s.h / m;
  const int64_t ow = s.w / n;
  Tensor<T> out(Shape{s.n, bands * s.c, oh, ow});
  std::vector<T> phase(bands);
  for (int64_t b = 0; b < s.n; ++b) {
    for (int64_t c = 0; c < s.c; ++c) {
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t xx = 0; xx < ow; ++xx) {
          for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) phase[i * n + j] = x.at(b, c, y * m + i, xx * n + j);
          }
          for (int k = 0; k < bands; ++k) {
            T acc = T(0);
            for (int p = 0; p < bands; ++p) acc += coeff[k * bands + p] * phase[p];
            out.at(b, k * s.c + c, y, xx) = acc;
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> polyphase_unmix(const Tensor<T>& y, int m, int n) {
  const Shape s = y.shape();
  const int bands = m * n;
  require(s.c % bands == 0, "composition: " + std::to_string(s.c) + " channels not divisible by " +
                                std::to_string(bands) + " bands");
  const int64_t channels = s.c / bands;
  const Eigen::MatrixXd mix = mixing_matrix(m, n);
  std::vector<T> coeff(mix.size());
  for (int k = 0; k < bands; ++k) {
    for (int p = 0; p < bands; ++p) coeff[k * bands + p] = static_cast<T>(mix(k, p));
  }
  Tensor<T> out(Shape{s.n, channels, s.h * m, s.w * n});
  std::vector<T> band(bands);
  for (int64_t b = 0; b < s.n; ++b) {
    for (int64_t c = 0; c < channels; ++c) {
      for (int64_t yy = 0; yy < s.h; ++yy) {
        for (int64_t xx = 0; xx < s.w; ++xx) {
          for (int k = 0; k < bands; ++k) band[k] = y.at(b, k * channels + c, yy, xx);
          for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
              const int p = i * n + j;
              T acc = T(0);
              for (int k = 0; k < bands; ++k) acc += coeff[k * bands + p] * band[k];
              out.at(b, c, yy * m + i, xx * n + j) = acc;
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> haar_dwt(const Tensor<T>& x) {
  require(x.shape().h % 2 == 0 && x.shape().w % 2 == 0, "haar_dwt: odd spatial dims " + x.shape().str());
  return polyphase_mix(x, 2, 2);
}

template <typename T>
Tensor<T> haar_idwt(const Tensor<T>& y) {
  require(y.shape().c % 4 == 0, "haar_idwt: channel count " + std::to_string(y.shape().c) +
                                    " not divisible by 4");
  return polyphase_unmix(y, 2, 2);
}

template <typename T>
SubbandPair<T> decompose_D(const Tensor<T>& x, const MosaicLayout& layout) {
  const Tensor<T> full = polyphase_mix(x, layout.m, layout.n);
  const int64_t c = x.shape().c;
  if (layout.count() == 1) {
    // Degenerate 1x1 grid: the high branch has no channels; represent it by an empty tensor.
    return {full, Tensor<T>()};
  }
  return {slice_channels(full, 0, c), slice_channels(full, c, full.shape().c - c)};
}

template <typename T>
Tensor<T> compose_Dinv(const SubbandPair<T>& sub, const MosaicLayout& layout) {
  const int64_t c = sub.low.shape().c;
  if (layout.count() == 1) {
    require(sub.high.empty(), "compose_Dinv: 1x1 layout takes no high subbands");
    return polyphase_unmix(sub.low, 1, 1);
  }
  require(sub.high.shape().c == (layout.count() - 1) * c,
          "compose_Dinv: expected " + std::to_string((layout.count() - 1) * c) + " high channels, got " +
              std::to_string(sub.high.shape().c));
  const Tensor<T> parts[] = {sub.low, sub.high};
  return polyphase_unmix(concat_channels<T>(parts), layout.m, layout.n);
}

namespace {

void check_tile_shapes(const std::vector<Shape>& shapes, const MosaicLayout& layout) {
  require(static_cast<int>(shapes.size()) == layout.count(),
          "splice_mosaic: expected " + std::to_string(layout.count()) + " tiles, got " +
              std::to_string(shapes.size()));
  for (const Shape& s : shapes) {
    require(s == shapes.front(), "splice_mosaic: tile shape " + s.str() + " differs from " +
                                     shapes.front().str());
  }
  if (layout.tile_h > 0) {
    require(shapes.front().h == layout.tile_h && shapes.front().w == layout.tile_w,
            "splice_mosaic: tiles " + shapes.front().str() + " do not match layout tile size");
  }
}

template <typename T>
void copy_tile(const Tensor<T>& src, Tensor<T>& dst, int64_t oy, int64_t ox, bool into_mosaic) {
  // into_mosaic: src is the tile; otherwise dst is the tile and src the mosaic.
  const Shape& ts = into_mosaic ? src.shape() : dst.shape();
  for (int64_t b = 0; b < ts.n; ++b) {
    for (int64_t c = 0; c < ts.c; ++c) {
      for (int64_t y = 0; y < ts.h; ++y) {
        if (into_mosaic) {
          std::copy_n(src.data() + src.index(b, c, y, 0), ts.w, dst.data() + dst.index(b, c, oy + y, ox));
        } else {
          std::copy_n(src.data() + src.index(b, c, oy + y, ox), ts.w, dst.data() + dst.index(b, c, y, 0));
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> splice_mosaic(std::span<const Tensor<T>> tiles, const MosaicLayout& layout) {
  std::vector<Shape> shapes;
  for (const auto& t : tiles) shapes.push_back(t.shape());
  check_tile_shapes(shapes, layout);
  const Shape ts = shapes.front();
  Tensor<T> out(Shape{ts.n, ts.c, ts.h * layout.m, ts.w * layout.n});
  for (int k = 0; k < layout.count(); ++k) {
    copy_tile(tiles[k], out, (k / layout.n) * ts.h, (k % layout.n) * ts.w, true);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> unsplice_mosaic(const Tensor<T>& msi, const MosaicLayout& layout) {
  const Shape s = msi.shape();
  require(s.h % layout.m == 0 && s.w % layout.n == 0,
          "unsplice_mosaic: mosaic " + s.str() + " not divisible by grid " + std::to_string(layout.m) +
              "x" + std::to_string(layout.n));
  const int64_t th = s.h / layout.m;
  const int64_t tw = s.w / layout.n;
  std::vector<Tensor<T>> tiles;
  tiles.reserve(layout.count());
  for (int k = 0; k < layout.count(); ++k) {
    Tensor<T> tile(Shape{s.n, s.c, th, tw});
    copy_tile(msi, tile, (k / layout.n) * th, (k % layout.n) * tw, false);
    tiles.push_back(std::move(tile));
  }
  return tiles;
}

template <typename T>
Tensor<T> quantize(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const T c = std::clamp(x[i], T(0), T(1));
    out[i] = static_cast<T>(std::round(c * T(255)) / T(255));
  }
  return out;
}

namespace ad {

template <typename T>
Var<T> polyphase_mix(const Var<T>& x, int m, int n) {
  return linear_map<T>(
      x, [m, n](const Tensor<T>& v) { return invmih::polyphase_mix(v, m, n); },
      [m, n](const Tensor<T>& g) { return invmih::polyphase_unmix(g, m, n); });
}

template <typename T>
Var<T> polyphase_unmix(const Var<T>& y, int m, int n) {
  return linear_map<T>(
      y, [m, n](const Tensor<T>& v) { return invmih::polyphase_unmix(v, m, n); },
      [m, n](const Tensor<T>& g) { return invmih::polyphase_mix(g, m, n); });
}

template <typename T>
Var<T> haar_dwt(const Var<T>& x) {
  return linear_map<T>(
      x, [](const Tensor<T>& v) { return invmih::haar_dwt(v); },
      [](const Tensor<T>& g) { return invmih::haar_idwt(g); });
}

template <typename T>
Var<T> haar_idwt(const Var<T>& y) {
  return linear_map<T>(
      y, [](const Tensor<T>& v) { return invmih::haar_idwt(v); },
      [](const Tensor<T>& g) { return invmih::haar_dwt(g); });
}

template <typename T>
Var<T> splice_mosaic(std::span<const Var<T>> tiles, const MosaicLayout& layout) {
  std::vector<Tensor<T>> values;
  std::vector<typename Var<T>::NodePtr> parents;
  for (const auto& t : tiles) {
    values.push_back(t.value());
    parents.push_back(t.node());
  }
  Tensor<T> out = invmih::splice_mosaic<T>(values, layout);
  return make_result<T>(std::move(out), std::move(parents), [layout](Node<T>& self) {
    auto parts = invmih::unsplice_mosaic(self.grad, layout);
    for (size_t k = 0; k < parts.size(); ++k) {
      if (self.parents[k]->requires_grad) self.parents[k]->accumulate(std::move(parts[k]));
    }
  });
}

template <typename T>
std::vector<Var<T>> unsplice_mosaic(const Var<T>& msi, const MosaicLayout& layout) {
  auto values = invmih::unsplice_mosaic(msi.value(), layout);
  const int64_t th = values.front().shape().h;
  const int64_t tw = values.front().shape().w;
  std::vector<Var<T>> out;
  for (int k = 0; k < layout.count(); ++k) {
    const int64_t oy = (k / layout.n) * th;
    const int64_t ox = (k % layout.n) * tw;
    out.push_back(make_result<T>(std::move(values[k]), {msi.node()}, [oy, ox](Node<T>& self) {
      Tensor<T>& g = self.parents[0]->grad_buffer();
      const Shape& ts = self.grad.shape();
      for (int64_t b = 0; b < ts.n; ++b) {
        for (int64_t c = 0; c < ts.c; ++c) {
          for (int64_t y = 0; y < ts.h; ++y) {
            for (int64_t x = 0; x < ts.w; ++x) g.at(b, c, oy + y, ox + x) += self.grad.at(b, c, y, x);
          }
        }
      }
    }));
  }
  return out;
}

}  // namespace ad

#define INVMIH_INSTANTIATE(T)                                                                 \
  template Tensor<T> polyphase_mix(const Tensor<T>&, int, int);                               \
  template Tensor<T> polyphase_unmix(const Tensor<T>&, int, int);                             \
  template Tensor<T> haar_dwt(const Tensor<T>&);                                              \
  template Tensor<T> haar_idwt(const Tensor<T>&);                                             \
  template SubbandPair<T> decompose_D(const Tensor<T>&, const MosaicLayout&);                 \
  template Tensor<T> compose_Dinv(const SubbandPair<T>&, const MosaicLayout&);                \
  template Tensor<T> splice_mosaic(std::span<const Tensor<T>>, const MosaicLayout&);          \
  template std::vector<Tensor<T>> unsplice_mosaic(const Tensor<T>&, const MosaicLayout&);     \
  template Tensor<T> quantize(const Tensor<T>&);                                              \
  namespace ad {                                                                              \
  template Var<T> polyphase_mix(const Var<T>&, int, int);                                     \
  template Var<T> polyphase_unmix(const Var<T>&, int, int);                                   \
  template Var<T> haar_dwt(const Var<T>&);                                                    \
  template Var<T> haar_idwt(const Var<T>&);                                                   \
  template Var<T> splice_mosaic(std::span<const Var<T>>, const MosaicLayout&);                \
  template std::vector<Var<T>> unsplice_mosaic(const Var<T>&, const MosaicLayout&);           \
  }

INVMIH_INSTANTIATE(float)
INVMIH_INSTANTIATE(double)
#undef INVMIH_INSTANTIATE

}  // namespace invmih
