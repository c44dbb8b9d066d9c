#include <cmath>
#include <fstream>

#include "blurforge/error.hpp"
#include "blurforge/filter.hpp"
#include "blurforge/image.hpp"
#include "blurforge/image_io.hpp"
#include "blurforge/warp.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace blurforge;

TEST_CASE("image shape invariants and validation") {
  Image img(3, 4, 3, 0.25);
  CHECK(img.data.size() == 36);
  CHECK(img.pixels() == 12);
  CHECK(img.index(1, 2, 1) == (1 * 4 + 2) * 3 + 1);
  CHECK(all_finite(img));
  img.data[5] = std::nan("");
  CHECK_FALSE(all_finite(img));
  CHECK_THROWS_AS(require_valid(Image(0, 4, 1), "t"), Error);
  Image broken(2, 2, 1);
  broken.data.pop_back();
  CHECK_THROWS_AS(require_valid(broken, "t"), Error);
  CHECK_THROWS_AS(require_same_shape(Image(2, 2, 1), Image(2, 3, 1), "t"), Error);
  CHECK(clamp01(Image(1, 1, 1, 1.5)).data[0] == 1.0);
  CHECK(clamp01(Image(1, 1, 1, -0.5)).data[0] == 0.0);
}

TEST_CASE("translate by zero is the identity bitwise") {
  Rng rng(1);
  for (Padding p : {Padding::Zero, Padding::Replicate}) {
    const Image img = oracle::random_image(rng, 7, 9, 3);
    CHECK(translate(img, {0.0, 0.0}, p) == img);
  }
}

TEST_CASE("translate hand-computed half-pixel shift") {
  // 1 x 2 image [a b] shifted right by half a pixel samples x - 0.5.
  Image img(1, 2, 1);
  img.data = {0.2, 0.6};
  const Image z = translate(img, {0.25, 0.0}, Padding::Zero);
  CHECK(z.data[0] == doctest::Approx(0.1));   // 0.5 * 0 + 0.5 * 0.2
  CHECK(z.data[1] == doctest::Approx(0.4));   // 0.5 * 0.2 + 0.5 * 0.6
  const Image r = translate(img, {0.25, 0.0}, Padding::Replicate);
  CHECK(r.data[0] == doctest::Approx(0.2));
  CHECK(r.data[1] == doctest::Approx(0.4));
}

TEST_CASE("integer shifts move pixels exactly") {
  Rng rng(2);
  const Image img = oracle::random_image(rng, 6, 8, 1);
  const Image out = translate(img, {2.0 / 8.0, 1.0 / 6.0}, Padding::Zero);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) {
      const double expected = (y >= 1 && x >= 2) ? img.at(y - 1, x - 2, 0) : 0.0;
      CHECK(out.at(y, x, 0) == expected);
    }
}

TEST_CASE("translate matches the bilinear oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const Image img = oracle::random_image(rng, 5 + trial % 4, 6 + trial % 3, trial % 2 ? 3 : 1);
    const double tx = rng.uniform(-0.6, 0.6);
    const double ty = rng.uniform(-0.6, 0.6);
    const Padding p = trial % 2 ? Padding::Zero : Padding::Replicate;
    CHECK(max_abs_diff(translate(img, {tx, ty}, p), oracle::translate(img, tx, ty, p)) <= 1e-12);
  }
}

TEST_CASE("translate rejects rates outside [-1, 1]") {
  CHECK_THROWS_AS(translate(Image(2, 2, 1), {1.5, 0.0}), Error);
  CHECK_THROWS_AS(translate(Image(2, 2, 1), {0.0, std::nan("")}), Error);
}

TEST_CASE("translate_grad matches central differences") {
  Rng rng(4);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const Image img = oracle::random_image(rng, 8, 8, trial % 2 ? 3 : 1);
    const Image up = oracle::random_image(rng, 8, 8, img.channels);
    const Padding p = trial % 2 ? Padding::Zero : Padding::Replicate;
    const Translation t{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    const TranslationGrad g = translate_grad(img, t, up, p);
    const double fx = oracle::central_difference(
        [&](double v) { return oracle::dot(up, translate(img, {v, t.ty}, p)); }, t.tx);
    const double fy = oracle::central_difference(
        [&](double v) { return oracle::dot(up, translate(img, {t.tx, v}, p)); }, t.ty);
    CHECK(oracle::rel_err(g.dtx, fx) <= 1e-4);
    CHECK(oracle::rel_err(g.dty, fy) <= 1e-4);
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("translate_grad example from the specification fixture") {
  Rng rng(5);
  const Image img = oracle::random_image(rng, 8, 8, 1);
  const Image up = oracle::random_image(rng, 8, 8, 1);
  const Translation t{0.07, -0.03};
  const TranslationGrad g = translate_grad(img, t, up);
  const double fx =
      oracle::central_difference([&](double v) { return oracle::dot(up, translate(img, {v, t.ty})); }, t.tx);
  const double fy =
      oracle::central_difference([&](double v) { return oracle::dot(up, translate(img, {t.tx, v})); }, t.ty);
  CHECK(oracle::rel_err(g.dtx, fx) <= 1e-4);
  CHECK(oracle::rel_err(g.dty, fy) <= 1e-4);
}

TEST_CASE("gaussian and disk kernels") {
  const Kernel2D g = gaussian_kernel(15.0);
  CHECK(g.rows == 91);
  CHECK(g.cols == 91);
  CHECK(std::abs(g.sum() - 1.0) <= 1e-9);
  // Closed form: separable exp(-d^2 / (2 sigma^2)), normalized.
  const std::vector<double> g1 = gaussian_kernel_1d(2.0);
  CHECK(g1.size() == 13);
  double z = 0.0;
  for (int i = -6; i <= 6; ++i) z += std::exp(-i * i / 8.0);
  for (int i = -6; i <= 6; ++i) CHECK(g1[i + 6] == doctest::Approx(std::exp(-i * i / 8.0) / z).epsilon(1e-12));
  CHECK(gaussian_kernel(1e-3).rows == 3);
  CHECK(gaussian_kernel(1e-3).at(1, 1) >= 0.999);

  const Kernel2D d = disk_kernel(15.0);
  CHECK(d.rows == 15);
  CHECK(std::abs(d.sum() - 1.0) <= 1e-9);
  CHECK(d.at(7, 7) > 0.0);
  CHECK(d.at(0, 0) == 0.0);
  CHECK(d.at(0, 7) > 0.0);
  CHECK(d.at(7, 7) == doctest::Approx(d.at(0, 7)));
  CHECK_THROWS_AS(gaussian_kernel(0.0), Error);
  CHECK_THROWS_AS(disk_kernel(0.5), Error);
}

TEST_CASE("conv2d_fixed matches the naive oracle") {
  Rng rng(6);
  for (Padding p : {Padding::Zero, Padding::Replicate}) {
    const Image img = oracle::random_image(rng, 9, 11, 3);
    Kernel2D k;
    k.rows = 3;
    k.cols = 5;
    k.weights.resize(15);
    double s = 0.0;
    for (double& w : k.weights) s += (w = rng.uniform());
    for (double& w : k.weights) w /= s;
    CHECK(max_abs_diff(conv2d_fixed(img, k, p), oracle::convolve(img, k, p)) <= 1e-12);
    const Kernel2D g = gaussian_kernel(1.3);
    CHECK(max_abs_diff(conv2d_fixed(img, g, p), oracle::convolve(img, g, p)) <= 1e-12);
  }
}

TEST_CASE("conv2d_fixed edge cases") {
  Rng rng(7);
  const Image img = oracle::random_image(rng, 4, 4, 1);
  Kernel2D delta{1, 1, {1.0}};
  CHECK(conv2d_fixed(img, delta) == img);
  CHECK(max_abs_diff(conv2d_fixed(Image(5, 5, 3, 0.4), gaussian_kernel(3.0)), Image(5, 5, 3, 0.4)) <= 1e-12);
  Kernel2D even{2, 2, {0.25, 0.25, 0.25, 0.25}};
  CHECK_THROWS_AS(conv2d_fixed(img, even), Error);
  Kernel2D unnormalized{1, 3, {0.5, 0.5, 0.5}};
  CHECK_THROWS_AS(conv2d_fixed(img, unnormalized), Error);
}

TEST_CASE("separable convolution equals the 2-D outer-product kernel") {
  Rng rng(8);
  const Image img = oracle::random_image(rng, 10, 7, 3);
  const std::vector<double> g = gaussian_kernel_1d(1.7);
  const Image sep = conv2d_separable(img, g, g, Padding::Replicate);
  CHECK(max_abs_diff(sep, oracle::convolve(img, gaussian_kernel(1.7), Padding::Replicate)) <= 1e-12);
}

TEST_CASE("rawf round trip is bitwise and png round trip is within quantization") {
  const auto dir = oracle::scratch_dir("io");
  Rng rng(9);
  const Image img = oracle::random_image(rng, 5, 6, 3);
  write_rawf(dir / "a.rawf", img);
  CHECK(read_rawf(dir / "a.rawf") == img);
  CHECK(read_image(dir / "a.rawf") == img);
  write_png(dir / "a.png", img);
  const Image back = read_png(dir / "a.png");
  CHECK(back.channels == 3);
  CHECK(max_abs_diff(back, img) <= 0.5 / 255.0 + 1e-12);
  const Image gray = oracle::random_image(rng, 4, 3, 1);
  write_png(dir / "g.png", gray);
  CHECK(read_png(dir / "g.png").channels == 1);
  CHECK(quantize(0.0) == 0);
  CHECK(quantize(1.0) == 255);
  CHECK(quantize(2.0) == 255);
  CHECK(quantize(-1.0) == 0);
  CHECK(quantize(0.5) == 128);
}

TEST_CASE("codec errors carry their kinds") {
  const auto dir = oracle::scratch_dir("io_err");
  try {
    read_png(dir / "missing.png");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingFile);
  }
  std::ofstream(dir / "junk.png") << "not a png";
  try {
    read_png(dir / "junk.png");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IoError);
  }
  std::ofstream(dir / "short.rawf") << "abc";
  CHECK_THROWS_AS(read_rawf(dir / "short.rawf"), Error);
}
