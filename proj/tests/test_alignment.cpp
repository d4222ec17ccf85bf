#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "testutil.hpp"
#include "warpconv/alignment.hpp"

using warpconv::BaseOffset;
using warpconv::conv2d;
using warpconv::decomposed_deform_conv;
using warpconv::deformable_align;
using warpconv::flow_align;
using warpconv::image_align;
using warpconv::make_predictor;
using warpconv::predict_offsets;
using warpconv::PredictedOffsets;
using warpconv::PredictorWeights;
using warpconv::SplitMix64;
using warpconv::Tensor;
using warpconv::warp;

namespace {

void randomize(Tensor& t, SplitMix64& rng, double scale = 0.3) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
}

PredictorWeights random_predictor(SplitMix64& rng, std::size_t channels, std::size_t groups,
                                  std::size_t n, bool with_masks) {
  PredictorWeights w = make_predictor(channels, groups, n, with_masks, 8);
  randomize(w.conv1, rng);
  randomize(w.conv2, rng);
  randomize(w.head, rng);
  return w;
}

Tensor identity_pointwise(std::size_t channels) {
  Tensor pw({channels, channels, 1, 1});
  for (std::size_t c = 0; c < channels; ++c) pw.at(c, c, 0, 0) = 1.0;
  return pw;
}

}  // namespace

TEST_CASE("predict_offsets with zero weights") {
  SplitMix64 rng(307);
  const Tensor f_ref = testutil::rand_tensor(rng, {3, 6, 6});
  const Tensor f_nbr = testutil::rand_tensor(rng, {3, 6, 6});
  const PredictorWeights w = make_predictor(3, 2, 4, true);

  const PredictedOffsets out = predict_offsets(f_ref, f_nbr, w);
  CHECK(out.offsets.dims() == std::vector<std::size_t>{2, 4, 2, 6, 6});
  CHECK(tensor_sum(out.offsets) == 0.0);
  REQUIRE(out.masks.has_value());
  for (std::size_t i = 0; i < out.masks->size(); ++i) {
    CHECK((*out.masks)[i] == 0.5);
  }
}

TEST_CASE("predict_offsets input order matters unless the halves are symmetric") {
  SplitMix64 rng(311);
  const Tensor a = testutil::rand_tensor(rng, {2, 5, 5});
  const Tensor b = testutil::rand_tensor(rng, {2, 5, 5});

  const PredictorWeights asym = random_predictor(rng, 2, 1, 2, false);
  const PredictedOffsets ab = predict_offsets(a, b, asym);
  const PredictedOffsets ba = predict_offsets(b, a, asym);
  CHECK(testutil::max_abs_diff(ab.offsets, ba.offsets) > 0.0);

  // mirror the first conv across the two input-channel halves: order stops
  // mattering
  PredictorWeights sym = asym;
  const std::size_t hidden = sym.conv1.dim(0);
  const std::size_t channels = sym.conv1.dim(1) / 2;
  for (std::size_t h = 0; h < hidden; ++h) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          sym.conv1.at(h, channels + c, ky, kx) = sym.conv1.at(h, c, ky, kx);
        }
      }
    }
  }
  // equal up to the swapped channel-summation order
  const PredictedOffsets sab = predict_offsets(a, b, sym);
  const PredictedOffsets sba = predict_offsets(b, a, sym);
  CHECK(testutil::max_abs_diff(sab.offsets, sba.offsets) <= 1e-12);
}

TEST_CASE("predict_offsets output is finite and well-shaped for random weights") {
  SplitMix64 rng(313);
  for (std::size_t groups : {1ul, 2ul}) {
    for (std::size_t n : {1ul, 3ul}) {
      const Tensor f_ref = testutil::rand_tensor(rng, {4, 5, 5});
      const Tensor f_nbr = testutil::rand_tensor(rng, {4, 5, 5});
      const PredictorWeights w = random_predictor(rng, 4, groups, n, true);
      const PredictedOffsets out = predict_offsets(f_ref, f_nbr, w);
      CHECK(out.offsets.dims() == std::vector<std::size_t>{groups, n, 2, 5, 5});
      for (std::size_t i = 0; i < out.offsets.size(); ++i) {
        CHECK(std::isfinite(out.offsets[i]));
      }
      for (std::size_t i = 0; i < out.masks->size(); ++i) {
        CHECK((*out.masks)[i] >= 0.0);
        CHECK((*out.masks)[i] <= 1.0);
      }
    }
  }
}

TEST_CASE("deformable_align identity") {
  SplitMix64 rng(317);
  const Tensor f_nbr = testutil::rand_tensor(rng, {3, 5, 5});
  const Tensor offsets({1, 1, 2, 5, 5}, 0.0);
  const Tensor out = deformable_align(f_nbr, offsets, identity_pointwise(3), nullptr, 1);
  CHECK(testutil::max_abs_diff(out, f_nbr) == 0.0);
}

TEST_CASE("deformable_align recovers a translated feature (N=1)") {
  SplitMix64 rng(331);
  const std::size_t hw = 8;
  const Tensor f_ref = testutil::rand_tensor(rng, {2, hw, hw});

  // neighbor translated by (dy, dx) = (0, 2); ground-truth flow dx = 2
  Tensor f_nbr({2, hw, hw}, 0.0);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < hw; ++i) {
      for (std::size_t j = 2; j < hw; ++j) {
        f_nbr.at(c, i, j) = f_ref.at(c, i, j - 2);
      }
    }
  }
  Tensor offsets({1, 1, 2, hw, hw}, 0.0);
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t j = 0; j < hw; ++j) {
      offsets.at(0, 0, 0, i, j) = 2.0;
    }
  }
  const Tensor aligned = deformable_align(f_nbr, offsets, identity_pointwise(2), nullptr, 1);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < hw; ++i) {
      for (std::size_t j = 0; j + 2 < hw; ++j) {
        CHECK(aligned.at(c, i, j) == f_ref.at(c, i, j));
      }
    }
  }
}

TEST_CASE("deformable_align with binary masks equals the mask-weighted composition") {
  SplitMix64 rng(337);
  const Tensor f_nbr = testutil::rand_tensor(rng, {2, 5, 5});
  const Tensor offsets = testutil::rand_tensor(rng, {1, 2, 2, 5, 5}, -1.5, 1.5);
  const Tensor pw = testutil::rand_tensor(rng, {2, 4, 1, 1});
  Tensor masks({1, 2, 5, 5});
  for (std::size_t i = 0; i < masks.size(); ++i) {
    masks[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  }

  const Tensor got = deformable_align(f_nbr, offsets, pw, &masks, 1);

  // compose per offset index: warp, gate by the mask, mix with that index's
  // pointwise columns
  Tensor expect({2, 5, 5}, 0.0);
  for (std::size_t k = 0; k < 2; ++k) {
    Tensor disp({2, 5, 5});
    for (std::size_t i = 0; i < disp.size(); ++i) {
      disp[i] = offsets[k * disp.size() + i];
    }
    const Tensor warped = warp(f_nbr, disp);
    for (std::size_t co = 0; co < 2; ++co) {
      for (std::size_t p = 0; p < 25; ++p) {
        double acc = 0.0;
        for (std::size_t c = 0; c < 2; ++c) {
          acc += pw.at(co, k * 2 + c, 0, 0) * warped[c * 25 + p] * masks[k * 25 + p];
        }
        expect[co * 25 + p] += acc;
      }
    }
  }
  CHECK(testutil::max_abs_diff(got, expect) <= 1e-13);
}

TEST_CASE("deformable_align accepts a spatial kernel") {
  SplitMix64 rng(347);
  const Tensor f_nbr = testutil::rand_tensor(rng, {2, 6, 6});
  const Tensor kernel = testutil::rand_tensor(rng, {2, 2, 3, 3});
  const Tensor offsets = testutil::rand_tensor(rng, {1, 9, 2, 6, 6}, -2.0, 2.0);
  const Tensor got = deformable_align(f_nbr, offsets, kernel, nullptr, 1);
  const Tensor expect = warpconv::deform_conv(f_nbr, offsets, kernel, 1);
  CHECK(testutil::max_abs_diff(got, expect) <= 1e-12);
}

TEST_CASE("deformable_align ignores the reference by construction") {
  // alignment depends on the neighbor and offsets only; recomputing with the
  // same cached offsets is identical no matter which reference produced them
  SplitMix64 rng(349);
  const Tensor f_nbr = testutil::rand_tensor(rng, {2, 5, 5});
  const Tensor f_ref1 = testutil::rand_tensor(rng, {2, 5, 5});
  const Tensor f_ref2 = testutil::rand_tensor(rng, {2, 5, 5});
  const PredictorWeights w = random_predictor(rng, 2, 1, 2, false);
  const PredictedOffsets cached = predict_offsets(f_ref1, f_nbr, w);
  const Tensor pw = testutil::rand_tensor(rng, {2, 4, 1, 1});

  const Tensor out1 = deformable_align(f_nbr, cached.offsets, pw, nullptr, 1);
  const Tensor out2 = deformable_align(f_nbr, cached.offsets, pw, nullptr, 1);
  CHECK(testutil::max_abs_diff(out1, out2) == 0.0);

  // while a different reference changes the *predicted* offsets
  const PredictedOffsets other = predict_offsets(f_ref2, f_nbr, w);
  CHECK(testutil::max_abs_diff(cached.offsets, other.offsets) > 0.0);
}

TEST_CASE("flow_align equals the decomposed path bit for bit") {
  SplitMix64 rng(353);
  const Tensor f_nbr = testutil::rand_tensor(rng, {3, 5, 5});
  const Tensor flow = testutil::rand_tensor(rng, {2, 5, 5}, -2.0, 2.0);
  const Tensor pw = testutil::rand_tensor(rng, {3, 3, 1, 1});

  const Tensor via_flow = flow_align(f_nbr, flow, pw);
  Tensor as_offsets({1, 1, 2, 5, 5});
  for (std::size_t i = 0; i < flow.size(); ++i) as_offsets[i] = flow[i];
  const Tensor via_decomp =
      decomposed_deform_conv(f_nbr, as_offsets, {BaseOffset{}}, pw, 1);
  CHECK(testutil::max_abs_diff(via_flow, via_decomp) == 0.0);

  const Tensor zero_flow({2, 5, 5}, 0.0);
  CHECK(testutil::max_abs_diff(flow_align(f_nbr, zero_flow, identity_pointwise(3)), f_nbr) ==
        0.0);
}

TEST_CASE("flow_align fractional constant flow matches the bilinear oracle") {
  SplitMix64 rng(359);
  const Tensor f_nbr = testutil::rand_tensor(rng, {1, 6, 6});
  Tensor flow({2, 6, 6}, 0.0);
  for (std::size_t p = 0; p < 36; ++p) flow[p] = 0.5;  // dx = 0.5
  const Tensor out = flow_align(f_nbr, flow, identity_pointwise(1));
  Tensor plane({6, 6});
  for (std::size_t p = 0; p < 36; ++p) plane[p] = f_nbr[p];
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      const double expect = testutil::oracle_bilinear(plane, static_cast<double>(i),
                                                      static_cast<double>(j) + 0.5);
      CHECK(std::abs(out.at(0, i, j) - expect) <= 1e-14);
    }
  }
}

TEST_CASE("image_align basics") {
  SplitMix64 rng(367);
  const Tensor image = testutil::rand_tensor(rng, {3, 6, 6});
  const Tensor zero_flow({2, 6, 6}, 0.0);
  CHECK(testutil::max_abs_diff(image_align(image, zero_flow), image) == 0.0);

  Tensor int_flow({2, 6, 6}, 0.0);
  for (std::size_t p = 0; p < 36; ++p) int_flow[36 + p] = 1.0;  // dy = 1
  const Tensor shifted = image_align(image, int_flow);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        const double expect = i + 1 < 6 ? image.at(c, i + 1, j) : 0.0;
        CHECK(shifted.at(c, i, j) == expect);
      }
    }
  }
}

TEST_CASE("image_align smooths a checkerboard under fractional flow") {
  Tensor board({1, 8, 8});
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      board.at(0, i, j) = ((i + j) % 2 == 0) ? 1.0 : -1.0;
    }
  }
  Tensor flow({2, 8, 8}, 0.0);
  for (std::size_t p = 0; p < 64; ++p) flow[p] = 0.5;
  const Tensor out = image_align(board, flow);
  double out_max = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out_max = std::max(out_max, std::abs(out[i]));
  }
  CHECK(out_max < 1.0);
}
