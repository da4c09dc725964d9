#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "frustumvox/head.hpp"
#include "frustumvox/ioi.hpp"
#include "support.hpp"

using namespace fvx;
using fvx::testing::Gen;

namespace {
// A gt box whose center lies inside a random crop.
struct Triple {
  OrientedBox3 gt;
  Aabb3 crop;
  Anchor anchor;
};

Triple fuzz(Gen& g) {
  const Aabb3 crop({g.uni(-5, 5), g.uni(-5, 5), g.uni(-1, 2)}, g.uni(0.5, 5), g.uni(0.5, 3));
  const Point3 lo = crop.min();
  const Point3 c{lo.x + g.uni(0, 1) * crop.side(), lo.y + g.uni(0, 1) * crop.side(),
                 lo.z + g.uni(0, 1) * crop.height()};
  const OrientedBox3 gt(c, g.uni(0.05, 3), g.uni(0.05, 3), g.uni(0.05, 3), g.uni(-std::numbers::pi, std::numbers::pi));
  return {gt, crop, {"x", g.uni(0.1, 2), g.uni(0.1, 2), g.uni(0.1, 2)}};
}

HeadVector random_vector(Gen& g) {
  return {g.uni(-2, 2), g.uni(-2, 2), g.uni(-1, 2), g.uni(-1, 2), g.uni(-1, 2),
          g.uni(-2, 2), g.uni(-2, 2), g.uni(-2, 2)};
}
}  // namespace

TEST(Anchors, MeansPerCategory) {
  std::map<std::string, std::vector<OrientedBox3>> boxes;
  boxes["one"] = {OrientedBox3({0, 0, 0}, 1, 2, 3)};
  boxes["two"] = {OrientedBox3({0, 0, 0}, 1, 1, 1), OrientedBox3({5, 5, 5}, 3, 3, 3, 1.0)};
  const auto a = compute_anchors(boxes);
  EXPECT_EQ(a.at("one").a_w, 1.0);
  EXPECT_EQ(a.at("one").a_d, 2.0);
  EXPECT_EQ(a.at("one").a_h, 3.0);
  EXPECT_EQ(a.at("two").a_w, 2.0);
  EXPECT_EQ(a.at("two").a_h, 2.0);
}

TEST(Anchors, MatchStreamingMeanOracle) {
  Gen g(1);
  std::map<std::string, std::vector<OrientedBox3>> boxes;
  std::map<std::string, std::array<double, 3>> welford;
  std::map<std::string, int> count;
  for (int i = 0; i < 5000; ++i) {
    const std::string cat = "c" + std::to_string(g.integer(0, 4));
    const auto b = g.box();
    boxes[cat].push_back(b);
    const int n = ++count[cat];
    auto& m = welford[cat];
    m[0] += (b.width() - m[0]) / n;
    m[1] += (b.depth() - m[1]) / n;
    m[2] += (b.height() - m[2]) / n;
  }
  const auto a = compute_anchors(boxes);
  for (const auto& [cat, m] : welford) {
    EXPECT_NEAR(a.at(cat).a_w, m[0], 1e-12);
    EXPECT_NEAR(a.at(cat).a_d, m[1], 1e-12);
    EXPECT_NEAR(a.at(cat).a_h, m[2], 1e-12);
  }
}

TEST(Anchors, CsvRoundTripAndErrors) {
  AnchorTable t{{"chair", {"chair", 0.5, 0.45, 1.0 / 3.0}}};
  std::stringstream ss;
  write_anchors_csv(ss, t);
  const auto back = read_anchors_csv(ss);
  EXPECT_EQ(back.at("chair").a_h, 1.0 / 3.0);
  std::stringstream bad("category,a_w,a_d,a_h\nchair,0.5,abc,1\n");
  EXPECT_THROW(read_anchors_csv(bad), Error);
  std::stringstream neg("category,a_w,a_d,a_h\nchair,0.5,-1,1\n");
  EXPECT_THROW(read_anchors_csv(neg), Error);
}

TEST(Encode, CenteredAnchorSizedBoxIsCanonical) {
  const Aabb3 crop({1, 2, 3}, 2, 1);
  const Anchor a{"x", 0.5, 0.4, 0.3};
  const auto v = encode(OrientedBox3({1, 2, 3}, 0.5, 0.4, 0.3, 0.0), crop, a);
  const std::array<double, 8> want{1, 0, 0.5, 0.5, 0.5, 0, 0, 0};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(v.to_array()[i], want[i], 1e-15);
  const auto w = encode(OrientedBox3({1, 2, 3}, std::exp(1.0) * 0.5, 0.4, 0.3), crop, a);
  EXPECT_NEAR(w.lw, 1.0, 1e-15);
}

TEST(Encode, CenterOutsideCropIsADomainError) {
  try {
    encode(OrientedBox3({5, 0, 0}, 1, 1, 1), Aabb3({0, 0, 0}, 1, 1), Anchor{"x", 1, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::encode_domain);
  }
}

TEST(Decode, CanonicalVectorAndLogWidth) {
  const Aabb3 crop({1, 2, 3}, 2, 1);
  const Anchor a{"x", 0.5, 0.4, 0.3};
  const auto b = decode({1, 0, 0.5, 0.5, 0.5, 0, 0, 0}, crop, a);
  EXPECT_NEAR(norm(b.center() - crop.center()), 0.0, 1e-15);
  EXPECT_EQ(b.yaw(), 0.0);
  EXPECT_NEAR(b.width(), 0.5, 1e-15);
  const auto b2 = decode({1, 0, 0.5, 0.5, 0.5, std::log(2.0), 0, 0}, crop, a);
  EXPECT_NEAR(b2.width(), 1.0, 1e-15);
}

TEST(Encode, DecodeOfEncodeIsIdentity) {
  Gen g(2);
  for (int i = 0; i < 10000; ++i) {
    const auto t = fuzz(g);
    const auto back = decode(encode(t.gt, t.crop, t.anchor), t.crop, t.anchor);
    EXPECT_NEAR(back.center().x, t.gt.center().x, 1e-9);
    EXPECT_NEAR(back.center().y, t.gt.center().y, 1e-9);
    EXPECT_NEAR(back.center().z, t.gt.center().z, 1e-9);
    EXPECT_NEAR(back.width(), t.gt.width(), 1e-9);
    EXPECT_NEAR(back.depth(), t.gt.depth(), 1e-9);
    EXPECT_NEAR(back.height(), t.gt.height(), 1e-9);
    EXPECT_NEAR(std::abs(normalize_angle(back.yaw() - t.gt.yaw())), 0.0, 1e-9);
  }
}

TEST(Encode, EncodeOfDecodeIsIdentityOnUnitHeadings) {
  Gen g(3);
  const Aabb3 crop({0.5, -0.5, 1}, 3, 2);
  const Anchor a{"x", 0.7, 0.5, 0.9};
  for (int i = 0; i < 5000; ++i) {
    const double yaw = g.uni(-std::numbers::pi, std::numbers::pi);
    const HeadVector v{std::cos(yaw), std::sin(yaw), g.uni(0, 1), g.uni(0, 1), g.uni(0, 1),
                       g.uni(-2, 2), g.uni(-2, 2), g.uni(-2, 2)};
    const auto w = encode(decode(v, crop, a), crop, a);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(w.to_array()[k], v.to_array()[k], 1e-9);
  }
}

TEST(Encode, CropRelativeSoTranslationInvariant) {
  Gen g(4);
  for (int i = 0; i < 1000; ++i) {
    const auto t = fuzz(g);
    const Point3 s{g.integer(-20, 20) * 0.5, g.integer(-20, 20) * 0.5, g.integer(-8, 8) * 0.25};
    const auto v = encode(t.gt, t.crop, t.anchor);
    const auto w = encode(t.gt.translated(s), t.crop.translated(s), t.anchor);
    const HeadVector pred = HeadVector::from_array({0.3, 0.8, 0.4, 0.6, 0.5, 0.1, -0.2, 0.3});
    EXPECT_NEAR(loss(pred, v, {}).total, loss(pred, w, {}).total, 1e-9);
  }
}

TEST(Loss, ZeroOnlyAtTheTarget) {
  Gen g(5);
  const LossWeights w{1.0, 2.0, 0.5, 0.0};
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_vector(g), q = random_vector(g);
    EXPECT_GT(loss(p, q, w).total, 0.0);
    EXPECT_EQ(loss(p, p, w).total, 0.0);
  }
}

TEST(Loss, SingleTermCase) {
  HeadVector p, q;
  p.tx = 0.6;
  q.tx = 0.5;
  EXPECT_NEAR(loss(p, q, {1.0, 1.0, 1.0}).total, 0.01, 1e-15);
}

TEST(Loss, MatchesTermByTermRecomputation) {
  Gen g(6);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_vector(g), q = random_vector(g);
    const LossWeights w{g.uni(0, 3), g.uni(0, 3), g.uni(0, 3), g.uni(0, 3)};
    const std::vector<double> pp{g.uni(0, 1), g.uni(0, 1)}, qp{0.0, 1.0};
    const double o = std::pow(p.ox - q.ox, 2) + std::pow(p.oy - q.oy, 2);
    const double xyz = std::pow(p.tx - q.tx, 2) + std::pow(p.ty - q.ty, 2) + std::pow(p.tz - q.tz, 2);
    const double wdh = std::pow(p.lw - q.lw, 2) + std::pow(p.ld - q.ld, 2) + std::pow(p.lh - q.lh, 2);
    const double cat = std::pow(pp[0] - qp[0], 2) + std::pow(pp[1] - qp[1], 2);
    const double total = w.orientation * o + w.xyz * xyz + w.wdh * wdh + w.category * cat;
    EXPECT_NEAR(loss(p, q, w, pp, qp).total, total, 1e-12);
  }
}

TEST(Loss, WeightsAreValidated) {
  EXPECT_THROW(loss({}, {}, LossWeights{-1, 1, 1}), Error);
  EXPECT_THROW(loss({}, {}, LossWeights{0, 0, 0, 0}), Error);
}

TEST(Gradient, ZeroAtTargetAndTwoLambdaDiff) {
  const HeadVector q;
  for (double gi : loss_grad(q, q, {})) EXPECT_EQ(gi, 0.0);
  HeadVector p = q;
  p.lh += 0.3;
  const auto grad = loss_grad(p, q, {1.0, 1.0, 2.5});
  EXPECT_NEAR(grad[7], 2 * 2.5 * 0.3, 1e-15);
}

TEST(Gradient, AgreesWithCentralDifferences) {
  Gen g(7);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const LossWeights w{g.uni(0.1, 3), g.uni(0.1, 3), g.uni(0.1, 3)};
    worst = std::max(worst, fd_check(random_vector(g), random_vector(g), w, 1e-5));
  }
  EXPECT_LT(worst, 1e-4);
}
