#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hypow/relabel.hpp"
#include "support/test_support.hpp"

using namespace hypow;
using hypow::test::random_ball_point;

namespace {

// test-only oracle: literal double loop over every (query, centroid) pair
std::vector<int> brute_force_relabel(std::span<const Vec> unmatched,
                                     const CentroidSet& centroids,
                                     double delta, Curvature c) {
  std::vector<int> out;
  for (std::size_t u = 0; u < unmatched.size(); ++u) {
    bool in = false;
    for (const auto& [cls, z] : centroids.by_class)
      if (hyp_dist(unmatched[u], z, c) <= delta) in = true;
    if (in) out.push_back(static_cast<int>(u));
  }
  return out;
}

double brute_force_delta(std::span<const Vec> matched,
                         const CentroidSet& centroids, Curvature c) {
  double d = 0.0;
  for (const Vec& m : matched)
    for (const auto& [cls, z] : centroids.by_class)
      d = std::max(d, hyp_dist(m, z, c));
  return d;
}

}  // namespace

TEST_CASE("class centroids") {
  const Curvature c(1.0);
  ReplayBuffer buf(10);
  CHECK(class_centroids(buf, c).empty());

  buf.push(3, Vec{0.3, 0.0});
  const CentroidSet single = class_centroids(buf, c);
  CHECK(single.size() == 1);
  CHECK(single.by_class.at(3) == Vec{0.3, 0.0});

  buf.push(5, Vec{0.4, 0.0});
  buf.push(5, Vec{0.0, 0.4});
  const CentroidSet two = class_centroids(buf, c);
  CHECK(two.by_class.at(5)[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(two.by_class.at(5)[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("batch threshold") {
  const Curvature c(1.0);
  CentroidSet cents;
  cents.by_class[0] = Vec{0.6, 0.0};

  // matched point equal to the single centroid
  {
    const std::vector<Vec> matched{Vec{0.6, 0.0}};
    CHECK(*batch_threshold(matched, cents, c) == 0.0);
  }
  // matched at the origin: 2 * artanh(0.6) = ln 4
  {
    const std::vector<Vec> matched{Vec{0.0, 0.0}};
    CHECK(*batch_threshold(matched, cents, c) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  // adding a farther matched point never decreases delta
  {
    std::vector<Vec> matched{Vec{0.0, 0.0}};
    const double base = *batch_threshold(matched, cents, c);
    matched.push_back(Vec{-0.7, 0.0});
    CHECK(*batch_threshold(matched, cents, c) >= base);
  }
  // empty side: no threshold
  CHECK(!batch_threshold({}, cents, c).has_value());
  CHECK(!batch_threshold(std::vector<Vec>{Vec{0, 0}}, CentroidSet{}, c)
             .has_value());
}

TEST_CASE("relabel_unmatched edge cases") {
  const Curvature c(0.5);
  CentroidSet cents;
  cents.by_class[1] = Vec{0.3, 0.1};
  cents.by_class[2] = Vec{-0.4, 0.0};

  // a query exactly on a centroid is relabeled for any delta >= 0
  {
    const std::vector<Vec> unmatched{Vec{0.3, 0.1}};
    CHECK(relabel_unmatched(unmatched, cents, 0.0, c) == std::vector<int>{0});
  }
  // delta = 0 with a distinct query: not relabeled
  {
    const std::vector<Vec> unmatched{Vec{0.0, 0.0}};
    CHECK(relabel_unmatched(unmatched, cents, 0.0, c).empty());
  }
  CHECK_THROWS_AS(relabel_unmatched(std::vector<Vec>{Vec{0, 0}}, cents, -1.0, c),
                  std::invalid_argument);
}

TEST_CASE("relabel equals the brute-force oracle on random batches") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const Curvature c(trial % 2 == 0 ? 0.1 : 0.5);
    ReplayBuffer buf(4);
    const int classes = 2 + trial % 4;
    for (int cls = 0; cls < classes; ++cls)
      for (int i = 0; i < 1 + trial % 3; ++i)
        buf.push(cls, random_ball_point(4, c, 0.9, rng));
    const CentroidSet cents = class_centroids(buf, c);

    std::vector<Vec> matched, unmatched;
    for (int i = 0; i < 1 + trial % 5; ++i)
      matched.push_back(random_ball_point(4, c, 0.9, rng));
    for (int i = 0; i < 2 + trial % 7; ++i)
      unmatched.push_back(random_ball_point(4, c, 0.95, rng));

    const double delta = *batch_threshold(matched, cents, c);
    CHECK(delta == doctest::Approx(brute_force_delta(matched, cents, c))
                       .epsilon(1e-12));
    const auto got = relabel_unmatched(unmatched, cents, delta, c);
    const auto want = brute_force_relabel(unmatched, cents, delta, c);
    CHECK(got == want);
    CHECK(got == ref::relabel_unmatched(unmatched, cents, delta, c));

    // the all-unmatched variant is a superset by construction
    const RelabelDecision all = decide_relabel(matched, unmatched, cents, c,
                                               RelabelMode::AllUnmatched);
    CHECK(all.relabeled.size() == unmatched.size());
    CHECK(std::includes(all.relabeled.begin(), all.relabeled.end(),
                        got.begin(), got.end()));
  }
}

TEST_CASE("relabel monotonicity in the min-centroid distance") {
  Rng rng(11);
  const Curvature c(0.2);
  ReplayBuffer buf(4);
  for (int cls = 0; cls < 3; ++cls)
    buf.push(cls, random_ball_point(3, c, 0.8, rng));
  const CentroidSet cents = class_centroids(buf, c);

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec> unmatched;
    for (int i = 0; i < 6; ++i)
      unmatched.push_back(random_ball_point(3, c, 0.95, rng));
    std::uniform_real_distribution<double> du(0.0, 3.0);
    const double delta = du(rng);
    const auto in = relabel_unmatched(unmatched, cents, delta, c);

    auto min_dist = [&](const Vec& q) {
      double m = 1e300;
      for (const auto& [cls, z] : cents.by_class)
        m = std::min(m, hyp_dist(q, z, c));
      return m;
    };
    for (std::size_t u = 0; u < unmatched.size(); ++u) {
      const bool flagged = std::find(in.begin(), in.end(), static_cast<int>(u)) != in.end();
      for (std::size_t v = 0; v < unmatched.size(); ++v) {
        if (flagged && min_dist(unmatched[v]) < min_dist(unmatched[u])) {
          CHECK(std::find(in.begin(), in.end(), static_cast<int>(v)) != in.end());
        }
      }
    }
  }
}

TEST_CASE("threshold is self-consistent: matched items would be relabeled") {
  Rng rng(21);
  const Curvature c(0.1);
  ReplayBuffer buf(5);
  for (int cls = 0; cls < 4; ++cls)
    for (int i = 0; i < 3; ++i) buf.push(cls, random_ball_point(4, c, 0.9, rng));
  const CentroidSet cents = class_centroids(buf, c);
  std::vector<Vec> matched;
  for (int i = 0; i < 8; ++i) matched.push_back(random_ball_point(4, c, 0.9, rng));
  const double delta = *batch_threshold(matched, cents, c);
  const auto relabeled = relabel_unmatched(matched, cents, delta, c);
  CHECK(relabeled.size() == matched.size());
}

TEST_CASE("relabel output is order independent") {
  Rng rng(31);
  const Curvature c(0.3);
  ReplayBuffer buf(4);
  for (int cls = 0; cls < 3; ++cls)
    for (int i = 0; i < 2; ++i) buf.push(cls, random_ball_point(3, c, 0.9, rng));
  const CentroidSet cents = class_centroids(buf, c);

  std::vector<Vec> matched, unmatched;
  for (int i = 0; i < 5; ++i) matched.push_back(random_ball_point(3, c, 0.9, rng));
  for (int i = 0; i < 9; ++i) unmatched.push_back(random_ball_point(3, c, 0.9, rng));

  const double delta = *batch_threshold(matched, cents, c);
  const auto base = relabel_unmatched(unmatched, cents, delta, c);

  // permute the matched sequence: same threshold; permute the unmatched
  // sequence: same set after mapping indices back
  std::vector<Vec> matched_rev(matched.rbegin(), matched.rend());
  CHECK(*batch_threshold(matched_rev, cents, c) ==
        doctest::Approx(delta).epsilon(1e-15));

  std::vector<int> perm(unmatched.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec> shuffled(unmatched.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    shuffled[i] = unmatched[static_cast<std::size_t>(perm[i])];
  const auto got = relabel_unmatched(shuffled, cents, delta, c);
  std::vector<int> mapped;
  for (int idx : got) mapped.push_back(perm[static_cast<std::size_t>(idx)]);
  std::sort(mapped.begin(), mapped.end());
  CHECK(mapped == base);
}

TEST_CASE("decide_relabel modes") {
  const Curvature c(0.1);
  CentroidSet cents;
  cents.by_class[0] = Vec{0.2, 0.0};
  const std::vector<Vec> matched{Vec{0.1, 0.0}};
  const std::vector<Vec> unmatched{Vec{0.15, 0.0}, Vec{2.9, 0.0}};

  const auto off = decide_relabel(matched, unmatched, cents, c, RelabelMode::Off);
  CHECK(off.relabeled.empty());
  CHECK(!off.skipped);

  const auto all =
      decide_relabel(matched, unmatched, cents, c, RelabelMode::AllUnmatched);
  CHECK(all.relabeled == std::vector<int>{0, 1});

  const auto adaptive =
      decide_relabel(matched, unmatched, cents, c, RelabelMode::Adaptive);
  CHECK(!adaptive.skipped);
  CHECK(adaptive.delta > 0.0);

  // no matched known query: adaptive relabeling skips the step
  const auto skipped =
      decide_relabel({}, unmatched, cents, c, RelabelMode::Adaptive);
  CHECK(skipped.skipped);
  CHECK(skipped.relabeled.empty());
}
