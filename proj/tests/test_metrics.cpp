#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "peekaboom/error.hpp"
#include "peekaboom/metrics.hpp"
#include "peekaboom/random.hpp"

using namespace peekaboom;

namespace {

TrialRecord trial(const std::string& id, const std::string& pair, const std::string& method,
                  bool correct, double rate, const std::string& worker = "w",
                  const std::string& image = "img") {
  TrialRecord t;
  t.trial_id = id;
  t.pair_id = pair;
  t.method_id = method;
  t.correct = correct;
  t.rate = correct ? rate : 1.0;
  t.worker_id = worker;
  t.image_id = image;
  return t;
}

AccuracyCurve curve(std::vector<CurvePoint> pts, std::string method = "m",
                    std::string scheme = "crowd") {
  return AccuracyCurve{std::move(method), std::move(scheme), std::move(pts)};
}

// Midpoint Riemann sum of the piecewise-linear interpolant on a fine grid.
double riemann(const AccuracyCurve& c, int n) {
  auto value = [&](double x) {
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      const auto& a = c.points[i - 1];
      const auto& b = c.points[i];
      if (x <= b.rate) return a.accuracy + (b.accuracy - a.accuracy) * (x - a.rate) / (b.rate - a.rate);
    }
    return c.points.back().accuracy;
  };
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += value((i + 0.5) / n) / n;
  return s;
}

std::vector<double> as_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("crowd curve hand example") {
  const std::vector<TrialRecord> ts{trial("a", "p", "m", true, 0.05), trial("b", "p", "m", true, 0.15),
                                    trial("c", "p", "m", false, 1.0), trial("d", "p", "m", true, 0.30),
                                    trial("e", "q", "other", true, 0.05)};
  const auto c = crowd_accuracy_curve(ts, "m", ExposureSchedule::game_default());
  const std::vector<double> rates{0, .05, .10, .15, .20, .30, .50, .75, 1.0};
  const std::vector<double> acc{0, .25, .25, .5, .5, .75, .75, .75, .75};
  REQUIRE(c.points.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(c.points[i].rate == rates[i]);
    CHECK(c.points[i].accuracy == acc[i]);
  }
  CHECK(c.scheme == "crowd");
  CHECK_THROWS_AS(crowd_accuracy_curve(ts, "absent", ExposureSchedule::game_default()), Error);
}

TEST_CASE("crowd curves are non-decreasing") {
  Rng rng(6);
  const auto sched = ExposureSchedule::game_default();
  for (int trial_no = 0; trial_no < 200; ++trial_no) {
    std::vector<TrialRecord> ts;
    const std::size_t n = 1 + uniform_index(rng, 30);
    for (std::size_t i = 0; i < n; ++i) {
      const bool ok = uniform01(rng) < 0.7;
      ts.push_back(trial(std::to_string(i), "p", "m", ok, sched[uniform_index(rng, sched.size())]));
    }
    const auto c = crowd_accuracy_curve(ts, "m", sched);
    CHECK_NOTHROW(c.validate());
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].accuracy >= c.points[i - 1].accuracy);
    }
  }
}

TEST_CASE("auc examples and validation") {
  CHECK(auc(curve({{0, 1}, {0.3, 1}, {1, 1}})) == 1.0);
  CHECK(auc(curve({{0, 0}, {0.5, 0.5}, {1, 1}})) == 0.5);
  CHECK(auc(curve({{0, 0}, {1, 0}})) == 0.0);
  CHECK_THROWS_AS(auc(curve({{0.1, 0}, {1, 1}})), Error);
  CHECK_THROWS_AS(auc(curve({{0, 0}, {0.9, 1}})), Error);
  CHECK_THROWS_AS(auc(curve({{0, 0}, {0.5, 1.2}, {1, 1}})), Error);
  CHECK_THROWS_AS(auc(curve({{0, 0}, {0.5, 0.2}, {0.5, 0.3}, {1, 1}})), Error);
}

TEST_CASE("auc: Riemann oracle, bounds and linearity on random curves") {
  Rng rng(8);
  const auto grid = ExposureSchedule::game_default().with_origin();
  for (int t = 0; t < 100; ++t) {
    AccuracyCurve a = curve({}), b = curve({}), mid = curve({});
    for (double r : grid) {
      const double x = uniform01(rng), y = uniform01(rng);
      a.points.push_back({r, x});
      b.points.push_back({r, y});
      mid.points.push_back({r, 0.5 * (x + y)});
    }
    const double area = auc(a);
    CHECK(std::fabs(area - riemann(a, 10000)) < 1e-9);
    double lo = 1, hi = 0;
    for (const auto& p : a.points) {
      lo = std::min(lo, p.accuracy);
      hi = std::max(hi, p.accuracy);
    }
    CHECK(area >= lo - 1e-15);
    CHECK(area <= hi + 1e-15);
    CHECK(auc(mid) == doctest::Approx(0.5 * (auc(a) + auc(b))).epsilon(1e-12));
  }
}

TEST_CASE("rank_methods reproduces every published score row") {
  struct Row {
    const char* scheme;
    std::vector<double> aucs;
    std::vector<int> ranks;
  };
  const std::vector<Row> rows{
      {"crowd", {0.639, 0.469, 0.425, 0.396, 0.334}, {1, 2, 3, 4, 5}},
      {"KAR", {0.667, 0.494, 0.478, 0.570, 0.340}, {1, 3, 4, 2, 5}},
      {"KAE", {0.669, 0.340, 0.265, 0.316, 0.136}, {1, 2, 4, 3, 5}},
      {"ROAR", {0.211, 0.140, 0.258, 0.346, 0.366}, {2, 1, 3, 4, 5}},
      {"ROAE", {0.159, 0.060, 0.072, 0.087, 0.140}, {5, 1, 2, 3, 4}},
      {"crowd", {0.752, 0.696, 0.592, 0.608, 0.354}, {1, 2, 4, 3, 5}},
      {"KAR", {0.627, 0.456, 0.445, 0.515, 0.365}, {1, 3, 4, 2, 5}},
      {"KAE", {0.619, 0.311, 0.294, 0.354, 0.137}, {1, 3, 4, 2, 5}},
      {"ROAR", {0.142, 0.088, 0.194, 0.200, 0.385}, {2, 1, 3, 4, 5}},
      {"ROAE", {0.115, 0.048, 0.054, 0.059, 0.137}, {4, 1, 2, 3, 5}},
  };
  for (const auto& r : rows) {
    CHECK(rank_methods(r.aucs, scheme_direction(r.scheme)) == r.ranks);
  }
}

TEST_CASE("rank_methods ties, errors and direction reversal") {
  CHECK(rank_methods(std::vector<double>{0.3, 0.3, 0.3}, Direction::higher_better) ==
        std::vector<int>{1, 1, 1});
  CHECK(rank_methods(std::vector<double>{0.9, 0.5, 0.5, 0.1}, Direction::higher_better) ==
        std::vector<int>{1, 2, 2, 4});
  CHECK_THROWS_AS(rank_methods(std::vector<double>{}, Direction::higher_better), Error);
  CHECK_THROWS_AS(rank_methods(std::vector<double>{0.1, NAN}, Direction::higher_better), Error);
  CHECK_THROWS_AS(scheme_direction("XYZ"), Error);

  Rng rng(10);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 8);
    std::vector<double> s(n);
    for (auto& v : s) v = uniform01(rng);
    const auto up = rank_methods(s, Direction::higher_better);
    const auto down = rank_methods(s, Direction::lower_better);
    for (std::size_t i = 0; i < n; ++i) CHECK(down[i] == static_cast<int>(n) + 1 - up[i]);
  }
}

TEST_CASE("rank correlations on the worked pair") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{1, 3, 4, 2, 5}, rev{5, 4, 3, 2, 1};
  CHECK(spearman(a, b) == 0.7);
  CHECK(kendall(a, b) == 0.6);
  CHECK(spearman(a, a) == 1.0);
  CHECK(kendall(a, a) == 1.0);
  CHECK(spearman(a, rev) == -1.0);
  CHECK(kendall(a, rev) == -1.0);
  CHECK_THROWS_AS(spearman(a, std::vector<double>{1, 2}), Error);
  CHECK_THROWS_AS(kendall(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("rank correlations match brute force on all permutations of five") {
  std::vector<int> base{1, 2, 3, 4, 5};
  std::vector<int> p = base;
  int count = 0;
  do {
    ++count;
    long sum_d2 = 0;
    for (int i = 0; i < 5; ++i) sum_d2 += (base[i] - p[i]) * (base[i] - p[i]);
    const double rho = static_cast<double>(120 - 6 * sum_d2) / 120.0;
    int conc = 0, disc = 0;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        if (i == j) continue;
        const int s = (base[i] - base[j]) * (p[i] - p[j]);
        if (s > 0) ++conc;
        if (s < 0) ++disc;
      }
    }
    const double tau = static_cast<double>(conc - disc) / 20.0;
    CHECK(spearman(as_doubles(base), as_doubles(p)) == rho);
    CHECK(kendall(as_doubles(base), as_doubles(p)) == tau);
  } while (std::next_permutation(p.begin(), p.end()));
  CHECK(count == 120);
}

TEST_CASE("rank correlations with ties") {
  // Mean ranks (1.5,1.5,3,4) vs (1,2,3,4): Pearson by hand.
  const std::vector<double> a{1, 1, 3, 4}, b{1, 2, 3, 4};
  const double ra[] = {1.5, 1.5, 3, 4}, rb[] = {1, 2, 3, 4};
  double cov = 0, va = 0, vb = 0;
  for (int i = 0; i < 4; ++i) {
    cov += (ra[i] - 2.5) * (rb[i] - 2.5);
    va += (ra[i] - 2.5) * (ra[i] - 2.5);
    vb += (rb[i] - 2.5) * (rb[i] - 2.5);
  }
  CHECK(spearman(a, b) == doctest::Approx(cov / std::sqrt(va * vb)).epsilon(1e-14));
  // tau-b: 5 concordant, 0 discordant, 1 tie in a.
  CHECK(kendall(a, b) == doctest::Approx(5.0 / std::sqrt(5.0 * 6.0)).epsilon(1e-14));
  const std::vector<double> flat{2, 2, 2, 2};
  CHECK(std::isnan(spearman(flat, b)));
  CHECK(std::isnan(kendall(flat, b)));
}

TEST_CASE("correlation versus exposure") {
  const auto sched = ExposureSchedule({0.5, 1.0});
  std::vector<AccuracyCurve> crowd{curve({{0, 0}, {0.5, 0.9}, {1, 1.0}}, "a"),
                                   curve({{0, 0}, {0.5, 0.5}, {1, 0.8}}, "b"),
                                   curve({{0, 0}, {0.5, 0.2}, {1, 0.6}}, "c")};
  std::vector<AccuracyCurve> automated;
  for (const auto& c : crowd) {
    automated.push_back(curve(c.points, c.method_id, "KAE"));
    AccuracyCurve flip = curve({}, c.method_id, "KAR");
    for (const auto& p : c.points) flip.points.push_back({p.rate, 1.0 - p.accuracy});
    automated.push_back(flip);
  }
  // ROAE (lower better): a 0.3/0.1, b 0.1/0.3, c 0.2/0.2 -> ranks (3,1,2) and (1,3,2).
  automated.push_back(curve({{0, 0.5}, {0.5, 0.3}, {1, 0.1}}, "a", "ROAE"));
  automated.push_back(curve({{0, 0.5}, {0.5, 0.1}, {1, 0.3}}, "b", "ROAE"));
  automated.push_back(curve({{0, 0.5}, {0.5, 0.2}, {1, 0.2}}, "c", "ROAE"));

  const auto out = correlation_vs_exposure(crowd, automated, sched);
  REQUIRE(out.size() == 3);
  for (const auto& r : out.at("KAE")) {
    CHECK(r.spearman == 1.0);
    CHECK(r.kendall == 1.0);
  }
  for (const auto& r : out.at("KAR")) {
    CHECK(r.spearman == -1.0);
    CHECK(r.kendall == -1.0);
  }
  // Crowd ranks (1,2,3) at both rates.
  const auto& roae = out.at("ROAE");
  CHECK(roae[0].rate == 0.5);
  CHECK(roae[0].spearman == 1.0 - 6.0 * (4 + 1 + 1) / 24.0);
  CHECK(roae[0].kendall == doctest::Approx(-1.0 / 3.0));
  CHECK(roae[1].spearman == 1.0 - 6.0 * (0 + 1 + 1) / 24.0);
  CHECK(roae[1].kendall == doctest::Approx(1.0 / 3.0));

  automated.pop_back();
  CHECK_THROWS_AS(correlation_vs_exposure(crowd, automated, sched), Error);
  CHECK_THROWS_AS(correlation_vs_exposure(crowd, automated, ExposureSchedule({0.3, 1.0})), Error);
}

TEST_CASE("difficulty histograms") {
  const std::vector<TrialRecord> ts{trial("1", "p", "m", true, 0.05, "w1", "i1"),
                                    trial("2", "p", "m", true, 0.75, "w1", "i2"),
                                    trial("3", "p", "m", false, 1.0, "w1", "i2"),
                                    trial("4", "p", "m", true, 0.30, "w2", "i3")};
  const auto rep = difficulty_histograms(ts, 0.1);
  CHECK(rep.worker_mean_rate.at("w1") == doctest::Approx(0.6));
  CHECK(rep.worker_mean_rate.at("w2") == 0.30);
  CHECK(rep.image_mean_rate.at("i1") == 0.05);
  CHECK(rep.image_mean_rate.at("i2") == doctest::Approx(0.875));
  REQUIRE(rep.workers.counts.size() == 10);
  CHECK(rep.workers.counts[6] == 1);
  CHECK(rep.workers.counts[3] == 1);
  CHECK(rep.images.counts[0] == 1);
  CHECK(rep.images.counts[8] == 1);
  CHECK(rep.images.counts[3] == 1);

  const std::vector<TrialRecord> spent{trial("1", "p", "m", false, 1.0, "w", "a"),
                                       trial("2", "p", "m", false, 1.0, "v", "b")};
  const auto all_one = difficulty_histograms(spent, 0.25);
  CHECK(all_one.images.counts == std::vector<std::size_t>{0, 0, 0, 2});

  CHECK(difficulty_histograms({}, 0.1).images.counts == std::vector<std::size_t>(10, 0));
  CHECK_THROWS_AS(difficulty_histograms(ts, 0.0), Error);
}

TEST_CASE("subsampling at full quota equals the full data") {
  const auto sched = ExposureSchedule::game_default();
  Rng rng(12);
  std::vector<TrialRecord> ts;
  for (int p = 0; p < 6; ++p) {
    for (int k = 0; k < 3; ++k) {
      const std::string m = p % 2 ? "a" : "b";
      ts.push_back(trial("t" + std::to_string(p * 3 + k), "p" + std::to_string(p), m,
                         uniform01(rng) < 0.8, sched[uniform_index(rng, sched.size())]));
    }
  }
  const std::vector<std::string> methods{"a", "b"};
  const std::vector<double> levels{3.0, 1.5, 0.5};
  const auto rows = subsample_analysis(ts, levels, methods, sched, 99);
  REQUIRE(rows.size() == 3);
  std::vector<AccuracyCurve> full;
  for (const auto& m : methods) full.push_back(crowd_accuracy_curve(ts, m, sched));
  const auto table = score_table(full);
  CHECK(rows[0].scores.aucs == table[0].aucs);
  CHECK(rows[0].scores.ranks == table[0].ranks);
  CHECK(rows[0].level == 3.0);

  const auto again = subsample_analysis(ts, levels, methods, sched, 99);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].scores.aucs == rows[i].scores.aucs);

  const std::vector<double> too_many{4.0};
  CHECK_THROWS_AS(subsample_analysis(ts, too_many, methods, sched, 1), Error);
  const std::vector<double> zero{0.0};
  CHECK_THROWS_AS(subsample_analysis(ts, zero, methods, sched, 1), Error);
  CHECK_THROWS_AS(subsample_analysis({}, levels, methods, sched, 1), Error);
}

TEST_CASE("subsampling two pairs of two trials enumerates the four choices") {
  const auto sched = ExposureSchedule::game_default();
  // One method, pairs p and q; each choice of trials gives a distinct AUC.
  const std::vector<TrialRecord> ts{trial("p1", "p", "m", true, 0.05), trial("p2", "p", "m", false, 1.0),
                                    trial("q1", "q", "m", true, 0.30), trial("q2", "q", "m", true, 0.75)};
  std::set<double> enumerated;
  for (int i : {0, 1}) {
    for (int j : {2, 3}) {
      const std::vector<TrialRecord> pick{ts[i], ts[j]};
      enumerated.insert(auc(crowd_accuracy_curve(pick, "m", sched)));
    }
  }
  REQUIRE(enumerated.size() == 4);
  std::set<double> seen;
  const std::vector<double> one{1.0};
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const double a = subsample_analysis(ts, one, {"m"}, sched, seed)[0].scores.aucs[0];
    CHECK(enumerated.count(a) == 1);
    seen.insert(a);
  }
  CHECK(seen == enumerated);

  // Level 0.5: one of the two pairs contributes one trial.
  std::set<double> singles;
  for (const auto& t : ts) singles.insert(auc(crowd_accuracy_curve(std::vector<TrialRecord>{t}, "m", sched)));
  const std::vector<double> half{0.5};
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    CHECK(singles.count(subsample_analysis(ts, half, {"m"}, sched, seed)[0].scores.aucs[0]) == 1);
  }
}

TEST_CASE("curve and table CSV") {
  const std::vector<AccuracyCurve> cs{curve({{0, 0}, {0.5, 0.25}, {1, 1}}, "vanilla", "KAE"),
                                      curve({{0, 0.1}, {1, 0.3}}, "random", "KAE"),
                                      curve({{0, 0}, {1, 0.5}}, "random", "crowd")};
  const std::string csv = export_curves_csv(cs);
  CHECK(csv.rfind("scheme,method,rate,accuracy\nKAE,vanilla,0,0\nKAE,vanilla,0.5,0.25\n", 0) == 0);
  CHECK(parse_curves_csv(csv) == cs);
  CHECK_THROWS_AS(parse_curves_csv("a,b\n"), Error);
  CHECK_THROWS_AS(parse_curves_csv("scheme,method,rate,accuracy\nKAE,x,zero,1\n"), Error);

  const auto table = score_table(cs);
  REQUIRE(table.size() == 2);
  CHECK(table[0].ranks == std::vector<int>{1, 2});
  CHECK(export_table_csv(table) ==
        "scheme,method,auc,rank\nKAE,vanilla,0.375,1\nKAE,random,0.2,2\ncrowd,random,0.25,1\n");
  const std::vector<AccuracyCurve> bad{curve({{0, 0}, {1, 1}}, "a,b", "KAE")};
  CHECK_THROWS_AS(export_curves_csv(bad), Error);
}
