#include "peekaboom/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "peekaboom/encoding.hpp"
#include "peekaboom/error.hpp"
#include "peekaboom/random.hpp"
#include "peekaboom/storage.hpp"

namespace peekaboom {

namespace {

// Mean ranks, 1-based; tied values share the average of their positions.
std::vector<double> fractional_ranks(std::span<const double> values, bool& has_ties) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  has_ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    if (j - i > 1) has_ties = true;
    const double mean = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean;
    i = j;
  }
  return ranks;
}

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    fail(Errc::invalid_argument, std::string(what) + ": length mismatch (" +
                                     std::to_string(a.size()) + " vs " +
                                     std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) fail(Errc::invalid_argument, std::string(what) + ": need at least 2 items");
  for (auto s : {a, b}) {
    for (double v : s) {
      if (!std::isfinite(v)) fail(Errc::non_finite, std::string(what) + ": non-finite rank");
    }
  }
}

std::size_t bin_count(double width) {
  const double inv = 1.0 / width;
  const double nearest = std::round(inv);
  return static_cast<std::size_t>(std::fabs(inv - nearest) < 1e-9 ? nearest : std::ceil(inv));
}

Histogram histogram_of(const std::map<std::string, double>& means, double width) {
  Histogram h;
  h.bin_width = width;
  h.counts.assign(bin_count(width), 0);
  for (const auto& [id, v] : means) {
    auto bin = static_cast<std::size_t>(std::floor(v / width + 1e-9));
    h.counts[std::min(bin, h.counts.size() - 1)]++;
  }
  return h;
}

void check_csv_field(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos) {
    fail(Errc::invalid_argument, "identifier '" + s + "' cannot be written to CSV");
  }
}

}  // namespace

Direction scheme_direction(std::string_view scheme) {
  if (scheme == "ROAR" || scheme == "ROAE") return Direction::lower_better;
  if (scheme == "crowd" || scheme == "KAR" || scheme == "KAE") return Direction::higher_better;
  fail(Errc::invalid_argument, "unknown scheme '" + std::string(scheme) + "'");
}

void AccuracyCurve::validate() const {
  if (points.size() < 2) fail(Errc::invalid_argument, "curve needs at least two points");
  if (points.front().rate != 0.0 || points.back().rate != 1.0) {
    fail(Errc::invalid_argument, "curve grid must start at 0 and end at 1");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.accuracy >= 0.0 && p.accuracy <= 1.0)) {
      fail(Errc::out_of_range, "curve accuracy outside [0,1] at rate " + format_double(p.rate));
    }
    if (i > 0 && !(p.rate > points[i - 1].rate)) {
      fail(Errc::invalid_argument, "curve rates must be strictly ascending");
    }
  }
}

double AccuracyCurve::at(double rate) const {
  for (const auto& p : points) {
    if (p.rate == rate) return p.accuracy;
  }
  fail(Errc::not_found, "curve " + scheme + "/" + method_id + " has no rate " +
                            format_double(rate));
}

std::vector<TrialRecord> completed_trials(std::span<const Event> events,
                                          bool include_abandoned) {
  ReplayResult replayed = replay(events);
  if (replayed.error) {
    fail(Errc::schema, "event " + std::to_string(replayed.error->seq) + ": " +
                           replayed.error->message);
  }
  const CampaignState& state = replayed.state;
  std::vector<TrialRecord> out;
  for (const auto& [id, t] : state.trials) {
    if (t.status == TrialStatus::in_progress) continue;
    if (t.status == TrialStatus::abandoned && !include_abandoned) continue;
    const PairInfo& pair = state.pair(t.pair_id);
    TrialRecord r;
    r.trial_id = id;
    r.worker_id = t.worker_id;
    r.pair_id = t.pair_id;
    r.image_id = pair.image_id;
    r.method_id = pair.method_id;
    r.correct = t.status == TrialStatus::correct;
    r.rate = r.correct ? t.correct_rate : 1.0;
    out.push_back(std::move(r));
  }
  return out;
}

AccuracyCurve crowd_accuracy_curve(std::span<const TrialRecord> trials,
                                   const std::string& method_id,
                                   const ExposureSchedule& schedule) {
  std::vector<double> correct_rates;
  std::size_t total = 0;
  for (const auto& t : trials) {
    if (t.method_id != method_id) continue;
    ++total;
    if (t.correct) correct_rates.push_back(t.rate);
  }
  if (total == 0) fail(Errc::no_data, "no completed trials for method '" + method_id + "'");
  AccuracyCurve curve;
  curve.method_id = method_id;
  curve.scheme = "crowd";
  curve.points.push_back({0.0, 0.0});
  for (double r : schedule.rates()) {
    const auto hits = std::count_if(correct_rates.begin(), correct_rates.end(),
                                    [r](double c) { return c <= r; });
    curve.points.push_back({r, static_cast<double>(hits) / static_cast<double>(total)});
  }
  return curve;
}

double auc(const AccuracyCurve& curve) {
  curve.validate();
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& lo = curve.points[i - 1];
    const auto& hi = curve.points[i];
    area += 0.5 * (hi.rate - lo.rate) * (hi.accuracy + lo.accuracy);
  }
  return area;
}

std::vector<int> rank_methods(std::span<const double> scores, Direction direction) {
  if (scores.empty()) fail(Errc::invalid_argument, "rank_methods: no scores");
  for (double s : scores) {
    if (!std::isfinite(s)) fail(Errc::non_finite, "rank_methods: non-finite score");
  }
  std::vector<int> ranks(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    int better = 0;
    for (double other : scores) {
      const bool wins = direction == Direction::higher_better ? other > scores[i]
                                                              : other < scores[i];
      if (wins) ++better;
    }
    ranks[i] = better + 1;
  }
  return ranks;
}

double spearman(std::span<const double> rank_a, std::span<const double> rank_b) {
  check_pair(rank_a, rank_b, "spearman");
  bool ties_a = false, ties_b = false;
  const auto ra = fractional_ranks(rank_a, ties_a);
  const auto rb = fractional_ranks(rank_b, ties_b);
  const std::size_t n = ra.size();
  if (!ties_a && !ties_b) {
    // Integer ranks: evaluate 1 - 6 S / (n(n^2-1)) as one exact quotient.
    std::int64_t sum_d2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = static_cast<std::int64_t>(ra[i]) - static_cast<std::int64_t>(rb[i]);
      sum_d2 += d * d;
    }
    const auto nn = static_cast<std::int64_t>(n);
    const std::int64_t denom = nn * (nn * nn - 1);
    return static_cast<double>(denom - 6 * sum_d2) / static_cast<double>(denom);
  }
  const double mean = 0.5 * static_cast<double>(n + 1);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (va == 0.0 || vb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov / std::sqrt(va * vb);
}

double kendall(std::span<const double> rank_a, std::span<const double> rank_b) {
  check_pair(rank_a, rank_b, "kendall");
  const std::size_t n = rank_a.size();
  std::int64_t concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = rank_a[i] - rank_a[j];
      const double db = rank_b[i] - rank_b[j];
      if (da == 0.0 && db == 0.0) {
        ++ties_a;
        ++ties_b;
      } else if (da == 0.0) {
        ++ties_a;
      } else if (db == 0.0) {
        ++ties_b;
      } else if ((da > 0) == (db > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const auto pairs = static_cast<std::int64_t>(n * (n - 1) / 2);
  if (ties_a == 0 && ties_b == 0) {
    return static_cast<double>(concordant - discordant) / static_cast<double>(pairs);
  }
  const double denom = std::sqrt(static_cast<double>(pairs - ties_a) *
                                 static_cast<double>(pairs - ties_b));
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(concordant - discordant) / denom;
}

std::map<std::string, std::vector<RateCorrelation>> correlation_vs_exposure(
    std::span<const AccuracyCurve> crowd, std::span<const AccuracyCurve> automated,
    const ExposureSchedule& schedule) {
  if (crowd.size() < 2) fail(Errc::invalid_argument, "need at least two crowd curves");
  std::vector<std::string> methods;
  for (const auto& c : crowd) methods.push_back(c.method_id);

  std::map<std::string, std::map<std::string, const AccuracyCurve*>> by_scheme;
  std::vector<std::string> scheme_order;
  for (const auto& c : automated) {
    if (!by_scheme.count(c.scheme)) scheme_order.push_back(c.scheme);
    by_scheme[c.scheme][c.method_id] = &c;
  }

  std::map<std::string, std::vector<RateCorrelation>> out;
  for (const auto& scheme : scheme_order) {
    const auto& curves = by_scheme[scheme];
    const Direction dir = scheme_direction(scheme);
    for (const auto& m : methods) {
      if (!curves.count(m)) {
        fail(Errc::not_found, "scheme " + scheme + " has no curve for method '" + m + "'");
      }
    }
    auto& rows = out[scheme];
    for (double r : schedule.rates()) {
      std::vector<double> human, machine;
      for (std::size_t i = 0; i < methods.size(); ++i) {
        human.push_back(crowd[i].at(r));
        machine.push_back(curves.at(methods[i])->at(r));
      }
      const auto hr = rank_methods(human, Direction::higher_better);
      const auto mr = rank_methods(machine, dir);
      const std::vector<double> a(hr.begin(), hr.end()), b(mr.begin(), mr.end());
      rows.push_back({r, spearman(a, b), kendall(a, b)});
    }
  }
  return out;
}

DifficultyReport difficulty_histograms(std::span<const TrialRecord> trials, double bin_width) {
  if (!(bin_width > 0.0 && bin_width <= 1.0)) {
    fail(Errc::invalid_argument, "bin width must be in (0,1]");
  }
  std::map<std::string, std::pair<double, std::size_t>> images, workers;
  for (const auto& t : trials) {
    auto& im = images[t.image_id];
    im.first += t.rate;
    im.second++;
    auto& wk = workers[t.worker_id];
    wk.first += t.rate;
    wk.second++;
  }
  DifficultyReport report;
  for (const auto& [id, acc] : images) {
    report.image_mean_rate[id] = acc.first / static_cast<double>(acc.second);
  }
  for (const auto& [id, acc] : workers) {
    report.worker_mean_rate[id] = acc.first / static_cast<double>(acc.second);
  }
  report.images = histogram_of(report.image_mean_rate, bin_width);
  report.workers = histogram_of(report.worker_mean_rate, bin_width);
  return report;
}

std::vector<ScoreRow> score_table(std::span<const AccuracyCurve> curves) {
  std::vector<ScoreRow> rows;
  for (const auto& c : curves) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const ScoreRow& r) { return r.scheme == c.scheme; });
    if (it == rows.end()) {
      rows.push_back(ScoreRow{c.scheme, scheme_direction(c.scheme), {}, {}, {}});
      it = rows.end() - 1;
    }
    it->methods.push_back(c.method_id);
    it->aucs.push_back(auc(c));
  }
  for (auto& row : rows) row.ranks = rank_methods(row.aucs, row.direction);
  return rows;
}

std::vector<SubsampleRow> subsample_analysis(std::span<const TrialRecord> trials,
                                             std::span<const double> levels,
                                             const std::vector<std::string>& methods,
                                             const ExposureSchedule& schedule,
                                             std::uint64_t seed) {
  std::map<std::string, std::vector<const TrialRecord*>> by_pair;
  for (const auto& t : trials) by_pair[t.pair_id].push_back(&t);
  if (by_pair.empty()) fail(Errc::no_data, "no completed trials");
  for (auto& [pid, list] : by_pair) {
    std::sort(list.begin(), list.end(),
              [](const TrialRecord* a, const TrialRecord* b) { return a->trial_id < b->trial_id; });
  }
  std::size_t min_count = SIZE_MAX;
  for (const auto& [pid, list] : by_pair) min_count = std::min(min_count, list.size());

  std::vector<SubsampleRow> out;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double level = levels[li];
    if (!(level > 0.0) || !std::isfinite(level)) {
      fail(Errc::invalid_argument, "workers-per-pair level must be positive");
    }
    const auto whole = static_cast<std::size_t>(std::floor(level));
    const double frac = level - static_cast<double>(whole);
    const std::size_t needed = whole + (frac > 0.0 ? 1 : 0);
    if (needed > min_count) {
      fail(Errc::no_data, "level " + format_double(level) + " needs " + std::to_string(needed) +
                              " trials per pair; some pair has only " +
                              std::to_string(min_count));
    }
    Rng rng(mix_seed(seed, li));
    const std::size_t extra =
        static_cast<std::size_t>(std::llround(frac * static_cast<double>(by_pair.size())));
    std::vector<std::size_t> pair_slots(by_pair.size());
    std::iota(pair_slots.begin(), pair_slots.end(), 0);
    for (std::size_t i = 0; i < extra; ++i) {
      std::swap(pair_slots[i], pair_slots[i + uniform_index(rng, pair_slots.size() - i)]);
    }
    std::vector<char> gets_extra(by_pair.size(), 0);
    for (std::size_t i = 0; i < extra; ++i) gets_extra[pair_slots[i]] = 1;

    std::vector<TrialRecord> sample;
    std::size_t p = 0;
    for (const auto& [pid, list] : by_pair) {
      const std::size_t take = whole + (gets_extra[p++] ? 1 : 0);
      std::vector<const TrialRecord*> pool = list;
      for (std::size_t i = 0; i < take; ++i) {
        std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
        sample.push_back(*pool[i]);
      }
    }

    std::vector<AccuracyCurve> curves;
    for (const auto& m : methods) curves.push_back(crowd_accuracy_curve(sample, m, schedule));
    auto rows = score_table(curves);
    out.push_back(SubsampleRow{level, std::move(rows.front())});
  }
  return out;
}

std::string export_curves_csv(std::span<const AccuracyCurve> curves) {
  std::string out = "scheme,method,rate,accuracy\n";
  for (const auto& c : curves) {
    check_csv_field(c.scheme);
    check_csv_field(c.method_id);
    for (const auto& p : c.points) {
      out += c.scheme + "," + c.method_id + "," + format_double(p.rate) + "," +
             format_double(p.accuracy) + "\n";
    }
  }
  return out;
}

std::string export_table_csv(std::span<const ScoreRow> rows) {
  std::string out = "scheme,method,auc,rank\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.methods.size(); ++i) {
      check_csv_field(row.methods[i]);
      out += row.scheme + "," + row.methods[i] + "," + format_double(row.aucs[i]) + "," +
             std::to_string(row.ranks[i]) + "\n";
    }
  }
  return out;
}

std::vector<AccuracyCurve> parse_curves_csv(std::string_view text) {
  std::vector<AccuracyCurve> curves;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "scheme,method,rate,accuracy") {
    fail(Errc::schema, "curve file lacks the 'scheme,method,rate,accuracy' header");
  }
  auto parse_num = [](const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      fail(Errc::schema, "bad number '" + s + "' in curve file");
    }
    return v;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != 4) fail(Errc::schema, "curve row needs 4 columns: " + line);
    if (curves.empty() || curves.back().scheme != cols[0] || curves.back().method_id != cols[1]) {
      curves.push_back(AccuracyCurve{cols[1], cols[0], {}});
    }
    curves.back().points.push_back({parse_num(cols[2]), parse_num(cols[3])});
  }
  return curves;
}

}  // namespace peekaboom
