#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peekaboom/event.hpp"
#include "peekaboom/masking.hpp"

namespace peekaboom {

enum class Direction { higher_better, lower_better };

// "crowd", "KAR", "KAE" rank higher AUC first; "ROAR", "ROAE" lower first.
Direction scheme_direction(std::string_view scheme);

struct CurvePoint {
  double rate = 0.0;
  double accuracy = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct AccuracyCurve {
  std::string method_id;
  std::string scheme;
  std::vector<CurvePoint> points;

  // Rates strictly ascending from 0 to 1, accuracies in [0,1].
  void validate() const;
  // Accuracy at an exact grid rate; Error(not_found) if absent.
  double at(double rate) const;

  bool operator==(const AccuracyCurve&) const = default;
};

// A finished crowd trial joined with its pair.
struct TrialRecord {
  std::string trial_id;
  std::string worker_id;
  std::string pair_id;
  std::string image_id;
  std::string method_id;
  bool correct = false;
  double rate = 1.0;  // first-correct exposure; 1.0 for exhausted trials

  bool operator==(const TrialRecord&) const = default;
};

// Correct and exhausted trials of a campaign log; abandoned and unfinished
// trials are dropped unless include_abandoned (then they count as
// exhausted).
std::vector<TrialRecord> completed_trials(std::span<const Event> events,
                                          bool include_abandoned = false);

// a(r_i) = #(correct at rate <= r_i) / #completed, with (0, 0) prepended.
// Error(no_data) when the method has no completed trial.
AccuracyCurve crowd_accuracy_curve(std::span<const TrialRecord> trials,
                                   const std::string& method_id,
                                   const ExposureSchedule& schedule);

// Trapezoid sum over the curve's grid.
double auc(const AccuracyCurve& curve);

// Competition ranking ("1224"); rank 1 is best under `direction`.
std::vector<int> rank_methods(std::span<const double> scores, Direction direction);

// Pearson correlation of mean (fractional) ranks of the inputs; equals
// 1 - 6 sum d^2 / (n(n^2-1)) for tie-free rankings. NaN when either side is
// constant.
double spearman(std::span<const double> rank_a, std::span<const double> rank_b);

// Kendall tau-b; tau-a for tie-free input. NaN when either side is constant.
double kendall(std::span<const double> rank_a, std::span<const double> rank_b);

struct RateCorrelation {
  double rate = 0.0;
  double spearman = 0.0;
  double kendall = 0.0;
};

// For each schedule rate, ranks methods by crowd accuracy (higher better)
// and by each automated scheme's accuracy (scheme direction), then
// correlates the two rankings. Keyed by scheme name.
std::map<std::string, std::vector<RateCorrelation>> correlation_vs_exposure(
    std::span<const AccuracyCurve> crowd, std::span<const AccuracyCurve> automated,
    const ExposureSchedule& schedule);

struct Histogram {
  double bin_width = 0.1;
  std::vector<std::size_t> counts;  // bin i covers [i*w, (i+1)*w); 1.0 lands in the last bin
};

struct DifficultyReport {
  std::map<std::string, double> image_mean_rate;
  std::map<std::string, double> worker_mean_rate;
  Histogram images;
  Histogram workers;
};

DifficultyReport difficulty_histograms(std::span<const TrialRecord> trials, double bin_width);

struct ScoreRow {
  std::string scheme;
  Direction direction = Direction::higher_better;
  std::vector<std::string> methods;
  std::vector<double> aucs;
  std::vector<int> ranks;
};

struct SubsampleRow {
  double level = 0.0;
  ScoreRow scores;
};

// Per level l = k + f (k integer, 0 <= f < 1): every pair keeps k trials
// and round(f * pairs) randomly chosen pairs keep one more, all drawn
// without replacement. Error(no_data) when a level needs more trials than a
// pair has.
std::vector<SubsampleRow> subsample_analysis(std::span<const TrialRecord> trials,
                                             std::span<const double> levels,
                                             const std::vector<std::string>& methods,
                                             const ExposureSchedule& schedule,
                                             std::uint64_t seed);

// Groups curves by scheme (first-seen order) and ranks each group.
std::vector<ScoreRow> score_table(std::span<const AccuracyCurve> curves);

// Comma-separated, header "scheme,method,rate,accuracy".
std::string export_curves_csv(std::span<const AccuracyCurve> curves);
// Header "scheme,method,auc,rank".
std::string export_table_csv(std::span<const ScoreRow> rows);
std::vector<AccuracyCurve> parse_curves_csv(std::string_view text);

}  // namespace peekaboom
