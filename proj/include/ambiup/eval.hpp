#pragma once

#include <array>
#include <string>
#include <vector>

#include "ambiup/ambisonic.hpp"
#include "ambiup/audio.hpp"
#include "ambiup/stats.hpp"

namespace ambiup {

/// Rating conditions, in report order.
inline constexpr std::array<const char*, 5> kConditionNames = {"mono", "baseline", "conditional",
                                                               "unconditional", "stereo"};
inline constexpr int kNumConditions = 5;

struct RatingSet {
    std::string rater_id;
    std::string set_id;
    std::array<double, 5> scores{};  // indexed by condition order above
};

/// Result of the decoding grid search: left speaker at 1-degree steps, L/R
/// separation at 10-degree steps in [10, 180].
struct GridSearchResult {
    int theta_l_deg = 0;
    int separation_deg = 10;
    double rms_l = 0.0;
    double rms_r = 0.0;
    double objective = 0.0;  // |rms_l - rms_r|
};

/// Scans all 360 x 18 candidates and picks the pair with the smallest RMS
/// imbalance; ties break to the smaller theta_l, then smaller separation.
/// RMS values come from the field's second moments, so the scan is O(1) per
/// candidate. Optionally returns the chosen stereo render.
GridSearchResult grid_search_decode(const BFormat& bf, AudioBuffer* render = nullptr);

/// Reads {rater_id, set_id, condition, score} records (comma-separated, one
/// per line, optional header). Every (rater, set) must cover all conditions.
std::vector<RatingSet> load_ratings_csv(const std::string& path);

/// Drops every set where mono outscored the original stereo; ties survive.
std::vector<RatingSet> filter_rating_sets(const std::vector<RatingSet>& sets);

struct ConditionStats {
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct MosReport {
    int n_sets = 0;
    std::array<ConditionStats, 5> stats;
    std::array<std::array<double, 5>, 5> p_values{};   // upper triangle
    std::array<std::array<bool, 5>, 5> significant{};  // upper triangle
    std::string to_text() const;
};

/// Per-condition means with t-based 95% confidence intervals and the pairwise
/// Wilcoxon significance matrix.
MosReport mos_report(const std::vector<RatingSet>& sets, double alpha = 0.05);

}  // namespace ambiup
