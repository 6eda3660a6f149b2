#include "ambiup/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ambiup {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

int condition_index(const std::string& name) {
    for (int i = 0; i < kNumConditions; ++i)
        if (name == kConditionNames[static_cast<std::size_t>(i)]) return i;
    throw std::runtime_error("unknown rating condition: " + name);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

GridSearchResult grid_search_decode(const BFormat& bf, AudioBuffer* render) {
    bf.validate();
    if (bf.num_samples() == 0) throw std::invalid_argument("grid_search_decode: empty B-format");

    // Second moments of the field; RMS at any angle follows in closed form.
    const std::size_t n = bf.num_samples();
    double sww = 0, sxx = 0, syy = 0, swx = 0, swy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = bf.w[i], x = bf.x[i], y = bf.y[i];
        sww += w * w;
        sxx += x * x;
        syy += y * y;
        swx += w * x;
        swy += w * y;
        sxy += x * y;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    sww *= inv_n; sxx *= inv_n; syy *= inv_n; swx *= inv_n; swy *= inv_n; sxy *= inv_n;

    auto rms_at = [&](double theta) {
        const double c = std::cos(theta), s = std::sin(theta);
        const double ms = sww + c * c * sxx + s * s * syy + 2.0 * c * swx + 2.0 * s * swy +
                          2.0 * c * s * sxy;
        return std::sqrt(std::max(0.0, ms));
    };

    GridSearchResult best;
    bool first = true;
    for (int theta_l = 0; theta_l < 360; ++theta_l) {
        const double rl = rms_at(theta_l * kPi / 180.0);
        for (int sep = 10; sep <= 180; sep += 10) {
            const double rr = rms_at((theta_l + sep) * kPi / 180.0);
            const double obj = std::abs(rl - rr);
            if (first || obj < best.objective) {
                first = false;
                best = {theta_l, sep, rl, rr, obj};
            }
        }
    }
    if (render) {
        *render = decode_stereo(bf, Azimuth(best.theta_l_deg * kPi / 180.0),
                                Azimuth((best.theta_l_deg + best.separation_deg) * kPi / 180.0));
    }
    return best;
}

std::vector<RatingSet> load_ratings_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_ratings_csv: cannot open " + path);

    std::map<std::pair<std::string, std::string>, std::array<bool, 5>> seen;
    std::map<std::pair<std::string, std::string>, RatingSet> sets;
    std::string line;
    bool header_checked = false;
    while (std::getline(f, line)) {
        line = trim(line);
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string rater, set_id, condition, score_str;
        if (!std::getline(ss, rater, ',') || !std::getline(ss, set_id, ',') ||
            !std::getline(ss, condition, ',') || !std::getline(ss, score_str, ','))
            throw std::runtime_error("load_ratings_csv: malformed line: " + line);
        rater = trim(rater);
        set_id = trim(set_id);
        condition = trim(condition);
        score_str = trim(score_str);
        if (!header_checked) {
            header_checked = true;
            if (rater == "rater_id") continue;  // optional header row
        }
        const int ci = condition_index(condition);
        double score;
        try {
            score = std::stod(score_str);
        } catch (const std::exception&) {
            throw std::runtime_error("load_ratings_csv: bad score: " + line);
        }
        if (!std::isfinite(score)) throw std::runtime_error("load_ratings_csv: non-finite score");

        const auto key = std::make_pair(rater, set_id);
        auto& set = sets[key];
        set.rater_id = rater;
        set.set_id = set_id;
        set.scores[static_cast<std::size_t>(ci)] = score;
        seen[key][static_cast<std::size_t>(ci)] = true;
    }

    std::vector<RatingSet> out;
    for (const auto& [key, set] : sets) {
        const auto& flags = seen[key];
        for (int i = 0; i < kNumConditions; ++i) {
            if (!flags[static_cast<std::size_t>(i)])
                throw std::runtime_error("load_ratings_csv: set (" + key.first + ", " + key.second +
                                         ") is missing condition " +
                                         kConditionNames[static_cast<std::size_t>(i)]);
        }
        out.push_back(set);
    }
    return out;
}

std::vector<RatingSet> filter_rating_sets(const std::vector<RatingSet>& sets) {
    std::vector<RatingSet> out;
    for (const auto& s : sets) {
        const double mono = s.scores[0];
        const double stereo = s.scores[4];
        if (!std::isfinite(mono) || !std::isfinite(stereo))
            throw std::invalid_argument("filter_rating_sets: non-finite score");
        if (mono > stereo) continue;
        out.push_back(s);
    }
    return out;
}

MosReport mos_report(const std::vector<RatingSet>& sets, double alpha) {
    if (sets.empty()) throw std::invalid_argument("mos_report: empty input");
    MosReport report;
    report.n_sets = static_cast<int>(sets.size());

    std::array<std::vector<double>, 5> scores;
    for (const auto& s : sets)
        for (int c = 0; c < kNumConditions; ++c)
            scores[static_cast<std::size_t>(c)].push_back(s.scores[static_cast<std::size_t>(c)]);

    for (int c = 0; c < kNumConditions; ++c) {
        const auto& v = scores[static_cast<std::size_t>(c)];
        const double m = mean_of(v);
        double half = 0.0;
        if (v.size() > 1) {
            const double sd = sample_stddev(v);
            half = student_t_quantile(0.975, static_cast<int>(v.size()) - 1) * sd /
                   std::sqrt(static_cast<double>(v.size()));
        }
        report.stats[static_cast<std::size_t>(c)] = {m, m - half, m + half};
    }

    for (int i = 0; i < kNumConditions; ++i) {
        for (int j = i + 1; j < kNumConditions; ++j) {
            double p = 1.0;
            bool sig = false;
            try {
                const WilcoxonResult w = wilcoxon_signed_rank(
                    scores[static_cast<std::size_t>(i)], scores[static_cast<std::size_t>(j)], alpha);
                p = w.p_value;
                sig = w.significant;
            } catch (const std::invalid_argument&) {
                // Nearly identical score vectors: no detectable difference.
            }
            report.p_values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = p;
            report.significant[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = sig;
        }
    }
    return report;
}

std::string MosReport::to_text() const {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "sets: %d\n\n%-14s %8s %10s %10s\n", n_sets, "condition",
                  "mean", "ci95_low", "ci95_high");
    out += buf;
    for (int c = 0; c < kNumConditions; ++c) {
        const auto& s = stats[static_cast<std::size_t>(c)];
        std::snprintf(buf, sizeof(buf), "%-14s %8.4f %10.4f %10.4f\n",
                      kConditionNames[static_cast<std::size_t>(c)], s.mean, s.ci_low, s.ci_high);
        out += buf;
    }
    out += "\npairwise wilcoxon signed-rank (Y = significant difference)\n";
    std::snprintf(buf, sizeof(buf), "%-14s", "");
    out += buf;
    for (int j = 1; j < kNumConditions; ++j) {
        std::snprintf(buf, sizeof(buf), " %-13s", kConditionNames[static_cast<std::size_t>(j)]);
        out += buf;
    }
    out += "\n";
    for (int i = 0; i + 1 < kNumConditions; ++i) {
        std::snprintf(buf, sizeof(buf), "%-14s", kConditionNames[static_cast<std::size_t>(i)]);
        out += buf;
        for (int j = 1; j < kNumConditions; ++j) {
            const char* cell =
                j <= i ? "-" : (significant[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ? "Y" : "N");
            std::snprintf(buf, sizeof(buf), " %-13s", cell);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace ambiup
