#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anomaly/metrics/classification.hpp"
#include "anomaly/metrics/csv.hpp"

namespace anomaly {

struct SampleScore {
    std::string path;
    Label label = Label::good;
    double score = 0.0;
    Label decision = Label::good;

    bool operator==(const SampleScore&) const = default;
};

struct EvalReport {
    std::string method;
    std::string dataset;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> thresholds;
    std::vector<SampleScore> samples;
    ConfusionCounts confusion;
    double f1 = 0.0;
    std::optional<double> roc_auc;  // empty when only one class is present
};

inline constexpr const char* kReportFooter =
    "# f1 = tp/(tp+(fp+fn)/2), defined as 0 when tp+fp+fn = 0; roc_auc counts tied scores as 1/2";

/// Fill confusion, f1 and roc_auc from the per-sample records.
inline void finalize_report(EvalReport& r) {
    std::vector<Label> labels, decisions;
    std::vector<double> scores;
    for (const auto& s : r.samples) {
        labels.push_back(s.label);
        decisions.push_back(s.decision);
        scores.push_back(s.score);
    }
    r.confusion = confusion_counts(labels, decisions);
    r.f1 = f1_score(r.confusion);
    const bool both = std::find(labels.begin(), labels.end(), Label::good) != labels.end() &&
                      std::find(labels.begin(), labels.end(), Label::defect) != labels.end();
    r.roc_auc = both ? std::optional<double>(roc_auc(scores, labels)) : std::nullopt;
}

namespace detail {

inline void write_samples(const std::filesystem::path& path, const std::vector<SampleScore>& samples, bool exact) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "path,label,score,decision\n";
    for (const auto& s : samples) {
        out << csv::quote(s.path) << ',' << to_string(s.label) << ','
            << (exact ? csv::exact(s.score) : csv::fixed(s.score)) << ',' << to_string(s.decision) << '\n';
    }
}

}  // namespace detail

/// Writes summary.csv (`metric,value`), scores.csv (`path,label,score,decision`,
/// 6 decimals) and scores_exact.csv (same columns, round-trip precision).
inline void save_report(const EvalReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "summary.csv", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "summary.csv").string());
    out << "metric,value\n";
    out << "method," << csv::quote(r.method) << '\n';
    out << "dataset," << csv::quote(r.dataset) << '\n';
    out << "seed," << r.seed << '\n';
    out << "samples," << r.samples.size() << '\n';
    out << "tp," << r.confusion.tp << '\n' << "fp," << r.confusion.fp << '\n';
    out << "tn," << r.confusion.tn << '\n' << "fn," << r.confusion.fn << '\n';
    out << "f1," << csv::fixed(r.f1) << '\n';
    out << "roc_auc," << (r.roc_auc ? csv::fixed(*r.roc_auc) : std::string("undefined")) << '\n';
    for (const auto& [name, value] : r.thresholds) out << "threshold." << name << ',' << csv::fixed(value) << '\n';
    out << kReportFooter << '\n';
    detail::write_samples(dir / "scores.csv", r.samples, false);
    detail::write_samples(dir / "scores_exact.csv", r.samples, true);
}

/// Reload a saved report; confusion, f1 and roc_auc are recomputed from the
/// exact per-sample scores.
inline EvalReport load_report(const std::filesystem::path& dir) {
    EvalReport r;
    std::ifstream summary(dir / "summary.csv");
    if (!summary) throw DataError("missing " + (dir / "summary.csv").string());
    std::string line;
    std::getline(summary, line);
    if (line != "metric,value") throw DataError((dir / "summary.csv").string() + ": unexpected header");
    while (std::getline(summary, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = csv::split_record(line);
        if (f.size() != 2) throw DataError("summary.csv: malformed line '" + line + "'");
        if (f[0] == "method") r.method = f[1];
        else if (f[0] == "dataset") r.dataset = f[1];
        else if (f[0] == "seed") r.seed = std::stoull(f[1]);
        else if (f[0].starts_with("threshold.")) r.thresholds.emplace_back(f[0].substr(10), csv::parse_double(f[1]));
    }
    std::ifstream scores(dir / "scores_exact.csv");
    if (!scores) throw DataError("missing " + (dir / "scores_exact.csv").string());
    std::getline(scores, line);
    while (std::getline(scores, line)) {
        if (line.empty()) continue;
        const auto f = csv::split_record(line);
        if (f.size() != 4) throw DataError("scores_exact.csv: malformed line '" + line + "'");
        r.samples.push_back({f[0], parse_label(f[1]), csv::parse_double(f[2]), parse_label(f[3])});
    }
    if (r.samples.empty()) throw DataError((dir / "scores_exact.csv").string() + ": no samples");
    finalize_report(r);
    return r;
}

}  // namespace anomaly
