#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eeg2vec/error.hpp"

namespace eeg2vec {

/// One-vs-rest classification metrics. Precision or recall with a zero
/// denominator is reported as 0 and counted in zero_denominator_classes.
struct EvalReport {
    std::size_t n_samples = 0;
    double accuracy = 0.0;
    std::vector<double> precision, recall, f1;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::size_t zero_denominator_classes = 0;
};

inline EvalReport classification_report(const std::vector<int>& predictions, const std::vector<int>& labels,
                                        std::size_t num_classes = 0) {
    require(!labels.empty(), ErrorKind::precondition, "classification_report: empty input");
    require(predictions.size() == labels.size(), ErrorKind::precondition,
            "classification_report: predictions and labels differ in length");
    if (num_classes == 0) {
        const int mx = std::max(*std::max_element(labels.begin(), labels.end()),
                                *std::max_element(predictions.begin(), predictions.end()));
        num_classes = static_cast<std::size_t>(mx) + 1;
    }
    EvalReport r;
    r.n_samples = labels.size();
    r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < num_classes && predictions[i] >= 0 &&
                    static_cast<std::size_t>(predictions[i]) < num_classes,
                ErrorKind::precondition, "classification_report: class index out of range");
        ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    }
    std::size_t correct = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::size_t tp = r.confusion[c][c], row = 0, col = 0;
        for (std::size_t k = 0; k < num_classes; ++k) {
            row += r.confusion[c][k];
            col += r.confusion[k][c];
        }
        correct += tp;
        const double prec = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        const double rec = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        if (col == 0 || row == 0) ++r.zero_denominator_classes;
        r.precision.push_back(prec);
        r.recall.push_back(rec);
        r.f1.push_back(prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0);
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_samples);
    return r;
}

struct ParticipantReports {
    std::vector<int> participants;      // ascending, only those with trials
    std::vector<EvalReport> reports;    // aligned with participants
    std::vector<std::string> warnings;  // participants without trials
};

/// One report per participant present in `participants`; the per-(participant,
/// class) accuracies are the diagonal recalls of each report.
inline ParticipantReports per_participant_report(const std::vector<int>& predictions, const std::vector<int>& labels,
                                                 const std::vector<int>& participants, std::size_t num_classes,
                                                 std::size_t num_participants = 0) {
    require(predictions.size() == labels.size() && labels.size() == participants.size(), ErrorKind::precondition,
            "per_participant_report: inputs differ in length");
    std::map<int, std::pair<std::vector<int>, std::vector<int>>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        groups[participants[i]].first.push_back(predictions[i]);
        groups[participants[i]].second.push_back(labels[i]);
    }
    ParticipantReports out;
    for (std::size_t p = 0; p < num_participants; ++p)
        if (!groups.contains(static_cast<int>(p)))
            out.warnings.push_back("participant " + std::to_string(p) + " has no trials; skipped");
    for (const auto& [p, g] : groups) {
        out.participants.push_back(p);
        out.reports.push_back(classification_report(g.first, g.second, num_classes));
    }
    return out;
}

/// participant,class,n,correct,accuracy (accuracy empty when n = 0).
inline std::string participant_csv(const ParticipantReports& pr) {
    std::ostringstream os;
    os.precision(10);
    os << "participant,class,n,correct,accuracy\n";
    for (std::size_t i = 0; i < pr.participants.size(); ++i) {
        const auto& r = pr.reports[i];
        for (std::size_t c = 0; c < r.confusion.size(); ++c) {
            std::size_t n = 0;
            for (auto v : r.confusion[c]) n += v;
            os << pr.participants[i] << ',' << c << ',' << n << ',' << r.confusion[c][c] << ',';
            if (n) os << static_cast<double>(r.confusion[c][c]) / static_cast<double>(n);
            os << '\n';
        }
    }
    return os.str();
}

/// class,precision,recall,f1,support followed by an accuracy line.
inline std::string report_csv(const EvalReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << "class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < r.precision.size(); ++c) {
        std::size_t n = 0;
        for (auto v : r.confusion[c]) n += v;
        os << c << ',' << r.precision[c] << ',' << r.recall[c] << ',' << r.f1[c] << ',' << n << '\n';
    }
    os << "accuracy,,,," << r.accuracy << '\n';
    return os.str();
}

inline std::string report_text(const EvalReport& r) {
    std::ostringstream os;
    os.precision(4);
    os << "samples: " << r.n_samples << "\naccuracy: " << r.accuracy << "\n";
    for (std::size_t c = 0; c < r.precision.size(); ++c)
        os << "class " << c << ": precision " << r.precision[c] << " recall " << r.recall[c] << " f1 " << r.f1[c]
           << "\n";
    os << "confusion (rows = true class):\n";
    for (const auto& row : r.confusion) {
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? " " : "  ") << row[k];
        os << "\n";
    }
    if (r.zero_denominator_classes)
        os << "classes with a zero precision/recall denominator: " << r.zero_denominator_classes << "\n";
    return os.str();
}

struct MeanStd {
    double mean = 0.0, std = 0.0;
};

/// Sample mean and (n-1) standard deviation.
inline MeanStd mean_std(const std::vector<double>& v) {
    MeanStd m;
    if (v.empty()) return m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        for (double x : v) m.std += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(m.std / static_cast<double>(v.size() - 1));
    }
    return m;
}

}  // namespace eeg2vec
