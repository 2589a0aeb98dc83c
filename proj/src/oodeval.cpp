#include "tailmix/oodeval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tailmix/losses.hpp"

namespace tailmix {

const char* proto_score_name(ProtoScore s) {
    return s == ProtoScore::distance_softmax ? "distance_softmax" : "neg_min_distance";
}

ProtoScore proto_score_from_name(const std::string& name) {
    if (name == "distance_softmax") return ProtoScore::distance_softmax;
    if (name == "neg_min_distance") return ProtoScore::neg_min_distance;
    throw ConfigError("unknown prototype score mode '" + name +
                      "' (expected distance_softmax or neg_min_distance)");
}

Confidence confidence_softmax(std::span<const double> logits) {
    if (logits.size() < 2) throw DimensionError("confidence needs at least 2 logits");
    int arg = 0;
    for (size_t k = 1; k < logits.size(); ++k)
        if (logits[k] > logits[arg]) arg = static_cast<int>(k);
    double lse = logsumexp(logits);
    return {arg, std::exp(logits[arg] - lse)};
}

Confidence confidence_prototype(std::span<const double> f, const PrototypeBank& bank,
                                ProtoScore mode) {
    std::vector<double> d = squared_distances(f, bank);
    int arg = 0;
    for (size_t k = 1; k < d.size(); ++k)
        if (d[k] < d[arg]) arg = static_cast<int>(k);
    if (mode == ProtoScore::neg_min_distance) return {arg, std::exp(-d[arg])};
    std::vector<double> logits(d.size());
    for (size_t k = 0; k < d.size(); ++k) logits[k] = -bank.gamma_d * d[k];
    double lse = logsumexp(logits);
    return {arg, std::exp(logits[arg] - lse)};
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
    if (id_scores.empty() || ood_scores.empty())
        throw MetricError("auroc needs nonempty ID and OOD score lists");
    struct Tagged {
        double score;
        bool id;
    };
    std::vector<Tagged> all;
    all.reserve(id_scores.size() + ood_scores.size());
    for (double s : id_scores) {
        if (!std::isfinite(s)) throw MetricError("auroc: non-finite ID score");
        all.push_back({s, true});
    }
    for (double s : ood_scores) {
        if (!std::isfinite(s)) throw MetricError("auroc: non-finite OOD score");
        all.push_back({s, false});
    }
    std::sort(all.begin(), all.end(),
              [](const Tagged& a, const Tagged& b) { return a.score < b.score; });

    // Sum of average ranks over the ID samples; ranks are half-integers so
    // the sum is exact in double well past any realistic list size.
    double id_rank_sum = 0.0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k)
            if (all[k].id) id_rank_sum += avg_rank;
        i = j;
    }
    double n = static_cast<double>(id_scores.size());
    double m = static_cast<double>(ood_scores.size());
    double u = id_rank_sum - n * (n + 1.0) / 2.0;
    return u / (n * m);
}

ReportFragment classification_report(const std::vector<int>& predictions,
                                     const std::vector<int>& labels,
                                     const SubsetPartition& partition, int num_classes) {
    if (predictions.size() != labels.size())
        throw MetricError("classification report: " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(labels.size()) + " labels");
    if (num_classes < 1) throw MetricError("classification report: no classes");

    std::vector<long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    long corr_head = 0, corr_middle = 0, corr_tail = 0;
    long n_head = 0, n_middle = 0, n_tail = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        int y = labels[i], p = predictions[i];
        if (y < 0 || y >= num_classes)
            throw MetricError("classification report: label " + std::to_string(y) +
                              " outside [0, " + std::to_string(num_classes) + ")");
        if (p < 0 || p >= num_classes)
            throw MetricError("classification report: prediction " + std::to_string(p) +
                              " outside [0, " + std::to_string(num_classes) + ")");
        bool correct = (p == y);
        if (correct)
            ++tp[y];
        else {
            ++fp[p];
            ++fn[y];
        }
        switch (partition.of(y)) {
        case Subset::head:
            ++n_head;
            corr_head += correct;
            break;
        case Subset::middle:
            ++n_middle;
            corr_middle += correct;
            break;
        case Subset::tail:
            ++n_tail;
            corr_tail += correct;
            break;
        }
    }

    auto safe_div = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
    double psum = 0, rsum = 0, fsum = 0;
    for (int c = 0; c < num_classes; ++c) {
        double prec = safe_div(static_cast<double>(tp[c]), static_cast<double>(tp[c] + fp[c]));
        double rec = safe_div(static_cast<double>(tp[c]), static_cast<double>(tp[c] + fn[c]));
        double f1 = safe_div(2.0 * prec * rec, prec + rec);
        psum += prec;
        rsum += rec;
        fsum += f1;
    }

    ReportFragment out;
    out.n_head = n_head;
    out.n_middle = n_middle;
    out.n_tail = n_tail;
    out.n_total = static_cast<long>(labels.size());
    out.acc_head = safe_div(static_cast<double>(corr_head), static_cast<double>(n_head));
    out.acc_middle = safe_div(static_cast<double>(corr_middle), static_cast<double>(n_middle));
    out.acc_tail = safe_div(static_cast<double>(corr_tail), static_cast<double>(n_tail));
    out.acc_total = safe_div(static_cast<double>(corr_head + corr_middle + corr_tail),
                             static_cast<double>(out.n_total));
    out.macro_precision = psum / num_classes;
    out.macro_recall = rsum / num_classes;
    out.macro_f1 = fsum / num_classes;
    out.n_classes = num_classes;
    return out;
}

std::vector<DensityRow> density_export(const std::map<std::string, std::vector<double>>& groups,
                                       int bins, std::vector<std::string>* warnings) {
    if (bins < 2) throw ConfigError("density export needs bins >= 2");
    std::vector<DensityRow> rows;
    for (const auto& [name, scores] : groups) {
        if (scores.empty()) {
            if (warnings) warnings->push_back("density: group '" + name + "' is empty, omitted");
            continue;
        }
        std::vector<long> counts(bins, 0);
        for (double s : scores) {
            if (!std::isfinite(s)) throw MetricError("density: non-finite score in '" + name + "'");
            int idx = static_cast<int>(s * bins);
            idx = std::clamp(idx, 0, bins - 1);
            ++counts[idx];
        }
        // density integrates to 1: count / (n * width), width = 1/bins
        double scale = static_cast<double>(bins) / static_cast<double>(scores.size());
        for (int b = 0; b < bins; ++b)
            rows.push_back({name, (b + 0.5) / bins, counts[b] * scale});
    }
    return rows;
}

namespace {

GroupSummary summarize(const std::string& name, const std::vector<double>& scores) {
    GroupSummary g;
    g.name = name;
    g.count = static_cast<long>(scores.size());
    if (scores.empty()) return g;
    double sum = 0;
    for (double s : scores) sum += s;
    g.mean = sum / static_cast<double>(scores.size());
    double var = 0;
    for (double s : scores) var += (s - g.mean) * (s - g.mean);
    g.stdev = std::sqrt(var / static_cast<double>(scores.size()));
    return g;
}

Matrix to_matrix(const Dataset& ds) {
    if (ds.samples.empty()) throw MetricError("cannot evaluate an empty dataset");
    Matrix x(static_cast<int>(ds.samples.size()), ds.feature_dim());
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& f = ds.samples[i].features;
        std::copy(f.begin(), f.end(), x.data.begin() + static_cast<long>(i) * x.cols);
    }
    return x;
}

// Confidence for every row; uses the prototype head when a bank is given,
// the classifier logits otherwise.
std::pair<std::vector<int>, std::vector<double>> score_dataset(const Encoder& encoder,
                                                               const PrototypeBank* bank,
                                                               const Dataset& ds,
                                                               ProtoScore mode) {
    Matrix x = to_matrix(ds);
    ForwardTrace trace = forward(encoder, x);
    std::vector<int> preds(ds.samples.size());
    std::vector<double> scores(ds.samples.size());
    for (int i = 0; i < x.rows; ++i) {
        Confidence c;
        if (bank)
            c = confidence_prototype(trace.embeddings.row(i), *bank, mode);
        else if (trace.logits)
            c = confidence_softmax(trace.logits->row(i));
        else
            throw StateError("model has neither a classifier head nor prototypes");
        preds[i] = c.predicted;
        scores[i] = c.score;
    }
    return {std::move(preds), std::move(scores)};
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.2f", v * 100.0);
    return buf;
}

} // namespace

EvalReport evaluate_model(const Encoder& encoder, const PrototypeBank* bank, const Dataset& test,
                          const std::map<std::string, Dataset>& ood_sources,
                          const SubsetPartition& partition, const EvalOptions& options) {
    EvalReport report;
    report.partition_mode = partition_mode_name(partition.mode);

    auto [preds, scores] = score_dataset(encoder, bank, test, options.proto_score);
    report.predictions = preds;
    report.scores = scores;
    report.labels.reserve(test.samples.size());
    for (const auto& s : test.samples) report.labels.push_back(s.label);
    report.closed_set =
        classification_report(report.predictions, report.labels, partition, test.class_count);

    for (const auto& [name, ds] : ood_sources) {
        auto [op, os] = score_dataset(encoder, bank, ds, options.proto_score);
        (void)op;
        report.auroc_by_source.emplace_back(name, auroc(report.scores, os));
        report.ood_scores.emplace(name, std::move(os));
    }

    auto groups = confidence_groups_for_density(report, partition);
    for (const auto& [name, list] : groups)
        report.confidence_groups.push_back(summarize(name, list));
    return report;
}

std::map<std::string, std::vector<double>> confidence_groups_for_density(
    const EvalReport& report, const SubsetPartition& partition) {
    std::map<std::string, std::vector<double>> groups;
    groups["H"];
    groups["M"];
    groups["T"];
    for (size_t i = 0; i < report.labels.size(); ++i) {
        Subset s = partition.of(report.labels[i]);
        const char* key = s == Subset::head ? "H" : s == Subset::middle ? "M" : "T";
        groups[key].push_back(report.scores[i]);
    }
    for (const auto& [name, list] : report.ood_scores) groups["OOD:" + name] = list;
    return groups;
}

std::string eval_report_text(const EvalReport& report) {
    std::ostringstream out;
    out << "partition mode:    " << report.partition_mode << "\n";
    out << "checkpoint:        " << report.checkpoint_kind;
    if (report.checkpoint_kind == "best" && report.best_epoch >= 0)
        out << " (epoch " << report.best_epoch << ")";
    out << "\n";
    out << "score orientation: " << report.score_orientation
        << " (higher = more in-distribution)\n\n";

    const ReportFragment& c = report.closed_set;
    out << "closed-set accuracy (%)\n";
    out << "  head    middle  tail    total\n";
    out << "  " << fmt_pct(c.acc_head) << "  " << fmt_pct(c.acc_middle) << "  "
        << fmt_pct(c.acc_tail) << "  " << fmt_pct(c.acc_total) << "   (n = " << c.n_head << "/"
        << c.n_middle << "/" << c.n_tail << "/" << c.n_total << ")\n\n";

    char line[160];
    std::snprintf(line, sizeof line,
                  "macro over %d classes: precision %.4f  recall %.4f  f1 %.4f\n", c.n_classes,
                  c.macro_precision, c.macro_recall, c.macro_f1);
    out << line;

    if (!report.auroc_by_source.empty()) {
        out << "\nood auroc (%)\n";
        for (const auto& [name, v] : report.auroc_by_source)
            out << "  " << name << "  " << fmt_pct(v) << "\n";
    }
    if (!report.confidence_groups.empty()) {
        out << "\nconfidence groups (mean +- std, n)\n";
        for (const auto& g : report.confidence_groups) {
            std::snprintf(line, sizeof line, "  %-12s %.4f +- %.4f  (%ld)\n", g.name.c_str(),
                          g.mean, g.stdev, g.count);
            out << line;
        }
    }
    return out.str();
}

std::vector<std::pair<std::string, std::string>> eval_report_rows(const EvalReport& report) {
    std::vector<std::pair<std::string, std::string>> rows;
    const ReportFragment& c = report.closed_set;
    rows.emplace_back("partition_mode", report.partition_mode);
    rows.emplace_back("checkpoint_kind", report.checkpoint_kind);
    rows.emplace_back("best_epoch", std::to_string(report.best_epoch));
    rows.emplace_back("score_orientation", report.score_orientation);
    rows.emplace_back("acc_head", fmt17(c.acc_head));
    rows.emplace_back("acc_middle", fmt17(c.acc_middle));
    rows.emplace_back("acc_tail", fmt17(c.acc_tail));
    rows.emplace_back("acc_total", fmt17(c.acc_total));
    rows.emplace_back("n_head", std::to_string(c.n_head));
    rows.emplace_back("n_middle", std::to_string(c.n_middle));
    rows.emplace_back("n_tail", std::to_string(c.n_tail));
    rows.emplace_back("n_total", std::to_string(c.n_total));
    rows.emplace_back("macro_precision", fmt17(c.macro_precision));
    rows.emplace_back("macro_recall", fmt17(c.macro_recall));
    rows.emplace_back("macro_f1", fmt17(c.macro_f1));
    for (const auto& [name, v] : report.auroc_by_source)
        rows.emplace_back("auroc:" + name, fmt17(v));
    for (const auto& g : report.confidence_groups) {
        rows.emplace_back("conf_mean:" + g.name, fmt17(g.mean));
        rows.emplace_back("conf_std:" + g.name, fmt17(g.stdev));
        rows.emplace_back("conf_n:" + g.name, std::to_string(g.count));
    }
    return rows;
}

} // namespace tailmix
