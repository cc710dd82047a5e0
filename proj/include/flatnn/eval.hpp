#pragma once

// Accuracy-under-attack evaluation: runs an ordered attack suite against a
// model over several seeds and aggregates per-attack mean and population
// standard deviation, one report row per attack.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flatnn/attacks.hpp"
#include "flatnn/data.hpp"
#include "flatnn/errors.hpp"
#include "flatnn/nn.hpp"

namespace flatnn {

enum class AttackKind { nat, fgsm, pgd, mim };

struct AttackSpec {
    std::string name;
    AttackKind kind = AttackKind::nat;
    std::optional<AttackBudget> budget;  // absent only for NAT
    double mim_decay = 1.0;
};

struct AttackSuite {
    std::vector<AttackSpec> attacks;

    void validate() const {
        if (attacks.empty()) throw ValueError("AttackSuite: suite must not be empty");
        for (std::size_t i = 0; i < attacks.size(); ++i) {
            const AttackSpec& a = attacks[i];
            if (a.name.empty()) throw ValueError("AttackSuite: attack names must not be empty");
            for (std::size_t j = i + 1; j < attacks.size(); ++j)
                if (attacks[j].name == a.name)
                    throw ValueError("AttackSuite: duplicate attack name " + a.name);
            if (a.kind == AttackKind::nat && a.budget)
                throw ValueError("AttackSuite: NAT carries no budget");
            if (a.kind != AttackKind::nat) {
                if (!a.budget) throw ValueError("AttackSuite: attack " + a.name + " needs a budget");
                a.budget->validate();
            }
        }
    }

    /// The canonical row: NAT, FGSM, PGD-20, PGD-100, MIM. Evaluation PGD
    /// uses a random start (one restart); FGSM and MIM are deterministic.
    static AttackSuite canonical(double eps, double kappa, double lo, double hi) {
        AttackSuite s;
        s.attacks.push_back({"NAT", AttackKind::nat, std::nullopt, 1.0});
        s.attacks.push_back({"FGSM", AttackKind::fgsm, AttackBudget{eps, eps, 1, false, lo, hi}, 1.0});
        s.attacks.push_back({"PGD-20", AttackKind::pgd, AttackBudget{eps, kappa, 20, true, lo, hi}, 1.0});
        s.attacks.push_back({"PGD-100", AttackKind::pgd, AttackBudget{eps, kappa, 100, true, lo, hi}, 1.0});
        s.attacks.push_back({"MIM", AttackKind::mim, AttackBudget{eps, kappa, 20, false, lo, hi}, 1.0});
        return s;
    }
};

struct AccuracyReport {
    struct Row {
        std::string attack;
        AttackKind kind = AttackKind::nat;
        std::optional<AttackBudget> budget;
        std::vector<double> per_seed;  // accuracy % per seed, in seed order
        double mean = 0.0;
        double stddev = 0.0;  // population standard deviation
    };

    std::string method;      // model identifier
    std::string dataset_id;
    std::vector<std::uint64_t> seeds;
    std::vector<Row> rows;

    void validate() const {
        if (rows.empty()) throw ValueError("AccuracyReport: no rows");
        for (const Row& r : rows) {
            if (r.per_seed.size() != seeds.size())
                throw ValueError("AccuracyReport: row " + r.attack + " has wrong seed count");
            double mean = 0.0;
            for (double v : r.per_seed) {
                if (v < 0.0 || v > 100.0)
                    throw ValueError("AccuracyReport: accuracy outside [0, 100]");
                mean += v;
            }
            mean /= static_cast<double>(r.per_seed.size());
            double var = 0.0;
            for (double v : r.per_seed) var += (v - mean) * (v - mean);
            const double stddev = std::sqrt(var / static_cast<double>(r.per_seed.size()));
            if (std::abs(mean - r.mean) > 1e-9 || std::abs(stddev - r.stddev) > 1e-9)
                throw ValueError("AccuracyReport: mean/stddev inconsistent with per-seed values");
        }
    }
};

namespace detail {

constexpr std::size_t eval_chunk = 256;

template <class Model>
Tensor attacked_inputs(const Model& model, const Tensor& x, std::span<const int> y, const AttackSpec& spec,
                       std::uint64_t seed) {
    switch (spec.kind) {
        case AttackKind::nat: return x.detached();
        case AttackKind::fgsm: return fgsm(model, x, y, *spec.budget);
        case AttackKind::pgd: return pgd(model, x, y, *spec.budget, seed);
        default: return mim(model, x, y, spec.budget ? *spec.budget : AttackBudget{}, spec.mim_decay, seed);
    }
}

template <class Model>
double attacked_accuracy(const Model& model, const Dataset& ds, const AttackSpec& spec,
                         std::uint64_t seed) {
    std::size_t hits = 0;
    for (std::size_t start = 0; start < ds.size(); start += eval_chunk) {
        const std::size_t count = std::min(eval_chunk, ds.size() - start);
        Dataset chunk = slice(ds, start, count);
        Tensor x_adv =
            attacked_inputs(model, chunk.inputs, chunk.labels, spec, derive_seed(seed, 0xc4a1, start));
        std::vector<int> pred = predict_classes(model, x_adv);
        for (std::size_t i = 0; i < count; ++i)
            if (pred[i] == chunk.labels[i]) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace detail

/// White-box evaluation: for every seed each attack is regenerated through
/// the full model and top-1 accuracy recorded; aggregation is a fold in seed
/// order (population standard deviation).
template <class Model>
AccuracyReport evaluate(const Model& model, const Dataset& ds, const AttackSuite& suite,
                        std::span<const std::uint64_t> seeds, std::string method = "model",
                        std::string dataset_id = "dataset") {
    suite.validate();
    ds.validate();
    if (seeds.empty()) throw ValueError("evaluate: need at least one seed");

    AccuracyReport report;
    report.method = std::move(method);
    report.dataset_id = std::move(dataset_id);
    report.seeds.assign(seeds.begin(), seeds.end());
    for (const AttackSpec& spec : suite.attacks) {
        AccuracyReport::Row row;
        row.attack = spec.name;
        row.kind = spec.kind;
        row.budget = spec.budget;
        for (std::uint64_t seed : seeds)
            row.per_seed.push_back(detail::attacked_accuracy(model, ds, spec, seed));
        for (double v : row.per_seed) row.mean += v;
        row.mean /= static_cast<double>(row.per_seed.size());
        for (double v : row.per_seed) row.stddev += (v - row.mean) * (v - row.mean);
        row.stddev = std::sqrt(row.stddev / static_cast<double>(row.per_seed.size()));
        report.rows.push_back(std::move(row));
    }
    return report;
}

enum class ReportFormat { text_table, csv };

/// Deterministic rendering; column order follows the suite order.
/// CSV schema: method,attack,mean_acc,std_acc,seeds,epsilon,kappa,steps
/// (NAT budget columns render as 0).
inline std::string render_report(const AccuracyReport& report, ReportFormat format) {
    report.validate();
    char buf[256];
    std::string out;
    if (format == ReportFormat::csv) {
        out = "method,attack,mean_acc,std_acc,seeds,epsilon,kappa,steps\n";
        for (const AccuracyReport::Row& r : report.rows) {
            const double eps = r.budget ? r.budget->epsilon : 0.0;
            const double kappa = r.budget ? r.budget->kappa : 0.0;
            const std::size_t steps = r.budget ? r.budget->steps : 0;
            std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%zu,%.17g,%.17g,%zu\n",
                          report.method.c_str(), r.attack.c_str(), r.mean, r.stddev,
                          report.seeds.size(), eps, kappa, steps);
            out += buf;
        }
        return out;
    }

    std::snprintf(buf, sizeof buf, "model %s on %s (%zu seeds)\n", report.method.c_str(),
                  report.dataset_id.c_str(), report.seeds.size());
    out += buf;
    out += "  attack      mean_acc     std_acc\n";
    for (const AccuracyReport::Row& r : report.rows) {
        std::snprintf(buf, sizeof buf, "  %-10s  %8.2f    %8.2f\n", r.attack.c_str(), r.mean, r.stddev);
        out += buf;
    }
    return out;
}

}  // namespace flatnn
