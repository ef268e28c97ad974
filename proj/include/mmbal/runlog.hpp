// Append-only training log with a fixed CSV schema.
//
// One file holds two row kinds: per-iteration rows (loss and modulation
// traces) and per-epoch rows (accuracies, probe results). Unused fields are
// left empty. Floats are printed at 9 significant digits so identical runs
// produce identical bytes.
#pragma once

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mmbal/common.hpp"

namespace mmbal {

struct LogRow {
    enum class Kind { iteration, epoch } kind = Kind::iteration;
    std::size_t row = 0;    // strictly increasing over the whole file
    std::size_t iter = 0;   // global iteration count (epoch rows: last completed)
    std::size_t epoch = 0;
    // iteration fields
    double loss = 0.0;
    std::vector<double> s_sums, rho, q, k;
    // epoch fields
    double train_acc = 0.0, test_acc = 0.0;
    std::vector<double> probe_acc;  // empty when no probe ran
};

struct RunLog {
    std::size_t num_modalities = 0;
    std::vector<LogRow> rows;
    bool diverged = false;

    void add_iteration(std::size_t iter, std::size_t epoch, double loss,
                       const std::vector<double>& s_sums, const std::vector<double>& rho,
                       const std::vector<double>& q, const std::vector<double>& k) {
        LogRow r;
        r.kind = LogRow::Kind::iteration;
        r.row = rows.size() + 1;
        r.iter = iter;
        r.epoch = epoch;
        r.loss = loss;
        r.s_sums = s_sums;
        r.rho = rho;
        r.q = q;
        r.k = k;
        rows.push_back(std::move(r));
    }

    void add_epoch(std::size_t iter, std::size_t epoch, double train_acc, double test_acc,
                   const std::vector<double>& probe_acc) {
        LogRow r;
        r.kind = LogRow::Kind::epoch;
        r.row = rows.size() + 1;
        r.iter = iter;
        r.epoch = epoch;
        r.train_acc = train_acc;
        r.test_acc = test_acc;
        r.probe_acc = probe_acc;
        rows.push_back(std::move(r));
    }

    // Mean of rho[m] over all iteration rows.
    double time_averaged_rho(std::size_t m) const {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : rows) {
            if (r.kind == LogRow::Kind::iteration) {
                sum += r.rho[m];
                ++count;
            }
        }
        return count > 0 ? sum / static_cast<double>(count) : 0.0;
    }

    // Last logged probe accuracy for modality m (NaN when none).
    double final_probe_acc(std::size_t m) const {
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
            if (it->kind == LogRow::Kind::epoch && !it->probe_acc.empty()) {
                return it->probe_acc[m];
            }
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    double final_test_acc() const {
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
            if (it->kind == LogRow::Kind::epoch) return it->test_acc;
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    std::string to_csv() const;
    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        check_config(out.good(), "RunLog: cannot open " + path);
        out << to_csv();
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

inline std::string RunLog::to_csv() const {
    std::ostringstream out;
    out << "row,type,iter,epoch,loss";
    for (std::size_t m = 1; m <= num_modalities; ++m) out << ",s_sum_" << m;
    for (std::size_t m = 1; m <= num_modalities; ++m) out << ",rho_" << m;
    for (std::size_t m = 1; m <= num_modalities; ++m) out << ",q_" << m;
    for (std::size_t m = 1; m <= num_modalities; ++m) out << ",k_" << m;
    out << ",train_acc,test_acc";
    for (std::size_t m = 1; m <= num_modalities; ++m) out << ",probe_acc_" << m;
    out << "\n";

    auto put_vec = [&](const std::vector<double>& v, bool present) {
        for (std::size_t m = 0; m < num_modalities; ++m) {
            out << ",";
            if (present) out << detail::fmt_double(v[m]);
        }
    };
    for (const auto& r : rows) {
        const bool is_iter = r.kind == LogRow::Kind::iteration;
        out << r.row << "," << (is_iter ? "iter" : "epoch") << "," << r.iter << "," << r.epoch
            << ",";
        if (is_iter) out << detail::fmt_double(r.loss);
        put_vec(r.s_sums, is_iter);
        put_vec(r.rho, is_iter);
        put_vec(r.q, is_iter);
        put_vec(r.k, is_iter);
        out << ",";
        if (!is_iter) out << detail::fmt_double(r.train_acc);
        out << ",";
        if (!is_iter) out << detail::fmt_double(r.test_acc);
        put_vec(r.probe_acc, !is_iter && !r.probe_acc.empty());
        out << "\n";
    }
    return out.str();
}

}  // namespace mmbal
