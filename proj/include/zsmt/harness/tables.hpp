#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zsmt/eval/metrics.hpp"

namespace zsmt {

/// One table row; a missing report renders as "Diverged".
struct TableRow {
    std::string label;
    std::optional<MetricsReport> report;
};

struct ComparisonTable {
    std::vector<Direction> columns;
    std::vector<std::string> labels;
    /// Per row: BLEU per column, then the column average BLEU and average off-target rate.
    std::vector<std::optional<std::vector<double>>> bleu;
    std::vector<std::optional<double>> avg_bleu;
    std::vector<std::optional<double>> avg_off_target;
};

inline ComparisonTable comparison_table(const std::vector<TableRow>& rows, const std::vector<Direction>& columns) {
    if (rows.empty()) throw std::invalid_argument("comparison_table: no rows");
    if (columns.empty()) throw std::invalid_argument("comparison_table: no columns");
    const std::set<Direction>* reference = nullptr;
    std::vector<std::set<Direction>> keys;
    keys.reserve(rows.size());
    for (const auto& r : rows) {
        if (!r.report) continue;
        std::set<Direction> k;
        for (const auto& [d, _] : r.report->directions) k.insert(d);
        keys.push_back(std::move(k));
        if (reference == nullptr) {
            reference = &keys.back();
        } else if (keys.back() != *reference) {
            throw std::invalid_argument("comparison_table: row '" + r.label + "' has a different direction set");
        }
    }
    ComparisonTable t;
    t.columns = columns;
    for (const auto& r : rows) {
        t.labels.push_back(r.label);
        if (!r.report) {
            t.bleu.emplace_back();
            t.avg_bleu.emplace_back();
            t.avg_off_target.emplace_back();
            continue;
        }
        std::vector<double> cells;
        for (auto d : columns) {
            auto it = r.report->directions.find(d);
            if (it == r.report->directions.end()) {
                throw std::invalid_argument("comparison_table: row '" + r.label + "' lacks direction " + d.name());
            }
            cells.push_back(it->second.bleu);
        }
        const AggregateMetrics a = r.report->average(columns);
        t.bleu.emplace_back(std::move(cells));
        t.avg_bleu.emplace_back(a.bleu);
        t.avg_off_target.emplace_back(a.off_target);
    }
    return t;
}

namespace detail {

inline std::vector<std::vector<std::string>> table_cells(const ComparisonTable& t, int digits) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> header{"mode"};
    for (auto d : t.columns) header.push_back(d.name());
    header.push_back("avg_bleu");
    header.push_back("avg_off_target");
    out.push_back(std::move(header));
    for (std::size_t i = 0; i < t.labels.size(); ++i) {
        std::vector<std::string> row{t.labels[i]};
        if (!t.bleu[i]) {
            row.resize(t.columns.size() + 3, "Diverged");
        } else {
            for (double v : *t.bleu[i]) row.push_back(format_number(v, digits));
            row.push_back(format_number(*t.avg_bleu[i], digits));
            row.push_back(format_number(*t.avg_off_target[i], digits + 2));
        }
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace detail

inline std::string table_csv(const ComparisonTable& t) {
    std::ostringstream out;
    for (const auto& row : detail::table_cells(t, 6)) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
    return out.str();
}

inline std::string aligned_text(const std::vector<std::vector<std::string>>& cells) {
    std::vector<std::size_t> width;
    for (const auto& row : cells) {
        width.resize(std::max(width.size(), row.size()), 0);
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    std::ostringstream out;
    for (const auto& row : cells) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i == 0) {
                line += row[i] + std::string(width[i] - row[i].size(), ' ');
            } else {
                line += "  " + std::string(width[i] - row[i].size(), ' ') + row[i];
            }
        }
        out << line << '\n';
    }
    return out.str();
}

inline std::string table_text(const ComparisonTable& t) { return aligned_text(detail::table_cells(t, 2)); }

}  // namespace zsmt
