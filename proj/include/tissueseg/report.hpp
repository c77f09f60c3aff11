#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "tissueseg/experiment.hpp"

namespace tseg {

struct SummaryRow {
    std::size_t setting = 0;
    Tissue cls = Tissue::CSF;
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0; ///< sample standard deviation (n - 1), 0 for n = 1
};

/// One row per (setting, class) that has metrics, in setting order.
std::vector<SummaryRow> summarize(const MetricsBundle& bundle);

/// case_id, family, dim, overlap_train, overlap_test, modalities, class, dsc
std::string metrics_csv(const MetricsBundle& bundle);
std::string summary_csv(const MetricsBundle& bundle);
nlohmann::json summary_json(const MetricsBundle& bundle);

/// Box plot of per-case DSC: one panel per class, one box per setting.
std::string dsc_boxplot_svg(const MetricsBundle& bundle);

/// Writes metrics.csv, summary.csv, summary.json, plots/dsc_boxplot.svg and
/// provenance/<name>.json under `dir`. An empty bundle is rejected before
/// anything is written; unwritable locations raise IoError.
void emit_report(const MetricsBundle& bundle, const std::filesystem::path& dir);

} // namespace tseg
