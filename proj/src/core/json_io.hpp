#pragma once

#include <string>
#include <vector>

#include "core/cv.hpp"
#include "core/groups.hpp"
#include "core/inference.hpp"
#include "core/study.hpp"

namespace lgocv {

// JSON documents with stable key order and layout, so identical inputs
// produce byte-identical reports.
std::string fit_to_json(const FitResult& fit, const InformationCriteria* ic = nullptr);
std::string groups_to_json(const GroupSet& gs, const std::vector<std::string>& labels = {});
std::string cv_report_to_json(const CvReport& rep);
std::string metric_table_to_json(const MetricTable& t);

// Per-datum and per-replicate dumps for independent recomputation.
std::string cv_records_to_csv(const CvReport& rep);
std::string forecast_replicates_to_csv(const std::vector<ForecastReplicate>& reps);
std::string spatial_replicates_to_csv(const std::vector<SpatialReplicate>& reps);

// Rebuilds a study's metric table from its replicate dump; the header row
// identifies the study kind. Matches the table the study produced exactly,
// since the dump carries shortest round-trip number formatting.
MetricTable table_from_replicates_csv(const std::string& csv_text,
                                      const std::string& source = "replicates");

void write_text_file(const std::string& path, const std::string& content);

}  // namespace lgocv
