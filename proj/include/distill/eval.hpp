// Event-wise affiliation metrics, point-wise metrics, point adjustment,
// UCR-style argmax accuracy and the JSON metric report.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/events.hpp"

namespace distill {

struct AffiliationResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // True when no prediction falls anywhere; precision is then reported as 0.
    bool precision_undefined = false;
    std::vector<std::optional<double>> zone_precision;  // nullopt for zones without predictions
    std::vector<double> zone_recall;
};

// [start, end) of the zone owned by each truth event. Every timestep belongs
// to its nearest event; a timestep equidistant from two events goes to the earlier.
std::vector<Event> affiliation_zones(const EventSet& truth);

// Per-zone precision is the mean, over predicted points x in the zone, of the
// probability that a uniformly random zone point lies at least as far from
// the event as x. Per-zone recall is the mean, over event points y, of the
// probability that a uniformly random zone point lies at least as far from y
// as the nearest prediction in the zone does. A zone without predictions has
// undefined precision (skipped) and recall 0. Throws UsageError on empty truth.
AffiliationResult affiliation_metrics(const EventSet& pred, const EventSet& truth);

struct PointMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

PointMetrics point_metrics(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth);

// Marks a whole truth event predicted when any of its points is.
std::vector<std::uint8_t> point_adjust(const std::vector<std::uint8_t>& pred, const EventSet& truth);

// First index of the maximum.
std::size_t argmax(const std::vector<double>& scores);

// True iff the argmax lies in [s - margin, e + margin). Requires exactly one truth event.
bool ucr_hit(const std::vector<double>& scores, const EventSet& truth, std::size_t margin);

struct UcrCase {
    std::vector<double> scores;
    EventSet truth;
};
double ucr_accuracy(const std::vector<UcrCase>& cases, std::size_t margin);

// Area under the ROC curve with average ranks for ties. Requires both classes.
double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

struct MetricReport {
    std::string dataset;
    AffiliationResult affiliation;
    PointMetrics point;
    std::optional<double> accuracy;
    bool adjusted = false;
    double threshold = 0.0;
    std::size_t predicted_points = 0;
};

struct EvalOptions {
    double quantile = 0.99;
    bool point_adjust = false;
    // Set to report argmax accuracy; requires one truth event.
    std::optional<std::size_t> ucr_margin;
};

MetricReport evaluate(const std::string& dataset, const std::vector<double>& scores,
                      const std::vector<std::uint8_t>& labels, const EvalOptions& options);

nlohmann::json report_to_json(const MetricReport& report);

}  // namespace distill
