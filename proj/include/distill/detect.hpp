// Anomaly scoring A(w) = ||z - c||^2, window-to-point aggregation and thresholding.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "distill/core.hpp"
#include "distill/events.hpp"
#include "distill/train.hpp"

namespace distill {

struct ScoreTrace {
    std::vector<double> point_scores;        // [L]
    std::vector<double> window_scores;       // [N]
    std::vector<std::size_t> window_starts;  // [N]
    std::vector<std::size_t> coverage;       // [L]
};

double score_window(const ModelState& state, const Matrix& window);

// Point score = mean (or max) of A over the windows covering the point.
// Points no window covers score 0. Throws DataError when L < T.
ScoreTrace score_series(const ModelState& state, const TimeSeriesDataset& series, std::size_t stride,
                        Aggregation aggregation = Aggregation::mean);

// Assembles a trace from precomputed window scores; separated for testing.
ScoreTrace aggregate_windows(const std::vector<double>& window_scores,
                             const std::vector<std::size_t>& starts, std::size_t window_size,
                             std::size_t length, Aggregation aggregation);

// Linear-interpolation quantile of the sorted values (q in [0,1]).
double quantile(std::vector<double> values, double q);

struct Detection {
    double threshold = 0.0;
    std::vector<std::uint8_t> predictions;
    EventSet events;
};

// Predicts 1 where the score is strictly above the q-quantile of the scores.
Detection threshold(const std::vector<double>& scores, double q);

// `t,score[,label]` with a header row.
void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& scores,
                     const std::vector<std::uint8_t>* labels = nullptr);

struct TraceFile {
    std::vector<double> scores;
    std::optional<std::vector<std::uint8_t>> labels;
};
TraceFile read_trace_csv(const std::filesystem::path& path);

// Min-max normalized scores in [0,1]; a constant trace maps to zeros.
std::vector<double> minmax_normalize(const std::vector<double>& scores);

// Line plot of the normalized trace with truth events shaded.
std::string render_svg(const std::vector<double>& scores, const EventSet* truth = nullptr);
void write_svg(const std::filesystem::path& path, const std::vector<double>& scores,
               const EventSet* truth = nullptr);

}  // namespace distill
