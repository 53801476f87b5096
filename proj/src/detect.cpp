#include "distill/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "distill/losses.hpp"
#include "distill/parallel.hpp"
#include "distill/preprocess.hpp"

namespace distill {

namespace {

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

double score_window(const ModelState& state, const Matrix& window) {
    const auto z = state.student().represent(state.params, window);
    const auto c = state.teacher().represent(state.params, window);
    return squared_distance(z, c);
}

ScoreTrace aggregate_windows(const std::vector<double>& window_scores,
                             const std::vector<std::size_t>& starts, std::size_t window_size,
                             std::size_t length, Aggregation aggregation) {
    if (window_scores.size() != starts.size()) throw UsageError("one start per window score required");
    ScoreTrace trace;
    trace.window_scores = window_scores;
    trace.window_starts = starts;
    trace.point_scores.assign(length, 0.0);
    trace.coverage.assign(length, 0);
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const std::size_t end = std::min(length, starts[i] + window_size);
        for (std::size_t t = starts[i]; t < end; ++t) {
            if (aggregation == Aggregation::max)
                trace.point_scores[t] = trace.coverage[t] ? std::max(trace.point_scores[t], window_scores[i])
                                                          : window_scores[i];
            else
                trace.point_scores[t] += window_scores[i];
            ++trace.coverage[t];
        }
    }
    if (aggregation == Aggregation::mean)
        for (std::size_t t = 0; t < length; ++t)
            if (trace.coverage[t]) trace.point_scores[t] /= static_cast<double>(trace.coverage[t]);
    return trace;
}

ScoreTrace score_series(const ModelState& state, const TimeSeriesDataset& series, std::size_t stride,
                        Aggregation aggregation) {
    if (stride < 1) throw UsageError("score stride must be at least 1");
    if (series.channels() != state.channels)
        throw DataError("series has " + std::to_string(series.channels()) + " channels, model expects " +
                        std::to_string(state.channels));
    const std::size_t T = state.config.window_size;
    const WindowBatch batch = window(series, T, stride);
    std::vector<std::size_t> starts = batch.starts;
    std::vector<const Matrix*> windows;
    for (const auto& w : batch.windows) windows.push_back(&w);
    std::vector<double> scores(windows.size());
    parallel_for(windows.size(), [&](std::size_t i) { scores[i] = score_window(state, *windows[i]); });
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!std::isfinite(scores[i]))
            throw NumericError("non-finite anomaly score for window starting at " + std::to_string(starts[i]));
    return aggregate_windows(scores, starts, T, series.length(), aggregation);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw UsageError("quantile of an empty sequence");
    if (!(q >= 0.0 && q <= 1.0)) throw UsageError("quantile level must lie in [0,1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(values.size() - 1, lo + 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

Detection threshold(const std::vector<double>& scores, double q) {
    if (!(q > 0.0 && q < 1.0)) throw UsageError("threshold quantile must lie in (0,1)");
    Detection d;
    d.threshold = quantile(scores, q);
    d.predictions.resize(scores.size());
    for (std::size_t t = 0; t < scores.size(); ++t) d.predictions[t] = scores[t] > d.threshold ? 1 : 0;
    d.events = events_from_mask(d.predictions);
    return d;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& scores,
                     const std::vector<std::uint8_t>* labels) {
    if (labels && labels->size() != scores.size())
        throw DataError("label count does not match score count");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << (labels ? "t,score,label\n" : "t,score\n");
    for (std::size_t t = 0; t < scores.size(); ++t) {
        out << t << ',' << format_real(scores[t]);
        if (labels) out << ',' << static_cast<int>((*labels)[t]);
        out << '\n';
    }
}

TraceFile read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty trace file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool has_labels;
    if (line == "t,score")
        has_labels = false;
    else if (line == "t,score,label")
        has_labels = true;
    else
        throw DataError(path.string() + ": expected header 't,score[,label]', got '" + line + "'");

    TraceFile trace;
    if (has_labels) trace.labels.emplace();
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        const std::size_t expect = has_labels ? 3 : 2;
        const auto fail = [&](const std::string& what) {
            throw DataError(path.string() + ": row " + std::to_string(row) + ": " + what);
        };
        if (cells.size() != expect) fail("expected " + std::to_string(expect) + " columns");
        try {
            std::size_t used = 0;
            const unsigned long t = std::stoul(cells[0], &used);
            if (used != cells[0].size() || t != trace.scores.size()) fail("time index out of sequence");
            const double s = std::stod(cells[1], &used);
            if (used != cells[1].size() || !std::isfinite(s)) fail("bad score '" + cells[1] + "'");
            trace.scores.push_back(s);
            if (has_labels) {
                if (cells[2] != "0" && cells[2] != "1") fail("label must be 0 or 1");
                trace.labels->push_back(cells[2] == "1" ? 1 : 0);
            }
        } catch (const std::logic_error&) {
            fail("unparsable cell");
        }
    }
    if (trace.scores.empty()) throw DataError(path.string() + ": trace has no rows");
    return trace;
}

std::vector<double> minmax_normalize(const std::vector<double>& scores) {
    std::vector<double> out(scores.size(), 0.0);
    if (scores.empty()) return out;
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double range = *hi - *lo;
    if (range <= 0.0) return out;
    for (std::size_t i = 0; i < scores.size(); ++i)
        out[i] = std::clamp((scores[i] - *lo) / range, 0.0, 1.0);
    return out;
}

std::string render_svg(const std::vector<double>& scores, const EventSet* truth) {
    constexpr double W = 1000.0, H = 300.0, pad = 20.0;
    const auto norm = minmax_normalize(scores);
    const double n = static_cast<double>(std::max<std::size_t>(scores.size(), 2) - 1);
    auto x_of = [&](double t) { return pad + (W - 2 * pad) * t / n; };
    auto y_of = [&](double v) { return H - pad - (H - 2 * pad) * v; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
        << "  <rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    if (truth)
        for (const auto& e : truth->events)
            svg << "  <rect class=\"truth\" x=\"" << format_real(x_of(static_cast<double>(e.start)))
                << "\" y=\"" << pad << "\" width=\""
                << format_real(std::max(1.0, x_of(static_cast<double>(e.end)) - x_of(static_cast<double>(e.start))))
                << "\" height=\"" << H - 2 * pad << "\" fill=\"#f4a6a6\" fill-opacity=\"0.5\"/>\n";
    svg << "  <polyline class=\"score\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1\" points=\"";
    for (std::size_t t = 0; t < norm.size(); ++t) {
        if (t) svg << ' ';
        svg << format_real(x_of(static_cast<double>(t))) << ',' << format_real(y_of(norm[t]));
    }
    svg << "\"/>\n</svg>\n";
    return svg.str();
}

void write_svg(const std::filesystem::path& path, const std::vector<double>& scores, const EventSet* truth) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << render_svg(scores, truth);
}

}  // namespace distill
