#include "distill/eval.hpp"

#include <algorithm>
#include <numeric>

#include "distill/core.hpp"
#include "distill/detect.hpp"

namespace distill {

namespace {

using i64 = long long;

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// #{u in zone : dist(u, event) >= d}; the zone holds the event.
i64 count_far_from_event(const Event& zone, const Event& ev, i64 d) {
    if (d <= 0) return static_cast<i64>(zone.length());
    const i64 left = static_cast<i64>(ev.start) - static_cast<i64>(zone.start);
    const i64 right = static_cast<i64>(zone.end) - static_cast<i64>(ev.end);
    return std::max<i64>(0, left - d + 1) + std::max<i64>(0, right - d + 1);
}

// #{u in zone : |u - y| >= d}.
i64 count_far_from_point(const Event& zone, i64 y, i64 d) {
    const i64 n = static_cast<i64>(zone.length());
    if (d <= 0) return n;
    const i64 lo = std::max<i64>(static_cast<i64>(zone.start), y - d + 1);
    const i64 hi = std::min<i64>(static_cast<i64>(zone.end) - 1, y + d - 1);
    return n - std::max<i64>(0, hi - lo + 1);
}

i64 dist_to_event(i64 x, const Event& ev) {
    if (x < static_cast<i64>(ev.start)) return static_cast<i64>(ev.start) - x;
    if (x >= static_cast<i64>(ev.end)) return x - static_cast<i64>(ev.end) + 1;
    return 0;
}

}  // namespace

std::vector<Event> affiliation_zones(const EventSet& truth) {
    std::vector<Event> zones;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < truth.events.size(); ++i) {
        std::size_t end = truth.horizon;
        if (i + 1 < truth.events.size())
            end = (truth.events[i].end - 1 + truth.events[i + 1].start) / 2 + 1;
        zones.push_back({begin, end});
        begin = end;
    }
    return zones;
}

AffiliationResult affiliation_metrics(const EventSet& pred, const EventSet& truth) {
    if (truth.empty()) throw UsageError("affiliation metrics need at least one truth event");
    if (pred.horizon != truth.horizon) throw UsageError("prediction and truth horizons differ");
    const auto zones = affiliation_zones(truth);
    AffiliationResult r;

    double p_sum = 0.0;
    std::size_t p_count = 0;
    double r_sum = 0.0;
    for (std::size_t z = 0; z < zones.size(); ++z) {
        const Event& zone = zones[z];
        const Event& ev = truth.events[z];
        const double zone_n = static_cast<double>(zone.length());
        std::vector<Event> local;
        for (const auto& e : pred.events) {
            const std::size_t s = std::max(e.start, zone.start), t = std::min(e.end, zone.end);
            if (s < t) local.push_back({s, t});
        }
        if (local.empty()) {
            r.zone_precision.push_back(std::nullopt);
            r.zone_recall.push_back(0.0);
            continue;
        }

        double prec = 0.0;
        std::size_t npred = 0;
        for (const auto& e : local)
            for (std::size_t x = e.start; x < e.end; ++x) {
                prec += static_cast<double>(count_far_from_event(zone, ev, dist_to_event(static_cast<i64>(x), ev))) /
                        zone_n;
                ++npred;
            }
        prec /= static_cast<double>(npred);

        double rec = 0.0;
        for (std::size_t y = ev.start; y < ev.end; ++y) {
            // Nearest predicted point: first local interval ending after y and its predecessor.
            const auto it = std::upper_bound(local.begin(), local.end(), y,
                                             [](std::size_t v, const Event& e) { return v < e.end; });
            i64 d = -1;
            const i64 yy = static_cast<i64>(y);
            if (it != local.end()) d = dist_to_event(yy, *it);
            if (it != local.begin()) {
                const i64 dp = dist_to_event(yy, *(it - 1));
                d = d < 0 ? dp : std::min(d, dp);
            }
            rec += static_cast<double>(count_far_from_point(zone, yy, d)) / zone_n;
        }
        rec /= static_cast<double>(ev.length());

        r.zone_precision.push_back(prec);
        r.zone_recall.push_back(rec);
        p_sum += prec;
        ++p_count;
        r_sum += rec;
    }
    r.precision_undefined = p_count == 0;
    r.precision = p_count ? p_sum / static_cast<double>(p_count) : 0.0;
    r.recall = r_sum / static_cast<double>(zones.size());
    r.f1 = harmonic(r.precision, r.recall);
    return r;
}

PointMetrics point_metrics(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
    if (pred.size() != truth.size()) throw UsageError("prediction and truth lengths differ");
    PointMetrics m;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (pred[t] && truth[t]) ++m.tp;
        else if (pred[t]) ++m.fp;
        else if (truth[t]) ++m.fn;
    }
    const auto ratio = [](std::size_t a, std::size_t b) {
        return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
    };
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    m.f1 = harmonic(m.precision, m.recall);
    return m;
}

std::vector<std::uint8_t> point_adjust(const std::vector<std::uint8_t>& pred, const EventSet& truth) {
    std::vector<std::uint8_t> out = pred;
    for (const auto& e : truth.events) {
        if (e.end > pred.size()) throw UsageError("truth event beyond prediction length");
        const bool hit = std::any_of(pred.begin() + static_cast<std::ptrdiff_t>(e.start),
                                     pred.begin() + static_cast<std::ptrdiff_t>(e.end),
                                     [](std::uint8_t v) { return v != 0; });
        if (hit)
            std::fill(out.begin() + static_cast<std::ptrdiff_t>(e.start),
                      out.begin() + static_cast<std::ptrdiff_t>(e.end), std::uint8_t{1});
    }
    return out;
}

std::size_t argmax(const std::vector<double>& scores) {
    if (scores.empty()) throw UsageError("argmax of an empty trace");
    return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

bool ucr_hit(const std::vector<double>& scores, const EventSet& truth, std::size_t margin) {
    if (truth.size() != 1)
        throw DataError("UCR accuracy needs exactly one truth event, got " + std::to_string(truth.size()));
    const std::size_t a = argmax(scores);
    const auto& e = truth.events.front();
    const std::size_t lo = e.start > margin ? e.start - margin : 0;
    return a >= lo && a < e.end + margin;
}

double ucr_accuracy(const std::vector<UcrCase>& cases, std::size_t margin) {
    if (cases.empty()) throw UsageError("UCR accuracy over zero subdatasets");
    std::size_t hits = 0;
    for (const auto& c : cases) hits += ucr_hit(c.scores, c.truth, margin) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(cases.size());
}

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) throw UsageError("score and label lengths differ");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]]) {
                pos_rank += rank;
                ++pos;
            }
        i = j;
    }
    const std::size_t neg = scores.size() - pos;
    if (pos == 0 || neg == 0) throw UsageError("AUROC needs both positive and negative labels");
    const double np = static_cast<double>(pos), nn = static_cast<double>(neg);
    return (pos_rank - np * (np + 1.0) / 2.0) / (np * nn);
}

MetricReport evaluate(const std::string& dataset, const std::vector<double>& scores,
                      const std::vector<std::uint8_t>& labels, const EvalOptions& options) {
    if (scores.size() != labels.size())
        throw DataError("trace has " + std::to_string(scores.size()) + " points but truth has " +
                        std::to_string(labels.size()));
    MetricReport rep;
    rep.dataset = dataset;
    rep.adjusted = options.point_adjust;
    const Detection det = threshold(scores, options.quantile);
    rep.threshold = det.threshold;
    rep.predicted_points = static_cast<std::size_t>(std::count(det.predictions.begin(), det.predictions.end(), 1));
    const EventSet truth = events_from_mask(labels);
    rep.affiliation = affiliation_metrics(det.events, truth);
    rep.point = point_metrics(options.point_adjust ? point_adjust(det.predictions, truth) : det.predictions, labels);
    if (options.ucr_margin) rep.accuracy = ucr_hit(scores, truth, *options.ucr_margin) ? 1.0 : 0.0;
    return rep;
}

nlohmann::json report_to_json(const MetricReport& r) {
    nlohmann::json j = nlohmann::json::object();
    j["dataset"] = r.dataset;
    j["AP"] = r.affiliation.precision;
    j["AR"] = r.affiliation.recall;
    j["AF1"] = r.affiliation.f1;
    j["AP_undefined"] = r.affiliation.precision_undefined;
    j["P"] = r.point.precision;
    j["R"] = r.point.recall;
    j["F1"] = r.point.f1;
    if (r.accuracy) j["accuracy"] = *r.accuracy;
    j["adjusted"] = r.adjusted;
    j["threshold"] = r.threshold;
    j["predicted_points"] = r.predicted_points;
    return j;
}

}  // namespace distill
