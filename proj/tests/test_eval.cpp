#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "distill/core.hpp"
#include "distill/eval.hpp"
#include "oracles.hpp"

using namespace distill;

namespace {

EventSet make_set(std::vector<Event> ev, std::size_t L) { return normalize_events(std::move(ev), L); }

std::vector<oracle::Interval> to_oracle(const EventSet& s) {
    std::vector<oracle::Interval> out;
    for (const auto& e : s.events) out.push_back({static_cast<long>(e.start), static_cast<long>(e.end)});
    return out;
}

// Random disjoint events inside [0, L).
EventSet random_events(Rng& rng, std::size_t L, std::size_t max_events, double density) {
    std::vector<std::uint8_t> mask(L, 0);
    const std::size_t k = rng.uniform_index(1, max_events);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t s = rng.uniform_index(0, L - 1);
        const std::size_t len = 1 + rng.uniform_index(0, static_cast<std::size_t>(density * L));
        for (std::size_t t = s; t < std::min(L, s + len); ++t) mask[t] = 1;
    }
    return events_from_mask(mask);
}

}  // namespace

TEST_CASE("affiliation zones split gaps at the midpoint, earlier event on ties") {
    const auto z = affiliation_zones(make_set({{2, 4}, {8, 10}}, 12));
    REQUIRE(z.size() == 2);
    // Gap points 4..7: distances to the first event 1,2,3,4 and to the second 4,3,2,1.
    CHECK(z[0] == Event{0, 6});
    CHECK(z[1] == Event{6, 12});
    const auto odd = affiliation_zones(make_set({{2, 4}, {7, 9}}, 12));
    // Point 5 is at distance 2 from both and joins the earlier event.
    CHECK(odd[0] == Event{0, 6});
}

TEST_CASE("perfect prediction scores one") {
    const EventSet truth = make_set({{5, 8}, {20, 30}}, 50);
    const auto r = affiliation_metrics(truth, truth);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
}

TEST_CASE("small case equals brute-force enumeration") {
    const EventSet truth = make_set({{5, 8}}, 20);
    const EventSet pred = make_set({{6, 7}}, 20);
    std::vector<std::uint8_t> mask(20, 0);
    mask[6] = 1;
    const auto ref = oracle::affiliation(mask, to_oracle(truth));
    const auto r = affiliation_metrics(pred, truth);
    CHECK(std::abs(r.precision - ref.precision) <= 1e-9);
    CHECK(std::abs(r.recall - ref.recall) <= 1e-9);
    CHECK(std::abs(r.f1 - ref.f1) <= 1e-9);
    CHECK(r.precision == 1.0);
}

TEST_CASE("affiliation agrees with brute force on random cases") {
    Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t L = rng.uniform_index(5, 50);
        const EventSet truth = random_events(rng, L, 4, 0.15);
        EventSet pred = rng.uniform() < 0.1 ? EventSet{{}, L} : random_events(rng, L, 5, 0.1);
        const auto ref = oracle::affiliation(mask_from_events(pred), to_oracle(truth));
        const auto r = affiliation_metrics(pred, truth);
        CHECK(std::abs(r.precision - ref.precision) <= 1e-9);
        CHECK(std::abs(r.recall - ref.recall) <= 1e-9);
        CHECK(std::abs(r.f1 - ref.f1) <= 1e-9);
        CHECK(r.precision_undefined == ref.precision_undefined);
        for (double v : {r.precision, r.recall, r.f1}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK((r.f1 == 0.0) == (r.precision == 0.0 || r.recall == 0.0));
    }
}

TEST_CASE("random single-point predictions average precision near one half") {
    Rng rng(17);
    const std::size_t L = 1000;
    const EventSet truth = make_set({{400, 410}}, L);
    double sum = 0.0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        const std::size_t x = rng.uniform_index(0, L - 1);
        sum += affiliation_metrics(make_set({{x, x + 1}}, L), truth).precision;
    }
    CHECK(std::abs(sum / trials - 0.5) <= 0.05);
}

TEST_CASE("empty prediction and empty truth") {
    const EventSet truth = make_set({{3, 6}}, 20);
    const auto r = affiliation_metrics(EventSet{{}, 20}, truth);
    CHECK(r.precision_undefined);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
    CHECK_THROWS_AS(affiliation_metrics(truth, EventSet{{}, 20}), UsageError);
}

TEST_CASE("affiliation is invariant to input event order") {
    const auto truth = make_set({{30, 40}, {2, 5}}, 60);
    const auto pred = make_set({{33, 35}, {8, 9}, {50, 52}}, 60);
    const auto pred2 = make_set({{50, 52}, {8, 9}, {33, 35}}, 60);
    const auto a = affiliation_metrics(pred, truth), b = affiliation_metrics(pred2, truth);
    CHECK(a.precision == b.precision);
    CHECK(a.recall == b.recall);
}

TEST_CASE("point metrics") {
    const std::vector<std::uint8_t> t{1, 1, 0, 0, 1, 1};
    CHECK(point_metrics(t, t).f1 == 1.0);
    const auto none = point_metrics(std::vector<std::uint8_t>(6, 0), t);
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    const std::vector<std::uint8_t> p{1, 1, 1, 1, 0, 0};  // TP 2, FP 2, FN 2
    const auto m = point_metrics(p, t);
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 0.5);
    CHECK(m.f1 == 0.5);
}

TEST_CASE("point adjustment") {
    std::vector<std::uint8_t> truth_mask(20, 0);
    for (std::size_t t = 5; t < 15; ++t) truth_mask[t] = 1;
    const EventSet truth = events_from_mask(truth_mask);
    std::vector<std::uint8_t> pred(20, 0);
    pred[7] = 1;
    pred[18] = 1;
    const auto adj = point_adjust(pred, truth);
    for (std::size_t t = 5; t < 15; ++t) CHECK(adj[t] == 1);
    CHECK(adj[18] == 1);
    CHECK(adj[0] == 0);
    std::vector<std::uint8_t> miss(20, 0);
    miss[1] = 1;
    CHECK(point_adjust(miss, truth) == miss);

    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::uint8_t> p(20);
        for (auto& v : p) v = rng.uniform() < 0.2;
        const auto a = point_adjust(p, truth);
        CHECK(point_metrics(a, truth_mask).recall >= point_metrics(p, truth_mask).recall);
        for (std::size_t t = 0; t < 20; ++t)
            if (!truth_mask[t]) CHECK(a[t] == p[t]);
    }
}

TEST_CASE("ucr accuracy") {
    const std::size_t T = 16;
    const EventSet truth = make_set({{100, 110}}, 300);
    std::vector<double> s(300, 0.0);
    s[105] = 1.0;
    CHECK(ucr_hit(s, truth, T));
    s[105] = 0.0;
    s[110 + 2 * T] = 1.0;
    CHECK_FALSE(ucr_hit(s, truth, T));
    s[110 + 2 * T] = 0.0;
    s[100 - T] = 1.0;
    CHECK(ucr_hit(s, truth, T));

    std::vector<UcrCase> cases;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> sc(300, 0.0);
        sc[i < 4 ? 104 : 250] = 1.0;
        cases.push_back({sc, truth});
    }
    CHECK(ucr_accuracy(cases, T) == doctest::Approx(0.8));
    CHECK_THROWS_AS(ucr_hit(s, make_set({{1, 2}, {5, 6}}, 300), T), DataError);
}

TEST_CASE("auroc matches pair counting") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(60);
        std::vector<std::uint8_t> y(60);
        for (std::size_t i = 0; i < 60; ++i) {
            y[i] = i % 4 == 0;
            s[i] = std::round(rng.normal(y[i] ? 1.0 : 0.0) * 4.0) / 4.0;  // produces ties
        }
        CHECK(auroc(s, y) == doctest::Approx(oracle::auroc(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("report json fields") {
    std::vector<double> s(40, 0.0);
    std::vector<std::uint8_t> y(40, 0);
    for (std::size_t t = 10; t < 14; ++t) {
        s[t] = 5.0;
        y[t] = 1;
    }
    EvalOptions o;
    o.quantile = 0.5;
    o.ucr_margin = 8;
    const auto j = report_to_json(evaluate("toy", s, y, o));
    CHECK(j.at("dataset") == "toy");
    CHECK(j.at("AF1").get<double>() == 1.0);
    CHECK(j.at("accuracy").get<double>() == 1.0);
    CHECK(j.at("adjusted") == false);
    for (const char* k : {"AP", "AR", "P", "R", "F1", "AP_undefined"}) CHECK(j.contains(k));
    o.ucr_margin.reset();
    CHECK_FALSE(report_to_json(evaluate("toy", s, y, o)).contains("accuracy"));
}
