#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "distill/config_io.hpp"
#include "distill/container.hpp"
#include "distill/core.hpp"
#include "distill/events.hpp"
#include "distill/tensor.hpp"

using namespace distill;

TEST_CASE("rng streams are reproducible and derived streams differ") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng base(42);
    Rng c1 = base.derive(1), c2 = base.derive(2);
    CHECK(c1.next_u64() != c2.next_u64());
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
        const auto k = r.uniform_index(2, 5);
        CHECK(k >= 2);
        CHECK(k <= 5);
        const double u = r.uniform(-1.0, 1.0);
        CHECK(u >= -1.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("config defaults follow the documented hyper-parameters") {
    const Config c;
    CHECK(c.learning_rate == 1e-4);
    CHECK(c.batch_size == 128);
    CHECK(c.patience == 10);
    CHECK(c.contrastive_weight == 0.1);
    CHECK(c.effective_train_stride() == c.window_size);
    CHECK(c.effective_ucr_margin() == c.window_size);
    CHECK(c.patch_count() == 4);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config validation rejects inconsistent shapes") {
    Config c;
    c.patch_size = 64;
    CHECK_THROWS_AS(c.validate(), UsageError);
    Config h;
    h.model_dim = 30;
    h.head_count = 8;
    CHECK_THROWS_AS(h.validate(), UsageError);
}

TEST_CASE("config json round trip and unknown keys") {
    Config c;
    c.window_size = 48;
    c.aggregation = Aggregation::max;
    c.augmentation.kinds = {AugmentKind::scale};
    c.seed = 99;
    const Config back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.aggregation == Aggregation::max);
    auto j = config_to_json(c);
    j["windw_size"] = 3;
    CHECK_THROWS_AS(config_from_json(j), UsageError);
}

TEST_CASE("config patch_stride defaults to patch_size when absent") {
    nlohmann::json j = {{"patch_size", 4}};
    const Config c = config_from_json(j);
    CHECK(c.patch_stride == 4);
}

TEST_CASE("events from masks are sorted, disjoint and cover the mask exactly") {
    const std::vector<std::uint8_t> mask{0, 1, 1, 0, 0, 1, 0, 1, 1, 1};
    const EventSet s = events_from_mask(mask);
    REQUIRE(s.size() == 3);
    CHECK(s.events[0] == Event{1, 3});
    CHECK(s.events[1] == Event{5, 6});
    CHECK(s.events[2] == Event{7, 10});
    CHECK(mask_from_events(s) == mask);
    const EventSet n = normalize_events({{7, 10}, {1, 3}, {2, 4}, {4, 4}}, 10);
    REQUIRE(n.size() == 2);
    CHECK(n.events[0] == Event{1, 4});
    CHECK_THROWS_AS(normalize_events({{5, 12}}, 10), DataError);
}

TEST_CASE("container round trip is byte stable and aligned") {
    TensorMap m;
    Tensor a({2, 3});
    for (std::size_t i = 0; i < 6; ++i) a.data[i] = static_cast<float>(i) * 0.5f - 1.0f;
    Tensor b({5});
    b.data = {1e-8f, -3.5f, 7.0f, 0.0f, 42.0f};
    m["z/b"] = b;
    m["a"] = a;
    const std::string bytes = encode_container(m);
    CHECK(bytes.substr(0, 4) == "NTC1");
    const TensorMap back = decode_container(bytes);
    CHECK(back == m);
    CHECK(encode_container(back) == bytes);

    std::uint64_t H = 0;
    for (int i = 0; i < 8; ++i) H |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
    CHECK((16 + H) % 8 == 0);
    const auto header = nlohmann::json::parse(bytes.substr(16, H));
    for (const auto& [name, e] : header.items()) CHECK(e.at("offset").get<std::size_t>() % 8 == 0);
}

TEST_CASE("container rejects damaged input") {
    TensorMap m;
    m["x"] = Tensor({4}, 1.0f);
    std::string bytes = encode_container(m);
    CHECK_THROWS_AS(decode_container("XXXX" + bytes.substr(4)), DataError);
    CHECK_THROWS_AS(decode_container(bytes.substr(0, bytes.size() - 3)), DataError);
    CHECK_THROWS_AS(decode_container(bytes.substr(0, 12)), DataError);
}

TEST_CASE("param store lookups") {
    ParamStore s;
    const auto i = s.add("w", Tensor({2, 2}));
    CHECK(s.index("w") == i);
    CHECK_FALSE(s.find("missing"));
    CHECK_THROWS_AS(s.index("missing"), std::out_of_range);
}
