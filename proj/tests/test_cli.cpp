#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "distill/cli.hpp"
#include "distill/config_io.hpp"
#include "distill/data_io.hpp"

using namespace distill;

namespace {

const std::filesystem::path& dir() {
    static const auto d = [] {
        auto p = std::filesystem::temp_directory_path() / "distill_cli";
        std::filesystem::remove_all(p);
        std::filesystem::create_directories(p);
        return p;
    }();
    return d;
}

std::string path(const std::string& name) { return (dir() / name).string(); }

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

// Small model and a short synthetic series with one spike in the test half.
void write_fixtures() {
    static bool done = false;
    if (done) return;
    Config c;
    c.window_size = 16;
    c.patch_size = 4;
    c.patch_stride = 4;
    c.model_dim = 8;
    c.head_count = 2;
    c.student_layers = 1;
    c.teacher_layers = 1;
    c.prototype_count = 4;
    c.feature_dim = 8;
    c.max_positions = 16;
    c.batch_size = 16;
    c.epochs = 5;
    c.train_stride = 8;
    c.score_stride = 4;
    c.learning_rate = 1e-3;
    save_config(c, path("config.json"));
    SynthSpec s;
    s.length = 600;
    s.period = 20;
    s.train_end = 300;
    s.seed = 4;
    s.anomalies = {{AnomalyKind::spike, 420, 6, 3.0, std::nullopt}};
    write_json(path("synth.json"), synth_spec_to_json(s));
    done = true;
}

}  // namespace

TEST_CASE("train writes a checkpoint and one log record per epoch") {
    write_fixtures();
    REQUIRE(run({"train", "--config", path("config.json"), "--synth", path("synth.json"), "--out", path("a.ckpt"),
                 "--seed", "3"}) == kExitOk);
    CHECK(std::filesystem::exists(path("a.ckpt")));
    CHECK(std::filesystem::exists(path("a.ckpt.json")));
    const auto log = lines(path("a.ckpt.log.jsonl"));
    REQUIRE(log.size() == 5);
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto j = nlohmann::json::parse(log[i]);
        CHECK(j.at("epoch") == i + 1);
        CHECK(j.contains("L_kd"));
        CHECK(j.contains("L_ce"));
        CHECK(j.contains("L_total"));
    }

    REQUIRE(run({"train", "--config", path("config.json"), "--synth", path("synth.json"), "--out", path("n.ckpt"),
                 "--strategy", "nonaug", "--epochs", "2"}) == kExitOk);
    const auto nlog = lines(path("n.ckpt.log.jsonl"));
    REQUIRE(nlog.size() == 2);
    CHECK_FALSE(nlohmann::json::parse(nlog[0]).contains("L_ce"));

    REQUIRE(run({"train", "--config", path("config.json"), "--synth", path("synth.json"), "--out", path("b.ckpt"),
                 "--seed", "3"}) == kExitOk);
    CHECK(slurp(path("a.ckpt")) == slurp(path("b.ckpt")));
    CHECK(slurp(path("a.ckpt.json")) == slurp(path("b.ckpt.json")));
}

TEST_CASE("score, plot and eval compose through files") {
    write_fixtures();
    REQUIRE(run({"train", "--config", path("config.json"), "--synth", path("synth.json"), "--out",
                 path("s.ckpt")}) == kExitOk);
    REQUIRE(run({"score", "--ckpt", path("s.ckpt"), "--synth", path("synth.json"), "--out", path("trace.csv"),
                 "--svg", path("plot.svg")}) == kExitOk);
    const auto rows = lines(path("trace.csv"));
    CHECK(rows.size() == 301);  // header plus the 300 test points
    CHECK(rows[0] == "t,score,label");
    const std::string svg = slurp(path("plot.svg"));
    CHECK(svg.find("</svg>") != std::string::npos);

    REQUIRE(run({"eval", "--trace", path("trace.csv"), "--out", path("metrics.json")}) == kExitOk);
    const auto m = nlohmann::json::parse(slurp(path("metrics.json")));
    for (const char* k : {"AP", "AR", "AF1", "accuracy", "threshold"}) CHECK(m.contains(k));

    // A plain-vs-adjusted run differs only in the point metrics.
    REQUIRE(run({"eval", "--trace", path("trace.csv"), "--point-adjust", "--out", path("adj.json")}) == kExitOk);
    const auto a = nlohmann::json::parse(slurp(path("adj.json")));
    CHECK(a.at("adjusted") == true);
    for (const char* k : {"AP", "AR", "AF1", "accuracy", "threshold", "predicted_points"}) CHECK(a.at(k) == m.at(k));

    CHECK(run({"score", "--ckpt", path("missing.ckpt"), "--synth", path("synth.json"), "--out",
               path("t2.csv")}) == kExitData);
}

TEST_CASE("eval of hand-written traces") {
    {
        std::ofstream out(path("perfect.csv"));
        out << "t,score,label\n";
        for (int t = 0; t < 100; ++t) out << t << ',' << (t >= 40 && t < 45 ? 9 : 0) << ',' << (t >= 40 && t < 45) << '\n';
    }
    REQUIRE(run({"eval", "--trace", path("perfect.csv"), "--quantile", "0.9", "--out", path("p.json")}) == kExitOk);
    const auto p = nlohmann::json::parse(slurp(path("p.json")));
    CHECK(p.at("AF1").get<double>() == 1.0);
    CHECK(p.at("AP_undefined") == false);
    {
        std::ofstream out(path("flat.csv"));
        out << "t,score,label\n";
        for (int t = 0; t < 100; ++t) out << t << ",1," << (t == 50) << '\n';
    }
    REQUIRE(run({"eval", "--trace", path("flat.csv"), "--out", path("f.json")}) == kExitOk);
    CHECK(nlohmann::json::parse(slurp(path("f.json"))).at("AP_undefined") == true);
    {
        std::ofstream out(path("broken.csv"));
        out << "t,score\n0,1\n5,2\n";
    }
    CHECK(run({"eval", "--trace", path("broken.csv"), "--truth", path("perfect.csv")}) == kExitData);
}

TEST_CASE("sweep records one row per value and flags failures") {
    write_fixtures();
    REQUIRE(run({"sweep", "--config", path("config.json"), "--synth", path("synth.json"), "--param", "prototypes",
                 "--values", "2", "4", "--out", path("sweep.csv")}) == kExitOk);
    const auto rows = lines(path("sweep.csv"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "param,value,Acc,AP,AR,AF1,status");
    CHECK(rows[1].rfind("prototypes,2,", 0) == 0);
    CHECK(rows[2].substr(rows[2].size() - 3) == ",ok");

    std::string err;
    REQUIRE(run({"sweep", "--config", path("config.json"), "--synth", path("synth.json"), "--param", "window",
                 "--values", "2", "16", "--out", path("sweep2.csv")},
                &err) == kExitOk);
    const auto rows2 = lines(path("sweep2.csv"));
    REQUIRE(rows2.size() == 3);
    CHECK(rows2[1].find(",failed: ") != std::string::npos);
    CHECK(rows2[2].substr(rows2[2].size() - 3) == ",ok");
    CHECK(err.find("failed") != std::string::npos);
}

TEST_CASE("synth command and exit codes") {
    write_fixtures();
    REQUIRE(run({"synth", "--spec", path("synth.json"), "--out", path("v.csv"), "--labels", path("l.csv")}) ==
            kExitOk);
    CHECK(lines(path("v.csv")).size() == 601);
    CHECK(lines(path("l.csv")).size() == 601);
    CHECK(run({}) == kExitUsage);
    CHECK(run({"train", "--synth", path("synth.json")}) == kExitUsage);  // --out missing
    CHECK(run({"train", "--synth", path("synth.json"), "--out", path("x.ckpt"), "--strategy", "bogus"}) ==
          kExitUsage);
    CHECK(run({"train", "--data", path("nope.csv"), "--out", path("x.ckpt")}) == kExitData);
}
