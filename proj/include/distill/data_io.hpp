// Dataset ingestion (UCR archive files, multivariate CSV), synthetic series
// and small persistence helpers.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "distill/core.hpp"
#include "distill/events.hpp"

namespace distill {

// Parsed from `<id>_UCR_Anomaly_<name>_<trainEnd>_<anomStart>_<anomEnd>.<txt|csv>`.
// Indices here are converted to 0-based; anomaly_end is inclusive.
struct UcrMeta {
    std::string id;
    std::string name;
    std::size_t train_end = 0;
    std::size_t anomaly_start = 0;
    std::size_t anomaly_end = 0;
};

struct TrainTest {
    TimeSeriesDataset train;
    TimeSeriesDataset test;
};

struct UcrData {
    UcrMeta meta;
    TimeSeriesDataset train;  // values[0:train_end], unlabeled
    TimeSeriesDataset test;   // values[train_end:L], labels on the anomaly
};

// index_base says whether the filename's anomaly indices count from 0 or 1.
UcrMeta parse_ucr_filename(const std::string& filename, int index_base = 1);
bool looks_like_ucr(const std::filesystem::path& path);
UcrData load_ucr(const std::filesystem::path& path, int index_base = 1);

// Values CSV: header row, one timestep per row, one column per channel.
// Labels CSV: a single 0/1 column aligned by row; a non-numeric first row is a header.
TimeSeriesDataset load_multivariate(const std::filesystem::path& values_csv,
                                    const std::optional<std::filesystem::path>& labels_csv = std::nullopt);
std::vector<std::uint8_t> load_labels(const std::filesystem::path& labels_csv);

void write_values_csv(const std::filesystem::path& path, const Matrix& values);
void write_labels_csv(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

enum class SynthBase { sine, mixed };
enum class AnomalyKind { spike, level_shift, shapelet };

struct SynthAnomaly {
    AnomalyKind kind = AnomalyKind::spike;
    std::size_t start = 0;
    std::size_t len = 1;
    double magnitude = 1.0;
    std::optional<std::size_t> channel;  // all channels when unset
};

// JSON keys: base, L, D, anomalies[{kind, start, len, magnitude, channel?}],
// optional period, noise, train_end and seed.
struct SynthSpec {
    SynthBase base = SynthBase::sine;
    std::size_t length = 1000;
    std::size_t channels = 1;
    double period = 50.0;
    double noise = 0.05;
    std::vector<SynthAnomaly> anomalies;
    std::optional<std::size_t> train_end;  // split point for train/test use
    std::uint64_t seed = 0;
};

SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json synth_spec_to_json(const SynthSpec& spec);
SynthSpec load_synth_spec(const std::filesystem::path& path);

// Labels mark exactly the injected spans. Throws UsageError on out-of-range
// or overlapping anomalies. A magnitude of 0 leaves the signal unchanged.
TimeSeriesDataset synth_dataset(const SynthSpec& spec, Rng& rng);
// Uses spec.seed.
TimeSeriesDataset synth_dataset(const SynthSpec& spec);

// [0, at) as train, [at, L) as test; labels follow the slices.
TrainTest split_dataset(const TimeSeriesDataset& ds, std::size_t at);

// Resolves a data path by kind: "*.json" synthetic spec (split at train_end),
// UCR-named file, or multivariate CSV with optional labels.
TrainTest load_any(const std::filesystem::path& path,
                   const std::optional<std::filesystem::path>& labels = std::nullopt, int index_base = 1);

std::string to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& s);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace distill
