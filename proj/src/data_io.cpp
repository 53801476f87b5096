#include "distill/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>

namespace distill {

namespace {

std::optional<double> parse_real(const std::string& raw) {
    std::size_t b = raw.find_first_not_of(" \t\r");
    std::size_t e = raw.find_last_not_of(" \t\r");
    if (b == std::string::npos) return std::nullopt;
    const std::string cell = raw.substr(b, e - b + 1);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

std::size_t parse_index(const std::string& s, const std::string& what, const std::string& file) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw DataError(file + ": malformed " + what + " '" + s + "' in UCR filename");
    return static_cast<std::size_t>(std::stoull(s));
}

TimeSeriesDataset slice(const TimeSeriesDataset& ds, std::size_t from, std::size_t to, Split split) {
    TimeSeriesDataset out;
    out.name = ds.name;
    out.split = split;
    out.values = Matrix(ds.channels(), to - from);
    for (std::size_t c = 0; c < ds.channels(); ++c)
        std::copy(ds.values.row(c) + from, ds.values.row(c) + to, out.values.row(c));
    if (ds.labels)
        out.labels.emplace(ds.labels->begin() + static_cast<std::ptrdiff_t>(from),
                           ds.labels->begin() + static_cast<std::ptrdiff_t>(to));
    return out;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

UcrMeta parse_ucr_filename(const std::string& filename, int index_base) {
    if (index_base != 0 && index_base != 1) throw UsageError("index base must be 0 or 1");
    static const std::regex pattern(R"(^([^_]+)_UCR_Anomaly_(.+)_([^_]+)_([^_]+)_([^_]+)\.(txt|csv)$)");
    std::smatch m;
    if (!std::regex_match(filename, m, pattern))
        throw DataError(filename + ": filename does not match <id>_UCR_Anomaly_<name>_<trainEnd>_<anomStart>_<anomEnd>.txt");
    UcrMeta meta;
    meta.id = m[1];
    meta.name = m[2];
    meta.train_end = parse_index(m[3], "trainEnd", filename);
    const std::size_t s = parse_index(m[4], "anomStart", filename);
    const std::size_t e = parse_index(m[5], "anomEnd", filename);
    if (s < static_cast<std::size_t>(index_base) || e < static_cast<std::size_t>(index_base))
        throw DataError(filename + ": anomaly index below the index base " + std::to_string(index_base));
    meta.anomaly_start = s - static_cast<std::size_t>(index_base);
    meta.anomaly_end = e - static_cast<std::size_t>(index_base);
    return meta;
}

bool looks_like_ucr(const std::filesystem::path& path) {
    return path.filename().string().find("_UCR_Anomaly_") != std::string::npos;
}

UcrData load_ucr(const std::filesystem::path& path, int index_base) {
    const std::string file = path.string();
    UcrData data;
    data.meta = parse_ucr_filename(path.filename().string(), index_base);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + file);

    std::vector<float> values;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        std::stringstream ss(line);
        for (std::string tok; ss >> tok;) {
            const auto v = parse_real(tok);
            if (!v) throw DataError(file + ": line " + std::to_string(lineno) + ": invalid value '" + tok + "'");
            values.push_back(static_cast<float>(*v));
        }
    }
    const std::size_t L = values.size();
    const auto& m = data.meta;
    if (!(m.train_end > 0 && m.train_end < m.anomaly_start && m.anomaly_start <= m.anomaly_end &&
          m.anomaly_end < L))
        throw DataError(file + ": UCR invariant 0 < trainEnd < anomStart <= anomEnd < L violated (trainEnd=" +
                        std::to_string(m.train_end) + ", anomaly=[" + std::to_string(m.anomaly_start) + "," +
                        std::to_string(m.anomaly_end) + "] 0-based, L=" + std::to_string(L) + ")");

    TimeSeriesDataset all;
    all.name = m.id + "_" + m.name;
    all.values = Matrix(1, L);
    all.values.data = std::move(values);
    all.labels.emplace(L, 0);
    std::fill(all.labels->begin() + static_cast<std::ptrdiff_t>(m.anomaly_start),
              all.labels->begin() + static_cast<std::ptrdiff_t>(m.anomaly_end + 1), std::uint8_t{1});
    data.train = slice(all, 0, m.train_end, Split::train);
    data.train.labels.reset();
    data.test = slice(all, m.train_end, L, Split::test);
    return data;
}

std::vector<std::uint8_t> load_labels(const std::filesystem::path& labels_csv) {
    const std::string file = labels_csv.string();
    std::ifstream in(labels_csv);
    if (!in) throw DataError("cannot open " + file);
    std::vector<std::uint8_t> labels;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        strip_cr(line);
        if (blank(line)) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 1)
            throw DataError(file + ": row " + std::to_string(lineno) + ": expected a single label column");
        const auto v = parse_real(cells[0]);
        if (!v) {
            if (lineno == 1) continue;  // header
            throw DataError(file + ": row " + std::to_string(lineno) + ": non-numeric label '" + cells[0] + "'");
        }
        if (*v != 0.0 && *v != 1.0)
            throw DataError(file + ": row " + std::to_string(lineno) + ": label must be 0 or 1");
        labels.push_back(*v != 0.0 ? 1 : 0);
    }
    return labels;
}

TimeSeriesDataset load_multivariate(const std::filesystem::path& values_csv,
                                    const std::optional<std::filesystem::path>& labels_csv) {
    const std::string file = values_csv.string();
    std::ifstream in(values_csv);
    if (!in) throw DataError("cannot open " + file);
    std::string line;
    if (!std::getline(in, line)) throw DataError(file + ": empty file");
    strip_cr(line);
    const auto header = split_csv(line);
    const std::size_t D = header.size();

    std::vector<std::vector<float>> columns(D);
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        strip_cr(line);
        if (blank(line)) continue;
        const auto cells = split_csv(line);
        if (cells.size() != D)
            throw DataError(file + ": row " + std::to_string(lineno) + ": expected " + std::to_string(D) +
                            " columns, found " + std::to_string(cells.size()));
        for (std::size_t c = 0; c < D; ++c) {
            const auto v = parse_real(cells[c]);
            if (!v)
                throw DataError(file + ": row " + std::to_string(lineno) + ", column " + std::to_string(c + 1) +
                                " ('" + header[c] + "'): non-numeric cell '" + cells[c] + "'");
            columns[c].push_back(static_cast<float>(*v));
        }
    }
    const std::size_t L = columns.empty() ? 0 : columns[0].size();
    if (L == 0) throw DataError(file + ": no data rows");

    TimeSeriesDataset ds;
    ds.name = values_csv.stem().string();
    ds.split = Split::test;
    ds.values = Matrix(D, L);
    for (std::size_t c = 0; c < D; ++c) std::copy(columns[c].begin(), columns[c].end(), ds.values.row(c));
    if (labels_csv) {
        auto labels = load_labels(*labels_csv);
        if (labels.size() != L)
            throw DataError(labels_csv->string() + ": " + std::to_string(labels.size()) + " label rows for " +
                            std::to_string(L) + " value rows");
        ds.labels = std::move(labels);
    }
    ds.validate();
    return ds;
}

void write_values_csv(const std::filesystem::path& path, const Matrix& values) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t c = 0; c < values.rows; ++c) out << (c ? "," : "") << "x" << c;
    out << '\n';
    for (std::size_t t = 0; t < values.cols; ++t) {
        for (std::size_t c = 0; c < values.rows; ++c) out << (c ? "," : "") << format_real(values(c, t));
        out << '\n';
    }
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "label\n";
    for (auto v : labels) out << static_cast<int>(v) << '\n';
}

std::string to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::spike: return "spike";
        case AnomalyKind::level_shift: return "level_shift";
        case AnomalyKind::shapelet: return "shapelet";
    }
    return "spike";
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
    if (s == "spike") return AnomalyKind::spike;
    if (s == "level_shift") return AnomalyKind::level_shift;
    if (s == "shapelet") return AnomalyKind::shapelet;
    throw UsageError("unknown anomaly kind '" + s + "' (expected spike|level_shift|shapelet)");
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("synthetic spec must be a JSON object");
    static const std::vector<std::string> known{"base", "L", "D", "period", "noise", "anomalies", "train_end", "seed"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw UsageError("synthetic spec: unknown key '" + key + "'");
    SynthSpec s;
    try {
        const std::string base = j.value("base", "sine");
        if (base == "sine") s.base = SynthBase::sine;
        else if (base == "mixed") s.base = SynthBase::mixed;
        else throw UsageError("synthetic spec: base must be sine or mixed");
        s.length = j.at("L").get<std::size_t>();
        s.channels = j.value("D", std::size_t{1});
        s.period = j.value("period", s.period);
        s.noise = j.value("noise", s.noise);
        s.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("train_end")) s.train_end = j.at("train_end").get<std::size_t>();
        for (const auto& a : j.value("anomalies", nlohmann::json::array())) {
            SynthAnomaly an;
            an.kind = anomaly_kind_from_string(a.at("kind").get<std::string>());
            an.start = a.at("start").get<std::size_t>();
            an.len = a.at("len").get<std::size_t>();
            an.magnitude = a.value("magnitude", 1.0);
            if (a.contains("channel")) an.channel = a.at("channel").get<std::size_t>();
            s.anomalies.push_back(an);
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("synthetic spec: ") + e.what());
    }
    return s;
}

nlohmann::json synth_spec_to_json(const SynthSpec& s) {
    nlohmann::json j = {{"base", s.base == SynthBase::sine ? "sine" : "mixed"},
                        {"L", s.length},
                        {"D", s.channels},
                        {"period", s.period},
                        {"noise", s.noise},
                        {"seed", s.seed}};
    if (s.train_end) j["train_end"] = *s.train_end;
    j["anomalies"] = nlohmann::json::array();
    for (const auto& a : s.anomalies) {
        nlohmann::json o = {{"kind", to_string(a.kind)}, {"start", a.start}, {"len", a.len}, {"magnitude", a.magnitude}};
        if (a.channel) o["channel"] = *a.channel;
        j["anomalies"].push_back(o);
    }
    return j;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return synth_spec_from_json(j);
}

TimeSeriesDataset synth_dataset(const SynthSpec& spec, Rng& rng) {
    if (spec.length < 1 || spec.channels < 1) throw UsageError("synthetic spec: L and D must be positive");
    if (!(spec.period > 0.0) || spec.noise < 0.0) throw UsageError("synthetic spec: period > 0 and noise >= 0 required");
    auto sorted = spec.anomalies;
    for (const auto& a : sorted) {
        if (a.len < 1 || a.start + a.len > spec.length)
            throw UsageError("synthetic anomaly [" + std::to_string(a.start) + "," + std::to_string(a.start + a.len) +
                             ") outside [0," + std::to_string(spec.length) + ")");
        if (a.channel && *a.channel >= spec.channels)
            throw UsageError("synthetic anomaly channel " + std::to_string(*a.channel) + " out of range");
    }
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].start < sorted[i - 1].start + sorted[i - 1].len)
            throw UsageError("synthetic anomalies overlap at t=" + std::to_string(sorted[i].start));

    const double two_pi = 2.0 * std::numbers::pi;
    const std::size_t L = spec.length, D = spec.channels;
    std::vector<double> phase(D), clean(D * L);
    for (std::size_t c = 0; c < D; ++c) phase[c] = rng.uniform(0.0, two_pi);
    for (std::size_t c = 0; c < D; ++c)
        for (std::size_t t = 0; t < L; ++t) {
            const double x = two_pi * static_cast<double>(t) / spec.period + phase[c];
            double v = std::sin(x);
            if (spec.base == SynthBase::mixed) v += 0.5 * std::sin(2.7 * x + 1.0) + 0.3 * std::sin(0.37 * x);
            clean[c * L + t] = v;
        }
    std::vector<double> noise(D * L);
    for (auto& n : noise) n = spec.noise > 0.0 ? rng.normal(0.0, spec.noise) : 0.0;

    std::vector<double> signal = clean;
    for (const auto& a : sorted) {
        for (std::size_t c = 0; c < D; ++c) {
            if (a.channel && *a.channel != c) continue;
            const double centre = static_cast<double>(a.len - 1) / 2.0;
            for (std::size_t k = 0; k < a.len; ++k) {
                const std::size_t t = a.start + k;
                double& v = signal[c * L + t];
                switch (a.kind) {
                    case AnomalyKind::spike:
                        v += a.magnitude * (1.0 - std::abs(static_cast<double>(k) - centre) / (centre + 1.0));
                        break;
                    case AnomalyKind::level_shift:
                        v += a.magnitude;
                        break;
                    case AnomalyKind::shapelet: {
                        const double pattern = std::sin(4.0 * two_pi * static_cast<double>(t) / spec.period + phase[c]);
                        v += a.magnitude * (pattern - clean[c * L + t]);
                        break;
                    }
                }
            }
        }
    }

    TimeSeriesDataset ds;
    ds.name = "synthetic";
    ds.split = Split::test;
    ds.values = Matrix(D, L);
    for (std::size_t i = 0; i < D * L; ++i) ds.values.data[i] = static_cast<float>(signal[i] + noise[i]);
    ds.labels.emplace(L, 0);
    for (const auto& a : sorted)
        std::fill(ds.labels->begin() + static_cast<std::ptrdiff_t>(a.start),
                  ds.labels->begin() + static_cast<std::ptrdiff_t>(a.start + a.len), std::uint8_t{1});
    return ds;
}

TimeSeriesDataset synth_dataset(const SynthSpec& spec) {
    Rng rng(spec.seed);
    return synth_dataset(spec, rng);
}

TrainTest split_dataset(const TimeSeriesDataset& ds, std::size_t at) {
    if (at == 0 || at >= ds.length())
        throw DataError("split point " + std::to_string(at) + " outside (0," + std::to_string(ds.length()) + ")");
    TrainTest tt{slice(ds, 0, at, Split::train), slice(ds, at, ds.length(), Split::test)};
    return tt;
}

TrainTest load_any(const std::filesystem::path& path, const std::optional<std::filesystem::path>& labels,
                   int index_base) {
    if (path.extension() == ".json") {
        const SynthSpec spec = load_synth_spec(path);
        TimeSeriesDataset ds = synth_dataset(spec);
        ds.name = path.stem().string();
        if (spec.train_end) return split_dataset(ds, *spec.train_end);
        TrainTest tt{ds, ds};
        tt.train.split = Split::train;
        return tt;
    }
    if (looks_like_ucr(path)) {
        UcrData u = load_ucr(path, index_base);
        return {std::move(u.train), std::move(u.test)};
    }
    TimeSeriesDataset ds = load_multivariate(path, labels);
    TrainTest tt{ds, ds};
    tt.train.split = Split::train;
    return tt;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace distill
