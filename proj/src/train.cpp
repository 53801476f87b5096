#include "distill/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "distill/augment.hpp"
#include "distill/config_io.hpp"
#include "distill/container.hpp"
#include "distill/parallel.hpp"
#include "distill/preprocess.hpp"

namespace distill {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr std::size_t kChunk = 8;  // samples per gradient buffer

// Salts for the sub-streams derived from Config::seed.
enum : std::uint64_t {
    kSaltStudent = 1,
    kSaltBackbone = 2,
    kSaltTeacher = 3,
    kSaltShuffle = 4,
    kSaltSample = 5,
};

std::string format_breakdown(const LossBreakdown& l) {
    std::ostringstream s;
    s << "L_kd=" << l.kd << " L_ce=" << l.ce << " L_cs=" << l.cs << " L_total=" << l.total;
    return s.str();
}

}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::full: return "full";
        case Strategy::nonaug: return "nonaug";
        case Strategy::noct: return "noct";
        case Strategy::wcs: return "wcs";
    }
    return "full";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "full") return Strategy::full;
    if (s == "nonaug") return Strategy::nonaug;
    if (s == "noct") return Strategy::noct;
    if (s == "wcs") return Strategy::wcs;
    throw UsageError("unknown strategy '" + s + "' (expected full|nonaug|noct|wcs)");
}

LossWeights loss_weights(Strategy s, double lambda) {
    LossWeights w;
    w.lambda = lambda;
    w.augmented = s != Strategy::nonaug;
    w.teacher_contrast = s == Strategy::full || s == Strategy::wcs;
    w.student_contrast = s == Strategy::wcs;
    return w;
}

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, const AdamOptions& opt) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& param = params.at(p);
        if (param.frozen || !grads.has(p)) continue;
        auto& m = state.m[p];
        auto& v = state.v[p];
        const auto& g = grads.get(p);
        auto& x = param.value.data;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double gi = g[i];
            m[i] = static_cast<float>(opt.beta1 * m[i] + (1.0 - opt.beta1) * gi);
            v[i] = static_cast<float>(opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi);
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            x[i] = static_cast<float>(x[i] - opt.lr * mh / (std::sqrt(vh) + opt.eps));
        }
    }
}

ModelState ModelState::create(const Config& config, std::size_t channels, Strategy strategy,
                               const Matrix* train_series, const BackboneSpec* backbone) {
    config.validate();
    if (channels < 1) throw UsageError("model needs at least one channel");
    ModelState s;
    s.config = config;
    s.channels = channels;
    s.strategy = strategy;

    Rng root(config.seed);
    Rng student_rng = Rng(mix_seed(config.seed, kSaltStudent));
    add_student_params(s.params, config, channels, train_series, student_rng);

    std::optional<BackboneSpec> surrogate;
    if (!backbone) {
        Rng bb_rng(mix_seed(config.seed, kSaltBackbone));
        surrogate = make_surrogate_backbone(config, bb_rng);
        backbone = &*surrogate;
    }
    Rng teacher_rng(mix_seed(config.seed, kSaltTeacher));
    add_teacher_params(s.params, config, channels, *backbone, teacher_rng);

    s.optim.m.resize(s.params.size());
    s.optim.v.resize(s.params.size());
    for (std::size_t p = 0; p < s.params.size(); ++p) {
        if (s.params.at(p).frozen) continue;
        s.optim.m[p].assign(s.params.at(p).value.numel(), 0.0f);
        s.optim.v[p].assign(s.params.at(p).value.numel(), 0.0f);
    }
    return s;
}

LossBreakdown batch_loss(const ModelState& state, const std::vector<const Matrix*>& windows,
                         const std::vector<std::uint64_t>& seeds, Gradients* grads) {
    if (windows.empty()) throw UsageError("batch_loss: empty batch");
    if (seeds.size() != windows.size()) throw UsageError("batch_loss: one seed per window required");
    const Student student = state.student();
    const Teacher teacher = state.teacher();
    const LossWeights weights = loss_weights(state.strategy, state.config.contrastive_weight);
    const double N = static_cast<double>(windows.size());
    const std::size_t chunks = (windows.size() + kChunk - 1) / kChunk;

    std::vector<LossBreakdown> partial(chunks);
    std::vector<Gradients> chunk_grads;
    if (grads) chunk_grads.assign(chunks, Gradients(state.params));

    parallel_for(chunks, [&](std::size_t ci) {
        const std::size_t lo = ci * kChunk, hi = std::min(windows.size(), lo + kChunk);
        for (std::size_t i = lo; i < hi; ++i) {
            const Matrix& w = *windows[i];
            Rng rng(seeds[i]);
            Rng dropout_rng = rng.derive(1);
            Graph g(state.params);
            const auto z = student.forward(g, w, nullptr, &dropout_rng);
            const auto c = teacher.forward(g, w);
            std::optional<Graph::Node> za, ca;
            if (weights.augmented) {
                const Augmented aug = augment(w, state.config.augmentation, rng);
                za = student.forward(g, aug.window, nullptr, &dropout_rng);
                ca = teacher.forward(g, aug.window);
            }
            static const std::vector<float> none;
            const SampleLoss l = sample_loss(g.value(z).data, g.value(c).data,
                                             za ? g.value(*za).data : none,
                                             ca ? g.value(*ca).data : none, weights, N);
            auto& part = partial[ci];
            part.kd += l.kd;
            part.ce += l.ce;
            part.cs += l.cs;
            part.total += l.total;
            part.count += 1;
            if (grads) {
                g.seed(z, l.dz);
                g.seed(c, l.dc);
                if (za) {
                    g.seed(*za, l.dz_aug);
                    g.seed(*ca, l.dc_aug);
                }
                g.backward(chunk_grads[ci]);
            }
        }
    });

    LossBreakdown sum;
    for (std::size_t ci = 0; ci < chunks; ++ci) {
        sum.kd += partial[ci].kd;
        sum.ce += partial[ci].ce;
        sum.cs += partial[ci].cs;
        sum.total += partial[ci].total;
        sum.count += partial[ci].count;
        if (grads) grads->accumulate(chunk_grads[ci]);
    }
    sum.kd /= N;
    sum.ce /= N;
    sum.cs /= N;
    sum.total /= N;
    return sum;
}

ModelState train(const TimeSeriesDataset& series, const Config& config, Strategy strategy,
                 const TrainOptions& options) {
    config.validate();
    series.validate();
    const WindowBatch data = window(series, config.window_size, config.effective_train_stride());
    if (data.size() == 0) throw DataError("training series yields no windows");

    ModelState state = ModelState::create(config, series.channels(), strategy, &series.values,
                                          options.backbone);
    const AdamOptions adam{config.learning_rate};
    const LossWeights weights = loss_weights(strategy, config.contrastive_weight);

    Rng shuffle_rng(mix_seed(config.seed, kSaltShuffle));
    std::vector<std::size_t> order(data.size());
    std::size_t bad_epochs = 0, steps = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(0, i - 1)]);

        LossBreakdown epoch_loss;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + config.batch_size);
            std::vector<const Matrix*> batch;
            std::vector<std::uint64_t> seeds;
            for (std::size_t i = b0; i < b1; ++i) {
                batch.push_back(&data.windows[order[i]]);
                seeds.push_back(mix_seed(mix_seed(config.seed, kSaltSample), steps * 1000003 + i - b0));
            }
            Gradients grads(state.params);
            const LossBreakdown l = batch_loss(state, batch, seeds, &grads);
            if (!std::isfinite(l.total) || !std::isfinite(l.kd) || !std::isfinite(l.ce) ||
                !std::isfinite(l.cs))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(steps) + ": " + format_breakdown(l));
            adam_step(state.params, grads, state.optim, adam);
            ++steps;
            const double n = static_cast<double>(l.count);
            epoch_loss.kd += l.kd * n;
            epoch_loss.ce += l.ce * n;
            epoch_loss.cs += l.cs * n;
            epoch_loss.total += l.total * n;
            epoch_loss.count += l.count;
            if (options.max_steps && steps >= *options.max_steps) break;
        }
        const double n = static_cast<double>(epoch_loss.count);
        epoch_loss.kd /= n;
        epoch_loss.ce /= n;
        epoch_loss.cs /= n;
        epoch_loss.total /= n;
        state.epoch = epoch + 1;

        if (options.on_epoch)
            options.on_epoch({epoch + 1, epoch_loss, weights.augmented && weights.teacher_contrast,
                              weights.student_contrast});

        if (epoch_loss.total < state.best_loss) {
            state.best_loss = epoch_loss.total;
            bad_epochs = 0;
        } else if (++bad_epochs >= config.patience) {
            break;
        }
        if (options.max_steps && steps >= *options.max_steps) break;
    }
    return state;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".json");
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
    TensorMap tensors;
    for (std::size_t p = 0; p < state.params.size(); ++p) {
        const auto& param = state.params.at(p);
        tensors.emplace(param.name, param.value);
        if (param.frozen) continue;
        Tensor m(param.value.shape), v(param.value.shape);
        m.data = state.optim.m[p];
        v.data = state.optim.v[p];
        tensors.emplace("optim/m/" + param.name, std::move(m));
        tensors.emplace("optim/v/" + param.name, std::move(v));
    }
    write_container(path, tensors);

    nlohmann::json meta = {
        {"format", "distill-tsad-checkpoint"},
        {"version", kCheckpointVersion},
        {"config", config_to_json(state.config)},
        {"channels", state.channels},
        {"strategy", to_string(state.strategy)},
        {"epoch", state.epoch},
        {"best_loss", std::isfinite(state.best_loss) ? nlohmann::json(state.best_loss) : nlohmann::json()},
        {"adam_step", state.optim.step},
    };
    std::ofstream out(sidecar_path(path));
    if (!out) throw DataError("cannot write " + sidecar_path(path).string());
    out << meta.dump(2) << '\n';
}

namespace {

ModelState load_checkpoint_impl(const std::filesystem::path& path, const Config* expected) {
    const auto meta_path = sidecar_path(path);
    std::ifstream in(meta_path);
    if (!in) throw DataError("missing checkpoint sidecar " + meta_path.string());
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(meta_path.string() + ": " + e.what());
    }
    if (meta.value("format", "") != "distill-tsad-checkpoint")
        throw DataError(meta_path.string() + ": not a checkpoint sidecar");
    if (meta.value("version", -1) != kCheckpointVersion)
        throw DataError(meta_path.string() + ": unsupported checkpoint version " +
                        meta.value("version", nlohmann::json()).dump());

    const Config config = expected ? *expected : config_from_json(meta.at("config"));
    const std::size_t channels = meta.at("channels").get<std::size_t>();
    const Strategy strategy = strategy_from_string(meta.at("strategy").get<std::string>());

    TensorMap file = read_container(path);

    // The backbone keeps the table length it was created with.
    TensorMap backbone_tensors;
    const std::string tp = kTeacherPrefix;
    for (const auto& [name, t] : file)
        if (name.rfind(tp + "backbone.", 0) == 0) backbone_tensors.emplace(name.substr(tp.size()), t);
    const BackboneSpec backbone = backbone_from_tensors(std::move(backbone_tensors), config, path.string());

    ModelState state = ModelState::create(config, channels, strategy, nullptr, &backbone);
    std::size_t consumed = 0;
    auto take = [&](const std::string& name, std::vector<float>& dst, const std::vector<std::size_t>& shape) {
        auto it = file.find(name);
        if (it == file.end()) throw DataError(path.string() + ": missing tensor '" + name + "'");
        if (it->second.shape != shape)
            throw DataError(path.string() + ": shape mismatch for '" + name + "': file has " +
                            shape_string(it->second.shape) + ", config requires " + shape_string(shape));
        dst = it->second.data;
        ++consumed;
    };
    for (std::size_t p = 0; p < state.params.size(); ++p) {
        auto& param = state.params.at(p);
        take(param.name, param.value.data, param.value.shape);
        if (param.frozen) continue;
        take("optim/m/" + param.name, state.optim.m[p], param.value.shape);
        take("optim/v/" + param.name, state.optim.v[p], param.value.shape);
    }
    if (consumed != file.size()) {
        std::string extra;
        for (const auto& [name, t] : file)
            if (!state.params.find(name) && name.rfind("optim/", 0) != 0) extra += " " + name;
        throw DataError(path.string() + ": unexpected tensors in checkpoint:" + extra);
    }
    state.epoch = meta.at("epoch").get<std::size_t>();
    state.best_loss = meta.at("best_loss").is_null() ? std::numeric_limits<double>::infinity()
                                                     : meta.at("best_loss").get<double>();
    state.optim.step = meta.at("adam_step").get<std::uint64_t>();
    return state;
}

}  // namespace

ModelState load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_impl(path, nullptr); }

ModelState load_checkpoint(const std::filesystem::path& path, const Config& expected) {
    return load_checkpoint_impl(path, &expected);
}

}  // namespace distill
