#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "havenet/dataset.hpp"
#include "havenet/errors.hpp"
#include "havenet/fewshot.hpp"
#include "havenet/gan.hpp"
#include "havenet/rng.hpp"

namespace havenet {

enum class ScenarioTag {
    fusion_real,
    audio_plus_hal_visual,
    visual_plus_hal_audio,
    audio_only,
    visual_only,
    train_real_test_hal,
    train_hal_test_hal,
};

inline const char* to_string(ScenarioTag tag) {
    switch (tag) {
        case ScenarioTag::fusion_real: return "fusion_real";
        case ScenarioTag::audio_plus_hal_visual: return "audio_plus_hal_visual";
        case ScenarioTag::visual_plus_hal_audio: return "visual_plus_hal_audio";
        case ScenarioTag::audio_only: return "audio_only";
        case ScenarioTag::visual_only: return "visual_only";
        case ScenarioTag::train_real_test_hal: return "train_real_test_hal";
        case ScenarioTag::train_hal_test_hal: return "train_hal_test_hal";
    }
    return "?";
}

inline ScenarioTag scenario_tag_from_string(const std::string& s) {
    for (ScenarioTag t :
         {ScenarioTag::fusion_real, ScenarioTag::audio_plus_hal_visual,
          ScenarioTag::visual_plus_hal_audio, ScenarioTag::audio_only,
          ScenarioTag::visual_only, ScenarioTag::train_real_test_hal,
          ScenarioTag::train_hal_test_hal})
        if (s == to_string(t)) return t;
    throw ConfigError("unknown scenario tag '" + s + "'");
}

struct Scenario {
    ScenarioTag tag = ScenarioTag::fusion_real;
    std::size_t way = 5;
    std::size_t shot = 1;
    std::size_t query_per_class = 5;
    std::size_t episode_count = 600;
    std::uint64_t seed = 0;
};

struct EvalReport {
    std::string scenario;
    std::size_t way = 0;
    std::size_t shot = 0;
    std::size_t query_per_class = 0;
    std::size_t episode_count = 0;
    double mean_accuracy = 0.0;
    double dispersion = 0.0;  // std error over episode accuracies
    std::string fingerprint;

    nlohmann::json to_json() const {
        return nlohmann::json{{"scenario", scenario},
                              {"way", way},
                              {"shot", shot},
                              {"query_per_class", query_per_class},
                              {"episode_count", episode_count},
                              {"mean_accuracy", mean_accuracy},
                              {"dispersion", dispersion},
                              {"fingerprint", fingerprint}};
    }
};

struct EvalContext {
    const Dataset* dataset = nullptr;
    const SplitSpec* split = nullptr;
    const Embedder* embedder = nullptr;  // fused-width model, shared by fused tags
    const CmmGan* gan = nullptr;
    FslTrainConfig fsl;
    std::size_t threads = 1;
};

namespace eval_detail {

inline bool needs_gan(ScenarioTag tag) {
    return tag != ScenarioTag::fusion_real && tag != ScenarioTag::audio_only &&
           tag != ScenarioTag::visual_only;
}

inline bool is_cross_scenario(ScenarioTag tag) {
    return tag == ScenarioTag::train_real_test_hal ||
           tag == ScenarioTag::train_hal_test_hal;
}

// Row builders for the fused tags. Hallucination is mean-mode so evaluation
// stays deterministic.
inline FeatureView fused_view(ScenarioTag tag, const CmmGan* gan) {
    switch (tag) {
        case ScenarioTag::fusion_real:
            return fused_real_view();
        case ScenarioTag::audio_plus_hal_visual:
            return [gan](const Dataset& ds,
                         const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
                RngStream unused(0);
                const Tensor2 a = gather_audio(ds, refs);
                return fuse(a, hallucinate(*gan, GanDirection::audio_to_visual, a,
                                           unused, HallucMode::mean));
            };
        case ScenarioTag::visual_plus_hal_audio:
            // hallucinated audio fills the audio column slots so the fused
            // checkpoint's column order is preserved
            return [gan](const Dataset& ds,
                         const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
                RngStream unused(0);
                const Tensor2 v = gather_visual(ds, refs);
                return fuse(hallucinate(*gan, GanDirection::visual_to_audio, v, unused,
                                        HallucMode::mean),
                            v);
            };
        case ScenarioTag::audio_only:
            return [](const Dataset& ds,
                      const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
                const Tensor2 a = gather_audio(ds, refs);
                return fuse(a, Tensor2(a.rows, ds.d_visual));
            };
        case ScenarioTag::visual_only:
            return [](const Dataset& ds,
                      const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
                const Tensor2 v = gather_visual(ds, refs);
                return fuse(Tensor2(v.rows, ds.d_audio), v);
            };
        default:
            throw ConfigError("fused_view: not a fused tag");
    }
}

inline FeatureView real_visual_view() {
    return [](const Dataset& ds,
              const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
        return gather_visual(ds, refs);
    };
}

inline FeatureView hal_visual_view(const CmmGan* gan) {
    return [gan](const Dataset& ds,
                 const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
        RngStream unused(0);
        return hallucinate(*gan, GanDirection::audio_to_visual, gather_audio(ds, refs),
                           unused, HallucMode::mean);
    };
}

inline std::string fingerprint(const Scenario& sc, const FslTrainConfig& fsl,
                               const CmmGan* gan) {
    std::ostringstream os;
    os << to_string(sc.tag) << '|' << sc.way << '|' << sc.shot << '|'
       << sc.query_per_class << '|' << sc.episode_count << '|' << sc.seed << '|'
       << fsl.way << '|' << fsl.shot << '|' << fsl.query_per_class << '|' << fsl.lr
       << '|' << fsl.epochs << '|' << fsl.episodes_per_epoch << '|' << fsl.lambda2
       << '|' << fsl.n_times << '|' << fsl.dropout_rate << '|' << fsl.seed << '|'
       << fsl.joint_gan << '|' << fsl.augment_hallucinated << '|'
       << fsl.plain_euclidean;
    if (gan) os << "|gan:" << gan->noise_dim << ':' << gan->lambda1;
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0')
        << detail::fnv1a(os.str());
    return hex.str();
}

// Episodic accuracy of one embedder/view pairing over novel classes.
inline EvalReport evaluate_view(const Embedder& emb, const EvalContext& ctx,
                                const Scenario& sc, const FeatureView& view) {
    const Dataset& ds = *ctx.dataset;
    FslTrainConfig probe = ctx.fsl;
    probe.way = sc.way;
    probe.shot = sc.shot;
    probe.query_per_class = sc.query_per_class;
    const std::set<int> novel = feasible_classes(ds, ctx.split->novel_classes, probe);

    RngStream master = RngStream(sc.seed).derive(std::string("eval-") + to_string(sc.tag));
    std::vector<double> accuracies(sc.episode_count, 0.0);
    // each episode owns an index-derived rng stream, so the work splits across
    // threads without changing any result; aggregation reads in index order
    auto run_episode = [&](std::size_t e) {
        RngStream rng = master.derive(std::uint64_t(e));
        const Episode ep =
            sample_episode(ds, novel, sc.way, sc.shot, sc.query_per_class, rng);
        for (int cls : ep.class_of_slot)
            if (!ctx.split->novel_classes.count(cls))
                throw StateError("evaluation episode drew non-novel class " +
                                 std::to_string(cls));
        const Tensor2 support = view(ds, ep.support);
        const Tensor2 query = view(ds, ep.query);
        const PrototypeSet protos =
            compute_prototypes(emb, support, gather_slots(ep.support), sc.way,
                               ep.class_of_slot);
        const Prediction pred = predict(emb, protos, query, ctx.fsl.n_times, rng,
                                        ctx.fsl.plain_euclidean);
        const std::vector<std::size_t> truth = gather_slots(ep.query);
        std::size_t correct = 0;
        for (std::size_t q = 0; q < truth.size(); ++q)
            if (pred.labels[q] == truth[q]) ++correct;
        accuracies[e] = double(correct) / double(truth.size());
    };
    const std::size_t workers = std::max<std::size_t>(1, ctx.threads);
    if (workers == 1) {
        for (std::size_t e = 0; e < sc.episode_count; ++e) run_episode(e);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        std::mutex err_mutex;
        std::exception_ptr first_error;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t e = next.fetch_add(1); e < sc.episode_count;
                     e = next.fetch_add(1)) {
                    try {
                        run_episode(e);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(err_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    double mean = 0.0;
    for (double a : accuracies) mean += a;
    mean /= double(accuracies.size());
    double var = 0.0;
    for (double a : accuracies) var += (a - mean) * (a - mean);
    const double stderr_acc =
        accuracies.size() > 1
            ? std::sqrt(var / double(accuracies.size() - 1)) /
                  std::sqrt(double(accuracies.size()))
            : 0.0;

    EvalReport report;
    report.scenario = to_string(sc.tag);
    report.way = sc.way;
    report.shot = sc.shot;
    report.query_per_class = sc.query_per_class;
    report.episode_count = sc.episode_count;
    report.mean_accuracy = mean;
    report.dispersion = stderr_acc;
    report.fingerprint = fingerprint(sc, ctx.fsl, ctx.gan);
    return report;
}

}  // namespace eval_detail

// Meta-test one scenario on the novel split. Fused tags reuse the shared
// embedder; the cross-scenario tags train their own unimodal-width embedder
// as their protocol requires.
inline EvalReport run_scenario(const EvalContext& ctx, const Scenario& sc) {
    if (!ctx.dataset || !ctx.split) throw ConfigError("run_scenario: missing dataset/split");
    if (eval_detail::needs_gan(sc.tag) && ctx.gan == nullptr)
        throw ConfigError(std::string("scenario ") + to_string(sc.tag) +
                          " needs a trained GAN");

    if (!eval_detail::is_cross_scenario(sc.tag)) {
        if (ctx.embedder == nullptr)
            throw ConfigError("run_scenario: missing trained embedder");
        return eval_detail::evaluate_view(*ctx.embedder, ctx, sc,
                                          eval_detail::fused_view(sc.tag, ctx.gan));
    }

    // cross scenarios: dedicated embedder over visual-width features
    FslTrainConfig cfg = ctx.fsl;
    cfg.way = sc.way;
    cfg.shot = sc.shot;
    cfg.query_per_class = sc.query_per_class;
    cfg.seed = RngStream(sc.seed)
                   .derive(std::string("cross-train-") + to_string(sc.tag))
                   .next_u64();
    const FeatureView train_view = sc.tag == ScenarioTag::train_real_test_hal
                                       ? eval_detail::real_visual_view()
                                       : eval_detail::hal_visual_view(ctx.gan);
    RngStream init_rng = RngStream(cfg.seed).derive("embedder-init");
    Embedder emb = make_embedder(ctx.dataset->d_visual, cfg, init_rng);
    meta_train(emb, *ctx.dataset, *ctx.split, cfg, nullptr, train_view);
    return eval_detail::evaluate_view(emb, ctx, sc,
                                      eval_detail::hal_visual_view(ctx.gan));
}

// One full train+eval per shot value; per-shot seeds derive from the base
// scenario's seed so the list composition never changes any single run.
inline std::vector<EvalReport> shot_ablation(const EvalContext& ctx,
                                             const std::vector<std::size_t>& shots,
                                             const Scenario& base) {
    if (shots.empty()) throw ConfigError("shot_ablation: empty shot list");
    std::vector<EvalReport> reports;
    for (std::size_t shot : shots) {
        FslTrainConfig cfg = ctx.fsl;
        cfg.shot = shot;
        cfg.way = base.way;
        cfg.query_per_class = base.query_per_class;
        cfg.seed = RngStream(base.seed)
                       .derive("ablate-shot-" + std::to_string(shot))
                       .next_u64();
        feasible_classes(*ctx.dataset, ctx.split->base_classes, cfg);

        RngStream init_rng = RngStream(cfg.seed).derive("embedder-init");
        Embedder emb =
            make_embedder(ctx.dataset->d_audio + ctx.dataset->d_visual, cfg, init_rng);
        meta_train(emb, *ctx.dataset, *ctx.split, cfg);

        Scenario sc = base;
        sc.shot = shot;
        sc.seed = cfg.seed;
        EvalContext sub = ctx;
        sub.embedder = &emb;
        sub.fsl = cfg;
        reports.push_back(run_scenario(sub, sc));
    }
    return reports;
}

enum class EmbeddingSource { audio, visual, hallucinated_visual, hallucinated_audio };

inline const char* to_string(EmbeddingSource s) {
    switch (s) {
        case EmbeddingSource::audio: return "audio";
        case EmbeddingSource::visual: return "visual";
        case EmbeddingSource::hallucinated_visual: return "hallucinated_visual";
        case EmbeddingSource::hallucinated_audio: return "hallucinated_audio";
    }
    return "?";
}

// Embeds every sample once per requested source and writes CSV rows
// {sample id, label, source, embedding coordinates}. Hallucinations are
// mean-mode; the export is fully deterministic.
inline void export_embeddings(const Embedder& emb, const CmmGan* gan, const Dataset& ds,
                              const std::vector<EmbeddingSource>& sources,
                              std::ostream& os) {
    os << "id,label,source";
    for (std::size_t j = 0; j < emb.embed_dim; ++j) os << ",e_" << j;
    os << '\n';
    os << std::setprecision(17);

    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) all.emplace_back(i, 0);
    RngStream unused(0);
    for (EmbeddingSource src : sources) {
        Tensor2 fused;
        switch (src) {
            case EmbeddingSource::audio:
                fused = fuse(gather_audio(ds, all), Tensor2(all.size(), ds.d_visual));
                break;
            case EmbeddingSource::visual:
                fused = fuse(Tensor2(all.size(), ds.d_audio), gather_visual(ds, all));
                break;
            case EmbeddingSource::hallucinated_visual:
                if (!gan) throw ConfigError("export: hallucinated source needs a GAN");
                fused = fuse(Tensor2(all.size(), ds.d_audio),
                             hallucinate(*gan, GanDirection::audio_to_visual,
                                         gather_audio(ds, all), unused, HallucMode::mean));
                break;
            case EmbeddingSource::hallucinated_audio:
                if (!gan) throw ConfigError("export: hallucinated source needs a GAN");
                fused = fuse(hallucinate(*gan, GanDirection::visual_to_audio,
                                         gather_visual(ds, all), unused, HallucMode::mean),
                             Tensor2(all.size(), ds.d_visual));
                break;
        }
        const Tensor2 embeddings = forward(emb.net, fused, ForwardMode::eval).output();
        for (std::size_t i = 0; i < all.size(); ++i) {
            os << i << ',' << ds.samples[i].label << ',' << to_string(src);
            for (std::size_t j = 0; j < emb.embed_dim; ++j)
                os << ',' << embeddings.at(i, j);
            os << '\n';
        }
    }
}

inline void write_reports_jsonl(const std::vector<EvalReport>& reports,
                                std::ostream& os) {
    for (const auto& r : reports) os << r.to_json().dump() << '\n';
}

inline void print_report_table(const std::vector<EvalReport>& reports,
                               std::ostream& os) {
    os << std::left << std::setw(26) << "scenario" << std::setw(6) << "way"
       << std::setw(6) << "shot" << std::setw(10) << "episodes" << "accuracy\n";
    for (const auto& r : reports) {
        std::ostringstream acc;
        acc << std::fixed << std::setprecision(2) << r.mean_accuracy * 100.0 << " +/- "
            << r.dispersion * 100.0;
        os << std::left << std::setw(26) << r.scenario << std::setw(6) << r.way
           << std::setw(6) << r.shot << std::setw(10) << r.episode_count << acc.str()
           << '\n';
    }
}

}  // namespace havenet
