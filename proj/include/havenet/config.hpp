#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "havenet/dataset.hpp"
#include "havenet/errors.hpp"
#include "havenet/eval.hpp"
#include "havenet/fewshot.hpp"
#include "havenet/gan.hpp"
#include "havenet/rng.hpp"

namespace havenet {

// Whole-experiment configuration. Every field has a default; an empty JSON
// object reproduces the reference hyperparameters end to end.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    // data source: synthetic generation or a feature file
    bool use_feature_file = false;
    std::string feature_file;
    SynthSpec synth;

    std::size_t novel_count = 5;

    GanTrainConfig gan;
    FslTrainConfig fsl;

    std::vector<ScenarioTag> scenarios = {ScenarioTag::fusion_real,
                                          ScenarioTag::audio_plus_hal_visual,
                                          ScenarioTag::visual_plus_hal_audio,
                                          ScenarioTag::audio_only,
                                          ScenarioTag::visual_only};
    std::size_t eval_episode_count = 600;
    std::vector<std::size_t> ablation_shots = {1, 5, 10, 15, 20};

    // derived per-phase seeds so adding a phase never perturbs the others
    std::uint64_t synth_seed() const { return derive_seed("synth-data"); }
    std::uint64_t split_seed() const { return derive_seed("class-split"); }
    std::uint64_t gan_seed() const { return derive_seed("gan-pretrain"); }
    std::uint64_t fsl_seed() const { return derive_seed("meta-train"); }
    std::uint64_t eval_seed() const { return derive_seed("evaluation"); }

private:
    std::uint64_t derive_seed(const std::string& purpose) const {
        return RngStream(seed).derive(purpose).next_u64();
    }
};

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& path) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown field '" + (path.empty() ? key : path + "." + key) +
                              "'");
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field '" + path + "." + key + "' has the wrong type");
    }
}

inline void require_positive(double v, const std::string& path) {
    if (!(v > 0.0)) throw ConfigError("field '" + path + "' must be > 0");
}

inline void require_non_negative(double v, const std::string& path) {
    if (v < 0.0) throw ConfigError("field '" + path + "' must be >= 0");
}

}  // namespace config_detail

inline ExperimentConfig validate_config(const nlohmann::json& raw) {
    using config_detail::check_keys;
    using config_detail::get_or;
    if (!raw.is_object()) throw ConfigError("config root must be a JSON object");
    check_keys(raw, {"seed", "out_dir", "data", "split", "gan", "fsl", "eval"}, "");

    ExperimentConfig cfg;
    cfg.seed = get_or<std::uint64_t>(raw, "seed", "", cfg.seed);
    cfg.out_dir = get_or<std::string>(raw, "out_dir", "", cfg.out_dir);

    if (raw.contains("data")) {
        const auto& d = raw.at("data");
        check_keys(d, {"source", "path", "synth"}, "data");
        const std::string source = get_or<std::string>(d, "source", "data", "synthetic");
        if (source == "file") {
            cfg.use_feature_file = true;
            cfg.feature_file = get_or<std::string>(d, "path", "data", "");
            if (cfg.feature_file.empty())
                throw ConfigError("field 'data.path' required when data.source=file");
        } else if (source != "synthetic") {
            throw ConfigError("field 'data.source' must be 'synthetic' or 'file'");
        }
        if (d.contains("synth")) {
            const auto& s = d.at("synth");
            check_keys(s,
                       {"class_count", "latent_dim", "samples_per_class", "d_audio",
                        "d_visual", "cross_modal_coupling", "noise_sigma"},
                       "data.synth");
            cfg.synth.class_count =
                get_or<std::size_t>(s, "class_count", "data.synth", cfg.synth.class_count);
            cfg.synth.latent_dim =
                get_or<std::size_t>(s, "latent_dim", "data.synth", cfg.synth.latent_dim);
            cfg.synth.samples_per_class = get_or<std::size_t>(
                s, "samples_per_class", "data.synth", cfg.synth.samples_per_class);
            cfg.synth.d_audio =
                get_or<std::size_t>(s, "d_audio", "data.synth", cfg.synth.d_audio);
            cfg.synth.d_visual =
                get_or<std::size_t>(s, "d_visual", "data.synth", cfg.synth.d_visual);
            cfg.synth.cross_modal_coupling =
                get_or<double>(s, "cross_modal_coupling", "data.synth",
                               cfg.synth.cross_modal_coupling);
            cfg.synth.noise_sigma =
                get_or<double>(s, "noise_sigma", "data.synth", cfg.synth.noise_sigma);
            try {
                cfg.synth.validate();
            } catch (const ConfigError& e) {
                throw ConfigError(std::string("data.") + e.what());
            }
        }
    }

    if (raw.contains("split")) {
        const auto& s = raw.at("split");
        check_keys(s, {"novel_count"}, "split");
        cfg.novel_count = get_or<std::size_t>(s, "novel_count", "split", cfg.novel_count);
        if (cfg.novel_count < 1)
            throw ConfigError("field 'split.novel_count' must be >= 1");
    }

    if (raw.contains("gan")) {
        const auto& g = raw.at("gan");
        check_keys(g,
                   {"batch_size", "lr", "epochs", "noise_dim", "lambda1",
                    "condition_on_source", "saturating_generator", "l1_reconstruction",
                    "gen_hidden", "disc_hidden"},
                   "gan");
        cfg.gan.batch_size = get_or<std::size_t>(g, "batch_size", "gan", cfg.gan.batch_size);
        cfg.gan.lr = get_or<double>(g, "lr", "gan", cfg.gan.lr);
        cfg.gan.epochs = get_or<std::size_t>(g, "epochs", "gan", cfg.gan.epochs);
        cfg.gan.noise_dim = get_or<std::size_t>(g, "noise_dim", "gan", cfg.gan.noise_dim);
        cfg.gan.lambda1 = get_or<double>(g, "lambda1", "gan", cfg.gan.lambda1);
        cfg.gan.condition_on_source =
            get_or<bool>(g, "condition_on_source", "gan", cfg.gan.condition_on_source);
        cfg.gan.saturating_generator =
            get_or<bool>(g, "saturating_generator", "gan", cfg.gan.saturating_generator);
        cfg.gan.l1_reconstruction =
            get_or<bool>(g, "l1_reconstruction", "gan", cfg.gan.l1_reconstruction);
        cfg.gan.gen_hidden = get_or<std::vector<std::size_t>>(g, "gen_hidden", "gan",
                                                              cfg.gan.gen_hidden);
        cfg.gan.disc_hidden = get_or<std::vector<std::size_t>>(g, "disc_hidden", "gan",
                                                               cfg.gan.disc_hidden);
        if (cfg.gan.batch_size < 2) throw ConfigError("field 'gan.batch_size' must be >= 2");
        config_detail::require_positive(cfg.gan.lr, "gan.lr");
        config_detail::require_non_negative(cfg.gan.lambda1, "gan.lambda1");
        if (cfg.gan.noise_dim == 0) throw ConfigError("field 'gan.noise_dim' must be >= 1");
    }

    if (raw.contains("fsl")) {
        const auto& f = raw.at("fsl");
        check_keys(f,
                   {"way", "shot", "query_per_class", "lr", "epochs",
                    "episodes_per_epoch", "lambda2", "n_times", "dropout_rate",
                    "embed_hidden", "joint_gan", "augment_hallucinated",
                    "plain_euclidean"},
                   "fsl");
        cfg.fsl.way = get_or<std::size_t>(f, "way", "fsl", cfg.fsl.way);
        cfg.fsl.shot = get_or<std::size_t>(f, "shot", "fsl", cfg.fsl.shot);
        cfg.fsl.query_per_class =
            get_or<std::size_t>(f, "query_per_class", "fsl", cfg.fsl.query_per_class);
        cfg.fsl.lr = get_or<double>(f, "lr", "fsl", cfg.fsl.lr);
        cfg.fsl.epochs = get_or<std::size_t>(f, "epochs", "fsl", cfg.fsl.epochs);
        cfg.fsl.episodes_per_epoch = get_or<std::size_t>(f, "episodes_per_epoch", "fsl",
                                                         cfg.fsl.episodes_per_epoch);
        cfg.fsl.lambda2 = get_or<double>(f, "lambda2", "fsl", cfg.fsl.lambda2);
        cfg.fsl.n_times = get_or<std::size_t>(f, "n_times", "fsl", cfg.fsl.n_times);
        cfg.fsl.dropout_rate =
            get_or<double>(f, "dropout_rate", "fsl", cfg.fsl.dropout_rate);
        cfg.fsl.embed_hidden = get_or<std::vector<std::size_t>>(f, "embed_hidden", "fsl",
                                                                cfg.fsl.embed_hidden);
        cfg.fsl.joint_gan = get_or<bool>(f, "joint_gan", "fsl", cfg.fsl.joint_gan);
        cfg.fsl.augment_hallucinated = get_or<bool>(f, "augment_hallucinated", "fsl",
                                                    cfg.fsl.augment_hallucinated);
        cfg.fsl.plain_euclidean =
            get_or<bool>(f, "plain_euclidean", "fsl", cfg.fsl.plain_euclidean);
        config_detail::require_positive(cfg.fsl.lr, "fsl.lr");
        if (raw.at("fsl").contains("lambda2") && cfg.fsl.lambda2 < 0.0)
            throw ConfigError("field 'fsl.lambda2' must be >= 0");
        try {
            cfg.fsl.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("fsl: ") + e.what());
        }
    }

    if (raw.contains("eval")) {
        const auto& e = raw.at("eval");
        check_keys(e, {"episode_count", "scenarios", "shots"}, "eval");
        cfg.eval_episode_count =
            get_or<std::size_t>(e, "episode_count", "eval", cfg.eval_episode_count);
        if (cfg.eval_episode_count < 1)
            throw ConfigError("field 'eval.episode_count' must be >= 1");
        if (e.contains("scenarios")) {
            cfg.scenarios.clear();
            for (const auto& item : e.at("scenarios"))
                cfg.scenarios.push_back(scenario_tag_from_string(item.get<std::string>()));
            if (cfg.scenarios.empty())
                throw ConfigError("field 'eval.scenarios' must be non-empty");
        }
        cfg.ablation_shots = get_or<std::vector<std::size_t>>(e, "shots", "eval",
                                                              cfg.ablation_shots);
        if (cfg.ablation_shots.empty())
            throw ConfigError("field 'eval.shots' must be non-empty");
    }

    return cfg;
}

inline nlohmann::json serialize_config(const ExperimentConfig& cfg) {
    nlohmann::json scenarios = nlohmann::json::array();
    for (ScenarioTag t : cfg.scenarios) scenarios.push_back(to_string(t));
    nlohmann::json data{{"source", cfg.use_feature_file ? "file" : "synthetic"},
                        {"synth",
                         {{"class_count", cfg.synth.class_count},
                          {"latent_dim", cfg.synth.latent_dim},
                          {"samples_per_class", cfg.synth.samples_per_class},
                          {"d_audio", cfg.synth.d_audio},
                          {"d_visual", cfg.synth.d_visual},
                          {"cross_modal_coupling", cfg.synth.cross_modal_coupling},
                          {"noise_sigma", cfg.synth.noise_sigma}}}};
    if (cfg.use_feature_file) data["path"] = cfg.feature_file;
    return nlohmann::json{
        {"seed", cfg.seed},
        {"out_dir", cfg.out_dir},
        {"data", data},
        {"split", {{"novel_count", cfg.novel_count}}},
        {"gan",
         {{"batch_size", cfg.gan.batch_size},
          {"lr", cfg.gan.lr},
          {"epochs", cfg.gan.epochs},
          {"noise_dim", cfg.gan.noise_dim},
          {"lambda1", cfg.gan.lambda1},
          {"condition_on_source", cfg.gan.condition_on_source},
          {"saturating_generator", cfg.gan.saturating_generator},
          {"l1_reconstruction", cfg.gan.l1_reconstruction},
          {"gen_hidden", cfg.gan.gen_hidden},
          {"disc_hidden", cfg.gan.disc_hidden}}},
        {"fsl",
         {{"way", cfg.fsl.way},
          {"shot", cfg.fsl.shot},
          {"query_per_class", cfg.fsl.query_per_class},
          {"lr", cfg.fsl.lr},
          {"epochs", cfg.fsl.epochs},
          {"episodes_per_epoch", cfg.fsl.episodes_per_epoch},
          {"lambda2", cfg.fsl.lambda2},
          {"n_times", cfg.fsl.n_times},
          {"dropout_rate", cfg.fsl.dropout_rate},
          {"embed_hidden", cfg.fsl.embed_hidden},
          {"joint_gan", cfg.fsl.joint_gan},
          {"augment_hallucinated", cfg.fsl.augment_hallucinated},
          {"plain_euclidean", cfg.fsl.plain_euclidean}}},
        {"eval",
         {{"episode_count", cfg.eval_episode_count},
          {"scenarios", scenarios},
          {"shots", cfg.ablation_shots}}}};
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config '" + path + "'", 0);
    nlohmann::json raw;
    try {
        raw = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("config '" + path + "': " + e.what(), e.byte);
    }
    return validate_config(raw);
}

}  // namespace havenet
