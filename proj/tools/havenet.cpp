// Experiment driver: generate data, pretrain the cross-modal GAN, meta-train
// the few-shot classifier, and evaluate the scenario matrix.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "havenet/config.hpp"
#include "havenet/dataset.hpp"
#include "havenet/eval.hpp"
#include "havenet/fewshot.hpp"
#include "havenet/gan.hpp"

namespace fs = std::filesystem;
using namespace havenet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

ExperimentConfig load_experiment(const std::string& path) {
    ExperimentConfig cfg = path.empty() ? validate_config(nlohmann::json::object())
                                        : load_config(path);
    if (const char* env_seed = std::getenv("HVN_SEED")) {
        try {
            cfg.seed = std::stoull(env_seed);
        } catch (const std::exception&) {
            throw ConfigError("HVN_SEED is not an unsigned integer: '" +
                              std::string(env_seed) + "'");
        }
    }
    return cfg;
}

Dataset obtain_dataset(const ExperimentConfig& cfg) {
    if (cfg.use_feature_file) {
        if (cfg.feature_file.size() >= 4 &&
            cfg.feature_file.substr(cfg.feature_file.size() - 4) == ".csv")
            return hvnf::load_csv(cfg.feature_file);
        return hvnf::load(cfg.feature_file);
    }
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.synth_seed();
    return generate_synthetic(spec);
}

SplitSpec obtain_split(const ExperimentConfig& cfg, const Dataset& ds) {
    return split_classes(ds, cfg.novel_count, cfg.split_seed());
}

void do_gen_data(const ExperimentConfig& cfg, const std::string& out) {
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.synth_seed();
    hvnf::save(generate_synthetic(spec), out);
    std::cout << "wrote " << out << "\n";
}

void do_pretrain_gan(const ExperimentConfig& cfg, const std::string& out_dir) {
    const Dataset ds = obtain_dataset(cfg);
    const SplitSpec split = obtain_split(cfg, ds);
    GanTrainConfig gcfg = cfg.gan;
    gcfg.seed = cfg.gan_seed();
    RngStream init_rng = RngStream(gcfg.seed).derive("gan-init");
    CmmGan gan = make_cmm_gan(ds.d_audio, ds.d_visual, gcfg, init_rng);
    const GanCurves curves = pretrain(gan, ds, split, gcfg);
    save_gan(gan, out_dir, gcfg.seed, gcfg.epochs);
    std::ofstream csv(fs::path(out_dir) / "gan_losses.csv");
    if (!csv) throw FormatError("cannot write gan_losses.csv in '" + out_dir + "'", 0);
    curves.write_csv(csv);
    if (!curves.g1_rec.empty())
        std::cout << "gan pretraining done, final g1 rec " << curves.g1_rec.back()
                  << ", g2 rec " << curves.g2_rec.back() << "\n";
}

void do_meta_train(const ExperimentConfig& cfg, const std::string& gan_dir,
                   const std::string& out_dir) {
    const Dataset ds = obtain_dataset(cfg);
    const SplitSpec split = obtain_split(cfg, ds);
    FslTrainConfig fcfg = cfg.fsl;
    fcfg.seed = cfg.fsl_seed();

    CmmGan gan;
    CmmGan* gan_ptr = nullptr;
    if (!gan_dir.empty()) {
        gan = load_gan(gan_dir);
        gan_ptr = &gan;
    } else if (fcfg.joint_gan || fcfg.augment_hallucinated) {
        throw ConfigError("meta-train: joint_gan/augment_hallucinated need --gan");
    }

    RngStream init_rng = RngStream(fcfg.seed).derive("embedder-init");
    Embedder emb = make_embedder(ds.d_audio + ds.d_visual, fcfg, init_rng);
    const TrainHistory history = meta_train(emb, ds, split, fcfg, gan_ptr);
    save_embedder(emb, out_dir, fcfg);
    std::ofstream csv(fs::path(out_dir) / "train_history.csv");
    if (!csv) throw FormatError("cannot write train_history.csv in '" + out_dir + "'", 0);
    history.write_csv(csv);
    if (!history.train_acc.empty())
        std::cout << "meta-training done, final train acc " << history.train_acc.back()
                  << "\n";
}

std::vector<EvalReport> run_config_scenarios(const ExperimentConfig& cfg,
                                             const Dataset& ds, const SplitSpec& split,
                                             const Embedder& emb, const CmmGan* gan,
                                             std::size_t threads) {
    EvalContext ctx;
    ctx.dataset = &ds;
    ctx.split = &split;
    ctx.embedder = &emb;
    ctx.gan = gan;
    ctx.fsl = cfg.fsl;
    ctx.fsl.seed = cfg.fsl_seed();
    ctx.threads = threads;
    std::vector<EvalReport> reports;
    for (ScenarioTag tag : cfg.scenarios) {
        Scenario sc;
        sc.tag = tag;
        sc.way = cfg.fsl.way;
        sc.shot = cfg.fsl.shot;
        sc.query_per_class = cfg.fsl.query_per_class;
        sc.episode_count = cfg.eval_episode_count;
        sc.seed = cfg.eval_seed();
        reports.push_back(run_scenario(ctx, sc));
    }
    return reports;
}

void write_reports(const std::vector<EvalReport>& reports, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write reports to '" + path + "'", 0);
    write_reports_jsonl(reports, os);
    print_report_table(reports, std::cout);
}

void do_eval(const ExperimentConfig& cfg, const std::string& model_dir,
             const std::string& gan_dir, std::size_t threads) {
    const Dataset ds = obtain_dataset(cfg);
    const SplitSpec split = obtain_split(cfg, ds);
    const Embedder emb = load_embedder(model_dir);
    CmmGan gan;
    const CmmGan* gan_ptr = nullptr;
    if (!gan_dir.empty()) {
        gan = load_gan(gan_dir);
        gan_ptr = &gan;
    }
    const auto reports = run_config_scenarios(cfg, ds, split, emb, gan_ptr, threads);
    fs::create_directories(cfg.out_dir);
    write_reports(reports, (fs::path(cfg.out_dir) / "reports.jsonl").string());
}

void do_ablate_shots(const ExperimentConfig& cfg, const std::string& gan_dir,
                     std::size_t threads) {
    const Dataset ds = obtain_dataset(cfg);
    const SplitSpec split = obtain_split(cfg, ds);
    CmmGan gan;
    const CmmGan* gan_ptr = nullptr;
    if (!gan_dir.empty()) {
        gan = load_gan(gan_dir);
        gan_ptr = &gan;
    }
    EvalContext ctx;
    ctx.dataset = &ds;
    ctx.split = &split;
    ctx.gan = gan_ptr;
    ctx.fsl = cfg.fsl;
    ctx.threads = threads;
    Scenario base;
    base.tag = gan_ptr ? ScenarioTag::audio_plus_hal_visual : ScenarioTag::fusion_real;
    base.way = cfg.fsl.way;
    base.query_per_class = cfg.fsl.query_per_class;
    base.episode_count = cfg.eval_episode_count;
    base.seed = cfg.eval_seed();
    const auto reports = shot_ablation(ctx, cfg.ablation_shots, base);
    fs::create_directories(cfg.out_dir);
    write_reports(reports, (fs::path(cfg.out_dir) / "shot_ablation.jsonl").string());
}

void do_export_embeddings(const ExperimentConfig& cfg, const std::string& model_dir,
                          const std::string& gan_dir, const std::string& out) {
    const Dataset ds = obtain_dataset(cfg);
    const Embedder emb = load_embedder(model_dir);
    CmmGan gan;
    const CmmGan* gan_ptr = nullptr;
    std::vector<EmbeddingSource> sources = {EmbeddingSource::audio,
                                            EmbeddingSource::visual};
    if (!gan_dir.empty()) {
        gan = load_gan(gan_dir);
        gan_ptr = &gan;
        sources.push_back(EmbeddingSource::hallucinated_visual);
        sources.push_back(EmbeddingSource::hallucinated_audio);
    }
    std::ofstream os(out);
    if (!os) throw FormatError("cannot write embeddings to '" + out + "'", 0);
    export_embeddings(emb, gan_ptr, ds, sources, os);
    std::cout << "wrote " << out << "\n";
}

void do_run_all(const ExperimentConfig& cfg, std::size_t threads) {
    fs::create_directories(cfg.out_dir);
    const Dataset ds = obtain_dataset(cfg);
    const SplitSpec split = obtain_split(cfg, ds);
    hvnf::save(ds, (fs::path(cfg.out_dir) / "data.hvnf").string());

    GanTrainConfig gcfg = cfg.gan;
    gcfg.seed = cfg.gan_seed();
    RngStream gan_init = RngStream(gcfg.seed).derive("gan-init");
    CmmGan gan = make_cmm_gan(ds.d_audio, ds.d_visual, gcfg, gan_init);
    const GanCurves curves = pretrain(gan, ds, split, gcfg);
    const std::string gan_dir = (fs::path(cfg.out_dir) / "gan").string();
    save_gan(gan, gan_dir, gcfg.seed, gcfg.epochs);
    {
        std::ofstream csv(fs::path(gan_dir) / "gan_losses.csv");
        curves.write_csv(csv);
    }

    FslTrainConfig fcfg = cfg.fsl;
    fcfg.seed = cfg.fsl_seed();
    RngStream emb_init = RngStream(fcfg.seed).derive("embedder-init");
    Embedder emb = make_embedder(ds.d_audio + ds.d_visual, fcfg, emb_init);
    const TrainHistory history = meta_train(emb, ds, split, fcfg, &gan);
    const std::string model_dir = (fs::path(cfg.out_dir) / "model").string();
    save_embedder(emb, model_dir, fcfg);
    {
        std::ofstream csv(fs::path(model_dir) / "train_history.csv");
        history.write_csv(csv);
    }

    const auto reports = run_config_scenarios(cfg, ds, split, emb, &gan, threads);
    write_reports(reports, (fs::path(cfg.out_dir) / "reports.jsonl").string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"audio-visual few-shot pipeline with cross-modal hallucination"};
    app.require_subcommand(1);
    std::size_t threads = 1;
    app.add_option("--threads", threads, "worker threads for evaluation")
        ->capture_default_str();

    std::string config_path, out_path, gan_dir, model_dir;

    auto* gen = app.add_subcommand("gen-data", "write a synthetic feature file");
    gen->add_option("--spec,--config", config_path, "experiment config JSON");
    gen->add_option("--out", out_path, "output .hvnf path")->required();

    auto* pre = app.add_subcommand("pretrain-gan", "pretrain the cross-modal GAN");
    pre->add_option("--config", config_path, "experiment config JSON");
    pre->add_option("--out", out_path, "output directory")->required();

    auto* meta = app.add_subcommand("meta-train", "meta-train the few-shot classifier");
    meta->add_option("--config", config_path, "experiment config JSON");
    meta->add_option("--gan", gan_dir, "pretrained GAN directory");
    meta->add_option("--out", out_path, "output directory")->required();

    auto* ev = app.add_subcommand("eval", "run the configured evaluation scenarios");
    ev->add_option("--config", config_path, "experiment config JSON");
    ev->add_option("--model", model_dir, "trained embedder directory")->required();
    ev->add_option("--gan", gan_dir, "pretrained GAN directory");

    auto* abl = app.add_subcommand("ablate-shots", "train+eval across shot counts");
    abl->add_option("--config", config_path, "experiment config JSON");
    abl->add_option("--gan", gan_dir, "pretrained GAN directory");

    auto* exp = app.add_subcommand("export-embeddings", "dump embeddings as CSV");
    exp->add_option("--config", config_path, "experiment config JSON");
    exp->add_option("--model", model_dir, "trained embedder directory")->required();
    exp->add_option("--gan", gan_dir, "pretrained GAN directory");
    exp->add_option("--out", out_path, "output CSV path")->required();

    auto* all = app.add_subcommand("run-all", "full pipeline: GAN, classifier, eval");
    all->add_option("--config", config_path, "experiment config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitConfig;
    }

    try {
        const ExperimentConfig cfg = load_experiment(config_path);
        if (gen->parsed()) do_gen_data(cfg, out_path);
        if (pre->parsed()) do_pretrain_gan(cfg, out_path);
        if (meta->parsed()) do_meta_train(cfg, gan_dir, out_path);
        if (ev->parsed()) do_eval(cfg, model_dir, gan_dir, threads);
        if (abl->parsed()) do_ablate_shots(cfg, gan_dir, threads);
        if (exp->parsed()) do_export_embeddings(cfg, model_dir, gan_dir, out_path);
        if (all->parsed()) do_run_all(cfg, threads);
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SamplingError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const StateError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}
