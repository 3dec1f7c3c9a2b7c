#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "havenet/eval.hpp"
#include "oracles.hpp"

using namespace havenet;

namespace {

struct Fixture {
    Dataset ds;
    SplitSpec split;
    Embedder emb;
    FslTrainConfig fsl;

    Fixture() {
        SynthSpec spec;
        spec.class_count = 6;
        spec.latent_dim = 4;
        spec.samples_per_class = 20;
        spec.d_audio = 6;
        spec.d_visual = 6;
        spec.noise_sigma = 0.05;
        spec.seed = 31;
        ds = generate_synthetic(spec);
        split = split_classes(ds, 3, 7);

        fsl.way = 3;
        fsl.shot = 1;
        fsl.query_per_class = 2;
        fsl.lambda2 = 0.0;
        fsl.n_times = 1;
        fsl.dropout_rate = 0.0;
        fsl.embed_hidden = {8, 4};
        RngStream init(5);
        emb = make_embedder(12, fsl, init);
    }

    EvalContext ctx() const {
        EvalContext c;
        c.dataset = &ds;
        c.split = &split;
        c.embedder = &emb;
        c.fsl = fsl;
        return c;
    }

    Scenario scenario(ScenarioTag tag, std::size_t episodes = 40) const {
        Scenario sc;
        sc.tag = tag;
        sc.way = 3;
        sc.shot = 1;
        sc.query_per_class = 2;
        sc.episode_count = episodes;
        sc.seed = 11;
        return sc;
    }
};

// Identity generator: (source ⊕ z) -> source, so hallucinated features equal
// the conditioning modality exactly.
CmmGan identity_g1_gan(std::size_t d, std::size_t noise_dim) {
    GanTrainConfig cfg;
    cfg.noise_dim = noise_dim;
    cfg.gen_hidden = {4};
    cfg.disc_hidden = {3};
    RngStream rng(1);
    CmmGan gan = make_cmm_gan(d, d, cfg, rng);
    MlpNet id;
    Layer ly;
    ly.weight = Tensor2(d + noise_dim, d);
    for (std::size_t i = 0; i < d; ++i) ly.weight.at(i, i) = 1.0;
    ly.bias = Tensor2(1, d);
    ly.activation = Activation::identity;
    id.layers.push_back(std::move(ly));
    id.zero_grads();
    gan.g1 = id;
    return gan;
}

}  // namespace

TEST_CASE("scenario evaluation") {
    Fixture fx;

    SECTION("an information-free embedder scores exactly chance") {
        // zero weights collapse every embedding; ties resolve to slot 0
        Embedder zero = fx.emb;
        for (auto& ly : zero.net.layers) {
            for (auto& w : ly.weight.data) w = 0.0;
            for (auto& b : ly.bias.data) b = 0.0;
        }
        EvalContext ctx = fx.ctx();
        ctx.embedder = &zero;
        const EvalReport r = run_scenario(ctx, fx.scenario(ScenarioTag::fusion_real));
        REQUIRE_THAT(r.mean_accuracy,
                     Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
        REQUIRE(r.dispersion < 1e-12);
    }
    SECTION("report matches a step-by-step replay of the episode loop") {
        const Scenario sc = fx.scenario(ScenarioTag::fusion_real, 30);
        const EvalReport r = run_scenario(fx.ctx(), sc);

        RngStream master = RngStream(sc.seed).derive("eval-fusion_real");
        std::vector<double> accs;
        for (std::size_t e = 0; e < 30; ++e) {
            RngStream rng = master.derive(std::uint64_t(e));
            const Episode ep = sample_episode(fx.ds, fx.split.novel_classes, 3, 1, 2, rng);
            const Tensor2 support =
                fuse(gather_audio(fx.ds, ep.support), gather_visual(fx.ds, ep.support));
            const Tensor2 query =
                fuse(gather_audio(fx.ds, ep.query), gather_visual(fx.ds, ep.query));
            const PrototypeSet protos =
                compute_prototypes(fx.emb, support, gather_slots(ep.support), 3);
            const Prediction pred = predict(fx.emb, protos, query, 1, rng);
            const std::vector<std::size_t> truth = gather_slots(ep.query);
            std::size_t correct = 0;
            for (std::size_t q = 0; q < truth.size(); ++q)
                if (pred.labels[q] == truth[q]) ++correct;
            accs.push_back(double(correct) / double(truth.size()));
        }
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= double(accs.size());
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        const double se = std::sqrt(var / 29.0) / std::sqrt(30.0);
        REQUIRE(r.mean_accuracy == mean);
        REQUIRE_THAT(r.dispersion, Catch::Matchers::WithinAbs(se, 1e-15));
    }
    SECTION("same seed means byte-identical reports") {
        const Scenario sc = fx.scenario(ScenarioTag::fusion_real);
        const EvalReport a = run_scenario(fx.ctx(), sc);
        const EvalReport b = run_scenario(fx.ctx(), sc);
        REQUIRE(a.mean_accuracy == b.mean_accuracy);
        REQUIRE(a.dispersion == b.dispersion);
        REQUIRE(a.fingerprint == b.fingerprint);
        Scenario other = sc;
        other.seed = 12;
        REQUIRE(run_scenario(fx.ctx(), other).fingerprint != a.fingerprint);
    }
    SECTION("thread pool does not change the result") {
        const Scenario sc = fx.scenario(ScenarioTag::fusion_real);
        EvalContext single = fx.ctx();
        EvalContext pooled = fx.ctx();
        pooled.threads = 3;
        const EvalReport a = run_scenario(single, sc);
        const EvalReport b = run_scenario(pooled, sc);
        REQUIRE(a.mean_accuracy == b.mean_accuracy);
        REQUIRE(a.dispersion == b.dispersion);
    }
    SECTION("an identity generator makes hallucinated fusion match real fusion") {
        // dataset where the two modalities coincide
        Dataset twin = fx.ds;
        for (auto& s : twin.samples) s.visual = s.audio;
        const CmmGan gan = identity_g1_gan(6, 3);
        EvalContext ctx = fx.ctx();
        ctx.dataset = &twin;
        ctx.gan = &gan;
        const EvalReport real = run_scenario(ctx, fx.scenario(ScenarioTag::fusion_real));
        const EvalReport hal =
            run_scenario(ctx, fx.scenario(ScenarioTag::audio_plus_hal_visual));
        REQUIRE(hal.mean_accuracy == real.mean_accuracy);
        REQUIRE(hal.dispersion == real.dispersion);
    }
    SECTION("missing prerequisites are config errors") {
        EvalContext ctx = fx.ctx();
        REQUIRE_THROWS_AS(
            run_scenario(ctx, fx.scenario(ScenarioTag::audio_plus_hal_visual)),
            ConfigError);
        ctx.embedder = nullptr;
        REQUIRE_THROWS_AS(run_scenario(ctx, fx.scenario(ScenarioTag::fusion_real)),
                          ConfigError);
    }
    SECTION("unimodal tags zero the other modality block") {
        // with visual columns zeroed, only audio information remains; verify by
        // replaying one episode through the view
        const FeatureView view =
            eval_detail::fused_view(ScenarioTag::audio_only, nullptr);
        const Tensor2 rows = view(fx.ds, {{0, 0}, {1, 0}});
        REQUIRE(rows.cols == 12);
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 6; ++j)
                REQUIRE(rows.at(i, j) == fx.ds.samples[i].audio[j]);
            for (std::size_t j = 6; j < 12; ++j) REQUIRE(rows.at(i, j) == 0.0);
        }
    }
}

TEST_CASE("cross-modal generalization scenarios") {
    Fixture fx;
    fx.fsl.epochs = 1;
    fx.fsl.episodes_per_epoch = 5;
    const CmmGan gan = identity_g1_gan(6, 3);
    EvalContext ctx = fx.ctx();
    ctx.gan = &gan;

    const EvalReport r =
        run_scenario(ctx, fx.scenario(ScenarioTag::train_real_test_hal, 15));
    REQUIRE(r.scenario == "train_real_test_hal");
    REQUIRE(r.mean_accuracy >= 0.0);
    REQUIRE(r.mean_accuracy <= 1.0);
    REQUIRE(std::isfinite(r.dispersion));

    const EvalReport r2 =
        run_scenario(ctx, fx.scenario(ScenarioTag::train_hal_test_hal, 15));
    REQUIRE(r2.scenario == "train_hal_test_hal");
    REQUIRE(r2.fingerprint != r.fingerprint);
}

TEST_CASE("shot ablation") {
    Fixture fx;
    fx.fsl.epochs = 1;
    fx.fsl.episodes_per_epoch = 5;
    EvalContext ctx = fx.ctx();
    Scenario base = fx.scenario(ScenarioTag::fusion_real, 15);
    base.way = 2;
    base.query_per_class = 2;

    SECTION("one shot value yields one report") {
        const std::vector<EvalReport> reports = shot_ablation(ctx, {1}, base);
        REQUIRE(reports.size() == 1);
        REQUIRE(reports[0].shot == 1);
        REQUIRE(reports[0].scenario == "fusion_real");
    }
    SECTION("each shot gets its own fingerprint and seed") {
        const std::vector<EvalReport> reports = shot_ablation(ctx, {1, 2}, base);
        REQUIRE(reports.size() == 2);
        REQUIRE(reports[0].shot == 1);
        REQUIRE(reports[1].shot == 2);
        REQUIRE(reports[0].fingerprint != reports[1].fingerprint);
    }
    SECTION("empty shot list is rejected") {
        REQUIRE_THROWS_AS(shot_ablation(ctx, {}, base), ConfigError);
    }
}

TEST_CASE("embedding export") {
    Fixture fx;
    const CmmGan gan = identity_g1_gan(6, 3);
    const std::vector<EmbeddingSource> sources{EmbeddingSource::audio,
                                               EmbeddingSource::visual,
                                               EmbeddingSource::hallucinated_visual};
    std::ostringstream out;
    export_embeddings(fx.emb, &gan, fx.ds, sources, out);

    std::istringstream in(out.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "id,label,source,e_0,e_1,e_2,e_3");
    std::size_t rows = 0;
    std::size_t hal_rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::size_t commas = 0;
        for (char c : line) commas += c == ',';
        REQUIRE(commas == 6);
        if (line.find("hallucinated_visual") != std::string::npos) ++hal_rows;
    }
    REQUIRE(rows == 3 * fx.ds.samples.size());
    REQUIRE(hal_rows == fx.ds.samples.size());

    SECTION("export is deterministic") {
        std::ostringstream again;
        export_embeddings(fx.emb, &gan, fx.ds, sources, again);
        REQUIRE(again.str() == out.str());
    }
    SECTION("hallucinated sources require a generator") {
        std::ostringstream sink;
        REQUIRE_THROWS_AS(
            export_embeddings(fx.emb, nullptr, fx.ds,
                              {EmbeddingSource::hallucinated_audio}, sink),
            ConfigError);
    }
}

TEST_CASE("report serialization") {
    EvalReport r;
    r.scenario = "fusion_real";
    r.way = 5;
    r.shot = 1;
    r.query_per_class = 5;
    r.episode_count = 600;
    r.mean_accuracy = 0.625;
    r.dispersion = 0.0125;
    r.fingerprint = "abc123";

    std::ostringstream os;
    write_reports_jsonl({r, r}, os);
    std::istringstream in(os.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const nlohmann::json j = nlohmann::json::parse(line);
        REQUIRE(j.at("scenario") == "fusion_real");
        REQUIRE(j.at("mean_accuracy") == 0.625);
        REQUIRE(j.at("episode_count") == 600);
        ++n;
    }
    REQUIRE(n == 2);

    std::ostringstream table;
    print_report_table({r}, table);
    REQUIRE(table.str().find("fusion_real") != std::string::npos);
    REQUIRE(table.str().find("62.50") != std::string::npos);
}

TEST_CASE("scenario tag names round-trip") {
    for (ScenarioTag t :
         {ScenarioTag::fusion_real, ScenarioTag::audio_plus_hal_visual,
          ScenarioTag::visual_plus_hal_audio, ScenarioTag::audio_only,
          ScenarioTag::visual_only, ScenarioTag::train_real_test_hal,
          ScenarioTag::train_hal_test_hal})
        REQUIRE(scenario_tag_from_string(to_string(t)) == t);
    REQUIRE_THROWS_AS(scenario_tag_from_string("bogus"), ConfigError);
}
