#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "havenet/gan.hpp"
#include "oracles.hpp"

using namespace havenet;

namespace {

GanTrainConfig tiny_cfg() {
    GanTrainConfig cfg;
    cfg.batch_size = 4;
    cfg.noise_dim = 2;
    cfg.gen_hidden = {5};
    cfg.disc_hidden = {4};
    cfg.seed = 7;
    return cfg;
}

CmmGan tiny_gan(std::uint64_t seed = 3, std::size_t d_audio = 3,
                std::size_t d_visual = 2) {
    RngStream rng(seed);
    return make_cmm_gan(d_audio, d_visual, tiny_cfg(), rng);
}

Tensor2 random_batch(std::size_t n, std::size_t d, RngStream& rng) {
    Tensor2 t(n, d);
    for (auto& v : t.data) v = rng.normal();
    return t;
}

// Replays the exact noise draws of a stochastic generator pass: gen_input
// fills the z block row-major from the stream.
oracles::Mat oracle_fake(const CmmGan& gan, GanDirection dir, const Tensor2& source,
                         RngStream rng_clone) {
    oracles::Mat fakes;
    oracles::Mat z(source.rows, oracles::Vec(gan.noise_dim));
    for (std::size_t i = 0; i < source.rows; ++i)
        for (std::size_t j = 0; j < gan.noise_dim; ++j) z[i][j] = rng_clone.normal();
    const oracles::Mat src = oracles::to_mat(source);
    for (std::size_t i = 0; i < source.rows; ++i)
        fakes.push_back(
            oracles::mlp_forward_row(gan.generator(dir), oracles::concat(src[i], z[i])));
    return fakes;
}

double max_abs_grad(const MlpNet& net) {
    double m = 0.0;
    for (const auto& g : net.grads) {
        for (double v : g.weight.data) m = std::max(m, std::fabs(v));
        for (double v : g.bias.data) m = std::max(m, std::fabs(v));
    }
    return m;
}

std::vector<double*> param_ptrs(MlpNet& net) {
    std::vector<double*> p;
    for (auto& ly : net.layers) {
        for (auto& v : ly.weight.data) p.push_back(&v);
        for (auto& v : ly.bias.data) p.push_back(&v);
    }
    return p;
}

std::vector<double> grad_values(const MlpNet& net) {
    std::vector<double> g;
    for (const auto& lg : net.grads) {
        for (double v : lg.weight.data) g.push_back(v);
        for (double v : lg.bias.data) g.push_back(v);
    }
    return g;
}

}  // namespace

TEST_CASE("hallucinate") {
    CmmGan gan = tiny_gan();
    RngStream data_rng(11);
    const Tensor2 audio = random_batch(4, 3, data_rng);

    SECTION("output shape follows the target modality") {
        RngStream rng(1);
        const Tensor2 vis = hallucinate(gan, GanDirection::audio_to_visual, audio, rng,
                                        HallucMode::stochastic);
        REQUIRE(vis.rows == 4);
        REQUIRE(vis.cols == 2);
        const Tensor2 visual = random_batch(4, 2, data_rng);
        const Tensor2 aud = hallucinate(gan, GanDirection::visual_to_audio, visual, rng,
                                        HallucMode::stochastic);
        REQUIRE(aud.cols == 3);
    }
    SECTION("mean mode ignores the rng entirely") {
        RngStream a(1), b(999);
        const Tensor2 x = hallucinate(gan, GanDirection::audio_to_visual, audio, a,
                                      HallucMode::mean);
        const Tensor2 y = hallucinate(gan, GanDirection::audio_to_visual, audio, b,
                                      HallucMode::mean);
        REQUIRE(x.data == y.data);
    }
    SECTION("stochastic pass matches a scalar replay of the same stream") {
        RngStream rng(42);
        RngStream clone = rng;
        const Tensor2 vis = hallucinate(gan, GanDirection::audio_to_visual, audio, rng,
                                        HallucMode::stochastic);
        const oracles::Mat expect =
            oracle_fake(gan, GanDirection::audio_to_visual, audio, clone);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                REQUIRE_THAT(vis.at(i, j),
                             Catch::Matchers::WithinAbs(expect[i][j], 1e-12));
    }
    SECTION("zeroed last layer collapses to the bias row") {
        auto& last = gan.g1.layers.back();
        for (auto& w : last.weight.data) w = 0.0;
        last.bias.at(0, 0) = 1.5;
        last.bias.at(0, 1) = -2.0;
        RngStream rng(5);
        const Tensor2 vis = hallucinate(gan, GanDirection::audio_to_visual, audio, rng,
                                        HallucMode::stochastic);
        for (std::size_t i = 0; i < 4; ++i) {
            REQUIRE(vis.at(i, 0) == 1.5);
            REQUIRE(vis.at(i, 1) == -2.0);
        }
    }
    SECTION("wrong source width is rejected") {
        RngStream rng(1);
        const Tensor2 bad(2, 5);
        REQUIRE_THROWS_AS(hallucinate(gan, GanDirection::audio_to_visual, bad, rng,
                                      HallucMode::mean),
                          DimensionError);
    }
}

TEST_CASE("discriminator objective") {
    CmmGan gan = tiny_gan();
    RngStream data_rng(13);
    const Tensor2 audio = random_batch(5, 3, data_rng);
    const Tensor2 visual = random_batch(5, 2, data_rng);

    SECTION("an indifferent discriminator scores 2 ln 2") {
        for (auto& ly : gan.d1.layers) {
            for (auto& w : ly.weight.data) w = 0.0;
            for (auto& b : ly.bias.data) b = 0.0;
        }
        RngStream rng(3);
        const double loss =
            discriminator_loss(gan, GanDirection::audio_to_visual, visual, audio, rng);
        REQUIRE_THAT(loss, Catch::Matchers::WithinAbs(2.0 * std::log(2.0), 1e-12));
    }
    SECTION("a perfect discriminator drives the loss to the clamp floor") {
        // constant fake at 0, constant real at 2, D = sigmoid(40*cand - 40)
        CmmGan g = tiny_gan(3, 1, 1);
        for (auto& ly : g.g1.layers) {
            for (auto& w : ly.weight.data) w = 0.0;
            for (auto& b : ly.bias.data) b = 0.0;
        }
        RngStream init(9);
        g.d1 = make_mlp({2, 1}, {Activation::sigmoid}, init);
        g.d1.layers[0].weight.at(0, 0) = 40.0;
        g.d1.layers[0].weight.at(1, 0) = 0.0;
        g.d1.layers[0].bias.at(0, 0) = -40.0;
        Tensor2 real(3, 1), cond(3, 1);
        for (auto& v : real.data) v = 2.0;
        for (auto& v : cond.data) v = 1.0;
        RngStream rng(4);
        const double loss =
            discriminator_loss(g, GanDirection::audio_to_visual, real, cond, rng);
        REQUIRE(loss < 1e-6);
    }
    SECTION("matches the scalar oracle for both directions") {
        for (GanDirection dir :
             {GanDirection::audio_to_visual, GanDirection::visual_to_audio}) {
            const Tensor2& cond = dir == GanDirection::audio_to_visual ? audio : visual;
            const Tensor2& real = dir == GanDirection::audio_to_visual ? visual : audio;
            RngStream rng(21);
            RngStream clone = rng;
            const double loss = discriminator_loss(gan, dir, real, cond, rng);

            const oracles::Mat fake = oracle_fake(gan, dir, cond, clone);
            const oracles::Mat cond_m = oracles::to_mat(cond);
            const oracles::Mat real_m = oracles::to_mat(real);
            oracles::Mat real_in, fake_in;
            for (std::size_t i = 0; i < 5; ++i) {
                real_in.push_back(oracles::concat(real_m[i], cond_m[i]));
                fake_in.push_back(oracles::concat(fake[i], cond_m[i]));
            }
            const double expect =
                oracles::disc_loss(gan.discriminator(dir), real_in, fake_in);
            REQUIRE_THAT(loss, Catch::Matchers::WithinAbs(expect, 1e-10));
        }
    }
    SECTION("unconditional mode zero-fills the conditioning slot") {
        gan.condition_on_source = false;
        RngStream rng(21);
        RngStream clone = rng;
        const double loss =
            discriminator_loss(gan, GanDirection::audio_to_visual, visual, audio, rng);
        const oracles::Mat fake =
            oracle_fake(gan, GanDirection::audio_to_visual, audio, clone);
        const oracles::Vec zeros(3, 0.0);
        const oracles::Mat real_m = oracles::to_mat(visual);
        oracles::Mat real_in, fake_in;
        for (std::size_t i = 0; i < 5; ++i) {
            real_in.push_back(oracles::concat(real_m[i], zeros));
            fake_in.push_back(oracles::concat(fake[i], zeros));
        }
        const double expect = oracles::disc_loss(gan.d1, real_in, fake_in);
        REQUIRE_THAT(loss, Catch::Matchers::WithinAbs(expect, 1e-10));
    }
    SECTION("generator parameters never receive gradients") {
        gan.g1.zero_grads();
        gan.d1.zero_grads();
        RngStream rng(8);
        discriminator_loss(gan, GanDirection::audio_to_visual, visual, audio, rng, true);
        REQUIRE(max_abs_grad(gan.d1) > 0.0);
        REQUIRE(max_abs_grad(gan.g1) == 0.0);
    }
    SECTION("gradients agree with central differences") {
        auto eval = [&]() {
            RngStream rng(77);
            return discriminator_loss(gan, GanDirection::visual_to_audio, audio, visual,
                                      rng, false);
        };
        gan.d2.zero_grads();
        {
            RngStream rng(77);
            discriminator_loss(gan, GanDirection::visual_to_audio, audio, visual, rng,
                               true);
        }
        const std::vector<double> analytic = grad_values(gan.d2);
        std::vector<double*> params = param_ptrs(gan.d2);
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = *params[i];
            *params[i] = saved + h;
            const double up = eval();
            *params[i] = saved - h;
            const double dn = eval();
            *params[i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            REQUIRE_THAT(analytic[i], Catch::Matchers::WithinAbs(fd, 1e-5));
        }
    }
}

TEST_CASE("generator objective") {
    CmmGan gan = tiny_gan();
    RngStream data_rng(17);
    const Tensor2 audio = random_batch(5, 3, data_rng);
    const Tensor2 visual = random_batch(5, 2, data_rng);

    SECTION("matches the scalar oracle, both variants of the adversarial term") {
        for (bool saturating : {false, true}) {
            gan.saturating_generator = saturating;
            RngStream rng(31);
            RngStream clone = rng;
            const GeneratorLoss gl = generator_loss(gan, GanDirection::audio_to_visual,
                                                    audio, visual, rng);
            const oracles::Mat fake =
                oracle_fake(gan, GanDirection::audio_to_visual, audio, clone);
            const oracles::Mat cond_m = oracles::to_mat(audio);
            oracles::Mat fake_in;
            for (std::size_t i = 0; i < 5; ++i)
                fake_in.push_back(oracles::concat(fake[i], cond_m[i]));
            const oracles::GenLossParts expect = oracles::gen_loss(
                gan.d1, fake_in, fake, oracles::to_mat(visual), saturating);
            REQUIRE_THAT(gl.adversarial, Catch::Matchers::WithinAbs(expect.adv, 1e-10));
            REQUIRE_THAT(gl.reconstruction,
                         Catch::Matchers::WithinAbs(expect.rec, 1e-10));
            REQUIRE_THAT(gl.total, Catch::Matchers::WithinAbs(
                                       expect.adv + gan.lambda1 * expect.rec, 1e-10));
        }
    }
    SECTION("reconstruction weight scales the total") {
        gan.lambda1 = 2.5;
        RngStream rng(31);
        const GeneratorLoss gl =
            generator_loss(gan, GanDirection::audio_to_visual, audio, visual, rng);
        REQUIRE_THAT(gl.total, Catch::Matchers::WithinAbs(
                                   gl.adversarial + 2.5 * gl.reconstruction, 1e-12));
    }
    SECTION("reconstruction vanishes exactly when fake equals target") {
        CmmGan g = tiny_gan(3, 1, 1);
        for (auto& ly : g.g1.layers)
            for (auto& w : ly.weight.data) w = 0.0;
        g.g1.layers.back().bias.at(0, 0) = 4.0;
        Tensor2 cond(3, 1), target(3, 1);
        for (auto& v : cond.data) v = 1.0;
        for (auto& v : target.data) v = 4.0;
        RngStream rng(2);
        REQUIRE(generator_loss(g, GanDirection::audio_to_visual, cond, target, rng)
                    .reconstruction == 0.0);
        for (auto& v : target.data) v = 5.0;
        RngStream rng2(2);
        REQUIRE_THAT(generator_loss(g, GanDirection::audio_to_visual, cond, target, rng2)
                         .reconstruction,
                     Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("discriminator parameters never receive gradients") {
        gan.g1.zero_grads();
        gan.d1.zero_grads();
        RngStream rng(9);
        generator_loss(gan, GanDirection::audio_to_visual, audio, visual, rng, true);
        REQUIRE(max_abs_grad(gan.g1) > 0.0);
        REQUIRE(max_abs_grad(gan.d1) == 0.0);
    }
    SECTION("gradients agree with central differences") {
        auto eval = [&]() {
            RngStream rng(55);
            return generator_loss(gan, GanDirection::audio_to_visual, audio, visual, rng,
                                  false)
                .total;
        };
        gan.g1.zero_grads();
        {
            RngStream rng(55);
            generator_loss(gan, GanDirection::audio_to_visual, audio, visual, rng, true);
        }
        const std::vector<double> analytic = grad_values(gan.g1);
        std::vector<double*> params = param_ptrs(gan.g1);
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = *params[i];
            *params[i] = saved + h;
            const double up = eval();
            *params[i] = saved - h;
            const double dn = eval();
            *params[i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double scale = std::max(std::fabs(fd), 1.0);
            REQUIRE_THAT(analytic[i], Catch::Matchers::WithinAbs(fd, 1e-5 * scale));
        }
    }
}

TEST_CASE("pretraining loop") {
    SynthSpec spec;
    spec.class_count = 3;
    spec.latent_dim = 3;
    spec.samples_per_class = 12;
    spec.d_audio = 3;
    spec.d_visual = 2;
    spec.seed = 5;
    const Dataset ds = generate_synthetic(spec);
    const SplitSpec split = split_classes(ds, 1, 1);
    GanTrainConfig cfg = tiny_cfg();
    cfg.epochs = 2;

    SECTION("zero epochs leave the networks untouched") {
        CmmGan gan = tiny_gan();
        const std::vector<double> before = gan.g1.layers[0].weight.data;
        GanTrainConfig zero = cfg;
        zero.epochs = 0;
        const GanCurves curves = pretrain(gan, ds, split, zero);
        REQUIRE(curves.d1.empty());
        REQUIRE(gan.g1.layers[0].weight.data == before);
    }
    SECTION("training is deterministic in the config seed") {
        CmmGan a = tiny_gan();
        CmmGan b = tiny_gan();
        const GanCurves ca = pretrain(a, ds, split, cfg);
        const GanCurves cb = pretrain(b, ds, split, cfg);
        REQUIRE(ca.d1 == cb.d1);
        REQUIRE(ca.g1_rec == cb.g1_rec);
        for (std::size_t l = 0; l < a.g1.layers.size(); ++l)
            REQUIRE(a.g1.layers[l].weight.data == b.g1.layers[l].weight.data);
        REQUIRE(ca.d1.size() == 2);
        REQUIRE(ca.g2_adv.size() == 2);
    }
    SECTION("training moves every network") {
        CmmGan gan = tiny_gan();
        const CmmGan before = gan;
        pretrain(gan, ds, split, cfg);
        REQUIRE(gan.g1.layers[0].weight.data != before.g1.layers[0].weight.data);
        REQUIRE(gan.d1.layers[0].weight.data != before.d1.layers[0].weight.data);
        REQUIRE(gan.g2.layers[0].weight.data != before.g2.layers[0].weight.data);
        REQUIRE(gan.d2.layers[0].weight.data != before.d2.layers[0].weight.data);
    }
    SECTION("empty base split is rejected") {
        CmmGan gan = tiny_gan();
        SplitSpec none;
        none.novel_classes = {0, 1, 2};
        REQUIRE_THROWS_AS(pretrain(gan, ds, none, cfg), ConfigError);
    }
}

TEST_CASE("gan persistence") {
    CmmGan gan = tiny_gan(99);
    gan.lambda1 = 0.5;
    gan.saturating_generator = true;
    const std::string dir = "gan_ckpt_test";
    save_gan(gan, dir, 123, 4);
    const CmmGan back = load_gan(dir);
    REQUIRE(back.d_audio == gan.d_audio);
    REQUIRE(back.d_visual == gan.d_visual);
    REQUIRE(back.noise_dim == gan.noise_dim);
    REQUIRE(back.lambda1 == 0.5);
    REQUIRE(back.saturating_generator);
    for (std::size_t l = 0; l < gan.g1.layers.size(); ++l) {
        REQUIRE(back.g1.layers[l].weight.data == gan.g1.layers[l].weight.data);
        REQUIRE(back.g1.layers[l].bias.data == gan.g1.layers[l].bias.data);
    }
    REQUIRE(back.d2.layers[0].weight.data == gan.d2.layers[0].weight.data);
    std::filesystem::remove_all(dir);
}
