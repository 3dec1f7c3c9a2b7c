#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "havenet/adam.hpp"
#include "havenet/checkpoint.hpp"
#include "havenet/dataset.hpp"
#include "havenet/errors.hpp"
#include "havenet/mlp.hpp"
#include "havenet/rng.hpp"
#include "havenet/tensor.hpp"

namespace havenet {

enum class HallucMode { stochastic, mean };

// audio_to_visual drives G1/D1, visual_to_audio drives G2/D2.
enum class GanDirection { audio_to_visual, visual_to_audio };

struct GanTrainConfig {
    std::size_t batch_size = 128;
    double lr = 1e-4;
    std::size_t epochs = 40;
    std::size_t noise_dim = 64;
    double lambda1 = 1.0;
    std::uint64_t seed = 0;
    // D sees the candidate concatenated with the conditioning source feature.
    bool condition_on_source = true;
    // min log(1-D) instead of the non-saturating -log D generator objective.
    bool saturating_generator = false;
    // L1 reconstruction instead of squared L2.
    bool l1_reconstruction = false;
    std::vector<std::size_t> gen_hidden = {512, 512};
    std::vector<std::size_t> disc_hidden = {512};

    void validate() const {
        if (batch_size < 2) throw ConfigError("gan.batch_size must be >= 2");
        if (lr <= 0.0) throw ConfigError("gan.lr must be > 0");
        if (noise_dim == 0) throw ConfigError("gan.noise_dim must be >= 1");
        if (lambda1 < 0.0) throw ConfigError("gan.lambda1 must be >= 0");
        if (gen_hidden.empty() || disc_hidden.empty())
            throw ConfigError("gan hidden layer lists must be non-empty");
    }
};

// Paired cross-modal generators/discriminators. G maps (source ⊕ z) to the
// other modality; D scores (candidate ⊕ conditioning source) with a sigmoid.
struct CmmGan {
    MlpNet g1, d1;  // audio -> visual
    MlpNet g2, d2;  // visual -> audio
    std::size_t d_audio = 0;
    std::size_t d_visual = 0;
    std::size_t noise_dim = 0;
    double lambda1 = 1.0;
    bool condition_on_source = true;
    bool saturating_generator = false;
    bool l1_reconstruction = false;

    MlpNet& generator(GanDirection dir) {
        return dir == GanDirection::audio_to_visual ? g1 : g2;
    }
    MlpNet& discriminator(GanDirection dir) {
        return dir == GanDirection::audio_to_visual ? d1 : d2;
    }
    const MlpNet& generator(GanDirection dir) const {
        return dir == GanDirection::audio_to_visual ? g1 : g2;
    }
    const MlpNet& discriminator(GanDirection dir) const {
        return dir == GanDirection::audio_to_visual ? d1 : d2;
    }
    std::size_t source_dim(GanDirection dir) const {
        return dir == GanDirection::audio_to_visual ? d_audio : d_visual;
    }
    std::size_t target_dim(GanDirection dir) const {
        return dir == GanDirection::audio_to_visual ? d_visual : d_audio;
    }
};

inline CmmGan make_cmm_gan(std::size_t d_audio, std::size_t d_visual,
                           const GanTrainConfig& cfg, RngStream& rng) {
    cfg.validate();
    CmmGan gan;
    gan.d_audio = d_audio;
    gan.d_visual = d_visual;
    gan.noise_dim = cfg.noise_dim;
    gan.lambda1 = cfg.lambda1;
    gan.condition_on_source = cfg.condition_on_source;
    gan.saturating_generator = cfg.saturating_generator;
    gan.l1_reconstruction = cfg.l1_reconstruction;

    auto build_gen = [&](std::size_t src, std::size_t dst) {
        std::vector<std::size_t> sizes{src + cfg.noise_dim};
        sizes.insert(sizes.end(), cfg.gen_hidden.begin(), cfg.gen_hidden.end());
        sizes.push_back(dst);
        std::vector<Activation> acts(sizes.size() - 1, Activation::relu);
        acts.back() = Activation::identity;
        return make_mlp(sizes, acts, rng);
    };
    auto build_disc = [&](std::size_t candidate, std::size_t cond) {
        std::vector<std::size_t> sizes{candidate + cond};
        sizes.insert(sizes.end(), cfg.disc_hidden.begin(), cfg.disc_hidden.end());
        sizes.push_back(1);
        std::vector<Activation> acts(sizes.size() - 1, Activation::relu);
        acts.back() = Activation::sigmoid;
        return make_mlp(sizes, acts, rng);
    };
    gan.g1 = build_gen(d_audio, d_visual);
    gan.d1 = build_disc(d_visual, d_audio);
    gan.g2 = build_gen(d_visual, d_audio);
    gan.d2 = build_disc(d_audio, d_visual);
    return gan;
}

namespace gan_detail {

constexpr double kLogClamp = 1e-7;

inline double clamped(double p) {
    if (p < kLogClamp) return kLogClamp;
    if (p > 1.0 - kLogClamp) return 1.0 - kLogClamp;
    return p;
}

// d/dp of log(clamped(p)); zero where the clamp is active.
inline double d_log_clamped(double p) {
    return (p <= kLogClamp || p >= 1.0 - kLogClamp) ? 0.0 : 1.0 / p;
}

inline Tensor2 gen_input(const Tensor2& source, std::size_t noise_dim, RngStream* rng) {
    Tensor2 z(source.rows, noise_dim);
    if (rng)
        for (auto& v : z.data) v = rng->normal();
    return concat_rows(source, z);
}

inline Tensor2 disc_input(const CmmGan& gan, const Tensor2& candidate,
                          const Tensor2& cond) {
    if (gan.condition_on_source) return concat_rows(candidate, cond);
    // unconditional variant keeps D's fixed width; the cond slot reads zero
    return concat_rows(candidate, Tensor2(cond.rows, cond.cols));
}

}  // namespace gan_detail

inline Tensor2 hallucinate(const CmmGan& gan, GanDirection dir, const Tensor2& source,
                           RngStream& rng, HallucMode mode) {
    if (source.cols != gan.source_dim(dir))
        throw DimensionError("hallucinate: source " + source.shape_str() +
                             " does not match modality dim " +
                             std::to_string(gan.source_dim(dir)));
    Tensor2 in = gan_detail::gen_input(source, gan.noise_dim,
                                       mode == HallucMode::stochastic ? &rng : nullptr);
    return forward(gan.generator(dir), in, ForwardMode::eval).output();
}

// Binary cross-entropy over a real batch and a freshly hallucinated fake batch.
// The fake pass is detached: no generator gradients accumulate.
inline double discriminator_loss(CmmGan& gan, GanDirection dir,
                                 const Tensor2& real_target, const Tensor2& cond_source,
                                 RngStream& rng, bool with_grads = false) {
    if (real_target.rows != cond_source.rows)
        throw DimensionError("discriminator_loss: batch rows differ, " +
                             real_target.shape_str() + " vs " + cond_source.shape_str());
    MlpNet& d = gan.discriminator(dir);
    const Tensor2 fake = hallucinate(gan, dir, cond_source, rng, HallucMode::stochastic);

    const Tensor2 real_in = gan_detail::disc_input(gan, real_target, cond_source);
    const Tensor2 fake_in = gan_detail::disc_input(gan, fake, cond_source);
    Tape real_tape = forward(d, real_in, ForwardMode::eval);
    Tape fake_tape = forward(d, fake_in, ForwardMode::eval);

    const std::size_t n = real_target.rows;
    double loss = 0.0;
    Tensor2 real_grad(n, 1), fake_grad(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double pr = real_tape.output().at(i, 0);
        const double pf = fake_tape.output().at(i, 0);
        loss += -std::log(gan_detail::clamped(pr)) -
                std::log(gan_detail::clamped(1.0 - pf));
        real_grad.at(i, 0) = -gan_detail::d_log_clamped(pr) / double(n);
        fake_grad.at(i, 0) = gan_detail::d_log_clamped(1.0 - pf) / double(n);
    }
    loss /= double(n);
    if (with_grads) {
        backward(d, real_tape, real_grad);
        backward(d, fake_tape, fake_grad);
    }
    return loss;
}

struct GeneratorLoss {
    double adversarial = 0.0;
    double reconstruction = 0.0;
    double total = 0.0;
};

// Non-saturating adversarial term plus reconstruction against the paired real
// target. Gradients (when requested) accumulate into the generator only; the
// discriminator is read through but left untouched.
inline GeneratorLoss generator_loss(CmmGan& gan, GanDirection dir,
                                    const Tensor2& cond_source,
                                    const Tensor2& real_target, RngStream& rng,
                                    bool with_grads = false) {
    if (real_target.rows != cond_source.rows)
        throw DimensionError("generator_loss: batch rows differ, " +
                             real_target.shape_str() + " vs " + cond_source.shape_str());
    MlpNet& g = gan.generator(dir);
    MlpNet& d = gan.discriminator(dir);

    Tensor2 gin = gan_detail::gen_input(cond_source, gan.noise_dim, &rng);
    Tape g_tape = forward(g, gin, ForwardMode::eval);
    const Tensor2& fake = g_tape.output();
    check_same_shape(fake, real_target, "generator_loss reconstruction");

    Tape d_tape = forward(d, gan_detail::disc_input(gan, fake, cond_source),
                          ForwardMode::eval);

    const std::size_t n = cond_source.rows;
    const std::size_t dim = real_target.cols;
    GeneratorLoss out;
    Tensor2 d_out_grad(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = d_tape.output().at(i, 0);
        if (gan.saturating_generator) {
            out.adversarial += std::log(gan_detail::clamped(1.0 - p));
            d_out_grad.at(i, 0) = -gan_detail::d_log_clamped(1.0 - p) / double(n);
        } else {
            out.adversarial += -std::log(gan_detail::clamped(p));
            d_out_grad.at(i, 0) = -gan_detail::d_log_clamped(p) / double(n);
        }
    }
    out.adversarial /= double(n);

    Tensor2 rec_grad(n, dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            const double diff = fake.at(i, j) - real_target.at(i, j);
            if (gan.l1_reconstruction) {
                out.reconstruction += std::fabs(diff);
                rec_grad.at(i, j) = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) /
                                    double(n * dim);
            } else {
                out.reconstruction += diff * diff;
                rec_grad.at(i, j) = 2.0 * diff / double(n * dim);
            }
        }
    out.reconstruction /= double(n * dim);
    out.total = out.adversarial + gan.lambda1 * out.reconstruction;

    if (with_grads) {
        // adversarial grad reaches the fake through D without touching D's params
        Tensor2 d_in_grad = backward(d, d_tape, d_out_grad, /*accumulate=*/false);
        Tensor2 fake_grad = slice_cols(d_in_grad, 0, dim);
        axpy(fake_grad, gan.lambda1, rec_grad);
        backward(g, g_tape, fake_grad);
    }
    return out;
}

struct GanCurves {
    std::vector<double> d1, g1_adv, g1_rec, d2, g2_adv, g2_rec;

    void write_csv(std::ostream& os) const {
        os << "epoch,d1,g1_adv,g1_rec,d2,g2_adv,g2_rec\n";
        for (std::size_t e = 0; e < d1.size(); ++e)
            os << e << ',' << d1[e] << ',' << g1_adv[e] << ',' << g1_rec[e] << ','
               << d2[e] << ',' << g2_adv[e] << ',' << g2_rec[e] << '\n';
    }
};

// Alternating pretraining over base-class pairs: one D step then one G step per
// minibatch, both directions every batch.
inline GanCurves pretrain(CmmGan& gan, const Dataset& ds, const SplitSpec& split,
                          const GanTrainConfig& cfg) {
    cfg.validate();
    if (split.base_classes.empty()) throw ConfigError("pretrain: base split is empty");

    std::vector<std::size_t> pool;
    for (int cls : split.base_classes)
        for (std::size_t idx : ds.by_class[std::size_t(cls)]) pool.push_back(idx);
    if (pool.size() < 2) throw ConfigError("pretrain: base split has < 2 samples");

    RngStream master = RngStream(cfg.seed).derive("gan-pretrain");
    AdamState opt_g1 = AdamState::for_net(gan.g1, cfg.lr);
    AdamState opt_d1 = AdamState::for_net(gan.d1, cfg.lr);
    AdamState opt_g2 = AdamState::for_net(gan.g2, cfg.lr);
    AdamState opt_d2 = AdamState::for_net(gan.d2, cfg.lr);

    GanCurves curves;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream erng = master.derive(std::uint64_t(epoch));
        std::vector<std::size_t> order = pool;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[erng.uniform_below(i)]);

        double sum_d1 = 0, sum_g1a = 0, sum_g1r = 0, sum_d2 = 0, sum_g2a = 0,
               sum_g2r = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start + 2 <= order.size();
             start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            std::vector<std::pair<std::size_t, std::size_t>> refs;
            for (std::size_t i = start; i < end; ++i) refs.emplace_back(order[i], 0);
            const Tensor2 audio = gather_audio(ds, refs);
            const Tensor2 visual = gather_visual(ds, refs);

            auto step_direction = [&](GanDirection dir, const Tensor2& cond,
                                      const Tensor2& target, AdamState& opt_d,
                                      AdamState& opt_g, double& acc_d, double& acc_adv,
                                      double& acc_rec) {
                MlpNet& d = gan.discriminator(dir);
                MlpNet& g = gan.generator(dir);
                d.zero_grads();
                acc_d += discriminator_loss(gan, dir, target, cond, erng, true);
                adam_step(opt_d, d);
                g.zero_grads();
                const GeneratorLoss gl =
                    generator_loss(gan, dir, cond, target, erng, true);
                adam_step(opt_g, g);
                acc_adv += gl.adversarial;
                acc_rec += gl.reconstruction;
            };
            step_direction(GanDirection::audio_to_visual, audio, visual, opt_d1,
                           opt_g1, sum_d1, sum_g1a, sum_g1r);
            step_direction(GanDirection::visual_to_audio, visual, audio, opt_d2,
                           opt_g2, sum_d2, sum_g2a, sum_g2r);
            ++batches;
        }
        const double inv = batches ? 1.0 / double(batches) : 0.0;
        curves.d1.push_back(sum_d1 * inv);
        curves.g1_adv.push_back(sum_g1a * inv);
        curves.g1_rec.push_back(sum_g1r * inv);
        curves.d2.push_back(sum_d2 * inv);
        curves.g2_adv.push_back(sum_g2a * inv);
        curves.g2_rec.push_back(sum_g2r * inv);
    }
    return curves;
}

// ---------------------------------------------------------------------------
// Persistence: four checkpoints + a JSON manifest in one directory
// ---------------------------------------------------------------------------

inline void save_gan(const CmmGan& gan, const std::string& dir,
                     std::uint64_t seed = 0, std::size_t epochs = 0) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    ckpt::save_net(gan.g1, (fs::path(dir) / "g1.hvnc").string());
    ckpt::save_net(gan.d1, (fs::path(dir) / "d1.hvnc").string());
    ckpt::save_net(gan.g2, (fs::path(dir) / "g2.hvnc").string());
    ckpt::save_net(gan.d2, (fs::path(dir) / "d2.hvnc").string());
    nlohmann::json manifest{{"noise_dim", gan.noise_dim},
                            {"d_audio", gan.d_audio},
                            {"d_visual", gan.d_visual},
                            {"lambda1", gan.lambda1},
                            {"condition_on_source", gan.condition_on_source},
                            {"saturating_generator", gan.saturating_generator},
                            {"l1_reconstruction", gan.l1_reconstruction},
                            {"seed", seed},
                            {"epochs", epochs}};
    std::ofstream os(fs::path(dir) / "gan_manifest.json");
    if (!os) throw FormatError("cannot write gan manifest in '" + dir + "'", 0);
    os << manifest.dump(2) << '\n';
}

inline CmmGan load_gan(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream ms(fs::path(dir) / "gan_manifest.json");
    if (!ms) throw FormatError("cannot open gan manifest in '" + dir + "'", 0);
    nlohmann::json manifest = nlohmann::json::parse(ms);
    CmmGan gan;
    gan.noise_dim = manifest.at("noise_dim").get<std::size_t>();
    gan.d_audio = manifest.at("d_audio").get<std::size_t>();
    gan.d_visual = manifest.at("d_visual").get<std::size_t>();
    gan.lambda1 = manifest.at("lambda1").get<double>();
    gan.condition_on_source = manifest.at("condition_on_source").get<bool>();
    gan.saturating_generator = manifest.at("saturating_generator").get<bool>();
    gan.l1_reconstruction = manifest.at("l1_reconstruction").get<bool>();
    gan.g1 = ckpt::load_net((fs::path(dir) / "g1.hvnc").string());
    gan.d1 = ckpt::load_net((fs::path(dir) / "d1.hvnc").string());
    gan.g2 = ckpt::load_net((fs::path(dir) / "g2.hvnc").string());
    gan.d2 = ckpt::load_net((fs::path(dir) / "d2.hvnc").string());
    return gan;
}

}  // namespace havenet
